#pragma once

// Tiny arithmetic-expression parser used for metric coefficients, level-set
// functions and user symbols.  Grammar: + - * / ^, parentheses, numeric
// literals, identifiers bound at evaluation time, and the functions
// sin, cos, exp, sqrt, plus abs/tanh for bump construction.

#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace gcckit::expr {

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class Node {
 public:
  virtual ~Node() = default;
  virtual double eval(const std::map<std::string, double>& env) const = 0;
};

using NodePtr = std::shared_ptr<const Node>;

namespace detail {

class Constant final : public Node {
 public:
  explicit Constant(double v) : v_(v) {}
  double eval(const std::map<std::string, double>&) const override { return v_; }

 private:
  double v_;
};

class Variable final : public Node {
 public:
  explicit Variable(std::string name) : name_(std::move(name)) {}
  double eval(const std::map<std::string, double>& env) const override {
    auto it = env.find(name_);
    if (it == env.end()) throw ParseError("unbound identifier: " + name_);
    return it->second;
  }

 private:
  std::string name_;
};

class Binary final : public Node {
 public:
  Binary(char op, NodePtr a, NodePtr b) : op_(op), a_(std::move(a)), b_(std::move(b)) {}
  double eval(const std::map<std::string, double>& env) const override {
    const double x = a_->eval(env);
    const double y = b_->eval(env);
    switch (op_) {
      case '+': return x + y;
      case '-': return x - y;
      case '*': return x * y;
      case '/': return x / y;
      case '^': return std::pow(x, y);
    }
    throw ParseError("bad operator");
  }

 private:
  char op_;
  NodePtr a_, b_;
};

class Unary final : public Node {
 public:
  Unary(std::function<double(double)> f, NodePtr a) : f_(std::move(f)), a_(std::move(a)) {}
  double eval(const std::map<std::string, double>& env) const override {
    return f_(a_->eval(env));
  }

 private:
  std::function<double(double)> f_;
  NodePtr a_;
};

class Parser {
 public:
  explicit Parser(std::string_view s) : s_(s) {}

  NodePtr parse() {
    NodePtr e = sum();
    skip_ws();
    if (pos_ != s_.size())
      throw ParseError("trailing characters at position " + std::to_string(pos_));
    return e;
  }

 private:
  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  bool eat(char c) {
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  char peek() {
    skip_ws();
    return pos_ < s_.size() ? s_[pos_] : '\0';
  }

  NodePtr sum() {
    NodePtr e = product();
    for (;;) {
      if (eat('+'))
        e = std::make_shared<Binary>('+', e, product());
      else if (eat('-'))
        e = std::make_shared<Binary>('-', e, product());
      else
        return e;
    }
  }

  NodePtr product() {
    NodePtr e = power();
    for (;;) {
      if (eat('*'))
        e = std::make_shared<Binary>('*', e, power());
      else if (eat('/'))
        e = std::make_shared<Binary>('/', e, power());
      else
        return e;
    }
  }

  NodePtr power() {
    NodePtr base = atom();
    if (eat('^')) return std::make_shared<Binary>('^', base, power());  // right assoc
    return base;
  }

  NodePtr atom() {
    skip_ws();
    if (eat('-')) return std::make_shared<Binary>('-', std::make_shared<Constant>(0.0), atom());
    if (eat('+')) return atom();
    if (eat('(')) {
      NodePtr e = sum();
      if (!eat(')')) throw ParseError("expected ')'");
      return e;
    }
    const char c = peek();
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return ident();
    throw ParseError(std::string("unexpected character '") + c + "'");
  }

  NodePtr number() {
    skip_ws();
    std::size_t used = 0;
    double v = std::stod(std::string(s_.substr(pos_)), &used);
    pos_ += used;
    return std::make_shared<Constant>(v);
  }

  NodePtr ident() {
    skip_ws();
    std::size_t start = pos_;
    while (pos_ < s_.size() &&
           (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_'))
      ++pos_;
    std::string name(s_.substr(start, pos_ - start));
    if (peek() == '(') {
      eat('(');
      NodePtr arg = sum();
      if (!eat(')')) throw ParseError("expected ')' after " + name);
      if (name == "sin") return std::make_shared<Unary>([](double x) { return std::sin(x); }, arg);
      if (name == "cos") return std::make_shared<Unary>([](double x) { return std::cos(x); }, arg);
      if (name == "exp") return std::make_shared<Unary>([](double x) { return std::exp(x); }, arg);
      if (name == "sqrt") return std::make_shared<Unary>([](double x) { return std::sqrt(x); }, arg);
      if (name == "abs") return std::make_shared<Unary>([](double x) { return std::abs(x); }, arg);
      if (name == "tanh") return std::make_shared<Unary>([](double x) { return std::tanh(x); }, arg);
      throw ParseError("unknown function: " + name);
    }
    if (name == "pi") return std::make_shared<Constant>(3.14159265358979323846);
    return std::make_shared<Variable>(name);
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline NodePtr parse(std::string_view src) { return detail::Parser(src).parse(); }

// Compiles an expression in the identifiers x1[, x2] into a plain function.
inline std::function<double(const double*, int)> compile_spatial(std::string_view src) {
  NodePtr ast = parse(src);
  return [ast](const double* x, int dim) {
    std::map<std::string, double> env{{"x1", x[0]}};
    if (dim > 1) env["x2"] = x[1];
    return ast->eval(env);
  };
}

}  // namespace gcckit::expr
