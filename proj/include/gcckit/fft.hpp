#pragma once

// In-place iterative radix-2 complex FFT, plus a multi-dimensional driver.
// Grids in this project are power-of-two by construction.

#include <complex>
#include <stdexcept>
#include <vector>

namespace gcckit::fft {

using cd = std::complex<double>;

inline bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// sign = -1: forward (e^{-i x xi}); sign = +1: inverse (unnormalized)
inline void transform(cd* a, std::size_t n, int sign) {
  if (!is_pow2(n)) throw std::invalid_argument("fft: length must be a power of two");
  // bit reversal
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = sign * 2.0 * 3.14159265358979323846 / static_cast<double>(len);
    const cd wl(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      cd w(1.0);
      for (std::size_t j = 0; j < len / 2; ++j) {
        const cd u = a[i + j];
        const cd v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
        w *= wl;
      }
    }
  }
}

inline void forward(std::vector<cd>& a) { transform(a.data(), a.size(), -1); }

inline void inverse(std::vector<cd>& a) {
  transform(a.data(), a.size(), +1);
  const double s = 1.0 / static_cast<double>(a.size());
  for (auto& x : a) x *= s;
}

// n-dimensional transform over a row-major array with shape dims
inline void transform_nd(std::vector<cd>& a, const std::vector<std::size_t>& dims, int sign) {
  std::size_t total = 1;
  for (auto d : dims) total *= d;
  if (a.size() != total) throw std::invalid_argument("fft: shape mismatch");

  std::size_t stride = 1;
  for (std::size_t axis = dims.size(); axis-- > 0;) {
    const std::size_t n = dims[axis];
    const std::size_t block = stride * n;
    std::vector<cd> line(n);
    for (std::size_t base = 0; base < total; base += block) {
      for (std::size_t off = 0; off < stride; ++off) {
        for (std::size_t k = 0; k < n; ++k) line[k] = a[base + off + k * stride];
        transform(line.data(), n, sign);
        for (std::size_t k = 0; k < n; ++k) a[base + off + k * stride] = line[k];
      }
    }
    stride *= n;
  }
}

inline void forward_nd(std::vector<cd>& a, const std::vector<std::size_t>& dims) {
  transform_nd(a, dims, -1);
}

inline void inverse_nd(std::vector<cd>& a, const std::vector<std::size_t>& dims) {
  transform_nd(a, dims, +1);
  const double s = 1.0 / static_cast<double>(a.size());
  for (auto& x : a) x *= s;
}

}  // namespace gcckit::fft
