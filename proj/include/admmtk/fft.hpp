#ifndef ADMMTK_FFT_HPP
#define ADMMTK_FFT_HPP

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "admmtk/tensor.hpp"

namespace admmtk::fft {

using cdouble = std::complex<double>;

inline bool is_pow2(size_t n) { return n != 0 && (n & (n - 1)) == 0; }

inline size_t next_pow2(size_t n) {
  size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

namespace detail {

// Iterative radix-2 Cooley-Tukey, forward transform (sign -1 in the kernel).
inline void fft_pow2(std::vector<cdouble>& a) {
  const size_t n = a.size();
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * kPi / static_cast<double>(len);
    const cdouble wl(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      cdouble w(1.0, 0.0);
      for (size_t k = 0; k < len / 2; ++k) {
        cdouble u = a[i + k];
        cdouble v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
}

// Bluestein chirp-z for arbitrary n, built on the radix-2 kernel.
inline void fft_bluestein(std::vector<cdouble>& a) {
  const size_t n = a.size();
  const size_t m = next_pow2(2 * n - 1);
  std::vector<cdouble> chirp(n);
  for (size_t k = 0; k < n; ++k) {
    // k^2 mod 2n keeps the angle argument small.
    uint64_t k2 = (static_cast<uint64_t>(k) * k) % (2 * n);
    double ang = -kPi * static_cast<double>(k2) / static_cast<double>(n);
    chirp[k] = cdouble(std::cos(ang), std::sin(ang));
  }
  std::vector<cdouble> fa(m, cdouble(0, 0)), fb(m, cdouble(0, 0));
  for (size_t k = 0; k < n; ++k) fa[k] = a[k] * chirp[k];
  fb[0] = std::conj(chirp[0]);
  for (size_t k = 1; k < n; ++k) fb[k] = fb[m - k] = std::conj(chirp[k]);
  fft_pow2(fa);
  fft_pow2(fb);
  for (size_t i = 0; i < m; ++i) fa[i] *= fb[i];
  // inverse pow-2 transform via conjugation
  for (auto& v : fa) v = std::conj(v);
  fft_pow2(fa);
  for (auto& v : fa) v = std::conj(v) / static_cast<double>(m);
  for (size_t k = 0; k < n; ++k) a[k] = fa[k] * chirp[k];
}

}  // namespace detail

/// In-place DFT, X_k = sum_j x_j exp(-2 pi i j k / n). Any length n >= 1.
inline void forward(std::vector<cdouble>& a) {
  if (a.empty()) throw std::invalid_argument("fft: empty input");
  if (a.size() == 1) return;
  if (is_pow2(a.size()))
    detail::fft_pow2(a);
  else
    detail::fft_bluestein(a);
}

/// In-place inverse DFT (unitary up to the usual 1/n factor).
inline void inverse(std::vector<cdouble>& a) {
  for (auto& v : a) v = std::conj(v);
  forward(a);
  const double inv_n = 1.0 / static_cast<double>(a.size());
  for (auto& v : a) v = std::conj(v) * inv_n;
}

/// Row-column 2-D DFT of an h x w grid stored row-major.
inline void forward2d(std::vector<cdouble>& a, int64_t h, int64_t w) {
  if (static_cast<int64_t>(a.size()) != h * w) throw std::invalid_argument("fft2d: size mismatch");
  std::vector<cdouble> buf;
  for (int64_t i = 0; i < h; ++i) {
    buf.assign(a.begin() + i * w, a.begin() + (i + 1) * w);
    forward(buf);
    std::copy(buf.begin(), buf.end(), a.begin() + i * w);
  }
  buf.resize(static_cast<size_t>(h));
  for (int64_t j = 0; j < w; ++j) {
    for (int64_t i = 0; i < h; ++i) buf[static_cast<size_t>(i)] = a[i * w + j];
    forward(buf);
    for (int64_t i = 0; i < h; ++i) a[i * w + j] = buf[static_cast<size_t>(i)];
  }
}

inline void inverse2d(std::vector<cdouble>& a, int64_t h, int64_t w) {
  for (auto& v : a) v = std::conj(v);
  forward2d(a, h, w);
  const double inv_n = 1.0 / static_cast<double>(h * w);
  for (auto& v : a) v = std::conj(v) * inv_n;
}

}  // namespace admmtk::fft

#endif  // ADMMTK_FFT_HPP
