#ifndef ADMMTK_PROX_HPP
#define ADMMTK_PROX_HPP

#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "admmtk/tensor.hpp"

namespace admmtk::prox {

/// Entrywise soft thresholding: 0 where |a| <= kappa, a - sgn(a) kappa
/// elsewhere; the proximity operator of kappa * |.|_1.
inline Tensor soft_threshold(const Tensor& v, double kappa) {
  if (kappa < 0.0) throw std::invalid_argument("soft_threshold: kappa must be >= 0");
  require_finite(v, "soft_threshold");
  Tensor out = v;
  for (auto& a : out.data) {
    if (std::abs(a) <= kappa)
      a = 0.0;
    else
      a -= (a > 0.0 ? kappa : -kappa);
  }
  return out;
}

/// Proximity operator of (lambda/2) |x|^2: v / (1 + lambda).
inline Tensor ridge_prox(const Tensor& v, double lambda) {
  if (lambda < 0.0) throw std::invalid_argument("ridge_prox: lambda must be >= 0");
  return scale(v, 1.0 / (1.0 + lambda));
}

/// Space-to-depth reordering: H x W x C -> (H/r) x (W/r) x (C r^2) with
/// out[i, j, c*r^2 + a*r + b] = x[i*r + a, j*r + b, c].
inline Tensor pixel_shuffle(const Tensor& x, int64_t r) {
  if (r <= 0) throw std::invalid_argument("pixel_shuffle: r must be positive");
  if (x.shape.size() != 3) throw std::invalid_argument("pixel_shuffle: expects an H x W x C tensor");
  const int64_t H = x.shape[0], W = x.shape[1], C = x.shape[2];
  if (H % r != 0 || W % r != 0)
    throw std::invalid_argument("pixel_shuffle: r must divide both spatial dims");
  Tensor out({H / r, W / r, C * r * r});
  for (int64_t i = 0; i < H / r; ++i)
    for (int64_t j = 0; j < W / r; ++j)
      for (int64_t c = 0; c < C; ++c)
        for (int64_t a = 0; a < r; ++a)
          for (int64_t b = 0; b < r; ++b)
            out.at(i, j, c * r * r + a * r + b) = x.at(i * r + a, j * r + b, c);
  return out;
}

/// Exact inverse of pixel_shuffle under the same ordering convention.
inline Tensor pixel_unshuffle(const Tensor& x, int64_t r) {
  if (r <= 0) throw std::invalid_argument("pixel_unshuffle: r must be positive");
  if (x.shape.size() != 3) throw std::invalid_argument("pixel_unshuffle: expects an H x W x C tensor");
  const int64_t h = x.shape[0], w = x.shape[1], cr = x.shape[2];
  if (cr % (r * r) != 0)
    throw std::invalid_argument("pixel_unshuffle: channel count must be divisible by r^2");
  const int64_t C = cr / (r * r);
  Tensor out({h * r, w * r, C});
  for (int64_t i = 0; i < h; ++i)
    for (int64_t j = 0; j < w; ++j)
      for (int64_t c = 0; c < C; ++c)
        for (int64_t a = 0; a < r; ++a)
          for (int64_t b = 0; b < r; ++b)
            out.at(i * r + a, j * r + b, c) = x.at(i, j, c * r * r + a * r + b);
  return out;
}

}  // namespace admmtk::prox

#endif  // ADMMTK_PROX_HPP
