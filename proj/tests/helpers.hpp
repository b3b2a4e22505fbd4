#ifndef ADMMTK_TESTS_HELPERS_HPP
#define ADMMTK_TESTS_HELPERS_HPP

#include <complex>
#include <vector>

#include "admmtk/linop.hpp"
#include "admmtk/tensor.hpp"

namespace tst {

using admmtk::RngStream;
using admmtk::Tensor;
namespace linop = admmtk::linop;

inline double rel_err(double got, double want) {
  double d = std::abs(got - want);
  double s = std::abs(want);
  return s > 0 ? d / s : d;
}

inline double rel_err(const Tensor& got, const Tensor& want) {
  double num = 0.0, den = 0.0;
  for (size_t i = 0; i < got.data.size(); ++i) {
    double d = got.data[i] - want.data[i];
    num += d * d;
    den += want.data[i] * want.data[i];
  }
  return den > 0 ? std::sqrt(num / den) : std::sqrt(num);
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
  return m;
}

inline Tensor random_tensor(std::vector<int64_t> shape, RngStream& rng, double scale = 1.0) {
  return admmtk::gaussian_sample(std::move(shape), scale, rng);
}

// O(n^2) reference DFT.
inline std::vector<std::complex<double>> naive_dft(const std::vector<std::complex<double>>& x) {
  const size_t n = x.size();
  std::vector<std::complex<double>> out(n);
  for (size_t k = 0; k < n; ++k) {
    std::complex<double> s(0, 0);
    for (size_t j = 0; j < n; ++j) {
      double ang = -2.0 * admmtk::kPi * static_cast<double>(k * j % n) / static_cast<double>(n);
      s += x[j] * std::complex<double>(std::cos(ang), std::sin(ang));
    }
    out[k] = s;
  }
  return out;
}

// --- random operator generators (small, for property tests) ---------------

inline linop::DenseOp random_dense(int64_t m, int64_t n, RngStream& rng) {
  return linop::DenseOp{random_tensor({m, n}, rng)};
}

inline linop::CirculantConv1D random_conv1d(int64_t n, RngStream& rng) {
  int64_t k = 1 + static_cast<int64_t>(rng.next_u64() % 4);  // 1..4 taps
  k = std::min(k, n);
  std::vector<double> taps(static_cast<size_t>(k));
  for (auto& t : taps) t = rng.next_gaussian();
  int64_t center = static_cast<int64_t>(rng.next_u64() % static_cast<uint64_t>(k));
  return linop::CirculantConv1D{taps, center, n};
}

inline linop::PeriodicConv2D random_conv2d(int64_t h, int64_t w, int64_t cin, int64_t cout,
                                           RngStream& rng) {
  int64_t kh = 1 + static_cast<int64_t>(rng.next_u64() % 3);
  int64_t kw = 1 + static_cast<int64_t>(rng.next_u64() % 3);
  Tensor kernel = random_tensor({kh, kw, cin, cout}, rng);
  return linop::PeriodicConv2D{kernel, kh / 2, kw / 2, h, w};
}

inline linop::CompositeOp random_composite1d(int64_t n, int64_t stride, RngStream& rng) {
  auto conv = random_conv1d(n, rng);
  return linop::make_composite(linop::Downsample{{stride}, {n}}, conv);
}

inline linop::CompositeOp random_composite2d(int64_t h, int64_t w, int64_t stride, RngStream& rng) {
  auto conv = random_conv2d(h, w, 1, 1, rng);
  return linop::make_composite(linop::Downsample{{stride, stride}, {h, w, 1}}, conv);
}

}  // namespace tst

#endif
