#ifndef ADMMTK_CALIB_HPP
#define ADMMTK_CALIB_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "admmtk/linop.hpp"
#include "admmtk/tensor.hpp"

// Forward-model calibration: recover the convolution taps of A = S * H from
// training pairs (x_i, y_i). The map taps -> A x is linear, so this is a
// ridge-regularized linear least squares in the taps.

namespace admmtk::calib {

struct CalibrationProblem {
  std::vector<Tensor> xs;  // each {n} or {H, W, 1}
  std::vector<Tensor> ys;  // matching downsampled measurements
  int64_t kh = 3, kw = 1;  // kernel support (1-D problems use kw = 1)
  int64_t center_h = 1, center_w = 0;
  std::vector<int64_t> stride;  // {s} or {sH, sW}
  double lambda_A = 0.0;        // ridge weight on the taps
};

struct CalibrationResult {
  Tensor kernel;         // {kh} for 1-D, {kh, kw} for 2-D
  double mean_residual;  // mean over pairs of |y_i - A_hat x_i|^2
};

namespace detail {

inline linop::LinearOperatorDescriptor operator_from_taps(const CalibrationProblem& p,
                                                          const std::vector<double>& taps) {
  const bool one_d = p.xs.front().shape.size() == 1;
  if (one_d) {
    linop::CirculantConv1D conv{taps, p.center_h, p.xs.front().shape[0]};
    if (p.stride[0] == 1) return conv;
    return linop::make_composite(linop::Downsample{{p.stride[0]}, {conv.n}}, conv);
  }
  const auto& xs = p.xs.front().shape;
  Tensor kern({p.kh, p.kw, 1, 1});
  kern.data.assign(taps.begin(), taps.end());
  linop::PeriodicConv2D conv{kern, p.center_h, p.center_w, xs[0], xs[1]};
  if (p.stride.size() == 2 && (p.stride[0] != 1 || p.stride[1] != 1))
    return linop::make_composite(linop::Downsample{{p.stride[0], p.stride[1]}, {xs[0], xs[1], 1}}, conv);
  return conv;
}

}  // namespace detail

/// Least-squares estimate of the kernel taps with ridge phi(A) = |taps|^2.
inline CalibrationResult estimate_forward_kernel(const CalibrationProblem& p) {
  if (p.xs.empty() || p.xs.size() != p.ys.size())
    throw std::invalid_argument("calibrate: needs a nonempty set of (x, y) pairs");
  if (p.lambda_A < 0.0) throw std::invalid_argument("calibrate: lambda_A must be >= 0");
  const bool one_d = p.xs.front().shape.size() == 1;
  if (!one_d && (p.xs.front().shape.size() != 3 || p.xs.front().shape[2] != 1))
    throw std::invalid_argument("calibrate: signals must be {n} or {H, W, 1}");
  const int64_t taps = one_d ? p.kh : p.kh * p.kw;
  const int64_t m = p.ys.front().numel();
  const int64_t n_constraints = static_cast<int64_t>(p.ys.size()) * m;
  if (n_constraints < taps && p.lambda_A == 0.0)
    throw std::invalid_argument(
        "calibrate: underdetermined system (N*m < tap count); set lambda_A > 0");

  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(taps, taps);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(taps);
  std::vector<Tensor> cols(static_cast<size_t>(taps));

  for (size_t i = 0; i < p.xs.size(); ++i) {
    for (int64_t t = 0; t < taps; ++t) {
      std::vector<double> unit(static_cast<size_t>(taps), 0.0);
      unit[static_cast<size_t>(t)] = 1.0;
      auto op = detail::operator_from_taps(p, unit);
      cols[static_cast<size_t>(t)] = linop::apply(op, p.xs[i]);
    }
    for (int64_t a = 0; a < taps; ++a) {
      rhs(a) += dot(cols[static_cast<size_t>(a)], p.ys[i]);
      for (int64_t b = a; b < taps; ++b) {
        double g = dot(cols[static_cast<size_t>(a)], cols[static_cast<size_t>(b)]);
        G(a, b) += g;
        if (b != a) G(b, a) += g;
      }
    }
  }

  if (p.lambda_A == 0.0) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(G);
    qr.setThreshold(1e-10);
    if (qr.rank() < taps)
      throw std::invalid_argument("calibrate: rank-deficient normal system; set lambda_A > 0");
  }
  G.diagonal().array() += p.lambda_A;
  Eigen::VectorXd k = Eigen::LDLT<Eigen::MatrixXd>(G).solve(rhs);

  std::vector<double> tap_values(k.data(), k.data() + taps);
  auto op = detail::operator_from_taps(p, tap_values);
  double resid = 0.0;
  for (size_t i = 0; i < p.xs.size(); ++i) resid += l2_norm_sq(sub(linop::apply(op, p.xs[i]), p.ys[i]));
  resid /= static_cast<double>(p.xs.size());

  Tensor kernel = one_d ? Tensor({p.kh}, tap_values) : Tensor({p.kh, p.kw}, tap_values);
  return CalibrationResult{std::move(kernel), resid};
}

}  // namespace admmtk::calib

#endif  // ADMMTK_CALIB_HPP
