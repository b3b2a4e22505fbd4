#ifndef ADMMTK_SOLVE_HPP
#define ADMMTK_SOLVE_HPP

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <vector>

#include "admmtk/fft.hpp"
#include "admmtk/linop.hpp"
#include "admmtk/tensor.hpp"

// Exact solvers for the regularized normal equations (A^T A + beta I) z = rhs.
// These are the reference paths the learned inverter is benchmarked against.

namespace admmtk::linop {

namespace detail {

using EigenRowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline Eigen::Map<const EigenRowMat> as_eigen(const Tensor& M) {
  return Eigen::Map<const EigenRowMat>(M.data.data(), M.shape[0], M.shape[1]);
}

inline void check_solve_inputs(const LinearOperatorDescriptor& A, double beta, const Tensor& rhs,
                               const char* who) {
  if (beta <= 0.0) throw std::invalid_argument(std::string(who) + ": beta must be > 0");
  if (rhs.numel() != input_numel(A))
    throw std::invalid_argument(std::string(who) + ": rhs size does not match input_dim(A)");
  require_finite(rhs, who);
}

}  // namespace detail

/// Direct factorization of (A^T A + beta I); the ground-truth oracle K * rhs.
inline Tensor solve_dense(const LinearOperatorDescriptor& A, double beta, const Tensor& rhs) {
  detail::check_solve_inputs(A, beta, rhs, "solve_dense");
  Tensor M = materialize(A);
  const int64_t n = M.shape[1];
  auto Am = detail::as_eigen(M);
  Eigen::MatrixXd N = Am.transpose() * Am;
  N.diagonal().array() += beta;
  Eigen::Map<const Eigen::VectorXd> b(rhs.data.data(), n);
  Eigen::VectorXd z = Eigen::LLT<Eigen::MatrixXd>(N).solve(b);
  Tensor out = rhs;
  Eigen::Map<Eigen::VectorXd>(out.data.data(), n) = z;
  require_finite(out, "solve_dense");
  return out;
}

/// Sherman-Morrison-Woodbury route: z = beta^-1 (rhs - A^T B A rhs) with
/// B = (beta I + A A^T)^-1 factored in the smaller m x m space.
inline Tensor solve_smw(const LinearOperatorDescriptor& A, double beta, const Tensor& rhs) {
  detail::check_solve_inputs(A, beta, rhs, "solve_smw");
  Tensor M = materialize(A);
  const int64_t m = M.shape[0];
  auto Am = detail::as_eigen(M);
  Eigen::MatrixXd G = Am * Am.transpose();
  G.diagonal().array() += beta;
  Tensor ax = apply(A, rhs.reshaped(input_shape(A)));
  Eigen::Map<const Eigen::VectorXd> t(ax.data.data(), m);
  Eigen::VectorXd s = Eigen::LLT<Eigen::MatrixXd>(G).solve(t);
  Tensor sv({m});
  Eigen::Map<Eigen::VectorXd>(sv.data.data(), m) = s;
  Tensor back = apply_adjoint(A, sv.reshaped(output_shape(A)));
  Tensor out = rhs;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = (rhs.data[i] - back.data[i]) / beta;
  require_finite(out, "solve_smw");
  return out;
}

/// Dense m x m matrix B = (beta I + A A^T)^-1; oracle for the learned C.
inline Tensor materialize_B(const LinearOperatorDescriptor& A, double beta) {
  Tensor M = materialize(A);
  const int64_t m = M.shape[0];
  auto Am = detail::as_eigen(M);
  Eigen::MatrixXd G = Am * Am.transpose();
  G.diagonal().array() += beta;
  Eigen::MatrixXd B = Eigen::LLT<Eigen::MatrixXd>(G).solve(Eigen::MatrixXd::Identity(m, m));
  Tensor out({m, m});
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < m; ++j) out.data[i * m + j] = B(i, j);
  return out;
}

struct CgResult {
  Tensor z;
  int64_t iterations = 0;
  bool converged = false;
};

/// Matrix-free conjugate gradient on the SPD system (A^T A + beta I) z = rhs.
/// Hitting max_iter returns the best iterate with converged = false.
inline CgResult solve_cg(const LinearOperatorDescriptor& A, double beta, const Tensor& rhs, double tol,
                         int64_t max_iter) {
  detail::check_solve_inputs(A, beta, rhs, "solve_cg");
  if (tol <= 0.0) throw std::invalid_argument("solve_cg: tol must be > 0");
  const auto in_shape = input_shape(A);
  const auto out_shape = output_shape(A);
  auto normal_apply = [&](const Tensor& v) {
    Tensor av = apply(A, v.reshaped(in_shape));
    Tensor atav = apply_adjoint(A, av.reshaped(out_shape));
    Tensor r = atav.reshaped(v.shape);
    for (size_t i = 0; i < r.data.size(); ++i) r.data[i] += beta * v.data[i];
    return r;
  };

  CgResult res;
  res.z = Tensor::zeros(rhs.shape);
  Tensor r = rhs;
  Tensor p = r;
  double rr = l2_norm_sq(r);
  const double stop = tol * tol * l2_norm_sq(rhs);
  if (rr <= stop) {
    res.converged = true;
    return res;
  }
  for (int64_t k = 0; k < max_iter; ++k) {
    Tensor mp = normal_apply(p);
    double alpha = rr / dot(p, mp);
    res.z = axpy(res.z, alpha, p);
    r = axpy(r, -alpha, mp);
    res.iterations = k + 1;
    double rr_new = l2_norm_sq(r);
    if (rr_new <= stop) {
      res.converged = true;
      break;
    }
    p = axpy(r, rr_new / rr, p);
    rr = rr_new;
  }
  require_finite(res.z, "solve_cg");
  return res;
}

namespace detail {

// Fourier symbol of (A^T A + beta I) for a pure periodic convolution.
inline std::vector<double> circulant_denominator(const LinearOperatorDescriptor& A, double beta) {
  using fft::cdouble;
  if (const auto* c1 = std::get_if<CirculantConv1D>(&A)) {
    std::vector<cdouble> h(static_cast<size_t>(c1->n), cdouble(0, 0));
    for (size_t t = 0; t < c1->taps.size(); ++t)
      h[static_cast<size_t>(wrap(static_cast<int64_t>(t) - c1->center, c1->n))] += c1->taps[t];
    fft::forward(h);
    std::vector<double> den(h.size());
    for (size_t i = 0; i < h.size(); ++i) den[i] = std::norm(h[i]) + beta;
    return den;
  }
  if (const auto* c2 = std::get_if<PeriodicConv2D>(&A)) {
    if (c2->kernel.shape[2] != 1 || c2->kernel.shape[3] != 1)
      throw std::invalid_argument("solve_fft_circulant: requires a single-channel convolution");
    std::vector<cdouble> h(static_cast<size_t>(c2->height * c2->width), cdouble(0, 0));
    const int64_t kh = c2->kernel.shape[0], kw = c2->kernel.shape[1];
    for (int64_t a = 0; a < kh; ++a)
      for (int64_t b = 0; b < kw; ++b) {
        int64_t ii = wrap(a - c2->center_row, c2->height);
        int64_t jj = wrap(b - c2->center_col, c2->width);
        h[static_cast<size_t>(ii * c2->width + jj)] += c2->kernel.data[(a * kw + b)];
      }
    fft::forward2d(h, c2->height, c2->width);
    std::vector<double> den(h.size());
    for (size_t i = 0; i < h.size(); ++i) den[i] = std::norm(h[i]) + beta;
    return den;
  }
  throw std::invalid_argument("solve_fft_circulant: operator is not a pure periodic convolution");
}

inline Tensor fft_solve_with_denominator(const LinearOperatorDescriptor& A, const std::vector<double>& den,
                                         const Tensor& rhs) {
  using fft::cdouble;
  std::vector<cdouble> v(rhs.data.begin(), rhs.data.end());
  if (std::holds_alternative<CirculantConv1D>(A)) {
    fft::forward(v);
    for (size_t i = 0; i < v.size(); ++i) v[i] /= den[i];
    fft::inverse(v);
  } else {
    const auto& c2 = std::get<PeriodicConv2D>(A);
    fft::forward2d(v, c2.height, c2.width);
    for (size_t i = 0; i < v.size(); ++i) v[i] /= den[i];
    fft::inverse2d(v, c2.height, c2.width);
  }
  Tensor out = rhs;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = v[i].real();
  require_finite(out, "solve_fft_circulant");
  return out;
}

}  // namespace detail

/// Exact diagonalization of (A^T A + beta I) in the Fourier basis. Only valid
/// for pure periodic convolutions (no downsampling).
inline Tensor solve_fft_circulant(const LinearOperatorDescriptor& A, double beta, const Tensor& rhs) {
  detail::check_solve_inputs(A, beta, rhs, "solve_fft_circulant");
  auto den = detail::circulant_denominator(A, beta);
  return detail::fft_solve_with_denominator(A, den, rhs);
}

// ---------------------------------------------------------------------------
// Reusable solver handles: factorizations and spectra are computed once and
// reused across ADMM iterations.
// ---------------------------------------------------------------------------

class ZSolverHandle {
 public:
  virtual ~ZSolverHandle() = default;
  virtual Tensor solve(const Tensor& rhs) const = 0;
  virtual const char* name() const = 0;
};

namespace detail {

class DenseHandle final : public ZSolverHandle {
 public:
  DenseHandle(const LinearOperatorDescriptor& A, double beta) {
    Tensor M = materialize(A);
    auto Am = as_eigen(M);
    Eigen::MatrixXd N = Am.transpose() * Am;
    N.diagonal().array() += beta;
    llt_.compute(N);
  }
  Tensor solve(const Tensor& rhs) const override {
    Tensor out = rhs;
    Eigen::Map<const Eigen::VectorXd> b(rhs.data.data(), rhs.numel());
    Eigen::Map<Eigen::VectorXd>(out.data.data(), out.numel()) = llt_.solve(b);
    require_finite(out, "z-update (dense)");
    return out;
  }
  const char* name() const override { return "dense"; }

 private:
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

class SmwHandle final : public ZSolverHandle {
 public:
  SmwHandle(LinearOperatorDescriptor A, double beta) : A_(std::move(A)), beta_(beta) {
    Tensor M = materialize(A_);
    auto Am = as_eigen(M);
    Eigen::MatrixXd G = Am * Am.transpose();
    G.diagonal().array() += beta;
    llt_.compute(G);
  }
  Tensor solve(const Tensor& rhs) const override {
    Tensor ax = apply(A_, rhs.reshaped(input_shape(A_)));
    Eigen::Map<const Eigen::VectorXd> t(ax.data.data(), ax.numel());
    Tensor sv = ax;
    Eigen::Map<Eigen::VectorXd>(sv.data.data(), sv.numel()) = llt_.solve(t);
    Tensor back = apply_adjoint(A_, sv.reshaped(output_shape(A_)));
    Tensor out = rhs;
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = (rhs.data[i] - back.data[i]) / beta_;
    require_finite(out, "z-update (smw)");
    return out;
  }
  const char* name() const override { return "smw"; }

 private:
  LinearOperatorDescriptor A_;
  double beta_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

class CgHandle final : public ZSolverHandle {
 public:
  CgHandle(LinearOperatorDescriptor A, double beta, double tol, int64_t max_inner)
      : A_(std::move(A)), beta_(beta), tol_(tol), max_inner_(max_inner) {}
  Tensor solve(const Tensor& rhs) const override { return solve_cg(A_, beta_, rhs, tol_, max_inner_).z; }
  const char* name() const override { return "cg"; }

 private:
  LinearOperatorDescriptor A_;
  double beta_, tol_;
  int64_t max_inner_;
};

class FftHandle final : public ZSolverHandle {
 public:
  FftHandle(LinearOperatorDescriptor A, double beta) : A_(std::move(A)) {
    den_ = circulant_denominator(A_, beta);
  }
  Tensor solve(const Tensor& rhs) const override { return fft_solve_with_denominator(A_, den_, rhs); }
  const char* name() const override { return "fft"; }

 private:
  LinearOperatorDescriptor A_;
  std::vector<double> den_;
};

}  // namespace detail

inline std::unique_ptr<ZSolverHandle> make_dense_handle(const LinearOperatorDescriptor& A, double beta) {
  return std::make_unique<detail::DenseHandle>(A, beta);
}
inline std::unique_ptr<ZSolverHandle> make_smw_handle(LinearOperatorDescriptor A, double beta) {
  return std::make_unique<detail::SmwHandle>(std::move(A), beta);
}
inline std::unique_ptr<ZSolverHandle> make_cg_handle(LinearOperatorDescriptor A, double beta, double tol,
                                                     int64_t max_inner) {
  return std::make_unique<detail::CgHandle>(std::move(A), beta, tol, max_inner);
}
inline std::unique_ptr<ZSolverHandle> make_fft_handle(LinearOperatorDescriptor A, double beta) {
  return std::make_unique<detail::FftHandle>(std::move(A), beta);
}

}  // namespace admmtk::linop

#endif  // ADMMTK_SOLVE_HPP
