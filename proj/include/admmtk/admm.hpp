#ifndef ADMMTK_ADMM_HPP
#define ADMMTK_ADMM_HPP

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "admmtk/nn.hpp"
#include "admmtk/prox.hpp"
#include "admmtk/solve.hpp"
#include "admmtk/tensor.hpp"

// ADMM driver: x ~ prox of the prior, z ~ regularized least squares through a
// pluggable solver strategy, u ~ explicit dual ascent with step 2 beta.

namespace admmtk::admm {

struct DenseStrategy {};
struct SmwStrategy {};
struct CgStrategy {
  double tol = 1e-10;
  int64_t max_inner = 2000;
};
struct FftStrategy {};
struct LearnedStrategy {
  std::function<Tensor(const Tensor&)> c_apply;  // C acting in measurement space
  int64_t c_input_numel = -1;                    // -1 skips the shape check
};

using ZSolverStrategy = std::variant<DenseStrategy, SmwStrategy, CgStrategy, FftStrategy, LearnedStrategy>;

inline LearnedStrategy learned_strategy(std::shared_ptr<const nn::SymmetricConvNet> net) {
  return LearnedStrategy{[net](const Tensor& e) { return net->apply(e); }, net->signal_numel()};
}

inline const char* strategy_name(const ZSolverStrategy& s) {
  if (std::holds_alternative<DenseStrategy>(s)) return "dense";
  if (std::holds_alternative<SmwStrategy>(s)) return "smw";
  if (std::holds_alternative<CgStrategy>(s)) return "cg";
  if (std::holds_alternative<FftStrategy>(s)) return "fft";
  return "learned";
}

/// Logged objective. synthetic_map is the MAP objective
/// 1/(2 sigma^2) |y - Ax|^2 + (1/b) |x|_1; l1/ridge weight the prior with
/// lambda on top of a plain |y - Ax|^2 data term.
struct ObjectiveSpec {
  enum class Kind { synthetic_map, l1, ridge, data_term };
  Kind kind = Kind::data_term;
  double sigma = 1.0;
  double b = 1.0;
  double lambda = 0.0;
};

struct AdmmConfig {
  double beta = 0.1;
  double lambda = 0.0;
  int64_t max_iter = 50;
  prox::ProximityOperator prox_op = prox::SoftThreshold{0.0};
  ZSolverStrategy zsolver = DenseStrategy{};
  ObjectiveSpec objective;
  double sigma = 1.0;  // measurement noise level of the instance
  uint64_t seed = 0;
  bool early_stop = false;
  double early_stop_residual = 1e-12;
};

struct AdmmState {
  Tensor x, z, u;
  int64_t k = 0;
};

struct TrajectoryRow {
  int64_t iter = 0;
  double objective = 0.0;
  double nmse = 0.0;  // NaN when no ground truth is available
  double residual = 0.0;
  double cum_seconds = 0.0;
};

struct TrajectoryRecord {
  std::vector<TrajectoryRow> rows;
};

// ---------------------------------------------------------------------------
// Updates
// ---------------------------------------------------------------------------

/// x^{k+1} = prox(z^k - u^k / (2 beta)); y conditions a learned denoiser.
inline Tensor x_update(const AdmmState& s, const prox::ProximityOperator& p, double beta,
                       const Tensor* y = nullptr) {
  Tensor v = axpy(s.z, -1.0 / (2.0 * beta), s.u);
  return prox::apply_prox(p, v, y);
}

inline std::unique_ptr<linop::ZSolverHandle> make_z_solver(const linop::LinearOperatorDescriptor& A,
                                                           double beta, const ZSolverStrategy& strategy) {
  if (beta <= 0.0) throw std::invalid_argument("admm: beta must be > 0");
  if (std::holds_alternative<DenseStrategy>(strategy)) return linop::make_dense_handle(A, beta);
  if (std::holds_alternative<SmwStrategy>(strategy)) return linop::make_smw_handle(A, beta);
  if (const auto* cg = std::get_if<CgStrategy>(&strategy))
    return linop::make_cg_handle(A, beta, cg->tol, cg->max_inner);
  if (std::holds_alternative<FftStrategy>(strategy)) return linop::make_fft_handle(A, beta);

  const auto& ls = std::get<LearnedStrategy>(strategy);
  if (!ls.c_apply) throw std::invalid_argument("admm: learned strategy without a trained net");
  if (ls.c_input_numel >= 0 && ls.c_input_numel != linop::output_numel(A))
    throw std::invalid_argument("admm: learned net was trained for a different operator size");
  nn::LearnedK k = nn::build_learned_K_with(A, beta, ls.c_apply);

  class LearnedHandle final : public linop::ZSolverHandle {
   public:
    explicit LearnedHandle(nn::LearnedK k) : k_(std::move(k)) {}
    Tensor solve(const Tensor& rhs) const override { return k_.solve(rhs); }
    const char* name() const override { return "learned"; }

   private:
    nn::LearnedK k_;
  };
  return std::make_unique<LearnedHandle>(std::move(k));
}

/// z^{k+1} = solver(A^T y + beta x^{k+1} + u^k / 2); every strategy targets
/// the same system (A^T A + beta I) z = rhs.
inline Tensor z_update(const AdmmState& s, const linop::LinearOperatorDescriptor& A, const Tensor& y,
                       double beta, const linop::ZSolverHandle& solver) {
  Tensor rhs = linop::apply_adjoint(A, y).reshaped(s.x.shape);
  for (size_t i = 0; i < rhs.data.size(); ++i)
    rhs.data[i] += beta * s.x.data[i] + 0.5 * s.u.data[i];
  return solver.solve(rhs);
}

inline Tensor z_update(const AdmmState& s, const linop::LinearOperatorDescriptor& A, const Tensor& y,
                       double beta, const ZSolverStrategy& strategy) {
  return z_update(s, A, y, beta, *make_z_solver(A, beta, strategy));
}

/// u^{k+1} = u^k + 2 beta (x^{k+1} - z^{k+1})
inline Tensor u_update(const AdmmState& s, double beta) {
  Tensor u = s.u;
  for (size_t i = 0; i < u.data.size(); ++i) u.data[i] += 2.0 * beta * (s.x.data[i] - s.z.data[i]);
  return u;
}

inline double objective(const Tensor& x, const Tensor& y, const linop::LinearOperatorDescriptor& A,
                        const ObjectiveSpec& spec) {
  Tensor ax = linop::apply(A, x.reshaped(linop::input_shape(A)));
  double data = 0.0;
  for (size_t i = 0; i < ax.data.size(); ++i) {
    double d = y.data[i] - ax.data[i];
    data += d * d;
  }
  switch (spec.kind) {
    case ObjectiveSpec::Kind::synthetic_map:
      return data / (2.0 * spec.sigma * spec.sigma) + l1_norm(x) / spec.b;
    case ObjectiveSpec::Kind::l1:
      return data + spec.lambda * l1_norm(x);
    case ObjectiveSpec::Kind::ridge:
      return data + spec.lambda * l2_norm_sq(x);
    case ObjectiveSpec::Kind::data_term:
      return data;
  }
  return data;
}

// ---------------------------------------------------------------------------
// Driver
// ---------------------------------------------------------------------------

struct RunResult {
  Tensor x;
  AdmmState state;
  TrajectoryRecord trajectory;
};

/// Observer invoked after each iteration with (k, v, state); v is the prox
/// input z^{k-1} - u^{k-1}/(2 beta) that produced state.x.
using IterObserver = std::function<void(int64_t, const Tensor&, const AdmmState&)>;

inline RunResult run(const Tensor& y, const linop::LinearOperatorDescriptor& A, const AdmmConfig& cfg,
                     const Tensor* ground_truth = nullptr, const IterObserver& observer = {}) {
  if (cfg.max_iter < 1) throw std::invalid_argument("admm: max_iter must be >= 1");
  if (y.shape != linop::output_shape(A)) throw std::invalid_argument("admm: y shape mismatch");
  auto solver = make_z_solver(A, cfg.beta, cfg.zsolver);

  AdmmState s;
  s.x = linop::apply_adjoint(A, y);
  s.z = s.x;
  s.u = Tensor::zeros(s.x.shape);

  TrajectoryRecord traj;
  double cum = 0.0;
  auto log_row = [&](int64_t k) {
    TrajectoryRow row;
    row.iter = k;
    row.objective = objective(s.x, y, A, cfg.objective);
    row.nmse = ground_truth ? nmse(s.x, *ground_truth) : std::nan("");
    row.residual = l2_norm(sub(s.x, s.z));
    row.cum_seconds = cum;
    traj.rows.push_back(row);
  };
  log_row(0);

  using clock = std::chrono::steady_clock;
  for (int64_t k = 1; k <= cfg.max_iter; ++k) {
    const auto t0 = clock::now();
    Tensor v = axpy(s.z, -1.0 / (2.0 * cfg.beta), s.u);
    s.x = prox::apply_prox(cfg.prox_op, v, &y);
    if (!all_finite(s.x))
      throw std::runtime_error("admm: non-finite x iterate at iteration " + std::to_string(k) +
                               " (x-update)");
    s.z = z_update(s, A, y, cfg.beta, *solver);
    if (!all_finite(s.z))
      throw std::runtime_error("admm: non-finite z iterate at iteration " + std::to_string(k) +
                               " (z-update)");
    s.u = u_update(s, cfg.beta);
    if (!all_finite(s.u))
      throw std::runtime_error("admm: non-finite u iterate at iteration " + std::to_string(k) +
                               " (u-update)");
    s.k = k;
    cum += std::chrono::duration<double>(clock::now() - t0).count();
    log_row(k);
    if (observer) observer(k, v, s);
    if (cfg.early_stop && traj.rows.back().residual <= cfg.early_stop_residual) break;
  }
  return RunResult{s.x, std::move(s), std::move(traj)};
}

}  // namespace admmtk::admm

#endif  // ADMMTK_ADMM_HPP
