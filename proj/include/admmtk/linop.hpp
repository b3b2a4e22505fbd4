#ifndef ADMMTK_LINOP_HPP
#define ADMMTK_LINOP_HPP

#include <cstdint>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "admmtk/tensor.hpp"

namespace admmtk::linop {

// Materialized matrices are capped at 2^24 entries.
inline constexpr int64_t kMaterializeGuard = int64_t(1) << 24;

/// Dense m x n matrix acting on flat vectors.
struct DenseOp {
  Tensor matrix;  // shape {m, n}
};

/// Circulant 1-D convolution: y_i = sum_k taps[k] * x[(i + k - center) mod n].
/// With taps (0.2, 0.5, 0.3) and center 1 this is the three-banded circulant
/// whose rows carry 0.2 left of the diagonal and 0.3 right of it.
struct CirculantConv1D {
  std::vector<double> taps;
  int64_t center = 0;
  int64_t n = 0;
};

/// Periodic 2-D convolution with kH x kW x Cin x Cout taps on H x W images.
/// y[i,j,co] = sum_{a,b,ci} K[a,b,ci,co] * x[(i+a-ch) mod H, (j+b-cw) mod W, ci]
struct PeriodicConv2D {
  Tensor kernel;  // {kH, kW, Cin, Cout}
  int64_t center_row = 0;
  int64_t center_col = 0;
  int64_t height = 0;
  int64_t width = 0;
};

/// Regular downsampling keeping offset 0; the adjoint interpolates with zeros.
/// 1-D: input_dims = {n}, stride = {s}. Images: input_dims = {H, W, C},
/// stride = {sH, sW} (channels pass through).
struct Downsample {
  std::vector<int64_t> stride;
  std::vector<int64_t> input_dims;
};

/// A = S * H: convolution followed by downsampling.
struct CompositeOp {
  Downsample outer;
  std::variant<CirculantConv1D, PeriodicConv2D> inner;
};

using LinearOperatorDescriptor =
    std::variant<DenseOp, CirculantConv1D, PeriodicConv2D, Downsample, CompositeOp>;

namespace detail {
template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

inline int64_t wrap(int64_t i, int64_t n) {
  i %= n;
  return i < 0 ? i + n : i;
}
}  // namespace detail

// ---------------------------------------------------------------------------
// Shape queries
// ---------------------------------------------------------------------------

inline std::vector<int64_t> input_shape(const LinearOperatorDescriptor& A);
inline std::vector<int64_t> output_shape(const LinearOperatorDescriptor& A);

namespace detail {

inline void validate_conv1d(const CirculantConv1D& c) {
  if (c.n <= 0) throw std::invalid_argument("conv1d: signal length must be positive");
  if (c.taps.empty() || static_cast<int64_t>(c.taps.size()) > c.n)
    throw std::invalid_argument("conv1d: tap count must be in [1, n]");
  if (c.center < 0 || c.center >= static_cast<int64_t>(c.taps.size()))
    throw std::invalid_argument("conv1d: center must index a tap");
}

inline void validate_conv2d(const PeriodicConv2D& c) {
  if (c.kernel.shape.size() != 4) throw std::invalid_argument("conv2d: kernel must be kH x kW x Cin x Cout");
  if (c.height <= 0 || c.width <= 0) throw std::invalid_argument("conv2d: image dims must be positive");
  if (c.center_row < 0 || c.center_row >= c.kernel.shape[0] || c.center_col < 0 ||
      c.center_col >= c.kernel.shape[1])
    throw std::invalid_argument("conv2d: center must index a tap");
}

inline void validate_downsample(const Downsample& d) {
  if (d.input_dims.size() == 1) {
    if (d.stride.size() != 1) throw std::invalid_argument("downsample: 1-D input needs one stride");
  } else if (d.input_dims.size() == 3) {
    if (d.stride.size() != 2) throw std::invalid_argument("downsample: H x W x C input needs two strides");
  } else {
    throw std::invalid_argument("downsample: input must be {n} or {H, W, C}");
  }
  for (size_t i = 0; i < d.stride.size(); ++i) {
    if (d.stride[i] <= 0) throw std::invalid_argument("downsample: strides must be positive");
    if (d.input_dims[i] % d.stride[i] != 0)
      throw std::invalid_argument("downsample: stride must divide the input dimension");
  }
}

}  // namespace detail

inline std::vector<int64_t> downsample_output_dims(const Downsample& d) {
  detail::validate_downsample(d);
  if (d.input_dims.size() == 1) return {d.input_dims[0] / d.stride[0]};
  return {d.input_dims[0] / d.stride[0], d.input_dims[1] / d.stride[1], d.input_dims[2]};
}

inline std::vector<int64_t> input_shape(const LinearOperatorDescriptor& A) {
  return std::visit(
      detail::overloaded{
          [](const DenseOp& d) -> std::vector<int64_t> { return {d.matrix.shape[1]}; },
          [](const CirculantConv1D& c) -> std::vector<int64_t> {
            detail::validate_conv1d(c);
            return {c.n};
          },
          [](const PeriodicConv2D& c) -> std::vector<int64_t> {
            detail::validate_conv2d(c);
            return {c.height, c.width, c.kernel.shape[2]};
          },
          [](const Downsample& d) -> std::vector<int64_t> {
            detail::validate_downsample(d);
            return d.input_dims;
          },
          [](const CompositeOp& c) -> std::vector<int64_t> {
            return std::visit([](const auto& inner) { return input_shape(LinearOperatorDescriptor(inner)); },
                              c.inner);
          }},
      A);
}

inline std::vector<int64_t> output_shape(const LinearOperatorDescriptor& A) {
  return std::visit(
      detail::overloaded{
          [](const DenseOp& d) -> std::vector<int64_t> { return {d.matrix.shape[0]}; },
          [](const CirculantConv1D& c) -> std::vector<int64_t> { return {c.n}; },
          [](const PeriodicConv2D& c) -> std::vector<int64_t> {
            return {c.height, c.width, c.kernel.shape[3]};
          },
          [](const Downsample& d) -> std::vector<int64_t> { return downsample_output_dims(d); },
          [](const CompositeOp& c) -> std::vector<int64_t> { return downsample_output_dims(c.outer); }},
      A);
}

inline int64_t input_numel(const LinearOperatorDescriptor& A) {
  int64_t n = 1;
  for (int64_t d : input_shape(A)) n *= d;
  return n;
}

inline int64_t output_numel(const LinearOperatorDescriptor& A) {
  int64_t n = 1;
  for (int64_t d : output_shape(A)) n *= d;
  return n;
}

/// Composite constructor that checks the inner/outer dimension chain.
inline CompositeOp make_composite(Downsample outer, std::variant<CirculantConv1D, PeriodicConv2D> inner) {
  std::vector<int64_t> inner_out =
      std::visit([](const auto& op) { return output_shape(LinearOperatorDescriptor(op)); }, inner);
  detail::validate_downsample(outer);
  if (inner_out != outer.input_dims)
    throw std::invalid_argument("composite: inner output dims must equal outer input dims");
  return CompositeOp{std::move(outer), std::move(inner)};
}

// ---------------------------------------------------------------------------
// apply / apply_adjoint
// ---------------------------------------------------------------------------

namespace detail {

inline Tensor apply_dense(const Tensor& M, const Tensor& x, bool transpose) {
  const int64_t m = M.shape[0], n = M.shape[1];
  Tensor y({transpose ? n : m});
  if (!transpose) {
    for (int64_t i = 0; i < m; ++i) {
      double s = 0.0;
      const double* row = M.data.data() + i * n;
      for (int64_t j = 0; j < n; ++j) s += row[j] * x.data[static_cast<size_t>(j)];
      y[i] = s;
    }
  } else {
    for (int64_t i = 0; i < m; ++i) {
      const double* row = M.data.data() + i * n;
      const double xi = x.data[static_cast<size_t>(i)];
      for (int64_t j = 0; j < n; ++j) y[j] += row[j] * xi;
    }
  }
  return y;
}

inline Tensor apply_conv1d(const CirculantConv1D& c, const Tensor& x, bool adjoint) {
  const int64_t n = c.n;
  const int64_t k = static_cast<int64_t>(c.taps.size());
  Tensor y({n});
  for (int64_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (int64_t t = 0; t < k; ++t) {
      int64_t j = adjoint ? wrap(i - (t - c.center), n) : wrap(i + (t - c.center), n);
      s += c.taps[static_cast<size_t>(t)] * x[j];
    }
    y[i] = s;
  }
  return y;
}

inline Tensor apply_conv2d(const PeriodicConv2D& c, const Tensor& x, bool adjoint) {
  const int64_t H = c.height, W = c.width;
  const int64_t kh = c.kernel.shape[0], kw = c.kernel.shape[1];
  const int64_t cin = c.kernel.shape[2], cout = c.kernel.shape[3];
  const int64_t in_ch = adjoint ? cout : cin;
  const int64_t out_ch = adjoint ? cin : cout;
  Tensor y({H, W, out_ch});
  for (int64_t i = 0; i < H; ++i) {
    for (int64_t j = 0; j < W; ++j) {
      double* out = y.data.data() + (i * W + j) * out_ch;
      for (int64_t a = 0; a < kh; ++a) {
        for (int64_t b = 0; b < kw; ++b) {
          const int64_t ii = adjoint ? wrap(i - (a - c.center_row), H) : wrap(i + (a - c.center_row), H);
          const int64_t jj = adjoint ? wrap(j - (b - c.center_col), W) : wrap(j + (b - c.center_col), W);
          const double* in = x.data.data() + (ii * W + jj) * in_ch;
          const double* kk = c.kernel.data.data() + (a * kw + b) * cin * cout;
          if (!adjoint) {
            for (int64_t ci = 0; ci < cin; ++ci) {
              const double xv = in[ci];
              const double* krow = kk + ci * cout;
              for (int64_t co = 0; co < cout; ++co) out[co] += xv * krow[co];
            }
          } else {
            for (int64_t ci = 0; ci < cin; ++ci) {
              const double* krow = kk + ci * cout;
              double s = 0.0;
              for (int64_t co = 0; co < cout; ++co) s += krow[co] * in[co];
              out[ci] += s;
            }
          }
        }
      }
    }
  }
  return y;
}

inline Tensor apply_downsample(const Downsample& d, const Tensor& x) {
  auto out_dims = downsample_output_dims(d);
  Tensor y(out_dims);
  if (d.input_dims.size() == 1) {
    for (int64_t i = 0; i < out_dims[0]; ++i) y[i] = x[i * d.stride[0]];
  } else {
    const int64_t W = d.input_dims[1], C = d.input_dims[2];
    for (int64_t i = 0; i < out_dims[0]; ++i)
      for (int64_t j = 0; j < out_dims[1]; ++j)
        for (int64_t c = 0; c < C; ++c)
          y.data[(i * out_dims[1] + j) * C + c] = x.data[(i * d.stride[0] * W + j * d.stride[1]) * C + c];
  }
  return y;
}

inline Tensor apply_upsample_zeros(const Downsample& d, const Tensor& y) {
  auto out_dims = downsample_output_dims(d);
  Tensor x(d.input_dims);
  if (d.input_dims.size() == 1) {
    for (int64_t i = 0; i < out_dims[0]; ++i) x[i * d.stride[0]] = y[i];
  } else {
    const int64_t W = d.input_dims[1], C = d.input_dims[2];
    for (int64_t i = 0; i < out_dims[0]; ++i)
      for (int64_t j = 0; j < out_dims[1]; ++j)
        for (int64_t c = 0; c < C; ++c)
          x.data[(i * d.stride[0] * W + j * d.stride[1]) * C + c] = y.data[(i * out_dims[1] + j) * C + c];
  }
  return x;
}

}  // namespace detail

/// y = A x. The input shape must match input_shape(A) exactly.
inline Tensor apply(const LinearOperatorDescriptor& A, const Tensor& x) {
  if (x.shape != input_shape(A)) throw std::invalid_argument("apply: input shape mismatch");
  return std::visit(
      detail::overloaded{
          [&](const DenseOp& d) { return detail::apply_dense(d.matrix, x, false); },
          [&](const CirculantConv1D& c) { return detail::apply_conv1d(c, x, false); },
          [&](const PeriodicConv2D& c) { return detail::apply_conv2d(c, x, false); },
          [&](const Downsample& d) { return detail::apply_downsample(d, x); },
          [&](const CompositeOp& c) {
            Tensor mid = std::visit(
                [&](const auto& inner) { return apply(LinearOperatorDescriptor(inner), x); }, c.inner);
            return detail::apply_downsample(c.outer, mid);
          }},
      A);
}

/// x = A^T y. Downsample adjoints zero-fill; convolution adjoints correlate
/// with the flipped kernel under the same periodic boundary.
inline Tensor apply_adjoint(const LinearOperatorDescriptor& A, const Tensor& y) {
  if (y.shape != output_shape(A)) throw std::invalid_argument("apply_adjoint: input shape mismatch");
  return std::visit(
      detail::overloaded{
          [&](const DenseOp& d) { return detail::apply_dense(d.matrix, y, true); },
          [&](const CirculantConv1D& c) { return detail::apply_conv1d(c, y, true); },
          [&](const PeriodicConv2D& c) { return detail::apply_conv2d(c, y, true); },
          [&](const Downsample& d) { return detail::apply_upsample_zeros(d, y); },
          [&](const CompositeOp& c) {
            Tensor mid = detail::apply_upsample_zeros(c.outer, y);
            return std::visit(
                [&](const auto& inner) { return apply_adjoint(LinearOperatorDescriptor(inner), mid); },
                c.inner);
          }},
      A);
}

// ---------------------------------------------------------------------------
// materialize
// ---------------------------------------------------------------------------

namespace detail {

// Writes row `r` of the dense form of A into `row` (length n, pre-zeroed).
inline void fill_row(const LinearOperatorDescriptor& A, int64_t r, double* row) {
  std::visit(
      overloaded{
          [&](const DenseOp& d) {
            const int64_t n = d.matrix.shape[1];
            const double* src = d.matrix.data.data() + r * n;
            for (int64_t j = 0; j < n; ++j) row[j] = src[j];
          },
          [&](const CirculantConv1D& c) {
            for (size_t t = 0; t < c.taps.size(); ++t)
              row[wrap(r + (static_cast<int64_t>(t) - c.center), c.n)] += c.taps[t];
          },
          [&](const PeriodicConv2D& c) {
            const int64_t W = c.width, cin = c.kernel.shape[2], cout = c.kernel.shape[3];
            const int64_t co = r % cout, j = (r / cout) % W, i = r / (cout * W);
            const int64_t kh = c.kernel.shape[0], kw = c.kernel.shape[1];
            for (int64_t a = 0; a < kh; ++a)
              for (int64_t b = 0; b < kw; ++b) {
                const int64_t ii = wrap(i + (a - c.center_row), c.height);
                const int64_t jj = wrap(j + (b - c.center_col), W);
                for (int64_t ci = 0; ci < cin; ++ci)
                  row[(ii * W + jj) * cin + ci] += c.kernel.data[((a * kw + b) * cin + ci) * cout + co];
              }
          },
          [&](const Downsample& d) {
            if (d.input_dims.size() == 1) {
              row[r * d.stride[0]] = 1.0;
            } else {
              auto out = downsample_output_dims(d);
              const int64_t W = d.input_dims[1], C = d.input_dims[2];
              const int64_t c2 = r % C, j = (r / C) % out[1], i = r / (C * out[1]);
              row[(i * d.stride[0] * W + j * d.stride[1]) * C + c2] = 1.0;
            }
          },
          [&](const CompositeOp& c) {
            // Row r of S*H is the row of H selected by the r-th kept sample.
            int64_t hr = 0;
            if (c.outer.input_dims.size() == 1) {
              hr = r * c.outer.stride[0];
            } else {
              auto out = downsample_output_dims(c.outer);
              const int64_t C = c.outer.input_dims[2];
              const int64_t c2 = r % C, j = (r / C) % out[1], i = r / (C * out[1]);
              hr = (i * c.outer.stride[0] * c.outer.input_dims[1] + j * c.outer.stride[1]) * C + c2;
            }
            std::visit([&](const auto& inner) { fill_row(LinearOperatorDescriptor(inner), hr, row); },
                       c.inner);
          }},
      A);
}

}  // namespace detail

/// Dense m x n form of A. Guarded against oversized materializations.
inline Tensor materialize(const LinearOperatorDescriptor& A) {
  const int64_t m = output_numel(A), n = input_numel(A);
  if (m * n > kMaterializeGuard)
    throw std::invalid_argument("materialize: " + std::to_string(m) + " x " + std::to_string(n) +
                                " exceeds the size guard");
  Tensor M({m, n});
  for (int64_t r = 0; r < m; ++r) detail::fill_row(A, r, M.data.data() + r * n);
  return M;
}

}  // namespace admmtk::linop

#endif  // ADMMTK_LINOP_HPP
