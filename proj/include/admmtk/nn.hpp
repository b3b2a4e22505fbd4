#ifndef ADMMTK_NN_HPP
#define ADMMTK_NN_HPP

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "admmtk/linop.hpp"
#include "admmtk/prox.hpp"
#include "admmtk/tensor.hpp"

// Minimal convolutional stack with explicit backward passes. Everything runs
// on H x W x C tensors; 1-D signals ride along as {n, 1, 1}.

namespace admmtk::nn {

enum class Activation { linear, relu, sigmoid };
enum class Padding { periodic, zero };

struct ConvSpec {
  int64_t kh = 1, kw = 1;
  int64_t cin = 1, cout = 1;
  int64_t stride_h = 1, stride_w = 1;
  int64_t center_h = 0, center_w = 0;
  Padding padding = Padding::periodic;
  Activation act = Activation::linear;
};

namespace detail {

inline int64_t wrap(int64_t i, int64_t n) {
  i %= n;
  return i < 0 ? i + n : i;
}

inline double activate(double x, Activation a) {
  switch (a) {
    case Activation::linear: return x;
    case Activation::relu: return x > 0.0 ? x : 0.0;
    case Activation::sigmoid: return 1.0 / (1.0 + std::exp(-x));
  }
  return x;
}

inline double activate_grad(double pre, Activation a) {
  switch (a) {
    case Activation::linear: return 1.0;
    case Activation::relu: return pre > 0.0 ? 1.0 : 0.0;
    case Activation::sigmoid: {
      double s = 1.0 / (1.0 + std::exp(-pre));
      return s * (1.0 - s);
    }
  }
  return 1.0;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Convolution primitives (no activation). conv_scatter is the exact adjoint
// of conv_forward as a linear map in x, which makes transpose layers and
// input gradients the same routine.
// ---------------------------------------------------------------------------

inline Tensor conv_forward(const Tensor& x, const Tensor& K, const ConvSpec& s) {
  const int64_t H = x.shape[0], W = x.shape[1];
  const int64_t oh = H / s.stride_h, ow = W / s.stride_w;
  Tensor out({oh, ow, s.cout});
  for (int64_t i = 0; i < oh; ++i) {
    for (int64_t j = 0; j < ow; ++j) {
      double* o = out.data.data() + (i * ow + j) * s.cout;
      for (int64_t a = 0; a < s.kh; ++a) {
        int64_t ii = i * s.stride_h + a - s.center_h;
        if (s.padding == Padding::periodic)
          ii = detail::wrap(ii, H);
        else if (ii < 0 || ii >= H)
          continue;
        for (int64_t b = 0; b < s.kw; ++b) {
          int64_t jj = j * s.stride_w + b - s.center_w;
          if (s.padding == Padding::periodic)
            jj = detail::wrap(jj, W);
          else if (jj < 0 || jj >= W)
            continue;
          const double* xv = x.data.data() + (ii * W + jj) * s.cin;
          const double* kk = K.data.data() + (a * s.kw + b) * s.cin * s.cout;
          for (int64_t ci = 0; ci < s.cin; ++ci) {
            const double xc = xv[ci];
            const double* kr = kk + ci * s.cout;
            for (int64_t co = 0; co < s.cout; ++co) o[co] += xc * kr[co];
          }
        }
      }
    }
  }
  return out;
}

inline Tensor conv_scatter(const Tensor& t, const Tensor& K, const ConvSpec& s) {
  const int64_t oh = t.shape[0], ow = t.shape[1];
  const int64_t H = oh * s.stride_h, W = ow * s.stride_w;
  Tensor out({H, W, s.cin});
  for (int64_t i = 0; i < oh; ++i) {
    for (int64_t j = 0; j < ow; ++j) {
      const double* tv = t.data.data() + (i * ow + j) * s.cout;
      for (int64_t a = 0; a < s.kh; ++a) {
        int64_t ii = i * s.stride_h + a - s.center_h;
        if (s.padding == Padding::periodic)
          ii = detail::wrap(ii, H);
        else if (ii < 0 || ii >= H)
          continue;
        for (int64_t b = 0; b < s.kw; ++b) {
          int64_t jj = j * s.stride_w + b - s.center_w;
          if (s.padding == Padding::periodic)
            jj = detail::wrap(jj, W);
          else if (jj < 0 || jj >= W)
            continue;
          double* o = out.data.data() + (ii * W + jj) * s.cin;
          const double* kk = K.data.data() + (a * s.kw + b) * s.cin * s.cout;
          for (int64_t ci = 0; ci < s.cin; ++ci) {
            const double* kr = kk + ci * s.cout;
            double acc = 0.0;
            for (int64_t co = 0; co < s.cout; ++co) acc += kr[co] * tv[co];
            o[ci] += acc;
          }
        }
      }
    }
  }
  return out;
}

inline Tensor conv_kernel_grad(const Tensor& x, const Tensor& g, const ConvSpec& s) {
  const int64_t H = x.shape[0], W = x.shape[1];
  const int64_t oh = g.shape[0], ow = g.shape[1];
  Tensor dK({s.kh, s.kw, s.cin, s.cout});
  for (int64_t i = 0; i < oh; ++i) {
    for (int64_t j = 0; j < ow; ++j) {
      const double* gv = g.data.data() + (i * ow + j) * s.cout;
      for (int64_t a = 0; a < s.kh; ++a) {
        int64_t ii = i * s.stride_h + a - s.center_h;
        if (s.padding == Padding::periodic)
          ii = detail::wrap(ii, H);
        else if (ii < 0 || ii >= H)
          continue;
        for (int64_t b = 0; b < s.kw; ++b) {
          int64_t jj = j * s.stride_w + b - s.center_w;
          if (s.padding == Padding::periodic)
            jj = detail::wrap(jj, W);
          else if (jj < 0 || jj >= W)
            continue;
          const double* xv = x.data.data() + (ii * W + jj) * s.cin;
          double* kk = dK.data.data() + (a * s.kw + b) * s.cin * s.cout;
          for (int64_t ci = 0; ci < s.cin; ++ci) {
            const double xc = xv[ci];
            double* kr = kk + ci * s.cout;
            for (int64_t co = 0; co < s.cout; ++co) kr[co] += xc * gv[co];
          }
        }
      }
    }
  }
  return dK;
}

// ---------------------------------------------------------------------------
// ConvNet: ordered Conv / ConvTranspose layers over a single kernel store.
// A transpose layer applies the exact adjoint of its partner conv and uses
// the partner's kernel storage, so the two views can never drift apart.
// ---------------------------------------------------------------------------

struct Layer {
  enum class Kind { conv, conv_transpose };
  Kind kind = Kind::conv;
  ConvSpec spec;  // geometry of the underlying conv (partner's for transposes)
  Activation act = Activation::linear;
  int kernel = -1;
  int partner = -1;
  std::vector<int64_t> in_shape, out_shape;
};

class ConvNet {
 public:
  explicit ConvNet(std::vector<int64_t> input_shape) : input_shape_(std::move(input_shape)) {
    if (input_shape_.size() != 3)
      throw std::invalid_argument("convnet: input shape must be H x W x C");
    cur_shape_ = input_shape_;
  }

  int add_conv(ConvSpec spec) {
    if (spec.cin != cur_shape_[2])
      throw std::invalid_argument("convnet: conv cin does not match incoming channels");
    if (spec.kh <= 0 || spec.kw <= 0 || spec.cout <= 0)
      throw std::invalid_argument("convnet: bad kernel dims");
    if (spec.stride_h <= 0 || spec.stride_w <= 0 || cur_shape_[0] % spec.stride_h != 0 ||
        cur_shape_[1] % spec.stride_w != 0)
      throw std::invalid_argument("convnet: stride must divide the spatial dims");
    if (spec.center_h < 0 || spec.center_h >= spec.kh || spec.center_w < 0 || spec.center_w >= spec.kw)
      throw std::invalid_argument("convnet: kernel center out of range");
    Layer l;
    l.kind = Layer::Kind::conv;
    l.spec = spec;
    l.act = spec.act;
    l.kernel = static_cast<int>(kernels_.size());
    l.in_shape = cur_shape_;
    l.out_shape = {cur_shape_[0] / spec.stride_h, cur_shape_[1] / spec.stride_w, spec.cout};
    kernels_.emplace_back(std::vector<int64_t>{spec.kh, spec.kw, spec.cin, spec.cout});
    cur_shape_ = l.out_shape;
    layers_.push_back(std::move(l));
    return static_cast<int>(layers_.size()) - 1;
  }

  int add_transpose_of(int conv_layer, Activation act) {
    if (conv_layer < 0 || conv_layer >= static_cast<int>(layers_.size()) ||
        layers_[conv_layer].kind != Layer::Kind::conv)
      throw std::invalid_argument("convnet: transpose partner must be an existing conv layer");
    const Layer& partner = layers_[conv_layer];
    if (cur_shape_ != partner.out_shape)
      throw std::invalid_argument("convnet: transpose input must match partner conv output");
    Layer l;
    l.kind = Layer::Kind::conv_transpose;
    l.spec = partner.spec;
    l.act = act;
    l.kernel = partner.kernel;
    l.partner = conv_layer;
    l.in_shape = partner.out_shape;
    l.out_shape = partner.in_shape;
    cur_shape_ = l.out_shape;
    layers_.push_back(std::move(l));
    return static_cast<int>(layers_.size()) - 1;
  }

  const std::vector<int64_t>& input_shape() const { return input_shape_; }
  const std::vector<int64_t>& output_shape() const { return cur_shape_; }
  size_t num_layers() const { return layers_.size(); }
  const Layer& layer(size_t i) const { return layers_[i]; }
  std::vector<Tensor>& kernels() { return kernels_; }
  const std::vector<Tensor>& kernels() const { return kernels_; }

  /// Zero-mean Gaussian init, std = 1/sqrt(fan-in).
  void init_weights(RngStream& rng) {
    for (auto& k : kernels_) {
      const double std_dev = 1.0 / std::sqrt(static_cast<double>(k.shape[0] * k.shape[1] * k.shape[2]));
      for (auto& v : k.data) v = std_dev * rng.next_gaussian();
    }
  }

  struct Cache {
    const ConvNet* net = nullptr;
    std::vector<Tensor> inputs;  // per-layer input
    std::vector<Tensor> pre;     // per-layer pre-activation
    Tensor out;
  };

  Cache forward_cache(const Tensor& x) const {
    if (x.shape != input_shape_) throw std::invalid_argument("convnet: forward input shape mismatch");
    Cache c;
    c.net = this;
    Tensor cur = x;
    for (const auto& l : layers_) {
      c.inputs.push_back(cur);
      const Tensor& K = kernels_[static_cast<size_t>(l.kernel)];
      Tensor pre = l.kind == Layer::Kind::conv ? conv_forward(cur, K, l.spec)
                                               : conv_scatter(cur, K, l.spec);
      c.pre.push_back(pre);
      if (l.act != Activation::linear)
        for (auto& v : pre.data) v = detail::activate(v, l.act);
      cur = std::move(pre);
    }
    c.out = std::move(cur);
    return c;
  }

  Tensor forward(const Tensor& x) const { return forward_cache(x).out; }

  struct Grads {
    std::vector<Tensor> kernel;  // aligned with kernels(); shared uses accumulate
    Tensor input;
  };

  /// Gradients of the scalar loss whose gradient at the output is gout.
  Grads backward(const Cache& cache, const Tensor& gout) const {
    if (cache.net != this || cache.inputs.size() != layers_.size())
      throw std::invalid_argument("convnet: stale or foreign forward cache");
    if (gout.shape != cur_shape_) throw std::invalid_argument("convnet: upstream gradient shape mismatch");
    Grads g;
    g.kernel.reserve(kernels_.size());
    for (const auto& k : kernels_) g.kernel.emplace_back(Tensor::zeros(k.shape));
    Tensor grad = gout;
    for (size_t li = layers_.size(); li-- > 0;) {
      const Layer& l = layers_[li];
      Tensor gpre = grad;
      if (l.act != Activation::linear)
        for (size_t i = 0; i < gpre.data.size(); ++i)
          gpre.data[i] *= detail::activate_grad(cache.pre[li].data[i], l.act);
      const Tensor& K = kernels_[static_cast<size_t>(l.kernel)];
      Tensor dk = l.kind == Layer::Kind::conv ? conv_kernel_grad(cache.inputs[li], gpre, l.spec)
                                              : conv_kernel_grad(gpre, cache.inputs[li], l.spec);
      Tensor& acc = g.kernel[static_cast<size_t>(l.kernel)];
      for (size_t i = 0; i < acc.data.size(); ++i) acc.data[i] += dk.data[i];
      grad = l.kind == Layer::Kind::conv ? conv_scatter(gpre, K, l.spec)
                                         : conv_forward(gpre, K, l.spec);
    }
    g.input = std::move(grad);
    return g;
  }

 private:
  std::vector<int64_t> input_shape_, cur_shape_;
  std::vector<Layer> layers_;
  std::vector<Tensor> kernels_;
};

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

struct TrainConfig {
  double lr = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  int64_t batch = 32;
  int64_t steps = 2000;
  double noise_sigma = 0.1;
  uint64_t seed = 0;
};

struct AdamState {
  std::vector<Tensor> m, v;
  int64_t t = 0;
};

inline void adam_step(std::vector<Tensor*> params, const std::vector<Tensor>& grads, AdamState& st,
                      const TrainConfig& cfg) {
  if (cfg.lr <= 0.0) throw std::invalid_argument("adam_step: learning rate must be > 0");
  if (params.size() != grads.size()) throw std::invalid_argument("adam_step: param/grad count mismatch");
  constexpr double kEps = 1e-8;
  if (st.m.empty()) {
    for (const auto* p : params) {
      st.m.emplace_back(Tensor::zeros(p->shape));
      st.v.emplace_back(Tensor::zeros(p->shape));
    }
  }
  st.t += 1;
  const double c1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(st.t));
  const double c2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(st.t));
  for (size_t p = 0; p < params.size(); ++p) {
    auto& th = params[p]->data;
    const auto& g = grads[p].data;
    auto& m = st.m[p].data;
    auto& v = st.v[p].data;
    for (size_t i = 0; i < th.size(); ++i) {
      m[i] = cfg.adam_beta1 * m[i] + (1.0 - cfg.adam_beta1) * g[i];
      v[i] = cfg.adam_beta2 * v[i] + (1.0 - cfg.adam_beta2) * g[i] * g[i];
      th[i] -= cfg.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + kEps);
    }
  }
}

// ---------------------------------------------------------------------------
// Symmetric inversion surrogate: forward cascade W, then the shared-kernel
// transpose cascade, so the materialized linear-mode map is W^T W (symmetric
// PSD by construction).
// ---------------------------------------------------------------------------

struct SymmetricConvNet {
  ConvNet net;
  int64_t depth = 0;
  Activation mode = Activation::linear;

  /// eps is accepted in any shape with the right element count.
  Tensor apply(const Tensor& eps) const {
    if (eps.numel() != signal_numel())
      throw std::invalid_argument("symmetric net: input size mismatch");
    Tensor out = net.forward(eps.reshaped(net.input_shape()));
    return out.reshaped(eps.shape);
  }

  int64_t signal_numel() const {
    const auto& s = net.input_shape();
    return s[0] * s[1] * s[2];
  }
};

inline std::vector<int64_t> as_hwc(const std::vector<int64_t>& shape) {
  if (shape.size() == 3) return shape;
  if (shape.size() == 1) return {shape[0], 1, 1};
  throw std::invalid_argument("expected a 1-D signal or an H x W x C image");
}

/// W has one conv per entry of `channels`; kernel extent k is clipped to the
/// signal dims. relu mode activates every layer except the final transpose.
inline SymmetricConvNet make_symmetric_net(const std::vector<int64_t>& signal_shape,
                                           const std::vector<int64_t>& channels, int64_t k,
                                           Activation mode, RngStream& rng) {
  if (channels.empty()) throw std::invalid_argument("symmetric net: needs at least one conv layer");
  if (mode == Activation::sigmoid) throw std::invalid_argument("symmetric net: mode is linear or relu");
  auto in = as_hwc(signal_shape);
  SymmetricConvNet s{ConvNet(in), static_cast<int64_t>(channels.size()), mode};
  int64_t cin = in[2];
  std::vector<int> conv_ids;
  for (int64_t cout : channels) {
    ConvSpec spec;
    spec.kh = std::min<int64_t>(k, in[0]);
    spec.kw = std::min<int64_t>(k, in[1]);
    spec.cin = cin;
    spec.cout = cout;
    spec.center_h = spec.kh / 2;
    spec.center_w = spec.kw / 2;
    spec.padding = Padding::periodic;
    spec.act = mode == Activation::relu ? Activation::relu : Activation::linear;
    conv_ids.push_back(s.net.add_conv(spec));
    cin = cout;
  }
  for (size_t i = conv_ids.size(); i-- > 0;) {
    Activation act = (mode == Activation::relu && i != 0) ? Activation::relu : Activation::linear;
    s.net.add_transpose_of(conv_ids[i], act);
  }
  s.net.init_weights(rng);
  return s;
}

// ---------------------------------------------------------------------------
// Fixed network for B^-1 = beta I + A A^T, and the learned z-solver
// K = beta^-1 (I - A^T C A).
// ---------------------------------------------------------------------------

inline Tensor apply_B_inverse(const linop::LinearOperatorDescriptor& A, double beta, const Tensor& eps) {
  if (eps.numel() != linop::output_numel(A))
    throw std::invalid_argument("apply_B_inverse: eps size does not match output_dim(A)");
  Tensor e = eps.reshaped(linop::output_shape(A));
  Tensor back = linop::apply(A, linop::apply_adjoint(A, e));
  Tensor out = eps;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = beta * eps.data[i] + back.data[i];
  return out;
}

struct LearnedK {
  linop::LinearOperatorDescriptor A;
  double beta = 0.0;
  std::function<Tensor(const Tensor&)> c_apply;

  /// Single pass: beta^-1 (rhs - A^T C(A rhs)). No inner iterations.
  Tensor solve(const Tensor& rhs) const {
    if (rhs.numel() != linop::input_numel(A))
      throw std::invalid_argument("learned K: rhs size does not match input_dim(A)");
    Tensor ar = linop::apply(A, rhs.reshaped(linop::input_shape(A)));
    Tensor c = c_apply(ar);
    Tensor back = linop::apply_adjoint(A, c.reshaped(linop::output_shape(A)));
    Tensor out = rhs;
    const double inv_beta = 1.0 / beta;
    for (size_t i = 0; i < out.data.size(); ++i)
      out.data[i] = inv_beta * (rhs.data[i] - back.data[i]);
    return out;
  }
};

inline LearnedK build_learned_K(linop::LinearOperatorDescriptor A, double beta,
                                std::shared_ptr<const SymmetricConvNet> net) {
  if (beta <= 0.0) throw std::invalid_argument("build_learned_K: beta must be > 0");
  if (net->signal_numel() != linop::output_numel(A))
    throw std::invalid_argument("build_learned_K: net input does not match output_dim(A)");
  return LearnedK{std::move(A), beta,
                  [net](const Tensor& e) { return net->apply(e); }};
}

inline LearnedK build_learned_K_with(linop::LinearOperatorDescriptor A, double beta,
                                     std::function<Tensor(const Tensor&)> c_apply) {
  if (beta <= 0.0) throw std::invalid_argument("build_learned_K: beta must be > 0");
  return LearnedK{std::move(A), beta, std::move(c_apply)};
}

// ---------------------------------------------------------------------------
// Inversion-net training: minimize
//   E_eps[ |eps - C(B^-1 eps)|^2 + |eps - B^-1 C(eps)|^2 ],  eps ~ N(0, I),
// using only forward applications of B^-1. No signal data is involved.
// ---------------------------------------------------------------------------

/// Monte-Carlo loss for any candidate C, normalized per entry and per sample.
inline double inversion_loss(const linop::LinearOperatorDescriptor& A, double beta,
                             const std::function<Tensor(const Tensor&)>& c_apply,
                             const std::vector<Tensor>& eps_batch) {
  double loss = 0.0;
  for (const auto& eps : eps_batch) {
    Tensor q = apply_B_inverse(A, beta, eps);
    Tensor r1 = sub(eps, c_apply(q));
    Tensor r2 = sub(eps, apply_B_inverse(A, beta, c_apply(eps)));
    loss += l2_norm_sq(r1) + l2_norm_sq(r2);
  }
  return loss / (static_cast<double>(eps_batch.size()) * static_cast<double>(eps_batch[0].numel()));
}

struct InversionTrainResult {
  SymmetricConvNet net;
  double initial_loss = 0.0;
  double final_loss = 0.0;
};

inline InversionTrainResult train_inversion_net(const linop::LinearOperatorDescriptor& A, double beta,
                                                const TrainConfig& cfg,
                                                const std::vector<int64_t>& channels = {8, 8},
                                                int64_t kernel_extent = 4,
                                                Activation mode = Activation::linear) {
  if (beta <= 0.0) throw std::invalid_argument("train_inversion_net: beta must be > 0");
  RngStream rng(cfg.seed);
  auto meas_shape = linop::output_shape(A);
  SymmetricConvNet sym = make_symmetric_net(meas_shape, channels, kernel_extent, mode, rng);
  ConvNet& net = sym.net;
  const auto net_in = net.input_shape();
  const double norm = 1.0 / (static_cast<double>(cfg.batch) * static_cast<double>(sym.signal_numel()));

  AdamState adam;
  InversionTrainResult res{std::move(sym), 0.0, 0.0};
  ConvNet& live = res.net.net;

  for (int64_t step = 0; step < cfg.steps; ++step) {
    std::vector<Tensor> kgrads;
    for (const auto& k : live.kernels()) kgrads.emplace_back(Tensor::zeros(k.shape));
    double loss = 0.0;
    for (int64_t bi = 0; bi < cfg.batch; ++bi) {
      Tensor eps = gaussian_sample(net_in, 1.0, rng);
      // term 1: reconstruct eps from B^-1 eps through C
      Tensor q = apply_B_inverse(A, beta, eps);
      auto c1 = live.forward_cache(q.reshaped(net_in));
      Tensor r1 = sub(eps, c1.out);
      loss += l2_norm_sq(r1);
      auto g1 = live.backward(c1, scale(r1, -2.0 * norm));
      // term 2: reconstruct eps from C eps through B^-1
      auto c2 = live.forward_cache(eps);
      Tensor r2 = sub(eps, apply_B_inverse(A, beta, c2.out).reshaped(net_in));
      loss += l2_norm_sq(r2);
      auto g2 = live.backward(c2, scale(apply_B_inverse(A, beta, r2), -2.0 * norm).reshaped(net_in));
      for (size_t k = 0; k < kgrads.size(); ++k)
        for (size_t i = 0; i < kgrads[k].data.size(); ++i)
          kgrads[k].data[i] += g1.kernel[k].data[i] + g2.kernel[k].data[i];
    }
    loss *= norm;
    if (!std::isfinite(loss))
      throw std::runtime_error("train_inversion_net: loss became non-finite at step " +
                               std::to_string(step));
    if (step == 0) res.initial_loss = loss;
    std::vector<Tensor*> params;
    for (auto& k : live.kernels()) params.push_back(&k);
    adam_step(params, kgrads, adam, cfg);
  }

  // held-out evaluation on fresh noise
  RngStream eval_rng(cfg.seed ^ 0x5DEECE66DULL);
  std::vector<Tensor> eval;
  for (int64_t i = 0; i < std::max<int64_t>(cfg.batch, 16); ++i)
    eval.push_back(gaussian_sample(net_in, 1.0, eval_rng));
  res.final_loss =
      inversion_loss(A, beta, [&](const Tensor& e) { return res.net.apply(e); }, eval);
  return res;
}

// ---------------------------------------------------------------------------
// Conditional pixel-shuffling denoising auto-encoder. Layout mirrors the
// usual recipe: shuffle to measurement scale, conv stack, concatenate the
// measurement channel-wise, conv stack back to C r^2 channels, unshuffle.
// ---------------------------------------------------------------------------

struct CdaeArch {
  int64_t r = 4;
  int64_t k = 3;
  std::vector<int64_t> pre_channels = {32, 16};
  std::vector<int64_t> post_channels = {32};
  bool conditioned = true;
  Activation hidden_act = Activation::relu;
};

struct CdaeNet {
  int64_t r = 1;
  bool conditioned = false;
  std::vector<int64_t> x_shape;  // {H, W, C}
  std::vector<int64_t> y_shape;  // {H/r, W/r, Cy}; empty when unconditioned
  ConvNet pre;
  ConvNet post;

  struct Cache {
    ConvNet::Cache pre_cache;
    ConvNet::Cache post_cache;
    Tensor out;
  };

  Tensor forward(const Tensor& x_tilde, const Tensor* y) const {
    return forward_cache(x_tilde, y).out;
  }

  Cache forward_cache(const Tensor& x_tilde, const Tensor* y) const {
    if (x_tilde.shape != x_shape) throw std::invalid_argument("cdae: input shape mismatch");
    Cache c;
    Tensor h = prox::pixel_shuffle(x_tilde, r);
    if (pre.num_layers() > 0) {
      c.pre_cache = pre.forward_cache(h);
      h = c.pre_cache.out;
    }
    if (conditioned) {
      if (y == nullptr) throw std::invalid_argument("cdae: conditioned net requires y");
      if (y->shape != y_shape) throw std::invalid_argument("cdae: y shape mismatch");
      h = concat_channels(h, *y);
    }
    c.post_cache = post.forward_cache(h);
    c.out = prox::pixel_unshuffle(c.post_cache.out, r);
    return c;
  }

  struct Grads {
    std::vector<Tensor> kernel;  // pre kernels then post kernels
  };

  Grads backward(const Cache& c, const Tensor& gout) const {
    Grads g;
    Tensor glr = prox::pixel_shuffle(gout, r);
    auto gpost = post.backward(c.post_cache, glr);
    Tensor gh = std::move(gpost.input);
    if (conditioned) gh = take_channels(gh, gh.shape[2] - y_shape[2]);
    if (pre.num_layers() > 0) {
      auto gpre = pre.backward(c.pre_cache, gh);
      g.kernel = std::move(gpre.kernel);
    }
    for (auto& k : gpost.kernel) g.kernel.push_back(std::move(k));
    return g;
  }

  std::vector<Tensor*> params() {
    std::vector<Tensor*> p;
    for (auto& k : pre.kernels()) p.push_back(&k);
    for (auto& k : post.kernels()) p.push_back(&k);
    return p;
  }

  static Tensor concat_channels(const Tensor& a, const Tensor& b) {
    if (a.shape[0] != b.shape[0] || a.shape[1] != b.shape[1])
      throw std::invalid_argument("concat_channels: spatial dims differ");
    Tensor out({a.shape[0], a.shape[1], a.shape[2] + b.shape[2]});
    const int64_t ca = a.shape[2], cb = b.shape[2];
    for (int64_t i = 0; i < a.shape[0]; ++i)
      for (int64_t j = 0; j < a.shape[1]; ++j) {
        for (int64_t c = 0; c < ca; ++c) out.at(i, j, c) = a.at(i, j, c);
        for (int64_t c = 0; c < cb; ++c) out.at(i, j, ca + c) = b.at(i, j, c);
      }
    return out;
  }

  static Tensor take_channels(const Tensor& a, int64_t count) {
    Tensor out({a.shape[0], a.shape[1], count});
    for (int64_t i = 0; i < a.shape[0]; ++i)
      for (int64_t j = 0; j < a.shape[1]; ++j)
        for (int64_t c = 0; c < count; ++c) out.at(i, j, c) = a.at(i, j, c);
    return out;
  }
};

/// Builds the cPSDAE topology for signals of shape x_shape ({H, W, C}).
/// y_channels is ignored when arch.conditioned is false.
inline CdaeNet make_cdae(const std::vector<int64_t>& x_shape, int64_t y_channels, const CdaeArch& arch,
                         RngStream& rng) {
  auto xs = as_hwc(x_shape);
  if (xs[0] % arch.r != 0 || xs[1] % arch.r != 0)
    throw std::invalid_argument("cdae: r must divide the spatial dims");
  const int64_t sh = xs[0] / arch.r, sw = xs[1] / arch.r;
  const int64_t shuffled_ch = xs[2] * arch.r * arch.r;

  CdaeNet net{arch.r, arch.conditioned, xs,
              arch.conditioned ? std::vector<int64_t>{sh, sw, y_channels} : std::vector<int64_t>{},
              ConvNet({sh, sw, shuffled_ch}), ConvNet({1, 1, 1})};

  int64_t ch = shuffled_ch;
  auto conv = [&](int64_t cin, int64_t cout, Activation act) {
    ConvSpec s;
    s.kh = std::min<int64_t>(arch.k, sh);
    s.kw = std::min<int64_t>(arch.k, sw);
    s.cin = cin;
    s.cout = cout;
    s.center_h = s.kh / 2;
    s.center_w = s.kw / 2;
    s.padding = Padding::periodic;
    s.act = act;
    return s;
  };
  for (int64_t cout : arch.pre_channels) {
    net.pre.add_conv(conv(ch, cout, arch.hidden_act));
    ch = cout;
  }
  if (arch.conditioned) ch += y_channels;
  net.post = ConvNet({sh, sw, ch});
  for (int64_t cout : arch.post_channels) {
    net.post.add_conv(conv(ch, cout, arch.hidden_act));
    ch = cout;
  }
  net.post.add_conv(conv(ch, shuffled_ch, Activation::linear));
  net.pre.init_weights(rng);
  net.post.init_weights(rng);
  return net;
}

struct CdaeTrainResult {
  CdaeNet net;
  double heldout_nmse = 0.0;        // reconstruction vs ground truth
  double heldout_input_nmse = 0.0;  // corrupted input vs ground truth
};

/// Pairs are (ground truth x, measurement y). Corruption is Gaussian with the
/// configured sigma; the loss is the mean squared reconstruction error.
inline CdaeTrainResult train_cdae(const std::vector<std::pair<Tensor, Tensor>>& train_pairs,
                                  const std::vector<std::pair<Tensor, Tensor>>& heldout_pairs,
                                  double corruption_sigma, const TrainConfig& cfg, const CdaeArch& arch) {
  if (train_pairs.empty()) throw std::invalid_argument("train_cdae: empty dataset");
  RngStream rng(cfg.seed);
  const auto& x0 = train_pairs.front().first;
  const int64_t y_ch = arch.conditioned ? train_pairs.front().second.shape.back() : 0;
  CdaeNet net = make_cdae(x0.shape, y_ch, arch, rng);
  const double norm = 1.0 / (static_cast<double>(cfg.batch) * static_cast<double>(x0.numel()));

  AdamState adam;
  for (int64_t step = 0; step < cfg.steps; ++step) {
    std::vector<Tensor> kgrads;
    for (auto* p : net.params()) kgrads.emplace_back(Tensor::zeros(p->shape));
    double loss = 0.0;
    for (int64_t bi = 0; bi < cfg.batch; ++bi) {
      const auto& pair = train_pairs[rng.next_u64() % train_pairs.size()];
      Tensor xt = pair.first;
      if (corruption_sigma > 0.0) {
        Tensor n = gaussian_sample(xt.shape, corruption_sigma, rng);
        xt = add(xt, n);
      }
      auto cache = net.forward_cache(xt, arch.conditioned ? &pair.second : nullptr);
      Tensor r = sub(cache.out, pair.first);
      loss += l2_norm_sq(r);
      auto g = net.backward(cache, scale(r, 2.0 * norm));
      for (size_t k = 0; k < kgrads.size(); ++k)
        for (size_t i = 0; i < kgrads[k].data.size(); ++i) kgrads[k].data[i] += g.kernel[k].data[i];
    }
    loss *= norm;
    if (!std::isfinite(loss))
      throw std::runtime_error("train_cdae: loss became non-finite at step " + std::to_string(step));
    adam_step(net.params(), kgrads, adam, cfg);
  }

  CdaeTrainResult res{std::move(net), 0.0, 0.0};
  if (!heldout_pairs.empty()) {
    RngStream eval_rng(cfg.seed ^ 0xA5A5A5A5ULL);
    double num = 0.0, den = 0.0;
    for (const auto& pair : heldout_pairs) {
      Tensor xt = pair.first;
      if (corruption_sigma > 0.0) xt = add(xt, gaussian_sample(xt.shape, corruption_sigma, eval_rng));
      Tensor rec = res.net.forward(xt, arch.conditioned ? &pair.second : nullptr);
      num += nmse(rec, pair.first);
      den += nmse(xt, pair.first);
    }
    res.heldout_nmse = num / static_cast<double>(heldout_pairs.size());
    res.heldout_input_nmse = den / static_cast<double>(heldout_pairs.size());
  }
  return res;
}

}  // namespace admmtk::nn

// ---------------------------------------------------------------------------
// Proximity-operator surface over the trained networks.
// ---------------------------------------------------------------------------

namespace admmtk::prox {

struct SoftThreshold {
  double kappa = 0.0;
};
struct Ridge {
  double lambda = 0.0;
};
struct LearnedDenoiser {
  std::shared_ptr<const nn::CdaeNet> net;
  bool conditioned_on_y = true;
};

using ProximityOperator = std::variant<SoftThreshold, Ridge, LearnedDenoiser>;

/// Single forward pass through the trained cPSDAE; no iteration.
inline Tensor denoiser_prox(const nn::CdaeNet& net, const Tensor& v, const Tensor* y) {
  if (v.shape != net.x_shape) throw std::invalid_argument("denoiser_prox: v shape mismatch");
  if (net.conditioned && y == nullptr)
    throw std::invalid_argument("denoiser_prox: conditioned net requires y");
  return net.forward(v, net.conditioned ? y : nullptr);
}

inline Tensor apply_prox(const ProximityOperator& p, const Tensor& v, const Tensor* y) {
  if (const auto* st = std::get_if<SoftThreshold>(&p)) return soft_threshold(v, st->kappa);
  if (const auto* rd = std::get_if<Ridge>(&p)) return ridge_prox(v, rd->lambda);
  const auto& ld = std::get<LearnedDenoiser>(p);
  return denoiser_prox(*ld.net, v, ld.conditioned_on_y ? y : nullptr);
}

}  // namespace admmtk::prox

#endif  // ADMMTK_NN_HPP
