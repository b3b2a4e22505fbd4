#ifndef ADMMTK_TENSOR_HPP
#define ADMMTK_TENSOR_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace admmtk {

inline constexpr double kPi = 3.14159265358979323846;

namespace detail {
inline int64_t checked_numel(const std::vector<int64_t>& shape) {
  if (shape.empty()) throw std::invalid_argument("tensor: shape must have at least one dimension");
  int64_t n = 1;
  for (int64_t d : shape) {
    if (d <= 0) throw std::invalid_argument("tensor: dimension sizes must be positive");
    n *= d;
  }
  return n;
}
}  // namespace detail

/// Dense row-major array of 64-bit floats. Images are laid out H x W x C
/// (channel-last); 1-D signals use a single dimension.
struct Tensor {
  std::vector<int64_t> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<int64_t> s)
      : shape(std::move(s)), data(static_cast<size_t>(detail::checked_numel(shape)), 0.0) {}
  Tensor(std::vector<int64_t> s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
    if (static_cast<int64_t>(data.size()) != detail::checked_numel(shape))
      throw std::invalid_argument("tensor: data length does not match shape product");
  }

  static Tensor zeros(std::vector<int64_t> s) { return Tensor(std::move(s)); }
  static Tensor full(std::vector<int64_t> s, double v) {
    Tensor t(std::move(s));
    for (auto& x : t.data) x = v;
    return t;
  }

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  bool empty() const { return data.empty(); }

  double& operator[](int64_t i) { return data[static_cast<size_t>(i)]; }
  double operator[](int64_t i) const { return data[static_cast<size_t>(i)]; }

  // H x W x C access for 3-D tensors.
  double& at(int64_t i, int64_t j, int64_t c) {
    return data[static_cast<size_t>((i * shape[1] + j) * shape[2] + c)];
  }
  double at(int64_t i, int64_t j, int64_t c) const {
    return data[static_cast<size_t>((i * shape[1] + j) * shape[2] + c)];
  }

  Tensor reshaped(std::vector<int64_t> s) const {
    if (detail::checked_numel(s) != numel())
      throw std::invalid_argument("tensor: reshape changes element count");
    return Tensor(std::move(s), data);
  }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

inline bool all_finite(const Tensor& t) {
  for (double v : t.data)
    if (!std::isfinite(v)) return false;
  return true;
}

inline void require_finite(const Tensor& t, const char* context) {
  if (!all_finite(t)) throw std::runtime_error(std::string(context) + ": non-finite tensor entries");
}

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* context) {
  if (!a.same_shape(b)) throw std::invalid_argument(std::string(context) + ": shape mismatch");
}

// ---------------------------------------------------------------------------
// Elementwise helpers. All return fresh tensors; inputs are never modified.
// ---------------------------------------------------------------------------

inline Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor r = a;
  for (size_t i = 0; i < r.data.size(); ++i) r.data[i] += b.data[i];
  return r;
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  Tensor r = a;
  for (size_t i = 0; i < r.data.size(); ++i) r.data[i] -= b.data[i];
  return r;
}

inline Tensor scale(const Tensor& a, double s) {
  Tensor r = a;
  for (auto& v : r.data) v *= s;
  return r;
}

/// r = a + s * b
inline Tensor axpy(const Tensor& a, double s, const Tensor& b) {
  require_same_shape(a, b, "axpy");
  Tensor r = a;
  for (size_t i = 0; i < r.data.size(); ++i) r.data[i] += s * b.data[i];
  return r;
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

inline double dot(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "dot");
  double s = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) s += a.data[i] * b.data[i];
  return s;
}

inline double l1_norm(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data) s += std::abs(v);
  return s;
}

inline double l2_norm_sq(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data) s += v * v;
  return s;
}

inline double l2_norm(const Tensor& a) { return std::sqrt(l2_norm_sq(a)); }

/// Normalized mean square error |xhat - x|^2 / |x|^2.
inline double nmse(const Tensor& xhat, const Tensor& x) {
  require_same_shape(xhat, x, "nmse");
  double den = l2_norm_sq(x);
  if (den == 0.0) throw std::invalid_argument("nmse: reference signal is identically zero");
  double num = 0.0;
  for (size_t i = 0; i < x.data.size(); ++i) {
    double d = xhat.data[i] - x.data[i];
    num += d * d;
  }
  return num / den;
}

// ---------------------------------------------------------------------------
// RngStream: xoshiro256++ seeded through splitmix64.
//
// The generator is fully specified here so that a given seed yields the same
// u64 sequence on every platform. Doubles are derived as
// ((x >> 12) + 0.5) * 2^-52, giving values strictly inside (0, 1); Gaussians
// use the Box-Muller transform, Laplace draws use the inverse CDF.
// ---------------------------------------------------------------------------

class RngStream {
 public:
  explicit RngStream(uint64_t seed) : seed_(seed) {
    uint64_t x = seed;
    for (auto& s : state_) s = splitmix64(x);
  }

  uint64_t seed() const { return seed_; }

  uint64_t next_u64() {
    const uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform double strictly inside (0, 1).
  double next_unit() { return (static_cast<double>(next_u64() >> 12) + 0.5) * 0x1.0p-52; }

  /// Standard normal via Box-Muller; draws are produced in pairs.
  double next_gaussian() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    double u1 = next_unit();
    double u2 = next_unit();
    double r = std::sqrt(-2.0 * std::log(u1));
    double th = 2.0 * kPi * u2;
    cached_ = r * std::sin(th);
    has_cached_ = true;
    return r * std::cos(th);
  }

  double next_laplace(double mu, double b) {
    double u = next_unit() - 0.5;
    double mag = 1.0 - 2.0 * std::abs(u);
    return mu - b * (u < 0.0 ? -1.0 : 1.0) * std::log(mag);
  }

  /// Independent stream for a labelled substream (datasets, batches).
  RngStream substream(uint64_t label) const {
    uint64_t x = seed_ ^ (0x9E3779B97F4A7C15ULL * (label + 1));
    return RngStream(splitmix64(x));
  }

 private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  static uint64_t splitmix64(uint64_t& x) {
    uint64_t z = (x += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  uint64_t seed_;
  std::array<uint64_t, 4> state_{};
  bool has_cached_ = false;
  double cached_ = 0.0;
};

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

/// i.i.d. N(0, sigma^2) entries; sigma = 0 gives the zero tensor.
inline Tensor gaussian_sample(std::vector<int64_t> shape, double sigma, RngStream& rng) {
  if (shape.empty()) throw std::invalid_argument("gaussian_sample: empty shape");
  if (sigma < 0.0) throw std::invalid_argument("gaussian_sample: sigma must be >= 0");
  Tensor t(std::move(shape));
  for (auto& v : t.data) v = sigma * rng.next_gaussian();
  return t;
}

/// i.i.d. Laplace(mu, b) entries via the inverse-CDF transform.
inline Tensor laplace_sample(std::vector<int64_t> shape, double mu, double b, RngStream& rng) {
  if (shape.empty()) throw std::invalid_argument("laplace_sample: empty shape");
  if (b <= 0.0) throw std::invalid_argument("laplace_sample: scale b must be > 0");
  Tensor t(std::move(shape));
  for (auto& v : t.data) v = rng.next_laplace(mu, b);
  return t;
}

}  // namespace admmtk

#endif  // ADMMTK_TENSOR_HPP
