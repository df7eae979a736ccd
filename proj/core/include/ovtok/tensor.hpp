#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace ovtok {

/// Dense row-major tensor of doubles. Gradient storage lives on the tensor
/// itself and is allocated lazily by the autograd tape.
struct Tensor {
  std::vector<int> dims;
  std::vector<double> data;
  bool requires_grad = false;
  std::vector<double> grad;  // empty until backward touches this tensor

  Tensor() = default;
  explicit Tensor(std::vector<int> shape, double fill = 0.0)
      : dims(std::move(shape)), data(checked_size(dims), fill) {}
  Tensor(std::vector<int> shape, std::vector<double> values)
      : dims(std::move(shape)), data(std::move(values)) {
    if (data.size() != checked_size(dims))
      throw std::invalid_argument("Tensor: data length does not match dims");
  }

  static std::size_t checked_size(const std::vector<int>& dims) {
    std::size_t n = 1;
    for (int d : dims) {
      if (d <= 0) throw std::invalid_argument("Tensor: nonpositive extent");
      n *= static_cast<std::size_t>(d);
    }
    return n;
  }

  std::size_t size() const { return data.size(); }
  int rank() const { return static_cast<int>(dims.size()); }
  int rows() const { return dims.at(0); }
  int cols() const { return dims.at(1); }

  double& at2(int r, int c) { return data[static_cast<std::size_t>(r) * dims[1] + c]; }
  double at2(int r, int c) const { return data[static_cast<std::size_t>(r) * dims[1] + c]; }

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  }
  void zero_grad() { grad.assign(data.size(), 0.0); }

  bool same_shape(const Tensor& other) const { return dims == other.dims; }
};

using TensorPtr = std::shared_ptr<Tensor>;

inline TensorPtr make_tensor(std::vector<int> dims, double fill = 0.0) {
  return std::make_shared<Tensor>(std::move(dims), fill);
}
inline TensorPtr make_tensor(std::vector<int> dims, std::vector<double> values) {
  return std::make_shared<Tensor>(std::move(dims), std::move(values));
}

std::string shape_string(const std::vector<int>& dims);
bool all_finite(const Tensor& t);

/// Deterministic RNG used everywhere in the repo. Wraps mt19937_64 and
/// derives floating-point draws from raw bits so sequences are identical
/// across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t bits() { return engine_(); }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(bits() >> 11) * 0x1.0p-53; }

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller on raw uniforms.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do { u1 = uniform(); } while (u1 <= 0.0);
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  /// Uniform integer in [0, n).
  std::uint64_t index(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("Rng::index: n == 0");
    // Rejection sampling keeps the draw unbiased.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x = bits();
    while (x >= limit) x = bits();
    return x % n;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[static_cast<std::size_t>(index(i))]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

/// FNV-1a 64-bit hash, used for run manifests and dataset checksums.
std::uint64_t fnv1a64(const void* bytes, std::size_t n, std::uint64_t seed = 0xcbf29ce484222325ULL);

/// Uniform index sampling with endpoints included, round-half-down.
/// count > length repeats the last index to pad.
std::vector<int> uniform_indices(int length, int count);

}  // namespace ovtok
