#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

namespace rankforge {

using Vec = std::vector<double>;

// Dense row-major matrix.
struct Mat {
  std::size_t rows = 0;
  std::size_t cols = 0;
  Vec data;

  Mat() = default;
  Mat(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  static Mat identity(std::size_t n);

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const {
    return {data.data() + r * cols, cols};
  }

  bool operator==(const Mat&) const = default;
};

// Wx + b. Throws std::invalid_argument on dimension mismatch.
Vec affine(const Mat& W, std::span<const double> b, std::span<const double> x);

double sigmoid(double x);
// log(1 + e^x) without overflow.
double softplus(double x);
// Logistic loss of logit z against target t in [0,1]: softplus(z) - t*z.
double bce_with_logit(double z, double t);

double dot(std::span<const double> a, std::span<const double> b);

// Central differences (f(x+h e_i) - f(x-h e_i)) / 2h per coordinate.
Vec finite_diff_gradient(const std::function<double(std::span<const double>)>& f,
                         std::span<const double> x, double h);

// Counter-based generator: draw i of stream (seed, id) is a pure function of
// (seed, id, i), so streams derived from one root seed never interact.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  // Child stream keyed by a name, e.g. root.derive("init").
  RngStream derive(std::string_view name) const;
  RngStream derive(std::uint64_t index) const;

  std::uint64_t next_u64();
  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);
  // Standard normal via Box-Muller.
  double normal();
  bool bernoulli(double p);
  // Uniform integer on [0, n).
  std::uint64_t below(std::uint64_t n);

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

std::uint64_t mix64(std::uint64_t z);
std::uint64_t hash_name(std::string_view name);

}  // namespace rankforge
