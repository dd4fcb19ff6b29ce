#include "rankforge/network.hpp"

#include <cmath>
#include <stdexcept>

#include "rankforge/kernels.hpp"

namespace rankforge {

Dense Dense::fan_in_uniform(std::size_t out, std::size_t in, RngStream& rng) {
  Dense d(out, in);
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  for (double& w : d.weight.data) w = rng.uniform(-bound, bound);
  return d;
}

namespace {

void fill_mask_row(std::span<double> row, double p, RngStream& rng) {
  const double keep_scale = 1.0 / (1.0 - p);
  for (double& v : row) v = rng.bernoulli(p) ? 0.0 : keep_scale;
}

}  // namespace

DropoutMasks draw_masks(std::size_t rows, std::size_t width1, std::size_t width2, double p,
                        RngStream& rng) {
  if (!(p >= 0.0 && p < 1.0)) throw std::invalid_argument("dropout p must be in [0, 1)");
  DropoutMasks m{Mat(rows, width1), Mat(rows, width2)};
  for (std::size_t r = 0; r < rows; ++r) {
    fill_mask_row(m.first.row(r), p, rng);
    fill_mask_row(m.second.row(r), p, rng);
  }
  return m;
}

DropoutMasks draw_shared_masks(std::size_t rows, std::size_t width1, std::size_t width2,
                               double p, RngStream& rng) {
  DropoutMasks one = draw_masks(1, width1, width2, p, rng);
  DropoutMasks m{Mat(rows, width1), Mat(rows, width2)};
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy(one.first.data.begin(), one.first.data.end(), m.first.row(r).begin());
    std::copy(one.second.data.begin(), one.second.data.end(), m.second.row(r).begin());
  }
  return m;
}

Trunk Trunk::init(std::size_t in, std::size_t hidden1, std::size_t hidden2, RngStream& rng) {
  Trunk t;
  t.layer1 = Dense::fan_in_uniform(hidden1, in, rng);
  t.layer2 = Dense::fan_in_uniform(hidden2, hidden1, rng);
  return t;
}

Trunk Trunk::zeros_like() const {
  return {Dense(layer1.out(), layer1.in()), Dense(layer2.out(), layer2.in())};
}

namespace {

void relu_mask(const Mat& pre, const Mat* mask, Mat& act) {
  act = pre;
  for (std::size_t i = 0; i < act.data.size(); ++i) {
    double v = act.data[i] > 0.0 ? act.data[i] : 0.0;
    if (mask) v *= mask->data[i];
    act.data[i] = v;
  }
}

// d(pre) from d(act): zero where the unit was inactive or dropped.
void relu_mask_backward(const Mat& pre, const Mat* mask, Mat& grad) {
  for (std::size_t i = 0; i < grad.data.size(); ++i) {
    if (pre.data[i] <= 0.0)
      grad.data[i] = 0.0;
    else if (mask)
      grad.data[i] *= mask->data[i];
  }
}

}  // namespace

void trunk_forward(const Trunk& trunk, const Mat& X, const DropoutMasks& masks, TrunkCache& cache) {
  if (X.cols != trunk.input_dim())
    throw std::invalid_argument("trunk_forward: expected " + std::to_string(trunk.input_dim()) +
                                " features, got " + std::to_string(X.cols));
  if (masks.enabled() && (masks.first.rows != X.rows || masks.first.cols != trunk.layer1.out() ||
                          masks.second.rows != X.rows || masks.second.cols != trunk.layer2.out()))
    throw std::invalid_argument("trunk_forward: dropout mask shape mismatch");
  cache.input = X;
  cache.masks = masks;
  const bool drop = masks.enabled();
  kernels::parallel::linear_forward(X, trunk.layer1.weight, trunk.layer1.bias, cache.pre1);
  relu_mask(cache.pre1, drop ? &masks.first : nullptr, cache.act1);
  kernels::parallel::linear_forward(cache.act1, trunk.layer2.weight, trunk.layer2.bias, cache.pre2);
  relu_mask(cache.pre2, drop ? &masks.second : nullptr, cache.act2);
}

void trunk_backward(const Trunk& trunk, const TrunkCache& cache, const Mat& grad_out, Trunk& grad) {
  const bool drop = cache.masks.enabled();
  Mat g2 = grad_out;
  relu_mask_backward(cache.pre2, drop ? &cache.masks.second : nullptr, g2);
  kernels::parallel::linear_backward_params(g2, cache.act1, grad.layer2.weight, grad.layer2.bias);
  Mat g1;
  kernels::parallel::linear_backward_input(g2, trunk.layer2.weight, g1);
  relu_mask_backward(cache.pre1, drop ? &cache.masks.first : nullptr, g1);
  kernels::parallel::linear_backward_params(g1, cache.input, grad.layer1.weight, grad.layer1.bias);
}

Mat stack_rows(const std::vector<const Vec*>& rows, std::size_t dim) {
  Mat X(rows.size(), dim);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r]->size() != dim)
      throw std::invalid_argument("feature vector has length " + std::to_string(rows[r]->size()) +
                                  ", expected " + std::to_string(dim));
    std::copy(rows[r]->begin(), rows[r]->end(), X.row(r).begin());
  }
  return X;
}

void append_blocks(Dense& d, std::vector<std::span<double>>& out) {
  out.emplace_back(d.weight.data);
  out.emplace_back(d.bias);
}

void append_blocks(Trunk& t, std::vector<std::span<double>>& out) {
  append_blocks(t.layer1, out);
  append_blocks(t.layer2, out);
}

void sgd_momentum_step(std::span<const std::span<double>> params,
                       std::span<const std::span<double>> grads,
                       std::span<const std::span<double>> velocity, double lr, double momentum,
                       double weight_decay) {
  if (params.size() != grads.size() || params.size() != velocity.size())
    throw std::invalid_argument("sgd_momentum_step: block count mismatch");
  for (std::size_t b = 0; b < params.size(); ++b) {
    auto w = params[b];
    auto g = grads[b];
    auto v = velocity[b];
    if (w.size() != g.size() || w.size() != v.size())
      throw std::invalid_argument("sgd_momentum_step: block size mismatch");
    for (std::size_t i = 0; i < w.size(); ++i) {
      v[i] = momentum * v[i] + (g[i] + weight_decay * w[i]);
      w[i] -= lr * v[i];
    }
  }
}

}  // namespace rankforge
