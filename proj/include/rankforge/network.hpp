#pragma once

#include <span>
#include <vector>

#include "rankforge/numerics.hpp"

namespace rankforge {

// Fully connected layer, weight is out x in.
struct Dense {
  Mat weight;
  Vec bias;

  Dense() = default;
  Dense(std::size_t out, std::size_t in) : weight(out, in), bias(out, 0.0) {}

  // Uniform(-1/sqrt(in), 1/sqrt(in)) weights, zero bias.
  static Dense fan_in_uniform(std::size_t out, std::size_t in, RngStream& rng);

  std::size_t in() const { return weight.cols; }
  std::size_t out() const { return weight.rows; }

  bool operator==(const Dense&) const = default;
};

// Per-row dropout multipliers (0 or 1/(1-p)) for both hidden layers.
// Empty matrices mean dropout is off.
struct DropoutMasks {
  Mat first;
  Mat second;

  bool enabled() const { return first.rows > 0; }
};

// Independent masks for every row.
DropoutMasks draw_masks(std::size_t rows, std::size_t width1, std::size_t width2, double p,
                        RngStream& rng);
// One mask set shared by all rows (paired MC-dropout passes).
DropoutMasks draw_shared_masks(std::size_t rows, std::size_t width1, std::size_t width2,
                               double p, RngStream& rng);

// Two rectified hidden layers shared by every model head.
struct Trunk {
  Dense layer1;
  Dense layer2;

  static Trunk init(std::size_t in, std::size_t hidden1, std::size_t hidden2, RngStream& rng);
  Trunk zeros_like() const;

  std::size_t input_dim() const { return layer1.in(); }
  std::size_t output_dim() const { return layer2.out(); }

  bool operator==(const Trunk&) const = default;
};

struct TrunkCache {
  Mat input;
  Mat pre1, act1;  // act = relu(pre) * mask
  Mat pre2, act2;
  DropoutMasks masks;
};

// Runs X (rows are samples) through the trunk; cache.act2 holds the output.
void trunk_forward(const Trunk& trunk, const Mat& X, const DropoutMasks& masks, TrunkCache& cache);
// Accumulates parameter gradients given dLoss/d(act2).
void trunk_backward(const Trunk& trunk, const TrunkCache& cache, const Mat& grad_out, Trunk& grad);

// Features of the listed dataset rows stacked into a matrix.
Mat stack_rows(const std::vector<const Vec*>& rows, std::size_t dim);

// Parameter blocks in a fixed declared order, for optimizers and checkpoints.
void append_blocks(Dense& d, std::vector<std::span<double>>& out);
void append_blocks(Trunk& t, std::vector<std::span<double>>& out);

// SGD with momentum and L2 decay:
//   v <- momentum * v + (g + weight_decay * w);  w <- w - lr * v
void sgd_momentum_step(std::span<const std::span<double>> params,
                       std::span<const std::span<double>> grads,
                       std::span<const std::span<double>> velocity, double lr, double momentum,
                       double weight_decay);

}  // namespace rankforge
