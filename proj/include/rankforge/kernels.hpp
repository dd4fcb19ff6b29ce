#pragma once

#include <span>

#include "rankforge/numerics.hpp"

// Batched dense-layer kernels. Rows of X are samples; W is out x in.
//
// `parallel` spreads independent output rows across OpenMP threads. Every
// output element is still reduced in one fixed order, so `parallel` and
// `serial` agree bit for bit and training stays deterministic for any
// thread count. `serial` is the reference used by tests and the benchmark.
namespace rankforge::kernels {

namespace serial {
// Y = X W^T + b
void linear_forward(const Mat& X, const Mat& W, std::span<const double> b, Mat& Y);
// dX = dY W
void linear_backward_input(const Mat& dY, const Mat& W, Mat& dX);
// dW += dY^T X, db += column sums of dY
void linear_backward_params(const Mat& dY, const Mat& X, Mat& dW, std::span<double> db);
}  // namespace serial

namespace parallel {
void linear_forward(const Mat& X, const Mat& W, std::span<const double> b, Mat& Y);
void linear_backward_input(const Mat& dY, const Mat& W, Mat& dX);
void linear_backward_params(const Mat& dY, const Mat& X, Mat& dW, std::span<double> db);
}  // namespace parallel

int max_threads();

}  // namespace rankforge::kernels
