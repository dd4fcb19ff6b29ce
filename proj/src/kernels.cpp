#include "rankforge/kernels.hpp"

#include <omp.h>

#include <stdexcept>

namespace rankforge::kernels {

namespace {

// Below this many multiply-adds the fork/join costs more than it saves.
constexpr std::size_t kParallelWork = 1 << 15;

void check_forward(const Mat& X, const Mat& W, std::span<const double> b) {
  if (X.cols != W.cols || W.rows != b.size())
    throw std::invalid_argument("linear_forward: dimension mismatch");
}

void check_backward_input(const Mat& dY, const Mat& W) {
  if (dY.cols != W.rows) throw std::invalid_argument("linear_backward_input: dimension mismatch");
}

void check_backward_params(const Mat& dY, const Mat& X, const Mat& dW, std::span<double> db) {
  if (dY.rows != X.rows || dW.rows != dY.cols || dW.cols != X.cols || db.size() != dY.cols)
    throw std::invalid_argument("linear_backward_params: dimension mismatch");
}

inline void forward_row(const Mat& X, const Mat& W, std::span<const double> b, Mat& Y,
                        std::size_t r) {
  const auto x = X.row(r);
  double* y = Y.data.data() + r * Y.cols;
  for (std::size_t o = 0; o < W.rows; ++o) y[o] = dot(x, W.row(o)) + b[o];
}

inline void backward_input_row(const Mat& dY, const Mat& W, Mat& dX, std::size_t r) {
  double* dx = dX.data.data() + r * dX.cols;
  for (std::size_t i = 0; i < dX.cols; ++i) dx[i] = 0.0;
  const double* g = dY.data.data() + r * dY.cols;
  for (std::size_t o = 0; o < W.rows; ++o) {
    const double go = g[o];
    if (go == 0.0) continue;
    const double* w = W.data.data() + o * W.cols;
    for (std::size_t i = 0; i < W.cols; ++i) dx[i] += go * w[i];
  }
}

inline void backward_params_row(const Mat& dY, const Mat& X, Mat& dW, std::span<double> db,
                                std::size_t o) {
  double* dw = dW.data.data() + o * dW.cols;
  double bsum = 0.0;
  for (std::size_t r = 0; r < X.rows; ++r) {
    const double go = dY(r, o);
    if (go == 0.0) continue;
    bsum += go;
    const double* x = X.data.data() + r * X.cols;
    for (std::size_t i = 0; i < X.cols; ++i) dw[i] += go * x[i];
  }
  db[o] += bsum;
}

}  // namespace

namespace serial {

void linear_forward(const Mat& X, const Mat& W, std::span<const double> b, Mat& Y) {
  check_forward(X, W, b);
  if (Y.rows != X.rows || Y.cols != W.rows) Y = Mat(X.rows, W.rows);
  for (std::size_t r = 0; r < X.rows; ++r) forward_row(X, W, b, Y, r);
}

void linear_backward_input(const Mat& dY, const Mat& W, Mat& dX) {
  check_backward_input(dY, W);
  if (dX.rows != dY.rows || dX.cols != W.cols) dX = Mat(dY.rows, W.cols);
  for (std::size_t r = 0; r < dY.rows; ++r) backward_input_row(dY, W, dX, r);
}

void linear_backward_params(const Mat& dY, const Mat& X, Mat& dW, std::span<double> db) {
  check_backward_params(dY, X, dW, db);
  for (std::size_t o = 0; o < dW.rows; ++o) backward_params_row(dY, X, dW, db, o);
}

}  // namespace serial

namespace parallel {

void linear_forward(const Mat& X, const Mat& W, std::span<const double> b, Mat& Y) {
  check_forward(X, W, b);
  if (Y.rows != X.rows || Y.cols != W.rows) Y = Mat(X.rows, W.rows);
  const auto rows = static_cast<std::ptrdiff_t>(X.rows);
  const bool big = X.rows * W.rows * W.cols >= kParallelWork;
#pragma omp parallel for schedule(static) if (big)
  for (std::ptrdiff_t r = 0; r < rows; ++r) forward_row(X, W, b, Y, static_cast<std::size_t>(r));
}

void linear_backward_input(const Mat& dY, const Mat& W, Mat& dX) {
  check_backward_input(dY, W);
  if (dX.rows != dY.rows || dX.cols != W.cols) dX = Mat(dY.rows, W.cols);
  const auto rows = static_cast<std::ptrdiff_t>(dY.rows);
  const bool big = dY.rows * W.rows * W.cols >= kParallelWork;
#pragma omp parallel for schedule(static) if (big)
  for (std::ptrdiff_t r = 0; r < rows; ++r)
    backward_input_row(dY, W, dX, static_cast<std::size_t>(r));
}

void linear_backward_params(const Mat& dY, const Mat& X, Mat& dW, std::span<double> db) {
  check_backward_params(dY, X, dW, db);
  const auto outs = static_cast<std::ptrdiff_t>(dW.rows);
  const bool big = dY.rows * dW.rows * dW.cols >= kParallelWork;
#pragma omp parallel for schedule(static) if (big)
  for (std::ptrdiff_t o = 0; o < outs; ++o)
    backward_params_row(dY, X, dW, db, static_cast<std::size_t>(o));
}

}  // namespace parallel

int max_threads() { return omp_get_max_threads(); }

}  // namespace rankforge::kernels
