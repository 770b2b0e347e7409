#pragma once

// Batched forward/backward over row-major minibatches.
//
// Rows are independent in the forward pass and in the input gradient, so
// those loops are split across OpenMP threads by row. Parameter gradients
// are reductions over rows; each output element is owned by exactly one
// thread and summed in row order, so results do not depend on the thread
// count.

#include <span>
#include <vector>

#include "skelrun/nn/mlp.hpp"

namespace skelrun::nn {

namespace kernels {

// z[r, o] = b[o] + sum_i x[r, i] * w[o, i]. wt is scratch of size in*out.
void dense_forward(std::span<const double> x, int rows, int in, std::span<const double> w,
                   std::span<const double> b, int out, std::span<double> z,
                   std::vector<double>& wt);

// dx[r, i] = sum_o dz[r, o] * w[o, i]
void dense_backward_input(std::span<const double> dz, int rows, int out,
                          std::span<const double> w, int in, std::span<double> dx);

// dw[o, i] = sum_r dz[r, o] * x[r, i];  db[o] = sum_r dz[r, o]
void dense_backward_params(std::span<const double> dz, std::span<const double> x, int rows,
                           int in, int out, std::span<double> dw, std::span<double> db);

// In place on z: z <- gain * standardize(z) + norm_bias, per row.
void layer_norm_forward(std::span<double> z, int rows, int n, std::span<const double> gain,
                        std::span<const double> norm_bias, double eps, std::span<double> xhat,
                        std::span<double> inv_std);

// In place on d: upstream gradient w.r.t. the layer-norm output in,
// gradient w.r.t. its input out. Gain/bias gradients are summed over rows.
void layer_norm_backward(std::span<double> d, std::span<const double> xhat,
                         std::span<const double> inv_std, std::span<const double> gain, int rows,
                         int n, std::span<double> dgain, std::span<double> dnorm_bias);

void activation_forward(Activation a, std::span<const double> pre, std::span<double> post);
// In place on d: d <- d * act'(pre).
void activation_backward(Activation a, std::span<const double> pre, std::span<const double> post,
                         std::span<double> d);

}  // namespace kernels

// Activations and scratch for one batched pass; reused across calls.
class BatchWorkspace {
 public:
  int rows() const { return rows_; }
  std::span<const double> output() const;

 private:
  friend void forward_batch(const ParamVector&, std::span<const double>, int, BatchWorkspace&);
  friend void backward_batch(const ParamVector&, BatchWorkspace&, std::span<const double>,
                             std::span<double>, std::span<double>);

  struct Layer {
    std::vector<double> input;
    std::vector<double> xhat;
    std::vector<double> inv_std;
    std::vector<double> pre;
    std::vector<double> post;
  };
  const MlpLayout* layout_ = nullptr;
  std::uint64_t version_ = 0;
  int rows_ = 0;
  std::vector<Layer> layers_;
  std::vector<double> grad_a_;
  std::vector<double> grad_b_;
  std::vector<double> wt_;
};

void forward_batch(const ParamVector& params, std::span<const double> inputs, int rows,
                   BatchWorkspace& ws);

// param_grad receives the row-summed gradient (overwritten). input_grads may
// be empty when the caller does not need it.
void backward_batch(const ParamVector& params, BatchWorkspace& ws,
                    std::span<const double> output_grads, std::span<double> param_grad,
                    std::span<double> input_grads);

struct BatchGradient {
  std::vector<double> outputs;
  std::vector<double> param_grad;
  std::vector<double> input_grads;
};

// Serial reference: per-sample forward/backward from mlp.hpp, summed in row order.
BatchGradient batch_gradient_reference(const ParamVector& params, std::span<const double> inputs,
                                       int rows, std::span<const double> output_grads);

// Batched counterpart of batch_gradient_reference.
BatchGradient batch_gradient(const ParamVector& params, std::span<const double> inputs, int rows,
                             std::span<const double> output_grads, BatchWorkspace& ws);

}  // namespace skelrun::nn
