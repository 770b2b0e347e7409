#include "skelrun/nn/batch.hpp"

#include <algorithm>
#include <cmath>

namespace skelrun::nn {

namespace {

// Below this many multiply-adds a kernel stays on the calling thread.
constexpr long kParallelWork = 1L << 15;

std::size_t idx(int r, int n) { return static_cast<std::size_t>(r) * static_cast<std::size_t>(n); }

}  // namespace

namespace kernels {

void dense_forward(std::span<const double> x, int rows, int in, std::span<const double> w,
                   std::span<const double> b, int out, std::span<double> z,
                   std::vector<double>& wt) {
  wt.resize(idx(in, out));
  for (int o = 0; o < out; ++o) {
    for (int i = 0; i < in; ++i) wt[idx(i, out) + o] = w[idx(o, in) + i];
  }
  const double* __restrict wtp = wt.data();
  const double* __restrict bp = b.data();
  const long work = static_cast<long>(rows) * in * out;
#pragma omp parallel for schedule(static) if (work > kParallelWork)
  for (int r = 0; r < rows; ++r) {
    double* __restrict zr = z.data() + idx(r, out);
    const double* __restrict xr = x.data() + idx(r, in);
    for (int o = 0; o < out; ++o) zr[o] = bp[o];
    for (int i = 0; i < in; ++i) {
      const double xi = xr[i];
      const double* __restrict wrow = wtp + idx(i, out);
      for (int o = 0; o < out; ++o) zr[o] += xi * wrow[o];
    }
  }
}

void dense_backward_input(std::span<const double> dz, int rows, int out,
                          std::span<const double> w, int in, std::span<double> dx) {
  const long work = static_cast<long>(rows) * in * out;
#pragma omp parallel for schedule(static) if (work > kParallelWork)
  for (int r = 0; r < rows; ++r) {
    double* __restrict dxr = dx.data() + idx(r, in);
    const double* __restrict dzr = dz.data() + idx(r, out);
    std::fill(dxr, dxr + in, 0.0);
    for (int o = 0; o < out; ++o) {
      const double d = dzr[o];
      const double* __restrict wrow = w.data() + idx(o, in);
      for (int i = 0; i < in; ++i) dxr[i] += d * wrow[i];
    }
  }
}

void dense_backward_params(std::span<const double> dz, std::span<const double> x, int rows,
                           int in, int out, std::span<double> dw, std::span<double> db) {
  const long work = static_cast<long>(rows) * in * out;
#pragma omp parallel for schedule(static) if (work > kParallelWork)
  for (int o = 0; o < out; ++o) {
    double* __restrict dwrow = dw.data() + idx(o, in);
    std::fill(dwrow, dwrow + in, 0.0);
    double bsum = 0.0;
    for (int r = 0; r < rows; ++r) {
      const double d = dz[idx(r, out) + o];
      bsum += d;
      const double* __restrict xr = x.data() + idx(r, in);
      for (int i = 0; i < in; ++i) dwrow[i] += d * xr[i];
    }
    db[o] = bsum;
  }
}

void layer_norm_forward(std::span<double> z, int rows, int n, std::span<const double> gain,
                        std::span<const double> norm_bias, double eps, std::span<double> xhat,
                        std::span<double> inv_std) {
  const long work = static_cast<long>(rows) * n * 8;
#pragma omp parallel for schedule(static) if (work > kParallelWork)
  for (int r = 0; r < rows; ++r) {
    double* zr = z.data() + idx(r, n);
    double* xr = xhat.data() + idx(r, n);
    double mean = 0.0;
    for (int j = 0; j < n; ++j) mean += zr[j];
    mean /= n;
    double var = 0.0;
    for (int j = 0; j < n; ++j) var += (zr[j] - mean) * (zr[j] - mean);
    var /= n;
    const double s = 1.0 / std::sqrt(var + eps);
    inv_std[r] = s;
    for (int j = 0; j < n; ++j) {
      xr[j] = (zr[j] - mean) * s;
      zr[j] = gain[j] * xr[j] + norm_bias[j];
    }
  }
}

void layer_norm_backward(std::span<double> d, std::span<const double> xhat,
                         std::span<const double> inv_std, std::span<const double> gain, int rows,
                         int n, std::span<double> dgain, std::span<double> dnorm_bias) {
  // Gain and bias gradients first, while d still holds the upstream gradient.
  for (int j = 0; j < n; ++j) {
    dgain[j] = 0.0;
    dnorm_bias[j] = 0.0;
  }
  for (int r = 0; r < rows; ++r) {
    const double* dr = d.data() + idx(r, n);
    const double* xr = xhat.data() + idx(r, n);
    for (int j = 0; j < n; ++j) {
      dgain[j] += dr[j] * xr[j];
      dnorm_bias[j] += dr[j];
    }
  }
  const long work = static_cast<long>(rows) * n * 8;
#pragma omp parallel for schedule(static) if (work > kParallelWork)
  for (int r = 0; r < rows; ++r) {
    double* dr = d.data() + idx(r, n);
    const double* xr = xhat.data() + idx(r, n);
    double mean_d = 0.0;
    double mean_dx = 0.0;
    for (int j = 0; j < n; ++j) {
      const double dx = dr[j] * gain[j];
      mean_d += dx;
      mean_dx += dx * xr[j];
    }
    mean_d /= n;
    mean_dx /= n;
    const double s = inv_std[r];
    for (int j = 0; j < n; ++j) dr[j] = s * (dr[j] * gain[j] - mean_d - xr[j] * mean_dx);
  }
}

void activation_forward(Activation a, std::span<const double> pre, std::span<double> post) {
  const std::size_t n = pre.size();
  switch (a) {
    case Activation::kIdentity:
      std::copy(pre.begin(), pre.end(), post.begin());
      return;
    case Activation::kElu:
      for (std::size_t k = 0; k < n; ++k) post[k] = pre[k] > 0.0 ? pre[k] : std::expm1(pre[k]);
      return;
    case Activation::kTanh:
      for (std::size_t k = 0; k < n; ++k) post[k] = std::tanh(pre[k]);
      return;
    case Activation::kSigmoid:
      for (std::size_t k = 0; k < n; ++k) post[k] = 1.0 / (1.0 + std::exp(-pre[k]));
      return;
  }
}

void activation_backward(Activation a, std::span<const double> pre, std::span<const double> post,
                         std::span<double> d) {
  const std::size_t n = pre.size();
  switch (a) {
    case Activation::kIdentity:
      return;
    case Activation::kElu:
      for (std::size_t k = 0; k < n; ++k) d[k] *= pre[k] > 0.0 ? 1.0 : post[k] + 1.0;
      return;
    case Activation::kTanh:
      for (std::size_t k = 0; k < n; ++k) d[k] *= 1.0 - post[k] * post[k];
      return;
    case Activation::kSigmoid:
      for (std::size_t k = 0; k < n; ++k) d[k] *= post[k] * (1.0 - post[k]);
      return;
  }
}

}  // namespace kernels

std::span<const double> BatchWorkspace::output() const {
  if (layers_.empty()) return {};
  return layers_.back().post;
}

void forward_batch(const ParamVector& params, std::span<const double> inputs, int rows,
                   BatchWorkspace& ws) {
  const MlpLayout& layout = params.layout();
  if (rows < 0 || inputs.size() != idx(rows, layout.spec.input_dim)) {
    throw DimensionError("forward_batch: inputs do not match rows x input_dim");
  }
  ws.layout_ = &layout;
  ws.version_ = params.version();
  ws.rows_ = rows;
  ws.layers_.resize(layout.layers.size());
  for (std::size_t l = 0; l < layout.layers.size(); ++l) {
    const LayerLayout& L = layout.layers[l];
    auto& c = ws.layers_[l];
    if (l == 0) {
      c.input.assign(inputs.begin(), inputs.end());
    } else {
      c.input = ws.layers_[l - 1].post;
    }
    c.pre.resize(idx(rows, L.out));
    c.post.resize(idx(rows, L.out));
    kernels::dense_forward(c.input, rows, L.in, params.weights(static_cast<int>(l)),
                           params.bias(static_cast<int>(l)), L.out, c.pre, ws.wt_);
    if (L.normalized) {
      c.xhat.resize(idx(rows, L.out));
      c.inv_std.resize(rows);
      kernels::layer_norm_forward(c.pre, rows, L.out, params.gain(static_cast<int>(l)),
                                  params.norm_bias(static_cast<int>(l)), kLayerNormEps, c.xhat,
                                  c.inv_std);
    }
    kernels::activation_forward(L.activation, c.pre, c.post);
  }
}

void backward_batch(const ParamVector& params, BatchWorkspace& ws,
                    std::span<const double> output_grads, std::span<double> param_grad,
                    std::span<double> input_grads) {
  const MlpLayout& layout = params.layout();
  if (ws.layout_ == nullptr || !(ws.layout_->spec == layout.spec) ||
      ws.version_ != params.version()) {
    throw std::invalid_argument("backward_batch: workspace does not belong to these parameters");
  }
  const int rows = ws.rows_;
  if (output_grads.size() != idx(rows, layout.spec.output_dim)) {
    throw DimensionError("backward_batch: output_grads length mismatch");
  }
  if (param_grad.size() != layout.size) throw DimensionError("backward_batch: param_grad size");
  if (!input_grads.empty() && input_grads.size() != idx(rows, layout.spec.input_dim)) {
    throw DimensionError("backward_batch: input_grads size");
  }
  ws.grad_a_.assign(output_grads.begin(), output_grads.end());
  for (int l = static_cast<int>(layout.layers.size()) - 1; l >= 0; --l) {
    const LayerLayout& L = layout.layers[l];
    auto& c = ws.layers_[l];
    std::vector<double>& d = ws.grad_a_;
    kernels::activation_backward(L.activation, c.pre, c.post, d);
    if (L.normalized) {
      kernels::layer_norm_backward(d, c.xhat, c.inv_std, params.gain(l), rows, L.out,
                                   param_grad.subspan(L.gain, L.out),
                                   param_grad.subspan(L.norm_bias, L.out));
    }
    kernels::dense_backward_params(d, c.input, rows, L.in, L.out,
                                   param_grad.subspan(L.weight, idx(L.out, L.in)),
                                   param_grad.subspan(L.bias, L.out));
    if (l > 0 || !input_grads.empty()) {
      ws.grad_b_.resize(idx(rows, L.in));
      kernels::dense_backward_input(d, rows, L.out, params.weights(l), L.in, ws.grad_b_);
      std::swap(ws.grad_a_, ws.grad_b_);
    }
  }
  if (!input_grads.empty()) std::copy(ws.grad_a_.begin(), ws.grad_a_.end(), input_grads.begin());
}

BatchGradient batch_gradient_reference(const ParamVector& params, std::span<const double> inputs,
                                       int rows, std::span<const double> output_grads) {
  const int in = params.spec().input_dim;
  const int out = params.spec().output_dim;
  if (inputs.size() != idx(rows, in) || output_grads.size() != idx(rows, out)) {
    throw DimensionError("batch_gradient_reference: shape mismatch");
  }
  BatchGradient g;
  g.param_grad.assign(params.size(), 0.0);
  g.outputs.reserve(idx(rows, out));
  g.input_grads.reserve(idx(rows, in));
  for (int r = 0; r < rows; ++r) {
    auto f = forward(params, inputs.subspan(idx(r, in), in));
    auto b = backward(params, f.cache, output_grads.subspan(idx(r, out), out));
    g.outputs.insert(g.outputs.end(), f.output.begin(), f.output.end());
    g.input_grads.insert(g.input_grads.end(), b.input_grad.begin(), b.input_grad.end());
    for (std::size_t k = 0; k < g.param_grad.size(); ++k) g.param_grad[k] += b.param_grad[k];
  }
  return g;
}

BatchGradient batch_gradient(const ParamVector& params, std::span<const double> inputs, int rows,
                             std::span<const double> output_grads, BatchWorkspace& ws) {
  forward_batch(params, inputs, rows, ws);
  BatchGradient g;
  g.outputs.assign(ws.output().begin(), ws.output().end());
  g.param_grad.assign(params.size(), 0.0);
  g.input_grads.assign(idx(rows, params.spec().input_dim), 0.0);
  backward_batch(params, ws, output_grads, g.param_grad, g.input_grads);
  return g;
}

}  // namespace skelrun::nn
