#pragma once

// Fixed-topology multilayer perceptrons with optional layer normalization.
//
// Parameters live in one flat array per network. The layout is, layer by
// layer: weights (row-major, out x in), biases, and for normalized layers the
// per-neuron gains followed by the per-neuron norm biases. The last layer is
// never normalized.
//
// The single-sample forward/backward here is the serial reference path. The
// trainer uses the batched OpenMP kernels in batch.hpp, which are tested
// against this path.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "skelrun/core/random.hpp"

namespace skelrun::nn {

enum class Activation { kIdentity, kElu, kTanh, kSigmoid };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

inline constexpr double kLayerNormEps = 1e-5;

struct MlpSpec {
  int input_dim = 0;
  std::vector<int> hidden_dims;
  int output_dim = 0;
  Activation hidden_activation = Activation::kElu;
  Activation output_activation = Activation::kIdentity;
  // Normalizes every layer except the last, before the nonlinearity.
  bool layer_norm = false;

  int num_layers() const { return static_cast<int>(hidden_dims.size()) + 1; }
  void validate() const;

  bool operator==(const MlpSpec&) const = default;
};

struct LayerLayout {
  int in = 0;
  int out = 0;
  std::size_t weight = 0;
  std::size_t bias = 0;
  std::size_t gain = 0;
  std::size_t norm_bias = 0;
  bool normalized = false;
  Activation activation = Activation::kIdentity;
};

struct MlpLayout {
  MlpSpec spec;
  std::vector<LayerLayout> layers;
  std::size_t size = 0;

  explicit MlpLayout(MlpSpec s);
};

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ParamVector {
 public:
  // All-zero parameters (gains included) for the given topology.
  explicit ParamVector(MlpSpec spec);

  const MlpSpec& spec() const { return layout_->spec; }
  const MlpLayout& layout() const { return *layout_; }
  const std::vector<LayerLayout>& layers() const { return layout_->layers; }
  bool same_layout(const ParamVector& other) const;

  std::size_t size() const { return values_.size(); }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  std::span<double> weights(int layer);
  std::span<const double> weights(int layer) const;
  std::span<double> bias(int layer);
  std::span<const double> bias(int layer) const;
  std::span<double> gain(int layer);
  std::span<const double> gain(int layer) const;
  std::span<double> norm_bias(int layer);
  std::span<const double> norm_bias(int layer) const;

  std::uint64_t version() const { return version_; }
  void set_version(std::uint64_t v) { version_ = v; }
  bool perturbed() const { return perturbed_; }
  void set_perturbed(bool p) { perturbed_ = p; }

  // Element-wise equality of values and topology; version is ignored.
  bool same_values(const ParamVector& other) const;

 private:
  std::shared_ptr<const MlpLayout> layout_;
  std::vector<double> values_;
  std::uint64_t version_ = 0;
  bool perturbed_ = false;
};

// Weights uniform in +-1/sqrt(fan_in), biases 0, gains 1, norm biases 0.
ParamVector init_params(const MlpSpec& spec, Rng& rng);

double activate(Activation a, double x);
// Derivative expressed through the pre-activation x and the output y.
double activate_grad(Activation a, double x, double y);

// Population-variance layer normalization.
std::vector<double> layer_norm(std::span<const double> x, std::span<const double> gain,
                               std::span<const double> norm_bias, double eps);

struct ForwardCache {
  struct Layer {
    std::vector<double> input;
    std::vector<double> xhat;  // normalized layers only
    double inv_std = 0.0;
    std::vector<double> pre;   // value fed to the nonlinearity
    std::vector<double> post;
  };
  const MlpLayout* layout = nullptr;
  std::uint64_t version = 0;
  std::vector<Layer> layers;
};

struct ForwardResult {
  std::vector<double> output;
  ForwardCache cache;
};

ForwardResult forward(const ParamVector& params, std::span<const double> input);
std::vector<double> predict(const ParamVector& params, std::span<const double> input);

struct BackwardResult {
  std::vector<double> param_grad;  // same layout as ParamVector::values()
  std::vector<double> input_grad;
};

// Gradients of dot(output, output_grad) w.r.t. parameters and input.
BackwardResult backward(const ParamVector& params, const ForwardCache& cache,
                        std::span<const double> output_grad);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;
  AdamConfig config;

  explicit AdamState(std::size_t n, AdamConfig cfg = {}) : m(n, 0.0), v(n, 0.0), config(cfg) {}
};

class NonFiniteError : public std::runtime_error {
 public:
  NonFiniteError(const std::string& what, std::size_t first_index, double first_value,
                 std::size_t count)
      : std::runtime_error(what), first_index(first_index), first_value(first_value),
        count(count) {}
  std::size_t first_index;
  double first_value;
  std::size_t count;
};

// Bias-corrected Adam step, in place. Throws NonFiniteError before touching
// anything if a gradient element is NaN or infinite. Bumps params.version().
void adam_step(ParamVector& params, std::span<const double> grads, AdamState& state, double lr);
// Same update on a bare array; no version to bump.
void adam_update(std::span<double> values, std::span<const double> grads, AdamState& state,
                 double lr);

// Linear decay from start (step 0) to end (step >= horizon).
double lr_schedule(std::uint64_t step, double start, double end, std::uint64_t horizon);

struct LinearSchedule {
  double start = 1e-3;
  double end = 5e-5;
  std::uint64_t horizon = 10'000'000;
  double operator()(std::uint64_t step) const { return lr_schedule(step, start, end, horizon); }
  bool operator==(const LinearSchedule&) const = default;
};

double param_distance(const ParamVector& a, const ParamVector& b);

// Little-endian binary checkpoint format.
void write_params(std::ostream& out, const ParamVector& params);
ParamVector read_params(std::istream& in);

}  // namespace skelrun::nn
