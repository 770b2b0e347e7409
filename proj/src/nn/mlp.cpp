#include "skelrun/nn/mlp.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>

namespace skelrun::nn {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::kIdentity: return "identity";
    case Activation::kElu: return "elu";
    case Activation::kTanh: return "tanh";
    case Activation::kSigmoid: return "sigmoid";
  }
  return "unknown";
}

Activation activation_from_string(const std::string& s) {
  if (s == "identity") return Activation::kIdentity;
  if (s == "elu") return Activation::kElu;
  if (s == "tanh") return Activation::kTanh;
  if (s == "sigmoid") return Activation::kSigmoid;
  throw std::invalid_argument("unknown activation '" + s + "'");
}

void MlpSpec::validate() const {
  if (input_dim <= 0 || output_dim <= 0) throw DimensionError("MlpSpec: dims must be positive");
  for (int h : hidden_dims) {
    if (h <= 0) throw DimensionError("MlpSpec: hidden dims must be positive");
  }
}

MlpLayout::MlpLayout(MlpSpec s) : spec(std::move(s)) {
  spec.validate();
  std::size_t offset = 0;
  int in = spec.input_dim;
  const int n = spec.num_layers();
  for (int l = 0; l < n; ++l) {
    const bool last = l == n - 1;
    LayerLayout layer;
    layer.in = in;
    layer.out = last ? spec.output_dim : spec.hidden_dims[l];
    layer.normalized = spec.layer_norm && !last;
    layer.activation = last ? spec.output_activation : spec.hidden_activation;
    layer.weight = offset;
    offset += static_cast<std::size_t>(layer.in) * layer.out;
    layer.bias = offset;
    offset += layer.out;
    if (layer.normalized) {
      layer.gain = offset;
      offset += layer.out;
      layer.norm_bias = offset;
      offset += layer.out;
    }
    layers.push_back(layer);
    in = layer.out;
  }
  size = offset;
}

ParamVector::ParamVector(MlpSpec spec)
    : layout_(std::make_shared<const MlpLayout>(std::move(spec))), values_(layout_->size, 0.0) {}

bool ParamVector::same_layout(const ParamVector& other) const {
  return layout_ == other.layout_ || layout_->spec == other.layout_->spec;
}

std::span<double> ParamVector::weights(int l) {
  const auto& L = layers()[l];
  return std::span<double>(values_).subspan(L.weight, static_cast<std::size_t>(L.in) * L.out);
}
std::span<const double> ParamVector::weights(int l) const {
  const auto& L = layers()[l];
  return std::span<const double>(values_).subspan(L.weight, static_cast<std::size_t>(L.in) * L.out);
}
std::span<double> ParamVector::bias(int l) {
  const auto& L = layers()[l];
  return std::span<double>(values_).subspan(L.bias, L.out);
}
std::span<const double> ParamVector::bias(int l) const {
  const auto& L = layers()[l];
  return std::span<const double>(values_).subspan(L.bias, L.out);
}
std::span<double> ParamVector::gain(int l) {
  const auto& L = layers()[l];
  if (!L.normalized) return {};
  return std::span<double>(values_).subspan(L.gain, L.out);
}
std::span<const double> ParamVector::gain(int l) const {
  const auto& L = layers()[l];
  if (!L.normalized) return {};
  return std::span<const double>(values_).subspan(L.gain, L.out);
}
std::span<double> ParamVector::norm_bias(int l) {
  const auto& L = layers()[l];
  if (!L.normalized) return {};
  return std::span<double>(values_).subspan(L.norm_bias, L.out);
}
std::span<const double> ParamVector::norm_bias(int l) const {
  const auto& L = layers()[l];
  if (!L.normalized) return {};
  return std::span<const double>(values_).subspan(L.norm_bias, L.out);
}

bool ParamVector::same_values(const ParamVector& other) const {
  return same_layout(other) && values_ == other.values_;
}

ParamVector init_params(const MlpSpec& spec, Rng& rng) {
  ParamVector p(spec);
  for (int l = 0; l < spec.num_layers(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(p.layers()[l].in));
    for (double& w : p.weights(l)) w = uniform(rng, -bound, bound);
    for (double& g : p.gain(l)) g = 1.0;
  }
  return p;
}

double activate(Activation a, double x) {
  switch (a) {
    case Activation::kIdentity: return x;
    case Activation::kElu: return x > 0.0 ? x : std::expm1(x);
    case Activation::kTanh: return std::tanh(x);
    case Activation::kSigmoid: return 1.0 / (1.0 + std::exp(-x));
  }
  return x;
}

double activate_grad(Activation a, double x, double y) {
  switch (a) {
    case Activation::kIdentity: return 1.0;
    case Activation::kElu: return x > 0.0 ? 1.0 : y + 1.0;
    case Activation::kTanh: return 1.0 - y * y;
    case Activation::kSigmoid: return y * (1.0 - y);
  }
  return 1.0;
}

namespace {

// Returns 1/sqrt(var + eps) and writes the standardized values into xhat.
double standardize(std::span<const double> x, double eps, std::span<double> xhat) {
  const double n = static_cast<double>(x.size());
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= n;
  const double inv_std = 1.0 / std::sqrt(var + eps);
  for (std::size_t i = 0; i < x.size(); ++i) xhat[i] = (x[i] - mean) * inv_std;
  return inv_std;
}

}  // namespace

std::vector<double> layer_norm(std::span<const double> x, std::span<const double> gain,
                               std::span<const double> norm_bias, double eps) {
  if (gain.size() != x.size() || norm_bias.size() != x.size()) {
    throw DimensionError("layer_norm: length mismatch");
  }
  if (!(eps > 0.0)) throw std::invalid_argument("layer_norm: eps must be positive");
  std::vector<double> out(x.size());
  standardize(x, eps, out);
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = gain[i] * out[i] + norm_bias[i];
  return out;
}

ForwardResult forward(const ParamVector& params, std::span<const double> input) {
  const MlpLayout& layout = params.layout();
  if (static_cast<int>(input.size()) != layout.spec.input_dim) {
    throw DimensionError("forward: input has " + std::to_string(input.size()) +
                         " elements, network expects " + std::to_string(layout.spec.input_dim));
  }
  ForwardResult r;
  r.cache.layout = &layout;
  r.cache.version = params.version();
  r.cache.layers.resize(layout.layers.size());
  std::vector<double> x(input.begin(), input.end());
  for (std::size_t l = 0; l < layout.layers.size(); ++l) {
    const LayerLayout& L = layout.layers[l];
    auto& c = r.cache.layers[l];
    c.input = x;
    auto w = params.weights(static_cast<int>(l));
    auto b = params.bias(static_cast<int>(l));
    std::vector<double> z(L.out);
    for (int o = 0; o < L.out; ++o) {
      double acc = b[o];
      const double* row = w.data() + static_cast<std::size_t>(o) * L.in;
      for (int i = 0; i < L.in; ++i) acc += row[i] * x[i];
      z[o] = acc;
    }
    if (L.normalized) {
      c.xhat.resize(L.out);
      c.inv_std = standardize(z, kLayerNormEps, c.xhat);
      auto g = params.gain(static_cast<int>(l));
      auto nb = params.norm_bias(static_cast<int>(l));
      for (int o = 0; o < L.out; ++o) z[o] = g[o] * c.xhat[o] + nb[o];
    }
    c.pre = z;
    c.post.resize(L.out);
    for (int o = 0; o < L.out; ++o) c.post[o] = activate(L.activation, z[o]);
    x = c.post;
  }
  r.output = std::move(x);
  return r;
}

std::vector<double> predict(const ParamVector& params, std::span<const double> input) {
  return forward(params, input).output;
}

BackwardResult backward(const ParamVector& params, const ForwardCache& cache,
                        std::span<const double> output_grad) {
  const MlpLayout& layout = params.layout();
  if (cache.layout == nullptr || !(cache.layout->spec == layout.spec) ||
      cache.version != params.version() || cache.layers.size() != layout.layers.size()) {
    throw std::invalid_argument("backward: cache does not belong to these parameters");
  }
  if (static_cast<int>(output_grad.size()) != layout.spec.output_dim) {
    throw DimensionError("backward: output_grad length mismatch");
  }
  BackwardResult r;
  r.param_grad.assign(layout.size, 0.0);
  std::vector<double> grad(output_grad.begin(), output_grad.end());
  for (int l = static_cast<int>(layout.layers.size()) - 1; l >= 0; --l) {
    const LayerLayout& L = layout.layers[l];
    const auto& c = cache.layers[l];
    std::vector<double> dz(L.out);
    for (int o = 0; o < L.out; ++o) {
      dz[o] = grad[o] * activate_grad(L.activation, c.pre[o], c.post[o]);
    }
    if (L.normalized) {
      auto g = params.gain(l);
      double* dgain = r.param_grad.data() + L.gain;
      double* dnb = r.param_grad.data() + L.norm_bias;
      std::vector<double> dxhat(L.out);
      double mean_d = 0.0;
      double mean_dx = 0.0;
      for (int o = 0; o < L.out; ++o) {
        dgain[o] = dz[o] * c.xhat[o];
        dnb[o] = dz[o];
        dxhat[o] = dz[o] * g[o];
        mean_d += dxhat[o];
        mean_dx += dxhat[o] * c.xhat[o];
      }
      mean_d /= L.out;
      mean_dx /= L.out;
      for (int o = 0; o < L.out; ++o) {
        dz[o] = c.inv_std * (dxhat[o] - mean_d - c.xhat[o] * mean_dx);
      }
    }
    double* dw = r.param_grad.data() + L.weight;
    double* db = r.param_grad.data() + L.bias;
    auto w = params.weights(l);
    std::vector<double> dx(L.in, 0.0);
    for (int o = 0; o < L.out; ++o) {
      db[o] = dz[o];
      double* dw_row = dw + static_cast<std::size_t>(o) * L.in;
      const double* w_row = w.data() + static_cast<std::size_t>(o) * L.in;
      for (int i = 0; i < L.in; ++i) {
        dw_row[i] = dz[o] * c.input[i];
        dx[i] += dz[o] * w_row[i];
      }
    }
    grad = std::move(dx);
  }
  r.input_grad = std::move(grad);
  return r;
}

void adam_step(ParamVector& params, std::span<const double> grads, AdamState& state, double lr) {
  adam_update(params.values(), grads, state, lr);
  params.set_version(params.version() + 1);
}

void adam_update(std::span<double> p, std::span<const double> grads, AdamState& state, double lr) {
  const std::size_t n = p.size();
  if (grads.size() != n || state.m.size() != n || state.v.size() != n) {
    throw DimensionError("adam_step: shape mismatch");
  }
  std::size_t bad = 0;
  std::size_t first = 0;
  double first_value = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(grads[i])) {
      if (bad == 0) {
        first = i;
        first_value = grads[i];
      }
      ++bad;
    }
  }
  if (bad > 0) {
    throw NonFiniteError("adam_step: " + std::to_string(bad) + " non-finite gradient element(s)",
                         first, first_value, bad);
  }
  const AdamConfig& cfg = state.config;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < n; ++i) {
    const double g = grads[i];
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
    const double mhat = state.m[i] / c1;
    const double vhat = state.v[i] / c2;
    p[i] -= lr * mhat / (std::sqrt(vhat) + cfg.epsilon);
  }
}

double lr_schedule(std::uint64_t step, double start, double end, std::uint64_t horizon) {
  if (horizon == 0) throw std::invalid_argument("lr_schedule: horizon must be positive");
  if (!(start >= end && end > 0.0)) {
    throw std::invalid_argument("lr_schedule: need start >= end > 0");
  }
  if (step >= horizon) return end;
  const double frac = static_cast<double>(step) / static_cast<double>(horizon);
  return start + (end - start) * frac;
}

double param_distance(const ParamVector& a, const ParamVector& b) {
  if (!a.same_layout(b)) throw DimensionError("param_distance: different topologies");
  double s = 0.0;
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < av.size(); ++i) s += (av[i] - bv[i]) * (av[i] - bv[i]);
  return std::sqrt(s);
}

// --- serialization ---------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'S', 'K', 'R', 'M', 'L', 'P', '0', '1'};

template <typename T>
void put_le(std::ostream& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get_le(std::istream& in) {
  unsigned char bytes[sizeof(T)];
  in.read(reinterpret_cast<char*>(bytes), sizeof(T));
  if (!in) throw std::runtime_error("read_params: truncated stream");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

}  // namespace

void write_params(std::ostream& out, const ParamVector& params) {
  const MlpSpec& s = params.spec();
  out.write(kMagic, sizeof(kMagic));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.input_dim));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.hidden_dims.size()));
  for (int h : s.hidden_dims) put_le<std::uint32_t>(out, static_cast<std::uint32_t>(h));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.output_dim));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.hidden_activation));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.output_activation));
  put_le<std::uint32_t>(out, s.layer_norm ? 1u : 0u);
  put_le<std::uint32_t>(out, params.perturbed() ? 1u : 0u);
  put_le<std::uint64_t>(out, params.version());
  put_le<std::uint64_t>(out, params.size());
  for (double v : params.values()) put_le<double>(out, v);
}

ParamVector read_params(std::istream& in) {
  char magic[sizeof(kMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error("read_params: bad magic");
  }
  MlpSpec s;
  s.input_dim = static_cast<int>(get_le<std::uint32_t>(in));
  const auto n_hidden = get_le<std::uint32_t>(in);
  if (n_hidden > 1024) throw std::runtime_error("read_params: implausible layer count");
  for (std::uint32_t i = 0; i < n_hidden; ++i) {
    s.hidden_dims.push_back(static_cast<int>(get_le<std::uint32_t>(in)));
  }
  s.output_dim = static_cast<int>(get_le<std::uint32_t>(in));
  const auto hidden_act = get_le<std::uint32_t>(in);
  const auto output_act = get_le<std::uint32_t>(in);
  if (hidden_act > 3 || output_act > 3) throw std::runtime_error("read_params: bad activation");
  s.hidden_activation = static_cast<Activation>(hidden_act);
  s.output_activation = static_cast<Activation>(output_act);
  s.layer_norm = get_le<std::uint32_t>(in) != 0;
  const bool perturbed = get_le<std::uint32_t>(in) != 0;
  const auto version = get_le<std::uint64_t>(in);
  const auto count = get_le<std::uint64_t>(in);
  ParamVector p(s);
  if (count != p.size()) throw std::runtime_error("read_params: size does not match topology");
  for (double& v : p.values()) v = get_le<double>(in);
  p.set_version(version);
  p.set_perturbed(perturbed);
  return p;
}

}  // namespace skelrun::nn
