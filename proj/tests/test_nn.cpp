#include <cmath>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"
#include "skelrun/nn/batch.hpp"
#include "skelrun/nn/mlp.hpp"

using namespace skelrun;
using nn::Activation;

namespace {

nn::MlpSpec single_linear() {
  nn::MlpSpec s;
  s.input_dim = 1;
  s.output_dim = 1;
  s.output_activation = Activation::kIdentity;
  return s;
}

}  // namespace

TEST_CASE("forward: zero parameters give a zero output") {
  nn::MlpSpec s{3, {5, 4}, 2, Activation::kTanh, Activation::kIdentity, false};
  nn::ParamVector p(s);
  const auto y = nn::predict(p, std::vector<double>{1.0, -2.0, 0.5});
  CHECK(y == std::vector<double>{0.0, 0.0});
}

TEST_CASE("forward: single linear layer by hand") {
  nn::ParamVector p(single_linear());
  p.weights(0)[0] = 2.0;
  p.bias(0)[0] = 1.0;
  CHECK(nn::predict(p, std::vector<double>{3.0}) == std::vector<double>{7.0});
}

TEST_CASE("forward: sigmoid of logit 0 is one half") {
  auto s = single_linear();
  s.output_activation = Activation::kSigmoid;
  nn::ParamVector p(s);
  CHECK(nn::predict(p, std::vector<double>{4.0})[0] == 0.5);
  CHECK(nn::activate(Activation::kSigmoid, 0.0) == 0.5);
}

TEST_CASE("forward: sigmoid outputs stay inside the open unit interval") {
  Rng rng(3);
  nn::MlpSpec s{4, {8}, 3, Activation::kElu, Activation::kSigmoid, true};
  auto p = nn::init_params(s, rng);
  for (int i = 0; i < 200; ++i) {
    for (double y : nn::predict(p, oracle::random_vector(4, rng, -5, 5))) {
      CHECK(y > 0.0);
      CHECK(y < 1.0);
    }
  }
}

TEST_CASE("forward: wrong input length is rejected") {
  nn::ParamVector p(single_linear());
  CHECK_THROWS_AS(nn::forward(p, std::vector<double>{1.0, 2.0}), nn::DimensionError);
}

TEST_CASE("layer_norm examples") {
  const std::vector<double> ones(3, 1.0), zeros(3, 0.0);
  SUBCASE("constant input maps to zero") {
    CHECK(nn::layer_norm(std::vector<double>{4.0, 4.0, 4.0}, ones, zeros, 1e-5) == zeros);
  }
  SUBCASE("1,2,3 standardizes to +-sqrt(3/2)") {
    const auto y = nn::layer_norm(std::vector<double>{1.0, 2.0, 3.0}, ones, zeros, 1e-15);
    CHECK(y[0] == doctest::Approx(-1.2247448714).epsilon(1e-9));
    CHECK(y[1] == 0.0);
    CHECK(y[2] == doctest::Approx(1.2247448714).epsilon(1e-9));
  }
  SUBCASE("zero gain returns the norm bias") {
    const std::vector<double> bias{0.3, -0.7, 2.0};
    CHECK(nn::layer_norm(std::vector<double>{1.0, 5.0, -2.0}, zeros, bias, 1e-5) == bias);
  }
}

TEST_CASE("layer_norm statistics on random inputs") {
  Rng rng(11);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + rng() % 64;
    const double scale = std::pow(10.0, uniform(rng, -2.0, 3.0));
    auto x = oracle::random_vector(n, rng, -scale, scale);
    if (oracle::population_variance(x) < 1e-4) continue;
    const std::vector<double> g(n, 1.0), b(n, 0.0);
    const auto y = nn::layer_norm(x, g, b, 1e-12);
    CHECK(std::abs(oracle::mean(y)) < 1e-9);
    CHECK(std::abs(oracle::population_variance(y) - 1.0) < 1e-6);
  }
}

TEST_CASE("backward: zero upstream gradient gives zero gradients") {
  Rng rng(5);
  nn::MlpSpec s{3, {6, 4}, 2, Activation::kElu, Activation::kSigmoid, true};
  auto p = oracle::random_params(s, rng);
  const auto x = oracle::random_vector(3, rng);
  const auto fr = nn::forward(p, x);
  const auto br = nn::backward(p, fr.cache, std::vector<double>{0.0, 0.0});
  for (double g : br.param_grad) CHECK(g == 0.0);
  for (double g : br.input_grad) CHECK(g == 0.0);
}

TEST_CASE("backward: single linear layer by hand") {
  nn::ParamVector p(single_linear());
  p.weights(0)[0] = -1.5;
  p.bias(0)[0] = 0.25;
  const auto fr = nn::forward(p, std::vector<double>{3.0});
  const auto br = nn::backward(p, fr.cache, std::vector<double>{1.0});
  CHECK(br.param_grad == std::vector<double>{3.0, 1.0});
  CHECK(br.input_grad == std::vector<double>{-1.5});
}

TEST_CASE("backward: cache from other parameters is rejected") {
  nn::MlpSpec s{2, {3}, 1, Activation::kTanh, Activation::kIdentity, false};
  nn::MlpSpec other{2, {4}, 1, Activation::kTanh, Activation::kIdentity, false};
  nn::ParamVector a(s), b(other);
  const auto fr = nn::forward(a, std::vector<double>{1.0, 2.0});
  CHECK_THROWS(nn::backward(b, fr.cache, std::vector<double>{1.0}));
  CHECK_THROWS_AS(nn::backward(a, fr.cache, std::vector<double>{1.0, 1.0}), nn::DimensionError);
}

TEST_CASE("gradient check against central differences over a network sweep") {
  Rng rng(2024);
  double worst = 0.0;
  for (int k = 0; k < 36; ++k) {
    const auto spec = oracle::sweep_spec(k, rng);
    const auto p = oracle::random_params(spec, rng);
    const auto x = oracle::random_vector(spec.input_dim, rng, -2.0, 2.0);
    const auto w = oracle::random_vector(spec.output_dim, rng);
    const auto fr = nn::forward(p, x);
    const auto br = nn::backward(p, fr.cache, w);
    const double e_p = oracle::max_rel_error(br.param_grad, oracle::fd_param_grad(p, x, w));
    const double e_x = oracle::max_rel_error(br.input_grad, oracle::fd_input_grad(p, x, w));
    INFO("network " << k << " hidden=" << nn::to_string(spec.hidden_activation)
                    << " ln=" << spec.layer_norm);
    CHECK(e_p < 1e-4);
    CHECK(e_x < 1e-4);
    worst = std::max({worst, e_p, e_x});
  }
  MESSAGE("worst relative error " << worst);
}

TEST_CASE("forward and backward are pure") {
  Rng rng(9);
  nn::MlpSpec s{4, {7, 5}, 3, Activation::kElu, Activation::kSigmoid, true};
  const auto p = oracle::random_params(s, rng);
  const auto x = oracle::random_vector(4, rng);
  const auto w = oracle::random_vector(3, rng);
  const auto a = nn::forward(p, x);
  const auto b = nn::forward(p, x);
  CHECK(a.output == b.output);
  CHECK(nn::backward(p, a.cache, w).param_grad == nn::backward(p, b.cache, w).param_grad);
}

TEST_CASE("adam_step") {
  SUBCASE("zero gradient is a fixed point that still counts the step") {
    Rng rng(1);
    nn::MlpSpec s{2, {3}, 1, Activation::kTanh, Activation::kIdentity, false};
    auto p = nn::init_params(s, rng);
    const auto before = p;
    nn::AdamState st(p.size());
    nn::adam_step(p, std::vector<double>(p.size(), 0.0), st, 1e-3);
    CHECK(p.same_values(before));
    CHECK(st.step == 1);
    CHECK(p.version() == before.version() + 1);
  }
  SUBCASE("first step with unit gradient moves by lr") {
    nn::ParamVector p(single_linear());
    p.weights(0)[0] = 0.5;
    nn::AdamState st(p.size());
    nn::adam_step(p, std::vector<double>{1.0, 0.0}, st, 1e-3);
    // m_hat = v_hat = 1, so the step is lr / (1 + 1e-8).
    CHECK(p.weights(0)[0] == doctest::Approx(0.5 - 1e-3).epsilon(1e-10));
  }
  SUBCASE("deterministic") {
    nn::ParamVector a(single_linear()), b(single_linear());
    nn::AdamState sa(a.size()), sb(b.size());
    const std::vector<double> g{0.3, -0.2};
    for (int i = 0; i < 5; ++i) {
      nn::adam_step(a, g, sa, 1e-2);
      nn::adam_step(b, g, sb, 1e-2);
    }
    CHECK(a.same_values(b));
    CHECK(sa.m == sb.m);
    CHECK(sa.v == sb.v);
  }
  SUBCASE("non-finite gradient is rejected before any change") {
    nn::ParamVector p(single_linear());
    p.weights(0)[0] = 0.5;
    nn::AdamState st(p.size());
    try {
      nn::adam_step(p, std::vector<double>{1.0, std::nan("")}, st, 1e-3);
      FAIL("expected NonFiniteError");
    } catch (const nn::NonFiniteError& e) {
      CHECK(e.first_index == 1);
      CHECK(e.count == 1);
    }
    CHECK(p.weights(0)[0] == 0.5);
    CHECK(st.step == 0);
    CHECK(p.version() == 0);
  }
}

TEST_CASE("lr_schedule") {
  const nn::LinearSchedule actor{1e-3, 5e-5, 10'000'000};
  CHECK(actor(0) == 1e-3);
  CHECK(actor(10'000'000) == 5e-5);
  CHECK(actor(50'000'000) == 5e-5);
  CHECK(actor(5'000'000) == doctest::Approx(5.25e-4).epsilon(1e-12));
  double prev = actor(0);
  for (std::uint64_t s = 0; s <= 12'000'000; s += 250'000) {
    const double v = actor(s);
    CHECK(v <= prev);
    CHECK(v >= 5e-5);
    CHECK(v <= 1e-3);
    prev = v;
  }
  CHECK_THROWS(nn::lr_schedule(0, 1e-5, 1e-3, 10));
}

TEST_CASE("param_distance") {
  nn::MlpSpec s{2, {3}, 2, Activation::kTanh, Activation::kIdentity, true};
  Rng rng(4);
  const auto a = nn::init_params(s, rng);
  auto b = a;
  CHECK(nn::param_distance(a, b) == 0.0);
  b.values()[2] += 3.0;
  CHECK(nn::param_distance(a, b) == doctest::Approx(3.0).epsilon(1e-14));
  b = a;
  b.values()[0] += 3.0;
  b.values()[5] -= 4.0;
  CHECK(nn::param_distance(a, b) == doctest::Approx(5.0).epsilon(1e-14));
  nn::ParamVector other(nn::MlpSpec{2, {4}, 2, Activation::kTanh, Activation::kIdentity, true});
  CHECK_THROWS_AS(nn::param_distance(a, other), nn::DimensionError);
}

TEST_CASE("init_params ranges") {
  Rng rng(8);
  nn::MlpSpec s{16, {32}, 4, Activation::kElu, Activation::kSigmoid, true};
  const auto p = nn::init_params(s, rng);
  for (double w : p.weights(0)) CHECK(std::abs(w) <= 1.0 / std::sqrt(16.0));
  for (double w : p.weights(1)) CHECK(std::abs(w) <= 1.0 / std::sqrt(32.0));
  for (double v : p.bias(0)) CHECK(v == 0.0);
  for (double v : p.gain(0)) CHECK(v == 1.0);
  for (double v : p.norm_bias(0)) CHECK(v == 0.0);
}

TEST_CASE("parameter serialization round-trips bit-exactly") {
  Rng rng(12);
  nn::MlpSpec s{5, {7, 3}, 2, Activation::kSigmoid, Activation::kTanh, true};
  auto p = oracle::random_params(s, rng);
  p.set_version(42);
  std::stringstream ss;
  nn::write_params(ss, p);
  const auto q = nn::read_params(ss);
  CHECK(q.spec() == s);
  CHECK(q.version() == 42);
  CHECK(q.same_values(p));
  std::stringstream bad("not parameters");
  CHECK_THROWS(nn::read_params(bad));
}

TEST_CASE("batched kernels match the serial per-sample reference") {
  Rng rng(77);
  nn::BatchWorkspace ws;
  for (int k = 0; k < 12; ++k) {
    const auto spec = oracle::sweep_spec(k, rng);
    const auto p = oracle::random_params(spec, rng);
    const int rows = 1 + static_cast<int>(rng() % 40);
    const auto x = oracle::random_vector(static_cast<std::size_t>(rows) * spec.input_dim, rng);
    const auto g = oracle::random_vector(static_cast<std::size_t>(rows) * spec.output_dim, rng);
    const auto ref = nn::batch_gradient_reference(p, x, rows, g);
    const auto got = nn::batch_gradient(p, x, rows, g, ws);
    REQUIRE(got.outputs.size() == ref.outputs.size());
    CHECK(oracle::normalized_max_diff(got.outputs, ref.outputs) < 1e-13);
    CHECK(oracle::normalized_max_diff(got.param_grad, ref.param_grad) < 1e-12);
    CHECK(oracle::normalized_max_diff(got.input_grads, ref.input_grads) < 1e-12);
  }
}
