// Copyright 2026 The stylenerf Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <vector>

#include "stylenerf/error.hpp"
#include "stylenerf/nn.hpp"

using namespace stylenerf;

namespace {

Matrix random_matrix(Rng& rng, int rows, int cols, double lo = -1.0, double hi = 1.0) {
  Matrix m(rows, cols);
  for (int i = 0; i < m.size(); ++i) m.data()[i] = static_cast<float>(rng.uniform(lo, hi));
  return m;
}

double dot(const Matrix& a, const Matrix& b) {
  double s = 0.0;
  for (int i = 0; i < a.size(); ++i) s += static_cast<double>(a.data()[i]) * b.data()[i];
  return s;
}

bool close(double analytic, double numeric, double rel, double abs_tol) {
  return std::abs(analytic - numeric) <= std::max(abs_tol, rel * std::max(std::abs(analytic), std::abs(numeric)));
}

}  // namespace

TEST_CASE("linear forward is W x + b") {
  Rng rng(1);
  Linear l(3, 2, rng);
  l.weight << 1, 2, 3, -1, 0, 1;
  l.bias << 0.5f, -0.5f;
  Matrix x(3, 1);
  x << 1, 1, 2;
  const Matrix y = l.forward(x, Activation::kNone);
  CHECK(y(0, 0) == doctest::Approx(9.5));
  CHECK(y(1, 0) == doctest::Approx(0.5));
  const Matrix r = l.forward(-x, Activation::kRelu);
  CHECK(r(0, 0) == 0.0f);
  CHECK(r(1, 0) == doctest::Approx(0.0));
  const Matrix s = l.forward(x, Activation::kSigmoid);
  CHECK(s(1, 0) == doctest::Approx(1.0 / (1.0 + std::exp(-0.5))));
}

TEST_CASE("linear init lies in the fan-in bound") {
  Rng rng(2);
  Linear l(25, 40, rng);
  CHECK(l.weight.maxCoeff() <= 0.2f);
  CHECK(l.weight.minCoeff() >= -0.2f);
  CHECK(l.bias.cwiseAbs().maxCoeff() <= 0.2f);
  // Roughly uniform: the mean magnitude is near bound / 2.
  CHECK(l.weight.cwiseAbs().mean() == doctest::Approx(0.1).epsilon(0.1));
}

TEST_CASE("mlp gradients match central differences") {
  for (Activation last : {Activation::kNone, Activation::kSigmoid}) {
    Rng rng(3);
    Mlp mlp({4, 6, 5, 3}, {Activation::kRelu, Activation::kRelu, last}, rng);
    const Matrix x = random_matrix(rng, 4, 7);
    const Matrix g = random_matrix(rng, 3, 7);
    MlpTrace trace;
    mlp.forward(x, trace);
    mlp.zero_grad();
    const Matrix gx = mlp.backward(trace, g, true);
    ParameterList params;
    mlp.append_parameters(params, "mlp");
    auto loss = [&](const Matrix& in) { return dot(mlp.forward(in), g); };
    const float h = 1e-2f;
    int checked = 0;
    for (Parameter& p : params) {
      for (std::size_t i = 0; i < p.size; i += 3) {
        const float v0 = p.value[i];
        p.value[i] = v0 + h;
        const double lp = loss(x);
        p.value[i] = v0 - h;
        const double lm = loss(x);
        p.value[i] = v0;
        CHECK(close(p.grad[i], (lp - lm) / (2 * h), 2e-2, 2e-3));
        ++checked;
      }
    }
    for (int i = 0; i < x.size(); ++i) {
      Matrix xp = x, xm = x;
      xp.data()[i] += h;
      xm.data()[i] -= h;
      CHECK(close(gx.data()[i], (loss(xp) - loss(xm)) / (2 * h), 2e-2, 2e-3));
    }
    CHECK(checked > 20);
  }
}

TEST_CASE("parameter gradients accumulate until zeroed") {
  Rng rng(4);
  Linear l(3, 2, rng);
  const Matrix x = random_matrix(rng, 3, 4);
  Matrix g = random_matrix(rng, 2, 4);
  const Matrix y = l.forward(x, Activation::kNone);
  Matrix g1 = g;
  l.backward(x, y, g1, Activation::kNone, false);
  const Matrix once = l.grad_weight;
  Matrix g2 = g;
  l.backward(x, y, g2, Activation::kNone, false);
  CHECK((l.grad_weight - 2 * once).cwiseAbs().maxCoeff() < 1e-6f);
  l.zero_grad();
  CHECK(l.grad_weight.cwiseAbs().maxCoeff() == 0.0f);
}

TEST_CASE("adam matches a scalar reference for three steps") {
  Rng rng(5);
  Linear l(2, 1, rng);
  ParameterList params;
  l.append_parameters(params, "l");
  AdamConfig cfg;
  cfg.learning_rate = 0.1f;
  Adam adam(cfg);
  // Reference in double on the first weight.
  double p = l.weight(0, 0), m = 0.0, v = 0.0;
  const double grads[] = {0.5, -0.25, 2.0};
  for (int t = 1; t <= 3; ++t) {
    zero_grad(params);
    l.grad_weight(0, 0) = static_cast<float>(grads[t - 1]);
    adam.step(params);
    m = 0.9 * m + 0.1 * grads[t - 1];
    v = 0.999 * v + 0.001 * grads[t - 1] * grads[t - 1];
    const double mhat = m / (1 - std::pow(0.9, t));
    const double vhat = v / (1 - std::pow(0.999, t));
    p -= 0.1 * mhat / (std::sqrt(vhat) + 1e-8);
    CHECK(l.weight(0, 0) == doctest::Approx(p).epsilon(1e-5));
  }
  // The first update has magnitude lr regardless of gradient scale.
  Linear k(1, 1, rng);
  ParameterList kp;
  k.append_parameters(kp, "k");
  const float before = k.weight(0, 0);
  Adam a2(cfg);
  k.grad_weight(0, 0) = 1e-3f;
  a2.step(kp);
  CHECK(before - k.weight(0, 0) == doctest::Approx(0.1).epsilon(1e-4));
}

TEST_CASE("adam state export and import resume exactly") {
  Rng rng(6);
  Linear a(3, 3, rng);
  Linear b = a;
  ParameterList pa, pb;
  a.append_parameters(pa, "x");
  b.append_parameters(pb, "x");
  Adam oa, ob;
  auto grad_step = [&](Linear& l, ParameterList& p, Adam& opt, int t) {
    zero_grad(p);
    Rng g(100 + t);
    for (int i = 0; i < l.grad_weight.size(); ++i) l.grad_weight.data()[i] = static_cast<float>(g.uniform(-1, 1));
    opt.step(p);
  };
  for (int t = 0; t < 3; ++t) grad_step(a, pa, oa, t);
  for (int t = 0; t < 2; ++t) grad_step(b, pb, ob, t);
  const auto state = ob.export_state(pb);
  Adam restored;
  restored.import_state(pb, state);
  CHECK(restored.steps() == 2);
  grad_step(b, pb, restored, 2);
  CHECK(a.weight == b.weight);
  CHECK(a.bias == b.bias);
}

TEST_CASE("tensor import checks names and shapes") {
  Rng rng(7);
  Linear a(2, 3, rng), b(2, 3, rng), c(3, 3, rng);
  ParameterList pa, pb, pc;
  a.append_parameters(pa, "l");
  b.append_parameters(pb, "l");
  c.append_parameters(pc, "l");
  import_tensors(pb, export_tensors(pa));
  CHECK(a.weight == b.weight);
  CHECK(parameter_digest(pa) == parameter_digest(pb));
  CHECK_THROWS_AS(import_tensors(pc, export_tensors(pa)), ValidationError);
  ParameterList renamed;
  c.append_parameters(renamed, "other");
  CHECK_THROWS_AS(import_tensors(renamed, export_tensors(pc)), ValidationError);
  b.weight(0, 0) += 1.0f;
  CHECK(parameter_digest(pa) != parameter_digest(pb));
}
