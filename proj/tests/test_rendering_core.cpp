// Copyright 2026 The stylenerf Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <set>
#include <vector>

#include "oracles.hpp"
#include "stylenerf/composite.hpp"
#include "stylenerf/encoding.hpp"
#include "stylenerf/error.hpp"
#include "stylenerf/geometry.hpp"
#include "stylenerf/rng.hpp"
#include "stylenerf/sampling.hpp"

using namespace stylenerf;

TEST_SUITE("positional_encode") {
  TEST_CASE("zero input at two levels") {
    const std::vector<double> v{0.0};
    const auto out = positional_encode(v, 2);
    REQUIRE(out.size() == 4);
    CHECK(out[0] == 0.0);
    CHECK(out[1] == 1.0);
    CHECK(out[2] == 0.0);
    CHECK(out[3] == 1.0);
  }

  TEST_CASE("half pi at two levels") {
    const std::vector<double> v{std::numbers::pi / 2};
    const auto out = positional_encode(v, 2);
    CHECK(out[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(std::abs(out[1]) < 1e-15);
    CHECK(std::abs(out[2]) < 1e-15);
    CHECK(out[3] == doctest::Approx(-1.0).epsilon(1e-15));
  }

  TEST_CASE("two components at ten levels match the scalar loop") {
    const std::vector<double> v{0.3, -0.7};
    const auto out = positional_encode(v, 10);
    const auto expected = oracle::fourier_features(v, 10);
    REQUIRE(out.size() == 40);
    for (std::size_t i = 0; i < 40; ++i) CHECK(out[i] == doctest::Approx(expected[i]).epsilon(1e-12));
  }

  TEST_CASE("batched float encoding agrees with the scalar loop") {
    Rng rng(3);
    Eigen::MatrixXf x(3, 17);
    for (int i = 0; i < x.size(); ++i) x.data()[i] = static_cast<float>(rng.uniform(-2.0, 2.0));
    const Eigen::MatrixXf enc = encode_columns(x, kPositionLevels);
    REQUIRE(enc.rows() == 60);
    for (int c = 0; c < x.cols(); ++c) {
      const std::vector<double> v{x(0, c), x(1, c), x(2, c)};
      const auto expected = oracle::fourier_features(v, kPositionLevels);
      for (int r = 0; r < 60; ++r) CHECK(std::abs(enc(r, c) - expected[r]) < 1e-6);
    }
  }

  TEST_CASE("rejects non-finite input and bad levels") {
    const std::vector<double> bad{std::numeric_limits<double>::quiet_NaN()};
    CHECK_THROWS_AS(positional_encode(bad, 4), ValidationError);
    const std::vector<double> inf{std::numeric_limits<double>::infinity()};
    CHECK_THROWS_AS(positional_encode(inf, 4), ValidationError);
    const std::vector<double> ok{1.0};
    CHECK_THROWS_AS(positional_encode(ok, 0), ValidationError);
  }

  TEST_CASE("distinct inputs in [-pi, pi) give distinct codes") {
    Rng rng(11);
    std::set<std::vector<double>> codes;
    for (int trial = 0; trial < 500; ++trial) {
      const std::vector<double> v{rng.uniform(-std::numbers::pi, std::numbers::pi),
                                  rng.uniform(-std::numbers::pi, std::numbers::pi),
                                  rng.uniform(-std::numbers::pi, std::numbers::pi)};
      for (int levels : {1, 4, 10}) codes.insert(positional_encode(v, levels));
    }
    CHECK(codes.size() == 1500);
  }
}

TEST_SUITE("generate_rays") {
  TEST_CASE("identity pose looks down -z through the center pixel") {
    CameraPose pose;
    pose.focal = 10.0;
    pose.width = 5;
    pose.height = 5;
    const auto rays = generate_rays(pose, 0.5, 4.0);
    REQUIRE(rays.size() == 25);
    const Ray& center = rays[2 * 5 + 2];
    CHECK((center.direction - Vec3(0, 0, -1)).norm() < 1e-12);
    CHECK(center.origin.norm() == 0.0);
    for (const Ray& r : rays) CHECK(std::abs(r.direction.norm() - 1.0) < 1e-12);
  }

  TEST_CASE("pure translation moves every origin") {
    CameraPose pose;
    pose.translation = Vec3(1.0, -2.0, 3.5);
    pose.focal = 20.0;
    pose.width = 8;
    pose.height = 6;
    const auto rays = generate_rays(pose, 0.0, 1.0);
    CHECK(rays.size() == 48);
    for (const Ray& r : rays) CHECK(r.origin == pose.translation);
  }

  TEST_CASE("ninety degree yaw turns the forward axis") {
    // Rotation by +90 degrees about the vertical (y) axis, written out by hand:
    // x -> -z, z -> x, so the forward axis -z maps to -x.
    CameraPose pose;
    pose.rotation << 0, 0, 1,
                     0, 1, 0,
                    -1, 0, 0;
    pose.focal = 30.0;
    pose.width = 9;
    pose.height = 9;
    const auto rays = generate_rays(pose, 0.0, 1.0);
    const Ray& center = rays[4 * 9 + 4];
    CHECK((center.direction - Vec3(-1, 0, 0)).norm() < 1e-6);
  }

  TEST_CASE("pixel rows go down the image, columns go right") {
    CameraPose pose;
    pose.focal = 4.0;
    pose.width = 4;
    pose.height = 4;
    const auto rays = generate_rays(pose, 0.0, 1.0);
    CHECK(rays[0].direction.x() < 0.0);
    CHECK(rays[0].direction.y() > 0.0);
    CHECK(rays[15].direction.x() > 0.0);
    CHECK(rays[15].direction.y() < 0.0);
  }

  TEST_CASE("non-orthonormal rotation is rejected") {
    CameraPose pose;
    pose.rotation(0, 0) = 1.1;
    CHECK_THROWS_AS(generate_rays(pose, 0.0, 1.0), ValidationError);
    CameraPose mirrored;
    mirrored.rotation(2, 2) = -1.0;
    CHECK_THROWS_AS(generate_rays(mirrored, 0.0, 1.0), ValidationError);
  }

  TEST_CASE("orbit poses look at the origin") {
    for (double az : {0.0, 45.0, 200.0}) {
      const CameraPose pose = orbit_pose(az, 30.0, 4.0, 50.0, 11, 11);
      pose.validate();
      CHECK(pose.translation.norm() == doctest::Approx(4.0));
      const Ray center = pixel_ray(pose, 5.5, 5.5, 0.0, 1.0);
      CHECK((center.direction + pose.translation.normalized()).norm() < 1e-9);
    }
  }
}

TEST_SUITE("stratified_sample") {
  TEST_CASE("fixed jitter pins bin positions") {
    const std::vector<double> mid(4, 0.5), left(4, 0.0), right(2, 1.0);
    const auto a = stratified_sample(0.0, 1.0, mid);
    const auto b = stratified_sample(0.0, 1.0, left);
    const auto c = stratified_sample(2.0, 6.0, right);
    CHECK(a == std::vector<double>{0.125, 0.375, 0.625, 0.875});
    CHECK(b == std::vector<double>{0.0, 0.25, 0.5, 0.75});
    CHECK(c == std::vector<double>{4.0, 6.0});
  }

  TEST_CASE("zero samples is a validation error") {
    Rng rng(1);
    CHECK_THROWS_AS(stratified_sample(0.0, 1.0, 0, rng), ValidationError);
    CHECK_THROWS_AS(stratified_sample(1.0, 1.0, 4, rng), ValidationError);
  }

  TEST_CASE("property: depth j lies in bin j for any seed") {
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
      Rng rng(seed);
      const double near = rng.uniform(0.0, 3.0);
      const double far = near + rng.uniform(0.1, 5.0);
      const int n = 1 + static_cast<int>(rng.below(70));
      const auto t = stratified_sample(near, far, n, rng);
      REQUIRE(t.size() == static_cast<std::size_t>(n));
      const double width = (far - near) / n;
      for (int j = 0; j < n; ++j) {
        CHECK(t[j] >= near + j * width - 1e-12);
        CHECK(t[j] <= near + (j + 1) * width + 1e-12);
      }
      CHECK(std::is_sorted(t.begin(), t.end()));
    }
  }
}

TEST_SUITE("hierarchical_sample") {
  TEST_CASE("one-hot weights keep every sample in the hot interval") {
    std::vector<double> edges(33);
    for (int i = 0; i <= 32; ++i) edges[i] = 2.0 + 0.125 * i;
    for (int hot : {0, 7, 31}) {
      std::vector<double> w(32, 0.0);
      w[hot] = 1.0;
      Rng rng(hot);
      const auto t = hierarchical_sample(edges, w, 500, rng);
      for (double x : t) {
        CHECK(x >= edges[hot]);
        CHECK(x <= edges[hot + 1]);
      }
    }
  }

  TEST_CASE("uniform weights pass a KS test against the uniform CDF") {
    std::vector<double> edges(65);
    for (int i = 0; i <= 64; ++i) edges[i] = i / 64.0;
    const std::vector<double> w(64, 0.3);
    Rng rng(2024);
    const auto t = hierarchical_sample(edges, w, 10000, rng);
    const double ks = oracle::ks_statistic(t, [](double x) { return std::clamp(x, 0.0, 1.0); });
    CHECK(ks < 0.02);
  }

  TEST_CASE("weights one and three put a quarter of midpoint draws in the first interval") {
    const std::vector<double> edges{0.0, 1.0, 2.0};
    const std::vector<double> w{1.0, 3.0};
    const int n = 400;
    std::vector<double> u(n);
    for (int k = 0; k < n; ++k) u[k] = (k + 0.5) / n;
    const auto t = hierarchical_sample(edges, w, u);
    const auto first = std::count_if(t.begin(), t.end(), [](double x) { return x < 1.0; });
    CHECK(first == n / 4);
    // Inverse CDF by hand: u in [0, 0.25) maps to 4u, u in [0.25, 1) to 1 + (u - 0.25) / 0.75.
    for (int k = 0; k < n; ++k) {
      const double expected = u[k] < 0.25 ? 4.0 * u[k] : 1.0 + (u[k] - 0.25) / 0.75;
      CHECK(t[k] == doctest::Approx(expected).epsilon(1e-12));
    }
  }

  TEST_CASE("all-zero weights fall back to uniform sampling") {
    const std::vector<double> edges{0.0, 1.0, 2.0, 3.0};
    const std::vector<double> w(3, 0.0);
    const std::vector<double> u{0.1, 0.5, 0.9};
    const auto t = hierarchical_sample(edges, w, u);
    CHECK(t[0] == doctest::Approx(0.3));
    CHECK(t[1] == doctest::Approx(1.5));
    CHECK(t[2] == doctest::Approx(2.7));
  }

  TEST_CASE("negative weights are rejected") {
    const std::vector<double> edges{0.0, 1.0, 2.0};
    const std::vector<double> w{1.0, -0.1};
    Rng rng(0);
    CHECK_THROWS_AS(hierarchical_sample(edges, w, 4, rng), ValidationError);
  }

  TEST_CASE("property: samples stay within the coarse range") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      Rng rng(seed);
      const int n = 2 + static_cast<int>(rng.below(60));
      const auto coarse = stratified_sample(1.0, 5.0, n, rng);
      std::vector<double> w(n - 1);
      for (double& x : w) x = rng.uniform() < 0.5 ? 0.0 : rng.uniform();
      const auto t = hierarchical_sample(coarse, w, 64, rng);
      for (double x : t) {
        CHECK(x >= coarse.front());
        CHECK(x <= coarse.back());
      }
      CHECK(std::is_sorted(t.begin(), t.end()));
    }
  }
}

TEST_SUITE("composite") {
  QuadratureBatch<double> single_ray(std::vector<double> sigmas, std::vector<double> deltas,
                                     std::vector<double> colors) {
    QuadratureBatch<double> b;
    b.num_rays = 1;
    b.num_samples = static_cast<int>(sigmas.size());
    b.sigmas = std::move(sigmas);
    b.deltas = std::move(deltas);
    b.colors = std::move(colors);
    return b;
  }

  TEST_CASE("transparent medium composites to black") {
    const auto b = single_ray({0, 0, 0}, {0.2, 0.3, 0.5}, {1, 1, 1, 0.5, 0.5, 0.5, 0, 1, 0});
    const auto r = composite(b);
    for (double c : r.rgb) CHECK(c == 0.0);
    for (double w : r.weights) CHECK(w == 0.0);
    for (double t : r.transmittance) CHECK(t == 1.0);
    CHECK(r.opacity[0] == 0.0);
  }

  TEST_CASE("opaque first sample returns its color") {
    const auto b = single_ray({1e6, 3.0}, {1.0, 1.0}, {0.2, 0.4, 0.6, 1, 1, 1});
    const auto r = composite(b);
    CHECK(std::abs(r.rgb[0] - 0.2) < 1e-6);
    CHECK(std::abs(r.rgb[1] - 0.4) < 1e-6);
    CHECK(std::abs(r.rgb[2] - 0.6) < 1e-6);
    CHECK(r.weights[0] == doctest::Approx(1.0));
  }

  TEST_CASE("two-sample example matches the hand-evaluated sum") {
    const auto b = single_ray({1.0, 2.0}, {0.5, 0.5}, {1, 0, 0, 0, 1, 0});
    const auto r = composite(b);
    const double w1 = 1.0 - std::exp(-0.5);
    const double w2 = std::exp(-0.5) * (1.0 - std::exp(-1.0));
    CHECK(r.weights[0] == doctest::Approx(w1).epsilon(1e-12));
    CHECK(r.weights[1] == doctest::Approx(w2).epsilon(1e-12));
    CHECK(r.weights[0] == doctest::Approx(0.3935).epsilon(1e-4));
    CHECK(r.weights[1] == doctest::Approx(0.3834).epsilon(1e-4));
    CHECK(r.rgb[0] == doctest::Approx(w1));
    CHECK(r.rgb[1] == doctest::Approx(w2));
    CHECK(r.rgb[2] == 0.0);
  }

  TEST_CASE("negative sigma or delta is rejected") {
    CHECK_THROWS_AS(composite(single_ray({-1.0}, {0.5}, {0, 0, 0})), ValidationError);
    CHECK_THROWS_AS(composite(single_ray({1.0}, {-0.5}, {0, 0, 0})), ValidationError);
  }

  TEST_CASE("property: telescoping, T_1 = 1 and nonincreasing transmittance") {
    Rng rng(99);
    for (int trial = 0; trial < 200; ++trial) {
      const auto b = oracle::random_batch(rng, 1 + static_cast<int>(rng.below(4)),
                                          1 + static_cast<int>(rng.below(16)));
      const auto r = composite(b);
      for (int ray = 0; ray < b.num_rays; ++ray) {
        double depth = 0.0;
        for (int i = 0; i < b.num_samples; ++i) {
          const std::size_t s = static_cast<std::size_t>(ray) * b.num_samples + i;
          depth += b.sigmas[s] * b.deltas[s];
          if (i == 0) CHECK(r.transmittance[s] == 1.0);
          else CHECK(r.transmittance[s] <= r.transmittance[s - 1]);
        }
        CHECK(std::abs(r.opacity[ray] - (1.0 - std::exp(-depth))) < 1e-5);
        CHECK(r.opacity[ray] >= 0.0);
        CHECK(r.opacity[ray] <= 1.0 + 1e-12);
      }
    }
  }

  TEST_CASE("matches the brute-force scalar oracle") {
    Rng rng(5);
    for (int trial = 0; trial < 100; ++trial) {
      const auto b = oracle::random_batch(rng, 3, 1 + static_cast<int>(rng.below(12)));
      const auto r = composite(b);
      for (int ray = 0; ray < b.num_rays; ++ray) {
        const auto expected = oracle::composite_ray(b, ray);
        for (int k = 0; k < 3; ++k) CHECK(std::abs(r.rgb[3 * ray + k] - expected[k]) < 1e-6);
      }
    }
  }

  TEST_CASE("analytic gradients match central differences") {
    Rng rng(17);
    for (int trial = 0; trial < 25; ++trial) {
      const auto b = oracle::random_batch(rng, 2, 1 + static_cast<int>(rng.below(8)));
      const auto report = oracle::gradient_check(b, rng, 1e-4);
      CHECK(report.max_relative_error < 1e-3);
    }
  }

  TEST_CASE("deltas use far for the last sample") {
    const std::vector<double> t{1.0, 1.5, 2.5};
    const std::vector<double> far{4.0};
    const auto d = deltas_from_depths<double>(1, 3, t, far);
    CHECK(d == std::vector<double>{0.5, 1.0, 1.5});
  }
}
