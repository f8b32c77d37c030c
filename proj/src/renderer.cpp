// Copyright 2026 The stylenerf Authors
// SPDX-License-Identifier: Apache-2.0

#include "stylenerf/renderer.hpp"

#include <algorithm>
#include <cmath>

#include "stylenerf/error.hpp"
#include "stylenerf/kernels.hpp"
#include "stylenerf/sampling.hpp"

namespace stylenerf {

RayBatch RayBatch::from_rays(std::span<const Ray> rays) {
  RayBatch b;
  b.origins.resize(3, static_cast<Eigen::Index>(rays.size()));
  b.directions.resize(3, static_cast<Eigen::Index>(rays.size()));
  if (!rays.empty()) {
    b.near = rays.front().near;
    b.far = rays.front().far;
  }
  for (std::size_t i = 0; i < rays.size(); ++i) {
    rays[i].validate();
    require(rays[i].near == b.near && rays[i].far == b.far, "ray batch: all rays must share near/far");
    b.origins.col(i) = rays[i].origin.cast<float>();
    b.directions.col(i) = rays[i].direction.cast<float>();
  }
  return b;
}

RayBatch RayBatch::slice(int begin, int end) const {
  RayBatch b;
  b.origins = origins.middleCols(begin, end - begin);
  b.directions = directions.middleCols(begin, end - begin);
  b.near = near;
  b.far = far;
  b.table = table;
  if (!conditions.empty()) b.conditions.assign(conditions.begin() + begin, conditions.begin() + end);
  return b;
}

void RayBatch::validate() const {
  require(origins.rows() == 3 && directions.rows() == 3 && origins.cols() == directions.cols(),
          "ray batch: origins and directions must be 3 x R");
  require(near >= 0.0 && far > near, "ray batch: need 0 <= near < far");
  require(conditions.empty() || conditions.size() == static_cast<std::size_t>(size()),
          "ray batch: one condition per ray");
  if (!conditions.empty()) {
    require(table != nullptr, "ray batch: conditions given without a table");
    for (int c : conditions) require(c >= 0 && c < table->cols(), "ray batch: condition index out of range");
  }
  for (Eigen::Index i = 0; i < directions.cols(); ++i) {
    require(std::abs(directions.col(i).cast<double>().norm() - 1.0) < 1e-5, "ray batch: direction is not unit length");
  }
}

void RenderOptions::validate() const {
  require(n_coarse >= 2, "render: n_coarse must be >= 2");
  require(n_fine >= 0, "render: n_fine must be >= 0");
  require(chunk >= 1, "render: chunk must be >= 1");
}

namespace {

// Samples of one pass for a batch of rays.
struct Pass {
  int rays = 0;
  int samples = 0;
  std::vector<double> t;  // R x S
  std::vector<float> deltas;
  SampleBatch batch;
  FieldOutput out;
  std::vector<float> weights, transmittance, rgb, opacity;
};

void build_samples(Pass& p, const RayBatch& rays) {
  const std::size_t n = static_cast<std::size_t>(p.rays) * p.samples;
  p.batch.positions.resize(3, static_cast<Eigen::Index>(n));
  p.batch.directions.resize(3, static_cast<Eigen::Index>(n));
  p.deltas.resize(n);
  p.batch.table = rays.table;
  p.batch.conditions.clear();
  if (!rays.conditions.empty()) p.batch.conditions.resize(n);
  for (int r = 0; r < p.rays; ++r) {
    const auto o = rays.origins.col(r);
    const auto d = rays.directions.col(r);
    for (int i = 0; i < p.samples; ++i) {
      const std::size_t s = static_cast<std::size_t>(r) * p.samples + i;
      const double t = p.t[s];
      p.batch.positions.col(s) = o + static_cast<float>(t) * d;
      p.batch.directions.col(s) = d;
      const double next = i + 1 < p.samples ? p.t[s + 1] : rays.far;
      p.deltas[s] = static_cast<float>(std::max(0.0, next - t));
      if (!rays.conditions.empty()) p.batch.conditions[s] = rays.conditions[r];
    }
  }
}

void composite_pass(Pass& p) {
  const std::size_t n = static_cast<std::size_t>(p.rays) * p.samples;
  p.weights.resize(n);
  p.transmittance.resize(n);
  p.rgb.resize(3 * static_cast<std::size_t>(p.rays));
  p.opacity.resize(p.rays);
  kernels::parallel::composite_forward<float>(
      p.rays, p.samples, std::span<const float>(p.out.sigma.data(), n), p.deltas,
      std::span<const float>(p.out.rgb.data(), 3 * n), p.weights, p.transmittance, p.rgb, p.opacity);
}

void coarse_depths(Pass& p, const RayBatch& rays, const RenderOptions& opt, Rng* rng) {
  p.rays = rays.size();
  p.samples = opt.n_coarse;
  p.t.resize(static_cast<std::size_t>(p.rays) * p.samples);
  const std::vector<double> mid = stratified_midpoints(rays.near, rays.far, opt.n_coarse);
  for (int r = 0; r < p.rays; ++r) {
    const std::vector<double> t = opt.perturb ? stratified_sample(rays.near, rays.far, opt.n_coarse, *rng) : mid;
    std::copy(t.begin(), t.end(), p.t.begin() + static_cast<std::ptrdiff_t>(r) * p.samples);
  }
}

// Fine depths from the coarse weights: bin edges at the midpoints between
// coarse depths, interior weights only; merged with the coarse depths.
void fine_depths(Pass& fine, const Pass& coarse, const RenderOptions& opt, Rng* rng) {
  fine.rays = coarse.rays;
  fine.samples = coarse.samples + opt.n_fine;
  fine.t.resize(static_cast<std::size_t>(fine.rays) * fine.samples);
  const int s = coarse.samples;
  std::vector<double> edges(s - 1), weights(std::max(s - 2, 0));
  Rng dummy(0);
  for (int r = 0; r < coarse.rays; ++r) {
    const double* t = coarse.t.data() + static_cast<std::size_t>(r) * s;
    const float* w = coarse.weights.data() + static_cast<std::size_t>(r) * s;
    std::vector<double> extra;
    if (s >= 3) {
      for (int i = 0; i + 1 < s; ++i) edges[i] = 0.5 * (t[i] + t[i + 1]);
      for (int i = 1; i + 1 < s; ++i) weights[i - 1] = w[i];
      extra = hierarchical_sample(edges, weights, opt.n_fine, opt.perturb ? *rng : dummy, !opt.perturb);
    } else {
      const double e[2] = {t[0], t[s - 1]}, one[1] = {1.0};
      extra = hierarchical_sample(e, one, opt.n_fine, opt.perturb ? *rng : dummy, !opt.perturb);
    }
    double* out = fine.t.data() + static_cast<std::size_t>(r) * fine.samples;
    std::merge(t, t + s, extra.begin(), extra.end(), out);
  }
}

void blend_background(std::vector<float>& rgb, const std::vector<float>& opacity, const std::array<float, 3>& bg,
                      Matrix& out) {
  const int rays = static_cast<int>(opacity.size());
  out.resize(3, rays);
  for (int r = 0; r < rays; ++r)
    for (int c = 0; c < 3; ++c) out(c, r) = rgb[3 * r + c] + (1.0f - opacity[r]) * bg[c];
}

RenderResult render_chunk(const RadianceField& coarse, const RadianceField& fine, const RayBatch& rays,
                          const RenderOptions& opt, Rng* rng) {
  RenderResult res;
  Pass pc;
  coarse_depths(pc, rays, opt, rng);
  build_samples(pc, rays);
  pc.out = coarse.query(pc.batch);
  composite_pass(pc);
  blend_background(pc.rgb, pc.opacity, opt.background, res.rgb_coarse);
  res.opacity_coarse = pc.opacity;
  res.weights_coarse = pc.weights;
  res.samples_coarse = pc.samples;

  if (opt.n_fine == 0) {
    res.rgb_fine = res.rgb_coarse;
    res.opacity_fine = res.opacity_coarse;
    res.samples_fine = pc.samples;
    res.depth_fine.assign(pc.rays, 0.0f);
    for (int r = 0; r < pc.rays; ++r)
      for (int i = 0; i < pc.samples; ++i)
        res.depth_fine[r] += pc.weights[r * pc.samples + i] * static_cast<float>(pc.t[r * pc.samples + i]);
    return res;
  }
  Pass pf;
  fine_depths(pf, pc, opt, rng);
  build_samples(pf, rays);
  pf.out = fine.query(pf.batch);
  composite_pass(pf);
  blend_background(pf.rgb, pf.opacity, opt.background, res.rgb_fine);
  res.opacity_fine = pf.opacity;
  res.samples_fine = pf.samples;
  res.depth_fine.assign(pf.rays, 0.0f);
  for (int r = 0; r < pf.rays; ++r)
    for (int i = 0; i < pf.samples; ++i)
      res.depth_fine[r] += pf.weights[r * pf.samples + i] * static_cast<float>(pf.t[r * pf.samples + i]);
  return res;
}

}  // namespace

RenderResult render_rays(const RadianceField& coarse, const RadianceField* fine, const RayBatch& rays,
                         const RenderOptions& options, Rng* rng) {
  options.validate();
  rays.validate();
  require(!options.perturb || rng != nullptr, "render: perturbed sampling needs an rng");
  const RadianceField& f = fine ? *fine : coarse;
  RenderResult all;
  const int n = rays.size();
  all.rgb_coarse.resize(3, n);
  all.rgb_fine.resize(3, n);
  for (int begin = 0; begin < n; begin += options.chunk) {
    const int end = std::min(n, begin + options.chunk);
    RenderResult part = render_chunk(coarse, f, rays.slice(begin, end), options, rng);
    all.rgb_coarse.middleCols(begin, end - begin) = part.rgb_coarse;
    all.rgb_fine.middleCols(begin, end - begin) = part.rgb_fine;
    auto append = [](std::vector<float>& dst, const std::vector<float>& src) { dst.insert(dst.end(), src.begin(), src.end()); };
    append(all.opacity_coarse, part.opacity_coarse);
    append(all.opacity_fine, part.opacity_fine);
    append(all.depth_fine, part.depth_fine);
    append(all.weights_coarse, part.weights_coarse);
    all.samples_coarse = part.samples_coarse;
    all.samples_fine = part.samples_fine;
  }
  return all;
}

namespace {

// Backward of one pass given dL/d(blended rgb); returns nothing, feeds the field.
void backward_pass(RadianceField& field, const FieldTrace& trace, Pass& p, const Matrix& grad_rgb,
                   const std::array<float, 3>& bg) {
  const std::size_t n = static_cast<std::size_t>(p.rays) * p.samples;
  std::vector<float> g_rgb(3 * static_cast<std::size_t>(p.rays)), g_acc(p.rays);
  for (int r = 0; r < p.rays; ++r) {
    float ga = 0.0f;
    for (int c = 0; c < 3; ++c) {
      g_rgb[3 * r + c] = grad_rgb(c, r);
      ga -= grad_rgb(c, r) * bg[c];
    }
    g_acc[r] = ga;
  }
  Matrix g_sigma(1, static_cast<Eigen::Index>(n)), g_color(3, static_cast<Eigen::Index>(n));
  kernels::parallel::composite_backward<float>(
      p.rays, p.samples, std::span<const float>(p.out.sigma.data(), n), p.deltas,
      std::span<const float>(p.out.rgb.data(), 3 * n), g_rgb, g_acc, std::span<float>(g_sigma.data(), n),
      std::span<float>(g_color.data(), 3 * n));
  field.backward(trace, g_sigma, g_color);
}

}  // namespace

TrainRaysResult train_rays(RadianceField& coarse, RadianceField* fine, const RayBatch& rays, const Matrix& target,
                           const RenderOptions& opt, Rng* rng) {
  opt.validate();
  rays.validate();
  require(target.rows() == 3 && target.cols() == rays.size(), "train_rays: target must be 3 x R");
  require(!opt.perturb || rng != nullptr, "train_rays: perturbed sampling needs an rng");
  RadianceField& ff = fine ? *fine : coarse;
  const double denom = 3.0 * rays.size();
  TrainRaysResult res;

  Pass pc;
  coarse_depths(pc, rays, opt, rng);
  build_samples(pc, rays);
  std::unique_ptr<FieldTrace> tc;
  pc.out = coarse.query_train(pc.batch, tc);
  composite_pass(pc);
  Matrix rgb_c;
  blend_background(pc.rgb, pc.opacity, opt.background, rgb_c);
  const Matrix diff_c = rgb_c - target;
  res.mse_coarse = static_cast<double>(diff_c.cast<double>().squaredNorm()) / denom;

  Pass pf;
  std::unique_ptr<FieldTrace> tf;
  Matrix diff_f;
  if (opt.n_fine > 0) {
    fine_depths(pf, pc, opt, rng);
    build_samples(pf, rays);
    pf.out = ff.query_train(pf.batch, tf);
    composite_pass(pf);
    Matrix rgb_f;
    blend_background(pf.rgb, pf.opacity, opt.background, rgb_f);
    diff_f = rgb_f - target;
    res.mse_fine = static_cast<double>(diff_f.cast<double>().squaredNorm()) / denom;
  }
  res.loss = res.mse_coarse + res.mse_fine;
  const Matrix& last = opt.n_fine > 0 ? diff_f : diff_c;
  res.ray_error.resize(rays.size());
  for (int r = 0; r < rays.size(); ++r) res.ray_error[r] = last.col(r).cast<double>().squaredNorm() / 3.0;

  const float scale = static_cast<float>(2.0 / denom);
  backward_pass(coarse, *tc, pc, scale * diff_c, opt.background);
  if (opt.n_fine > 0) backward_pass(ff, *tf, pf, scale * diff_f, opt.background);
  return res;
}

Image render_image(const RadianceField& coarse, const RadianceField* fine, const CameraPose& pose, double near,
                   double far, const RenderOptions& options, Rng* rng, std::vector<float>* opacity,
                   const Matrix* table, int condition) {
  RayBatch rays = RayBatch::from_rays(generate_rays(pose, near, far));
  if (table != nullptr) {
    rays.table = table;
    rays.conditions.assign(rays.size(), condition);
  }
  const RenderResult res = render_rays(coarse, fine, rays, options, rng);
  Image img(pose.width, pose.height);
  for (int r = 0; r < rays.size(); ++r)
    for (int c = 0; c < 3; ++c) img.rgb[3 * static_cast<std::size_t>(r) + c] = std::clamp(res.rgb_fine(c, r), 0.0f, 1.0f);
  if (opacity) *opacity = res.opacity_fine;
  return img;
}

}  // namespace stylenerf
