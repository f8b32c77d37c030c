// Copyright 2026 The stylenerf Authors
// SPDX-License-Identifier: Apache-2.0

#include "stylenerf/multistyle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "stylenerf/digest.hpp"
#include "stylenerf/encoding.hpp"
#include "stylenerf/error.hpp"

namespace stylenerf {

namespace fs = std::filesystem;

// ---------------------------------------------------------------- styles

namespace {

float lerp_exact(float a, float b, double lambda) {
  // Anchored at the nearer endpoint so lambda = 0, lambda = 1 and a == b are exact.
  if (lambda <= 0.5) return static_cast<float>(a + lambda * (static_cast<double>(b) - a));
  return static_cast<float>(b + (1.0 - lambda) * (static_cast<double>(a) - b));
}

}  // namespace

StyleStatistics interpolate_styles(const StyleStatistics& a, const StyleStatistics& b, double lambda) {
  require(std::isfinite(lambda) && lambda >= 0.0 && lambda <= 1.0,
          "interpolate_styles: lambda must lie in [0, 1], got " + std::to_string(lambda));
  require(a.layer_channels() == b.layer_channels(), "interpolate_styles: statistics have different layouts");
  StyleStatistics out = a;
  for (std::size_t l = 0; l < a.means.size(); ++l) {
    for (std::size_t c = 0; c < a.means[l].size(); ++c) {
      out.means[l][c] = lerp_exact(a.means[l][c], b.means[l][c], lambda);
      out.stds[l][c] = std::max(0.0f, lerp_exact(a.stds[l][c], b.stds[l][c], lambda));
    }
  }
  return out;
}

StyleStatistics set_intensity(const StyleStatistics& style, const StyleStatistics& content, double intensity) {
  return interpolate_styles(content, style, intensity);
}

void StyleRegistry::add(StyleEntry entry) {
  require(!entry.id.empty(), "style registry: empty style id");
  require(find(entry.id) < 0, "style registry: duplicate style id '" + entry.id + "'");
  require(entry.kind == "style" || entry.kind == "content", "style registry: kind must be 'style' or 'content'");
  entry.statistics.validate();
  if (!entries_.empty()) {
    require(entry.statistics.layer_channels() == entries_.front().statistics.layer_channels(),
            "style registry: statistics layout differs between entries");
  }
  entries_.push_back(std::move(entry));
}

int StyleRegistry::find(const std::string& id) const {
  for (std::size_t i = 0; i < entries_.size(); ++i)
    if (entries_[i].id == id) return static_cast<int>(i);
  return -1;
}

const StyleEntry& StyleRegistry::at(const std::string& id) const {
  const int i = find(id);
  if (i < 0) throw ValidationError("unknown style '" + id + "'");
  return entries_[i];
}

const StyleEntry* StyleRegistry::content() const {
  for (const StyleEntry& e : entries_)
    if (e.kind == "content") return &e;
  return nullptr;
}

Matrix StyleRegistry::table() const {
  require(!entries_.empty(), "style registry is empty");
  const int dim = entries_.front().statistics.flattened_dim();
  Matrix t(dim, static_cast<Eigen::Index>(entries_.size()));
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto flat = entries_[i].statistics.flatten();
    t.col(i) = Eigen::Map<const Eigen::VectorXf>(flat.data(), dim);
  }
  return t;
}

nlohmann::ordered_json StyleRegistry::to_json() const {
  nlohmann::ordered_json styles = nlohmann::ordered_json::object();
  for (const StyleEntry& e : entries_) {
    styles[e.id] = {{"name", e.name},
                    {"image", e.image},
                    {"kind", e.kind},
                    {"layer_channels", e.statistics.layer_channels()},
                    {"statistics", e.statistics.flatten()}};
  }
  return {{"version", 1}, {"styles", styles}};
}

StyleRegistry StyleRegistry::from_json(const nlohmann::ordered_json& j) {
  StyleRegistry r;
  try {
    require(j.value("version", 0) == 1, "registry: unsupported version");
    for (const auto& [id, v] : j.at("styles").items()) {
      StyleEntry e;
      e.id = id;
      e.name = v.at("name").get<std::string>();
      e.image = v.value("image", std::string());
      e.kind = v.value("kind", std::string("style"));
      const auto channels = v.at("layer_channels").get<std::vector<int>>();
      const auto flat = v.at("statistics").get<std::vector<float>>();
      e.statistics = StyleStatistics::unflatten(flat, channels);
      r.add(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("registry: malformed JSON: ") + e.what());
  }
  return r;
}

std::string StyleRegistry::digest() const { return sha256_hex(to_json().dump()); }

void StyleRegistry::save(const fs::path& path) const { write_file_atomic(path, to_json().dump(1) + "\n"); }

StyleRegistry StyleRegistry::load(const fs::path& path) {
  const auto bytes = read_file(path);
  try {
    return from_json(nlohmann::ordered_json::parse(bytes.begin(), bytes.end()));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------- dataset

void StylizedDataset::validate() const {
  scene.validate();
  require(images.size() == registry.size(), "stylized dataset: one image row per style");
  for (const auto& row : images) {
    require(row.size() == scene.size(), "stylized dataset: one image per frame and style");
    for (const Image& img : row)
      require(img.width == scene.width() && img.height == scene.height(), "stylized dataset: image size mismatch");
  }
}

Image encoder_sized(const Image& image) {
  auto fit = [](int v) { return std::max(kMinImageSize, v / 8 * 8); };
  const int w = fit(image.width), h = fit(image.height);
  if (w == image.width && h == image.height) return image;
  return resize_bilinear(image, w, h);
}

namespace {

std::string style_id(int m) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "style_%02d", m);
  return buf;
}

Image mask_onto_background(const Image& stylized, const Image& frame, const std::array<float, 3>& bg) {
  if (!frame.has_alpha()) return stylized;
  Image out(stylized.width, stylized.height);
  for (std::size_t p = 0; p < out.pixels(); ++p) {
    const float a = frame.alpha[p];
    for (int c = 0; c < 3; ++c) out.rgb[3 * p + c] = a * stylized.rgb[3 * p + c] + (1.0f - a) * bg[c];
  }
  return out;
}

fs::path stylized_path(const fs::path& root, const std::string& style, const std::string& frame) {
  return root / "stylized" / style / (frame + ".png");
}

// 8-bit round trip so in-memory images equal what a reload sees.
Image quantized(const Image& img) {
  Image copy = img;
  copy.alpha.clear();
  return decode_png(encode_png(copy));
}

}  // namespace

StylizedDataset build_stylized_dataset(const SceneDataset& scene_all, const std::vector<StyleSource>& styles,
                                       const Stylizer& stylizer, const StylizeOptions& options,
                                       const fs::path& out_dir) {
  StylizedDataset data;
  data.scene = scene_all.subset("train");
  require(data.scene.size() > 0, "build_stylized_dataset: scene has no training frames");
  require(!styles.empty() || options.include_content_as_style, "build_stylized_dataset: no styles given");
  Encoder::validate_input(3, data.scene.height(), data.scene.width());
  const Encoder& encoder = stylizer.encoder();

  for (std::size_t m = 0; m < styles.size(); ++m) {
    const StyleSource& src = styles[m];
    Image img = src.image;
    if (img.pixels() == 0) {
      try {
        img = load_image(src.path);
      } catch (const std::exception& e) {
        throw IoError("style '" + src.name + "': cannot read " + src.path + ": " + e.what());
      }
    }
    img = encoder_sized(composite_over(img, {1.0f, 1.0f, 1.0f}));
    StyleEntry entry{style_id(static_cast<int>(m)), src.name, src.path, "style",
                     extract_style_statistics(encoder, img)};
    std::vector<Image> row;
    for (std::size_t n = 0; n < data.scene.size(); ++n) {
      const Image& frame = data.scene.images[n];
      Image out = mask_onto_background(stylizer.stylize(frame, entry.statistics, 1.0), frame, data.scene.background);
      out = quantized(out);
      save_png(out, stylized_path(out_dir, entry.id, data.scene.frame_ids[n]));
      row.push_back(std::move(out));
    }
    data.registry.add(std::move(entry));
    data.images.push_back(std::move(row));
  }

  if (options.include_content_as_style) {
    std::vector<float> mean;
    std::vector<int> channels;
    std::vector<Image> row;
    for (std::size_t n = 0; n < data.scene.size(); ++n) {
      const Image& frame = data.scene.images[n];
      const StyleStatistics s = extract_style_statistics(encoder, frame);
      const auto flat = s.flatten();
      if (mean.empty()) {
        mean.assign(flat.size(), 0.0f);
        channels = s.layer_channels();
      }
      for (std::size_t i = 0; i < flat.size(); ++i) mean[i] += flat[i] / static_cast<float>(data.scene.size());
      Image out = quantized(frame);
      save_png(out, stylized_path(out_dir, "content", data.scene.frame_ids[n]));
      row.push_back(std::move(out));
    }
    data.registry.add({"content", "content", "", "content", StyleStatistics::unflatten(mean, channels)});
    data.images.push_back(std::move(row));
  }
  data.registry.save(out_dir / "registry.json");
  data.validate();
  return data;
}

StylizedDataset load_stylized_dataset(const SceneDataset& scene_all, const fs::path& run_dir) {
  StylizedDataset data;
  data.scene = scene_all.subset("train");
  data.registry = StyleRegistry::load(run_dir / "registry.json");
  for (const StyleEntry& e : data.registry.entries()) {
    std::vector<Image> row;
    for (const std::string& frame : data.scene.frame_ids) {
      const fs::path p = stylized_path(run_dir, e.id, frame);
      if (!fs::exists(p)) throw IoError("stylized image missing: " + p.string());
      Image img = load_image(p);
      img.alpha.clear();
      row.push_back(std::move(img));
    }
    data.images.push_back(std::move(row));
  }
  data.validate();
  return data;
}

// ---------------------------------------------------------------- network

void MultistyleArchitecture::validate(const NerfArchitecture& trunk) const {
  require(trunk_split >= 1 && trunk_split <= trunk.depth,
          "multistyle.trunk_split must lie in [1, " + std::to_string(trunk.depth) + "]");
  for (int v : {style_hidden, style_embed, view_embed, rgb_hidden, density_hidden, density_embed})
    require(v >= 1 && v <= 4096, "multistyle head widths must lie in [1, 4096]");
}

struct MultiStyleField::Trace : FieldTrace {
  Matrix h;          // trunk output
  Matrix view_in;    // h ++ gamma(d)
  Matrix view;       // mlp_view output
  std::vector<int> slot;  // sample -> distinct style
  Matrix styles;          // distinct style vectors (style_dim x K)
  MlpTrace style_trace;
  Matrix style_emb;       // style_embed x K
  Matrix rgb_hidden;
  Matrix rgb;
  Matrix sigma;
  MlpTrace density_trace;
  Matrix density_emb;     // density_embed x K
};

MultiStyleField::MultiStyleField(std::shared_ptr<const NerfNetwork> trunk, const MultistyleArchitecture& arch,
                                 int style_dim, std::uint64_t seed)
    : trunk_(std::move(trunk)), arch_(arch), style_dim_(style_dim) {
  require(trunk_ != nullptr, "multistyle: missing trunk");
  const NerfArchitecture& t = trunk_->architecture();
  arch.validate(t);
  require(style_dim >= 1, "multistyle: style dimension must be positive");
  Rng rng(seed);
  mlp_style_ = Mlp({style_dim, arch.style_hidden, arch.style_embed}, {Activation::kRelu, Activation::kNone}, rng);
  mlp_view_ = Linear(t.width + t.direction_dim(), arch.view_embed, rng);
  mlp_rgb_ = Mlp({arch.style_embed + arch.view_embed, arch.rgb_hidden, 3}, {Activation::kRelu, Activation::kSigmoid},
                 rng);
  const int alpha_in = t.width + (arch.density_aware ? arch.density_embed : 0);
  mlp_alpha_ = Linear(alpha_in, 1, rng);
  if (arch.trunk_split == t.depth) {
    mlp_alpha_.weight.setZero();
    mlp_alpha_.weight.leftCols(t.width) = trunk_->density_head().weight;
    mlp_alpha_.bias = trunk_->density_head().bias;
  }
  if (arch.density_aware) {
    mlp_style_density_ = Mlp({style_dim, arch.density_hidden, arch.density_embed},
                             {Activation::kRelu, Activation::kNone}, rng);
  }
}

FieldOutput MultiStyleField::forward(const SampleBatch& batch, Trace* trace) const {
  require(batch.table != nullptr && batch.table->rows() == style_dim_,
          "multistyle: style statistics of dimension " + std::to_string(style_dim_) + " required");
  require(batch.conditions.size() == static_cast<std::size_t>(batch.size()),
          "multistyle: one style index per sample required");
  const NerfArchitecture& ta = trunk_->architecture();
  Trace local;
  Trace& t = trace ? *trace : local;

  // Distinct styles in first-seen order.
  std::vector<int> seen(batch.table->cols(), -1);
  std::vector<int> distinct;
  t.slot.resize(batch.size());
  for (int i = 0; i < batch.size(); ++i) {
    const int c = batch.conditions[i];
    require(c >= 0 && c < batch.table->cols(), "multistyle: style index out of range");
    if (seen[c] < 0) {
      seen[c] = static_cast<int>(distinct.size());
      distinct.push_back(c);
    }
    t.slot[i] = seen[c];
  }
  t.styles.resize(style_dim_, static_cast<Eigen::Index>(distinct.size()));
  for (std::size_t k = 0; k < distinct.size(); ++k) t.styles.col(k) = batch.table->col(distinct[k]);

  t.h = trunk_->trunk(encode_columns(batch.positions, ta.position_levels), arch_.trunk_split);
  const Matrix enc_dir = encode_directions(batch.directions, ta.direction_levels);
  t.view_in.resize(t.h.rows() + enc_dir.rows(), t.h.cols());
  t.view_in.topRows(t.h.rows()) = t.h;
  t.view_in.bottomRows(enc_dir.rows()) = enc_dir;
  t.view = mlp_view_.forward(t.view_in, Activation::kRelu);

  t.style_emb = trace ? mlp_style_.forward(t.styles, t.style_trace) : mlp_style_.forward(t.styles);

  // mlp_rgb layer 0 on (style ++ view): the style half is evaluated once per style.
  const Linear& r0 = mlp_rgb_.layers()[0];
  const Matrix style_part = r0.weight.leftCols(arch_.style_embed) * t.style_emb;
  t.rgb_hidden.resize(arch_.rgb_hidden, batch.size());
  t.rgb_hidden.noalias() = r0.weight.rightCols(arch_.view_embed) * t.view;
  for (int i = 0; i < batch.size(); ++i) t.rgb_hidden.col(i) += style_part.col(t.slot[i]) + r0.bias;
  apply_activation(t.rgb_hidden, Activation::kRelu);
  t.rgb = mlp_rgb_.layers()[1].forward(t.rgb_hidden, Activation::kSigmoid);

  if (arch_.density_aware) {
    t.density_emb = trace ? mlp_style_density_.forward(t.styles, t.density_trace) : mlp_style_density_.forward(t.styles);
    const Matrix dens_part = mlp_alpha_.weight.rightCols(arch_.density_embed) * t.density_emb;
    t.sigma.resize(1, batch.size());
    t.sigma.noalias() = mlp_alpha_.weight.leftCols(t.h.rows()) * t.h;
    for (int i = 0; i < batch.size(); ++i) t.sigma(0, i) += dens_part(0, t.slot[i]) + mlp_alpha_.bias(0);
    apply_activation(t.sigma, Activation::kRelu);
  } else {
    t.sigma = mlp_alpha_.forward(t.h, Activation::kRelu);
  }
  return {t.sigma, t.rgb};
}

FieldOutput MultiStyleField::query(const SampleBatch& batch) const { return forward(batch, nullptr); }

FieldOutput MultiStyleField::query_train(const SampleBatch& batch, std::unique_ptr<FieldTrace>& trace) const {
  auto t = std::make_unique<Trace>();
  FieldOutput out = forward(batch, t.get());
  trace = std::move(t);
  return out;
}

namespace {

// Column sums of `g` grouped by slot.
Matrix group_sum(const Matrix& g, const std::vector<int>& slot, Eigen::Index groups) {
  Matrix out = Matrix::Zero(g.rows(), groups);
  for (Eigen::Index i = 0; i < g.cols(); ++i) out.col(slot[i]) += g.col(i);
  return out;
}

}  // namespace

void MultiStyleField::backward(const FieldTrace& base, const Matrix& grad_sigma, const Matrix& grad_rgb) {
  const auto& t = static_cast<const Trace&>(base);
  const Eigen::Index groups = t.styles.cols();

  // color path
  Matrix g = grad_rgb;
  Matrix g_hidden = mlp_rgb_.layers()[1].backward(t.rgb_hidden, t.rgb, g, Activation::kSigmoid, true);
  activation_backward(t.rgb_hidden, g_hidden, Activation::kRelu);
  Linear& r0 = mlp_rgb_.layers()[0];
  const Matrix g_group = group_sum(g_hidden, t.slot, groups);
  r0.grad_weight.leftCols(arch_.style_embed).noalias() += g_group * t.style_emb.transpose();
  r0.grad_weight.rightCols(arch_.view_embed).noalias() += g_hidden * t.view.transpose();
  add_row_sums(g_hidden, r0.grad_bias);
  Matrix g_view = r0.weight.rightCols(arch_.view_embed).transpose() * g_hidden;
  mlp_view_.backward(t.view_in, t.view, g_view, Activation::kRelu, false);
  mlp_style_.backward(t.style_trace, r0.weight.leftCols(arch_.style_embed).transpose() * g_group, false);

  // density path
  Matrix gs = grad_sigma;
  if (arch_.density_aware) {
    activation_backward(t.sigma, gs, Activation::kRelu);
    const Matrix gs_group = group_sum(gs, t.slot, groups);
    mlp_alpha_.grad_weight.leftCols(t.h.rows()).noalias() += gs * t.h.transpose();
    mlp_alpha_.grad_weight.rightCols(arch_.density_embed).noalias() += gs_group * t.density_emb.transpose();
    add_row_sums(gs, mlp_alpha_.grad_bias);
    mlp_style_density_.backward(t.density_trace,
                                mlp_alpha_.weight.rightCols(arch_.density_embed).transpose() * gs_group, false);
  } else {
    mlp_alpha_.backward(t.h, t.sigma, gs, Activation::kRelu, false);
  }
}

void MultiStyleField::append_parameters(ParameterList& out, const std::string& prefix) {
  mlp_style_.append_parameters(out, prefix + ".mlp_style");
  mlp_view_.append_parameters(out, prefix + ".mlp_view");
  mlp_rgb_.append_parameters(out, prefix + ".mlp_rgb");
  mlp_alpha_.append_parameters(out, prefix + ".mlp_alpha");
  if (arch_.density_aware) mlp_style_density_.append_parameters(out, prefix + ".mlp_style_density");
}

std::string MultiStyleField::trunk_digest() const { return trunk_->trunk_digest(arch_.trunk_split); }

std::string MultiStyleField::heads_digest() const {
  Sha256 h;
  mlp_style_.hash_into(h);
  mlp_view_.hash_into(h);
  mlp_rgb_.hash_into(h);
  mlp_alpha_.hash_into(h);
  if (arch_.density_aware) mlp_style_density_.hash_into(h);
  return h.hex();
}

// ---------------------------------------------------------------- config

void to_json(nlohmann::json& j, const MultistyleArchitecture& a) {
  j = {{"trunk_split", a.trunk_split},       {"density_aware", a.density_aware}, {"style_hidden", a.style_hidden},
       {"style_embed", a.style_embed},       {"view_embed", a.view_embed},       {"rgb_hidden", a.rgb_hidden},
       {"density_hidden", a.density_hidden}, {"density_embed", a.density_embed}};
}

void from_json(const nlohmann::json& j, MultistyleArchitecture& a) {
  a.trunk_split = j.value("trunk_split", a.trunk_split);
  a.density_aware = j.value("density_aware", a.density_aware);
  a.style_hidden = j.value("style_hidden", a.style_hidden);
  a.style_embed = j.value("style_embed", a.style_embed);
  a.view_embed = j.value("view_embed", a.view_embed);
  a.rgb_hidden = j.value("rgb_hidden", a.rgb_hidden);
  a.density_hidden = j.value("density_hidden", a.density_hidden);
  a.density_embed = j.value("density_embed", a.density_embed);
}

void to_json(nlohmann::json& j, const MultistyleTrainConfig& c) {
  j = {{"arch", c.arch},
       {"batch_rays", c.batch_rays},
       {"learning_rate", c.learning_rate},
       {"lr_decay_rate", c.lr_decay_rate},
       {"lr_decay_steps", c.lr_decay_steps},
       {"steps", c.steps},
       {"seed", c.seed},
       {"perturb", c.perturb},
       {"log_every", c.log_every}};
}

void from_json(const nlohmann::json& j, MultistyleTrainConfig& c) {
  if (j.contains("arch")) c.arch = j.at("arch").get<MultistyleArchitecture>();
  c.batch_rays = j.value("batch_rays", c.batch_rays);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.lr_decay_rate = j.value("lr_decay_rate", c.lr_decay_rate);
  c.lr_decay_steps = j.value("lr_decay_steps", c.lr_decay_steps);
  c.steps = j.value("steps", c.steps);
  c.seed = j.value("seed", c.seed);
  c.perturb = j.value("perturb", c.perturb);
  c.log_every = j.value("log_every", c.log_every);
}

void validate(const MultistyleTrainConfig& c) {
  require(c.batch_rays >= 1, "multistyle.batch_rays must be >= 1");
  require(c.learning_rate > 0.0f && std::isfinite(c.learning_rate), "multistyle.learning_rate must be positive");
  require(c.lr_decay_rate > 0.0 && c.lr_decay_rate <= 1.0, "multistyle.lr_decay_rate must lie in (0, 1]");
  require(c.lr_decay_steps >= 1, "multistyle.lr_decay_steps must be >= 1");
  require(c.steps >= 0, "multistyle.steps must be >= 0");
  require(c.log_every >= 1, "multistyle.log_every must be >= 1");
}

// ---------------------------------------------------------------- model

MultiStyleModel::MultiStyleModel(const NerfModel& stage2, const MultistyleTrainConfig& config, StyleRegistry registry)
    : config_(config), stage2_config_(stage2.config),
      stage2_coarse_(std::make_shared<NerfNetwork>(stage2.coarse)),
      stage2_fine_(std::make_shared<NerfNetwork>(stage2.fine)), registry_(std::move(registry)),
      near_(stage2.near), far_(stage2.far), background_(stage2.background) {
  validate(config);
  config.arch.validate(stage2.config.arch);
  require(registry_.size() > 0, "multistyle: style registry is empty");
  const int dim = registry_.entries().front().statistics.flattened_dim();
  coarse_ = std::make_unique<MultiStyleField>(stage2_coarse_, config.arch, dim, config.seed * 2 + 101);
  fine_ = std::make_unique<MultiStyleField>(stage2_fine_, config.arch, dim, config.seed * 2 + 102);
}

RenderOptions MultiStyleModel::render_options(bool training) const {
  RenderOptions o = stage2_config_.render_options(false, background_);
  o.perturb = training && config_.perturb;
  return o;
}

ParameterList MultiStyleModel::head_parameters() {
  ParameterList p;
  coarse_->append_parameters(p, "coarse");
  fine_->append_parameters(p, "fine");
  return p;
}

std::string MultiStyleModel::trunk_digest() const {
  Sha256 h;
  h.update(coarse_->trunk_digest());
  h.update(fine_->trunk_digest());
  return h.hex();
}

void MultiStyleModel::check_trunk(const NerfModel& stage2) const {
  Sha256 h;
  h.update(stage2.coarse.trunk_digest(config_.arch.trunk_split));
  h.update(stage2.fine.trunk_digest(config_.arch.trunk_split));
  if (h.hex() != trunk_digest()) throw DigestMismatchError("multistyle: stage-2 trunk digest does not match");
}

ModelCheckpoint MultiStyleModel::checkpoint() {
  ModelCheckpoint m;
  m.stage = Stage::kMultistyle;
  m.config = {{"multistyle", config_}, {"nerf", stage2_config_}};
  m.digests["trunk"] = trunk_digest();
  m.digests["registry"] = registry_.digest();
  nlohmann::json poses_json = nlohmann::json::array();
  for (std::size_t i = 0; i < poses.size(); ++i) {
    const Mat4 mat = poses[i].matrix();
    std::vector<double> flat(mat.data(), mat.data() + 16);
    poses_json.push_back({{"id", frame_ids[i]},
                          {"matrix", flat},
                          {"focal", poses[i].focal},
                          {"height", poses[i].height},
                          {"width", poses[i].width}});
  }
  m.metadata = {{"near", near_},       {"far", far_},
                {"background", background_}, {"steps_done", steps_done},
                {"poses", poses_json},  {"registry", registry_.to_json().dump()}};
  ParameterList stage2;
  stage2_coarse_->append_parameters(stage2, "stage2.coarse");
  stage2_fine_->append_parameters(stage2, "stage2.fine");
  m.tensors = export_tensors(stage2);
  const auto heads = export_tensors(head_parameters());
  m.tensors.insert(m.tensors.end(), heads.begin(), heads.end());
  return m;
}

MultiStyleModel MultiStyleModel::from_checkpoint(const ModelCheckpoint& ckpt) {
  if (ckpt.stage != Stage::kMultistyle) {
    throw StageTagError("expected a multistyle checkpoint, got stage '" + stage_name(ckpt.stage) + "'");
  }
  try {
    const auto stage2_cfg = ckpt.config.at("nerf").get<NerfTrainConfig>();
    const auto cfg = ckpt.config.at("multistyle").get<MultistyleTrainConfig>();
    NerfModel stage2(stage2_cfg, ckpt.metadata.at("near").get<double>(), ckpt.metadata.at("far").get<double>(),
                     ckpt.metadata.at("background").get<std::array<float, 3>>());
    ParameterList p2;
    stage2.coarse.append_parameters(p2, "stage2.coarse");
    stage2.fine.append_parameters(p2, "stage2.fine");
    import_tensors(p2, ckpt.tensors);
    // Stored as text: the metadata object does not keep key order, the registry does.
    StyleRegistry registry =
        StyleRegistry::from_json(nlohmann::ordered_json::parse(ckpt.metadata.at("registry").get<std::string>()));
    expect_digest(ckpt, "registry", registry.digest());
    MultiStyleModel model(stage2, cfg, std::move(registry));
    ParameterList heads = model.head_parameters();
    import_tensors(heads, ckpt.tensors);
    expect_digest(ckpt, "trunk", model.trunk_digest());
    model.steps_done = ckpt.metadata.value("steps_done", 0);
    for (const auto& p : ckpt.metadata.at("poses")) {
      const auto flat = p.at("matrix").get<std::vector<double>>();
      require(flat.size() == 16, "multistyle checkpoint: pose matrix must have 16 entries");
      Mat4 mat = Eigen::Map<const Mat4>(flat.data());
      model.frame_ids.push_back(p.at("id").get<std::string>());
      model.poses.push_back(
          CameraPose::from_matrix(mat, p.at("focal").get<double>(), p.at("height").get<int>(), p.at("width").get<int>()));
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw CorruptArchiveError(std::string("multistyle checkpoint: malformed header: ") + e.what());
  }
}

// ---------------------------------------------------------------- training

MultistyleTrainer::MultistyleTrainer(const StylizedDataset& data, const NerfModel& stage2,
                                     const MultistyleTrainConfig& config)
    : config_(config), model_(stage2, config, data.registry), optimizer_(AdamConfig{config.learning_rate}) {
  data.validate();
  require(data.scene.size() > 0 && data.registry.size() > 0, "train_multistyle: dataset is empty");
  table_ = data.registry.table();
  model_.frame_ids = data.scene.frame_ids;
  model_.poses = data.scene.poses;
  std::vector<Ray> rays;
  for (const CameraPose& pose : data.scene.poses) {
    const auto r = generate_rays(pose, stage2.near, stage2.far);
    rays.insert(rays.end(), r.begin(), r.end());
  }
  frame_rays_ = RayBatch::from_rays(rays);
  const std::size_t pixels = static_cast<std::size_t>(data.scene.width()) * data.scene.height();
  for (const auto& row : data.images) {
    Matrix t(3, static_cast<Eigen::Index>(rays.size()));
    for (std::size_t n = 0; n < row.size(); ++n)
      for (std::size_t p = 0; p < pixels; ++p)
        for (int c = 0; c < 3; ++c) t(c, static_cast<Eigen::Index>(n * pixels + p)) = row[n].rgb[3 * p + c];
    targets_.push_back(std::move(t));
  }
  ParameterList params = model_.head_parameters();
  zero_grad(params);
}

MultistyleStepLog MultistyleTrainer::step() {
  const int step = model_.steps_done;
  Rng rng(config_.seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(step) * 0xD1B54A32D192ED03ULL + 13);
  const int styles = static_cast<int>(targets_.size());
  RayBatch batch;
  batch.near = frame_rays_.near;
  batch.far = frame_rays_.far;
  batch.table = &table_;
  batch.origins.resize(3, config_.batch_rays);
  batch.directions.resize(3, config_.batch_rays);
  batch.conditions.resize(config_.batch_rays);
  Matrix target(3, config_.batch_rays);
  for (int i = 0; i < config_.batch_rays; ++i) {
    const int m = static_cast<int>(rng.below(styles));
    const int idx = static_cast<int>(rng.below(frame_rays_.size()));
    batch.origins.col(i) = frame_rays_.origins.col(idx);
    batch.directions.col(i) = frame_rays_.directions.col(idx);
    batch.conditions[i] = m;
    target.col(i) = targets_[m].col(idx);
  }
  const double lr = config_.learning_rate *
                    std::pow(config_.lr_decay_rate, static_cast<double>(step) / config_.lr_decay_steps);
  optimizer_.set_learning_rate(static_cast<float>(lr));
  ParameterList params = model_.head_parameters();
  zero_grad(params);
  const TrainRaysResult res =
      train_rays(model_.coarse(), &model_.fine(), batch, target, model_.render_options(true), &rng);
  optimizer_.step(params);
  ++model_.steps_done;

  MultistyleStepLog log;
  log.step = step;
  log.loss = res.loss;
  log.psnr = psnr_from_mse(res.mse_fine > 0.0 ? res.mse_fine : res.mse_coarse);
  std::vector<double> sum(styles, 0.0);
  std::vector<int> count(styles, 0);
  for (int i = 0; i < config_.batch_rays; ++i) {
    sum[batch.conditions[i]] += res.ray_error[i];
    ++count[batch.conditions[i]];
  }
  for (int m = 0; m < styles; ++m)
    if (count[m] > 0) log.style_loss[model_.registry().entries()[m].id] = sum[m] / count[m];
  return log;
}

ModelCheckpoint MultistyleTrainer::checkpoint() {
  ModelCheckpoint m = model_.checkpoint();
  const auto adam = optimizer_.export_state(model_.head_parameters());
  m.tensors.insert(m.tensors.end(), adam.begin(), adam.end());
  return m;
}

void MultistyleTrainer::resume(const ModelCheckpoint& ckpt) {
  if (ckpt.stage != Stage::kMultistyle) {
    throw StageTagError("expected a multistyle checkpoint, got stage '" + stage_name(ckpt.stage) + "'");
  }
  expect_digest(ckpt, "trunk", model_.trunk_digest());
  expect_digest(ckpt, "registry", model_.registry().digest());
  ParameterList params = model_.head_parameters();
  import_tensors(params, ckpt.tensors);
  optimizer_.import_state(params, ckpt.with_prefix("adam."));
  model_.steps_done = ckpt.metadata.value("steps_done", 0);
}

ModelCheckpoint train_multistyle(const StylizedDataset& data, const NerfModel& stage2,
                                 const MultistyleTrainConfig& config,
                                 const std::function<void(const MultistyleStepLog&)>& log) {
  MultistyleTrainer trainer(data, stage2, config);
  while (trainer.steps_done() < config.steps) {
    const MultistyleStepLog entry = trainer.step();
    if (log) log(entry);
  }
  return trainer.checkpoint();
}

Image render_view(const CameraPose& pose, const StyleStatistics& style, const MultiStyleModel& model, int resolution,
                  Rng* rng, std::vector<float>* opacity) {
  if (model.steps_done <= 0) throw StateError("render_view: the multistyle model has not been trained");
  require(resolution >= 1 && resolution <= 4096, "render_view: resolution must lie in [1, 4096]");
  pose.validate();
  const auto flat = style.flatten();
  require(static_cast<int>(flat.size()) == model.registry().entries().front().statistics.flattened_dim(),
          "render_view: style statistics have the wrong dimension");
  const Matrix table = Eigen::Map<const Matrix>(flat.data(), static_cast<Eigen::Index>(flat.size()), 1);
  const CameraPose p = pose.resized(resolution, resolution);
  return render_image(model.coarse(), &model.fine(), p, model.near(), model.far(), model.render_options(false), rng,
                      opacity, &table, 0);
}

}  // namespace stylenerf
