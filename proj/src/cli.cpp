// Copyright 2026 The stylenerf Authors
// SPDX-License-Identifier: Apache-2.0

#include "stylenerf/cli.hpp"

#include <CLI11.hpp>
#include <pthread.h>

#include <algorithm>
#include <cmath>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <optional>
#include <thread>

#include "stylenerf/adain.hpp"
#include "stylenerf/checkpoint.hpp"
#include "stylenerf/config.hpp"
#include "stylenerf/dataset.hpp"
#include "stylenerf/error.hpp"
#include "stylenerf/multistyle.hpp"
#include "stylenerf/nerf.hpp"
#include "stylenerf/run_dir.hpp"
#include "stylenerf/service.hpp"
#include "stylenerf/synthetic.hpp"

namespace stylenerf {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

// One JSON object per line on stdout, mirrored into the run's log file.
class Progress {
 public:
  Progress(std::ostream& out, const std::optional<fs::path>& log_path) : out_(out) {
    if (log_path) {
      fs::create_directories(log_path->parent_path());
      log_.open(*log_path, std::ios::out | std::ios::trunc);
    }
  }
  void emit(const json& j) {
    const std::string line = j.dump();
    out_ << line << '\n' << std::flush;
    if (log_) log_ << line << '\n' << std::flush;
  }

 private:
  std::ostream& out_;
  std::ofstream log_;
};

json read_json_file(const fs::path& path) {
  if (!fs::is_regular_file(path)) throw ValidationError("file not found: " + path.string());
  const auto bytes = read_file(path);
  try {
    return json::parse(bytes.begin(), bytes.end());
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

// Defaults, then the run's saved config, then --config, then flags.
RunConfig assemble_config(const RunDir& dir, const std::optional<std::string>& file, const json& overrides) {
  json merged = RunConfig{};
  if (fs::is_regular_file(dir.config())) merged = merge_config(merged, read_json_file(dir.config()));
  if (file) merged = merge_config(merged, read_json_file(*file));
  merged = merge_config(merged, overrides);
  RunConfig config = merged.get<RunConfig>();
  config.validate();
  return config;
}

RunConfig saved_config(const RunDir& dir) {
  return fs::is_regular_file(dir.config()) ? load_run_config(dir.config()) : RunConfig{};
}

template <class T>
void set_override(json& j, std::initializer_list<const char*> path, const std::optional<T>& value) {
  if (!value) return;
  json* node = &j;
  for (const char* key : path) node = &(*node)[key];
  *node = *value;
}

bool is_image_file(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

// Files as given; directories expand to their image files in name order.
std::vector<fs::path> expand_images(const std::vector<std::string>& paths) {
  std::vector<fs::path> out;
  for (const std::string& s : paths) {
    const fs::path p(s);
    if (fs::is_directory(p)) {
      std::vector<fs::path> files;
      for (const auto& entry : fs::directory_iterator(p))
        if (entry.is_regular_file() && is_image_file(entry.path())) files.push_back(entry.path());
      std::sort(files.begin(), files.end());
      out.insert(out.end(), files.begin(), files.end());
    } else if (fs::is_regular_file(p)) {
      out.push_back(p);
    } else {
      throw ValidationError("image path not found: " + s);
    }
  }
  return out;
}

SceneDataset load_run_scene(const RunConfig& config) {
  require(!config.scene.empty(), "no scene: pass --scene or set \"scene\" in the config");
  return load_scene(config.scene, config.scene_options());
}

fs::path require_checkpoint(const RunDir& dir, const std::string& stage, const std::string& producer) {
  const fs::path p = dir.checkpoint(stage);
  if (!fs::is_regular_file(p)) {
    throw StateError("run '" + dir.id() + "' has no " + stage + " checkpoint; run " + producer + " first");
  }
  return p;
}

void write_png(const Image& image, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  save_png(image, path);
}

std::string frame_name(const char* prefix, int index) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s_%04d.png", prefix, index);
  return buf;
}

// ---------------------------------------------------------------- options

struct CommonOptions {
  std::string run = "default";
  std::optional<std::string> config;
  std::optional<std::uint64_t> seed;
};

void add_run_option(CLI::App* app, CommonOptions& o) {
  app->add_option("--run", o.run, "Run id; the run lives in $STYLENERF_RUN_ROOT/<id> (default root ./runs)")
      ->capture_default_str();
}

void add_config_options(CLI::App* app, CommonOptions& o) {
  add_run_option(app, o);
  app->add_option("--config", o.config, "JSON run config merged over the run's saved config");
  app->add_option("--seed", o.seed, "Seed for this stage");
}

struct AdainOptions {
  std::vector<std::string> content;
  std::vector<std::string> styles;
  std::optional<std::string> scene;
  std::optional<int> steps, batch_size, crop_size, resize_shorter;
  std::optional<float> lr;
  std::optional<double> lambda;
  bool resume = false;
};

struct StylizeOptions2 {
  std::string content, style, out;
  double alpha = 1.0;
};

struct NerfOptions {
  std::optional<std::string> scene;
  std::optional<double> near, far;
  std::optional<int> steps, batch_rays, n_coarse, n_fine, depth, width, precrop_steps, log_every, lr_decay_steps;
  std::optional<float> lr;
  int checkpoint_every = 0;
  bool resume = false;
};

struct BuildOptions {
  std::vector<std::string> styles;
  std::optional<std::string> scene;
  bool no_content_style = false;
};

struct MultiOptions {
  std::optional<int> steps, batch_rays, trunk_split, log_every, lr_decay_steps;
  std::optional<float> lr;
  bool density_aware = false, no_density_aware = false;
  int checkpoint_every = 0;
  bool resume = false;
};

struct RenderOptions2 {
  std::optional<int> pose_index;
  bool orbit = false;
  std::optional<int> frames;
  std::optional<double> elevation, radius;
  std::string style;
  std::optional<std::string> style_b;
  std::optional<double> lambda, intensity;
  std::optional<int> resolution;
  std::optional<std::string> out;
  std::uint64_t seed = 0;
};

struct InterpOptions {
  std::string style_a, style_b;
  int steps = 11;
  int pose_index = 0;
  std::optional<int> resolution;
  std::optional<std::string> out;
  std::uint64_t seed = 0;
};

struct ServeOptions {
  std::string host = "127.0.0.1";
  int port = 8080;
  int max_in_flight = 2;
};

struct SynthOptions {
  std::string out;
  int train_views = 20, val_views = 5, size = 64, count = 3;
  std::uint64_t seed = 0;
};

// ---------------------------------------------------------------- commands

int cmd_train_adain(const CommonOptions& c, const AdainOptions& o, std::ostream& out) {
  const RunDir dir(run_root(), c.run);
  json ov = json::object();
  if (!o.content.empty()) ov["content"] = o.content;
  if (!o.styles.empty()) ov["styles"] = o.styles;
  set_override(ov, {"scene"}, o.scene);
  set_override(ov, {"adain", "steps"}, o.steps);
  set_override(ov, {"adain", "batch_size"}, o.batch_size);
  set_override(ov, {"adain", "learning_rate"}, o.lr);
  set_override(ov, {"adain", "lambda"}, o.lambda);
  set_override(ov, {"adain", "crop_size"}, o.crop_size);
  set_override(ov, {"adain", "resize_shorter"}, o.resize_shorter);
  set_override(ov, {"adain", "seed"}, c.seed);
  const RunConfig config = assemble_config(dir, c.config, ov);

  std::vector<Image> content;
  if (!config.content.empty()) {
    for (const fs::path& p : expand_images(config.content)) content.push_back(load_image(p));
  } else {
    require(!config.scene.empty(), "no content images: pass --content or --scene");
    const SceneDataset scene = load_run_scene(config).subset("train");
    content = scene.images;
  }
  std::vector<Image> styles;
  for (const fs::path& p : expand_images(config.styles)) styles.push_back(load_image(p));
  require(!content.empty(), "content corpus is empty");
  require(!styles.empty(), "no style images: pass --styles or set \"styles\" in the config");

  RunLock lock(dir);
  save_run_config(config, dir.config());
  Progress progress(out, dir.logs() / "train-adain.jsonl");
  const Encoder encoder = Encoder::standard();
  AdainTrainer trainer(encoder, std::move(content), std::move(styles), config.adain);
  const fs::path ckpt_path = dir.checkpoint("adain");
  if (o.resume && fs::is_regular_file(ckpt_path)) {
    trainer.resume(adain_from_model(load_checkpoint(ckpt_path, Stage::kAdain)));
    progress.emit({{"event", "resume"}, {"stage", "adain"}, {"step", trainer.steps_done()}});
  }
  while (trainer.steps_done() < config.adain.steps) {
    const int step = trainer.steps_done();
    const AdainLoss loss = trainer.step();
    progress.emit({{"event", "step"},
                   {"stage", "adain"},
                   {"step", step},
                   {"loss", loss.total},
                   {"content_loss", loss.content},
                   {"style_loss", loss.style}});
  }
  save_checkpoint(to_model_checkpoint(trainer.checkpoint()), ckpt_path);
  progress.emit({{"event", "done"}, {"stage", "adain"}, {"steps", trainer.steps_done()},
                 {"checkpoint", ckpt_path.string()}});
  return kExitOk;
}

int cmd_stylize(const CommonOptions& c, const StylizeOptions2& o, std::ostream& out) {
  const RunDir dir(run_root(), c.run);
  require(o.alpha >= 0.0 && o.alpha <= 1.0, "--alpha must lie in [0, 1]");
  const Image content = encoder_sized(composite_over(load_image(o.content), {1.0f, 1.0f, 1.0f}));
  const Image style = encoder_sized(composite_over(load_image(o.style), {1.0f, 1.0f, 1.0f}));
  const AdainCheckpoint ckpt =
      adain_from_model(load_checkpoint(require_checkpoint(dir, "adain", "train-adain"), Stage::kAdain));
  const Stylizer stylizer(Encoder::standard(), ckpt);
  write_png(stylizer.stylize(content, style, o.alpha), o.out);
  Progress(out, std::nullopt).emit({{"event", "done"}, {"stage", "stylize"}, {"output", o.out}});
  return kExitOk;
}

int cmd_train_nerf(const CommonOptions& c, const NerfOptions& o, std::ostream& out) {
  const RunDir dir(run_root(), c.run);
  json ov = json::object();
  set_override(ov, {"scene"}, o.scene);
  set_override(ov, {"near"}, o.near);
  set_override(ov, {"far"}, o.far);
  set_override(ov, {"nerf", "steps"}, o.steps);
  set_override(ov, {"nerf", "batch_rays"}, o.batch_rays);
  set_override(ov, {"nerf", "n_coarse"}, o.n_coarse);
  set_override(ov, {"nerf", "n_fine"}, o.n_fine);
  set_override(ov, {"nerf", "arch", "depth"}, o.depth);
  set_override(ov, {"nerf", "arch", "width"}, o.width);
  set_override(ov, {"nerf", "precrop_steps"}, o.precrop_steps);
  set_override(ov, {"nerf", "log_every"}, o.log_every);
  set_override(ov, {"nerf", "learning_rate"}, o.lr);
  set_override(ov, {"nerf", "lr_decay_steps"}, o.lr_decay_steps);
  set_override(ov, {"nerf", "seed"}, c.seed);
  const RunConfig config = assemble_config(dir, c.config, ov);
  require(o.checkpoint_every >= 0, "--checkpoint-every must be >= 0");
  const SceneDataset scene = load_run_scene(config);

  RunLock lock(dir);
  save_run_config(config, dir.config());
  Progress progress(out, dir.logs() / "train-nerf.jsonl");
  NerfTrainer trainer(scene, config.nerf);
  const fs::path ckpt_path = dir.checkpoint("nerf");
  if (o.resume && fs::is_regular_file(ckpt_path)) {
    trainer.resume(load_checkpoint(ckpt_path, Stage::kNerf));
    progress.emit({{"event", "resume"}, {"stage", "nerf"}, {"step", trainer.steps_done()}});
  }
  while (trainer.steps_done() < config.nerf.steps) {
    const NerfStepLog log = trainer.step();
    const bool last = trainer.steps_done() == config.nerf.steps;
    if (log.step % config.nerf.log_every == 0 || last) {
      progress.emit({{"event", "step"}, {"stage", "nerf"}, {"step", log.step}, {"loss", log.loss},
                     {"psnr", log.psnr}, {"lr", log.learning_rate}});
    }
    if (o.checkpoint_every > 0 && trainer.steps_done() % o.checkpoint_every == 0 && !last) {
      save_checkpoint(trainer.checkpoint(), ckpt_path);
    }
  }
  ModelCheckpoint ckpt = trainer.checkpoint();
  save_checkpoint(ckpt, ckpt_path);
  const SceneDataset val = scene.subset("val");
  if (val.size() > 0) {
    progress.emit({{"event", "eval"}, {"stage", "nerf"}, {"split", "val"}, {"views", val.size()},
                   {"psnr", evaluate_psnr(trainer.model(), val)}});
  }
  progress.emit({{"event", "done"}, {"stage", "nerf"}, {"steps", trainer.steps_done()},
                 {"checkpoint", ckpt_path.string()}});
  return kExitOk;
}

int cmd_build_stylized(const CommonOptions& c, const BuildOptions& o, std::ostream& out) {
  const RunDir dir(run_root(), c.run);
  json ov = json::object();
  if (!o.styles.empty()) ov["styles"] = o.styles;
  set_override(ov, {"scene"}, o.scene);
  if (o.no_content_style) ov["content_as_style"] = false;
  const RunConfig config = assemble_config(dir, c.config, ov);
  const SceneDataset scene = load_run_scene(config);
  std::vector<StyleSource> sources;
  for (const fs::path& p : expand_images(config.styles)) sources.push_back({p.stem().string(), p.string(), {}});
  require(!sources.empty() || config.content_as_style, "no style images: pass --styles or set \"styles\" in the config");
  const AdainCheckpoint adain =
      adain_from_model(load_checkpoint(require_checkpoint(dir, "adain", "train-adain"), Stage::kAdain));
  const Stylizer stylizer(Encoder::standard(), adain);

  RunLock lock(dir);
  save_run_config(config, dir.config());
  Progress progress(out, dir.logs() / "build-stylized.jsonl");
  fs::remove_all(dir.stylized());
  StylizeOptions options;
  options.include_content_as_style = config.content_as_style;
  const StylizedDataset data = build_stylized_dataset(scene, sources, stylizer, options, dir.path());
  for (const StyleEntry& e : data.registry.entries()) {
    progress.emit({{"event", "style"}, {"style_id", e.id}, {"name", e.name}, {"kind", e.kind},
                   {"frames", data.scene.size()}});
  }
  progress.emit({{"event", "done"}, {"stage", "build-stylized"}, {"styles", data.registry.size()},
                 {"registry", dir.registry().string()}});
  return kExitOk;
}

int cmd_train_multistyle(const CommonOptions& c, const MultiOptions& o, std::ostream& out) {
  const RunDir dir(run_root(), c.run);
  require(!(o.density_aware && o.no_density_aware), "--density-aware and --no-density-aware are exclusive");
  json ov = json::object();
  set_override(ov, {"multistyle", "steps"}, o.steps);
  set_override(ov, {"multistyle", "batch_rays"}, o.batch_rays);
  set_override(ov, {"multistyle", "arch", "trunk_split"}, o.trunk_split);
  set_override(ov, {"multistyle", "log_every"}, o.log_every);
  set_override(ov, {"multistyle", "learning_rate"}, o.lr);
  set_override(ov, {"multistyle", "lr_decay_steps"}, o.lr_decay_steps);
  set_override(ov, {"multistyle", "seed"}, c.seed);
  if (o.density_aware) ov["multistyle"]["arch"]["density_aware"] = true;
  if (o.no_density_aware) ov["multistyle"]["arch"]["density_aware"] = false;
  require(o.checkpoint_every >= 0, "--checkpoint-every must be >= 0");
  const RunConfig config = assemble_config(dir, c.config, ov);
  const SceneDataset scene = load_run_scene(config);
  const NerfModel stage2 =
      nerf_from_model(load_checkpoint(require_checkpoint(dir, "nerf", "train-nerf"), Stage::kNerf));
  config.multistyle.arch.validate(stage2.config.arch);
  if (!fs::is_regular_file(dir.registry())) {
    throw StateError("run '" + dir.id() + "' has no stylized dataset; run build-stylized first");
  }
  const StylizedDataset data = load_stylized_dataset(scene, dir.path());

  RunLock lock(dir);
  save_run_config(config, dir.config());
  Progress progress(out, dir.logs() / "train-multistyle.jsonl");
  MultistyleTrainer trainer(data, stage2, config.multistyle);
  const fs::path ckpt_path = dir.checkpoint("multistyle");
  if (o.resume && fs::is_regular_file(ckpt_path)) {
    trainer.resume(load_checkpoint(ckpt_path, Stage::kMultistyle));
    progress.emit({{"event", "resume"}, {"stage", "multistyle"}, {"step", trainer.steps_done()}});
  }
  const int steps = config.multistyle.steps;
  while (trainer.steps_done() < steps) {
    const MultistyleStepLog log = trainer.step();
    const bool last = trainer.steps_done() == steps;
    if (log.step % config.multistyle.log_every == 0 || last) {
      progress.emit({{"event", "step"}, {"stage", "multistyle"}, {"step", log.step}, {"loss", log.loss},
                     {"psnr", log.psnr}, {"style_loss", log.style_loss}});
    }
    if (o.checkpoint_every > 0 && trainer.steps_done() % o.checkpoint_every == 0 && !last) {
      save_checkpoint(trainer.checkpoint(), ckpt_path);
    }
  }
  save_checkpoint(trainer.checkpoint(), ckpt_path);
  progress.emit({{"event", "done"}, {"stage", "multistyle"}, {"steps", trainer.steps_done()},
                 {"trunk_digest", trainer.model().trunk_digest()}, {"checkpoint", ckpt_path.string()}});
  return kExitOk;
}

MultiStyleModel load_multistyle(const RunDir& dir) {
  return MultiStyleModel::from_checkpoint(
      load_checkpoint(require_checkpoint(dir, "multistyle", "train-multistyle"), Stage::kMultistyle));
}

int render_resolution(const RunDir& dir, const std::optional<int>& flag) {
  const int r = flag ? *flag : saved_config(dir).render.resolution;
  require(r >= 8 && r <= 4096, "--resolution must lie in [8, 4096]");
  return r;
}

int cmd_render(const CommonOptions& c, const RenderOptions2& o, std::ostream& out) {
  const RunDir dir(run_root(), c.run);
  require(o.pose_index.has_value() != o.orbit, "exactly one of --pose-index and --orbit is required");
  require(!(o.style_b && o.intensity), "--style-b and --intensity are exclusive");
  require(o.style_b.has_value() == o.lambda.has_value(), "--style-b and --lambda must be given together");
  require(o.orbit || (!o.frames && !o.elevation && !o.radius), "--frames, --elevation and --radius need --orbit");
  StyleSpec spec = StyleSingle{o.style};
  if (o.style_b) {
    require(*o.lambda >= 0.0 && *o.lambda <= 1.0, "--lambda must lie in [0, 1]");
    spec = StyleBlend{o.style, *o.style_b, *o.lambda};
  } else if (o.intensity) {
    require(*o.intensity >= 0.0 && *o.intensity <= 1.0, "--intensity must lie in [0, 1]");
    spec = StyleIntensity{o.style, *o.intensity};
  }
  const int resolution = render_resolution(dir, o.resolution);
  const int frames = o.frames ? *o.frames : saved_config(dir).render.orbit_frames;
  require(frames >= 1 && frames <= 10000, "--frames must lie in [1, 10000]");
  if (o.elevation) require(std::abs(*o.elevation) < 90.0, "--elevation must lie in (-90, 90)");
  if (o.radius) require(*o.radius > 0.0, "--radius must be positive");

  const MultiStyleModel model = load_multistyle(dir);
  const StyleStatistics style = resolve_style(spec, model.registry());
  const fs::path out_dir = o.out ? fs::path(*o.out) : dir.path() / "renders";
  Progress progress(out, std::nullopt);

  std::vector<std::pair<CameraPose, fs::path>> jobs;
  if (o.pose_index) {
    jobs.emplace_back(resolve_pose(PoseIndex{*o.pose_index}, model), out_dir / frame_name("pose", *o.pose_index));
  } else {
    double radius = 0.0, elevation = 0.0;
    for (const CameraPose& p : model.poses) {
      const double r = p.translation.norm();
      radius += r / model.poses.size();
      elevation += std::asin(std::clamp(p.translation.z() / r, -1.0, 1.0)) * 180.0 / std::numbers::pi /
                   model.poses.size();
    }
    if (o.radius) radius = *o.radius;
    if (o.elevation) elevation = *o.elevation;
    for (int i = 0; i < frames; ++i) {
      const double azimuth = 360.0 * i / frames;
      jobs.emplace_back(resolve_pose(PoseOrbit{azimuth, elevation, radius}, model), out_dir / frame_name("orbit", i));
    }
  }
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    Rng rng(o.seed);
    write_png(render_view(jobs[i].first, style, model, resolution, &rng), jobs[i].second);
    progress.emit({{"event", "frame"}, {"index", i}, {"resolution", resolution}, {"path", jobs[i].second.string()}});
  }
  progress.emit({{"event", "done"}, {"stage", "render"}, {"frames", jobs.size()}});
  return kExitOk;
}

int cmd_interpolate(const CommonOptions& c, const InterpOptions& o, std::ostream& out) {
  const RunDir dir(run_root(), c.run);
  require(o.steps >= 2 && o.steps <= 1001, "--steps must lie in [2, 1001]");
  const int resolution = render_resolution(dir, o.resolution);
  const MultiStyleModel model = load_multistyle(dir);
  const CameraPose pose = resolve_pose(PoseIndex{o.pose_index}, model);
  const fs::path out_dir = o.out ? fs::path(*o.out) : dir.path() / "interpolate";
  Progress progress(out, std::nullopt);
  for (int i = 0; i < o.steps; ++i) {
    const double lambda = static_cast<double>(i) / (o.steps - 1);
    const StyleStatistics style = resolve_style(StyleBlend{o.style_a, o.style_b, lambda}, model.registry());
    char name[64];
    std::snprintf(name, sizeof(name), "lambda_%.3f.png", lambda);
    Rng rng(o.seed);
    write_png(render_view(pose, style, model, resolution, &rng), out_dir / name);
    progress.emit({{"event", "frame"}, {"index", i}, {"lambda", lambda}, {"path", (out_dir / name).string()}});
  }
  progress.emit({{"event", "done"}, {"stage", "interpolate"}, {"frames", o.steps}});
  return kExitOk;
}

int cmd_serve(const CommonOptions& c, const ServeOptions& o, std::ostream& out) {
  const RunDir dir(run_root(), c.run);
  require(o.port >= 0 && o.port <= 65535, "--port must lie in [0, 65535]");
  require(o.max_in_flight >= 1, "--max-in-flight must be >= 1");
  ServiceOptions options;
  options.max_in_flight = o.max_in_flight;
  auto service = RenderService::open(dir.path(), options);

  // SIGINT / SIGTERM stop the server from a dedicated thread.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);
  std::thread watcher([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    service->stop();
  });

  const int port = o.port == 0 ? service->bind_any_port(o.host) : o.port;
  Progress progress(out, std::nullopt);
  if (o.port == 0) {
    progress.emit({{"event", "listening"}, {"host", o.host}, {"port", port}});
    service->listen_after_bind();
  } else {
    progress.emit({{"event", "listening"}, {"host", o.host}, {"port", port}});
    try {
      service->listen(o.host, port);
    } catch (...) {
      pthread_kill(watcher.native_handle(), SIGTERM);
      watcher.join();
      throw;
    }
  }
  pthread_kill(watcher.native_handle(), SIGTERM);
  watcher.join();
  progress.emit({{"event", "stopped"}});
  return kExitOk;
}

int cmd_synth_scene(const SynthOptions& o, std::ostream& out) {
  CubeSceneConfig config;
  config.train_views = o.train_views;
  config.val_views = o.val_views;
  config.size = o.size;
  config.seed = o.seed;
  require(o.train_views >= 1 && o.val_views >= 0, "--train-views must be >= 1 and --val-views >= 0");
  require(o.size >= 8 && o.size <= 1024, "--size must lie in [8, 1024]");
  save_scene(make_cube_scene(config), o.out);
  Progress(out, std::nullopt).emit({{"event", "done"}, {"stage", "synth-scene"}, {"output", o.out},
                                    {"frames", o.train_views + o.val_views}});
  return kExitOk;
}

int cmd_synth_images(const SynthOptions& o, bool styles, std::ostream& out) {
  require(o.count >= 1 && o.count <= 100, "--count must lie in [1, 100]");
  require(o.size >= 32 && o.size <= 2048, "--size must lie in [32, 2048]");
  const auto images = styles ? make_style_images(o.count, o.size, o.seed) : make_content_images(o.count, o.size, o.seed);
  Progress progress(out, std::nullopt);
  for (std::size_t i = 0; i < images.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "%s_%02zu.png", styles ? "style" : "content", i);
    write_png(images[i], fs::path(o.out) / name);
    progress.emit({{"event", "image"}, {"path", (fs::path(o.out) / name).string()}});
  }
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-style neural radiance fields: AdaIN stylization, NeRF training, style-conditioned rendering."};
  app.name("stylenerf");
  app.require_subcommand(1);
  app.footer("Run directories live under $STYLENERF_RUN_ROOT (default ./runs). Exit codes: 0 ok, 1 invalid input, "
             "2 runtime failure.");

  CommonOptions common;
  AdainOptions adain;
  StylizeOptions2 stylize;
  NerfOptions nerf;
  BuildOptions build;
  MultiOptions multi;
  RenderOptions2 render;
  InterpOptions interp;
  ServeOptions serve;
  SynthOptions synth;

  auto* s_adain = app.add_subcommand("train-adain", "Train the AdaIN decoder on content and style images");
  add_config_options(s_adain, common);
  s_adain->add_option("--content", adain.content, "Content images or directories (default: scene training frames)");
  s_adain->add_option("--styles", adain.styles, "Style images or directories");
  s_adain->add_option("--scene", adain.scene, "Scene directory");
  s_adain->add_option("--steps", adain.steps, "Optimizer steps");
  s_adain->add_option("--batch-size", adain.batch_size, "Pairs per step");
  s_adain->add_option("--lr", adain.lr, "Adam learning rate");
  s_adain->add_option("--lambda", adain.lambda, "Style loss weight");
  s_adain->add_option("--crop-size", adain.crop_size, "Square training crop (multiple of 8, >= 32)");
  s_adain->add_option("--resize-shorter", adain.resize_shorter, "Shorter side before cropping");
  s_adain->add_flag("--resume", adain.resume, "Continue from the run's adain checkpoint");

  auto* s_stylize = app.add_subcommand("stylize", "Stylize one image with the run's AdaIN decoder");
  add_run_option(s_stylize, common);
  s_stylize->add_option("--content", stylize.content, "Content image")->required();
  s_stylize->add_option("--style", stylize.style, "Style image")->required();
  s_stylize->add_option("--alpha", stylize.alpha, "Content/style trade-off in [0, 1]")->capture_default_str();
  s_stylize->add_option("--out", stylize.out, "Output PNG")->required();

  auto* s_nerf = app.add_subcommand("train-nerf", "Train the coarse and fine radiance fields on a scene");
  add_config_options(s_nerf, common);
  s_nerf->add_option("--scene", nerf.scene, "Scene directory (images/ + transforms.json)");
  s_nerf->add_option("--near", nerf.near, "Near bound along each ray");
  s_nerf->add_option("--far", nerf.far, "Far bound along each ray");
  s_nerf->add_option("--steps", nerf.steps, "Optimizer steps");
  s_nerf->add_option("--batch-rays", nerf.batch_rays, "Rays per step");
  s_nerf->add_option("--lr", nerf.lr, "Initial Adam learning rate");
  s_nerf->add_option("--lr-decay-steps", nerf.lr_decay_steps, "Steps per 10x learning-rate decay");
  s_nerf->add_option("--n-coarse", nerf.n_coarse, "Stratified samples per ray");
  s_nerf->add_option("--n-fine", nerf.n_fine, "Importance samples per ray");
  s_nerf->add_option("--depth", nerf.depth, "Trunk layers");
  s_nerf->add_option("--width", nerf.width, "Trunk width");
  s_nerf->add_option("--precrop-steps", nerf.precrop_steps, "Steps that sample only the central crop");
  s_nerf->add_option("--log-every", nerf.log_every, "Progress line interval");
  s_nerf->add_option("--checkpoint-every", nerf.checkpoint_every, "Intermediate checkpoint interval (0 = end only)");
  s_nerf->add_flag("--resume", nerf.resume, "Continue from the run's nerf checkpoint");

  auto* s_build = app.add_subcommand("build-stylized", "Stylize every training frame with every style");
  add_config_options(s_build, common);
  s_build->add_option("--styles", build.styles, "Style images or directories");
  s_build->add_option("--scene", build.scene, "Scene directory");
  s_build->add_flag("--no-content-style", build.no_content_style, "Do not register the original scene as a style");

  auto* s_multi = app.add_subcommand("train-multistyle", "Train the style-conditioned heads on the frozen trunk");
  add_config_options(s_multi, common);
  s_multi->add_option("--steps", multi.steps, "Optimizer steps");
  s_multi->add_option("--batch-rays", multi.batch_rays, "Rays per step");
  s_multi->add_option("--lr", multi.lr, "Initial Adam learning rate");
  s_multi->add_option("--lr-decay-steps", multi.lr_decay_steps, "Steps per 10x learning-rate decay");
  s_multi->add_option("--trunk-split", multi.trunk_split, "Frozen trunk layers reused from stage 2");
  s_multi->add_flag("--density-aware", multi.density_aware, "Feed style statistics to the density head");
  s_multi->add_flag("--no-density-aware", multi.no_density_aware, "Style-independent density (default)");
  s_multi->add_option("--log-every", multi.log_every, "Progress line interval");
  s_multi->add_option("--checkpoint-every", multi.checkpoint_every, "Intermediate checkpoint interval (0 = end only)");
  s_multi->add_flag("--resume", multi.resume, "Continue from the run's multistyle checkpoint");

  auto* s_render = app.add_subcommand("render", "Render a training pose or an orbit sweep to PNG frames");
  add_run_option(s_render, common);
  s_render->add_option("--pose-index", render.pose_index, "Training pose to render");
  s_render->add_flag("--orbit", render.orbit, "Render a circular sweep instead");
  s_render->add_option("--frames", render.frames, "Orbit frames (default from config, 60)");
  s_render->add_option("--elevation", render.elevation, "Orbit elevation in degrees (default: training mean)");
  s_render->add_option("--radius", render.radius, "Orbit radius (default: training mean)");
  s_render->add_option("--style", render.style, "Style id")->required();
  s_render->add_option("--style-b", render.style_b, "Second style id for blending");
  s_render->add_option("--lambda", render.lambda, "Blend weight toward --style-b in [0, 1]");
  s_render->add_option("--intensity", render.intensity, "Style intensity in [0, 1] relative to the content style");
  s_render->add_option("--resolution", render.resolution, "Square output size (default from config, 64)");
  s_render->add_option("--out", render.out, "Output directory (default <run>/renders)");
  s_render->add_option("--seed", render.seed, "Render seed")->capture_default_str();

  auto* s_interp = app.add_subcommand("interpolate", "Render a style-interpolation sweep at one pose");
  add_run_option(s_interp, common);
  s_interp->add_option("--style-a", interp.style_a, "Style at lambda = 0")->required();
  s_interp->add_option("--style-b", interp.style_b, "Style at lambda = 1")->required();
  s_interp->add_option("--steps", interp.steps, "Number of frames, lambda evenly spaced in [0, 1]")
      ->capture_default_str();
  s_interp->add_option("--pose-index", interp.pose_index, "Training pose")->capture_default_str();
  s_interp->add_option("--resolution", interp.resolution, "Square output size (default from config, 64)");
  s_interp->add_option("--out", interp.out, "Output directory (default <run>/interpolate)");
  s_interp->add_option("--seed", interp.seed, "Render seed")->capture_default_str();

  auto* s_serve = app.add_subcommand("serve", "Serve renders of the run's multistyle checkpoint over HTTP");
  add_run_option(s_serve, common);
  s_serve->add_option("--host", serve.host, "Bind address")->capture_default_str();
  s_serve->add_option("--port", serve.port, "Port (0 = any free port)")->capture_default_str();
  s_serve->add_option("--max-in-flight", serve.max_in_flight, "Concurrent render budget")->capture_default_str();

  auto* s_scene = app.add_subcommand("synth-scene", "Write the synthetic colored-cube scene");
  s_scene->add_option("--out", synth.out, "Scene directory")->required();
  s_scene->add_option("--train-views", synth.train_views, "Training views")->capture_default_str();
  s_scene->add_option("--val-views", synth.val_views, "Validation views")->capture_default_str();
  s_scene->add_option("--size", synth.size, "Image side in pixels")->capture_default_str();
  s_scene->add_option("--seed", synth.seed, "Camera jitter seed")->capture_default_str();

  auto* s_styles = app.add_subcommand("synth-styles", "Write procedural style images");
  auto* s_content = app.add_subcommand("synth-content", "Write procedural content images");
  for (auto* s : {s_styles, s_content}) {
    s->add_option("--out", synth.out, "Output directory")->required();
    s->add_option("--count", synth.count, "Number of images")->capture_default_str();
    s->add_option("--size", synth.size, "Image side in pixels")->capture_default_str();
    s->add_option("--seed", synth.seed, "Seed")->capture_default_str();
  }

  if (!args.empty() && !args.front().empty() && args.front().front() != '-' &&
      app.get_subcommand_no_throw(args.front()) == nullptr) {
    err << "error: unknown subcommand '" << args.front() << "'\n\n" << app.help();
    return kExitValidation;
  }
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    err << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return kExitValidation;
  }

  try {
    auto* sub = app.get_subcommands().front();
    if (sub == s_adain) return cmd_train_adain(common, adain, out);
    if (sub == s_stylize) return cmd_stylize(common, stylize, out);
    if (sub == s_nerf) return cmd_train_nerf(common, nerf, out);
    if (sub == s_build) return cmd_build_stylized(common, build, out);
    if (sub == s_multi) return cmd_train_multistyle(common, multi, out);
    if (sub == s_render) return cmd_render(common, render, out);
    if (sub == s_interp) return cmd_interpolate(common, interp, out);
    if (sub == s_serve) return cmd_serve(common, serve, out);
    if (sub == s_scene) return cmd_synth_scene(synth, out);
    if (sub == s_styles) return cmd_synth_images(synth, true, out);
    if (sub == s_content) return cmd_synth_images(synth, false, out);
    err << "error: unhandled subcommand\n";
    return kExitRuntime;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_cli(args, out, err);
}

}  // namespace stylenerf
