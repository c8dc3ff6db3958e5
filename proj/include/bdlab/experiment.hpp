#pragma once
// Experiment orchestration: config parsing, named seed substreams, the
// train/sample/eval pipeline with a hashed manifest, poison-rate sweeps,
// and the ANP defense runner. Reruns from an identical config and master
// seed are byte-identical (no timestamps, canonical JSON, pinned streams).

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "defense.hpp"
#include "denoiser.hpp"
#include "diffusion.hpp"
#include "io.hpp"
#include "metrics.hpp"
#include "poison.hpp"
#include "rng.hpp"
#include "sampling.hpp"
#include "schedule.hpp"
#include "tensor.hpp"
#include "training.hpp"

namespace bdlab {

using json = nlohmann::json;

struct TriggerSpec {
  std::string kind = "coordinate";  // coordinate | corner_box | box | stamp | file
  std::int64_t coord = 0;
  double value = 0.8;
  std::int64_t size = 4;
  std::int64_t row = 0, col = 0;
  std::string path;
};

struct TargetSpec {
  std::string kind = "point";  // point | plus | file
  std::vector<double> values = {-0.8, -0.8};
  std::int64_t arm = 2;
  std::string path;
};

struct ModelSpec {
  std::vector<std::int64_t> hidden = {128, 128};
  std::int64_t time_embed_dim = 16;
};

struct PoisonConfig {
  double rate = 0.1;
  bool overlap = false;
  TriggerSpec trigger;
  TargetSpec target;
};

struct ExperimentConfig {
  std::uint64_t master_seed = 1;
  std::string out_dir = "run";
  DatasetSpec dataset;
  std::int64_t heldout_count = 512;
  ScheduleSpec schedule;
  ModelSpec model;
  PoisonConfig poison;
  TrainConfig train;
  SamplerConfig sampler;
  std::int64_t sample_count = 512;
  std::vector<std::string> metrics = {"target_mse", "fd", "mmd"};
  int mmd_permutations = 100;
};

inline Trigger build_trigger(const TriggerSpec& spec, const DatasetSpec& data) {
  if (spec.kind == "coordinate") {
    if (data.mode != TensorMode::Vector)
      throw std::invalid_argument("trigger: coordinate kind needs vector mode");
    return coordinate_trigger(data.dims()[0], spec.coord, spec.value);
  }
  if (spec.kind == "corner_box") return corner_box_trigger(data.height, data.width, spec.size, spec.value);
  if (spec.kind == "box") return box_trigger(data.height, data.width, spec.size, spec.value, spec.row, spec.col);
  if (spec.kind == "stamp") return pattern_stamp_trigger(data.height, data.width, spec.size, spec.value);
  if (spec.kind == "file") {
    const auto tensors = load_tensors(spec.path);
    if (tensors.size() != 2)
      throw std::invalid_argument("trigger: file must hold exactly [pattern, mask]");
    return Trigger(tensors[0], tensors[1]);
  }
  throw std::invalid_argument("trigger: unknown kind " + spec.kind);
}

inline Tensor build_target(const TargetSpec& spec, const DatasetSpec& data) {
  if (spec.kind == "point") {
    if (data.mode != TensorMode::Vector)
      throw std::invalid_argument("target: point kind needs vector mode");
    if (static_cast<std::int64_t>(spec.values.size()) != data.dims()[0])
      throw std::invalid_argument("target: point dimension mismatch");
    return point_target(spec.values);
  }
  if (spec.kind == "plus") return plus_target(data.height, data.width, spec.arm);
  if (spec.kind == "file") {
    const auto tensors = load_tensors(spec.path);
    if (tensors.size() != 1) throw std::invalid_argument("target: file must hold exactly one tensor");
    return tensors[0];
  }
  throw std::invalid_argument("target: unknown kind " + spec.kind);
}

// --- config <-> JSON ---

inline json config_to_json(const ExperimentConfig& c) {
  json j;
  j["master_seed"] = c.master_seed;
  j["out_dir"] = c.out_dir;
  j["dataset"]["mode"] = c.dataset.mode == TensorMode::Vector ? "vector" : "image";
  j["dataset"]["count"] = c.dataset.count;
  j["dataset"]["modes"] = c.dataset.modes;
  j["dataset"]["radius"] = c.dataset.radius;
  j["dataset"]["sigma"] = c.dataset.sigma;
  j["dataset"]["height"] = c.dataset.height;
  j["dataset"]["width"] = c.dataset.width;
  j["dataset"]["kind"] = c.dataset.kind;
  j["heldout_count"] = c.heldout_count;
  j["schedule"]["T"] = c.schedule.T;
  j["schedule"]["beta_start"] = c.schedule.beta_start;
  j["schedule"]["beta_end"] = c.schedule.beta_end;
  j["model"]["hidden"] = c.model.hidden;
  j["model"]["time_embed_dim"] = c.model.time_embed_dim;
  j["poison"]["rate"] = c.poison.rate;
  j["poison"]["overlap"] = c.poison.overlap;
  j["poison"]["trigger"]["kind"] = c.poison.trigger.kind;
  j["poison"]["trigger"]["coord"] = c.poison.trigger.coord;
  j["poison"]["trigger"]["value"] = c.poison.trigger.value;
  j["poison"]["trigger"]["size"] = c.poison.trigger.size;
  j["poison"]["trigger"]["row"] = c.poison.trigger.row;
  j["poison"]["trigger"]["col"] = c.poison.trigger.col;
  j["poison"]["trigger"]["path"] = c.poison.trigger.path;
  j["poison"]["target"]["kind"] = c.poison.target.kind;
  j["poison"]["target"]["values"] = c.poison.target.values;
  j["poison"]["target"]["arm"] = c.poison.target.arm;
  j["poison"]["target"]["path"] = c.poison.target.path;
  j["train"]["epochs"] = c.train.epochs;
  j["train"]["batch_size"] = c.train.batch_size;
  j["train"]["lr"] = c.train.adam.lr;
  j["train"]["adam_beta1"] = c.train.adam.beta1;
  j["train"]["adam_beta2"] = c.train.adam.beta2;
  j["train"]["adam_eps"] = c.train.adam.eps;
  j["train"]["mode"] = c.train.mode == TrainMode::Scratch ? "scratch" : "finetune";
  j["train"]["checkpoint_in"] = c.train.checkpoint_in;
  j["train"]["checkpoint_every"] = c.train.checkpoint_every;
  j["sampler"]["kind"] = c.sampler.kind == SamplerKind::Ancestral ? "ancestral"
                         : c.sampler.kind == SamplerKind::Clipped ? "clipped"
                                                                  : "ddim";
  j["sampler"]["sigma"] = c.sampler.sigma == SigmaRule::Beta ? "beta" : "beta_tilde";
  j["sampler"]["ddim_steps"] = c.sampler.ddim_steps;
  j["sampler"]["clip_lo"] = c.sampler.clip_lo;
  j["sampler"]["clip_hi"] = c.sampler.clip_hi;
  j["sampler"]["clip_sign_flip"] = c.sampler.clip_sign_flip;
  j["sample_count"] = c.sample_count;
  j["metrics"] = c.metrics;
  j["mmd_permutations"] = c.mmd_permutations;
  return j;
}

inline ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  c.master_seed = j.value("master_seed", c.master_seed);
  c.out_dir = j.value("out_dir", c.out_dir);
  if (j.contains("dataset")) {
    const auto& d = j.at("dataset");
    const std::string mode = d.value("mode", "vector");
    if (mode != "vector" && mode != "image")
      throw std::invalid_argument("config: dataset.mode must be vector or image");
    c.dataset.mode = mode == "vector" ? TensorMode::Vector : TensorMode::Image;
    c.dataset.count = d.value("count", c.dataset.count);
    c.dataset.modes = d.value("modes", c.dataset.modes);
    c.dataset.radius = d.value("radius", c.dataset.radius);
    c.dataset.sigma = d.value("sigma", c.dataset.sigma);
    c.dataset.height = d.value("height", c.dataset.height);
    c.dataset.width = d.value("width", c.dataset.width);
    c.dataset.kind = d.value("kind", c.dataset.kind);
  }
  c.heldout_count = j.value("heldout_count", c.heldout_count);
  if (j.contains("schedule")) {
    const auto& s = j.at("schedule");
    c.schedule.T = s.value("T", c.schedule.T);
    c.schedule.beta_start = s.value("beta_start", c.schedule.beta_start);
    c.schedule.beta_end = s.value("beta_end", c.schedule.beta_end);
  }
  if (j.contains("model")) {
    const auto& m = j.at("model");
    c.model.hidden = m.value("hidden", c.model.hidden);
    c.model.time_embed_dim = m.value("time_embed_dim", c.model.time_embed_dim);
  }
  if (j.contains("poison")) {
    const auto& p = j.at("poison");
    c.poison.rate = p.value("rate", c.poison.rate);
    c.poison.overlap = p.value("overlap", c.poison.overlap);
    if (p.contains("trigger")) {
      const auto& t = p.at("trigger");
      c.poison.trigger.kind = t.value("kind", c.poison.trigger.kind);
      c.poison.trigger.coord = t.value("coord", c.poison.trigger.coord);
      c.poison.trigger.value = t.value("value", c.poison.trigger.value);
      c.poison.trigger.size = t.value("size", c.poison.trigger.size);
      c.poison.trigger.row = t.value("row", c.poison.trigger.row);
      c.poison.trigger.col = t.value("col", c.poison.trigger.col);
      c.poison.trigger.path = t.value("path", c.poison.trigger.path);
    }
    if (p.contains("target")) {
      const auto& t = p.at("target");
      c.poison.target.kind = t.value("kind", c.poison.target.kind);
      c.poison.target.values = t.value("values", c.poison.target.values);
      c.poison.target.arm = t.value("arm", c.poison.target.arm);
      c.poison.target.path = t.value("path", c.poison.target.path);
    }
  }
  if (j.contains("train")) {
    const auto& t = j.at("train");
    c.train.epochs = t.value("epochs", c.train.epochs);
    c.train.batch_size = t.value("batch_size", c.train.batch_size);
    c.train.adam.lr = t.value("lr", c.train.adam.lr);
    c.train.adam.beta1 = t.value("adam_beta1", c.train.adam.beta1);
    c.train.adam.beta2 = t.value("adam_beta2", c.train.adam.beta2);
    c.train.adam.eps = t.value("adam_eps", c.train.adam.eps);
    const std::string mode = t.value("mode", "finetune");
    if (mode != "scratch" && mode != "finetune")
      throw std::invalid_argument("config: train.mode must be scratch or finetune");
    c.train.mode = mode == "scratch" ? TrainMode::Scratch : TrainMode::Finetune;
    c.train.checkpoint_in = t.value("checkpoint_in", c.train.checkpoint_in);
    c.train.checkpoint_every = t.value("checkpoint_every", c.train.checkpoint_every);
  }
  if (j.contains("sampler")) {
    const auto& s = j.at("sampler");
    const std::string kind = s.value("kind", "ancestral");
    if (kind == "ancestral") c.sampler.kind = SamplerKind::Ancestral;
    else if (kind == "clipped") c.sampler.kind = SamplerKind::Clipped;
    else if (kind == "ddim") c.sampler.kind = SamplerKind::Ddim;
    else throw std::invalid_argument("config: sampler.kind must be ancestral, clipped, or ddim");
    const std::string sig = s.value("sigma", "beta");
    if (sig == "beta") c.sampler.sigma = SigmaRule::Beta;
    else if (sig == "beta_tilde") c.sampler.sigma = SigmaRule::BetaTilde;
    else throw std::invalid_argument("config: sampler.sigma must be beta or beta_tilde");
    c.sampler.ddim_steps = s.value("ddim_steps", c.sampler.ddim_steps);
    c.sampler.clip_lo = s.value("clip_lo", c.sampler.clip_lo);
    c.sampler.clip_hi = s.value("clip_hi", c.sampler.clip_hi);
    c.sampler.clip_sign_flip = s.value("clip_sign_flip", c.sampler.clip_sign_flip);
  }
  c.sample_count = j.value("sample_count", c.sample_count);
  c.metrics = j.value("metrics", c.metrics);
  c.mmd_permutations = j.value("mmd_permutations", c.mmd_permutations);
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("config: cannot open " + path);
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error("config: parse error in " + path + ": " + e.what());
  }
  return config_from_json(j);
}

inline std::string config_hash(const ExperimentConfig& c) {
  const std::string dump = config_to_json(c).dump();
  return hex64(fnv1a64(dump.data(), dump.size()));
}

// Named seed substreams; stage order never shifts any stream.
struct SeedSet {
  std::uint64_t dataset, heldout, split, init, train, sample_clean, sample_trigger, defense, mmd;

  explicit SeedSet(std::uint64_t master)
      : dataset(derive_seed(master, "dataset")),
        heldout(derive_seed(master, "heldout")),
        split(derive_seed(master, "split")),
        init(derive_seed(master, "init")),
        train(derive_seed(master, "train")),
        sample_clean(derive_seed(master, "sample.clean")),
        sample_trigger(derive_seed(master, "sample.trigger")),
        defense(derive_seed(master, "defense")),
        mmd(derive_seed(master, "mmd")) {}
};

namespace detail {

inline std::string fmt17(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open " + path);
  f << text;
  if (!f) throw std::runtime_error("write failed for " + path);
}

}  // namespace detail

inline void write_loss_csv(const std::string& path, const std::vector<double>& history) {
  std::string text = "epoch,loss\n";
  for (std::size_t i = 0; i < history.size(); ++i)
    text += std::to_string(i) + "," + detail::fmt17(history[i]) + "\n";
  detail::write_text(path, text);
}

inline void write_metrics_json(const std::string& path, const MetricsReport& report) {
  report.validate();
  json j;
  j["values"] = report.values;
  j["counts"] = report.counts;
  j["seeds"] = report.seeds;
  detail::write_text(path, j.dump(2) + "\n");
}

inline void write_metrics_csv(const std::string& path, const MetricsReport& report) {
  report.validate();
  std::string text = "name,value\n";
  for (const auto& [k, v] : report.values) text += k + "," + detail::fmt17(v) + "\n";
  for (const auto& [k, v] : report.counts) text += "count." + k + "," + std::to_string(v) + "\n";
  for (const auto& [k, v] : report.seeds) text += "seed." + k + "," + std::to_string(v) + "\n";
  detail::write_text(path, text);
}

struct ExperimentResult {
  DenoiserParams params;
  std::vector<double> loss_history;
  MetricsReport report;
  std::map<std::string, std::string> files;  // name -> path
};

// Architecture implied by the dataset and model specs.
inline DenoiserArch make_arch(const DatasetSpec& data, const ModelSpec& model) {
  DenoiserArch arch;
  arch.mode = data.mode;
  arch.data_dims = data.dims();
  arch.hidden = model.hidden;
  arch.time_embed_dim = model.time_embed_dim;
  arch.validate();
  return arch;
}

inline PoisonSpec make_poison_spec(const ExperimentConfig& c, const SeedSet& seeds) {
  PoisonSpec spec;
  spec.trigger = build_trigger(c.poison.trigger, c.dataset);
  spec.target = build_target(c.poison.target, c.dataset);
  spec.rate = c.poison.rate;
  spec.split_seed = seeds.split;
  spec.overlap = c.poison.overlap;
  spec.validate();
  require_same_shape(spec.trigger.pattern, spec.target, "experiment: trigger/target");
  return spec;
}

inline DenoiserParams initial_params(const ExperimentConfig& c, const DenoiserArch& arch,
                                     const NoiseSchedule&, const SeedSet& seeds) {
  if (c.train.mode == TrainMode::Scratch) return init_params(arch, seeds.init);
  if (c.train.checkpoint_in.empty())
    throw std::invalid_argument("experiment: finetune mode needs train.checkpoint_in");
  Checkpoint ck = load_checkpoint(c.train.checkpoint_in);
  if (!(ck.params.arch == arch))
    throw std::invalid_argument("experiment: checkpoint architecture disagrees with config");
  if (ck.schedule.T != c.schedule.T || ck.schedule.beta_start != c.schedule.beta_start ||
      ck.schedule.beta_end != c.schedule.beta_end)
    throw std::invalid_argument("experiment: checkpoint schedule disagrees with config");
  return std::move(ck.params);
}

// Sampling + metrics for a trained model (the eval stage).
inline MetricsReport evaluate_model(const ExperimentConfig& c, const DenoiserParams& params,
                                    const NoiseSchedule& s, const PoisonSpec& poison,
                                    const SeedSet& seeds, std::vector<Tensor>* out_clean = nullptr,
                                    std::vector<Tensor>* out_triggered = nullptr) {
  MetricsReport report;
  RandomStream rng_clean(seeds.sample_clean), rng_trig(seeds.sample_trigger);
  const std::vector<Tensor> clean =
      sample_batch(params, s, c.sample_count, std::nullopt, c.sampler, rng_clean);
  const std::vector<Tensor> triggered =
      sample_batch(params, s, c.sample_count, poison.trigger, c.sampler, rng_trig);
  const std::vector<Tensor> heldout = [&] {
    DatasetSpec h = c.dataset;
    h.count = c.heldout_count;
    return generate_dataset(h, seeds.heldout);
  }();

  for (const std::string& metric : c.metrics) {
    if (metric == "target_mse") {
      report.values["mse_trigger"] = target_mse(triggered, poison.target);
      report.values["mse_clean"] = target_mse(clean, poison.target);
    } else if (metric == "ssim") {
      if (c.dataset.mode != TensorMode::Image)
        throw std::invalid_argument("metrics: ssim needs image mode");
      const Tensor y_disp = to_display(poison.target);
      double acc = 0.0;
      for (const Tensor& t : triggered) acc += ssim(to_display(t), y_disp);
      report.values["ssim_trigger"] = acc / static_cast<double>(triggered.size());
    } else if (metric == "fd") {
      report.values["fd_clean"] = frechet_gaussian_distance(clean, heldout);
    } else if (metric == "mmd") {
      const double bw = median_heuristic_bandwidth(clean, heldout);
      RandomStream rng_mmd(seeds.mmd);
      const MmdNull null = mmd_permutation_z(clean, heldout, bw, c.mmd_permutations, rng_mmd);
      report.values["mmd_clean"] = null.mmd;
      report.values["mmd_z"] = null.z;
      report.values["mmd_bandwidth"] = bw;
    } else {
      throw std::invalid_argument("metrics: unknown metric " + metric);
    }
  }
  report.counts["samples"] = c.sample_count;
  report.counts["heldout"] = c.heldout_count;
  report.seeds["sample_clean"] = seeds.sample_clean;
  report.seeds["sample_trigger"] = seeds.sample_trigger;
  report.seeds["heldout"] = seeds.heldout;
  report.seeds["mmd"] = seeds.mmd;
  report.validate();
  if (out_clean) *out_clean = clean;
  if (out_triggered) *out_triggered = triggered;
  return report;
}

// Full pipeline: dataset -> init -> train -> sample -> metrics -> manifest.
inline ExperimentResult run_experiment(const ExperimentConfig& c) {
  namespace fs = std::filesystem;
  fs::create_directories(c.out_dir);
  const SeedSet seeds(c.master_seed);
  const std::string hash = config_hash(c);

  json manifest;
  manifest["config_hash"] = hash;
  manifest["master_seed"] = c.master_seed;
  manifest["seeds"] = {{"dataset", seeds.dataset},         {"heldout", seeds.heldout},
                       {"split", seeds.split},             {"init", seeds.init},
                       {"train", seeds.train},             {"sample_clean", seeds.sample_clean},
                       {"sample_trigger", seeds.sample_trigger}, {"defense", seeds.defense},
                       {"mmd", seeds.mmd}};
  manifest["stages"] = json::array();
  manifest["files"] = json::object();
  auto stage_ok = [&](const std::string& name) {
    manifest["stages"].push_back({{"name", name}, {"status", "ok"}});
  };
  auto fail = [&](const std::string& name, const std::string& what) {
    manifest["stages"].push_back({{"name", name}, {"status", "failed"}, {"error", what}});
    detail::write_text((fs::path(c.out_dir) / "manifest.json").string(), manifest.dump(2) + "\n");
  };

  ExperimentResult result;
  std::string stage = "config";
  try {
    stage = "dataset";
    const std::vector<Tensor> data = generate_dataset(c.dataset, seeds.dataset);
    stage_ok(stage);

    stage = "init";
    const NoiseSchedule s = c.schedule.to_schedule();
    const DenoiserArch arch = make_arch(c.dataset, c.model);
    const PoisonSpec poison = make_poison_spec(c, seeds);
    DenoiserParams params = initial_params(c, arch, s, seeds);
    stage_ok(stage);

    stage = "train";
    TrainConfig tc = c.train;
    tc.seed = seeds.train;
    EpochCallback on_epoch;
    if (c.train.checkpoint_every > 0) {
      on_epoch = [&](int epoch, const DenoiserParams& p, double) {
        if ((epoch + 1) % c.train.checkpoint_every != 0) return;
        const std::string name = "checkpoint_epoch" + std::to_string(epoch + 1) + ".bdck";
        save_checkpoint((fs::path(c.out_dir) / name).string(),
                        Checkpoint{p, c.schedule, hash, epoch + 1});
        result.files[name] = (fs::path(c.out_dir) / name).string();
      };
    }
    TrainResult tr = train(tc, data, poison, s, std::move(params), on_epoch);
    result.params = std::move(tr.params);
    result.loss_history = std::move(tr.history);
    const std::string ckpt_path = (fs::path(c.out_dir) / "checkpoint.bdck").string();
    save_checkpoint(ckpt_path, Checkpoint{result.params, c.schedule, hash, c.train.epochs});
    result.files["checkpoint.bdck"] = ckpt_path;
    const std::string loss_path = (fs::path(c.out_dir) / "loss_history.csv").string();
    write_loss_csv(loss_path, result.loss_history);
    result.files["loss_history.csv"] = loss_path;
    stage_ok(stage);

    stage = "sample";
    std::vector<Tensor> clean, triggered;
    result.report = evaluate_model(c, result.params, s, poison, seeds, &clean, &triggered);
    const std::string clean_path = (fs::path(c.out_dir) / "samples_clean.bdtf").string();
    const std::string trig_path = (fs::path(c.out_dir) / "samples_triggered.bdtf").string();
    save_tensors(clean_path, clean);
    save_tensors(trig_path, triggered);
    result.files["samples_clean.bdtf"] = clean_path;
    result.files["samples_triggered.bdtf"] = trig_path;
    stage_ok(stage);

    stage = "metrics";
    const std::string mj = (fs::path(c.out_dir) / "metrics.json").string();
    const std::string mc = (fs::path(c.out_dir) / "metrics.csv").string();
    write_metrics_json(mj, result.report);
    write_metrics_csv(mc, result.report);
    result.files["metrics.json"] = mj;
    result.files["metrics.csv"] = mc;
    stage_ok(stage);
  } catch (const std::exception& e) {
    fail(stage, e.what());
    throw;
  }

  for (const auto& [name, path] : result.files) manifest["files"][name] = hex64(file_fnv1a(path));
  detail::write_text((fs::path(c.out_dir) / "manifest.json").string(), manifest.dump(2) + "\n");
  result.files["manifest.json"] = (fs::path(c.out_dir) / "manifest.json").string();
  return result;
}

inline std::string rate_label(double rate) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", rate);
  std::string s = buf;
  for (char& ch : s)
    if (ch == '.') ch = '_';
  return "p" + s;
}

struct SweepRow {
  double rate = 0.0;
  double mse_trigger = 0.0;
  double fd_clean = 0.0;
  std::string dir;
};

// Poison-rate sweep with shared seeds: only the rate (and output dir)
// varies across runs.
inline std::vector<SweepRow> run_sweep(const ExperimentConfig& base,
                                       const std::vector<double>& rates) {
  namespace fs = std::filesystem;
  fs::create_directories(base.out_dir);
  std::vector<SweepRow> rows;
  for (double rate : rates) {
    ExperimentConfig c = base;
    c.poison.rate = rate;
    c.out_dir = (fs::path(base.out_dir) / rate_label(rate)).string();
    const ExperimentResult r = run_experiment(c);
    SweepRow row;
    row.rate = rate;
    row.mse_trigger = r.report.values.at("mse_trigger");
    if (r.report.values.count("fd_clean")) row.fd_clean = r.report.values.at("fd_clean");
    row.dir = c.out_dir;
    rows.push_back(row);
  }
  std::string text = "rate,mse_trigger,fd_clean,dir\n";
  for (const SweepRow& row : rows)
    text += detail::fmt17(row.rate) + "," + detail::fmt17(row.mse_trigger) + "," +
            detail::fmt17(row.fd_clean) + "," + row.dir + "\n";
  detail::write_text((fs::path(base.out_dir) / "sweep.csv").string(), text);
  return rows;
}

struct DefenseGridConfig {
  std::vector<double> budgets = {1.0, 2.0, 4.0};
  std::vector<double> lrs = {2e-4, 1e-4, 5e-5};
  int epochs = 5;
  int recon_count = 256;
  int batch_size = 128;
};

struct DefenseCurve {
  double budget = 0.0;
  double lr = 0.0;
  std::vector<double> mse_per_epoch;
  std::vector<double> clean_loss_per_epoch;
  int best_epoch = 0;
  double best_mse = 0.0;
};

// ANP grid over (budget, lr); per-curve CSVs, best-epoch reconstructions,
// and a summary CSV, all under out_dir.
inline std::vector<DefenseCurve> run_defense(const ExperimentConfig& c,
                                             const std::string& checkpoint_path,
                                             const DefenseGridConfig& grid) {
  namespace fs = std::filesystem;
  fs::create_directories(c.out_dir);
  const SeedSet seeds(c.master_seed);
  const Checkpoint ck = load_checkpoint(checkpoint_path);
  const NoiseSchedule s = ck.schedule.to_schedule();
  const PoisonSpec poison = make_poison_spec(c, seeds);

  DatasetSpec clean_spec = c.dataset;
  clean_spec.count = c.heldout_count;
  const std::vector<Tensor> clean_data = generate_dataset(clean_spec, seeds.heldout);

  std::vector<DefenseCurve> curves;
  for (double budget : grid.budgets) {
    for (double lr : grid.lrs) {
      const std::string label = "b" + detail::fmt17(budget) + "_lr" + detail::fmt17(lr);
      RandomStream rng(derive_seed(seeds.defense, "ascent." + label));
      AnpOptions opt;
      opt.batch_size = grid.batch_size;
      opt.recon_count = grid.recon_count;
      opt.recon_seed = derive_seed(seeds.defense, "recon." + label);
      const AnpResult anp = anp_search(ck.params, clean_data, s, budget, lr, grid.epochs, rng, opt);

      DefenseCurve curve;
      curve.budget = budget;
      curve.lr = lr;
      curve.clean_loss_per_epoch = anp.per_epoch_clean_loss;
      for (const auto& recons : anp.per_epoch_reconstruction)
        curve.mse_per_epoch.push_back(reconstruction_mse(recons, poison.target));
      curve.best_epoch = 0;
      curve.best_mse = curve.mse_per_epoch.empty() ? 0.0 : curve.mse_per_epoch[0];
      for (std::size_t e = 1; e < curve.mse_per_epoch.size(); ++e)
        if (curve.mse_per_epoch[e] < curve.best_mse) {
          curve.best_mse = curve.mse_per_epoch[e];
          curve.best_epoch = static_cast<int>(e);
        }

      std::string text = "epoch,reconstruction_mse,clean_loss\n";
      for (std::size_t e = 0; e < curve.mse_per_epoch.size(); ++e)
        text += std::to_string(e) + "," + detail::fmt17(curve.mse_per_epoch[e]) + "," +
                detail::fmt17(curve.clean_loss_per_epoch[e]) + "\n";
      detail::write_text((fs::path(c.out_dir) / ("anp_" + label + ".csv")).string(), text);
      if (!anp.per_epoch_reconstruction.empty())
        save_tensors((fs::path(c.out_dir) / ("anp_" + label + "_best.bdtf")).string(),
                     anp.per_epoch_reconstruction[static_cast<std::size_t>(curve.best_epoch)]);
      curves.push_back(std::move(curve));
    }
  }
  std::string summary = "budget,lr,best_epoch,best_mse\n";
  for (const DefenseCurve& curve : curves)
    summary += detail::fmt17(curve.budget) + "," + detail::fmt17(curve.lr) + "," +
               std::to_string(curve.best_epoch) + "," + detail::fmt17(curve.best_mse) + "\n";
  detail::write_text((fs::path(c.out_dir) / "anp_summary.csv").string(), summary);
  return curves;
}

}  // namespace bdlab
