// Harness CLI: train, finetune, sample, eval, defend-anp, verify, sweep.
// A config file supplies ExperimentConfig fields; flags given on the command
// line override the file's values.

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "bdlab/bdlab.hpp"

namespace {

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> master_seed;
  std::optional<std::string> out_dir;
  std::optional<double> rate;
  std::optional<int> epochs;
  std::optional<double> lr;
  std::optional<int> batch_size;
  std::optional<int> T;
  std::optional<std::int64_t> sample_count;
  std::optional<std::string> checkpoint_in;
  std::optional<int> checkpoint_every;
  std::optional<std::string> sampler_kind;
  std::optional<int> ddim_steps;
};

void add_common_flags(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_path, "Experiment config JSON file");
  cmd->add_option("--master-seed", f.master_seed, "Master seed for all substreams");
  cmd->add_option("--out-dir", f.out_dir, "Output directory");
  cmd->add_option("--rate", f.rate, "Poison rate p");
  cmd->add_option("--epochs", f.epochs, "Training epochs");
  cmd->add_option("--lr", f.lr, "Adam learning rate");
  cmd->add_option("--batch-size", f.batch_size, "Minibatch size");
  cmd->add_option("--T", f.T, "Diffusion steps");
  cmd->add_option("--sample-count", f.sample_count, "Samples per evaluation batch");
  cmd->add_option("--checkpoint-in", f.checkpoint_in, "Input checkpoint (finetune)");
  cmd->add_option("--checkpoint-every", f.checkpoint_every, "Checkpoint every N epochs");
  cmd->add_option("--sampler", f.sampler_kind, "Sampler kind: ancestral | clipped | ddim");
  cmd->add_option("--ddim-steps", f.ddim_steps, "DDIM step count");
}

bdlab::ExperimentConfig resolve_config(const CommonFlags& f) {
  bdlab::ExperimentConfig c =
      f.config_path.empty() ? bdlab::ExperimentConfig{} : bdlab::load_config(f.config_path);
  if (f.master_seed) c.master_seed = *f.master_seed;
  if (f.out_dir) c.out_dir = *f.out_dir;
  if (f.rate) c.poison.rate = *f.rate;
  if (f.epochs) c.train.epochs = *f.epochs;
  if (f.lr) c.train.adam.lr = *f.lr;
  if (f.batch_size) c.train.batch_size = *f.batch_size;
  if (f.T) c.schedule.T = *f.T;
  if (f.sample_count) c.sample_count = *f.sample_count;
  if (f.checkpoint_in) c.train.checkpoint_in = *f.checkpoint_in;
  if (f.checkpoint_every) c.train.checkpoint_every = *f.checkpoint_every;
  if (f.sampler_kind) {
    if (*f.sampler_kind == "ancestral") c.sampler.kind = bdlab::SamplerKind::Ancestral;
    else if (*f.sampler_kind == "clipped") c.sampler.kind = bdlab::SamplerKind::Clipped;
    else if (*f.sampler_kind == "ddim") c.sampler.kind = bdlab::SamplerKind::Ddim;
    else throw CLI::ValidationError("--sampler must be ancestral, clipped, or ddim");
  }
  if (f.ddim_steps) c.sampler.ddim_steps = *f.ddim_steps;
  return c;
}

int run_pipeline(const CommonFlags& flags, bdlab::TrainMode mode) {
  bdlab::ExperimentConfig c = resolve_config(flags);
  c.train.mode = mode;
  const auto result = bdlab::run_experiment(c);
  std::cout << "wrote " << c.out_dir << " (config hash " << bdlab::config_hash(c) << ")\n";
  for (const auto& [k, v] : result.report.values) std::cout << "  " << k << " = " << v << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Desk-scale backdoored-diffusion laboratory"};
  app.require_subcommand(1);

  CommonFlags train_flags, finetune_flags, sample_flags, eval_flags, defend_flags, sweep_flags;

  CLI::App* cmd_train = app.add_subcommand("train", "Train from scratch, then sample and evaluate");
  add_common_flags(cmd_train, train_flags);

  CLI::App* cmd_finetune =
      app.add_subcommand("finetune", "Fine-tune from a checkpoint, then sample and evaluate");
  add_common_flags(cmd_finetune, finetune_flags);

  CLI::App* cmd_sample = app.add_subcommand("sample", "Sample a batch from a checkpoint");
  add_common_flags(cmd_sample, sample_flags);
  std::string sample_checkpoint, sample_out = "samples.bdtf";
  bool sample_triggered = false;
  std::uint64_t sample_seed = 0;
  std::int64_t sample_n = 0;
  cmd_sample->add_option("--checkpoint", sample_checkpoint, "Checkpoint to sample from")->required();
  cmd_sample->add_option("--out", sample_out, "Output tensor file");
  cmd_sample->add_flag("--triggered", sample_triggered, "Draw x_T ~ N(g, I) instead of N(0, I)");
  cmd_sample->add_option("--seed", sample_seed, "Stream seed for this batch");
  cmd_sample->add_option("--count", sample_n, "Number of chains (default sample_count)");

  CLI::App* cmd_eval = app.add_subcommand("eval", "Sample from a checkpoint and compute metrics");
  add_common_flags(cmd_eval, eval_flags);
  std::string eval_checkpoint;
  cmd_eval->add_option("--checkpoint", eval_checkpoint, "Checkpoint to evaluate")->required();

  CLI::App* cmd_defend = app.add_subcommand("defend-anp", "ANP perturbation search grid");
  add_common_flags(cmd_defend, defend_flags);
  std::string defend_checkpoint;
  bdlab::DefenseGridConfig grid;
  cmd_defend->add_option("--checkpoint", defend_checkpoint, "Checkpoint to attack")->required();
  cmd_defend->add_option("--budgets", grid.budgets, "Perturbation budgets");
  cmd_defend->add_option("--lrs", grid.lrs, "Ascent learning rates");
  cmd_defend->add_option("--anp-epochs", grid.epochs, "Ascent epochs");
  cmd_defend->add_option("--recon-count", grid.recon_count, "Reconstructions per epoch");

  CLI::App* cmd_verify = app.add_subcommand("verify", "Oracle verification table");
  int verify_cases = 1000, verify_pairs = 20, verify_coords = 200;
  std::int64_t verify_draws = 100000;
  std::uint64_t verify_seed = 20260815;
  cmd_verify->add_option("--cases", verify_cases, "Randomized posterior cases");
  cmd_verify->add_option("--mc-pairs", verify_pairs, "Monte Carlo (schedule, t) pairs");
  cmd_verify->add_option("--mc-draws", verify_draws, "Monte Carlo draws per pair");
  cmd_verify->add_option("--grad-coords", verify_coords, "Finite-difference coordinates");
  cmd_verify->add_option("--seed", verify_seed, "Verification stream seed");

  CLI::App* cmd_sweep = app.add_subcommand("sweep", "Poison-rate sweep");
  add_common_flags(cmd_sweep, sweep_flags);
  std::vector<double> sweep_rates = {0.0, 0.05, 0.1, 0.2, 0.3};
  cmd_sweep->add_option("--rates", sweep_rates, "Poison rates to sweep");

  try {
    app.parse(argc, argv);

    if (cmd_train->parsed()) return run_pipeline(train_flags, bdlab::TrainMode::Scratch);
    if (cmd_finetune->parsed()) return run_pipeline(finetune_flags, bdlab::TrainMode::Finetune);

    if (cmd_sample->parsed()) {
      bdlab::ExperimentConfig c = resolve_config(sample_flags);
      const bdlab::Checkpoint ck = bdlab::load_checkpoint(sample_checkpoint);
      const bdlab::NoiseSchedule s = ck.schedule.to_schedule();
      std::optional<bdlab::Trigger> trigger;
      if (sample_triggered) trigger = bdlab::build_trigger(c.poison.trigger, c.dataset);
      bdlab::RandomStream rng(sample_seed);
      const auto batch =
          bdlab::sample_batch(ck.params, s, sample_n > 0 ? sample_n : c.sample_count, trigger,
                              c.sampler, rng);
      bdlab::save_tensors(sample_out, batch);
      std::cout << "wrote " << batch.size() << " samples to " << sample_out << "\n";
      return 0;
    }

    if (cmd_eval->parsed()) {
      bdlab::ExperimentConfig c = resolve_config(eval_flags);
      const bdlab::Checkpoint ck = bdlab::load_checkpoint(eval_checkpoint);
      const bdlab::NoiseSchedule s = ck.schedule.to_schedule();
      const bdlab::SeedSet seeds(c.master_seed);
      const bdlab::PoisonSpec poison = bdlab::make_poison_spec(c, seeds);
      const bdlab::MetricsReport report = bdlab::evaluate_model(c, ck.params, s, poison, seeds);
      std::filesystem::create_directories(c.out_dir);
      bdlab::write_metrics_json(c.out_dir + "/metrics.json", report);
      bdlab::write_metrics_csv(c.out_dir + "/metrics.csv", report);
      for (const auto& [k, v] : report.values) std::cout << k << " = " << v << "\n";
      return 0;
    }

    if (cmd_defend->parsed()) {
      bdlab::ExperimentConfig c = resolve_config(defend_flags);
      const auto curves = bdlab::run_defense(c, defend_checkpoint, grid);
      for (const auto& curve : curves)
        std::cout << "budget " << curve.budget << " lr " << curve.lr << ": best epoch "
                  << curve.best_epoch << ", best reconstruction MSE " << curve.best_mse << "\n";
      return 0;
    }

    if (cmd_verify->parsed()) {
      std::vector<bdlab::VerifyResult> results;
      for (auto&& r : bdlab::verify_posterior(verify_cases, verify_seed)) results.push_back(r);
      for (auto&& r : bdlab::verify_identities(50, verify_seed + 1)) results.push_back(r);
      for (auto&& r : bdlab::verify_marginal_mc(verify_pairs, verify_draws, verify_seed + 2))
        results.push_back(r);
      for (auto&& r : bdlab::verify_gradient(verify_coords, verify_seed + 3)) results.push_back(r);
      const bool ok = bdlab::print_verify_table(std::cout, results);
      std::cout << (ok ? "all checks passed\n" : "CHECKS FAILED\n");
      return ok ? 0 : 1;
    }

    if (cmd_sweep->parsed()) {
      bdlab::ExperimentConfig c = resolve_config(sweep_flags);
      const auto rows = bdlab::run_sweep(c, sweep_rates);
      for (const auto& row : rows)
        std::cout << "p = " << row.rate << ": triggered MSE " << row.mse_trigger << "\n";
      return 0;
    }
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
