// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "seqdesc/datasynth.hpp"
#include "seqdesc/metrics.hpp"
#include "seqdesc/model.hpp"
#include "seqdesc/schedules.hpp"

namespace seqdesc {

enum class CurriculumMode { Scheduled, Fixed, Off };

/// Noise source for training: the curriculum schedule, a fixed sigma applied
/// from epoch 0, or no noise at all.
struct NoiseSetting {
  CurriculumMode mode = CurriculumMode::Scheduled;
  double sigma_max = 0.3;
  std::size_t e_max = 25;
  double fixed_sigma = 0.3;

  double value_at(std::size_t epoch) const;
};

struct DropoutSetting {
  CurriculumMode mode = CurriculumMode::Scheduled;
  double delta_max = 0.25;
  std::size_t e_max = 25;
  double fixed_delta = 0.25;

  double value_at(std::size_t epoch) const;
};

/// Full run recipe. Optimizer defaults: Adam with lr 1e-4 after a 5-epoch
/// linear warm-up, beta1 0.9, beta2 0.99, decoupled weight decay 0.01, label
/// smoothing 0.1, master seed 2019.
struct ExperimentConfig {
  ModelConfig model;
  SynthConfig synth;
  std::size_t epochs = 30;
  std::size_t batch_size = 4;
  double lr_base = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double weight_decay = 0.01;
  std::size_t warmup_epochs = 5;
  double epsilon_smoothing = 0.1;
  double adam_eps = 1e-8;
  NoiseSetting noise;
  DropoutSetting dropout;
  std::uint64_t seed = 2019;
  /// Real wall-clock values in the seconds column break byte-for-byte
  /// reproducibility of log files, so they are opt-in; the column reads 0
  /// when disabled.
  bool log_timings = false;

  void validate() const;
};

ExperimentConfig experiment_config_from_json_file(const std::string& path);
ExperimentConfig experiment_config_from_json_text(const std::string& text);
std::string experiment_config_to_json(const ExperimentConfig& config);

struct EpochRow {
  std::size_t epoch = 0;
  double loss = 0.0;
  double sigma = 0.0;
  double delta = 0.0;
  double lr = 0.0;
  double seconds = 0.0;
};

struct TrainingLog {
  std::vector<EpochRow> rows;
};

/// CSV: epoch,loss,sigma,delta,lr,seconds.
void write_log_csv(std::ostream& out, const TrainingLog& log, bool timings);

struct TrainOutcome {
  DescriberModel<float> model;
  Vocab vocab;
  SynthData data;
  TrainingLog log;
};

/// Runs the full recipe: deterministic data generation, seeded shuffling,
/// per-epoch curriculum values, Adam with warm-up. Pure given the config (no
/// I/O). Throws NumericError with epoch/step context if the loss goes
/// non-finite.
TrainOutcome train(const ExperimentConfig& config);

/// Greedy-decodes every sample and scores the resulting caption corpus.
MetricReport evaluate(const DescriberModel<float>& model, const Vocab& vocab,
                      const SynthSplit& split, bool ground_truth_as_candidate = false);

/// Fraction of samples whose greedy decode reproduces the reference exactly.
double exact_match_rate(const DescriberModel<float>& model, const Vocab& vocab,
                        const SynthSplit& split);

/// train() plus persistence: writes config.json, log.csv, model.ckpt and the
/// validation report.json under run_dir (created if missing).
TrainOutcome run_training(const ExperimentConfig& config, const std::string& run_dir);

/// Loads config.json + model.ckpt from a run directory and evaluates the
/// requested split ("train" | "val"); data_override points at a JSONL file
/// replacing the regenerated split.
MetricReport evaluate_run(const std::string& run_dir, const std::string& split,
                          const std::string& data_override = "",
                          bool ground_truth_as_candidate = false);

struct NoiseAblationRow {
  std::string approach;  // "scheduled" | "fixed"
  double sigma = 0.0;    // sigma_max for the scheduled row, fixed sigma otherwise
  MetricRow metrics;     // corpus means on the validation split
};

/// One training per row with shared seeds: the scheduled curriculum first,
/// then one fixed-sigma run per entry of `sigmas`.
std::vector<NoiseAblationRow> ablate_noise(const ExperimentConfig& config,
                                           const std::vector<double>& sigmas,
                                           std::size_t jobs = 1);

struct GridRow {
  bool noise_on = false;
  bool dropout_on = false;
  bool mish_on = false;  // off = ReLU baseline
  MetricRow metrics;
};

/// The 8-row on/off grid over {noise, dropout, mish}, all cells sharing the
/// config seed. Row order: 000, 100, 010, 001, 101, 011, 110, 111.
std::vector<GridRow> ablate_grid(const ExperimentConfig& config, std::size_t jobs = 1);

void write_noise_table_csv(std::ostream& out, const std::vector<NoiseAblationRow>& rows);
void write_grid_table_csv(std::ostream& out, const std::vector<GridRow>& rows);
std::string render_noise_table(const std::vector<NoiseAblationRow>& rows);
std::string render_grid_table(const std::vector<GridRow>& rows);

}  // namespace seqdesc
