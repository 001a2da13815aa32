// SPDX-License-Identifier: Apache-2.0
#include "seqdesc/cli.hpp"

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "seqdesc/datasynth.hpp"
#include "seqdesc/errors.hpp"
#include "seqdesc/experiment.hpp"
#include "seqdesc/metrics.hpp"
#include "seqdesc/schedules.hpp"
#include "seqdesc/version.hpp"

namespace seqdesc::cli {

namespace {

/// Writes to the named file, or stdout when the path is empty.
void emit(const std::string& path, const std::string& content) {
  if (path.empty()) {
    std::cout << content;
    return;
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << content;
  if (!out) throw IoError("write failed: " + path);
}

std::vector<double> parse_sigma_list(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t pos = 0;
      double v = std::stod(item, &pos);
      if (pos != item.size()) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw InputError("bad sigma value '" + item + "' in --sigmas");
    }
  }
  if (out.empty()) throw InputError("--sigmas produced an empty list");
  return out;
}

/// "scheduled" | "off" | "fixed:<value>"
void apply_noise_flag(ExperimentConfig& cfg, const std::string& text) {
  if (text == "scheduled") {
    cfg.noise.mode = CurriculumMode::Scheduled;
  } else if (text == "off") {
    cfg.noise.mode = CurriculumMode::Off;
  } else if (text.rfind("fixed:", 0) == 0) {
    cfg.noise.mode = CurriculumMode::Fixed;
    try {
      cfg.noise.fixed_sigma = std::stod(text.substr(6));
    } catch (const std::exception&) {
      throw ConfigError("bad --noise value '" + text + "'");
    }
  } else {
    throw ConfigError("--noise must be scheduled | off | fixed:<sigma>");
  }
}

void apply_dropout_flag(ExperimentConfig& cfg, const std::string& text) {
  if (text == "scheduled") {
    cfg.dropout.mode = CurriculumMode::Scheduled;
  } else if (text == "off") {
    cfg.dropout.mode = CurriculumMode::Off;
  } else if (text.rfind("fixed:", 0) == 0) {
    cfg.dropout.mode = CurriculumMode::Fixed;
    try {
      cfg.dropout.fixed_delta = std::stod(text.substr(6));
    } catch (const std::exception&) {
      throw ConfigError("bad --dropout value '" + text + "'");
    }
  } else {
    throw ConfigError("--dropout must be scheduled | off | fixed:<delta>");
  }
}

struct CommonTrainFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> batch_size;
  std::optional<std::string> activation;
  std::optional<std::string> noise;
  std::optional<std::string> dropout;

  /// Precedence: flags > config file > built-in defaults.
  ExperimentConfig resolve() const {
    ExperimentConfig cfg;
    if (!config_path.empty()) cfg = experiment_config_from_json_file(config_path);
    if (seed) cfg.seed = *seed;
    if (epochs) cfg.epochs = *epochs;
    if (batch_size) cfg.batch_size = *batch_size;
    if (activation) cfg.model.activation = activation_from_name(*activation);
    if (noise) apply_noise_flag(cfg, *noise);
    if (dropout) apply_dropout_flag(cfg, *dropout);
    cfg.validate();
    return cfg;
  }

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "experiment config JSON file");
    cmd->add_option("--seed", seed, "master seed overriding the config (all RNG streams)");
    cmd->add_option("--epochs", epochs, "epoch count override");
    cmd->add_option("--batch-size", batch_size, "batch size override");
    cmd->add_option("--activation", activation, "mish | relu | gelu");
    cmd->add_option("--noise", noise, "scheduled | off | fixed:<sigma>");
    cmd->add_option("--dropout", dropout, "scheduled | off | fixed:<delta>");
  }
};

int dispatch(int argc, const char* const* argv) {
  CLI::App app{"desk-scale curriculum training toolkit for sequence description"};
  app.set_version_flag("--version", std::string("seqdesc ") + kArtifactVersion +
                                        " (checkpoint format v" +
                                        std::to_string(kCheckpointFormatVersion) + ")");
  app.require_subcommand(1);

  // --- schedule ---
  auto* sched = app.add_subcommand("schedule", "emit a curriculum schedule table as CSV");
  std::string sched_kind;
  double sched_sigma_max = 0.3, sched_delta_max = 0.25;
  std::size_t sched_e_max = 25, sched_epochs = 30;
  std::string sched_out;
  sched->add_option("--kind", sched_kind, "noise | dropout")->required();
  sched->add_option("--sigma-max", sched_sigma_max, "noise schedule maximum (default 0.3)");
  sched->add_option("--delta-max", sched_delta_max, "dropout schedule maximum (default 0.25)");
  sched->add_option("--e-max", sched_e_max, "epoch at which the maximum is reached");
  sched->add_option("--epochs", sched_epochs, "last epoch in the table");
  sched->add_option("--out", sched_out, "output CSV path (stdout if omitted)");
  sched->callback([&]() {
    std::ostringstream body;
    if (sched_kind == "noise") {
      write_schedule_csv(body, schedule_table(NoiseSchedule(sched_sigma_max, sched_e_max),
                                              sched_epochs));
    } else if (sched_kind == "dropout") {
      write_schedule_csv(
          body, schedule_table(DropoutSchedule(sched_delta_max, sched_e_max), sched_epochs));
    } else {
      throw ConfigError("--kind must be noise | dropout");
    }
    emit(sched_out, body.str());
  });

  // --- synth ---
  auto* synth = app.add_subcommand("synth", "generate the synthetic dataset as JSONL");
  std::string synth_config;
  std::string synth_out_train = "train.jsonl", synth_out_val = "val.jsonl";
  std::optional<std::uint64_t> synth_seed;
  synth->add_option("--config", synth_config, "experiment config JSON (synth section used)");
  synth->add_option("--seed", synth_seed, "seed override for generation");
  synth->add_option("--out-train", synth_out_train, "training split output path");
  synth->add_option("--out-val", synth_out_val, "validation split output path");
  synth->callback([&]() {
    SynthConfig cfg;
    if (!synth_config.empty())
      cfg = experiment_config_from_json_file(synth_config).synth;
    if (synth_seed) cfg.seed = *synth_seed;
    SynthData data = generate(cfg);
    write_jsonl(synth_out_train, data.train);
    write_jsonl(synth_out_val, data.val);
    std::cout << "wrote " << data.train.size() << " train samples to " << synth_out_train
              << " and " << data.val.size() << " val samples to " << synth_out_val << "\n";
  });

  // --- train ---
  auto* tr = app.add_subcommand("train", "train a describer model and persist the run");
  CommonTrainFlags tr_flags;
  std::string tr_name = "run", tr_runs_dir = "runs";
  bool tr_log_timings = false;
  tr_flags.attach(tr);
  tr->add_option("--name", tr_name, "run name (directory under --runs-dir)");
  tr->add_option("--runs-dir", tr_runs_dir, "parent directory for runs");
  tr->add_flag("--log-timings", tr_log_timings,
               "write wall time into log.csv (breaks byte reproducibility)");
  tr->callback([&]() {
    ExperimentConfig cfg = tr_flags.resolve();
    cfg.log_timings = tr_log_timings;
    std::string run_dir = tr_runs_dir + "/" + tr_name;
    TrainOutcome outcome = run_training(cfg, run_dir);
    double first = outcome.log.rows.empty() ? 0.0 : outcome.log.rows.front().loss;
    double last = outcome.log.rows.empty() ? 0.0 : outcome.log.rows.back().loss;
    std::cout << "run " << run_dir << ": " << outcome.log.rows.size()
              << " epochs, train loss " << first << " -> " << last << "\n";
    MetricReport report = evaluate(outcome.model, outcome.vocab, outcome.data.val);
    const MetricRow& m = report.corpus_mean;
    std::cout << "val bleu4 " << m.bleu4 << ", rouge_l " << m.rouge_l << ", cider_d "
              << m.cider_d << ", div2 " << m.div2 << ", re4 " << m.re4 << "\n";
  });

  // --- eval ---
  auto* ev = app.add_subcommand("eval", "evaluate a persisted run on a split");
  std::string ev_run, ev_split = "val", ev_data, ev_out_json, ev_out_csv;
  bool ev_gt = false;
  ev->add_option("--run", ev_run, "run directory (config.json + model.ckpt)")->required();
  ev->add_option("--split", ev_split, "train | val (default val)");
  ev->add_option("--data", ev_data, "JSONL file overriding the regenerated split");
  ev->add_option("--out-json", ev_out_json, "report JSON output path");
  ev->add_option("--out-csv", ev_out_csv, "report CSV output path (stdout if omitted)");
  ev->add_flag("--gt-as-candidate", ev_gt,
               "score ground truth against itself (pipeline identity check)");
  ev->callback([&]() {
    MetricReport report = evaluate_run(ev_run, ev_split, ev_data, ev_gt);
    if (!ev_out_json.empty()) {
      std::ostringstream body;
      write_report_json(body, report);
      emit(ev_out_json, body.str());
    }
    std::ostringstream body;
    write_report_csv(body, report);
    emit(ev_out_csv, body.str());
  });

  // --- eval-captions ---
  auto* ec = app.add_subcommand("eval-captions", "score a caption file (no model involved)");
  std::string ec_pred, ec_out, ec_out_json;
  bool ec_exact = false;
  ec->add_option("--pred", ec_pred, "JSON map video_id -> {candidate, references}")
      ->required();
  ec->add_option("--out", ec_out, "report CSV output path (stdout if omitted)");
  ec->add_option("--out-json", ec_out_json, "report JSON output path");
  ec->add_flag("--exact-bleu", ec_exact, "disable BLEU zero-count smoothing");
  ec->callback([&]() {
    std::vector<CaptionSet> corpus = load_caption_file(ec_pred);
    MetricReport report = corpus_report(corpus, !ec_exact);
    if (!ec_out_json.empty()) {
      std::ostringstream body;
      write_report_json(body, report);
      emit(ec_out_json, body.str());
    }
    std::ostringstream body;
    write_report_csv(body, report);
    emit(ec_out, body.str());
  });

  // --- ablate-noise ---
  auto* an = app.add_subcommand("ablate-noise",
                                "scheduled vs fixed-sigma comparison table");
  CommonTrainFlags an_flags;
  std::string an_sigmas = "0.1,0.2,0.3,0.4,0.5";
  std::size_t an_seeds = 1, an_jobs = 1;
  std::string an_out;
  an_flags.attach(an);
  an->add_option("--sigmas", an_sigmas, "comma-separated fixed sigmas");
  an->add_option("--seeds", an_seeds, "number of seeds to average over (seed, seed+1, ...)");
  an->add_option("--jobs", an_jobs, "parallel training processes per table");
  an->add_option("--out", an_out, "table CSV output path (stdout if omitted)");
  an->callback([&]() {
    ExperimentConfig cfg = an_flags.resolve();
    std::vector<double> sigmas = parse_sigma_list(an_sigmas);
    if (an_seeds < 1) throw InputError("--seeds must be >= 1");
    std::vector<NoiseAblationRow> mean_rows;
    for (std::size_t s = 0; s < an_seeds; ++s) {
      ExperimentConfig seeded = cfg;
      seeded.seed = cfg.seed + s;
      std::vector<NoiseAblationRow> rows = ablate_noise(seeded, sigmas, an_jobs);
      if (mean_rows.empty()) {
        mean_rows = rows;
      } else {
        for (std::size_t i = 0; i < rows.size(); ++i) {
          mean_rows[i].metrics.bleu4 += rows[i].metrics.bleu4;
          mean_rows[i].metrics.rouge_l += rows[i].metrics.rouge_l;
          mean_rows[i].metrics.cider_d += rows[i].metrics.cider_d;
          mean_rows[i].metrics.div1 += rows[i].metrics.div1;
          mean_rows[i].metrics.div2 += rows[i].metrics.div2;
          mean_rows[i].metrics.re4 += rows[i].metrics.re4;
        }
      }
    }
    double inv = 1.0 / static_cast<double>(an_seeds);
    for (auto& row : mean_rows) {
      row.metrics.bleu4 *= inv;
      row.metrics.rouge_l *= inv;
      row.metrics.cider_d *= inv;
      row.metrics.div1 *= inv;
      row.metrics.div2 *= inv;
      row.metrics.re4 *= inv;
    }
    std::ostringstream body;
    write_noise_table_csv(body, mean_rows);
    emit(an_out, body.str());
    std::cerr << render_noise_table(mean_rows);
  });

  // --- ablate-grid ---
  auto* ag = app.add_subcommand("ablate-grid",
                                "8-row on/off grid over {noise, dropout, mish}");
  CommonTrainFlags ag_flags;
  std::size_t ag_jobs = 1;
  std::string ag_out;
  ag_flags.attach(ag);
  ag->add_option("--jobs", ag_jobs, "parallel training processes per table");
  ag->add_option("--out", ag_out, "table CSV output path (stdout if omitted)");
  ag->callback([&]() {
    ExperimentConfig cfg = ag_flags.resolve();
    std::vector<GridRow> rows = ablate_grid(cfg, ag_jobs);
    std::ostringstream body;
    write_grid_table_csv(body, rows);
    emit(ag_out, body.str());
    std::cerr << render_grid_table(rows);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::CallForVersion& e) {
    std::cout << app.version() << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help() << std::flush;
    return 1;
  }
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
  try {
    return dispatch(argc, argv);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 2;
  } catch (const IndexError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace seqdesc::cli
