// SPDX-License-Identifier: Apache-2.0
#include "seqdesc/experiment.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "seqdesc/errors.hpp"
#include "seqdesc/optimizer.hpp"
#include "seqdesc/textio.hpp"

namespace seqdesc {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

void reject_unknown_keys(const json& obj, std::initializer_list<const char*> allowed,
                         const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    bool known = false;
    for (const char* a : allowed)
      if (key == a) known = true;
    if (!known) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

double elapsed_seconds(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

/// Runs independent cells on up to `jobs` worker threads; cells write their
/// own result slots, so output order never depends on scheduling.
void run_cells(std::vector<std::function<void()>>& cells, std::size_t jobs) {
  if (jobs <= 1 || cells.size() <= 1) {
    for (auto& cell : cells) cell();
    return;
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      cells[i]();
    }
  };
  std::size_t n_threads = std::min(jobs, cells.size());
  std::vector<std::thread> pool;
  pool.reserve(n_threads);
  for (std::size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
}

std::string synth_index_id(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "synth-%04zu", i);
  return buf;
}

Tensor<float> batch_features(const SynthSplit& split, const std::vector<std::size_t>& idx) {
  std::size_t b = idx.size();
  std::size_t s = split[idx[0]].features.size();
  std::size_t f = split[idx[0]].features[0].size();
  Tensor<float> out({b, s, f});
  for (std::size_t r = 0; r < b; ++r) {
    const auto& feats = split[idx[r]].features;
    if (feats.size() != s)
      throw InputError("batch_features: ragged event counts in split");
    for (std::size_t e = 0; e < s; ++e)
      std::copy(feats[e].begin(), feats[e].end(), out.data() + (r * s + e) * f);
  }
  return out;
}

Tensor<float> sample_features(const SynthSample& sample) {
  std::size_t s = sample.features.size();
  std::size_t f = sample.features[0].size();
  Tensor<float> out({s, f});
  for (std::size_t e = 0; e < s; ++e)
    std::copy(sample.features[e].begin(), sample.features[e].end(), out.data() + e * f);
  return out;
}

}  // namespace

double NoiseSetting::value_at(std::size_t epoch) const {
  switch (mode) {
    case CurriculumMode::Scheduled: return sigma_at(NoiseSchedule(sigma_max, e_max), epoch);
    case CurriculumMode::Fixed: return fixed_sigma;
    case CurriculumMode::Off: return 0.0;
  }
  throw ContractError("NoiseSetting: unknown mode");
}

double DropoutSetting::value_at(std::size_t epoch) const {
  switch (mode) {
    case CurriculumMode::Scheduled:
      return delta_at(DropoutSchedule(delta_max, e_max), epoch);
    case CurriculumMode::Fixed: return fixed_delta;
    case CurriculumMode::Off: return 0.0;
  }
  throw ContractError("DropoutSetting: unknown mode");
}

void ExperimentConfig::validate() const {
  model.validate();
  synth.validate();
  if (model.feat_dim != synth.feat_dim)
    throw ConfigError("model.feat_dim " + std::to_string(model.feat_dim) +
                      " differs from synth.feat_dim " + std::to_string(synth.feat_dim));
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(lr_base > 0.0)) throw ConfigError("lr_base must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("beta1 must be in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("beta2 must be in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
  if (warmup_epochs > epochs)
    throw ConfigError("warmup_epochs " + std::to_string(warmup_epochs) +
                      " exceeds epochs " + std::to_string(epochs));
  if (!(epsilon_smoothing >= 0.0 && epsilon_smoothing < 1.0))
    throw ConfigError("epsilon_smoothing must be in [0, 1)");
  if (!(adam_eps > 0.0)) throw ConfigError("adam_eps must be > 0");
  if (noise.mode == CurriculumMode::Scheduled)
    NoiseSchedule(noise.sigma_max, noise.e_max);  // validates
  if (noise.mode == CurriculumMode::Fixed && noise.fixed_sigma < 0.0)
    throw ConfigError("fixed noise sigma must be >= 0");
  if (dropout.mode == CurriculumMode::Scheduled)
    DropoutSchedule(dropout.delta_max, dropout.e_max);
  if (dropout.mode == CurriculumMode::Fixed &&
      !(dropout.fixed_delta >= 0.0 && dropout.fixed_delta < 1.0))
    throw ConfigError("fixed dropout delta must be in [0, 1)");
}

// ---------------------------------------------------------------------------
// config JSON
// ---------------------------------------------------------------------------

namespace {

NoiseSetting noise_from_json(const json& j) {
  reject_unknown_keys(j, {"mode", "sigma_max", "e_max", "sigma"}, "noise");
  NoiseSetting s;
  std::string mode = j.value("mode", "scheduled");
  if (mode == "scheduled") s.mode = CurriculumMode::Scheduled;
  else if (mode == "fixed") s.mode = CurriculumMode::Fixed;
  else if (mode == "off") s.mode = CurriculumMode::Off;
  else throw ConfigError("noise.mode must be scheduled | fixed | off");
  s.sigma_max = j.value("sigma_max", s.sigma_max);
  s.e_max = j.value("e_max", s.e_max);
  s.fixed_sigma = j.value("sigma", s.fixed_sigma);
  return s;
}

DropoutSetting dropout_from_json(const json& j) {
  reject_unknown_keys(j, {"mode", "delta_max", "e_max", "delta"}, "dropout");
  DropoutSetting s;
  std::string mode = j.value("mode", "scheduled");
  if (mode == "scheduled") s.mode = CurriculumMode::Scheduled;
  else if (mode == "fixed") s.mode = CurriculumMode::Fixed;
  else if (mode == "off") s.mode = CurriculumMode::Off;
  else throw ConfigError("dropout.mode must be scheduled | fixed | off");
  s.delta_max = j.value("delta_max", s.delta_max);
  s.e_max = j.value("e_max", s.e_max);
  s.fixed_delta = j.value("delta", s.fixed_delta);
  return s;
}

json noise_to_json(const NoiseSetting& s) {
  ordered_json j;
  switch (s.mode) {
    case CurriculumMode::Scheduled:
      j["mode"] = "scheduled";
      j["sigma_max"] = s.sigma_max;
      j["e_max"] = s.e_max;
      break;
    case CurriculumMode::Fixed:
      j["mode"] = "fixed";
      j["sigma"] = s.fixed_sigma;
      break;
    case CurriculumMode::Off:
      j["mode"] = "off";
      break;
  }
  return j;
}

json dropout_to_json(const DropoutSetting& s) {
  ordered_json j;
  switch (s.mode) {
    case CurriculumMode::Scheduled:
      j["mode"] = "scheduled";
      j["delta_max"] = s.delta_max;
      j["e_max"] = s.e_max;
      break;
    case CurriculumMode::Fixed:
      j["mode"] = "fixed";
      j["delta"] = s.fixed_delta;
      break;
    case CurriculumMode::Off:
      j["mode"] = "off";
      break;
  }
  return j;
}

}  // namespace

ExperimentConfig experiment_config_from_json_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed config JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  reject_unknown_keys(doc,
                      {"model", "synth", "epochs", "batch_size", "lr_base", "beta1",
                       "beta2", "weight_decay", "warmup_epochs", "epsilon_smoothing",
                       "adam_eps", "noise", "dropout", "seed", "log_timings"},
                      "config");
  ExperimentConfig cfg;
  try {
    if (doc.contains("model")) {
      const json& m = doc["model"];
      reject_unknown_keys(m,
                          {"d_model", "n_heads", "n_layers", "vocab_size", "max_src_len",
                           "max_tgt_len", "feat_dim", "feedforward_mult", "activation"},
                          "model");
      cfg.model.d_model = m.value("d_model", cfg.model.d_model);
      cfg.model.n_heads = m.value("n_heads", cfg.model.n_heads);
      cfg.model.n_layers = m.value("n_layers", cfg.model.n_layers);
      cfg.model.vocab_size = m.value("vocab_size", cfg.model.vocab_size);
      cfg.model.max_src_len = m.value("max_src_len", cfg.model.max_src_len);
      cfg.model.max_tgt_len = m.value("max_tgt_len", cfg.model.max_tgt_len);
      cfg.model.feat_dim = m.value("feat_dim", cfg.model.feat_dim);
      cfg.model.feedforward_mult = m.value("feedforward_mult", cfg.model.feedforward_mult);
      if (m.contains("activation"))
        cfg.model.activation = activation_from_name(m["activation"].get<std::string>());
    }
    if (doc.contains("synth")) {
      const json& s = doc["synth"];
      reject_unknown_keys(s,
                          {"n_actions", "n_objects", "events_per_video", "feat_dim",
                           "noise_floor", "n_train", "n_val", "seed"},
                          "synth");
      cfg.synth.n_actions = s.value("n_actions", cfg.synth.n_actions);
      cfg.synth.n_objects = s.value("n_objects", cfg.synth.n_objects);
      cfg.synth.events_per_video = s.value("events_per_video", cfg.synth.events_per_video);
      cfg.synth.feat_dim = s.value("feat_dim", cfg.synth.feat_dim);
      cfg.synth.noise_floor = s.value("noise_floor", cfg.synth.noise_floor);
      cfg.synth.n_train = s.value("n_train", cfg.synth.n_train);
      cfg.synth.n_val = s.value("n_val", cfg.synth.n_val);
      cfg.synth.seed = s.value("seed", cfg.synth.seed);
    }
    cfg.epochs = doc.value("epochs", cfg.epochs);
    cfg.batch_size = doc.value("batch_size", cfg.batch_size);
    cfg.lr_base = doc.value("lr_base", cfg.lr_base);
    cfg.beta1 = doc.value("beta1", cfg.beta1);
    cfg.beta2 = doc.value("beta2", cfg.beta2);
    cfg.weight_decay = doc.value("weight_decay", cfg.weight_decay);
    cfg.warmup_epochs = doc.value("warmup_epochs", cfg.warmup_epochs);
    cfg.epsilon_smoothing = doc.value("epsilon_smoothing", cfg.epsilon_smoothing);
    cfg.adam_eps = doc.value("adam_eps", cfg.adam_eps);
    if (doc.contains("noise")) cfg.noise = noise_from_json(doc["noise"]);
    if (doc.contains("dropout")) cfg.dropout = dropout_from_json(doc["dropout"]);
    cfg.seed = doc.value("seed", cfg.seed);
    cfg.log_timings = doc.value("log_timings", cfg.log_timings);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig experiment_config_from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return experiment_config_from_json_text(buf.str());
}

std::string experiment_config_to_json(const ExperimentConfig& cfg) {
  ordered_json doc;
  ordered_json m;
  m["d_model"] = cfg.model.d_model;
  m["n_heads"] = cfg.model.n_heads;
  m["n_layers"] = cfg.model.n_layers;
  m["vocab_size"] = cfg.model.vocab_size;
  m["max_src_len"] = cfg.model.max_src_len;
  m["max_tgt_len"] = cfg.model.max_tgt_len;
  m["feat_dim"] = cfg.model.feat_dim;
  m["feedforward_mult"] = cfg.model.feedforward_mult;
  m["activation"] = std::string(activation_name(cfg.model.activation));
  doc["model"] = m;
  ordered_json s;
  s["n_actions"] = cfg.synth.n_actions;
  s["n_objects"] = cfg.synth.n_objects;
  s["events_per_video"] = cfg.synth.events_per_video;
  s["feat_dim"] = cfg.synth.feat_dim;
  s["noise_floor"] = cfg.synth.noise_floor;
  s["n_train"] = cfg.synth.n_train;
  s["n_val"] = cfg.synth.n_val;
  s["seed"] = cfg.synth.seed;
  doc["synth"] = s;
  doc["epochs"] = cfg.epochs;
  doc["batch_size"] = cfg.batch_size;
  doc["lr_base"] = cfg.lr_base;
  doc["beta1"] = cfg.beta1;
  doc["beta2"] = cfg.beta2;
  doc["weight_decay"] = cfg.weight_decay;
  doc["warmup_epochs"] = cfg.warmup_epochs;
  doc["epsilon_smoothing"] = cfg.epsilon_smoothing;
  doc["adam_eps"] = cfg.adam_eps;
  doc["noise"] = noise_to_json(cfg.noise);
  doc["dropout"] = dropout_to_json(cfg.dropout);
  doc["seed"] = cfg.seed;
  doc["log_timings"] = cfg.log_timings;
  return doc.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// training / evaluation
// ---------------------------------------------------------------------------

void write_log_csv(std::ostream& out, const TrainingLog& log, bool timings) {
  out << "epoch,loss,sigma,delta,lr,seconds\n";
  for (const auto& row : log.rows) {
    out << row.epoch << ',' << format_double(row.loss) << ','
        << format_double(row.sigma) << ',' << format_double(row.delta) << ','
        << format_double(row.lr) << ',' << format_double(timings ? row.seconds : 0.0)
        << '\n';
  }
}

TrainOutcome train(const ExperimentConfig& config) {
  config.validate();

  SynthConfig synth_cfg = config.synth;
  synth_cfg.seed = derive_key(config.seed, "data");
  SynthData data = generate(synth_cfg);
  Vocab vocab = Vocab::for_synth(synth_cfg);
  if (vocab.size() > config.model.vocab_size)
    throw ConfigError("synthetic vocabulary of " + std::to_string(vocab.size()) +
                      " words does not fit model vocab_size " +
                      std::to_string(config.model.vocab_size));

  RngStream init_rng = derive_stream(config.seed, "init");
  DescriberModel<float> model(config.model, init_rng);

  std::vector<std::vector<std::int32_t>> caption_ids;
  caption_ids.reserve(data.train.size());
  for (const auto& sample : data.train)
    caption_ids.push_back(vocab.encode(tokenize(sample.caption)));

  auto named = model.named_parameters();
  std::vector<Tensor<float>*> param_ptrs;
  param_ptrs.reserve(named.size());
  for (auto& [name, tensor] : named) param_ptrs.push_back(tensor);
  AdamState<float> adam = AdamState<float>::init_like(param_ptrs);

  std::size_t n = data.train.size();
  std::size_t steps_per_epoch = (n + config.batch_size - 1) / config.batch_size;
  std::size_t global_step = 0;

  TrainingLog log;
  log.rows.reserve(config.epochs);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    auto t0 = std::chrono::steady_clock::now();
    double sigma = config.noise.value_at(epoch);
    double delta = config.dropout.value_at(epoch);

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    RngStream shuffle_rng = derive_stream(config.seed, "shuffle", epoch);
    shuffle(order, shuffle_rng);

    double loss_sum = 0.0;
    double last_lr = 0.0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      std::size_t end = std::min(n, start + config.batch_size);
      std::vector<std::size_t> idx(order.begin() + start, order.begin() + end);
      Tensor<float> feats = batch_features(data.train, idx);
      std::vector<std::vector<std::int32_t>> caps;
      caps.reserve(idx.size());
      for (std::size_t i : idx) caps.push_back(caption_ids[i]);

      double lr = lr_at(config.lr_base, config.warmup_epochs, global_step, steps_per_epoch);
      Tape<float> tape;
      DescriberModel<float>::StochasticStreams streams{
          derive_stream(config.seed, "noise", global_step),
          derive_stream(config.seed, "dropout", global_step)};
      std::vector<Value<float>> bound;
      Value<float> loss = model.forward_loss(tape, feats, caps, sigma, delta,
                                             config.epsilon_smoothing, streams, true,
                                             &bound);
      double loss_value = static_cast<double>(loss.tensor()[0]);
      if (!std::isfinite(loss_value))
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch) +
                           ", step " + std::to_string(global_step));
      tape.backward(loss);
      std::vector<Tensor<float>> grads;
      grads.reserve(bound.size());
      for (const auto& b : bound) grads.push_back(tape.grad(b));
      adam_step(param_ptrs, grads, adam, lr, config.beta1, config.beta2,
                config.weight_decay, config.adam_eps);

      loss_sum += loss_value;
      last_lr = lr;
      ++global_step;
    }

    EpochRow row;
    row.epoch = epoch;
    row.loss = loss_sum / static_cast<double>(steps_per_epoch);
    row.sigma = sigma;
    row.delta = delta;
    row.lr = last_lr;
    row.seconds = elapsed_seconds(t0);
    log.rows.push_back(row);
  }

  return TrainOutcome{std::move(model), std::move(vocab), std::move(data), std::move(log)};
}

MetricReport evaluate(const DescriberModel<float>& model, const Vocab& vocab,
                      const SynthSplit& split, bool ground_truth_as_candidate) {
  if (split.empty()) throw InputError("evaluate: empty split");
  std::vector<CaptionSet> corpus;
  corpus.reserve(split.size());
  for (std::size_t i = 0; i < split.size(); ++i) {
    CaptionSet set;
    set.video_id = synth_index_id(i);
    set.references.push_back(tokenize(split[i].caption));
    if (ground_truth_as_candidate) {
      set.candidate = set.references.front();
    } else {
      Tensor<float> feats = sample_features(split[i]);
      std::vector<std::int32_t> ids =
          model.greedy_decode(feats, model.config().max_tgt_len);
      set.candidate = vocab.decode(ids);
    }
    corpus.push_back(std::move(set));
  }
  return corpus_report(corpus);
}

double exact_match_rate(const DescriberModel<float>& model, const Vocab& vocab,
                        const SynthSplit& split) {
  if (split.empty()) throw InputError("exact_match_rate: empty split");
  std::size_t hits = 0;
  for (const auto& sample : split) {
    Tensor<float> feats = sample_features(sample);
    std::vector<std::int32_t> ids = model.greedy_decode(feats, model.config().max_tgt_len);
    if (vocab.decode(ids) == tokenize(sample.caption)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(split.size());
}

TrainOutcome run_training(const ExperimentConfig& config, const std::string& run_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(run_dir, ec);
  if (ec) throw IoError("cannot create run directory " + run_dir + ": " + ec.message());

  {
    std::ofstream out(run_dir + "/config.json", std::ios::trunc);
    if (!out) throw IoError("cannot write " + run_dir + "/config.json");
    out << experiment_config_to_json(config);
  }
  TrainOutcome outcome = train(config);
  {
    std::ofstream out(run_dir + "/log.csv", std::ios::trunc);
    if (!out) throw IoError("cannot write " + run_dir + "/log.csv");
    write_log_csv(out, outcome.log, config.log_timings);
  }
  outcome.model.save(run_dir + "/model.ckpt");
  {
    MetricReport report = evaluate(outcome.model, outcome.vocab, outcome.data.val);
    std::ofstream out(run_dir + "/report.json", std::ios::trunc);
    if (!out) throw IoError("cannot write " + run_dir + "/report.json");
    write_report_json(out, report);
  }
  return outcome;
}

MetricReport evaluate_run(const std::string& run_dir, const std::string& split,
                          const std::string& data_override,
                          bool ground_truth_as_candidate) {
  ExperimentConfig config = experiment_config_from_json_file(run_dir + "/config.json");
  DescriberModel<float> model(config.model);
  model.load(run_dir + "/model.ckpt");

  SynthConfig synth_cfg = config.synth;
  synth_cfg.seed = derive_key(config.seed, "data");
  Vocab vocab = Vocab::for_synth(synth_cfg);

  SynthSplit samples;
  if (!data_override.empty()) {
    samples = read_jsonl(data_override);
  } else {
    SynthData data = generate(synth_cfg);
    if (split == "train") samples = std::move(data.train);
    else if (split == "val") samples = std::move(data.val);
    else throw InputError("evaluate_run: split must be 'train' or 'val'");
  }
  if (samples.empty()) throw InputError("evaluate_run: empty split");
  if (!samples[0].features.empty() &&
      samples[0].features[0].size() != config.model.feat_dim)
    throw ConfigError("evaluate_run: data feat_dim " +
                      std::to_string(samples[0].features[0].size()) +
                      " does not match checkpoint feat_dim " +
                      std::to_string(config.model.feat_dim));
  return evaluate(model, vocab, samples, ground_truth_as_candidate);
}

// ---------------------------------------------------------------------------
// ablations
// ---------------------------------------------------------------------------

namespace {

MetricRow cell_metrics(const ExperimentConfig& config) {
  TrainOutcome outcome = train(config);
  MetricReport report = evaluate(outcome.model, outcome.vocab, outcome.data.val);
  return report.corpus_mean;
}

}  // namespace

std::vector<NoiseAblationRow> ablate_noise(const ExperimentConfig& config,
                                           const std::vector<double>& sigmas,
                                           std::size_t jobs) {
  if (sigmas.empty()) throw InputError("ablate_noise: empty sigma list");
  config.validate();
  std::vector<ExperimentConfig> cells;
  std::vector<NoiseAblationRow> rows(1 + sigmas.size());
  {
    ExperimentConfig c = config;
    c.noise.mode = CurriculumMode::Scheduled;
    cells.push_back(c);
    rows[0].approach = "scheduled";
    rows[0].sigma = c.noise.sigma_max;
  }
  for (std::size_t i = 0; i < sigmas.size(); ++i) {
    if (sigmas[i] < 0.0) throw InputError("ablate_noise: sigma must be >= 0");
    ExperimentConfig c = config;
    c.noise.mode = CurriculumMode::Fixed;
    c.noise.fixed_sigma = sigmas[i];
    cells.push_back(c);
    rows[i + 1].approach = "fixed";
    rows[i + 1].sigma = sigmas[i];
  }
  std::vector<std::function<void()>> tasks;
  tasks.reserve(cells.size());
  for (std::size_t i = 0; i < cells.size(); ++i)
    tasks.push_back([&rows, &cells, i]() { rows[i].metrics = cell_metrics(cells[i]); });
  run_cells(tasks, jobs);
  return rows;
}

std::vector<GridRow> ablate_grid(const ExperimentConfig& config, std::size_t jobs) {
  config.validate();
  // row order used by the reference ablation tables
  constexpr bool kGrid[8][3] = {{false, false, false}, {true, false, false},
                                {false, true, false},  {false, false, true},
                                {true, false, true},   {false, true, true},
                                {true, true, false},   {true, true, true}};
  std::vector<ExperimentConfig> cells;
  std::vector<GridRow> rows(8);
  for (std::size_t i = 0; i < 8; ++i) {
    ExperimentConfig c = config;
    rows[i].noise_on = kGrid[i][0];
    rows[i].dropout_on = kGrid[i][1];
    rows[i].mish_on = kGrid[i][2];
    c.noise.mode = kGrid[i][0] ? CurriculumMode::Scheduled : CurriculumMode::Off;
    c.dropout.mode = kGrid[i][1] ? CurriculumMode::Scheduled : CurriculumMode::Off;
    c.model.activation = kGrid[i][2] ? ActivationKind::Mish : ActivationKind::ReLU;
    cells.push_back(c);
  }
  std::vector<std::function<void()>> tasks;
  tasks.reserve(cells.size());
  for (std::size_t i = 0; i < cells.size(); ++i)
    tasks.push_back([&rows, &cells, i]() { rows[i].metrics = cell_metrics(cells[i]); });
  run_cells(tasks, jobs);
  return rows;
}

// ---------------------------------------------------------------------------
// table rendering
// ---------------------------------------------------------------------------

void write_noise_table_csv(std::ostream& out, const std::vector<NoiseAblationRow>& rows) {
  out << "approach,sigma,bleu4,rouge_l,cider_d,div2,re4\n";
  for (const auto& row : rows) {
    out << row.approach << ',' << format_double(row.sigma) << ','
        << format_double(row.metrics.bleu4) << ',' << format_double(row.metrics.rouge_l)
        << ',' << format_double(row.metrics.cider_d) << ','
        << format_double(row.metrics.div2) << ',' << format_double(row.metrics.re4)
        << '\n';
  }
}

void write_grid_table_csv(std::ostream& out, const std::vector<GridRow>& rows) {
  out << "noise,dropout,mish,bleu4,rouge_l,cider_d,div2,re4\n";
  for (const auto& row : rows) {
    out << (row.noise_on ? "on" : "off") << ',' << (row.dropout_on ? "on" : "off") << ','
        << (row.mish_on ? "on" : "off") << ',' << format_double(row.metrics.bleu4) << ','
        << format_double(row.metrics.rouge_l) << ',' << format_double(row.metrics.cider_d)
        << ',' << format_double(row.metrics.div2) << ',' << format_double(row.metrics.re4)
        << '\n';
  }
}

namespace {

std::string fixed3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

void render_metric_cells(std::string& line, const MetricRow& m) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), " %8s %8s %8s %8s %8s", fixed3(m.bleu4).c_str(),
                fixed3(m.rouge_l).c_str(), fixed3(m.cider_d).c_str(),
                fixed3(m.div2).c_str(), fixed3(m.re4).c_str());
  line += buf;
}

}  // namespace

std::string render_noise_table(const std::vector<NoiseAblationRow>& rows) {
  std::string out;
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%-10s %-9s %8s %8s %8s %8s %8s\n", "approach", "sigma",
                "bleu4", "rouge_l", "cider_d", "div2", "re4");
  out += buf;
  for (const auto& row : rows) {
    std::snprintf(buf, sizeof(buf), "%-10s %-9s", row.approach.c_str(),
                  fixed3(row.sigma).c_str());
    std::string line = buf;
    render_metric_cells(line, row.metrics);
    out += line + "\n";
  }
  return out;
}

std::string render_grid_table(const std::vector<GridRow>& rows) {
  std::string out;
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%-6s %-8s %-5s %8s %8s %8s %8s %8s\n", "noise",
                "dropout", "mish", "bleu4", "rouge_l", "cider_d", "div2", "re4");
  out += buf;
  for (const auto& row : rows) {
    std::snprintf(buf, sizeof(buf), "%-6s %-8s %-5s", row.noise_on ? "on" : "off",
                  row.dropout_on ? "on" : "off", row.mish_on ? "on" : "off");
    std::string line = buf;
    render_metric_cells(line, row.metrics);
    out += line + "\n";
  }
  return out;
}

}  // namespace seqdesc
