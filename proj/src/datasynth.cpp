// SPDX-License-Identifier: Apache-2.0
#include "seqdesc/datasynth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include <json.hpp>

#include "seqdesc/errors.hpp"
#include "seqdesc/rng.hpp"

namespace seqdesc {

namespace {

std::string synth_id(std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "synth-%04zu", index);
  return buf;
}

}  // namespace

const std::vector<std::string>& action_word_list() {
  static const std::vector<std::string> words = {
      "opens", "closes", "lifts", "drops", "pushes", "pulls", "spins", "shakes",
      "holds", "taps",   "folds", "tilts", "rolls",  "slides", "turns", "waves"};
  return words;
}

const std::vector<std::string>& object_word_list() {
  static const std::vector<std::string> words = {
      "box",    "cup",   "ball",  "book",  "chair",  "door", "lamp", "phone",
      "plate",  "towel", "brush", "spoon", "bottle", "bag",  "card", "shoe"};
  return words;
}

void SynthConfig::validate() const {
  if (n_actions < 1 || n_actions > action_word_list().size())
    throw ConfigError("SynthConfig: n_actions must be in [1, " +
                      std::to_string(action_word_list().size()) + "]");
  if (n_objects < 1 || n_objects > object_word_list().size())
    throw ConfigError("SynthConfig: n_objects must be in [1, " +
                      std::to_string(object_word_list().size()) + "]");
  if (events_per_video < 1) throw ConfigError("SynthConfig: events_per_video must be >= 1");
  if (feat_dim < 1) throw ConfigError("SynthConfig: feat_dim must be >= 1");
  if (!(noise_floor >= 0.0) || !std::isfinite(noise_floor))
    throw ConfigError("SynthConfig: noise_floor must be finite and >= 0");
  if (n_train < 1) throw ConfigError("SynthConfig: n_train must be >= 1");
}

SynthData generate(const SynthConfig& config) {
  config.validate();
  std::size_t n_pairs = config.n_actions * config.n_objects;

  // Event codebook: the embedding of an (action, object) event is the
  // concatenation of a per-action vector and a per-object vector. Each part
  // is an N(0,1) draw rescaled to unit RMS amplitude per component, so
  // curriculum noise of sigma ~ 0.3 is a meaningful but decodable
  // perturbation of the features.
  RngStream codebook_rng = derive_stream(config.seed, "codebook");
  std::size_t action_dim = (config.feat_dim + 1) / 2;
  std::size_t object_dim = config.feat_dim - action_dim;
  if (object_dim == 0) {  // feat_dim 1: the single slot carries the action
    action_dim = 1;
  }
  auto draw_part = [&codebook_rng](std::size_t dim) {
    std::vector<float> vec(dim);
    double norm2 = 0.0;
    for (auto& x : vec) {
      double g = codebook_rng.normal();
      x = static_cast<float>(g);
      norm2 += g * g;
    }
    double scale = norm2 > 0.0 ? std::sqrt(static_cast<double>(dim) / norm2) : 1.0;
    for (auto& x : vec) x = static_cast<float>(x * scale);
    return vec;
  };
  std::vector<std::vector<float>> action_codes, object_codes;
  for (std::size_t a = 0; a < config.n_actions; ++a)
    action_codes.push_back(draw_part(action_dim));
  for (std::size_t o = 0; o < config.n_objects; ++o)
    object_codes.push_back(draw_part(object_dim));
  std::vector<std::vector<float>> codebook(n_pairs);
  for (std::size_t a = 0; a < config.n_actions; ++a)
    for (std::size_t o = 0; o < config.n_objects; ++o) {
      auto& vec = codebook[a * config.n_objects + o];
      vec = action_codes[a];
      vec.insert(vec.end(), object_codes[o].begin(), object_codes[o].end());
    }

  std::size_t total = config.n_train + config.n_val;
  // script space size, saturating to avoid overflow
  double space = 1.0;
  for (std::size_t e = 0; e < config.events_per_video; ++e)
    space = std::min(space * static_cast<double>(n_pairs), 1e18);
  bool force_distinct = space >= static_cast<double>(total);

  RngStream script_rng = derive_stream(config.seed, "scripts");
  std::set<std::vector<std::pair<std::uint32_t, std::uint32_t>>> seen;
  std::vector<std::vector<std::pair<std::uint32_t, std::uint32_t>>> scripts;
  scripts.reserve(total);
  while (scripts.size() < total) {
    std::vector<std::pair<std::uint32_t, std::uint32_t>> script(config.events_per_video);
    for (auto& ev : script) {
      ev.first = script_rng.below(static_cast<std::uint32_t>(config.n_actions));
      ev.second = script_rng.below(static_cast<std::uint32_t>(config.n_objects));
    }
    if (force_distinct && !seen.insert(script).second) continue;
    scripts.push_back(std::move(script));
  }

  RngStream jitter_rng = derive_stream(config.seed, "jitter");
  auto make_sample = [&](const std::vector<std::pair<std::uint32_t, std::uint32_t>>& script) {
    SynthSample sample;
    sample.script = script;
    sample.features.reserve(script.size());
    std::string caption;
    for (const auto& [action, object] : script) {
      const auto& code = codebook[action * config.n_objects + object];
      std::vector<float> feat(code);
      if (config.noise_floor > 0.0)
        for (auto& x : feat)
          x += static_cast<float>(config.noise_floor * jitter_rng.normal());
      sample.features.push_back(std::move(feat));
      if (!caption.empty()) caption += ' ';
      caption += "a person " + action_word_list()[action] + " the " +
                 object_word_list()[object] + " .";
    }
    sample.caption = std::move(caption);
    return sample;
  };

  SynthData data;
  data.train.reserve(config.n_train);
  data.val.reserve(config.n_val);
  for (std::size_t i = 0; i < total; ++i) {
    SynthSample sample = make_sample(scripts[i]);
    if (i < config.n_train)
      data.train.push_back(std::move(sample));
    else
      data.val.push_back(std::move(sample));
  }
  return data;
}

Vocab Vocab::for_synth(const SynthConfig& config) {
  config.validate();
  std::set<std::string> words{"a", "person", "the"};
  for (std::size_t i = 0; i < config.n_actions; ++i) words.insert(action_word_list()[i]);
  for (std::size_t i = 0; i < config.n_objects; ++i) words.insert(object_word_list()[i]);
  Vocab v;
  v.words_ = {"<bos>", "<eos>", "<pad>"};
  v.words_.insert(v.words_.end(), words.begin(), words.end());
  return v;
}

std::int32_t Vocab::id_of(const std::string& word) const {
  auto it = std::find(words_.begin(), words_.end(), word);
  if (it == words_.end()) throw IndexError("Vocab: unknown word '" + word + "'");
  return static_cast<std::int32_t>(it - words_.begin());
}

const std::string& Vocab::word(std::int32_t id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= words_.size())
    throw IndexError("Vocab: id " + std::to_string(id) + " out of range");
  return words_[static_cast<std::size_t>(id)];
}

std::vector<std::int32_t> Vocab::encode(const TokenList& tokens) const {
  std::vector<std::int32_t> ids;
  ids.reserve(tokens.size());
  for (const auto& tok : tokens) ids.push_back(id_of(tok));
  return ids;
}

TokenList Vocab::decode(const std::vector<std::int32_t>& ids) const {
  TokenList tokens;
  tokens.reserve(ids.size());
  for (std::int32_t id : ids) {
    if (id == kBos || id == kEos || id == kPad) continue;
    if (id < 0) throw IndexError("Vocab: id " + std::to_string(id) + " out of range");
    // model vocab slots beyond the word list (reachable by untrained models)
    // render as placeholder tokens so scoring still works
    if (static_cast<std::size_t>(id) >= words_.size())
      tokens.push_back("unk" + std::to_string(id));
    else
      tokens.push_back(words_[static_cast<std::size_t>(id)]);
  }
  return tokens;
}

std::vector<CaptionSet> to_caption_corpus(const SynthSplit& split,
                                          bool ground_truth_as_candidate) {
  if (split.empty()) throw InputError("to_caption_corpus: empty split");
  std::vector<CaptionSet> corpus;
  corpus.reserve(split.size());
  for (std::size_t i = 0; i < split.size(); ++i) {
    CaptionSet set;
    set.video_id = synth_id(i);
    set.references.push_back(tokenize(split[i].caption));
    if (ground_truth_as_candidate) set.candidate = set.references.front();
    corpus.push_back(std::move(set));
  }
  return corpus;
}

void write_jsonl(const std::string& path, const SynthSplit& split) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path);
  for (std::size_t i = 0; i < split.size(); ++i) {
    nlohmann::ordered_json j;
    j["id"] = synth_id(i);
    j["features"] = split[i].features;
    j["caption"] = split[i].caption;
    out << j.dump() << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

SynthSplit read_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open dataset: " + path);
  SynthSplit split;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    SynthSample sample;
    try {
      nlohmann::json j = nlohmann::json::parse(line);
      sample.features = j.at("features").get<std::vector<std::vector<float>>>();
      sample.caption = j.at("caption").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw InputError("malformed JSONL at " + path + ":" + std::to_string(line_no) +
                       ": " + e.what());
    }
    split.push_back(std::move(sample));
  }
  return split;
}

}  // namespace seqdesc
