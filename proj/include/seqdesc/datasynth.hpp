// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "seqdesc/metrics.hpp"

namespace seqdesc {

/// Synthetic "feature sequence -> caption" task. Each sample is a script of
/// (action, object) events; features are per-event codebook vectors plus a
/// small intrinsic jitter, captions follow the fixed template
/// "a person <action> the <object> ." per event.
struct SynthConfig {
  std::size_t n_actions = 8;
  std::size_t n_objects = 8;
  std::size_t events_per_video = 3;
  std::size_t feat_dim = 16;
  double noise_floor = 0.05;  // intrinsic jitter, distinct from curriculum sigma
  std::size_t n_train = 512;
  std::size_t n_val = 128;
  std::uint64_t seed = 2019;

  void validate() const;
};

struct SynthSample {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> script;  // (action, object)
  std::vector<std::vector<float>> features;                     // [events][feat_dim]
  std::string caption;
};

using SynthSplit = std::vector<SynthSample>;

struct SynthData {
  SynthSplit train;
  SynthSplit val;
};

const std::vector<std::string>& action_word_list();
const std::vector<std::string>& object_word_list();

/// Deterministic generation from the config seed. Train and validation
/// scripts are disjoint whenever the script space can hold n_train + n_val
/// distinct scripts.
SynthData generate(const SynthConfig& config);

/// Token id mapping induced by the template vocabulary: reserved
/// <bos>=0 <eos>=1 <pad>=2, then the template words in sorted order.
class Vocab {
 public:
  static constexpr std::int32_t kBos = 0;
  static constexpr std::int32_t kEos = 1;
  static constexpr std::int32_t kPad = 2;

  static Vocab for_synth(const SynthConfig& config);

  std::size_t size() const { return words_.size(); }
  std::int32_t id_of(const std::string& word) const;
  const std::string& word(std::int32_t id) const;
  std::vector<std::int32_t> encode(const TokenList& tokens) const;
  /// Drops <bos>/<eos>/<pad>.
  TokenList decode(const std::vector<std::int32_t>& ids) const;

 private:
  std::vector<std::string> words_;
};

/// Ground-truth captions become references; ids are synth-0000, synth-0001,
/// ... by split position. With ground_truth_as_candidate the reference is
/// copied into the candidate slot (identity pipeline check).
std::vector<CaptionSet> to_caption_corpus(const SynthSplit& split,
                                          bool ground_truth_as_candidate = false);

/// JSON-lines persistence: {"id": ..., "features": [[...], ...], "caption": ...}.
void write_jsonl(const std::string& path, const SynthSplit& split);
SynthSplit read_jsonl(const std::string& path);

}  // namespace seqdesc
