// SPDX-License-Identifier: Apache-2.0
#include "seqdesc/model.hpp"

namespace seqdesc {

void ModelConfig::validate() const {
  std::string problems;
  auto note = [&problems](const std::string& msg) {
    if (!problems.empty()) problems += "; ";
    problems += msg;
  };
  if (d_model < 1) note("d_model must be >= 1");
  if (n_heads < 1) note("n_heads must be >= 1");
  if (n_heads >= 1 && d_model % n_heads != 0)
    note("d_model " + std::to_string(d_model) + " not divisible by n_heads " +
         std::to_string(n_heads));
  if (n_layers < 1) note("n_layers must be >= 1");
  if (vocab_size < 4) note("vocab_size must be >= 4 (3 reserved ids + content)");
  if (max_src_len < 1) note("max_src_len must be >= 1");
  if (max_tgt_len < 2) note("max_tgt_len must be >= 2");
  if (feat_dim < 1) note("feat_dim must be >= 1");
  if (feedforward_mult < 1) note("feedforward_mult must be >= 1");
  if (!problems.empty()) throw ConfigError("invalid model config: " + problems);
}

}  // namespace seqdesc
