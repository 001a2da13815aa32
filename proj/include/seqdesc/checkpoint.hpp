// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <utility>
#include <vector>

#include "seqdesc/tensor.hpp"

namespace seqdesc {

struct NamedTensor {
  std::string name;
  Tensor<float> tensor;
};

/// Binary checkpoint: magic "CLVD", format version u32, then one record per
/// parameter (u32 name length, name bytes, u32 rank, u32 dims, raw
/// little-endian 32-bit floats). Records appear in the order given.
void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, const Tensor<float>*>>& params);

/// Reads records until end of file. Throws InputError on bad magic or an
/// unsupported format version.
std::vector<NamedTensor> load_checkpoint(const std::string& path);

}  // namespace seqdesc
