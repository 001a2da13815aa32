// SPDX-License-Identifier: Apache-2.0
#pragma once

namespace seqdesc {

inline constexpr const char* kArtifactVersion = "1.0.0";
inline constexpr unsigned kCheckpointFormatVersion = 1;

}  // namespace seqdesc
