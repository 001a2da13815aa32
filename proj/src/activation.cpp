// SPDX-License-Identifier: Apache-2.0
#include "seqdesc/activation.hpp"

namespace seqdesc {

ActivationKind activation_from_name(std::string_view name) {
  if (name == "mish") return ActivationKind::Mish;
  if (name == "relu") return ActivationKind::ReLU;
  if (name == "gelu") return ActivationKind::GELU;
  throw ConfigError("unknown activation '" + std::string(name) +
                    "' (expected mish | relu | gelu)");
}

std::string_view activation_name(ActivationKind kind) {
  switch (kind) {
    case ActivationKind::Mish: return "mish";
    case ActivationKind::ReLU: return "relu";
    case ActivationKind::GELU: return "gelu";
  }
  throw ContractError("activation_name: unknown kind");
}

}  // namespace seqdesc
