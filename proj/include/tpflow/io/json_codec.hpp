// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "tpflow/nn/mlp.hpp"

#include <json.hpp>

namespace tpflow::io {

nlohmann::json to_json(const nn::MlpSpec& spec);
nn::MlpSpec mlp_spec_from_json(const nlohmann::json& j);

}  // namespace tpflow::io
