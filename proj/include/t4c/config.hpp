#pragma once

#include <string>
#include <utility>
#include <vector>

#include "t4c/model.hpp"
#include "t4c/train.hpp"

namespace t4c {

// "key = value" per line, '#' comments, blank lines allowed.
std::vector<std::pair<std::string, std::string>> parse_kv_file(const std::string& path);

// Applies config-file entries onto the defaults. Unknown keys are an error.
// Covered keys: model_type, levels, channels, dense_layers, growth,
// out_channels, use_static, lr, plateau_patience, plateau_factor, min_lr,
// plateau_threshold, max_steps, eval_interval, batch_size, seed.
void apply_config(const std::vector<std::pair<std::string, std::string>>& kv, ModelConfig& model,
                  TrainConfig& train);

}  // namespace t4c
