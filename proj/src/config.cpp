#include "t4c/config.hpp"

#include <fstream>

namespace t4c {

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

int to_int(const std::string& key, const std::string& v) {
  size_t used = 0;
  int out = 0;
  try {
    out = std::stoi(v, &used);
  } catch (const std::exception&) {
    fail("config key '" + key + "': bad integer '" + v + "'");
  }
  check(used == v.size(), "config key '" + key + "': bad integer '" + v + "'");
  return out;
}

int64_t to_int64(const std::string& key, const std::string& v) {
  size_t used = 0;
  int64_t out = 0;
  try {
    out = std::stoll(v, &used);
  } catch (const std::exception&) {
    fail("config key '" + key + "': bad integer '" + v + "'");
  }
  check(used == v.size(), "config key '" + key + "': bad integer '" + v + "'");
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  size_t used = 0;
  double out = 0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    fail("config key '" + key + "': bad number '" + v + "'");
  }
  check(used == v.size(), "config key '" + key + "': bad number '" + v + "'");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  fail("config key '" + key + "': bad boolean '" + v + "'");
}

std::vector<int> to_int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  size_t pos = 0;
  while (pos <= v.size()) {
    size_t comma = v.find(',', pos);
    std::string tok =
        trim(v.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos));
    out.push_back(to_int(key, tok));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

}  // namespace

std::vector<std::pair<std::string, std::string>> parse_kv_file(const std::string& path) {
  std::ifstream is(path);
  check(is.good(), "cannot open config file: " + path);
  std::vector<std::pair<std::string, std::string>> kv;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::string t = trim(line);
    if (t.empty()) continue;
    size_t eq = t.find('=');
    check(eq != std::string::npos,
          path + ":" + std::to_string(lineno) + ": expected 'key = value'");
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    check(!key.empty(), path + ":" + std::to_string(lineno) + ": empty key");
    kv.emplace_back(std::move(key), std::move(value));
  }
  return kv;
}

void apply_config(const std::vector<std::pair<std::string, std::string>>& kv, ModelConfig& model,
                  TrainConfig& train) {
  bool channels_set = false;
  for (const auto& [key, value] : kv) {
    if (key == "model_type") model.model_type = to_int(key, value);
    else if (key == "levels") model.levels = to_int(key, value);
    else if (key == "channels") { model.channels = to_int_list(key, value); channels_set = true; }
    else if (key == "dense_layers") model.dense_layers = to_int(key, value);
    else if (key == "growth") model.growth = to_int(key, value);
    else if (key == "out_channels") model.out_channels = to_int(key, value);
    else if (key == "use_static") model.use_static = to_bool(key, value);
    else if (key == "lr") train.lr = to_double(key, value);
    else if (key == "plateau_patience") train.plateau_patience = to_int(key, value);
    else if (key == "plateau_factor") train.plateau_factor = to_double(key, value);
    else if (key == "min_lr") train.min_lr = to_double(key, value);
    else if (key == "plateau_threshold") train.plateau_threshold = to_double(key, value);
    else if (key == "max_steps") train.max_steps = to_int64(key, value);
    else if (key == "eval_interval") train.eval_interval = to_int64(key, value);
    else if (key == "batch_size") train.batch_size = to_int(key, value);
    else if (key == "seed") train.seed = static_cast<uint64_t>(to_int64(key, value));
    else fail("unknown config key '" + key + "'");
  }
  // A levels override without an explicit schedule keeps the plateau shape.
  if (!channels_set && model.levels != static_cast<int>(model.channels.size())) {
    fail("config sets levels=" + std::to_string(model.levels) +
         " but no matching 'channels' list");
  }
}

}  // namespace t4c
