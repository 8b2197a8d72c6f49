#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "t4c/model.hpp"

namespace t4c {

// Mean over all elements of (pred - target)^2; f64 accumulation.
float mse(const Tensor& pred, const Tensor& target);

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// First/second moment estimates per parameter slot; t counts completed steps.
struct AdamState {
  explicit AdamState(const ParamStore& params);
  std::vector<Tensor> m, v;
  int64_t t = 0;
};

// m <- b1*m + (1-b1)*g;  v <- b2*v + (1-b2)*g^2;  p <- p - lr*m^/(sqrt(v^)+eps)
// with bias-corrected m^ = m/(1-b1^t), v^ = v/(1-b2^t).
void adam_step(ParamStore& params, AdamState& state, const AdamConfig& cfg);

// Multiplies lr by factor once the best loss has not improved by at least
// rel_threshold (relative) for patience consecutive observations.
class PlateauScheduler {
 public:
  PlateauScheduler(double lr, int patience, double factor, double min_lr, double rel_threshold)
      : lr_(lr), patience_(patience), factor_(factor), min_lr_(min_lr),
        rel_threshold_(rel_threshold) {
    check(patience >= 1, "plateau patience must be >= 1");
    check(factor > 0.0 && factor < 1.0, "plateau factor must be in (0,1)");
  }

  double observe(double loss);
  double lr() const { return lr_; }

 private:
  double lr_;
  int patience_;
  double factor_, min_lr_, rel_threshold_;
  std::optional<double> best_;
  int bad_ = 0;
};

struct TrainConfig {
  double lr = 3e-4;
  int plateau_patience = 10;
  double plateau_factor = 0.5;
  double min_lr = 1e-6;
  double plateau_threshold = 1e-3;  // relative improvement that resets patience
  int64_t max_steps = 2000;
  int64_t eval_interval = 500;
  int batch_size = 1;
  uint64_t seed = 1;

  void validate() const;
};

// Named-parameter archive, bit-exact on disk (format T4CK v1).
struct Checkpoint {
  std::vector<std::pair<std::string, std::string>> metadata;  // key=value lines
  std::vector<std::pair<std::string, Tensor>> tensors;

  std::optional<std::string> find(const std::string& key) const;
};

void save_checkpoint(const Checkpoint& c, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

Checkpoint make_checkpoint(const Graph& g, const ParamStore& params, const ModelConfig& cfg,
                           int64_t step, double lr, std::span<const double> loss_tail);
ModelConfig checkpoint_model_config(const Checkpoint& c);
// Fills store values by parameter name; every graph slot must be present.
void load_params(const Checkpoint& c, const Graph& g, ParamStore& store);

struct TrainSample {
  Tensor input;   // (H, W, C) f32
  Tensor target;  // (H, W, out_channels) f32
};

struct TrainOptions {
  std::string checkpoint_dir;    // empty: keep checkpoints in memory only
  std::ostream* loss_log = nullptr;  // "step\tloss\tlr" per step
};

struct TrainResult {
  int64_t steps = 0;
  double final_eval_loss = 0.0;
  std::vector<std::string> checkpoint_paths;
};

// Deterministic for a fixed seed and thread count. Samples are visited in
// round-robin order; a full-dataset evaluation runs every eval_interval
// steps (and at the end), feeding the plateau scheduler and emitting a
// checkpoint.
TrainResult train(const Model& model, ParamStore& params, std::span<const TrainSample> data,
                  const TrainConfig& cfg, const TrainOptions& opts = {});

}  // namespace t4c
