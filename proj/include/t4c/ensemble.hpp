#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "t4c/tensor.hpp"

namespace t4c {

enum class CombineMethod { mean, median };

// Throws on anything but "mean"/"median".
CombineMethod parse_combine_method(const std::string& s);

// Predictions from k >= 1 models over the same sample; identical shapes.
struct PredictionSet {
  std::vector<Tensor> preds;
  std::vector<std::string> labels;
};

// Elementwise mean or median; an even count takes the midpoint of the two
// middle values.
Tensor combine(const PredictionSet& ps, CombineMethod method);
Tensor combine(std::span<const Tensor> preds, CombineMethod method);

// Mean squared error accumulated in f64.
double evaluate(const Tensor& pred, const Tensor& truth);

// Scientific notation with 8 significant digits and an unpadded exponent:
// 1.1628615e-3, 0.0000000e0.
std::string format_score(double v);

struct ScoreLine {
  std::string label;
  double mse = 0.0;
};

struct EnsembleReport {
  std::vector<ScoreLine> per_model;
  std::optional<double> merged_mse;
  int n_samples = 0;
};

struct EnsembleOptions {
  CombineMethod method = CombineMethod::mean;
  std::string data_dir;
  std::string out_dir;                  // merged predictions land here
  std::optional<std::string> truth_dir; // defaults to data_dir targets
  bool score = true;
};

// Loads every checkpoint, runs each model over the dataset, combines
// per-sample predictions, writes them as T4CT files and scores each model
// and the merged output against the truth.
EnsembleReport ensemble_run(std::span<const std::string> checkpoint_paths,
                            const EnsembleOptions& opts);

// "label<TAB>mse" per model plus a final "MERGED<TAB>mse" line.
std::string report_text(const EnsembleReport& report);

}  // namespace t4c
