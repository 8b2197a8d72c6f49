#include "t4c/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>

#include "t4c/dataset.hpp"
#include "t4c/tensor_io.hpp"
#include "t4c/train.hpp"

namespace t4c {

CombineMethod parse_combine_method(const std::string& s) {
  if (s == "mean") return CombineMethod::mean;
  if (s == "median") return CombineMethod::median;
  fail("unknown combine method '" + s + "' (expected mean or median)");
}

Tensor combine(std::span<const Tensor> preds, CombineMethod method) {
  check(!preds.empty(), "combine needs at least one prediction");
  const Shape& shape = preds[0].shape();
  for (const Tensor& p : preds) {
    check(p.dtype() == DType::f32, "combine expects f32 predictions");
    check(p.shape() == shape,
          "prediction shape mismatch: " + p.shape().str() + " vs " + shape.str());
  }
  const size_t k = preds.size();
  Tensor out(shape, DType::f32);
  auto dst = out.f32();
  if (method == CombineMethod::mean) {
    const double inv = 1.0 / static_cast<double>(k);
    for (int64_t i = 0; i < out.count(); ++i) {
      double s = 0.0;
      for (size_t m = 0; m < k; ++m) s += preds[m].f32()[i];
      dst[i] = static_cast<float>(s * inv);
    }
  } else {
    std::vector<float> vals(k);
    for (int64_t i = 0; i < out.count(); ++i) {
      for (size_t m = 0; m < k; ++m) vals[m] = preds[m].f32()[i];
      std::sort(vals.begin(), vals.end());
      dst[i] = (k % 2) ? vals[k / 2] : 0.5f * (vals[k / 2 - 1] + vals[k / 2]);
    }
  }
  return out;
}

Tensor combine(const PredictionSet& ps, CombineMethod method) {
  return combine(std::span<const Tensor>(ps.preds), method);
}

double evaluate(const Tensor& pred, const Tensor& truth) {
  check(pred.dtype() != DType::u8 && truth.dtype() != DType::u8,
        "evaluate expects float tensors");
  check(pred.shape() == truth.shape(),
        "evaluate shape mismatch: " + pred.shape().str() + " vs " + truth.shape().str());
  double acc = 0.0;
  const int64_t n = pred.count();
  for (int64_t i = 0; i < n; ++i) {
    double p = pred.dtype() == DType::f32 ? pred.f32()[i] : pred.f64()[i];
    double t = truth.dtype() == DType::f32 ? truth.f32()[i] : truth.f64()[i];
    acc += (p - t) * (p - t);
  }
  return acc / static_cast<double>(n);
}

std::string format_score(double v) {
  if (v == 0.0) return "0.0000000e0";
  int exp = static_cast<int>(std::floor(std::log10(std::fabs(v))));
  double mant = v / std::pow(10.0, exp);
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.7f", mant);
  // Rounding can push the mantissa to 10.0000000.
  if (std::fabs(std::strtod(buf, nullptr)) >= 10.0) {
    exp += 1;
    mant = v / std::pow(10.0, exp);
    std::snprintf(buf, sizeof buf, "%.7f", mant);
  }
  char out[64];
  std::snprintf(out, sizeof out, "%se%d", buf, exp);
  return out;
}

EnsembleReport ensemble_run(std::span<const std::string> checkpoint_paths,
                            const EnsembleOptions& opts) {
  check(!checkpoint_paths.empty(), "ensemble needs at least one checkpoint");

  // Predictions from the first model define the expected shapes.
  std::vector<std::vector<Tensor>> preds;  // [model][sample] (6,H,W,8) f32
  std::vector<std::string> labels;
  std::optional<ModelConfig> first_cfg;

  // Per-model truth for scoring comes from the truth (or data) directory.
  const std::string truth_dir = opts.truth_dir.value_or(opts.data_dir);

  for (const std::string& path : checkpoint_paths) {
    Checkpoint ckpt = load_checkpoint(path);
    ModelConfig cfg = checkpoint_model_config(ckpt);
    if (first_cfg) {
      check(cfg.input_h == first_cfg->input_h && cfg.input_w == first_cfg->input_w &&
                cfg.out_channels == first_cfg->out_channels,
            path + ": output shape is incompatible with the first checkpoint");
    } else {
      first_cfg = cfg;
    }
    Model model = build_model(cfg);
    ParamStore params(model.graph, DType::f32);
    load_params(ckpt, model.graph, params);

    LoadedDataset data = load_dataset(opts.data_dir, cfg.use_static, /*require_targets=*/false);
    check(!data.samples.empty(), "no samples found in " + opts.data_dir);
    check(data.h == cfg.input_h && data.w == cfg.input_w,
          path + ": checkpoint expects input " + std::to_string(cfg.input_h) + "x" +
              std::to_string(cfg.input_w) + " but data is " + std::to_string(data.h) + "x" +
              std::to_string(data.w));

    std::vector<Tensor> model_preds;
    for (const TrainSample& s : data.samples) {
      Bindings b;
      b.emplace(model.input_node, s.input);
      Activations acts = forward(model.graph, params, b, model.output_node);
      model_preds.push_back(reshape_output(acts[model.output_node]));
    }
    preds.push_back(std::move(model_preds));
    labels.push_back(path);
  }

  const size_t n_samples = preds[0].size();
  for (const auto& mp : preds)
    check(mp.size() == n_samples, "sample count changed between models");

  // Truth tensors for scoring (normalized f32). Without any targets the run
  // still produces merged predictions, just no scores.
  std::vector<Tensor> truths;
  bool score = opts.score;
  if (score) {
    LoadedDataset truth = load_dataset(truth_dir, false, /*require_targets=*/false);
    if (truth.raw_targets.empty() && !opts.truth_dir) {
      score = false;
    } else {
      check(truth.raw_targets.size() == n_samples,
            "truth sample count " + std::to_string(truth.raw_targets.size()) +
                " != prediction count " + std::to_string(n_samples));
    }
    for (const Tensor& t : truth.raw_targets) {
      Tensor f(t.shape(), DType::f32);
      auto src = t.u8();
      auto dst = f.f32();
      for (int64_t i = 0; i < t.count(); ++i) dst[i] = src[i] * (1.0f / 255.0f);
      truths.push_back(std::move(f));
    }
  }

  EnsembleReport report;
  report.n_samples = static_cast<int>(n_samples);

  std::vector<double> model_sums(preds.size(), 0.0);
  double merged_sum = 0.0;

  if (!opts.out_dir.empty()) std::filesystem::create_directories(opts.out_dir);

  std::vector<Tensor> at_sample(preds.size());
  for (size_t i = 0; i < n_samples; ++i) {
    for (size_t m = 0; m < preds.size(); ++m) at_sample[m] = preds[m][i];
    Tensor merged = combine(std::span<const Tensor>(at_sample), opts.method);
    if (!opts.out_dir.empty()) {
      write_tensor(merged, opts.out_dir + "/" + std::to_string(i) + "_pred.t4ct");
      write_tensor(quantize_output(merged), opts.out_dir + "/" + std::to_string(i) + "_pred_u8.t4ct");
    }
    if (score) {
      for (size_t m = 0; m < preds.size(); ++m)
        model_sums[m] += evaluate(preds[m][i], truths[i]);
      merged_sum += evaluate(merged, truths[i]);
    }
  }

  if (score) {
    for (size_t m = 0; m < preds.size(); ++m)
      report.per_model.push_back({labels[m], model_sums[m] / static_cast<double>(n_samples)});
    report.merged_mse = merged_sum / static_cast<double>(n_samples);
  }
  return report;
}

std::string report_text(const EnsembleReport& report) {
  std::string out;
  for (const auto& line : report.per_model)
    out += line.label + "\t" + format_score(line.mse) + "\n";
  if (report.merged_mse) out += "MERGED\t" + format_score(*report.merged_mse) + "\n";
  return out;
}

}  // namespace t4c
