// t4cast: traffic frame forecasting with UNet variants.
//
// Subcommands: synth, train, predict, ensemble, evaluate, gradcheck.
// Exit codes: 0 success, 1 runtime/verification failure, 2 usage error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <regex>
#include <set>
#include <thread>

#include <CLI11.hpp>

#include "t4c/config.hpp"
#include "t4c/dataset.hpp"
#include "t4c/ensemble.hpp"
#include "t4c/gradsuite.hpp"
#include "t4c/parallel.hpp"
#include "t4c/tensor_io.hpp"

namespace fs = std::filesystem;

namespace {

int default_threads() {
  unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : static_cast<int>(n);
}

int cmd_synth(uint64_t seed, int n, int height, int width, const std::string& out_dir) {
  t4c::SynthDataset ds = t4c::synth_dataset(seed, n, height, width);
  t4c::write_dataset(ds, out_dir);
  std::cout << "wrote " << ds.samples.size() << " samples + static map to " << out_dir << "\n";
  return 0;
}

struct TrainArgs {
  std::string config_path, data_dir, out_dir;
  int model_type = 0;      // 0: not set on the command line
  double lr = -1.0;        // <0: not set
  bool no_static = false;
  int64_t seed = -1;       // <0: not set
};

int cmd_train(const TrainArgs& args) {
  t4c::ModelConfig mcfg;
  t4c::TrainConfig tcfg;
  if (!args.config_path.empty())
    t4c::apply_config(t4c::parse_kv_file(args.config_path), mcfg, tcfg);
  // Flags override config-file values.
  if (args.model_type > 0) mcfg.model_type = args.model_type;
  if (args.lr >= 0.0) tcfg.lr = args.lr;
  if (args.no_static) mcfg.use_static = false;
  if (args.seed >= 0) tcfg.seed = static_cast<uint64_t>(args.seed);

  t4c::LoadedDataset data = t4c::load_dataset(args.data_dir, mcfg.use_static);
  t4c::check(!data.samples.empty(), "no samples found in " + args.data_dir);
  mcfg.input_h = data.h;
  mcfg.input_w = data.w;
  mcfg.input_c = data.samples[0].input.shape()[2];

  t4c::Model model = t4c::build_model(mcfg);
  t4c::ParamStore params(model.graph, t4c::DType::f32);
  t4c::init_params(model.graph, params, tcfg.seed);

  fs::create_directories(args.out_dir);
  std::ofstream log(args.out_dir + "/train_log.tsv", std::ios::trunc);
  t4c::check(log.good(), "cannot open loss log for writing");

  t4c::TrainOptions opts;
  opts.checkpoint_dir = args.out_dir;
  opts.loss_log = &log;
  t4c::TrainResult res =
      t4c::train(model, params, std::span<const t4c::TrainSample>(data.samples), tcfg, opts);
  std::cout << "trained " << res.steps << " steps, final loss "
            << t4c::format_score(res.final_eval_loss) << ", checkpoints in " << args.out_dir
            << "\n";
  return 0;
}

int cmd_predict(const std::string& ckpt_path, const std::string& data_dir,
                const std::string& out_dir) {
  t4c::Checkpoint ckpt = t4c::load_checkpoint(ckpt_path);
  t4c::ModelConfig cfg = t4c::checkpoint_model_config(ckpt);
  t4c::LoadedDataset data = t4c::load_dataset(data_dir, cfg.use_static, /*require_targets=*/false);
  t4c::check(!data.samples.empty(), "no samples found in " + data_dir);
  t4c::check(data.h == cfg.input_h && data.w == cfg.input_w,
             "checkpoint expects " + std::to_string(cfg.input_h) + "x" +
                 std::to_string(cfg.input_w) + " input but data is " + std::to_string(data.h) +
                 "x" + std::to_string(data.w));
  t4c::Model model = t4c::build_model(cfg);
  t4c::ParamStore params(model.graph, t4c::DType::f32);
  t4c::load_params(ckpt, model.graph, params);

  fs::create_directories(out_dir);
  for (size_t i = 0; i < data.samples.size(); ++i) {
    t4c::Bindings b;
    b.emplace(model.input_node, data.samples[i].input);
    t4c::Activations acts = t4c::forward(model.graph, params, b, model.output_node);
    t4c::Tensor pred = t4c::reshape_output(acts[model.output_node]);
    t4c::write_tensor(pred, out_dir + "/" + std::to_string(i) + "_pred.t4ct");
    t4c::write_tensor(t4c::quantize_output(pred),
                      out_dir + "/" + std::to_string(i) + "_pred_u8.t4ct");
  }
  std::cout << "wrote " << data.samples.size() << " predictions to " << out_dir << "\n";
  return 0;
}

int cmd_ensemble(const std::vector<std::string>& checkpoints, const std::string& method,
                 const std::string& data_dir, const std::string& out_dir,
                 const std::string& truth_dir) {
  t4c::EnsembleOptions opts;
  opts.method = t4c::parse_combine_method(method);
  opts.data_dir = data_dir;
  opts.out_dir = out_dir;
  if (!truth_dir.empty()) opts.truth_dir = truth_dir;
  t4c::EnsembleReport report =
      t4c::ensemble_run(std::span<const std::string>(checkpoints), opts);
  std::string text = t4c::report_text(report);
  std::cout << text;
  if (!out_dir.empty()) {
    std::ofstream rf(out_dir + "/scores.tsv", std::ios::trunc);
    rf << text;
  }
  return 0;
}

std::set<int> dir_indices(const std::string& dir, const std::string& suffix) {
  t4c::check(fs::is_directory(dir), "not a directory: " + dir);
  std::set<int> found;
  std::regex pat("^([0-9]+)" + suffix + "$");
  for (const auto& entry : fs::directory_iterator(dir)) {
    std::smatch m;
    std::string name = entry.path().filename().string();
    if (std::regex_match(name, m, pat)) found.insert(std::stoi(m[1]));
  }
  return found;
}

int cmd_evaluate(const std::string& pred_dir, const std::string& truth_dir) {
  std::set<int> preds = dir_indices(pred_dir, "_pred\\.t4ct");
  std::set<int> truths = dir_indices(truth_dir, "_target\\.t4ct");
  if (preds != truths) {
    std::string missing;
    for (int i : truths)
      if (!preds.count(i)) missing += " pred:" + std::to_string(i);
    for (int i : preds)
      if (!truths.count(i)) missing += " truth:" + std::to_string(i);
    t4c::fail("prediction/truth index mismatch; missing:" + missing);
  }
  t4c::check(!preds.empty(), "no predictions found in " + pred_dir);

  double total = 0.0;
  for (int i : preds) {
    t4c::Tensor pred = t4c::read_tensor(pred_dir + "/" + std::to_string(i) + "_pred.t4ct");
    t4c::Tensor truth_u8 = t4c::read_tensor(truth_dir + "/" + std::to_string(i) + "_target.t4ct");
    t4c::Tensor truth(truth_u8.shape(), t4c::DType::f32);
    auto src = truth_u8.u8();
    auto dst = truth.f32();
    for (int64_t k = 0; k < truth_u8.count(); ++k) dst[k] = src[k] * (1.0f / 255.0f);
    total += t4c::evaluate(pred, truth);
  }
  std::cout << t4c::format_score(total / static_cast<double>(preds.size())) << "\n";
  return 0;
}

int cmd_gradcheck(const std::string& op, uint64_t seed, double eps) {
  std::vector<t4c::GradCase> results = t4c::run_grad_suite(op, seed, eps);
  bool ok = true;
  for (const auto& r : results) {
    bool pass = r.max_rel_err < 1e-4;
    ok = ok && pass;
    std::printf("%-16s %.3e %s\n", r.op.c_str(), r.max_rel_err, pass ? "ok" : "FAIL");
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"t4cast: UNet traffic frame forecasting"};
  app.require_subcommand(1);

  int threads = default_threads();
  app.add_option("--threads", threads, "worker threads for layer kernels")
      ->check(CLI::Range(1, 1024));

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  uint64_t synth_seed = 1;
  int synth_n = 4, synth_h = 31, synth_w = 28;
  std::string synth_out;
  synth->add_option("--seed", synth_seed, "RNG seed");
  synth->add_option("--n", synth_n, "number of samples")->check(CLI::NonNegativeNumber);
  synth->add_option("--height", synth_h, "frame height")->check(CLI::Range(7, 4096));
  synth->add_option("--width", synth_w, "frame width")->check(CLI::Range(7, 4096));
  synth->add_option("--out-dir", synth_out, "output directory")->required();

  // train
  auto* train = app.add_subcommand("train", "train one model");
  TrainArgs targs;
  train->add_option("--config", targs.config_path, "key = value config file")
      ->check(CLI::ExistingFile);
  train->add_option("--data-dir", targs.data_dir, "dataset directory")->required();
  train->add_option("--out-dir", targs.out_dir, "checkpoint/log directory")->required();
  train->add_option("--model-type", targs.model_type, "1, 2 or 3")->check(CLI::Range(1, 3));
  train->add_option("--lr", targs.lr, "initial learning rate")->check(CLI::PositiveNumber);
  train->add_flag("--no-static", targs.no_static, "drop the 7 static input channels");
  train->add_option("--seed", targs.seed, "RNG seed")->check(CLI::NonNegativeNumber);

  // predict
  auto* predict = app.add_subcommand("predict", "run one checkpoint over a dataset");
  std::string pr_ckpt, pr_data, pr_out;
  predict->add_option("--checkpoint", pr_ckpt, "checkpoint file")->required();
  predict->add_option("--data-dir", pr_data, "dataset directory")->required();
  predict->add_option("--out-dir", pr_out, "prediction directory")->required();

  // ensemble
  auto* ensemble = app.add_subcommand("ensemble", "combine several checkpoints");
  std::vector<std::string> en_ckpts;
  std::string en_method = "mean", en_data, en_out, en_truth;
  ensemble->add_option("--checkpoints", en_ckpts, "comma-separated checkpoint list")
      ->required()
      ->delimiter(',');
  ensemble->add_option("--method", en_method, "mean or median")
      ->check(CLI::IsMember({"mean", "median"}));
  ensemble->add_option("--data-dir", en_data, "dataset directory")->required();
  ensemble->add_option("--out-dir", en_out, "merged prediction directory")->required();
  ensemble->add_option("--truth-dir", en_truth, "truth directory (defaults to data-dir)");

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "score predictions against truth");
  std::string ev_pred, ev_truth;
  evaluate->add_option("--pred-dir", ev_pred, "prediction directory")->required();
  evaluate->add_option("--truth-dir", ev_truth, "truth directory")->required();

  // gradcheck
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient suite");
  std::string gc_op = "all";
  uint64_t gc_seed = 1;
  double gc_eps = 1e-6;
  std::vector<std::string> gc_ops = t4c::grad_suite_ops();
  gc_ops.push_back("all");
  gradcheck->add_option("--op", gc_op, "op name or 'all'")->check(CLI::IsMember(gc_ops));
  gradcheck->add_option("--seed", gc_seed, "RNG seed");
  gradcheck->add_option("--eps", gc_eps, "central difference step")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }

  t4c::set_thread_count(threads);

  try {
    if (*synth) return cmd_synth(synth_seed, synth_n, synth_h, synth_w, synth_out);
    if (*train) return cmd_train(targs);
    if (*predict) return cmd_predict(pr_ckpt, pr_data, pr_out);
    if (*ensemble) return cmd_ensemble(en_ckpts, en_method, en_data, en_out, en_truth);
    if (*evaluate) return cmd_evaluate(ev_pred, ev_truth);
    if (*gradcheck) return cmd_gradcheck(gc_op, gc_seed, gc_eps);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
