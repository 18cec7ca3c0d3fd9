#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <map>
#include <memory>
#include <ostream>

#include "dkrg/checkpoint.hpp"
#include "dkrg/deep_kriging.hpp"
#include "dkrg/gradcheck_suite.hpp"
#include "dkrg/image_io.hpp"
#include "dkrg/local_kriging.hpp"
#include "dkrg/methods.hpp"
#include "dkrg/metrics.hpp"
#include "dkrg/parallel.hpp"
#include "dkrg/resample.hpp"
#include "dkrg/training.hpp"
#include "dkrg/uncertainty.hpp"
#include "run_config.hpp"

namespace dkrg::cli {

namespace {

namespace fs = std::filesystem;

// Config keys bound to the options of one subcommand.
using Bindings = std::map<std::string, CLI::Option*>;

struct DegradeArgs {
  std::string in;
  std::string out;
  std::string hr_out;
  int scale = 0;
};

struct KrigeArgs {
  int window = LocalKrigingOptions{}.window;
  int window_stride = LocalKrigingOptions{}.stride;
  int max_lag = LocalKrigingOptions{}.max_lag;

  LocalKrigingOptions options() const {
    LocalKrigingOptions o;
    o.window = window;
    o.stride = window_stride;
    o.max_lag = max_lag;
    return o;
  }
};

struct SrArgs {
  std::string in;
  std::string out;
  std::string method = "bicubic";
  std::string checkpoint;
  std::string variance_out;
  int scale = 0;
  KrigeArgs krige;
};

struct TrainArgs {
  std::string data;
  std::string out;
  std::string log;
  std::string checkpoint;
  TrainConfig train;
  NetworkConfig network;
};

struct EvalArgs {
  std::string hr_dir;
  std::string method = "bicubic";
  std::string out_csv;
  std::string checkpoint;
  std::string uncertainty_csv;
  int scale = 0;
  KrigeArgs krige;
};

struct GradcheckArgs {
  std::uint64_t seed = 0;
};

void require_scale(int scale) {
  if (scale < 1) throw UsageError("--scale must be a positive integer");
}

void require_value(const std::string& value, const char* flag) {
  if (value.empty()) throw UsageError(std::string(flag) + " is required");
}

void add_krige_options(CLI::App* sub, KrigeArgs& k, Bindings& b) {
  b["window"] = sub->add_option("--window", k.window, "Local kriging window (HR pixels)");
  b["window_stride"] =
      sub->add_option("--window-stride", k.window_stride, "Local kriging window stride");
  b["max_lag"] = sub->add_option("--max-lag", k.max_lag, "Covariance fit lag (LR pixels)");
}

std::shared_ptr<const NetworkParams<float>> load_params(const std::string& path) {
  if (path.empty()) throw UsageError("--checkpoint is required for method 'deep'");
  return std::make_shared<const NetworkParams<float>>(load_checkpoint(path).params);
}

// Super-resolves the luma of an LR image; colour inputs get bicubic chroma.
Image sr_luma(const SrArgs& a, const Image& lr, const NetworkParams<float>* params,
              SuperResolution* deep_out) {
  if (a.method == "bicubic") return bicubic_resize(lr, a.scale);
  if (a.method == "krige") return local_krige_sr(lr, a.scale, a.krige.options());
  *deep_out = super_resolve(bicubic_resize(lr, a.scale), *params);
  return deep_out->sr;
}

int cmd_degrade(const DegradeArgs& a, std::ostream& out) {
  require_value(a.in, "input");
  require_value(a.out, "output");
  require_scale(a.scale);
  const ColorImage hr = modcrop(read_image(a.in), a.scale);
  std::vector<Image> planes;
  for (int c = 0; c < hr.channels; ++c) planes.push_back(degrade(hr.channel(c), a.scale));
  write_image(ColorImage::from_channels(planes), a.out);

  fs::path hr_out = a.hr_out;
  if (hr_out.empty()) {
    const fs::path o = a.out;
    hr_out = o.parent_path() / (o.stem().string() + "_hr" + o.extension().string());
  }
  write_image(hr, hr_out);
  out << "lr_upsampled: " << a.out << "\nhr: " << hr_out.string() << '\n';
  return kExitOk;
}

int cmd_sr(const SrArgs& a, std::ostream& out) {
  require_value(a.in, "input");
  require_value(a.out, "output");
  require_scale(a.scale);
  if (a.method != "bicubic" && a.method != "krige" && a.method != "deep") {
    throw UsageError("--method must be bicubic, krige or deep");
  }
  if (!a.variance_out.empty() && a.method != "deep") {
    throw UsageError("--variance-out requires --method deep");
  }
  std::shared_ptr<const NetworkParams<float>> params;
  if (a.method == "deep") params = load_params(a.checkpoint);

  const ColorImage lr = read_image(a.in);
  SuperResolution deep;
  ColorImage result;
  Image lr_y;
  if (lr.channels == 3) {
    const YCbCrImage ycc = rgb_to_ycbcr(lr);
    lr_y = ycc.y;
    YCbCrImage up;
    up.y = sr_luma(a, ycc.y, params.get(), &deep);
    up.cb = bicubic_resize(ycc.cb, a.scale);
    up.cr = bicubic_resize(ycc.cr, a.scale);
    result = ycbcr_to_rgb(up);
  } else {
    lr_y = lr.channel(0);
    const Image y = sr_luma(a, lr_y, params.get(), &deep);
    result = ColorImage::from_channels(std::span<const Image>(&y, 1));
  }
  write_image(result, a.out);
  out << "sr: " << a.out << '\n';

  if (!a.variance_out.empty()) {
    const Image lr_up = bicubic_resize(lr_y, a.scale);
    const VarianceMap v = variance_map(deep.weights, fit_variance_model(lr_up));
    render_heatmap(v, a.variance_out);
    out << "variance: " << a.variance_out << " (range in " << a.variance_out << ".txt)\n";
  }
  return kExitOk;
}

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  require_value(a.data, "--data");
  require_value(a.out, "--out");
  a.train.validate();
  NetworkConfig net = a.network;
  net.dropout = a.train.dropout;
  net.validate();

  if (!fs::is_directory(a.data)) throw UsageError("not a directory: " + a.data);
  if (list_images(a.data).empty()) throw UsageError("no images in " + a.data);
  const TrainingSet data = build_training_set(a.data, a.train);
  err << "training set: " << data.size() << " patches from " << data.variant_count()
      << " variants\n";

  Checkpoint start;
  if (!a.checkpoint.empty()) {
    start = load_checkpoint(a.checkpoint);
  } else {
    start = initial_checkpoint(net, a.train.seed, static_cast<float>(a.train.learning_rate));
  }

  const fs::path log_path = a.log.empty() ? fs::path(a.out + ".log.csv") : fs::path(a.log);
  std::ofstream log(log_path);
  if (!log) throw UsageError("cannot write log " + log_path.string());

  TrainOutputs outputs;
  outputs.checkpoint_path = a.out;
  outputs.log = &log;
  outputs.record_time = !strict_mode();
  const auto t0 = std::chrono::steady_clock::now();
  const TrainResult result = train(a.train, data, std::move(start), outputs);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  err << "wall time: " << seconds << " s\n";

  if (result.log.empty()) {
    out << "final loss: n/a (0 iterations)\n";
  } else {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", result.log.back().loss);
    out << "final loss: " << buf << " (iteration " << result.log.back().iteration << ")\n";
  }
  out << "checkpoint: " << a.out << "\nlog: " << log_path.string() << '\n';
  if (result.aborted) {
    err << "training aborted: " << result.abort_reason << "; last good state saved\n";
    return kExitInternal;
  }
  return kExitOk;
}

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  require_value(a.hr_dir, "--hr-dir");
  require_scale(a.scale);
  SrMethod method;
  std::shared_ptr<const NetworkParams<float>> params;
  if (a.method == "bicubic") {
    method = bicubic_method();
  } else if (a.method == "krige") {
    method = local_kriging_method(a.krige.options());
  } else if (a.method == "deep") {
    params = load_params(a.checkpoint);
    method = deep_kriging_method(params);
  } else if (a.method == "oracle") {
    method = identity_oracle_method();
  } else {
    throw UsageError("--method must be bicubic, krige, deep or oracle");
  }
  if (!a.uncertainty_csv.empty() && a.method != "deep") {
    throw UsageError("--uncertainty-csv requires --method deep");
  }
  if (!fs::is_directory(a.hr_dir)) throw UsageError("not a directory: " + a.hr_dir);
  if (list_images(a.hr_dir).empty()) throw UsageError("no images in " + a.hr_dir);

  const EvalSummary summary = evaluate_set(a.hr_dir, a.method, method, a.scale);
  if (!a.out_csv.empty()) {
    std::ofstream csv(a.out_csv);
    if (!csv) throw UsageError("cannot write " + a.out_csv);
    write_eval_csv(csv, summary);
  } else {
    write_eval_csv(out, summary);
  }
  char buf[128];
  std::snprintf(buf, sizeof buf, "mean psnr %.4f dB, ssim %.4f over %zu images\n",
                summary.mean_psnr, summary.mean_ssim, summary.records.size());
  out << buf;

  if (!a.uncertainty_csv.empty()) {
    std::ofstream csv(a.uncertainty_csv);
    if (!csv) throw UsageError("cannot write " + a.uncertainty_csv);
    write_uncertainty_csv(csv, evaluate_uncertainty(a.hr_dir, *params, a.scale));
  }
  return kExitOk;
}

int cmd_gradcheck(const GradcheckArgs& a, std::ostream& out) {
  const auto results = run_gradcheck_suite(a.seed);
  print_gradcheck_report(out, results);
  const bool ok = std::all_of(results.begin(), results.end(),
                              [](const nn::GradCheckResult& r) { return r.passed; });
  out << (ok ? "all gradient checks passed\n" : "GRADIENT CHECK FAILED\n");
  return ok ? kExitOk : kExitInternal;
}

// Finds `--config PATH` / `--config=PATH` before CLI11 runs, so file values
// can be installed as defaults that explicit flags then override.
std::string find_config(const std::vector<std::string>& args) {
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) return args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) return args[i].substr(9);
  }
  return {};
}

void apply_config(const RunConfig& cfg, const Bindings& bindings) {
  for (const auto& [key, value] : cfg.values()) {
    const auto it = bindings.find(key);
    if (it == bindings.end()) continue;  // known key used by another command
    try {
      it->second->default_val(value);
    } catch (const CLI::Error& e) {
      throw UsageError("config key '" + key + "': " + e.what());
    }
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Supervised kriging super-resolution", "dkrg"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "dkrg 0.1.0");

  int threads = -1;
  std::string config_path;
  Bindings global;
  global["threads"] = app.add_option("--threads", threads,
                                     "Worker threads (0 = strict single-threaded); "
                                     "default from DKRG_THREADS");
  app.add_option("--config", config_path, "key = value configuration file");

  std::map<std::string, Bindings> bindings;

  DegradeArgs degrade_args;
  auto* degrade = app.add_subcommand("degrade", "Write the bicubic-degraded image and its HR reference");
  degrade->add_option("input", degrade_args.in, "HR image")->required();
  degrade->add_option("output", degrade_args.out, "LR-upsampled output image")->required();
  degrade->add_option("--hr-out", degrade_args.hr_out, "Modcropped HR output (default <output>_hr)");
  bindings["degrade"]["scale"] = degrade->add_option("--scale", degrade_args.scale, "Scale factor");

  SrArgs sr_args;
  auto* sr = app.add_subcommand("sr", "Super-resolve an LR image");
  sr->add_option("input", sr_args.in, "LR image")->required();
  sr->add_option("output", sr_args.out, "SR output image")->required();
  auto& srb = bindings["sr"];
  srb["method"] = sr->add_option("--method", sr_args.method, "bicubic | krige | deep");
  srb["scale"] = sr->add_option("--scale", sr_args.scale, "Scale factor");
  srb["checkpoint"] = sr->add_option("--checkpoint", sr_args.checkpoint, "Model for --method deep");
  sr->add_option("--variance-out", sr_args.variance_out, "Variance heatmap (PGM) for --method deep");
  add_krige_options(sr, sr_args.krige, srb);

  TrainArgs train_args;
  auto* tr = app.add_subcommand("train", "Train the weight network");
  auto& trb = bindings["train"];
  TrainConfig& tc = train_args.train;
  NetworkConfig& nc = train_args.network;
  trb["data"] = tr->add_option("--data", train_args.data, "Directory of training images");
  trb["out"] = tr->add_option("--out", train_args.out, "Checkpoint path");
  trb["log"] = tr->add_option("--log", train_args.log, "Training log CSV (default <out>.log.csv)");
  trb["checkpoint"] =
      tr->add_option("--checkpoint", train_args.checkpoint, "Resume from this checkpoint");
  trb["iterations"] = tr->add_option("--iterations", tc.iterations, "Adam steps");
  trb["seed"] = tr->add_option("--seed", tc.seed, "Seed for initialization and sampling");
  trb["batch_size"] = tr->add_option("--batch-size", tc.batch_size);
  trb["learning_rate"] = tr->add_option("--learning-rate", tc.learning_rate);
  trb["dropout"] = tr->add_option("--dropout", tc.dropout);
  trb["clip_norm"] = tr->add_option("--clip-norm", tc.clip_norm);
  trb["checkpoint_every"] = tr->add_option("--checkpoint-every", tc.checkpoint_every);
  trb["scales"] = tr->add_option("--scales", tc.scales)->delimiter(',');
  trb["patch"] = tr->add_option("--patch", tc.patch);
  trb["stride"] = tr->add_option("--stride", tc.stride);
  trb["radius"] = tr->add_option("--radius", nc.radius, "Filter radius K");
  trb["feature_depth"] = tr->add_option("--feature-depth", nc.feature_depth);
  trb["residual_units"] = tr->add_option("--residual-units", nc.residual_units);

  EvalArgs eval_args;
  auto* ev = app.add_subcommand("eval", "Score a method on a directory of HR images");
  auto& evb = bindings["eval"];
  evb["hr_dir"] = ev->add_option("--hr-dir", eval_args.hr_dir, "Directory of HR images");
  evb["method"] = ev->add_option("--method", eval_args.method, "bicubic | krige | deep | oracle");
  evb["scale"] = ev->add_option("--scale", eval_args.scale, "Scale factor");
  evb["out_csv"] = ev->add_option("--out-csv", eval_args.out_csv, "CSV output (default stdout)");
  evb["checkpoint"] = ev->add_option("--checkpoint", eval_args.checkpoint, "Model for --method deep");
  ev->add_option("--uncertainty-csv", eval_args.uncertainty_csv,
                 "Per-image coverage/correlation CSV for --method deep");
  add_krige_options(ev, eval_args.krige, evb);

  GradcheckArgs gc_args;
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of every op");
  bindings["gradcheck"]["seed"] = gc->add_option("--seed", gc_args.seed);

  try {
    const std::string early_config = find_config(args);
    if (!early_config.empty()) {
      const RunConfig cfg = RunConfig::load(early_config);
      apply_config(cfg, global);
      for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" || args[i] == "--threads") {
          ++i;  // skip the option's value
          continue;
        }
        if (bindings.count(args[i]) != 0) {
          apply_config(cfg, bindings.at(args[i]));
          break;
        }
      }
    }
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << app.version() << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\nrun with --help for usage\n";
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (threads >= 0) set_thread_count(threads);
    if (degrade->parsed()) return cmd_degrade(degrade_args, out);
    if (sr->parsed()) return cmd_sr(sr_args, out);
    if (tr->parsed()) return cmd_train(train_args, out, err);
    if (ev->parsed()) return cmd_eval(eval_args, out);
    if (gc->parsed()) return cmd_gradcheck(gc_args, out);
    err << "error: no command\n";
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ImageFormatError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const CheckpointError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
}

}  // namespace dkrg::cli
