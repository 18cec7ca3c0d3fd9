// Acceptance run: one PASS/FAIL line per criterion. Criteria that need the
// benchmark images read DKRG_SET5_DIR and DKRG_TRAIN_DIR (defaults under
// data/ in the source tree) and fail with the reason when those are missing.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "dkrg/nn/ops.hpp"
#include "dkrg/checkpoint.hpp"
#include "dkrg/gradcheck_suite.hpp"
#include "dkrg/image_io.hpp"
#include "dkrg/kriging.hpp"
#include "dkrg/methods.hpp"
#include "dkrg/metrics.hpp"
#include "dkrg/training.hpp"
#include "dkrg/uncertainty.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace dkrg;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

fs::path env_dir(const char* var, const char* fallback) {
  const char* v = std::getenv(var);
  return (v != nullptr && *v != '\0') ? fs::path(v) : fs::path(fallback);
}

fs::path set5_dir() { return env_dir("DKRG_SET5_DIR", DKRG_DEFAULT_SET5_DIR); }
fs::path train_dir() { return env_dir("DKRG_TRAIN_DIR", DKRG_DEFAULT_TRAIN_DIR); }

std::optional<std::string> missing_images(const fs::path& dir, const char* var) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) {
    return "no image directory at " + dir.string() + " (set " + var + ")";
  }
  if (list_images(dir).empty()) return "no images in " + dir.string() + " (set " + var + ")";
  return std::nullopt;
}

// 1. Random ordinary kriging systems against the explicit inverse.
Outcome solver_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(20240501);
  std::uniform_int_distribution<int> count(2, 25);
  std::uniform_real_distribution<double> coord(0.0, 20.0);
  std::uniform_real_distribution<double> sill(0.5, 5.0);
  std::uniform_real_distribution<double> range(0.5, 10.0);
  double worst_w = 0.0;
  double worst_sum = 0.0;
  int jittered = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const int n = count(rng);
    std::vector<Site> sites;
    std::vector<oracle::Point> points;
    for (int i = 0; i < n; ++i) {
      sites.push_back({coord(rng), coord(rng)});
      points.push_back({sites.back().y, sites.back().x});
    }
    const Site target{coord(rng), coord(rng)};
    const CovarianceModel model{sill(rng), range(rng)};
    const KrigingWeights w = solve_weights(build_system(sites, model), target);
    if (w.jitter > 0.0) ++jittered;
    const auto ref = oracle::krige(points, {target.y, target.x}, model.c0, model.sigma, w.jitter);
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
      worst_w = std::max(worst_w, std::abs(w.weights[i] - ref.w[static_cast<std::size_t>(i)]));
      sum += w.weights[i];
    }
    worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
  }
  const double elapsed = seconds_since(t0);
  Outcome o;
  o.pass = worst_w < 1e-8 && worst_sum < 1e-10 && elapsed < 10.0;
  o.detail = "max |dw| " + fmt("%.3e", worst_w) + ", max |sum-1| " + fmt("%.3e", worst_sum) +
             ", " + std::to_string(jittered) + "/500 regularized, " + fmt("%.2f s", elapsed);
  return o;
}

// 2. Targets placed on a known site.
Outcome exactness() {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> count(2, 25);
  std::uniform_real_distribution<double> coord(0.0, 20.0);
  std::uniform_real_distribution<double> sill(0.5, 5.0);
  std::uniform_real_distribution<double> range(0.5, 10.0);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = count(rng);
    std::vector<Site> sites;
    for (int i = 0; i < n; ++i) sites.push_back({coord(rng), coord(rng)});
    const int k = static_cast<int>(rng() % static_cast<unsigned>(n));
    const KrigingWeights w =
        solve_weights(build_system(sites, {sill(rng), range(rng)}), sites[static_cast<std::size_t>(k)]);
    for (int i = 0; i < n; ++i) worst = std::max(worst, std::abs(w.weights[i] - (i == k ? 1.0 : 0.0)));
  }
  return {worst < 1e-9, "max deviation from one-hot " + fmt("%.3e", worst)};
}

struct Reference {
  int scale;
  double psnr;
  double ssim;
};

// 3. Bicubic baseline on Set5.
Outcome bicubic_baseline() {
  if (auto why = missing_images(set5_dir(), "DKRG_SET5_DIR")) return {false, *why};
  const auto t0 = Clock::now();
  bool ok = true;
  std::string detail;
  for (const Reference ref : {Reference{2, 33.66, 0.930}, Reference{3, 30.39, 0.868},
                              Reference{4, 28.42, 0.810}}) {
    const EvalSummary s = evaluate_set(set5_dir(), "bicubic", bicubic_method(), ref.scale);
    const bool hit = std::abs(s.mean_psnr - ref.psnr) <= 0.2 && std::abs(s.mean_ssim - ref.ssim) <= 0.01;
    ok = ok && hit;
    detail += "x" + std::to_string(ref.scale) + " " + fmt("%.2f", s.mean_psnr) + "/" +
              fmt("%.3f", s.mean_ssim) + " (ref " + fmt("%.2f", ref.psnr) + "/" +
              fmt("%.3f", ref.ssim) + ") ";
  }
  return {ok, detail + fmt("%.1f s", seconds_since(t0))};
}

// 4. Local kriging baseline on Set5 x3.
Outcome local_kriging_baseline() {
  if (auto why = missing_images(set5_dir(), "DKRG_SET5_DIR")) return {false, *why};
  const auto t0 = Clock::now();
  const EvalSummary s = evaluate_set(set5_dir(), "krige", local_kriging_method(), 3);
  const double per_image = seconds_since(t0) / static_cast<double>(s.records.size());
  const bool ok = std::abs(s.mean_psnr - 31.72) <= 0.5 && per_image <= 300.0;
  return {ok, "x3 " + fmt("%.2f", s.mean_psnr) + "/" + fmt("%.3f", s.mean_ssim) +
                  " (ref 31.72/0.864), " + fmt("%.1f s/image", per_image)};
}

// 5. Finite-difference checks of every op and the end-to-end loss.
Outcome gradients() {
  const auto t0 = Clock::now();
  const auto results = run_gradcheck_suite(0);
  const double elapsed = seconds_since(t0);
  bool ok = elapsed < 60.0;
  std::string failed;
  double e2e = 0.0;
  for (const auto& r : results) {
    if (!r.passed) {
      ok = false;
      failed += " " + r.name;
    }
    if (r.name == "network_loss_f32") e2e = r.max_rel_error;
  }
  std::string detail = std::to_string(results.size()) + " checks, end-to-end max rel " +
                       fmt("%.2e", e2e) + ", " + fmt("%.1f s", elapsed);
  if (!failed.empty()) detail += ", failed:" + failed;
  return {ok, detail};
}

// 6. Constant images through random networks.
Outcome unbiasedness() {
  const double dev = bias_probe(NetworkConfig{}, 100, 6);
  return {dev < 1e-4, "max |sr - c| over 100 draws " + fmt("%.3e", dev)};
}

double pair_sum(const WeightField& w, int y, int x, const CovarianceModel& m) {
  double v = 0.0;
  for (int k = 0; k < 49; ++k)
    for (int j = 0; j < 49; ++j) {
      const double d = std::hypot(double(k / 7 - j / 7), double(k % 7 - j % 7));
      v += w(0, k, y, x) * w(0, j, y, x) * m.c0 * std::exp(-d * d / (m.sigma * m.sigma));
    }
  return v;
}

// 7. Variance map against pair enumeration, plus its two limits.
Outcome variance_formula() {
  std::mt19937_64 rng(1234);
  double worst_rel = 0.0;
  bool one_hot_exact = true;
  bool flat_exact = true;
  for (int trial = 0; trial < 50; ++trial) {
    // Weights summing to exactly one, so the oracle's pair sum and the
    // library's evaluation describe the same number.
    WeightField w(1, 49, 4, 4);
    for (int y = 0; y < 4; ++y)
      for (int x = 0; x < 4; ++x) {
        const std::vector<double> wk = oracle::unit_sum_weights(49, rng);
        for (int k = 0; k < 49; ++k) w(0, k, y, x) = wk[static_cast<std::size_t>(k)];
      }
    const CovarianceModel m{0.5 + 4.5 * nn::uniform01(rng), 0.5 + 9.5 * nn::uniform01(rng)};
    const VarianceMap v = variance_map(w, m, false);
    for (int y = 0; y < 4; ++y)
      for (int x = 0; x < 4; ++x) {
        const double ref = pair_sum(w, y, x, m);
        worst_rel = std::max(worst_rel, std::abs(v(y, x) - ref) / std::abs(ref));
      }

    // Constant covariance, on these weights and on network-normalized ones.
    WeightField raw(1, 49, 4, 4);
    for (double& r : raw.storage()) r = nn::uniform01(rng) - 0.25;
    const CovarianceModel flat{m.c0, std::numeric_limits<double>::infinity()};
    const VarianceMap fa = variance_map(w, flat, false);
    const VarianceMap fb = variance_map(normalize_weights(raw), flat, false);
    for (double f : fa.data()) flat_exact = flat_exact && f == m.c0;
    for (double f : fb.data()) flat_exact = flat_exact && f == m.c0;

    WeightField hot(1, 49, 4, 4, 0.0);
    for (int y = 0; y < 4; ++y)
      for (int x = 0; x < 4; ++x) hot(0, static_cast<int>(rng() % 49), y, x) = 1.0;
    const VarianceMap hv = variance_map(hot, m);
    for (double h : hv.data()) one_hot_exact = one_hot_exact && h == m.c0;
  }
  const bool ok = worst_rel < 1e-10 && one_hot_exact && flat_exact;
  return {ok, "max rel vs pairs " + fmt("%.2e", worst_rel) + ", one-hot " +
                  (one_hot_exact ? "exact" : "INEXACT") + ", constant-covariance limit " +
                  (flat_exact ? "exact" : "INEXACT")};
}

struct Trained {
  std::shared_ptr<const NetworkParams<float>> params;
  std::string error;
};

Trained& trained_model() {
  static Trained model = [] {
    Trained t;
    if (auto why = missing_images(train_dir(), "DKRG_TRAIN_DIR")) {
      t.error = *why;
      return t;
    }
    TrainConfig cfg;  // defaults: 2000 iterations, batch 8, lr 1e-4
    const TrainingSet data = build_training_set(train_dir(), cfg);
    TrainOutputs out;
    out.checkpoint_path = "acceptance_desk.ckpt";
    std::ofstream log("acceptance_desk.log.csv");
    out.log = &log;
    const TrainResult r = train(cfg, data, initial_checkpoint(NetworkConfig{}, cfg.seed), out);
    if (r.aborted) {
      t.error = "training aborted: " + r.abort_reason;
      return t;
    }
    t.params = std::make_shared<const NetworkParams<float>>(r.checkpoint.params);
    return t;
  }();
  return model;
}

// 8. Desk-scale training beats bicubic on Set5 x3.
Outcome desk_training() {
  if (auto why = missing_images(set5_dir(), "DKRG_SET5_DIR")) return {false, *why};
  if (auto why = missing_images(train_dir(), "DKRG_TRAIN_DIR")) return {false, *why};
  const std::size_t n_train = list_images(train_dir()).size();
  const Trained& model = trained_model();
  if (!model.params) return {false, model.error};
  const EvalSummary bic = evaluate_set(set5_dir(), "bicubic", bicubic_method(), 3);
  const EvalSummary deep = evaluate_set(set5_dir(), "deep", deep_kriging_method(model.params), 3);
  const double gain = deep.mean_psnr - bic.mean_psnr;
  return {gain >= 0.3, std::to_string(n_train) + " training images, x3 " + fmt("%.2f", deep.mean_psnr) +
                           " vs bicubic " + fmt("%.2f", bic.mean_psnr) + " (gain " +
                           fmt("%+.2f dB", gain) + ")"};
}

// 9. Report-only uncertainty statistics.
Outcome uncertainty_report() {
  if (auto why = missing_images(set5_dir(), "DKRG_SET5_DIR")) return {false, *why};
  const Trained& model = trained_model();
  if (!model.params) return {false, model.error};
  const auto records = evaluate_uncertainty(set5_dir(), *model.params, 3);
  double cov = 0.0;
  double corr = 0.0;
  for (const auto& r : records) {
    cov += r.coverage;
    corr += r.corr;
  }
  cov /= static_cast<double>(records.size());
  corr /= static_cast<double>(records.size());
  const bool computed = std::isfinite(cov) && std::isfinite(corr);
  return {computed, "report-only: coverage " + fmt("%.1f%%", 100.0 * cov) + " (paper 91.9%), corr " +
                        fmt("%.3f", corr) + " (paper 0.8)"};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// 10. Two strict-mode training runs through the command line.
Outcome determinism() {
  const fs::path work = fs::temp_directory_path() / "dkrg_acceptance_determinism";
  fs::remove_all(work);
  fs::create_directories(work / "data");
  fs::path data = train_dir();
  std::string source = "training set";
  if (missing_images(data, "DKRG_TRAIN_DIR")) {
    data = work / "data";
    source = "synthetic images";
    for (int i = 0; i < 3; ++i) {
      write_image(quantize(oracle::smooth_image(64 + 8 * i, 72, 0.9 * i)),
                  data / ("img" + std::to_string(i) + ".png"));
    }
  }
  auto run = [&](const std::string& tag) {
    std::ostringstream out, err;
    return cli::run({"--threads", "0", "train", "--data", data.string(), "--out",
                     (work / (tag + ".ckpt")).string(), "--iterations", "3", "--seed", "11"},
                    out, err);
  };
  const int a = run("a");
  const int b = run("b");
  if (a != 0 || b != 0) return {false, "train exited with " + std::to_string(a) + "/" + std::to_string(b)};
  const bool ck = slurp(work / "a.ckpt") == slurp(work / "b.ckpt");
  const bool log = slurp(work / "a.ckpt.log.csv") == slurp(work / "b.ckpt.log.csv");
  const auto size = fs::file_size(work / "a.ckpt");
  fs::remove_all(work);
  return {ck && log, std::string("checkpoints ") + (ck ? "identical" : "DIFFER") + " (" +
                         std::to_string(size) + " bytes), logs " + (log ? "identical" : "DIFFER") +
                         ", default network, 3 iterations on " + source};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"kriging solver matches full-inverse oracle", solver_oracle},
      {"kriging exactness at known sites", exactness},
      {"bicubic baseline on Set5", bicubic_baseline},
      {"local kriging baseline on Set5 x3", local_kriging_baseline},
      {"gradient correctness", gradients},
      {"unbiasedness on constant images", unbiasedness},
      {"variance formula", variance_formula},
      {"desk-scale training beats bicubic", desk_training},
      {"uncertainty statistics", uncertainty_report},
      {"strict-mode training determinism", determinism},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::cout << "criterion " << (i + 1) << " " << (o.pass ? "PASS" : "FAIL") << "  "
              << criteria[i].first << ": " << o.detail << std::endl;
  }
  std::cout << (criteria.size() - static_cast<std::size_t>(failures)) << "/" << criteria.size()
            << " criteria passed" << std::endl;
  return failures == 0 ? 0 : 1;
}
