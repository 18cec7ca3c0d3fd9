#include "dkrg/training.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "dkrg/image_io.hpp"
#include "dkrg/nn/ops.hpp"

namespace dkrg {

namespace {

constexpr std::uint64_t kEpochSalt = 0x9E3779B97F4A7C15ULL;

std::string format_row(const TrainLogRow& row) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%llu,%.9g,%.9g,%.3f",
                static_cast<unsigned long long>(row.iteration), row.loss, row.grad_norm,
                row.seconds);
  return buf;
}

// Batch-norm running statistics, saved so a failed step can be undone.
std::vector<nn::Array4<float>> snapshot_buffers(const NetworkParams<float>& params) {
  std::vector<nn::Array4<float>> out;
  for (const auto& p : params.entries) {
    if (!p.trainable) out.push_back(p.value);
  }
  return out;
}

void restore_buffers(NetworkParams<float>& params, const std::vector<nn::Array4<float>>& saved) {
  std::size_t k = 0;
  for (auto& p : params.entries) {
    if (!p.trainable) p.value = saved[k++];
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be positive");
  if (!(learning_rate > 0.0)) {
    throw std::invalid_argument("TrainConfig: learning_rate must be positive");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) {
    throw std::invalid_argument("TrainConfig: dropout must be in [0, 1)");
  }
  if (!(clip_norm > 0.0)) throw std::invalid_argument("TrainConfig: clip_norm must be positive");
  if (iterations < 0) throw std::invalid_argument("TrainConfig: iterations must be >= 0");
  if (scales.empty()) throw std::invalid_argument("TrainConfig: no scales");
  for (int s : scales) {
    if (s < 2 || s > 4) throw std::invalid_argument("TrainConfig: scales must be in {2, 3, 4}");
  }
  if (patch < 1 || stride < 1) {
    throw std::invalid_argument("TrainConfig: patch and stride must be positive");
  }
  if (checkpoint_every < 0) {
    throw std::invalid_argument("TrainConfig: checkpoint_every must be >= 0");
  }
}

std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  std::mt19937_64 rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(perm[i - 1], perm[j]);
  }
  return perm;
}

TrainingSet::TrainingSet(std::span<const Image> images, const TrainConfig& config)
    : patch_(config.patch), seed_(config.seed) {
  config.validate();
  for (std::size_t src = 0; src < images.size(); ++src) {
    const std::vector<AugmentedImage> variants = augment(images.subspan(src, 1), config.scales);
    for (const AugmentedImage& a : variants) {
      const std::vector<int> ys = patch_offsets(a.hr.height(), config.patch, config.stride);
      const std::vector<int> xs = patch_offsets(a.hr.width(), config.patch, config.stride);
      if (ys.empty() || xs.empty()) continue;
      Variant v;
      v.height = a.hr.height();
      v.width = a.hr.width();
      v.source = src;
      v.lr.assign(a.lr_upsampled.data().begin(), a.lr_upsampled.data().end());
      v.hr.assign(a.hr.data().begin(), a.hr.data().end());
      const auto index = static_cast<std::uint32_t>(variants_.size());
      variants_.push_back(std::move(v));
      for (int y : ys) {
        for (int x : xs) windows_.push_back({index, y, x});
      }
    }
  }
}

const std::vector<std::size_t>& TrainingSet::permutation(std::uint64_t epoch) const {
  if (epoch != cached_epoch_) {
    cached_perm_ = seeded_permutation(windows_.size(), seed_ + epoch * kEpochSalt);
    cached_epoch_ = epoch;
  }
  return cached_perm_;
}

void TrainingSet::copy_window(const Window& w, float* lr, float* hr) const {
  const Variant& v = variants_[w.variant];
  for (int y = 0; y < patch_; ++y) {
    const std::size_t row = static_cast<std::size_t>(w.y + y) * v.width + w.x;
    for (int x = 0; x < patch_; ++x) {
      lr[static_cast<std::size_t>(y) * patch_ + x] = v.lr[row + x];
      hr[static_cast<std::size_t>(y) * patch_ + x] = v.hr[row + x];
    }
  }
}

PatchPair TrainingSet::pair(std::size_t i) const {
  const Window& w = windows_.at(permutation(0)[i]);
  std::vector<float> lr(static_cast<std::size_t>(patch_) * patch_);
  std::vector<float> hr(lr.size());
  copy_window(w, lr.data(), hr.data());
  PatchPair out;
  out.lr = Image(patch_, patch_, std::vector<double>(lr.begin(), lr.end()));
  out.hr = Image(patch_, patch_, std::vector<double>(hr.begin(), hr.end()));
  out.source = variants_[w.variant].source;
  return out;
}

PatchSet TrainingSet::to_patch_set() const {
  PatchSet set;
  set.patches.reserve(size());
  for (std::size_t i = 0; i < size(); ++i) set.patches.push_back(pair(i));
  return set;
}

void TrainingSet::batch(std::uint64_t first, int count, nn::Array4<float>& lr,
                        nn::Array4<float>& hr) const {
  if (windows_.empty()) throw std::logic_error("TrainingSet::batch: empty training set");
  lr = nn::Array4<float>(count, 1, patch_, patch_);
  hr = nn::Array4<float>(count, 1, patch_, patch_);
  for (int b = 0; b < count; ++b) {
    const std::uint64_t k = first + static_cast<std::uint64_t>(b);
    const std::uint64_t epoch = k / windows_.size();
    const std::size_t pos = static_cast<std::size_t>(k % windows_.size());
    const Window& w = windows_[permutation(epoch)[pos]];
    copy_window(w, lr.data() + lr.offset(b, 0, 0, 0), hr.data() + hr.offset(b, 0, 0, 0));
  }
}

TrainingSet build_training_set(const std::filesystem::path& image_dir,
                               const TrainConfig& config) {
  config.validate();
  std::vector<Image> images;
  for (const auto& path : list_images(image_dir)) {
    try {
      images.push_back(luma(read_image(path)));
    } catch (const std::exception& e) {
      std::cerr << "warning: skipping " << path.string() << ": " << e.what() << '\n';
    }
  }
  TrainingSet set(images, config);
  if (set.size() == 0) {
    throw std::runtime_error("build_training_set: no training patches in " + image_dir.string());
  }
  return set;
}

double empirical_risk(const nn::Array4<float>& prediction, const nn::Array4<float>& target) {
  if (!prediction.same_shape(target)) {
    throw std::invalid_argument("empirical_risk: shape mismatch " + prediction.shape_string() +
                                " vs " + target.shape_string());
  }
  if (prediction.empty()) throw std::invalid_argument("empirical_risk: empty batch");
  double acc = 0.0;
  for (std::size_t i = 0; i < prediction.size(); ++i) {
    const double d = static_cast<double>(prediction[i]) - target[i];
    acc += d * d;
  }
  return acc / static_cast<double>(prediction.size());
}

TrainResult train(const TrainConfig& config, const TrainingSet& data, Checkpoint initial,
                  const TrainOutputs& outputs) {
  config.validate();
  TrainResult result;
  result.checkpoint = std::move(initial);
  Checkpoint& ck = result.checkpoint;
  ck.params.config.dropout = config.dropout;
  ck.optimizer.learning_rate = static_cast<float>(config.learning_rate);
  if (ck.optimizer.m.size() != ck.params.entries.size()) {
    ck.optimizer = nn::AdamState::for_parameters(ck.params.all(), ck.optimizer.learning_rate);
  }

  std::mt19937_64 rng;
  if (!ck.rng_state.empty()) {
    std::istringstream in(ck.rng_state);
    in >> rng;
    if (!in) throw std::invalid_argument("train: unreadable RNG state in checkpoint");
  } else {
    rng.seed(config.seed);
  }
  auto store_rng = [&] {
    std::ostringstream out;
    out << rng;
    ck.rng_state = out.str();
  };
  auto save = [&] {
    if (!outputs.checkpoint_path.empty()) save_checkpoint(ck, outputs.checkpoint_path);
  };

  if (outputs.log != nullptr) *outputs.log << "iter,loss,grad_norm,seconds\n";
  const auto start = std::chrono::steady_clock::now();

  for (int it = 0; it < config.iterations; ++it) {
    nn::Array4<float> lr;
    nn::Array4<float> hr;
    data.batch(ck.iteration * static_cast<std::uint64_t>(config.batch_size), config.batch_size, lr,
               hr);

    const std::vector<nn::Array4<float>> buffers = snapshot_buffers(ck.params);
    const std::mt19937_64 rng_before = rng;
    ck.params.zero_grad();
    nn::Graph<float> g;
    const nn::Var pred = predict(g, ck.params, lr, nn::Mode::kTrain, rng);
    const double loss = empirical_risk(g.value(pred), hr);

    auto abort = [&](const std::string& reason) {
      restore_buffers(ck.params, buffers);
      rng = rng_before;
      store_rng();
      result.aborted = true;
      result.abort_reason = reason;
      save();
    };
    if (!std::isfinite(loss)) {
      abort("non-finite loss at iteration " + std::to_string(ck.iteration + 1));
      return result;
    }

    const nn::Var loss_var = nn::mse(g, pred, g.constant(hr));
    g.backward(loss_var);
    nn::AdamStepResult step;
    try {
      step = nn::adam_step(ck.params.all(), ck.optimizer, config.clip_norm);
    } catch (const nn::NonFiniteGradientError& e) {
      abort(e.what());
      return result;
    }
    ck.iteration += 1;
    store_rng();

    TrainLogRow row;
    row.iteration = ck.iteration;
    row.loss = loss;
    row.grad_norm = step.grad_norm;
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    row.seconds = outputs.record_time ? elapsed : 0.0;
    result.log.push_back(row);
    if (outputs.log != nullptr) *outputs.log << format_row(row) << '\n' << std::flush;
    if (outputs.on_iteration) outputs.on_iteration(row);

    if (config.checkpoint_every > 0 && ck.iteration % config.checkpoint_every == 0) save();
  }
  for (auto& p : ck.params.entries) p.grad = {};
  save();
  return result;
}

}  // namespace dkrg
