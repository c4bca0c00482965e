// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <condition_variable>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "rosetta/datagen.hpp"
#include "rosetta/model/checkpoint.hpp"
#include "rosetta/model/network.hpp"
#include "rosetta/optim.hpp"
#include "rosetta/parallel.hpp"

namespace rosetta {

struct TrainConfig {
  int batch_size = 16;
  double learning_rate = 3e-4;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t total_steps = 1000;
  /// 0 writes only the final checkpoint.
  std::uint64_t checkpoint_every = 0;
  std::uint64_t seed = 0;
  /// When nonzero, training cycles over this many fixed samples.
  std::size_t overfit_samples = 0;
  /// Global gradient-norm clip; 0 disables clipping.
  double clip_norm = 0.0;
  GenParams gen;
  model::ModelConfig model;

  void validate() const {
    if (batch_size < 1) throw ValidationError("batch_size must be at least 1");
    if (!(learning_rate > 0.0)) throw ValidationError("learning_rate must be positive");
    if (weight_decay < 0.0) throw ValidationError("weight_decay must be nonnegative");
    if (clip_norm < 0.0) throw ValidationError("clip_norm must be nonnegative");
    gen.validate();
    model.validate();
    if (model.fusion == model::Fusion::single) {
      for (char32_t c : gen.alphabet)
        if (!StaticTokenizer::letter(c)) throw ValidationError("baseline training needs an alphabet within a-z");
    }
  }
};

inline void to_json(nlohmann::ordered_json& j, const TrainConfig& c) {
  j = nlohmann::ordered_json{
      {"batch_size", c.batch_size},
      {"learning_rate", c.learning_rate},
      {"weight_decay", c.weight_decay},
      {"beta1", c.beta1},
      {"beta2", c.beta2},
      {"eps", c.eps},
      {"total_steps", c.total_steps},
      {"checkpoint_every", c.checkpoint_every},
      {"seed", c.seed},
      {"overfit_samples", c.overfit_samples},
      {"clip_norm", c.clip_norm},
      {"gen", c.gen},
      {"model", c.model},
  };
}

inline void from_json(const nlohmann::ordered_json& j, TrainConfig& c) {
  TrainConfig d;
  c.batch_size = j.value("batch_size", d.batch_size);
  c.learning_rate = j.value("learning_rate", d.learning_rate);
  c.weight_decay = j.value("weight_decay", d.weight_decay);
  c.beta1 = j.value("beta1", d.beta1);
  c.beta2 = j.value("beta2", d.beta2);
  c.eps = j.value("eps", d.eps);
  c.total_steps = j.value("total_steps", d.total_steps);
  c.checkpoint_every = j.value("checkpoint_every", d.checkpoint_every);
  c.seed = j.value("seed", d.seed);
  c.overfit_samples = j.value("overfit_samples", d.overfit_samples);
  c.clip_norm = j.value("clip_norm", d.clip_norm);
  c.gen = j.contains("gen") ? j.at("gen").get<GenParams>() : d.gen;
  c.model = j.contains("model") ? j.at("model").get<model::ModelConfig>() : d.model;
}

/// One supervised example in the form the network consumes.
struct TrainExample {
  std::string id;
  GrayImage context_image;
  GrayImage query_image;
  TokenSeq context_tokens;
  TokenSeq prefix;  // target tokens without <eos>
};

/// Converts a rendered sample into the supervision for `config`: the
/// context-aware targets for the paired model, static letters for the
/// baseline.
inline TrainExample to_example(const RenderedSample& s, const model::ModelConfig& config) {
  TrainExample e;
  e.id = s.id;
  e.query_image = s.query_image;
  if (config.fusion == model::Fusion::paired) {
    e.context_image = s.context_image;
    e.context_tokens = s.context_tokens;
    e.prefix = s.target_tokens;
  } else {
    e.prefix = StaticTokenizer::encode(s.query_text);
  }
  return e;
}

inline std::uint64_t data_seed(const TrainConfig& c) { return derive_seed(c.seed, 1); }
inline std::uint64_t init_seed(const TrainConfig& c) { return derive_seed(c.seed, 0); }

/// Stream index of batch slot `slot` at `step`.
inline std::size_t example_index(const TrainConfig& c, std::uint64_t step, std::size_t slot) {
  const std::size_t i = static_cast<std::size_t>(step) * static_cast<std::size_t>(c.batch_size) + slot;
  return c.overfit_samples > 0 ? i % c.overfit_samples : i;
}

inline TrainExample training_example(const TrainConfig& c, const FontLibrary& fonts, std::size_t index) {
  GenParams params = c.gen;
  params.seed = data_seed(c);
  ContextTokenizer cat(Vocabulary(static_cast<std::size_t>(c.model.label_tokens)));
  return to_example(make_indexed_sample(params, fonts, index, cat), c.model);
}

struct StepStats {
  double loss = 0.0;
  double token_acc = 0.0;
  std::size_t tokens = 0;
};

/// Per-sample teacher-forced passes (possibly concurrent), gradients summed
/// in batch order, mean taken, optional clipping, then one AdamW update.
template <typename Real>
StepStats train_step(const model::Network<Real>& net, model::ParamStore<Real>& params, AdamW<Real>& opt,
                     const std::vector<TrainExample>& batch, double lr, double clip_norm = 0.0, unsigned threads = 1,
                     std::vector<model::ParamStore<Real>>* scratch = nullptr) {
  if (batch.empty()) throw ValidationError("empty batch");
  std::vector<model::ParamStore<Real>> local;
  auto& grads = scratch ? *scratch : local;
  grads.resize(batch.size());
  std::vector<double> losses(batch.size());
  std::vector<std::size_t> correct(batch.size()), counts(batch.size());
  const std::vector<bool> mask = model::emission_mask(net.config());
  parallel_for(batch.size(), threads, [&](std::size_t i) {
    const TrainExample& e = batch[i];
    auto& g = grads[i];
    if (g.size() != params.size()) g = net.zero_grads();
    else g.zero();
    model::Trace<Real> trace;
    const GrayImage* ctx = net.config().fusion == model::Fusion::paired ? &e.context_image : nullptr;
    const Real loss = net.loss_and_grad(params, ctx, e.query_image, e.context_tokens, e.prefix, g, &trace);
    if (!std::isfinite(static_cast<double>(loss))) throw NonFiniteLoss(e.id);
    losses[i] = static_cast<double>(loss);
    const TokenSeq targets = net.with_eos(e.prefix);
    for (Eigen::Index r = 0; r < trace.logits.rows(); ++r) {
      Eigen::Index best = -1;
      for (Eigen::Index v = 0; v < trace.logits.cols(); ++v)
        if (mask[static_cast<std::size_t>(v)] && (best < 0 || trace.logits(r, v) > trace.logits(r, best))) best = v;
      correct[i] += best == targets[static_cast<std::size_t>(r)] ? 1 : 0;
    }
    counts[i] = targets.size();
  });

  model::ParamStore<Real>& total = grads[0];
  for (std::size_t i = 1; i < grads.size(); ++i) total.accumulate(grads[i]);
  const Real inv = Real(1) / static_cast<Real>(batch.size());
  for (Real& x : total.values) x *= inv;
  if (clip_norm > 0.0) {
    double sq = 0.0;
    for (Real x : total.values) sq += static_cast<double>(x) * static_cast<double>(x);
    const double norm = std::sqrt(sq);
    if (norm > clip_norm) {
      const Real s = static_cast<Real>(clip_norm / norm);
      for (Real& x : total.values) x *= s;
    }
  }
  opt.step(params.values, total.values, lr);

  StepStats st;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    st.loss += losses[i];
    hits += correct[i];
    st.tokens += counts[i];
  }
  st.loss /= static_cast<double>(batch.size());
  st.token_acc = st.tokens ? static_cast<double>(hits) / static_cast<double>(st.tokens) : 0.0;
  return st;
}

/// Fixed-capacity FIFO used to let data generation run ahead of training.
template <typename T>
class BoundedQueue {
 public:
  explicit BoundedQueue(std::size_t capacity) : capacity_(capacity) {}

  /// False once the queue is closed.
  bool push(T item) {
    std::unique_lock lock(mu_);
    not_full_.wait(lock, [&] { return items_.size() < capacity_ || closed_; });
    if (closed_) return false;
    items_.push_back(std::move(item));
    not_empty_.notify_one();
    return true;
  }

  std::optional<T> pop() {
    std::unique_lock lock(mu_);
    not_empty_.wait(lock, [&] { return !items_.empty() || closed_; });
    if (items_.empty()) return std::nullopt;
    T item = std::move(items_.front());
    items_.pop_front();
    not_full_.notify_one();
    return item;
  }

  void close() {
    std::lock_guard lock(mu_);
    closed_ = true;
    not_empty_.notify_all();
    not_full_.notify_all();
  }

 private:
  std::size_t capacity_;
  std::deque<T> items_;
  bool closed_ = false;
  std::mutex mu_;
  std::condition_variable not_empty_, not_full_;
};

struct FitOptions {
  unsigned threads = 1;
  /// Resume from this checkpoint (must carry optimizer state).
  std::optional<std::filesystem::path> resume;
  /// Stop after this global step even if total_steps is larger.
  std::optional<std::uint64_t> stop_at;
  /// Called after every step.
  std::function<void(std::uint64_t, const StepStats&, double)> on_step;
};

struct FitResult {
  std::filesystem::path checkpoint;
  std::uint64_t steps_done = 0;
  std::vector<StepStats> history;
};

inline std::string format_loss_row(std::uint64_t step, double lr, const StepStats& s) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%llu,%.9g,%.9g,%.6f\n", static_cast<unsigned long long>(step), lr, s.loss, s.token_acc);
  return buf;
}

inline constexpr const char* kLossHeader = "step,lr,loss,token_acc\n";

namespace detail {
/// Keeps the header and rows with step < `keep_below`.
inline std::string truncate_loss_log(const std::filesystem::path& path, std::uint64_t keep_below) {
  std::string out = kLossHeader;
  std::ifstream in(path);
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (first) {
      first = false;
      continue;
    }
    if (line.empty()) continue;
    if (std::stoull(line.substr(0, line.find(','))) < keep_below) out += line + "\n";
  }
  return out;
}
}  // namespace detail

inline std::filesystem::path step_checkpoint_path(const std::filesystem::path& out_dir, std::uint64_t step) {
  char name[64];
  std::snprintf(name, sizeof name, "step_%08llu.ckpt", static_cast<unsigned long long>(step));
  return out_dir / "checkpoints" / name;
}

/// Training loop. Writes `loss.csv`, `train_config.json`, periodic
/// checkpoints under `checkpoints/` and the latest state as `model.ckpt`.
template <typename Real>
FitResult fit(const TrainConfig& cfg, const FontLibrary& fonts, const std::filesystem::path& out_dir,
              const FitOptions& options = {}) {
  namespace fs = std::filesystem;
  cfg.validate();
  if (fonts.empty() && cfg.total_steps > 0) throw ValidationError("no usable fonts");
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory", out_dir.string());
  detail::write_file_atomic(out_dir / "train_config.json", nlohmann::ordered_json(cfg).dump(2) + "\n");

  model::Network<Real> net(cfg.model);
  model::ParamStore<Real> params = net.init(init_seed(cfg));
  AdamW<Real> opt(params.size(), AdamWOptions{cfg.beta1, cfg.beta2, cfg.eps, cfg.weight_decay});
  std::uint64_t start = 0;
  std::string log = kLossHeader;
  if (options.resume) {
    auto ck = model::load_checkpoint<Real>(*options.resume);
    if (!(ck.config == cfg.model)) throw ConfigMismatch("checkpoint config differs from training config");
    if (!ck.has_optimizer()) throw ValidationError("checkpoint has no optimizer state to resume from");
    params = std::move(ck.params);
    opt.restore(std::move(ck.m), std::move(ck.v), ck.step);
    start = ck.step;
    log = detail::truncate_loss_log(out_dir / "loss.csv", start);
  }
  const std::uint64_t end = std::min(cfg.total_steps, options.stop_at.value_or(cfg.total_steps));

  auto snapshot = [&](std::uint64_t step) {
    model::Checkpoint<Real> ck;
    ck.config = cfg.model;
    ck.step = step;
    ck.params = params;
    ck.m = opt.first_moment();
    ck.v = opt.second_moment();
    return ck;
  };

  std::vector<TrainExample> fixed;
  if (cfg.overfit_samples > 0) {
    fixed.resize(cfg.overfit_samples);
    parallel_for(fixed.size(), options.threads, [&](std::size_t i) { fixed[i] = training_example(cfg, fonts, i); });
  }

  // Batches for upcoming steps are produced on a separate thread.
  BoundedQueue<std::pair<std::vector<TrainExample>, std::exception_ptr>> queue(2);
  std::thread producer([&] {
    for (std::uint64_t step = start; step < end; ++step) {
      std::vector<TrainExample> batch(static_cast<std::size_t>(cfg.batch_size));
      std::exception_ptr err;
      try {
        for (std::size_t i = 0; i < batch.size(); ++i) {
          const std::size_t idx = example_index(cfg, step, i);
          batch[i] = fixed.empty() ? training_example(cfg, fonts, idx) : fixed[idx];
        }
      } catch (...) {
        err = std::current_exception();
      }
      if (!queue.push({std::move(batch), err}) || err) break;
    }
  });
  struct Joiner {
    BoundedQueue<std::pair<std::vector<TrainExample>, std::exception_ptr>>& q;
    std::thread& t;
    ~Joiner() {
      q.close();
      if (t.joinable()) t.join();
    }
  } joiner{queue, producer};

  FitResult result;
  std::vector<model::ParamStore<Real>> scratch;
  auto flush_log = [&] { detail::write_file_atomic(out_dir / "loss.csv", log); };
  for (std::uint64_t step = start; step < end; ++step) {
    auto item = queue.pop();
    if (!item) throw Error("data producer stopped early");
    if (item->second) std::rethrow_exception(item->second);
    const double lr = cfg.learning_rate * cosine_multiplier(step, cfg.total_steps);
    StepStats st;
    try {
      st = train_step(net, params, opt, item->first, lr, cfg.clip_norm, options.threads, &scratch);
    } catch (const NonFiniteLoss&) {
      flush_log();
      throw;
    }
    log += format_loss_row(step, lr, st);
    result.history.push_back(st);
    if (options.on_step) options.on_step(step, st, lr);
    const std::uint64_t done = step + 1;
    if (cfg.checkpoint_every > 0 && done % cfg.checkpoint_every == 0) {
      save_checkpoint(step_checkpoint_path(out_dir, done), snapshot(done));
      flush_log();
    }
  }
  flush_log();
  result.steps_done = std::max(start, end);
  result.checkpoint = out_dir / "model.ckpt";
  save_checkpoint(result.checkpoint, snapshot(result.steps_done));
  return result;
}

}  // namespace rosetta
