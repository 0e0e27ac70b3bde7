// Cross-entropy, Adam, early stopping, and the epoch loop.
#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <functional>
#include <limits>
#include <set>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "kpsign/augment.hpp"
#include "kpsign/error.hpp"
#include "kpsign/eval.hpp"
#include "kpsign/model.hpp"
#include "kpsign/rng.hpp"
#include "kpsign/window.hpp"

namespace kpsign {

/// -log softmax(logits)[label]. Writes softmax - onehot to grad when given.
template <typename T>
double cross_entropy(std::span<const T> logits, std::size_t label, std::span<T> grad = {}) {
  if (label >= logits.size()) throw InvalidArgument("label out of range");
  double mx = -std::numeric_limits<double>::infinity();
  for (T v : logits) mx = std::max(mx, static_cast<double>(v));
  double sum = 0.0;
  for (T v : logits) sum += std::exp(static_cast<double>(v) - mx);
  const double log_z = mx + std::log(sum);
  if (!grad.empty()) {
    for (std::size_t j = 0; j < logits.size(); ++j) {
      grad[j] = static_cast<T>(std::exp(static_cast<double>(logits[j]) - log_z) -
                               (j == label ? 1.0 : 0.0));
    }
  }
  return std::max(0.0, log_z - static_cast<double>(logits[label]));
}

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <typename T>
struct AdamState {
  ModelParameters<T> first_moment;
  ModelParameters<T> second_moment;
  std::uint64_t step = 0;

  static AdamState zeros(const ModelConfig& c) {
    return {ModelParameters<T>::zeros(c), ModelParameters<T>::zeros(c), 0};
  }
};

/// One bias-corrected Adam update.
template <typename T>
void adam_step(ModelParameters<T>& params, const ModelParameters<T>& grads, AdamState<T>& state,
               const AdamConfig& cfg) {
  auto p = params.tensors();
  auto g = grads.tensors();
  auto m = state.first_moment.tensors();
  auto v = state.second_moment.tensors();
  if (p.size() != g.size() || p.size() != m.size() || p.size() != v.size()) {
    throw InvalidArgument("optimizer state does not match parameters");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i]->size() != g[i]->size()) throw InvalidArgument("gradient shape mismatch");
    for (std::size_t j = 0; j < p[i]->size(); ++j) {
      const double gj = static_cast<double>((*g[i])[j]);
      const double mj = cfg.beta1 * static_cast<double>((*m[i])[j]) + (1.0 - cfg.beta1) * gj;
      const double vj =
          cfg.beta2 * static_cast<double>((*v[i])[j]) + (1.0 - cfg.beta2) * gj * gj;
      (*m[i])[j] = static_cast<T>(mj);
      (*v[i])[j] = static_cast<T>(vj);
      const double update = cfg.learning_rate * (mj / c1) / (std::sqrt(vj / c2) + cfg.epsilon);
      (*p[i])[j] = static_cast<T>(static_cast<double>((*p[i])[j]) - update);
    }
  }
}

/// Stops once the monitored loss has failed to strictly decrease below its
/// best value for `patience` consecutive epochs.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience) : patience_(patience) {
    if (patience == 0) throw InvalidArgument("patience must be at least 1");
  }

  /// Records one epoch's loss; returns true when it is a new best.
  bool update(double loss) {
    ++epoch_;
    if (loss < best_loss_) {
      best_loss_ = loss;
      best_epoch_ = epoch_;
      stale_ = 0;
      return true;
    }
    ++stale_;
    return false;
  }

  bool should_stop() const noexcept { return stale_ >= patience_; }
  std::size_t best_epoch() const noexcept { return best_epoch_; }  // 1-based, 0 if none
  double best_loss() const noexcept { return best_loss_; }
  std::size_t epochs_seen() const noexcept { return epoch_; }

 private:
  std::size_t patience_;
  std::size_t epoch_ = 0;
  std::size_t best_epoch_ = 0;
  std::size_t stale_ = 0;
  double best_loss_ = std::numeric_limits<double>::infinity();
};

struct TrainConfig {
  AdamConfig adam;
  std::size_t batch_size = 128;
  std::size_t patience = 3;
  std::size_t max_epochs = 100;
  std::uint64_t seed = 0;
  double clip_norm = 0.0;  // 0 disables gradient clipping
  std::size_t threads = 1;
  augment::AugmentConfig augmentation;

  void validate() const {
    if (!(adam.learning_rate > 0.0)) throw InvalidArgument("learning_rate must be positive");
    if (batch_size == 0) throw InvalidArgument("batch_size must be at least 1");
    if (patience == 0) throw InvalidArgument("patience must be at least 1");
    if (max_epochs == 0) throw InvalidArgument("max_epochs must be at least 1");
    if (threads == 0) throw InvalidArgument("threads must be at least 1");
    augmentation.validate();
  }
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_top1 = 0.0;
  double val_top5 = 0.0;
  double wall_seconds = 0.0;
};

/// One stable-order log line per epoch.
inline std::string format_epoch(const EpochRecord& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "epoch=%zu train_loss=%.6f val_loss=%.6f val_top1=%.4f val_top5=%.4f "
                "wall_seconds=%.3f",
                r.epoch, r.train_loss, r.val_loss, r.val_top1, r.val_top5, r.wall_seconds);
  return buf;
}

struct EvalSummary {
  double loss = 0.0;
  double top1 = 0.0;
  double top5 = 0.0;
  std::vector<std::vector<double>> logits;
};

template <typename T>
EvalSummary evaluate_stacked(const Model<T>& model, const std::vector<Tensor<T>>& inputs,
                             const std::vector<std::size_t>& labels) {
  EvalSummary s;
  s.logits.reserve(inputs.size());
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const Tensor<T> logits = model.forward(inputs[i]);
    s.loss += cross_entropy<T>(logits.span(), labels[i]);
    s.logits.emplace_back(logits.values().begin(), logits.values().end());
  }
  s.loss /= static_cast<double>(inputs.size());
  s.top1 = eval::topk_accuracy(s.logits, labels, 1);
  s.top5 = eval::topk_accuracy(s.logits, labels, std::min<std::size_t>(5, model.config().vocab_size));
  return s;
}

template <typename T>
struct TrainResult {
  ModelParameters<T> best_parameters;
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  bool stopped_early = false;
};

namespace detail {

template <typename T>
void add_into(ModelParameters<T>& acc, const ModelParameters<T>& g) {
  auto a = acc.tensors();
  auto b = g.tensors();
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < a[i]->size(); ++j) (*a[i])[j] += (*b[i])[j];
  }
}

template <typename T>
double clip_gradients(ModelParameters<T>& g, double max_norm) {
  double sq = 0.0;
  for (auto* t : g.tensors()) {
    for (T v : t->values()) sq += static_cast<double>(v) * static_cast<double>(v);
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const T s = static_cast<T>(max_norm / norm);
    for (auto* t : g.tensors()) {
      for (T& v : t->values()) v *= s;
    }
  }
  return norm;
}

}  // namespace detail

/// Trains with Adam and validation-loss early stopping; returns the
/// parameters of the best validation epoch.
///
/// Per-sample augmentation and dropout draw from streams keyed by
/// (seed, epoch, sample), so results are bit-identical for a fixed thread
/// count and differ only by summation order across thread counts.
template <typename T>
TrainResult<T> train_loop(const ModelConfig& model_config, const TrainConfig& cfg,
                          const std::vector<Window>& train, const std::vector<Window>& val,
                          const std::vector<std::size_t>& flip_permutation,
                          const std::function<void(const EpochRecord&)>& on_epoch = {}) {
  cfg.validate();
  if (train.empty() || val.empty()) throw InvalidArgument("train and val splits must be non-empty");
  std::set<std::int64_t> train_signers;
  for (const auto& w : train) train_signers.insert(w.signer_id);
  for (const auto& w : val) {
    if (train_signers.contains(w.signer_id)) {
      throw InvalidArgument("train and val splits share signer " + std::to_string(w.signer_id));
    }
  }
  for (const auto* split : {&train, &val}) {
    for (const auto& w : *split) {
      validate_window(w, model_config.window_len, model_config.keypoints);
      if (w.label_id >= model_config.vocab_size) throw InvalidArgument("label exceeds vocab_size");
    }
  }

  Model<T> model(model_config);
  AdamState<T> adam = AdamState<T>::zeros(model_config);
  const RandomStream root(cfg.seed, 0x7EA1);

  std::vector<Tensor<T>> val_inputs;
  std::vector<std::size_t> val_labels;
  for (const auto& w : val) {
    val_inputs.push_back(stack_window<T>(w));
    val_labels.push_back(w.label_id);
  }
  const bool augmenting = cfg.augmentation.enabled.any();
  std::vector<Tensor<T>> train_inputs;
  if (!augmenting) {
    for (const auto& w : train) train_inputs.push_back(stack_window<T>(w));
  }

  TrainResult<T> result;
  result.best_parameters = model.parameters();
  EarlyStopping stopper(cfg.patience);
  const std::size_t n = train.size();
  const std::size_t threads = std::min(cfg.threads, cfg.batch_size);

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    RandomStream epoch_rng = root.split(epoch);
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    RandomStream shuffle_rng = epoch_rng.split(0);
    for (std::size_t i = n - 1; i > 0; --i) {
      std::swap(order[i], order[static_cast<std::size_t>(shuffle_rng() % (i + 1))]);
    }

    double loss_sum = 0.0;
    std::vector<ModelParameters<T>> partial(threads, ModelParameters<T>::zeros(model_config));
    std::vector<double> partial_loss(threads);
    for (std::size_t begin = 0; begin < n; begin += cfg.batch_size) {
      const std::size_t end = std::min(n, begin + cfg.batch_size);
      const std::size_t count = end - begin;
      const T inv_batch = T{1} / static_cast<T>(count);

      auto work = [&](std::size_t worker, std::size_t lo, std::size_t hi) {
        ModelParameters<T>& grads = partial[worker];
        grads.set_zero();
        partial_loss[worker] = 0.0;
        std::vector<T> dlogits(model_config.vocab_size);
        ForwardCache<T> cache;
        for (std::size_t b = lo; b < hi; ++b) {
          const std::size_t idx = order[b];
          RandomStream sample_rng = epoch_rng.split(1 + idx);
          Tensor<T> input;
          if (augmenting) {
            RandomStream aug_rng = sample_rng.split(0);
            input = stack_window<T>(
                augment::apply(cfg.augmentation, aug_rng, train[idx], flip_permutation));
          }
          RandomStream drop_rng = sample_rng.split(1);
          const Tensor<T> logits =
              model.forward_train(augmenting ? input : train_inputs[idx], &cache,
                                  model_config.dropout_rate > 0.0 ? &drop_rng : nullptr);
          const double loss = cross_entropy<T>(logits.span(), train[idx].label_id, dlogits);
          if (!std::isfinite(loss)) {
            throw NumericError("non-finite training loss at epoch " + std::to_string(epoch));
          }
          partial_loss[worker] += loss;
          for (T& g : dlogits) g *= inv_batch;
          model.backward(cache, Tensor<T>({model_config.vocab_size}, dlogits), grads);
        }
      };

      const std::size_t used = std::min(threads, count);
      if (used <= 1) {
        work(0, begin, end);
      } else {
        std::vector<std::exception_ptr> errors(used);
        {
          std::vector<std::jthread> pool;
          for (std::size_t w = 0; w < used; ++w) {
            const std::size_t lo = begin + count * w / used;
            const std::size_t hi = begin + count * (w + 1) / used;
            pool.emplace_back([&, w, lo, hi] {
              try {
                work(w, lo, hi);
              } catch (...) {
                errors[w] = std::current_exception();
              }
            });
          }
        }
        for (auto& e : errors) {
          if (e) std::rethrow_exception(e);
        }
        for (std::size_t w = 1; w < used; ++w) detail::add_into(partial[0], partial[w]);
      }
      for (std::size_t w = 0; w < used; ++w) loss_sum += partial_loss[w];

      const double norm = detail::clip_gradients(partial[0], cfg.clip_norm);
      if (!std::isfinite(norm)) {
        throw NumericError("non-finite gradient at epoch " + std::to_string(epoch));
      }
      adam_step(model.parameters(), partial[0], adam, cfg.adam);
    }

    const EvalSummary v = evaluate_stacked(model, val_inputs, val_labels);
    if (!std::isfinite(v.loss)) {
      throw NumericError("non-finite validation loss at epoch " + std::to_string(epoch));
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(n);
    rec.val_loss = v.loss;
    rec.val_top1 = v.top1;
    rec.val_top5 = v.top5;
    rec.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.history.push_back(rec);
    if (stopper.update(v.loss)) {
      result.best_parameters = model.parameters();
      result.best_epoch = epoch;
    }
    if (on_epoch) on_epoch(rec);
    if (stopper.should_stop()) {
      result.stopped_early = true;
      break;
    }
  }
  return result;
}

}  // namespace kpsign
