#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "traceneat/actions.hpp"
#include "traceneat/core.hpp"
#include "traceneat/network.hpp"
#include "traceneat/recorder.hpp"

namespace traceneat {

struct LossConfig {
  double learning_rate = 0.1;
  int patience = 30;
  int max_epochs = 300;
  double validation_fraction = 0.2;
  std::size_t min_samples_for_validation = 25;

  void validate() const {
    if (!(learning_rate > 0)) throw ValidationError("loss.learning_rate: must be > 0");
    if (patience < 1) throw ValidationError("loss.patience: must be >= 1");
    if (max_epochs < 1) throw ValidationError("loss.max_epochs: must be >= 1");
    if (!(validation_fraction > 0 && validation_fraction < 1))
      throw ValidationError("loss.validation_fraction: must be in (0, 1)");
  }
  /// Every stride-th sample (1-based) goes to validation.
  std::size_t validation_stride() const {
    return std::max<std::size_t>(2, static_cast<std::size_t>(std::lround(1.0 / validation_fraction)));
  }
};

/// A snapshot encoded against a game's action schema.
struct TrainingSample {
  FeatureVector x;
  std::size_t action = 0;
  std::vector<double> target;  // normalized parameters of `action`
};

inline TrainingSample encode(const Snapshot& s, const ActionSchema& schema) {
  const int a = schema.index_of(s.label);
  if (a < 0) throw UsageError("label action is not available in this game");
  return {s.features, static_cast<std::size_t>(a), schema.normalized_params(s.label)};
}

inline std::vector<TrainingSample> encode(const std::vector<Snapshot>& snaps, const ActionSchema& schema) {
  std::vector<TrainingSample> out;
  out.reserve(snaps.size());
  for (const auto& s : snaps) out.push_back(encode(s, schema));
  return out;
}

/// Cross-entropy on the labeled action plus squared error on that action's
/// own regression heads.
inline double loss(const Prediction& pred, std::size_t action, std::span<const double> target) {
  if (action >= pred.action_probs.size()) throw UsageError("loss: action index out of range");
  // log-softmax from logits when available, for accuracy near p = 0
  double ce;
  if (!pred.logits.empty()) {
    double m = pred.logits[0];
    for (double z : pred.logits) m = std::max(m, z);
    double sum = 0.0;
    for (double z : pred.logits) sum += std::exp(z - m);
    ce = -(pred.logits[action] - m - std::log(sum));
  } else {
    ce = -std::log(pred.action_probs[action]);
  }
  double se = 0.0;
  const auto& p = pred.params[action];
  for (std::size_t i = 0; i < target.size() && i < p.size(); ++i) se += (p[i] - target[i]) * (p[i] - target[i]);
  return ce + se;
}

inline double loss(const Prediction& pred, const ActionLabel& label, const ActionSchema& schema) {
  const int a = schema.index_of(label);
  if (a < 0) throw UsageError("loss: label action is not available in this game");
  const auto t = schema.normalized_params(label);
  return loss(pred, static_cast<std::size_t>(a), t);
}

struct GradientTape {
  std::vector<double> gradients;         // one per enabled connection
  std::vector<std::size_t> connections;  // matching Genome::connections indices
  std::vector<double> activations;       // per node, genome node order
  std::vector<double> deltas;
};

inline GradientTape backward(const Genome& g, std::span<const double> x, std::size_t action,
                             std::span<const double> target) {
  Network net(g);
  net.forward(x);
  GradientTape tape;
  net.backward(action, target, tape.gradients);
  for (std::size_t k = 0; k < net.connection_count(); ++k) tape.connections.push_back(net.gene_index(k));
  tape.activations = net.node_values();
  tape.deltas = net.node_deltas();
  return tape;
}

inline GradientTape backward(const Genome& g, const Snapshot& s, const ActionSchema& schema) {
  const auto sample = encode(s, schema);
  return backward(g, sample.x, sample.action, sample.target);
}

/// w <- w - alpha * dL/dw for every enabled connection on the tape.
inline void sgd_step(Genome& g, const GradientTape& tape, double alpha) {
  for (std::size_t k = 0; k < tape.gradients.size(); ++k)
    g.connections[tape.connections[k]].weight -= alpha * tape.gradients[k];
}

/// Patience-based stopping on a monitored loss. Epoch 0 is the untrained
/// baseline.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience) : patience_(patience) {}

  /// Records the loss after `epoch`; returns true when training should stop.
  bool update(int epoch, double monitored) {
    if (monitored < best_) {
      best_ = monitored;
      best_epoch_ = epoch;
      since_ = 0;
      improved_ = true;
    } else {
      ++since_;
      improved_ = false;
    }
    return since_ >= patience_;
  }
  bool improved() const { return improved_; }
  double best() const { return best_; }
  int best_epoch() const { return best_epoch_; }

 private:
  int patience_;
  double best_ = kInf;
  int best_epoch_ = -1;
  int since_ = 0;
  bool improved_ = false;
};

struct TrainResult {
  Genome genome;
  std::vector<double> history;  // monitored loss, index = epoch (0 = before training)
  int best_epoch = 0;
  int epochs_run = 0;
  bool used_validation = false;
};

inline double mean_loss(Network& net, const std::vector<TrainingSample>& data) {
  double sum = 0.0;
  for (const auto& s : data) {
    net.forward(s.x);
    sum += loss(net.prediction(), s.action, s.target);
  }
  return data.empty() ? 0.0 : sum / static_cast<double>(data.size());
}

/// True SGD (batch size 1) over shuffled training samples with early
/// stopping; the returned genome carries the weights of the epoch with the
/// lowest monitored loss. `monitor(net, train, validation)` computes that
/// loss; the default is the validation loss, or the training loss when there
/// is no split.
template <typename Monitor>
TrainResult train(const Genome& genome, const std::vector<TrainingSample>& samples, const LossConfig& config,
                  Rng& rng, Monitor&& monitor) {
  config.validate();
  if (samples.empty()) throw UsageError("train: no samples");
  std::vector<TrainingSample> train_set;
  std::vector<TrainingSample> val_set;
  const bool split = samples.size() >= config.min_samples_for_validation;
  const std::size_t stride = config.validation_stride();
  for (std::size_t i = 0; i < samples.size(); ++i)
    (split && i % stride == stride - 1 ? val_set : train_set).push_back(samples[i]);

  Network net(genome);
  TrainResult r;
  r.used_validation = split;
  EarlyStopping stop(config.patience);
  std::vector<double> best_weights = net.weights();
  const double initial = monitor(net, train_set, val_set);
  r.history.push_back(initial);
  stop.update(0, initial);

  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<double> grad;
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t i : order) {
      const auto& s = train_set[i];
      net.forward(s.x);
      net.backward(s.action, s.target, grad);
      auto& w = net.weights();
      for (std::size_t k = 0; k < w.size(); ++k) w[k] -= config.learning_rate * grad[k];
    }
    const double m = monitor(net, train_set, val_set);
    r.history.push_back(m);
    r.epochs_run = epoch;
    const bool done = stop.update(epoch, m);
    if (stop.improved()) best_weights = net.weights();
    if (done) break;
  }
  r.best_epoch = stop.best_epoch();
  net.weights() = best_weights;
  r.genome = genome;
  net.store(r.genome);
  return r;
}

inline TrainResult train(const Genome& genome, const std::vector<TrainingSample>& samples, const LossConfig& config,
                         Rng& rng) {
  return train(genome, samples, config, rng,
               [](Network& net, const std::vector<TrainingSample>& tr, const std::vector<TrainingSample>& val) {
                 return mean_loss(net, val.empty() ? tr : val);
               });
}

/// Snapshots of every session that covered `target`, in session order.
inline std::vector<Snapshot> filter_sessions(const TrainingDataset& d, StatementId target) {
  std::vector<Snapshot> out;
  for (const auto& s : d.sessions)
    if (s.covered.contains(target)) out.insert(out.end(), s.snapshots.begin(), s.snapshots.end());
  return out;
}

/// Classic weight mutation: each weight is perturbed by uniform noise with
/// probability `perturb`, otherwise replaced with probability `replace`.
struct WeightMutation {
  double perturb = 0.8;
  double replace = 0.1;
  double power = 0.5;
  double replace_range = 1.0;
};

inline void perturb_weights(Genome& g, const WeightMutation& m, Rng& rng) {
  for (auto& c : g.connections) {
    const double u = rng.uniform01();
    if (u < m.perturb) c.weight += rng.uniform(-m.power, m.power);
    else if (u < m.perturb + m.replace) c.weight = rng.uniform(-m.replace_range, m.replace_range);
  }
}

struct WeightChange {
  Genome genome;
  bool used_sgd = false;
  bool fell_back = false;  // SGD drawn but no matching sessions
};

/// With probability p trains on the sessions covering `target`, otherwise
/// (or when there are none) applies the classic perturbation.
inline WeightChange hybrid_weight_change(const Genome& g, const std::vector<TrainingSample>& matching, double p,
                                         const LossConfig& config, const WeightMutation& mutation, Rng& rng) {
  if (!(p >= 0 && p <= 1)) throw ValidationError("p_gradient_descent: must be in [0, 1]");
  WeightChange out;
  const bool draw = rng.uniform01() < p;
  if (draw && !matching.empty()) {
    out.genome = train(g, matching, config, rng).genome;
    out.used_sgd = true;
    return out;
  }
  out.fell_back = draw;
  out.genome = g;
  perturb_weights(out.genome, mutation, rng);
  return out;
}

}  // namespace traceneat
