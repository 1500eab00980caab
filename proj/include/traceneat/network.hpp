#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "traceneat/actions.hpp"
#include "traceneat/core.hpp"
#include "traceneat/features.hpp"

namespace traceneat {

enum class NodeKind : std::uint8_t { Input, Bias, Hidden, ClassOutput, RegOutput };

inline const char* to_string(NodeKind k) {
  switch (k) {
    case NodeKind::Input: return "input";
    case NodeKind::Bias: return "bias";
    case NodeKind::Hidden: return "hidden";
    case NodeKind::ClassOutput: return "class";
    case NodeKind::RegOutput: return "reg";
  }
  return "?";
}

struct NodeGene {
  int id = 0;
  NodeKind kind = NodeKind::Hidden;
  int action = -1;  // ClassOutput / RegOutput
  int param = -1;   // RegOutput
  friend bool operator==(const NodeGene&, const NodeGene&) = default;
};

struct ConnectionGene {
  int from = 0;
  int to = 0;
  double weight = 0.0;
  bool enabled = true;
  int innovation = 0;
  friend bool operator==(const ConnectionGene&, const ConnectionGene&) = default;
};

/// Hands out innovation numbers per structural signature (from, to) and
/// node ids per split connection, for the lifetime of one search.
class InnovationTracker {
 public:
  explicit InnovationTracker(int first_free_node = 0) : next_node_(first_free_node) {}

  int connection(int from, int to) {
    auto [it, inserted] = connections_.try_emplace({from, to}, next_innovation_);
    if (inserted) ++next_innovation_;
    return it->second;
  }
  int split_node(int innovation) {
    auto [it, inserted] = splits_.try_emplace(innovation, next_node_);
    if (inserted) ++next_node_;
    return it->second;
  }
  void reserve_node(int id) { next_node_ = std::max(next_node_, id + 1); }
  int next_innovation() const { return next_innovation_; }

 private:
  std::map<std::pair<int, int>, int> connections_;
  std::map<int, int> splits_;
  int next_innovation_ = 0;
  int next_node_ = 0;
};

struct Genome {
  std::vector<NodeGene> nodes;              // sorted by id
  std::vector<ConnectionGene> connections;  // sorted by innovation
  double fitness = kInf;                    // minimized
  int species_id = -1;

  std::size_t input_count() const {
    return static_cast<std::size_t>(std::count_if(
        nodes.begin(), nodes.end(), [](const NodeGene& n) { return n.kind == NodeKind::Input; }));
  }
  const NodeGene* node(int id) const {
    auto it = std::lower_bound(nodes.begin(), nodes.end(), id,
                               [](const NodeGene& n, int v) { return n.id < v; });
    return it != nodes.end() && it->id == id ? &*it : nullptr;
  }
  ConnectionGene* find_connection(int from, int to) {
    for (auto& c : connections)
      if (c.from == from && c.to == to) return &c;
    return nullptr;
  }
  void add_node(NodeGene n) {
    nodes.insert(std::lower_bound(nodes.begin(), nodes.end(), n.id,
                                  [](const NodeGene& a, int v) { return a.id < v; }),
                 n);
  }
  void add_connection(ConnectionGene c) {
    connections.insert(std::lower_bound(connections.begin(), connections.end(), c.innovation,
                                        [](const ConnectionGene& a, int v) { return a.innovation < v; }),
                       c);
  }
  std::vector<double> weights() const {
    std::vector<double> w;
    for (const auto& c : connections) w.push_back(c.weight);
    return w;
  }
  /// Same nodes, connections, flags and innovations; weights may differ.
  bool same_structure(const Genome& o) const {
    if (nodes != o.nodes || connections.size() != o.connections.size()) return false;
    for (std::size_t i = 0; i < connections.size(); ++i) {
      const auto& a = connections[i];
      const auto& b = o.connections[i];
      if (a.from != b.from || a.to != b.to || a.enabled != b.enabled || a.innovation != b.innovation)
        return false;
    }
    return true;
  }
};

/// Fixed node-id layout shared by every genome of one game: inputs, bias,
/// one class output per action, one regression output per action parameter.
struct NetworkLayout {
  int inputs = 0;
  std::vector<int> params_per_action;

  static NetworkLayout of(const FeatureSchema& fs, const ActionSchema& as) {
    NetworkLayout l;
    l.inputs = static_cast<int>(fs.size());
    for (const auto& a : as.actions()) l.params_per_action.push_back(static_cast<int>(a.params.size()));
    return l;
  }
  int bias_id() const { return inputs; }
  int class_id(int action) const { return inputs + 1 + action; }
  int actions() const { return static_cast<int>(params_per_action.size()); }
  int reg_id(int action, int param) const {
    int id = inputs + 1 + actions();
    for (int a = 0; a < action; ++a) id += params_per_action[static_cast<std::size_t>(a)];
    return id + param;
  }
  int first_free_id() const {
    int n = inputs + 1 + actions();
    for (int p : params_per_action) n += p;
    return n;
  }
};

/// Minimal-start genome: every input and the bias fully connected to every
/// output, weights uniform in [-1, 1], no hidden nodes.
inline Genome initial_genome(const NetworkLayout& layout, InnovationTracker& tracker, Rng& rng) {
  Genome g;
  std::vector<int> sources;
  for (int i = 0; i < layout.inputs; ++i) {
    g.nodes.push_back({i, NodeKind::Input});
    sources.push_back(i);
  }
  g.nodes.push_back({layout.bias_id(), NodeKind::Bias});
  sources.push_back(layout.bias_id());
  std::vector<int> outputs;
  for (int a = 0; a < layout.actions(); ++a) {
    g.nodes.push_back({layout.class_id(a), NodeKind::ClassOutput, a});
    outputs.push_back(layout.class_id(a));
  }
  for (int a = 0; a < layout.actions(); ++a)
    for (int p = 0; p < layout.params_per_action[static_cast<std::size_t>(a)]; ++p) {
      g.nodes.push_back({layout.reg_id(a, p), NodeKind::RegOutput, a, p});
      outputs.push_back(layout.reg_id(a, p));
    }
  std::sort(g.nodes.begin(), g.nodes.end(), [](auto& x, auto& y) { return x.id < y.id; });
  tracker.reserve_node(layout.first_free_id() - 1);
  for (int o : outputs)
    for (int s : sources) g.add_connection({s, o, rng.uniform(-1.0, 1.0), true, tracker.connection(s, o)});
  return g;
}

struct Prediction {
  std::vector<double> action_probs;
  std::vector<std::vector<double>> params;  // per action, each in [-1, 1]
  std::vector<double> logits;               // raw class outputs
};

inline std::vector<double> softmax(std::span<const double> z) {
  std::vector<double> p(z.size());
  if (z.empty()) return p;
  const double m = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) sum += (p[i] = std::exp(z[i] - m));
  for (double& v : p) v /= sum;
  return p;
}

/// Feed-forward evaluator compiled from a genome: enabled connections in a
/// topological node order. Weights are held by the evaluator so training can
/// update them in place and write them back at the end.
class Network {
 public:
  explicit Network(const Genome& g) {
    const std::size_t n = g.nodes.size();
    kinds_.resize(n);
    action_.resize(n);
    param_.resize(n);
    std::map<int, std::size_t> index;
    for (std::size_t i = 0; i < n; ++i) {
      index[g.nodes[i].id] = i;
      kinds_[i] = g.nodes[i].kind;
      action_[i] = g.nodes[i].action;
      param_[i] = g.nodes[i].param;
      if (kinds_[i] == NodeKind::Input) inputs_.push_back(i);
      if (kinds_[i] == NodeKind::Bias) bias_.push_back(i);
      if (kinds_[i] == NodeKind::ClassOutput) {
        class_nodes_.resize(std::max<std::size_t>(class_nodes_.size(), static_cast<std::size_t>(action_[i]) + 1));
        class_nodes_[static_cast<std::size_t>(action_[i])] = i;
      }
    }
    if (class_nodes_.empty()) throw ValidationError("genome has no class outputs");
    reg_nodes_.resize(class_nodes_.size());
    for (std::size_t i = 0; i < n; ++i)
      if (kinds_[i] == NodeKind::RegOutput) {
        auto& v = reg_nodes_[static_cast<std::size_t>(action_[i])];
        v.resize(std::max<std::size_t>(v.size(), static_cast<std::size_t>(param_[i]) + 1));
        v[static_cast<std::size_t>(param_[i])] = i;
      }

    incoming_.resize(n);
    outgoing_.resize(n);
    std::vector<int> indegree(n, 0);
    for (std::size_t c = 0; c < g.connections.size(); ++c) {
      const auto& cg = g.connections[c];
      if (!cg.enabled) continue;
      auto from = index.find(cg.from);
      auto to = index.find(cg.to);
      if (from == index.end() || to == index.end())
        throw ValidationError("connection " + std::to_string(cg.innovation) + " references a missing node");
      const std::size_t k = weights_.size();
      weights_.push_back(cg.weight);
      conn_gene_.push_back(c);
      conn_from_.push_back(from->second);
      conn_to_.push_back(to->second);
      incoming_[to->second].push_back(k);
      outgoing_[from->second].push_back(k);
      ++indegree[to->second];
    }
    // Kahn's algorithm; ties broken by node order for determinism.
    std::vector<std::size_t> ready;
    for (std::size_t i = 0; i < n; ++i)
      if (indegree[i] == 0) ready.push_back(i);
    std::size_t head = 0;
    while (head < ready.size()) {
      const std::size_t v = ready[head++];
      order_.push_back(v);
      for (std::size_t k : outgoing_[v])
        if (--indegree[conn_to_[k]] == 0) ready.push_back(conn_to_[k]);
    }
    if (order_.size() != n) throw ValidationError("genome contains a cycle among enabled connections");
    values_.assign(n, 0.0);
    pre_.assign(n, 0.0);
  }

  std::size_t input_count() const { return inputs_.size(); }
  std::size_t action_count() const { return class_nodes_.size(); }
  std::size_t connection_count() const { return weights_.size(); }
  std::vector<double>& weights() { return weights_; }
  const std::vector<double>& weights() const { return weights_; }

  /// Forward pass. Afterwards node_values() holds activations.
  Prediction activate(std::span<const double> x) {
    forward(x);
    return prediction();
  }

  void forward(std::span<const double> x) {
    if (x.size() != inputs_.size())
      throw UsageError("activate: expected " + std::to_string(inputs_.size()) + " inputs, got " +
                       std::to_string(x.size()));
    for (std::size_t i = 0; i < inputs_.size(); ++i) values_[inputs_[i]] = x[i];
    for (std::size_t b : bias_) values_[b] = 1.0;
    for (std::size_t v : order_) {
      const NodeKind k = kinds_[v];
      if (k == NodeKind::Input || k == NodeKind::Bias) continue;
      double sum = 0.0;
      for (std::size_t c : incoming_[v]) sum += weights_[c] * values_[conn_from_[c]];
      pre_[v] = sum;
      values_[v] = k == NodeKind::ClassOutput ? sum : std::tanh(sum);
    }
  }

  Prediction prediction() const {
    Prediction p;
    p.logits.reserve(class_nodes_.size());
    for (std::size_t n : class_nodes_) p.logits.push_back(values_[n]);
    p.action_probs = softmax(p.logits);
    p.params.resize(class_nodes_.size());
    for (std::size_t a = 0; a < reg_nodes_.size(); ++a)
      for (std::size_t n : reg_nodes_[a]) p.params[a].push_back(values_[n]);
    return p;
  }

  /// Gradient of the masked multitask loss with respect to every enabled
  /// connection weight (in evaluator order), given the last forward pass.
  /// `target_params` are the normalized label parameters of `action`.
  void backward(std::size_t action, std::span<const double> target_params,
                std::vector<double>& grad) {
    deltas_.assign(values_.size(), 0.0);
    std::vector<double> logits;
    for (std::size_t n : class_nodes_) logits.push_back(values_[n]);
    const auto probs = softmax(logits);
    for (std::size_t a = 0; a < class_nodes_.size(); ++a)
      deltas_[class_nodes_[a]] = probs[a] - (a == action ? 1.0 : 0.0);
    const auto& heads = reg_nodes_[action];
    for (std::size_t p = 0; p < heads.size() && p < target_params.size(); ++p) {
      const double out = values_[heads[p]];
      deltas_[heads[p]] = 2.0 * (out - target_params[p]) * (1.0 - out * out);
    }
    for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
      const std::size_t v = *it;
      if (kinds_[v] != NodeKind::Hidden) continue;
      double upstream = 0.0;
      for (std::size_t c : outgoing_[v]) upstream += weights_[c] * deltas_[conn_to_[c]];
      deltas_[v] = (1.0 - values_[v] * values_[v]) * upstream;
    }
    grad.resize(weights_.size());
    for (std::size_t c = 0; c < weights_.size(); ++c) grad[c] = values_[conn_from_[c]] * deltas_[conn_to_[c]];
  }

  const std::vector<double>& node_values() const { return values_; }
  const std::vector<double>& node_deltas() const { return deltas_; }
  /// Index into Genome::connections of evaluator connection `k`.
  std::size_t gene_index(std::size_t k) const { return conn_gene_[k]; }

  /// Writes the evaluator's weights back into the genome it was built from.
  void store(Genome& g) const {
    for (std::size_t k = 0; k < weights_.size(); ++k) g.connections[conn_gene_[k]].weight = weights_[k];
  }

 private:
  std::vector<NodeKind> kinds_;
  std::vector<int> action_;
  std::vector<int> param_;
  std::vector<std::size_t> inputs_;
  std::vector<std::size_t> bias_;
  std::vector<std::size_t> class_nodes_;
  std::vector<std::vector<std::size_t>> reg_nodes_;
  std::vector<std::vector<std::size_t>> incoming_;
  std::vector<std::vector<std::size_t>> outgoing_;
  std::vector<double> weights_;
  std::vector<std::size_t> conn_gene_;
  std::vector<std::size_t> conn_from_;
  std::vector<std::size_t> conn_to_;
  std::vector<std::size_t> order_;
  std::vector<double> values_;
  std::vector<double> pre_;
  std::vector<double> deltas_;
};

inline Prediction activate(const Genome& g, std::span<const double> x) {
  Network net(g);
  return net.activate(x);
}

/// Argmax action (ties to the lowest index) with its parameters mapped back
/// to their ranges.
inline InputEvent decode_action(const Prediction& pred, const ActionSchema& schema) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < pred.action_probs.size(); ++i)
    if (pred.action_probs[i] > pred.action_probs[best]) best = i;
  const auto label = schema.denormalize_label(best, pred.params.at(best));
  return to_event(label);
}

/// True when adding from -> to keeps the enabled graph acyclic.
inline bool creates_cycle(const Genome& g, int from, int to) {
  if (from == to) return true;
  // Is `from` reachable from `to`?
  std::vector<int> stack{to};
  std::vector<int> seen;
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    if (v == from) return true;
    if (std::find(seen.begin(), seen.end(), v) != seen.end()) continue;
    seen.push_back(v);
    for (const auto& c : g.connections)
      if (c.from == v) stack.push_back(c.to);
  }
  return false;
}

// -- serialization ----------------------------------------------------------

inline nlohmann::json genome_to_json(const Genome& g) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& n : g.nodes) {
    nlohmann::json jn = {{"id", n.id}, {"kind", to_string(n.kind)}};
    if (n.action >= 0) jn["action"] = n.action;
    if (n.param >= 0) jn["param"] = n.param;
    nodes.push_back(jn);
  }
  nlohmann::json conns = nlohmann::json::array();
  for (const auto& c : g.connections)
    conns.push_back({{"innovation", c.innovation}, {"from", c.from}, {"to", c.to},
                     {"weight", c.weight}, {"enabled", c.enabled}});
  return {{"nodes", nodes}, {"connections", conns}};
}

inline Genome genome_from_json(const nlohmann::json& j) {
  Genome g;
  try {
    for (const auto& jn : j.at("nodes")) {
      NodeGene n;
      n.id = jn.at("id").get<int>();
      const auto kind = jn.at("kind").get<std::string>();
      if (kind == "input") n.kind = NodeKind::Input;
      else if (kind == "bias") n.kind = NodeKind::Bias;
      else if (kind == "hidden") n.kind = NodeKind::Hidden;
      else if (kind == "class") n.kind = NodeKind::ClassOutput;
      else if (kind == "reg") n.kind = NodeKind::RegOutput;
      else throw ParseError("genome: unknown node kind '" + kind + "'");
      n.action = jn.value("action", -1);
      n.param = jn.value("param", -1);
      g.add_node(n);
    }
    for (const auto& jc : j.at("connections"))
      g.add_connection({jc.at("from").get<int>(), jc.at("to").get<int>(), jc.at("weight").get<double>(),
                        jc.at("enabled").get<bool>(), jc.at("innovation").get<int>()});
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("genome: ") + e.what());
  }
  Network check(g);  // rejects cycles and dangling references
  (void)check;
  return g;
}

}  // namespace traceneat
