#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "traceneat/actions.hpp"
#include "traceneat/core.hpp"
#include "traceneat/features.hpp"
#include "traceneat/game.hpp"
#include "traceneat/gradient.hpp"
#include "traceneat/network.hpp"
#include "traceneat/recorder.hpp"

namespace traceneat {

struct SearchConfig {
  std::size_t population_size = 100;
  int robustness_reps = 10;
  int max_generations = 200;        // 0 = no generation limit
  double time_budget_seconds = 0;   // 0 = no wall-clock limit
  double p_gradient_descent = 0.0;

  double weight_mutation_rate = 0.8;
  WeightMutation weight_mutation;
  double add_node_rate = 0.03;
  double add_connection_rate = 0.05;
  double crossover_rate = 0.75;
  double interspecies_rate = 0.001;
  double survival_threshold = 0.2;

  double compatibility_threshold = 3.0;
  double c_excess = 1.0;
  double c_disjoint = 1.0;
  double c_weight = 0.0;
  int stale_generations = 15;

  int episode_ticks = 600;
  int max_robustness_checks = 3;  // per generation
  DurationLimits limits;
  LossConfig loss;
  std::uint64_t seed = 0;
  unsigned threads = 1;

  void validate() const {
    auto prob = [](double p, const char* name) {
      if (!(p >= 0 && p <= 1)) throw ValidationError(std::string("search.") + name + ": must be in [0, 1]");
    };
    if (population_size < 2) throw ValidationError("search.population_size: must be >= 2");
    if (robustness_reps < 1) throw ValidationError("search.robustness_reps: must be >= 1");
    if (max_generations < 0 || time_budget_seconds < 0 || (max_generations == 0 && time_budget_seconds == 0))
      throw ValidationError("search.budget: need a positive generation or time budget");
    prob(p_gradient_descent, "p_gradient_descent");
    prob(weight_mutation_rate, "weight_mutation_rate");
    prob(weight_mutation.perturb, "weight_mutation.perturb");
    prob(weight_mutation.replace, "weight_mutation.replace");
    if (weight_mutation.perturb + weight_mutation.replace > 1)
      throw ValidationError("search.weight_mutation: perturb + replace must be <= 1");
    prob(add_node_rate, "add_node_rate");
    prob(add_connection_rate, "add_connection_rate");
    prob(crossover_rate, "crossover_rate");
    prob(interspecies_rate, "interspecies_rate");
    if (!(survival_threshold > 0 && survival_threshold <= 1))
      throw ValidationError("search.survival_threshold: must be in (0, 1]");
    if (!(compatibility_threshold > 0)) throw ValidationError("search.compatibility_threshold: must be > 0");
    if (c_excess < 0 || c_disjoint < 0 || c_weight < 0)
      throw ValidationError("search.compatibility coefficients: must be >= 0");
    if (stale_generations < 1) throw ValidationError("search.stale_generations: must be >= 1");
    if (episode_ticks < 1) throw ValidationError("search.episode_ticks: must be >= 1");
    if (max_robustness_checks < 1) throw ValidationError("search.max_robustness_checks: must be >= 1");
    if (limits.key_max < 1 || limits.wait_max < 1) throw ValidationError("search.limits: must be >= 1");
    loss.validate();
  }
};

// -- speciation and reproduction ------------------------------------------------

/// Excess/disjoint gene distance; N is the connection count of the larger
/// genome. The weight term uses c_weight (0 by default).
inline double compatibility(const Genome& a, const Genome& b, const SearchConfig& cfg) {
  const auto& ca = a.connections;
  const auto& cb = b.connections;
  if (ca.empty() && cb.empty()) return 0.0;
  const int max_a = ca.empty() ? -1 : ca.back().innovation;
  const int max_b = cb.empty() ? -1 : cb.back().innovation;
  std::size_t i = 0, j = 0, excess = 0, disjoint = 0, matching = 0;
  double wdiff = 0.0;
  while (i < ca.size() || j < cb.size()) {
    if (i < ca.size() && j < cb.size() && ca[i].innovation == cb[j].innovation) {
      wdiff += std::abs(ca[i].weight - cb[j].weight);
      ++matching;
      ++i;
      ++j;
    } else if (j >= cb.size() || (i < ca.size() && ca[i].innovation < cb[j].innovation)) {
      (ca[i].innovation > max_b ? excess : disjoint)++;
      ++i;
    } else {
      (cb[j].innovation > max_a ? excess : disjoint)++;
      ++j;
    }
  }
  const double n = static_cast<double>(std::max(ca.size(), cb.size()));
  double d = cfg.c_excess * static_cast<double>(excess) / n + cfg.c_disjoint * static_cast<double>(disjoint) / n;
  if (cfg.c_weight != 0.0 && matching) d += cfg.c_weight * wdiff / static_cast<double>(matching);
  return d;
}

/// Offspring of `fitter` and `other`: matching genes take either parent's
/// weight; disjoint and excess genes come from the fitter parent.
inline Genome crossover(const Genome& fitter, const Genome& other, Rng& rng) {
  Genome child;
  child.nodes = fitter.nodes;
  std::size_t j = 0;
  for (const auto& c : fitter.connections) {
    while (j < other.connections.size() && other.connections[j].innovation < c.innovation) ++j;
    ConnectionGene g = c;
    if (j < other.connections.size() && other.connections[j].innovation == c.innovation) {
      const auto& o = other.connections[j];
      if (rng.bernoulli(0.5)) g.weight = o.weight;
      if (!c.enabled || !o.enabled) g.enabled = !rng.bernoulli(0.75);
    }
    child.connections.push_back(g);
  }
  return child;
}

/// Splits a random enabled connection. Returns false when nothing changed.
inline bool mutate_add_node(Genome& g, InnovationTracker& tracker, Rng& rng) {
  std::vector<std::size_t> enabled;
  for (std::size_t i = 0; i < g.connections.size(); ++i)
    if (g.connections[i].enabled) enabled.push_back(i);
  if (enabled.empty()) return false;
  const auto pick = enabled[rng.index(enabled.size())];
  const ConnectionGene old = g.connections[pick];
  const int node = tracker.split_node(old.innovation);
  if (g.node(node)) return false;
  g.connections[pick].enabled = false;
  g.add_node({node, NodeKind::Hidden});
  g.add_connection({old.from, node, 1.0, true, tracker.connection(old.from, node)});
  g.add_connection({node, old.to, old.weight, true, tracker.connection(node, old.to)});
  return true;
}

/// Adds one feed-forward connection between unconnected nodes.
inline bool mutate_add_connection(Genome& g, InnovationTracker& tracker, Rng& rng, int attempts = 20) {
  std::vector<int> sources, sinks;
  for (const auto& n : g.nodes) {
    if (n.kind == NodeKind::Input || n.kind == NodeKind::Bias || n.kind == NodeKind::Hidden) sources.push_back(n.id);
    if (n.kind != NodeKind::Input && n.kind != NodeKind::Bias) sinks.push_back(n.id);
  }
  if (sources.empty() || sinks.empty()) return false;
  for (int k = 0; k < attempts; ++k) {
    const int from = sources[rng.index(sources.size())];
    const int to = sinks[rng.index(sinks.size())];
    if (from == to || g.find_connection(from, to) || creates_cycle(g, from, to)) continue;
    g.add_connection({from, to, rng.uniform(-1.0, 1.0), true, tracker.connection(from, to)});
    return true;
  }
  return false;
}

struct MutationCounters {
  std::size_t sgd = 0;
  std::size_t perturb = 0;
  std::size_t fallback = 0;  // SGD drawn without matching sessions
  std::size_t add_node = 0;
  std::size_t add_connection = 0;
};

/// Structural mutations per configured rates.
inline void mutate_structure(Genome& g, const SearchConfig& cfg, InnovationTracker& tracker, Rng& rng,
                             MutationCounters& counters) {
  if (rng.bernoulli(cfg.add_node_rate) && mutate_add_node(g, tracker, rng)) ++counters.add_node;
  if (rng.bernoulli(cfg.add_connection_rate) && mutate_add_connection(g, tracker, rng)) ++counters.add_connection;
}

/// Weight change through the hybrid operator, if the weight mutation fires.
inline void mutate_weights(Genome& g, const SearchConfig& cfg, const std::vector<TrainingSample>& matching, Rng& rng,
                           MutationCounters& counters) {
  if (!rng.bernoulli(cfg.weight_mutation_rate)) return;
  auto r = hybrid_weight_change(g, matching, cfg.p_gradient_descent, cfg.loss, cfg.weight_mutation, rng);
  g = std::move(r.genome);
  if (r.used_sgd) ++counters.sgd;
  else ++counters.perturb;
  if (r.fell_back) ++counters.fallback;
}

/// Structural then weight mutation on one genome.
inline Genome mutate(Genome g, const SearchConfig& cfg, InnovationTracker& tracker,
                     const std::vector<TrainingSample>& matching, Rng& rng, MutationCounters& counters) {
  mutate_structure(g, cfg, tracker, rng, counters);
  mutate_weights(g, cfg, matching, rng, counters);
  return g;
}

struct Species {
  int id = 0;
  Genome representative;
  std::vector<std::size_t> members;  // population indices
  double best_goodness = -kInf;
  int stale = 0;
};

// -- episodes ------------------------------------------------------------------

/// Turns chosen actions into tick-stamped input events: a key press holds its
/// key for `duration` ticks, mouse actions take one tick, a no-op waits.
class ActionScheduler {
 public:
  bool idle(std::int64_t t) const { return t >= busy_until_; }
  void start(const ActionLabel& a, std::int64_t t) {
    switch (a.kind) {
      case ActionKind::KeyPress:
        pending_.push_back(InputEvent::key_down(a.key, t));
        pending_.push_back(InputEvent::key_up(a.key, t + std::max(1, a.duration)));
        busy_until_ = t + std::max(1, a.duration);
        break;
      case ActionKind::MouseMove:
        pending_.push_back(InputEvent::mouse_move(a.x, a.y, t));
        busy_until_ = t + 1;
        break;
      case ActionKind::MouseClick:
        pending_.push_back(InputEvent::mouse_click(a.x, a.y, t));
        busy_until_ = t + 1;
        break;
      case ActionKind::NoOp: busy_until_ = t + std::max(1, a.duration); break;
    }
  }
  /// Moves the events due at tick t into `out`.
  void collect(std::int64_t t, std::vector<InputEvent>& out) {
    for (auto it = pending_.begin(); it != pending_.end();) {
      if (it->tick == t) {
        out.push_back(*it);
        it = pending_.erase(it);
      } else {
        ++it;
      }
    }
  }

 private:
  std::vector<InputEvent> pending_;
  std::int64_t busy_until_ = 0;
};

/// Everything a genome needs to play one game.
struct PlayContext {
  std::shared_ptr<const GameSpec> spec;
  FeatureSchema features;
  ActionSchema actions;
  NetworkLayout layout;

  static PlayContext of(std::shared_ptr<const GameSpec> spec, DurationLimits limits = {}) {
    auto fs = FeatureSchema::of(*spec);
    auto as = ActionSchema::of(*spec, limits);
    auto layout = NetworkLayout::of(fs, as);
    return {std::move(spec), std::move(fs), std::move(as), std::move(layout)};
  }
};

struct EpisodeResult {
  bool covered_target = false;
  double fitness = kInf;
  std::vector<char> covered;
  std::int64_t ticks = 0;
  bool won = false;
};

/// Plays one bounded episode with the network choosing actions. With
/// `stop_on_target` the episode ends as soon as the target is covered.
inline EpisodeResult run_episode(Network& net, const PlayContext& ctx, std::uint64_t seed, StatementId target,
                                 int max_ticks, bool stop_on_target) {
  GameInstance game(ctx.spec, seed);
  ActionScheduler sched;
  std::vector<InputEvent> events;
  while (!game.is_game_over() && game.tick() < max_ticks) {
    if (stop_on_target && target >= 0 && game.is_covered(target)) break;
    const auto t = game.tick();
    events.clear();
    sched.collect(t, events);
    if (sched.idle(t)) {
      const auto x = extract(game, ctx.features);
      const auto pred = net.activate(x);
      std::size_t best = 0;
      for (std::size_t i = 1; i < pred.action_probs.size(); ++i)
        if (pred.action_probs[i] > pred.action_probs[best]) best = i;
      sched.start(ctx.actions.denormalize_label(best, pred.params[best]), t);
      sched.collect(t, events);
    }
    game.step(events);
  }
  EpisodeResult r;
  r.ticks = game.tick();
  if (target >= 0) {
    r.covered_target = game.is_covered(target);
    r.fitness = r.covered_target ? 0.0 : game.approach_level(target) + game.branch_distance(target);
  }
  r.covered = game.coverage_bits();
  for (StatementId w : ctx.spec->winning_statements())
    if (game.is_covered(w)) r.won = true;
  return r;
}

inline EpisodeResult run_episode(const Genome& g, const PlayContext& ctx, std::uint64_t seed, StatementId target,
                                 int max_ticks, bool stop_on_target = false) {
  Network net(g);
  return run_episode(net, ctx, seed, target, max_ticks, stop_on_target);
}

/// approach level + normalized branch distance after one episode; 0 when the
/// target was covered.
inline double fitness(const Genome& g, const PlayContext& ctx, std::uint64_t seed, StatementId target,
                      int max_ticks) {
  return run_episode(g, ctx, seed, target, max_ticks, true).fitness;
}

struct RobustnessResult {
  bool passed = false;
  std::vector<std::uint64_t> seeds;
  std::vector<char> always_covered;  // statements covered in every rep (when passed)
  std::int64_t ticks = 0;
  int reps_run = 0;
};

/// Replays `episode(seed)` on `reps` fresh seeds; passes iff every run covers
/// the target. Stops at the first failing run.
inline RobustnessResult robustness_check(const std::function<EpisodeResult(std::uint64_t)>& episode, int reps,
                                         Rng& seeds) {
  if (reps < 1) throw ValidationError("robustness_check: reps must be >= 1");
  RobustnessResult r;
  r.passed = true;
  for (int i = 0; i < reps; ++i) {
    const auto seed = seeds.next_u64();
    r.seeds.push_back(seed);
    const auto e = episode(seed);
    ++r.reps_run;
    r.ticks += e.ticks;
    if (!e.covered_target) {
      r.passed = false;
      r.always_covered.clear();
      return r;
    }
    if (r.always_covered.empty()) r.always_covered = e.covered;
    else
      for (std::size_t k = 0; k < e.covered.size(); ++k) r.always_covered[k] &= e.covered[k];
  }
  return r;
}

inline RobustnessResult robustness_check(const Genome& g, const PlayContext& ctx, StatementId target, int reps,
                                         int max_ticks, Rng& seeds) {
  Network net(g);
  return robustness_check([&](std::uint64_t s) { return run_episode(net, ctx, s, target, max_ticks, false); }, reps,
                          seeds);
}

/// First uncovered statement whose control-dependence parent is covered, in
/// breadth-first order from the entry statements (children by ascending id).
inline std::optional<StatementId> select_target(const ControlDependenceGraph& cdg, const std::vector<char>& covered) {
  std::deque<StatementId> queue(cdg.entries.begin(), cdg.entries.end());
  while (!queue.empty()) {
    const StatementId n = queue.front();
    queue.pop_front();
    for (StatementId c : cdg.children(n)) {
      if (!covered[static_cast<std::size_t>(c)]) return c;
      queue.push_back(c);
    }
  }
  return std::nullopt;
}

inline std::optional<StatementId> select_target(const ControlDependenceGraph& cdg, const CoverageSet& covered) {
  std::vector<char> bits(cdg.nodes.size(), 0);
  for (StatementId s : covered) bits[static_cast<std::size_t>(s)] = 1;
  return select_target(cdg, bits);
}

// -- search ----------------------------------------------------------------------

struct SuiteEntry {
  StatementId target = -1;
  Genome genome;
  std::vector<std::uint64_t> seeds;
};

struct DynamicTestSuite {
  std::string game_id;
  std::vector<SuiteEntry> entries;
};

struct TimelinePoint {
  std::int64_t ticks = 0;  // cumulative engine ticks
  int generation = 0;
  std::size_t covered = 0;
  friend bool operator==(const TimelinePoint&, const TimelinePoint&) = default;
};

struct TargetRecord {
  StatementId target = -1;
  int generations = 0;
  bool covered = false;
};

struct SearchStats {
  std::string game_id;
  std::size_t statement_count = 0;
  std::vector<TimelinePoint> timeline;
  std::vector<TargetRecord> targets;
  std::vector<StatementId> covered;
  std::vector<StatementId> winning_reached;
  MutationCounters mutations;
  int generations = 0;
  std::int64_t ticks = 0;
  std::optional<int> full_coverage_generation;
  bool timed_out = false;
  double elapsed_seconds = 0;  // informational, excluded from hashes

  double coverage_percent() const {
    return statement_count ? 100.0 * static_cast<double>(covered.size()) / static_cast<double>(statement_count) : 0;
  }
};

struct SearchResult {
  DynamicTestSuite suite;
  SearchStats stats;
};

namespace detail {

template <typename F>
void parallel_for(std::size_t n, unsigned threads, F&& f) {
  if (threads <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::vector<std::thread> pool;
  const unsigned t = std::min<unsigned>(threads, static_cast<unsigned>(n));
  for (unsigned k = 0; k < t; ++k)
    pool.emplace_back([&, k] {
      for (std::size_t i = k; i < n; i += t) f(i);
    });
  for (auto& th : pool) th.join();
}

}  // namespace detail

/// Evolves one network per target statement until every statement is
/// reliably covered or the budget runs out.
class Search {
 public:
  Search(std::shared_ptr<const GameSpec> spec, const TrainingDataset* dataset, SearchConfig cfg)
      : cfg_(cfg), ctx_(PlayContext::of(spec, cfg.limits)), rng_(mix_seed(cfg.seed, 0x5ea2c4)),
        seed_rng_(mix_seed(cfg.seed, 0x2eed5)) {
    cfg_.validate();
    if (dataset) {
      check_dataset(*dataset, *spec);
      dataset_ = *dataset;
    }
    if (!dataset_ || dataset_->snapshot_count() == 0) cfg_.p_gradient_descent = 0.0;
    tracker_ = InnovationTracker(ctx_.layout.first_free_id());
  }

  SearchResult run() {
    const auto start = std::chrono::steady_clock::now();
    auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };
    const auto& spec = *ctx_.spec;
    SearchResult res;
    res.suite.game_id = spec.id();
    auto& st = res.stats;
    st.game_id = spec.id();
    st.statement_count = spec.statement_count();

    covered_.assign(spec.statement_count(), 0);
    for (StatementId e : spec.entry_statements()) covered_[static_cast<std::size_t>(e)] = 1;
    for (std::size_t i = 0; i < cfg_.population_size; ++i)
      population_.push_back(initial_genome(ctx_.layout, tracker_, rng_));
    st.timeline.push_back({0, 0, count_covered()});
    if (count_covered() == spec.statement_count()) st.full_coverage_generation = 0;

    auto target = select_target(cdg(), covered_);
    begin_target(target, res);

    while (target) {
      if (cfg_.max_generations > 0 && st.generations >= cfg_.max_generations) break;
      if (cfg_.time_budget_seconds > 0 && elapsed() >= cfg_.time_budget_seconds) break;
      ++st.generations;
      ++st.targets.back().generations;

      // evaluate everyone on the current target with one shared episode seed
      const auto episode_seed = mix_seed(cfg_.seed, 0xe9150de000000000ULL + static_cast<std::uint64_t>(st.generations));
      std::vector<EpisodeResult> results(population_.size());
      detail::parallel_for(population_.size(), cfg_.threads, [&](std::size_t i) {
        results[i] = run_episode(population_[i], ctx_, episode_seed, *target, cfg_.episode_ticks, true);
      });
      for (std::size_t i = 0; i < population_.size(); ++i) {
        population_[i].fitness = results[i].fitness;
        st.ticks += results[i].ticks;
        if (results[i].won) note_wins(results[i].covered);
      }

      // robustness checks on genomes that covered the target once
      bool advanced = false;
      int checks = 0;
      for (std::size_t i = 0; i < population_.size() && checks < cfg_.max_robustness_checks; ++i) {
        if (!results[i].covered_target) continue;
        ++checks;
        auto rc = robustness_check(population_[i], ctx_, *target, cfg_.robustness_reps, cfg_.episode_ticks, seed_rng_);
        st.ticks += rc.ticks;
        if (!rc.passed) continue;
        res.suite.entries.push_back({*target, population_[i], rc.seeds});
        covered_[static_cast<std::size_t>(*target)] = 1;
        for (std::size_t k = 0; k < rc.always_covered.size(); ++k)
          if (rc.always_covered[k]) covered_[k] = 1;
        note_wins(rc.always_covered);
        st.targets.back().covered = true;
        advanced = true;
        break;
      }
      st.timeline.push_back({st.ticks, st.generations, count_covered()});

      if (advanced) {
        if (!st.full_coverage_generation && count_covered() == spec.statement_count())
          st.full_coverage_generation = st.generations;
        target = select_target(cdg(), covered_);
        begin_target(target, res);
        reseed(res.suite);
        continue;
      }
      reproduce(st.mutations);
    }

    st.timed_out = target.has_value();
    for (std::size_t i = 0; i < covered_.size(); ++i)
      if (covered_[i]) st.covered.push_back(static_cast<StatementId>(i));
    st.winning_reached.assign(wins_.begin(), wins_.end());
    st.elapsed_seconds = elapsed();
    return res;
  }

  const PlayContext& context() const { return ctx_; }

 private:
  const ControlDependenceGraph& cdg() const {
    if (!cdg_) cdg_ = ControlDependenceGraph::of(*ctx_.spec);
    return *cdg_;
  }

  std::size_t count_covered() const {
    return static_cast<std::size_t>(std::count(covered_.begin(), covered_.end(), 1));
  }

  void note_wins(const std::vector<char>& bits) {
    for (StatementId w : ctx_.spec->winning_statements())
      if (bits[static_cast<std::size_t>(w)]) wins_.insert(w);
  }

  void begin_target(const std::optional<StatementId>& target, SearchResult& res) {
    species_.clear();
    matching_.clear();
    if (!target) return;
    res.stats.targets.push_back({*target, 0, false});
    if (dataset_ && cfg_.p_gradient_descent > 0)
      matching_ = encode(filter_sessions(*dataset_, *target), ctx_.actions);
  }

  /// Next target's population: suite genomes first, then the current
  /// population in order.
  void reseed(const DynamicTestSuite& suite) {
    std::vector<Genome> next;
    for (auto it = suite.entries.rbegin(); it != suite.entries.rend() && next.size() < cfg_.population_size; ++it)
      next.push_back(it->genome);
    for (std::size_t i = 0; next.size() < cfg_.population_size; ++i) next.push_back(population_[i]);
    population_ = std::move(next);
  }

  static double goodness(const Genome& g) { return 1.0 / (1.0 + g.fitness); }

  void speciate() {
    for (auto& s : species_) s.members.clear();
    for (std::size_t i = 0; i < population_.size(); ++i) {
      bool placed = false;
      for (auto& s : species_)
        if (compatibility(population_[i], s.representative, cfg_) < cfg_.compatibility_threshold) {
          s.members.push_back(i);
          placed = true;
          break;
        }
      if (!placed) {
        Species s;
        s.id = next_species_++;
        s.representative = population_[i];
        s.members.push_back(i);
        species_.push_back(std::move(s));
      }
    }
    species_.erase(std::remove_if(species_.begin(), species_.end(), [](const Species& s) { return s.members.empty(); }),
                   species_.end());
    for (auto& s : species_) {
      // closest member becomes the new representative
      std::size_t best = s.members.front();
      double best_d = kInf;
      for (std::size_t m : s.members) {
        const double d = compatibility(population_[m], s.representative, cfg_);
        if (d < best_d) {
          best_d = d;
          best = m;
        }
      }
      s.representative = population_[best];
      for (std::size_t m : s.members) population_[m].species_id = s.id;
    }
  }

  void reproduce(MutationCounters& counters) {
    speciate();
    // staleness; the species holding the overall champion is never removed
    std::size_t champion = 0;
    for (std::size_t i = 1; i < population_.size(); ++i)
      if (population_[i].fitness < population_[champion].fitness) champion = i;
    for (auto& s : species_) {
      double best = -kInf;
      for (std::size_t m : s.members) best = std::max(best, goodness(population_[m]));
      if (best > s.best_goodness) {
        s.best_goodness = best;
        s.stale = 0;
      } else {
        ++s.stale;
      }
    }
    species_.erase(std::remove_if(species_.begin(), species_.end(),
                                  [&](const Species& s) {
                                    const bool has_champion =
                                        std::find(s.members.begin(), s.members.end(), champion) != s.members.end();
                                    return s.stale >= cfg_.stale_generations && !has_champion;
                                  }),
                   species_.end());

    // offspring quotas from mean goodness, largest remainder rounding
    std::vector<double> share(species_.size());
    double total = 0;
    for (std::size_t k = 0; k < species_.size(); ++k) {
      double sum = 0;
      for (std::size_t m : species_[k].members) sum += goodness(population_[m]);
      share[k] = sum / static_cast<double>(species_[k].members.size());
      total += share[k];
    }
    const std::size_t n = cfg_.population_size;
    std::vector<std::size_t> quota(species_.size());
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t assigned = 0;
    for (std::size_t k = 0; k < species_.size(); ++k) {
      const double exact_q = total > 0 ? share[k] / total * static_cast<double>(n) : 0.0;
      quota[k] = static_cast<std::size_t>(std::floor(exact_q));
      assigned += quota[k];
      remainders.push_back({exact_q - std::floor(exact_q), k});
    }
    std::stable_sort(remainders.begin(), remainders.end(), [](auto& a, auto& b) { return a.first > b.first; });
    for (std::size_t r = 0; assigned < n; r = (r + 1) % remainders.size(), ++assigned) ++quota[remainders[r].second];

    struct Plan {
      Genome child;
      std::uint64_t seed;
      bool elite;
    };
    std::vector<Plan> plans;
    for (std::size_t k = 0; k < species_.size(); ++k) {
      if (quota[k] == 0) continue;
      auto members = species_[k].members;
      std::stable_sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
        return population_[a].fitness < population_[b].fitness;
      });
      plans.push_back({population_[members.front()], 0, true});
      const std::size_t parents = std::max<std::size_t>(
          1, static_cast<std::size_t>(std::ceil(cfg_.survival_threshold * static_cast<double>(members.size()))));
      for (std::size_t c = 1; c < quota[k]; ++c) {
        const Genome& p1 = population_[members[rng_.index(parents)]];
        Genome child;
        if (rng_.bernoulli(cfg_.crossover_rate)) {
          const Genome* p2;
          if (species_.size() > 1 && rng_.bernoulli(cfg_.interspecies_rate)) {
            const auto& other = species_[rng_.index(species_.size())].members;
            p2 = &population_[other[rng_.index(other.size())]];
          } else {
            p2 = &population_[members[rng_.index(parents)]];
          }
          child = p1.fitness <= p2->fitness ? crossover(p1, *p2, rng_) : crossover(*p2, p1, rng_);
        } else {
          child = p1;
        }
        plans.push_back({std::move(child), rng_.next_u64(), false});
      }
    }

    // structure sequentially (shared innovation tracker), weights in parallel
    std::vector<MutationCounters> per(plans.size());
    std::vector<Rng> rngs;
    rngs.reserve(plans.size());
    for (auto& p : plans) {
      rngs.emplace_back(p.seed);
      if (!p.elite) mutate_structure(p.child, cfg_, tracker_, rngs.back(), per[rngs.size() - 1]);
    }
    detail::parallel_for(plans.size(), cfg_.threads, [&](std::size_t i) {
      if (!plans[i].elite) mutate_weights(plans[i].child, cfg_, matching_, rngs[i], per[i]);
    });
    population_.clear();
    for (std::size_t i = 0; i < plans.size(); ++i) {
      counters.sgd += per[i].sgd;
      counters.perturb += per[i].perturb;
      counters.fallback += per[i].fallback;
      counters.add_node += per[i].add_node;
      counters.add_connection += per[i].add_connection;
      plans[i].child.fitness = kInf;
      population_.push_back(std::move(plans[i].child));
    }
  }

  SearchConfig cfg_;
  PlayContext ctx_;
  std::optional<TrainingDataset> dataset_;
  Rng rng_;
  Rng seed_rng_;
  InnovationTracker tracker_;
  std::vector<Genome> population_;
  std::vector<Species> species_;
  int next_species_ = 0;
  std::vector<char> covered_;
  std::set<StatementId> wins_;
  std::vector<TrainingSample> matching_;
  mutable std::optional<ControlDependenceGraph> cdg_;
};

inline SearchResult search(std::shared_ptr<const GameSpec> spec, const TrainingDataset* dataset,
                           const SearchConfig& cfg) {
  return Search(std::move(spec), dataset, cfg).run();
}

// -- random tester baseline ------------------------------------------------------

struct RandomTesterResult {
  CoverageSet covered;
  std::vector<TimelinePoint> timeline;  // one point per batch of `batch` episodes
  std::size_t episodes = 0;
  std::size_t winning_episodes = 0;
  std::int64_t ticks = 0;
  std::optional<int> full_coverage_batch;
};

/// Uniformly random actions (and parameters) from the game's processable
/// input set, in bounded episodes. `batch` episodes make one timeline step,
/// matching one search generation when batch = population size.
inline RandomTesterResult random_tester(std::shared_ptr<const GameSpec> spec, int batches, std::size_t batch,
                                        std::uint64_t seed, int episode_ticks = 600, DurationLimits limits = {}) {
  if (batches <= 0 || batch == 0) throw ValidationError("random_tester: budget must be positive");
  const auto ctx = PlayContext::of(spec, limits);
  Rng rng(mix_seed(seed, 0x7a2d0));
  std::vector<char> covered(spec->statement_count(), 0);
  for (StatementId e : spec->entry_statements()) covered[static_cast<std::size_t>(e)] = 1;
  RandomTesterResult r;
  auto count = [&] { return static_cast<std::size_t>(std::count(covered.begin(), covered.end(), 1)); };
  r.timeline.push_back({0, 0, count()});
  for (int b = 1; b <= batches; ++b) {
    for (std::size_t e = 0; e < batch; ++e) {
      GameInstance game(spec, rng.next_u64());
      ActionScheduler sched;
      std::vector<InputEvent> events;
      while (!game.is_game_over() && game.tick() < episode_ticks) {
        const auto t = game.tick();
        events.clear();
        sched.collect(t, events);
        if (sched.idle(t)) {
          const std::size_t a = rng.index(ctx.actions.size());
          std::vector<double> params(ctx.actions[a].params.size());
          for (double& p : params) p = rng.uniform(-1.0, 1.0);
          sched.start(ctx.actions.denormalize_label(a, params), t);
          sched.collect(t, events);
        }
        game.step(events);
      }
      r.ticks += game.tick();
      ++r.episodes;
      bool won = false;
      for (std::size_t k = 0; k < covered.size(); ++k)
        if (game.coverage_bits()[k]) covered[k] = 1;
      for (StatementId w : spec->winning_statements())
        if (game.is_covered(w)) won = true;
      if (won) ++r.winning_episodes;
    }
    r.timeline.push_back({r.ticks, b, count()});
    if (!r.full_coverage_batch && count() == covered.size()) r.full_coverage_batch = b;
  }
  std::vector<StatementId> ids;
  for (std::size_t k = 0; k < covered.size(); ++k)
    if (covered[k]) ids.push_back(static_cast<StatementId>(k));
  r.covered = CoverageSet(std::move(ids));
  return r;
}

// -- persistence -------------------------------------------------------------------

inline nlohmann::json suite_to_json(const DynamicTestSuite& s) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : s.entries) {
    std::vector<std::string> seeds;
    for (auto v : e.seeds) seeds.push_back(std::to_string(v));
    entries.push_back({{"target", e.target}, {"seeds", seeds}, {"genome", genome_to_json(e.genome)}});
  }
  return {{"format", "traceneat-suite"}, {"version", 1}, {"game", s.game_id}, {"entries", entries}};
}

inline DynamicTestSuite suite_from_json(const nlohmann::json& j) {
  DynamicTestSuite s;
  try {
    if (j.value("format", std::string()) != "traceneat-suite") throw ParseError("not a test suite file");
    s.game_id = j.at("game").get<std::string>();
    for (const auto& je : j.at("entries")) {
      SuiteEntry e;
      e.target = je.at("target").get<StatementId>();
      for (const auto& v : je.at("seeds")) e.seeds.push_back(detail::parse_u64(v.get<std::string>(), 10));
      e.genome = genome_from_json(je.at("genome"));
      s.entries.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("suite: ") + e.what());
  } catch (const std::logic_error& e) {
    throw ParseError(std::string("suite: malformed number: ") + e.what());
  }
  return s;
}

inline nlohmann::json stats_to_json(const SearchStats& s, bool include_timing = true) {
  nlohmann::json timeline = nlohmann::json::array();
  for (const auto& p : s.timeline) timeline.push_back({p.ticks, p.generation, p.covered});
  nlohmann::json targets = nlohmann::json::array();
  for (const auto& t : s.targets)
    targets.push_back({{"target", t.target}, {"generations", t.generations}, {"covered", t.covered}});
  nlohmann::json j = {
      {"game", s.game_id},
      {"statements", s.statement_count},
      {"covered", s.covered},
      {"coverage_percent", s.coverage_percent()},
      {"winning_reached", s.winning_reached},
      {"generations", s.generations},
      {"ticks", s.ticks},
      {"full_coverage_generation",
       s.full_coverage_generation ? nlohmann::json(*s.full_coverage_generation) : nlohmann::json(nullptr)},
      {"timed_out", s.timed_out},
      {"mutations",
       {{"sgd", s.mutations.sgd},
        {"perturb", s.mutations.perturb},
        {"sgd_fallback", s.mutations.fallback},
        {"add_node", s.mutations.add_node},
        {"add_connection", s.mutations.add_connection}}},
      {"targets", targets},
      {"timeline", timeline}};
  if (include_timing) j["elapsed_seconds"] = s.elapsed_seconds;
  return j;
}

/// Hash over the suite and every deterministic stats field.
inline std::uint64_t result_hash(const SearchResult& r) {
  return fnv1a(suite_to_json(r.suite).dump() + "\n" + stats_to_json(r.stats, false).dump());
}

struct ReplayOutcome {
  StatementId target;
  int passed_reps = 0;
  int reps = 0;
  bool passed() const { return reps > 0 && passed_reps == reps; }
};

/// Re-runs every suite entry on its recorded robustness seeds.
inline std::vector<ReplayOutcome> replay_suite(const DynamicTestSuite& suite, std::shared_ptr<const GameSpec> spec,
                                               int episode_ticks = 600, DurationLimits limits = {}) {
  if (suite.game_id != spec->id())
    throw ValidationError("suite is for game '" + suite.game_id + "', not '" + spec->id() + "'");
  const auto ctx = PlayContext::of(spec, limits);
  std::vector<ReplayOutcome> out;
  for (const auto& e : suite.entries) {
    spec->check_id(e.target);
    Network net(e.genome);
    if (net.input_count() != ctx.features.size())
      throw ValidationError("suite genome has " + std::to_string(net.input_count()) + " inputs, game has " +
                            std::to_string(ctx.features.size()) + " features");
    ReplayOutcome o{e.target, 0, static_cast<int>(e.seeds.size())};
    for (auto s : e.seeds)
      if (run_episode(net, ctx, s, e.target, episode_ticks, false).covered_target) ++o.passed_reps;
    out.push_back(o);
  }
  return out;
}

}  // namespace traceneat
