#pragma once

#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "traceneat/builtin_games.hpp"
#include "traceneat/neat.hpp"
#include "traceneat/policies.hpp"
#include "traceneat/recorder.hpp"
#include "traceneat/stats.hpp"

namespace traceneat {

/// Applies the keys present in `j` on top of `cfg`. Unknown keys are errors.
inline SearchConfig search_config_from_json(const nlohmann::json& j, SearchConfig cfg = {}) {
  if (!j.is_object()) throw ValidationError("search config: expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const auto& k = it.key();
    const auto& v = it.value();
    try {
      if (k == "population") cfg.population_size = v.get<std::size_t>();
      else if (k == "reps") cfg.robustness_reps = v.get<int>();
      else if (k == "generations") cfg.max_generations = v.get<int>();
      else if (k == "time_budget") cfg.time_budget_seconds = v.get<double>();
      else if (k == "p_gradient_descent") cfg.p_gradient_descent = v.get<double>();
      else if (k == "weight_mutation_rate") cfg.weight_mutation_rate = v.get<double>();
      else if (k == "add_node_rate") cfg.add_node_rate = v.get<double>();
      else if (k == "add_connection_rate") cfg.add_connection_rate = v.get<double>();
      else if (k == "crossover_rate") cfg.crossover_rate = v.get<double>();
      else if (k == "compatibility_threshold") cfg.compatibility_threshold = v.get<double>();
      else if (k == "stale_generations") cfg.stale_generations = v.get<int>();
      else if (k == "episode_ticks") cfg.episode_ticks = v.get<int>();
      else if (k == "learning_rate") cfg.loss.learning_rate = v.get<double>();
      else if (k == "patience") cfg.loss.patience = v.get<int>();
      else if (k == "max_epochs") cfg.loss.max_epochs = v.get<int>();
      else if (k == "threads") cfg.threads = v.get<unsigned>();
      else throw ValidationError("search config: unknown key '" + k + "'");
    } catch (const nlohmann::json::exception&) {
      throw ValidationError("search config: bad value for '" + k + "'");
    }
  }
  cfg.validate();
  return cfg;
}

/// Where an arm's traces come from: a dataset file, or a scripted expert
/// recorded on the fly.
struct DatasetSource {
  std::optional<std::string> path;
  RecorderConfig recorder;
  std::int64_t ticks = 1800;
  std::uint64_t seed = 7;

  std::string key(const std::string& game) const {
    if (path) return "file:" + *path;
    std::ostringstream os;
    os << game << '|' << exact(recorder.noop_threshold) << '|' << recorder.wait_max << '|' << recorder.key_max << '|'
       << recorder.mouse_stationary_steps << '|' << ticks << '|' << seed;
    return os.str();
  }
};

struct Arm {
  std::string name;
  nlohmann::json overrides = nlohmann::json::object();  // SearchConfig keys
  std::optional<DatasetSource> dataset;
  bool random = false;  // random tester baseline instead of search
};

struct Comparison {
  std::string a;
  std::string b;
  std::string metric = "generations";  // or "ticks"
};

struct ExperimentPlan {
  std::string name = "experiment";
  std::vector<std::string> games;
  std::vector<std::uint64_t> seeds;
  nlohmann::json base = nlohmann::json::object();
  std::vector<Arm> arms;
  std::vector<Comparison> comparisons;

  void validate() const {
    if (games.empty()) throw ValidationError("plan.games: at least one game required");
    if (seeds.empty()) throw ValidationError("plan.seeds: at least one seed required");
    if (arms.empty()) throw ValidationError("plan.arms: at least one arm required");
    if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size())
      throw ValidationError("plan.seeds: seeds must be distinct");
    std::set<std::string> names;
    for (const auto& a : arms) {
      if (a.name.empty()) throw ValidationError("plan.arms: every arm needs a name");
      if (!names.insert(a.name).second) throw ValidationError("plan.arms: duplicate arm '" + a.name + "'");
      auto merged = base;
      merged.update(a.overrides);
      search_config_from_json(merged);
      if (a.dataset) a.dataset->recorder.validate();
    }
    for (const auto& c : comparisons) {
      if (!names.count(c.a) || !names.count(c.b))
        throw ValidationError("plan.comparisons: unknown arm in '" + c.a + "' vs '" + c.b + "'");
      if (c.metric != "generations" && c.metric != "ticks")
        throw ValidationError("plan.comparisons: metric must be 'generations' or 'ticks'");
    }
    for (const auto& g : games) resolve_game(g);
  }
};

inline DatasetSource dataset_source_from_json(const nlohmann::json& j) {
  DatasetSource s;
  if (j.is_string()) {
    s.path = j.get<std::string>();
    return s;
  }
  if (j.contains("path")) s.path = j.at("path").get<std::string>();
  if (j.contains("noop_threshold")) s.recorder.noop_threshold = detail::threshold_from_json(j.at("noop_threshold"));
  if (j.contains("wait_max")) s.recorder.wait_max = j.at("wait_max").get<int>();
  if (j.contains("key_max")) s.recorder.key_max = j.at("key_max").get<int>();
  if (j.contains("ticks")) s.ticks = j.at("ticks").get<std::int64_t>();
  if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
  if (s.ticks <= 0) throw ValidationError("plan dataset: ticks must be positive");
  return s;
}

/// {"name", "games": [...], "seeds": [..] | N (seeds 1..N; "repetitions" is an alias), "search": {...},
///  "arms": [{"name", "search": {...}, "dataset": path | {...}, "random": bool}],
///  "comparisons": [{"a", "b", "metric"}]}
inline ExperimentPlan plan_from_json(const nlohmann::json& j) {
  ExperimentPlan p;
  try {
    p.name = j.value("name", p.name);
    p.games = j.at("games").get<std::vector<std::string>>();
    const auto& s = j.contains("seeds") ? j.at("seeds") : j.at("repetitions");
    if (s.is_number_integer()) {
      const auto n = s.get<int>();
      if (n < 1) throw ValidationError("plan.seeds: must be >= 1");
      for (int i = 1; i <= n; ++i) p.seeds.push_back(static_cast<std::uint64_t>(i));
    } else {
      p.seeds = s.get<std::vector<std::uint64_t>>();
    }
    if (j.contains("search")) p.base = j.at("search");
    for (const auto& ja : j.at("arms")) {
      Arm a;
      a.name = ja.at("name").get<std::string>();
      if (ja.contains("search")) a.overrides = ja.at("search");
      if (ja.contains("dataset") && !ja.at("dataset").is_null()) a.dataset = dataset_source_from_json(ja.at("dataset"));
      a.random = ja.value("random", false);
      p.arms.push_back(std::move(a));
    }
    if (j.contains("comparisons"))
      for (const auto& jc : j.at("comparisons"))
        p.comparisons.push_back(
            {jc.at("a").get<std::string>(), jc.at("b").get<std::string>(), jc.value("metric", "generations")});
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("plan: ") + e.what());
  }
  p.validate();
  return p;
}

inline ExperimentPlan load_plan(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open plan file '" + path + "'");
  try {
    return plan_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("plan: ") + e.what());
  }
}

/// Generation at which every statement was covered, or budget + 1.
inline int generations_to_coverage(const SearchStats& s, int budget) {
  return s.full_coverage_generation ? *s.full_coverage_generation : budget + 1;
}

/// First tick at which coverage reaches `level_percent`; none if never.
inline std::optional<std::int64_t> time_to_coverage(const std::vector<TimelinePoint>& series,
                                                    std::size_t statement_count, double level_percent) {
  if (level_percent <= 0) return 0;
  if (statement_count == 0) return std::nullopt;
  for (const auto& p : series)
    if (100.0 * static_cast<double>(p.covered) / static_cast<double>(statement_count) >= level_percent - 1e-12)
      return p.ticks;
  return std::nullopt;
}

/// Cumulative engine ticks when every statement was covered.
inline std::optional<std::int64_t> time_to_coverage(const SearchStats& s) {
  return time_to_coverage(s.timeline, s.statement_count, 100.0);
}

struct RunRecord {
  std::uint64_t seed = 0;
  std::size_t statement_count = 0;
  std::size_t covered = 0;
  bool won = false;
  int generations = 0;                // to full coverage, budget + 1 if never
  std::optional<std::int64_t> ticks;  // to full coverage
  std::size_t suite_size = 0;
  std::vector<TimelinePoint> timeline;
  std::optional<SearchStats> stats;   // search arms only

  double coverage_percent() const {
    return statement_count ? 100.0 * static_cast<double>(covered) / static_cast<double>(statement_count) : 0.0;
  }
};

struct ArmReport {
  std::string game;
  std::string arm;
  int budget = 0;
  std::optional<DatasetStats> dataset;
  std::vector<RunRecord> runs;
  std::optional<std::string> error;  // cell failed before running

  bool failed() const { return error.has_value(); }
  std::vector<double> metric(const std::string& m) const {
    std::vector<double> v;
    for (const auto& r : runs)
      v.push_back(m == "ticks" ? (r.ticks ? static_cast<double>(*r.ticks) : kInf) : r.generations);
    return v;
  }
  double mean_coverage() const {
    std::vector<double> v;
    for (const auto& r : runs) v.push_back(r.coverage_percent());
    return v.empty() ? 0.0 : mean(v);
  }
  std::size_t winning_runs() const {
    std::size_t n = 0;
    for (const auto& r : runs) n += r.won ? 1 : 0;
    return n;
  }
};

struct ComparisonResult {
  std::string game;
  Comparison comparison;
  double median_a = 0;
  double median_b = 0;
  MannWhitneyResult test;
};

struct ExperimentReport {
  std::string name;
  std::vector<ArmReport> arms;
  std::vector<ComparisonResult> comparisons;

  const ArmReport& arm(const std::string& game, const std::string& name) const {
    for (const auto& a : arms)
      if (a.game == game && a.arm == name) return a;
    throw UsageError("report: no arm '" + name + "' for game '" + game + "'");
  }
};

inline RunRecord run_search_cell(std::shared_ptr<const GameSpec> spec, const TrainingDataset* data, SearchConfig cfg,
                                 std::uint64_t seed) {
  cfg.seed = seed;
  auto res = search(std::move(spec), data, cfg);
  RunRecord r;
  r.seed = seed;
  r.statement_count = res.stats.statement_count;
  r.covered = res.stats.covered.size();
  r.won = !res.stats.winning_reached.empty();
  r.generations = generations_to_coverage(res.stats, cfg.max_generations);
  r.ticks = time_to_coverage(res.stats);
  r.suite_size = res.suite.entries.size();
  r.timeline = res.stats.timeline;
  r.stats = std::move(res.stats);
  return r;
}

/// The random tester gets one batch of `population` episodes per generation.
inline RunRecord run_random_cell(std::shared_ptr<const GameSpec> spec, const SearchConfig& cfg, std::uint64_t seed) {
  const int batches = cfg.max_generations > 0 ? cfg.max_generations : 200;
  const auto res = random_tester(spec, batches, cfg.population_size, seed, cfg.episode_ticks, cfg.limits);
  RunRecord r;
  r.seed = seed;
  r.statement_count = spec->statement_count();
  r.covered = res.covered.size();
  r.won = res.winning_episodes > 0;
  r.generations = res.full_coverage_batch ? *res.full_coverage_batch : batches + 1;
  r.ticks = time_to_coverage(res.timeline, r.statement_count, 100.0);
  r.timeline = res.timeline;
  return r;
}

using ProgressFn = std::function<void(const std::string& game, const std::string& arm, const RunRecord&)>;

/// Runs every (game, arm, seed) cell. A cell whose dataset cannot be loaded
/// is reported as failed and the plan continues.
inline ExperimentReport run_plan(const ExperimentPlan& plan, const ProgressFn& progress = {}) {
  plan.validate();
  ExperimentReport rep;
  rep.name = plan.name;
  std::map<std::string, TrainingDataset> datasets;
  for (const auto& game : plan.games) {
    const auto spec = resolve_game(game);
    for (const auto& arm : plan.arms) {
      auto merged = plan.base;
      merged.update(arm.overrides);
      const auto cfg = search_config_from_json(merged);
      ArmReport ar;
      ar.game = game;
      ar.arm = arm.name;
      ar.budget = cfg.max_generations;
      const TrainingDataset* data = nullptr;
      if (arm.dataset && !arm.random) {
        const auto key = arm.dataset->key(game);
        auto it = datasets.find(key);
        if (it == datasets.end()) {
          try {
            TrainingDataset d;
            if (arm.dataset->path) {
              d = load_dataset(*arm.dataset->path);
            } else {
              auto policy = expert_for(spec->id());
              d = synthesize_dataset(spec, *policy, arm.dataset->recorder, arm.dataset->ticks, arm.dataset->seed);
            }
            check_dataset(d, *spec);
            it = datasets.emplace(key, std::move(d)).first;
          } catch (const std::exception& e) {
            ar.error = e.what();
            rep.arms.push_back(std::move(ar));
            continue;
          }
        }
        data = &it->second;
        ar.dataset = stats(*data);
      }
      for (auto seed : plan.seeds) {
        auto r = arm.random ? run_random_cell(spec, cfg, seed) : run_search_cell(spec, data, cfg, seed);
        if (progress) progress(game, arm.name, r);
        ar.runs.push_back(std::move(r));
      }
      rep.arms.push_back(std::move(ar));
    }
    for (const auto& c : plan.comparisons) {
      const auto& a = rep.arm(game, c.a);
      const auto& b = rep.arm(game, c.b);
      if (a.failed() || b.failed()) continue;
      const auto ma = a.metric(c.metric);
      const auto mb = b.metric(c.metric);
      rep.comparisons.push_back({game, c, median(ma), median(mb), mann_whitney_u(ma, mb)});
    }
  }
  return rep;
}

namespace detail {
inline nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); }
}  // namespace detail

inline nlohmann::json timeline_to_json(const std::vector<TimelinePoint>& t) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& p : t) j.push_back({p.ticks, p.generation, p.covered});
  return j;
}

inline nlohmann::json report_to_json(const ExperimentReport& r) {
  nlohmann::json arms = nlohmann::json::array();
  for (const auto& a : r.arms) {
    nlohmann::json ja = {{"game", a.game}, {"arm", a.arm}, {"budget", a.budget}};
    if (a.failed()) {
      ja["error"] = *a.error;
      arms.push_back(std::move(ja));
      continue;
    }
    nlohmann::json runs = nlohmann::json::array();
    for (const auto& run : a.runs) {
      nlohmann::json jr = {{"seed", run.seed},
                           {"coverage_percent", run.coverage_percent()},
                           {"won", run.won},
                           {"generations_to_coverage", run.generations},
                           {"ticks_to_coverage", run.ticks ? nlohmann::json(*run.ticks) : nlohmann::json()},
                           {"suite_size", run.suite_size},
                           {"timeline", timeline_to_json(run.timeline)}};
      if (run.stats) jr["stats"] = stats_to_json(*run.stats, false);
      runs.push_back(std::move(jr));
    }
    ja["mean_coverage_percent"] = a.mean_coverage();
    ja["winning_runs"] = a.winning_runs();
    ja["median_generations"] = a.runs.empty() ? nlohmann::json() : nlohmann::json(median(a.metric("generations")));
    ja["median_ticks"] = a.runs.empty() ? nlohmann::json() : detail::finite_or_null(median(a.metric("ticks")));
    ja["runs"] = std::move(runs);
    if (a.dataset)
      ja["dataset"] = {{"sessions", a.dataset->sessions},
                       {"snapshots", a.dataset->snapshots},
                       {"noops", a.dataset->noops},
                       {"noop_proportion", a.dataset->noop_proportion()}};
    arms.push_back(std::move(ja));
  }
  nlohmann::json comps = nlohmann::json::array();
  for (const auto& c : r.comparisons)
    comps.push_back({{"game", c.game},
                     {"a", c.comparison.a},
                     {"b", c.comparison.b},
                     {"metric", c.comparison.metric},
                     {"median_a", detail::finite_or_null(c.median_a)},
                     {"median_b", detail::finite_or_null(c.median_b)},
                     {"u", c.test.u},
                     {"p_value", c.test.p_value},
                     {"exact", c.test.exact},
                     {"significant", c.test.p_value < 0.1}});
  return {{"name", r.name}, {"arms", arms}, {"comparisons", comps}};
}

/// Coverage-over-time rows: game, arm, seed, generation, ticks, covered.
inline std::string format_series(const ExperimentReport& r) {
  std::ostringstream os;
  os << "game\tarm\tseed\tgeneration\tticks\tcovered\tstatements\n";
  for (const auto& a : r.arms)
    for (const auto& run : a.runs)
      for (const auto& p : run.timeline)
        os << a.game << '\t' << a.arm << '\t' << run.seed << '\t' << p.generation << '\t' << p.ticks << '\t'
           << p.covered << '\t' << run.statement_count << '\n';
  return os.str();
}

/// Plain-text summary table.
inline std::string format_report(const ExperimentReport& r) {
  std::ostringstream os;
  os << "# " << r.name << "\n\n";
  os << "| game | arm | mean coverage % | winning runs | median generations | median ticks |\n";
  os << "|---|---|---|---|---|---|\n";
  for (const auto& a : r.arms) {
    if (a.failed() || a.runs.empty()) {
      os << "| " << a.game << " | " << a.arm << " | failed: " << a.error.value_or("no runs") << " | | | |\n";
      continue;
    }
    const double mt = median(a.metric("ticks"));
    char cov[32];
    std::snprintf(cov, sizeof cov, "%.1f", a.mean_coverage());
    os << "| " << a.game << " | " << a.arm << " | " << cov << " | " << a.winning_runs() << "/" << a.runs.size()
       << " | " << median(a.metric("generations")) << " | " << (std::isfinite(mt) ? std::to_string(std::llround(mt)) : "-")
       << " |\n";
  }
  if (!r.comparisons.empty()) {
    os << "\n| game | comparison | metric | medians | p (Mann-Whitney) |\n|---|---|---|---|---|\n";
    for (const auto& c : r.comparisons) {
      char p[32];
      std::snprintf(p, sizeof p, "%.4f%s", c.test.p_value, c.test.p_value < 0.1 ? " *" : "");
      os << "| " << c.game << " | " << c.comparison.a << " vs " << c.comparison.b << " | " << c.comparison.metric
         << " | " << c.median_a << " vs " << c.median_b << " | " << p << " |\n";
    }
  }
  return os.str();
}

}  // namespace traceneat
