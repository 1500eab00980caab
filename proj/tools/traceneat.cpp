// Command-line entry point: record, search, replay, stats, experiment,
// synth, games.

#include <atomic>
#include <chrono>
#include <csignal>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "traceneat/bridge.hpp"
#include "traceneat/builtin_games.hpp"
#include "traceneat/experiments.hpp"
#include "traceneat/http_bridge.hpp"
#include "traceneat/neat.hpp"
#include "traceneat/policies.hpp"
#include "traceneat/recorder.hpp"

using namespace traceneat;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitFailure = 2;

std::atomic<bool> g_interrupted{false};

void on_signal(int) { g_interrupted = true; }

double parse_threshold(const std::string& s) {
  if (s == "inf" || s == "infinity") return kInf;
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw ValidationError("--noop-threshold: expected a number of ticks or 'inf'");
  }
  if (used != s.size()) throw ValidationError("--noop-threshold: expected a number of ticks or 'inf'");
  return v;
}

void write_json(const nlohmann::json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  out << j.dump(2) << "\n";
  if (!out) throw ValidationError("write failed for '" + path + "'");
}

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("'" + path + "': " + e.what());
  }
}

/// Search flags; unset flags leave the config-file value (or default) alone.
struct SearchFlags {
  std::string config_path;
  std::optional<std::size_t> population;
  std::optional<int> generations;
  std::optional<double> time_budget;
  std::optional<double> p;
  std::optional<double> alpha;
  std::optional<int> patience;
  std::optional<int> reps;
  std::optional<int> episode_ticks;
  std::optional<unsigned> threads;

  void add(CLI::App* app) {
    app->add_option("--config", config_path, "JSON file with search settings (flags take precedence)");
    app->add_option("--population", population, "population size");
    app->add_option("--generations", generations, "generation budget (0 = unlimited)");
    app->add_option("--time-budget", time_budget, "wall-clock budget in seconds (0 = unlimited)");
    app->add_option("-p,--p-gradient-descent", p, "probability of gradient descent per weight mutation");
    app->add_option("--learning-rate", alpha, "SGD learning rate");
    app->add_option("--patience", patience, "early-stopping patience in epochs");
    app->add_option("--reps", reps, "robustness-check executions");
    app->add_option("--episode-ticks", episode_ticks, "tick cap per episode");
    app->add_option("--threads", threads, "evaluation threads");
  }

  SearchConfig build() const {
    nlohmann::json j = config_path.empty() ? nlohmann::json::object() : read_json(config_path);
    if (population) j["population"] = *population;
    if (generations) j["generations"] = *generations;
    if (time_budget) j["time_budget"] = *time_budget;
    if (p) j["p_gradient_descent"] = *p;
    if (alpha) j["learning_rate"] = *alpha;
    if (patience) j["patience"] = *patience;
    if (reps) j["reps"] = *reps;
    if (episode_ticks) j["episode_ticks"] = *episode_ticks;
    if (threads) j["threads"] = *threads;
    return search_config_from_json(j);
  }
};

struct RecorderFlags {
  std::string noop_threshold = "inf";
  int wait_max = 60;
  int key_max = 30;

  void add(CLI::App* app) {
    app->add_option("--noop-threshold", noop_threshold, "no-op threshold in ticks, or 'inf'")->capture_default_str();
    app->add_option("--wait-max", wait_max, "longest single no-op in ticks")->capture_default_str();
    app->add_option("--key-max", key_max, "longest key press in ticks")->capture_default_str();
  }
  RecorderConfig build() const {
    RecorderConfig c;
    c.noop_threshold = parse_threshold(noop_threshold);
    c.wait_max = wait_max;
    c.key_max = key_max;
    c.validate();
    return c;
  }
};

void print_stats(const TrainingDataset& d) {
  const auto s = stats(d);
  std::cout << "game       " << s.game_id << "\n"
            << "sessions   " << s.sessions << "\n"
            << "snapshots  " << format_stats_cell(s) << "  (no-op proportion in parentheses)\n"
            << "no-ops     " << s.noops << "\n";
  for (const auto& [name, n] : s.per_action) std::cout << "  " << name << "  " << n << "\n";
}

int cmd_games() {
  for (const auto& name : builtin_game_names()) {
    const auto g = builtin_game(name);
    const auto fs = FeatureSchema::of(*g);
    const auto as = ActionSchema::of(*g);
    std::cout << name << ": " << g->statement_count() << " statements, " << fs.size() << " features, " << as.size()
              << " actions\n";
  }
  return 0;
}

int cmd_record(const std::string& game, const std::string& host, int port, const std::string& out_path,
               const std::string& static_dir, double duration, std::uint64_t seed, const RecorderConfig& rc) {
  const auto spec = resolve_game(game);
  bridge::SharedSession shared(spec, rc, seed);
  httplib::Server server;
  bridge::install_routes(server, shared);
  // httplib's defaults add SO_REUSEPORT, which lets a second recorder bind the
  // same port and steal half the requests
  server.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const char*>(&yes), sizeof yes);
  });
  if (!static_dir.empty() && !server.set_mount_point("/", static_dir))
    throw ValidationError("--static: '" + static_dir + "' is not a directory");
  if (!server.bind_to_port(host, port)) {
    std::cerr << "error: cannot listen on " << host << ":" << port << " (address in use?)\n";
    return kExitFailure;
  }
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::thread http([&] { server.listen_after_bind(); });
  std::cerr << "recording " << spec->id() << " on http://" << host << ":" << port << "/bridge (Ctrl-C to finish)\n";

  std::atomic<bool> stop{false};
  std::thread ticker([&] { bridge::run_ticks(shared, stop); });
  const auto start = std::chrono::steady_clock::now();
  while (!g_interrupted) {
    if (duration > 0 && std::chrono::steady_clock::now() - start >= std::chrono::duration<double>(duration)) break;
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
  stop = true;
  ticker.join();
  server.stop();
  http.join();
  shared.disconnect();
  const auto d = shared.with([](bridge::Session& s) { return s.dataset(); });
  save_dataset(d, out_path);
  std::cout << "wrote " << out_path << "\n";
  print_stats(d);
  return 0;
}

int cmd_synth(const std::string& game, const std::string& out_path, std::int64_t ticks, std::uint64_t seed,
              const RecorderConfig& rc) {
  const auto spec = resolve_game(game);
  auto policy = expert_for(spec->id());
  const auto d = synthesize_dataset(spec, *policy, rc, ticks, seed);
  save_dataset(d, out_path);
  std::cout << "wrote " << out_path << "\n";
  print_stats(d);
  return 0;
}

int cmd_stats(const std::string& path, const std::string& game, const std::string& rederive_threshold) {
  auto d = load_dataset(path);
  if (!game.empty()) check_dataset(d, *resolve_game(game));
  if (!rederive_threshold.empty()) {
    const auto spec = resolve_game(game.empty() ? d.game_id : game);
    auto rc = d.config;
    rc.noop_threshold = parse_threshold(rederive_threshold);
    d = rederive(d, spec, rc);
  }
  print_stats(d);
  return 0;
}

int cmd_search(const std::string& game, const std::string& dataset_path, const std::string& suite_path,
               const std::string& stats_path, std::uint64_t seed, const SearchFlags& flags) {
  const auto spec = resolve_game(game);
  auto cfg = flags.build();
  cfg.seed = seed;
  std::optional<TrainingDataset> data;
  if (!dataset_path.empty()) {
    data = load_dataset(dataset_path);
    check_dataset(*data, *spec);
  } else if (cfg.p_gradient_descent > 0) {
    throw ValidationError("--p-gradient-descent > 0 needs --dataset");
  }
  const auto res = search(spec, data ? &*data : nullptr, cfg);
  std::ofstream out(suite_path);
  if (!out) throw ValidationError("cannot write '" + suite_path + "'");
  out << suite_to_json(res.suite).dump() << "\n";
  if (!stats_path.empty()) write_json(stats_to_json(res.stats), stats_path);
  const auto& st = res.stats;
  std::printf("coverage %zu/%zu (%.1f%%) in %d generations, %lld ticks%s\n", st.covered.size(), st.statement_count,
              st.coverage_percent(), st.generations, static_cast<long long>(st.ticks),
              st.timed_out ? " (budget exhausted)" : "");
  std::printf("suite entries %zu, winning statements reached %zu, sgd %zu, perturb %zu, sgd fallback %zu\n",
              res.suite.entries.size(), st.winning_reached.size(), st.mutations.sgd, st.mutations.perturb,
              st.mutations.fallback);
  return 0;
}

int cmd_replay(const std::string& suite_path, const std::string& game, int episode_ticks) {
  const auto suite = suite_from_json(read_json(suite_path));
  const auto spec = resolve_game(game.empty() ? suite.game_id : game);
  const auto outcomes = replay_suite(suite, spec, episode_ticks);
  bool ok = true;
  for (const auto& o : outcomes) {
    std::printf("%s target %d: %d/%d\n", o.passed() ? "PASS" : "FAIL", o.target, o.passed_reps, o.reps);
    ok = ok && o.passed();
  }
  return ok ? 0 : kExitFailure;
}

int cmd_experiment(const std::string& plan_path, const std::string& out_prefix) {
  const auto plan = load_plan(plan_path);
  const auto report = run_plan(plan, [](const std::string& g, const std::string& a, const RunRecord& r) {
    std::cerr << g << " " << a << " seed " << r.seed << ": " << r.covered << "/" << r.statement_count
              << " statements, generations to full coverage " << r.generations << "\n";
  });
  write_json(report_to_json(report), out_prefix + ".json");
  const auto text = format_report(report);
  std::ofstream(out_prefix + ".md") << text;
  std::ofstream(out_prefix + "_series.tsv") << format_series(report);
  std::cout << text;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trace-guided neuroevolution test generation for small games"};
  app.require_subcommand(1);

  std::string game;
  std::string dataset;
  std::uint64_t seed = 0;
  RecorderFlags rflags;
  SearchFlags sflags;

  auto* games_cmd = app.add_subcommand("games", "list built-in games");

  auto* record = app.add_subcommand("record", "serve the play bridge and record human traces");
  std::string host = "127.0.0.1";
  int port = 8765;
  std::string out = "traces.jsonl";
  std::string static_dir;
  double duration = 0;
  record->add_option("game", game, "built-in game name or spec file")->required();
  record->add_option("--host", host)->capture_default_str();
  record->add_option("--port", port)->capture_default_str()->check(CLI::Range(1, 65535));
  record->add_option("-o,--out", out, "dataset file to write")->capture_default_str();
  record->add_option("--static", static_dir, "directory with the play UI to serve");
  record->add_option("--duration", duration, "stop after this many seconds (0 = until Ctrl-C)");
  record->add_option("--seed", seed, "first session seed");
  rflags.add(record);

  auto* synth = app.add_subcommand("synth", "record a dataset from the scripted expert");
  std::int64_t ticks = 1800;
  synth->add_option("game", game)->required();
  synth->add_option("-o,--out", out)->capture_default_str();
  synth->add_option("--ticks", ticks, "total ticks of play")->capture_default_str()->check(CLI::PositiveNumber);
  synth->add_option("--seed", seed)->capture_default_str();
  rflags.add(synth);

  auto* stats_cmd = app.add_subcommand("stats", "print dataset statistics");
  std::string rederive_threshold;
  stats_cmd->add_option("dataset", dataset)->required();
  stats_cmd->add_option("--game", game, "check the dataset against this game");
  stats_cmd->add_option("--noop-threshold", rederive_threshold, "re-derive snapshots with another threshold");

  auto* search_cmd = app.add_subcommand("search", "generate a dynamic test suite");
  std::string suite_path = "suite.json";
  std::string stats_path;
  search_cmd->add_option("game", game)->required();
  search_cmd->add_option("-d,--dataset", dataset, "trace dataset for gradient descent");
  search_cmd->add_option("-o,--suite", suite_path)->capture_default_str();
  search_cmd->add_option("--stats", stats_path, "write search statistics here");
  search_cmd->add_option("--seed", seed)->capture_default_str();
  sflags.add(search_cmd);

  auto* replay_cmd = app.add_subcommand("replay", "re-run a suite on its robustness seeds");
  int episode_ticks = 600;
  replay_cmd->add_option("suite", suite_path)->required();
  replay_cmd->add_option("--game", game, "game (default: the one named in the suite)");
  replay_cmd->add_option("--episode-ticks", episode_ticks)->capture_default_str();

  auto* experiment = app.add_subcommand("experiment", "run an experiment plan");
  std::string plan_path;
  std::string out_prefix = "report";
  experiment->add_option("plan", plan_path)->required()->check(CLI::ExistingFile);
  experiment->add_option("-o,--out", out_prefix, "report path prefix (.json and .md)")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*games_cmd) return cmd_games();
    if (*record) return cmd_record(game, host, port, out, static_dir, duration, seed, rflags.build());
    if (*synth) return cmd_synth(game, out, ticks, seed, rflags.build());
    if (*stats_cmd) return cmd_stats(dataset, game, rederive_threshold);
    if (*search_cmd) return cmd_search(game, dataset, suite_path, stats_path, seed, sflags);
    if (*replay_cmd) return cmd_replay(suite_path, game, episode_ticks);
    if (*experiment) return cmd_experiment(plan_path, out_prefix);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}
