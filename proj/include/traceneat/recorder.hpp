#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "traceneat/actions.hpp"
#include "traceneat/core.hpp"
#include "traceneat/features.hpp"
#include "traceneat/game.hpp"

namespace traceneat {

struct RecorderConfig {
  double noop_threshold = kInf;    // delta_t in ticks; kInf disables no-op synthesis
  int wait_max = 60;               // w_max
  int key_max = 30;                // d_max
  int mouse_stationary_steps = 6;

  void validate() const {
    if (!(noop_threshold >= 0)) throw ValidationError("recorder.noop_threshold: must be >= 0 or inf");
    if (wait_max < 1) throw ValidationError("recorder.wait_max: must be >= 1");
    if (key_max < 1) throw ValidationError("recorder.key_max: must be >= 1");
    if (mouse_stationary_steps < 1) throw ValidationError("recorder.mouse_stationary_steps: must be >= 1");
  }
  DurationLimits limits() const { return {key_max, wait_max}; }
  friend bool operator==(const RecorderConfig&, const RecorderConfig&) = default;
};

enum class EndReason : std::uint8_t { PlayerStop, GameOver };

inline const char* to_string(EndReason r) { return r == EndReason::GameOver ? "game_over" : "player_stop"; }

struct Snapshot {
  FeatureVector features;      // state at onset_tick
  ActionLabel label;
  std::int64_t tick = 0;       // when the snapshot was emitted
  std::int64_t onset_tick = 0;
  friend bool operator==(const Snapshot&, const Snapshot&) = default;
};

struct RecordingSession {
  std::vector<Snapshot> snapshots;
  std::uint64_t seed = 0;
  CoverageSet covered;
  std::int64_t duration_ticks = 0;
  EndReason end_reason = EndReason::PlayerStop;
  std::vector<InputEvent> events;  // raw log, tick-stamped
  friend bool operator==(const RecordingSession&, const RecordingSession&) = default;
};

struct TrainingDataset {
  std::string game_id;
  RecorderConfig config;
  std::uint64_t schema_fingerprint = 0;
  std::vector<std::string> feature_names;
  std::vector<std::string> action_names;
  std::vector<RecordingSession> sessions;
  friend bool operator==(const TrainingDataset&, const TrainingDataset&) = default;

  std::size_t snapshot_count() const {
    std::size_t n = 0;
    for (const auto& s : sessions) n += s.snapshots.size();
    return n;
  }
};

inline TrainingDataset make_dataset(const GameSpec& spec, const RecorderConfig& config) {
  TrainingDataset d;
  d.game_id = spec.id();
  d.config = config;
  const auto fs = FeatureSchema::of(spec);
  d.schema_fingerprint = fs.fingerprint();
  d.feature_names = fs.names();
  const auto as = ActionSchema::of(spec, config.limits());
  for (const auto& a : as.actions()) d.action_names.push_back(a.name());
  return d;
}

/// Turns a tick-ordered stream of raw input into snapshots. Input for the
/// current tick is delivered through on_* before tick() advances the engine.
class Recorder {
 public:
  Recorder(std::shared_ptr<const GameSpec> spec, RecorderConfig config)
      : spec_(std::move(spec)), config_(config), schema_(FeatureSchema::of(*spec_)) {
    config_.validate();
  }

  const RecorderConfig& config() const { return config_; }
  const FeatureSchema& schema() const { return schema_; }
  bool active() const { return game_.has_value(); }
  const GameInstance& game() const {
    if (!game_) throw UsageError("recorder: no active session");
    return *game_;
  }
  std::int64_t now() const { return game().tick(); }

  void begin_session(std::uint64_t seed) {
    if (game_) throw UsageError("begin_session: a session is already active");
    game_.emplace(spec_, seed);
    session_ = RecordingSession{};
    session_.seed = seed;
    pending_.clear();
    keys_down_.clear();
    mouse_moving_ = false;
    t0_ = 0;
    saved_ = extract(*game_, schema_);
  }

  /// Key transition at the current tick. Returns the snapshots it produced.
  std::vector<Snapshot> on_key(const std::string& key, bool down) {
    require_active();
    std::vector<Snapshot> out;
    if (game_->is_game_over()) return out;
    const auto t = now();
    const auto ev = down ? InputEvent::key_down(key, t) : InputEvent::key_up(key, t);
    log(ev);
    if (down) {
      if (keys_down_.count(key)) return out;  // auto-repeat
      maybe_emit_noop(out);
      keys_down_[key] = {t, extract(*game_, schema_)};
    } else {
      auto it = keys_down_.find(key);
      if (it == keys_down_.end()) return out;  // key-up without key-down
      const int duration = static_cast<int>(std::max<std::int64_t>(1, t - it->second.tick));
      emit(out, it->second.features, ActionLabel::key_press(key, duration), it->second.tick);
      keys_down_.erase(it);
    }
    return out;
  }

  std::vector<Snapshot> on_mouse_move(double x, double y) {
    require_active();
    std::vector<Snapshot> out;
    if (game_->is_game_over()) return out;
    const auto ev = InputEvent::mouse_move(x, y, now());
    check_bounds(ev);
    log(ev);
    if (!mouse_moving_) {
      maybe_emit_noop(out);
      mouse_moving_ = true;
      mouse_onset_ = now();
      mouse_features_ = extract(*game_, schema_);
    }
    last_move_ = now();
    mouse_x_ = x;
    mouse_y_ = y;
    return out;
  }

  std::vector<Snapshot> on_mouse_click(double x, double y) {
    require_active();
    std::vector<Snapshot> out;
    if (game_->is_game_over()) return out;
    const auto ev = InputEvent::mouse_click(x, y, now());
    check_bounds(ev);
    log(ev);
    maybe_emit_noop(out);
    emit(out, extract(*game_, schema_), ActionLabel::mouse_click(x, y), now());
    return out;
  }

  /// Feeds one raw event (as produced by the UI bridge or a policy).
  std::vector<Snapshot> on_event(const InputEvent& e) {
    switch (e.kind) {
      case EventKind::KeyDown: return on_key(e.key, true);
      case EventKind::KeyUp: return on_key(e.key, false);
      case EventKind::MouseMove: return on_mouse_move(e.x, e.y);
      case EventKind::MouseClick: return on_mouse_click(e.x, e.y);
      case EventKind::NoOp: return {};
    }
    return {};
  }

  /// Periodic checks for the current tick, then one engine step with the
  /// input delivered for it. Returns the snapshots emitted by the checks.
  std::vector<Snapshot> tick() {
    require_active();
    std::vector<Snapshot> out;
    if (game_->is_game_over()) return out;
    const auto t = now();
    if (mouse_moving_ && t - last_move_ >= config_.mouse_stationary_steps) {
      mouse_moving_ = false;
      emit(out, mouse_features_, ActionLabel::mouse_move(mouse_x_, mouse_y_), mouse_onset_);
    }
    if (!busy() && std::isfinite(config_.noop_threshold) && t - t0_ >= config_.wait_max)
      emit(out, saved_, ActionLabel::noop(config_.wait_max), t0_);
    game_->step(pending_);
    pending_.clear();
    return out;
  }

  bool game_over() const { return game().is_game_over(); }

  /// Finalizes the session. Unfinished key presses and mouse moves are dropped.
  RecordingSession end_session(EndReason reason) {
    require_active();
    session_.covered = game_->covered();
    session_.duration_ticks = game_->tick();
    session_.end_reason = reason;
    game_.reset();
    return std::move(session_);
  }

  const RecordingSession& current() const { return session_; }

 private:
  struct KeyOnset {
    std::int64_t tick;
    FeatureVector features;
  };

  void require_active() const {
    if (!game_) throw UsageError("recorder: no active session");
  }
  static void check_bounds(const InputEvent& e) {
    if (!e.in_bounds()) throw ValidationError("recorder: mouse coordinates outside the canvas");
  }
  bool busy() const { return mouse_moving_ || !keys_down_.empty(); }

  void log(const InputEvent& e) {
    session_.events.push_back(e);
    pending_.push_back(e);
  }

  void maybe_emit_noop(std::vector<Snapshot>& out) {
    if (!std::isfinite(config_.noop_threshold) || busy()) return;
    const auto diff = now() - t0_;
    if (static_cast<double>(diff) > config_.noop_threshold)
      emit(out, saved_, ActionLabel::noop(static_cast<int>(diff)), t0_);
  }

  void emit(std::vector<Snapshot>& out, const FeatureVector& features, const ActionLabel& label,
            std::int64_t onset) {
    Snapshot s{features, label, now(), onset};
    session_.snapshots.push_back(s);
    out.push_back(std::move(s));
    t0_ = now();
    saved_ = extract(*game_, schema_);
  }

  std::shared_ptr<const GameSpec> spec_;
  RecorderConfig config_;
  FeatureSchema schema_;
  std::optional<GameInstance> game_;
  RecordingSession session_;
  std::vector<InputEvent> pending_;
  std::map<std::string, KeyOnset> keys_down_;
  bool mouse_moving_ = false;
  std::int64_t mouse_onset_ = 0;
  std::int64_t last_move_ = 0;
  double mouse_x_ = 0.0;
  double mouse_y_ = 0.0;
  FeatureVector mouse_features_;
  std::int64_t t0_ = 0;
  FeatureVector saved_;
};

/// Re-records a session from its raw event log with a fresh recorder.
inline RecordingSession replay(std::shared_ptr<const GameSpec> spec, const RecordingSession& session,
                               const RecorderConfig& config) {
  Recorder rec(std::move(spec), config);
  rec.begin_session(session.seed);
  std::size_t next = 0;
  const auto& ev = session.events;
  while (rec.now() < session.duration_ticks && !rec.game_over()) {
    while (next < ev.size() && ev[next].tick == rec.now()) rec.on_event(ev[next++]);
    rec.tick();
  }
  return rec.end_session(session.end_reason);
}

// -- dataset file -------------------------------------------------------------
//
// JSON lines. Line 1 is the header:
//   {"format":"traceneat-dataset","version":1,"game":...,"config":{...},
//    "schema":{"fingerprint":"<hex>","features":[...],"actions":[...]},"sessions":N}
// followed by one line per session:
//   {"seed":"<u64>","end_reason":"game_over"|"player_stop","duration":T,
//    "covered":[ids],"snapshots":[{"tick","onset","x":[...],"label":{...}}],
//    "events":[{"tick","kind",...}]}

inline constexpr int kDatasetVersion = 1;

namespace detail {

inline nlohmann::json label_to_json(const ActionLabel& l) {
  nlohmann::json j = {{"kind", to_string(l.kind)}};
  switch (l.kind) {
    case ActionKind::KeyPress: j["key"] = l.key; j["duration"] = l.duration; break;
    case ActionKind::NoOp: j["duration"] = l.duration; break;
    case ActionKind::MouseMove:
    case ActionKind::MouseClick: j["x"] = l.x; j["y"] = l.y; break;
  }
  return j;
}

inline ActionLabel label_from_json(const nlohmann::json& j) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "key") return ActionLabel::key_press(j.at("key").get<std::string>(), j.at("duration").get<int>());
  if (kind == "noop") return ActionLabel::noop(j.at("duration").get<int>());
  if (kind == "mouse_move") return ActionLabel::mouse_move(j.at("x").get<double>(), j.at("y").get<double>());
  if (kind == "mouse_click") return ActionLabel::mouse_click(j.at("x").get<double>(), j.at("y").get<double>());
  throw ParseError("unknown action kind '" + kind + "'");
}

inline nlohmann::json event_to_json(const InputEvent& e) {
  nlohmann::json j = {{"tick", e.tick}, {"kind", to_string(e.kind)}};
  switch (e.kind) {
    case EventKind::KeyDown:
    case EventKind::KeyUp: j["key"] = e.key; break;
    case EventKind::MouseMove:
    case EventKind::MouseClick: j["x"] = e.x; j["y"] = e.y; break;
    case EventKind::NoOp: j["duration"] = e.duration; break;
  }
  return j;
}

inline InputEvent event_from_json(const nlohmann::json& j) {
  InputEvent e;
  e.kind = event_kind_from_string(j.at("kind").get<std::string>());
  e.tick = j.at("tick").get<std::int64_t>();
  if (e.kind == EventKind::KeyDown || e.kind == EventKind::KeyUp) e.key = j.at("key").get<std::string>();
  if (e.kind == EventKind::MouseMove || e.kind == EventKind::MouseClick) {
    e.x = j.at("x").get<double>();
    e.y = j.at("y").get<double>();
  }
  if (e.kind == EventKind::NoOp) e.duration = j.at("duration").get<int>();
  return e;
}

inline nlohmann::json threshold_to_json(double t) {
  return std::isfinite(t) ? nlohmann::json(t) : nlohmann::json("inf");
}

inline double threshold_from_json(const nlohmann::json& j) {
  if (j.is_string()) {
    if (j.get<std::string>() == "inf") return kInf;
    throw ParseError("noop_threshold: expected a number or \"inf\"");
  }
  return j.get<double>();
}

inline std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::uint64_t parse_u64(const std::string& s, int base) {
  std::size_t used = 0;
  const auto v = std::stoull(s, &used, base);
  if (used != s.size()) throw ParseError("malformed integer '" + s + "'");
  return v;
}

}  // namespace detail

inline nlohmann::json recorder_config_to_json(const RecorderConfig& c) {
  return {{"noop_threshold", detail::threshold_to_json(c.noop_threshold)},
          {"wait_max", c.wait_max},
          {"key_max", c.key_max},
          {"mouse_stationary_steps", c.mouse_stationary_steps}};
}

inline RecorderConfig recorder_config_from_json(const nlohmann::json& j) {
  RecorderConfig c;
  if (j.contains("noop_threshold")) c.noop_threshold = detail::threshold_from_json(j.at("noop_threshold"));
  c.wait_max = j.value("wait_max", c.wait_max);
  c.key_max = j.value("key_max", c.key_max);
  c.mouse_stationary_steps = j.value("mouse_stationary_steps", c.mouse_stationary_steps);
  return c;
}

inline nlohmann::json session_to_json(const RecordingSession& s) {
  nlohmann::json snaps = nlohmann::json::array();
  for (const auto& sn : s.snapshots)
    snaps.push_back({{"tick", sn.tick}, {"onset", sn.onset_tick}, {"x", sn.features},
                     {"label", detail::label_to_json(sn.label)}});
  nlohmann::json events = nlohmann::json::array();
  for (const auto& e : s.events) events.push_back(detail::event_to_json(e));
  return {{"seed", std::to_string(s.seed)},
          {"end_reason", to_string(s.end_reason)},
          {"duration", s.duration_ticks},
          {"covered", s.covered.ids()},
          {"snapshots", snaps},
          {"events", events}};
}

inline RecordingSession session_from_json(const nlohmann::json& j) {
  RecordingSession s;
  s.seed = detail::parse_u64(j.at("seed").get<std::string>(), 10);
  const auto reason = j.at("end_reason").get<std::string>();
  if (reason == "game_over") s.end_reason = EndReason::GameOver;
  else if (reason == "player_stop") s.end_reason = EndReason::PlayerStop;
  else throw ParseError("unknown end_reason '" + reason + "'");
  s.duration_ticks = j.at("duration").get<std::int64_t>();
  s.covered = CoverageSet(j.at("covered").get<std::vector<StatementId>>());
  for (const auto& js : j.at("snapshots")) {
    Snapshot sn;
    sn.tick = js.at("tick").get<std::int64_t>();
    sn.onset_tick = js.at("onset").get<std::int64_t>();
    sn.features = js.at("x").get<FeatureVector>();
    sn.label = detail::label_from_json(js.at("label"));
    s.snapshots.push_back(std::move(sn));
  }
  for (const auto& je : j.at("events")) s.events.push_back(detail::event_from_json(je));
  return s;
}

inline void write_dataset(std::ostream& out, const TrainingDataset& d) {
  const nlohmann::json header = {
      {"format", "traceneat-dataset"},
      {"version", kDatasetVersion},
      {"game", d.game_id},
      {"config", recorder_config_to_json(d.config)},
      {"schema",
       {{"fingerprint", detail::hex64(d.schema_fingerprint)},
        {"features", d.feature_names},
        {"actions", d.action_names}}},
      {"sessions", d.sessions.size()}};
  out << header.dump() << '\n';
  for (const auto& s : d.sessions) out << session_to_json(s).dump() << '\n';
}

inline TrainingDataset read_dataset(std::istream& in) {
  TrainingDataset d;
  std::string line;
  std::size_t lineno = 0;
  std::size_t expected = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      if (!have_header) {
        if (j.value("format", std::string()) != "traceneat-dataset")
          throw ParseError("not a dataset header");
        if (j.at("version").get<int>() != kDatasetVersion)
          throw ParseError("unsupported dataset version " + j.at("version").dump());
        d.game_id = j.at("game").get<std::string>();
        d.config = recorder_config_from_json(j.at("config"));
        d.config.validate();
        const auto& sc = j.at("schema");
        d.schema_fingerprint = detail::parse_u64(sc.at("fingerprint").get<std::string>(), 16);
        d.feature_names = sc.at("features").get<std::vector<std::string>>();
        d.action_names = sc.at("actions").get<std::vector<std::string>>();
        expected = j.at("sessions").get<std::size_t>();
        have_header = true;
      } else {
        d.sessions.push_back(session_from_json(j));
        for (const auto& sn : d.sessions.back().snapshots)
          if (sn.features.size() != d.feature_names.size())
            throw ParseError("snapshot has " + std::to_string(sn.features.size()) + " features, header declares " +
                             std::to_string(d.feature_names.size()));
      }
    } catch (const ParseError& e) {
      throw ParseError(e.what(), lineno);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(e.what(), lineno);
    } catch (const std::invalid_argument& e) {
      throw ParseError(std::string("malformed number: ") + e.what(), lineno);
    } catch (const std::out_of_range& e) {
      throw ParseError(std::string("number out of range: ") + e.what(), lineno);
    } catch (const ValidationError& e) {
      throw ParseError(e.what(), lineno);
    }
  }
  if (!have_header) throw ParseError("empty dataset file", lineno);
  if (d.sessions.size() != expected)
    throw ParseError("header declares " + std::to_string(expected) + " sessions, file has " +
                     std::to_string(d.sessions.size()), lineno);
  return d;
}

inline void save_dataset(const TrainingDataset& d, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  write_dataset(out, d);
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

inline TrainingDataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset '" + path + "'");
  return read_dataset(in);
}

/// Checks that a dataset was recorded against this game's feature layout.
inline void check_dataset(const TrainingDataset& d, const GameSpec& spec) {
  if (d.game_id != spec.id())
    throw ValidationError("dataset is for game '" + d.game_id + "', not '" + spec.id() + "'");
  if (d.schema_fingerprint != FeatureSchema::of(spec).fingerprint())
    throw ValidationError("dataset feature schema does not match game '" + spec.id() + "'");
}

struct DatasetStats {
  std::string game_id;
  std::size_t sessions = 0;
  std::size_t snapshots = 0;
  std::size_t noops = 0;
  double noop_proportion() const { return snapshots ? static_cast<double>(noops) / snapshots : 0.0; }
  std::map<std::string, std::size_t> per_action;
};

inline DatasetStats stats(const TrainingDataset& d) {
  DatasetStats s;
  s.game_id = d.game_id;
  s.sessions = d.sessions.size();
  for (const auto& session : d.sessions)
    for (const auto& sn : session.snapshots) {
      ++s.snapshots;
      if (sn.label.kind == ActionKind::NoOp) ++s.noops;
      const std::string name =
          sn.label.kind == ActionKind::KeyPress ? "key " + sn.label.key : to_string(sn.label.kind);
      ++s.per_action[name];
    }
  return s;
}

/// "count (proportion)" cell, e.g. "206 (0.53)".
inline std::string format_stats_cell(const DatasetStats& s) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%zu (%.2f)", s.snapshots, s.noop_proportion());
  return buf;
}

}  // namespace traceneat
