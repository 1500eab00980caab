#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include "traceneat/core.hpp"
#include "traceneat/game.hpp"
#include "traceneat/recorder.hpp"

namespace traceneat {

/// Stand-in for a human player: emits raw input events tick by tick.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual void reset(std::uint64_t seed) = 0;
  /// Raw events for the current tick, given the state before it is stepped.
  virtual std::vector<InputEvent> act(const GameInstance& game) = 0;
};

namespace detail {

inline const SpriteState& sprite_named(const GameInstance& g, const char* name) {
  const int i = g.spec().sprite_index(name);
  if (i < 0) throw UsageError(std::string("policy: game has no sprite '") + name + "'");
  return g.state().sprites[static_cast<std::size_t>(i)];
}

inline double var_named(const GameInstance& g, const char* name) {
  for (std::size_t i = 0; i < g.spec().globals().size(); ++i)
    if (g.spec().globals()[i].name == name) return g.state().globals[i];
  throw UsageError(std::string("policy: game has no global '") + name + "'");
}

/// Holds one key for a fixed number of ticks, then reports idle.
class KeyHolder {
 public:
  bool idle(std::int64_t t) const { return key_.empty() && t >= ready_at_; }
  void press(std::vector<InputEvent>& out, const std::string& key, int duration, std::int64_t t, int pause) {
    key_ = key;
    release_at_ = t + std::max(1, duration);
    pause_ = pause;
    out.push_back(InputEvent::key_down(key, t));
  }
  void poll(std::vector<InputEvent>& out, std::int64_t t) {
    if (!key_.empty() && t >= release_at_) {
      out.push_back(InputEvent::key_up(key_, t));
      key_.clear();
      ready_at_ = t + pause_;
    }
  }
  void reset() {
    key_.clear();
    ready_at_ = 0;
  }

 private:
  std::string key_;
  std::int64_t release_at_ = 0;
  std::int64_t ready_at_ = 0;
  int pause_ = 0;
};

}  // namespace detail

/// Hops the mouse to where the ball is heading every few ticks while it
/// descends.
class PaddleBallExpert : public Policy {
 public:
  void reset(std::uint64_t seed) override { rng_ = Rng(seed); }
  std::vector<InputEvent> act(const GameInstance& g) override {
    std::vector<InputEvent> out;
    const auto t = g.tick();
    if (t % 7 != 0) return out;
    const auto& ball = detail::sprite_named(g, "ball");
    if (std::abs(ball.heading) <= 90) return out;
    const double speed = ball.variables.empty() ? 10.0 : ball.variables[0];
    const double vx = speed * std::sin(ball.heading * std::numbers::pi / 180.0);
    const double x = clamp(ball.x + 3.0 * vx + rng_.uniform(-4, 4), -200, 200);
    out.push_back(InputEvent::mouse_move(std::round(x), -150, t));
    return out;
  }

 private:
  Rng rng_;
};

/// Presses left/right long enough to line the bowl up with the fruit.
class FruitCatchExpert : public Policy {
 public:
  void reset(std::uint64_t seed) override {
    rng_ = Rng(seed);
    keys_.reset();
  }
  std::vector<InputEvent> act(const GameInstance& g) override {
    std::vector<InputEvent> out;
    const auto t = g.tick();
    keys_.poll(out, t);
    if (!keys_.idle(t)) return out;
    const auto& bowl = detail::sprite_named(g, "bowl");
    const auto& fruit = detail::sprite_named(g, "fruit");
    const double dx = fruit.x - bowl.x;
    if (std::abs(dx) <= 12) return out;
    const int d = static_cast<int>(clamp(std::round(std::abs(dx) / 9.0), 1, 8));
    keys_.press(out, dx < 0 ? "left" : "right", d, t, 2 + static_cast<int>(rng_.uniform_int(0, 2)));
    return out;
  }

 private:
  Rng rng_;
  detail::KeyHolder keys_;
};

/// Taps space whenever the bird sinks below the gap center.
class FlapBirdExpert : public Policy {
 public:
  void reset(std::uint64_t seed) override {
    rng_ = Rng(seed);
    keys_.reset();
  }
  std::vector<InputEvent> act(const GameInstance& g) override {
    std::vector<InputEvent> out;
    const auto t = g.tick();
    keys_.poll(out, t);
    if (!keys_.idle(t)) return out;
    const auto& bird = detail::sprite_named(g, "bird");
    const auto& pipe = detail::sprite_named(g, "pipe");
    const double target = pipe.x > bird.x - 30 ? pipe.y : 0.0;
    if (bird.y < target - 10 && bird.variables[0] <= 0)
      keys_.press(out, "space", 1 + static_cast<int>(rng_.uniform_int(0, 1)), t, 3);
    return out;
  }

 private:
  Rng rng_;
  detail::KeyHolder keys_;
};

/// Steers toward the apple along the larger axis first.
class SnakeGridExpert : public Policy {
 public:
  void reset(std::uint64_t seed) override {
    rng_ = Rng(seed);
    keys_.reset();
  }
  std::vector<InputEvent> act(const GameInstance& g) override {
    std::vector<InputEvent> out;
    const auto t = g.tick();
    keys_.poll(out, t);
    if (!keys_.idle(t)) return out;
    const auto& head = detail::sprite_named(g, "head");
    const auto& apple = detail::sprite_named(g, "apple");
    const int dir = static_cast<int>(detail::var_named(g, "dir"));
    const double dx = apple.x - head.x;
    const double dy = apple.y - head.y;
    int want = dir;
    if (std::abs(dx) >= 10 && (std::abs(dx) >= std::abs(dy) || std::abs(dy) < 10)) want = dx > 0 ? 0 : 2;
    else if (std::abs(dy) >= 10) want = dy > 0 ? 1 : 3;
    if ((want + 2) % 4 == dir) want = std::abs(dy) >= std::abs(dx) ? (dx >= 0 ? 0 : 2) : (dy >= 0 ? 1 : 3);
    if (want == dir) return out;
    static const char* names[] = {"right", "up", "left", "down"};
    keys_.press(out, names[want], 1 + static_cast<int>(rng_.uniform_int(0, 2)), t, 2);
    return out;
  }

 private:
  Rng rng_;
  detail::KeyHolder keys_;
};

/// Points the mouse at the dot, dashing when it is far and the dash is ready.
class DotChaseExpert : public Policy {
 public:
  void reset(std::uint64_t seed) override {
    rng_ = Rng(seed);
    keys_.reset();
  }
  std::vector<InputEvent> act(const GameInstance& g) override {
    std::vector<InputEvent> out;
    const auto t = g.tick();
    keys_.poll(out, t);
    const auto& player = detail::sprite_named(g, "player");
    const auto& dot = detail::sprite_named(g, "dot");
    const auto& enemy = detail::sprite_named(g, "enemy");
    if (t % 7 == 0) {
      double tx = dot.x;
      double ty = dot.y;
      // sidestep when the enemy is close
      if (std::hypot(enemy.x - player.x, enemy.y - player.y) < 50) {
        tx = player.x - (enemy.x - player.x) * 2;
        ty = player.y - (enemy.y - player.y) * 2;
      }
      out.push_back(InputEvent::mouse_move(std::round(clamp(tx + rng_.uniform(-3, 3), -240, 240)),
                                           std::round(clamp(ty + rng_.uniform(-3, 3), -180, 180)), t));
    }
    if (keys_.idle(t) && detail::var_named(g, "boost") == 0 &&
        std::hypot(dot.x - player.x, dot.y - player.y) > 150)
      keys_.press(out, "space", 1, t, 5);
    return out;
  }

 private:
  Rng rng_;
  detail::KeyHolder keys_;
};

inline std::unique_ptr<Policy> expert_for(const std::string& game_id) {
  if (game_id == "PaddleBall") return std::make_unique<PaddleBallExpert>();
  if (game_id == "FruitCatch") return std::make_unique<FruitCatchExpert>();
  if (game_id == "FlapBird") return std::make_unique<FlapBirdExpert>();
  if (game_id == "SnakeGrid") return std::make_unique<SnakeGridExpert>();
  if (game_id == "DotChase") return std::make_unique<DotChaseExpert>();
  throw ValidationError("no scripted expert for game '" + game_id + "'");
}

/// Plays one session with `policy` through a recorder.
inline RecordingSession record_session(Recorder& rec, Policy& policy, std::uint64_t seed, std::int64_t max_ticks) {
  rec.begin_session(seed);
  policy.reset(mix_seed(seed, 0x706f6c));
  while (!rec.game_over() && rec.now() < max_ticks) {
    for (const auto& e : policy.act(rec.game())) rec.on_event(e);
    rec.tick();
  }
  return rec.end_session(rec.game_over() ? EndReason::GameOver : EndReason::PlayerStop);
}

/// Records sessions until `total_ticks` of play have been collected.
inline TrainingDataset synthesize_dataset(std::shared_ptr<const GameSpec> spec, Policy& policy,
                                          const RecorderConfig& config, std::int64_t total_ticks,
                                          std::uint64_t seed) {
  if (total_ticks <= 0) throw ValidationError("synthesize: total ticks must be positive");
  TrainingDataset d = make_dataset(*spec, config);
  Recorder rec(spec, config);
  std::int64_t used = 0;
  for (std::uint64_t i = 0; used < total_ticks; ++i) {
    auto s = record_session(rec, policy, mix_seed(seed, i), total_ticks - used);
    used += std::max<std::int64_t>(1, s.duration_ticks);
    d.sessions.push_back(std::move(s));
  }
  return d;
}

/// The same raw event logs re-recorded under a different recorder config.
inline TrainingDataset rederive(const TrainingDataset& d, std::shared_ptr<const GameSpec> spec,
                                const RecorderConfig& config) {
  check_dataset(d, *spec);
  TrainingDataset out = make_dataset(*spec, config);
  for (const auto& s : d.sessions) out.sessions.push_back(replay(spec, s, config));
  return out;
}

}  // namespace traceneat
