#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "traceneat/core.hpp"
#include "traceneat/game.hpp"
#include "traceneat/game_spec.hpp"

namespace traceneat {

enum class ActionKind : std::uint8_t { KeyPress, MouseMove, MouseClick, NoOp };

inline const char* to_string(ActionKind k) {
  switch (k) {
    case ActionKind::KeyPress: return "key";
    case ActionKind::MouseMove: return "mouse_move";
    case ActionKind::MouseClick: return "mouse_click";
    case ActionKind::NoOp: return "noop";
  }
  return "?";
}

/// A player action as recorded: what was done plus its parameters.
struct ActionLabel {
  ActionKind kind = ActionKind::NoOp;
  std::string key;   // KeyPress
  double x = 0.0;    // MouseMove / MouseClick
  double y = 0.0;
  int duration = 1;  // KeyPress / NoOp, ticks

  static ActionLabel key_press(std::string k, int d) { return {ActionKind::KeyPress, std::move(k), 0, 0, d}; }
  static ActionLabel mouse_move(double x, double y) { return {ActionKind::MouseMove, {}, x, y, 1}; }
  static ActionLabel mouse_click(double x, double y) { return {ActionKind::MouseClick, {}, x, y, 1}; }
  static ActionLabel noop(int d) { return {ActionKind::NoOp, {}, 0, 0, d}; }

  friend bool operator==(const ActionLabel&, const ActionLabel&) = default;
};

struct ParamRange {
  double lo;
  double hi;
};

struct ActionSpec {
  ActionKind kind;
  std::string key;
  std::vector<ParamRange> params;
  std::string name() const { return kind == ActionKind::KeyPress ? "key " + key : to_string(kind); }
};

/// Limits for durations encoded by regression heads.
struct DurationLimits {
  int key_max = 30;   // d_max
  int wait_max = 60;  // w_max
};

/// Actions a game can process, in fixed order: one KeyPress per handled key,
/// MouseMove, MouseClick, then NoOp (always present).
class ActionSchema {
 public:
  static ActionSchema of(const GameSpec& spec, DurationLimits limits = {}) {
    if (limits.key_max < 1 || limits.wait_max < 1)
      throw ValidationError("duration limits must be at least 1 tick");
    ActionSchema s;
    s.limits_ = limits;
    const ParamRange px{-kCanvasHalfWidth, kCanvasHalfWidth};
    const ParamRange py{-kCanvasHalfHeight, kCanvasHalfHeight};
    for (const auto& k : spec.keys())
      s.actions_.push_back({ActionKind::KeyPress, k, {{1.0, static_cast<double>(limits.key_max)}}});
    if (spec.uses_mouse_move()) s.actions_.push_back({ActionKind::MouseMove, {}, {px, py}});
    if (spec.uses_click()) s.actions_.push_back({ActionKind::MouseClick, {}, {px, py}});
    s.actions_.push_back({ActionKind::NoOp, {}, {{1.0, static_cast<double>(limits.wait_max)}}});
    return s;
  }

  std::size_t size() const { return actions_.size(); }
  const std::vector<ActionSpec>& actions() const { return actions_; }
  const ActionSpec& operator[](std::size_t i) const { return actions_[i]; }
  const DurationLimits& limits() const { return limits_; }
  std::size_t param_count() const {
    std::size_t n = 0;
    for (const auto& a : actions_) n += a.params.size();
    return n;
  }
  bool has_kind(ActionKind k) const {
    for (const auto& a : actions_)
      if (a.kind == k) return true;
    return false;
  }

  /// Index of the action a label refers to, -1 if the game has no such action.
  int index_of(const ActionLabel& label) const {
    for (std::size_t i = 0; i < actions_.size(); ++i)
      if (actions_[i].kind == label.kind &&
          (label.kind != ActionKind::KeyPress || actions_[i].key == label.key))
        return static_cast<int>(i);
    return -1;
  }

  /// Label parameters mapped onto [-1, 1] with the same linear map used for
  /// features.
  std::vector<double> normalized_params(const ActionLabel& label) const {
    const int a = index_of(label);
    if (a < 0) throw UsageError("label action '" + std::string(to_string(label.kind)) + " " + label.key +
                                "' is not available in this game");
    const auto& p = actions_[static_cast<std::size_t>(a)].params;
    switch (label.kind) {
      case ActionKind::KeyPress:
      case ActionKind::NoOp:
        return {normalize(label.duration, p[0].lo, p[0].hi)};
      case ActionKind::MouseMove:
      case ActionKind::MouseClick:
        return {normalize(label.x, p[0].lo, p[0].hi), normalize(label.y, p[1].lo, p[1].hi)};
    }
    return {};
  }

  /// Concrete label for action `a` with normalized parameters `params`.
  ActionLabel denormalize_label(std::size_t a, const std::vector<double>& params) const {
    const auto& spec = actions_.at(a);
    auto dur = [&](std::size_t i) {
      const double v = denormalize(params.at(i), spec.params[i].lo, spec.params[i].hi);
      return static_cast<int>(clamp(std::round(v), spec.params[i].lo, spec.params[i].hi));
    };
    switch (spec.kind) {
      case ActionKind::KeyPress: return ActionLabel::key_press(spec.key, dur(0));
      case ActionKind::NoOp: return ActionLabel::noop(dur(0));
      case ActionKind::MouseMove:
        return ActionLabel::mouse_move(denormalize(params.at(0), spec.params[0].lo, spec.params[0].hi),
                                       denormalize(params.at(1), spec.params[1].lo, spec.params[1].hi));
      case ActionKind::MouseClick:
        return ActionLabel::mouse_click(denormalize(params.at(0), spec.params[0].lo, spec.params[0].hi),
                                        denormalize(params.at(1), spec.params[1].lo, spec.params[1].hi));
    }
    return {};
  }

 private:
  std::vector<ActionSpec> actions_;
  DurationLimits limits_;
};

/// The input event that starts performing `label`. Key presses carry their
/// hold duration in `duration`.
inline InputEvent to_event(const ActionLabel& label) {
  switch (label.kind) {
    case ActionKind::KeyPress: {
      InputEvent e = InputEvent::key_down(label.key);
      e.duration = label.duration;
      return e;
    }
    case ActionKind::MouseMove: return InputEvent::mouse_move(label.x, label.y);
    case ActionKind::MouseClick: return InputEvent::mouse_click(label.x, label.y);
    case ActionKind::NoOp: return InputEvent::noop(label.duration);
  }
  return {};
}

}  // namespace traceneat
