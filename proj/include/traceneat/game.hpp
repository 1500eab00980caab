#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "traceneat/core.hpp"
#include "traceneat/game_spec.hpp"

namespace traceneat {

struct SpriteState {
  double x = 0.0;
  double y = 0.0;
  double heading = 90.0;
  int costume = 0;
  double size = 100.0;
  bool visible = true;
  std::vector<double> variables;

  friend bool operator==(const SpriteState&, const SpriteState&) = default;
};

/// Observable game state. The generator state is kept by the instance and only
/// appears in the canonical serialization.
struct GameState {
  std::vector<SpriteState> sprites;
  std::vector<double> globals;
  double mouse_x = 0.0;
  double mouse_y = 0.0;
  std::int64_t tick = 0;
  std::vector<int> keys_held;  // sorted key indices
  bool started = false;
  bool game_over = false;

  friend bool operator==(const GameState&, const GameState&) = default;
};

enum class EventKind : std::uint8_t { KeyDown, KeyUp, MouseMove, MouseClick, NoOp };

struct InputEvent {
  EventKind kind = EventKind::NoOp;
  std::string key;    // KeyDown / KeyUp
  double x = 0.0;     // MouseMove / MouseClick
  double y = 0.0;
  int duration = 1;   // NoOp, in ticks
  std::int64_t tick = 0;

  static InputEvent key_down(std::string k, std::int64_t t = 0) {
    return {EventKind::KeyDown, std::move(k), 0, 0, 1, t};
  }
  static InputEvent key_up(std::string k, std::int64_t t = 0) {
    return {EventKind::KeyUp, std::move(k), 0, 0, 1, t};
  }
  static InputEvent mouse_move(double x, double y, std::int64_t t = 0) {
    return {EventKind::MouseMove, {}, x, y, 1, t};
  }
  static InputEvent mouse_click(double x, double y, std::int64_t t = 0) {
    return {EventKind::MouseClick, {}, x, y, 1, t};
  }
  static InputEvent noop(int duration, std::int64_t t = 0) {
    return {EventKind::NoOp, {}, 0, 0, duration, t};
  }

  bool in_bounds() const {
    if (kind != EventKind::MouseMove && kind != EventKind::MouseClick) return true;
    return std::abs(x) <= kCanvasHalfWidth && std::abs(y) <= kCanvasHalfHeight;
  }

  friend bool operator==(const InputEvent&, const InputEvent&) = default;
};

inline const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::KeyDown: return "key_down";
    case EventKind::KeyUp: return "key_up";
    case EventKind::MouseMove: return "mouse_move";
    case EventKind::MouseClick: return "mouse_click";
    case EventKind::NoOp: return "noop";
  }
  return "?";
}

inline EventKind event_kind_from_string(std::string_view s) {
  if (s == "key_down") return EventKind::KeyDown;
  if (s == "key_up") return EventKind::KeyUp;
  if (s == "mouse_move") return EventKind::MouseMove;
  if (s == "mouse_click") return EventKind::MouseClick;
  if (s == "noop") return EventKind::NoOp;
  throw ParseError("unknown event kind '" + std::string(s) + "'");
}

/// Set of executed statements, sorted ascending.
class CoverageSet {
 public:
  CoverageSet() = default;
  explicit CoverageSet(std::vector<StatementId> ids) : ids_(std::move(ids)) {
    std::sort(ids_.begin(), ids_.end());
    ids_.erase(std::unique(ids_.begin(), ids_.end()), ids_.end());
  }
  bool contains(StatementId id) const { return std::binary_search(ids_.begin(), ids_.end(), id); }
  std::size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }
  const std::vector<StatementId>& ids() const { return ids_; }
  auto begin() const { return ids_.begin(); }
  auto end() const { return ids_.end(); }
  friend bool operator==(const CoverageSet&, const CoverageSet&) = default;

 private:
  std::vector<StatementId> ids_;
};

/// Control-dependence edges: each statement depends on its enclosing hat or
/// if-statement. Hats are the entry nodes.
struct ControlDependenceGraph {
  std::vector<StatementId> nodes;
  std::vector<std::pair<StatementId, StatementId>> edges;  // parent -> child
  std::vector<StatementId> entries;

  static ControlDependenceGraph of(const GameSpec& spec) {
    ControlDependenceGraph g;
    g.parents_.resize(spec.statement_count(), -1);
    g.children_.resize(spec.statement_count());
    for (const auto& s : spec.statements()) {
      g.nodes.push_back(s.id);
      g.parents_[static_cast<std::size_t>(s.id)] = s.parent;
      if (s.parent >= 0) {
        g.edges.emplace_back(s.parent, s.id);
        g.children_[static_cast<std::size_t>(s.parent)].push_back(s.id);
      }
    }
    for (auto& c : g.children_) std::sort(c.begin(), c.end());
    g.entries = spec.entry_statements();
    return g;
  }

  StatementId parent(StatementId id) const { return parents_.at(static_cast<std::size_t>(id)); }
  const std::vector<StatementId>& children(StatementId id) const {
    return children_.at(static_cast<std::size_t>(id));
  }
  /// Path from an entry node down to `id` (inclusive at both ends).
  std::vector<StatementId> path_to(StatementId id) const {
    std::vector<StatementId> path;
    for (StatementId s = id; s >= 0; s = parent(s)) path.push_back(s);
    std::reverse(path.begin(), path.end());
    return path;
  }

 private:
  std::vector<StatementId> parents_;
  std::vector<std::vector<StatementId>> children_;
};

/// One running, instrumented execution of a game. Single-threaded; create
/// one instance per thread.
class GameInstance {
 public:
  GameInstance(std::shared_ptr<const GameSpec> spec, std::uint64_t seed)
      : spec_(std::move(spec)), cdg_(ControlDependenceGraph::of(*spec_)) {
    reset(seed);
  }

  void reset(std::uint64_t seed) {
    seed_ = seed;
    rng_ = Rng(seed);
    state_ = GameState{};
    for (const auto& sp : spec_->sprites()) {
      SpriteState s;
      s.x = sp.x;
      s.y = sp.y;
      s.heading = normalize_heading(sp.heading);
      s.size = sp.size;
      s.visible = sp.visible;
      for (const auto& v : sp.variables) s.variables.push_back(v.initial);
      state_.sprites.push_back(std::move(s));
    }
    for (const auto& v : spec_->globals()) state_.globals.push_back(v.initial);
    covered_.assign(spec_->statement_count(), 0);
    covered_count_ = 0;
    best_.assign(spec_->statement_count(), {kInf, kInf});
    terminal_ = -1;
    for (StatementId e : spec_->entry_statements()) mark(e);
  }

  const GameSpec& spec() const { return *spec_; }
  const std::shared_ptr<const GameSpec>& spec_ptr() const { return spec_; }
  std::uint64_t seed() const { return seed_; }
  const GameState& state() const { return state_; }
  std::int64_t tick() const { return state_.tick; }
  bool is_game_over() const { return state_.game_over; }
  /// The stop statement that ended the game, -1 while running.
  StatementId terminal_statement() const { return terminal_; }

  /// Advances exactly one tick: events first, then every triggered script.
  const GameState& step(std::span<const InputEvent> events) {
    if (state_.game_over) throw UsageError("step: game is over");
    for (const auto& e : events)
      if (!e.in_bounds())
        throw ValidationError("step: event coordinates (" + std::to_string(e.x) + ", " +
                              std::to_string(e.y) + ") outside the canvas");
    bool moved = false;
    bool clicked = false;
    for (const auto& e : events) {
      switch (e.kind) {
        case EventKind::KeyDown: {
          const int k = spec_->key_index(e.key);
          if (k >= 0 && !std::binary_search(state_.keys_held.begin(), state_.keys_held.end(), k))
            state_.keys_held.insert(
                std::lower_bound(state_.keys_held.begin(), state_.keys_held.end(), k), k);
          break;
        }
        case EventKind::KeyUp: {
          const int k = spec_->key_index(e.key);
          auto it = std::lower_bound(state_.keys_held.begin(), state_.keys_held.end(), k);
          if (it != state_.keys_held.end() && *it == k) state_.keys_held.erase(it);
          break;
        }
        case EventKind::MouseMove:
          state_.mouse_x = e.x;
          state_.mouse_y = e.y;
          moved = true;
          break;
        case EventKind::MouseClick:
          state_.mouse_x = e.x;
          state_.mouse_y = e.y;
          clicked = true;
          break;
        case EventKind::NoOp:
          break;
      }
    }

    const bool first = !state_.started;
    state_.started = true;
    if (first)
      for (const auto& sc : spec_->scripts())
        if (spec_->statement(sc.hat).trigger == Trigger::Start && !run_hat(sc.hat)) break;
    for (const auto& sc : spec_->scripts()) {
      if (state_.game_over) break;
      const Statement& hat = spec_->statement(sc.hat);
      bool fire = false;
      switch (hat.trigger) {
        case Trigger::Start: break;
        case Trigger::Tick: fire = true; break;
        case Trigger::Key:
          fire = std::binary_search(state_.keys_held.begin(), state_.keys_held.end(), hat.key);
          break;
        case Trigger::MouseMove: fire = moved; break;
        case Trigger::Click: fire = clicked; break;
      }
      if (fire) run_hat(sc.hat);
    }

    for (std::size_t i = 0; i < state_.sprites.size(); ++i) {
      auto& s = state_.sprites[i];
      s.x = clamp(s.x, -kCanvasHalfWidth, kCanvasHalfWidth);
      s.y = clamp(s.y, -kCanvasHalfHeight, kCanvasHalfHeight);
      s.heading = normalize_heading(s.heading);
    }
    ++state_.tick;
    return state_;
  }

  const GameState& step() { return step(std::span<const InputEvent>{}); }
  const GameState& step(std::initializer_list<InputEvent> events) {
    return step(std::span<const InputEvent>(events.begin(), events.size()));
  }

  bool is_covered(StatementId id) const {
    spec_->check_id(id);
    return covered_[static_cast<std::size_t>(id)] != 0;
  }
  std::size_t covered_count() const { return covered_count_; }
  const std::vector<char>& coverage_bits() const { return covered_; }
  CoverageSet covered() const {
    std::vector<StatementId> ids;
    for (std::size_t i = 0; i < covered_.size(); ++i)
      if (covered_[i]) ids.push_back(static_cast<StatementId>(i));
    return CoverageSet(std::move(ids));
  }
  const ControlDependenceGraph& cdg() const { return cdg_; }

  /// Normalized best-so-far distance of the deepest covered control
  /// dependency on the path to `target` from taking the branch toward it.
  double branch_distance(StatementId target) const {
    spec_->check_id(target);
    if (covered_[static_cast<std::size_t>(target)]) return 0.0;
    const auto [reached, next] = deepest_covered(target);
    const auto& b = best_[static_cast<std::size_t>(reached)];
    const double raw = spec_->statement(next).branch ? b[1] : b[0];
    return normalize_distance(raw);
  }

  /// Number of uncovered control dependencies between the deepest covered
  /// ancestor of `target` and `target` itself.
  int approach_level(StatementId target) const {
    spec_->check_id(target);
    if (covered_[static_cast<std::size_t>(target)]) return 0;
    const auto [reached, next] = deepest_covered(target);
    (void)next;
    return spec_->statement(target).depth - spec_->statement(reached).depth;
  }

  /// Canonical byte encoding of the full state, field order:
  /// header, tick, started, over, mouse, held keys, globals (declaration
  /// order), sprites (declaration order: x y heading costume size visible
  /// vars...), generator state. Doubles are written as hex floats.
  std::string serialize() const {
    std::string out = "traceneat-state 1\n";
    out += "game " + spec_->id() + "\n";
    out += "tick " + std::to_string(state_.tick) + "\n";
    out += "started " + std::to_string(state_.started ? 1 : 0) + "\n";
    out += "over " + std::to_string(state_.game_over ? 1 : 0) + "\n";
    out += "mouse " + exact(state_.mouse_x) + " " + exact(state_.mouse_y) + "\n";
    out += "keys";
    for (int k : state_.keys_held) out += " " + spec_->keys()[static_cast<std::size_t>(k)];
    out += "\n";
    for (std::size_t i = 0; i < state_.globals.size(); ++i)
      out += "global " + spec_->globals()[i].name + " " + exact(state_.globals[i]) + "\n";
    for (std::size_t i = 0; i < state_.sprites.size(); ++i) {
      const auto& s = state_.sprites[i];
      out += "sprite " + spec_->sprites()[i].name + " " + exact(s.x) + " " + exact(s.y) + " " +
             exact(s.heading) + " " + std::to_string(s.costume) + " " + exact(s.size) + " " +
             (s.visible ? "1" : "0");
      for (double v : s.variables) out += " " + exact(v);
      out += "\n";
    }
    out += "rng " + rng_.serialize() + "\n";
    return out;
  }

  std::uint64_t state_hash() const { return fnv1a(serialize()); }

  // -- geometry helpers, shared with feature extraction ----------------------

  static double normalize_heading(double h) {
    double r = std::fmod(h + 180.0, 360.0);
    if (r < 0) r += 360.0;
    return r - 180.0;
  }

  double half_width(int sprite) const {
    return spec_->sprites()[static_cast<std::size_t>(sprite)].half_width *
           state_.sprites[static_cast<std::size_t>(sprite)].size / 100.0;
  }
  double half_height(int sprite) const {
    return spec_->sprites()[static_cast<std::size_t>(sprite)].half_height *
           state_.sprites[static_cast<std::size_t>(sprite)].size / 100.0;
  }

  /// Euclidean distance from the sprite's center to the nearest grid cell
  /// painted with `color`; 600 when the color is absent.
  double color_distance(int sprite, int color) const {
    const auto& s = state_.sprites[static_cast<std::size_t>(sprite)];
    double best = 600.0;
    for (const auto& c : spec_->color_cells(color))
      best = std::min(best, std::hypot(c[0] - s.x, c[1] - s.y));
    return best;
  }

 private:
  struct Outcome {
    bool value;
    double d_true;
    double d_false;
  };

  void mark(StatementId id) {
    auto& c = covered_[static_cast<std::size_t>(id)];
    if (!c) {
      c = 1;
      ++covered_count_;
    }
  }

  std::pair<StatementId, StatementId> deepest_covered(StatementId target) const {
    StatementId next = target;
    StatementId s = spec_->statement(target).parent;
    while (s >= 0 && !covered_[static_cast<std::size_t>(s)]) {
      next = s;
      s = spec_->statement(s).parent;
    }
    return {s, next};  // hats are always covered, so s >= 0
  }

  // Returns false once the game is over.
  bool run_hat(StatementId hat) {
    auto& b = best_[static_cast<std::size_t>(hat)];
    b[1] = 0.0;
    return run_block(spec_->statement(hat).then_body);
  }

  bool run_block(const std::vector<StatementId>& body) {
    for (StatementId id : body) {
      exec(spec_->statement(id));
      if (state_.game_over) return false;
    }
    return true;
  }

  SpriteState& sprite(int i) { return state_.sprites[static_cast<std::size_t>(i)]; }
  const SpriteState& sprite(int i) const { return state_.sprites[static_cast<std::size_t>(i)]; }

  void exec(const Statement& st) {
    mark(st.id);
    switch (st.kind) {
      case StmtKind::Hat: break;
      case StmtKind::Set:
      case StmtKind::Change: {
        double& slot = st.global_var ? state_.globals[static_cast<std::size_t>(st.var)]
                                     : sprite(st.owner).variables[static_cast<std::size_t>(st.var)];
        const double v = eval(st.a);
        slot = st.kind == StmtKind::Set ? v : slot + v;
        break;
      }
      case StmtKind::GoTo: {
        const double x = eval(st.a);
        const double y = eval(st.b);
        sprite(st.owner).x = x;
        sprite(st.owner).y = y;
        break;
      }
      case StmtKind::SetX: sprite(st.owner).x = eval(st.a); break;
      case StmtKind::SetY: sprite(st.owner).y = eval(st.a); break;
      case StmtKind::ChangeX: sprite(st.owner).x += eval(st.a); break;
      case StmtKind::ChangeY: sprite(st.owner).y += eval(st.a); break;
      case StmtKind::Move: {
        auto& s = sprite(st.owner);
        const double steps = eval(st.a);
        const double rad = s.heading * std::numbers::pi / 180.0;
        s.x += steps * std::sin(rad);
        s.y += steps * std::cos(rad);
        break;
      }
      case StmtKind::Turn:
        sprite(st.owner).heading = normalize_heading(sprite(st.owner).heading + eval(st.a));
        break;
      case StmtKind::Point: sprite(st.owner).heading = normalize_heading(eval(st.a)); break;
      case StmtKind::SetCostume: {
        const int n = spec_->sprites()[static_cast<std::size_t>(st.owner)].costumes;
        int c = static_cast<int>(std::lround(eval(st.a))) % n;
        if (c < 0) c += n;
        sprite(st.owner).costume = c;
        break;
      }
      case StmtKind::NextCostume: {
        const int n = spec_->sprites()[static_cast<std::size_t>(st.owner)].costumes;
        sprite(st.owner).costume = (sprite(st.owner).costume + 1) % n;
        break;
      }
      case StmtKind::SetSize: sprite(st.owner).size = std::max(1.0, eval(st.a)); break;
      case StmtKind::ChangeSize:
        sprite(st.owner).size = std::max(1.0, sprite(st.owner).size + eval(st.a));
        break;
      case StmtKind::Show: sprite(st.owner).visible = true; break;
      case StmtKind::Hide: sprite(st.owner).visible = false; break;
      case StmtKind::Bounce: bounce(st.owner); break;
      case StmtKind::Stop:
        state_.game_over = true;
        terminal_ = st.id;
        break;
      case StmtKind::If: {
        const Outcome o = test(st.a);
        auto& b = best_[static_cast<std::size_t>(st.id)];
        b[1] = std::min(b[1], o.d_true);
        b[0] = std::min(b[0], o.d_false);
        run_block(o.value ? st.then_body : st.else_body);
        break;
      }
    }
  }

  void bounce(int i) {
    auto& s = sprite(i);
    const double w = half_width(i);
    const double h = half_height(i);
    if (s.x + w >= kCanvasHalfWidth && s.heading > 0) s.heading = -s.heading;
    else if (s.x - w <= -kCanvasHalfWidth && s.heading < 0) s.heading = -s.heading;
    if (s.y + h >= kCanvasHalfHeight && std::abs(s.heading) < 90) s.heading = 180 - s.heading;
    else if (s.y - h <= -kCanvasHalfHeight && std::abs(s.heading) > 90) s.heading = 180 - s.heading;
    s.heading = normalize_heading(s.heading);
    s.x = clamp(s.x, -kCanvasHalfWidth + w, kCanvasHalfWidth - w);
    s.y = clamp(s.y, -kCanvasHalfHeight + h, kCanvasHalfHeight - h);
  }

  double eval(const Expr& e) {
    switch (e.op) {
      case Op::Const: return e.value;
      case Op::GlobalVar: return state_.globals[static_cast<std::size_t>(e.index)];
      case Op::SpriteVar: return sprite(e.sprite).variables[static_cast<std::size_t>(e.index)];
      case Op::PosX: return sprite(e.sprite).x;
      case Op::PosY: return sprite(e.sprite).y;
      case Op::Heading: return sprite(e.sprite).heading;
      case Op::Costume: return sprite(e.sprite).costume;
      case Op::Size: return sprite(e.sprite).size;
      case Op::MouseX: return state_.mouse_x;
      case Op::MouseY: return state_.mouse_y;
      case Op::Random: {
        double lo = eval(e.args[0]);
        double hi = eval(e.args[1]);
        if (lo > hi) std::swap(lo, hi);
        if (lo == std::floor(lo) && hi == std::floor(hi))
          return static_cast<double>(
              rng_.uniform_int(static_cast<std::int64_t>(lo), static_cast<std::int64_t>(hi)));
        return rng_.uniform(lo, hi);
      }
      case Op::Distance: {
        const auto& a = sprite(e.sprite);
        const auto& b = sprite(e.index);
        return std::hypot(b.x - a.x, b.y - a.y);
      }
      case Op::ColorDistance: return color_distance(e.sprite, e.index);
      case Op::Add: return eval(e.args[0]) + eval(e.args[1]);
      case Op::Sub: return eval(e.args[0]) - eval(e.args[1]);
      case Op::Mul: return eval(e.args[0]) * eval(e.args[1]);
      case Op::Div: {
        const double num = eval(e.args[0]);
        const double den = eval(e.args[1]);
        return den == 0.0 ? 0.0 : num / den;
      }
      case Op::Mod: {
        const double a = eval(e.args[0]);
        const double m = eval(e.args[1]);
        if (m == 0.0) return 0.0;
        double r = std::fmod(a, m);
        if (r != 0.0 && ((r < 0) != (m < 0))) r += m;
        return r;
      }
      case Op::Min: return std::min(eval(e.args[0]), eval(e.args[1]));
      case Op::Max: return std::max(eval(e.args[0]), eval(e.args[1]));
      case Op::Neg: return -eval(e.args[0]);
      case Op::Abs: return std::abs(eval(e.args[0]));
      case Op::Round: return std::round(eval(e.args[0]));
      case Op::Sin: return std::sin(eval(e.args[0]) * std::numbers::pi / 180.0);
      case Op::Cos: return std::cos(eval(e.args[0]) * std::numbers::pi / 180.0);
      default: return test(e).value ? 1.0 : 0.0;
    }
  }

  // Evaluates a predicate together with its distances to either outcome.
  Outcome test(const Expr& e) {
    switch (e.op) {
      case Op::Lt:
      case Op::Le:
      case Op::Gt:
      case Op::Ge:
      case Op::Eq:
      case Op::Ne: {
        const double l = eval(e.args[0]);
        const double r = eval(e.args[1]);
        const double dt = relational_distance(e.op, l, r);
        const double df = relational_distance(negate_relational(e.op), l, r);
        return {dt == 0.0, dt, df};
      }
      case Op::And: {
        Outcome o{true, 0.0, kInf};
        for (const auto& a : e.args) {
          const Outcome c = test(a);
          o.value = o.value && c.value;
          o.d_true += c.d_true;
          o.d_false = std::min(o.d_false, c.d_false);
        }
        return o;
      }
      case Op::Or: {
        Outcome o{false, kInf, 0.0};
        for (const auto& a : e.args) {
          const Outcome c = test(a);
          o.value = o.value || c.value;
          o.d_true = std::min(o.d_true, c.d_true);
          o.d_false += c.d_false;
        }
        return o;
      }
      case Op::Not: {
        const Outcome c = test(e.args[0]);
        return {!c.value, c.d_false, c.d_true};
      }
      case Op::KeyHeld: {
        const bool held =
            std::binary_search(state_.keys_held.begin(), state_.keys_held.end(), e.index);
        return {held, held ? 0.0 : 1.0, held ? 1.0 : 0.0};
      }
      case Op::Touching: {
        const auto& a = sprite(e.sprite);
        const auto& b = sprite(e.index);
        const double gx = std::abs(a.x - b.x) - (half_width(e.sprite) + half_width(e.index));
        const double gy = std::abs(a.y - b.y) - (half_height(e.sprite) + half_height(e.index));
        const bool overlap = gx <= 0 && gy <= 0;
        const double gap = std::max(gx, 0.0) + std::max(gy, 0.0);
        if (!a.visible || !b.visible) return {false, gap + 1.0, 0.0};
        return {overlap, overlap ? 0.0 : gap, overlap ? std::min(-gx, -gy) + 1.0 : 0.0};
      }
      case Op::TouchingEdge: {
        const auto& a = sprite(e.sprite);
        const double w = half_width(e.sprite);
        const double h = half_height(e.sprite);
        const double margin = std::min({kCanvasHalfWidth - (a.x + w), (a.x - w) + kCanvasHalfWidth,
                                        kCanvasHalfHeight - (a.y + h), (a.y - h) + kCanvasHalfHeight});
        const bool touching = margin <= 0;
        return {touching, touching ? 0.0 : margin, touching ? -margin + 1.0 : 0.0};
      }
      case Op::TouchingColor: {
        const auto& a = sprite(e.sprite);
        const double w = half_width(e.sprite);
        const double h = half_height(e.sprite);
        const auto& color = spec_->colors()[static_cast<std::size_t>(e.index)];
        double gap = kInf;
        for (const auto& r : spec_->regions()) {
          if (r.color != color) continue;
          const double gx = std::max({0.0, r.x0 - (a.x + w), (a.x - w) - r.x1});
          const double gy = std::max({0.0, r.y0 - (a.y + h), (a.y - h) - r.y1});
          gap = std::min(gap, gx + gy);
        }
        const bool touching = a.visible && gap == 0.0;
        if (!a.visible) return {false, gap + 1.0, 0.0};
        return {touching, gap, touching ? 1.0 : 0.0};
      }
      default: {
        // numeric used as a truth value
        const double v = eval(e);
        return {v != 0.0, v != 0.0 ? 0.0 : 1.0, v != 0.0 ? 1.0 : 0.0};
      }
    }
  }

  std::shared_ptr<const GameSpec> spec_;
  ControlDependenceGraph cdg_;
  std::uint64_t seed_ = 0;
  Rng rng_;
  GameState state_;
  std::vector<char> covered_;
  std::size_t covered_count_ = 0;
  std::vector<std::array<double, 2>> best_;  // [false, true] best raw distances
  StatementId terminal_ = -1;
};

/// Builds a fresh instance at tick 0. Only entry (hat) statements are covered.
inline GameInstance load_game(std::shared_ptr<const GameSpec> spec, std::uint64_t seed) {
  return GameInstance(std::move(spec), seed);
}

}  // namespace traceneat
