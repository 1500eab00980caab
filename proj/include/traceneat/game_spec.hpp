#pragma once

#include <algorithm>
#include <array>
#include <cstdlib>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "traceneat/core.hpp"
#include "traceneat/expr.hpp"

namespace traceneat {

using StatementId = int;

enum class Trigger : std::uint8_t { Start, Tick, Key, MouseMove, Click };

enum class StmtKind : std::uint8_t {
  Hat,
  Set,
  Change,
  GoTo,
  SetX,
  SetY,
  ChangeX,
  ChangeY,
  Move,
  Turn,
  Point,
  SetCostume,
  NextCostume,
  SetSize,
  ChangeSize,
  Show,
  Hide,
  If,
  Stop,
  Bounce,
};

enum class RotationStyle : std::uint8_t { AllAround, LeftRight, DontRotate };

/// Input classes a game can process.
enum class InputKind : std::uint8_t { Key, MouseMove, MouseClick };

struct VariableSpec {
  std::string name;
  double initial = 0.0;
  double lo = 0.0;  // declared range, used for feature normalization
  double hi = 1.0;
};

struct SpriteSpec {
  std::string name;
  double x = 0.0;
  double y = 0.0;
  double heading = 90.0;
  int costumes = 1;
  double size = 100.0;
  double half_width = 10.0;  // collision box at size 100
  double half_height = 10.0;
  RotationStyle rotation = RotationStyle::DontRotate;
  bool visible = true;
  std::vector<VariableSpec> variables;
};

/// Axis-aligned colored rectangle painted on the backdrop.
struct ColorRegion {
  std::string color;
  double x0, y0, x1, y1;
};

struct Statement {
  StatementId id = -1;
  StmtKind kind = StmtKind::Stop;
  std::string label;
  int owner = -1;  // sprite index, -1 = stage

  // Hat
  Trigger trigger = Trigger::Start;
  int key = -1;

  // Set / Change
  bool global_var = true;
  int var = -1;

  Expr a;  // value / condition / x
  Expr b;  // y for GoTo

  std::vector<StatementId> then_body;  // hat body or if-branch
  std::vector<StatementId> else_body;

  // control dependence
  StatementId parent = -1;
  bool branch = true;  // outcome of the parent's predicate that leads here
  int depth = 0;       // 0 for hats
};

struct Script {
  int owner = -1;
  StatementId hat = -1;
};

/// Occupancy grid used for distance-to-color queries: 48x36 cells of 10x10
/// logical units.
inline constexpr int kGridCols = 48;
inline constexpr int kGridRows = 36;
inline constexpr double kGridCell = 10.0;

/// Validated, resolved game description. Built from the JSON schema below
/// (either a built-in game or a user file); immutable afterwards.
///
/// Schema:
///   { "id": str,
///     "globals":  [{"name", "init", "range": [lo, hi]}],
///     "backdrop": [{"color", "rect": [x0, y0, x1, y1]}],
///     "sprites":  [{"name", "x", "y", "heading", "costumes", "size",
///                   "extent": [half_w, half_h], "rotation": "all"|"lr"|"none",
///                   "visible", "vars": [...]}],
///     "scripts":  [{"owner": sprite|"stage", "when": "start"|"tick"|"key <k>"|
///                   "mouse_move"|"click", "do": [stmt...]}],
///     "winning":  [label or id...] }
/// Statements are objects with "op" plus operands given as s-expressions,
/// optional "label" and optional "id" (all-or-none; ids must be 0..N-1).
class GameSpec {
 public:
  static GameSpec from_json(const nlohmann::json& j);
  static GameSpec parse(std::string_view text) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(std::string("game spec: ") + e.what());
    }
    return from_json(j);
  }

  const std::string& id() const { return id_; }
  const std::vector<SpriteSpec>& sprites() const { return sprites_; }
  const std::vector<VariableSpec>& globals() const { return globals_; }
  const std::vector<ColorRegion>& regions() const { return regions_; }
  const std::vector<Script>& scripts() const { return scripts_; }
  const std::vector<Statement>& statements() const { return statements_; }
  const Statement& statement(StatementId id) const {
    check_id(id);
    return statements_[static_cast<std::size_t>(id)];
  }
  std::size_t statement_count() const { return statements_.size(); }
  bool contains(StatementId id) const {
    return id >= 0 && static_cast<std::size_t>(id) < statements_.size();
  }
  void check_id(StatementId id) const {
    if (!contains(id)) throw UsageError("unknown statement id " + std::to_string(id));
  }

  const std::vector<std::string>& keys() const { return keys_; }
  const std::vector<std::string>& colors() const { return colors_; }
  int key_index(std::string_view name) const { return find(keys_, name); }
  int sprite_index(std::string_view name) const {
    for (std::size_t i = 0; i < sprites_.size(); ++i)
      if (sprites_[i].name == name) return static_cast<int>(i);
    return -1;
  }

  const std::set<StatementId>& winning_statements() const { return winning_; }
  const std::set<StatementId>& terminal_statements() const { return terminal_; }
  const std::vector<StatementId>& entry_statements() const { return entries_; }
  std::optional<StatementId> find_label(std::string_view label) const {
    for (const auto& s : statements_)
      if (s.label == label) return s.id;
    return std::nullopt;
  }

  std::set<InputKind> input_handlers() const {
    std::set<InputKind> kinds;
    if (!keys_.empty()) kinds.insert(InputKind::Key);
    if (uses_mouse_move_) kinds.insert(InputKind::MouseMove);
    if (uses_click_) kinds.insert(InputKind::MouseClick);
    return kinds;
  }
  /// True when any script reads the mouse position or reacts to mouse input.
  bool uses_mouse() const { return uses_mouse_move_ || uses_click_; }
  bool uses_mouse_move() const { return uses_mouse_move_; }
  bool uses_click() const { return uses_click_; }

  /// Other sprites whose touching/distance the given sprite's scripts query.
  const std::vector<int>& touch_targets(int sprite) const {
    return touch_sprites_[static_cast<std::size_t>(sprite)];
  }
  const std::vector<int>& touch_colors(int sprite) const {
    return touch_colors_[static_cast<std::size_t>(sprite)];
  }
  bool changes_costume(int sprite) const {
    return costume_changers_[static_cast<std::size_t>(sprite)];
  }

  /// Cell-center coordinates of every grid cell painted with `color`.
  const std::vector<std::array<double, 2>>& color_cells(int color) const {
    return color_cells_[static_cast<std::size_t>(color)];
  }

  /// The JSON document this spec was built from.
  const nlohmann::json& source() const { return source_; }

 private:
  static int find(const std::vector<std::string>& v, std::string_view name) {
    for (std::size_t i = 0; i < v.size(); ++i)
      if (v[i] == name) return static_cast<int>(i);
    return -1;
  }
  static int intern(std::vector<std::string>& v, std::string_view name) {
    int i = find(v, name);
    if (i >= 0) return i;
    v.emplace_back(name);
    return static_cast<int>(v.size()) - 1;
  }

  Expr compile_expr(const nlohmann::json& value, int owner, const std::string& path,
                    bool want_predicate);
  Expr compile_node(const SExpr& e, int owner, const std::string& path);
  StatementId compile_statement(const nlohmann::json& js, int owner, StatementId parent,
                                bool branch, int depth, const std::string& path);
  void collect_ids(const nlohmann::json& body, std::vector<std::optional<long long>>& ids);
  int sprite_operand(const SExpr& e, std::size_t pos, int owner, const std::string& path);

  std::string id_;
  std::vector<SpriteSpec> sprites_;
  std::vector<VariableSpec> globals_;
  std::vector<ColorRegion> regions_;
  std::vector<Script> scripts_;
  std::vector<Statement> statements_;
  std::vector<std::string> keys_;
  std::vector<std::string> colors_;
  std::set<StatementId> winning_;
  std::set<StatementId> terminal_;
  std::vector<StatementId> entries_;
  bool uses_mouse_move_ = false;
  bool uses_click_ = false;
  std::vector<std::vector<int>> touch_sprites_;
  std::vector<std::vector<int>> touch_colors_;
  std::vector<bool> costume_changers_;
  std::vector<std::vector<std::array<double, 2>>> color_cells_;
  nlohmann::json source_;

  // compile-time scratch
  std::vector<long long> explicit_ids_;
  std::size_t next_slot_ = 0;
};

// ---------------------------------------------------------------------------

namespace detail {

inline double json_number(const nlohmann::json& j, const char* key, double fallback,
                          const std::string& path) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_number()) throw ValidationError(path + "." + key + ": expected a number");
  return v.get<double>();
}

inline std::string json_string(const nlohmann::json& j, const char* key, const std::string& path) {
  if (!j.contains(key) || !j.at(key).is_string())
    throw ValidationError(path + "." + key + ": expected a string");
  return j.at(key).get<std::string>();
}

inline std::pair<double, double> json_pair(const nlohmann::json& j, const char* key,
                                           std::pair<double, double> fallback,
                                           const std::string& path) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
    throw ValidationError(path + "." + key + ": expected [number, number]");
  return {v[0].get<double>(), v[1].get<double>()};
}

inline VariableSpec parse_variable(const nlohmann::json& j, const std::string& path) {
  VariableSpec v;
  v.name = json_string(j, "name", path);
  v.initial = json_number(j, "init", 0.0, path);
  auto [lo, hi] = json_pair(j, "range", {0.0, 100.0}, path);
  if (!(lo < hi)) throw ValidationError(path + ".range: lower bound must be below upper bound");
  v.lo = lo;
  v.hi = hi;
  return v;
}

}  // namespace detail

inline int GameSpec::sprite_operand(const SExpr& e, std::size_t pos, int owner,
                                    const std::string& path) {
  if (e.items.size() <= pos) {
    if (owner < 0) throw ValidationError(path + ": '" + e.head() + "' needs a sprite on the stage");
    return owner;
  }
  const auto& arg = e.items[pos];
  if (arg.is_list) throw ValidationError(path + ": expected a sprite name");
  const int idx = sprite_index(arg.atom);
  if (idx < 0) throw ValidationError(path + ": unknown sprite '" + arg.atom + "'");
  return idx;
}

inline Expr GameSpec::compile_node(const SExpr& e, int owner, const std::string& path) {
  Expr out;
  if (!e.is_list) {
    if (e.is_number()) {
      out.op = Op::Const;
      out.value = e.number();
      return out;
    }
    // bare symbol: sprite-local variable first, then global
    if (owner >= 0) {
      const auto& vars = sprites_[static_cast<std::size_t>(owner)].variables;
      for (std::size_t i = 0; i < vars.size(); ++i)
        if (vars[i].name == e.atom) {
          out.op = Op::SpriteVar;
          out.sprite = owner;
          out.index = static_cast<int>(i);
          return out;
        }
    }
    for (std::size_t i = 0; i < globals_.size(); ++i)
      if (globals_[i].name == e.atom) {
        out.op = Op::GlobalVar;
        out.index = static_cast<int>(i);
        return out;
      }
    throw ValidationError(path + ": unknown variable '" + e.atom + "'");
  }

  const std::string& h = e.head();
  const std::size_t argc = e.items.size() - 1;
  auto need = [&](std::size_t lo, std::size_t hi) {
    if (argc < lo || argc > hi)
      throw ValidationError(path + ": wrong number of arguments to '" + h + "'");
  };
  auto args_from = [&](std::size_t first) {
    for (std::size_t i = first; i < e.items.size(); ++i)
      out.args.push_back(compile_node(e.items[i], owner, path));
  };
  auto numeric_args = [&]() {
    for (const auto& a : out.args)
      if (is_predicate(a.op)) throw ValidationError(path + ": predicate used as a number in '" + h + "'");
  };
  auto predicate_args = [&]() {
    for (const auto& a : out.args)
      if (!is_predicate(a.op)) throw ValidationError(path + ": '" + h + "' expects predicates");
  };
  auto note_touch = [&](int other) {
    if (owner < 0) return;
    auto& v = touch_sprites_[static_cast<std::size_t>(owner)];
    if (std::find(v.begin(), v.end(), other) == v.end()) v.push_back(other);
  };
  auto note_color = [&](int color) {
    if (owner < 0) return;
    auto& v = touch_colors_[static_cast<std::size_t>(owner)];
    if (std::find(v.begin(), v.end(), color) == v.end()) v.push_back(color);
  };
  auto color_operand = [&]() {
    if (e.items[1].is_list) throw ValidationError(path + ": expected a color name");
    const int c = find(colors_, e.items[1].atom);
    if (c < 0) throw ValidationError(path + ": unknown color '" + e.items[1].atom + "'");
    return c;
  };

  static const std::map<std::string, Op, std::less<>> attrs = {
      {"x", Op::PosX}, {"y", Op::PosY}, {"heading", Op::Heading},
      {"costume", Op::Costume}, {"size", Op::Size}};
  static const std::map<std::string, Op, std::less<>> binary = {
      {"+", Op::Add}, {"-", Op::Sub}, {"*", Op::Mul}, {"/", Op::Div}, {"mod", Op::Mod},
      {"min", Op::Min}, {"max", Op::Max}};
  static const std::map<std::string, Op, std::less<>> unary = {
      {"neg", Op::Neg}, {"abs", Op::Abs}, {"round", Op::Round}, {"sin", Op::Sin}, {"cos", Op::Cos}};
  static const std::map<std::string, Op, std::less<>> relational = {
      {"<", Op::Lt}, {"<=", Op::Le}, {">", Op::Gt}, {">=", Op::Ge}, {"=", Op::Eq}, {"!=", Op::Ne}};

  if (auto it = attrs.find(h); it != attrs.end()) {
    need(0, 1);
    out.op = it->second;
    out.sprite = sprite_operand(e, 1, owner, path);
  } else if (h == "var") {
    need(1, 2);
    out.sprite = sprite_operand(e, 2, owner, path);
    const auto& vars = sprites_[static_cast<std::size_t>(out.sprite)].variables;
    for (std::size_t i = 0; i < vars.size(); ++i)
      if (!e.items[1].is_list && vars[i].name == e.items[1].atom) out.index = static_cast<int>(i);
    if (out.index < 0) throw ValidationError(path + ": unknown sprite variable");
    out.op = Op::SpriteVar;
  } else if (h == "mouse_x" || h == "mouse_y") {
    need(0, 0);
    out.op = h == "mouse_x" ? Op::MouseX : Op::MouseY;
    uses_mouse_move_ = true;
  } else if (h == "random") {
    need(2, 2);
    out.op = Op::Random;
    args_from(1);
    numeric_args();
  } else if (h == "distance") {
    need(1, 1);
    if (owner < 0) throw ValidationError(path + ": 'distance' needs a sprite owner");
    out.op = Op::Distance;
    out.sprite = owner;
    out.index = sprite_operand(e, 1, owner, path);
    note_touch(out.index);
  } else if (h == "color_distance") {
    need(1, 1);
    if (owner < 0) throw ValidationError(path + ": 'color_distance' needs a sprite owner");
    out.op = Op::ColorDistance;
    out.sprite = owner;
    out.index = color_operand();
    note_color(out.index);
  } else if (auto bi = binary.find(h); bi != binary.end()) {
    if (h == "-" && argc == 1) {
      out.op = Op::Neg;
      args_from(1);
    } else {
      need(2, 2);
      out.op = bi->second;
      args_from(1);
    }
    numeric_args();
  } else if (auto un = unary.find(h); un != unary.end()) {
    need(1, 1);
    out.op = un->second;
    args_from(1);
    numeric_args();
  } else if (auto rel = relational.find(h); rel != relational.end()) {
    need(2, 2);
    out.op = rel->second;
    args_from(1);
    numeric_args();
  } else if (h == "and" || h == "or") {
    if (argc < 2) throw ValidationError(path + ": '" + h + "' needs at least two operands");
    out.op = h == "and" ? Op::And : Op::Or;
    args_from(1);
    predicate_args();
  } else if (h == "not") {
    need(1, 1);
    out.op = Op::Not;
    args_from(1);
    predicate_args();
  } else if (h == "key") {
    need(1, 1);
    if (e.items[1].is_list) throw ValidationError(path + ": expected a key name");
    out.op = Op::KeyHeld;
    out.index = intern(keys_, e.items[1].atom);
  } else if (h == "touching") {
    need(1, 1);
    if (owner < 0) throw ValidationError(path + ": 'touching' needs a sprite owner");
    out.sprite = owner;
    if (!e.items[1].is_list && e.items[1].atom == "edge") {
      out.op = Op::TouchingEdge;
    } else {
      out.op = Op::Touching;
      out.index = sprite_operand(e, 1, owner, path);
      if (out.index == owner) throw ValidationError(path + ": sprite cannot touch itself");
      note_touch(out.index);
    }
  } else if (h == "touching_color") {
    need(1, 1);
    if (owner < 0) throw ValidationError(path + ": 'touching_color' needs a sprite owner");
    out.op = Op::TouchingColor;
    out.sprite = owner;
    out.index = color_operand();
    note_color(out.index);
  } else {
    throw ValidationError(path + ": unknown operator '" + h + "'");
  }
  return out;
}

inline Expr GameSpec::compile_expr(const nlohmann::json& value, int owner, const std::string& path,
                                   bool want_predicate) {
  Expr e;
  if (value.is_number()) {
    e.op = Op::Const;
    e.value = value.get<double>();
  } else if (value.is_string()) {
    e = compile_node(parse_sexpr(value.get<std::string>()), owner, path);
  } else {
    throw ValidationError(path + ": expected a number or an expression string");
  }
  if (want_predicate && !is_predicate(e.op))
    throw ValidationError(path + ": condition must be a predicate");
  if (!want_predicate && is_predicate(e.op))
    throw ValidationError(path + ": expected a numeric expression");
  return e;
}

inline void GameSpec::collect_ids(const nlohmann::json& body,
                                  std::vector<std::optional<long long>>& ids) {
  for (const auto& st : body) {
    if (st.is_object() && st.contains("id") && st.at("id").is_number_integer())
      ids.emplace_back(st.at("id").get<long long>());
    else
      ids.emplace_back(std::nullopt);
    if (st.is_object()) {
      if (st.contains("then")) collect_ids(st.at("then"), ids);
      if (st.contains("else")) collect_ids(st.at("else"), ids);
    }
  }
}

inline StatementId GameSpec::compile_statement(const nlohmann::json& js, int owner,
                                               StatementId parent, bool branch, int depth,
                                               const std::string& path) {
  if (!js.is_object()) throw ValidationError(path + ": statement must be an object");
  const StatementId id = static_cast<StatementId>(explicit_ids_[next_slot_++]);
  Statement st;
  st.id = id;
  st.owner = owner;
  st.parent = parent;
  st.branch = branch;
  st.depth = depth;
  if (js.contains("label")) st.label = detail::json_string(js, "label", path);

  const std::string op = detail::json_string(js, "op", path);
  auto value = [&](const char* key) -> Expr {
    if (!js.contains(key)) throw ValidationError(path + "." + key + ": missing operand");
    return compile_expr(js.at(key), owner, path + "." + key, false);
  };
  auto need_sprite = [&]() {
    if (owner < 0) throw ValidationError(path + ".op: '" + op + "' is not available on the stage");
  };

  static const std::map<std::string, StmtKind, std::less<>> single = {
      {"setx", StmtKind::SetX}, {"sety", StmtKind::SetY}, {"point", StmtKind::Point},
      {"costume", StmtKind::SetCostume}, {"size", StmtKind::SetSize}};
  static const std::map<std::string, StmtKind, std::less<>> by = {
      {"changex", StmtKind::ChangeX}, {"changey", StmtKind::ChangeY}, {"move", StmtKind::Move},
      {"turn", StmtKind::Turn}, {"change_size", StmtKind::ChangeSize}};

  if (op == "set" || op == "change") {
    st.kind = op == "set" ? StmtKind::Set : StmtKind::Change;
    const std::string name = detail::json_string(js, "var", path);
    st.var = -1;
    if (owner >= 0) {
      const auto& vars = sprites_[static_cast<std::size_t>(owner)].variables;
      for (std::size_t i = 0; i < vars.size(); ++i)
        if (vars[i].name == name) {
          st.global_var = false;
          st.var = static_cast<int>(i);
        }
    }
    if (st.var < 0) {
      st.global_var = true;
      for (std::size_t i = 0; i < globals_.size(); ++i)
        if (globals_[i].name == name) st.var = static_cast<int>(i);
    }
    if (st.var < 0) throw ValidationError(path + ".var: unknown variable '" + name + "'");
    st.a = value(op == "set" ? "value" : "by");
  } else if (op == "goto") {
    need_sprite();
    st.kind = StmtKind::GoTo;
    st.a = value("x");
    st.b = value("y");
  } else if (auto it = single.find(op); it != single.end()) {
    need_sprite();
    st.kind = it->second;
    st.a = value("value");
    if (st.kind == StmtKind::SetCostume) costume_changers_[static_cast<std::size_t>(owner)] = true;
  } else if (auto it2 = by.find(op); it2 != by.end()) {
    need_sprite();
    st.kind = it2->second;
    st.a = value("by");
  } else if (op == "next_costume") {
    need_sprite();
    st.kind = StmtKind::NextCostume;
    costume_changers_[static_cast<std::size_t>(owner)] = true;
  } else if (op == "show" || op == "hide") {
    need_sprite();
    st.kind = op == "show" ? StmtKind::Show : StmtKind::Hide;
  } else if (op == "bounce") {
    need_sprite();
    st.kind = StmtKind::Bounce;
  } else if (op == "stop") {
    st.kind = StmtKind::Stop;
    terminal_.insert(id);
  } else if (op == "if") {
    st.kind = StmtKind::If;
    if (!js.contains("cond")) throw ValidationError(path + ".cond: missing condition");
    st.a = compile_expr(js.at("cond"), owner, path + ".cond", true);
  } else {
    throw ValidationError(path + ".op: unknown statement '" + op + "'");
  }

  if (st.kind == StmtKind::If) {
    for (const char* arm : {"then", "else"}) {
      if (!js.contains(arm)) continue;
      const auto& body = js.at(arm);
      if (!body.is_array()) throw ValidationError(path + "." + arm + ": expected a list");
      auto& dst = std::string(arm) == "then" ? st.then_body : st.else_body;
      for (std::size_t i = 0; i < body.size(); ++i)
        dst.push_back(compile_statement(body[i], owner, id, std::string(arm) == "then", depth + 1,
                                        path + "." + arm + "[" + std::to_string(i) + "]"));
    }
  } else if (js.contains("then") || js.contains("else")) {
    throw ValidationError(path + ": only 'if' statements have branches");
  }
  statements_[static_cast<std::size_t>(id)] = std::move(st);
  return id;
}

inline GameSpec GameSpec::from_json(const nlohmann::json& j) {
  GameSpec g;
  if (!j.is_object()) throw ValidationError("game spec: expected an object");
  g.source_ = j;
  g.id_ = detail::json_string(j, "id", "game");

  if (j.contains("globals"))
    for (std::size_t i = 0; i < j.at("globals").size(); ++i)
      g.globals_.push_back(
          detail::parse_variable(j.at("globals")[i], "globals[" + std::to_string(i) + "]"));

  if (j.contains("backdrop"))
    for (std::size_t i = 0; i < j.at("backdrop").size(); ++i) {
      const auto& r = j.at("backdrop")[i];
      const std::string path = "backdrop[" + std::to_string(i) + "]";
      ColorRegion cr;
      cr.color = detail::json_string(r, "color", path);
      if (!r.contains("rect") || !r.at("rect").is_array() || r.at("rect").size() != 4)
        throw ValidationError(path + ".rect: expected [x0, y0, x1, y1]");
      cr.x0 = r.at("rect")[0].get<double>();
      cr.y0 = r.at("rect")[1].get<double>();
      cr.x1 = r.at("rect")[2].get<double>();
      cr.y1 = r.at("rect")[3].get<double>();
      if (cr.x0 > cr.x1 || cr.y0 > cr.y1) throw ValidationError(path + ".rect: inverted rectangle");
      g.regions_.push_back(cr);
      intern(g.colors_, cr.color);
    }

  if (!j.contains("sprites") || !j.at("sprites").is_array())
    throw ValidationError("sprites: expected a list");
  for (std::size_t i = 0; i < j.at("sprites").size(); ++i) {
    const auto& s = j.at("sprites")[i];
    const std::string path = "sprites[" + std::to_string(i) + "]";
    SpriteSpec sp;
    sp.name = detail::json_string(s, "name", path);
    if (sp.name == "stage" || sp.name == "edge")
      throw ValidationError(path + ".name: '" + sp.name + "' is reserved");
    if (g.sprite_index(sp.name) >= 0) throw ValidationError(path + ".name: duplicate sprite");
    sp.x = detail::json_number(s, "x", 0.0, path);
    sp.y = detail::json_number(s, "y", 0.0, path);
    if (std::abs(sp.x) > kCanvasHalfWidth) throw ValidationError(path + ".x: outside the canvas");
    if (std::abs(sp.y) > kCanvasHalfHeight) throw ValidationError(path + ".y: outside the canvas");
    sp.heading = detail::json_number(s, "heading", 90.0, path);
    sp.costumes = static_cast<int>(detail::json_number(s, "costumes", 1.0, path));
    if (sp.costumes < 1) throw ValidationError(path + ".costumes: must be at least 1");
    sp.size = detail::json_number(s, "size", 100.0, path);
    if (!(sp.size > 0)) throw ValidationError(path + ".size: must be positive");
    auto [hw, hh] = detail::json_pair(s, "extent", {10.0, 10.0}, path);
    if (!(hw > 0 && hh > 0)) throw ValidationError(path + ".extent: must be positive");
    sp.half_width = hw;
    sp.half_height = hh;
    const std::string rot = s.value("rotation", std::string("none"));
    if (rot == "all") sp.rotation = RotationStyle::AllAround;
    else if (rot == "lr") sp.rotation = RotationStyle::LeftRight;
    else if (rot == "none") sp.rotation = RotationStyle::DontRotate;
    else throw ValidationError(path + ".rotation: expected all|lr|none");
    sp.visible = s.value("visible", true);
    if (s.contains("vars"))
      for (std::size_t k = 0; k < s.at("vars").size(); ++k)
        sp.variables.push_back(detail::parse_variable(
            s.at("vars")[k], path + ".vars[" + std::to_string(k) + "]"));
    g.sprites_.push_back(std::move(sp));
  }
  g.touch_sprites_.assign(g.sprites_.size(), {});
  g.touch_colors_.assign(g.sprites_.size(), {});
  g.costume_changers_.assign(g.sprites_.size(), false);

  if (!j.contains("scripts") || !j.at("scripts").is_array())
    throw ValidationError("scripts: expected a list");
  const auto& scripts = j.at("scripts");

  // Statement ids: either all explicit (and then exactly 0..N-1) or all implicit.
  std::vector<std::optional<long long>> ids;
  for (const auto& sc : scripts) {
    ids.emplace_back(sc.is_object() && sc.contains("id") && sc.at("id").is_number_integer()
                         ? std::optional<long long>(sc.at("id").get<long long>())
                         : std::nullopt);
    if (sc.is_object() && sc.contains("do")) g.collect_ids(sc.at("do"), ids);
  }
  const auto n_explicit = std::count_if(ids.begin(), ids.end(), [](auto& v) { return v.has_value(); });
  if (n_explicit != 0 && static_cast<std::size_t>(n_explicit) != ids.size())
    throw ValidationError("statement ids: either every statement or none carries an 'id'");
  g.explicit_ids_.resize(ids.size());
  if (n_explicit) {
    std::set<long long> seen;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const long long v = *ids[i];
      if (!seen.insert(v).second) throw ValidationError("statement ids: duplicate id " + std::to_string(v));
      if (v < 0 || static_cast<std::size_t>(v) >= ids.size())
        throw ValidationError("statement ids: id " + std::to_string(v) + " outside 0.." +
                              std::to_string(ids.size() - 1));
      g.explicit_ids_[i] = v;
    }
  } else {
    for (std::size_t i = 0; i < ids.size(); ++i) g.explicit_ids_[i] = static_cast<long long>(i);
  }
  g.statements_.resize(ids.size());

  for (std::size_t i = 0; i < scripts.size(); ++i) {
    const auto& sc = scripts[i];
    const std::string path = "scripts[" + std::to_string(i) + "]";
    if (!sc.is_object()) throw ValidationError(path + ": expected an object");
    const std::string owner_name = detail::json_string(sc, "owner", path);
    const int owner = owner_name == "stage" ? -1 : g.sprite_index(owner_name);
    if (owner_name != "stage" && owner < 0)
      throw ValidationError(path + ".owner: unknown sprite '" + owner_name + "'");

    const StatementId hat_id = static_cast<StatementId>(g.explicit_ids_[g.next_slot_++]);
    Statement hat;
    hat.id = hat_id;
    hat.kind = StmtKind::Hat;
    hat.owner = owner;
    if (sc.contains("label")) hat.label = detail::json_string(sc, "label", path);
    const std::string when = detail::json_string(sc, "when", path);
    if (when == "start") hat.trigger = Trigger::Start;
    else if (when == "tick") hat.trigger = Trigger::Tick;
    else if (when == "mouse_move") {
      hat.trigger = Trigger::MouseMove;
      g.uses_mouse_move_ = true;
    } else if (when == "click") {
      hat.trigger = Trigger::Click;
      g.uses_click_ = true;
    } else if (when.rfind("key ", 0) == 0 && when.size() > 4) {
      hat.trigger = Trigger::Key;
      hat.key = intern(g.keys_, when.substr(4));
    } else {
      throw ValidationError(path + ".when: unknown trigger '" + when + "'");
    }
    g.statements_[static_cast<std::size_t>(hat_id)] = hat;

    std::vector<StatementId> body;
    if (sc.contains("do")) {
      if (!sc.at("do").is_array()) throw ValidationError(path + ".do: expected a list");
      for (std::size_t k = 0; k < sc.at("do").size(); ++k)
        body.push_back(g.compile_statement(sc.at("do")[k], owner, hat_id, true, 1,
                                           path + ".do[" + std::to_string(k) + "]"));
    }
    g.statements_[static_cast<std::size_t>(hat_id)].then_body = std::move(body);
    g.scripts_.push_back({owner, hat_id});
    g.entries_.push_back(hat_id);
  }
  std::sort(g.entries_.begin(), g.entries_.end());

  std::set<std::string> labels;
  for (const auto& s : g.statements_)
    if (!s.label.empty() && !labels.insert(s.label).second)
      throw ValidationError("statement labels: duplicate label '" + s.label + "'");

  if (j.contains("winning"))
    for (const auto& w : j.at("winning")) {
      if (w.is_number_integer()) {
        const auto id = w.get<StatementId>();
        if (!g.contains(id)) throw ValidationError("winning: unknown statement id " + std::to_string(id));
        g.winning_.insert(id);
      } else if (w.is_string()) {
        auto id = g.find_label(w.get<std::string>());
        if (!id) throw ValidationError("winning: unknown statement label '" + w.get<std::string>() + "'");
        g.winning_.insert(*id);
      } else {
        throw ValidationError("winning: expected statement labels or ids");
      }
    }

  g.color_cells_.assign(g.colors_.size(), {});
  for (int cx = 0; cx < kGridCols; ++cx)
    for (int cy = 0; cy < kGridRows; ++cy) {
      const double px = -kCanvasHalfWidth + kGridCell * (cx + 0.5);
      const double py = -kCanvasHalfHeight + kGridCell * (cy + 0.5);
      for (std::size_t c = 0; c < g.colors_.size(); ++c)
        for (const auto& r : g.regions_)
          if (r.color == g.colors_[c] && px >= r.x0 && px <= r.x1 && py >= r.y0 && py <= r.y1) {
            g.color_cells_[c].push_back({px, py});
            break;
          }
    }
  g.explicit_ids_.clear();
  return g;
}

}  // namespace traceneat
