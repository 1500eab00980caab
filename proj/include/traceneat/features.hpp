#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "traceneat/core.hpp"
#include "traceneat/game.hpp"
#include "traceneat/game_spec.hpp"

namespace traceneat {

enum class Attribute : std::uint8_t {
  PosX,
  PosY,
  Heading,
  Costume,
  Size,
  Variable,
  DistanceToSprite,
  DistanceToColor,
  MouseX,
  MouseY,
};

struct FeatureDescriptor {
  int sprite = -1;  // -1 for globals and the mouse
  Attribute attribute = Attribute::PosX;
  int index = -1;   // variable / other sprite / color
  double lo = -1.0;
  double hi = 1.0;
  std::string name;
};

inline constexpr double kSizeRange = 200.0;
inline constexpr double kDistanceRange = 600.0;

/// Ordered feature layout for one game. The order is fixed by the game definition:
/// per sprite (declaration order) position, heading, costume, size, private
/// variables, touch distances; then global variables; then the mouse.
class FeatureSchema {
 public:
  static FeatureSchema of(const GameSpec& spec) {
    FeatureSchema fs;
    fs.game_id_ = spec.id();
    for (std::size_t i = 0; i < spec.sprites().size(); ++i) {
      const auto& sp = spec.sprites()[i];
      const int s = static_cast<int>(i);
      fs.add({s, Attribute::PosX, -1, -kCanvasHalfWidth, kCanvasHalfWidth, sp.name + ".x"});
      fs.add({s, Attribute::PosY, -1, -kCanvasHalfHeight, kCanvasHalfHeight, sp.name + ".y"});
      if (sp.rotation == RotationStyle::AllAround)
        fs.add({s, Attribute::Heading, -1, -180.0, 180.0, sp.name + ".heading"});
      if (spec.changes_costume(s) && sp.costumes > 1)
        fs.add({s, Attribute::Costume, -1, 0.0, static_cast<double>(sp.costumes - 1),
                sp.name + ".costume"});
      fs.add({s, Attribute::Size, -1, 0.0, kSizeRange, sp.name + ".size"});
      for (std::size_t v = 0; v < sp.variables.size(); ++v)
        fs.add({s, Attribute::Variable, static_cast<int>(v), sp.variables[v].lo, sp.variables[v].hi,
                sp.name + "." + sp.variables[v].name});
      for (int other : spec.touch_targets(s))
        fs.add({s, Attribute::DistanceToSprite, other, -kDistanceRange, kDistanceRange,
                sp.name + ".distance(" + spec.sprites()[static_cast<std::size_t>(other)].name + ")"});
      for (int color : spec.touch_colors(s))
        fs.add({s, Attribute::DistanceToColor, color, -kDistanceRange, kDistanceRange,
                sp.name + ".distance(" + spec.colors()[static_cast<std::size_t>(color)] + ")"});
    }
    for (std::size_t v = 0; v < spec.globals().size(); ++v)
      fs.add({-1, Attribute::Variable, static_cast<int>(v), spec.globals()[v].lo,
              spec.globals()[v].hi, spec.globals()[v].name});
    if (spec.uses_mouse()) {
      fs.add({-1, Attribute::MouseX, -1, -kCanvasHalfWidth, kCanvasHalfWidth, "mouse_x"});
      fs.add({-1, Attribute::MouseY, -1, -kCanvasHalfHeight, kCanvasHalfHeight, "mouse_y"});
    }
    return fs;
  }

  std::size_t size() const { return features_.size(); }
  const std::vector<FeatureDescriptor>& features() const { return features_; }
  const FeatureDescriptor& operator[](std::size_t i) const { return features_[i]; }
  const std::string& game_id() const { return game_id_; }
  bool contains(std::string_view name) const {
    for (const auto& f : features_)
      if (f.name == name) return true;
    return false;
  }
  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& f : features_) out.push_back(f.name);
    return out;
  }
  /// Stable fingerprint over game id, names and bounds.
  std::uint64_t fingerprint() const {
    std::string s = game_id_;
    for (const auto& f : features_) s += "|" + f.name + ":" + exact(f.lo) + ":" + exact(f.hi);
    return fnv1a(s);
  }

 private:
  void add(FeatureDescriptor d) {
    if (!(d.lo < d.hi)) throw ValidationError("feature " + d.name + ": empty bound range");
    features_.push_back(std::move(d));
  }

  std::string game_id_;
  std::vector<FeatureDescriptor> features_;
};

using FeatureVector = std::vector<double>;

/// Raw (unnormalized) value of one feature; distance to another sprite is
/// signed by the horizontal direction toward it.
inline double raw_feature(const GameInstance& game, const FeatureDescriptor& f) {
  const GameState& st = game.state();
  switch (f.attribute) {
    case Attribute::PosX: return st.sprites[static_cast<std::size_t>(f.sprite)].x;
    case Attribute::PosY: return st.sprites[static_cast<std::size_t>(f.sprite)].y;
    case Attribute::Heading: return st.sprites[static_cast<std::size_t>(f.sprite)].heading;
    case Attribute::Costume: return st.sprites[static_cast<std::size_t>(f.sprite)].costume;
    case Attribute::Size: return st.sprites[static_cast<std::size_t>(f.sprite)].size;
    case Attribute::Variable:
      return f.sprite < 0 ? st.globals[static_cast<std::size_t>(f.index)]
                          : st.sprites[static_cast<std::size_t>(f.sprite)]
                                .variables[static_cast<std::size_t>(f.index)];
    case Attribute::DistanceToSprite: {
      const auto& a = st.sprites[static_cast<std::size_t>(f.sprite)];
      const auto& b = st.sprites[static_cast<std::size_t>(f.index)];
      const double d = std::hypot(b.x - a.x, b.y - a.y);
      return b.x - a.x < 0 ? -d : d;
    }
    case Attribute::DistanceToColor: return game.color_distance(f.sprite, f.index);
    case Attribute::MouseX: return st.mouse_x;
    case Attribute::MouseY: return st.mouse_y;
  }
  return 0.0;
}

/// Normalized feature vector; every entry in [-1, 1]. Invisible sprites
/// contribute zeros.
inline FeatureVector extract(const GameInstance& game, const FeatureSchema& schema) {
  if (game.spec().id() != schema.game_id())
    throw UsageError("extract: schema belongs to game '" + schema.game_id() + "'");
  FeatureVector out;
  out.reserve(schema.size());
  const GameState& st = game.state();
  for (const auto& f : schema.features()) {
    if (f.sprite >= 0 && !st.sprites[static_cast<std::size_t>(f.sprite)].visible) {
      out.push_back(0.0);
      continue;
    }
    out.push_back(normalize(raw_feature(game, f), f.lo, f.hi));
  }
  return out;
}

}  // namespace traceneat
