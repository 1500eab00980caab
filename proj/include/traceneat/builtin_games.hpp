#pragma once

#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "traceneat/game_spec.hpp"

namespace traceneat {

namespace games {

// Mouse-controlled paddle keeps a ball in play; five returns win.
inline constexpr std::string_view kPaddleBall = R"json({
  "id": "PaddleBall",
  "globals": [{"name": "score", "init": 0, "range": [0, 10]}],
  "backdrop": [{"color": "brown", "rect": [-240, -180, 240, -172]}],
  "sprites": [
    {"name": "paddle", "x": 0, "y": -150, "extent": [40, 6]},
    {"name": "ball", "x": 0, "y": 100, "heading": 180, "extent": [8, 8], "rotation": "all",
     "vars": [{"name": "speed", "init": 10, "range": [0, 20]}]}
  ],
  "scripts": [
    {"owner": "paddle", "when": "mouse_move", "do": [
      {"op": "setx", "value": "(mouse_x)"},
      {"op": "if", "cond": "(> (x) 200)", "then": [{"op": "setx", "value": 200}]},
      {"op": "if", "cond": "(< (x) -200)", "then": [{"op": "setx", "value": -200}]}
    ]},
    {"owner": "ball", "when": "start", "do": [
      {"op": "set", "var": "score", "value": 0},
      {"op": "goto", "x": "(random -180 180)", "y": 120},
      {"op": "point", "value": "(+ 135 (* 90 (random 0 1)))"}
    ]},
    {"owner": "ball", "when": "tick", "do": [
      {"op": "move", "by": "speed"},
      {"op": "if", "cond": "(> (x) 230)", "then": [
        {"op": "point", "value": "(neg (heading))"},
        {"op": "setx", "value": 229}]},
      {"op": "if", "cond": "(< (x) -230)", "then": [
        {"op": "point", "value": "(neg (heading))"},
        {"op": "setx", "value": -229}]},
      {"op": "if", "cond": "(> (y) 170)", "then": [
        {"op": "point", "value": "(- 180 (heading))"},
        {"op": "sety", "value": 169}]},
      {"op": "if", "cond": "(and (touching paddle) (> (abs (heading)) 90))", "label": "hit", "then": [
        {"op": "point", "value": "(+ (- 180 (heading)) (* 0.5 (- (x) (x paddle))))"},
        {"op": "point", "value": "(max -65 (min 65 (heading)))"},
        {"op": "change", "var": "score", "by": 1},
        {"op": "if", "cond": "(>= score 3)", "then": [{"op": "set", "var": "speed", "value": 13}]},
        {"op": "if", "cond": "(>= score 5)", "then": [{"op": "stop", "label": "win"}]}
      ]},
      {"op": "if", "cond": "(touching_color brown)", "then": [{"op": "stop", "label": "lose"}]}
    ]}
  ],
  "winning": ["win"]
})json";

// Left/right keys move a bowl under falling fruit; six catches win, three
// misses lose.
inline constexpr std::string_view kFruitCatch = R"json({
  "id": "FruitCatch",
  "globals": [
    {"name": "score", "init": 0, "range": [0, 10]},
    {"name": "misses", "init": 0, "range": [0, 5]}
  ],
  "sprites": [
    {"name": "bowl", "x": 0, "y": -150, "extent": [30, 8]},
    {"name": "fruit", "x": 0, "y": 170, "extent": [10, 10], "costumes": 3,
     "vars": [{"name": "fall", "init": 4, "range": [0, 10]}]}
  ],
  "scripts": [
    {"owner": "bowl", "when": "key left", "do": [
      {"op": "changex", "by": -9},
      {"op": "if", "cond": "(< (x) -215)", "then": [{"op": "setx", "value": -215}]}
    ]},
    {"owner": "bowl", "when": "key right", "do": [
      {"op": "changex", "by": 9},
      {"op": "if", "cond": "(> (x) 215)", "then": [{"op": "setx", "value": 215}]}
    ]},
    {"owner": "fruit", "when": "start", "do": [
      {"op": "goto", "x": "(random -200 200)", "y": 170},
      {"op": "costume", "value": "(random 0 2)"}
    ]},
    {"owner": "fruit", "when": "tick", "do": [
      {"op": "changey", "by": "(neg fall)"},
      {"op": "if", "cond": "(touching bowl)", "label": "catch", "then": [
        {"op": "change", "var": "score", "by": 1},
        {"op": "costume", "value": "(random 0 2)"},
        {"op": "goto", "x": "(random -200 200)", "y": 170},
        {"op": "if", "cond": "(>= score 3)", "then": [{"op": "set", "var": "fall", "value": 6}]},
        {"op": "if", "cond": "(>= score 6)", "then": [{"op": "stop", "label": "win"}]}
      ]},
      {"op": "if", "cond": "(< (y) -165)", "label": "miss", "then": [
        {"op": "change", "var": "misses", "by": 1},
        {"op": "goto", "x": "(random -200 200)", "y": 170},
        {"op": "if", "cond": "(>= misses 3)", "then": [{"op": "stop", "label": "lose"}]}
      ]}
    ]}
  ],
  "winning": ["win"]
})json";

// One key lifts the bird; passing four pipes wins.
inline constexpr std::string_view kFlapBird = R"json({
  "id": "FlapBird",
  "globals": [{"name": "score", "init": 0, "range": [0, 10]}],
  "backdrop": [{"color": "green", "rect": [-240, -180, 240, -160]}],
  "sprites": [
    {"name": "bird", "x": -120, "y": 0, "extent": [10, 8],
     "vars": [{"name": "vy", "init": 0, "range": [-15, 15]}]},
    {"name": "pipe", "x": 240, "y": 0, "extent": [20, 180]}
  ],
  "scripts": [
    {"owner": "bird", "when": "key space", "do": [
      {"op": "set", "var": "vy", "value": 7}
    ]},
    {"owner": "bird", "when": "tick", "do": [
      {"op": "change", "var": "vy", "by": -1},
      {"op": "if", "cond": "(< vy -12)", "then": [{"op": "set", "var": "vy", "value": -12}]},
      {"op": "changey", "by": "vy"},
      {"op": "if", "cond": "(touching_color green)", "then": [{"op": "stop", "label": "lose_ground"}]},
      {"op": "if", "cond": "(> (y) 170)", "then": [{"op": "stop", "label": "lose_ceiling"}]},
      {"op": "if", "cond": "(and (< (abs (- (x) (x pipe))) 30) (> (abs (- (y) (y pipe))) 45))",
       "then": [{"op": "stop", "label": "crash"}]}
    ]},
    {"owner": "pipe", "when": "start", "do": [
      {"op": "sety", "value": "(random -60 60)"}
    ]},
    {"owner": "pipe", "when": "tick", "do": [
      {"op": "changex", "by": -6},
      {"op": "if", "cond": "(< (x) -230)", "label": "passed", "then": [
        {"op": "setx", "value": 230},
        {"op": "sety", "value": "(random -80 80)"},
        {"op": "change", "var": "score", "by": 1},
        {"op": "if", "cond": "(>= score 4)", "then": [{"op": "stop", "label": "win"}]}
      ]}
    ]}
  ],
  "winning": ["win"]
})json";

// Four arrow keys steer a head on a 20-unit grid toward apples; four apples
// win, the edge loses.
inline constexpr std::string_view kSnakeGrid = R"json({
  "id": "SnakeGrid",
  "globals": [
    {"name": "score", "init": 0, "range": [0, 10]},
    {"name": "dir", "init": 0, "range": [0, 3]},
    {"name": "clock", "init": 0, "range": [0, 4]}
  ],
  "sprites": [
    {"name": "head", "x": 0, "y": 0, "extent": [9, 9]},
    {"name": "apple", "x": 100, "y": 60, "extent": [9, 9]}
  ],
  "scripts": [
    {"owner": "stage", "when": "key up", "do": [
      {"op": "if", "cond": "(!= dir 3)", "then": [{"op": "set", "var": "dir", "value": 1}]}]},
    {"owner": "stage", "when": "key down", "do": [
      {"op": "if", "cond": "(!= dir 1)", "then": [{"op": "set", "var": "dir", "value": 3}]}]},
    {"owner": "stage", "when": "key left", "do": [
      {"op": "if", "cond": "(!= dir 0)", "then": [{"op": "set", "var": "dir", "value": 2}]}]},
    {"owner": "stage", "when": "key right", "do": [
      {"op": "if", "cond": "(!= dir 2)", "then": [{"op": "set", "var": "dir", "value": 0}]}]},
    {"owner": "head", "when": "tick", "do": [
      {"op": "change", "var": "clock", "by": 1},
      {"op": "if", "cond": "(>= clock 4)", "then": [
        {"op": "set", "var": "clock", "value": 0},
        {"op": "if", "cond": "(= dir 0)", "then": [{"op": "changex", "by": 20}]},
        {"op": "if", "cond": "(= dir 1)", "then": [{"op": "changey", "by": 20}]},
        {"op": "if", "cond": "(= dir 2)", "then": [{"op": "changex", "by": -20}]},
        {"op": "if", "cond": "(= dir 3)", "then": [{"op": "changey", "by": -20}]},
        {"op": "if", "cond": "(touching edge)", "then": [{"op": "stop", "label": "lose"}]}
      ]},
      {"op": "if", "cond": "(touching apple)", "label": "eat", "then": [
        {"op": "change", "var": "score", "by": 1},
        {"op": "if", "cond": "(>= score 4)", "then": [{"op": "stop", "label": "win"}]}
      ]}
    ]},
    {"owner": "apple", "when": "start", "do": [
      {"op": "goto", "x": "(* 20 (random -10 10))", "y": "(* 20 (random -7 7))"}
    ]},
    {"owner": "apple", "when": "tick", "do": [
      {"op": "if", "cond": "(touching head)", "then": [
        {"op": "goto", "x": "(* 20 (random -10 10))", "y": "(* 20 (random -7 7))"}]}
    ]}
  ],
  "winning": ["win"]
})json";

// The player glides toward the mouse collecting dots while an enemy chases;
// space dashes halfway to the mouse with a cooldown.
inline constexpr std::string_view kDotChase = R"json({
  "id": "DotChase",
  "globals": [
    {"name": "score", "init": 0, "range": [0, 10]},
    {"name": "boost", "init": 0, "range": [0, 30]}
  ],
  "sprites": [
    {"name": "player", "x": 0, "y": 0, "extent": [10, 10],
     "vars": [{"name": "tx", "init": 0, "range": [-240, 240]},
              {"name": "ty", "init": 0, "range": [-180, 180]}]},
    {"name": "dot", "x": 100, "y": 100, "extent": [6, 6]},
    {"name": "enemy", "x": -200, "y": 150, "extent": [10, 10]}
  ],
  "scripts": [
    {"owner": "player", "when": "mouse_move", "do": [
      {"op": "set", "var": "tx", "value": "(mouse_x)"},
      {"op": "set", "var": "ty", "value": "(mouse_y)"}
    ]},
    {"owner": "player", "when": "key space", "do": [
      {"op": "if", "cond": "(= boost 0)", "label": "dash", "then": [
        {"op": "set", "var": "boost", "value": 30},
        {"op": "changex", "by": "(/ (- tx (x)) 2)"},
        {"op": "changey", "by": "(/ (- ty (y)) 2)"}
      ]}
    ]},
    {"owner": "player", "when": "tick", "do": [
      {"op": "changex", "by": "(/ (- tx (x)) 10)"},
      {"op": "changey", "by": "(/ (- ty (y)) 10)"},
      {"op": "if", "cond": "(> boost 0)", "then": [{"op": "change", "var": "boost", "by": -1}]},
      {"op": "if", "cond": "(touching dot)", "label": "collect", "then": [
        {"op": "change", "var": "score", "by": 1},
        {"op": "if", "cond": "(>= score 6)", "then": [{"op": "stop", "label": "win"}]}
      ]},
      {"op": "if", "cond": "(touching enemy)", "then": [{"op": "stop", "label": "lose"}]}
    ]},
    {"owner": "dot", "when": "start", "do": [
      {"op": "goto", "x": "(random -220 220)", "y": "(random -160 160)"}
    ]},
    {"owner": "dot", "when": "tick", "do": [
      {"op": "if", "cond": "(touching player)", "then": [
        {"op": "goto", "x": "(random -220 220)", "y": "(random -160 160)"}]}
    ]},
    {"owner": "enemy", "when": "tick", "do": [
      {"op": "changex", "by": "(min 2.5 (max -2.5 (- (x player) (x))))"},
      {"op": "changey", "by": "(min 2.5 (max -2.5 (- (y player) (y))))"}
    ]}
  ],
  "winning": ["win"]
})json";

}  // namespace games

inline const std::vector<std::string>& builtin_game_names() {
  static const std::vector<std::string> names = {"PaddleBall", "FlapBird", "FruitCatch", "SnakeGrid",
                                                 "DotChase"};
  return names;
}

inline std::string_view builtin_game_source(std::string_view name) {
  if (name == "PaddleBall") return games::kPaddleBall;
  if (name == "FlapBird") return games::kFlapBird;
  if (name == "FruitCatch") return games::kFruitCatch;
  if (name == "SnakeGrid") return games::kSnakeGrid;
  if (name == "DotChase") return games::kDotChase;
  throw ValidationError("unknown built-in game '" + std::string(name) + "'");
}

/// Parsed built-in game; each is parsed once and shared.
inline std::shared_ptr<const GameSpec> builtin_game(std::string_view name) {
  static const auto cache = [] {
    std::vector<std::shared_ptr<const GameSpec>> v;
    for (const auto& n : builtin_game_names())
      v.push_back(std::make_shared<const GameSpec>(GameSpec::parse(builtin_game_source(n))));
    return v;
  }();
  for (std::size_t i = 0; i < builtin_game_names().size(); ++i)
    if (builtin_game_names()[i] == name) return cache[i];
  throw ValidationError("unknown built-in game '" + std::string(name) + "'");
}

/// A built-in game by name, otherwise a spec file at that path.
inline std::shared_ptr<const GameSpec> resolve_game(const std::string& name_or_path) {
  for (const auto& n : builtin_game_names())
    if (n == name_or_path) return builtin_game(n);
  std::ifstream in(name_or_path);
  if (!in) throw ValidationError("'" + name_or_path + "' is neither a built-in game nor a readable file");
  std::stringstream ss;
  ss << in.rdbuf();
  return std::make_shared<const GameSpec>(GameSpec::parse(ss.str()));
}

}  // namespace traceneat
