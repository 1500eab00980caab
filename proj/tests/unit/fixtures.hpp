#pragma once

#include <memory>
#include <string>

#include "traceneat/game_spec.hpp"

namespace fixtures {

inline std::shared_ptr<const traceneat::GameSpec> make(const std::string& json) {
  return std::make_shared<const traceneat::GameSpec>(traceneat::GameSpec::parse(json));
}

// hat(0) -> set(1), if a (2) -> if b (3) -> if c (4) -> change (5)
inline constexpr const char* kNested = R"J({
  "id": "Nested",
  "globals": [{"name": "n", "init": 0, "range": [0, 1000]}],
  "sprites": [{"name": "s", "x": 0, "y": 0}],
  "scripts": [{"owner": "s", "when": "tick", "do": [
    {"op": "change", "var": "n", "by": 1},
    {"op": "if", "cond": "(> n 100)", "then": [
      {"op": "if", "cond": "(> n 200)", "then": [
        {"op": "if", "cond": "(> n 300)", "then": [
          {"op": "change", "var": "n", "by": 0, "label": "deep"}]}]}]}
  ]}]
})J";

// One key-driven sprite; win needs x > 100.
inline constexpr const char* kKeyGame = R"J({
  "id": "KeyGame",
  "sprites": [{"name": "p", "x": 0, "y": 0}],
  "scripts": [
    {"owner": "p", "when": "key right", "do": [{"op": "changex", "by": 10}]},
    {"owner": "p", "when": "key left", "do": [{"op": "changex", "by": -10}]},
    {"owner": "p", "when": "tick", "do": [
      {"op": "if", "cond": "(> (x) 100)", "label": "far", "then": [{"op": "stop", "label": "win"}]}]}
  ],
  "winning": ["win"]
})J";

// Covers "heads" on roughly half of all seeds, whatever the input.
inline constexpr const char* kCoin = R"J({
  "id": "Coin",
  "globals": [{"name": "c", "init": 0, "range": [0, 1]}],
  "sprites": [{"name": "s", "x": 0, "y": 0}],
  "scripts": [
    {"owner": "s", "when": "start", "do": [{"op": "set", "var": "c", "value": "(random 0 1)"}]},
    {"owner": "s", "when": "tick", "do": [
      {"op": "if", "cond": "(= c 1)", "then": [{"op": "change", "var": "c", "by": 0, "label": "heads"}]}]}
  ]
})J";

// Only an entry statement.
inline constexpr const char* kTrivial = R"J({
  "id": "Trivial",
  "sprites": [{"name": "s"}],
  "scripts": [{"owner": "s", "when": "start", "do": []}]
})J";

}  // namespace fixtures
