#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "traceneat/builtin_games.hpp"
#include "traceneat/features.hpp"

using namespace traceneat;

TEST(FeatureSchema, MouseGameHasMouseFeatures) {
  const auto fs = FeatureSchema::of(*builtin_game("PaddleBall"));
  EXPECT_TRUE(fs.contains("mouse_x"));
  EXPECT_TRUE(fs.contains("mouse_y"));
  EXPECT_TRUE(fs.contains("ball.distance(paddle)"));
  EXPECT_TRUE(fs.contains("ball.distance(brown)"));
}

TEST(FeatureSchema, KeyGameHasNoMouseFeatures) {
  const auto fs = FeatureSchema::of(*builtin_game("FlapBird"));
  EXPECT_FALSE(fs.contains("mouse_x"));
  EXPECT_FALSE(fs.contains("mouse_y"));
}

TEST(FeatureSchema, FixedCostumeHasNoCostumeFeature) {
  const auto fs = FeatureSchema::of(*builtin_game("FruitCatch"));
  EXPECT_TRUE(fs.contains("fruit.costume"));
  EXPECT_FALSE(fs.contains("bowl.costume"));
}

TEST(FeatureSchema, OrderIsStableAndFingerprintDiffersAcrossGames) {
  const auto a = FeatureSchema::of(*builtin_game("PaddleBall"));
  const auto b = FeatureSchema::of(*builtin_game("PaddleBall"));
  EXPECT_EQ(a.names(), b.names());
  EXPECT_EQ(a.fingerprint(), b.fingerprint());
  EXPECT_NE(a.fingerprint(), FeatureSchema::of(*builtin_game("FruitCatch")).fingerprint());
}

TEST(Extract, ValuesNormalizedToUnitRange) {
  const auto spec = builtin_game("DotChase");
  const auto fs = FeatureSchema::of(*spec);
  GameInstance g(spec, 4);
  Rng r(1);
  for (int t = 0; t < 300 && !g.is_game_over(); ++t) {
    g.step({InputEvent::mouse_move(r.uniform(-240, 240), r.uniform(-180, 180), t)});
    const auto x = extract(g, fs);
    ASSERT_EQ(x.size(), fs.size());
    for (double v : x) {
      ASSERT_GE(v, -1.0);
      ASSERT_LE(v, 1.0);
    }
  }
}

TEST(Extract, PositionFormula) {
  const char* json = R"J({"id": "Pos", "sprites": [{"name": "s", "x": 240, "y": -90}],
    "scripts": [{"owner": "s", "when": "tick", "do": [{"op": "changex", "by": 0}]}]})J";
  const auto spec = fixtures::make(json);
  const auto fs = FeatureSchema::of(*spec);
  GameInstance g(spec, 0);
  const auto x = extract(g, fs);
  const auto names = fs.names();
  const auto at = [&](const std::string& n) {
    return x[static_cast<std::size_t>(std::find(names.begin(), names.end(), n) - names.begin())];
  };
  EXPECT_DOUBLE_EQ(at("s.x"), 1.0);
  EXPECT_DOUBLE_EQ(at("s.y"), -0.5);
}

TEST(Extract, VariableAboveRangeIsClamped) {
  const char* json = R"J({"id": "Var", "globals": [{"name": "v", "init": 0, "range": [0, 10]}],
    "sprites": [{"name": "s"}],
    "scripts": [{"owner": "s", "when": "tick", "do": [{"op": "change", "var": "v", "by": 7}]}]})J";
  const auto spec = fixtures::make(json);
  const auto fs = FeatureSchema::of(*spec);
  GameInstance g(spec, 0);
  g.step();
  g.step();  // v = 14
  const auto names = fs.names();
  const auto i = static_cast<std::size_t>(std::find(names.begin(), names.end(), "v") - names.begin());
  ASSERT_LT(i, names.size());
  EXPECT_DOUBLE_EQ(extract(g, fs)[i], 1.0);
}

TEST(Extract, SchemaOfOtherGameRejected) {
  GameInstance g(builtin_game("PaddleBall"), 0);
  EXPECT_THROW(extract(g, FeatureSchema::of(*builtin_game("FruitCatch"))), UsageError);
}
