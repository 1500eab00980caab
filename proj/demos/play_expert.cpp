// Plays every built-in game with its scripted expert and prints what one
// session covers. Usage: demo_play_expert [seed]

#include <cstdio>
#include <cstdlib>

#include "traceneat/builtin_games.hpp"
#include "traceneat/policies.hpp"

int main(int argc, char** argv) {
  using namespace traceneat;
  const std::uint64_t seed = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 1;
  std::printf("%-12s %8s %10s %9s %s\n", "game", "ticks", "snapshots", "coverage", "ended by");
  for (const auto& name : builtin_game_names()) {
    const auto spec = builtin_game(name);
    auto policy = expert_for(name);
    Recorder rec(spec, RecorderConfig{});
    const auto s = record_session(rec, *policy, seed, 1800);
    const double pct = 100.0 * static_cast<double>(s.covered.ids().size()) / static_cast<double>(spec->statement_count());
    std::printf("%-12s %8lld %10zu %8.1f%% %s\n", name.c_str(), static_cast<long long>(s.duration_ticks),
                s.snapshots.size(), pct, to_string(s.end_reason));
  }
  return 0;
}
