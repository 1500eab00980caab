// Records a minute of scripted expert play on PaddleBall, then searches for a
// test suite with and without gradient descent on that data.
// Usage: demo_search_paddleball [seed]

#include <cstdio>
#include <cstdlib>

#include "traceneat/builtin_games.hpp"
#include "traceneat/neat.hpp"
#include "traceneat/policies.hpp"

int main(int argc, char** argv) {
  using namespace traceneat;
  const std::uint64_t seed = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 1;
  const auto spec = builtin_game("PaddleBall");
  auto expert = expert_for("PaddleBall");
  const auto data = synthesize_dataset(spec, *expert, RecorderConfig{}, 1800, 7);
  const auto ds = stats(data);
  std::printf("dataset: %zu sessions, %zu snapshots\n", ds.sessions, ds.snapshots);

  for (double p : {1.0, 0.0}) {
    SearchConfig cfg;
    cfg.seed = seed;
    cfg.p_gradient_descent = p;
    const auto r = search(spec, &data, cfg);
    const auto& st = r.stats;
    std::printf("\np=%.1f: %.1f%% of %zu statements in %d generations, %lld ticks, %zu suite entries\n", p,
                st.coverage_percent(), st.statement_count, st.generations, static_cast<long long>(st.ticks),
                r.suite.entries.size());
    std::printf("  mutations: %zu sgd, %zu perturb, %zu add-node, %zu add-connection\n", st.mutations.sgd,
                st.mutations.perturb, st.mutations.add_node, st.mutations.add_connection);
    for (const auto& t : st.targets)
      std::printf("  target %3d %-8s after %d generations\n", t.target, t.covered ? "covered" : "open", t.generations);
  }
  return 0;
}
