#include <algorithm>

#include "qsm/mining.hpp"
#include "qsm/random.hpp"

namespace qsm {

NeighborhoodSet extract_neighborhood(const ParetoArchive& archive, std::size_t n_pareto,
                                     std::size_t n_history, std::uint64_t seed) {
  const std::size_t gens = archive.history.size();
  if (gens < 3) throw InsufficientHistory(gens);
  Rng rng(seed);
  NeighborhoodSet set;

  // Seeded subset without replacement, kept in source order.
  auto pick = [&rng](std::size_t available, std::size_t wanted) {
    std::vector<std::size_t> idx = rng.permutation(available);
    idx.resize(std::min(available, wanted));
    std::sort(idx.begin(), idx.end());
    return idx;
  };

  for (std::size_t i : pick(archive.pareto.size(), n_pareto)) {
    set.members.push_back(archive.pareto[i]);
    set.source.push_back(-1);
  }
  set.n_pareto = set.members.size();

  std::vector<std::pair<int, const Individual*>> pool;
  for (std::size_t g = gens - 3; g < gens; ++g)
    for (const auto& ind : archive.history[g]) pool.emplace_back(int(g), &ind);
  for (std::size_t i : pick(pool.size(), n_history)) {
    set.members.push_back(*pool[i].second);
    set.source.push_back(pool[i].first);
  }
  set.n_history = set.members.size() - set.n_pareto;
  return set;
}

}  // namespace qsm
