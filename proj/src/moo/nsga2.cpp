#include <algorithm>
#include <cmath>
#include <numeric>

#include "qsm/moo.hpp"
#include "qsm/parallel.hpp"
#include "qsm/random.hpp"

namespace qsm {

void Nsga2Settings::validate() const {
  if (pop_size < 4 || pop_size % 2 != 0)
    throw ConfigError("nsga2 population size must be even and at least 4");
  if (generations < 1) throw ConfigError("nsga2 needs at least one generation");
  if (!(crossover_prob >= 0.0 && crossover_prob <= 1.0))
    throw ConfigError("crossover probability must lie in [0, 1]");
  if (!(crossover_eta > 0.0) || !(mutation_eta > 0.0))
    throw ConfigError("distribution indices must be positive");
  if (mutation_prob > 1.0) throw ConfigError("mutation probability must not exceed 1");
}

namespace {

void evaluate_all(const Problem& problem, std::vector<Individual>& pop, unsigned threads) {
  parallel_for(
      pop.size(),
      [&](std::size_t i) {
        auto e = problem.evaluate(pop[i].x);
        if (!e.objectives.allFinite()) throw NumericalError("non-finite objective value");
        pop[i].objectives = std::move(e.objectives);
        pop[i].violations = std::move(e.violations);
        pop[i].violation = pop[i].violations.size() ? pop[i].violations.sum() : 0.0;
      },
      threads);
}

/// Sets rank and crowding of every member.
Fronts assign_rank_and_crowding(std::vector<Individual>& pop) {
  auto fronts = non_dominated_sort(std::span<const Individual>(pop));
  for (std::size_t r = 0; r < fronts.size(); ++r) {
    const auto& f = fronts[r];
    Eigen::MatrixXd obj(Eigen::Index(f.size()), pop[f.front()].objectives.size());
    for (std::size_t k = 0; k < f.size(); ++k) obj.row(Eigen::Index(k)) = pop[f[k]].objectives.transpose();
    const Eigen::VectorXd cd = crowding_distance(obj);
    for (std::size_t k = 0; k < f.size(); ++k) {
      pop[f[k]].rank = int(r);
      pop[f[k]].crowding = cd(Eigen::Index(k));
    }
  }
  return fronts;
}

const Individual& tournament(const std::vector<Individual>& pop, Rng& rng) {
  const Individual& a = pop[rng.index(pop.size())];
  const Individual& b = pop[rng.index(pop.size())];
  if (constraint_dominates(a, b)) return a;
  if (constraint_dominates(b, a)) return b;
  if (a.crowding > b.crowding) return a;
  if (b.crowding > a.crowding) return b;
  return rng.uniform() < 0.5 ? a : b;
}

double sbx_beta(double u, double beta, double eta) {
  const double alpha = 2.0 - std::pow(beta, -(eta + 1.0));
  return u <= 1.0 / alpha ? std::pow(u * alpha, 1.0 / (eta + 1.0))
                          : std::pow(1.0 / (2.0 - u * alpha), 1.0 / (eta + 1.0));
}

// Bounded simulated binary crossover.
void sbx(Eigen::VectorXd& c1, Eigen::VectorXd& c2, const Problem& problem, double eta, Rng& rng) {
  for (Eigen::Index i = 0; i < c1.size(); ++i) {
    if (rng.uniform() > 0.5) continue;
    if (std::abs(c1(i) - c2(i)) <= 1e-14) continue;
    const double lo = problem.lower(i), hi = problem.upper(i);
    const double y1 = std::min(c1(i), c2(i)), y2 = std::max(c1(i), c2(i));
    const double u = rng.uniform();
    const double bq1 = sbx_beta(u, 1.0 + 2.0 * (y1 - lo) / (y2 - y1), eta);
    const double bq2 = sbx_beta(u, 1.0 + 2.0 * (hi - y2) / (y2 - y1), eta);
    double v1 = std::clamp(0.5 * ((y1 + y2) - bq1 * (y2 - y1)), lo, hi);
    double v2 = std::clamp(0.5 * ((y1 + y2) + bq2 * (y2 - y1)), lo, hi);
    if (rng.uniform() < 0.5) std::swap(v1, v2);
    c1(i) = v1;
    c2(i) = v2;
  }
}

// Bounded polynomial mutation.
void mutate(Eigen::VectorXd& x, const Problem& problem, double eta, double prob, Rng& rng) {
  const double pow_inv = 1.0 / (eta + 1.0);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (rng.uniform() >= prob) continue;
    const double lo = problem.lower(i), hi = problem.upper(i), span = hi - lo;
    const double d1 = (x(i) - lo) / span, d2 = (hi - x(i)) / span;
    const double u = rng.uniform();
    double dq;
    if (u < 0.5) {
      const double v = 2.0 * u + (1.0 - 2.0 * u) * std::pow(1.0 - d1, eta + 1.0);
      dq = std::pow(v, pow_inv) - 1.0;
    } else {
      const double v = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * std::pow(1.0 - d2, eta + 1.0);
      dq = 1.0 - std::pow(v, pow_inv);
    }
    x(i) = std::clamp(x(i) + dq * span, lo, hi);
  }
}

}  // namespace

ParetoArchive nsga2(const Problem& problem, const Nsga2Settings& settings, std::uint64_t seed) {
  settings.validate();
  const Eigen::Index dim = problem.dim();
  if (dim < 1 || problem.upper.size() != dim || !problem.evaluate)
    throw ConfigError("malformed optimization problem");
  for (Eigen::Index i = 0; i < dim; ++i)
    if (!(problem.lower(i) < problem.upper(i))) throw InvalidBounds("optimization bounds need lower < upper");

  const double pm = settings.mutation_prob < 0.0 ? 1.0 / double(dim) : settings.mutation_prob;
  const std::size_t n = settings.pop_size;
  Rng rng(seed);

  std::vector<Individual> pop(n);
  for (auto& ind : pop) {
    ind.x.resize(dim);
    for (Eigen::Index i = 0; i < dim; ++i) ind.x(i) = rng.uniform(problem.lower(i), problem.upper(i));
  }
  evaluate_all(problem, pop, settings.threads);
  assign_rank_and_crowding(pop);

  ParetoArchive archive;
  archive.settings = settings;
  archive.seed = seed;
  archive.history.reserve(std::size_t(settings.generations) + 1);
  archive.history.push_back(pop);

  std::vector<Individual> offspring(n);
  for (int gen = 0; gen < settings.generations; ++gen) {
    // Variation draws happen serially so the random stream is fixed.
    for (std::size_t k = 0; k < n; k += 2) {
      Eigen::VectorXd c1 = tournament(pop, rng).x;
      Eigen::VectorXd c2 = tournament(pop, rng).x;
      if (rng.uniform() < settings.crossover_prob) sbx(c1, c2, problem, settings.crossover_eta, rng);
      mutate(c1, problem, settings.mutation_eta, pm, rng);
      mutate(c2, problem, settings.mutation_eta, pm, rng);
      offspring[k] = Individual{std::move(c1), {}, {}, 0.0, 0, 0.0};
      offspring[k + 1] = Individual{std::move(c2), {}, {}, 0.0, 0, 0.0};
    }
    evaluate_all(problem, offspring, settings.threads);

    std::vector<Individual> merged;
    merged.reserve(2 * n);
    merged.insert(merged.end(), pop.begin(), pop.end());
    merged.insert(merged.end(), offspring.begin(), offspring.end());
    const auto fronts = assign_rank_and_crowding(merged);

    std::vector<Individual> next;
    next.reserve(n);
    for (const auto& f : fronts) {
      if (next.size() + f.size() <= n) {
        for (std::size_t i : f) next.push_back(merged[i]);
        if (next.size() == n) break;
        continue;
      }
      std::vector<std::size_t> rest(f);
      std::stable_sort(rest.begin(), rest.end(), [&](std::size_t a, std::size_t b) {
        return merged[a].crowding > merged[b].crowding;
      });
      for (std::size_t i = 0; next.size() < n; ++i) next.push_back(merged[rest[i]]);
      break;
    }
    pop = std::move(next);
    assign_rank_and_crowding(pop);
    archive.history.push_back(pop);
  }

  const auto fronts = non_dominated_sort(std::span<const Individual>(pop));
  for (std::size_t i : fronts.front())
    if (pop[i].feasible()) archive.pareto.push_back(pop[i]);
  if (archive.pareto.empty()) throw NoFeasibleIndividual();
  return archive;
}

}  // namespace qsm
