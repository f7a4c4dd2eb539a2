#include <algorithm>
#include <cmath>

#include <boost/random/sobol.hpp>

#include "qsm/mining.hpp"
#include "qsm/parallel.hpp"
#include "qsm/random.hpp"

namespace qsm {

namespace {

struct Estimates {
  Eigen::VectorXd s1, st;
};

// fa, fb: N; fab, fba: N x d. `rows` selects (and may repeat) samples.
Estimates estimate(const Eigen::VectorXd& fa, const Eigen::VectorXd& fb, const Eigen::MatrixXd& fab,
                   const Eigen::MatrixXd& fba, const std::vector<std::size_t>& rows) {
  const Eigen::Index d = fab.cols();
  const double n = double(rows.size());
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t r : rows) {
    sum += fa(Eigen::Index(r)) + fb(Eigen::Index(r));
    sum_sq += fa(Eigen::Index(r)) * fa(Eigen::Index(r)) + fb(Eigen::Index(r)) * fb(Eigen::Index(r));
  }
  const double mean = sum / (2.0 * n);
  const double var = sum_sq / (2.0 * n) - mean * mean;

  Estimates e{Eigen::VectorXd::Zero(d), Eigen::VectorXd::Zero(d)};
  if (!(var > 0.0)) return e;
  for (Eigen::Index i = 0; i < d; ++i) {
    double s1a = 0, s1b = 0, sta = 0, stb = 0;
    for (std::size_t rr : rows) {
      const auto r = Eigen::Index(rr);
      s1a += fb(r) * (fab(r, i) - fa(r));
      s1b += fa(r) * (fba(r, i) - fb(r));
      sta += (fa(r) - fab(r, i)) * (fa(r) - fab(r, i));
      stb += (fb(r) - fba(r, i)) * (fb(r) - fba(r, i));
    }
    e.s1(i) = 0.5 * (s1a + s1b) / n / var;
    e.st(i) = 0.5 * (sta + stb) / (2.0 * n) / var;
  }
  return e;
}

double percentile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * double(v.size() - 1);
  const auto lo = std::size_t(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - double(lo)) * (v[hi] - v[lo]);
}

}  // namespace

SobolReport sobol_indices(const BatchFunction& f, const Eigen::VectorXd& lower,
                          const Eigen::VectorXd& upper, std::size_t base_n, std::uint64_t seed,
                          int bootstrap) {
  const Eigen::Index d = lower.size();
  if (d < 1 || upper.size() != d) throw ConfigError("sobol bounds must be non-empty and matching");
  for (Eigen::Index i = 0; i < d; ++i)
    if (!(lower(i) < upper(i))) throw InvalidBounds("sobol bounds need lower < upper");
  if (base_n < 2 || (base_n & (base_n - 1)) != 0)
    throw ConfigError("sobol base sample count must be a power of two");
  if (bootstrap < 0) throw ConfigError("bootstrap count must be non-negative");

  const auto n = Eigen::Index(base_n);
  // Sobol points in 2d dimensions, skipping the all-zero first point, with a
  // seeded random shift modulo 1 so that different seeds give different designs.
  boost::random::sobol qrng(unsigned(2 * d));
  qrng.discard(std::uintmax_t(2 * d));
  Rng rng(seed);
  Eigen::VectorXd shift(2 * d);
  for (Eigen::Index k = 0; k < 2 * d; ++k) shift(k) = rng.uniform();
  Eigen::MatrixXd a(n, d), b(n, d);
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index k = 0; k < 2 * d; ++k) {
      double u = double(qrng()) * 0x1.0p-64 + shift(k);
      if (u >= 1.0) u -= 1.0;
      const Eigen::Index var = k % d;
      const double x = lower(var) + (upper(var) - lower(var)) * u;
      (k < d ? a : b)(r, var) = x;
    }
  }

  // Stack A, B, AB_1..AB_d, BA_1..BA_d and evaluate in one batch.
  Eigen::MatrixXd design((2 * d + 2) * n, d);
  design.middleRows(0, n) = a;
  design.middleRows(n, n) = b;
  for (Eigen::Index i = 0; i < d; ++i) {
    Eigen::MatrixXd ab = a, ba = b;
    ab.col(i) = b.col(i);
    ba.col(i) = a.col(i);
    design.middleRows((2 + i) * n, n) = ab;
    design.middleRows((2 + d + i) * n, n) = ba;
  }
  const Eigen::MatrixXd out = f(design);
  if (out.rows() != design.rows()) throw NumericalError("model returned the wrong number of rows");
  if (!out.allFinite()) throw NumericalError("model returned non-finite outputs");

  SobolReport report;
  report.base_n = base_n;
  report.evaluations = std::size_t(design.rows());
  report.bootstrap = bootstrap;

  std::vector<std::size_t> all(base_n);
  for (std::size_t r = 0; r < base_n; ++r) all[r] = r;
  // One set of resampled row indices shared by every output.
  std::vector<std::vector<std::size_t>> resamples(static_cast<std::size_t>(bootstrap),
                                                 std::vector<std::size_t>(base_n));
  for (auto& rs : resamples)
    for (auto& r : rs) r = rng.index(base_n);

  for (Eigen::Index o = 0; o < out.cols(); ++o) {
    const Eigen::VectorXd fa = out.col(o).segment(0, n);
    const Eigen::VectorXd fb = out.col(o).segment(n, n);
    Eigen::MatrixXd fab(n, d), fba(n, d);
    for (Eigen::Index i = 0; i < d; ++i) {
      fab.col(i) = out.col(o).segment((2 + i) * n, n);
      fba.col(i) = out.col(o).segment((2 + d + i) * n, n);
    }
    const Estimates point = estimate(fa, fb, fab, fba, all);
    SobolIndices idx;
    idx.s1 = point.s1;
    idx.st = point.st;
    idx.s1_lo = idx.s1_hi = point.s1;
    idx.st_lo = idx.st_hi = point.st;
    if (bootstrap > 0) {
      std::vector<std::vector<double>> bs1(static_cast<std::size_t>(d)), bst(static_cast<std::size_t>(d));
      for (const auto& rs : resamples) {
        const Estimates e = estimate(fa, fb, fab, fba, rs);
        for (Eigen::Index i = 0; i < d; ++i) {
          bs1[std::size_t(i)].push_back(e.s1(i));
          bst[std::size_t(i)].push_back(e.st(i));
        }
      }
      for (Eigen::Index i = 0; i < d; ++i) {
        idx.s1_lo(i) = percentile(bs1[std::size_t(i)], 0.025);
        idx.s1_hi(i) = percentile(bs1[std::size_t(i)], 0.975);
        idx.st_lo(i) = percentile(bst[std::size_t(i)], 0.025);
        idx.st_hi(i) = percentile(bst[std::size_t(i)], 0.975);
      }
    }
    for (Eigen::Index i = 0; i < d; ++i) {
      idx.s1_negative.push_back(idx.s1(i) < 0.0);
      idx.st_negative.push_back(idx.st(i) < 0.0);
    }
    report.outputs.push_back(std::move(idx));
  }
  return report;
}

SobolReport sobol_indices(const SurrogateModel& model, const Eigen::VectorXd& lower,
                          const Eigen::VectorXd& upper, std::size_t base_n, std::uint64_t seed,
                          int bootstrap, unsigned threads) {
  const BatchFunction f = [&model, threads](const Eigen::MatrixXd& x) {
    Eigen::MatrixXd y(x.rows(), model.output_dim());
    constexpr Eigen::Index block = 1024;
    const auto blocks = std::size_t((x.rows() + block - 1) / block);
    parallel_for(
        blocks,
        [&](std::size_t k) {
          const Eigen::Index start = Eigen::Index(k) * block;
          const Eigen::Index len = std::min(block, x.rows() - start);
          y.middleRows(start, len) = model.predict(Eigen::MatrixXd(x.middleRows(start, len)));
        },
        threads);
    return y;
  };
  return sobol_indices(f, lower, upper, base_n, seed, bootstrap);
}

}  // namespace qsm
