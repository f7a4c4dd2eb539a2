#include <algorithm>
#include <cmath>

#include "qsm/errors.hpp"
#include "qsm/parallel.hpp"
#include "qsm/random.hpp"
#include "qsm/sampler.hpp"

namespace qsm {

DesignBounds DesignBounds::reference() {
  DesignBounds b;
  b.lower << 1.0, 0.18, 0.8, 0.3, 1.0, 0.2;
  b.upper << 1.0, 0.6, 1.3, 0.6, 1.4, 0.7;
  return b;
}

void DesignBounds::validate() const {
  if (lower(0) != 1.0 || upper(0) != 1.0) throw InvalidBounds("l1 bound must be [1, 1]");
  for (int k = 1; k < 6; ++k) {
    if (!(std::isfinite(lower(k)) && std::isfinite(upper(k)) && lower(k) < upper(k) &&
          lower(k) > 0.0))
      throw InvalidBounds(std::string("bound for ") + kLinkNames[k] + " must satisfy 0 < min < max");
  }
}

std::vector<UnitLinkage> lhs_sample(const SamplerConfig& cfg) {
  cfg.bounds.validate();
  if (cfg.n_samples == 0) throw InvalidBounds("n_samples must be positive");
  const std::size_t n = cfg.n_samples;
  Rng rng(cfg.seed);
  Eigen::MatrixXd unit(n, 6);
  unit.col(0).setZero();
  for (int k = 1; k < 6; ++k) {
    const auto perm = rng.permutation(n);
    for (std::size_t i = 0; i < n; ++i) unit(i, k) = (double(perm[i]) + rng.uniform()) / double(n);
  }
  const Eigen::Matrix<double, 6, 1> span = cfg.bounds.upper - cfg.bounds.lower;
  std::vector<UnitLinkage> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Eigen::Matrix<double, 6, 1> v = cfg.bounds.lower + span.cwiseProduct(unit.row(i).transpose());
    v(0) = 1.0;
    out.push_back(UnitLinkage::from_vector(v));
  }
  return out;
}

std::vector<UnitLinkage> filter_feasible(std::span<const UnitLinkage> designs, const PoseGrid& grid,
                                         unsigned threads) {
  std::vector<char> keep(designs.size(), 0);
  parallel_for(
      designs.size(),
      [&](std::size_t i) {
        keep[i] = is_crank_rocker(designs[i]) && is_feasible_over_range(designs[i], grid);
      },
      threads);
  std::vector<UnitLinkage> out;
  for (std::size_t i = 0; i < designs.size(); ++i)
    if (keep[i]) out.push_back(designs[i]);
  return out;
}

DesignDataset label_kinematics(std::span<const UnitLinkage> designs, const TaskRegion& task,
                               const SamplerConfig& cfg) {
  std::vector<LabeledDesign> rows(designs.size());
  std::vector<char> ok(designs.size(), 0);
  parallel_for(
      designs.size(),
      [&](std::size_t i) {
        try {
          const Workspace ws = compute_workspace(designs[i], cfg.grid, cfg.raster);
          const double s = compute_scale_factor(ws, task, cfg.safety, cfg.scale_search);
          LabeledDesign& r = rows[i];
          r.idx = i;
          r.unit = designs[i];
          r.scale = s;
          r.ws_area_m2 = ws.area() * s * s;
          r.eta = kinematic_performance(task.area(), r.ws_area_m2);
          ok[i] = 1;
        } catch (const Uncoverable&) {
        } catch (const EmptyWorkspace&) {
        }
      },
      cfg.threads);

  DesignDataset out;
  out.provenance.seed = cfg.seed;
  out.provenance.n_input = designs.size();
  for (std::size_t i = 0; i < designs.size(); ++i) {
    if (ok[i])
      out.rows.push_back(rows[i]);
    else
      ++out.provenance.dropped_uncoverable;
  }
  return out;
}

DesignDataset label_dynamics(DesignDataset dataset, const MassModel& mass, const PoseGrid& grid,
                             unsigned threads) {
  mass.validate();
  auto& rows = dataset.rows;
  std::vector<char> ok(rows.size(), 0);
  parallel_for(
      rows.size(),
      [&](std::size_t i) {
        try {
          const TorqueLabel t = required_torques(rows[i].lengths_abs(), mass, grid);
          rows[i].tau1 = t.tau1;
          rows[i].tau2 = t.tau2;
          ok[i] = std::isfinite(t.tau1) && std::isfinite(t.tau2) && t.tau1 > 0.0 && t.tau2 > 0.0;
        } catch (const NumericalError&) {
        }
      },
      threads);
  std::vector<LabeledDesign> kept;
  kept.reserve(rows.size());
  dataset.provenance.dropped_torque = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (ok[i])
      kept.push_back(rows[i]);
    else
      ++dataset.provenance.dropped_torque;
  }
  rows = std::move(kept);
  return dataset;
}

DesignDataset build_dataset(std::span<const UnitLinkage> designs, const TaskRegion& task,
                            const MassModel& mass, const SamplerConfig& cfg) {
  return label_dynamics(label_kinematics(designs, task, cfg), mass, cfg.grid, cfg.threads);
}

}  // namespace qsm
