#include <algorithm>

#include "qsm/moo.hpp"

namespace qsm {

namespace {

double hv_recursive(std::vector<Eigen::VectorXd> pts, const Eigen::VectorXd& ref, Eigen::Index dims) {
  if (pts.empty()) return 0.0;
  if (dims == 1) {
    double best = ref(0);
    for (const auto& p : pts) best = std::min(best, p(0));
    return ref(0) - best;
  }
  const Eigen::Index last = dims - 1;
  std::sort(pts.begin(), pts.end(),
            [last](const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return a(last) < b(last); });
  // Slice along the last objective: between consecutive values the dominated
  // cross-section is the (dims-1)-volume of all points seen so far.
  double volume = 0.0;
  std::vector<Eigen::VectorXd> active;
  for (std::size_t k = 0; k < pts.size(); ++k) {
    active.push_back(pts[k].head(last));
    const double top = k + 1 < pts.size() ? pts[k + 1](last) : ref(last);
    const double height = top - pts[k](last);
    if (height > 0.0) volume += height * hv_recursive(active, ref.head(last), last);
  }
  return volume;
}

}  // namespace

double hypervolume(const Eigen::MatrixXd& points, const Eigen::VectorXd& reference) {
  std::vector<Eigen::VectorXd> pts;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    const Eigen::VectorXd p = points.row(i).transpose();
    if ((p.array() < reference.array()).all()) pts.push_back(p);
  }
  // Dominated points add nothing; dropping them keeps the slicing cheap.
  if (pts.size() > 1) {
    Eigen::MatrixXd m(Eigen::Index(pts.size()), reference.size());
    for (std::size_t i = 0; i < pts.size(); ++i) m.row(Eigen::Index(i)) = pts[i].transpose();
    const auto fronts = non_dominated_sort(m);
    std::vector<Eigen::VectorXd> first;
    for (std::size_t i : fronts.front()) first.push_back(pts[i]);
    pts = std::move(first);
  }
  return hv_recursive(std::move(pts), reference, reference.size());
}

Eigen::MatrixXd feasible_front(std::span<const Individual> pop) {
  std::vector<const Individual*> feas;
  for (const auto& ind : pop)
    if (ind.feasible()) feas.push_back(&ind);
  if (feas.empty()) return {};
  Eigen::MatrixXd m(Eigen::Index(feas.size()), feas.front()->objectives.size());
  for (std::size_t i = 0; i < feas.size(); ++i) m.row(Eigen::Index(i)) = feas[i]->objectives.transpose();
  const auto fronts = non_dominated_sort(m);
  Eigen::MatrixXd out(Eigen::Index(fronts.front().size()), m.cols());
  for (std::size_t i = 0; i < fronts.front().size(); ++i)
    out.row(Eigen::Index(i)) = m.row(Eigen::Index(fronts.front()[i]));
  return out;
}

}  // namespace qsm
