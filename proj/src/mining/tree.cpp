#include <algorithm>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "qsm/mining.hpp"
#include "qsm/sampler.hpp"

namespace qsm {

namespace {

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

double mean_of(const Eigen::VectorXd& y, const std::vector<std::size_t>& rows) {
  double s = 0.0;
  for (std::size_t r : rows) s += y(Eigen::Index(r));
  return s / double(rows.size());
}

double mse_of(const Eigen::VectorXd& y, const std::vector<std::size_t>& rows, double mean) {
  double s = 0.0;
  for (std::size_t r : rows) s += (y(Eigen::Index(r)) - mean) * (y(Eigen::Index(r)) - mean);
  return s / double(rows.size());
}

Split best_split(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const std::vector<std::size_t>& rows,
                 std::size_t min_leaf) {
  const std::size_t n = rows.size();
  Split best;
  if (n < 2 * min_leaf) return best;
  double total = 0.0, total_sq = 0.0;
  for (std::size_t r : rows) {
    total += y(Eigen::Index(r));
    total_sq += y(Eigen::Index(r)) * y(Eigen::Index(r));
  }
  const double sse_parent = total_sq - total * total / double(n);
  // Relative floor so float noise on a constant target never triggers a split.
  const double min_gain = 1e-12 * std::max(std::abs(sse_parent), 1e-300);

  std::vector<std::size_t> order(rows);
  for (Eigen::Index f = 0; f < x.cols(); ++f) {
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return x(Eigen::Index(a), f) < x(Eigen::Index(b), f); });
    double left = 0.0, left_sq = 0.0;
    for (std::size_t k = 0; k + 1 < n; ++k) {
      const double v = y(Eigen::Index(order[k]));
      left += v;
      left_sq += v * v;
      const double xa = x(Eigen::Index(order[k]), f), xb = x(Eigen::Index(order[k + 1]), f);
      if (!(xa < xb)) continue;
      const std::size_t nl = k + 1, nr = n - nl;
      if (nl < min_leaf || nr < min_leaf) continue;
      const double right = total - left, right_sq = total_sq - left_sq;
      const double sse = (left_sq - left * left / double(nl)) + (right_sq - right * right / double(nr));
      const double gain = sse_parent - sse;
      if (gain > best.gain && gain > min_gain) {
        double mid = 0.5 * (xa + xb);
        if (!(mid < xb)) mid = xa;  // adjacent doubles
        best = {int(f), mid, gain};
      }
    }
  }
  return best;
}

int grow(DecisionTree& tree, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
         const std::vector<std::size_t>& rows, int depth, const TreeOptions& opt) {
  const int id = int(tree.nodes.size());
  TreeNode node;
  node.samples = rows.size();
  node.depth = depth;
  node.value = mean_of(y, rows);
  node.impurity = mse_of(y, rows, node.value);
  tree.nodes.push_back(node);
  if (depth >= opt.max_depth) return id;

  const Split s = best_split(x, y, rows, opt.min_leaf);
  if (s.feature < 0) return id;
  std::vector<std::size_t> l, r;
  for (std::size_t row : rows) (x(Eigen::Index(row), s.feature) <= s.threshold ? l : r).push_back(row);
  const int li = grow(tree, x, y, l, depth + 1, opt);
  const int ri = grow(tree, x, y, r, depth + 1, opt);
  auto& n = tree.nodes[std::size_t(id)];
  n.feature = s.feature;
  n.threshold = s.threshold;
  n.left = li;
  n.right = ri;
  return id;
}

std::string feature_label(const DecisionTree& t, int f) {
  if (std::size_t(f) < t.feature_names.size()) return t.feature_names[std::size_t(f)];
  return "x" + std::to_string(f);
}

}  // namespace

DecisionTree fit_tree(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const TreeOptions& options,
                      std::vector<std::string> feature_names) {
  if (x.rows() != y.size()) throw DataError("tree inputs and targets differ in length");
  if (x.rows() < 2) throw TooFewRows(std::size_t(x.rows()));
  if (options.max_depth < 1) throw ConfigError("tree max depth must be at least 1");
  if (options.min_leaf < 1) throw ConfigError("tree min leaf size must be at least 1");
  if (!x.allFinite() || !y.allFinite()) throw DataError("non-finite tree input");
  if (!feature_names.empty() && Eigen::Index(feature_names.size()) != x.cols())
    throw ConfigError("feature name count does not match the input columns");
  DecisionTree tree;
  tree.feature_names = std::move(feature_names);
  std::vector<std::size_t> rows(std::size_t(x.rows()));
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  grow(tree, x, y, rows, 0, options);
  return tree;
}

int DecisionTree::route(const Eigen::VectorXd& x) const {
  int i = 0;
  while (!nodes[std::size_t(i)].leaf()) {
    const auto& n = nodes[std::size_t(i)];
    i = x(n.feature) <= n.threshold ? n.left : n.right;
  }
  return i;
}

int DecisionTree::depth() const {
  int d = 0;
  for (const auto& n : nodes) d = std::max(d, n.depth);
  return d;
}

std::string DecisionTree::path_to(int node) const {
  std::vector<int> parent(nodes.size(), -1);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].leaf()) continue;
    parent[std::size_t(nodes[i].left)] = int(i);
    parent[std::size_t(nodes[i].right)] = int(i);
  }
  std::vector<std::string> terms;
  for (int c = node; parent[std::size_t(c)] >= 0; c = parent[std::size_t(c)]) {
    const auto& p = nodes[std::size_t(parent[std::size_t(c)])];
    terms.push_back(feature_label(*this, p.feature) + (p.left == c ? " <= " : " > ") +
                    format_double(p.threshold));
  }
  std::reverse(terms.begin(), terms.end());
  std::string out;
  for (std::size_t k = 0; k < terms.size(); ++k) out += (k ? " and " : "") + terms[k];
  return out.empty() ? "(all)" : out;
}

std::string DecisionTree::to_text() const {
  std::ostringstream os;
  auto rec = [&](auto&& self, int i, const std::string& indent) -> void {
    const auto& n = nodes[std::size_t(i)];
    if (n.leaf()) {
      os << indent << "value = " << format_double(n.value) << " (n=" << n.samples << ")\n";
      return;
    }
    const std::string f = feature_label(*this, n.feature);
    os << indent << f << " <= " << format_double(n.threshold) << " (n=" << n.samples << ")\n";
    self(self, n.left, indent + "  ");
    os << indent << f << " > " << format_double(n.threshold) << '\n';
    self(self, n.right, indent + "  ");
  };
  rec(rec, 0, "");
  return os.str();
}

std::string DecisionTree::to_dot(const std::string& target_name) const {
  std::ostringstream os;
  os << "digraph tree {\n  node [shape=box];\n";
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& n = nodes[i];
    os << "  n" << i << " [label=\"";
    if (n.leaf())
      os << target_name << " = " << format_double(n.value);
    else
      os << feature_label(*this, n.feature) << " <= " << format_double(n.threshold);
    os << "\\nsamples = " << n.samples << "\"];\n";
  }
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].leaf()) continue;
    os << "  n" << i << " -> n" << nodes[i].left << " [label=\"yes\"];\n";
    os << "  n" << i << " -> n" << nodes[i].right << " [label=\"no\"];\n";
  }
  os << "}\n";
  return os.str();
}

std::string DecisionTree::to_json() const {
  nlohmann::ordered_json j;
  j["feature_names"] = feature_names;
  auto& arr = j["nodes"] = nlohmann::ordered_json::array();
  for (const auto& n : nodes) {
    arr.push_back({{"feature", n.feature},
                   {"threshold", n.threshold},
                   {"value", n.value},
                   {"impurity", n.impurity},
                   {"samples", n.samples},
                   {"depth", n.depth},
                   {"left", n.left},
                   {"right", n.right}});
  }
  return j.dump(2);
}

DecisionTree DecisionTree::from_json(const std::string& text) {
  DecisionTree t;
  try {
    const auto j = nlohmann::json::parse(text);
    t.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    for (const auto& e : j.at("nodes")) {
      TreeNode n;
      n.feature = e.at("feature").get<int>();
      n.threshold = e.at("threshold").get<double>();
      n.value = e.at("value").get<double>();
      n.impurity = e.at("impurity").get<double>();
      n.samples = e.at("samples").get<std::size_t>();
      n.depth = e.at("depth").get<int>();
      n.left = e.at("left").get<int>();
      n.right = e.at("right").get<int>();
      t.nodes.push_back(n);
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed tree json: ") + e.what());
  }
  const int count = int(t.nodes.size());
  if (count == 0) throw DataError("tree json has no nodes");
  for (const auto& n : t.nodes)
    if (!n.leaf() && (n.left <= 0 || n.right <= 0 || n.left >= count || n.right >= count))
      throw DataError("tree json has dangling child index");
  return t;
}

}  // namespace qsm
