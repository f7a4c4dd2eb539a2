#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "qsm/errors.hpp"
#include "qsm/random.hpp"
#include "qsm/surrogate.hpp"

namespace qsm {

void MlpHyperparams::validate() const {
  if (hidden_layers < 1 || hidden_nodes < 1 || max_epochs < 1 || patience < 1)
    throw ConfigError("mlp: layer, node, epoch and patience counts must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("mlp: learning_rate must be > 0");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0))
    throw ConfigError("mlp: validation_fraction must be in [0, 1)");
}

RegressionData RegressionData::subset(std::span<const std::size_t> idx) const {
  RegressionData out;
  out.inputs.resize(Eigen::Index(idx.size()), inputs.cols());
  out.targets.resize(Eigen::Index(idx.size()), targets.cols());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    out.inputs.row(Eigen::Index(k)) = inputs.row(Eigen::Index(idx[k]));
    out.targets.row(Eigen::Index(k)) = targets.row(Eigen::Index(idx[k]));
  }
  return out;
}

RegressionData to_regression_data(std::span<const LabeledDesign> rows) {
  RegressionData d;
  d.inputs.resize(Eigen::Index(rows.size()), 6);
  d.targets.resize(Eigen::Index(rows.size()), 3);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    d.inputs.row(Eigen::Index(i)) = rows[i].lengths_abs().vector().transpose();
    d.targets.row(Eigen::Index(i)) << rows[i].eta, rows[i].tau1, rows[i].tau2;
  }
  return d;
}

Eigen::MatrixXd SurrogateModel::normalize_inputs(const Eigen::MatrixXd& x) const {
  const Eigen::ArrayXd range = (input_max - input_min).array().max(1e-300);
  return ((x.transpose().colwise() - input_min).array().colwise() / range).matrix();
}

Eigen::MatrixXd SurrogateModel::normalize_targets(const Eigen::MatrixXd& y) const {
  return ((y.transpose().colwise() - target_mean).array().colwise() / target_std.array()).matrix();
}

Eigen::MatrixXd SurrogateModel::denormalize_targets(const Eigen::MatrixXd& yn) const {
  return ((yn.array().colwise() * target_std.array()).matrix().colwise() + target_mean).transpose();
}

namespace {

Eigen::MatrixXd forward(const std::vector<DenseLayer>& layers, const Eigen::MatrixXd& xn,
                        std::vector<Eigen::MatrixXd>* pre = nullptr,
                        std::vector<Eigen::MatrixXd>* act = nullptr) {
  Eigen::MatrixXd a = xn;
  if (act) act->assign(1, a);
  if (pre) pre->clear();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    Eigen::MatrixXd z = layers[l].weights * a;
    z.colwise() += layers[l].bias;
    if (pre) pre->push_back(z);
    a = (l + 1 < layers.size()) ? Eigen::MatrixXd(z.cwiseMax(0.0)) : z;
    if (act && l + 1 < layers.size()) act->push_back(a);
  }
  return a;
}

}  // namespace

Eigen::MatrixXd SurrogateModel::predict(const Eigen::MatrixXd& x) const {
  return denormalize_targets(forward(layers, normalize_inputs(x)));
}

Eigen::VectorXd SurrogateModel::predict(const Eigen::VectorXd& x) const {
  return predict(Eigen::MatrixXd(x.transpose())).row(0).transpose();
}

bool SurrogateModel::extrapolates(const Eigen::VectorXd& x) const {
  return (x.array() < input_min.array()).any() || (x.array() > input_max.array()).any();
}

double mse_loss(const std::vector<DenseLayer>& layers, const Eigen::MatrixXd& xn,
                const Eigen::MatrixXd& yn) {
  return (forward(layers, xn) - yn).squaredNorm() / double(yn.size());
}

namespace {

std::vector<DenseLayer> backprop(const std::vector<DenseLayer>& layers, const Eigen::MatrixXd& xn,
                                 const Eigen::MatrixXd& yn, double* loss) {
  std::vector<Eigen::MatrixXd> pre, act;
  const Eigen::MatrixXd residual = forward(layers, xn, &pre, &act) - yn;
  if (loss) *loss = residual.squaredNorm() / double(yn.size());
  std::vector<DenseLayer> grad(layers.size());
  Eigen::MatrixXd delta = (2.0 / double(yn.size())) * residual;
  for (std::size_t l = layers.size(); l-- > 0;) {
    grad[l].weights = delta * act[l].transpose();
    grad[l].bias = delta.rowwise().sum();
    if (l > 0) {
      delta = (layers[l].weights.transpose() * delta).cwiseProduct(
          (pre[l - 1].array() > 0.0).cast<double>().matrix());
    }
  }
  return grad;
}

}  // namespace

std::vector<DenseLayer> mse_gradient(const std::vector<DenseLayer>& layers,
                                     const Eigen::MatrixXd& xn, const Eigen::MatrixXd& yn) {
  return backprop(layers, xn, yn, nullptr);
}

SplitIndices split(std::size_t n, double ratio, std::uint64_t seed) {
  if (n < 10) throw TooFewRows(n);
  if (!(ratio > 0.0 && ratio < 1.0)) throw ConfigError("split ratio must be in (0, 1)");
  Rng rng(seed);
  const auto perm = rng.permutation(n);
  const auto n_train = std::size_t(std::llround(ratio * double(n)));
  SplitIndices s;
  s.train.assign(perm.begin(), perm.begin() + std::ptrdiff_t(n_train));
  s.test.assign(perm.begin() + std::ptrdiff_t(n_train), perm.end());
  return s;
}

namespace {

struct AdamState {
  std::vector<DenseLayer> m, v;

  explicit AdamState(const std::vector<DenseLayer>& layers) {
    for (const auto& layer : layers) {
      m.push_back({Eigen::MatrixXd::Zero(layer.weights.rows(), layer.weights.cols()),
                   Eigen::VectorXd::Zero(layer.bias.size())});
    }
    v = m;
  }

  void step(std::vector<DenseLayer>& layers, const std::vector<DenseLayer>& grad,
            const MlpHyperparams& hp, int t) {
    const double c1 = 1.0 - std::pow(hp.beta1, t);
    const double c2 = 1.0 - std::pow(hp.beta2, t);
    auto update = [&](auto& param, const auto& g, auto& mm, auto& vv) {
      mm = hp.beta1 * mm + (1.0 - hp.beta1) * g;
      vv = hp.beta2 * vv + (1.0 - hp.beta2) * g.cwiseProduct(g);
      param.array() -= hp.learning_rate * (mm.array() / c1) /
                       ((vv.array() / c2).sqrt() + hp.epsilon);
    };
    for (std::size_t l = 0; l < layers.size(); ++l) {
      update(layers[l].weights, grad[l].weights, m[l].weights, v[l].weights);
      update(layers[l].bias, grad[l].bias, m[l].bias, v[l].bias);
    }
  }
};

}  // namespace

SurrogateModel fit(const RegressionData& train, const MlpHyperparams& hp, std::uint64_t seed) {
  hp.validate();
  const Eigen::Index n = train.rows();
  if (n < 1) throw TooFewRows(0);
  if (!train.inputs.allFinite() || !train.targets.allFinite())
    throw DataError("training data contains non-finite values");

  SurrogateModel model;
  model.input_min = train.inputs.colwise().minCoeff().transpose();
  model.input_max = train.inputs.colwise().maxCoeff().transpose();
  model.target_mean = train.targets.colwise().mean().transpose();
  model.target_std =
      ((train.targets.rowwise() - model.target_mean.transpose()).array().square().colwise().sum() /
       double(n))
          .sqrt()
          .transpose();
  for (Eigen::Index k = 0; k < model.target_std.size(); ++k)
    if (!(model.target_std(k) > 0.0)) model.target_std(k) = 1.0;

  Rng rng(seed);
  // He-uniform fan-in initialisation, zero biases.
  Eigen::Index fan_in = train.inputs.cols();
  for (int l = 0; l <= hp.hidden_layers; ++l) {
    const Eigen::Index out = (l < hp.hidden_layers) ? hp.hidden_nodes : train.targets.cols();
    const double bound = std::sqrt(6.0 / double(fan_in));
    DenseLayer layer{Eigen::MatrixXd(out, fan_in), Eigen::VectorXd::Zero(out)};
    for (Eigen::Index j = 0; j < fan_in; ++j)
      for (Eigen::Index i = 0; i < out; ++i) layer.weights(i, j) = rng.uniform(-bound, bound);
    model.layers.push_back(std::move(layer));
    fan_in = out;
  }

  const Eigen::MatrixXd xn_all = model.normalize_inputs(train.inputs);
  const Eigen::MatrixXd yn_all = model.normalize_targets(train.targets);

  // Validation fold for early stopping; with no fold the training loss is monitored.
  const auto n_val = Eigen::Index(std::floor(hp.validation_fraction * double(n)));
  const auto perm = rng.permutation(std::size_t(n));
  Eigen::MatrixXd xf, yf, xv, yv;
  if (n_val >= 1 && n - n_val >= 1) {
    xf.resize(xn_all.rows(), n - n_val);
    yf.resize(yn_all.rows(), n - n_val);
    xv.resize(xn_all.rows(), n_val);
    yv.resize(yn_all.rows(), n_val);
    for (Eigen::Index k = 0; k < n; ++k) {
      const auto src = Eigen::Index(perm[std::size_t(k)]);
      if (k < n_val) {
        xv.col(k) = xn_all.col(src);
        yv.col(k) = yn_all.col(src);
      } else {
        xf.col(k - n_val) = xn_all.col(src);
        yf.col(k - n_val) = yn_all.col(src);
      }
    }
  } else {
    xf = xn_all;
    yf = yn_all;
  }
  const bool has_val = xv.cols() > 0;

  AdamState adam(model.layers);
  std::vector<DenseLayer> best = model.layers;
  double best_loss = INFINITY;
  int best_epoch = 0;
  int epoch = 0;
  double train_loss = INFINITY;
  model.info.seed = seed;
  for (epoch = 1; epoch <= hp.max_epochs; ++epoch) {
    // The loss is that of the weights before this epoch's step.
    const auto grad = backprop(model.layers, xf, yf, &train_loss);
    if (!std::isfinite(train_loss)) throw NonFiniteLoss(epoch);
    const double monitored = has_val ? mse_loss(model.layers, xv, yv) : train_loss;
    if (monitored < best_loss) {
      best_loss = monitored;
      best_epoch = epoch;
      best = model.layers;
    }
    if (epoch % 100 == 0) model.info.best_loss_history.push_back(best_loss);
    if (epoch - best_epoch >= hp.patience) break;
    adam.step(model.layers, grad, hp, epoch);
  }
  model.layers = std::move(best);
  model.info.epochs_run = std::min(epoch, hp.max_epochs);
  model.info.best_epoch = best_epoch;
  model.info.final_train_loss = mse_loss(model.layers, xf, yf);
  model.info.best_validation_loss = best_loss;
  return model;
}

// ---------------------------------------------------------------- persistence

namespace {

using Json = nlohmann::ordered_json;

Json vec_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd json_vec(const Json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), Eigen::Index(v.size()));
}

}  // namespace

std::string model_to_json(const SurrogateModel& model) {
  Json j;
  j["format"] = "qsm-mlp";
  j["version"] = 1;
  j["inputs"] = {"l1_abs", "l2_abs", "l3_abs", "l4_abs", "eex_abs", "eey_abs"};
  j["outputs"] = {"eta", "tau1_nm", "tau2_nm"};
  Json layers = Json::array();
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const auto& layer = model.layers[l];
    std::vector<double> w;
    w.reserve(std::size_t(layer.weights.size()));
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) w.push_back(layer.weights(r, c));
    layers.push_back({{"in", layer.weights.cols()},
                      {"out", layer.weights.rows()},
                      {"activation", l + 1 < model.layers.size() ? "relu" : "linear"},
                      {"weights", w},
                      {"bias", vec_json(layer.bias)}});
  }
  j["layers"] = layers;
  j["input_min"] = vec_json(model.input_min);
  j["input_max"] = vec_json(model.input_max);
  j["target_mean"] = vec_json(model.target_mean);
  j["target_std"] = vec_json(model.target_std);
  j["training"] = {{"seed", model.info.seed},
                   {"epochs_run", model.info.epochs_run},
                   {"best_epoch", model.info.best_epoch},
                   {"final_train_loss", model.info.final_train_loss},
                   {"best_validation_loss", model.info.best_validation_loss},
                   {"best_loss_history", model.info.best_loss_history}};
  return j.dump(1);
}

SurrogateModel model_from_json(const std::string& text) {
  try {
    const Json j = Json::parse(text);
    if (j.at("format") != "qsm-mlp") throw DataError("not a qsm-mlp model file");
    SurrogateModel m;
    for (const auto& lj : j.at("layers")) {
      const auto in = lj.at("in").get<Eigen::Index>();
      const auto out = lj.at("out").get<Eigen::Index>();
      const auto w = lj.at("weights").get<std::vector<double>>();
      if (Eigen::Index(w.size()) != in * out) throw DataError("layer weight count mismatch");
      DenseLayer layer{Eigen::MatrixXd(out, in), json_vec(lj.at("bias"))};
      for (Eigen::Index r = 0; r < out; ++r)
        for (Eigen::Index c = 0; c < in; ++c) layer.weights(r, c) = w[std::size_t(r * in + c)];
      m.layers.push_back(std::move(layer));
    }
    m.input_min = json_vec(j.at("input_min"));
    m.input_max = json_vec(j.at("input_max"));
    m.target_mean = json_vec(j.at("target_mean"));
    m.target_std = json_vec(j.at("target_std"));
    const auto& t = j.at("training");
    m.info.seed = t.at("seed").get<std::uint64_t>();
    m.info.epochs_run = t.at("epochs_run").get<int>();
    m.info.best_epoch = t.at("best_epoch").get<int>();
    m.info.final_train_loss = t.at("final_train_loss").get<double>();
    m.info.best_validation_loss = t.at("best_validation_loss").get<double>();
    m.info.best_loss_history = t.at("best_loss_history").get<std::vector<double>>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed model file: ") + e.what());
  }
}

void save_model(const std::filesystem::path& path, const SurrogateModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << model_to_json(model) << '\n';
}

SurrogateModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return model_from_json(ss.str());
}

}  // namespace qsm
