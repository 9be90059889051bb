#include "metaul/similarity_net.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "metaul/csv.hpp"
#include "metaul/parallel.hpp"
#include "metaul/regression.hpp"
#include "metaul/rng.hpp"

namespace metaul {

std::vector<double> covariance_block(const PointMatrix& points) {
  const auto d = static_cast<std::size_t>(points.cols());
  if (d > kPairMaxDims) throw DataError("pair features support at most 10 dimensions");
  const Eigen::MatrixXd cov = covariance(points);
  std::vector<double> block;
  block.reserve(kPairCovFeatures);
  for (std::size_t r = 0; r < kPairMaxDims; ++r) {
    for (std::size_t c = r; c < kPairMaxDims; ++c) {
      block.push_back(r < d && c < d ? cov(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) : 0.0);
    }
  }
  return block;
}

PairExample build_pair_features(const Dataset& dataset, const std::vector<double>& cov_block, std::size_t i,
                                std::size_t j) {
  if (dataset.d() > kPairMaxDims) throw DataError(dataset.id + ": pair features support at most 10 dimensions");
  if (i == j || i >= dataset.n() || j >= dataset.n()) throw std::invalid_argument("pair needs two distinct rows");
  if (!dataset.labels) throw DataError(dataset.id + ": pair labels need class labels");
  if (cov_block.size() != kPairCovFeatures) throw std::invalid_argument("covariance block must have 55 entries");
  PairExample ex;
  ex.features.assign(kPairFeatureDim, 0.0);
  for (std::size_t c = 0; c < dataset.d(); ++c) {
    ex.features[c] = dataset.points(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c));
    ex.features[kPairMaxDims + c] = dataset.points(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(c));
  }
  std::copy(cov_block.begin(), cov_block.end(), ex.features.begin() + 2 * kPairMaxDims);
  ex.label = (*dataset.labels)[i] == (*dataset.labels)[j] ? 1 : 0;
  ex.dataset_id = dataset.id;
  ex.i = i;
  ex.j = j;
  return ex;
}

PairExample build_pair_features(const Dataset& dataset, std::size_t i, std::size_t j) {
  return build_pair_features(dataset, covariance_block(dataset.points), i, j);
}

std::vector<double> swap_pair_features(const std::vector<double>& features) {
  if (features.size() != kPairFeatureDim) throw std::invalid_argument("pair features must have 75 entries");
  std::vector<double> out = features;
  std::swap_ranges(out.begin(), out.begin() + kPairMaxDims, out.begin() + kPairMaxDims);
  return out;
}

bool qualifies_for_pairs(const Dataset& dataset, const PairSamplingConfig& config) {
  return dataset.labels && dataset.n() >= 4 && dataset.n() <= config.max_points && dataset.d() >= 1 &&
         dataset.d() <= std::min(config.max_dims, kPairMaxDims);
}

namespace {

using IndexPair = std::pair<std::size_t, std::size_t>;

// Up to `cap` pairs of distinct rows; without replacement when the pair
// universe allows it. Orientation follows position in `rows`.
std::vector<IndexPair> sample_pairs(const std::vector<std::size_t>& rows, std::size_t cap, Rng& rng) {
  const std::size_t h = rows.size();
  std::vector<IndexPair> out;
  if (h < 2 || cap == 0) return out;
  const std::size_t universe = h * (h - 1) / 2;
  auto draw = [&] {
    std::size_t a = rng.below(h);
    std::size_t b = rng.below(h - 1);
    if (b >= a) ++b;
    return IndexPair{std::min(a, b), std::max(a, b)};
  };
  out.reserve(cap);
  if (universe < cap) {
    for (std::size_t t = 0; t < cap; ++t) out.push_back(draw());
  } else if (universe <= 4 * cap) {
    std::vector<IndexPair> all;
    all.reserve(universe);
    for (std::size_t a = 0; a < h; ++a) {
      for (std::size_t b = a + 1; b < h; ++b) all.emplace_back(a, b);
    }
    rng.shuffle(std::span<IndexPair>(all));
    out.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(cap));
  } else {
    std::set<IndexPair> seen;
    while (out.size() < cap) {
      const IndexPair p = draw();
      if (seen.insert(p).second) out.push_back(p);
    }
  }
  for (auto& [a, b] : out) {
    a = rows[a];
    b = rows[b];
  }
  return out;
}

}  // namespace

SplitTriple sample_pair_splits(const std::vector<Dataset>& repo, std::uint64_t seed, const PairSamplingConfig& config) {
  std::vector<Dataset> pool;
  for (const auto& ds : repo) {
    if (qualifies_for_pairs(ds, config)) pool.push_back(normalize_dataset(ds));
  }
  if (pool.size() < 2) throw DataError("pair sampling needs at least two qualifying labeled datasets");

  Rng rng(seed);
  std::vector<int> category(pool.size());
  bool ok = false;
  for (std::size_t attempt = 0; attempt <= config.max_category_retries && !ok; ++attempt) {
    for (auto& c : category) c = static_cast<int>(rng.below(2));
    const auto ones = std::count(category.begin(), category.end(), 0);
    ok = ones > 0 && ones < static_cast<std::ptrdiff_t>(category.size());
  }
  if (!ok) throw DataError("pair sampling left a category empty");

  SplitTriple split;
  for (std::size_t t = 0; t < pool.size(); ++t) {
    const Dataset& ds = pool[t];
    const std::vector<double> cov = covariance_block(ds.points);
    std::vector<std::size_t> perm(ds.n());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(perm));
    auto emit = [&](const std::vector<std::size_t>& rows, std::vector<PairExample>& dest) {
      for (const auto& [i, j] : sample_pairs(rows, config.pair_cap, rng)) dest.push_back(build_pair_features(ds, cov, i, j));
    };
    if (category[t] == 0) {
      split.training_ids.push_back(ds.id);
      const std::size_t half = std::min(ds.n() / 2, config.pair_cap);
      emit(std::vector<std::size_t>(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(half)), split.meta_train);
      emit(std::vector<std::size_t>(perm.begin() + static_cast<std::ptrdiff_t>(half), perm.end()), split.meta_it);
    } else {
      split.external_ids.push_back(ds.id);
      emit(perm, split.meta_et);
    }
  }
  const std::size_t raw = split.meta_train.size();
  split.meta_train.reserve(2 * raw);
  for (std::size_t t = 0; t < raw; ++t) {
    PairExample swapped = split.meta_train[t];
    swapped.features = swap_pair_features(swapped.features);
    std::swap(swapped.i, swapped.j);
    split.meta_train.push_back(std::move(swapped));
  }
  return split;
}

// ----------------------------------------------------------------------- MLP

void adadelta_scalar_step(double& x, double& sq_grad, double& sq_update, double grad, const AdadeltaParams& p) {
  sq_grad = p.rho * sq_grad + (1.0 - p.rho) * grad * grad;
  const double delta = std::sqrt(sq_update + p.eps) / std::sqrt(sq_grad + p.eps) * grad;
  x -= p.lr * delta;
  sq_update = p.rho * sq_update + (1.0 - p.rho) * delta * delta;
}

const std::vector<std::size_t>& Mlp::default_dims() {
  static const std::vector<std::size_t> dims{kPairFeatureDim, 100, 50, 25, 12, 2};
  return dims;
}

Mlp::Mlp(const std::vector<std::size_t>& dims, std::uint64_t seed) : dims_(dims) {
  if (dims.size() < 2) throw std::invalid_argument("an MLP needs at least an input and an output layer");
  if (std::find(dims.begin(), dims.end(), std::size_t{0}) != dims.end()) {
    throw std::invalid_argument("layer widths must be positive");
  }
  Rng rng(seed);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const auto in = static_cast<Eigen::Index>(dims[l]);
    const auto out = static_cast<Eigen::Index>(dims[l + 1]);
    const double limit = std::sqrt(6.0 / static_cast<double>(dims[l] + dims[l + 1]));
    DenseLayer layer;
    layer.w.resize(out, in);
    for (Eigen::Index r = 0; r < out; ++r) {
      for (Eigen::Index c = 0; c < in; ++c) layer.w(r, c) = rng.uniform(-limit, limit);
    }
    layer.b = Eigen::VectorXd::Zero(out);
    layer.w_sq_grad = Eigen::MatrixXd::Zero(out, in);
    layer.w_sq_update = Eigen::MatrixXd::Zero(out, in);
    layer.b_sq_grad = Eigen::VectorXd::Zero(out);
    layer.b_sq_update = Eigen::VectorXd::Zero(out);
    layers_.push_back(std::move(layer));
  }
}

namespace {

void log_softmax_columns(Eigen::MatrixXd& z) {
  for (Eigen::Index c = 0; c < z.cols(); ++c) {
    const double m = z.col(c).maxCoeff();
    const double lse = m + std::log((z.col(c).array() - m).exp().sum());
    z.col(c).array() -= lse;
  }
}

void check_labels(const Eigen::MatrixXd& inputs, const std::vector<int>& labels, std::size_t classes) {
  if (static_cast<std::size_t>(inputs.cols()) != labels.size() || labels.empty()) {
    throw std::invalid_argument("need one label per input column");
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= classes) throw std::invalid_argument("label out of range");
  }
}

}  // namespace

Eigen::MatrixXd Mlp::log_probs(const Eigen::MatrixXd& inputs) const {
  if (layers_.empty() || static_cast<std::size_t>(inputs.rows()) != dims_.front()) {
    throw std::invalid_argument("input width does not match the network");
  }
  Eigen::MatrixXd a = inputs;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Eigen::MatrixXd z = layers_[l].w * a;
    z.colwise() += layers_[l].b;
    if (l + 1 < layers_.size()) z = z.cwiseMax(0.0);
    a = std::move(z);
  }
  log_softmax_columns(a);
  return a;
}

double Mlp::loss(const Eigen::MatrixXd& inputs, const std::vector<int>& labels) const {
  check_labels(inputs, labels, dims_.back());
  const Eigen::MatrixXd lp = log_probs(inputs);
  double total = 0.0;
  for (std::size_t c = 0; c < labels.size(); ++c) total -= lp(labels[c], static_cast<Eigen::Index>(c));
  return total / static_cast<double>(labels.size());
}

MlpGradients Mlp::gradients(const Eigen::MatrixXd& inputs, const std::vector<int>& labels, double* loss_out) const {
  check_labels(inputs, labels, dims_.back());
  if (static_cast<std::size_t>(inputs.rows()) != dims_.front()) {
    throw std::invalid_argument("input width does not match the network");
  }
  const std::size_t depth = layers_.size();
  // acts[l] is the input to layer l; pre[l] its pre-activation.
  std::vector<Eigen::MatrixXd> acts(depth + 1);
  std::vector<Eigen::MatrixXd> pre(depth);
  acts[0] = inputs;
  for (std::size_t l = 0; l < depth; ++l) {
    pre[l] = layers_[l].w * acts[l];
    pre[l].colwise() += layers_[l].b;
    acts[l + 1] = l + 1 < depth ? pre[l].cwiseMax(0.0) : pre[l];
  }
  Eigen::MatrixXd lp = acts[depth];
  log_softmax_columns(lp);

  const double inv_batch = 1.0 / static_cast<double>(labels.size());
  Eigen::MatrixXd delta = lp.array().exp();
  double total = 0.0;
  for (std::size_t c = 0; c < labels.size(); ++c) {
    total -= lp(labels[c], static_cast<Eigen::Index>(c));
    delta(labels[c], static_cast<Eigen::Index>(c)) -= 1.0;
  }
  delta *= inv_batch;
  if (loss_out) *loss_out = total * inv_batch;

  MlpGradients g;
  g.w.resize(depth);
  g.b.resize(depth);
  for (std::size_t l = depth; l-- > 0;) {
    g.w[l] = delta * acts[l].transpose();
    g.b[l] = delta.rowwise().sum();
    if (l > 0) {
      Eigen::MatrixXd back = layers_[l].w.transpose() * delta;
      delta = (pre[l - 1].array() > 0.0).select(back, 0.0);
    }
  }
  return g;
}

namespace {

template <typename Param>
void adadelta_apply(Param& x, Param& sq_grad, Param& sq_update, const Param& grad, const AdadeltaParams& p) {
  sq_grad = p.rho * sq_grad.array() + (1.0 - p.rho) * grad.array() * grad.array();
  const Param delta = (sq_update.array() + p.eps).sqrt() / (sq_grad.array() + p.eps).sqrt() * grad.array();
  x.array() -= p.lr * delta.array();
  sq_update = p.rho * sq_update.array() + (1.0 - p.rho) * delta.array() * delta.array();
}

}  // namespace

void Mlp::adadelta_update(const MlpGradients& grads, const AdadeltaParams& params) {
  if (grads.w.size() != layers_.size() || grads.b.size() != layers_.size()) {
    throw std::invalid_argument("gradient does not match the network");
  }
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    auto& layer = layers_[l];
    adadelta_apply(layer.w, layer.w_sq_grad, layer.w_sq_update, grads.w[l], params);
    adadelta_apply(layer.b, layer.b_sq_grad, layer.b_sq_update, grads.b[l], params);
  }
}

double Mlp::prob_same(const std::vector<double>& features) const {
  const Eigen::Map<const Eigen::VectorXd> x(features.data(), static_cast<Eigen::Index>(features.size()));
  Eigen::MatrixXd input = x;
  return std::exp(log_probs(input)(1, 0));
}

double max_gradient_relative_error(const Mlp& model, const Eigen::MatrixXd& inputs, const std::vector<int>& labels,
                                   double h) {
  const MlpGradients analytic = model.gradients(inputs, labels);
  Mlp probe = model;
  double worst = 0.0;
  auto check = [&](double& param, double a) {
    const double saved = param;
    param = saved + h;
    const double up = probe.loss(inputs, labels);
    param = saved - h;
    const double down = probe.loss(inputs, labels);
    param = saved;
    const double numeric = (up - down) / (2.0 * h);
    worst = std::max(worst, std::abs(a - numeric) / std::max(std::abs(a) + std::abs(numeric), 1e-6));
  };
  for (std::size_t l = 0; l < probe.layers().size(); ++l) {
    auto& layer = probe.layers()[l];
    for (Eigen::Index r = 0; r < layer.w.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.w.cols(); ++c) check(layer.w(r, c), analytic.w[l](r, c));
    }
    for (Eigen::Index r = 0; r < layer.b.size(); ++r) check(layer.b(r), analytic.b[l](r));
  }
  return worst;
}

namespace {

Eigen::MatrixXd pair_matrix(const std::vector<PairExample>& pairs, const std::vector<std::size_t>& order,
                            std::size_t begin, std::size_t end, std::vector<int>& labels) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(kPairFeatureDim), static_cast<Eigen::Index>(end - begin));
  labels.resize(end - begin);
  for (std::size_t t = begin; t < end; ++t) {
    const auto& ex = pairs[order[t]];
    if (ex.features.size() != kPairFeatureDim) throw std::invalid_argument("pair features must have 75 entries");
    x.col(static_cast<Eigen::Index>(t - begin)) =
        Eigen::Map<const Eigen::VectorXd>(ex.features.data(), static_cast<Eigen::Index>(kPairFeatureDim));
    labels[t - begin] = ex.label;
  }
  return x;
}

}  // namespace

TrainResult train_mlp(const std::vector<PairExample>& train, const TrainConfig& config) {
  if (train.empty()) throw std::invalid_argument("empty training set");
  if (config.batch == 0) throw std::invalid_argument("batch size must be positive");
  if (config.dims.empty() || config.dims.front() != kPairFeatureDim) {
    throw std::invalid_argument("network input must be 75 wide");
  }
  TrainResult result;
  result.model = Mlp(config.dims, mix_seed(config.seed, 0));
  Rng rng(mix_seed(config.seed, 1));

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<int> all_labels;
  const Eigen::MatrixXd all = pair_matrix(train, order, 0, train.size(), all_labels);
  result.initial_loss = result.model.loss(all, all_labels);

  std::vector<int> labels;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch) {
      const std::size_t end = std::min(order.size(), begin + config.batch);
      const Eigen::MatrixXd x = pair_matrix(train, order, begin, end, labels);
      result.model.adadelta_update(result.model.gradients(x, labels), config.optimizer);
    }
    result.epoch_loss.push_back(result.model.loss(all, all_labels));
  }
  return result;
}

PairPrediction predict_pair(const Mlp& model, const std::vector<double>& features) {
  const double p = 0.5 * (model.prob_same(features) + model.prob_same(swap_pair_features(features)));
  return {p, p > 0.5};
}

PairPrediction predict_pair(const Mlp& model, const Dataset& normalized, std::size_t i, std::size_t j) {
  return predict_pair(model, build_pair_features(normalized, i, j).features);
}

double pair_accuracy(const Mlp& model, const std::vector<PairExample>& pairs) {
  if (pairs.empty()) throw std::invalid_argument("no pairs to evaluate");
  std::size_t correct = 0;
  for (const auto& ex : pairs) {
    if (predict_pair(model, ex.features).same == (ex.label == 1)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(pairs.size());
}

double majority_baseline(const std::vector<PairExample>& pairs) {
  if (pairs.empty()) throw std::invalid_argument("no pairs to evaluate");
  std::map<std::string, std::pair<std::size_t, std::size_t>> per_problem;  // (same, total)
  for (const auto& ex : pairs) {
    auto& [same, total] = per_problem[ex.dataset_id];
    same += static_cast<std::size_t>(ex.label == 1);
    ++total;
  }
  double sum = 0.0;
  for (const auto& [id, counts] : per_problem) {
    const double frac = static_cast<double>(counts.first) / static_cast<double>(counts.second);
    sum += std::max(frac, 1.0 - frac);
  }
  return sum / static_cast<double>(per_problem.size());
}

BsfEvaluation evaluate_bsf(const Mlp& model, const SplitTriple& split) {
  BsfEvaluation ev;
  ev.acc_meta_it = pair_accuracy(model, split.meta_it);
  ev.acc_meta_et = pair_accuracy(model, split.meta_et);
  ev.acc_majority_it = majority_baseline(split.meta_it);
  ev.acc_majority_et = majority_baseline(split.meta_et);
  return ev;
}

std::vector<BsfRow> run_bsf_experiment(const std::vector<Dataset>& repo, std::size_t repeats, std::uint64_t seed,
                                       const PairSamplingConfig& sampling, TrainConfig training, unsigned threads) {
  std::vector<BsfRow> rows(repeats);
  parallel_for(repeats, threads, [&](std::size_t r) {
    const SplitTriple split = sample_pair_splits(repo, mix_seed(seed, 2 * r), sampling);
    TrainConfig cfg = training;
    cfg.seed = mix_seed(seed, 2 * r + 1);
    rows[r] = {r, evaluate_bsf(train_mlp(split.meta_train, cfg).model, split)};
  });
  return rows;
}

void write_pairs_csv(const std::vector<PairExample>& pairs, const std::filesystem::path& path) {
  std::ostringstream out;
  for (std::size_t c = 0; c < kPairFeatureDim; ++c) out << 'f' << c << ',';
  out << "label,dataset_id\n";
  for (const auto& ex : pairs) {
    for (double v : ex.features) out << format_double(v) << ',';
    out << ex.label << ',' << ex.dataset_id << '\n';
  }
  write_text_file(path, out.str());
}

std::vector<PairExample> read_pairs_csv(const std::filesystem::path& path) {
  const CsvTable table = read_csv(path);
  const int label_col = table.column("label");
  const int id_col = table.column("dataset_id");
  std::vector<int> feature_cols;
  for (std::size_t c = 0; c < kPairFeatureDim; ++c) {
    const int col = table.column("f" + std::to_string(c));
    if (col < 0) throw DataError(path.string() + ": missing column f" + std::to_string(c));
    feature_cols.push_back(col);
  }
  if (label_col < 0 || id_col < 0) throw DataError(path.string() + ": missing label or dataset_id column");
  std::vector<PairExample> pairs;
  for (const auto& row : table.rows) {
    PairExample ex;
    for (int col : feature_cols) ex.features.push_back(parse_double(row[col], "pair feature"));
    const long long label = parse_integer(row[label_col], "pair label");
    if (label != 0 && label != 1) throw DataError(path.string() + ": pair label must be 0 or 1");
    ex.label = static_cast<int>(label);
    ex.dataset_id = row[id_col];
    pairs.push_back(std::move(ex));
  }
  return pairs;
}

namespace {

template <typename M>
nlohmann::json flat(const M& m) {
  nlohmann::json arr = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) arr.push_back(m(r, c));
  }
  return arr;
}

template <typename M>
void unflat(const nlohmann::json& arr, M& m) {
  if (arr.size() != static_cast<std::size_t>(m.size())) throw DataError("checkpoint array has the wrong size");
  std::size_t t = 0;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      m(r, c) = arr[t++].get<double>();
      if (!std::isfinite(m(r, c))) throw DataError("checkpoint holds a non-finite value");
    }
  }
}

}  // namespace

nlohmann::json to_json(const Mlp& model) {
  nlohmann::json doc;
  doc["dims"] = model.dims();
  doc["layers"] = nlohmann::json::array();
  for (const auto& layer : model.layers()) {
    doc["layers"].push_back({{"w", flat(layer.w)},
                             {"b", flat(layer.b)},
                             {"w_sq_grad", flat(layer.w_sq_grad)},
                             {"w_sq_update", flat(layer.w_sq_update)},
                             {"b_sq_grad", flat(layer.b_sq_grad)},
                             {"b_sq_update", flat(layer.b_sq_update)}});
  }
  return doc;
}

Mlp mlp_from_json(const nlohmann::json& doc) {
  Mlp model(doc.at("dims").get<std::vector<std::size_t>>(), 0);
  const auto& layers = doc.at("layers");
  if (layers.size() != model.layers().size()) throw DataError("checkpoint layer count does not match dims");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    auto& layer = model.layers()[l];
    unflat(layers[l].at("w"), layer.w);
    unflat(layers[l].at("b"), layer.b);
    unflat(layers[l].at("w_sq_grad"), layer.w_sq_grad);
    unflat(layers[l].at("w_sq_update"), layer.w_sq_update);
    unflat(layers[l].at("b_sq_grad"), layer.b_sq_grad);
    unflat(layers[l].at("b_sq_update"), layer.b_sq_update);
  }
  return model;
}

}  // namespace metaul
