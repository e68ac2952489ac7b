#include "qfl/refmodel.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "qfl/error.hpp"
#include "qfl/random.hpp"

namespace qfl::refmodel {

namespace {

// Softmax of logits in place.
void softmax(std::vector<double>& z) {
  const double m = *std::max_element(z.begin(), z.end());
  double total = 0.0;
  for (double& v : z) {
    v = std::exp(v - m);
    total += v;
  }
  for (double& v : z) v /= total;
}

}  // namespace

BaselineModel BaselineModel::train(const EncodedDataset& dataset, const TrainConfig& config,
                                   std::size_t num_classes) {
  if (dataset.empty()) throw ArgumentError("cannot fine-tune on an empty dataset");
  dataset.validate();
  if (num_classes < 2) throw ArgumentError("need at least two classes");
  for (ClassId y : dataset.labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= num_classes) {
      throw ArgumentError("label out of range for baseline model");
    }
  }

  const auto d = static_cast<Eigen::Index>(dataset.dim());
  const auto k = static_cast<Eigen::Index>(num_classes);
  const auto n = static_cast<double>(dataset.size());

  BaselineModel model;
  model.train_config = config;
  model.weights.resize(d, k);
  model.bias = Vector::Zero(k);
  Rng rng(config.seed);
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) model.weights(i, j) = 0.01 * standard_normal(rng);
  }

  Matrix onehot = Matrix::Zero(static_cast<Eigen::Index>(dataset.size()), k);
  for (std::size_t r = 0; r < dataset.size(); ++r) {
    onehot(static_cast<Eigen::Index>(r), dataset.labels[r]) = 1.0;
  }

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    Matrix logits = dataset.features * model.weights;
    logits.rowwise() += model.bias.transpose();
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
      const double m = logits.row(r).maxCoeff();
      logits.row(r) = (logits.row(r).array() - m).exp();
      logits.row(r) /= logits.row(r).sum();
    }
    const Matrix residual = logits - onehot;
    model.weights -= config.learning_rate * (dataset.features.transpose() * residual) / n;
    model.bias -= config.learning_rate * residual.colwise().sum().transpose() / n;
  }
  return model;
}

std::vector<double> BaselineModel::predict_proba(std::span<const double> features) const {
  if (static_cast<Eigen::Index>(features.size()) != weights.rows()) {
    throw ArgumentError("baseline feature count mismatch");
  }
  std::vector<double> z(static_cast<std::size_t>(weights.cols()));
  for (Eigen::Index j = 0; j < weights.cols(); ++j) {
    double acc = bias[j];
    for (Eigen::Index i = 0; i < weights.rows(); ++i) {
      acc += features[static_cast<std::size_t>(i)] * weights(i, j);
    }
    z[static_cast<std::size_t>(j)] = acc;
  }
  softmax(z);
  return z;
}

double BaselineModel::cross_entropy(const EncodedDataset& dataset) const {
  if (dataset.empty()) throw ArgumentError("cross-entropy requires a non-empty dataset");
  double total = 0.0;
  for (std::size_t r = 0; r < dataset.size(); ++r) {
    const auto p = predict_proba(dataset.row(r));
    total -= std::log(std::max(p[static_cast<std::size_t>(dataset.labels[r])], kLossFloor));
  }
  return total / static_cast<double>(dataset.size());
}

double BaselineModel::accuracy(const EncodedDataset& dataset) const {
  if (dataset.empty()) throw ArgumentError("accuracy requires a non-empty dataset");
  std::size_t hits = 0;
  for (std::size_t r = 0; r < dataset.size(); ++r) {
    const auto p = predict_proba(dataset.row(r));
    const auto arg = static_cast<ClassId>(std::max_element(p.begin(), p.end()) - p.begin());
    if (arg == dataset.labels[r]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(dataset.size());
}

std::vector<ReplayRecord> parse_replay(std::string_view text) {
  std::vector<ReplayRecord> out;
  std::istringstream lines{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "replay line " + std::to_string(line_no) + ": ";
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(where + e.what(), line_no);
    }
    if (!j.is_object() || !j.contains("device_id") || !j["device_id"].is_number_integer()) {
      throw ParseError(where + "missing integer 'device_id'", line_no);
    }
    if (!j.contains("losses") || !j["losses"].is_array() || j["losses"].empty()) {
      throw ParseError(where + "missing non-empty 'losses' array", line_no);
    }
    ReplayRecord rec;
    rec.device_id = j["device_id"].get<int>();
    for (const auto& v : j["losses"]) {
      if (!v.is_number()) throw ParseError(where + "loss is not a number", line_no);
      const double x = v.get<double>();
      if (!std::isfinite(x) || x <= 0.0) {
        throw ParseError(where + "losses must be finite and positive", line_no);
      }
      rec.losses.push_back(x);
    }
    if (j.contains("f1") && !j["f1"].is_null()) {
      if (!j["f1"].is_number()) throw ParseError(where + "'f1' is not a number", line_no);
      const double f1 = j["f1"].get<double>();
      if (!std::isfinite(f1) || f1 < 0.0 || f1 > 1.0) {
        throw ParseError(where + "'f1' must be in [0, 1]", line_no);
      }
      rec.f1 = f1;
    }
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<ReplayRecord> load_replay(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open replay file '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_replay(buf.str());
}

RefLossProvider RefLossProvider::classical(TrainConfig config) {
  RefLossProvider p;
  p.kind_ = ProviderKind::ClassicalBaseline;
  p.config_ = config;
  return p;
}

RefLossProvider RefLossProvider::replay(ReplayRecord record) {
  if (record.losses.empty()) throw ArgumentError("replay record has no losses");
  for (double v : record.losses) {
    if (!std::isfinite(v) || v <= 0.0) throw ArgumentError("replay losses must be positive");
  }
  RefLossProvider p;
  p.kind_ = ProviderKind::Replay;
  p.record_ = std::move(record);
  return p;
}

FineTuneMetrics RefLossProvider::fine_tune(const EncodedDataset& dataset) {
  if (dataset.empty()) throw ArgumentError("cannot fine-tune on an empty dataset");
  fine_tuned_ = true;
  if (kind_ == ProviderKind::Replay) {
    return {record_.losses.front(), record_.f1.value_or(0.0)};
  }
  model_ = BaselineModel::train(dataset, config_);
  return {std::max(model_->cross_entropy(dataset), kLossFloor), model_->accuracy(dataset)};
}

double RefLossProvider::eval_loss(const EncodedDataset& held_out, std::size_t round) const {
  if (round == 0) throw ArgumentError("rounds are 1-based");
  if (kind_ == ProviderKind::Replay) {
    const std::size_t i = std::min(round, record_.losses.size()) - 1;
    return record_.losses[i];
  }
  if (!model_) throw ArgumentError("eval_loss called before fine_tune");
  return std::max(model_->cross_entropy(held_out), kLossFloor);
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) {
    throw ArgumentError("KL divergence length mismatch (" + std::to_string(p.size()) + " vs " +
                        std::to_string(q.size()) + ")");
  }
  double sp = 0.0;
  double sq = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!(p[i] >= 0.0) || !(q[i] >= 0.0)) {
      throw ArgumentError("KL divergence inputs must be non-negative");
    }
    sp += p[i];
    sq += q[i];
  }
  if (std::abs(sp - 1.0) > 1e-9 || std::abs(sq - 1.0) > 1e-9) {
    throw ArgumentError("KL divergence inputs must sum to 1");
  }
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    kl += p[i] * std::log(p[i] / std::max(q[i], kLossFloor));
  }
  return std::max(kl, 0.0);
}

}  // namespace qfl::refmodel
