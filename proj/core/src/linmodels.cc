// Copyright 2026 The dqsel Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "dqsel/linmodels.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "dqsel/error.h"
#include "dqsel/rng.h"
#include "json_util.h"

namespace dqsel {

namespace {

void CheckInputs(const FeatureMatrix& x, std::span<const int> y,
                 std::size_t num_labels) {
  if (x.rows() != y.size() || x.rows() == 0) {
    throw Error(ErrorCode::kDimMismatch,
                std::to_string(x.rows()) + " rows vs " + std::to_string(y.size()) +
                    " labels");
  }
  std::set<int> distinct;
  for (int label : y) {
    if (label < 0 || static_cast<std::size_t>(label) >= num_labels) {
      throw Error(ErrorCode::kDimMismatch, "label index out of range");
    }
    distinct.insert(label);
  }
  if (distinct.size() < 2) {
    throw Error(ErrorCode::kSingleClassInput, "training labels contain one class");
  }
}

// Row scores s_c = w_c . x + b_c.
void Scores(std::span<const double> weights, std::span<const double> row,
            std::size_t num_labels, std::vector<double>& out) {
  std::size_t stride = row.size() + 1;
  out.assign(num_labels, 0.0);
  for (std::size_t c = 0; c < num_labels; ++c) {
    const double* w = weights.data() + c * stride;
    double s = w[row.size()];
    for (std::size_t j = 0; j < row.size(); ++j) s += w[j] * row[j];
    out[c] = s;
  }
}

// Softmax in place; returns log-sum-exp.
double SoftmaxInPlace(std::vector<double>& scores) {
  double max = *std::max_element(scores.begin(), scores.end());
  double sum = 0.0;
  for (double& s : scores) {
    s = std::exp(s - max);
    sum += s;
  }
  for (double& s : scores) s /= sum;
  return max + std::log(sum);
}

std::vector<int> EncodeLabels(std::span<const std::string> y,
                              std::vector<std::string>& label_order) {
  std::set<std::string> distinct(y.begin(), y.end());
  label_order.assign(distinct.begin(), distinct.end());
  std::vector<int> encoded;
  encoded.reserve(y.size());
  for (const auto& label : y) {
    auto it = std::lower_bound(label_order.begin(), label_order.end(), label);
    encoded.push_back(static_cast<int>(it - label_order.begin()));
  }
  return encoded;
}

}  // namespace

FeatureMatrix::FeatureMatrix(std::size_t rows, std::size_t cols,
                             std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw Error(ErrorCode::kDimMismatch, "feature data size != rows * cols");
  }
}

FeatureMatrix FeatureMatrix::FromEmbeddings(const EmbeddingMatrix& m,
                                            std::span<const std::size_t> indices) {
  FeatureMatrix out(indices.size(), m.dim());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    auto src = m.Row(indices[r]);
    std::copy(src.begin(), src.end(), out.Row(r).begin());
  }
  return out;
}

FeatureMatrix FeatureMatrix::Select(std::span<const std::size_t> indices) const {
  FeatureMatrix out(indices.size(), cols_);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    auto src = Row(indices[r]);
    std::copy(src.begin(), src.end(), out.Row(r).begin());
  }
  return out;
}

std::string_view ModelKindName(ModelKind kind) {
  return kind == ModelKind::kLogReg ? "logreg" : "svm";
}

void TrainConfig::Validate() const {
  if (!(learning_rate > 0.0)) {
    throw Error(ErrorCode::kInvalidConfig, "learning_rate must be > 0");
  }
  if (epochs < 1) throw Error(ErrorCode::kInvalidConfig, "epochs must be >= 1");
  if (!(l2 >= 0.0)) throw Error(ErrorCode::kInvalidConfig, "l2 must be >= 0");
}

std::string LinearModel::ToJson() const {
  internal::Json j;
  j["kind"] = ModelKindName(kind);
  j["dim"] = dim;
  j["label_order"] = label_order;
  j["weights"] = weights;
  return internal::Dump(j);
}

double LogRegLoss(std::span<const double> weights, const FeatureMatrix& x,
                  std::span<const int> y, std::size_t num_labels, double l2) {
  std::vector<double> scores;
  double loss = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    Scores(weights, x.Row(i), num_labels, scores);
    double max = *std::max_element(scores.begin(), scores.end());
    double sum = 0.0;
    for (double s : scores) sum += std::exp(s - max);
    loss += max + std::log(sum) - scores[static_cast<std::size_t>(y[i])];
  }
  loss /= static_cast<double>(x.rows());
  double norm = 0.0;
  for (double w : weights) norm += w * w;
  return loss + 0.5 * l2 * norm;
}

std::vector<double> LogRegGradient(std::span<const double> weights,
                                   const FeatureMatrix& x, std::span<const int> y,
                                   std::size_t num_labels, double l2) {
  std::size_t stride = x.cols() + 1;
  std::vector<double> grad(weights.size(), 0.0);
  std::vector<double> probs;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto row = x.Row(i);
    Scores(weights, row, num_labels, probs);
    SoftmaxInPlace(probs);
    probs[static_cast<std::size_t>(y[i])] -= 1.0;
    for (std::size_t c = 0; c < num_labels; ++c) {
      double* g = grad.data() + c * stride;
      double delta = probs[c];
      for (std::size_t j = 0; j < row.size(); ++j) g[j] += delta * row[j];
      g[row.size()] += delta;
    }
  }
  double inv_n = 1.0 / static_cast<double>(x.rows());
  for (std::size_t k = 0; k < grad.size(); ++k) {
    grad[k] = grad[k] * inv_n + l2 * weights[k];
  }
  return grad;
}

double SvmObjective(std::span<const double> weights, const FeatureMatrix& x,
                    std::span<const int> y, std::size_t num_labels, double l2) {
  std::vector<double> scores;
  double loss = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    Scores(weights, x.Row(i), num_labels, scores);
    for (std::size_t c = 0; c < num_labels; ++c) {
      double target = static_cast<int>(c) == y[i] ? 1.0 : -1.0;
      loss += std::max(0.0, 1.0 - target * scores[c]);
    }
  }
  loss /= static_cast<double>(x.rows());
  double norm = 0.0;
  for (double w : weights) norm += w * w;
  return loss + 0.5 * l2 * norm;
}

std::vector<double> SvmSubgradient(std::span<const double> weights,
                                   const FeatureMatrix& x, std::span<const int> y,
                                   std::size_t num_labels, double l2) {
  std::size_t stride = x.cols() + 1;
  std::vector<double> grad(weights.size(), 0.0);
  std::vector<double> scores;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto row = x.Row(i);
    Scores(weights, row, num_labels, scores);
    for (std::size_t c = 0; c < num_labels; ++c) {
      double target = static_cast<int>(c) == y[i] ? 1.0 : -1.0;
      if (target * scores[c] >= 1.0) continue;
      double* g = grad.data() + c * stride;
      for (std::size_t j = 0; j < row.size(); ++j) g[j] -= target * row[j];
      g[row.size()] -= target;
    }
  }
  double inv_n = 1.0 / static_cast<double>(x.rows());
  for (std::size_t k = 0; k < grad.size(); ++k) {
    grad[k] = grad[k] * inv_n + l2 * weights[k];
  }
  return grad;
}

LinearModel TrainLogReg(const FeatureMatrix& x, std::span<const int> y,
                        std::vector<std::string> label_order,
                        const TrainConfig& cfg) {
  cfg.Validate();
  CheckInputs(x, y, label_order.size());
  LinearModel model;
  model.kind = ModelKind::kLogReg;
  model.dim = x.cols();
  model.label_order = std::move(label_order);
  model.weights.assign(model.num_labels() * (x.cols() + 1), 0.0);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<double> grad =
        LogRegGradient(model.weights, x, y, model.num_labels(), cfg.l2);
    for (std::size_t k = 0; k < grad.size(); ++k) {
      model.weights[k] -= cfg.learning_rate * grad[k];
    }
  }
  return model;
}

LinearModel TrainSvm(const FeatureMatrix& x, std::span<const int> y,
                     std::vector<std::string> label_order, const TrainConfig& cfg) {
  cfg.Validate();
  CheckInputs(x, y, label_order.size());
  LinearModel model;
  model.kind = ModelKind::kSvm;
  model.dim = x.cols();
  model.label_order = std::move(label_order);
  std::size_t stride = x.cols() + 1;
  std::size_t num_labels = model.num_labels();
  model.weights.assign(num_labels * stride, 0.0);

  std::vector<std::size_t> order(x.rows());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(DeriveSeed(cfg.seed, 0x5f3));
  rng.Shuffle(order);

  double lr = cfg.learning_rate;
  double shrink = 1.0 - lr * cfg.l2;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i : order) {
      auto row = x.Row(i);
      for (std::size_t c = 0; c < num_labels; ++c) {
        double* w = model.weights.data() + c * stride;
        double score = w[row.size()];
        for (std::size_t j = 0; j < row.size(); ++j) score += w[j] * row[j];
        double target = static_cast<int>(c) == y[i] ? 1.0 : -1.0;
        bool violated = target * score < 1.0;
        for (std::size_t j = 0; j <= row.size(); ++j) w[j] *= shrink;
        if (violated) {
          for (std::size_t j = 0; j < row.size(); ++j) w[j] += lr * target * row[j];
          w[row.size()] += lr * target;
        }
      }
    }
  }
  return model;
}

LinearModel TrainLogReg(const FeatureMatrix& x, std::span<const std::string> y,
                        const TrainConfig& cfg) {
  std::vector<std::string> order;
  std::vector<int> encoded = EncodeLabels(y, order);
  return TrainLogReg(x, encoded, std::move(order), cfg);
}

LinearModel TrainSvm(const FeatureMatrix& x, std::span<const std::string> y,
                     const TrainConfig& cfg) {
  std::vector<std::string> order;
  std::vector<int> encoded = EncodeLabels(y, order);
  return TrainSvm(x, encoded, std::move(order), cfg);
}

std::vector<int> Predict(const LinearModel& m, const FeatureMatrix& x) {
  if (x.cols() != m.dim) {
    throw Error(ErrorCode::kDimMismatch, "model dim " + std::to_string(m.dim) +
                                             " vs input dim " + std::to_string(x.cols()));
  }
  std::vector<int> out;
  out.reserve(x.rows());
  std::vector<double> scores;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    Scores(m.weights, x.Row(i), m.num_labels(), scores);
    std::size_t best = 0;
    for (std::size_t c = 1; c < scores.size(); ++c) {
      if (scores[c] > scores[best]) best = c;
    }
    out.push_back(static_cast<int>(best));
  }
  return out;
}

std::vector<std::string> PredictLabels(const LinearModel& m, const FeatureMatrix& x) {
  std::vector<std::string> out;
  for (int p : Predict(m, x)) out.push_back(m.label_order[static_cast<std::size_t>(p)]);
  return out;
}

double Accuracy(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size()) {
    throw Error(ErrorCode::kDimMismatch, "prediction and truth lengths differ");
  }
  if (truth.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) correct += predicted[i] == truth[i];
  return static_cast<double>(correct) / static_cast<double>(truth.size());
}

}  // namespace dqsel
