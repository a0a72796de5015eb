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

#ifndef DQSEL_LINMODELS_H_
#define DQSEL_LINMODELS_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dqsel/embeddings.h"

namespace dqsel {

// Dense row-major double matrix of probe inputs.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  FeatureMatrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}
  FeatureMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  // Rows of `m` at `indices`, widened to double.
  static FeatureMatrix FromEmbeddings(const EmbeddingMatrix& m,
                                      std::span<const std::size_t> indices);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::span<const double> Row(std::size_t i) const {
    return {data_.data() + i * cols_, cols_};
  }
  std::span<double> Row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  double& at(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  FeatureMatrix Select(std::span<const std::size_t> indices) const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

enum class ModelKind { kLogReg, kSvm };

std::string_view ModelKindName(ModelKind kind);

struct TrainConfig {
  double learning_rate = 0.1;
  int epochs = 200;
  double l2 = 1e-4;
  std::uint64_t seed = 0;

  void Validate() const;
};

// Weights are num_labels x (dim + 1), bias in the last column. Labels are
// positions in label_order; ties in prediction go to the lowest position.
struct LinearModel {
  ModelKind kind = ModelKind::kLogReg;
  std::size_t dim = 0;
  std::vector<std::string> label_order;
  std::vector<double> weights;

  std::size_t num_labels() const { return label_order.size(); }
  std::string ToJson() const;
};

// Multinomial logistic regression: full-batch gradient descent from zero
// weights on mean softmax cross-entropy + (l2/2)||W||^2.
// y holds positions in label_order. Throws DimMismatch or SingleClassInput.
LinearModel TrainLogReg(const FeatureMatrix& x, std::span<const int> y,
                        std::vector<std::string> label_order,
                        const TrainConfig& cfg);

// One-vs-rest linear SVM: per-example subgradient steps on
// hinge + (l2/2)||w_c||^2, visiting examples in one seed-shuffled order that
// is reused every epoch.
LinearModel TrainSvm(const FeatureMatrix& x, std::span<const int> y,
                     std::vector<std::string> label_order, const TrainConfig& cfg);

// String-label conveniences; label_order becomes the sorted distinct labels.
LinearModel TrainLogReg(const FeatureMatrix& x, std::span<const std::string> y,
                        const TrainConfig& cfg);
LinearModel TrainSvm(const FeatureMatrix& x, std::span<const std::string> y,
                     const TrainConfig& cfg);

// Positions in label_order. Throws DimMismatch.
std::vector<int> Predict(const LinearModel& m, const FeatureMatrix& x);
std::vector<std::string> PredictLabels(const LinearModel& m, const FeatureMatrix& x);

// Objectives and their gradients over a flat weight vector laid out like
// LinearModel::weights. Exposed for gradient checking.
double LogRegLoss(std::span<const double> weights, const FeatureMatrix& x,
                  std::span<const int> y, std::size_t num_labels, double l2);
std::vector<double> LogRegGradient(std::span<const double> weights,
                                   const FeatureMatrix& x, std::span<const int> y,
                                   std::size_t num_labels, double l2);

// Sum over classes of mean one-vs-rest hinge loss + (l2/2)||W||^2.
double SvmObjective(std::span<const double> weights, const FeatureMatrix& x,
                    std::span<const int> y, std::size_t num_labels, double l2);
// Subgradient taking 0 for the hinge at margin exactly 1.
std::vector<double> SvmSubgradient(std::span<const double> weights,
                                   const FeatureMatrix& x, std::span<const int> y,
                                   std::size_t num_labels, double l2);

double Accuracy(std::span<const int> predicted, std::span<const int> truth);

}  // namespace dqsel

#endif  // DQSEL_LINMODELS_H_
