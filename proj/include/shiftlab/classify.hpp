#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "shiftlab/matrix.hpp"

namespace shiftlab::classify {

using Labels = std::vector<int>;

// ---------------------------------------------------------------------------
// k-nearest neighbours (Euclidean)

struct KnnConfig {
  int k = 1;
};

struct KnnModel {
  int k = 1;
  Matrix features;
  Labels labels;
};

KnnModel knn_fit(const Matrix& features, const Labels& labels, int k);

// Majority vote among the k nearest training rows. Distance ties keep the
// earlier training row; vote ties go to the smallest label.
Labels knn_predict(const KnnModel& model, const Matrix& queries);

// ---------------------------------------------------------------------------
// Random forest (CART, Gini impurity, bootstrap, sqrt(d) features per split)

struct ForestConfig {
  int n_trees = 20;
  // 0 means ceil(sqrt(d)).
  int max_features = 0;
  int min_samples_split = 2;
};

struct TreeNode {
  // Internal nodes: feature >= 0, rows with x[feature] <= threshold go left.
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  // Leaves: per-class counts of the bootstrap rows that reached them.
  std::vector<int> class_counts;
  int prediction = 0;  // class index
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  int predict_index(std::span<const double> x) const;
};

struct ForestModel {
  std::vector<Tree> trees;
  std::vector<int> classes;  // ascending label values; trees predict indices
  std::size_t dim = 0;
  std::uint64_t seed = 0;
};

ForestModel forest_fit(const Matrix& features, const Labels& labels, const ForestConfig& config,
                       std::uint64_t seed);

// Majority vote across trees; ties go to the smallest label.
Labels forest_predict(const ForestModel& model, const Matrix& queries);

// ---------------------------------------------------------------------------
// Evaluation

double accuracy(const Labels& predicted, const Labels& truth);
double error_rate(const Labels& predicted, const Labels& truth);

using ModelConfig = std::variant<KnnConfig, ForestConfig>;

struct CvResult {
  std::vector<double> fold_accuracies;
  double mean = 0.0;
  double std = 0.0;  // population
  bool stratified = true;
};

// Fold assignment (fold index per row). Stratified when every class has at
// least `k_folds` rows; `stratified` reports which path was taken.
std::vector<int> make_folds(const Labels& labels, int k_folds, std::uint64_t seed, bool* stratified);

// Rows sharing a group id always land in the same fold. Groups are stratified
// by the label of their first row.
std::vector<int> make_group_folds(const Labels& labels, const std::vector<int>& groups,
                                  int k_folds, std::uint64_t seed, bool* stratified);

// Non-empty `groups` switches fold assignment to make_group_folds.
CvResult kfold_cv(const Matrix& features, const Labels& labels, int k_folds,
                  const ModelConfig& model, std::uint64_t seed,
                  const std::vector<int>& groups = {});

}  // namespace shiftlab::classify
