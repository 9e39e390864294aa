#include "shiftlab/classify.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "shiftlab/error.hpp"
#include "shiftlab/rng.hpp"

namespace shiftlab::classify {

namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

// Most frequent value; ties go to the smallest.
int majority(const std::vector<int>& votes) {
  std::map<int, int> counts;
  for (int v : votes) ++counts[v];
  int best = 0, best_count = -1;
  for (const auto& [label, count] : counts)
    if (count > best_count) best = label, best_count = count;
  return best;
}

}  // namespace

KnnModel knn_fit(const Matrix& features, const Labels& labels, int k) {
  if (features.rows() != labels.size())
    throw Error(ErrorKind::dimension_mismatch, "feature rows and labels differ in length");
  if (k < 1 || static_cast<std::size_t>(k) > features.rows())
    throw Error(ErrorKind::configuration, "k = " + std::to_string(k) + " needs 1 <= k <= " +
                                              std::to_string(features.rows()) + " training rows");
  return KnnModel{k, features, labels};
}

Labels knn_predict(const KnnModel& model, const Matrix& queries) {
  Labels out;
  if (queries.rows() == 0) return out;
  if (queries.cols() != model.features.cols())
    throw Error(ErrorKind::dimension_mismatch, "query dimension " + std::to_string(queries.cols()) +
                                                   " differs from training dimension " +
                                                   std::to_string(model.features.cols()));
  const std::size_t n = model.features.rows();
  const auto k = static_cast<std::size_t>(model.k);
  out.reserve(queries.rows());
  std::vector<std::pair<double, std::size_t>> dist(n);
  std::vector<int> votes(k);
  for (std::size_t q = 0; q < queries.rows(); ++q) {
    auto x = queries.row(q);
    if (k == 1) {
      std::size_t best = 0;
      double best_d = squared_distance(x, model.features.row(0));
      for (std::size_t i = 1; i < n; ++i) {
        const double d = squared_distance(x, model.features.row(i));
        if (d < best_d) best_d = d, best = i;
      }
      out.push_back(model.labels[best]);
      continue;
    }
    for (std::size_t i = 0; i < n; ++i) dist[i] = {squared_distance(x, model.features.row(i)), i};
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
    for (std::size_t j = 0; j < k; ++j) votes[j] = model.labels[dist[j].second];
    out.push_back(majority(votes));
  }
  return out;
}

// ---------------------------------------------------------------------------

int Tree::predict_index(std::span<const double> x) const {
  int node = 0;
  while (nodes[node].feature >= 0)
    node = x[nodes[node].feature] <= nodes[node].threshold ? nodes[node].left : nodes[node].right;
  return nodes[node].prediction;
}

namespace {

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& x, const std::vector<int>& y, int n_classes, int max_features,
              int min_samples_split, Engine& rng)
      : x_(x), y_(y), n_classes_(n_classes), max_features_(max_features),
        min_samples_split_(min_samples_split), rng_(rng), features_(x.cols()) {
    std::iota(features_.begin(), features_.end(), 0);
  }

  Tree build(std::vector<std::size_t> rows) {
    rows_ = std::move(rows);
    tree_.nodes.clear();
    grow(0, rows_.size());
    return std::move(tree_);
  }

 private:
  int grow(std::size_t begin, std::size_t end) {
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();

    std::vector<int> counts(n_classes_, 0);
    for (std::size_t i = begin; i < end; ++i) ++counts[y_[rows_[i]]];
    const std::size_t n = end - begin;
    const bool pure = std::count_if(counts.begin(), counts.end(), [](int c) { return c > 0; }) <= 1;

    int feature = -1;
    double threshold = 0.0;
    if (!pure && n >= static_cast<std::size_t>(min_samples_split_))
      find_split(begin, end, counts, feature, threshold);

    if (feature < 0) {
      auto& leaf = tree_.nodes[id];
      leaf.prediction = static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
      leaf.class_counts = std::move(counts);
      return id;
    }

    auto mid = std::partition(rows_.begin() + static_cast<std::ptrdiff_t>(begin),
                              rows_.begin() + static_cast<std::ptrdiff_t>(end),
                              [&](std::size_t r) { return x_(r, feature) <= threshold; });
    const auto split = static_cast<std::size_t>(mid - rows_.begin());
    const int left = grow(begin, split);
    const int right = grow(split, end);
    auto& node = tree_.nodes[id];
    node.feature = feature;
    node.threshold = threshold;
    node.left = left;
    node.right = right;
    return id;
  }

  // Scans features in a random order. At least max_features are examined; the
  // scan continues past that only while no valid split has been found.
  void find_split(std::size_t begin, std::size_t end, const std::vector<int>& parent_counts,
                  int& best_feature, double& best_threshold) {
    const std::size_t n = end - begin;
    const std::size_t d = features_.size();
    double best_score = -1.0;
    std::vector<int> left(n_classes_), right(n_classes_);

    for (std::size_t tried = 0; tried < d; ++tried) {
      if (tried >= static_cast<std::size_t>(max_features_) && best_feature >= 0) break;
      std::uniform_int_distribution<std::size_t> pick(tried, d - 1);
      std::swap(features_[tried], features_[pick(rng_)]);
      const int f = features_[tried];

      values_.clear();
      for (std::size_t i = begin; i < end; ++i) values_.emplace_back(x_(rows_[i], f), y_[rows_[i]]);
      std::sort(values_.begin(), values_.end());
      if (values_.front().first == values_.back().first) continue;

      std::fill(left.begin(), left.end(), 0);
      right = parent_counts;
      double left_sq = 0.0, right_sq = 0.0;
      for (int c : right) right_sq += static_cast<double>(c) * c;
      for (std::size_t i = 0; i + 1 < n; ++i) {
        const int c = values_[i].second;
        left_sq += 2.0 * left[c] + 1.0;
        right_sq -= 2.0 * right[c] - 1.0;
        ++left[c];
        --right[c];
        if (values_[i].first == values_[i + 1].first) continue;
        const double nl = static_cast<double>(i + 1);
        const double nr = static_cast<double>(n - i - 1);
        // Minimising weighted Gini impurity == maximising this.
        const double score = left_sq / nl + right_sq / nr;
        if (score > best_score) {
          best_score = score;
          best_feature = f;
          double t = 0.5 * (values_[i].first + values_[i + 1].first);
          if (!(t < values_[i + 1].first)) t = values_[i].first;
          best_threshold = t;
        }
      }
    }
  }

  const Matrix& x_;
  const std::vector<int>& y_;
  int n_classes_;
  int max_features_;
  int min_samples_split_;
  Engine& rng_;
  std::vector<int> features_;
  std::vector<std::size_t> rows_;
  std::vector<std::pair<double, int>> values_;
  Tree tree_;
};

}  // namespace

ForestModel forest_fit(const Matrix& features, const Labels& labels, const ForestConfig& config,
                       std::uint64_t seed) {
  if (features.rows() != labels.size())
    throw Error(ErrorKind::dimension_mismatch, "feature rows and labels differ in length");
  if (config.n_trees < 1) throw Error(ErrorKind::configuration, "n_trees must be >= 1");
  if (features.rows() == 0 || features.cols() == 0)
    throw Error(ErrorKind::degenerate, "cannot fit a forest on an empty table");

  ForestModel model;
  model.classes = labels;
  std::sort(model.classes.begin(), model.classes.end());
  model.classes.erase(std::unique(model.classes.begin(), model.classes.end()), model.classes.end());
  if (model.classes.size() < 2)
    throw Error(ErrorKind::degenerate, "forest training data has a single class");
  model.dim = features.cols();
  model.seed = seed;

  std::vector<int> y(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i)
    y[i] = static_cast<int>(std::lower_bound(model.classes.begin(), model.classes.end(), labels[i]) -
                            model.classes.begin());

  const int d = static_cast<int>(features.cols());
  int mtry = config.max_features > 0
                 ? std::min(config.max_features, d)
                 : static_cast<int>(std::ceil(std::sqrt(static_cast<double>(d))));
  const std::size_t n = features.rows();
  for (int t = 0; t < config.n_trees; ++t) {
    Engine rng = make_engine({seed, static_cast<std::uint64_t>(t)});
    std::uniform_int_distribution<std::size_t> draw(0, n - 1);
    std::vector<std::size_t> sample(n);
    for (auto& s : sample) s = draw(rng);
    TreeBuilder builder(features, y, static_cast<int>(model.classes.size()), mtry,
                        std::max(2, config.min_samples_split), rng);
    model.trees.push_back(builder.build(std::move(sample)));
  }
  return model;
}

Labels forest_predict(const ForestModel& model, const Matrix& queries) {
  Labels out;
  if (queries.rows() == 0) return out;
  if (queries.cols() != model.dim)
    throw Error(ErrorKind::dimension_mismatch, "query dimension " + std::to_string(queries.cols()) +
                                                   " differs from training dimension " +
                                                   std::to_string(model.dim));
  std::vector<int> votes(model.classes.size());
  out.reserve(queries.rows());
  for (std::size_t q = 0; q < queries.rows(); ++q) {
    std::fill(votes.begin(), votes.end(), 0);
    for (const auto& tree : model.trees) ++votes[tree.predict_index(queries.row(q))];
    // Classes are ascending, so max_element's first-maximum rule is the
    // smallest-label tie-break.
    out.push_back(model.classes[std::max_element(votes.begin(), votes.end()) - votes.begin()]);
  }
  return out;
}

// ---------------------------------------------------------------------------

// Accuracy is derived from the error rate so that the two sum to exactly 1.
double error_rate(const Labels& predicted, const Labels& truth) {
  if (predicted.size() != truth.size())
    throw Error(ErrorKind::dimension_mismatch, "prediction and truth lengths differ");
  if (truth.empty()) throw Error(ErrorKind::empty_set, "error rate of an empty prediction");
  std::size_t misses = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) misses += predicted[i] != truth[i];
  return static_cast<double>(misses) / static_cast<double>(truth.size());
}

double accuracy(const Labels& predicted, const Labels& truth) {
  return 1.0 - error_rate(predicted, truth);
}

std::vector<int> make_folds(const Labels& labels, int k_folds, std::uint64_t seed, bool* stratified) {
  const std::size_t n = labels.size();
  if (k_folds < 2) throw Error(ErrorKind::configuration, "need at least 2 folds");
  if (n < static_cast<std::size_t>(k_folds))
    throw Error(ErrorKind::insufficient_rows, std::to_string(n) + " rows cannot fill " +
                                                  std::to_string(k_folds) + " folds");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < n; ++i) by_class[labels[i]].push_back(i);
  bool strat = true;
  for (const auto& [label, rows] : by_class)
    if (rows.size() < static_cast<std::size_t>(k_folds)) strat = false;
  if (stratified) *stratified = strat;

  Engine rng(seed);
  std::vector<int> fold(n, 0);
  std::size_t counter = 0;
  if (strat) {
    for (auto& [label, rows] : by_class) {
      std::shuffle(rows.begin(), rows.end(), rng);
      for (std::size_t r : rows) fold[r] = static_cast<int>(counter++ % static_cast<std::size_t>(k_folds));
    }
  } else {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t r : order) fold[r] = static_cast<int>(counter++ % static_cast<std::size_t>(k_folds));
  }
  return fold;
}

std::vector<int> make_group_folds(const Labels& labels, const std::vector<int>& groups,
                                  int k_folds, std::uint64_t seed, bool* stratified) {
  if (groups.size() != labels.size())
    throw Error(ErrorKind::dimension_mismatch, "group ids and labels differ in length");
  if (k_folds < 2) throw Error(ErrorKind::configuration, "need at least 2 folds");
  // Distinct groups in order of first appearance, bucketed by label.
  std::map<int, std::size_t> group_index;
  std::vector<std::vector<std::size_t>> members;
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto [it, fresh] = group_index.emplace(groups[i], members.size());
    if (fresh) {
      members.emplace_back();
      by_class[labels[i]].push_back(it->second);
    }
    members[it->second].push_back(i);
  }
  if (members.size() < static_cast<std::size_t>(k_folds))
    throw Error(ErrorKind::insufficient_rows, std::to_string(members.size()) +
                                                  " groups cannot fill " + std::to_string(k_folds) +
                                                  " folds");
  bool strat = true;
  for (const auto& [label, gs] : by_class)
    if (gs.size() < static_cast<std::size_t>(k_folds)) strat = false;
  if (stratified) *stratified = strat;

  Engine rng(seed);
  std::vector<int> fold(labels.size(), 0);
  std::size_t counter = 0;
  auto assign = [&](const std::vector<std::size_t>& order) {
    for (std::size_t g : order) {
      const int f = static_cast<int>(counter++ % static_cast<std::size_t>(k_folds));
      for (std::size_t r : members[g]) fold[r] = f;
    }
  };
  if (strat) {
    for (auto& [label, gs] : by_class) {
      std::shuffle(gs.begin(), gs.end(), rng);
      assign(gs);
    }
  } else {
    std::vector<std::size_t> order(members.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    assign(order);
  }
  return fold;
}

CvResult kfold_cv(const Matrix& features, const Labels& labels, int k_folds,
                  const ModelConfig& model, std::uint64_t seed, const std::vector<int>& groups) {
  if (features.rows() != labels.size())
    throw Error(ErrorKind::dimension_mismatch, "feature rows and labels differ in length");
  CvResult result;
  const std::uint64_t fold_seed = derive_seed({seed, 0xf01d});
  const auto fold = groups.empty()
                        ? make_folds(labels, k_folds, fold_seed, &result.stratified)
                        : make_group_folds(labels, groups, k_folds, fold_seed, &result.stratified);

  for (int f = 0; f < k_folds; ++f) {
    std::vector<std::size_t> train, test;
    for (std::size_t i = 0; i < labels.size(); ++i) (fold[i] == f ? test : train).push_back(i);
    const Matrix x_train = select_rows(features, train);
    const Matrix x_test = select_rows(features, test);
    Labels y_train, y_test;
    for (auto i : train) y_train.push_back(labels[i]);
    for (auto i : test) y_test.push_back(labels[i]);

    Labels predicted;
    if (const auto* knn = std::get_if<KnnConfig>(&model)) {
      predicted = knn_predict(knn_fit(x_train, y_train, knn->k), x_test);
    } else {
      const auto& forest = std::get<ForestConfig>(model);
      predicted = forest_predict(
          forest_fit(x_train, y_train, forest, derive_seed({seed, static_cast<std::uint64_t>(f)})), x_test);
    }
    result.fold_accuracies.push_back(accuracy(predicted, y_test));
  }

  const double k = static_cast<double>(k_folds);
  result.mean = std::accumulate(result.fold_accuracies.begin(), result.fold_accuracies.end(), 0.0) / k;
  double var = 0.0;
  for (double a : result.fold_accuracies) var += (a - result.mean) * (a - result.mean);
  result.std = std::sqrt(var / k);
  return result;
}

}  // namespace shiftlab::classify
