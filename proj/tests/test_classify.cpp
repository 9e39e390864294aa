#include <algorithm>
#include <random>
#include <numeric>
#include <set>

#include "doctest.h"
#include "shiftlab/classify.hpp"
#include "shiftlab/error.hpp"

using namespace shiftlab;
using namespace shiftlab::classify;

namespace {

Matrix matrix(std::initializer_list<std::vector<double>> rows) {
  Matrix m;
  for (const auto& r : rows) m.append_row(r);
  return m;
}

// Two isotropic clusters whose centres are `separation` standard deviations apart.
struct Clusters {
  Matrix x;
  Labels y;
};

Clusters two_clusters(std::size_t n, std::size_t dim, double separation, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Clusters c;
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % 2);
    std::vector<double> row(dim);
    for (auto& v : row) v = g(rng);
    row[0] += label * separation;
    c.x.append_row(row);
    c.y.push_back(label);
  }
  return c;
}

Tree leaf(int class_index) {
  Tree t;
  TreeNode node;
  node.prediction = class_index;
  t.nodes.push_back(node);
  return t;
}

}  // namespace

TEST_CASE("1-NN basics") {
  const auto x = matrix({{0, 0}, {1, 1}});
  const auto model = knn_fit(x, {4, 9}, 1);
  CHECK(knn_predict(model, matrix({{0.1, 0.1}})) == Labels{4});
  CHECK(knn_predict(model, x) == Labels{4, 9});
  CHECK(knn_predict(model, Matrix(0, 2)).empty());
  CHECK_THROWS_AS(knn_predict(model, matrix({{1, 2, 3}})), Error);
  CHECK_THROWS_AS(knn_fit(x, {4, 9}, 3), Error);
}

TEST_CASE("k-NN tie-breaks and duplicates") {
  // Query equidistant from both training points: the vote ties, smallest label wins.
  const auto model = knn_fit(matrix({{-1}, {1}}), {1, 0}, 2);
  CHECK(knn_predict(model, matrix({{0}})) == Labels{0});
  // Duplicates count as separate neighbours.
  const auto dup = knn_fit(matrix({{0}, {0}, {0.5}}), {1, 1, 0}, 3);
  CHECK(knn_predict(dup, matrix({{0.45}})) == Labels{1});
}

TEST_CASE("1-NN resubstitution is perfect on distinct points") {
  const auto c = two_clusters(150, 3, 0.5, 11);
  CHECK(accuracy(knn_predict(knn_fit(c.x, c.y, 1), c.x), c.y) == 1.0);
}

TEST_CASE("k-NN separates well separated clusters") {
  const auto train = two_clusters(200, 4, 8.0, 1);
  const auto test = two_clusters(200, 4, 8.0, 2);
  for (int k : {1, 3, 5})
    CHECK(accuracy(knn_predict(knn_fit(train.x, train.y, k), test.x), test.y) >= 0.95);
}

TEST_CASE("k-NN matches a brute-force majority vote") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix x;
    Labels y;
    for (int i = 0; i < 40; ++i) {
      x.append_row(std::vector<double>{u(rng), u(rng)});
      y.push_back(static_cast<int>(rng() % 3));
    }
    const int k = 1 + static_cast<int>(rng() % 7);
    const auto model = knn_fit(x, y, k);
    for (int q = 0; q < 10; ++q) {
      const std::vector<double> p{u(rng), u(rng)};
      std::vector<std::pair<double, std::size_t>> d;
      for (std::size_t i = 0; i < x.rows(); ++i) {
        const double dx = x(i, 0) - p[0], dy = x(i, 1) - p[1];
        d.emplace_back(dx * dx + dy * dy, i);
      }
      std::sort(d.begin(), d.end());
      int votes[3] = {0, 0, 0};
      for (int j = 0; j < k; ++j) ++votes[y[d[j].second]];
      const int expected = static_cast<int>(std::max_element(votes, votes + 3) - votes);
      Matrix qm;
      qm.append_row(p);
      REQUIRE(knn_predict(model, qm) == Labels{expected});
    }
  }
}

TEST_CASE("accuracy and error rate") {
  CHECK(accuracy({0, 1, 1, 0}, {0, 1, 1, 0}) == 1.0);
  CHECK(accuracy({0, 1, 1, 0}, {1, 0, 0, 1}) == 0.0);
  CHECK(accuracy({0, 1, 1, 1}, {0, 1, 1, 0}) == 0.75);
  CHECK(error_rate({0, 1, 1, 1}, {0, 1, 1, 0}) == 0.25);
  CHECK_THROWS_AS(accuracy({}, {}), Error);
  CHECK_THROWS_AS(accuracy({1}, {1, 0}), Error);
  std::mt19937 rng(3);
  for (int t = 0; t < 50; ++t) {
    Labels p(1 + rng() % 30), q(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = rng() % 2, q[i] = rng() % 2;
    CHECK(accuracy(p, q) == 1.0 - error_rate(p, q));
  }
}

TEST_CASE("forest vote and tie-break") {
  ForestModel m;
  m.classes = {0, 1};
  m.dim = 1;
  for (int i = 0; i < 10; ++i) m.trees.push_back(leaf(1));
  for (int i = 0; i < 10; ++i) m.trees.push_back(leaf(0));
  const auto q = matrix({{0.0}});
  CHECK(forest_predict(m, q) == Labels{0});
  m.trees.push_back(leaf(1));
  CHECK(forest_predict(m, q) == Labels{1});
  std::reverse(m.trees.begin(), m.trees.end());
  CHECK(forest_predict(m, q) == Labels{1});
  ForestModel single{{leaf(1)}, {3, 8}, 1, 0};
  CHECK(forest_predict(single, q) == Labels{8});
  CHECK_THROWS_AS(forest_predict(single, matrix({{1, 2}})), Error);
}

TEST_CASE("forest training") {
  const auto c = two_clusters(200, 5, 4.0, 5);
  const auto model = forest_fit(c.x, c.y, {}, 42);
  CHECK(model.trees.size() == 20);
  CHECK(model.classes == std::vector<int>{0, 1});
  const auto test = two_clusters(200, 5, 4.0, 6);
  CHECK(accuracy(forest_predict(model, test.x), test.y) >= 0.95);

  // Deterministic given the seed.
  CHECK(forest_predict(forest_fit(c.x, c.y, {}, 42), test.x) == forest_predict(model, test.x));

  // Tree predictions stay within the label set; leaves reachable from the root.
  for (const auto& tree : model.trees) {
    std::set<int> seen{0};
    for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
      const auto& n = tree.nodes[i];
      if (n.feature >= 0) {
        seen.insert(n.left);
        seen.insert(n.right);
      } else {
        CHECK(n.prediction >= 0);
        CHECK(n.prediction < 2);
      }
    }
    CHECK(seen.size() == tree.nodes.size());
  }

  CHECK_THROWS_AS(forest_fit(c.x, Labels(200, 1), {}, 1), Error);
}

TEST_CASE("forest overfits noise labels but cross-validates at chance") {
  auto c = two_clusters(300, 4, 0.0, 8);
  std::mt19937_64 rng(12);
  for (auto& y : c.y) y = static_cast<int>(rng() % 2);
  const auto model = forest_fit(c.x, c.y, {}, 3);
  CHECK(accuracy(forest_predict(model, c.x), c.y) >= 0.9);
  const auto cv = kfold_cv(c.x, c.y, 5, ForestConfig{}, 3);
  CHECK(cv.mean == doctest::Approx(0.5).epsilon(0.2));
}

TEST_CASE("fold assignment partitions the rows") {
  Labels y;
  for (int i = 0; i < 100; ++i) y.push_back(i < 30 ? 0 : 1);
  bool strat = false;
  const auto folds = make_folds(y, 5, 77, &strat);
  CHECK(strat);
  std::vector<int> size(5, 0), zeros(5, 0);
  for (std::size_t i = 0; i < y.size(); ++i) {
    REQUIRE(folds[i] >= 0);
    REQUIRE(folds[i] < 5);
    ++size[folds[i]];
    zeros[folds[i]] += y[i] == 0;
  }
  for (int f = 0; f < 5; ++f) {
    CHECK(size[f] == 20);
    CHECK(zeros[f] == 6);
  }
  CHECK(make_folds(y, 5, 77, nullptr) == folds);

  // A class smaller than the fold count forces the unstratified path.
  Labels rare(20, 0);
  rare[3] = 1;
  make_folds(rare, 5, 1, &strat);
  CHECK_FALSE(strat);
  CHECK_THROWS_AS(make_folds(Labels(3, 0), 5, 1, nullptr), Error);
}

TEST_CASE("stratified folds keep class proportions within one row") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 30; ++trial) {
    const int k = 2 + static_cast<int>(rng() % 6);
    Labels y;
    const int n = k * 3 + static_cast<int>(rng() % 80);
    for (int i = 0; i < n; ++i) y.push_back(static_cast<int>(rng() % 3));
    bool strat = false;
    const auto folds = make_folds(y, k, rng(), &strat);
    if (!strat) continue;
    for (int label = 0; label < 3; ++label) {
      std::vector<int> count(k, 0);
      for (int i = 0; i < n; ++i) count[folds[i]] += y[i] == label;
      const auto [lo, hi] = std::minmax_element(count.begin(), count.end());
      CHECK(*hi - *lo <= 1);
    }
  }
}

TEST_CASE("cross-validation") {
  const auto c = two_clusters(100, 3, 10.0, 4);
  const auto knn = kfold_cv(c.x, c.y, 5, KnnConfig{1}, 9);
  CHECK(knn.fold_accuracies.size() == 5);
  CHECK(knn.mean >= 0.99);
  double sum = 0;
  for (double a : knn.fold_accuracies) sum += a;
  CHECK(knn.mean == doctest::Approx(sum / 5));

  const auto rf = kfold_cv(c.x, c.y, 5, ForestConfig{}, 9);
  CHECK(rf.mean >= 0.99);
  CHECK(kfold_cv(c.x, c.y, 5, ForestConfig{}, 9).fold_accuracies == rf.fold_accuracies);

  auto shuffled = c;
  std::mt19937_64 rng(5);
  std::shuffle(shuffled.y.begin(), shuffled.y.end(), rng);
  CHECK(std::abs(kfold_cv(shuffled.x, shuffled.y, 5, KnnConfig{1}, 9).mean - 0.5) <= 0.1);
}

TEST_CASE("grouped folds keep each group together") {
  Labels y;
  std::vector<int> groups;
  for (int g = 0; g < 40; ++g)
    for (int label : {0, 1}) {
      y.push_back(label);
      groups.push_back(g);
    }
  bool strat = true;
  const auto folds = make_group_folds(y, groups, 5, 3, &strat);
  std::vector<int> size(5, 0);
  for (std::size_t i = 0; i < y.size(); i += 2) {
    CHECK(folds[i] == folds[i + 1]);
    size[folds[i]] += 2;
  }
  for (int s : size) CHECK(s == 16);

  // Singleton groups reproduce the ordinary stratified assignment.
  std::vector<int> singles(y.size());
  std::iota(singles.begin(), singles.end(), 0);
  CHECK(make_group_folds(y, singles, 5, 3, nullptr) == make_folds(y, 5, 3, nullptr));
  CHECK_THROWS_AS(make_group_folds(y, std::vector<int>(y.size(), 0), 5, 3, nullptr), Error);
}

TEST_CASE("grouped cross-validation of twin rows sits at chance") {
  // Every point appears once per label: nothing separates the classes.
  const auto c = two_clusters(200, 3, 0.0, 31);
  Matrix x;
  Labels y;
  std::vector<int> groups;
  for (std::size_t r = 0; r < c.x.rows(); ++r)
    for (int label : {0, 1}) {
      x.append_row(c.x.row(r));
      y.push_back(label);
      groups.push_back(static_cast<int>(r));
    }
  CHECK(kfold_cv(x, y, 5, ForestConfig{}, 4, groups).mean == doctest::Approx(0.5).epsilon(0.1));
}
