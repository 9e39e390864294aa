#include "shiftlab/shift.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "shiftlab/error.hpp"
#include "shiftlab/parallel.hpp"
#include "shiftlab/rng.hpp"

namespace shiftlab::shift {

MultiDomainDataset from_feature_table(const FeatureTable& table) {
  std::map<int, Domain> by_subject;
  for (std::size_t r = 0; r < table.size(); ++r) {
    const auto& row = table[r];
    if (row.segment != Segment::task) continue;
    auto& dom = by_subject[row.subject];
    dom.id = row.subject;
    dom.features.append_row(row.features);
    dom.labels.push_back(row.condition);
    dom.source_rows.push_back(r);
  }
  MultiDomainDataset ds;
  for (auto& [id, dom] : by_subject) ds.domains.push_back(std::move(dom));
  return ds;
}

FeatureTable to_feature_table(const MultiDomainDataset& dataset) {
  FeatureTable table(dataset.dim());
  for (const auto& dom : dataset.domains)
    for (std::size_t r = 0; r < dom.features.rows(); ++r) {
      auto x = dom.features.row(r);
      table.add({dom.id, dom.labels[r], Segment::task, {x.begin(), x.end()}});
    }
  return table;
}

void validate(const MultiDomainDataset& dataset) {
  if (dataset.domains.empty()) throw Error(ErrorKind::empty_set, "dataset has no domains");
  const std::size_t d = dataset.dim();
  for (const auto& dom : dataset.domains) {
    if (dom.features.rows() == 0)
      throw Error(ErrorKind::empty_set, "domain " + std::to_string(dom.id) + " is empty");
    if (dom.features.cols() != d)
      throw Error(ErrorKind::dimension_mismatch, "domain " + std::to_string(dom.id) +
                                                     " has a different feature dimension");
    std::set<int> classes(dom.labels.begin(), dom.labels.end());
    if (classes.size() < 2)
      throw Error(ErrorKind::degenerate, "domain " + std::to_string(dom.id) + " has a single class");
  }
}

std::string_view to_string(ShiftKind kind) {
  return kind == ShiftKind::conditional ? "conditional" : "marginal";
}

double estimate_mu(const MultiDomainDataset& dataset, std::size_t i, std::size_t j, int k,
                   std::uint64_t seed) {
  if (i >= dataset.size() || j >= dataset.size())
    throw Error(ErrorKind::configuration, "domain index out of range");
  const auto& di = dataset.domains[i];
  const auto& dj = dataset.domains[j];
  if (di.features.rows() == 0 || dj.features.rows() == 0)
    throw Error(ErrorKind::empty_set, "estimate_mu on an empty domain");

  if (i != j) {
    const auto model = classify::knn_fit(dj.features, dj.labels, k);
    return classify::error_rate(classify::knn_predict(model, di.features), di.labels);
  }

  // Within-domain disagreement on disjoint halves.
  const std::size_t n = di.features.rows();
  if (n < 2) throw Error(ErrorKind::insufficient_rows, "domain " + std::to_string(di.id) +
                                                           " needs 2 rows for a held-out split");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Engine rng = make_engine({seed, i, i});
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t half = n / 2;
  std::vector<std::size_t> train(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(half));
  std::vector<std::size_t> test(order.begin() + static_cast<std::ptrdiff_t>(half), order.end());
  classify::Labels y_train, y_test;
  for (auto r : train) y_train.push_back(di.labels[r]);
  for (auto r : test) y_test.push_back(di.labels[r]);
  const auto model = classify::knn_fit(select_rows(di.features, train), y_train, k);
  return classify::error_rate(classify::knn_predict(model, select_rows(di.features, test)), y_test);
}

Disparity disparity_matrix(const MultiDomainDataset& dataset, int k, std::uint64_t seed) {
  validate(dataset);
  const std::size_t m = dataset.size();
  Disparity out{Matrix(m, m), Matrix(m, m)};
  parallel_for(m * m, [&](std::size_t idx) {
    out.mu(idx / m, idx % m) = estimate_mu(dataset, idx / m, idx % m, k, seed);
  });
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) out.d(i, j) = std::min(out.mu(i, j), out.mu(j, i));
  return out;
}

double rescaled_frobenius(const Matrix& m) {
  if (m.rows() == 0) return 0.0;
  double sum = 0.0;
  for (double v : m.data()) sum += v * v;
  return std::sqrt(sum) / static_cast<double>(m.rows());
}

ShiftEstimate conditional_shift(const Matrix& d, const EstimatorConfig& config) {
  return {rescaled_frobenius(d), ShiftKind::conditional, d, config};
}

double pairwise_domain_score(const MultiDomainDataset& dataset, std::size_t i, std::size_t j,
                             const classify::ForestConfig& forest, int folds, std::uint64_t seed) {
  if (i == j) throw Error(ErrorKind::configuration, "pairwise domain score needs two distinct domains");
  if (i >= dataset.size() || j >= dataset.size())
    throw Error(ErrorKind::configuration, "domain index out of range");
  const auto& a = dataset.domains[i];
  const auto& b = dataset.domains[j];
  const std::size_t n = std::min(a.features.rows(), b.features.rows());
  if (n == 0) throw Error(ErrorKind::degenerate, "cannot pool an empty domain");

  Engine rng = make_engine({seed, i, j, 1});
  auto pick = [&](const Domain& dom) {
    std::vector<std::size_t> rows(dom.features.rows());
    std::iota(rows.begin(), rows.end(), 0);
    if (rows.size() > n) {
      std::shuffle(rows.begin(), rows.end(), rng);
      rows.resize(n);
      std::sort(rows.begin(), rows.end());
    }
    return rows;
  };
  const auto rows_a = pick(a);
  const auto rows_b = pick(b);

  Matrix pooled(2 * n, a.features.cols());
  classify::Labels pseudo(2 * n);
  for (std::size_t r = 0; r < n; ++r) {
    std::copy_n(a.features.row(rows_a[r]).begin(), pooled.cols(), pooled.row(r).begin());
    std::copy_n(b.features.row(rows_b[r]).begin(), pooled.cols(), pooled.row(n + r).begin());
    pseudo[r] = 0;
    pseudo[n + r] = 1;
  }
  // A point present in both domains must not sit in the training folds while
  // its twin is tested, or the forest learns to predict the opposite domain.
  std::map<std::vector<double>, int> distinct;
  std::vector<int> groups(2 * n);
  for (std::size_t r = 0; r < 2 * n; ++r) {
    auto x = pooled.row(r);
    groups[r] = distinct.emplace(std::vector<double>(x.begin(), x.end()),
                                 static_cast<int>(distinct.size()))
                    .first->second;
  }
  if (distinct.size() == 2 * n) groups.clear();
  return classify::kfold_cv(pooled, pseudo, folds, forest, derive_seed({seed, i, j}), groups).mean;
}

Matrix marginal_matrix(const MultiDomainDataset& dataset, const EstimatorConfig& config) {
  validate(dataset);
  const std::size_t m = dataset.size();
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j) pairs.emplace_back(i, j);
  std::vector<double> scores(pairs.size());
  parallel_for(pairs.size(), [&](std::size_t p) {
    scores[p] = pairwise_domain_score(dataset, pairs[p].first, pairs[p].second, config.forest,
                                      config.folds, config.seed);
  });

  Matrix h(m, m);
  for (std::size_t i = 0; i < m; ++i) h(i, i) = config.marginal_diagonal;
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const double v = config.encoding == MarginalEncoding::accuracy ? scores[p] : 1.0 - scores[p];
    h(pairs[p].first, pairs[p].second) = v;
    h(pairs[p].second, pairs[p].first) = v;
  }
  return h;
}

ShiftEstimate marginal_shift(const Matrix& h, const EstimatorConfig& config) {
  return {rescaled_frobenius(h), ShiftKind::marginal, h, config};
}

std::vector<double> per_subject_disparity(const Matrix& avg_d) {
  const std::size_t m = avg_d.rows();
  std::vector<double> out(m, 0.0);
  if (m < 2) return out;
  for (std::size_t j = 0; j < m; ++j) {
    double sum = 0.0;
    for (std::size_t i = 0; i < m; ++i)
      if (i != j) sum += avg_d(i, j);
    out[j] = sum / static_cast<double>(m - 1);
  }
  return out;
}

}  // namespace shiftlab::shift
