#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "shiftlab/classify.hpp"
#include "shiftlab/feature_table.hpp"
#include "shiftlab/matrix.hpp"

namespace shiftlab::shift {

// One subject's labelled task data.
struct Domain {
  int id = 0;
  Matrix features;
  classify::Labels labels;
  // Row index in the FeatureTable the domain was built from, for provenance.
  std::vector<std::size_t> source_rows;
};

struct MultiDomainDataset {
  std::vector<Domain> domains;

  std::size_t size() const { return domains.size(); }
  std::size_t dim() const { return domains.empty() ? 0 : domains.front().features.cols(); }
};

// Groups the task rows of `table` by subject (ascending id). Baseline rows are
// ignored; condition is used as the class label.
MultiDomainDataset from_feature_table(const FeatureTable& table);

// Inverse of from_feature_table: task rows, subject = domain id.
FeatureTable to_feature_table(const MultiDomainDataset& dataset);

// Throws unless every domain is nonempty, has both classes and shares the
// feature dimension.
void validate(const MultiDomainDataset& dataset);

enum class ShiftKind { conditional, marginal };
std::string_view to_string(ShiftKind kind);

// How the marginal matrix stores pairwise domain-classification results.
enum class MarginalEncoding { accuracy, error_rate };

struct EstimatorConfig {
  int k = 1;
  classify::ForestConfig forest{};  // subject classifier, 20 trees
  int folds = 5;
  double marginal_diagonal = 0.5;
  MarginalEncoding encoding = MarginalEncoding::accuracy;
  std::uint64_t seed = 10;
};

struct ShiftEstimate {
  double value = 0.0;
  ShiftKind kind = ShiftKind::conditional;
  Matrix matrix;
  EstimatorConfig config;
};

// Fraction of domain i's rows whose label disagrees with a k-NN trained on
// domain j. For i == j the domain is split 50/50 (stream (seed, i, i)) and the
// model trained on one half is scored on the other.
double estimate_mu(const MultiDomainDataset& dataset, std::size_t i, std::size_t j, int k,
                   std::uint64_t seed);

struct Disparity {
  Matrix mu;  // mu(i, j): directed disagreement
  Matrix d;   // d(i, j) = min(mu(i, j), mu(j, i))
};

Disparity disparity_matrix(const MultiDomainDataset& dataset, int k, std::uint64_t seed);

// Frobenius norm divided by M, i.e. mapped onto [0, 1] for entries in [0, 1].
double rescaled_frobenius(const Matrix& m);

ShiftEstimate conditional_shift(const Matrix& d, const EstimatorConfig& config = {});

// Mean k-fold CV accuracy of a forest separating domain i (label 0) from
// domain j (label 1), after subsampling the larger side to the smaller.
double pairwise_domain_score(const MultiDomainDataset& dataset, std::size_t i, std::size_t j,
                             const classify::ForestConfig& forest, int folds, std::uint64_t seed);

Matrix marginal_matrix(const MultiDomainDataset& dataset, const EstimatorConfig& config);

ShiftEstimate marginal_shift(const Matrix& h, const EstimatorConfig& config = {});

// Column means excluding the diagonal entry.
std::vector<double> per_subject_disparity(const Matrix& avg_d);

}  // namespace shiftlab::shift
