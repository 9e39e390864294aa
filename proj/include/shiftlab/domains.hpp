#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "shiftlab/matrix.hpp"
#include "shiftlab/shift.hpp"

namespace shiftlab::domains {

// Gaussian(mean, scale * I) marginal. Class label is 1 on the positive side of
// the hyperplane normal . x + offset = 0, then flipped with probability flip_rate.
struct DomainSpec {
  std::vector<double> mean;
  double scale = 1.0;  // covariance scale (variance per axis)
  std::vector<double> normal;
  double offset = 0.0;
  double flip_rate = 0.0;
  std::size_t n = 300;
  std::uint64_t seed = 0;
  int id = -1;  // subject id; -1 means the position in the list

  void validate() const;
  int boundary_label(std::span<const double> x) const;
};

shift::MultiDomainDataset generate_domains(const std::vector<DomainSpec>& specs,
                                           std::uint64_t master_seed);

// Probability that a noisy label from spec_i and a noisy label from spec_j
// disagree on the same point x ~ D_i, given boundary disagreement mass q:
// q (1 - r) + (1 - q) r with r = rho_i (1 - rho_j) + rho_j (1 - rho_i).
double compose_flip_disagreement(double q, double rho_i, double rho_j);

// Monte-Carlo estimate of the boundary disagreement mass under D_i.
double boundary_disagreement(const DomainSpec& on, const DomainSpec& other, std::size_t n_mc,
                             std::uint64_t seed);

// min over both directions of the composed disagreement.
double true_disagreement(const DomainSpec& spec_i, const DomainSpec& spec_j,
                         std::size_t n_mc = 100000, std::uint64_t seed = 0);

// Monte-Carlo accuracy of the Bayes classifier separating the two marginals
// (equal priors).
double bayes_separability(const DomainSpec& spec_i, const DomainSpec& spec_j,
                          std::size_t n_mc = 100000, std::uint64_t seed = 0);

struct OracleTruth {
  Matrix disagreement;  // diagonal = composed flip disagreement of a domain with itself
  Matrix separability;  // diagonal = 0.5
  double conditional_shift = 0.0;
  double marginal_shift = 0.0;
};

OracleTruth oracle_truth(const std::vector<DomainSpec>& specs, std::size_t n_mc,
                         std::uint64_t seed);

struct AffineMap {
  std::vector<double> scale;
  std::vector<double> offset;
};

// Domain i's features become scale_i * x + offset_i (elementwise).
shift::MultiDomainDataset affine_distort(const shift::MultiDomainDataset& dataset,
                                         const std::vector<AffineMap>& maps);

}  // namespace shiftlab::domains
