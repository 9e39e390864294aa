#include "shiftlab/domains.hpp"

#include <cmath>

#include "shiftlab/error.hpp"
#include "shiftlab/parallel.hpp"
#include "shiftlab/rng.hpp"

namespace shiftlab::domains {

void DomainSpec::validate() const {
  if (mean.empty()) throw Error(ErrorKind::configuration, "domain spec has an empty mean");
  if (normal.size() != mean.size())
    throw Error(ErrorKind::configuration, "hyperplane normal and mean differ in dimension");
  double norm = 0.0;
  for (double v : normal) norm += v * v;
  if (!(norm > 0.0)) throw Error(ErrorKind::configuration, "hyperplane normal must be nonzero");
  if (!(scale > 0.0)) throw Error(ErrorKind::configuration, "covariance scale must be positive");
  if (!(flip_rate >= 0.0 && flip_rate <= 0.5))
    throw Error(ErrorKind::configuration, "flip rate must lie in [0, 0.5]");
  if (n == 0) throw Error(ErrorKind::configuration, "domain spec needs n >= 1");
}

int DomainSpec::boundary_label(std::span<const double> x) const {
  double s = offset;
  for (std::size_t k = 0; k < normal.size(); ++k) s += normal[k] * x[k];
  return s > 0.0 ? 1 : 0;
}

namespace {

void sample_point(const DomainSpec& spec, Engine& rng, std::normal_distribution<double>& normal,
                  std::span<double> out) {
  const double sd = std::sqrt(spec.scale);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = spec.mean[k] + sd * normal(rng);
}

}  // namespace

shift::MultiDomainDataset generate_domains(const std::vector<DomainSpec>& specs,
                                           std::uint64_t master_seed) {
  if (specs.empty()) throw Error(ErrorKind::configuration, "no domain specs");
  for (const auto& s : specs) {
    s.validate();
    if (s.mean.size() != specs.front().mean.size())
      throw Error(ErrorKind::configuration, "domain specs must share a dimension");
  }

  shift::MultiDomainDataset ds;
  ds.domains.resize(specs.size());
  parallel_for(specs.size(), [&](std::size_t i) {
    const auto& spec = specs[i];
    Engine rng = make_engine({master_seed, i, spec.seed});
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto& dom = ds.domains[i];
    dom.id = spec.id >= 0 ? spec.id : static_cast<int>(i);
    dom.features = Matrix(spec.n, spec.mean.size());
    dom.labels.resize(spec.n);
    dom.source_rows.resize(spec.n);
    for (std::size_t r = 0; r < spec.n; ++r) {
      auto x = dom.features.row(r);
      sample_point(spec, rng, normal, x);
      int label = spec.boundary_label(x);
      if (unit(rng) < spec.flip_rate) label = 1 - label;
      dom.labels[r] = label;
      dom.source_rows[r] = r;
    }
  });
  return ds;
}

double compose_flip_disagreement(double q, double rho_i, double rho_j) {
  const double r = rho_i * (1.0 - rho_j) + rho_j * (1.0 - rho_i);
  return q * (1.0 - r) + (1.0 - q) * r;
}

double boundary_disagreement(const DomainSpec& on, const DomainSpec& other, std::size_t n_mc,
                             std::uint64_t seed) {
  on.validate();
  other.validate();
  if (on.mean.size() != other.mean.size())
    throw Error(ErrorKind::configuration, "domain specs must share a dimension");
  if (n_mc == 0) throw Error(ErrorKind::configuration, "n_mc must be positive");
  Engine rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> x(on.mean.size());
  std::size_t differ = 0;
  for (std::size_t s = 0; s < n_mc; ++s) {
    sample_point(on, rng, normal, x);
    differ += on.boundary_label(x) != other.boundary_label(x);
  }
  return static_cast<double>(differ) / static_cast<double>(n_mc);
}

double true_disagreement(const DomainSpec& spec_i, const DomainSpec& spec_j, std::size_t n_mc,
                         std::uint64_t seed) {
  const double q_ij = boundary_disagreement(spec_i, spec_j, n_mc, derive_seed({seed, 0}));
  const double q_ji = boundary_disagreement(spec_j, spec_i, n_mc, derive_seed({seed, 1}));
  return std::min(compose_flip_disagreement(q_ij, spec_i.flip_rate, spec_j.flip_rate),
                  compose_flip_disagreement(q_ji, spec_j.flip_rate, spec_i.flip_rate));
}

double bayes_separability(const DomainSpec& spec_i, const DomainSpec& spec_j, std::size_t n_mc,
                          std::uint64_t seed) {
  spec_i.validate();
  spec_j.validate();
  if (spec_i.mean.size() != spec_j.mean.size())
    throw Error(ErrorKind::configuration, "domain specs must share a dimension");
  if (n_mc == 0) throw Error(ErrorKind::configuration, "n_mc must be positive");
  const double dim = static_cast<double>(spec_i.mean.size());
  auto log_density = [&](const DomainSpec& s, const std::vector<double>& x) {
    double sq = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) sq += (x[k] - s.mean[k]) * (x[k] - s.mean[k]);
    return -sq / (2.0 * s.scale) - 0.5 * dim * std::log(s.scale);
  };
  Engine rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> x(spec_i.mean.size());
  std::size_t correct = 0;
  for (std::size_t s = 0; s < n_mc; ++s) {
    // Equal likelihoods are assigned to domain i.
    sample_point(spec_i, rng, normal, x);
    correct += log_density(spec_i, x) >= log_density(spec_j, x);
    sample_point(spec_j, rng, normal, x);
    correct += log_density(spec_j, x) > log_density(spec_i, x);
  }
  return static_cast<double>(correct) / (2.0 * static_cast<double>(n_mc));
}

OracleTruth oracle_truth(const std::vector<DomainSpec>& specs, std::size_t n_mc,
                         std::uint64_t seed) {
  const std::size_t m = specs.size();
  OracleTruth truth{Matrix(m, m), Matrix(m, m, 0.5), 0.0, 0.0};
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i; j < m; ++j) pairs.emplace_back(i, j);
  parallel_for(pairs.size(), [&](std::size_t p) {
    const auto [i, j] = pairs[p];
    const double dis = true_disagreement(specs[i], specs[j], n_mc, derive_seed({seed, i, j}));
    truth.disagreement(i, j) = dis;
    truth.disagreement(j, i) = dis;
    if (i != j) {
      const double sep = bayes_separability(specs[i], specs[j], n_mc, derive_seed({seed, i, j, 2}));
      truth.separability(i, j) = sep;
      truth.separability(j, i) = sep;
    }
  });
  truth.conditional_shift = shift::rescaled_frobenius(truth.disagreement);
  truth.marginal_shift = shift::rescaled_frobenius(truth.separability);
  return truth;
}

shift::MultiDomainDataset affine_distort(const shift::MultiDomainDataset& dataset,
                                         const std::vector<AffineMap>& maps) {
  if (maps.size() != dataset.size())
    throw Error(ErrorKind::configuration, "one affine map per domain required");
  shift::MultiDomainDataset out = dataset;
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto& dom = out.domains[i];
    const auto& map = maps[i];
    if (map.scale.size() != dom.features.cols() || map.offset.size() != dom.features.cols())
      throw Error(ErrorKind::dimension_mismatch, "affine map dimension differs from the features");
    for (double s : map.scale)
      if (!(s > 0.0)) throw Error(ErrorKind::configuration, "affine scales must be positive");
    for (std::size_t r = 0; r < dom.features.rows(); ++r) {
      auto x = dom.features.row(r);
      for (std::size_t k = 0; k < x.size(); ++k) x[k] = map.scale[k] * x[k] + map.offset[k];
    }
  }
  return out;
}

}  // namespace shiftlab::domains
