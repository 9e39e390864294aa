#include "shiftlab/normalize.hpp"

#include <cmath>

#include "json.hpp"
#include "shiftlab/error.hpp"

namespace shiftlab::normalize {

std::string_view to_string(SchemeKind kind) {
  switch (kind) {
    case SchemeKind::none: return "none";
    case SchemeKind::whitening: return "whitening";
    case SchemeKind::baseline1: return "baseline1";
    case SchemeKind::baseline2: return "baseline2";
  }
  return "none";
}

SchemeKind parse_scheme(std::string_view text) {
  for (auto k : kAllSchemes)
    if (to_string(k) == text) return k;
  throw Error(ErrorKind::configuration, "unknown normalization scheme '" + std::string(text) + "'");
}

Segment source_segment(SchemeKind kind) {
  switch (kind) {
    case SchemeKind::baseline1: return Segment::baseline1;
    case SchemeKind::baseline2: return Segment::baseline2;
    default: return Segment::task;
  }
}

NormStats compute_norm_stats(const FeatureTable& features, int subject, const NormScheme& scheme) {
  NormStats stats;
  stats.subject = subject;
  stats.source_segment = source_segment(scheme.kind);
  const std::size_t d = features.dim();
  stats.beta.assign(d, 0.0);
  stats.gamma.assign(d, 0.0);

  std::size_t n = 0;
  for (const auto& r : features.rows()) {
    if (r.subject != subject || r.segment != stats.source_segment) continue;
    ++n;
    for (std::size_t f = 0; f < d; ++f) stats.beta[f] += r.features[f];
  }
  if (n == 0 && scheme.kind != SchemeKind::whitening && scheme.kind != SchemeKind::none)
    throw Error(ErrorKind::missing_baseline, "subject " + std::to_string(subject) + " has no " +
                                                 std::string(to_string(stats.source_segment)) +
                                                 " rows");
  if (n < 2)
    throw Error(ErrorKind::degenerate, "subject " + std::to_string(subject) + " has " +
                                           std::to_string(n) + " " +
                                           std::string(to_string(stats.source_segment)) +
                                           " rows; need at least 2 for statistics");
  for (auto& b : stats.beta) b /= static_cast<double>(n);

  // Second pass keeps the variance accurate for features with a large mean.
  for (const auto& r : features.rows()) {
    if (r.subject != subject || r.segment != stats.source_segment) continue;
    for (std::size_t f = 0; f < d; ++f) {
      const double dev = r.features[f] - stats.beta[f];
      stats.gamma[f] += dev * dev;
    }
  }
  for (auto& g : stats.gamma) g = std::sqrt(g / static_cast<double>(n));
  return stats;
}

std::map<int, NormStats> compute_all_stats(const FeatureTable& features, const NormScheme& scheme) {
  std::map<int, NormStats> out;
  if (scheme.kind == SchemeKind::none) return out;
  for (int s : features.subjects()) out.emplace(s, compute_norm_stats(features, s, scheme));
  return out;
}

FeatureTable apply_normalization(const FeatureTable& features,
                                 const std::map<int, NormStats>& stats,
                                 const NormScheme& scheme) {
  if (scheme.kind == SchemeKind::none) return features;
  if (scheme.denominator_exponent != 1 && scheme.denominator_exponent != 2)
    throw Error(ErrorKind::configuration, "denominator exponent must be 1 or 2");

  std::map<int, std::vector<double>> denominators;
  for (const auto& [subject, st] : stats) {
    if (st.beta.size() != features.dim() || st.gamma.size() != features.dim())
      throw Error(ErrorKind::dimension_mismatch, "stats dimension differs from the table");
    std::vector<double> den(st.gamma.size());
    for (std::size_t f = 0; f < den.size(); ++f) {
      const double g = st.gamma[f] > 0.0 ? st.gamma[f] : kGammaEpsilon;
      den[f] = scheme.denominator_exponent == 2 ? g * g : g;
    }
    denominators.emplace(subject, std::move(den));
  }

  FeatureTable out = features;
  for (auto& r : out.rows()) {
    auto it = stats.find(r.subject);
    if (it == stats.end())
      throw Error(ErrorKind::missing_stats, "no normalization stats for subject " + std::to_string(r.subject));
    const auto& den = denominators.at(r.subject);
    for (std::size_t f = 0; f < r.features.size(); ++f)
      r.features[f] = (r.features[f] - it->second.beta[f]) / den[f];
  }
  return out;
}

FeatureTable normalize(const FeatureTable& features, const NormScheme& scheme) {
  return apply_normalization(features, compute_all_stats(features, scheme), scheme);
}

std::string stats_to_json(const NormStats& stats, const NormScheme& scheme) {
  nlohmann::ordered_json j;
  j["subject"] = stats.subject;
  j["scheme"] = to_string(scheme.kind);
  j["denominator_exponent"] = scheme.denominator_exponent;
  j["source_segment"] = to_string(stats.source_segment);
  j["beta"] = stats.beta;
  j["gamma"] = stats.gamma;
  return j.dump();
}

}  // namespace shiftlab::normalize
