#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "shiftlab/feature_table.hpp"

namespace shiftlab::normalize {

enum class SchemeKind { none, whitening, baseline1, baseline2 };

std::string_view to_string(SchemeKind kind);
SchemeKind parse_scheme(std::string_view text);

inline constexpr SchemeKind kAllSchemes[] = {SchemeKind::none, SchemeKind::whitening,
                                             SchemeKind::baseline1, SchemeKind::baseline2};

// x' = (x - beta) / gamma^exponent. exponent 1 is the z-score; 2 divides by
// the variance.
struct NormScheme {
  SchemeKind kind = SchemeKind::none;
  int denominator_exponent = 1;
};

struct NormStats {
  int subject = 0;
  Segment source_segment = Segment::task;
  std::vector<double> beta;   // per-feature mean
  std::vector<double> gamma;  // per-feature population standard deviation
};

// Substituted for a zero standard deviation before division.
inline constexpr double kGammaEpsilon = 1e-12;

Segment source_segment(SchemeKind kind);

NormStats compute_norm_stats(const FeatureTable& features, int subject, const NormScheme& scheme);

// Stats for every subject in the table.
std::map<int, NormStats> compute_all_stats(const FeatureTable& features, const NormScheme& scheme);

FeatureTable apply_normalization(const FeatureTable& features,
                                 const std::map<int, NormStats>& stats,
                                 const NormScheme& scheme);

// compute_all_stats followed by apply_normalization.
FeatureTable normalize(const FeatureTable& features, const NormScheme& scheme);

std::string stats_to_json(const NormStats& stats, const NormScheme& scheme);

}  // namespace shiftlab::normalize
