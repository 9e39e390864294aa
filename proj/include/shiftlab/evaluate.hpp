#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "shiftlab/classify.hpp"
#include "shiftlab/feature_table.hpp"
#include "shiftlab/normalize.hpp"
#include "shiftlab/shift.hpp"

namespace shiftlab::evaluate {

struct RowRef {
  std::size_t domain = 0;
  std::size_t row = 0;
  bool operator==(const RowRef&) const = default;
  auto operator<=>(const RowRef&) const = default;
};

struct LosoSplit {
  std::size_t left_out = 0;  // domain index
  std::vector<RowRef> train;
  std::vector<RowRef> holdout;
  std::vector<RowRef> test;
};

// Every other domain contributes `holdout_per_subject` rows (drawn without
// replacement) to the source hold-out and the rest to training.
LosoSplit loso_split(const shift::MultiDomainDataset& dataset, std::size_t left_out,
                     std::size_t holdout_per_subject, std::uint64_t seed);

double generalization_gap(double train_acc, double test_acc);

struct SubjectRun {
  int subject = 0;
  double train_acc = 0.0;  // on the source hold-out
  double test_acc = 0.0;   // on the left-out subject
  double gap = 0.0;
};

std::vector<SubjectRun> run_loso(const shift::MultiDomainDataset& dataset,
                                 const classify::ForestConfig& forest,
                                 std::size_t holdout_per_subject, std::uint64_t seed);

struct ExperimentConfig {
  normalize::NormScheme scheme{};
  int k = 1;
  int trees_subject = 20;
  int trees_workload = 30;
  int folds = 5;
  int n_reps = 30;
  std::size_t subsample = 300;  // task rows per subject and condition; 0 keeps all
  std::size_t holdout = 200;
  std::uint64_t master_seed = 10;
  double marginal_diagonal = 0.5;
  shift::MarginalEncoding encoding = shift::MarginalEncoding::accuracy;
  bool estimate_shift = true;
  bool run_classification = true;
};

std::string config_to_json(const ExperimentConfig& config);

// Picks `per_group` task rows without replacement from every
// (subject, condition) group. Baseline rows are kept whole; row order is
// preserved.
FeatureTable subsample_task_rows(const FeatureTable& table, std::size_t per_group,
                                 std::uint64_t seed);

struct Repetition {
  int index = 0;
  double conditional = 0.0;
  double marginal = 0.0;
  Matrix disparity;
  Matrix marginal_matrix;
  std::vector<SubjectRun> runs;
};

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

MeanStd mean_std(const std::vector<double>& values);

struct SubjectSummary {
  int subject = 0;
  MeanStd train, test, gap;
};

struct SchemeReport {
  ExperimentConfig config;
  std::vector<int> subjects;
  std::vector<Repetition> repetitions;

  // Aggregates over repetitions.
  std::vector<SubjectSummary> per_subject;
  SubjectSummary overall;  // subject = -1
  MeanStd conditional, marginal;
  Matrix disparity_avg;
  Matrix marginal_avg;
  std::vector<double> subject_disparity;
};

// One repetition: subsample with stream (master, r), normalise, estimate
// shift on the task rows, run LOSO.
Repetition run_repetition(const FeatureTable& table, const ExperimentConfig& config, int rep);

SchemeReport repeat_experiment(const FeatureTable& table, const ExperimentConfig& config);

void aggregate(SchemeReport& report);

}  // namespace shiftlab::evaluate
