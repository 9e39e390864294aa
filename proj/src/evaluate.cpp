#include "shiftlab/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "json.hpp"
#include "shiftlab/error.hpp"
#include "shiftlab/parallel.hpp"
#include "shiftlab/rng.hpp"

namespace shiftlab::evaluate {

LosoSplit loso_split(const shift::MultiDomainDataset& dataset, std::size_t left_out,
                     std::size_t holdout_per_subject, std::uint64_t seed) {
  if (dataset.size() < 2) throw Error(ErrorKind::configuration, "LOSO needs at least 2 subjects");
  if (left_out >= dataset.size()) throw Error(ErrorKind::configuration, "left-out index out of range");

  LosoSplit split;
  split.left_out = left_out;
  for (std::size_t r = 0; r < dataset.domains[left_out].features.rows(); ++r)
    split.test.push_back({left_out, r});

  for (std::size_t d = 0; d < dataset.size(); ++d) {
    if (d == left_out) continue;
    const std::size_t n = dataset.domains[d].features.rows();
    if (n <= holdout_per_subject)
      throw Error(ErrorKind::insufficient_rows,
                  "subject " + std::to_string(dataset.domains[d].id) + " has " + std::to_string(n) +
                      " rows; hold-out of " + std::to_string(holdout_per_subject) + " needs more");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Engine rng = make_engine({seed, left_out, d});
    std::shuffle(order.begin(), order.end(), rng);
    std::sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(holdout_per_subject));
    std::sort(order.begin() + static_cast<std::ptrdiff_t>(holdout_per_subject), order.end());
    for (std::size_t k = 0; k < n; ++k)
      (k < holdout_per_subject ? split.holdout : split.train).push_back({d, order[k]});
  }
  return split;
}

double generalization_gap(double train_acc, double test_acc) { return std::abs(train_acc - test_acc); }

namespace {

void gather(const shift::MultiDomainDataset& ds, const std::vector<RowRef>& refs, Matrix& x,
            classify::Labels& y) {
  x = Matrix(refs.size(), ds.dim());
  y.resize(refs.size());
  for (std::size_t k = 0; k < refs.size(); ++k) {
    const auto& dom = ds.domains[refs[k].domain];
    auto src = dom.features.row(refs[k].row);
    std::copy(src.begin(), src.end(), x.row(k).begin());
    y[k] = dom.labels[refs[k].row];
  }
}

}  // namespace

std::vector<SubjectRun> run_loso(const shift::MultiDomainDataset& dataset,
                                 const classify::ForestConfig& forest,
                                 std::size_t holdout_per_subject, std::uint64_t seed) {
  std::vector<SubjectRun> runs(dataset.size());
  parallel_for(dataset.size(), [&](std::size_t lo) {
    const auto split = loso_split(dataset, lo, holdout_per_subject, derive_seed({seed, lo}));
    Matrix x_train, x_hold, x_test;
    classify::Labels y_train, y_hold, y_test;
    gather(dataset, split.train, x_train, y_train);
    gather(dataset, split.test, x_test, y_test);
    // Without a hold-out the source accuracy falls back to resubstitution.
    gather(dataset, split.holdout.empty() ? split.train : split.holdout, x_hold, y_hold);

    const auto model = classify::forest_fit(x_train, y_train, forest, derive_seed({seed, lo, 7}));
    SubjectRun& run = runs[lo];
    run.subject = dataset.domains[lo].id;
    run.train_acc = classify::accuracy(classify::forest_predict(model, x_hold), y_hold);
    run.test_acc = classify::accuracy(classify::forest_predict(model, x_test), y_test);
    run.gap = generalization_gap(run.train_acc, run.test_acc);
  });
  return runs;
}

std::string config_to_json(const ExperimentConfig& c) {
  nlohmann::ordered_json j;
  j["norm"] = normalize::to_string(c.scheme.kind);
  j["norm_exponent"] = c.scheme.denominator_exponent;
  j["k"] = c.k;
  j["trees_subject"] = c.trees_subject;
  j["trees_workload"] = c.trees_workload;
  j["folds"] = c.folds;
  j["reps"] = c.n_reps;
  j["subsample"] = c.subsample;
  j["holdout"] = c.holdout;
  j["seed"] = c.master_seed;
  j["marginal_diagonal"] = c.marginal_diagonal;
  j["marginal_encoding"] = c.encoding == shift::MarginalEncoding::accuracy ? "accuracy" : "error_rate";
  j["estimate_shift"] = c.estimate_shift;
  j["run_classification"] = c.run_classification;
  return j.dump();
}

FeatureTable subsample_task_rows(const FeatureTable& table, std::size_t per_group,
                                 std::uint64_t seed) {
  std::map<std::pair<int, int>, std::vector<std::size_t>> groups;
  for (std::size_t r = 0; r < table.size(); ++r)
    if (table[r].segment == Segment::task) groups[{table[r].subject, table[r].condition}].push_back(r);

  std::vector<bool> keep(table.size(), false);
  for (std::size_t r = 0; r < table.size(); ++r) keep[r] = table[r].segment != Segment::task;
  for (auto& [key, rows] : groups) {
    if (rows.size() < per_group)
      throw Error(ErrorKind::insufficient_rows,
                  "subject " + std::to_string(key.first) + " condition " + std::to_string(key.second) +
                      " has " + std::to_string(rows.size()) + " task rows; subsample needs " +
                      std::to_string(per_group));
    Engine rng = make_engine({seed, static_cast<std::uint64_t>(static_cast<std::int64_t>(key.first)),
                              static_cast<std::uint64_t>(static_cast<std::int64_t>(key.second))});
    std::shuffle(rows.begin(), rows.end(), rng);
    for (std::size_t k = 0; k < per_group; ++k) keep[rows[k]] = true;
  }

  FeatureTable out(table.dim());
  for (std::size_t r = 0; r < table.size(); ++r)
    if (keep[r]) out.add(table[r]);
  return out;
}

Repetition run_repetition(const FeatureTable& table, const ExperimentConfig& config, int rep) {
  const std::uint64_t rep_seed = derive_seed({config.master_seed, static_cast<std::uint64_t>(rep)});
  const FeatureTable sampled =
      config.subsample > 0 ? subsample_task_rows(table, config.subsample, derive_seed({rep_seed, 0}))
                           : table;
  const auto ds = shift::from_feature_table(normalize::normalize(sampled, config.scheme));

  Repetition out;
  out.index = rep;
  if (config.estimate_shift) {
    shift::EstimatorConfig est;
    est.k = config.k;
    est.forest.n_trees = config.trees_subject;
    est.folds = config.folds;
    est.marginal_diagonal = config.marginal_diagonal;
    est.encoding = config.encoding;
    est.seed = derive_seed({rep_seed, 2});
    out.disparity = shift::disparity_matrix(ds, config.k, derive_seed({rep_seed, 1})).d;
    out.marginal_matrix = shift::marginal_matrix(ds, est);
    out.conditional = shift::rescaled_frobenius(out.disparity);
    out.marginal = shift::rescaled_frobenius(out.marginal_matrix);
  }
  if (config.run_classification) {
    classify::ForestConfig forest;
    forest.n_trees = config.trees_workload;
    out.runs = run_loso(ds, forest, config.holdout, derive_seed({rep_seed, 3}));
  }
  return out;
}

MeanStd mean_std(const std::vector<double>& values) {
  MeanStd out;
  if (values.empty()) return out;
  const double n = static_cast<double>(values.size());
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double var = 0.0;
  for (double v : values) var += (v - out.mean) * (v - out.mean);
  out.std = std::sqrt(var / n);
  return out;
}

SchemeReport repeat_experiment(const FeatureTable& table, const ExperimentConfig& config) {
  if (config.n_reps < 1) throw Error(ErrorKind::configuration, "reps must be >= 1");
  if (config.folds < 2 || config.k < 1 || config.trees_subject < 1 || config.trees_workload < 1)
    throw Error(ErrorKind::configuration, "k, folds and tree counts must be positive (folds >= 2)");

  SchemeReport report;
  report.config = config;
  for (const auto& dom : shift::from_feature_table(table).domains) report.subjects.push_back(dom.id);
  if (report.subjects.empty()) throw Error(ErrorKind::empty_set, "feature table has no task rows");
  // Baseline rows are never subsampled, so their absence is reported before
  // any repetition runs.
  if (normalize::source_segment(config.scheme.kind) != Segment::task)
    normalize::compute_all_stats(table, config.scheme);

  report.repetitions.resize(static_cast<std::size_t>(config.n_reps));
  parallel_for(report.repetitions.size(), [&](std::size_t r) {
    report.repetitions[r] = run_repetition(table, config, static_cast<int>(r));
  });
  aggregate(report);
  return report;
}

void aggregate(SchemeReport& report) {
  const auto& reps = report.repetitions;
  const std::size_t m = report.subjects.size();
  report.per_subject.clear();

  if (report.config.run_classification) {
    std::vector<double> all_train, all_test, all_gap;
    for (std::size_t s = 0; s < m; ++s) {
      std::vector<double> train, test, gap;
      for (const auto& rep : reps) {
        train.push_back(rep.runs[s].train_acc);
        test.push_back(rep.runs[s].test_acc);
        gap.push_back(rep.runs[s].gap);
      }
      all_train.insert(all_train.end(), train.begin(), train.end());
      all_test.insert(all_test.end(), test.begin(), test.end());
      all_gap.insert(all_gap.end(), gap.begin(), gap.end());
      report.per_subject.push_back({report.subjects[s], mean_std(train), mean_std(test), mean_std(gap)});
    }
    report.overall = {-1, mean_std(all_train), mean_std(all_test), mean_std(all_gap)};
  }

  if (report.config.estimate_shift) {
    std::vector<double> cond, marg;
    report.disparity_avg = Matrix(m, m);
    report.marginal_avg = Matrix(m, m);
    for (const auto& rep : reps) {
      cond.push_back(rep.conditional);
      marg.push_back(rep.marginal);
      for (std::size_t k = 0; k < m * m; ++k) {
        report.disparity_avg.data()[k] += rep.disparity.data()[k];
        report.marginal_avg.data()[k] += rep.marginal_matrix.data()[k];
      }
    }
    const double n = static_cast<double>(reps.size());
    for (auto& v : report.disparity_avg.data()) v /= n;
    for (auto& v : report.marginal_avg.data()) v /= n;
    report.conditional = mean_std(cond);
    report.marginal = mean_std(marg);
    report.subject_disparity = shift::per_subject_disparity(report.disparity_avg);
  }
}

}  // namespace shiftlab::evaluate
