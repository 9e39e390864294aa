#include "commands.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "shiftlab/domains.hpp"
#include "shiftlab/error.hpp"
#include "shiftlab/normalize.hpp"
#include "shiftlab/parallel.hpp"
#include "shiftlab/report.hpp"
#include "shiftlab/rng.hpp"
#include "shiftlab/shift.hpp"

namespace shiftlab::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

json parse_json_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::parse, path.string() + ": " + e.what());
  }
}

template <class T>
void take(const json& j, const char* key, T& dst) {
  if (!j.contains(key)) return;
  try {
    dst = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::configuration, std::string("config field '") + key + "': " + e.what());
  }
}

template <class T>
void take(const std::optional<T>& flag, T& dst) {
  if (flag) dst = *flag;
}

void check_positive(const evaluate::ExperimentConfig& c) {
  if (c.k < 1 || c.trees_subject < 1 || c.trees_workload < 1 || c.folds < 2 || c.n_reps < 1)
    throw Error(ErrorKind::configuration, "k, tree counts and reps must be positive and folds >= 2");
  if (c.scheme.denominator_exponent != 1 && c.scheme.denominator_exponent != 2)
    throw Error(ErrorKind::configuration, "--norm-exponent must be 1 or 2");
}

std::vector<domains::DomainSpec> parse_domain_specs(const json& scenario) {
  std::vector<domains::DomainSpec> specs;
  try {
    for (const auto& d : scenario.at("domains")) {
      domains::DomainSpec s;
      s.mean = d.at("mean").get<std::vector<double>>();
      s.normal = d.at("normal").get<std::vector<double>>();
      take(d, "scale", s.scale);
      take(d, "offset", s.offset);
      take(d, "flip_rate", s.flip_rate);
      take(d, "n", s.n);
      take(d, "seed", s.seed);
      take(d, "id", s.id);
      specs.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::configuration, std::string("scenario: ") + e.what());
  }
  return specs;
}

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    rows.push_back(std::vector<double>(row.begin(), row.end()));
  }
  return rows;
}

void synth_scenario(const json& scenario, const fs::path& out_dir, const ResolvedConfig& config) {
  const auto specs = parse_domain_specs(scenario);
  std::uint64_t seed = config.experiment.master_seed;
  if (!config.seed_from_flag) take(scenario, "master_seed", seed);
  std::size_t n_mc = 100000;
  take(scenario, "n_mc", n_mc);

  const auto dataset = domains::generate_domains(specs, seed);
  const auto truth = domains::oracle_truth(specs, n_mc, derive_seed({seed, 0x7a}));

  json echo;
  echo["master_seed"] = seed;
  echo["n_mc"] = n_mc;
  fs::create_directories(out_dir);
  write_feature_csv(out_dir / "features.csv", shift::to_feature_table(dataset),
                    {"scenario: " + echo.dump()});

  json t = echo;
  t["disagreement"] = matrix_json(truth.disagreement);
  t["separability"] = matrix_json(truth.separability);
  t["conditional_shift"] = truth.conditional_shift;
  t["marginal_shift"] = truth.marginal_shift;
  report::write_file(out_dir / "truth.json", t.dump(2) + "\n");
}

std::vector<double> amplitudes(const json& subject, const char* key, std::size_t n_bands) {
  std::vector<double> a(n_bands, 0.0);
  take(subject, key, a);
  if (a.size() != n_bands)
    throw Error(ErrorKind::configuration, std::string("'") + key + "' needs one amplitude per band");
  return a;
}

void synth_eeg(const json& cfg, const fs::path& out_dir, const ResolvedConfig& config,
               bool with_features, const FeatureOptions& options) {
  signal::SyntheticEegConfig base;
  base.bands = config.bands;
  take(cfg, "rate_hz", base.rate_hz);
  take(cfg, "channels", base.channels);
  take(cfg, "noise", base.noise);
  if (cfg.contains("bands") && !config.bands_from_flag)
    base.bands = signal::parse_bands(cfg["bands"].get<std::string>());
  std::uint64_t seed = config.experiment.master_seed;
  if (!config.seed_from_flag) take(cfg, "seed", seed);
  double task_s = 600.0, baseline_s = 60.0;
  take(cfg, "task_duration_s", task_s);
  take(cfg, "baseline_duration_s", baseline_s);
  if (!cfg.contains("subjects") || !cfg["subjects"].is_array() || cfg["subjects"].empty())
    throw Error(ErrorKind::configuration, "EEG config needs a nonempty 'subjects' array");

  const fs::path raw_dir = out_dir / "raw";
  fs::create_directories(raw_dir);
  const std::size_t n_bands = base.bands.size();

  for (const auto& subj : cfg["subjects"]) {
    int id = 0;
    take(subj, "id", id);
    for (int condition : {kConditionLow, kConditionHigh}) {
      signal::SyntheticEegConfig rc = base;
      rc.subject = id;
      rc.condition = condition;
      rc.seed = derive_seed({seed, static_cast<std::uint64_t>(id), static_cast<std::uint64_t>(condition)});
      take(subj, "channel_gains", rc.channel_gains);
      if (baseline_s > 0) {
        rc.segments.push_back({Segment::baseline1, baseline_s, amplitudes(subj, "baseline1", n_bands)});
        rc.segments.push_back({Segment::baseline2, baseline_s, amplitudes(subj, "baseline2", n_bands)});
      }
      rc.segments.push_back({Segment::task, task_s,
                             amplitudes(subj, condition == kConditionLow ? "low" : "high", n_bands)});
      const auto rec = signal::generate_synthetic_eeg(rc);
      const std::string name = "s" + std::to_string(id) + (condition == kConditionLow ? "_low" : "_high");
      signal::write_recording(raw_dir / (name + ".json"), rec);
    }
  }
  if (with_features) cmd_features(raw_dir, out_dir / "features.csv", config, options);
}

}  // namespace

ResolvedConfig resolve_config(const std::optional<fs::path>& config_file, const Overrides& flags) {
  ResolvedConfig out;
  auto& c = out.experiment;
  if (const char* env = std::getenv("SHIFTLAB_SEED"); env && *env) {
    try {
      c.master_seed = std::stoull(env);
    } catch (const std::exception&) {
      throw Error(ErrorKind::configuration, std::string("SHIFTLAB_SEED='") + env + "' is not an integer");
    }
  }
  if (config_file) {
    const auto j = parse_json_file(*config_file);
    std::string norm(normalize::to_string(c.scheme.kind));
    take(j, "norm", norm);
    c.scheme.kind = normalize::parse_scheme(norm);
    take(j, "norm_exponent", c.scheme.denominator_exponent);
    take(j, "k", c.k);
    take(j, "trees_subject", c.trees_subject);
    take(j, "trees_workload", c.trees_workload);
    take(j, "folds", c.folds);
    take(j, "reps", c.n_reps);
    take(j, "subsample", c.subsample);
    take(j, "holdout", c.holdout);
    take(j, "seed", c.master_seed);
    if (j.contains("bands")) out.bands = signal::parse_bands(j["bands"].get<std::string>());
  }
  if (flags.norm) c.scheme.kind = normalize::parse_scheme(*flags.norm);
  take(flags.norm_exponent, c.scheme.denominator_exponent);
  take(flags.k, c.k);
  take(flags.trees_subject, c.trees_subject);
  take(flags.trees_workload, c.trees_workload);
  take(flags.folds, c.folds);
  take(flags.reps, c.n_reps);
  take(flags.subsample, c.subsample);
  take(flags.holdout, c.holdout);
  take(flags.seed, c.master_seed);
  out.seed_from_flag = flags.seed.has_value();
  if (flags.bands) {
    out.bands = signal::parse_bands(*flags.bands);
    out.bands_from_flag = true;
  }
  check_positive(c);
  return out;
}

std::string resolved_to_json(const ResolvedConfig& config) {
  json j = json::parse(evaluate::config_to_json(config.experiment));
  j["bands"] = signal::format_bands(config.bands);
  return j.dump();
}

FeatureTable recording_features(const signal::RawRecording& rec,
                                const std::vector<signal::BandSpec>& bands,
                                const FeatureOptions& options) {
  auto r = rec.rate_hz != options.target_rate_hz ? signal::downsample(rec, options.target_rate_hz) : rec;
  r = signal::bandpass_filter(r, options.low_hz, options.high_hz);
  return signal::band_power_features(signal::epoch(r, options.epoch_len_s, options.overlap_s), bands);
}

void cmd_synth(const fs::path& config_path, const fs::path& out_dir, const ResolvedConfig& config,
               bool with_features, const FeatureOptions& options) {
  const auto j = parse_json_file(config_path);
  if (j.contains("domains"))
    synth_scenario(j, out_dir, config);
  else if (j.contains("subjects"))
    synth_eeg(j, out_dir, config, with_features, options);
  else
    throw Error(ErrorKind::configuration,
                config_path.string() + " is neither a scenario ('domains') nor an EEG config ('subjects')");
}

void cmd_features(const fs::path& raw_dir, const fs::path& out_csv, const ResolvedConfig& config,
                  const FeatureOptions& options) {
  if (!fs::is_directory(raw_dir)) throw Error(ErrorKind::io, raw_dir.string() + " is not a directory");
  std::vector<fs::path> headers;
  for (const auto& entry : fs::directory_iterator(raw_dir))
    if (entry.path().extension() == ".json") headers.push_back(entry.path());
  if (headers.empty()) throw Error(ErrorKind::empty_set, "no recording headers (*.json) in " + raw_dir.string());
  std::sort(headers.begin(), headers.end());

  std::vector<FeatureTable> parts(headers.size());
  parallel_for(headers.size(), [&](std::size_t i) {
    parts[i] = recording_features(signal::read_recording(headers[i]), config.bands, options);
  });
  FeatureTable table;
  for (const auto& p : parts) table.append(p);

  json echo = json::parse(resolved_to_json(config));
  echo["target_rate_hz"] = options.target_rate_hz;
  echo["bandpass"] = {options.low_hz, options.high_hz};
  echo["epoch_s"] = options.epoch_len_s;
  echo["overlap_s"] = options.overlap_s;
  if (out_csv.has_parent_path()) fs::create_directories(out_csv.parent_path());
  write_feature_csv(out_csv, table, {"config: " + echo.dump()});
}

void cmd_shift(const fs::path& features_csv, const fs::path& out_dir, const ResolvedConfig& config,
               const std::optional<fs::path>& truth_json) {
  const auto& c = config.experiment;
  const auto table = normalize::normalize(read_feature_csv(features_csv), c.scheme);
  const auto dataset = shift::from_feature_table(table);

  shift::EstimatorConfig est;
  est.k = c.k;
  est.forest.n_trees = c.trees_subject;
  est.folds = c.folds;
  est.marginal_diagonal = c.marginal_diagonal;
  est.encoding = c.encoding;
  est.seed = derive_seed({c.master_seed, 2});
  const auto disparity = shift::disparity_matrix(dataset, c.k, derive_seed({c.master_seed, 1}));
  const auto cond = shift::conditional_shift(disparity.d, est);
  const auto marg = shift::marginal_shift(shift::marginal_matrix(dataset, est), est);

  fs::create_directories(out_dir);
  const std::vector<std::string> comments{"config: " + resolved_to_json(config)};
  report::write_matrix_csv(out_dir / "mu.csv", disparity.mu, comments);
  report::write_matrix_csv(out_dir / "disparity.csv", cond.matrix, comments);
  report::write_matrix_csv(out_dir / "marginal.csv", marg.matrix, comments);
  const auto psd = shift::per_subject_disparity(cond.matrix);
  std::string psd_csv = "# " + comments[0] + "\nsubject," +
                        std::string(normalize::to_string(c.scheme.kind)) + "\n";
  for (std::size_t s = 0; s < dataset.size(); ++s)
    psd_csv += std::to_string(dataset.domains[s].id) + "," + format_double(psd[s]) + "\n";
  report::write_file(out_dir / "per_subject_disparity.csv", psd_csv);

  json j;
  j["config"] = json::parse(resolved_to_json(config));
  std::vector<int> ids;
  for (const auto& d : dataset.domains) ids.push_back(d.id);
  j["subjects"] = ids;
  j["conditional_shift"] = {{"value", cond.value}, {"matrix", "disparity.csv"}};
  j["marginal_shift"] = {{"value", marg.value}, {"matrix", "marginal.csv"}};
  if (truth_json) {
    const auto t = parse_json_file(*truth_json);
    double tc = 0.0, tm = 0.0;
    try {
      tc = t.at("conditional_shift").get<double>();
      tm = t.at("marginal_shift").get<double>();
    } catch (const json::exception& e) {
      throw Error(ErrorKind::parse, truth_json->string() + ": " + e.what());
    }
    const double err = std::abs(cond.value - tc);
    j["truth"] = {{"conditional_shift", tc},
                  {"marginal_shift", tm},
                  {"conditional_abs_error", err},
                  {"tolerance", kOracleTolerance},
                  {"within_tolerance", err <= kOracleTolerance}};
  }
  report::write_file(out_dir / "shift.json", j.dump(2) + "\n");
}

void cmd_loso(const fs::path& features_csv, const fs::path& out_dir, const ResolvedConfig& config,
              bool all_schemes) {
  const auto table = read_feature_csv(features_csv);
  std::vector<normalize::SchemeKind> schemes;
  if (all_schemes)
    schemes.assign(std::begin(normalize::kAllSchemes), std::end(normalize::kAllSchemes));
  else
    schemes.push_back(config.experiment.scheme.kind);
  fs::create_directories(out_dir);
  for (auto kind : schemes) {
    auto cfg = config.experiment;
    cfg.scheme.kind = kind;
    report::write_scheme_report(out_dir, evaluate::repeat_experiment(table, cfg));
  }
  report::consolidate(out_dir);
}

void cmd_report(const fs::path& out_dir, std::ostream& out) {
  if (!fs::is_directory(out_dir)) throw Error(ErrorKind::io, out_dir.string() + " is not a directory");
  report::consolidate(out_dir);
  report::print_summary(out, out_dir);
}

int run(int argc, char** argv) {
  CLI::App app{"Cross-domain conditional and marginal shift estimation"};
  app.require_subcommand(1);
  app.fallthrough();

  Overrides flags;
  std::optional<fs::path> config_file;
  int threads = 0;
  app.add_option("--config", config_file, "JSON file with experiment settings")->check(CLI::ExistingFile);
  app.add_option("--norm", flags.norm, "none, whitening, baseline1 or baseline2");
  app.add_option("--norm-exponent", flags.norm_exponent, "divide by std^e, e in {1,2}");
  app.add_option("--k", flags.k, "neighbours of the k-NN labelling function");
  app.add_option("--trees-subject", flags.trees_subject, "trees of the subject classifier");
  app.add_option("--trees-workload", flags.trees_workload, "trees of the workload classifier");
  app.add_option("--folds", flags.folds, "cross-validation folds");
  app.add_option("--reps", flags.reps, "repetitions");
  app.add_option("--subsample", flags.subsample, "task rows per subject and condition (0 = all)");
  app.add_option("--holdout", flags.holdout, "source hold-out rows per training subject");
  app.add_option("--seed", flags.seed, "master seed");
  app.add_option("--bands", flags.bands, "name:lo:hi,...");
  app.add_option("--threads", threads, "worker threads (0 = runtime default)");

  FeatureOptions feat;
  fs::path out;
  fs::path input;
  std::optional<fs::path> truth;
  bool with_features = false;
  bool all_schemes = false;

  auto* synth = app.add_subcommand("synth", "generate a scenario dataset or synthetic EEG recordings");
  synth->add_option("config", input, "scenario or EEG config JSON")->required()->check(CLI::ExistingFile);
  synth->add_option("--out", out, "output directory")->required();
  synth->add_flag("--features", with_features, "also extract features from generated EEG");

  auto* features = app.add_subcommand("features", "raw recordings -> band-power feature CSV");
  features->add_option("raw_dir", input, "directory of recording headers")->required();
  features->add_option("--out", out, "output CSV")->required();
  for (auto* sub : {synth, features}) {
    sub->add_option("--rate", feat.target_rate_hz, "downsampled rate in Hz");
    sub->add_option("--low", feat.low_hz, "band-pass low edge in Hz");
    sub->add_option("--high", feat.high_hz, "band-pass high edge in Hz");
    sub->add_option("--epoch", feat.epoch_len_s, "epoch length in s");
    sub->add_option("--overlap", feat.overlap_s, "epoch overlap in s");
  }

  auto* shift_cmd = app.add_subcommand("shift", "estimate conditional and marginal shift");
  shift_cmd->add_option("features", input, "feature CSV")->required()->check(CLI::ExistingFile);
  shift_cmd->add_option("--out", out, "output directory")->required();
  shift_cmd->add_option("--truth", truth, "oracle truth.json from synth")->check(CLI::ExistingFile);

  auto* loso = app.add_subcommand("loso", "repeated LOSO evaluation with shift estimates");
  loso->add_option("features", input, "feature CSV")->required()->check(CLI::ExistingFile);
  loso->add_option("--out", out, "output directory")->required();
  loso->add_flag("--all-schemes", all_schemes, "run none, whitening, baseline1 and baseline2");

  auto* report_cmd = app.add_subcommand("report", "consolidate per-scheme results and print a summary");
  report_cmd->add_option("dir", input, "results directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    std::cerr << "error: usage: " << msg << '\n';
    return 64;
  }

  try {
    set_thread_count(threads);
    const auto config = resolve_config(config_file, flags);
    if (*synth) cmd_synth(input, out, config, with_features, feat);
    else if (*features) cmd_features(input, out, config, feat);
    else if (*shift_cmd) cmd_shift(input, out, config, truth);
    else if (*loso) cmd_loso(input, out, config, all_schemes);
    else if (*report_cmd) cmd_report(input, std::cout);
  } catch (const Error& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    std::cerr << "error: " << to_string(e.kind()) << ": " << msg << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    std::cerr << "error: internal: " << msg << '\n';
    return 70;
  }
  return 0;
}

}  // namespace shiftlab::cli
