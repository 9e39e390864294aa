#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "shiftlab/evaluate.hpp"
#include "shiftlab/signal.hpp"

namespace shiftlab::cli {

// Flag values as given on the command line; unset means "not given".
struct Overrides {
  std::optional<std::string> norm;
  std::optional<int> norm_exponent;
  std::optional<int> k;
  std::optional<int> trees_subject;
  std::optional<int> trees_workload;
  std::optional<int> folds;
  std::optional<int> reps;
  std::optional<std::size_t> subsample;
  std::optional<std::size_t> holdout;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> bands;
};

struct ResolvedConfig {
  evaluate::ExperimentConfig experiment;
  std::vector<signal::BandSpec> bands = signal::default_bands();
  // Flags outrank values embedded in synth config files.
  bool seed_from_flag = false;
  bool bands_from_flag = false;
};

// defaults < SHIFTLAB_SEED (seed only) < config file < flags.
ResolvedConfig resolve_config(const std::optional<std::filesystem::path>& config_file,
                              const Overrides& flags);

std::string resolved_to_json(const ResolvedConfig& config);

struct FeatureOptions {
  double target_rate_hz = 250.0;
  double low_hz = 0.5;
  double high_hz = 45.0;
  double epoch_len_s = 4.0;
  double overlap_s = 3.0;
};

// Downsample, band-pass, epoch and extract band powers for one recording.
FeatureTable recording_features(const signal::RawRecording& rec, const std::vector<signal::BandSpec>& bands,
                                const FeatureOptions& options);

// `synth`: a scenario file (has "domains") produces features.csv and
// truth.json; an EEG config (has "subjects") produces raw/<name>.json + .f32
// recordings, and with `with_features` also features.csv.
void cmd_synth(const std::filesystem::path& config_path, const std::filesystem::path& out_dir,
               const ResolvedConfig& config, bool with_features, const FeatureOptions& options);

void cmd_features(const std::filesystem::path& raw_dir, const std::filesystem::path& out_csv,
                  const ResolvedConfig& config, const FeatureOptions& options);

// Writes mu.csv, disparity.csv, marginal.csv, per_subject_disparity.csv and
// shift.json (estimates, config echo and, when a truth file is given, the
// oracle comparison).
void cmd_shift(const std::filesystem::path& features_csv, const std::filesystem::path& out_dir,
               const ResolvedConfig& config, const std::optional<std::filesystem::path>& truth_json);

// Runs the repeated experiment for one scheme (or all four) and consolidates.
void cmd_loso(const std::filesystem::path& features_csv, const std::filesystem::path& out_dir,
              const ResolvedConfig& config, bool all_schemes);

void cmd_report(const std::filesystem::path& out_dir, std::ostream& out);

inline constexpr double kOracleTolerance = 0.05;

// Entry point used by main(); returns the process exit code.
int run(int argc, char** argv);

}  // namespace shiftlab::cli
