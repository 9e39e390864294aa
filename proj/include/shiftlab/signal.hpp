#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "shiftlab/feature_table.hpp"
#include "shiftlab/matrix.hpp"

namespace shiftlab::signal {

struct SegmentRange {
  Segment tag = Segment::task;
  std::size_t start = 0;  // first sample
  std::size_t end = 0;    // one past the last sample

  std::size_t length() const { return end - start; }
  bool operator==(const SegmentRange&) const = default;
};

// Multichannel recording. `samples` is channel-major: row c holds channel c.
struct RawRecording {
  std::vector<std::string> channels;
  double rate_hz = 0.0;
  Matrix samples;
  std::vector<SegmentRange> segments;
  int subject = 0;
  std::optional<int> condition;

  std::size_t sample_count() const { return samples.cols(); }

  // Throws configuration error when the recording breaks its invariants
  // (channel count mismatch, segments out of range or overlapping, rate <= 0).
  void validate() const;

  bool operator==(const RawRecording&) const = default;
};

struct Epoch {
  Segment tag = Segment::task;
  std::size_t start = 0;  // sample offset in the parent recording
  Matrix samples;         // channels x epoch length
};

struct EpochSet {
  std::vector<Epoch> epochs;
  double rate_hz = 0.0;
  double epoch_len_s = 4.0;
  double overlap_s = 3.0;
  std::size_t n_channels = 0;
  int subject = 0;
  std::optional<int> condition;
};

struct BandSpec {
  std::string name;
  double low_hz = 0.0;
  double high_hz = 0.0;

  bool operator==(const BandSpec&) const = default;
};

// delta 0.1-4, theta 4-8, alpha 8-12, beta 12-30 Hz.
std::vector<BandSpec> default_bands();

// Parses "name:lo:hi,name:lo:hi,...".
std::vector<BandSpec> parse_bands(const std::string& text);
std::string format_bands(const std::vector<BandSpec>& bands);

// ---------------------------------------------------------------------------
// Synthetic recordings

struct SegmentPlan {
  Segment tag = Segment::task;
  double duration_s = 0.0;
  std::vector<double> band_amplitudes;  // one per band
};

struct SyntheticEegConfig {
  std::vector<std::string> channels{"AF7", "FP1", "FP2", "AF8"};
  double rate_hz = 500.0;
  std::vector<BandSpec> bands = default_bands();
  std::vector<SegmentPlan> segments;  // laid out back to back
  std::vector<double> channel_gains;  // empty means all 1
  double noise = 0.0;                 // white-noise standard deviation
  std::uint64_t seed = 0;
  int subject = 0;
  std::optional<int> condition;
};

// Sum over bands of one sinusoid per channel at the band's centre frequency
// (random phase, configured amplitude) plus white Gaussian noise.
RawRecording generate_synthetic_eeg(const SyntheticEegConfig& config);

// ---------------------------------------------------------------------------
// Filtering

// One second-order section, a0 normalised to 1.
struct Biquad {
  double b0 = 1, b1 = 0, b2 = 0, a1 = 0, a2 = 0;
};

using SosFilter = std::vector<Biquad>;

// Butterworth designs via the bilinear transform with frequency prewarping.
// `order` must be even.
SosFilter butterworth_lowpass(int order, double cutoff_hz, double rate_hz);
SosFilter butterworth_highpass(int order, double cutoff_hz, double rate_hz);

// Complex frequency response magnitude at `freq_hz`.
double magnitude_response(const SosFilter& sos, double freq_hz, double rate_hz);

// Zero-phase forward-backward filtering with odd-extension padding and
// steady-state initial conditions.
std::vector<double> filtfilt(const SosFilter& sos, std::span<const double> x);

inline constexpr int kFilterOrder = 4;

RawRecording downsample(const RawRecording& rec, double target_hz);
RawRecording bandpass_filter(const RawRecording& rec, double low_hz, double high_hz);

// ---------------------------------------------------------------------------
// Epoching and features

// Number of windows that fit in `segment_samples` samples.
std::size_t epoch_count(std::size_t segment_samples, std::size_t window, std::size_t stride);

EpochSet epoch(const RawRecording& rec, double epoch_len_s = 4.0, double overlap_s = 3.0);

// Mean squared amplitude of each channel after an ideal zero-phase band-pass
// per band. Column order is channel-major: feature (c * n_bands + b).
FeatureTable band_power_features(const EpochSet& epochs, const std::vector<BandSpec>& bands);

// ---------------------------------------------------------------------------
// Storage: JSON header next to a little-endian float32 channel-major file.

void write_recording(const std::filesystem::path& header_path, const RawRecording& rec);
RawRecording read_recording(const std::filesystem::path& header_path);

}  // namespace shiftlab::signal
