#include <cmath>
#include <complex>
#include <filesystem>
#include <numbers>
#include <random>
#include <sstream>

#include "doctest.h"
#include "shiftlab/error.hpp"
#include "shiftlab/signal.hpp"

using namespace shiftlab;
using namespace shiftlab::signal;
using std::numbers::pi;

namespace {

RawRecording sinusoid(double freq, double amp, double rate, double seconds, double offset = 0.0,
                      std::size_t channels = 1) {
  RawRecording rec;
  rec.rate_hz = rate;
  const auto n = static_cast<std::size_t>(std::llround(seconds * rate));
  rec.samples = Matrix(channels, n);
  for (std::size_t c = 0; c < channels; ++c) {
    rec.channels.push_back("c" + std::to_string(c));
    for (std::size_t t = 0; t < n; ++t)
      rec.samples(c, t) = offset + amp * std::sin(2 * pi * freq * static_cast<double>(t) / rate);
  }
  rec.segments.push_back({Segment::task, 0, n});
  return rec;
}

double rms(std::span<const double> x, std::size_t skip = 0) {
  double s = 0;
  for (std::size_t i = skip; i < x.size() - skip; ++i) s += x[i] * x[i];
  return std::sqrt(s / static_cast<double>(x.size() - 2 * skip));
}

// Single-bin DFT amplitude estimate of a real sinusoid.
double dft_amplitude(std::span<const double> x, double freq, double rate) {
  std::complex<double> acc = 0;
  for (std::size_t n = 0; n < x.size(); ++n)
    acc += x[n] * std::polar(1.0, -2 * pi * freq * static_cast<double>(n) / rate);
  return 2.0 * std::abs(acc) / static_cast<double>(x.size());
}

SyntheticEegConfig alpha_only(double seconds, double rate) {
  SyntheticEegConfig cfg;
  cfg.channels = {"AF7", "FP1", "FP2", "AF8"};
  cfg.rate_hz = rate;
  cfg.segments = {{Segment::task, seconds, {0.0, 0.0, 1.0, 0.0}}};
  cfg.seed = 3;
  return cfg;
}

}  // namespace

TEST_CASE("synthetic EEG: sample count, determinism and band dominance") {
  auto cfg = alpha_only(600, 250);
  const auto rec = generate_synthetic_eeg(cfg);
  CHECK(rec.sample_count() == 150000);
  CHECK(rec.samples.rows() == 4);

  cfg.noise = 0.3;
  CHECK(generate_synthetic_eeg(cfg) == generate_synthetic_eeg(cfg));

  cfg.noise = 0.0;
  cfg.segments[0].duration_s = 20;
  const auto feats = band_power_features(epoch(generate_synthetic_eeg(cfg)), default_bands());
  for (const auto& row : feats.rows())
    for (std::size_t c = 0; c < 4; ++c) {
      const double alpha = row.features[c * 4 + 2];
      CHECK(alpha >= 10 * row.features[c * 4 + 0]);
      CHECK(alpha >= 10 * row.features[c * 4 + 1]);
      CHECK(alpha >= 10 * row.features[c * 4 + 3]);
    }
}

TEST_CASE("synthetic EEG: configuration errors") {
  auto cfg = alpha_only(3, 250);
  CHECK_THROWS_AS(generate_synthetic_eeg(cfg), Error);
  cfg = alpha_only(10, 0);
  CHECK_THROWS_AS(generate_synthetic_eeg(cfg), Error);
  cfg = alpha_only(10, 250);
  cfg.segments[0].band_amplitudes[0] = -1;
  CHECK_THROWS_AS(generate_synthetic_eeg(cfg), Error);
}

TEST_CASE("downsample") {
  const auto rec = sinusoid(10, 1.0, 500, 20);
  const auto half = downsample(rec, 250);
  CHECK(half.rate_hz == 250);
  CHECK(half.sample_count() == rec.sample_count() / 2);
  CHECK(half.segments[0].end == rec.segments[0].end / 2);

  CHECK(downsample(rec, 500) == rec);

  const double before = dft_amplitude(rec.samples.row(0), 10, 500);
  const double after = dft_amplitude(half.samples.row(0), 10, 250);
  CHECK(after >= 0.99 * before);

  try {
    downsample(rec, 300);
    FAIL("expected unsupported_rate");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::unsupported_rate);
  }
}

TEST_CASE("band-pass 0.5-45 Hz") {
  const double rate = 250;
  auto in60 = sinusoid(60, 1.0, rate, 20);
  auto out60 = bandpass_filter(in60, 0.5, 45);
  // Steady state: the 0.5 Hz high-pass rings for a couple of seconds at the edges.
  const std::size_t edge = static_cast<std::size_t>(2 * rate);
  CHECK(rms(out60.samples.row(0), edge) <= 0.1 * rms(in60.samples.row(0), edge));

  auto in10 = sinusoid(10, 1.0, rate, 20);
  auto out10 = bandpass_filter(in10, 0.5, 45);
  CHECK(rms(out10.samples.row(0), edge) ==
        doctest::Approx(rms(in10.samples.row(0), edge)).epsilon(0.1));

  auto dc = sinusoid(10, 0.0, rate, 20, 3.5);
  auto out_dc = bandpass_filter(dc, 0.5, 45);
  for (double v : out_dc.samples.row(0)) REQUIRE(std::abs(v) < 1e-6);

  CHECK_THROWS_AS(bandpass_filter(in10, 45, 0.5), Error);
  CHECK_THROWS_AS(bandpass_filter(in10, 0.5, 130), Error);
  CHECK_THROWS_AS(bandpass_filter(in10, 0.0, 45), Error);
}

TEST_CASE("band-pass response: passband within 1 dB, 20 dB one octave out") {
  const double rate = 250;
  SosFilter sos = butterworth_highpass(kFilterOrder, 0.5, rate);
  auto lp = butterworth_lowpass(kFilterOrder, 45, rate);
  sos.insert(sos.end(), lp.begin(), lp.end());
  // Forward-backward squares the magnitude.
  auto db = [&](double f) { return 20 * std::log10(std::pow(magnitude_response(sos, f, rate), 2)); };
  for (double f : {2.0, 5.0, 10.0, 20.0, 30.0}) CHECK(std::abs(db(f)) <= 1.0);
  CHECK(db(0.25) <= -20.0);
  CHECK(db(90.0) <= -20.0);
}

TEST_CASE("zero-phase filtering keeps a symmetric pulse symmetric") {
  const double rate = 250;
  RawRecording rec;
  rec.rate_hz = rate;
  rec.channels = {"c"};
  const std::size_t n = 2001, centre = 1000;
  rec.samples = Matrix(1, n);
  for (std::size_t t = 0; t < n; ++t) {
    const double d = (static_cast<double>(t) - centre) / 5.0;
    rec.samples(0, t) = std::exp(-0.5 * d * d);
  }
  const auto out = bandpass_filter(rec, 0.5, 45);
  auto y = out.samples.row(0);
  const auto peak = static_cast<std::size_t>(std::max_element(y.begin(), y.end()) - y.begin());
  CHECK(std::abs(static_cast<long>(peak) - static_cast<long>(centre)) <= 1);
  for (std::size_t k = 1; k < 100; ++k) CHECK(y[centre - k] == doctest::Approx(y[centre + k]).epsilon(1e-3).scale(1e-3));
}

TEST_CASE("epoch counts") {
  const double rate = 250;
  auto rec = sinusoid(10, 1, rate, 600);
  CHECK(epoch(rec).epochs.size() == 597);
  CHECK(epoch(sinusoid(10, 1, rate, 4)).epochs.size() == 1);
  CHECK(epoch(sinusoid(10, 1, rate, 10)).epochs.size() == 7);
  CHECK(epoch(sinusoid(10, 1, rate, 10)).epochs[1].start == 250);

  try {
    epoch(sinusoid(10, 1, rate, 3.9));
    FAIL("expected empty_set");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::empty_set);
  }
  CHECK_THROWS_AS(epoch(rec, 4, 4), Error);
}

TEST_CASE("epochs never straddle segment boundaries") {
  const double rate = 250;
  auto rec = sinusoid(10, 1, rate, 20);
  const std::size_t cut = static_cast<std::size_t>(9.5 * rate);
  rec.segments = {{Segment::baseline1, 0, cut}, {Segment::task, cut, rec.sample_count()}};
  const auto set = epoch(rec);
  // 9.5 s -> 6 windows, 10.5 s -> 7 windows.
  CHECK(set.epochs.size() == 13);
  for (const auto& ep : set.epochs) {
    const std::size_t end = ep.start + ep.samples.cols();
    if (ep.tag == Segment::baseline1) CHECK(end <= cut);
    else CHECK(ep.start >= cut);
  }
}

TEST_CASE("epoch count formula holds for random window parameters") {
  // Quantities on a 0.25 s grid so window and stride are whole sample counts.
  std::mt19937 rng(7);
  std::uniform_int_distribution<int> quarter(1, 40);
  const double rate = 100;
  for (int trial = 0; trial < 60; ++trial) {
    const int len_q = quarter(rng);
    const int overlap_q = std::uniform_int_distribution<int>(0, len_q - 1)(rng);
    const int t_q = len_q + std::uniform_int_distribution<int>(0, 200)(rng);
    const int expected = (t_q - len_q) / (len_q - overlap_q) + 1;
    auto rec = sinusoid(1, 0, rate, t_q / 4.0);
    const auto set = epoch(rec, len_q / 4.0, overlap_q / 4.0);
    REQUIRE(static_cast<int>(set.epochs.size()) == expected);
    for (std::size_t e = 1; e < set.epochs.size(); ++e)
      CHECK(set.epochs[e].start - set.epochs[e - 1].start ==
            static_cast<std::size_t>((len_q - overlap_q) * rate / 4));
  }
}

TEST_CASE("band power features") {
  const double rate = 250;
  auto rec = sinusoid(10, 1.0, rate, 4, 0.0, 4);
  auto set = epoch(rec);
  const auto feats = band_power_features(set, default_bands());
  REQUIRE(feats.size() == 1);
  CHECK(feats.dim() == 16);
  // Analytic power of a unit sinusoid is A^2 / 2.
  const auto& f = feats[0].features;
  for (std::size_t c = 0; c < 4; ++c) {
    CHECK(f[c * 4 + 2] == doctest::Approx(0.5).epsilon(0.1));
    CHECK(f[c * 4 + 0] <= 0.05);
    CHECK(f[c * 4 + 1] <= 0.05);
  }

  // Scaling by c scales every feature by c^2.
  auto scaled = set;
  for (auto& v : scaled.epochs[0].samples.data()) v *= 3.0;
  const auto f3 = band_power_features(scaled, default_bands())[0].features;
  for (std::size_t k = 0; k < f.size(); ++k) CHECK(f3[k] == doctest::Approx(9.0 * f[k]).scale(1e-12));

  auto zero = set;
  for (auto& v : zero.epochs[0].samples.data()) v = 0.0;
  const auto fz = band_power_features(zero, default_bands())[0].features;
  for (double v : fz) CHECK(v == 0.0);

  EpochSet empty;
  empty.rate_hz = rate;
  empty.n_channels = 4;
  CHECK(band_power_features(empty, default_bands()).empty());

  CHECK_THROWS_AS(band_power_features(set, {{"bad", 10, 200}}), Error);
}

TEST_CASE("band power is non-negative on noisy recordings and deterministic") {
  auto cfg = alpha_only(30, 250);
  cfg.noise = 1.0;
  cfg.segments[0].band_amplitudes = {0.5, 0.7, 1.0, 0.3};
  auto once = [&] {
    std::ostringstream out;
    write_feature_csv(out, band_power_features(epoch(generate_synthetic_eeg(cfg)), default_bands()));
    return out.str();
  };
  const auto a = once();
  CHECK(a == once());
  const auto table = read_feature_csv(*std::make_unique<std::istringstream>(a));
  for (const auto& r : table.rows())
    for (double v : r.features) CHECK(v >= 0.0);
}

TEST_CASE("band specs parse and format") {
  const auto bands = parse_bands("delta:0.1:4,theta:4:8,alpha:8:12,beta:2:30");
  REQUIRE(bands.size() == 4);
  CHECK(bands[3].low_hz == 2.0);
  CHECK(parse_bands(format_bands(default_bands())) == default_bands());
  CHECK_THROWS_AS(parse_bands("alpha:12:8"), Error);
  CHECK_THROWS_AS(parse_bands("alpha"), Error);
}

TEST_CASE("recording storage round trip") {
  auto cfg = alpha_only(6, 250);
  cfg.noise = 0.5;
  cfg.condition = kConditionHigh;
  cfg.subject = 4;
  const auto rec = generate_synthetic_eeg(cfg);
  const auto dir = std::filesystem::temp_directory_path() / "shiftlab_rec_test";
  std::filesystem::create_directories(dir);
  write_recording(dir / "r.json", rec);
  const auto back = read_recording(dir / "r.json");
  CHECK(back.channels == rec.channels);
  CHECK(back.segments == rec.segments);
  CHECK(back.subject == 4);
  CHECK(back.condition == kConditionHigh);
  for (std::size_t i = 0; i < rec.samples.data().size(); ++i)
    REQUIRE(back.samples.data()[i] == static_cast<float>(rec.samples.data()[i]));
  std::filesystem::remove_all(dir);
}

TEST_CASE("recording invariants") {
  auto rec = sinusoid(10, 1, 250, 5);
  rec.segments = {{Segment::task, 0, 800}, {Segment::baseline1, 700, 1000}};
  CHECK_THROWS_AS(rec.validate(), Error);
  rec.segments = {{Segment::task, 0, 5000}};
  CHECK_THROWS_AS(rec.validate(), Error);
}
