#include "shiftlab/signal.hpp"

#include <fftw3.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstring>
#include <fstream>
#include <mutex>
#include <numbers>
#include <sstream>

#include "json.hpp"
#include "shiftlab/error.hpp"
#include "shiftlab/parallel.hpp"
#include "shiftlab/rng.hpp"

namespace shiftlab::signal {

using std::numbers::pi;

void RawRecording::validate() const {
  if (!(rate_hz > 0.0)) throw Error(ErrorKind::configuration, "sampling rate must be positive");
  if (samples.rows() != channels.size())
    throw Error(ErrorKind::configuration, "recording has " + std::to_string(channels.size()) +
                                              " channel names but " +
                                              std::to_string(samples.rows()) + " sample rows");
  std::vector<SegmentRange> sorted = segments;
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.start < b.start; });
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (sorted[i].start >= sorted[i].end || sorted[i].end > sample_count())
      throw Error(ErrorKind::configuration, "segment out of bounds");
    if (i > 0 && sorted[i].start < sorted[i - 1].end)
      throw Error(ErrorKind::configuration, "segments overlap");
  }
}

std::vector<BandSpec> default_bands() {
  return {{"delta", 0.1, 4.0}, {"theta", 4.0, 8.0}, {"alpha", 8.0, 12.0}, {"beta", 12.0, 30.0}};
}

std::vector<BandSpec> parse_bands(const std::string& text) {
  std::vector<BandSpec> bands;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    auto c1 = item.find(':');
    auto c2 = item.find(':', c1 == std::string::npos ? c1 : c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos)
      throw Error(ErrorKind::configuration, "band '" + item + "' is not name:lo:hi");
    BandSpec b;
    b.name = item.substr(0, c1);
    try {
      b.low_hz = std::stod(item.substr(c1 + 1, c2 - c1 - 1));
      b.high_hz = std::stod(item.substr(c2 + 1));
    } catch (const std::exception&) {
      throw Error(ErrorKind::configuration, "band '" + item + "' has non-numeric edges");
    }
    if (!(b.low_hz >= 0.0 && b.low_hz < b.high_hz))
      throw Error(ErrorKind::configuration, "band '" + item + "' needs 0 <= lo < hi");
    bands.push_back(b);
  }
  if (bands.empty()) throw Error(ErrorKind::configuration, "no bands given");
  return bands;
}

std::string format_bands(const std::vector<BandSpec>& bands) {
  std::string out;
  for (const auto& b : bands) {
    if (!out.empty()) out += ',';
    out += b.name + ':' + format_double(b.low_hz) + ':' + format_double(b.high_hz);
  }
  return out;
}

// ---------------------------------------------------------------------------

RawRecording generate_synthetic_eeg(const SyntheticEegConfig& config) {
  if (!(config.rate_hz > 0.0)) throw Error(ErrorKind::configuration, "rate_hz must be positive");
  if (config.channels.empty()) throw Error(ErrorKind::configuration, "no channels");
  if (config.segments.empty()) throw Error(ErrorKind::configuration, "no segments");
  if (config.noise < 0.0) throw Error(ErrorKind::configuration, "noise must be >= 0");
  if (!config.channel_gains.empty() && config.channel_gains.size() != config.channels.size())
    throw Error(ErrorKind::configuration, "channel_gains must match channels");
  for (const auto& b : config.bands)
    if (!(0.0 <= b.low_hz && b.low_hz < b.high_hz && b.high_hz < config.rate_hz / 2))
      throw Error(ErrorKind::configuration, "band " + b.name + " invalid for the sampling rate");

  double total_s = 0.0;
  for (const auto& seg : config.segments) {
    if (!(seg.duration_s > 0.0)) throw Error(ErrorKind::configuration, "segment duration must be positive");
    if (seg.band_amplitudes.size() != config.bands.size())
      throw Error(ErrorKind::configuration, "one amplitude per band required");
    for (double a : seg.band_amplitudes)
      if (a < 0.0) throw Error(ErrorKind::configuration, "amplitudes must be >= 0");
    total_s += seg.duration_s;
  }
  if (!(total_s > 4.0))
    throw Error(ErrorKind::configuration, "recording must be longer than one 4 s epoch");

  RawRecording rec;
  rec.channels = config.channels;
  rec.rate_hz = config.rate_hz;
  rec.subject = config.subject;
  rec.condition = config.condition;

  std::size_t cursor = 0;
  for (const auto& seg : config.segments) {
    auto n = static_cast<std::size_t>(std::llround(seg.duration_s * config.rate_hz));
    rec.segments.push_back({seg.tag, cursor, cursor + n});
    cursor += n;
  }
  const std::size_t n_channels = config.channels.size();
  const std::size_t n_bands = config.bands.size();
  rec.samples = Matrix(n_channels, cursor);

  Engine rng(config.seed);
  std::uniform_real_distribution<double> phase_dist(0.0, 2.0 * pi);
  std::normal_distribution<double> noise_dist(0.0, 1.0);

  std::vector<double> phases(n_channels * n_bands);
  for (auto& p : phases) p = phase_dist(rng);
  std::vector<double> freqs(n_bands);
  for (std::size_t b = 0; b < n_bands; ++b)
    freqs[b] = 0.5 * (config.bands[b].low_hz + config.bands[b].high_hz);

  for (std::size_t c = 0; c < n_channels; ++c) {
    const double gain = config.channel_gains.empty() ? 1.0 : config.channel_gains[c];
    auto row = rec.samples.row(c);
    for (std::size_t s = 0; s < config.segments.size(); ++s) {
      const auto& amps = config.segments[s].band_amplitudes;
      for (std::size_t t = rec.segments[s].start; t < rec.segments[s].end; ++t) {
        const double time = static_cast<double>(t) / config.rate_hz;
        double v = 0.0;
        for (std::size_t b = 0; b < n_bands; ++b)
          if (amps[b] != 0.0) v += amps[b] * std::sin(2.0 * pi * freqs[b] * time + phases[c * n_bands + b]);
        row[t] = gain * v;
      }
    }
    if (config.noise > 0.0)
      for (auto& v : row) v += config.noise * noise_dist(rng);
  }
  return rec;
}

// ---------------------------------------------------------------------------

namespace {

// Analog Butterworth prototype: pole pair k has s^2 + s/Q + 1 with
// 1/Q = 2 sin((2k + 1) pi / (2N)).
std::vector<double> butterworth_inverse_q(int order) {
  if (order <= 0 || order % 2 != 0)
    throw Error(ErrorKind::configuration, "Butterworth order must be a positive even number");
  std::vector<double> inv_q;
  for (int k = 0; k < order / 2; ++k)
    inv_q.push_back(2.0 * std::sin((2.0 * k + 1.0) * pi / (2.0 * order)));
  return inv_q;
}

void check_cutoff(double cutoff_hz, double rate_hz) {
  if (!(rate_hz > 0.0) || !(cutoff_hz > 0.0) || !(cutoff_hz < rate_hz / 2))
    throw Error(ErrorKind::configuration, "cutoff must lie in (0, rate/2)");
}

}  // namespace

SosFilter butterworth_lowpass(int order, double cutoff_hz, double rate_hz) {
  check_cutoff(cutoff_hz, rate_hz);
  const double K = std::tan(pi * cutoff_hz / rate_hz);
  SosFilter sos;
  for (double iq : butterworth_inverse_q(order)) {
    const double norm = 1.0 / (1.0 + K * iq + K * K);
    Biquad s;
    s.b0 = K * K * norm;
    s.b1 = 2.0 * s.b0;
    s.b2 = s.b0;
    s.a1 = 2.0 * (K * K - 1.0) * norm;
    s.a2 = (1.0 - K * iq + K * K) * norm;
    sos.push_back(s);
  }
  return sos;
}

SosFilter butterworth_highpass(int order, double cutoff_hz, double rate_hz) {
  check_cutoff(cutoff_hz, rate_hz);
  const double K = std::tan(pi * cutoff_hz / rate_hz);
  SosFilter sos;
  for (double iq : butterworth_inverse_q(order)) {
    const double norm = 1.0 / (1.0 + K * iq + K * K);
    Biquad s;
    s.b0 = norm;
    s.b1 = -2.0 * norm;
    s.b2 = norm;
    s.a1 = 2.0 * (K * K - 1.0) * norm;
    s.a2 = (1.0 - K * iq + K * K) * norm;
    sos.push_back(s);
  }
  return sos;
}

double magnitude_response(const SosFilter& sos, double freq_hz, double rate_hz) {
  const std::complex<double> z1 = std::polar(1.0, -2.0 * pi * freq_hz / rate_hz);
  const std::complex<double> z2 = z1 * z1;
  std::complex<double> h = 1.0;
  for (const auto& s : sos) h *= (s.b0 + s.b1 * z1 + s.b2 * z2) / (1.0 + s.a1 * z1 + s.a2 * z2);
  return std::abs(h);
}

namespace {

struct SectionState {
  double z1 = 0, z2 = 0;
};

// Transposed direct form II state that holds a unit step input at steady state,
// with each section's input scaled by the DC gain of the sections before it.
std::vector<SectionState> steady_state(const SosFilter& sos) {
  std::vector<SectionState> zi;
  double scale = 1.0;
  for (const auto& s : sos) {
    const double gain = (s.b0 + s.b1 + s.b2) / (1.0 + s.a1 + s.a2);
    SectionState st;
    st.z2 = (s.b2 - s.a2 * gain) * scale;
    st.z1 = (s.b1 - s.a1 * gain) * scale + st.z2;
    zi.push_back(st);
    scale *= gain;
  }
  return zi;
}

void sosfilt_inplace(const SosFilter& sos, std::vector<double>& x,
                     const std::vector<SectionState>& zi_unit) {
  if (x.empty()) return;
  const double x0 = x.front();
  for (std::size_t k = 0; k < sos.size(); ++k) {
    const auto& s = sos[k];
    double z1 = zi_unit[k].z1 * x0;
    double z2 = zi_unit[k].z2 * x0;
    for (double& v : x) {
      const double in = v;
      const double out = s.b0 * in + z1;
      z1 = s.b1 * in - s.a1 * out + z2;
      z2 = s.b2 * in - s.a2 * out;
      v = out;
    }
  }
}

}  // namespace

std::vector<double> filtfilt(const SosFilter& sos, std::span<const double> x) {
  const std::size_t n = x.size();
  if (n == 0) return {};
  const std::size_t pad = std::min<std::size_t>(n - 1, 3 * (2 * sos.size() + 1));

  std::vector<double> ext;
  ext.reserve(n + 2 * pad);
  for (std::size_t k = pad; k >= 1; --k) ext.push_back(2.0 * x[0] - x[k]);
  ext.insert(ext.end(), x.begin(), x.end());
  for (std::size_t k = 1; k <= pad; ++k) ext.push_back(2.0 * x[n - 1] - x[n - 1 - k]);

  const auto zi = steady_state(sos);
  sosfilt_inplace(sos, ext, zi);
  std::reverse(ext.begin(), ext.end());
  sosfilt_inplace(sos, ext, zi);
  std::reverse(ext.begin(), ext.end());
  return {ext.begin() + static_cast<std::ptrdiff_t>(pad),
          ext.begin() + static_cast<std::ptrdiff_t>(pad + n)};
}

namespace {

RawRecording filter_channels(const RawRecording& rec, const SosFilter& sos) {
  RawRecording out = rec;
  parallel_for(rec.samples.rows(), [&](std::size_t c) {
    auto y = filtfilt(sos, rec.samples.row(c));
    std::copy(y.begin(), y.end(), out.samples.row(c).begin());
  });
  return out;
}

}  // namespace

RawRecording downsample(const RawRecording& rec, double target_hz) {
  rec.validate();
  if (!(target_hz > 0.0) || target_hz > rec.rate_hz)
    throw Error(ErrorKind::unsupported_rate, "target rate must be in (0, rate]");
  const double ratio = rec.rate_hz / target_hz;
  const auto factor = static_cast<std::size_t>(std::llround(ratio));
  if (std::abs(ratio - static_cast<double>(factor)) > 1e-9 * ratio)
    throw Error(ErrorKind::unsupported_rate, "rate " + format_double(rec.rate_hz) +
                                                 " Hz is not an integer multiple of " +
                                                 format_double(target_hz) + " Hz");
  if (factor == 1) return rec;

  const auto filtered =
      filter_channels(rec, butterworth_lowpass(kFilterOrder, 0.4 * target_hz, rec.rate_hz));
  const std::size_t n_out = (rec.sample_count() + factor - 1) / factor;
  RawRecording out = rec;
  out.rate_hz = target_hz;
  out.samples = Matrix(rec.samples.rows(), n_out);
  for (std::size_t c = 0; c < rec.samples.rows(); ++c)
    for (std::size_t t = 0; t < n_out; ++t) out.samples(c, t) = filtered.samples(c, t * factor);
  for (auto& seg : out.segments) {
    seg.start = (seg.start + factor - 1) / factor;
    seg.end = (seg.end + factor - 1) / factor;
  }
  return out;
}

RawRecording bandpass_filter(const RawRecording& rec, double low_hz, double high_hz) {
  rec.validate();
  if (!(0.0 < low_hz && low_hz < high_hz && high_hz < rec.rate_hz / 2))
    throw Error(ErrorKind::configuration, "band edges must satisfy 0 < low < high < rate/2");
  SosFilter sos = butterworth_highpass(kFilterOrder, low_hz, rec.rate_hz);
  auto lp = butterworth_lowpass(kFilterOrder, high_hz, rec.rate_hz);
  sos.insert(sos.end(), lp.begin(), lp.end());
  return filter_channels(rec, sos);
}

// ---------------------------------------------------------------------------

std::size_t epoch_count(std::size_t segment_samples, std::size_t window, std::size_t stride) {
  if (window == 0 || stride == 0 || segment_samples < window) return 0;
  return (segment_samples - window) / stride + 1;
}

EpochSet epoch(const RawRecording& rec, double epoch_len_s, double overlap_s) {
  rec.validate();
  if (!(epoch_len_s > 0.0) || !(overlap_s >= 0.0) || !(overlap_s < epoch_len_s))
    throw Error(ErrorKind::configuration, "need 0 <= overlap < epoch length");
  const auto window = static_cast<std::size_t>(std::llround(epoch_len_s * rec.rate_hz));
  const auto stride =
      static_cast<std::size_t>(std::llround((epoch_len_s - overlap_s) * rec.rate_hz));
  if (window == 0 || stride == 0)
    throw Error(ErrorKind::configuration, "epoch window or stride rounds to zero samples");

  std::vector<SegmentRange> segments = rec.segments;
  if (segments.empty()) segments.push_back({Segment::task, 0, rec.sample_count()});

  EpochSet set;
  set.rate_hz = rec.rate_hz;
  set.epoch_len_s = epoch_len_s;
  set.overlap_s = overlap_s;
  set.n_channels = rec.samples.rows();
  set.subject = rec.subject;
  set.condition = rec.condition;
  for (const auto& seg : segments) {
    const std::size_t count = epoch_count(seg.length(), window, stride);
    for (std::size_t e = 0; e < count; ++e) {
      Epoch ep;
      ep.tag = seg.tag;
      ep.start = seg.start + e * stride;
      ep.samples = Matrix(set.n_channels, window);
      for (std::size_t c = 0; c < set.n_channels; ++c) {
        auto src = rec.samples.row(c).subspan(ep.start, window);
        std::copy(src.begin(), src.end(), ep.samples.row(c).begin());
      }
      set.epochs.push_back(std::move(ep));
    }
  }
  if (set.epochs.empty())
    throw Error(ErrorKind::empty_set, "recording is shorter than one epoch in every segment");
  return set;
}

namespace {

std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

FeatureTable band_power_features(const EpochSet& epochs, const std::vector<BandSpec>& bands) {
  const std::size_t n_bands = bands.size();
  FeatureTable table(epochs.n_channels * n_bands);
  if (epochs.epochs.empty()) return table;
  for (const auto& b : bands)
    if (!(0.0 <= b.low_hz && b.low_hz < b.high_hz && b.high_hz < epochs.rate_hz / 2))
      throw Error(ErrorKind::configuration, "band " + b.name + " invalid for " +
                                                format_double(epochs.rate_hz) + " Hz");

  const std::size_t n = epochs.epochs.front().samples.cols();
  const std::size_t n_bins = n / 2 + 1;

  // Per-bin band membership and one-sided weight, so that the band power of a
  // real signal is sum(weight * |X_k|^2) / n^2 (Parseval).
  std::vector<double> bin_weight(n_bins, 2.0);
  bin_weight[0] = 1.0;
  if (n % 2 == 0) bin_weight[n / 2] = 1.0;
  // Bands may overlap (e.g. a wide beta), so each keeps its own bin range.
  const double df = epochs.rate_hz / static_cast<double>(n);
  std::vector<std::pair<std::size_t, std::size_t>> band_bins;
  for (const auto& b : bands) {
    std::size_t lo = 0;
    while (lo < n_bins && static_cast<double>(lo) * df < b.low_hz) ++lo;
    std::size_t hi = lo;
    while (hi < n_bins && static_cast<double>(hi) * df < b.high_hz) ++hi;
    band_bins.emplace_back(lo, hi);
  }

  double* in = fftw_alloc_real(n);
  fftw_complex* out = fftw_alloc_complex(n_bins);
  fftw_plan plan;
  {
    std::lock_guard lock(fftw_planner_mutex());
    plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in, out, FFTW_ESTIMATE);
  }

  std::vector<double> power(n_bins);
  for (const auto& ep : epochs.epochs) {
    FeatureRow row;
    row.subject = epochs.subject;
    row.condition = epochs.condition.value_or(kNoCondition);
    row.segment = ep.tag;
    row.features.assign(epochs.n_channels * n_bands, 0.0);
    for (std::size_t c = 0; c < epochs.n_channels; ++c) {
      auto src = ep.samples.row(c);
      std::copy(src.begin(), src.end(), in);
      fftw_execute_dft_r2c(plan, in, out);
      for (std::size_t k = 0; k < n_bins; ++k)
        power[k] = bin_weight[k] * (out[k][0] * out[k][0] + out[k][1] * out[k][1]);
      for (std::size_t b = 0; b < n_bands; ++b) {
        double sum = 0.0;
        for (std::size_t k = band_bins[b].first; k < band_bins[b].second; ++k) sum += power[k];
        row.features[c * n_bands + b] = sum / (static_cast<double>(n) * static_cast<double>(n));
      }
    }
    table.add(std::move(row));
  }

  {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }
  fftw_free(in);
  fftw_free(out);
  return table;
}

// ---------------------------------------------------------------------------

void write_recording(const std::filesystem::path& header_path, const RawRecording& rec) {
  rec.validate();
  auto data_path = header_path;
  data_path.replace_extension(".f32");

  nlohmann::ordered_json header;
  header["channels"] = rec.channels;
  header["rate_hz"] = rec.rate_hz;
  header["subject"] = rec.subject;
  header["condition"] = rec.condition ? nlohmann::ordered_json(*rec.condition) : nlohmann::ordered_json();
  header["n_samples"] = rec.sample_count();
  header["samples_file"] = data_path.filename().string();
  auto segs = nlohmann::ordered_json::array();
  for (const auto& s : rec.segments)
    segs.push_back({{"tag", to_string(s.tag)}, {"start", s.start}, {"end", s.end}});
  header["segments"] = segs;

  {
    std::ofstream out(header_path, std::ios::binary);
    if (!out) throw Error(ErrorKind::io, "cannot write " + header_path.string());
    out << header.dump(2) << '\n';
  }

  std::ofstream out(data_path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot write " + data_path.string());
  std::vector<char> buf(rec.samples.data().size() * 4);
  for (std::size_t i = 0; i < rec.samples.data().size(); ++i) {
    auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(rec.samples.data()[i]));
    for (int b = 0; b < 4; ++b) buf[i * 4 + b] = static_cast<char>((bits >> (8 * b)) & 0xffu);
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

RawRecording read_recording(const std::filesystem::path& header_path) {
  std::ifstream in(header_path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot read " + header_path.string());
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::parse, header_path.string() + ": " + e.what());
  }

  RawRecording rec;
  try {
    rec.channels = header.at("channels").get<std::vector<std::string>>();
    rec.rate_hz = header.at("rate_hz").get<double>();
    rec.subject = header.at("subject").get<int>();
    if (header.contains("condition") && !header["condition"].is_null())
      rec.condition = header["condition"].get<int>();
    for (const auto& s : header.at("segments"))
      rec.segments.push_back({parse_segment(s.at("tag").get<std::string>()),
                              s.at("start").get<std::size_t>(), s.at("end").get<std::size_t>()});
    const auto n = header.at("n_samples").get<std::size_t>();
    auto data_path = header_path.parent_path() / header.at("samples_file").get<std::string>();
    std::ifstream din(data_path, std::ios::binary);
    if (!din) throw Error(ErrorKind::io, "cannot read " + data_path.string());
    std::vector<unsigned char> buf(rec.channels.size() * n * 4);
    din.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (static_cast<std::size_t>(din.gcount()) != buf.size())
      throw Error(ErrorKind::io, data_path.string() + " is shorter than the header says");
    rec.samples = Matrix(rec.channels.size(), n);
    for (std::size_t i = 0; i < rec.samples.data().size(); ++i) {
      std::uint32_t bits = 0;
      for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(buf[i * 4 + b]) << (8 * b);
      rec.samples.data()[i] = std::bit_cast<float>(bits);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::parse, header_path.string() + ": " + e.what());
  }
  rec.validate();
  return rec;
}

}  // namespace shiftlab::signal
