#include "stars/signal.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstring>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include <unsupported/Eigen/FFT>

#include "stars/annotation_json.hpp"
#include "stars/error.hpp"

namespace stars {

namespace {

std::uint32_t le32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}
std::uint16_t le16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | p[1] << 8);
}

void put_le(std::string& out, std::uint32_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

// Index into a signal of length n after repeated reflection (numpy 'reflect' mode).
std::ptrdiff_t reflect_index(std::ptrdiff_t i, std::ptrdiff_t n) {
  if (n == 1) return 0;
  const std::ptrdiff_t period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

}  // namespace

std::vector<float> resample_linear(std::span<const float> samples, int from_rate, int to_rate) {
  if (from_rate <= 0 || to_rate <= 0) throw std::invalid_argument("sample rates must be positive");
  if (from_rate == to_rate || samples.empty()) return {samples.begin(), samples.end()};
  const auto n_out = static_cast<std::size_t>(static_cast<std::uint64_t>(samples.size()) *
                                               static_cast<std::uint64_t>(to_rate) / static_cast<std::uint64_t>(from_rate));
  std::vector<float> out(n_out);
  const double step = static_cast<double>(from_rate) / to_rate;
  for (std::size_t i = 0; i < n_out; ++i) {
    double src = static_cast<double>(i) * step;
    auto i0 = static_cast<std::size_t>(src);
    std::size_t i1 = std::min(i0 + 1, samples.size() - 1);
    double frac = src - static_cast<double>(i0);
    out[i] = static_cast<float>(samples[i0] * (1.0 - frac) + samples[i1] * frac);
  }
  return out;
}

Audio wav_read(const std::filesystem::path& path, int target_rate) {
  const std::string bytes = read_text_file(path);
  const auto* data = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < 12 || std::memcmp(data, "RIFF", 4) != 0 || std::memcmp(data + 8, "WAVE", 4) != 0)
    throw Error(path.string() + ": malformed WAV header (not RIFF/WAVE)");

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  const unsigned char* payload = nullptr;
  std::size_t payload_size = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    std::uint32_t size = le32(data + pos + 4);
    const unsigned char* body = data + pos + 8;
    std::size_t avail = bytes.size() - pos - 8;
    if (std::memcmp(data + pos, "fmt ", 4) == 0) {
      if (size < 16 || avail < 16) throw Error(path.string() + ": malformed fmt chunk");
      format = le16(body);
      channels = le16(body + 2);
      rate = le32(body + 4);
      bits = le16(body + 14);
      if (format == kFormatExtensible) {
        if (size < 40 || avail < 40) throw Error(path.string() + ": malformed extensible fmt chunk");
        format = le16(body + 24);  // first two bytes of the sub-format GUID
      }
      have_fmt = true;
    } else if (std::memcmp(data + pos, "data", 4) == 0) {
      payload = body;
      payload_size = std::min<std::size_t>(size, avail);
      break;
    }
    pos += 8 + size + (size & 1u);
  }
  if (!have_fmt) throw Error(path.string() + ": malformed WAV header (no fmt chunk)");
  if (!payload) throw Error(path.string() + ": malformed WAV header (no data chunk)");
  if (channels == 0 || rate == 0) throw Error(path.string() + ": malformed WAV header (zero channels or rate)");

  const bool pcm16 = format == kFormatPcm && bits == 16;
  const bool f32 = format == kFormatFloat && bits == 32;
  if (!pcm16 && !f32)
    throw Error(path.string() + ": unsupported codec (format " + std::to_string(format) + ", " +
                std::to_string(bits) + " bits)");

  const std::size_t width = bits / 8;
  const std::size_t frames = payload_size / (width * channels);
  std::vector<float> mono(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    double sum = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      const unsigned char* p = payload + (i * channels + c) * width;
      if (pcm16)
        sum += static_cast<std::int16_t>(le16(p)) / 32768.0;
      else
        sum += std::bit_cast<float>(le32(p));
    }
    mono[i] = static_cast<float>(sum / channels);
  }

  Audio audio;
  audio.source_channels = channels;
  audio.source_sample_rate = static_cast<int>(rate);
  if (target_rate > 0 && static_cast<int>(rate) != target_rate) {
    audio.samples = resample_linear(mono, static_cast<int>(rate), target_rate);
    audio.sample_rate = target_rate;
  } else {
    audio.samples = std::move(mono);
    audio.sample_rate = static_cast<int>(rate);
  }
  return audio;
}

void wav_write_pcm16(const std::filesystem::path& path, std::span<const float> samples, int sample_rate,
                     int channels) {
  std::string out = "RIFF";
  const auto data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
  put_le(out, 36 + data_bytes, 4);
  out += "WAVEfmt ";
  put_le(out, 16, 4);
  put_le(out, kFormatPcm, 2);
  put_le(out, static_cast<std::uint32_t>(channels), 2);
  put_le(out, static_cast<std::uint32_t>(sample_rate), 4);
  put_le(out, static_cast<std::uint32_t>(sample_rate * channels * 2), 4);
  put_le(out, static_cast<std::uint32_t>(channels * 2), 2);
  put_le(out, 16, 2);
  out += "data";
  put_le(out, data_bytes, 4);
  for (float s : samples) {
    double v = std::clamp(static_cast<double>(s), -1.0, 32767.0 / 32768.0);
    put_le(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(std::lround(v * 32768.0))), 2);
  }
  write_text_file(path, out);
}

double hz_to_mel_htk(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz_htk(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

Eigen::Index mel_frame_count(std::size_t num_samples, const FrameSpec& spec) {
  const auto hop = static_cast<std::size_t>(spec.hop);
  return static_cast<Eigen::Index>((num_samples + hop - 1) / hop);
}

Eigen::MatrixXd mel_filterbank(const FrameSpec& spec) {
  const int n_bins = spec.win / 2 + 1;
  const double fmax = spec.sample_rate / 2.0;
  const double mel_max = hz_to_mel_htk(fmax);
  Eigen::VectorXd edges(spec.n_mels + 2);
  for (int i = 0; i < spec.n_mels + 2; ++i) edges(i) = mel_to_hz_htk(mel_max * i / (spec.n_mels + 1));

  Eigen::MatrixXd fb = Eigen::MatrixXd::Zero(spec.n_mels, n_bins);
  for (int m = 0; m < spec.n_mels; ++m) {
    const double lo = edges(m), center = edges(m + 1), hi = edges(m + 2);
    for (int k = 0; k < n_bins; ++k) {
      const double f = static_cast<double>(k) * spec.sample_rate / spec.win;
      const double w = std::min((f - lo) / (center - lo), (hi - f) / (hi - center));
      fb(m, k) = std::max(0.0, w);
    }
  }
  return fb;
}

MelSpectrogram mel_extract(std::span<const float> samples, const FrameSpec& spec) {
  spec.check();
  if (samples.empty()) throw std::invalid_argument("mel_extract: empty input");

  const Eigen::Index frames = mel_frame_count(samples.size(), spec);
  const int win = spec.win;
  const int n_bins = win / 2 + 1;
  const auto n = static_cast<std::ptrdiff_t>(samples.size());
  const std::ptrdiff_t pad = win / 2;

  Eigen::VectorXd window(win);
  for (int i = 0; i < win; ++i) window(i) = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / win);

  const Eigen::MatrixXd fb = mel_filterbank(spec);
  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);

  std::vector<double> frame(static_cast<std::size_t>(win));
  std::vector<std::complex<double>> spectrum;
  Eigen::VectorXd magnitude(n_bins);

  MelSpectrogram mel;
  mel.spec = spec;
  mel.values.resize(frames, spec.n_mels);
  for (Eigen::Index t = 0; t < frames; ++t) {
    const std::ptrdiff_t start = t * spec.hop - pad;
    for (int i = 0; i < win; ++i)
      frame[static_cast<std::size_t>(i)] = samples[static_cast<std::size_t>(reflect_index(start + i, n))] * window(i);
    fft.fwd(spectrum, frame);
    for (int k = 0; k < n_bins; ++k) magnitude(k) = std::abs(spectrum[static_cast<std::size_t>(k)]);
    mel.values.row(t) = (fb * magnitude).cwiseMax(kMelFloor).array().log().transpose();
  }
  return mel;
}

F0Contour f0_ingest(std::span<const F0Point> points, const FrameSpec& spec, Eigen::Index num_frames) {
  if (points.empty()) throw Error("f0_ingest: no points");
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i].hz < 0) throw Error("f0_ingest: negative frequency at point " + std::to_string(i));
    if (i > 0 && !(points[i].time > points[i - 1].time))
      throw Error("f0_ingest: non-monotone timestamps at point " + std::to_string(i));
  }
  if (num_frames < 0)
    num_frames = static_cast<Eigen::Index>(std::ceil(points.back().time * spec.frames_per_second() - 1e-9));

  F0Contour f0{Eigen::VectorXd::Zero(num_frames)};
  std::size_t j = 0;
  for (Eigen::Index t = 0; t < num_frames; ++t) {
    const double time = frame_to_time(t, spec);
    if (time <= points.front().time) {
      f0.hz(t) = points.front().hz;
      continue;
    }
    if (time >= points.back().time) {
      f0.hz(t) = points.back().hz;
      continue;
    }
    while (points[j + 1].time < time) ++j;
    const auto& a = points[j];
    const auto& b = points[j + 1];
    if (a.hz <= 0.0 || b.hz <= 0.0) continue;
    const double frac = (time - a.time) / (b.time - a.time);
    f0.hz(t) = a.hz + frac * (b.hz - a.hz);
  }
  return f0;
}

F0Contour f0_ingest_series(std::span<const double> values, double rate_hz, const FrameSpec& spec,
                           Eigen::Index num_frames) {
  if (!(rate_hz > 0)) throw std::invalid_argument("f0 series rate must be positive");
  std::vector<F0Point> points(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) points[i] = {static_cast<double>(i) / rate_hz, values[i]};
  return f0_ingest(points, spec, num_frames);
}

std::vector<F0Point> read_f0_text(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  std::vector<F0Point> points;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream fields(line);
    F0Point p;
    if (!(fields >> p.time)) continue;
    if (!(fields >> p.hz)) throw ParseError("expected two columns (seconds, Hz)", line_no);
    points.push_back(p);
  }
  return points;
}

std::pair<MelSpectrogram, F0Contour> corrupt(const MelSpectrogram& mel, const F0Contour& f0, const NoiseConfig& cfg) {
  if (cfg.f0_sigma_semitones < 0) throw std::invalid_argument("f0 sigma must be non-negative");
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  MelSpectrogram noisy_mel = mel;
  if (std::isfinite(cfg.mel_snr_db) && mel.values.size() > 0) {
    const double signal_power = mel.values.squaredNorm() / static_cast<double>(mel.values.size());
    const double noise_std = std::sqrt(signal_power / std::pow(10.0, cfg.mel_snr_db / 10.0));
    for (Eigen::Index i = 0; i < noisy_mel.values.size(); ++i) noisy_mel.values(i) += noise_std * normal(rng);
  }

  F0Contour noisy_f0 = f0;
  if (cfg.f0_sigma_semitones > 0) {
    for (Eigen::Index t = 0; t < f0.frames(); ++t) {
      if (!f0.voiced(t)) continue;
      noisy_f0.hz(t) = f0.hz(t) * std::exp2(cfg.f0_sigma_semitones * normal(rng) / 12.0);
    }
  }
  return {std::move(noisy_mel), std::move(noisy_f0)};
}

}  // namespace stars
