#pragma once

// Audio ingestion, log-mel extraction, F0 ingestion and synthetic corruption.

#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "stars/annotation.hpp"

namespace stars {

inline constexpr double kMelFloor = 1e-5;

struct Audio {
  std::vector<float> samples;  ///< mono, in [-1, 1]
  int sample_rate = 0;
  int source_channels = 0;
  int source_sample_rate = 0;
};

/// Reads RIFF/WAVE with 16-bit PCM or 32-bit IEEE float samples. Stereo is averaged to mono
/// and the result is linearly resampled to `target_rate` (no resampling when 0).
Audio wav_read(const std::filesystem::path& path, int target_rate = 24000);

/// Writes mono 16-bit PCM. Values are clipped to [-1, 1).
void wav_write_pcm16(const std::filesystem::path& path, std::span<const float> samples, int sample_rate,
                     int channels = 1);

/// Linear interpolation to floor(N * to / from) samples.
std::vector<float> resample_linear(std::span<const float> samples, int from_rate, int to_rate);

struct MelSpectrogram {
  Eigen::MatrixXd values;  ///< T x n_mels, natural log, floored at log(1e-5)
  FrameSpec spec;

  Eigen::Index frames() const { return values.rows(); }
};

/// ceil(num_samples / hop).
Eigen::Index mel_frame_count(std::size_t num_samples, const FrameSpec& spec = {});

/// Triangular HTK-mel filters between 0 Hz and sample_rate/2, peak weight 1 (area-unnormalized).
/// Shape n_mels x (win/2 + 1).
Eigen::MatrixXd mel_filterbank(const FrameSpec& spec = {});

/// Reflect-padded, Hann-windowed STFT magnitude projected onto the mel filterbank.
MelSpectrogram mel_extract(std::span<const float> samples, const FrameSpec& spec = {});

double hz_to_mel_htk(double hz);
double mel_to_hz_htk(double mel);

struct F0Contour {
  Eigen::VectorXd hz;  ///< per frame; 0 marks unvoiced

  Eigen::Index frames() const { return hz.size(); }
  bool voiced(Eigen::Index t) const { return hz(t) > 0.0; }
};

struct F0Point {
  double time = 0.0;
  double hz = 0.0;
};

/// Linearly resamples (time, Hz) pairs onto frame centers i*hop/sample_rate. Frames whose
/// bracketing points include an unvoiced one stay 0; outside the covered range the edge value
/// is held. `num_frames` < 0 means ceil(last_time * sample_rate / hop).
/// Throws stars::Error on non-increasing timestamps or negative frequencies.
F0Contour f0_ingest(std::span<const F0Point> points, const FrameSpec& spec = {}, Eigen::Index num_frames = -1);

/// Fixed-rate series sampled at `rate_hz` points per second.
F0Contour f0_ingest_series(std::span<const double> values, double rate_hz, const FrameSpec& spec = {},
                           Eigen::Index num_frames = -1);

/// Two-column text (seconds, Hz), whitespace or comma separated; `#` starts a comment.
std::vector<F0Point> read_f0_text(const std::filesystem::path& path);

struct NoiseConfig {
  double mel_snr_db = std::numeric_limits<double>::infinity();
  double f0_sigma_semitones = 0.0;
  std::uint64_t seed = 0;
};

/// Adds white Gaussian noise to the mel values at the requested SNR (signal power = mean
/// square of the mel values) and multiplies voiced F0 frames by 2^(e/12), e ~ N(0, sigma^2).
/// Deterministic for a given seed.
std::pair<MelSpectrogram, F0Contour> corrupt(const MelSpectrogram& mel, const F0Contour& f0,
                                             const NoiseConfig& cfg);

}  // namespace stars
