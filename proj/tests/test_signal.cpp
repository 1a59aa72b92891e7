#include <doctest.h>

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include "stars/error.hpp"
#include "stars/signal.hpp"
#include "support.hpp"

using namespace stars;

namespace {

// Hand-assembled RIFF/WAVE file.
void write_wav(const std::filesystem::path& path, int format, int channels, int rate, int bits,
               const std::vector<std::uint8_t>& data) {
  std::vector<std::uint8_t> b;
  auto u32 = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  };
  auto u16 = [&](std::uint16_t v) {
    b.push_back(static_cast<std::uint8_t>(v));
    b.push_back(static_cast<std::uint8_t>(v >> 8));
  };
  auto tag = [&](const char* s) { b.insert(b.end(), s, s + 4); };
  tag("RIFF");
  u32(static_cast<std::uint32_t>(36 + data.size()));
  tag("WAVE");
  tag("fmt ");
  u32(16);
  u16(static_cast<std::uint16_t>(format));
  u16(static_cast<std::uint16_t>(channels));
  u32(static_cast<std::uint32_t>(rate));
  u32(static_cast<std::uint32_t>(rate * channels * bits / 8));
  u16(static_cast<std::uint16_t>(channels * bits / 8));
  u16(static_cast<std::uint16_t>(bits));
  tag("data");
  u32(static_cast<std::uint32_t>(data.size()));
  b.insert(b.end(), data.begin(), data.end());
  std::ofstream(path, std::ios::binary).write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
}

std::vector<std::uint8_t> pcm16(const std::vector<int>& v) {
  std::vector<std::uint8_t> out;
  for (int x : v) {
    const auto u = static_cast<std::uint16_t>(static_cast<std::int16_t>(x));
    out.push_back(static_cast<std::uint8_t>(u));
    out.push_back(static_cast<std::uint8_t>(u >> 8));
  }
  return out;
}

std::vector<float> sine(double hz, std::size_t n, int rate) {
  std::vector<float> s(n);
  for (std::size_t i = 0; i < n; ++i) s[i] = static_cast<float>(0.5 * std::sin(2 * std::numbers::pi * hz * static_cast<double>(i) / rate));
  return s;
}

}  // namespace

TEST_CASE("wav_read handles PCM16 silence and normalization") {
  test::TempDir dir("wav");
  write_wav(dir / "silence.wav", 1, 1, 24000, 16, pcm16(std::vector<int>(24000, 0)));
  const Audio a = wav_read(dir / "silence.wav");
  CHECK(a.samples.size() == 24000);
  CHECK(std::all_of(a.samples.begin(), a.samples.end(), [](float x) { return x == 0.0f; }));

  write_wav(dir / "max.wav", 1, 1, 24000, 16, pcm16({32767, -32768, 16384}));
  const Audio m = wav_read(dir / "max.wav");
  REQUIRE(m.samples.size() == 3);
  CHECK(m.samples[0] == doctest::Approx(32767.0 / 32768.0));
  CHECK(m.samples[1] == -1.0f);
  CHECK(m.samples[2] == 0.5f);
}

TEST_CASE("wav_read averages stereo and resamples 48 kHz") {
  test::TempDir dir("wav2");
  write_wav(dir / "stereo.wav", 1, 2, 24000, 16, pcm16({16384, 0, -16384, -16384}));
  const Audio s = wav_read(dir / "stereo.wav");
  CHECK(s.source_channels == 2);
  REQUIRE(s.samples.size() == 2);
  CHECK(s.samples[0] == 0.25f);
  CHECK(s.samples[1] == -0.5f);

  write_wav(dir / "hi.wav", 1, 1, 48000, 16, pcm16(std::vector<int>(4800, 1000)));
  const Audio h = wav_read(dir / "hi.wav");
  CHECK(h.source_sample_rate == 48000);
  CHECK(h.samples.size() == 2400);
}

TEST_CASE("wav_read reads IEEE float and round trips the PCM writer") {
  test::TempDir dir("wav3");
  std::vector<std::uint8_t> data;
  for (float x : {0.25f, -0.75f}) {
    const auto bits = std::bit_cast<std::uint32_t>(x);
    for (int i = 0; i < 4; ++i) data.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
  }
  write_wav(dir / "f.wav", 3, 1, 24000, 32, data);
  const Audio f = wav_read(dir / "f.wav");
  REQUIRE(f.samples.size() == 2);
  CHECK(f.samples[1] == -0.75f);

  const std::vector<float> tone = sine(440, 1000, 24000);
  wav_write_pcm16(dir / "t.wav", tone, 24000);
  const Audio t = wav_read(dir / "t.wav");
  REQUIRE(t.samples.size() == tone.size());
  for (std::size_t i = 0; i < tone.size(); ++i) CHECK(std::abs(t.samples[i] - tone[i]) <= 1.0f / 32768.0f);
}

TEST_CASE("wav_read rejects unsupported codecs and bad headers") {
  test::TempDir dir("wav4");
  write_wav(dir / "adpcm.wav", 2, 1, 24000, 4, std::vector<std::uint8_t>(10, 0));
  try {
    wav_read(dir / "adpcm.wav");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("unsupported codec") != std::string::npos);
  }
  std::ofstream(dir / "junk.wav") << "not a wave file at all";
  CHECK_THROWS_AS(wav_read(dir / "junk.wav"), Error);
  CHECK_THROWS_AS(wav_read(dir / "missing.wav"), Error);
}

TEST_CASE("mel frame count") {
  CHECK(mel_frame_count(24000) == 188);
  CHECK(mel_frame_count(128) == 1);
  CHECK(mel_frame_count(129) == 2);
  const MelSpectrogram m = mel_extract(sine(220, 24000, 24000));
  CHECK(m.frames() == 188);
  CHECK(m.values.cols() == 80);
}

TEST_CASE("all-zero audio gives the log floor everywhere") {
  const MelSpectrogram m = mel_extract(std::vector<float>(24000, 0.0f));
  CHECK(m.frames() == 188);
  CHECK((m.values.array() == std::log(1e-5)).all());
}

TEST_CASE("mel_extract rejects empty input") {
  CHECK_THROWS(mel_extract(std::vector<float>{}));
}

TEST_CASE("filterbank geometry") {
  const FrameSpec spec;
  const Eigen::MatrixXd fb = mel_filterbank(spec);
  CHECK(fb.rows() == 80);
  CHECK(fb.cols() == 257);
  CHECK(fb.minCoeff() >= 0.0);
  CHECK(fb.maxCoeff() <= 1.0 + 1e-12);
  CHECK(hz_to_mel_htk(700.0) == doctest::Approx(2595.0 * std::log10(2.0)));
  CHECK(mel_to_hz_htk(hz_to_mel_htk(1234.5)) == doctest::Approx(1234.5));
}

TEST_CASE("1 kHz sine peaks in the filter centred nearest 1 kHz") {
  // Filter centres from the HTK formula, computed independently of the library.
  const double top = 2595.0 * std::log10(1.0 + 12000.0 / 700.0);
  int expected = 0;
  double best = 1e9;
  for (int m = 0; m < 80; ++m) {
    const double mel = top * (m + 1) / 81.0;
    const double hz = 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
    if (std::abs(hz - 1000.0) < best) best = std::abs(hz - 1000.0), expected = m;
  }
  const MelSpectrogram mel = mel_extract(sine(1000, 24000, 24000));
  for (Eigen::Index t = 2; t < mel.frames() - 2; ++t) {
    Eigen::Index arg = 0;
    mel.values.row(t).maxCoeff(&arg);
    CHECK(std::abs(arg - expected) <= 1);
    if (t == 50) CHECK(arg == expected);
  }
}

TEST_CASE("mel_extract is shift covariant by one hop") {
  std::mt19937_64 rng(4);
  std::normal_distribution<float> n(0.0f, 0.3f);
  std::vector<float> x(6000);
  for (auto& v : x) v = n(rng);
  std::vector<float> shifted(128, 0.0f);
  shifted.insert(shifted.end(), x.begin(), x.end());
  const auto a = mel_extract(x), b = mel_extract(shifted);
  for (Eigen::Index t = 4; t < a.frames() - 4; ++t)
    CHECK((a.values.row(t) - b.values.row(t + 1)).cwiseAbs().maxCoeff() <= 1e-5);
}

TEST_CASE("f0_ingest examples") {
  const std::vector<F0Point> flat = {{0.0, 220.0}, {1.0, 220.0}};
  const F0Contour c = f0_ingest(flat);
  CHECK(c.frames() == 188);
  CHECK((c.hz.array() == 220.0).all());

  const std::vector<F0Point> ramp = {{0.0, 200.0}, {1.0, 300.0}};
  const F0Contour r = f0_ingest(ramp);
  CHECK(r.hz(94) == doctest::Approx(250.0).epsilon(0.004));

  const std::vector<F0Point> bad = {{0.0, 200.0}, {0.5, 210.0}, {0.4, 220.0}};
  CHECK_THROWS_AS(f0_ingest(bad), Error);
}

TEST_CASE("f0_ingest keeps unvoiced gaps and matches the mel length") {
  const std::vector<F0Point> pts = {{0.0, 200.0}, {0.3, 200.0}, {0.31, 0.0}, {0.6, 0.0}, {0.61, 180.0}, {1.0, 180.0}};
  const F0Contour c = f0_ingest(pts, {}, mel_frame_count(24000));
  CHECK(c.frames() == 188);
  CHECK(c.hz(time_to_frame(0.45)) == 0.0);
  CHECK(c.hz(time_to_frame(0.1)) == 200.0);
  CHECK(c.hz(time_to_frame(0.8)) == 180.0);

  const std::vector<double> series(100, 150.0);
  const F0Contour s = f0_ingest_series(series, 100.0);
  CHECK(s.frames() > 0);
  CHECK((s.hz.array() == 150.0).all());
}

TEST_CASE("corrupt is identity without noise and deterministic with it") {
  const MelSpectrogram mel = mel_extract(sine(300, 4800, 24000));
  F0Contour f0;
  f0.hz = Eigen::VectorXd::Constant(mel.frames(), 220.0);
  auto [m0, f00] = corrupt(mel, f0, {});
  CHECK(m0.values == mel.values);
  CHECK(f00.hz == f0.hz);

  NoiseConfig cfg{10.0, 0.5, 77};
  auto [m1, f1] = corrupt(mel, f0, cfg);
  auto [m2, f2] = corrupt(mel, f0, cfg);
  CHECK(m1.values == m2.values);
  CHECK(f1.hz == f2.hz);
  CHECK(m1.values != mel.values);
}

TEST_CASE("mel noise follows the requested SNR") {
  MelSpectrogram mel;
  mel.values = Eigen::MatrixXd::Constant(200, 80, -3.0);
  auto [noisy, _] = corrupt(mel, {}, {20.0, 0.0, 5});
  const double noise_power = (noisy.values - mel.values).squaredNorm() / static_cast<double>(mel.values.size());
  const double snr = 10.0 * std::log10(9.0 / noise_power);
  CHECK(snr == doctest::Approx(20.0).epsilon(0.01));
}

TEST_CASE("f0 jitter has the requested spread on voiced frames only") {
  F0Contour f0;
  f0.hz = Eigen::VectorXd::Constant(10000, 220.0);
  f0.hz(17) = 0.0;
  MelSpectrogram mel;
  mel.values = Eigen::MatrixXd::Zero(10000, 1);
  auto [_, noisy] = corrupt(mel, f0, {std::numeric_limits<double>::infinity(), 1.0, 123});
  CHECK(noisy.hz(17) == 0.0);
  double sum = 0, sq = 0;
  int n = 0;
  for (Eigen::Index t = 0; t < noisy.frames(); ++t) {
    if (t == 17) continue;
    const double e = 12.0 * std::log2(noisy.hz(t) / 220.0);
    sum += e, sq += e * e, ++n;
  }
  const double mean = sum / n;
  const double sd = std::sqrt(sq / n - mean * mean);
  CHECK(std::abs(sd - 1.0) <= 0.1);
  CHECK_THROWS(corrupt(mel, f0, {std::numeric_limits<double>::infinity(), -1.0, 0}));
}
