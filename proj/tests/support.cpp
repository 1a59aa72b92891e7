#include "support.hpp"

#include <atomic>
#include <fstream>
#include <iterator>
#include <unistd.h>

namespace stars::test {

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  path_ = std::filesystem::temp_directory_path() /
          ("stars-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  std::filesystem::remove_all(path_);
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

PosteriorGrid random_grid(std::mt19937_64& rng, Eigen::Index frames, const std::vector<std::string>& vocab,
                          Eigen::Index num_phonemes) {
  std::uniform_real_distribution<double> logit(-3.0, 3.0), prob(0.02, 0.98);
  PosteriorGrid g;
  g.phoneme_vocab = vocab;
  const auto v = static_cast<Eigen::Index>(vocab.size());
  g.phoneme_logprob.resize(frames, v);
  g.silence_logprob.resize(frames);
  g.boundary_prob.resize(frames);
  g.note_boundary_prob = Eigen::VectorXf::Zero(frames);
  for (Eigen::Index t = 0; t < frames; ++t) {
    Eigen::VectorXd row(v);
    for (Eigen::Index c = 0; c < v; ++c) row(c) = logit(rng);
    const double lse = std::log(row.array().exp().sum());
    for (Eigen::Index c = 0; c < v; ++c) g.phoneme_logprob(t, c) = static_cast<float>(row(c) - lse);
    g.silence_logprob(t) = static_cast<float>(std::log(prob(rng)));
    g.boundary_prob(t) = static_cast<float>(prob(rng));
  }
  g.pitch_logprob = RowMatrixXf::Constant(frames, kNumPitchClasses, static_cast<float>(-std::log(129.0)));
  g.technique_prob = RowMatrixXf::Zero(num_phonemes, kNumTechniques);
  for (int a = 0; a < kNumStyleAttributes; ++a) {
    const auto n = static_cast<Eigen::Index>(g.style_vocab.size(a));
    g.style_prob[static_cast<std::size_t>(a)] = Eigen::VectorXf::Constant(n, 1.0f / static_cast<float>(n));
  }
  return g;
}

Annotation frame_annotation(const std::vector<std::string>& labels, const std::vector<Eigen::Index>& lengths,
                            const FrameSpec& spec) {
  Annotation a;
  Eigen::Index cursor = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double on = frame_to_time(cursor, spec), off = frame_to_time(cursor + lengths[i], spec);
    std::size_t word = kNoWord;
    if (!is_silence(labels[i])) {
      word = a.words.size();
      a.words.push_back({labels[i], on, off});
      a.notes.push_back({on, off, 60 + static_cast<int>(i % 12)});
    }
    a.phonemes.push_back({labels[i], on, off, word});
    cursor += lengths[i];
  }
  a.techniques = TechniqueMatrix::Zero(static_cast<Eigen::Index>(labels.size()), kNumTechniques);
  a.duration = frame_to_time(cursor, spec);
  return a;
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

}  // namespace stars::test
