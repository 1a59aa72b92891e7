#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "stars/annotation.hpp"
#include "stars/posterior_grid.hpp"

namespace stars::test {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// Grid with random log-softmax phoneme rows over `vocab`, random silence log-probs and
// boundary probabilities. Pitch/technique/style parts are filled with valid placeholders.
PosteriorGrid random_grid(std::mt19937_64& rng, Eigen::Index frames, const std::vector<std::string>& vocab,
                          Eigen::Index num_phonemes);

// Phonemes with given frame lengths and labels, each its own word unless it is silence.
Annotation frame_annotation(const std::vector<std::string>& labels, const std::vector<Eigen::Index>& lengths,
                            const FrameSpec& spec = {});

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);

}  // namespace stars::test
