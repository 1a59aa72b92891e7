#pragma once

// Frame-level posteriors exchanged between a model (or the oracle) and the decoders,
// plus the on-disk `<name>.json` + `<name>.f32` representation.

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "stars/annotation.hpp"

namespace stars {

using RowMatrixXf = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct PosteriorGrid {
  FrameSpec spec;
  std::vector<std::string> phoneme_vocab;
  StyleVocab style_vocab;

  RowMatrixXf phoneme_logprob;       ///< T x |V|, log domain
  Eigen::VectorXf silence_logprob;   ///< T, log domain
  Eigen::VectorXf boundary_prob;     ///< T, phone boundary probability
  Eigen::VectorXf note_boundary_prob;///< T
  RowMatrixXf pitch_logprob;         ///< T x 129, log domain (class 128 = REST)
  RowMatrixXf technique_prob;        ///< L_p x 9
  std::array<Eigen::VectorXf, kNumStyleAttributes> style_prob;

  Eigen::Index frames() const { return phoneme_logprob.rows(); }
  Eigen::Index num_phonemes() const { return technique_prob.rows(); }

  /// Vocabulary index of `token`, or -1.
  int vocab_index(const std::string& token) const;

  /// Throws DimensionError if any matrix disagrees with T, |V|, or the style vocabularies.
  void check_dimensions() const;

  friend bool operator==(const PosteriorGrid& a, const PosteriorGrid& b);
};

/// Writes `<stem>.json` and `<stem>.f32` (little-endian float32, row-major,
/// matrices in declaration order). `stem` is a path without extension.
void write_posterior_grid(const PosteriorGrid& grid, const std::filesystem::path& stem);
PosteriorGrid read_posterior_grid(const std::filesystem::path& stem);

}  // namespace stars
