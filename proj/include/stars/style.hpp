#pragma once

// Technique and global-style decoding, and the cross-attention pooling operator that
// produces attribute queries from sequence features.

#include <array>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

#include "stars/annotation.hpp"
#include "stars/posterior_grid.hpp"

namespace stars {

/// Bit = prob >= threshold; rows of silence phonemes are zero.
/// Throws DimensionError unless prob is |phonemes| x 9.
TechniqueMatrix decode_techniques(const RowMatrixXf& technique_prob, std::span<const std::string> phonemes,
                                  double threshold = 0.5);

/// Argmax per attribute, lowest index on ties. Throws DimensionError on length mismatch.
GlobalStyle decode_global_style(const std::array<Eigen::VectorXf, kNumStyleAttributes>& style_prob,
                                const StyleVocab& vocab = {});

/// Softmax(Q S^T / sqrt(D)) S, the softmax taken over the rows of S.
template <typename DerivedQ, typename DerivedS>
Eigen::Matrix<typename DerivedQ::Scalar, Eigen::Dynamic, Eigen::Dynamic> cross_attention_pool(
    const Eigen::MatrixBase<DerivedQ>& queries, const Eigen::MatrixBase<DerivedS>& keys_values) {
  using Scalar = typename DerivedQ::Scalar;
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  if (keys_values.rows() == 0) throw std::invalid_argument("cross_attention_pool: empty key sequence");
  if (queries.cols() == 0 || queries.cols() != keys_values.cols())
    throw std::invalid_argument("cross_attention_pool: query and key dimensions differ");
  Mat scores = (queries * keys_values.transpose()) / std::sqrt(static_cast<Scalar>(queries.cols()));
  for (Eigen::Index q = 0; q < scores.rows(); ++q) {
    scores.row(q).array() = (scores.row(q).array() - scores.row(q).maxCoeff()).exp();
    scores.row(q) /= scores.row(q).sum();
  }
  return scores * keys_values;
}

}  // namespace stars
