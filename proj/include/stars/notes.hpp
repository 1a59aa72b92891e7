#pragma once

// Note transcription: boundary decoding constrained by word boundaries, segment pitch
// decoding, and the weighted segment aggregation used when model features are available.

#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "stars/aligner.hpp"
#include "stars/annotation.hpp"
#include "stars/posterior_grid.hpp"

namespace stars {

struct NoteBoundaryConfig {
  double threshold = 0.5;
  Eigen::Index min_gap_frames = 4;   ///< non-maximum suppression radius (exclusive)
  Eigen::Index min_note_frames = 4;  ///< 20 ms at the default frame rate

  /// min_note_frames derived from a duration in seconds.
  static NoteBoundaryConfig for_spec(const FrameSpec& spec, double min_note_seconds = 0.02);
};

struct NoteSegmentation {
  std::vector<Eigen::Index> boundaries;  ///< sorted, starts at 0 and ends at T

  std::vector<FrameSegment> segments() const;
};

/// Candidates with prob >= threshold, reduced by NMS (higher prob wins, earlier frame on ties),
/// unioned with the word boundaries, 0 and T. Segments shorter than min_note_frames lose their
/// weaker non-word boundary; word boundaries are never removed.
NoteSegmentation decode_note_boundaries(const Eigen::VectorXf& note_boundary_prob,
                                        std::span<const Eigen::Index> word_boundaries,
                                        const NoteBoundaryConfig& cfg = {});

struct PitchDecodeConfig {
  /// Emit REST events for silent segments instead of dropping them.
  bool keep_silent_notes = false;
};

/// Argmax of the frame-averaged pitch log-probabilities per segment (lowest class on ties).
/// Segments decoded as REST, or covered by silence for more than half their frames, are
/// dropped unless keep_silent_notes is set, in which case they become REST events.
std::vector<NoteEvent> decode_pitch(const PosteriorGrid& grid, const NoteSegmentation& seg,
                                    std::span<const FrameSegment> silence_segments,
                                    const PitchDecodeConfig& cfg = {});

/// 69 + 12 log2(f / 440). Throws std::invalid_argument for f <= 0.
double hz_to_midi(double hz);

/// c = sum_t w(t) x_t with w = softmax over rows of features * W_a.
template <typename DerivedX, typename DerivedW>
Eigen::Matrix<typename DerivedX::Scalar, 1, Eigen::Dynamic> cif_aggregate(const Eigen::MatrixBase<DerivedX>& features,
                                                                        const Eigen::MatrixBase<DerivedW>& w_a) {
  using Scalar = typename DerivedX::Scalar;
  if (features.rows() < 1) throw std::invalid_argument("cif_aggregate: empty segment");
  if (w_a.rows() != features.cols() || w_a.cols() != 1)
    throw std::invalid_argument("cif_aggregate: W_a must be D x 1");
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> logits = features * w_a;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> w = (logits.array() - logits.maxCoeff()).exp();
  w /= w.sum();
  return w.transpose() * features;
}

}  // namespace stars
