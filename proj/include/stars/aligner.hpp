#pragma once

// Viterbi forced alignment of a known phoneme sequence over a (2L+1)-state lattice that
// interleaves blank states (even k) with phoneme states (odd k).
//
// Scores: state k at frame t emits phoneme_logprob[t][token (k-1)/2] (odd k) or
// silence_logprob[t] (even k). Entering frame t >= 1 by STAY adds log(1 - boundary_prob[t]);
// STEP (k-1 -> k) and SKIP (k-2 -> k, phoneme to phoneme only) add log(boundary_prob[t]).
// Probabilities and log-probabilities are floored at 1e-10 before use. Paths start in state 0
// or 1 and end in state 2L-1 or 2L. Ties prefer STAY, then STEP, then SKIP, and at the final
// frame the phoneme state 2L-1.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "stars/annotation.hpp"
#include "stars/posterior_grid.hpp"

namespace stars {

enum class Transition : std::uint8_t { kStay = 0, kStep = 1, kSkip = 2, kNone = 3 };

/// Full score and backpointer matrices. Memory is O(T * (2L+1)); intended for inspection of
/// small problems. viterbi_align keeps only two score rows.
struct AlignmentLattice {
  Eigen::MatrixXd scores;  ///< T x (2L+1), -inf where unreachable
  /// Transition codes (static_cast<std::uint8_t>(Transition)), same shape as scores.
  Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> back;
};

struct AlignmentPath {
  std::vector<int> states;  ///< lattice state per frame
  double score = 0.0;

  /// Lattice size 2L+1 is needed to check termination.
  bool is_valid(int num_phonemes) const;
};

/// Resolves lyric tokens to vocabulary columns; throws stars::Error for unknown tokens.
std::vector<int> token_columns(const PosteriorGrid& grid, std::span<const std::string> phonemes);

/// Log emission of lattice state k at frame t.
double emission_score(const PosteriorGrid& grid, Eigen::Index t, int k, std::span<const int> columns);
double emission_score(const PosteriorGrid& grid, Eigen::Index t, int k, std::span<const std::string> phonemes);

/// Log transition weight for entering frame t (t >= 1) with the given move.
double transition_score(const PosteriorGrid& grid, Eigen::Index t, Transition move);

/// True when SKIP may enter state k.
inline bool skip_allowed(int k) { return k >= 3 && k % 2 == 1; }

/// Total path score under the rules above (emissions plus transitions); -inf for illegal paths.
double path_score(const PosteriorGrid& grid, std::span<const int> columns, std::span<const int> states);

AlignmentLattice build_lattice(const PosteriorGrid& grid, std::span<const std::string> phonemes);

/// Exact O(T * L) Viterbi. Needs 1 <= L <= T; throws stars::Error otherwise or when no legal
/// path has finite score.
AlignmentPath viterbi_align(const PosteriorGrid& grid, std::span<const std::string> phonemes);

/// Exhaustive enumeration of every legal path (test oracle). Limited to T <= 12 and L <= 4.
AlignmentPath brute_force_align(const PosteriorGrid& grid, std::span<const std::string> phonemes);

/// Decoded segmentation with frame spans kept alongside the seconds.
struct FrameSegment {
  Eigen::Index onset = 0;
  Eigen::Index offset = 0;  ///< exclusive
};

struct Segmentation {
  std::vector<PhonemeSegment> phonemes;
  std::vector<FrameSegment> phoneme_frames;
  /// Lyric token index for each phoneme segment, or kNoWord for blank-state silence.
  std::vector<std::size_t> token_of_segment;
  std::vector<WordSegment> words;
  std::vector<FrameSegment> word_frames;
};

/// Phoneme spans are the frames spent in each phoneme state; runs of blank frames become
/// "<SP>" segments outside any word. Words span their member phonemes.
Segmentation derive_boundaries(const AlignmentPath& path, const Lyric& lyric, const FrameSpec& spec);

/// Merges every blank-state segment into a neighbour so the segments match the lyric tokens.
/// An adjacent silence token is preferred (the preceding one when both qualify); otherwise the
/// run extends the preceding phoneme, or the following one at the start of the utterance.
void absorb_blank_silences(Segmentation& seg, const Lyric& lyric, const FrameSpec& spec);

}  // namespace stars
