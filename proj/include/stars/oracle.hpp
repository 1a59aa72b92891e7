#pragma once

// Synthetic stand-in for a trained model: turns a ground-truth Annotation into a
// PosteriorGrid with controllable corruption, and generates random valid annotations.

#include <cstdint>
#include <string>
#include <vector>

#include "stars/annotation.hpp"
#include "stars/posterior_grid.hpp"

namespace stars {

struct OracleConfig {
  double label_smoothing = 0.0;     ///< [0,1): mass spread uniformly over the vocabulary
  double boundary_sharpness = 1.0;  ///< (0,1]: probability at boundary peaks, 1-sharpness elsewhere
  int boundary_jitter_frames = 0;   ///< peaks move by a uniform integer in [-j, j]
  double pitch_confusion = 0.0;     ///< [0,1): per-note chance of a +-1 semitone peak
  double technique_flip_prob = 0.0; ///< [0,0.5): per-entry chance of flipping the technique bit
  double style_confusion = 0.0;     ///< [0,1): per-attribute chance of peaking on a wrong category
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument on out-of-range fields.
  void check() const;
};

/// Sorted distinct phoneme labels of `a` plus both silence tokens.
std::vector<std::string> oracle_vocab(const Annotation& a);

/// Builds posteriors whose argmax reproduces `a` when the config is noiseless.
/// `vocab` defaults to oracle_vocab(a); every label of `a` must be in it.
/// Throws stars::Error when some phoneme covers less than one frame.
PosteriorGrid synthesize(const Annotation& a, const FrameSpec& spec, const OracleConfig& cfg,
                         std::vector<std::string> vocab = {}, const StyleVocab& style_vocab = {});

struct GeneratorConfig {
  std::size_t n_phones = 24;
  std::vector<std::string> vocab;   ///< sung phoneme inventory; empty selects a built-in set
  double mean_phone_seconds = 0.12; ///< median of the log-normal phoneme duration
  double silence_prob = 0.15;       ///< chance of a silence token before each word
  int min_phone_frames = 3;
  int min_note_frames = 4;
  std::uint64_t seed = 0;
  FrameSpec spec;
  StyleVocab style_vocab;
};

/// Built-in sung phoneme inventory used when GeneratorConfig::vocab is empty.
const std::vector<std::string>& default_phoneme_inventory();

/// Frame-aligned random annotation: contiguous phonemes (log-normal durations, at least
/// min_phone_frames), words of 1-4 phonemes, optional silences between words, 1-3 notes
/// per word that never cross word boundaries, random techniques and style.
Annotation random_annotation(const GeneratorConfig& cfg);

}  // namespace stars
