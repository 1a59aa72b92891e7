#pragma once

// End-to-end decoding of one utterance: alignment, note boundaries, pitch, techniques, style.

#include "stars/annotation.hpp"
#include "stars/notes.hpp"
#include "stars/posterior_grid.hpp"

namespace stars {

struct DecodeConfig {
  NoteBoundaryConfig notes;
  PitchDecodeConfig pitch;
  double technique_threshold = 0.5;
};

/// Decodes `grid` against the known lyric. Throws stars::Error when T < L_p, a token is
/// missing from the vocabulary, or the grid's technique rows disagree with the lyric.
Annotation decode_annotation(const PosteriorGrid& grid, const Lyric& lyric, const DecodeConfig& cfg = {});

}  // namespace stars
