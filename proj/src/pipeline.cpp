#include "stars/pipeline.hpp"

#include "stars/aligner.hpp"
#include "stars/error.hpp"
#include "stars/style.hpp"

namespace stars {

Annotation decode_annotation(const PosteriorGrid& grid, const Lyric& lyric, const DecodeConfig& cfg) {
  grid.check_dimensions();
  if (grid.technique_prob.rows() != static_cast<Eigen::Index>(lyric.size()))
    throw DimensionError("grid has technique rows for " + std::to_string(grid.technique_prob.rows()) +
                         " phonemes, lyric has " + std::to_string(lyric.size()));

  const AlignmentPath path = viterbi_align(grid, lyric.tokens);
  Segmentation seg = derive_boundaries(path, lyric, grid.spec);
  absorb_blank_silences(seg, lyric, grid.spec);

  std::vector<Eigen::Index> word_bounds;
  for (const auto& w : seg.word_frames) {
    word_bounds.push_back(w.onset);
    word_bounds.push_back(w.offset);
  }
  std::vector<FrameSegment> silences;
  for (std::size_t i = 0; i < seg.phonemes.size(); ++i)
    if (is_silence(seg.phonemes[i].label)) silences.push_back(seg.phoneme_frames[i]);

  const NoteSegmentation notes = decode_note_boundaries(grid.note_boundary_prob, word_bounds, cfg.notes);

  Annotation a;
  a.notes = decode_pitch(grid, notes, silences, cfg.pitch);

  const TechniqueMatrix per_token = decode_techniques(grid.technique_prob, lyric.tokens, cfg.technique_threshold);
  a.techniques = TechniqueMatrix::Zero(static_cast<Eigen::Index>(seg.phonemes.size()), kNumTechniques);
  for (std::size_t i = 0; i < seg.phonemes.size(); ++i)
    if (seg.token_of_segment[i] != kNoWord)
      a.techniques.row(static_cast<Eigen::Index>(i)) = per_token.row(static_cast<Eigen::Index>(seg.token_of_segment[i]));

  a.style = decode_global_style(grid.style_prob, grid.style_vocab);
  a.phonemes = std::move(seg.phonemes);
  a.words = std::move(seg.words);
  a.duration = frame_to_time(grid.frames(), grid.spec);
  return a;
}

}  // namespace stars
