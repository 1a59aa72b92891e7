#include "stars/notes.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "stars/error.hpp"

namespace stars {

NoteBoundaryConfig NoteBoundaryConfig::for_spec(const FrameSpec& spec, double min_note_seconds) {
  NoteBoundaryConfig cfg;
  cfg.min_note_frames = std::max<Eigen::Index>(1, time_to_frame(min_note_seconds, spec));
  cfg.min_gap_frames = cfg.min_note_frames;
  return cfg;
}

std::vector<FrameSegment> NoteSegmentation::segments() const {
  std::vector<FrameSegment> out;
  for (std::size_t i = 0; i + 1 < boundaries.size(); ++i) out.push_back({boundaries[i], boundaries[i + 1]});
  return out;
}

NoteSegmentation decode_note_boundaries(const Eigen::VectorXf& prob, std::span<const Eigen::Index> word_boundaries,
                                        const NoteBoundaryConfig& cfg) {
  const Eigen::Index frames = prob.size();

  std::vector<Eigen::Index> candidates;
  for (Eigen::Index t = 1; t < frames; ++t)
    if (prob(t) >= cfg.threshold) candidates.push_back(t);
  std::stable_sort(candidates.begin(), candidates.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return prob(a) > prob(b); });
  std::vector<Eigen::Index> kept;
  for (Eigen::Index c : candidates) {
    bool suppressed = std::any_of(kept.begin(), kept.end(),
                                  [&](Eigen::Index k) { return std::abs(k - c) < cfg.min_gap_frames; });
    if (!suppressed) kept.push_back(c);
  }

  std::set<Eigen::Index> forced{0, frames};
  for (Eigen::Index w : word_boundaries) forced.insert(std::clamp<Eigen::Index>(w, 0, frames));
  std::set<Eigen::Index> all(forced);
  all.insert(kept.begin(), kept.end());
  std::vector<Eigen::Index> b(all.begin(), all.end());

  // Repeatedly drop the weakest free boundary of the shortest too-short segment.
  auto confidence = [&](Eigen::Index f) { return f < frames ? prob(f) : 1.0f; };
  for (;;) {
    std::size_t worst = b.size();
    Eigen::Index worst_len = cfg.min_note_frames;
    for (std::size_t i = 0; i + 1 < b.size(); ++i) {
      const Eigen::Index len = b[i + 1] - b[i];
      const bool removable = !forced.contains(b[i]) || !forced.contains(b[i + 1]);
      if (len < worst_len && removable) worst = i, worst_len = len;
    }
    if (worst == b.size()) break;
    const Eigen::Index left = b[worst], right = b[worst + 1];
    std::size_t drop;
    if (forced.contains(left)) drop = worst + 1;
    else if (forced.contains(right)) drop = worst;
    else drop = confidence(right) < confidence(left) ? worst + 1 : worst;
    b.erase(b.begin() + static_cast<std::ptrdiff_t>(drop));
  }
  return {std::move(b)};
}

std::vector<NoteEvent> decode_pitch(const PosteriorGrid& grid, const NoteSegmentation& seg,
                                    std::span<const FrameSegment> silence_segments, const PitchDecodeConfig& cfg) {
  if (grid.pitch_logprob.cols() != kNumPitchClasses)
    throw DimensionError("pitch posteriors need " + std::to_string(kNumPitchClasses) + " classes");
  const Eigen::Index frames = grid.pitch_logprob.rows();
  if (seg.boundaries.size() < 2 || seg.boundaries.front() != 0 || seg.boundaries.back() != frames)
    throw Error("note segmentation does not cover the grid");

  std::vector<NoteEvent> notes;
  for (const auto& s : seg.segments()) {
    if (s.offset <= s.onset) throw Error("empty note segment");
    Eigen::Index silent = 0;
    for (const auto& z : silence_segments)
      silent += std::max<Eigen::Index>(0, std::min(z.offset, s.offset) - std::max(z.onset, s.onset));

    Eigen::RowVectorXd mean = grid.pitch_logprob.middleRows(s.onset, s.offset - s.onset).cast<double>().colwise().mean();
    Eigen::Index pitch = 0;
    mean.maxCoeff(&pitch);  // first maximum wins

    const bool is_silent = pitch == kRest || 2 * silent > s.offset - s.onset;
    if (is_silent && !cfg.keep_silent_notes) continue;
    notes.push_back({frame_to_time(s.onset, grid.spec), frame_to_time(s.offset, grid.spec),
                     is_silent ? kRest : static_cast<int>(pitch)});
  }
  return notes;
}

double hz_to_midi(double hz) {
  if (!(hz > 0)) throw std::invalid_argument("hz_to_midi: frequency must be positive");
  return 69.0 + 12.0 * std::log2(hz / 440.0);
}

}  // namespace stars
