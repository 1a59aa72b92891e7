#include "stars/aligner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "stars/error.hpp"

namespace stars {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
const double kLogFloor = std::log(1e-10);

double floor_log(double logp) { return std::isnan(logp) ? kLogFloor : std::max(logp, kLogFloor); }
double floor_prob_log(double p) { return std::log(std::max(p, 1e-10)); }

void check_problem(const PosteriorGrid& grid, std::size_t num_phonemes) {
  if (num_phonemes == 0) throw Error("alignment needs at least one phoneme");
  if (grid.frames() < static_cast<Eigen::Index>(num_phonemes))
    throw Error("alignment needs at least one frame per phoneme: T=" + std::to_string(grid.frames()) +
                " < L=" + std::to_string(num_phonemes));
  if (grid.silence_logprob.size() != grid.frames() || grid.boundary_prob.size() != grid.frames())
    throw DimensionError("posterior grid rows disagree with T");
}

// Runs the recursion, storing backpointers for every cell and, when `full` is non-null,
// every score. Returns the final score row.
std::vector<double> run_viterbi(const PosteriorGrid& grid, std::span<const int> cols, std::uint8_t* back,
                                Eigen::MatrixXd* full) {
  const Eigen::Index frames = grid.frames();
  const int states = 2 * static_cast<int>(cols.size()) + 1;
  std::vector<double> prev(static_cast<std::size_t>(states), kNegInf), cur(prev.size());
  std::vector<double> emit(prev.size());

  auto fill_emissions = [&](Eigen::Index t) {
    const double silence = floor_log(grid.silence_logprob(t));
    const float* row = grid.phoneme_logprob.data() + t * grid.phoneme_logprob.cols();
    for (int k = 0; k < states; k += 2) emit[static_cast<std::size_t>(k)] = silence;
    for (int k = 1; k < states; k += 2)
      emit[static_cast<std::size_t>(k)] = floor_log(row[cols[static_cast<std::size_t>(k / 2)]]);
  };

  fill_emissions(0);
  prev[0] = emit[0];
  prev[1] = emit[1];
  std::fill(back, back + states, static_cast<std::uint8_t>(Transition::kNone));
  if (full) {
    full->setConstant(frames, states, kNegInf);
    full->row(0).head(2) << prev[0], prev[1];
  }

  for (Eigen::Index t = 1; t < frames; ++t) {
    fill_emissions(t);
    const double stay = floor_prob_log(1.0 - grid.boundary_prob(t));
    const double move = floor_prob_log(grid.boundary_prob(t));
    std::uint8_t* bt = back + t * states;
    for (int k = 0; k < states; ++k) {
      const auto ku = static_cast<std::size_t>(k);
      double best = prev[ku] + stay;
      auto code = Transition::kStay;
      if (k >= 1) {
        double c = prev[ku - 1] + move;
        if (c > best) best = c, code = Transition::kStep;
      }
      if (skip_allowed(k)) {
        double c = prev[ku - 2] + move;
        if (c > best) best = c, code = Transition::kSkip;
      }
      if (best == kNegInf) {
        cur[ku] = kNegInf;
        bt[k] = static_cast<std::uint8_t>(Transition::kNone);
      } else {
        cur[ku] = best + emit[ku];
        bt[k] = static_cast<std::uint8_t>(code);
      }
    }
    std::swap(prev, cur);
    if (full)
      for (int k = 0; k < states; ++k) (*full)(t, k) = prev[static_cast<std::size_t>(k)];
  }
  return prev;
}

}  // namespace

bool AlignmentPath::is_valid(int num_phonemes) const {
  const int last = 2 * num_phonemes;
  if (states.empty() || num_phonemes < 1) return false;
  if (states.front() != 0 && states.front() != 1) return false;
  if (states.back() != last && states.back() != last - 1) return false;
  for (std::size_t t = 1; t < states.size(); ++t) {
    int d = states[t] - states[t - 1];
    if (d < 0 || d > 2) return false;
    if (d == 2 && !skip_allowed(states[t])) return false;
  }
  return true;
}

std::vector<int> token_columns(const PosteriorGrid& grid, std::span<const std::string> phonemes) {
  std::vector<int> cols;
  cols.reserve(phonemes.size());
  for (const auto& p : phonemes) {
    int c = grid.vocab_index(p);
    if (c < 0) throw Error("phoneme '" + p + "' is not in the posterior vocabulary");
    cols.push_back(c);
  }
  return cols;
}

double emission_score(const PosteriorGrid& grid, Eigen::Index t, int k, std::span<const int> columns) {
  if (t < 0 || t >= grid.frames()) throw std::out_of_range("emission_score: frame out of range");
  if (k < 0 || k > 2 * static_cast<int>(columns.size())) throw std::out_of_range("emission_score: state out of range");
  if (k % 2 == 0) return floor_log(grid.silence_logprob(t));
  return floor_log(grid.phoneme_logprob(t, columns[static_cast<std::size_t>(k / 2)]));
}

double emission_score(const PosteriorGrid& grid, Eigen::Index t, int k, std::span<const std::string> phonemes) {
  return emission_score(grid, t, k, token_columns(grid, phonemes));
}

double transition_score(const PosteriorGrid& grid, Eigen::Index t, Transition move) {
  const double bp = grid.boundary_prob(t);
  return move == Transition::kStay ? floor_prob_log(1.0 - bp) : floor_prob_log(bp);
}

double path_score(const PosteriorGrid& grid, std::span<const int> columns, std::span<const int> states) {
  AlignmentPath p{{states.begin(), states.end()}, 0.0};
  if (static_cast<Eigen::Index>(states.size()) != grid.frames() || !p.is_valid(static_cast<int>(columns.size())))
    return kNegInf;
  double score = emission_score(grid, 0, states[0], columns);
  for (std::size_t t = 1; t < states.size(); ++t) {
    const auto ti = static_cast<Eigen::Index>(t);
    auto move = static_cast<Transition>(states[t] - states[t - 1]);
    score += transition_score(grid, ti, move) + emission_score(grid, ti, states[t], columns);
  }
  return score;
}

AlignmentLattice build_lattice(const PosteriorGrid& grid, std::span<const std::string> phonemes) {
  check_problem(grid, phonemes.size());
  const auto cols = token_columns(grid, phonemes);
  const int states = 2 * static_cast<int>(cols.size()) + 1;
  AlignmentLattice lat;
  lat.back.resize(grid.frames(), states);
  run_viterbi(grid, cols, lat.back.data(), &lat.scores);
  return lat;
}

AlignmentPath viterbi_align(const PosteriorGrid& grid, std::span<const std::string> phonemes) {
  check_problem(grid, phonemes.size());
  const auto cols = token_columns(grid, phonemes);
  const Eigen::Index frames = grid.frames();
  const int states = 2 * static_cast<int>(cols.size()) + 1;

  std::vector<std::uint8_t> back(static_cast<std::size_t>(frames) * static_cast<std::size_t>(states));
  const auto last = run_viterbi(grid, cols, back.data(), nullptr);

  int state = states - 2;
  if (last[static_cast<std::size_t>(states - 1)] > last[static_cast<std::size_t>(states - 2)]) state = states - 1;
  const double score = last[static_cast<std::size_t>(state)];
  if (!std::isfinite(score)) throw Error("no alignment with finite score");

  AlignmentPath path;
  path.score = score;
  path.states.resize(static_cast<std::size_t>(frames));
  for (Eigen::Index t = frames - 1; t >= 1; --t) {
    path.states[static_cast<std::size_t>(t)] = state;
    auto code = back[static_cast<std::size_t>(t * states + state)];
    if (code == static_cast<std::uint8_t>(Transition::kNone)) throw Error("broken backpointer chain");
    state -= code;
  }
  path.states[0] = state;
  return path;
}

AlignmentPath brute_force_align(const PosteriorGrid& grid, std::span<const std::string> phonemes) {
  check_problem(grid, phonemes.size());
  if (grid.frames() > 12 || phonemes.size() > 4)
    throw Error("brute_force_align: instance too large (T <= 12, L <= 4)");
  const auto cols = token_columns(grid, phonemes);
  const auto frames = static_cast<std::size_t>(grid.frames());
  const int last = 2 * static_cast<int>(cols.size());

  AlignmentPath best{{}, kNegInf};
  std::vector<int> states(frames);
  // Depth-first over every monotone state sequence; legality and score come from path_score.
  auto visit = [&](auto&& self, std::size_t t) -> void {
    if (t == frames) {
      double s = path_score(grid, cols, states);
      if (s > best.score) best = {states, s};
      return;
    }
    const int from = t == 0 ? 0 : states[t - 1];
    const int to = t == 0 ? 1 : std::min(from + 2, last);
    for (int k = from; k <= to; ++k) {
      // every remaining frame can advance at most two states
      if (last - 1 - k > 2 * static_cast<int>(frames - 1 - t)) continue;
      states[t] = k;
      self(self, t + 1);
    }
  };
  visit(visit, 0);
  if (!std::isfinite(best.score)) throw Error("no alignment with finite score");
  return best;
}

namespace {

void rebuild_words(Segmentation& seg, const Lyric& lyric, const FrameSpec& spec) {
  seg.words.assign(lyric.word_texts.size(), {});
  seg.word_frames.assign(lyric.word_texts.size(), {std::numeric_limits<Eigen::Index>::max(), -1});
  for (std::size_t i = 0; i < seg.phonemes.size(); ++i) {
    const std::size_t w = seg.phonemes[i].word_index;
    if (w == kNoWord) continue;
    auto& wf = seg.word_frames[w];
    wf.onset = std::min(wf.onset, seg.phoneme_frames[i].onset);
    wf.offset = std::max(wf.offset, seg.phoneme_frames[i].offset);
  }
  for (std::size_t w = 0; w < seg.words.size(); ++w) {
    if (seg.word_frames[w].offset < 0) throw Error("word '" + lyric.word_texts[w] + "' has no phonemes in the lyric");
    seg.words[w] = {lyric.word_texts[w], frame_to_time(seg.word_frames[w].onset, spec),
                    frame_to_time(seg.word_frames[w].offset, spec)};
  }
}

}  // namespace

Segmentation derive_boundaries(const AlignmentPath& path, const Lyric& lyric, const FrameSpec& spec) {
  if (!path.is_valid(static_cast<int>(lyric.size()))) throw Error("derive_boundaries: invalid path");
  Segmentation seg;
  const auto frames = static_cast<Eigen::Index>(path.states.size());
  Eigen::Index start = 0;
  for (Eigen::Index t = 1; t <= frames; ++t) {
    if (t < frames && path.states[static_cast<std::size_t>(t)] == path.states[static_cast<std::size_t>(start)]) continue;
    const int k = path.states[static_cast<std::size_t>(start)];
    PhonemeSegment p;
    p.onset = frame_to_time(start, spec);
    p.offset = frame_to_time(t, spec);
    if (k % 2 == 1) {
      const auto token = static_cast<std::size_t>(k / 2);
      p.label = lyric.tokens[token];
      p.word_index = lyric.word_of_token[token];
      seg.token_of_segment.push_back(token);
    } else {
      p.label = std::string(kSilenceToken);
      seg.token_of_segment.push_back(kNoWord);
    }
    seg.phonemes.push_back(std::move(p));
    seg.phoneme_frames.push_back({start, t});
    start = t;
  }

  rebuild_words(seg, lyric, spec);
  return seg;
}

void absorb_blank_silences(Segmentation& seg, const Lyric& lyric, const FrameSpec& spec) {
  auto is_silence_token = [&](std::size_t i) {
    return seg.token_of_segment[i] != kNoWord && is_silence(lyric.tokens[seg.token_of_segment[i]]);
  };
  std::size_t i = 0;
  while (i < seg.phonemes.size()) {
    if (seg.token_of_segment[i] != kNoWord) {
      ++i;
      continue;
    }
    const bool has_prev = i > 0, has_next = i + 1 < seg.phonemes.size();
    if (!has_prev && !has_next) break;
    const bool into_prev = has_prev && (is_silence_token(i - 1) || !has_next || !is_silence_token(i + 1));
    if (into_prev) {
      seg.phoneme_frames[i - 1].offset = seg.phoneme_frames[i].offset;
      seg.phonemes[i - 1].offset = frame_to_time(seg.phoneme_frames[i - 1].offset, spec);
    } else {
      seg.phoneme_frames[i + 1].onset = seg.phoneme_frames[i].onset;
      seg.phonemes[i + 1].onset = frame_to_time(seg.phoneme_frames[i + 1].onset, spec);
    }
    const auto off = static_cast<std::ptrdiff_t>(i);
    seg.phonemes.erase(seg.phonemes.begin() + off);
    seg.phoneme_frames.erase(seg.phoneme_frames.begin() + off);
    seg.token_of_segment.erase(seg.token_of_segment.begin() + off);
  }
  rebuild_words(seg, lyric, spec);
}

}  // namespace stars
