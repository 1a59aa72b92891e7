#include "stars/annotation.hpp"

#include <cmath>
#include <stdexcept>

#include "stars/error.hpp"

namespace stars {

namespace {
constexpr double kTimeEps = 1e-9;
}

void FrameSpec::check() const {
  if (sample_rate <= 0) throw std::invalid_argument("FrameSpec: sample_rate must be positive");
  if (hop <= 0) throw std::invalid_argument("FrameSpec: hop must be positive");
  if (win < hop) throw std::invalid_argument("FrameSpec: win must be >= hop");
  if (n_mels <= 0) throw std::invalid_argument("FrameSpec: n_mels must be positive");
}

std::int64_t time_to_frame(double seconds, const FrameSpec& spec) {
  return static_cast<std::int64_t>(std::floor(seconds * spec.sample_rate / spec.hop + 0.5));
}

double frame_to_time(std::int64_t frame, const FrameSpec& spec) {
  return static_cast<double>(frame) * spec.hop / spec.sample_rate;
}

bool is_silence(std::string_view label) { return label == kSilenceToken || label == kAspirateToken; }

int StyleVocab::index_of(int attribute, std::string_view name) const {
  const auto& cats = categories[static_cast<std::size_t>(attribute)];
  for (std::size_t i = 0; i < cats.size(); ++i)
    if (cats[i] == name) return static_cast<int>(i);
  throw Error("unknown " + std::string(kStyleAttributes[static_cast<std::size_t>(attribute)]) +
              " category '" + std::string(name) + "'");
}

std::string style_caption(const GlobalStyle& style, const StyleVocab& vocab) {
  auto name = [&](int attr) -> const std::string& {
    return vocab.categories[static_cast<std::size_t>(attr)].at(
        static_cast<std::size_t>(style.index[static_cast<std::size_t>(attr)]));
  };
  return "a " + name(1) + " " + name(0) + " singer, " + name(2) + ", " + name(3) + " pace, " +
         name(4) + " range";
}

std::vector<Violation> validate(const Annotation& a, const StyleVocab& vocab) {
  std::vector<Violation> out;
  auto report = [&](std::string rule, std::size_t i, std::string msg) {
    out.push_back({std::move(rule), i, std::move(msg)});
  };

  const auto& ph = a.phonemes;
  for (std::size_t i = 0; i < ph.size(); ++i) {
    const auto& p = ph[i];
    if (p.onset < -kTimeEps || !(p.onset < p.offset))
      report("phoneme-span", i, "phoneme " + std::to_string(i) + " needs 0 <= onset < offset");
    if (i > 0) {
      double prev = ph[i - 1].offset;
      if (p.onset < prev - kTimeEps)
        report("overlap", i, "overlap at index " + std::to_string(i));
      else if (p.onset > prev + kTimeEps)
        report("gap", i, "gap at index " + std::to_string(i));
    }
    if (is_silence(p.label)) {
      if (p.word_index != kNoWord)
        report("silence-word", i, "silence phoneme " + std::to_string(i) + " belongs to a word");
    } else if (p.word_index == kNoWord || p.word_index >= a.words.size()) {
      report("phoneme-word", i, "phoneme " + std::to_string(i) + " has no valid word");
    }
  }

  for (std::size_t w = 0; w < a.words.size(); ++w) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& p : ph) {
      if (p.word_index != w) continue;
      lo = std::min(lo, p.onset);
      hi = std::max(hi, p.offset);
    }
    if (!std::isfinite(lo)) {
      report("word-empty", w, "word " + std::to_string(w) + " has no phonemes");
      continue;
    }
    if (std::abs(lo - a.words[w].onset) > kTimeEps || std::abs(hi - a.words[w].offset) > kTimeEps)
      report("word-span", w, "word " + std::to_string(w) + " span differs from its phonemes");
  }

  for (std::size_t i = 0; i < a.notes.size(); ++i) {
    const auto& n = a.notes[i];
    if (!(n.onset < n.offset) || n.onset < -kTimeEps)
      report("note-span", i, "note " + std::to_string(i) + " needs 0 <= onset < offset");
    if (n.pitch < 0 || n.pitch > kRest)
      report("note-pitch", i, "note " + std::to_string(i) + " pitch out of range");
    if (i > 0 && n.onset < a.notes[i - 1].offset - kTimeEps)
      report("note-order", i, "note " + std::to_string(i) + " overlaps or precedes note " +
                                  std::to_string(i - 1));
    auto crosses = [&](double b) { return n.onset < b - kTimeEps && b + kTimeEps < n.offset; };
    for (const auto& w : a.words) {
      if (crosses(w.onset) || crosses(w.offset)) {
        report("note/word conflict", i,
               "note/word conflict: note " + std::to_string(i) + " crosses word '" + w.text + "'");
        break;
      }
    }
  }

  if (static_cast<std::size_t>(a.techniques.rows()) != ph.size()) {
    report("technique-rows", 0, "technique matrix has " + std::to_string(a.techniques.rows()) +
                                    " rows for " + std::to_string(ph.size()) + " phonemes");
  } else {
    for (std::size_t i = 0; i < ph.size(); ++i) {
      auto row = a.techniques.row(static_cast<Eigen::Index>(i));
      if ((row.array() > 1).any())
        report("technique-binary", i, "technique row " + std::to_string(i) + " is not binary");
      if (is_silence(ph[i].label) && (row.array() != 0).any())
        report("technique-silence", i, "silence phoneme " + std::to_string(i) + " has techniques");
    }
  }

  for (int k = 0; k < kNumStyleAttributes; ++k) {
    int idx = a.style.index[static_cast<std::size_t>(k)];
    if (idx < 0 || static_cast<std::size_t>(idx) >= vocab.size(k))
      report("style", static_cast<std::size_t>(k),
             std::string(kStyleAttributes[static_cast<std::size_t>(k)]) + " index out of range");
  }

  double span = 0.0;
  if (!ph.empty()) span = std::max(span, ph.back().offset);
  if (!a.words.empty()) span = std::max(span, a.words.back().offset);
  if (!a.notes.empty()) span = std::max(span, a.notes.back().offset);
  if (span > a.duration + kTimeEps) report("duration", 0, "annotation extends past its duration");

  return out;
}

Lyric lyric_from_annotation(const Annotation& a) {
  Lyric lyric;
  for (const auto& w : a.words) lyric.word_texts.push_back(w.text);
  for (const auto& p : a.phonemes) {
    lyric.tokens.push_back(p.label);
    lyric.word_of_token.push_back(p.word_index);
  }
  return lyric;
}

}  // namespace stars
