#pragma once

// Shared domain types: frame grid, phoneme/word/note segments, techniques,
// global style, and the aggregate Annotation.

#include <array>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace stars {

/// STFT / frame-grid geometry. Defaults are 24 kHz, hop 128, window 512, 80 mel bins.
struct FrameSpec {
  int sample_rate = 24000;
  int hop = 128;
  int win = 512;
  int n_mels = 80;

  /// Seconds between consecutive frames.
  double frame_period() const { return static_cast<double>(hop) / sample_rate; }
  double frames_per_second() const { return static_cast<double>(sample_rate) / hop; }

  /// Throws std::invalid_argument when any invariant fails.
  void check() const;

  friend bool operator==(const FrameSpec&, const FrameSpec&) = default;
};

/// round(t * sample_rate / hop), rounding half up.
std::int64_t time_to_frame(double seconds, const FrameSpec& spec = {});
double frame_to_time(std::int64_t frame, const FrameSpec& spec = {});

inline constexpr std::size_t kNoWord = std::numeric_limits<std::size_t>::max();

inline constexpr std::string_view kSilenceToken = "<SP>";
inline constexpr std::string_view kAspirateToken = "<AP>";

/// True for the closed silence set {"<SP>", "<AP>"}.
bool is_silence(std::string_view label);

struct PhonemeSegment {
  std::string label;
  double onset = 0.0;
  double offset = 0.0;
  std::size_t word_index = kNoWord;

  friend bool operator==(const PhonemeSegment&, const PhonemeSegment&) = default;
};

struct WordSegment {
  std::string text;
  double onset = 0.0;
  double offset = 0.0;

  friend bool operator==(const WordSegment&, const WordSegment&) = default;
};

/// Pitch classes 0..127 are MIDI notes; class 128 is REST.
inline constexpr int kRest = 128;
inline constexpr int kNumPitchClasses = 129;

struct NoteEvent {
  double onset = 0.0;
  double offset = 0.0;
  int pitch = kRest;

  bool is_rest() const { return pitch == kRest; }
  friend bool operator==(const NoteEvent&, const NoteEvent&) = default;
};

inline constexpr int kNumTechniques = 9;
inline constexpr std::array<std::string_view, kNumTechniques> kTechniqueNames = {
    "mixed", "falsetto", "strong", "weak", "glissando",
    "breathy", "bubble", "vibrato", "pharyngeal"};

/// One row per phoneme, one column per technique (order of kTechniqueNames).
using TechniqueMatrix = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, kNumTechniques, Eigen::RowMajor>;

inline constexpr int kNumStyleAttributes = 5;
inline constexpr std::array<std::string_view, kNumStyleAttributes> kStyleAttributes = {
    "language", "gender", "emotion", "pace", "range"};

/// Category names per style attribute, indexed like kStyleAttributes.
struct StyleVocab {
  std::array<std::vector<std::string>, kNumStyleAttributes> categories = {{
      {"zh", "en"},
      {"female", "male"},
      {"happy", "sad"},
      {"slow", "moderate", "fast"},
      {"low", "medium", "high"},
  }};

  std::size_t size(int attribute) const { return categories[static_cast<std::size_t>(attribute)].size(); }
  /// Index of `name` in attribute's vocabulary; throws stars::Error if absent.
  int index_of(int attribute, std::string_view name) const;

  friend bool operator==(const StyleVocab&, const StyleVocab&) = default;
};

/// Category index per attribute.
struct GlobalStyle {
  std::array<int, kNumStyleAttributes> index{};

  friend bool operator==(const GlobalStyle&, const GlobalStyle&) = default;
};

/// One-line caption, e.g. "a female zh singer, happy, slow pace, low range".
std::string style_caption(const GlobalStyle& style, const StyleVocab& vocab = {});

struct Annotation {
  std::vector<PhonemeSegment> phonemes;
  std::vector<WordSegment> words;
  std::vector<NoteEvent> notes;
  TechniqueMatrix techniques;
  GlobalStyle style;
  double duration = 0.0;

  friend bool operator==(const Annotation& a, const Annotation& b) {
    return a.phonemes == b.phonemes && a.words == b.words && a.notes == b.notes &&
           a.techniques.rows() == b.techniques.rows() && a.techniques == b.techniques &&
           a.style == b.style && a.duration == b.duration;
  }
};

struct Violation {
  std::string rule;
  std::size_t index = 0;
  std::string message;
};

/// Checks every annotation invariant and returns the broken ones (empty when valid).
/// Time comparisons use an absolute tolerance of 1e-9 s.
std::vector<Violation> validate(const Annotation& a, const StyleVocab& vocab = {});

/// Known lyric: phoneme tokens in order, each mapped to a word (or kNoWord for silences).
struct Lyric {
  std::vector<std::string> tokens;
  std::vector<std::size_t> word_of_token;
  std::vector<std::string> word_texts;

  std::size_t size() const { return tokens.size(); }
  friend bool operator==(const Lyric&, const Lyric&) = default;
};

Lyric lyric_from_annotation(const Annotation& a);

}  // namespace stars
