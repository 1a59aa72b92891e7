#pragma once

// Praat TextGrid (long text format) reading and writing, and conversion
// between TextGrid documents and Annotations.

#include <array>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "stars/annotation.hpp"

namespace stars {

struct TextGridInterval {
  double xmin = 0.0;
  double xmax = 0.0;
  std::string text;

  friend bool operator==(const TextGridInterval&, const TextGridInterval&) = default;
};

struct IntervalTier {
  std::string name;
  double xmin = 0.0;
  double xmax = 0.0;
  std::vector<TextGridInterval> intervals;

  friend bool operator==(const IntervalTier&, const IntervalTier&) = default;
};

struct TextGridDocument {
  double xmin = 0.0;
  double xmax = 0.0;
  std::vector<IntervalTier> tiers;

  /// nullptr when no tier has that name.
  const IntervalTier* find(std::string_view name) const;

  friend bool operator==(const TextGridDocument&, const TextGridDocument&) = default;
};

/// Throws ParseError if intervals are unsorted, overlapping, gapped, or escape their tier.
void check_textgrid(const TextGridDocument& doc);

/// Parses Praat long text format. Errors carry the offending line number.
TextGridDocument parse_textgrid(std::string_view text);
std::string write_textgrid(const TextGridDocument& doc);

TextGridDocument read_textgrid_file(const std::filesystem::path& path);
void write_textgrid_file(const TextGridDocument& doc, const std::filesystem::path& path);

/// Tier names used when mapping a TextGrid onto an Annotation.
struct TierMap {
  std::string phones = "phones";
  std::string words = "words";
  std::string notes = "notes";
  /// Indexed like kTechniqueNames.
  std::array<std::string, kNumTechniques> techniques = {
      "mixed", "falsetto", "strong", "weak", "glissando",
      "breathy", "bubble", "vibrato", "pharyngeal"};
};

/// Phones and words tiers are mandatory. Rest or empty note intervals are dropped;
/// missing technique tiers leave their column at zero. Style is left at its default.
Annotation annotation_from_textgrid(const TextGridDocument& doc, const TierMap& tiers = {});

/// Writes words, phones, notes, then one tier per technique. Gaps are filled with empty intervals.
TextGridDocument annotation_to_textgrid(const Annotation& a, const TierMap& tiers = {});

/// "69" or a note name such as "A4", "C#3", "Eb5" -> MIDI; "", "rest" and silence tokens -> kRest.
int parse_pitch_label(std::string_view text);

}  // namespace stars
