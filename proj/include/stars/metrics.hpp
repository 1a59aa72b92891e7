#pragma once

// Evaluation metrics. Every score is a percentage in [0, 100].

#include <array>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stars/annotation.hpp"

namespace stars {

struct Interval {
  double onset = 0.0;
  double offset = 0.0;
};

std::vector<Interval> intervals_of(std::span<const PhonemeSegment> segments);
std::vector<Interval> intervals_of(std::span<const WordSegment> segments);

/// Boundary error rate over index-paired boundaries (every onset plus the last offset).
/// A pair counts as an error when |delta| > tol. Throws stars::Error on count mismatch.
double ber(std::span<const Interval> ref, std::span<const Interval> hyp, double tol = 0.02);

/// Mean over index-paired segments of overlap / union. Throws stars::Error on count mismatch.
double iou(std::span<const Interval> ref, std::span<const Interval> hyp);

enum class NoteMatching { kGreedy, kOptimal };

struct ConpoffConfig {
  double onset_tol = 0.05;
  double offset_min_tol = 0.05;
  double offset_ratio = 0.2;  ///< of the reference note duration
  double pitch_tol_cents = 50.0;
  NoteMatching matching = NoteMatching::kGreedy;
};

struct PrecisionRecall {
  double precision = 0.0;
  double recall = 0.0;
  double f = 0.0;
};

/// Note-level onset, pitch and offset F-measure with one-to-one matching. REST notes are
/// ignored. Greedy matching visits references in onset order and takes the unmatched
/// hypothesis with the nearest onset; kOptimal maximizes the number of matches.
PrecisionRecall conpoff(std::span<const NoteEvent> ref, std::span<const NoteEvent> hyp, const ConpoffConfig& cfg = {});

/// Raw pitch accuracy on the frame grid. REST notes are unvoiced. Both lists empty scores 100;
/// otherwise throws stars::Error when the reference has no voiced frame.
double rpa(std::span<const NoteEvent> ref, std::span<const NoteEvent> hyp, const FrameSpec& spec = {},
           double pitch_tol_cents = 50.0);

struct TechniqueScores {
  std::array<double, kNumTechniques> f1{};
  std::array<double, kNumTechniques> accuracy{};
  double macro_f1 = 0.0;
  double macro_accuracy = 0.0;
};

/// Per-column F1 and accuracy. A column with no positives in either matrix has F1 100.
/// Throws DimensionError on shape mismatch.
TechniqueScores technique_scores(const TechniqueMatrix& ref, const TechniqueMatrix& hyp);

struct StyleScores {
  std::array<double, kNumStyleAttributes> accuracy{};
  double macro = 0.0;
};

StyleScores style_accuracy(std::span<const GlobalStyle> ref, std::span<const GlobalStyle> hyp);

struct MetricConfig {
  double boundary_tol = 0.02;
  ConpoffConfig conpoff;
  FrameSpec spec;
};

struct MetricReport {
  double ber = 0.0;
  double iou = 0.0;       ///< phoneme level
  double word_iou = 0.0;
  PrecisionRecall conpoff;
  double rpa = 0.0;
  TechniqueScores techniques;
  StyleScores style;
};

/// All metrics for one file. Throws stars::Error when the phoneme label sequences differ.
MetricReport evaluate_annotation(const Annotation& ref, const Annotation& hyp, const MetricConfig& cfg = {});

/// Field-wise mean over files.
MetricReport aggregate_reports(std::span<const MetricReport> reports);

nlohmann::json report_to_json(const MetricReport& r);

/// Aligned plain-text table: one row per named report.
std::string format_report_table(std::span<const std::pair<std::string, MetricReport>> rows);

}  // namespace stars
