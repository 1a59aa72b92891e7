#include "stars/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>

#include "stars/error.hpp"

namespace stars {

namespace {

constexpr double kTimeEps = 1e-9;

void require_same_count(std::size_t a, std::size_t b, const char* what) {
  if (a != b)
    throw Error(std::string(what) + ": reference has " + std::to_string(a) + " segments, hypothesis " +
                std::to_string(b));
}

std::vector<NoteEvent> voiced_notes(std::span<const NoteEvent> notes) {
  std::vector<NoteEvent> out;
  for (const auto& n : notes)
    if (!n.is_rest()) out.push_back(n);
  return out;
}

bool note_match(const NoteEvent& r, const NoteEvent& h, const ConpoffConfig& cfg) {
  const double offset_tol = std::max(cfg.offset_min_tol, cfg.offset_ratio * (r.offset - r.onset));
  return std::abs(h.onset - r.onset) <= cfg.onset_tol + kTimeEps &&
         std::abs(h.offset - r.offset) <= offset_tol + kTimeEps &&
         std::abs(h.pitch - r.pitch) * 100.0 <= cfg.pitch_tol_cents + kTimeEps;
}

std::size_t greedy_matches(const std::vector<NoteEvent>& ref, const std::vector<NoteEvent>& hyp,
                           const ConpoffConfig& cfg) {
  std::vector<std::size_t> order(ref.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return ref[a].onset < ref[b].onset; });
  std::vector<bool> used(hyp.size(), false);
  std::size_t matches = 0;
  for (std::size_t i : order) {
    std::size_t best = hyp.size();
    for (std::size_t j = 0; j < hyp.size(); ++j) {
      if (used[j] || !note_match(ref[i], hyp[j], cfg)) continue;
      if (best == hyp.size() ||
          std::abs(hyp[j].onset - ref[i].onset) < std::abs(hyp[best].onset - ref[i].onset))
        best = j;
    }
    if (best != hyp.size()) used[best] = true, ++matches;
  }
  return matches;
}

// Maximum bipartite matching by augmenting paths.
std::size_t optimal_matches(const std::vector<NoteEvent>& ref, const std::vector<NoteEvent>& hyp,
                            const ConpoffConfig& cfg) {
  std::vector<std::vector<std::size_t>> adj(ref.size());
  for (std::size_t i = 0; i < ref.size(); ++i)
    for (std::size_t j = 0; j < hyp.size(); ++j)
      if (note_match(ref[i], hyp[j], cfg)) adj[i].push_back(j);
  constexpr std::size_t kFree = static_cast<std::size_t>(-1);
  std::vector<std::size_t> owner(hyp.size(), kFree);
  std::vector<bool> seen;
  std::function<bool(std::size_t)> augment = [&](std::size_t i) {
    for (std::size_t j : adj[i]) {
      if (seen[j]) continue;
      seen[j] = true;
      if (owner[j] == kFree || augment(owner[j])) {
        owner[j] = i;
        return true;
      }
    }
    return false;
  };
  std::size_t matches = 0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    seen.assign(hyp.size(), false);
    if (augment(i)) ++matches;
  }
  return matches;
}

std::vector<int> frame_pitches(const std::vector<NoteEvent>& notes, Eigen::Index frames, const FrameSpec& spec) {
  std::vector<int> out(static_cast<std::size_t>(frames), kRest);
  for (const auto& n : notes) {
    const Eigen::Index f0 = std::max<Eigen::Index>(0, time_to_frame(n.onset, spec));
    const Eigen::Index f1 = std::min(frames, time_to_frame(n.offset, spec));
    for (Eigen::Index t = f0; t < f1; ++t) out[static_cast<std::size_t>(t)] = n.pitch;
  }
  return out;
}

// Applies f(dst_field, src_field) to every score in the report.
template <typename F>
void zip_fields(MetricReport& d, const MetricReport& s, F f) {
  f(d.ber, s.ber);
  f(d.iou, s.iou);
  f(d.word_iou, s.word_iou);
  f(d.conpoff.precision, s.conpoff.precision);
  f(d.conpoff.recall, s.conpoff.recall);
  f(d.conpoff.f, s.conpoff.f);
  f(d.rpa, s.rpa);
  for (std::size_t k = 0; k < kNumTechniques; ++k) {
    f(d.techniques.f1[k], s.techniques.f1[k]);
    f(d.techniques.accuracy[k], s.techniques.accuracy[k]);
  }
  f(d.techniques.macro_f1, s.techniques.macro_f1);
  f(d.techniques.macro_accuracy, s.techniques.macro_accuracy);
  for (std::size_t a = 0; a < kNumStyleAttributes; ++a) f(d.style.accuracy[a], s.style.accuracy[a]);
  f(d.style.macro, s.style.macro);
}

}  // namespace

std::vector<Interval> intervals_of(std::span<const PhonemeSegment> segments) {
  std::vector<Interval> out;
  for (const auto& s : segments) out.push_back({s.onset, s.offset});
  return out;
}

std::vector<Interval> intervals_of(std::span<const WordSegment> segments) {
  std::vector<Interval> out;
  for (const auto& s : segments) out.push_back({s.onset, s.offset});
  return out;
}

double ber(std::span<const Interval> ref, std::span<const Interval> hyp, double tol) {
  require_same_count(ref.size(), hyp.size(), "ber");
  if (ref.empty()) return 0.0;
  std::size_t errors = 0;
  for (std::size_t i = 0; i < ref.size(); ++i)
    if (std::abs(ref[i].onset - hyp[i].onset) > tol + kTimeEps) ++errors;
  if (std::abs(ref.back().offset - hyp.back().offset) > tol + kTimeEps) ++errors;
  return 100.0 * static_cast<double>(errors) / static_cast<double>(ref.size() + 1);
}

double iou(std::span<const Interval> ref, std::span<const Interval> hyp) {
  require_same_count(ref.size(), hyp.size(), "iou");
  if (ref.empty()) return 100.0;
  double total = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    const double overlap = std::max(0.0, std::min(ref[i].offset, hyp[i].offset) - std::max(ref[i].onset, hyp[i].onset));
    const double uni = std::max(ref[i].offset, hyp[i].offset) - std::min(ref[i].onset, hyp[i].onset);
    total += uni > 0 ? overlap / uni : 1.0;
  }
  return 100.0 * total / static_cast<double>(ref.size());
}

PrecisionRecall conpoff(std::span<const NoteEvent> ref_notes, std::span<const NoteEvent> hyp_notes,
                        const ConpoffConfig& cfg) {
  const auto ref = voiced_notes(ref_notes), hyp = voiced_notes(hyp_notes);
  if (ref.empty() && hyp.empty()) return {100.0, 100.0, 100.0};
  if (ref.empty() || hyp.empty()) return {};
  const std::size_t m = cfg.matching == NoteMatching::kGreedy ? greedy_matches(ref, hyp, cfg)
                                                              : optimal_matches(ref, hyp, cfg);
  PrecisionRecall pr;
  pr.precision = 100.0 * static_cast<double>(m) / static_cast<double>(hyp.size());
  pr.recall = 100.0 * static_cast<double>(m) / static_cast<double>(ref.size());
  if (m > 0) pr.f = 2.0 * pr.precision * pr.recall / (pr.precision + pr.recall);
  return pr;
}

double rpa(std::span<const NoteEvent> ref_notes, std::span<const NoteEvent> hyp_notes, const FrameSpec& spec,
           double pitch_tol_cents) {
  const auto ref = voiced_notes(ref_notes), hyp = voiced_notes(hyp_notes);
  if (ref.empty() && hyp.empty()) return 100.0;
  Eigen::Index frames = 0;
  for (const auto* list : {&ref, &hyp})
    for (const auto& n : *list) frames = std::max(frames, time_to_frame(n.offset, spec));
  const auto r = frame_pitches(ref, frames, spec), h = frame_pitches(hyp, frames, spec);
  std::size_t voiced = 0, correct = 0;
  for (std::size_t t = 0; t < r.size(); ++t) {
    if (r[t] == kRest) continue;
    ++voiced;
    if (h[t] != kRest && std::abs(h[t] - r[t]) * 100.0 <= pitch_tol_cents + kTimeEps) ++correct;
  }
  if (voiced == 0) throw Error("rpa: reference has no voiced frames");
  return 100.0 * static_cast<double>(correct) / static_cast<double>(voiced);
}

TechniqueScores technique_scores(const TechniqueMatrix& ref, const TechniqueMatrix& hyp) {
  if (ref.rows() != hyp.rows())
    throw DimensionError("technique matrices have " + std::to_string(ref.rows()) + " and " +
                         std::to_string(hyp.rows()) + " rows");
  TechniqueScores s;
  for (int k = 0; k < kNumTechniques; ++k) {
    std::size_t tp = 0, fp = 0, fn = 0, same = 0;
    for (Eigen::Index j = 0; j < ref.rows(); ++j) {
      const bool r = ref(j, k) != 0, h = hyp(j, k) != 0;
      tp += r && h;
      fp += !r && h;
      fn += r && !h;
      same += r == h;
    }
    const auto ku = static_cast<std::size_t>(k);
    s.accuracy[ku] = ref.rows() == 0 ? 100.0 : 100.0 * static_cast<double>(same) / static_cast<double>(ref.rows());
    s.f1[ku] = tp + fp + fn == 0 ? 100.0 : 100.0 * 2.0 * tp / static_cast<double>(2 * tp + fp + fn);
  }
  s.macro_f1 = std::accumulate(s.f1.begin(), s.f1.end(), 0.0) / kNumTechniques;
  s.macro_accuracy = std::accumulate(s.accuracy.begin(), s.accuracy.end(), 0.0) / kNumTechniques;
  return s;
}

StyleScores style_accuracy(std::span<const GlobalStyle> ref, std::span<const GlobalStyle> hyp) {
  require_same_count(ref.size(), hyp.size(), "style_accuracy");
  StyleScores s;
  for (int a = 0; a < kNumStyleAttributes; ++a) {
    const auto au = static_cast<std::size_t>(a);
    std::size_t same = 0;
    for (std::size_t i = 0; i < ref.size(); ++i) same += ref[i].index[au] == hyp[i].index[au];
    s.accuracy[au] = ref.empty() ? 100.0 : 100.0 * static_cast<double>(same) / static_cast<double>(ref.size());
  }
  s.macro = std::accumulate(s.accuracy.begin(), s.accuracy.end(), 0.0) / kNumStyleAttributes;
  return s;
}

MetricReport evaluate_annotation(const Annotation& ref, const Annotation& hyp, const MetricConfig& cfg) {
  require_same_count(ref.phonemes.size(), hyp.phonemes.size(), "phoneme sequence");
  for (std::size_t i = 0; i < ref.phonemes.size(); ++i)
    if (ref.phonemes[i].label != hyp.phonemes[i].label)
      throw Error("phoneme label mismatch at index " + std::to_string(i) + ": '" + ref.phonemes[i].label +
                  "' vs '" + hyp.phonemes[i].label + "'");
  MetricReport r;
  const auto rp = intervals_of(ref.phonemes), hp = intervals_of(hyp.phonemes);
  r.ber = ber(rp, hp, cfg.boundary_tol);
  r.iou = iou(rp, hp);
  r.word_iou = iou(intervals_of(ref.words), intervals_of(hyp.words));
  r.conpoff = conpoff(ref.notes, hyp.notes, cfg.conpoff);
  r.rpa = rpa(ref.notes, hyp.notes, cfg.spec, cfg.conpoff.pitch_tol_cents);
  r.techniques = technique_scores(ref.techniques, hyp.techniques);
  const GlobalStyle rs[] = {ref.style}, hs[] = {hyp.style};
  r.style = style_accuracy(rs, hs);
  return r;
}

MetricReport aggregate_reports(std::span<const MetricReport> reports) {
  MetricReport m;
  if (reports.empty()) return m;
  for (const auto& r : reports) zip_fields(m, r, [](double& acc, double x) { acc += x; });
  const double n = static_cast<double>(reports.size());
  zip_fields(m, m, [n](double& acc, double) { acc /= n; });
  return m;
}

nlohmann::json report_to_json(const MetricReport& r) {
  nlohmann::json tech = nlohmann::json::object(), sty = nlohmann::json::object();
  for (std::size_t k = 0; k < kNumTechniques; ++k)
    tech[std::string(kTechniqueNames[k])] = {{"f1", r.techniques.f1[k]}, {"acc", r.techniques.accuracy[k]}};
  for (std::size_t a = 0; a < kNumStyleAttributes; ++a) sty[std::string(kStyleAttributes[a])] = r.style.accuracy[a];
  return {
      {"ber", r.ber},
      {"iou", r.iou},
      {"word_iou", r.word_iou},
      {"conpoff", {{"precision", r.conpoff.precision}, {"recall", r.conpoff.recall}, {"f", r.conpoff.f}}},
      {"rpa", r.rpa},
      {"techniques", {{"per_technique", tech}, {"macro_f1", r.techniques.macro_f1}, {"macro_acc", r.techniques.macro_accuracy}}},
      {"style", {{"per_attribute", sty}, {"macro_acc", r.style.macro}}},
  };
}

std::string format_report_table(std::span<const std::pair<std::string, MetricReport>> rows) {
  std::size_t name_width = 4;
  for (const auto& [name, _] : rows) name_width = std::max(name_width, name.size());
  const char* headers[] = {"BER", "IOU", "wIOU", "COnP", "COnR", "COnPOff", "RPA", "TEC-F1", "TEC-ACC", "STY"};
  std::string out = std::string("file") + std::string(name_width - 4, ' ');
  char buf[32];
  for (const char* h : headers) {
    std::snprintf(buf, sizeof buf, " %8s", h);
    out += buf;
  }
  out += '\n';
  for (const auto& [name, r] : rows) {
    out += name + std::string(name_width - name.size(), ' ');
    for (double v : {r.ber, r.iou, r.word_iou, r.conpoff.precision, r.conpoff.recall, r.conpoff.f, r.rpa,
                     r.techniques.macro_f1, r.techniques.macro_accuracy, r.style.macro}) {
      std::snprintf(buf, sizeof buf, " %8.2f", v);
      out += buf;
    }
    out += '\n';
  }
  return out;
}

}  // namespace stars
