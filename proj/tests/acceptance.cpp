// Acceptance suite: one PASS/FAIL line per criterion. Exits nonzero when a criterion fails,
// unless it was named with --known-failure; a known failure that passes is also an error.

#include <sys/resource.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "stars/aligner.hpp"
#include "stars/annotation_json.hpp"
#include "stars/metrics.hpp"
#include "stars/midi.hpp"
#include "stars/ops.hpp"
#include "stars/oracle.hpp"
#include "stars/pipeline.hpp"
#include "stars/signal.hpp"
#include "stars/style.hpp"
#include "stars/textgrid.hpp"
#include "support.hpp"

using namespace stars;
using Clock = std::chrono::steady_clock;
using Eigen::Index;

namespace {

std::vector<std::string> failed;

void report(const char* name, bool ok, const std::string& detail) {
  std::printf("%s %-24s %s\n", ok ? "PASS" : "FAIL", name, detail.c_str());
  std::fflush(stdout);
  if (!ok) failed.emplace_back(name);
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

const std::vector<std::string> kVocab = {"<AP>", "<SP>", "a", "b", "c"};

void viterbi_exactness() {
  std::mt19937_64 rng(20240501);
  const auto t0 = Clock::now();
  int mismatches = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const Index frames = std::uniform_int_distribution<Index>(1, 8)(rng);
    const int len = std::uniform_int_distribution<int>(1, static_cast<int>(std::min<Index>(frames, 3)))(rng);
    std::vector<std::string> ph;
    for (int i = 0; i < len; ++i) ph.push_back(kVocab[std::uniform_int_distribution<std::size_t>(0, 4)(rng)]);
    const PosteriorGrid g = test::random_grid(rng, frames, kVocab, len);
    const AlignmentPath v = viterbi_align(g, ph), b = brute_force_align(g, ph);
    const double d = std::abs(v.score - b.score);
    worst = std::max(worst, d);
    if (v.states != b.states || d > 1e-9) ++mismatches;
  }
  const double secs = seconds_since(t0);
  report("viterbi-exactness", mismatches == 0 && secs < 10.0,
         fmt("200 instances, %d mismatches, max |dscore| %.2e, %.3f s (limit 10 s)", mismatches, worst, secs));
}

double enumerate_ctc(const Eigen::MatrixXd& lp, const std::vector<int>& labels) {
  const Index frames = lp.rows();
  const int classes = static_cast<int>(lp.cols()), blank = classes - 1;
  std::vector<int> path(static_cast<std::size_t>(frames));
  double total = 0.0;
  std::function<void(Index)> rec = [&](Index t) {
    if (t == frames) {
      std::vector<int> out;
      int prev = -1;
      for (int c : path) {
        if (c != prev && c != blank) out.push_back(c);
        prev = c;
      }
      if (out != labels) return;
      double s = 0.0;
      for (Index u = 0; u < frames; ++u) s += lp(u, path[static_cast<std::size_t>(u)]);
      total += std::exp(s);
      return;
    }
    for (int c = 0; c < classes; ++c) path[static_cast<std::size_t>(t)] = c, rec(t + 1);
  };
  rec(0);
  return -std::log(total);
}

void ctc_exactness() {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> n(0.0, 1.5);
  int done = 0, bad = 0;
  double worst = 0.0;
  while (done < 200) {
    const Index frames = std::uniform_int_distribution<Index>(1, 6)(rng);
    const int vocab = std::uniform_int_distribution<int>(1, 3)(rng);
    std::vector<int> labels(static_cast<std::size_t>(std::uniform_int_distribution<int>(0, 3)(rng)));
    for (auto& l : labels) l = std::uniform_int_distribution<int>(0, vocab - 1)(rng);
    if (ops::ctc_min_frames(labels) > frames) continue;
    Eigen::MatrixXd lp(frames, vocab + 1);
    for (Index i = 0; i < lp.size(); ++i) lp(i) = n(rng);
    for (Index r = 0; r < frames; ++r) lp.row(r).array() -= std::log(lp.row(r).array().exp().sum());
    const double d = std::abs(ops::ctc_loss(lp, labels) - enumerate_ctc(lp, labels));
    worst = std::max(worst, d);
    bad += d > 1e-9;
    ++done;
  }
  report("ctc-exactness", bad == 0, fmt("200 instances, max |dloss| %.2e (tol 1e-9)", worst));
}

Annotation decode_oracle(const Annotation& a, const OracleConfig& cfg) {
  return decode_annotation(synthesize(a, {}, cfg), lyric_from_annotation(a));
}

void noiseless_round_trip() {
  const auto t0 = Clock::now();
  int bad = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    GeneratorConfig gen;
    gen.seed = seed;
    const Annotation a = random_annotation(gen);
    const MetricReport r = evaluate_annotation(a, decode_oracle(a, {}));
    const bool exact = r.ber == 0.0 && r.iou == 100.0 && r.conpoff.f == 100.0 && r.rpa == 100.0 &&
                       r.techniques.macro_f1 == 100.0 && r.style.macro == 100.0;
    bad += !exact;
  }
  const double secs = seconds_since(t0);
  report("noiseless-round-trip", bad == 0 && secs < 60.0,
         fmt("200 corpora, %d not exact, %.2f s (limit 60 s)", bad, secs));
}

void graceful_degradation() {
  std::vector<double> ber_med, iou_med;
  for (int jitter : {0, 2, 8}) {
    std::vector<double> bers, ious;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      GeneratorConfig gen;
      gen.seed = 1000 + seed;
      const Annotation a = random_annotation(gen);
      OracleConfig cfg;
      cfg.boundary_jitter_frames = jitter;
      cfg.seed = 5000 + seed;
      const MetricReport r = evaluate_annotation(a, decode_oracle(a, cfg));
      bers.push_back(r.ber);
      ious.push_back(r.iou);
    }
    ber_med.push_back(median(bers));
    iou_med.push_back(median(ious));
  }
  const bool ok = ber_med[0] <= ber_med[1] && ber_med[1] <= ber_med[2] && iou_med[0] >= iou_med[1] &&
                  iou_med[1] >= iou_med[2];
  report("graceful-degradation", ok,
         fmt("jitter 0/2/8: median BER %.2f/%.2f/%.2f, median IOU %.2f/%.2f/%.2f", ber_med[0], ber_med[1], ber_med[2],
             iou_med[0], iou_med[1], iou_med[2]));
}

void metric_hand_cases() {
  const std::vector<Interval> ref = {{0.0, 0.5}, {0.5, 1.0}}, hyp = {{0.0, 0.53}, {0.53, 1.0}};
  const double b = ber(ref, hyp);
  const double i = iou(std::vector<Interval>{{0.0, 1.0}}, std::vector<Interval>{{0.5, 1.5}});
  const double t8 = frame_to_time(8), t10 = frame_to_time(10);
  const double r = rpa(std::vector<NoteEvent>{{0.0, t10, 69}},
                       std::vector<NoteEvent>{{0.0, t8, 69}, {t8, t10, 70}});
  const double f = conpoff(std::vector<NoteEvent>{{0.0, 0.5, 60}, {0.5, 1.0, 62}},
                           std::vector<NoteEvent>{{0.0, 0.5, 60}})
                       .f;
  const bool ok = std::abs(b - 33.33) <= 0.01 && std::abs(i - 33.33) <= 0.01 && r == 80.0 &&
                  std::abs(f - 66.67) <= 0.01;
  report("metric-hand-cases", ok, fmt("BER %.4f, IOU %.4f, RPA %.4f, COnPOff F %.4f", b, i, r, f));
}

void operator_identities() {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n;
  auto random_matrix = [&](Index r, Index c) {
    Eigen::MatrixXd m(r, c);
    for (Index k = 0; k < m.size(); ++k) m(k) = n(rng);
    return m;
  };
  bool moe = true, vq = true, attn = true;
  double pool_err = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::MatrixXd x = random_matrix(7, 8);
    moe &= ops::freq_moe(x, ops::ExpertBank<double>::identity(4, 2)) == x;

    const ops::Codebook<double> cb{random_matrix(5, 8)};
    const auto once = ops::vq_quantize(x, cb), twice = ops::vq_quantize(once.values, cb);
    vq &= twice.values == once.values && twice.indices == once.indices && twice.commitment_loss == 0.0;

    std::vector<Index> len, bounds = {0};
    for (Index r = 0; r < x.rows(); ++r) {
      len.push_back(std::uniform_int_distribution<Index>(1, 9)(rng));
      bounds.push_back(bounds.back() + len.back());
    }
    pool_err = std::max(pool_err, (ops::boundary_pool(ops::length_regulate(x, len), bounds) - x).cwiseAbs().maxCoeff());

    const Eigen::MatrixXd key = random_matrix(1, 8);
    const Eigen::MatrixXd pooled = cross_attention_pool(random_matrix(6, 8), key);
    for (Index r = 0; r < pooled.rows(); ++r) attn &= pooled.row(r) == key.row(0);
  }
  report("operator-identities", moe && vq && attn && pool_err <= 1e-9,
         fmt("freq_moe %s, vq %s, pool/regulate max err %.1e, attention %s", moe ? "exact" : "differs",
             vq ? "exact" : "differs", pool_err, attn ? "exact" : "differs"));
}

struct NoteOn {
  std::int64_t tick;
  int key;
};

// Note-on events (velocity > 0) of a format-0 file, plus the division.
std::vector<NoteOn> midi_note_ons(const std::vector<std::uint8_t>& b, int& division) {
  auto be32 = [&](std::size_t i) {
    return (std::uint32_t{b.at(i)} << 24) | (std::uint32_t{b.at(i + 1)} << 16) | (std::uint32_t{b.at(i + 2)} << 8) |
           b.at(i + 3);
  };
  division = (b.at(12) << 8) | b.at(13);
  std::vector<NoteOn> out;
  const std::size_t end = 22 + be32(18);
  std::size_t i = 22;
  std::int64_t tick = 0;
  int running = 0;
  while (i < end) {
    std::int64_t delta = 0;
    for (int c = 0x80; c & 0x80;) c = b.at(i++), delta = (delta << 7) | (c & 0x7f);
    tick += delta;
    int status = b.at(i);
    if (status & 0x80) ++i, running = status;
    else status = running;
    if (status == 0xff) {
      ++i;
      i += 1 + b.at(i);
    } else {
      const int key = b.at(i++), vel = b.at(i++);
      if ((status & 0xf0) == 0x90 && vel > 0) out.push_back({tick, key});
    }
  }
  return out;
}

void format_fidelity() {
  test::TempDir dir("acceptance_formats");
  int tg_bad = 0, grid_bad = 0, midi_bad = 0;
  std::int64_t worst_tick = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    GeneratorConfig gen;
    gen.seed = 300 + seed;
    const Annotation a = random_annotation(gen);
    const std::string stem = "f" + std::to_string(seed);

    const TextGridDocument doc = annotation_to_textgrid(a);
    write_textgrid_file(doc, dir / (stem + ".TextGrid"));
    const TextGridDocument back = read_textgrid_file(dir / (stem + ".TextGrid"));
    Annotation parsed = annotation_from_textgrid(back);
    parsed.style = a.style;  // TextGrid has no style tier
    tg_bad += !(back == doc) || !(parsed == a);

    OracleConfig cfg;
    cfg.label_smoothing = 0.2;
    cfg.boundary_jitter_frames = 2;
    cfg.seed = seed;
    const PosteriorGrid g = synthesize(a, {}, cfg);
    write_posterior_grid(g, dir / stem);
    const auto bytes = test::read_bytes(dir / (stem + ".f32"));
    write_posterior_grid(read_posterior_grid(dir / stem), dir / (stem + "_again"));
    grid_bad += bytes != test::read_bytes(dir / (stem + "_again.f32"));

    const double bpm = 60.0 + static_cast<double>(seed);
    int division = 0;
    const auto ons = midi_note_ons(export_midi(a.notes, bpm), division);
    std::vector<NoteEvent> voiced;
    for (const auto& nt : a.notes)
      if (!nt.is_rest()) voiced.push_back(nt);
    if (ons.size() != voiced.size()) {
      ++midi_bad;
      continue;
    }
    for (std::size_t k = 0; k < ons.size(); ++k) {
      const auto want = static_cast<std::int64_t>(std::llround(voiced[k].onset * division * bpm / 60.0));
      worst_tick = std::max(worst_tick, std::abs(ons[k].tick - want));
      if (std::abs(ons[k].tick - want) > 1 || ons[k].key != voiced[k].pitch) ++midi_bad;
    }
  }
  report("format-fidelity", tg_bad == 0 && grid_bad == 0 && midi_bad == 0,
         fmt("50 files: TextGrid %d bad, grid %d not bitwise, MIDI %d bad (max onset error %lld ticks)", tg_bad,
             grid_bad, midi_bad, static_cast<long long>(worst_tick)));
}

void performance() {
  constexpr Index kFrames = 56250;
  constexpr int kPhonemes = 600;
  std::mt19937_64 rng(99);
  const PosteriorGrid g = test::random_grid(rng, kFrames, kVocab, kPhonemes);
  std::vector<std::string> ph;
  for (int i = 0; i < kPhonemes; ++i) ph.push_back(kVocab[std::uniform_int_distribution<std::size_t>(0, 4)(rng)]);
  const auto t0 = Clock::now();
  const AlignmentPath p = viterbi_align(g, ph);
  const double secs = seconds_since(t0);
  rusage usage{};
  getrusage(RUSAGE_SELF, &usage);
  const double peak_mb = static_cast<double>(usage.ru_maxrss) / 1024.0;
  const double lattice_mb = static_cast<double>(kFrames) * (2 * kPhonemes + 1) / (1024.0 * 1024.0);
  report("performance", p.is_valid(kPhonemes) && secs < 2.0 && peak_mb < 1536.0,
         fmt("T=%lld L=%d: %.3f s (limit 2 s), backpointers %.1f MB, peak RSS %.1f MB (limit 1536 MB)",
             static_cast<long long>(kFrames), kPhonemes, secs, lattice_mb, peak_mb));
}

void mel_shape() {
  const std::vector<float> zeros(24000, 0.0f);
  const MelSpectrogram m = mel_extract(zeros);
  const double floor = std::log(1e-5);
  const bool all_floor = (m.values.array() == floor).all();
  report("mel-shape", m.frames() == 188 && m.values.cols() == 80 && all_floor,
         fmt("1 s at 24 kHz -> %lld x %lld, silence %s log(1e-5)", static_cast<long long>(m.frames()),
             static_cast<long long>(m.values.cols()), all_floor ? "all equal to" : "not all equal to"));
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> known;
  for (int i = 1; i < argc; ++i) {
    if (std::string(argv[i]) == "--known-failure" && i + 1 < argc) known.emplace_back(argv[++i]);
    else return std::fprintf(stderr, "usage: acceptance [--known-failure NAME]...\n"), 2;
  }
  const std::vector<std::pair<const char*, void (*)()>> criteria = {
      {"viterbi-exactness", viterbi_exactness},  {"ctc-exactness", ctc_exactness},
      {"noiseless-round-trip", noiseless_round_trip}, {"graceful-degradation", graceful_degradation},
      {"metric-hand-cases", metric_hand_cases},  {"operator-identities", operator_identities},
      {"format-fidelity", format_fidelity},      {"performance", performance},
      {"mel-shape", mel_shape},
  };
  for (const auto& [name, run] : criteria) {
    try {
      run();
    } catch (const std::exception& e) {
      report(name, false, std::string("threw: ") + e.what());
    }
  }
  int unexpected = 0;
  for (const auto& name : failed)
    if (std::find(known.begin(), known.end(), name) == known.end()) ++unexpected;
  for (const auto& name : known)
    if (std::find(failed.begin(), failed.end(), name) == failed.end()) {
      std::printf("known failure %s now passes; drop it from the list\n", name.c_str());
      ++unexpected;
    }
  std::printf("%zu of %zu criteria failed (%zu known)\n", failed.size(), criteria.size(), known.size());
  return unexpected == 0 ? 0 : 1;
}
