#include <doctest.h>

#include <random>

#include "stars/error.hpp"
#include "stars/metrics.hpp"
#include "stars/oracle.hpp"

using namespace stars;

namespace {

NoteEvent note(double on, double off, int pitch) { return {on, off, pitch}; }

Annotation shifted(Annotation a, double dt) {
  for (auto& p : a.phonemes) p.onset += dt, p.offset += dt;
  for (auto& w : a.words) w.onset += dt, w.offset += dt;
  for (auto& n : a.notes) n.onset += dt, n.offset += dt;
  a.duration += dt;
  return a;
}

}  // namespace

TEST_CASE("ber counts onsets and the final offset") {
  const std::vector<Interval> ref = {{0.0, 1.0}, {1.0, 2.0}};
  const std::vector<Interval> hyp = {{0.0, 1.05}, {1.05, 2.0}};
  CHECK(ber(ref, hyp) == doctest::Approx(100.0 / 3.0));
  const std::vector<Interval> near = {{0.01, 1.01}, {1.01, 2.01}};
  CHECK(ber(ref, near) == 0.0);
  // exactly at the tolerance is not an error
  const std::vector<Interval> edge = {{0.02, 1.02}, {1.02, 1.98}};
  CHECK(ber(ref, edge) == 0.0);
  CHECK(ber(ref, hyp, 0.1) == 0.0);
  CHECK_THROWS_AS(ber(ref, std::vector<Interval>{{0.0, 2.0}}), Error);
}

TEST_CASE("iou") {
  const std::vector<Interval> ref = {{0.0, 1.0}};
  CHECK(iou(ref, std::vector<Interval>{{0.5, 1.5}}) == doctest::Approx(100.0 / 3.0));
  CHECK(iou(ref, std::vector<Interval>{{2.0, 3.0}}) == 0.0);
  CHECK(iou(ref, ref) == 100.0);
  CHECK_THROWS_AS(iou(ref, std::vector<Interval>{}), Error);
}

TEST_CASE("conpoff hand cases") {
  const std::vector<NoteEvent> ref = {note(0.0, 0.5, 60), note(0.5, 1.0, 62)};
  const auto same = conpoff(ref, ref);
  CHECK(same.precision == 100.0);
  CHECK(same.recall == 100.0);
  CHECK(same.f == 100.0);

  const std::vector<NoteEvent> up = {note(0.0, 0.5, 61), note(0.5, 1.0, 63)};
  CHECK(conpoff(ref, up).f == 0.0);

  const std::vector<NoteEvent> half = {note(0.0, 0.5, 60)};
  const auto pr = conpoff(ref, half);
  CHECK(pr.precision == 100.0);
  CHECK(pr.recall == 50.0);
  CHECK(pr.f == doctest::Approx(200.0 / 3.0));

  // onset within 50 ms, offset within max(50 ms, 20% of the duration)
  CHECK(conpoff(ref, std::vector<NoteEvent>{note(0.05, 0.6, 60), note(0.45, 1.0, 62)}).f == 100.0);
  CHECK(conpoff(ref, std::vector<NoteEvent>{note(0.06, 0.5, 60), note(0.5, 1.11, 62)}).f == 0.0);

  const std::vector<NoteEvent> rests = {note(0.0, 0.5, kRest)};
  CHECK(conpoff(rests, rests).f == 100.0);
  CHECK(conpoff(ref, rests).f == 0.0);
}

TEST_CASE("greedy matching can miss what optimal matching finds") {
  const std::vector<NoteEvent> ref = {note(1.00, 2.0, 60), note(1.06, 2.0, 60)};
  const std::vector<NoteEvent> hyp = {note(1.03, 2.0, 60), note(0.96, 2.0, 60)};
  const auto g = conpoff(ref, hyp);
  CHECK(g.precision == 50.0);
  CHECK(g.recall == 50.0);
  ConpoffConfig cfg;
  cfg.matching = NoteMatching::kOptimal;
  CHECK(conpoff(ref, hyp, cfg).f == 100.0);
}

TEST_CASE("conpoff matches one-to-one") {
  const std::vector<NoteEvent> ref = {note(0.0, 1.0, 60)};
  const std::vector<NoteEvent> dup = {note(0.0, 1.0, 60), note(0.0, 1.0, 60)};
  const auto pr = conpoff(ref, dup);
  CHECK(pr.precision == 50.0);
  CHECK(pr.recall == 100.0);
  const auto rev = conpoff(dup, ref);
  CHECK(rev.precision == 100.0);
  CHECK(rev.recall == 50.0);
}

TEST_CASE("optimal matching is never worse than greedy") {
  std::mt19937_64 rng(44);
  std::uniform_real_distribution<double> u(0.0, 0.08);
  ConpoffConfig opt;
  opt.matching = NoteMatching::kOptimal;
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<NoteEvent> ref, hyp;
    for (int i = 0; i < 6; ++i) {
      ref.push_back(note(0.05 * i, 1.0, 60));
      hyp.push_back(note(0.05 * i + u(rng) - 0.04, 1.0 + u(rng), 60));
    }
    CHECK(conpoff(ref, hyp, opt).f >= conpoff(ref, hyp).f);
  }
}

TEST_CASE("rpa") {
  const double t5 = frame_to_time(5), t4 = frame_to_time(4);
  const std::vector<NoteEvent> ref = {note(0.0, t5, 60)};
  CHECK(rpa(ref, std::vector<NoteEvent>{note(0.0, t4, 60), note(t4, t5, 62)}) == 80.0);
  CHECK(rpa(ref, std::vector<NoteEvent>{note(0.0, t5, 60)}) == 100.0);
  CHECK(rpa(ref, std::vector<NoteEvent>{note(0.0, t5, kRest)}) == 0.0);
  CHECK(rpa(ref, std::vector<NoteEvent>{}) == 0.0);
  CHECK(rpa(std::vector<NoteEvent>{}, std::vector<NoteEvent>{}) == 100.0);
  CHECK_THROWS_AS(rpa(std::vector<NoteEvent>{}, ref), Error);
}

TEST_CASE("technique scores") {
  TechniqueMatrix ref = TechniqueMatrix::Zero(4, kNumTechniques), hyp = ref;
  ref(0, 0) = ref(1, 0) = 1;
  hyp(0, 0) = hyp(2, 0) = 1;
  const auto s = technique_scores(ref, hyp);
  CHECK(s.accuracy[0] == 50.0);
  CHECK(s.f1[0] == 50.0);
  for (std::size_t k = 1; k < kNumTechniques; ++k) {
    CHECK(s.f1[k] == 100.0);
    CHECK(s.accuracy[k] == 100.0);
  }
  CHECK(s.macro_f1 == doctest::Approx(850.0 / 9.0));
  const TechniqueMatrix zero = TechniqueMatrix::Zero(3, kNumTechniques);
  CHECK(technique_scores(zero, zero).macro_f1 == doctest::Approx(100.0));
  CHECK_THROWS_AS(technique_scores(ref, zero), DimensionError);
}

TEST_CASE("style accuracy") {
  GlobalStyle a, b;
  b.index[0] = 1;
  const std::vector<GlobalStyle> ref = {a, a}, hyp = {a, b};
  const auto s = style_accuracy(ref, hyp);
  CHECK(s.accuracy[0] == 50.0);
  CHECK(s.macro == doctest::Approx(90.0));
  CHECK_THROWS_AS(style_accuracy(ref, std::vector<GlobalStyle>{a}), Error);
}

TEST_CASE("an annotation scored against itself is perfect") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    GeneratorConfig gen;
    gen.seed = seed;
    const Annotation a = random_annotation(gen);
    const auto r = evaluate_annotation(a, a);
    CHECK(r.ber == 0.0);
    CHECK(r.iou == 100.0);
    CHECK(r.word_iou == 100.0);
    CHECK(r.conpoff.f == 100.0);
    CHECK(r.rpa == 100.0);
    CHECK(r.techniques.macro_f1 == doctest::Approx(100.0));
    CHECK(r.style.macro == 100.0);
  }
}

TEST_CASE("metrics do not depend on a common time shift") {
  std::mt19937_64 rng(2);
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    GeneratorConfig gen;
    gen.seed = seed;
    const Annotation ref = random_annotation(gen);
    OracleConfig noise{0.2, 0.8, 3, 0.3, 0.1, 0.5, seed};
    Annotation hyp = ref;
    std::normal_distribution<double> jitter(0.0, 0.015);
    for (std::size_t i = 1; i < hyp.phonemes.size(); ++i) {
      const double lo = hyp.phonemes[i - 1].onset + 1e-3, hi = hyp.phonemes[i].offset - 1e-3;
      const double t = std::clamp(hyp.phonemes[i].onset + jitter(rng), lo, hi);
      hyp.phonemes[i - 1].offset = hyp.phonemes[i].onset = t;
    }
    for (auto& n : hyp.notes)
      if (std::bernoulli_distribution(noise.pitch_confusion)(rng)) n.pitch += 1;
    const double dt = frame_to_time(25);
    const auto a = evaluate_annotation(ref, hyp), b = evaluate_annotation(shifted(ref, dt), shifted(hyp, dt));
    CHECK(a.ber == b.ber);
    CHECK(a.iou == doctest::Approx(b.iou).epsilon(1e-9));
    CHECK(a.conpoff.f == b.conpoff.f);
    CHECK(a.rpa == b.rpa);
    for (double v : {a.ber, a.iou, a.word_iou, a.conpoff.f, a.rpa}) {
      CHECK(v >= 0.0);
      CHECK(v <= 100.0);
    }
  }
}

TEST_CASE("evaluate_annotation requires the same phoneme labels") {
  GeneratorConfig gen;
  const Annotation a = random_annotation(gen);
  Annotation b = a;
  b.phonemes[0].label = b.phonemes[0].label == "a" ? "o" : "a";
  CHECK_THROWS_AS(evaluate_annotation(a, b), Error);
}

TEST_CASE("aggregate and report output") {
  MetricReport x, y;
  x.ber = 10.0;
  y.ber = 30.0;
  x.conpoff.f = 50.0;
  y.style.accuracy[2] = 100.0;
  const std::vector<MetricReport> rs = {x, y};
  const auto m = aggregate_reports(rs);
  CHECK(m.ber == 20.0);
  CHECK(m.conpoff.f == 25.0);
  CHECK(m.style.accuracy[2] == 50.0);

  const auto j = report_to_json(m);
  CHECK(j.at("ber").get<double>() == 20.0);
  CHECK(j.at("conpoff").at("f").get<double>() == 25.0);
  CHECK(j.at("techniques").at("per_technique").size() == kNumTechniques);

  const std::vector<std::pair<std::string, MetricReport>> rows = {{"song_a", x}, {"mean", m}};
  const std::string table = format_report_table(rows);
  CHECK(table.find("BER") != std::string::npos);
  CHECK(table.find("song_a") != std::string::npos);
  CHECK(std::count(table.begin(), table.end(), '\n') >= 3);
}
