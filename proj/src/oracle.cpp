#include "stars/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <stdexcept>

#include "stars/error.hpp"

namespace stars {

namespace {

constexpr double kProbFloor = 1e-10;

float log_prob(double p) { return static_cast<float>(std::log(std::max(p, kProbFloor))); }

// Uniform integer in [lo, hi].
int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

double uniform01(std::mt19937_64& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

Eigen::VectorXf boundary_track(Eigen::Index frames, const std::vector<Eigen::Index>& peaks, double sharpness,
                               int jitter, std::mt19937_64& rng) {
  Eigen::VectorXf track = Eigen::VectorXf::Constant(frames, static_cast<float>(1.0 - sharpness));
  for (Eigen::Index b : peaks) {
    if (jitter > 0) b += uniform_int(rng, -jitter, jitter);
    if (frames > 1) b = std::clamp<Eigen::Index>(b, 1, frames - 1);
    if (b >= 0 && b < frames) track(b) = static_cast<float>(sharpness);
  }
  return track;
}

}  // namespace

void OracleConfig::check() const {
  if (!(label_smoothing >= 0 && label_smoothing < 1)) throw std::invalid_argument("label_smoothing must be in [0,1)");
  if (!(boundary_sharpness > 0 && boundary_sharpness <= 1))
    throw std::invalid_argument("boundary_sharpness must be in (0,1]");
  if (boundary_jitter_frames < 0) throw std::invalid_argument("boundary_jitter_frames must be >= 0");
  if (!(pitch_confusion >= 0 && pitch_confusion < 1)) throw std::invalid_argument("pitch_confusion must be in [0,1)");
  if (!(technique_flip_prob >= 0 && technique_flip_prob < 0.5))
    throw std::invalid_argument("technique_flip_prob must be in [0,0.5)");
  if (!(style_confusion >= 0 && style_confusion < 1)) throw std::invalid_argument("style_confusion must be in [0,1)");
}

std::vector<std::string> oracle_vocab(const Annotation& a) {
  std::set<std::string> labels{std::string(kSilenceToken), std::string(kAspirateToken)};
  for (const auto& p : a.phonemes) labels.insert(p.label);
  return {labels.begin(), labels.end()};
}

PosteriorGrid synthesize(const Annotation& a, const FrameSpec& spec, const OracleConfig& cfg,
                         std::vector<std::string> vocab, const StyleVocab& style_vocab) {
  cfg.check();
  spec.check();
  if (vocab.empty()) vocab = oracle_vocab(a);

  PosteriorGrid g;
  g.spec = spec;
  g.phoneme_vocab = std::move(vocab);
  g.style_vocab = style_vocab;

  const Eigen::Index frames = time_to_frame(a.duration, spec);
  const auto num_phonemes = static_cast<Eigen::Index>(a.phonemes.size());
  if (frames < std::max<Eigen::Index>(num_phonemes, 1))
    throw Error("annotation shorter than one frame per phoneme");

  // Frame label per frame; uncovered frames count as silence.
  const int silence_col = g.vocab_index(std::string(kSilenceToken));
  if (silence_col < 0) throw Error("vocabulary lacks the silence token");
  std::vector<int> frame_label(static_cast<std::size_t>(frames), silence_col);
  std::vector<Eigen::Index> phone_peaks;
  for (Eigen::Index j = 0; j < num_phonemes; ++j) {
    const auto& p = a.phonemes[static_cast<std::size_t>(j)];
    const int col = g.vocab_index(p.label);
    if (col < 0) throw Error("phoneme '" + p.label + "' is not in the oracle vocabulary");
    const Eigen::Index f0 = time_to_frame(p.onset, spec), f1 = std::min(time_to_frame(p.offset, spec), frames);
    if (f1 <= f0) throw Error("annotation shorter than one frame per phoneme (phoneme " + std::to_string(j) + ")");
    for (Eigen::Index t = f0; t < f1; ++t) frame_label[static_cast<std::size_t>(t)] = col;
    if (j > 0 && f0 > 0) phone_peaks.push_back(f0);
  }

  std::mt19937_64 rng(cfg.seed);
  const auto v = static_cast<Eigen::Index>(g.phoneme_vocab.size());
  const double eps = cfg.label_smoothing;
  const double base = eps / static_cast<double>(v);

  std::vector<bool> silence_col_mask(static_cast<std::size_t>(v));
  for (Eigen::Index c = 0; c < v; ++c) silence_col_mask[static_cast<std::size_t>(c)] = is_silence(g.phoneme_vocab[static_cast<std::size_t>(c)]);

  g.phoneme_logprob.resize(frames, v);
  g.silence_logprob.resize(frames);
  for (Eigen::Index t = 0; t < frames; ++t) {
    const int label = frame_label[static_cast<std::size_t>(t)];
    double silence_mass = 0.0;
    for (Eigen::Index c = 0; c < v; ++c) {
      const double p = base + (c == label ? 1.0 - eps : 0.0);
      g.phoneme_logprob(t, c) = log_prob(p);
      if (silence_col_mask[static_cast<std::size_t>(c)]) silence_mass += p;
    }
    g.silence_logprob(t) = log_prob(silence_mass);
  }

  g.boundary_prob = boundary_track(frames, phone_peaks, cfg.boundary_sharpness, cfg.boundary_jitter_frames, rng);

  std::vector<Eigen::Index> note_peaks;
  std::vector<int> frame_pitch(static_cast<std::size_t>(frames), kRest);
  for (const auto& n : a.notes) {
    const Eigen::Index f0 = time_to_frame(n.onset, spec), f1 = std::min(time_to_frame(n.offset, spec), frames);
    int pitch = n.pitch;
    if (!n.is_rest() && cfg.pitch_confusion > 0 && uniform01(rng) < cfg.pitch_confusion) {
      int shifted = pitch + (uniform01(rng) < 0.5 ? -1 : 1);
      pitch = (shifted < 0 || shifted > 127) ? pitch - (shifted - pitch) : shifted;
    }
    for (Eigen::Index t = f0; t < f1; ++t) frame_pitch[static_cast<std::size_t>(t)] = pitch;
    for (Eigen::Index b : {f0, f1})
      if (b > 0 && b < frames && (note_peaks.empty() || note_peaks.back() != b)) note_peaks.push_back(b);
  }
  g.note_boundary_prob =
      boundary_track(frames, note_peaks, cfg.boundary_sharpness, cfg.boundary_jitter_frames, rng);

  const double pitch_base = eps / kNumPitchClasses;
  g.pitch_logprob.resize(frames, kNumPitchClasses);
  for (Eigen::Index t = 0; t < frames; ++t) {
    const int pitch = frame_pitch[static_cast<std::size_t>(t)];
    for (int c = 0; c < kNumPitchClasses; ++c)
      g.pitch_logprob(t, c) = log_prob(pitch_base + (c == pitch ? 1.0 - eps : 0.0));
  }

  g.technique_prob.resize(num_phonemes, kNumTechniques);
  const double flip = cfg.technique_flip_prob;
  for (Eigen::Index j = 0; j < num_phonemes; ++j) {
    for (int k = 0; k < kNumTechniques; ++k) {
      bool bit = j < a.techniques.rows() && a.techniques(j, k) != 0;
      if (flip > 0 && uniform01(rng) < flip) bit = !bit;
      g.technique_prob(j, k) = static_cast<float>(bit ? 1.0 - flip : flip);
    }
  }

  for (int attr = 0; attr < kNumStyleAttributes; ++attr) {
    const auto au = static_cast<std::size_t>(attr);
    const auto c = static_cast<int>(style_vocab.size(attr));
    int peak = a.style.index[au];
    if (cfg.style_confusion > 0 && c > 1 && uniform01(rng) < cfg.style_confusion)
      peak = (peak + uniform_int(rng, 1, c - 1)) % c;
    auto& sp = g.style_prob[au];
    sp.resize(c);
    for (int i = 0; i < c; ++i) sp(i) = static_cast<float>(eps / c + (i == peak ? 1.0 - eps : 0.0));
  }
  return g;
}

const std::vector<std::string>& default_phoneme_inventory() {
  static const std::vector<std::string> inventory = {
      "a",  "ai", "an", "ang", "ao", "b",  "c",  "ch", "d",   "e",  "ei", "en", "eng", "er",
      "f",  "g",  "h",  "i",   "ia", "ian", "iang", "iao", "ie", "in", "ing", "iu", "j",  "k",
      "l",  "m",  "n",  "o",   "ong", "ou", "p",  "q",  "r",   "s",  "sh", "t",  "u",  "ua",
      "uai", "uan", "ui", "un", "uo", "v",  "x",  "z",  "zh"};
  return inventory;
}

Annotation random_annotation(const GeneratorConfig& cfg) {
  if (cfg.n_phones == 0) throw std::invalid_argument("random_annotation: n_phones must be >= 1");
  const auto& inventory = cfg.vocab.empty() ? default_phoneme_inventory() : cfg.vocab;
  std::mt19937_64 rng(cfg.seed);

  const double median_frames = std::max(cfg.mean_phone_seconds * cfg.spec.frames_per_second(), 1.0);
  std::lognormal_distribution<double> dur(std::log(median_frames), 0.4);
  auto draw_frames = [&]() -> Eigen::Index {
    double f = std::clamp(dur(rng), static_cast<double>(cfg.min_phone_frames), 4.0 * median_frames);
    return std::max<Eigen::Index>(cfg.min_phone_frames, std::llround(f));
  };

  Annotation a;
  std::vector<Eigen::Index> onsets;
  Eigen::Index cursor = 0;
  auto add_phone = [&](std::string label, std::size_t word) {
    Eigen::Index len = draw_frames();
    a.phonemes.push_back({std::move(label), frame_to_time(cursor, cfg.spec), frame_to_time(cursor + len, cfg.spec), word});
    onsets.push_back(cursor);
    cursor += len;
  };

  std::vector<std::pair<Eigen::Index, Eigen::Index>> word_frames;
  std::size_t remaining = cfg.n_phones;
  bool last_was_silence = true;  // no silence-only annotations of a single phone
  if (cfg.n_phones > 1) last_was_silence = false;
  while (remaining > 0) {
    if (!last_was_silence && remaining > 1 && uniform01(rng) < cfg.silence_prob) {
      add_phone(std::string(uniform01(rng) < 0.75 ? kSilenceToken : kAspirateToken), kNoWord);
      --remaining;
      last_was_silence = true;
      continue;
    }
    const std::size_t size = static_cast<std::size_t>(uniform_int(rng, 1, static_cast<int>(std::min<std::size_t>(4, remaining))));
    const std::size_t w = a.words.size();
    const Eigen::Index start = cursor;
    std::string text;
    for (std::size_t i = 0; i < size; ++i) {
      const auto& label = inventory[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(inventory.size()) - 1))];
      text += label;
      add_phone(label, w);
    }
    a.words.push_back({text, frame_to_time(start, cfg.spec), frame_to_time(cursor, cfg.spec)});
    word_frames.emplace_back(start, cursor);
    remaining -= size;
    last_was_silence = false;
  }

  for (const auto& [start, end] : word_frames) {
    const Eigen::Index len = end - start;
    const Eigen::Index max_notes = std::min<Eigen::Index>(3, std::max<Eigen::Index>(1, len / cfg.min_note_frames));
    const auto count = static_cast<Eigen::Index>(uniform_int(rng, 1, static_cast<int>(max_notes)));
    // Each note gets min_note_frames plus a random share of the slack.
    std::vector<double> weights(static_cast<std::size_t>(count));
    for (auto& wt : weights) wt = uniform01(rng) + 0.05;
    double total = 0;
    for (double wt : weights) total += wt;
    const Eigen::Index slack = len - count * cfg.min_note_frames;
    Eigen::Index pos = start;
    for (Eigen::Index i = 0; i < count; ++i) {
      Eigen::Index n_len = count == 1 ? len
                                       : cfg.min_note_frames + static_cast<Eigen::Index>(
                                                                   std::floor(slack * weights[static_cast<std::size_t>(i)] / total));
      if (i == count - 1) n_len = end - pos;
      a.notes.push_back({frame_to_time(pos, cfg.spec), frame_to_time(pos + n_len, cfg.spec), uniform_int(rng, 48, 79)});
      pos += n_len;
    }
  }

  a.techniques = TechniqueMatrix::Zero(static_cast<Eigen::Index>(a.phonemes.size()), kNumTechniques);
  for (std::size_t j = 0; j < a.phonemes.size(); ++j) {
    if (is_silence(a.phonemes[j].label)) continue;
    for (int k = 0; k < kNumTechniques; ++k)
      a.techniques(static_cast<Eigen::Index>(j), k) = uniform01(rng) < 0.2 ? 1 : 0;
  }
  for (int attr = 0; attr < kNumStyleAttributes; ++attr)
    a.style.index[static_cast<std::size_t>(attr)] = uniform_int(rng, 0, static_cast<int>(cfg.style_vocab.size(attr)) - 1);

  a.duration = frame_to_time(cursor, cfg.spec);
  return a;
}

}  // namespace stars
