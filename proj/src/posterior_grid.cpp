#include "stars/posterior_grid.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "stars/annotation_json.hpp"
#include "stars/error.hpp"

namespace stars {

using nlohmann::json;

int PosteriorGrid::vocab_index(const std::string& token) const {
  for (std::size_t i = 0; i < phoneme_vocab.size(); ++i)
    if (phoneme_vocab[i] == token) return static_cast<int>(i);
  return -1;
}

void PosteriorGrid::check_dimensions() const {
  const Eigen::Index t = frames();
  auto expect = [](Eigen::Index got, Eigen::Index want, const char* what) {
    if (got != want)
      throw DimensionError(std::string(what) + ": expected " + std::to_string(want) + ", got " +
                           std::to_string(got));
  };
  expect(phoneme_logprob.cols(), static_cast<Eigen::Index>(phoneme_vocab.size()), "phoneme_logprob columns");
  expect(silence_logprob.size(), t, "silence_logprob rows");
  expect(boundary_prob.size(), t, "boundary_prob rows");
  expect(note_boundary_prob.size(), t, "note_boundary_prob rows");
  expect(pitch_logprob.rows(), t, "pitch_logprob rows");
  expect(pitch_logprob.cols(), kNumPitchClasses, "pitch_logprob columns");
  expect(technique_prob.cols(), kNumTechniques, "technique_prob columns");
  for (int k = 0; k < kNumStyleAttributes; ++k)
    expect(style_prob[static_cast<std::size_t>(k)].size(), static_cast<Eigen::Index>(style_vocab.size(k)),
           "style_prob length");
}

bool operator==(const PosteriorGrid& a, const PosteriorGrid& b) {
  auto same = [](const auto& x, const auto& y) {
    return x.rows() == y.rows() && x.cols() == y.cols() &&
           (x.size() == 0 || std::memcmp(x.data(), y.data(), sizeof(float) * static_cast<std::size_t>(x.size())) == 0);
  };
  if (!(a.spec == b.spec && a.phoneme_vocab == b.phoneme_vocab && a.style_vocab == b.style_vocab)) return false;
  if (!same(a.phoneme_logprob, b.phoneme_logprob) || !same(a.silence_logprob, b.silence_logprob) ||
      !same(a.boundary_prob, b.boundary_prob) || !same(a.note_boundary_prob, b.note_boundary_prob) ||
      !same(a.pitch_logprob, b.pitch_logprob) || !same(a.technique_prob, b.technique_prob))
    return false;
  for (std::size_t k = 0; k < a.style_prob.size(); ++k)
    if (!same(a.style_prob[k], b.style_prob[k])) return false;
  return true;
}

namespace {

void put_floats(std::vector<char>& buf, const float* data, Eigen::Index n) {
  for (Eigen::Index i = 0; i < n; ++i) {
    std::uint32_t bits = std::bit_cast<std::uint32_t>(data[i]);
    for (int b = 0; b < 4; ++b) buf.push_back(static_cast<char>((bits >> (8 * b)) & 0xFF));
  }
}

void get_floats(const std::vector<char>& buf, std::size_t& pos, float* data, Eigen::Index n) {
  for (Eigen::Index i = 0; i < n; ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b)
      bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos + static_cast<std::size_t>(b)])) << (8 * b);
    data[i] = std::bit_cast<float>(bits);
    pos += 4;
  }
}

std::filesystem::path with_ext(const std::filesystem::path& stem, const char* ext) {
  return std::filesystem::path(stem.string() + ext);
}

}  // namespace

void write_posterior_grid(const PosteriorGrid& g, const std::filesystem::path& stem) {
  g.check_dimensions();

  json header;
  header["spec"] = {{"sample_rate", g.spec.sample_rate}, {"hop", g.spec.hop}, {"win", g.spec.win},
                    {"n_mels", g.spec.n_mels}};
  header["T"] = g.frames();
  header["phoneme_vocab"] = g.phoneme_vocab;
  header["n_pitch_classes"] = kNumPitchClasses;
  json names = json::array();
  for (auto n : kTechniqueNames) names.push_back(std::string(n));
  header["technique_names"] = std::move(names);
  header["n_phonemes"] = g.num_phonemes();
  json vocabs = json::array();
  for (int k = 0; k < kNumStyleAttributes; ++k) {
    auto ku = static_cast<std::size_t>(k);
    vocabs.push_back({{"attribute", std::string(kStyleAttributes[ku])}, {"categories", g.style_vocab.categories[ku]}});
  }
  header["style_vocabs"] = std::move(vocabs);
  header["payload_order"] = {"phoneme_logprob", "silence_logprob", "boundary_prob", "note_boundary_prob",
                             "pitch_logprob",   "technique_prob",  "style_prob"};
  write_text_file(with_ext(stem, ".json"), header.dump(2) + "\n");

  std::vector<char> buf;
  put_floats(buf, g.phoneme_logprob.data(), g.phoneme_logprob.size());
  put_floats(buf, g.silence_logprob.data(), g.silence_logprob.size());
  put_floats(buf, g.boundary_prob.data(), g.boundary_prob.size());
  put_floats(buf, g.note_boundary_prob.data(), g.note_boundary_prob.size());
  put_floats(buf, g.pitch_logprob.data(), g.pitch_logprob.size());
  put_floats(buf, g.technique_prob.data(), g.technique_prob.size());
  for (const auto& v : g.style_prob) put_floats(buf, v.data(), v.size());

  std::ofstream out(with_ext(stem, ".f32"), std::ios::binary);
  if (!out) throw Error("cannot write " + with_ext(stem, ".f32").string());
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

PosteriorGrid read_posterior_grid(const std::filesystem::path& stem) {
  json header;
  try {
    header = json::parse(read_text_file(with_ext(stem, ".json")));
  } catch (const json::parse_error& e) {
    throw ParseError(with_ext(stem, ".json").string() + ": " + e.what(), 0);
  }

  PosteriorGrid g;
  Eigen::Index t = 0, lp = 0;
  try {
    const auto& s = header.at("spec");
    g.spec = {s.at("sample_rate").get<int>(), s.at("hop").get<int>(), s.at("win").get<int>(),
              s.at("n_mels").get<int>()};
    t = header.at("T").get<Eigen::Index>();
    lp = header.at("n_phonemes").get<Eigen::Index>();
    g.phoneme_vocab = header.at("phoneme_vocab").get<std::vector<std::string>>();
    if (header.at("n_pitch_classes").get<int>() != kNumPitchClasses)
      throw DimensionError("n_pitch_classes must be 129");
    const auto& names = header.at("technique_names");
    if (names.size() != kNumTechniques) throw DimensionError("technique_names must list 9 techniques");
    const auto& vocabs = header.at("style_vocabs");
    if (vocabs.size() != kNumStyleAttributes) throw DimensionError("style_vocabs must list 5 attributes");
    for (std::size_t k = 0; k < vocabs.size(); ++k)
      g.style_vocab.categories[k] = vocabs[k].at("categories").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw ParseError(with_ext(stem, ".json").string() + ": " + e.what(), 0);
  }
  g.spec.check();
  if (t < 0 || lp < 0) throw DimensionError("negative dimensions in header");

  const auto v = static_cast<Eigen::Index>(g.phoneme_vocab.size());
  std::size_t expected = static_cast<std::size_t>(t * v + 3 * t + t * kNumPitchClasses + lp * kNumTechniques);
  for (const auto& cats : g.style_vocab.categories) expected += cats.size();
  expected *= 4;

  std::ifstream in(with_ext(stem, ".f32"), std::ios::binary);
  if (!in) throw Error("cannot open " + with_ext(stem, ".f32").string());
  std::vector<char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (buf.size() < expected)
    throw TruncationError("posterior payload truncated: expected " + std::to_string(expected) + " bytes, got " +
                          std::to_string(buf.size()));
  if (buf.size() > expected)
    throw DimensionError("posterior payload has " + std::to_string(buf.size()) + " bytes but header dimensions need " +
                         std::to_string(expected));

  std::size_t pos = 0;
  g.phoneme_logprob.resize(t, v);
  get_floats(buf, pos, g.phoneme_logprob.data(), g.phoneme_logprob.size());
  g.silence_logprob.resize(t);
  get_floats(buf, pos, g.silence_logprob.data(), t);
  g.boundary_prob.resize(t);
  get_floats(buf, pos, g.boundary_prob.data(), t);
  g.note_boundary_prob.resize(t);
  get_floats(buf, pos, g.note_boundary_prob.data(), t);
  g.pitch_logprob.resize(t, kNumPitchClasses);
  get_floats(buf, pos, g.pitch_logprob.data(), g.pitch_logprob.size());
  g.technique_prob.resize(lp, kNumTechniques);
  get_floats(buf, pos, g.technique_prob.data(), g.technique_prob.size());
  for (int k = 0; k < kNumStyleAttributes; ++k) {
    auto& sp = g.style_prob[static_cast<std::size_t>(k)];
    sp.resize(static_cast<Eigen::Index>(g.style_vocab.size(k)));
    get_floats(buf, pos, sp.data(), sp.size());
  }
  return g;
}

}  // namespace stars
