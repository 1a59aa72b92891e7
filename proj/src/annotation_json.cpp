#include "stars/annotation_json.hpp"

#include <fstream>
#include <sstream>

#include "stars/error.hpp"

namespace stars {

using nlohmann::json;

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed for " + path.string());
}

json annotation_to_json(const Annotation& a, const StyleVocab& vocab) {
  json j;
  j["duration"] = a.duration;

  json phonemes = json::array();
  for (const auto& p : a.phonemes) {
    json jp = {{"label", p.label}, {"onset", p.onset}, {"offset", p.offset}};
    jp["word_index"] = p.word_index == kNoWord ? json(nullptr) : json(p.word_index);
    phonemes.push_back(std::move(jp));
  }
  j["phonemes"] = std::move(phonemes);

  json words = json::array();
  for (const auto& w : a.words) words.push_back({{"text", w.text}, {"onset", w.onset}, {"offset", w.offset}});
  j["words"] = std::move(words);

  json notes = json::array();
  for (const auto& n : a.notes) {
    json jn = {{"onset", n.onset}, {"offset", n.offset}};
    jn["pitch"] = n.is_rest() ? json("rest") : json(n.pitch);
    notes.push_back(std::move(jn));
  }
  j["notes"] = std::move(notes);

  json names = json::array();
  for (auto n : kTechniqueNames) names.push_back(std::string(n));
  json rows = json::array();
  for (Eigen::Index i = 0; i < a.techniques.rows(); ++i) {
    json row = json::array();
    for (int k = 0; k < kNumTechniques; ++k) row.push_back(static_cast<int>(a.techniques(i, k)));
    rows.push_back(std::move(row));
  }
  j["techniques"] = {{"names", std::move(names)}, {"rows", std::move(rows)}};

  json style = json::object();
  for (int k = 0; k < kNumStyleAttributes; ++k) {
    auto ku = static_cast<std::size_t>(k);
    style[std::string(kStyleAttributes[ku])] =
        vocab.categories[ku].at(static_cast<std::size_t>(a.style.index[ku]));
  }
  j["style"] = std::move(style);
  return j;
}

Annotation annotation_from_json(const json& j, const StyleVocab& vocab) {
  try {
    Annotation a;
    a.duration = j.at("duration").get<double>();
    for (const auto& jp : j.at("phonemes")) {
      PhonemeSegment p;
      p.label = jp.at("label").get<std::string>();
      p.onset = jp.at("onset").get<double>();
      p.offset = jp.at("offset").get<double>();
      const auto& wi = jp.at("word_index");
      p.word_index = wi.is_null() ? kNoWord : wi.get<std::size_t>();
      a.phonemes.push_back(std::move(p));
    }
    for (const auto& jw : j.at("words"))
      a.words.push_back({jw.at("text").get<std::string>(), jw.at("onset").get<double>(),
                         jw.at("offset").get<double>()});
    for (const auto& jn : j.at("notes")) {
      const auto& jp = jn.at("pitch");
      int pitch = jp.is_string() ? (jp.get<std::string>() == "rest" ? kRest : throw Error("bad pitch"))
                                 : jp.get<int>();
      a.notes.push_back({jn.at("onset").get<double>(), jn.at("offset").get<double>(), pitch});
    }

    const auto& tech = j.at("techniques");
    const auto& names = tech.at("names");
    if (names.size() != kNumTechniques) throw Error("technique name list must have 9 entries");
    for (int k = 0; k < kNumTechniques; ++k)
      if (names[static_cast<std::size_t>(k)].get<std::string>() != kTechniqueNames[static_cast<std::size_t>(k)])
        throw Error("technique columns out of order");
    const auto& rows = tech.at("rows");
    a.techniques.resize(static_cast<Eigen::Index>(rows.size()), kNumTechniques);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != kNumTechniques) throw Error("technique row " + std::to_string(i) + " has wrong width");
      for (int k = 0; k < kNumTechniques; ++k)
        a.techniques(static_cast<Eigen::Index>(i), k) =
            static_cast<std::uint8_t>(rows[i][static_cast<std::size_t>(k)].get<int>());
    }

    const auto& style = j.at("style");
    for (int k = 0; k < kNumStyleAttributes; ++k) {
      auto ku = static_cast<std::size_t>(k);
      a.style.index[ku] = vocab.index_of(k, style.at(std::string(kStyleAttributes[ku])).get<std::string>());
    }
    return a;
  } catch (const json::exception& e) {
    throw ParseError(std::string("annotation JSON: ") + e.what(), 0);
  }
}

Annotation read_annotation_json(const std::filesystem::path& path, const StyleVocab& vocab) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what(), 0);
  }
  return annotation_from_json(j, vocab);
}

void write_annotation_json(const Annotation& a, const std::filesystem::path& path, const StyleVocab& vocab) {
  write_text_file(path, annotation_to_json(a, vocab).dump(2) + "\n");
}

Lyric parse_lyric(const std::string& text) {
  Lyric lyric;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::vector<std::string> parts;
    for (std::string f; fields >> f;) parts.push_back(f);
    if (parts.empty()) continue;
    if (parts.size() == 1) {
      if (!is_silence(parts[0])) throw ParseError("word '" + parts[0] + "' has no phonemes", line_no);
      lyric.tokens.push_back(parts[0]);
      lyric.word_of_token.push_back(kNoWord);
      continue;
    }
    std::size_t w = lyric.word_texts.size();
    lyric.word_texts.push_back(parts[0]);
    for (std::size_t i = 1; i < parts.size(); ++i) {
      if (is_silence(parts[i])) throw ParseError("silence token inside word '" + parts[0] + "'", line_no);
      lyric.tokens.push_back(parts[i]);
      lyric.word_of_token.push_back(w);
    }
  }
  if (lyric.tokens.empty()) throw ParseError("lyric has no phonemes", 0);
  return lyric;
}

std::string write_lyric(const Lyric& lyric) {
  std::string out;
  std::size_t i = 0;
  while (i < lyric.size()) {
    std::size_t w = lyric.word_of_token[i];
    if (w == kNoWord) {
      out += lyric.tokens[i++] + "\n";
      continue;
    }
    out += lyric.word_texts.at(w);
    while (i < lyric.size() && lyric.word_of_token[i] == w) out += " " + lyric.tokens[i++];
    out += "\n";
  }
  return out;
}

Lyric read_lyric_file(const std::filesystem::path& path) { return parse_lyric(read_text_file(path)); }

}  // namespace stars
