#include "stars/textgrid.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "stars/annotation_json.hpp"
#include "stars/error.hpp"

namespace stars {

namespace {

constexpr double kTimeEps = 1e-9;

struct Token {
  std::string text;
  std::size_t line = 0;
  bool quoted = false;
};

// Splits on whitespace; quoted strings (with "" as an escaped quote) may span lines.
std::vector<Token> tokenize(std::string_view src) {
  std::vector<Token> out;
  std::size_t line = 1;
  std::size_t i = 0;
  // UTF-8 byte order mark
  if (src.substr(0, 3) == "\xEF\xBB\xBF") i = 3;
  while (i < src.size()) {
    char c = src[i];
    if (c == '\n') {
      ++line;
      ++i;
    } else if (c == ' ' || c == '\t' || c == '\r') {
      ++i;
    } else if (c == '"') {
      Token tok{{}, line, true};
      ++i;
      for (;;) {
        if (i >= src.size()) throw ParseError("unterminated string", tok.line);
        if (src[i] == '"') {
          if (i + 1 < src.size() && src[i + 1] == '"') {
            tok.text.push_back('"');
            i += 2;
            continue;
          }
          ++i;
          break;
        }
        if (src[i] == '\n') ++line;
        tok.text.push_back(src[i++]);
      }
      out.push_back(std::move(tok));
    } else {
      Token tok{{}, line, false};
      while (i < src.size() && src[i] != ' ' && src[i] != '\t' && src[i] != '\r' && src[i] != '\n' &&
             src[i] != '"')
        tok.text.push_back(src[i++]);
      out.push_back(std::move(tok));
    }
  }
  return out;
}

class Reader {
 public:
  explicit Reader(std::vector<Token> tokens) : toks_(std::move(tokens)) {}

  bool done() const { return pos_ >= toks_.size(); }
  std::size_t line() const {
    if (toks_.empty()) return 1;
    return done() ? toks_.back().line : toks_[pos_].line;
  }

  const Token& next(std::string_view expected) {
    if (done()) throw ParseError("unexpected end of input, expected '" + std::string(expected) + "'", line());
    return toks_[pos_++];
  }

  bool peek_is(std::string_view word) const {
    return !done() && !toks_[pos_].quoted && toks_[pos_].text == word;
  }

  void word(std::string_view w) {
    std::size_t ln = line();
    const Token& t = next(w);
    if (t.quoted || t.text != w)
      throw ParseError("expected '" + std::string(w) + "', found '" + t.text + "'", ln);
  }

  // "item [3]:" or "item[3]:"
  void indexed(std::string_view w, std::size_t index) {
    std::string want = "[" + std::to_string(index) + "]:";
    std::size_t ln = line();
    const Token& t = next(w);
    if (t.text == std::string(w) + want) return;
    if (t.quoted || t.text != w)
      throw ParseError("expected '" + std::string(w) + " " + want + "', found '" + t.text + "'", ln);
    ln = line();
    const Token& b = next(want);
    if (b.text != want) throw ParseError("expected '" + want + "', found '" + b.text + "'", ln);
  }

  double number(std::string_view key) {
    word(key);
    word("=");
    std::size_t ln = line();
    const Token& t = next("number");
    double v = 0.0;
    const char* first = t.text.data();
    const char* last = first + t.text.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (t.quoted || ec != std::errc{} || ptr != last)
      throw ParseError("expected a number for '" + std::string(key) + "', found '" + t.text + "'", ln);
    return v;
  }

  std::size_t count(std::string_view key) {
    std::size_t ln = line();
    double v = number(key);
    if (v < 0 || v != std::floor(v)) throw ParseError("'" + std::string(key) + "' must be a non-negative integer", ln);
    return static_cast<std::size_t>(v);
  }

  std::string string(std::string_view key) {
    word(key);
    word("=");
    std::size_t ln = line();
    const Token& t = next("string");
    if (!t.quoted) throw ParseError("expected a quoted string for '" + std::string(key) + "'", ln);
    return t.text;
  }

 private:
  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

std::string format_number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

const IntervalTier* TextGridDocument::find(std::string_view name) const {
  for (const auto& t : tiers)
    if (t.name == name) return &t;
  return nullptr;
}

void check_textgrid(const TextGridDocument& doc) {
  if (doc.xmax < doc.xmin) throw ParseError("TextGrid xmax < xmin", 0);
  for (const auto& tier : doc.tiers) {
    const std::string where = "tier '" + tier.name + "'";
    if (tier.xmax < tier.xmin) throw ParseError(where + ": xmax < xmin", 0);
    for (std::size_t i = 0; i < tier.intervals.size(); ++i) {
      const auto& iv = tier.intervals[i];
      if (!(iv.xmin < iv.xmax))
        throw ParseError(where + ": non-monotone interval " + std::to_string(i + 1), 0);
      if (i == 0) {
        if (iv.xmin < tier.xmin - kTimeEps) throw ParseError(where + ": interval 1 starts before tier", 0);
      } else {
        double prev = tier.intervals[i - 1].xmax;
        if (iv.xmin < prev - kTimeEps)
          throw ParseError(where + ": non-monotone intervals (overlap at interval " + std::to_string(i + 1) + ")", 0);
        if (iv.xmin > prev + kTimeEps)
          throw ParseError(where + ": gap before interval " + std::to_string(i + 1), 0);
      }
    }
    if (!tier.intervals.empty() && tier.intervals.back().xmax > tier.xmax + kTimeEps)
      throw ParseError(where + ": last interval ends after tier", 0);
  }
}

TextGridDocument parse_textgrid(std::string_view text) {
  Reader r(tokenize(text));
  TextGridDocument doc;

  r.word("File");
  if (r.string("type") != "ooTextFile") throw ParseError("not an ooTextFile", 1);
  r.word("Object");
  {
    std::size_t ln = r.line();
    if (r.string("class") != "TextGrid") throw ParseError("object class is not TextGrid", ln);
  }
  doc.xmin = r.number("xmin");
  doc.xmax = r.number("xmax");

  r.word("tiers?");
  if (r.peek_is("<absent>")) {
    r.word("<absent>");
  } else {
    r.word("<exists>");
    std::size_t declared = r.count("size");
    r.word("item");
    r.word("[]:");
    for (std::size_t i = 1; i <= declared; ++i) {
      if (r.done())
        throw ParseError("tier-count mismatch: header declares " + std::to_string(declared) + " tiers, found " +
                             std::to_string(i - 1),
                         r.line());
      r.indexed("item", i);
      IntervalTier tier;
      std::size_t ln = r.line();
      std::string cls = r.string("class");
      if (cls != "IntervalTier") throw ParseError("unsupported tier class '" + cls + "'", ln);
      tier.name = r.string("name");
      tier.xmin = r.number("xmin");
      tier.xmax = r.number("xmax");
      r.word("intervals:");
      std::size_t n = r.count("size");
      tier.intervals.reserve(n);
      for (std::size_t j = 1; j <= n; ++j) {
        if (r.done())
          throw ParseError("interval-count mismatch in tier '" + tier.name + "': declared " + std::to_string(n) +
                               ", found " + std::to_string(j - 1),
                           r.line());
        r.indexed("intervals", j);
        TextGridInterval iv;
        iv.xmin = r.number("xmin");
        iv.xmax = r.number("xmax");
        iv.text = r.string("text");
        tier.intervals.push_back(std::move(iv));
      }
      doc.tiers.push_back(std::move(tier));
    }
  }
  if (!r.done()) {
    if (r.peek_is("item"))
      throw ParseError("tier-count mismatch: more tiers than declared", r.line());
    throw ParseError("unexpected trailing content", r.line());
  }
  check_textgrid(doc);
  return doc;
}

std::string write_textgrid(const TextGridDocument& doc) {
  check_textgrid(doc);
  std::ostringstream os;
  os << "File type = \"ooTextFile\"\n"
     << "Object class = \"TextGrid\"\n\n"
     << "xmin = " << format_number(doc.xmin) << " \n"
     << "xmax = " << format_number(doc.xmax) << " \n";
  if (doc.tiers.empty()) {
    os << "tiers? <absent> \n";
    return os.str();
  }
  os << "tiers? <exists> \n"
     << "size = " << doc.tiers.size() << " \n"
     << "item []: \n";
  for (std::size_t i = 0; i < doc.tiers.size(); ++i) {
    const auto& tier = doc.tiers[i];
    os << "    item [" << i + 1 << "]:\n"
       << "        class = \"IntervalTier\" \n"
       << "        name = " << quote(tier.name) << " \n"
       << "        xmin = " << format_number(tier.xmin) << " \n"
       << "        xmax = " << format_number(tier.xmax) << " \n"
       << "        intervals: size = " << tier.intervals.size() << " \n";
    for (std::size_t j = 0; j < tier.intervals.size(); ++j) {
      const auto& iv = tier.intervals[j];
      os << "        intervals [" << j + 1 << "]:\n"
         << "            xmin = " << format_number(iv.xmin) << " \n"
         << "            xmax = " << format_number(iv.xmax) << " \n"
         << "            text = " << quote(iv.text) << " \n";
    }
  }
  return os.str();
}

TextGridDocument read_textgrid_file(const std::filesystem::path& path) {
  return parse_textgrid(read_text_file(path));
}

void write_textgrid_file(const TextGridDocument& doc, const std::filesystem::path& path) {
  write_text_file(path, write_textgrid(doc));
}

int parse_pitch_label(std::string_view text) {
  while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
  while (!text.empty() && text.back() == ' ') text.remove_suffix(1);
  if (text.empty() || text == "rest" || text == "REST" || is_silence(text)) return kRest;

  int value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec == std::errc{} && ptr == text.data() + text.size()) {
    if (value < 0 || value > 127) throw Error("MIDI pitch out of range: " + std::string(text));
    return value;
  }

  static constexpr int kSemitone[7] = {9, 11, 0, 2, 4, 5, 7};  // A..G
  char letter = text.front();
  if (letter >= 'a' && letter <= 'g') letter = static_cast<char>(letter - 'a' + 'A');
  if (letter < 'A' || letter > 'G') throw Error("unrecognised pitch label '" + std::string(text) + "'");
  int pc = kSemitone[letter - 'A'];
  std::size_t i = 1;
  while (i < text.size() && (text[i] == '#' || text[i] == 'b')) pc += text[i++] == '#' ? 1 : -1;
  int octave = 0;
  auto [p2, ec2] = std::from_chars(text.data() + i, text.data() + text.size(), octave);
  if (ec2 != std::errc{} || p2 != text.data() + text.size())
    throw Error("unrecognised pitch label '" + std::string(text) + "'");
  int midi = (octave + 1) * 12 + pc;
  if (midi < 0 || midi > 127) throw Error("MIDI pitch out of range: " + std::string(text));
  return midi;
}

namespace {

const IntervalTier& require_tier(const TextGridDocument& doc, const std::string& name) {
  const IntervalTier* t = doc.find(name);
  if (!t) throw Error("missing mandatory tier '" + name + "'");
  return *t;
}

// Fills the gaps between spans with empty intervals so the tier covers [lo, hi].
IntervalTier gapless_tier(std::string name, double lo, double hi,
                          const std::vector<TextGridInterval>& spans) {
  IntervalTier tier{std::move(name), lo, hi, {}};
  double cursor = lo;
  for (const auto& s : spans) {
    if (s.xmin > cursor + kTimeEps) tier.intervals.push_back({cursor, s.xmin, ""});
    tier.intervals.push_back(s);
    cursor = s.xmax;
  }
  if (hi > cursor + kTimeEps) tier.intervals.push_back({cursor, hi, ""});
  return tier;
}

}  // namespace

Annotation annotation_from_textgrid(const TextGridDocument& doc, const TierMap& tiers) {
  const IntervalTier& phones = require_tier(doc, tiers.phones);
  const IntervalTier& words = require_tier(doc, tiers.words);

  Annotation a;
  a.duration = doc.xmax;

  for (const auto& iv : words.intervals) {
    if (iv.text.empty() || is_silence(iv.text)) continue;
    a.words.push_back({iv.text, iv.xmin, iv.xmax});
  }

  for (std::size_t i = 0; i < phones.intervals.size(); ++i) {
    const auto& iv = phones.intervals[i];
    PhonemeSegment seg{iv.text.empty() ? std::string(kSilenceToken) : iv.text, iv.xmin, iv.xmax, kNoWord};
    if (!is_silence(seg.label)) {
      for (std::size_t w = 0; w < a.words.size(); ++w) {
        const auto& word = a.words[w];
        bool overlaps = seg.onset < word.offset - kTimeEps && word.onset < seg.offset - kTimeEps;
        if (!overlaps) continue;
        if (seg.onset < word.onset - kTimeEps || seg.offset > word.offset + kTimeEps)
          throw Error("phone/word span mismatch: phone " + std::to_string(i + 1) + " '" + seg.label +
                      "' extends past word '" + word.text + "'");
        seg.word_index = w;
        break;
      }
      if (seg.word_index == kNoWord)
        throw Error("phone/word span mismatch: phone " + std::to_string(i + 1) + " '" + seg.label +
                    "' lies outside every word");
    }
    a.phonemes.push_back(std::move(seg));
  }

  for (std::size_t w = 0; w < a.words.size(); ++w) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& p : a.phonemes)
      if (p.word_index == w) lo = std::min(lo, p.onset), hi = std::max(hi, p.offset);
    if (std::abs(lo - a.words[w].onset) > kTimeEps || std::abs(hi - a.words[w].offset) > kTimeEps)
      throw Error("phone/word span mismatch: word '" + a.words[w].text + "' is not covered by its phones");
  }

  if (const IntervalTier* notes = doc.find(tiers.notes)) {
    for (const auto& iv : notes->intervals) {
      int pitch = parse_pitch_label(iv.text);
      if (pitch == kRest) continue;
      a.notes.push_back({iv.xmin, iv.xmax, pitch});
    }
  }

  a.techniques = TechniqueMatrix::Zero(static_cast<Eigen::Index>(a.phonemes.size()), kNumTechniques);
  for (int k = 0; k < kNumTechniques; ++k) {
    const IntervalTier* tier = doc.find(tiers.techniques[static_cast<std::size_t>(k)]);
    if (!tier) continue;
    for (std::size_t i = 0; i < a.phonemes.size(); ++i) {
      const auto& p = a.phonemes[i];
      if (is_silence(p.label)) continue;
      double mid = 0.5 * (p.onset + p.offset);
      for (const auto& iv : tier->intervals) {
        if (iv.xmin <= mid && mid < iv.xmax) {
          a.techniques(static_cast<Eigen::Index>(i), k) = iv.text == "1" ? 1 : 0;
          break;
        }
      }
    }
  }
  return a;
}

TextGridDocument annotation_to_textgrid(const Annotation& a, const TierMap& tiers) {
  TextGridDocument doc;
  doc.xmin = 0.0;
  doc.xmax = a.duration;

  std::vector<TextGridInterval> spans;
  for (const auto& w : a.words) spans.push_back({w.onset, w.offset, w.text});
  doc.tiers.push_back(gapless_tier(tiers.words, doc.xmin, doc.xmax, spans));

  spans.clear();
  for (const auto& p : a.phonemes) spans.push_back({p.onset, p.offset, p.label});
  doc.tiers.push_back(gapless_tier(tiers.phones, doc.xmin, doc.xmax, spans));

  spans.clear();
  for (const auto& n : a.notes)
    spans.push_back({n.onset, n.offset, n.is_rest() ? std::string("rest") : std::to_string(n.pitch)});
  doc.tiers.push_back(gapless_tier(tiers.notes, doc.xmin, doc.xmax, spans));

  for (int k = 0; k < kNumTechniques; ++k) {
    spans.clear();
    for (std::size_t i = 0; i < a.phonemes.size(); ++i) {
      const auto& p = a.phonemes[i];
      std::string bit;
      if (!is_silence(p.label) && static_cast<Eigen::Index>(i) < a.techniques.rows())
        bit = a.techniques(static_cast<Eigen::Index>(i), k) ? "1" : "0";
      spans.push_back({p.onset, p.offset, bit});
    }
    doc.tiers.push_back(gapless_tier(tiers.techniques[static_cast<std::size_t>(k)], doc.xmin, doc.xmax, spans));
  }
  return doc;
}

}  // namespace stars
