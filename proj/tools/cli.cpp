#include "cli.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <thread>

#include <CLI11.hpp>

#include "stars/annotation_json.hpp"
#include "stars/error.hpp"
#include "stars/midi.hpp"
#include "stars/posterior_grid.hpp"
#include "stars/signal.hpp"

namespace stars::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum class LogLevel { kQuiet = 0, kError = 1, kInfo = 2, kDebug = 3 };

LogLevel log_level_from_env() {
  const char* v = std::getenv("STARS_LOG");
  if (v == nullptr) return LogLevel::kInfo;
  const std::string s(v);
  if (s == "quiet" || s == "0") return LogLevel::kQuiet;
  if (s == "error" || s == "1") return LogLevel::kError;
  if (s == "debug" || s == "3") return LogLevel::kDebug;
  return LogLevel::kInfo;
}

class Log {
 public:
  explicit Log(std::ostream& err) : err_(err), level_(log_level_from_env()) {}

  void error(const std::string& msg) const { write(LogLevel::kError, "error: ", msg); }
  void info(const std::string& msg) const { write(LogLevel::kInfo, "", msg); }
  void debug(const std::string& msg) const { write(LogLevel::kDebug, "debug: ", msg); }

 private:
  void write(LogLevel level, const char* prefix, const std::string& msg) const {
    if (level_ >= level) err_ << prefix << msg << '\n';
  }
  std::ostream& err_;
  LogLevel level_;
};

// Runs fn(i) for i in [0, n) on up to `jobs` threads; returns one error string per index.
template <typename Fn>
std::vector<std::string> run_parallel(std::size_t n, int jobs, Fn fn) {
  std::vector<std::string> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next++) < n;) {
      try {
        fn(i);
      } catch (const std::exception& e) {
        errors[i] = e.what();
        if (errors[i].empty()) errors[i] = "unknown error";
      }
    }
  };
  const std::size_t threads = std::min<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)), n);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  return errors;
}

bool has_extension(const fs::path& p, std::initializer_list<const char*> exts) {
  const std::string e = p.extension().string();
  return std::any_of(exts.begin(), exts.end(), [&](const char* x) { return e == x; });
}

// Regular files under `input` (or `input` itself) with one of `exts`, sorted by path.
std::vector<fs::path> list_inputs(const fs::path& input, std::initializer_list<const char*> exts) {
  if (!fs::exists(input)) throw Error("input '" + input.string() + "' does not exist");
  if (fs::is_regular_file(input)) return {input};
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(input))
    if (entry.is_regular_file() && has_extension(entry.path(), exts)) files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  return files;
}

const std::vector<std::string> kReservedStems = {"run_config", "manifest", "report"};

// One annotation file per stem; JSON wins over TextGrid when both exist.
std::map<std::string, fs::path> annotation_files(const fs::path& input) {
  std::map<std::string, fs::path> by_stem;
  for (const auto& p : list_inputs(input, {".json", ".TextGrid"})) {
    const std::string stem = p.stem().string();
    if (std::find(kReservedStems.begin(), kReservedStems.end(), stem) != kReservedStems.end()) continue;
    auto [it, inserted] = by_stem.emplace(stem, p);
    if (!inserted && p.extension() == ".json") it->second = p;
  }
  return by_stem;
}

Annotation load_annotation(const fs::path& path, const RunConfig& cfg) {
  if (path.extension() == ".TextGrid") return annotation_from_textgrid(read_textgrid_file(path), cfg.tier_map);
  return read_annotation_json(path, cfg.style_vocab);
}

void write_json_file(const fs::path& path, const json& j) { write_text_file(path, j.dump(2) + "\n"); }

void write_bytes(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write '" + path.string() + "'");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

void write_f32(const fs::path& path, const Eigen::Ref<const Eigen::MatrixXd>& m) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write '" + path.string() + "'");
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(m(r, c)));
      const char le[4] = {static_cast<char>(bits & 0xff), static_cast<char>((bits >> 8) & 0xff),
                          static_cast<char>((bits >> 16) & 0xff), static_cast<char>((bits >> 24) & 0xff)};
      f.write(le, 4);
    }
}

std::string violation_summary(const std::vector<Violation>& v) {
  std::string s = std::to_string(v.size()) + " invariant violation(s); first: " + v.front().message;
  return s;
}

int report_errors(const Log& log, const std::vector<std::string>& stems, const std::vector<std::string>& errors) {
  int failed = 0;
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (errors[i].empty()) continue;
    log.error(stems[i] + ": " + errors[i]);
    ++failed;
  }
  return failed;
}

double json_number(const json& v, const char* key) {
  if (v.is_null()) return std::numeric_limits<double>::infinity();
  if (!v.is_number()) throw Error(std::string("config key '") + key + "' must be a number");
  return v.get<double>();
}

template <typename Fn>
void for_keys(const json& obj, const char* section, Fn fn) {
  if (!obj.is_object()) throw Error(std::string("config section '") + section + "' must be an object");
  for (const auto& [k, v] : obj.items())
    if (!fn(k, v)) throw Error(std::string("unknown config key '") + section + "." + k + "'");
}

}  // namespace

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void RunConfig::finalize() {
  spec.check();
  oracle.check();
  decode.notes.min_note_frames = std::max<Eigen::Index>(1, time_to_frame(min_note_seconds, spec));
  decode.notes.min_gap_frames = min_gap_frames.value_or(decode.notes.min_note_frames);
  metrics.spec = spec;
  if (jobs < 1) throw Error("jobs must be >= 1");
}

void apply_config_json(RunConfig& cfg, const json& j) {
  for_keys(j, "root", [&](const std::string& k, const json& v) {
    if (k == "frame") {
      for_keys(v, "frame", [&](const std::string& fk, const json& fv) {
        if (fk == "sample_rate") cfg.spec.sample_rate = fv.get<int>();
        else if (fk == "hop") cfg.spec.hop = fv.get<int>();
        else if (fk == "win") cfg.spec.win = fv.get<int>();
        else if (fk == "n_mels") cfg.spec.n_mels = fv.get<int>();
        else return false;
        return true;
      });
    } else if (k == "decode") {
      for_keys(v, "decode", [&](const std::string& dk, const json& dv) {
        if (dk == "threshold_note") cfg.decode.notes.threshold = json_number(dv, "threshold_note");
        else if (dk == "threshold_tech") cfg.decode.technique_threshold = json_number(dv, "threshold_tech");
        else if (dk == "min_note_seconds") cfg.min_note_seconds = json_number(dv, "min_note_seconds");
        else if (dk == "min_gap_frames") {
          if (dv.is_null()) cfg.min_gap_frames.reset();
          else cfg.min_gap_frames = dv.get<Eigen::Index>();
        } else if (dk == "keep_silent_notes") cfg.decode.pitch.keep_silent_notes = dv.get<bool>();
        else return false;
        return true;
      });
    } else if (k == "noise") {
      for_keys(v, "noise", [&](const std::string& nk, const json& nv) {
        if (nk == "smoothing") cfg.oracle.label_smoothing = json_number(nv, "smoothing");
        else if (nk == "sharpness") cfg.oracle.boundary_sharpness = json_number(nv, "sharpness");
        else if (nk == "jitter") cfg.oracle.boundary_jitter_frames = nv.get<int>();
        else if (nk == "pitch") cfg.oracle.pitch_confusion = json_number(nv, "pitch");
        else if (nk == "tech") cfg.oracle.technique_flip_prob = json_number(nv, "tech");
        else if (nk == "style") cfg.oracle.style_confusion = json_number(nv, "style");
        else if (nk == "mel_snr_db") cfg.mel_snr_db = json_number(nv, "mel_snr_db");
        else if (nk == "f0_sigma") cfg.f0_sigma_semitones = json_number(nv, "f0_sigma");
        else return false;
        return true;
      });
    } else if (k == "tier_map") {
      for_keys(v, "tier_map", [&](const std::string& tk, const json& tv) {
        if (tk == "phones") cfg.tier_map.phones = tv.get<std::string>();
        else if (tk == "words") cfg.tier_map.words = tv.get<std::string>();
        else if (tk == "notes") cfg.tier_map.notes = tv.get<std::string>();
        else if (tk == "techniques") {
          for_keys(tv, "tier_map.techniques", [&](const std::string& name, const json& tier) {
            auto it = std::find(kTechniqueNames.begin(), kTechniqueNames.end(), name);
            if (it == kTechniqueNames.end()) return false;
            cfg.tier_map.techniques[static_cast<std::size_t>(it - kTechniqueNames.begin())] = tier.get<std::string>();
            return true;
          });
        } else return false;
        return true;
      });
    } else if (k == "metrics") {
      for_keys(v, "metrics", [&](const std::string& mk, const json& mv) {
        if (mk == "matching") {
          const auto m = mv.get<std::string>();
          if (m == "greedy") cfg.metrics.conpoff.matching = NoteMatching::kGreedy;
          else if (m == "optimal") cfg.metrics.conpoff.matching = NoteMatching::kOptimal;
          else throw Error("metrics.matching must be 'greedy' or 'optimal'");
        } else if (mk == "boundary_tol") cfg.metrics.boundary_tol = json_number(mv, "boundary_tol");
        else return false;
        return true;
      });
    } else if (k == "style_vocab") {
      for_keys(v, "style_vocab", [&](const std::string& attr, const json& cats) {
        auto it = std::find(kStyleAttributes.begin(), kStyleAttributes.end(), attr);
        if (it == kStyleAttributes.end()) return false;
        auto names = cats.get<std::vector<std::string>>();
        if (names.empty()) throw Error("style_vocab." + attr + " must not be empty");
        cfg.style_vocab.categories[static_cast<std::size_t>(it - kStyleAttributes.begin())] = std::move(names);
        return true;
      });
    } else if (k == "seed") {
      if (v.is_null()) cfg.seed.reset();
      else cfg.seed = v.get<std::uint64_t>();
    } else if (k == "jobs") {
      cfg.jobs = v.get<int>();
    } else if (k == "export_midi") {
      cfg.export_midi = v.get<bool>();
    } else if (k == "tempo_bpm") {
      cfg.tempo_bpm = json_number(v, "tempo_bpm");
    } else {
      return false;
    }
    return true;
  });
}

json config_to_json(const RunConfig& cfg) {
  json techniques = json::object();
  for (std::size_t k = 0; k < kNumTechniques; ++k)
    techniques[std::string(kTechniqueNames[k])] = cfg.tier_map.techniques[k];
  json style = json::object();
  for (std::size_t a = 0; a < kNumStyleAttributes; ++a)
    style[std::string(kStyleAttributes[a])] = cfg.style_vocab.categories[a];
  auto finite_or_null = [](double x) { return std::isfinite(x) ? json(x) : json(nullptr); };
  return {
      {"frame", {{"sample_rate", cfg.spec.sample_rate}, {"hop", cfg.spec.hop}, {"win", cfg.spec.win},
                 {"n_mels", cfg.spec.n_mels}}},
      {"decode", {{"threshold_note", cfg.decode.notes.threshold},
                  {"threshold_tech", cfg.decode.technique_threshold},
                  {"min_note_seconds", cfg.min_note_seconds},
                  {"min_gap_frames", cfg.min_gap_frames ? json(*cfg.min_gap_frames) : json(nullptr)},
                  {"keep_silent_notes", cfg.decode.pitch.keep_silent_notes}}},
      {"noise", {{"smoothing", cfg.oracle.label_smoothing},
                 {"sharpness", cfg.oracle.boundary_sharpness},
                 {"jitter", cfg.oracle.boundary_jitter_frames},
                 {"pitch", cfg.oracle.pitch_confusion},
                 {"tech", cfg.oracle.technique_flip_prob},
                 {"style", cfg.oracle.style_confusion},
                 {"mel_snr_db", finite_or_null(cfg.mel_snr_db)},
                 {"f0_sigma", cfg.f0_sigma_semitones}}},
      {"tier_map", {{"phones", cfg.tier_map.phones}, {"words", cfg.tier_map.words}, {"notes", cfg.tier_map.notes},
                    {"techniques", techniques}}},
      {"metrics", {{"matching", cfg.metrics.conpoff.matching == NoteMatching::kGreedy ? "greedy" : "optimal"},
                   {"boundary_tol", cfg.metrics.boundary_tol}}},
      {"style_vocab", style},
      {"seed", cfg.seed ? json(*cfg.seed) : json(nullptr)},
      {"jobs", cfg.jobs},
      {"export_midi", cfg.export_midi},
      {"tempo_bpm", cfg.tempo_bpm},
  };
}

namespace {

// Command implementations. Each returns the exit code.

int cmd_simulate(const RunConfig& cfg, const fs::path& input, std::size_t random_count, std::size_t random_phones,
                 const fs::path& out_dir, const Log& log) {
  if (!cfg.seed) throw Error("simulate needs a seed (--seed or \"seed\" in the config)");
  const std::uint64_t seed = *cfg.seed;

  std::vector<std::string> stems;
  std::vector<fs::path> sources;
  if (random_count > 0) {
    for (std::size_t i = 0; i < random_count; ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "rand%05zu", i);
      stems.emplace_back(name);
      sources.emplace_back();
    }
  } else {
    for (const auto& [stem, path] : annotation_files(input)) {
      stems.push_back(stem);
      sources.push_back(path);
    }
    if (stems.empty()) throw Error("no .TextGrid or .json annotations in '" + input.string() + "'");
  }

  fs::create_directories(out_dir / "grids");
  fs::create_directories(out_dir / "gt");
  write_json_file(out_dir / "run_config.json", config_to_json(cfg));

  auto errors = run_parallel(stems.size(), cfg.jobs, [&](std::size_t i) {
    const std::string& stem = stems[i];
    const std::uint64_t file_seed = seed ^ fnv1a(stem);
    Annotation gt;
    if (sources[i].empty()) {
      GeneratorConfig gen;
      gen.n_phones = random_phones;
      gen.seed = file_seed;
      gen.spec = cfg.spec;
      gen.style_vocab = cfg.style_vocab;
      gt = random_annotation(gen);
    } else {
      gt = load_annotation(sources[i], cfg);
    }
    const auto violations = validate(gt, cfg.style_vocab);
    if (!violations.empty()) throw Error("invalid annotation: " + violation_summary(violations));

    OracleConfig oc = cfg.oracle;
    oc.seed = file_seed ^ 0x9e3779b97f4a7c15ULL;
    const PosteriorGrid grid = synthesize(gt, cfg.spec, oc, {}, cfg.style_vocab);
    write_posterior_grid(grid, out_dir / "grids" / stem);
    write_text_file(out_dir / "grids" / (stem + ".lyr"), write_lyric(lyric_from_annotation(gt)));
    write_annotation_json(gt, out_dir / "gt" / (stem + ".json"), cfg.style_vocab);
    write_textgrid_file(annotation_to_textgrid(gt, cfg.tier_map), out_dir / "gt" / (stem + ".TextGrid"));
  });

  json manifest = {{"files", json::array()}, {"errors", json::array()}};
  for (std::size_t i = 0; i < stems.size(); ++i) {
    if (errors[i].empty()) {
      manifest["files"].push_back({{"stem", stems[i]},
                                   {"grid", "grids/" + stems[i]},
                                   {"lyric", "grids/" + stems[i] + ".lyr"},
                                   {"gt", "gt/" + stems[i] + ".json"}});
      log.debug("simulated " + stems[i]);
    } else {
      manifest["errors"].push_back({{"stem", stems[i]}, {"error", errors[i]}});
    }
  }
  write_json_file(out_dir / "manifest.json", manifest);
  const int failed = report_errors(log, stems, errors);
  log.info("simulate: " + std::to_string(stems.size() - static_cast<std::size_t>(failed)) + " of " +
           std::to_string(stems.size()) + " files written to " + out_dir.string());
  return failed == 0 ? 0 : 1;
}

int cmd_decode(const RunConfig& cfg, const fs::path& grids_dir, const fs::path& lyrics_dir, const fs::path& out_dir,
               const Log& log) {
  std::vector<std::string> stems;
  for (const auto& p : list_inputs(grids_dir, {".f32"})) stems.push_back(p.stem().string());
  if (stems.empty()) throw Error("no posterior grids (*.f32) in '" + grids_dir.string() + "'");
  const fs::path base = fs::is_regular_file(grids_dir) ? grids_dir.parent_path() : grids_dir;
  const fs::path lyrics = lyrics_dir.empty() ? base : lyrics_dir;

  fs::create_directories(out_dir);
  write_json_file(out_dir / "run_config.json", config_to_json(cfg));

  auto errors = run_parallel(stems.size(), cfg.jobs, [&](std::size_t i) {
    const std::string& stem = stems[i];
    const fs::path lyric_path = lyrics / (stem + ".lyr");
    if (!fs::exists(lyric_path)) throw Error("missing lyric file '" + lyric_path.string() + "'");
    const Lyric lyric = read_lyric_file(lyric_path);
    PosteriorGrid grid = read_posterior_grid(base / stem);
    if (!(grid.style_vocab == cfg.style_vocab)) throw Error("grid style vocabulary differs from the configuration");
    const Annotation a = decode_annotation(grid, lyric, cfg.decode);
    const auto violations = validate(a, cfg.style_vocab);
    if (!violations.empty()) throw Error("decoded annotation is invalid: " + violation_summary(violations));
    write_annotation_json(a, out_dir / (stem + ".json"), cfg.style_vocab);
    write_textgrid_file(annotation_to_textgrid(a, cfg.tier_map), out_dir / (stem + ".TextGrid"));
    if (cfg.export_midi) write_bytes(out_dir / (stem + ".mid"), export_midi(a.notes, cfg.tempo_bpm));
  });
  const int failed = report_errors(log, stems, errors);
  log.info("decode: " + std::to_string(stems.size() - static_cast<std::size_t>(failed)) + " of " +
           std::to_string(stems.size()) + " files decoded into " + out_dir.string());
  return failed == 0 ? 0 : 1;
}

int cmd_evaluate(const RunConfig& cfg, const fs::path& ref_dir, const fs::path& hyp_dir, const fs::path& json_out,
                 std::ostream& out, const Log& log) {
  const auto refs = annotation_files(ref_dir);
  const auto hyps = annotation_files(hyp_dir);
  if (hyps.empty()) throw Error("no hypothesis annotations in '" + hyp_dir.string() + "'");

  int failed = 0;
  std::vector<std::string> stems;
  for (const auto& [stem, _] : refs) {
    if (hyps.contains(stem)) stems.push_back(stem);
    else log.error(stem + ": no hypothesis file"), ++failed;
  }
  for (const auto& [stem, _] : hyps)
    if (!refs.contains(stem)) log.error(stem + ": no reference file"), ++failed;

  std::vector<MetricReport> reports(stems.size());
  auto errors = run_parallel(stems.size(), cfg.jobs, [&](std::size_t i) {
    const Annotation ref = load_annotation(refs.at(stems[i]), cfg);
    const Annotation hyp = load_annotation(hyps.at(stems[i]), cfg);
    reports[i] = evaluate_annotation(ref, hyp, cfg.metrics);
  });
  failed += report_errors(log, stems, errors);

  std::vector<std::pair<std::string, MetricReport>> rows;
  std::vector<MetricReport> ok;
  json files = json::object();
  for (std::size_t i = 0; i < stems.size(); ++i) {
    if (!errors[i].empty()) continue;
    rows.emplace_back(stems[i], reports[i]);
    ok.push_back(reports[i]);
    files[stems[i]] = report_to_json(reports[i]);
  }
  if (ok.empty()) throw Error("no file pair could be evaluated");
  const MetricReport corpus = aggregate_reports(ok);
  rows.emplace_back("corpus", corpus);
  out << format_report_table(rows);

  const json doc = {{"files", files}, {"corpus", report_to_json(corpus)}, {"num_files", ok.size()},
                    {"num_errors", failed}};
  if (!json_out.empty()) write_json_file(json_out, doc);
  return failed == 0 ? 0 : 1;
}

int cmd_mel(const RunConfig& cfg, const fs::path& input, const fs::path& f0_dir, const fs::path& out_dir,
            std::ostream& out, const Log& log) {
  const auto wavs = list_inputs(input, {".wav", ".WAV"});
  if (wavs.empty()) throw Error("no .wav files in '" + input.string() + "'");
  if (!out_dir.empty()) fs::create_directories(out_dir);

  std::vector<std::string> stems;
  for (const auto& w : wavs) stems.push_back(w.stem().string());
  std::vector<Eigen::Index> frames(wavs.size(), 0);
  auto errors = run_parallel(wavs.size(), cfg.jobs, [&](std::size_t i) {
    const Audio audio = wav_read(wavs[i], cfg.spec.sample_rate);
    MelSpectrogram mel = mel_extract(audio.samples, cfg.spec);
    F0Contour f0;
    const fs::path f0_path = f0_dir.empty() ? fs::path() : f0_dir / (stems[i] + ".f0");
    if (!f0_path.empty() && fs::exists(f0_path)) {
      const auto points = read_f0_text(f0_path);
      f0 = f0_ingest(points, cfg.spec, mel.frames());
    }
    NoiseConfig noise{cfg.mel_snr_db, cfg.f0_sigma_semitones, cfg.seed.value_or(0) ^ fnv1a(stems[i])};
    std::tie(mel, f0) = corrupt(mel, f0, noise);
    frames[i] = mel.frames();
    if (out_dir.empty()) return;
    write_f32(out_dir / (stems[i] + ".mel.f32"), mel.values);
    json header = {{"T", mel.frames()},
                   {"n_mels", mel.values.cols()},
                   {"sample_rate", cfg.spec.sample_rate},
                   {"hop", cfg.spec.hop},
                   {"win", cfg.spec.win},
                   {"source_channels", audio.source_channels},
                   {"source_sample_rate", audio.source_sample_rate},
                   {"num_samples", audio.samples.size()},
                   {"has_f0", f0.frames() > 0}};
    write_json_file(out_dir / (stems[i] + ".mel.json"), header);
    if (f0.frames() > 0) write_f32(out_dir / (stems[i] + ".f0.f32"), f0.hz);
  });
  for (std::size_t i = 0; i < wavs.size(); ++i)
    if (errors[i].empty()) out << stems[i] << '\t' << frames[i] << '\t' << cfg.spec.n_mels << '\n';
  return report_errors(log, stems, errors) == 0 ? 0 : 1;
}

int cmd_export_midi(const RunConfig& cfg, const fs::path& input, const fs::path& output, const Log& log) {
  if (fs::is_regular_file(input)) {
    const Annotation a = load_annotation(input, cfg);
    fs::path target = output.empty() ? fs::path(input).replace_extension(".mid") : output;
    write_bytes(target, export_midi(a.notes, cfg.tempo_bpm));
    return 0;
  }
  const auto files = annotation_files(input);
  if (files.empty()) throw Error("no annotations in '" + input.string() + "'");
  const fs::path dir = output.empty() ? input : output;
  fs::create_directories(dir);
  std::vector<std::string> stems;
  std::vector<fs::path> paths;
  for (const auto& [stem, path] : files) stems.push_back(stem), paths.push_back(path);
  auto errors = run_parallel(stems.size(), cfg.jobs, [&](std::size_t i) {
    const Annotation a = load_annotation(paths[i], cfg);
    write_bytes(dir / (stems[i] + ".mid"), export_midi(a.notes, cfg.tempo_bpm));
  });
  return report_errors(log, stems, errors) == 0 ? 0 : 1;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  const Log log(err);
  CLI::App app{"Singing transcription and alignment toolkit", "stars"};
  app.require_subcommand(1);

  fs::path config_path, tier_map_path;
  std::uint64_t seed = 0;
  int jobs = 1;
  double threshold_note = 0.5, threshold_tech = 0.5;
  double noise_smoothing = 0, noise_sharpness = 1, noise_pitch = 0, noise_tech = 0, noise_style = 0;
  double noise_mel_snr = 0, noise_f0_sigma = 0;
  int noise_jitter = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "Random seed");
    sub->add_option("--jobs", jobs, "Files processed in parallel")->check(CLI::PositiveNumber);
    sub->add_option("--tier-map", tier_map_path, "JSON tier-name mapping for TextGrid files")->check(CLI::ExistingFile);
  };

  auto* simulate = app.add_subcommand("simulate", "Synthesize posterior grids from ground-truth annotations");
  add_common(simulate);
  fs::path sim_input, sim_out;
  std::size_t random_count = 0, random_phones = 24;
  simulate->add_option("input", sim_input, "Directory (or file) of .TextGrid / .json annotations");
  simulate->add_option("--random", random_count, "Generate N random annotations instead of reading input");
  simulate->add_option("--phones", random_phones, "Phonemes per random annotation")->check(CLI::PositiveNumber);
  simulate->add_option("-o,--output", sim_out, "Output directory")->required();
  simulate->add_option("--noise-smoothing", noise_smoothing, "Label smoothing");
  simulate->add_option("--noise-sharpness", noise_sharpness, "Boundary sharpness");
  simulate->add_option("--noise-jitter", noise_jitter, "Boundary jitter in frames");
  simulate->add_option("--noise-pitch", noise_pitch, "Per-note pitch confusion probability");
  simulate->add_option("--noise-tech", noise_tech, "Technique flip probability");
  simulate->add_option("--noise-style", noise_style, "Style confusion probability");

  auto* decode = app.add_subcommand("decode", "Decode posterior grids into annotations");
  add_common(decode);
  fs::path dec_input, dec_lyrics, dec_out;
  bool export_flag = false;
  decode->add_option("grids", dec_input, "Directory (or .f32 file) of posterior grids")->required();
  decode->add_option("--lyrics", dec_lyrics, "Directory of <stem>.lyr files (default: the grid directory)");
  decode->add_option("-o,--output", dec_out, "Output directory")->required();
  decode->add_option("--threshold-note", threshold_note, "Note boundary threshold");
  decode->add_option("--threshold-tech", threshold_tech, "Technique threshold");
  decode->add_flag("--export-midi", export_flag, "Also write <stem>.mid");

  auto* evaluate = app.add_subcommand("evaluate", "Score hypothesis annotations against references");
  add_common(evaluate);
  fs::path ref_dir, hyp_dir, eval_json;
  evaluate->add_option("reference", ref_dir, "Reference annotations")->required();
  evaluate->add_option("hypothesis", hyp_dir, "Hypothesis annotations")->required();
  evaluate->add_option("-o,--output", eval_json, "Write the JSON report here");

  auto* mel = app.add_subcommand("mel", "Extract log-mel spectrograms from WAV files");
  add_common(mel);
  fs::path mel_input, mel_out, mel_f0;
  mel->add_option("input", mel_input, "Directory (or file) of .wav audio")->required();
  mel->add_option("-o,--output", mel_out, "Write <stem>.mel.f32 and <stem>.mel.json here");
  mel->add_option("--f0", mel_f0, "Directory of <stem>.f0 two-column (seconds, Hz) contours");
  mel->add_option("--noise-mel-snr", noise_mel_snr, "Additive Gaussian noise SNR in dB");
  mel->add_option("--noise-f0-sigma", noise_f0_sigma, "F0 jitter standard deviation in semitones");

  auto* midi = app.add_subcommand("export-midi", "Convert annotations to Standard MIDI Files");
  add_common(midi);
  fs::path midi_input, midi_out;
  midi->add_option("input", midi_input, "Annotation file or directory")->required();
  midi->add_option("-o,--output", midi_out, "Output file or directory");

  std::vector<std::string> argv_rev(args.rbegin(), args.rend());
  try {
    app.parse(argv_rev);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    if (e.get_exit_code() == 0) return 0;
    err << "run 'stars --help' for usage\n";
    return 2;
  }

  CLI::App* sub = app.get_subcommands().front();
  auto given = [&](const char* name) {
    try {
      return sub->get_option(name)->count() > 0;
    } catch (const CLI::OptionNotFound&) {
      return false;
    }
  };

  try {
    RunConfig cfg;
    if (!config_path.empty()) apply_config_json(cfg, json::parse(read_text_file(config_path)));
    if (!tier_map_path.empty()) apply_config_json(cfg, {{"tier_map", json::parse(read_text_file(tier_map_path))}});
    if (given("--seed")) cfg.seed = seed;
    if (given("--jobs")) cfg.jobs = jobs;
    if (given("--threshold-note")) cfg.decode.notes.threshold = threshold_note;
    if (given("--threshold-tech")) cfg.decode.technique_threshold = threshold_tech;
    if (given("--export-midi")) cfg.export_midi = export_flag;
    if (given("--noise-smoothing")) cfg.oracle.label_smoothing = noise_smoothing;
    if (given("--noise-sharpness")) cfg.oracle.boundary_sharpness = noise_sharpness;
    if (given("--noise-jitter")) cfg.oracle.boundary_jitter_frames = noise_jitter;
    if (given("--noise-pitch")) cfg.oracle.pitch_confusion = noise_pitch;
    if (given("--noise-tech")) cfg.oracle.technique_flip_prob = noise_tech;
    if (given("--noise-style")) cfg.oracle.style_confusion = noise_style;
    if (given("--noise-mel-snr")) cfg.mel_snr_db = noise_mel_snr;
    if (given("--noise-f0-sigma")) cfg.f0_sigma_semitones = noise_f0_sigma;
    cfg.finalize();

    const std::string name = sub->get_name();
    if (name == "simulate") {
      if (random_count == 0 && sim_input.empty()) throw Error("simulate needs an input directory or --random N");
      return cmd_simulate(cfg, sim_input, random_count, random_phones, sim_out, log);
    }
    if (name == "decode") return cmd_decode(cfg, dec_input, dec_lyrics, dec_out, log);
    if (name == "evaluate") return cmd_evaluate(cfg, ref_dir, hyp_dir, eval_json, out, log);
    if (name == "mel") return cmd_mel(cfg, mel_input, mel_f0, mel_out, out, log);
    return cmd_export_midi(cfg, midi_input, midi_out, log);
  } catch (const std::exception& e) {
    log.error(e.what());
    return 1;
  }
}

}  // namespace stars::cli
