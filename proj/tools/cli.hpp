#pragma once

// `stars` command-line driver. run_cli is the whole program minus process setup, so tests
// can drive it in-process.

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stars/metrics.hpp"
#include "stars/oracle.hpp"
#include "stars/pipeline.hpp"
#include "stars/textgrid.hpp"

namespace stars::cli {

struct RunConfig {
  FrameSpec spec;
  DecodeConfig decode;
  double min_note_seconds = 0.02;
  std::optional<Eigen::Index> min_gap_frames;  ///< defaults to the min-note frame count
  OracleConfig oracle;
  TierMap tier_map;
  MetricConfig metrics;
  StyleVocab style_vocab;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
  bool export_midi = false;
  double tempo_bpm = 120.0;
  double mel_snr_db = std::numeric_limits<double>::infinity();
  double f0_sigma_semitones = 0.0;

  /// Derives frame counts that depend on the frame spec; call after all overrides.
  void finalize();
};

/// Overlays the keys present in `j` onto `cfg`. Throws stars::Error on unknown keys or bad values.
void apply_config_json(RunConfig& cfg, const nlohmann::json& j);
nlohmann::json config_to_json(const RunConfig& cfg);

/// FNV-1a hash, used to derive per-file seeds from stems.
std::uint64_t fnv1a(std::string_view text);

/// Runs the CLI; returns the process exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace stars::cli
