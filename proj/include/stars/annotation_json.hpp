#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "stars/annotation.hpp"

namespace stars {

/// Field-for-field JSON form of an Annotation. Style is written by category name;
/// REST notes carry "pitch": "rest"; silence phonemes carry "word_index": null.
nlohmann::json annotation_to_json(const Annotation& a, const StyleVocab& vocab = {});
Annotation annotation_from_json(const nlohmann::json& j, const StyleVocab& vocab = {});

Annotation read_annotation_json(const std::filesystem::path& path, const StyleVocab& vocab = {});
void write_annotation_json(const Annotation& a, const std::filesystem::path& path,
                           const StyleVocab& vocab = {});

/// Lyric text file: one word per line as `text ph1 ph2 ...`; a line holding only a
/// silence token is a silence phoneme outside any word. Blank lines and `#` comments are skipped.
Lyric parse_lyric(const std::string& text);
std::string write_lyric(const Lyric& lyric);
Lyric read_lyric_file(const std::filesystem::path& path);

/// Reads a whole file into a string; throws stars::Error if it cannot be opened.
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace stars
