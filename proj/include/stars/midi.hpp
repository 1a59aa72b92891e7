#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "stars/annotation.hpp"

namespace stars {

inline constexpr int kMidiDivision = 480;
inline constexpr int kMidiVelocity = 80;

/// Standard MIDI File, format 0, division 480: one tempo meta event, then note-on
/// (velocity 80) / note-off pairs with tick = round(seconds * bpm / 60 * 480).
/// REST notes are skipped; other pitches outside [0,127] throw std::invalid_argument.
std::vector<std::uint8_t> export_midi(std::span<const NoteEvent> notes, double tempo_bpm = 120.0);

std::int64_t seconds_to_ticks(double seconds, double tempo_bpm);

}  // namespace stars
