#include "stars/midi.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace stars {

namespace {

void put_be(std::vector<std::uint8_t>& out, std::uint32_t v, int bytes) {
  for (int i = bytes - 1; i >= 0; --i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

void put_vlq(std::vector<std::uint8_t>& out, std::uint32_t v) {
  std::uint8_t tmp[5];
  int n = 0;
  tmp[n++] = v & 0x7F;
  while (v >>= 7) tmp[n++] = static_cast<std::uint8_t>(0x80 | (v & 0x7F));
  while (n) out.push_back(tmp[--n]);
}

struct Event {
  std::int64_t tick;
  bool on;
  int pitch;
};

}  // namespace

std::int64_t seconds_to_ticks(double seconds, double tempo_bpm) {
  return static_cast<std::int64_t>(std::llround(seconds * tempo_bpm / 60.0 * kMidiDivision));
}

std::vector<std::uint8_t> export_midi(std::span<const NoteEvent> notes, double tempo_bpm) {
  if (!(tempo_bpm > 0)) throw std::invalid_argument("tempo must be positive");

  std::vector<Event> events;
  for (const auto& n : notes) {
    if (n.is_rest()) continue;
    if (n.pitch < 0 || n.pitch > 127) throw std::invalid_argument("MIDI pitch out of range: " + std::to_string(n.pitch));
    events.push_back({seconds_to_ticks(n.onset, tempo_bpm), true, n.pitch});
    events.push_back({seconds_to_ticks(n.offset, tempo_bpm), false, n.pitch});
  }
  // Note-offs sort before note-ons at the same tick so repeated pitches retrigger.
  std::stable_sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
    if (a.tick != b.tick) return a.tick < b.tick;
    return !a.on && b.on;
  });

  std::vector<std::uint8_t> track;
  auto tempo_us = static_cast<std::uint32_t>(std::lround(60'000'000.0 / tempo_bpm));
  put_vlq(track, 0);
  track.insert(track.end(), {0xFF, 0x51, 0x03});
  put_be(track, tempo_us, 3);

  std::int64_t last = 0;
  for (const auto& e : events) {
    put_vlq(track, static_cast<std::uint32_t>(e.tick - last));
    last = e.tick;
    track.push_back(e.on ? 0x90 : 0x80);
    track.push_back(static_cast<std::uint8_t>(e.pitch));
    track.push_back(e.on ? kMidiVelocity : 0);
  }
  put_vlq(track, 0);
  track.insert(track.end(), {0xFF, 0x2F, 0x00});

  std::vector<std::uint8_t> out = {'M', 'T', 'h', 'd'};
  put_be(out, 6, 4);
  put_be(out, 0, 2);  // format 0
  put_be(out, 1, 2);  // one track
  put_be(out, kMidiDivision, 2);
  out.insert(out.end(), {'M', 'T', 'r', 'k'});
  put_be(out, static_cast<std::uint32_t>(track.size()), 4);
  out.insert(out.end(), track.begin(), track.end());
  return out;
}

}  // namespace stars
