#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "shuttle/dac.hpp"
#include "shuttle/transport.hpp"

namespace shuttle {

/// One Chunk Storage entry: replay pattern words [offset, offset + length)
/// `repetition` times.
struct ChunkEntry {
  std::uint32_t offset = 0;
  std::uint32_t length = 1;
  std::uint32_t repetition = 1;

  friend bool operator==(const ChunkEntry&, const ChunkEntry&) = default;
};

struct StorageCaps {
  std::size_t pattern_words = 4096;
  std::size_t chunk_entries = 256;
};

/// Wave Pattern Storage plus Chunk Storage for one channel. The sequencer
/// plays the first `ctrl_length` entries in order, `repetition` times over.
struct SequencerProgram {
  std::uint16_t channel_id = 0;
  std::uint16_t resolution = 16;
  std::uint32_t update_rate = 1'000'000;  // Hz
  std::uint32_t repetition = 1;
  std::uint32_t ctrl_length = 0;
  std::vector<std::int16_t> pattern;
  std::vector<ChunkEntry> chunks;

  /// Pattern words plus chunk entries in use.
  std::size_t footprint() const { return pattern.size() + ctrl_length; }
  /// repetition * sum(length * chunk repetition) over the active entries.
  std::uint64_t sample_count() const;
  /// Reason the program cannot run, if any.
  std::optional<std::string> defect() const;

  friend bool operator==(const SequencerProgram&, const SequencerProgram&) = default;
};

/// Run-length encodes a code stream: one pattern word and one entry per run
/// of equal consecutive codes. Throws EncodeError when `caps` is exceeded.
SequencerProgram encode_stream(std::span<const std::int16_t> codes, std::uint32_t update_rate,
                               std::uint16_t channel_id, std::uint16_t resolution,
                               const StorageCaps& caps = {});

/// Number of updates each table row is held for; requires hold * rate to be
/// a positive integer.
std::uint64_t hold_samples(double hold_seconds, double update_rate);

/// The sample-by-sample code stream of one pair channel: each row's quantized
/// voltage repeated for hold * rate updates.
std::vector<std::int16_t> naive_expansion(const WaveformTable& table, int pair, double hold_seconds,
                                          double update_rate, const DacSpec& spec);

/// One program per end pair (channel ids 0..4 for pairs a..e).
std::vector<SequencerProgram> encode_chunks(const WaveformTable& table, double hold_seconds,
                                            double update_rate, const DacSpec& spec,
                                            const StorageCaps& caps = {});

enum class Phase { Idle, Running, Stopped };

struct EmulatorCursor {
  std::uint32_t entry = 0;
  std::uint32_t chunk_repeat = 0;
  std::uint32_t word = 0;
  std::uint32_t outer = 0;
};

/// Sequencer state. `Stopped` is the fault state entered on a malformed
/// program; a completed or force-stopped run returns to `Idle`.
struct EmulatorState {
  Phase phase = Phase::Idle;
  bool busy = false;
  bool wave_valid = false;
  bool error = false;
  EmulatorCursor cursor;
  std::uint64_t emitted = 0;
};

EmulatorState kick(const SequencerProgram& program);

struct EmulatorStep {
  EmulatorState state;
  std::optional<std::int16_t> sample;  // present only when wave_valid was asserted
};

EmulatorStep emulate_step(const EmulatorState& state, const SequencerProgram& program,
                          bool force_stop = false);

/// Kicks the program and collects every valid sample until the sequencer idles.
std::vector<std::int16_t> emulate(const SequencerProgram& program);

/// Index of the first sample where the emulated program and `reference`
/// differ (including one stream ending early); nullopt when identical.
std::optional<std::size_t> verify_stream(const SequencerProgram& program,
                                         std::span<const std::int16_t> reference);

/// Little-endian "SQW1" container.
void write_program(std::ostream& out, const SequencerProgram& program);
SequencerProgram read_program(std::istream& in);

}  // namespace shuttle
