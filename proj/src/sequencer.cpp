#include "shuttle/sequencer.hpp"

#include <array>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>

#include <fmt/format.h>

#include "shuttle/errors.hpp"

namespace shuttle {

namespace {

constexpr std::array<char, 4> kMagic{'S', 'Q', 'W', '1'};

template <class T>
void put_le(std::ostream& out, T value) {
  using U = std::make_unsigned_t<T>;
  auto u = static_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.put(static_cast<char>(u & 0xFFu));
    u = static_cast<U>(u >> 8);
  }
}

template <class T>
T get_le(std::istream& in) {
  using U = std::make_unsigned_t<T>;
  U u = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    const int c = in.get();
    if (c == std::char_traits<char>::eof()) throw ValidationError("sequencer program is truncated");
    u = static_cast<U>(u | (static_cast<U>(static_cast<unsigned char>(c)) << (8 * i)));
  }
  return static_cast<T>(u);
}

}  // namespace

std::uint64_t SequencerProgram::sample_count() const {
  std::uint64_t per_pass = 0;
  for (std::uint32_t i = 0; i < ctrl_length && i < chunks.size(); ++i) {
    per_pass += std::uint64_t{chunks[i].length} * chunks[i].repetition;
  }
  return per_pass * repetition;
}

std::optional<std::string> SequencerProgram::defect() const {
  if (ctrl_length > chunks.size()) {
    return fmt::format("ctrl_length {} exceeds {} chunk entries", ctrl_length, chunks.size());
  }
  if (ctrl_length > 0 && repetition == 0) return std::string("repetition must be at least 1");
  if (update_rate == 0) return std::string("update rate must be positive");
  for (std::uint32_t i = 0; i < ctrl_length; ++i) {
    const ChunkEntry& e = chunks[i];
    if (e.length == 0) return fmt::format("entry {} has zero chunk_length", i);
    if (e.repetition == 0) return fmt::format("entry {} has zero chunk_repetition", i);
    if (std::uint64_t{e.offset} + e.length > pattern.size()) {
      return fmt::format("entry {} reads past the {}-word pattern storage", i, pattern.size());
    }
  }
  return std::nullopt;
}

SequencerProgram encode_stream(std::span<const std::int16_t> codes, std::uint32_t update_rate,
                               std::uint16_t channel_id, std::uint16_t resolution,
                               const StorageCaps& caps) {
  SequencerProgram program;
  program.channel_id = channel_id;
  program.resolution = resolution;
  program.update_rate = update_rate;
  program.repetition = 1;

  constexpr std::uint64_t kMaxRepeat = std::numeric_limits<std::uint32_t>::max();
  std::size_t i = 0;
  while (i < codes.size()) {
    std::size_t j = i;
    while (j < codes.size() && codes[j] == codes[i]) ++j;
    const auto word = static_cast<std::uint32_t>(program.pattern.size());
    program.pattern.push_back(codes[i]);
    std::uint64_t run = j - i;
    while (run > 0) {
      const auto rep = static_cast<std::uint32_t>(std::min(run, kMaxRepeat));
      program.chunks.push_back({word, 1, rep});
      run -= rep;
    }
    i = j;
  }
  program.ctrl_length = static_cast<std::uint32_t>(program.chunks.size());
  if (program.pattern.size() > caps.pattern_words || program.chunks.size() > caps.chunk_entries) {
    throw EncodeError(fmt::format("program needs {} pattern words and {} chunk entries; capacity is {} and {}",
                                  program.pattern.size(), program.chunks.size(), caps.pattern_words,
                                  caps.chunk_entries),
                      program.pattern.size(), program.chunks.size());
  }
  return program;
}

std::uint64_t hold_samples(double hold_seconds, double update_rate) {
  const double n = hold_seconds * update_rate;
  const double rounded = std::round(n);
  if (!(rounded >= 1.0) || std::abs(n - rounded) > 1e-9 * std::max(1.0, rounded)) {
    throw ValidationError(fmt::format("hold x rate = {:.9g} is not a positive integer", n));
  }
  return static_cast<std::uint64_t>(rounded);
}

std::vector<std::int16_t> naive_expansion(const WaveformTable& table, int pair, double hold_seconds,
                                          double update_rate, const DacSpec& spec) {
  const std::uint64_t hold = hold_samples(hold_seconds, update_rate);
  std::vector<std::int16_t> out;
  out.reserve(table.size() * hold);
  for (const auto& row : table.steps) {
    const auto code = static_cast<std::int16_t>(quantize(row.at(pair), spec).code);
    out.insert(out.end(), hold, code);
  }
  return out;
}

std::vector<SequencerProgram> encode_chunks(const WaveformTable& table, double hold_seconds,
                                            double update_rate, const DacSpec& spec,
                                            const StorageCaps& caps) {
  spec.validate();
  if (update_rate > spec.max_update_rate) {
    throw ValidationError(fmt::format("update rate {:.9g} Hz exceeds the {:.9g} Hz maximum", update_rate,
                                      spec.max_update_rate));
  }
  if (update_rate != std::floor(update_rate) || update_rate > std::numeric_limits<std::uint32_t>::max()) {
    throw ValidationError("update rate must be an integer number of Hz");
  }
  const std::uint64_t hold = hold_samples(hold_seconds, update_rate);

  std::vector<SequencerProgram> programs;
  for (int pair = 0; pair < kPairCount; ++pair) {
    // Run-length over rows first, so the stream is never materialized.
    SequencerProgram p;
    p.channel_id = static_cast<std::uint16_t>(pair);
    p.resolution = static_cast<std::uint16_t>(spec.resolution);
    p.update_rate = static_cast<std::uint32_t>(update_rate);
    std::vector<std::int16_t> row_codes;
    for (const auto& row : table.steps) {
      row_codes.push_back(static_cast<std::int16_t>(quantize(row[pair], spec).code));
    }
    std::size_t i = 0;
    while (i < row_codes.size()) {
      std::size_t j = i;
      while (j < row_codes.size() && row_codes[j] == row_codes[i]) ++j;
      const auto word = static_cast<std::uint32_t>(p.pattern.size());
      p.pattern.push_back(row_codes[i]);
      std::uint64_t run = (j - i) * hold;
      while (run > 0) {
        const auto rep = static_cast<std::uint32_t>(
            std::min<std::uint64_t>(run, std::numeric_limits<std::uint32_t>::max()));
        p.chunks.push_back({word, 1, rep});
        run -= rep;
      }
      i = j;
    }
    p.ctrl_length = static_cast<std::uint32_t>(p.chunks.size());
    if (p.pattern.size() > caps.pattern_words || p.chunks.size() > caps.chunk_entries) {
      throw EncodeError(fmt::format("channel {} needs {} pattern words and {} chunk entries; capacity is {} and {}",
                                    pair, p.pattern.size(), p.chunks.size(), caps.pattern_words,
                                    caps.chunk_entries),
                        p.pattern.size(), p.chunks.size());
    }
    programs.push_back(std::move(p));
  }
  return programs;
}

EmulatorState kick(const SequencerProgram& program) {
  EmulatorState s;
  if (program.defect()) {
    s.phase = Phase::Stopped;
    s.error = true;
    return s;
  }
  if (program.ctrl_length == 0) return s;
  s.phase = Phase::Running;
  s.busy = true;
  s.wave_valid = true;
  return s;
}

EmulatorStep emulate_step(const EmulatorState& state, const SequencerProgram& program,
                          bool force_stop) {
  EmulatorStep out{state, std::nullopt};
  EmulatorState& s = out.state;
  if (s.phase != Phase::Running) return out;

  if (force_stop) {
    s.phase = Phase::Idle;
    s.busy = false;
    s.wave_valid = false;
    return out;
  }

  auto& c = s.cursor;
  if (c.entry >= program.ctrl_length || c.entry >= program.chunks.size() ||
      std::uint64_t{program.chunks[c.entry].offset} + c.word >= program.pattern.size()) {
    s.phase = Phase::Stopped;
    s.busy = false;
    s.wave_valid = false;
    s.error = true;
    return out;
  }

  const ChunkEntry& e = program.chunks[c.entry];
  out.sample = program.pattern[e.offset + c.word];
  ++s.emitted;

  if (++c.word < e.length) return out;
  c.word = 0;
  if (++c.chunk_repeat < e.repetition) return out;
  c.chunk_repeat = 0;
  if (++c.entry < program.ctrl_length) return out;
  c.entry = 0;
  if (++c.outer < program.repetition) return out;

  c.outer = 0;
  s.phase = Phase::Idle;
  s.busy = false;
  s.wave_valid = false;
  return out;
}

std::vector<std::int16_t> emulate(const SequencerProgram& program) {
  std::vector<std::int16_t> out;
  EmulatorState s = kick(program);
  if (s.error) throw ValidationError(fmt::format("malformed program: {}", *program.defect()));
  out.reserve(program.sample_count());
  while (s.phase == Phase::Running) {
    auto step = emulate_step(s, program);
    if (step.sample) out.push_back(*step.sample);
    s = step.state;
  }
  if (s.error) throw ValidationError("sequencer faulted during emulation");
  return out;
}

std::optional<std::size_t> verify_stream(const SequencerProgram& program,
                                         std::span<const std::int16_t> reference) {
  const std::vector<std::int16_t> emitted = emulate(program);
  const std::size_t n = std::min(emitted.size(), reference.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (emitted[i] != reference[i]) return i;
  }
  if (emitted.size() != reference.size()) return n;
  return std::nullopt;
}

void write_program(std::ostream& out, const SequencerProgram& program) {
  if (program.ctrl_length > program.chunks.size()) {
    throw ValidationError("ctrl_length exceeds the chunk storage");
  }
  out.write(kMagic.data(), kMagic.size());
  put_le<std::uint16_t>(out, program.channel_id);
  put_le<std::uint16_t>(out, program.resolution);
  put_le<std::uint32_t>(out, program.update_rate);
  put_le<std::uint32_t>(out, program.repetition);
  put_le<std::uint32_t>(out, program.ctrl_length);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(program.pattern.size()));
  for (std::uint32_t i = 0; i < program.ctrl_length; ++i) {
    put_le<std::uint32_t>(out, program.chunks[i].offset);
    put_le<std::uint32_t>(out, program.chunks[i].length);
    put_le<std::uint32_t>(out, program.chunks[i].repetition);
  }
  for (std::int16_t w : program.pattern) put_le<std::int16_t>(out, w);
}

SequencerProgram read_program(std::istream& in) {
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
    throw ValidationError("not a sequencer program (bad magic)");
  }
  SequencerProgram p;
  p.channel_id = get_le<std::uint16_t>(in);
  p.resolution = get_le<std::uint16_t>(in);
  p.update_rate = get_le<std::uint32_t>(in);
  p.repetition = get_le<std::uint32_t>(in);
  p.ctrl_length = get_le<std::uint32_t>(in);
  const auto words = get_le<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < p.ctrl_length; ++i) {
    ChunkEntry e;
    e.offset = get_le<std::uint32_t>(in);
    e.length = get_le<std::uint32_t>(in);
    e.repetition = get_le<std::uint32_t>(in);
    p.chunks.push_back(e);
  }
  for (std::uint32_t i = 0; i < words; ++i) p.pattern.push_back(get_le<std::int16_t>(in));
  if (in.peek() != std::char_traits<char>::eof()) throw ValidationError("trailing bytes after sequencer program");
  return p;
}

}  // namespace shuttle
