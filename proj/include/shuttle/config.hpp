#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "shuttle/analysis.hpp"
#include "shuttle/dac.hpp"
#include "shuttle/sequencer.hpp"
#include "shuttle/transport.hpp"

namespace shuttle {

struct SweepConfig {
  double f_lo = 100e3;   // Hz
  double f_hi = 1e6;     // Hz
  double step = 10e3;    // Hz
  std::vector<double> fsrs{20.0, 100.0};
  SweepMode mode = SweepMode::FirstStep;
};

struct EncodeConfig {
  double hold = 100e-6;        // s per step
  double update_rate = 1e6;    // Hz
  StorageCaps caps;
};

struct ResonanceConfig {
  LorentzianParams params{276.6e3, 1.72e3, 1.0, 0.0};
  double span = 15e3;          // Hz, centered on params.center
  double step = 100.0;         // Hz
  double noise = 0.05;         // relative sigma
};

/// Everything the command-line tools read from the JSON configuration.
struct ToolkitConfig {
  TrapDimensions dims;
  RfDrive rf;
  TransportPlan plan;
  DacSpec dac;
  SweepConfig sweep;
  EncodeConfig encode;
  ResonanceConfig resonance;
  /// Static trap voltages per end electrode E1..E10; each pair must agree.
  std::array<double, 2 * kPairCount> static_end_voltages{0, 0, 10, 10, 0, 0, 10, 10, 0, 0};
  std::uint64_t seed = 1;

  ElectrodeGeometry geometry() const;
  DcVoltages static_voltages() const;
  ResonanceSweep resonance_sweep() const;
};

/// Parses a JSON document. Unknown keys, wrong types and out-of-range values
/// raise ValidationError naming the offending field.
ToolkitConfig parse_config(std::string_view json_text);
ToolkitConfig load_config(const std::filesystem::path& path);

/// The JSON document that parses back to `config`.
std::string dump_config(const ToolkitConfig& config);

}  // namespace shuttle
