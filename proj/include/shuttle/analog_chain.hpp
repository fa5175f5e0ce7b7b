#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "shuttle/dac.hpp"

namespace shuttle {

/// Output samples at t_n = n * dt for n = 0..N, where N is the input length.
struct AnalogWaveform {
  std::vector<double> t;      // s
  std::vector<double> volts;

  std::size_t size() const { return t.size(); }
};

/// Zero-order hold of `levels` (held for dt each), slew limited to
/// `slew_rate`, then a single-pole low-pass with time constant `tau`.
/// The filter integrates the piecewise-linear slewed signal exactly.
/// Both the slew stage and the filter start at `initial`.
AnalogWaveform analog_response(std::span<const double> levels, double dt, double slew_rate,
                               double tau, double initial = 0.0);

/// Dequantizes `codes` and runs them through the chain described by `spec`.
AnalogWaveform analog_chain(std::span<const std::int16_t> codes, const DacSpec& spec, double dt,
                            double initial = 0.0);

/// CSV `t_us,volts`.
void write_analog_csv(std::ostream& out, const AnalogWaveform& wave);

}  // namespace shuttle
