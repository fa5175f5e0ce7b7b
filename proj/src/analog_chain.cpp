#include "shuttle/analog_chain.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <fmt/format.h>

#include "shuttle/errors.hpp"

namespace shuttle {

namespace {

// Exact response of dy/dt = (s - y) / tau over [0, T] for s(t) = s0 + m t.
double lpf_linear_segment(double y0, double s0, double m, double T, double tau) {
  const double decay = std::exp(-T / tau);
  return s0 + m * (T - tau) + (y0 - s0 + m * tau) * decay;
}

}  // namespace

AnalogWaveform analog_response(std::span<const double> levels, double dt, double slew_rate,
                               double tau, double initial) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ValidationError("analog chain dt must be positive");
  if (!(slew_rate > 0.0)) throw ValidationError("slew rate must be positive");
  if (!(tau > 0.0)) throw ValidationError("filter time constant must be positive");

  AnalogWaveform out;
  out.t.reserve(levels.size() + 1);
  out.volts.reserve(levels.size() + 1);
  out.t.push_back(0.0);
  out.volts.push_back(initial);

  double s = initial;
  double y = initial;
  for (std::size_t n = 0; n < levels.size(); ++n) {
    const double target = levels[n];
    if (!std::isfinite(target)) throw DomainError("analog chain input is not finite");
    const double gap = target - s;
    const double ramp_time = std::abs(gap) / slew_rate;
    if (ramp_time >= dt) {
      const double m = std::copysign(slew_rate, gap);
      y = lpf_linear_segment(y, s, m, dt, tau);
      s += m * dt;
    } else {
      if (ramp_time > 0.0) {
        y = lpf_linear_segment(y, s, std::copysign(slew_rate, gap), ramp_time, tau);
      }
      s = target;
      y = lpf_linear_segment(y, s, 0.0, dt - ramp_time, tau);
    }
    out.t.push_back(static_cast<double>(n + 1) * dt);
    out.volts.push_back(y);
  }
  return out;
}

AnalogWaveform analog_chain(std::span<const std::int16_t> codes, const DacSpec& spec, double dt,
                            double initial) {
  spec.validate();
  std::vector<double> levels(codes.size());
  std::transform(codes.begin(), codes.end(), levels.begin(),
                 [&](std::int16_t c) { return dequantize(c, spec); });
  return analog_response(levels, dt, spec.slew_rate, spec.tau(), initial);
}

void write_analog_csv(std::ostream& out, const AnalogWaveform& wave) {
  out << "t_us,volts\n";
  for (std::size_t i = 0; i < wave.size(); ++i) {
    out << fmt::format("{:.9g},{:.9g}\n", wave.t[i] * 1e6, wave.volts[i]);
  }
}

}  // namespace shuttle
