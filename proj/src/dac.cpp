#include "shuttle/dac.hpp"

#include <cmath>

#include "shuttle/constants.hpp"
#include "shuttle/errors.hpp"

namespace shuttle {

double DacSpec::lsb() const { return fsr / std::ldexp(1.0, resolution); }

std::int32_t DacSpec::min_code() const { return -(std::int32_t{1} << (resolution - 1)); }

std::int32_t DacSpec::max_code() const { return (std::int32_t{1} << (resolution - 1)) - 1; }

double DacSpec::tau() const { return 1.0 / (constants::kTwoPi * lpf_cutoff); }

void DacSpec::validate() const {
  if (channels < 1) throw ValidationError("dac.channels must be positive");
  if (!(fsr > 0.0)) throw ValidationError("dac.fsr_v must be positive");
  if (resolution < 2 || resolution > 16) throw ValidationError("dac.resolution_bits must be in [2, 16]");
  if (!(max_update_rate > 0.0)) throw ValidationError("dac.max_update_rate_hz must be positive");
  if (!(slew_rate > 0.0)) throw ValidationError("dac.slew_rate_v_per_us must be positive");
  if (!(lpf_cutoff > 0.0)) throw ValidationError("dac.lpf_cutoff_hz must be positive");
  if (!(gain > 0.0)) throw ValidationError("dac.gain must be positive");
}

Quantized quantize(double volts, const DacSpec& spec) {
  if (std::isnan(volts)) throw DomainError("cannot quantize NaN");
  const double raw = std::nearbyint(volts / spec.lsb());
  Quantized q;
  if (raw > spec.max_code()) {
    q.code = spec.max_code();
    q.saturated = true;
  } else if (raw < spec.min_code()) {
    q.code = spec.min_code();
    q.saturated = true;
  } else {
    q.code = static_cast<std::int32_t>(raw);
  }
  return q;
}

double dequantize(std::int32_t code, const DacSpec& spec) { return code * spec.lsb(); }

}  // namespace shuttle
