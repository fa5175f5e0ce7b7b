#pragma once

#include <cstdint>

namespace shuttle {

/// Output-chain parameters of the DAC system.
struct DacSpec {
  int channels = 16;
  double fsr = 100.0;                  // V, end-to-end (+-fsr/2)
  int resolution = 16;                 // bits; 12 is the other supported mode
  double max_update_rate = 16e6;       // updates/s
  double slew_rate = 20e6;             // V/s
  double lpf_cutoff = 2000.0;          // Hz
  double gain = 10.2;                  // non-inverting amplifier, informational
  double noise_density = 300e-9;       // V/sqrt(Hz) at 10 kHz, metadata only
  double thd_db = -88.0;               // at 10 kHz, metadata only

  double lsb() const;
  std::int32_t min_code() const;
  std::int32_t max_code() const;
  /// LPF time constant 1 / (2 pi f_c).
  double tau() const;

  void validate() const;
};

struct Quantized {
  std::int32_t code = 0;
  bool saturated = false;
};

/// Two's-complement code round(v / lsb), clamped to the code range.
Quantized quantize(double volts, const DacSpec& spec);

double dequantize(std::int32_t code, const DacSpec& spec);

}  // namespace shuttle
