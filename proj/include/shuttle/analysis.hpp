#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "shuttle/transport.hpp"

namespace shuttle {

struct StepVerification {
  std::size_t step = 0;
  double z_k = 0.0;                        // scheduled position, m
  std::optional<double> null_z;            // found axial null, m
  double omega_achieved = 0.0;             // sqrt(e H_zz / m), rad/s
  double omega_eigen = 0.0;                // z-assigned eigenfrequency, rad/s
  double omega_target = 0.0;               // rad/s
  std::vector<char> saturated_pairs;
  std::optional<std::string> failure;

  bool ok() const { return !failure.has_value(); }
  /// |z* - z_k|, or NaN when no null was found.
  double null_offset() const;
};

struct VerifyOptions {
  /// Include the rf pseudopotential in the axial potential. Off gives the
  /// DC-only axial model.
  bool include_pseudopotential = true;
  AxialNullOptions null;
};

/// Per step: axial null within [z_k - L, z_k + L] on the plan's evaluation
/// line and the achieved axial frequency there. A failing step is flagged
/// and the others proceed.
std::vector<StepVerification> verify_transport(const WaveformTable& table,
                                               const ElectrodeGeometry& geometry,
                                               const RfDrive& rf, const VerifyOptions& options = {});

/// The table with every pair voltage and the center voltage multiplied by `s`.
WaveformTable scale_table(const WaveformTable& table, double s);

struct LorentzianParams {
  double center = 0.0;     // Hz
  double fwhm = 1.0;       // Hz
  double amplitude = 1.0;
  double offset = 0.0;
};

/// A (Gamma/2)^2 / ((nu - nu0)^2 + (Gamma/2)^2) + C.
double lorentzian_eval(const LorentzianParams& p, double nu);

struct ResonanceData {
  std::vector<double> nu;
  std::vector<double> value;

  std::size_t size() const { return nu.size(); }
};

struct ResonanceFit {
  LorentzianParams params;
  Eigen::Matrix4d covariance = Eigen::Matrix4d::Zero();  // order: center, fwhm, amplitude, offset
  double residual_norm = 0.0;
  int iterations = 0;
};

struct FitOptions {
  int max_iterations = 500;
  double relative_tolerance = 1e-12;
};

/// Damped Gauss-Newton least squares. Throws FitError on degenerate data,
/// a singular Jacobian or non-convergence.
ResonanceFit fit_lorentzian(const ResonanceData& data, const FitOptions& options = {});

struct ResonanceSweep {
  double start = 0.0;   // Hz
  double step = 100.0;  // Hz
  std::size_t count = 150;
};

/// Lorentzian samples at start + i step with multiplicative Gaussian noise of
/// relative size `sigma`. Deterministic for a given seed.
ResonanceData synth_resonance(const LorentzianParams& p, const ResonanceSweep& sweep, double sigma,
                              std::uint64_t seed);

/// CSV `nu_hz,value` in and out.
void write_resonance_csv(std::ostream& out, const ResonanceData& data);
ResonanceData read_resonance_csv(std::istream& in);

/// Fixed-order plain-text fit summary.
void write_fit_summary(std::ostream& out, const ResonanceFit& fit);

/// `step,z_um,null_z_um,achieved_hz,eigen_hz,target_hz,saturated,status`.
void write_verification_csv(std::ostream& out, const std::vector<StepVerification>& rows);

/// Achieved frequency per step for the two FSRs:
/// `step,target_hz,achieved_pm10_hz,achieved_pm50_hz`. Rows are paired by step.
void write_frequency_table(std::ostream& out, const std::vector<StepVerification>& low,
                           const std::vector<StepVerification>& high);

struct ScalingRow {
  double scale = 1.0;
  double max_ratio_error = 0.0;   // max |omega_s / (sqrt(s) omega_1) - 1|
  double max_null_shift = 0.0;    // m
  bool saturated = false;
};

/// Verifies the table scaled by each factor against the unscaled result.
std::vector<ScalingRow> scaling_law(const WaveformTable& table, const ElectrodeGeometry& geometry,
                                    const RfDrive& rf, const std::vector<double>& scales,
                                    const VerifyOptions& options = {});

/// `scale,max_ratio_error,max_null_shift_nm,saturated`.
void write_scaling_csv(std::ostream& out, const std::vector<ScalingRow>& rows);

}  // namespace shuttle
