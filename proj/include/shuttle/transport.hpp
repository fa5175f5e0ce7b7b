#pragma once

#include <array>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "shuttle/box_qp.hpp"
#include "shuttle/geometry.hpp"
#include "shuttle/trap_model.hpp"

namespace shuttle {

struct TransportPlan {
  double z_start = 0.0;                                  // m
  double z_end = 200e-6;                                 // m
  int steps = 10;                                        // N; the table has N + 1 rows
  double omega_target = constants::kTwoPi * 500e3;       // rad/s
  double window = 50e-6;                                 // L, m
  double fsr = 100.0;                                    // V
  int samples = 51;                                      // M per window
  IonSpecies ion;
  EvalLine eval_line{0.0, 0.0};                          // y0 = 0 means "use the rf null"
  double center_voltage = 3.0;                           // V, held fixed
  /// Subtract the fixed center-electrode potential from the harmonic target.
  bool subtract_center = true;

  void validate() const;
};

using PairVoltages = std::array<double, kPairCount>;

struct WaveformTable {
  std::vector<PairVoltages> steps;
  std::vector<double> schedule;   // z_k per row, m
  std::vector<double> residuals;  // V^2 per row
  TransportPlan plan;

  std::size_t size() const { return steps.size(); }
  DcVoltages voltages(std::size_t k) const { return {steps.at(k), plan.center_voltage}; }
};

/// z_k = z_0 + (z_N - z_0) sin^2(pi k / 2N) for k = 0..N.
std::vector<double> schedule_positions(const TransportPlan& plan);

/// Harmonic target (m omega^2 / 2e)(z - z_k)^2 sampled at `z`.
Eigen::VectorXd target_potential(double z_k, const TransportPlan& plan, const Eigen::VectorXd& z);

/// Target vector the QP fits against: the harmonic well minus the center
/// electrode's fixed contribution when the plan asks for it.
Eigen::VectorXd fit_target(double z_k, const TransportPlan& plan, const BasisMatrix& basis);

/// Sum over samples of (v'x - f)^2, in V^2.
double residual_error(const PairVoltages& x, const BasisMatrix& basis, const Eigen::VectorXd& f);

/// The rf-null evaluation line used when the plan leaves y0 unset.
EvalLine resolve_eval_line(const TransportPlan& plan, const ElectrodeGeometry& geometry,
                           const RfDrive& rf);

struct StepSolution {
  PairVoltages x{};
  double residual = 0.0;
  BoxQpResult qp;
};

/// Solves one window centered on z_k.
StepSolution optimize_step(double z_k, const TransportPlan& plan, const ElectrodeGeometry& geometry,
                           const EvalLine& line, const BoxQpOptions& options = {});

/// One box-QP per scheduled position. Solver failures are rethrown as
/// SolverError with the step index in the message.
WaveformTable optimize_transport(const TransportPlan& plan, const ElectrodeGeometry& geometry,
                                 const RfDrive& rf, const BoxQpOptions& options = {});

enum class SweepMode {
  FirstStep,   // residual at the step-0 window only
  AllSteps,    // residual summed over all N + 1 windows
};

struct SweepPoint {
  double freq_hz = 0.0;
  double error_sq = 0.0;
  double fsr = 0.0;
  std::optional<std::string> failure;
};

/// Residual error versus target axial frequency over [f_lo, f_hi] in `step` increments.
std::vector<SweepPoint> error_sweep(double f_lo, double f_hi, double step, double fsr,
                                    const TransportPlan& plan, const ElectrodeGeometry& geometry,
                                    const RfDrive& rf, SweepMode mode = SweepMode::FirstStep);

/// Number of points error_sweep produces for the range; endpoints inclusive.
std::size_t sweep_count(double f_lo, double f_hi, double step);

/// Pair labels whose voltage sits on the FSR limit.
std::vector<char> saturated_pairs(const PairVoltages& x, double fsr);

void write_waveform_csv(std::ostream& out, const WaveformTable& table);
/// Parses the CSV written by write_waveform_csv. The plan is not stored in the
/// file; callers attach it. Throws ValidationError on malformed input.
WaveformTable read_waveform_csv(std::istream& in);

void write_sweep_csv(std::ostream& out, const std::vector<SweepPoint>& points);

}  // namespace shuttle
