#include "shuttle/transport.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

#include "shuttle/csv.hpp"
#include "shuttle/errors.hpp"

namespace shuttle {

namespace {

constexpr const char* kWaveformHeader = "step,z_um,Va,Vb,Vc,Vd,Ve,residual";

}  // namespace

void TransportPlan::validate() const {
  if (steps < 1) throw ValidationError("plan.steps must be at least 1");
  if (!(window > 0.0)) throw ValidationError("plan.window_um must be positive");
  if (!(fsr > 0.0)) throw ValidationError("plan.fsr_v must be positive");
  if (samples < 5) throw ValidationError("plan.samples must be at least 5");
  if (!(omega_target > 0.0)) throw ValidationError("plan.target_freq_khz must be positive");
  if (!std::isfinite(z_start) || !std::isfinite(z_end)) throw ValidationError("plan endpoints must be finite");
  ion.validate();
}

std::vector<double> schedule_positions(const TransportPlan& plan) {
  plan.validate();
  const int n = plan.steps;
  std::vector<double> z(n + 1);
  for (int k = 0; k <= n; ++k) {
    const double s = std::sin(constants::kPi * k / (2.0 * n));
    z[k] = plan.z_start + (plan.z_end - plan.z_start) * s * s;
  }
  z.front() = plan.z_start;
  z.back() = plan.z_end;
  return z;
}

Eigen::VectorXd target_potential(double z_k, const TransportPlan& plan, const Eigen::VectorXd& z) {
  const double curvature = plan.ion.mass * plan.omega_target * plan.omega_target / plan.ion.charge;
  return (0.5 * curvature) * (z.array() - z_k).square().matrix();
}

Eigen::VectorXd fit_target(double z_k, const TransportPlan& plan, const BasisMatrix& basis) {
  Eigen::VectorXd f = target_potential(z_k, plan, basis.z);
  if (plan.subtract_center) f -= plan.center_voltage * basis.center.transpose();
  return f;
}

double residual_error(const PairVoltages& x, const BasisMatrix& basis, const Eigen::VectorXd& f) {
  if (f.size() != basis.samples()) throw ValidationError("residual grid mismatch");
  const Eigen::Map<const Eigen::Matrix<double, kPairCount, 1>> xv(x.data());
  return (basis.values.transpose() * xv - f).squaredNorm();
}

EvalLine resolve_eval_line(const TransportPlan& plan, const ElectrodeGeometry& geometry,
                           const RfDrive& rf) {
  if (plan.eval_line.y0 > 0.0) return plan.eval_line;
  return {plan.eval_line.x0, find_rf_null(geometry, rf)};
}

StepSolution optimize_step(double z_k, const TransportPlan& plan, const ElectrodeGeometry& geometry,
                           const EvalLine& line, const BoxQpOptions& options) {
  const double half = 0.5 * plan.window;
  const BasisMatrix basis = sample_basis(geometry, line, {z_k - half, z_k + half}, plan.samples);
  const Eigen::VectorXd f = fit_target(z_k, plan, basis);
  StepSolution out;
  out.qp = solve_box_qp(assemble_qp(basis, f, plan.fsr), options);
  for (int i = 0; i < kPairCount; ++i) out.x[i] = out.qp.x[i];
  out.residual = residual_error(out.x, basis, f);
  return out;
}

WaveformTable optimize_transport(const TransportPlan& plan, const ElectrodeGeometry& geometry,
                                 const RfDrive& rf, const BoxQpOptions& options) {
  plan.validate();
  WaveformTable table;
  table.plan = plan;
  table.plan.eval_line = resolve_eval_line(plan, geometry, rf);
  table.schedule = schedule_positions(plan);
  for (std::size_t k = 0; k < table.schedule.size(); ++k) {
    try {
      const StepSolution s = optimize_step(table.schedule[k], table.plan, geometry,
                                           table.plan.eval_line, options);
      table.steps.push_back(s.x);
      table.residuals.push_back(s.residual);
    } catch (const SolverError& e) {
      throw SolverError(fmt::format("step {}: {}", k, e.what()), e.best_iterate(), e.residual());
    }
  }
  return table;
}

std::size_t sweep_count(double f_lo, double f_hi, double step) {
  if (!(f_hi >= f_lo) || !(step > 0.0)) throw ValidationError("sweep needs f_lo <= f_hi and step > 0");
  return static_cast<std::size_t>(std::floor((f_hi - f_lo) / step + 1e-9)) + 1;
}

std::vector<SweepPoint> error_sweep(double f_lo, double f_hi, double step, double fsr,
                                    const TransportPlan& plan, const ElectrodeGeometry& geometry,
                                    const RfDrive& rf, SweepMode mode) {
  const std::size_t count = sweep_count(f_lo, f_hi, step);
  TransportPlan base = plan;
  base.fsr = fsr;
  base.validate();
  const EvalLine line = resolve_eval_line(base, geometry, rf);
  const std::vector<double> schedule = schedule_positions(base);

  std::vector<SweepPoint> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    SweepPoint point;
    point.freq_hz = f_lo + static_cast<double>(i) * step;
    point.fsr = fsr;
    TransportPlan p = base;
    p.omega_target = constants::kTwoPi * point.freq_hz;
    try {
      if (mode == SweepMode::FirstStep) {
        point.error_sq = optimize_step(schedule.front(), p, geometry, line).residual;
      } else {
        for (double z : schedule) point.error_sq += optimize_step(z, p, geometry, line).residual;
      }
    } catch (const SolverError& e) {
      point.error_sq = std::nan("");
      point.failure = e.what();
    }
    out.push_back(point);
  }
  return out;
}

std::vector<char> saturated_pairs(const PairVoltages& x, double fsr) {
  std::vector<char> out;
  const double limit = 0.5 * fsr * (1.0 - 1e-12);
  for (int i = 0; i < kPairCount; ++i) {
    if (std::abs(x[i]) >= limit) out.push_back(kPairLabels[i]);
  }
  return out;
}

void write_waveform_csv(std::ostream& out, const WaveformTable& table) {
  out << kWaveformHeader << '\n';
  for (std::size_t k = 0; k < table.steps.size(); ++k) {
    const auto& x = table.steps[k];
    out << fmt::format("{},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g}\n", k,
                       table.schedule.at(k) / constants::kMicron, x[0], x[1], x[2], x[3], x[4],
                       table.residuals.at(k));
  }
}

WaveformTable read_waveform_csv(std::istream& in) {
  const CsvTable csv = read_csv(in);
  if (csv.header != split_csv_line(kWaveformHeader)) {
    throw ValidationError(fmt::format("waveform table header must be '{}'", kWaveformHeader));
  }
  WaveformTable table;
  for (std::size_t r = 0; r < csv.rows.size(); ++r) {
    const auto& row = csv.rows[r];
    if (parse_index(row[0], "step") != r) {
      throw ValidationError(fmt::format("waveform table row {} has out-of-order step", r + 1));
    }
    table.schedule.push_back(parse_double(row[1], "z_um") * constants::kMicron);
    PairVoltages x{};
    for (int i = 0; i < kPairCount; ++i) x[i] = parse_double(row[2 + i], "voltage");
    table.steps.push_back(x);
    table.residuals.push_back(parse_double(row[7], "residual"));
  }
  return table;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepPoint>& points) {
  out << "freq_hz,error_sq,fsr_v\n";
  for (const auto& p : points) out << fmt::format("{:.9g},{:.9g},{:.9g}\n", p.freq_hz, p.error_sq, p.fsr);
}

}  // namespace shuttle
