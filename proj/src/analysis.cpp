#include "shuttle/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <istream>
#include <ostream>
#include <random>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "shuttle/constants.hpp"
#include "shuttle/csv.hpp"
#include "shuttle/errors.hpp"

namespace shuttle {

namespace {

double to_hz(double omega) { return omega / constants::kTwoPi; }

std::string joined_labels(const std::vector<char>& labels) {
  return std::string(labels.begin(), labels.end());
}

}  // namespace

double StepVerification::null_offset() const {
  return null_z ? std::abs(*null_z - z_k) : std::numeric_limits<double>::quiet_NaN();
}

std::vector<StepVerification> verify_transport(const WaveformTable& table,
                                               const ElectrodeGeometry& geometry,
                                               const RfDrive& rf, const VerifyOptions& options) {
  const TransportPlan& plan = table.plan;
  plan.validate();
  rf.validate();
  if (table.schedule.size() != table.size()) throw ValidationError("table schedule and steps differ in length");
  const EvalLine line = resolve_eval_line(plan, geometry, rf);
  RfDrive drive = rf;
  if (!options.include_pseudopotential) drive.v_amplitude = 0.0;

  std::vector<StepVerification> out;
  out.reserve(table.size());
  for (std::size_t k = 0; k < table.size(); ++k) {
    StepVerification v;
    v.step = k;
    v.z_k = table.schedule[k];
    v.omega_target = plan.omega_target;
    v.saturated_pairs = saturated_pairs(table.steps[k], plan.fsr);
    const DcVoltages voltages = table.voltages(k);
    try {
      const double z = axial_null(geometry, drive, plan.ion, voltages, line,
                                  {v.z_k - plan.window, v.z_k + plan.window}, options.null);
      v.null_z = z;
      const FieldSample s = total_potential(geometry, drive, plan.ion, voltages, line.at(z));
      const double hzz = s.hessian(2, 2);
      const SecularFrequencies f = secular_frequencies(s.hessian, plan.ion);
      v.omega_eigen = f.omega[2];
      if (hzz > 0.0) {
        v.omega_achieved = std::sqrt(plan.ion.charge * hzz / plan.ion.mass);
      } else {
        v.failure = "axial curvature is not positive";
      }
    } catch (const NullSearchError& e) {
      v.failure = e.what();
    }
    out.push_back(std::move(v));
  }
  return out;
}

WaveformTable scale_table(const WaveformTable& table, double s) {
  WaveformTable out = table;
  for (auto& row : out.steps) {
    for (double& x : row) x *= s;
  }
  out.plan.center_voltage *= s;
  for (double& r : out.residuals) r = std::numeric_limits<double>::quiet_NaN();
  return out;
}

double lorentzian_eval(const LorentzianParams& p, double nu) {
  const double hw = 0.5 * p.fwhm;
  const double d = nu - p.center;
  return p.amplitude * hw * hw / (d * d + hw * hw) + p.offset;
}

ResonanceFit fit_lorentzian(const ResonanceData& data, const FitOptions& options) {
  const std::size_t n = data.size();
  if (data.value.size() != n) throw FitError("frequency and value columns differ in length");
  if (n < 5) throw FitError(fmt::format("need at least 5 points, got {}", n));
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(data.nu[i]) || !std::isfinite(data.value[i])) throw FitError("data contains non-finite values");
  }
  {
    std::vector<double> sorted = data.nu;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw FitError("frequencies must be distinct");
    }
  }

  const auto [min_it, max_it] = std::minmax_element(data.value.begin(), data.value.end());
  const auto [nu_lo, nu_hi] = std::minmax_element(data.nu.begin(), data.nu.end());
  const double span = *nu_hi - *nu_lo;
  const double vmin = *min_it;
  const double vmax = *max_it;
  if (!(vmax - vmin > 1e-12 * std::max(std::abs(vmax), std::abs(vmin)))) {
    throw FitError("degenerate amplitude: data is constant");
  }

  // Work in frequencies relative to the span midpoint for conditioning.
  const double ref = 0.5 * (*nu_lo + *nu_hi);
  Eigen::VectorXd nu(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    nu[i] = data.nu[i] - ref;
    y[i] = data.value[i];
  }

  Eigen::Vector4d p(data.nu[static_cast<std::size_t>(max_it - data.value.begin())] - ref, span / 5.0,
                    vmax - vmin, vmin);

  auto residuals = [&](const Eigen::Vector4d& q) {
    Eigen::VectorXd r(n);
    const double hw2 = 0.25 * q[1] * q[1];
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(n); ++i) {
      const double d = nu[i] - q[0];
      r[i] = q[2] * hw2 / (d * d + hw2) + q[3] - y[i];
    }
    return r;
  };
  auto jacobian = [&](const Eigen::Vector4d& q) {
    Eigen::MatrixXd J(n, 4);
    const double hw2 = 0.25 * q[1] * q[1];
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(n); ++i) {
      const double d = nu[i] - q[0];
      const double den = d * d + hw2;
      const double shape = hw2 / den;
      J(i, 0) = q[2] * hw2 * 2.0 * d / (den * den);
      J(i, 1) = q[2] * 0.5 * q[1] * d * d / (den * den);
      J(i, 2) = shape;
      J(i, 3) = 1.0;
    }
    return J;
  };

  Eigen::VectorXd r = residuals(p);
  double cost = r.squaredNorm();
  double lambda = 1e-3;
  int iter = 0;
  bool converged = cost == 0.0;
  while (!converged && iter < options.max_iterations) {
    ++iter;
    const Eigen::MatrixXd J = jacobian(p);
    const Eigen::Matrix4d JtJ = J.transpose() * J;
    const Eigen::Vector4d g = J.transpose() * r;
    if (!JtJ.allFinite() || JtJ.diagonal().minCoeff() <= 0.0) throw FitError("singular Jacobian");

    bool accepted = false;
    while (!accepted) {
      Eigen::Matrix4d A = JtJ;
      A.diagonal() *= (1.0 + lambda);
      const Eigen::Vector4d delta = A.ldlt().solve(-g);
      const Eigen::Vector4d trial = p + delta;
      const double trial_cost = trial[1] > 0.0 ? residuals(trial).squaredNorm()
                                               : std::numeric_limits<double>::infinity();
      if (std::isfinite(trial_cost) && trial_cost <= cost) {
        const double drop = cost - trial_cost;
        p = trial;
        r = residuals(p);
        cost = trial_cost;
        lambda = std::max(lambda / 10.0, 1e-15);
        accepted = true;
        if (drop <= options.relative_tolerance * cost || cost == 0.0) converged = true;
      } else {
        lambda *= 10.0;
        // No downhill step exists at working precision: stationary point.
        if (lambda > 1e16) {
          accepted = true;
          converged = true;
        }
      }
    }
  }
  if (!converged) throw FitError(fmt::format("no convergence after {} iterations (residual {:.6g})", iter, std::sqrt(cost)));
  if (!(p[1] > 0.0) || !(p[2] > 0.0)) {
    throw FitError(fmt::format("fit degenerated: fwhm {:.6g}, amplitude {:.6g}", p[1], p[2]));
  }

  ResonanceFit fit;
  fit.params = {p[0] + ref, p[1], p[2], p[3]};
  fit.residual_norm = std::sqrt(cost);
  fit.iterations = iter;
  const Eigen::MatrixXd J = jacobian(p);
  const Eigen::Matrix4d JtJ = J.transpose() * J;
  Eigen::FullPivLU<Eigen::Matrix4d> lu(JtJ);
  if (!lu.isInvertible()) throw FitError("singular Jacobian at the solution");
  const double dof = static_cast<double>(n) - 4.0;
  fit.covariance = lu.inverse() * (dof > 0.0 ? cost / dof : 0.0);
  return fit;
}

ResonanceData synth_resonance(const LorentzianParams& p, const ResonanceSweep& sweep, double sigma,
                              std::uint64_t seed) {
  if (!(sweep.step > 0.0)) throw ValidationError("sweep step must be positive");
  if (!(p.fwhm > 0.0)) throw ValidationError("fwhm must be positive");
  if (!(sigma >= 0.0)) throw ValidationError("noise level must be non-negative");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  ResonanceData data;
  data.nu.reserve(sweep.count);
  data.value.reserve(sweep.count);
  for (std::size_t i = 0; i < sweep.count; ++i) {
    const double nu = sweep.start + static_cast<double>(i) * sweep.step;
    const double clean = lorentzian_eval(p, nu);
    data.nu.push_back(nu);
    data.value.push_back(sigma > 0.0 ? clean * (1.0 + sigma * normal(rng)) : clean);
  }
  return data;
}

void write_resonance_csv(std::ostream& out, const ResonanceData& data) {
  out << "nu_hz,value\n";
  for (std::size_t i = 0; i < data.size(); ++i) out << fmt::format("{:.9g},{:.9g}\n", data.nu[i], data.value[i]);
}

ResonanceData read_resonance_csv(std::istream& in) {
  const CsvTable table = read_csv(in);
  if (table.header.size() != 2) throw ValidationError("resonance csv needs two columns (frequency, value)");
  ResonanceData data;
  for (const auto& row : table.rows) {
    data.nu.push_back(parse_double(row[0], table.header[0]));
    data.value.push_back(parse_double(row[1], table.header[1]));
  }
  return data;
}

void write_fit_summary(std::ostream& out, const ResonanceFit& fit) {
  const auto& p = fit.params;
  out << fmt::format("center_hz {:.9g}\n", p.center);
  out << fmt::format("center_sigma_hz {:.6g}\n", std::sqrt(fit.covariance(0, 0)));
  out << fmt::format("fwhm_hz {:.9g}\n", p.fwhm);
  out << fmt::format("fwhm_sigma_hz {:.6g}\n", std::sqrt(fit.covariance(1, 1)));
  out << fmt::format("amplitude {:.9g}\n", p.amplitude);
  out << fmt::format("offset {:.9g}\n", p.offset);
  out << fmt::format("residual_norm {:.6g}\n", fit.residual_norm);
  out << fmt::format("iterations {}\n", fit.iterations);
}

void write_verification_csv(std::ostream& out, const std::vector<StepVerification>& rows) {
  out << "step,z_um,null_z_um,achieved_hz,eigen_hz,target_hz,saturated,status\n";
  for (const auto& v : rows) {
    const std::string null_text = v.null_z ? fmt::format("{:.9g}", *v.null_z / constants::kMicron) : "";
    std::string status = v.failure ? *v.failure : "ok";
    std::replace(status.begin(), status.end(), ',', ';');
    out << fmt::format("{},{:.9g},{},{:.9g},{:.9g},{:.9g},{},{}\n", v.step, v.z_k / constants::kMicron,
                       null_text, to_hz(v.omega_achieved), to_hz(v.omega_eigen), to_hz(v.omega_target),
                       joined_labels(v.saturated_pairs), status);
  }
}

void write_frequency_table(std::ostream& out, const std::vector<StepVerification>& low,
                           const std::vector<StepVerification>& high) {
  if (low.size() != high.size()) throw ValidationError("frequency tables differ in step count");
  out << "step,target_hz,achieved_pm10_hz,achieved_pm50_hz\n";
  for (std::size_t k = 0; k < low.size(); ++k) {
    out << fmt::format("{},{:.9g},{:.9g},{:.9g}\n", k, to_hz(low[k].omega_target),
                       to_hz(low[k].omega_achieved), to_hz(high[k].omega_achieved));
  }
}

std::vector<ScalingRow> scaling_law(const WaveformTable& table, const ElectrodeGeometry& geometry,
                                    const RfDrive& rf, const std::vector<double>& scales,
                                    const VerifyOptions& options) {
  const auto base = verify_transport(table, geometry, rf, options);
  std::vector<ScalingRow> rows;
  for (double s : scales) {
    if (!(s > 0.0)) throw ValidationError("scale factors must be positive");
    const WaveformTable scaled = scale_table(table, s);
    const auto result = verify_transport(scaled, geometry, rf, options);
    ScalingRow row;
    row.scale = s;
    for (std::size_t k = 0; k < base.size(); ++k) {
      if (!base[k].ok() || !result[k].ok()) {
        row.max_ratio_error = std::numeric_limits<double>::infinity();
        row.max_null_shift = std::numeric_limits<double>::infinity();
        continue;
      }
      const double ratio = result[k].omega_achieved / (std::sqrt(s) * base[k].omega_achieved);
      row.max_ratio_error = std::max(row.max_ratio_error, std::abs(ratio - 1.0));
      row.max_null_shift = std::max(row.max_null_shift, std::abs(*result[k].null_z - *base[k].null_z));
      if (!saturated_pairs(scaled.steps[k], table.plan.fsr).empty()) row.saturated = true;
    }
    rows.push_back(row);
  }
  return rows;
}

void write_scaling_csv(std::ostream& out, const std::vector<ScalingRow>& rows) {
  out << "scale,max_ratio_error,max_null_shift_nm,saturated\n";
  for (const auto& r : rows) {
    out << fmt::format("{:.9g},{:.6g},{:.6g},{}\n", r.scale, r.max_ratio_error, r.max_null_shift * 1e9,
                       r.saturated ? 1 : 0);
  }
}

}  // namespace shuttle
