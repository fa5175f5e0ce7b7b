#include "shuttle/trap_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Eigenvalues>
#include <fmt/format.h>

#include "shuttle/dual.hpp"
#include "shuttle/errors.hpp"

namespace shuttle {

namespace {

using constants::kTwoPi;

void require_above_plane(const Eigen::Vector3d& point) {
  if (!(point.y() > 0.0) || !point.allFinite()) {
    throw DomainError(fmt::format("field point ({:.6g}, {:.6g}, {:.6g}) m is not above the trap plane",
                                  point.x(), point.y(), point.z()));
  }
}

// Corner term F(a, b, c) = atan(a c / (b R)) with a = x_i - x, b = y, c = z_i - z.
// The rectangle potential is (1/2pi) sum over corners of s_x s_z F.
struct Corner {
  double x;
  double z;
  double sign;
};

std::array<Corner, 4> corners(const RectPatch& p) {
  return {{{p.x1, p.z1, 1.0}, {p.x1, p.z2, -1.0}, {p.x2, p.z1, -1.0}, {p.x2, p.z2, 1.0}}};
}

template <class T>
struct CornerHessian {
  T aa, bb, cc, ab, ac, cb;
};

template <class T>
CornerHessian<T> corner_hessian(const T& a, const T& b, const T& c) {
  const T a2 = a * a, b2 = b * b, c2 = c * c;
  const T A = a2 + b2;
  const T C = b2 + c2;
  const T R2 = a2 + b2 + c2;
  using std::sqrt;
  const T R = sqrt(R2);
  const T R3 = R2 * R;
  const T abc = a * b * c;
  const T invA = 1.0 / A;
  const T invC = 1.0 / C;
  CornerHessian<T> h;
  h.aa = -abc * (2.0 * invA * invA / R + invA / R3);
  h.cc = -abc * (2.0 * invC * invC / R + invC / R3);
  h.bb = abc * (2.0 * (invA * invA + invC * invC) / R + (invA + invC) / R3);
  h.ab = c * ((a2 - b2) * R2 - b2 * A) * invA * invA / R3;
  h.cb = a * ((c2 - b2) * R2 - b2 * C) * invC * invC / R3;
  h.ac = b / R3;
  return h;
}

// Maps a corner Hessian in (a, b, c) onto field coordinates (x, y, z).
template <class T, class Out>
void accumulate_hessian(const CornerHessian<T>& h, double sign, Out& out) {
  out(0, 0) += sign * h.aa;
  out(1, 1) += sign * h.bb;
  out(2, 2) += sign * h.cc;
  out(0, 1) += -sign * h.ab;
  out(1, 2) += -sign * h.cb;
  out(0, 2) += sign * h.ac;
}

struct RfField {
  Eigen::Vector3d gradient = Eigen::Vector3d::Zero();
  Eigen::Matrix3d hessian = Eigen::Matrix3d::Zero();
  std::array<Eigen::Matrix3d, 3> third{Eigen::Matrix3d::Zero(), Eigen::Matrix3d::Zero(),
                                       Eigen::Matrix3d::Zero()};
};

RfField rf_field(const ElectrodeGeometry& geometry, const Eigen::Vector3d& point, bool with_third) {
  RfField f;
  for (std::size_t idx : geometry.indices_with_role(ElectrodeRole::Rf)) {
    const auto& patch = geometry.electrodes()[idx];
    const FieldSample s = patch_derivatives(patch, point);
    f.gradient += s.gradient;
    f.hessian += s.hessian;
    if (with_third) {
      const auto t = patch_third_derivatives(patch, point);
      for (int k = 0; k < 3; ++k) f.third[k] += t[k];
    }
  }
  return f;
}

double pseudo_scale(const RfDrive& rf, const IonSpecies& ion) {
  return ion.charge * rf.v_amplitude * rf.v_amplitude / (4.0 * ion.mass * rf.omega_rf * rf.omega_rf);
}

// Pseudopotential value and gradient; the Hessian is filled only when requested.
FieldSample pseudo_sample(const ElectrodeGeometry& geometry, const RfDrive& rf,
                          const IonSpecies& ion, const Eigen::Vector3d& point, bool with_hessian) {
  require_above_plane(point);
  const double kappa = pseudo_scale(rf, ion);
  const RfField f = rf_field(geometry, point, with_hessian);
  FieldSample out;
  out.point = point;
  out.value = kappa * f.gradient.squaredNorm();
  out.gradient = 2.0 * kappa * f.hessian * f.gradient;
  if (with_hessian) {
    Eigen::Matrix3d h = f.hessian * f.hessian;
    for (int k = 0; k < 3; ++k) h += f.gradient[k] * f.third[k];
    out.hessian = 2.0 * kappa * h;
  }
  return out;
}

double axial_slope(const ElectrodeGeometry& geometry, const RfDrive& rf, const IonSpecies& ion,
                   const DcVoltages& voltages, const Eigen::Vector3d& point) {
  return dc_potential(geometry, voltages, point).gradient.z() +
         pseudo_sample(geometry, rf, ion, point, false).gradient.z();
}

double axial_value(const ElectrodeGeometry& geometry, const RfDrive& rf, const IonSpecies& ion,
                   const DcVoltages& voltages, const Eigen::Vector3d& point) {
  return dc_potential(geometry, voltages, point).value +
         pseudo_sample(geometry, rf, ion, point, false).value;
}

// Bisection on a continuous function with f(lo) < 0 < f(hi).
template <class F>
double bisect(F&& f, double lo, double hi, double tolerance) {
  double f_lo = f(lo);
  for (int it = 0; it < 200 && hi - lo > tolerance; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double f_mid = f(mid);
    if (f_mid == 0.0) return mid;
    if ((f_mid < 0.0) == (f_lo < 0.0)) {
      lo = mid;
      f_lo = f_mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

FieldSample& FieldSample::add_scaled(const FieldSample& other, double weight) {
  value += weight * other.value;
  gradient += weight * other.gradient;
  hessian += weight * other.hessian;
  return *this;
}

double patch_potential(const RectPatch& patch, const Eigen::Vector3d& point) {
  require_above_plane(point);
  const double y = point.y();
  double sum = 0.0;
  for (const Corner& k : corners(patch)) {
    const double a = k.x - point.x();
    const double c = k.z - point.z();
    const double r = std::sqrt(a * a + y * y + c * c);
    sum += k.sign * std::atan(a * c / (y * r));
  }
  return sum / kTwoPi;
}

FieldSample patch_derivatives(const RectPatch& patch, const Eigen::Vector3d& point) {
  require_above_plane(point);
  FieldSample out;
  out.point = point;
  const double b = point.y();
  for (const Corner& k : corners(patch)) {
    const double a = k.x - point.x();
    const double c = k.z - point.z();
    const double A = a * a + b * b;
    const double C = b * b + c * c;
    const double R = std::sqrt(a * a + b * b + c * c);
    out.value += k.sign * std::atan(a * c / (b * R));
    const double fa = b * c / (A * R);
    const double fc = a * b / (C * R);
    const double fb = -a * c * (1.0 / A + 1.0 / C) / R;
    out.gradient += k.sign * Eigen::Vector3d(-fa, fb, -fc);
    accumulate_hessian(corner_hessian(a, b, c), k.sign, out.hessian);
  }
  out.hessian(1, 0) = out.hessian(0, 1);
  out.hessian(2, 1) = out.hessian(1, 2);
  out.hessian(2, 0) = out.hessian(0, 2);
  out.value /= kTwoPi;
  out.gradient /= kTwoPi;
  out.hessian /= kTwoPi;
  return out;
}

std::array<Eigen::Matrix3d, 3> patch_third_derivatives(const RectPatch& patch,
                                                       const Eigen::Vector3d& point) {
  require_above_plane(point);
  using D = Dual<3>;
  struct {
    std::array<D, 9> m{};
    D& operator()(int i, int j) { return m[3 * i + j]; }
  } h;

  D b = D::variable(point.y(), 1);
  for (const Corner& k : corners(patch)) {
    D a(k.x - point.x());
    a.d[0] = -1.0;
    D c(k.z - point.z());
    c.d[2] = -1.0;
    accumulate_hessian(corner_hessian(a, b, c), k.sign, h);
  }
  std::array<Eigen::Matrix3d, 3> out;
  for (int k = 0; k < 3; ++k) {
    for (int i = 0; i < 3; ++i) {
      for (int j = i; j < 3; ++j) {
        out[k](i, j) = h(i, j).d[k] / kTwoPi;
        out[k](j, i) = out[k](i, j);
      }
    }
  }
  return out;
}

FieldSample role_potential(const ElectrodeGeometry& geometry, ElectrodeRole role,
                           const Eigen::Vector3d& point) {
  FieldSample out;
  out.point = point;
  for (std::size_t idx : geometry.indices_with_role(role)) {
    out.add_scaled(patch_derivatives(geometry.electrodes()[idx], point), 1.0);
  }
  return out;
}

FieldSample dc_potential(const ElectrodeGeometry& geometry, const DcVoltages& voltages,
                         const Eigen::Vector3d& point) {
  require_above_plane(point);
  const PairMap& pairs = geometry.require_pairs();
  FieldSample out;
  out.point = point;
  for (int k = 0; k < kPairCount; ++k) {
    for (std::size_t idx : pairs[k]) {
      out.add_scaled(patch_derivatives(geometry.electrodes()[idx], point), voltages.pairs[k]);
    }
  }
  for (std::size_t idx : geometry.indices_with_role(ElectrodeRole::Center)) {
    out.add_scaled(patch_derivatives(geometry.electrodes()[idx], point), voltages.center);
  }
  return out;
}

FieldSample pseudopotential(const ElectrodeGeometry& geometry, const RfDrive& rf,
                            const IonSpecies& ion, const Eigen::Vector3d& point) {
  return pseudo_sample(geometry, rf, ion, point, true);
}

FieldSample total_potential(const ElectrodeGeometry& geometry, const RfDrive& rf,
                            const IonSpecies& ion, const DcVoltages& voltages,
                            const Eigen::Vector3d& point) {
  FieldSample out = pseudopotential(geometry, rf, ion, point);
  out.add_scaled(dc_potential(geometry, voltages, point), 1.0);
  return out;
}

double find_rf_null(const ElectrodeGeometry& geometry, const RfDrive& rf,
                    const NullSearchOptions& options) {
  rf.validate();
  if (!(options.y_min > 0.0) || !(options.y_max > options.y_min) || options.scan_points < 3) {
    throw DomainError("invalid rf null search interval");
  }
  // |grad phi_rf|^2 has the same minimizer as the pseudopotential for any V > 0.
  auto field_sq = [&](double y) {
    return rf_field(geometry, {0.0, y, 0.0}, false).gradient.squaredNorm();
  };
  auto slope = [&](double y) {
    const RfField f = rf_field(geometry, {0.0, y, 0.0}, false);
    return f.gradient.dot(f.hessian.col(1));
  };

  const int n = options.scan_points;
  const double step = (options.y_max - options.y_min) / (n - 1);
  std::vector<double> values(n);
  for (int i = 0; i < n; ++i) values[i] = field_sq(options.y_min + i * step);

  int best = -1;
  for (int i = 1; i + 1 < n; ++i) {
    if (values[i] <= values[i - 1] && values[i] <= values[i + 1] &&
        (best < 0 || values[i] < values[best])) {
      best = i;
    }
  }
  if (best < 0) throw NullSearchError("no null found: pseudopotential has no interior minimum");

  const double lo = options.y_min + (best - 1) * step;
  const double hi = options.y_min + (best + 1) * step;
  if (!(slope(lo) < 0.0) || !(slope(hi) > 0.0)) {
    throw NullSearchError("no null found: pseudopotential slope does not change sign");
  }
  return bisect(slope, lo, hi, options.tolerance);
}

SecularFrequencies secular_frequencies(const Eigen::Matrix3d& hessian, const IonSpecies& ion) {
  ion.validate();
  const double scale = hessian.norm();
  if ((hessian - hessian.transpose()).norm() > 1e-9 * scale) {
    throw Error("potential Hessian is not symmetric");
  }
  const Eigen::Matrix3d sym = 0.5 * (hessian + hessian.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(sym);
  const Eigen::Vector3d lambda = solver.eigenvalues();
  const Eigen::Matrix3d vecs = solver.eigenvectors();

  // Assign eigenvectors to axes by maximal total alignment; the first
  // permutation in lexicographic order wins ties, which favours x, then y, then z.
  std::array<int, 3> perm{0, 1, 2};
  std::array<int, 3> best_perm = perm;
  double best_score = -1.0;
  do {
    double score = 0.0;
    for (int axis = 0; axis < 3; ++axis) score += std::abs(vecs(axis, perm[axis]));
    if (score > best_score + 1e-15) {
      best_score = score;
      best_perm = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));

  SecularFrequencies out;
  for (int axis = 0; axis < 3; ++axis) {
    const int e = best_perm[axis];
    out.curvature[axis] = lambda[e];
    out.stable[axis] = lambda[e] > 0.0;
    out.omega[axis] = std::sqrt(ion.charge * std::abs(lambda[e]) / ion.mass);
    out.eigenvectors.col(axis) = vecs.col(e);
  }
  return out;
}

SecularFrequencies secular_frequencies(const ElectrodeGeometry& geometry, const RfDrive& rf,
                                       const IonSpecies& ion, const DcVoltages& voltages,
                                       const Eigen::Vector3d& point) {
  return secular_frequencies(total_potential(geometry, rf, ion, voltages, point).hessian, ion);
}

Eigen::Vector3d find_equilibrium(const ElectrodeGeometry& geometry, const RfDrive& rf,
                                 const IonSpecies& ion, const DcVoltages& voltages,
                                 const Eigen::Vector3d& start) {
  constexpr double kMaxStep = 5e-6;
  Eigen::Vector3d p = start;
  for (int it = 0; it < 100; ++it) {
    const FieldSample s = total_potential(geometry, rf, ion, voltages, p);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(s.hessian);
    if (eig.eigenvalues().minCoeff() <= 0.0) {
      throw NullSearchError("total potential is not confining near the start point");
    }
    Eigen::Vector3d step = -eig.eigenvectors() *
                           (eig.eigenvalues().cwiseInverse().asDiagonal() *
                            (eig.eigenvectors().transpose() * s.gradient));
    if (step.norm() > kMaxStep) step *= kMaxStep / step.norm();
    p += step;
    if (step.norm() < 1e-13) return p;
  }
  throw NullSearchError("equilibrium search did not converge");
}

double axial_null(const ElectrodeGeometry& geometry, const RfDrive& rf, const IonSpecies& ion,
                  const DcVoltages& voltages, const EvalLine& line,
                  std::pair<double, double> window, const AxialNullOptions& options) {
  const auto [lo, hi] = window;
  if (!(hi > lo) || options.scan_points < 3) throw DomainError("invalid axial null window");

  const int n = options.scan_points;
  const double step = (hi - lo) / (n - 1);
  std::vector<double> values(n);
  for (int i = 0; i < n; ++i) values[i] = axial_value(geometry, rf, ion, voltages, line.at(lo + i * step));

  std::vector<int> minima;
  for (int i = 1; i + 1 < n; ++i) {
    if (values[i] < values[i - 1] && values[i] <= values[i + 1]) minima.push_back(i);
  }
  if (minima.size() != 1) {
    throw NullSearchError(fmt::format("ambiguous null: {} minima in [{:.6g}, {:.6g}] um",
                                      minima.size(), lo / constants::kMicron, hi / constants::kMicron));
  }

  auto slope = [&](double z) { return axial_slope(geometry, rf, ion, voltages, line.at(z)); };
  const double a = lo + (minima.front() - 1) * step;
  const double b = lo + (minima.front() + 1) * step;
  if (!(slope(a) < 0.0) || !(slope(b) > 0.0)) {
    throw NullSearchError("ambiguous null: axial slope does not change sign");
  }
  const double z = bisect(slope, a, b, options.tolerance);
  if (std::abs(slope(z)) > options.gradient_tolerance) {
    throw NullSearchError(fmt::format("axial null residual field {:.3g} V/m too large", slope(z)));
  }
  return z;
}

BasisMatrix sample_basis(const ElectrodeGeometry& geometry, const EvalLine& line,
                         std::pair<double, double> z_range, int samples) {
  if (samples < 2) throw DomainError("basis needs at least two samples");
  if (!(line.y0 > 0.0)) throw DomainError("basis evaluation line must lie above the trap plane");
  const auto [z_min, z_max] = z_range;
  if (!(z_max > z_min)) throw DomainError("basis z range is empty");

  const PairMap& pairs = geometry.require_pairs();
  const auto centers = geometry.indices_with_role(ElectrodeRole::Center);

  BasisMatrix basis;
  basis.eval_line = line;
  basis.z.resize(samples);
  basis.values.resize(kPairCount, samples);
  basis.center.resize(samples);
  for (int j = 0; j < samples; ++j) {
    // Endpoints are hit exactly so the window edges match the plan.
    const double z = j == samples - 1 ? z_max : z_min + j * (z_max - z_min) / (samples - 1);
    basis.z[j] = z;
    const Eigen::Vector3d p = line.at(z);
    for (int k = 0; k < kPairCount; ++k) {
      basis.values(k, j) = patch_potential(geometry.electrodes()[pairs[k][0]], p) +
                           patch_potential(geometry.electrodes()[pairs[k][1]], p);
    }
    double c = 0.0;
    for (std::size_t idx : centers) c += patch_potential(geometry.electrodes()[idx], p);
    basis.center[j] = c;
  }
  return basis;
}

}  // namespace shuttle
