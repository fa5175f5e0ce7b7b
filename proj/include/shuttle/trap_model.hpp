#pragma once

#include <array>
#include <utility>

#include <Eigen/Core>

#include "shuttle/geometry.hpp"

namespace shuttle {

/// Potential (volts) with its gradient (V/m) and Hessian (V/m^2) at a point.
struct FieldSample {
  Eigen::Vector3d point = Eigen::Vector3d::Zero();
  double value = 0.0;
  Eigen::Vector3d gradient = Eigen::Vector3d::Zero();
  Eigen::Matrix3d hessian = Eigen::Matrix3d::Zero();

  /// Accumulates `weight * other` (values only; the point is kept).
  FieldSample& add_scaled(const FieldSample& other, double weight);
};

/// Line parallel to the transport axis at fixed (x0, y0).
struct EvalLine {
  double x0 = 0.0;
  double y0 = 0.0;

  Eigen::Vector3d at(double z) const { return {x0, y0, z}; }
};

/// Unit-voltage potential of one patch with the rest of the plane grounded.
/// Requires point.y() > 0; throws DomainError otherwise.
double patch_potential(const RectPatch& patch, const Eigen::Vector3d& point);

/// patch_potential together with its closed-form gradient and Hessian.
FieldSample patch_derivatives(const RectPatch& patch, const Eigen::Vector3d& point);

/// Third derivatives d_k H_ij of the unit-voltage patch potential, indexed [k](i, j).
std::array<Eigen::Matrix3d, 3> patch_third_derivatives(const RectPatch& patch,
                                                       const Eigen::Vector3d& point);

/// Unit-voltage potential of every electrode with the given role, summed.
FieldSample role_potential(const ElectrodeGeometry& geometry, ElectrodeRole role,
                           const Eigen::Vector3d& point);

/// Superposed DC potential from the end pairs and center electrode.
FieldSample dc_potential(const ElectrodeGeometry& geometry, const DcVoltages& voltages,
                         const Eigen::Vector3d& point);

/// Ponderomotive pseudopotential e V^2 |grad phi_rf|^2 / (4 m Omega^2), in volts.
FieldSample pseudopotential(const ElectrodeGeometry& geometry, const RfDrive& rf,
                            const IonSpecies& ion, const Eigen::Vector3d& point);

/// Pseudopotential plus DC potential.
FieldSample total_potential(const ElectrodeGeometry& geometry, const RfDrive& rf,
                            const IonSpecies& ion, const DcVoltages& voltages,
                            const Eigen::Vector3d& point);

struct NullSearchOptions {
  double y_min = 20e-6;
  double y_max = 1e-3;
  int scan_points = 2000;
  double tolerance = 1e-12;  // meters
};

/// Height of the pseudopotential minimum on the vertical line x = 0, z = 0.
double find_rf_null(const ElectrodeGeometry& geometry, const RfDrive& rf,
                    const NullSearchOptions& options = {});

struct SecularFrequencies {
  /// Angular frequencies (rad/s) assigned to the x, y, z axes. For an
  /// unstable axis the magnitude sqrt(e |lambda| / m) is reported.
  std::array<double, 3> omega{};
  /// Hessian eigenvalue (V/m^2) attached to each axis.
  std::array<double, 3> curvature{};
  std::array<bool, 3> stable{};
  Eigen::Matrix3d eigenvectors = Eigen::Matrix3d::Identity();  // column per axis

  bool all_stable() const { return stable[0] && stable[1] && stable[2]; }
};

/// Secular frequencies of a potential Hessian (V/m^2). Throws Error if the
/// matrix is not symmetric to 1e-9 relative.
SecularFrequencies secular_frequencies(const Eigen::Matrix3d& hessian, const IonSpecies& ion);

SecularFrequencies secular_frequencies(const ElectrodeGeometry& geometry, const RfDrive& rf,
                                       const IonSpecies& ion, const DcVoltages& voltages,
                                       const Eigen::Vector3d& point);

/// Three-dimensional minimum of the total potential, Newton-refined from `start`.
Eigen::Vector3d find_equilibrium(const ElectrodeGeometry& geometry, const RfDrive& rf,
                                 const IonSpecies& ion, const DcVoltages& voltages,
                                 const Eigen::Vector3d& start);

struct AxialNullOptions {
  int scan_points = 401;
  double tolerance = 1e-12;            // meters
  double gradient_tolerance = 1e-3;    // V/m
};

/// The unique minimum of the total potential along `line` within `window`.
/// Throws NullSearchError when the window holds zero or several minima.
double axial_null(const ElectrodeGeometry& geometry, const RfDrive& rf, const IonSpecies& ion,
                  const DcVoltages& voltages, const EvalLine& line,
                  std::pair<double, double> window, const AxialNullOptions& options = {});

struct BasisMatrix {
  std::array<char, kPairCount> pair_labels = kPairLabels;
  Eigen::VectorXd z;                           // M sample positions (m)
  Eigen::Matrix<double, kPairCount, Eigen::Dynamic> values;  // volts per volt
  Eigen::RowVectorXd center;                   // center electrode, volts per volt
  EvalLine eval_line;

  Eigen::Index samples() const { return z.size(); }
};

/// Unit-voltage potentials of each end pair at M uniformly spaced points.
BasisMatrix sample_basis(const ElectrodeGeometry& geometry, const EvalLine& line,
                         std::pair<double, double> z_range, int samples);

}  // namespace shuttle
