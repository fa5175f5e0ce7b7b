#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "shuttle/constants.hpp"

namespace shuttle {

enum class ElectrodeRole { Rf, End, Center };

enum class GapPolicy {
  /// Each electrode grows to the midline of its neighbouring gaps, so the
  /// plane stays tiled and the gapless analytic solution applies directly.
  MidlineExtension,
  /// Electrodes keep their drawn size; gaps are treated as grounded plane.
  GroundedGap,
};

/// Axis-aligned electrode patch in the trap plane (y = 0). Coordinates in meters.
struct RectPatch {
  std::string id;
  ElectrodeRole role = ElectrodeRole::End;
  double x1 = 0.0, x2 = 0.0;
  double z1 = 0.0, z2 = 0.0;

  double width() const { return x2 - x1; }
  double length() const { return z2 - z1; }
};

inline constexpr int kPairCount = 5;
inline constexpr std::array<char, kPairCount> kPairLabels{'a', 'b', 'c', 'd', 'e'};

/// Electrode indices (into ElectrodeGeometry::electrodes) of each end pair.
using PairMap = std::array<std::array<std::size_t, 2>, kPairCount>;

/// Drawn dimensions of the five-wire planar trap, in micrometers.
struct TrapDimensions {
  double end_width_um = 5075.0;   // along x
  double end_length_um = 1000.0;  // along z
  double rf_width_um = 300.0;
  double rf_length_um = 11000.0;
  double center_width_um = 100.0;
  double center_length_um = 11000.0;
  double rf_dc_gap_um = 50.0;
  double dc_dc_gap_um = 25.0;
  GapPolicy gap_policy = GapPolicy::MidlineExtension;
};

class ElectrodeGeometry {
 public:
  /// Builds and validates a geometry from explicit patches. `pairs` may be
  /// omitted for RF-only test geometries that carry no END electrodes.
  ElectrodeGeometry(std::vector<RectPatch> electrodes, std::optional<PairMap> pairs,
                    GapPolicy policy = GapPolicy::GroundedGap);

  /// Center electrode flanked by two RF rails, with five end pairs outside the
  /// rails stacked along z (pair a at negative z, pair e at positive z).
  static ElectrodeGeometry standard(const TrapDimensions& dims = {});

  const std::vector<RectPatch>& electrodes() const { return electrodes_; }
  const std::optional<PairMap>& pairs() const { return pairs_; }
  GapPolicy gap_policy() const { return policy_; }

  /// Throws ValidationError when this geometry has no end pairs.
  const PairMap& require_pairs() const;

  std::vector<std::size_t> indices_with_role(ElectrodeRole role) const;

 private:
  void validate() const;

  std::vector<RectPatch> electrodes_;
  std::optional<PairMap> pairs_;
  GapPolicy policy_;
};

struct RfDrive {
  double omega_rf = constants::kTwoPi * 24.31e6;  // rad/s
  double v_amplitude = 100.0;                     // volts, zero-to-peak

  void validate() const;
};

struct IonSpecies {
  double mass = constants::kCalcium40MassU * constants::kAtomicMassUnit;  // kg
  double charge = constants::kElementaryCharge;                           // C

  static IonSpecies calcium40() { return {}; }
  void validate() const;
};

/// DC electrode settings: the five end-pair voltages plus the center electrode.
struct DcVoltages {
  std::array<double, kPairCount> pairs{};
  double center = 0.0;

  DcVoltages scaled(double s) const {
    DcVoltages out = *this;
    for (double& v : out.pairs) v *= s;
    out.center *= s;
    return out;
  }
};

}  // namespace shuttle
