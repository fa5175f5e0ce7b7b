#include "shuttle/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>

#include "shuttle/errors.hpp"

namespace shuttle {

namespace {

constexpr double kOverlapTolerance = 1e-12;  // meters

bool overlaps(const RectPatch& a, const RectPatch& b) {
  const double dx = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double dz = std::min(a.z2, b.z2) - std::max(a.z1, b.z1);
  return dx > kOverlapTolerance && dz > kOverlapTolerance;
}

bool close(double a, double b) { return std::abs(a - b) <= kOverlapTolerance; }

}  // namespace

ElectrodeGeometry::ElectrodeGeometry(std::vector<RectPatch> electrodes,
                                     std::optional<PairMap> pairs, GapPolicy policy)
    : electrodes_(std::move(electrodes)), pairs_(pairs), policy_(policy) {
  validate();
}

void ElectrodeGeometry::validate() const {
  if (electrodes_.empty()) throw ValidationError("geometry has no electrodes");
  for (const auto& p : electrodes_) {
    if (!(p.x2 > p.x1) || !(p.z2 > p.z1) || !std::isfinite(p.x1) || !std::isfinite(p.x2) ||
        !std::isfinite(p.z1) || !std::isfinite(p.z2)) {
      throw ValidationError(fmt::format("electrode '{}' has an empty or non-finite extent", p.id));
    }
  }
  for (std::size_t i = 0; i < electrodes_.size(); ++i) {
    for (std::size_t j = i + 1; j < electrodes_.size(); ++j) {
      if (overlaps(electrodes_[i], electrodes_[j])) {
        throw ValidationError(fmt::format("electrodes '{}' and '{}' overlap", electrodes_[i].id,
                                          electrodes_[j].id));
      }
    }
  }

  const auto ends = indices_with_role(ElectrodeRole::End);
  if (!pairs_) {
    if (!ends.empty()) throw ValidationError("end electrodes present without a pair map");
    return;
  }
  if (ends.size() != 2 * kPairCount) {
    throw ValidationError(
        fmt::format("pair map needs exactly {} end electrodes, found {}", 2 * kPairCount, ends.size()));
  }
  std::set<std::size_t> seen;
  for (std::size_t k = 0; k < kPairCount; ++k) {
    for (std::size_t idx : (*pairs_)[k]) {
      if (idx >= electrodes_.size() || electrodes_[idx].role != ElectrodeRole::End) {
        throw ValidationError(fmt::format("pair {} references a non-end electrode", kPairLabels[k]));
      }
      if (!seen.insert(idx).second) {
        throw ValidationError(fmt::format("electrode '{}' appears in more than one pair",
                                          electrodes_[idx].id));
      }
    }
    const auto& a = electrodes_[(*pairs_)[k][0]];
    const auto& b = electrodes_[(*pairs_)[k][1]];
    const bool mirrored = close(a.x1, -b.x2) && close(a.x2, -b.x1);
    if (!mirrored || !close(a.z1, b.z1) || !close(a.z2, b.z2)) {
      throw ValidationError(
          fmt::format("pair {} is not mirror-symmetric about the trap axis", kPairLabels[k]));
    }
  }
}

const PairMap& ElectrodeGeometry::require_pairs() const {
  if (!pairs_) throw ValidationError("geometry has no end-electrode pairs");
  return *pairs_;
}

std::vector<std::size_t> ElectrodeGeometry::indices_with_role(ElectrodeRole role) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < electrodes_.size(); ++i) {
    if (electrodes_[i].role == role) out.push_back(i);
  }
  return out;
}

ElectrodeGeometry ElectrodeGeometry::standard(const TrapDimensions& dims) {
  const double um = constants::kMicron;
  const double values[] = {dims.end_width_um,    dims.end_length_um,  dims.rf_width_um,
                           dims.rf_length_um,    dims.center_width_um, dims.center_length_um};
  for (double v : values) {
    if (!(v > 0.0)) throw ValidationError("trap dimensions must be positive");
  }
  if (!(dims.rf_dc_gap_um >= 0.0) || !(dims.dc_dc_gap_um >= 0.0)) {
    throw ValidationError("trap gaps must be non-negative");
  }

  const bool midline = dims.gap_policy == GapPolicy::MidlineExtension;
  const double rf_half_gap = midline ? 0.5 * dims.rf_dc_gap_um : 0.0;
  const double dc_half_gap = midline ? 0.5 * dims.dc_dc_gap_um : 0.0;

  const double center_half = 0.5 * dims.center_width_um;
  const double rf_inner = center_half + dims.rf_dc_gap_um;
  const double rf_outer = rf_inner + dims.rf_width_um;
  const double end_inner = rf_outer + dims.rf_dc_gap_um;
  const double end_outer = end_inner + dims.end_width_um;

  std::vector<RectPatch> patches;
  const double c_len = 0.5 * dims.center_length_um;
  const double rf_len = 0.5 * dims.rf_length_um;
  patches.push_back({"C", ElectrodeRole::Center, -(center_half + rf_half_gap) * um,
                     (center_half + rf_half_gap) * um, -c_len * um, c_len * um});
  patches.push_back({"RF1", ElectrodeRole::Rf, -(rf_outer + rf_half_gap) * um,
                     -(rf_inner - rf_half_gap) * um, -rf_len * um, rf_len * um});
  patches.push_back({"RF2", ElectrodeRole::Rf, (rf_inner - rf_half_gap) * um,
                     (rf_outer + rf_half_gap) * um, -rf_len * um, rf_len * um});

  const double pitch = dims.end_length_um + dims.dc_dc_gap_um;
  PairMap pairs{};
  for (int k = 0; k < kPairCount; ++k) {
    const double zc = (k - 2) * pitch;
    const double z1 = zc - 0.5 * dims.end_length_um - (k > 0 ? dc_half_gap : 0.0);
    const double z2 = zc + 0.5 * dims.end_length_um + (k < kPairCount - 1 ? dc_half_gap : 0.0);
    const double x_in = end_inner - rf_half_gap;
    const std::size_t first = patches.size();
    patches.push_back({fmt::format("E{}", 2 * k + 1), ElectrodeRole::End, -end_outer * um,
                       -x_in * um, z1 * um, z2 * um});
    patches.push_back({fmt::format("E{}", 2 * k + 2), ElectrodeRole::End, x_in * um,
                       end_outer * um, z1 * um, z2 * um});
    pairs[k] = {first, first + 1};
  }
  return ElectrodeGeometry(std::move(patches), pairs, dims.gap_policy);
}

void RfDrive::validate() const {
  if (!(omega_rf > 0.0) || !std::isfinite(omega_rf)) throw ValidationError("rf frequency must be positive");
  if (!(v_amplitude >= 0.0) || !std::isfinite(v_amplitude)) {
    throw ValidationError("rf amplitude must be non-negative");
  }
}

void IonSpecies::validate() const {
  if (!(mass > 0.0) || !std::isfinite(mass)) throw ValidationError("ion mass must be positive");
  if (!(charge > 0.0) || !std::isfinite(charge)) throw ValidationError("ion charge must be positive");
}

}  // namespace shuttle
