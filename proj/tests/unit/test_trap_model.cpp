#include <doctest.h>

#include <cmath>

#include <Eigen/Eigenvalues>

#include "oracles.hpp"
#include "shuttle/constants.hpp"
#include "shuttle/errors.hpp"
#include "shuttle/trap_model.hpp"

using namespace shuttle;

namespace {

const RectPatch kPatch{"P", ElectrodeRole::End, -40e-6, 160e-6, -75e-6, 225e-6};

const Eigen::Vector3d kPoints[] = {
    {10e-6, 80e-6, 30e-6}, {-150e-6, 120e-6, 400e-6}, {60e-6, 15e-6, -20e-6}, {300e-6, 200e-6, 100e-6}};

}  // namespace

TEST_CASE("patch potential agrees with Green's-function quadrature") {
  for (const auto& r : kPoints) {
    const double exact = patch_potential(kPatch, r);
    const double quad = oracle::quadrature_potential(kPatch, r, 800);
    CHECK(exact == doctest::Approx(quad).epsilon(1e-6));
  }
}

TEST_CASE("patch potential limits") {
  const RectPatch wide{"W", ElectrodeRole::End, -1.0, 1.0, -1.0, 1.0};
  CHECK(patch_potential(wide, {0, 1e-6, 0}) == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(std::abs(patch_potential(kPatch, {0, 1.0, 0})) < 1e-6);
  CHECK_THROWS_AS(patch_potential(kPatch, {0, 0, 0}), DomainError);
  CHECK_THROWS_AS(patch_potential(kPatch, {0, -1e-6, 0}), DomainError);
}

TEST_CASE("tiling a patch into pieces superposes exactly") {
  const RectPatch left{"L", ElectrodeRole::End, kPatch.x1, 20e-6, kPatch.z1, kPatch.z2};
  const RectPatch right_lo{"R1", ElectrodeRole::End, 20e-6, kPatch.x2, kPatch.z1, 50e-6};
  const RectPatch right_hi{"R2", ElectrodeRole::End, 20e-6, kPatch.x2, 50e-6, kPatch.z2};
  for (const auto& r : kPoints) {
    const double whole = patch_potential(kPatch, r);
    const double sum = patch_potential(left, r) + patch_potential(right_lo, r) + patch_potential(right_hi, r);
    CHECK(sum == doctest::Approx(whole).epsilon(1e-12));
    const FieldSample a = patch_derivatives(kPatch, r);
    FieldSample b = patch_derivatives(left, r);
    b.add_scaled(patch_derivatives(right_lo, r), 1.0).add_scaled(patch_derivatives(right_hi, r), 1.0);
    CHECK((a.gradient - b.gradient).norm() <= 1e-9 * a.gradient.norm());
    CHECK((a.hessian - b.hessian).norm() <= 1e-9 * a.hessian.norm());
  }
}

TEST_CASE("closed-form gradient and Hessian match finite differences") {
  const double h = 1e-9;
  auto phi = [](const Eigen::Vector3d& r) { return patch_potential(kPatch, r); };
  for (const auto& r : kPoints) {
    const FieldSample s = patch_derivatives(kPatch, r);
    CHECK(s.value == doctest::Approx(phi(r)).epsilon(1e-14));
    for (int k = 0; k < 3; ++k) {
      const double fd = oracle::central_difference(phi, r, k, h);
      CHECK(std::abs(s.gradient[k] - fd) <= 1e-6 * s.gradient.norm());
      for (int j = 0; j < 3; ++j) {
        auto grad_j = [j](const Eigen::Vector3d& p) { return patch_derivatives(kPatch, p).gradient[j]; };
        const double fd2 = oracle::central_difference(grad_j, r, k, h);
        CHECK(std::abs(s.hessian(j, k) - fd2) <= 1e-6 * s.hessian.norm());
      }
    }
    CHECK((s.hessian - s.hessian.transpose()).norm() <= 1e-12 * s.hessian.norm());
  }
}

TEST_CASE("third derivatives match finite differences of the Hessian") {
  const double h = 1e-9;
  for (const auto& r : kPoints) {
    const auto T = patch_third_derivatives(kPatch, r);
    double scale = 0.0;
    for (const auto& m : T) scale = std::max(scale, m.norm());
    for (int k = 0; k < 3; ++k) {
      Eigen::Vector3d a = r, b = r;
      a[k] += h;
      b[k] -= h;
      const Eigen::Matrix3d fd = (patch_derivatives(kPatch, a).hessian - patch_derivatives(kPatch, b).hessian) / (2 * h);
      CHECK((T[k] - fd).norm() <= 1e-5 * scale);
    }
    // Full symmetry of d_k H_ij.
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        for (int k = 0; k < 3; ++k) CHECK(T[k](i, j) == doctest::Approx(T[i](k, j)).epsilon(1e-9).scale(scale));
  }
}

TEST_CASE("unit potentials satisfy Laplace's equation") {
  for (const auto& r : kPoints) {
    const FieldSample s = patch_derivatives(kPatch, r);
    CHECK(std::abs(s.hessian.trace()) <= 1e-9 * s.hessian.norm());
    const auto T = patch_third_derivatives(kPatch, r);
    const Eigen::Vector3d lap_grad(T[0].trace(), T[1].trace(), T[2].trace());
    double scale = 0.0;
    for (const auto& m : T) scale = std::max(scale, m.norm());
    CHECK(lap_grad.norm() <= 1e-8 * scale);
  }
}

TEST_CASE("rf null lies on a zero of the rf field") {
  const auto g = ElectrodeGeometry::standard();
  const RfDrive rf;
  const double y0 = find_rf_null(g, rf);
  // Independent oracle: fine scan of |grad phi_rf|^2 from finite differences of the potential.
  auto field2 = [&](double y) {
    auto phi = [&](const Eigen::Vector3d& r) { return role_potential(g, ElectrodeRole::Rf, r).value; };
    const Eigen::Vector3d r{0.0, y, 0.0};
    double s = 0.0;
    for (int k = 0; k < 3; ++k) {
      const double d = oracle::central_difference(phi, r, k, 1e-8);
      s += d * d;
    }
    return s;
  };
  double best_y = 0.0, best = 1e300;
  for (double y = 150e-6; y <= 210e-6; y += 0.01e-6) {
    const double f = field2(y);
    if (f < best) best = f, best_y = y;
  }
  CHECK(std::abs(y0 - best_y) < 0.02e-6);
  CHECK(role_potential(g, ElectrodeRole::Rf, {0, y0, 0}).gradient.norm() < 1e-3);
}

TEST_CASE("rf null search reports missing minima") {
  const auto g = ElectrodeGeometry::standard();
  NullSearchOptions opt;
  opt.y_min = 300e-6;
  opt.y_max = 400e-6;
  CHECK_THROWS_AS(find_rf_null(g, RfDrive{}, opt), NullSearchError);
}

TEST_CASE("pseudopotential derivatives match finite differences") {
  const auto g = ElectrodeGeometry::standard();
  const RfDrive rf;
  const IonSpecies ion;
  const Eigen::Vector3d r{12e-6, 160e-6, 40e-6};
  auto psi = [&](const Eigen::Vector3d& p) { return pseudopotential(g, rf, ion, p).value; };
  const FieldSample s = pseudopotential(g, rf, ion, r);
  for (int k = 0; k < 3; ++k) {
    CHECK(s.gradient[k] == doctest::Approx(oracle::central_difference(psi, r, k, 1e-9)).epsilon(1e-5).scale(s.gradient.norm()));
    auto grad_k = [&](const Eigen::Vector3d& p) { return pseudopotential(g, rf, ion, p).gradient[k]; };
    for (int j = 0; j < 3; ++j) {
      CHECK(s.hessian(k, j) ==
            doctest::Approx(oracle::central_difference(grad_k, r, j, 1e-9)).epsilon(1e-5).scale(s.hessian.norm()));
    }
  }
  // Value from its definition.
  const Eigen::Vector3d grf = role_potential(g, ElectrodeRole::Rf, r).gradient * rf.v_amplitude;
  const double kappa = ion.charge / (4.0 * ion.mass * rf.omega_rf * rf.omega_rf);
  CHECK(s.value == doctest::Approx(kappa * grf.squaredNorm()).epsilon(1e-12));
}

TEST_CASE("dc potential is linear in electrode voltages") {
  const auto g = ElectrodeGeometry::standard();
  const Eigen::Vector3d r{5e-6, 170e-6, 80e-6};
  const DcVoltages a{{1, -2, 3, 0.5, 4}, 2};
  const DcVoltages b{{-3, 1, 0, 2, 1}, -1};
  DcVoltages sum;
  for (int k = 0; k < kPairCount; ++k) sum.pairs[k] = 2 * a.pairs[k] + b.pairs[k];
  sum.center = 2 * a.center + b.center;
  const FieldSample fa = dc_potential(g, a, r), fb = dc_potential(g, b, r), fs = dc_potential(g, sum, r);
  CHECK(fs.value == doctest::Approx(2 * fa.value + fb.value).epsilon(1e-12));
  CHECK((fs.hessian - (2 * fa.hessian + fb.hessian)).norm() <= 1e-12 * fs.hessian.norm());
}

TEST_CASE("secular frequencies assign eigenvectors to axes") {
  const IonSpecies ion;
  const double c = ion.mass / ion.charge;
  const double wx = 2 * constants::kPi * 2e6, wy = 2 * constants::kPi * 3e6, wz = 2 * constants::kPi * 0.5e6;
  Eigen::Matrix3d H = Eigen::Vector3d(c * wx * wx, c * wy * wy, c * wz * wz).asDiagonal();
  auto f = secular_frequencies(H, ion);
  CHECK(f.omega[0] == doctest::Approx(wx).epsilon(1e-12));
  CHECK(f.omega[1] == doctest::Approx(wy).epsilon(1e-12));
  CHECK(f.omega[2] == doctest::Approx(wz).epsilon(1e-12));
  CHECK(f.all_stable());

  // A small rotation about z keeps the assignment.
  const double t = 0.1;
  Eigen::Matrix3d R;
  R << std::cos(t), -std::sin(t), 0, std::sin(t), std::cos(t), 0, 0, 0, 1;
  f = secular_frequencies(R * H * R.transpose(), ion);
  CHECK(f.omega[0] == doctest::Approx(wx).epsilon(1e-9));
  CHECK(f.omega[2] == doctest::Approx(wz).epsilon(1e-9));

  H(0, 0) = -H(0, 0);
  f = secular_frequencies(H, ion);
  CHECK_FALSE(f.stable[0]);
  CHECK(f.omega[0] == doctest::Approx(wx).epsilon(1e-12));

  H(0, 1) = 1.0;
  CHECK_THROWS_AS(secular_frequencies(H, ion), Error);
}

TEST_CASE("static trap equilibrium is a stationary minimum") {
  const auto g = ElectrodeGeometry::standard();
  const RfDrive rf;
  const IonSpecies ion;
  const DcVoltages v{{0, 10, 0, 10, 0}, 3};
  const double y0 = find_rf_null(g, rf);
  const Eigen::Vector3d eq = find_equilibrium(g, rf, ion, v, {0, y0, 0});
  const FieldSample s = total_potential(g, rf, ion, v, eq);
  CHECK(s.gradient.norm() < 1e-3);
  CHECK(secular_frequencies(s.hessian, ion).all_stable());
}

TEST_CASE("axial null agrees with a dense scan and rejects empty windows") {
  const auto g = ElectrodeGeometry::standard();
  const RfDrive rf;
  const IonSpecies ion;
  const DcVoltages v{{0, 10, 0, 10, 0}, 3};
  const EvalLine line{0.0, find_rf_null(g, rf)};
  const double z = axial_null(g, rf, ion, v, line, {-100e-6, 120e-6});
  double best_z = 0, best = 1e300;
  for (double s = -100e-6; s <= 120e-6; s += 0.01e-6) {
    const double val = total_potential(g, rf, ion, v, line.at(s)).value;
    if (val < best) best = val, best_z = s;
  }
  CHECK(std::abs(z - best_z) < 0.02e-6);
  CHECK_THROWS_AS(axial_null(g, rf, ion, v, line, {300e-6, 400e-6}), NullSearchError);
}

TEST_CASE("basis samples are pair sums of unit potentials") {
  const auto g = ElectrodeGeometry::standard();
  const EvalLine line{0.0, 178e-6};
  const BasisMatrix b = sample_basis(g, line, {-50e-6, 50e-6}, 11);
  CHECK(b.samples() == 11);
  CHECK(b.z[0] == -50e-6);
  CHECK(b.z[10] == 50e-6);
  const auto& pairs = g.require_pairs();
  for (int j = 0; j < 11; ++j) {
    const double want = patch_potential(g.electrodes()[pairs[2][0]], line.at(b.z[j])) +
                        patch_potential(g.electrodes()[pairs[2][1]], line.at(b.z[j]));
    CHECK(b.values(2, j) == doctest::Approx(want).epsilon(1e-14));
  }
  CHECK_THROWS_AS(sample_basis(g, {0.0, 0.0}, {-1e-6, 1e-6}, 5), DomainError);
}
