#include <doctest.h>

#include <map>
#include <random>
#include <sstream>

#include "shuttle/analysis.hpp"
#include "shuttle/constants.hpp"
#include "shuttle/errors.hpp"

using namespace shuttle;

namespace {

const LorentzianParams kReference{276.6e3, 1.72e3, 1.0, 0.0};
const ResonanceSweep kSweep{276.6e3 - 7.5e3, 100.0, 150};

struct Fixture {
  ElectrodeGeometry geometry = ElectrodeGeometry::standard();
  RfDrive rf;
};

const WaveformTable& table_for(double fsr) {
  static std::map<double, WaveformTable> cache;
  auto it = cache.find(fsr);
  if (it == cache.end()) {
    TransportPlan plan;
    plan.fsr = fsr;
    it = cache.emplace(fsr, optimize_transport(plan, ElectrodeGeometry::standard(), RfDrive{})).first;
  }
  return it->second;
}

}  // namespace

TEST_CASE("lorentzian shape") {
  const LorentzianParams p{1000.0, 20.0, 3.0, 0.5};
  CHECK(lorentzian_eval(p, 1000.0) == doctest::Approx(3.5));
  CHECK(lorentzian_eval(p, 1010.0) == doctest::Approx(2.0));
  CHECK(lorentzian_eval(p, 990.0) == doctest::Approx(2.0));
  CHECK(lorentzian_eval(p, 1e12) == doctest::Approx(0.5));
}

TEST_CASE("noiseless fits recover parameters") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> center(100e3, 900e3), width(0.5e3, 3e3), amp(0.1, 10.0), off(-1.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const LorentzianParams p{center(rng), width(rng), amp(rng), off(rng)};
    const ResonanceSweep sweep{p.center - 7.5e3 + 37.0, 100.0, 150};
    const auto fit = fit_lorentzian(synth_resonance(p, sweep, 0.0, 1));
    CHECK(fit.params.center == doctest::Approx(p.center).epsilon(1e-9));
    CHECK(fit.params.fwhm == doctest::Approx(p.fwhm).epsilon(1e-9));
    CHECK(fit.params.amplitude == doctest::Approx(p.amplitude).epsilon(1e-9));
    CHECK(std::abs(fit.params.offset - p.offset) <= 1e-9 * (std::abs(p.offset) + p.amplitude));
  }
}

TEST_CASE("degenerate fits raise") {
  ResonanceData flat;
  for (int i = 0; i < 20; ++i) flat.nu.push_back(i), flat.value.push_back(2.0);
  CHECK_THROWS_AS(fit_lorentzian(flat), FitError);
  ResonanceData few{{1, 2, 3, 4}, {0, 1, 2, 1}};
  CHECK_THROWS_AS(fit_lorentzian(few), FitError);
  ResonanceData dup{{1, 2, 3, 3, 4, 5}, {0, 1, 2, 2, 1, 0}};
  CHECK_THROWS_AS(fit_lorentzian(dup), FitError);
}

TEST_CASE("synthetic data is seeded") {
  const auto a = synth_resonance(kReference, kSweep, 0.05, 11);
  const auto b = synth_resonance(kReference, kSweep, 0.05, 11);
  const auto c = synth_resonance(kReference, kSweep, 0.05, 12);
  CHECK(a.value == b.value);
  CHECK(a.value != c.value);
  const auto clean = synth_resonance(kReference, kSweep, 0.0, 11);
  for (std::size_t i = 0; i < clean.size(); ++i) CHECK(clean.value[i] == lorentzian_eval(kReference, clean.nu[i]));
}

TEST_CASE("multiplicative noise has the requested relative spread") {
  const ResonanceSweep dense{260e3, 5.0, 6000};
  const auto noisy = synth_resonance(kReference, dense, 0.05, 3);
  double s = 0.0, s2 = 0.0;
  for (std::size_t i = 0; i < noisy.size(); ++i) {
    const double rel = noisy.value[i] / lorentzian_eval(kReference, noisy.nu[i]) - 1.0;
    s += rel;
    s2 += rel * rel;
  }
  const double n = static_cast<double>(noisy.size());
  const double sd = std::sqrt(s2 / n - (s / n) * (s / n));
  CHECK(sd == doctest::Approx(0.05).epsilon(0.2));
}

TEST_CASE("noisy fits locate the reference resonance") {
  int within = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const auto fit = fit_lorentzian(synth_resonance(kReference, kSweep, 0.05, seed));
    within += std::abs(fit.params.center - kReference.center) <= 172.0;
    CHECK(fit.params.fwhm > 0.0);
  }
  CHECK(within >= 90);
}

TEST_CASE("resonance csv round-trips") {
  const auto d = synth_resonance(kReference, kSweep, 0.0, 1);
  std::ostringstream out;
  write_resonance_csv(out, d);
  std::istringstream in(out.str());
  const auto back = read_resonance_csv(in);
  REQUIRE(back.size() == d.size());
  CHECK(back.nu[10] == doctest::Approx(d.nu[10]).epsilon(1e-9));
}

TEST_CASE("full-range waveform reaches the target at every step") {
  Fixture f;
  const auto rows = verify_transport(table_for(100.0), f.geometry, f.rf);
  REQUIRE(rows.size() == 11);
  for (const auto& v : rows) {
    REQUIRE(v.ok());
    CHECK(v.omega_achieved == doctest::Approx(v.omega_target).epsilon(0.02));
    CHECK(v.null_offset() < 1e-6);
    CHECK(v.omega_eigen == doctest::Approx(v.omega_achieved).epsilon(1e-3));
  }
}

TEST_CASE("restricted range never beats the full range") {
  Fixture f;
  const auto low = verify_transport(table_for(20.0), f.geometry, f.rf);
  const auto high = verify_transport(table_for(100.0), f.geometry, f.rf);
  for (std::size_t k = 0; k < low.size(); ++k) {
    CHECK(low[k].omega_achieved <= high[k].omega_achieved);
    CHECK_FALSE(low[k].saturated_pairs.empty());
  }
}

TEST_CASE("unconfining voltages flag the step and continue") {
  Fixture f;
  WaveformTable t = table_for(100.0);
  for (double& v : t.steps[3]) v = -v;
  const auto rows = verify_transport(t, f.geometry, f.rf);
  CHECK_FALSE(rows[3].ok());
  CHECK(rows[4].ok());
}

TEST_CASE("scaling the voltages scales the frequency by sqrt(s)") {
  Fixture f;
  const auto rows = scaling_law(table_for(100.0), f.geometry, f.rf, {0.25, 4.0, 5.0});
  for (const auto& r : rows) {
    CHECK(r.max_ratio_error <= 1e-6);
    CHECK(r.max_null_shift <= 1e-9);
  }
  CHECK(rows[2].saturated);
  CHECK_FALSE(rows[0].saturated);
}

TEST_CASE("report writers") {
  std::ostringstream a, b, c;
  write_verification_csv(a, {});
  write_frequency_table(b, {}, {});
  write_scaling_csv(c, {});
  CHECK(a.str() == "step,z_um,null_z_um,achieved_hz,eigen_hz,target_hz,saturated,status\n");
  CHECK(b.str() == "step,target_hz,achieved_pm10_hz,achieved_pm50_hz\n");
  CHECK(c.str() == "scale,max_ratio_error,max_null_shift_nm,saturated\n");
}
