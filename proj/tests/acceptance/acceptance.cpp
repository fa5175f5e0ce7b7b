// Runs the acceptance criteria and prints one PASS/FAIL line for each.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <future>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <fmt/format.h>

#include "oracles.hpp"
#include "shuttle/analog_chain.hpp"
#include "shuttle/analysis.hpp"
#include "shuttle/constants.hpp"
#include "shuttle/sequencer.hpp"

using namespace shuttle;

namespace {

constexpr double kTwoPi = constants::kTwoPi;

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;

  void check(bool ok, std::string note) {
    pass = pass && ok;
    notes.push_back(fmt::format("{}{}", ok ? "" : "FAILED ", note));
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void run(int id, const char* title, const std::function<Outcome()>& body) {
  Outcome out;
  try {
    out = body();
  } catch (const std::exception& e) {
    out.check(false, fmt::format("exception: {}", e.what()));
  }
  std::string detail;
  for (const auto& n : out.notes) detail += (detail.empty() ? "" : "; ") + n;
  std::printf("criterion %d %s: %s (%s)\n", id, title, out.pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  failures += out.pass ? 0 : 1;
}

double mhz(double omega) { return omega / kTwoPi / 1e6; }
double khz(double omega) { return omega / kTwoPi / 1e3; }

WaveformTable optimized(double fsr) {
  TransportPlan plan;
  plan.fsr = fsr;
  return optimize_transport(plan, ElectrodeGeometry::standard(), RfDrive{});
}

Outcome static_trap() {
  Outcome o;
  const auto t0 = Clock::now();
  const auto g = ElectrodeGeometry::standard();
  RfDrive rf;
  rf.omega_rf = kTwoPi * 24.31e6;
  rf.v_amplitude = 100.0;  // 200 V peak to peak
  const IonSpecies ion = IonSpecies::calcium40();
  const DcVoltages v{{0, 10, 0, 10, 0}, 3.0};
  const double y_null = find_rf_null(g, rf);
  const Eigen::Vector3d eq = find_equilibrium(g, rf, ion, v, {0, y_null, 0});
  const SecularFrequencies f = secular_frequencies(g, rf, ion, v, eq);
  const double height = eq.y() * 1e6;

  o.check(std::abs(height - 190.0) <= 15.0, fmt::format("height {:.2f} um vs 190 +- 15", height));
  const double want[3] = {2.0, 2.9, 0.34};
  const char* axis = "xyz";
  for (int i = 0; i < 3; ++i) {
    const double got = mhz(f.omega[i]);
    o.check(f.stable[i] && std::abs(got / want[i] - 1.0) <= 0.10,
            fmt::format("w{} {:.3f} MHz vs {:.2f} +- 10%", axis[i], got, want[i]));
  }
  const double t = seconds_since(t0);
  o.check(t < 10.0, fmt::format("{:.2f} s", t));
  return o;
}

Outcome frequency_table() {
  Outcome o;
  const auto t0 = Clock::now();
  const auto g = ElectrodeGeometry::standard();
  const auto high = verify_transport(optimized(100.0), g, RfDrive{});
  const auto low = verify_transport(optimized(20.0), g, RfDrive{});
  const double target = kTwoPi * 500e3;

  double worst = 0.0;
  bool all_ok = high.size() == 11;
  for (const auto& s : high) {
    all_ok = all_ok && s.ok();
    worst = std::max(worst, std::abs(s.omega_achieved / target - 1.0));
  }
  o.check(all_ok && worst <= 0.02, fmt::format("+-50 V: 11 steps, worst deviation {:.3f}%", 100 * worst));

  double lowest = std::numeric_limits<double>::infinity();
  bool ordered = low.size() == high.size();
  for (std::size_t k = 0; k < low.size() && ordered; ++k) {
    lowest = std::min(lowest, low[k].omega_achieved);
    ordered = low[k].ok() && low[k].omega_achieved <= high[k].omega_achieved;
  }
  o.check(lowest < kTwoPi * 350e3, fmt::format("+-10 V lowest step {:.1f} kHz vs < 350", khz(lowest)));
  o.check(ordered, "+-10 V <= +-50 V at every step");
  const double t = seconds_since(t0);
  o.check(t < 120.0, fmt::format("{:.2f} s", t));
  return o;
}

// First swept frequency whose error exceeds `threshold`.
std::optional<double> plateau_edge(const std::vector<SweepPoint>& pts, double threshold) {
  for (const auto& p : pts) {
    if (p.error_sq > threshold) return p.freq_hz;
  }
  return std::nullopt;
}

Outcome error_landscape() {
  Outcome o;
  const auto t0 = Clock::now();
  const auto g = ElectrodeGeometry::standard();
  const TransportPlan plan;
  const auto low = error_sweep(100e3, 1e6, 10e3, 20.0, plan, g, RfDrive{});
  const auto high = error_sweep(100e3, 1e6, 10e3, 100.0, plan, g, RfDrive{});
  o.check(low.size() == 91 && high.size() == 91, fmt::format("{} and {} points", low.size(), high.size()));

  bool dominant = low.size() == high.size();
  for (std::size_t i = 0; i < low.size() && dominant; ++i) {
    dominant = !low[i].failure && !high[i].failure && low[i].error_sq >= high[i].error_sq;
  }
  o.check(dominant, "error(+-10 V) >= error(+-50 V) everywhere");

  const double threshold = 1e-3 * low.back().error_sq;
  const auto edge_low = plateau_edge(low, threshold);
  const auto edge_high = plateau_edge(high, threshold);
  if (edge_low && edge_high) {
    const double ratio = *edge_high / *edge_low;
    o.check(std::abs(ratio / std::sqrt(5.0) - 1.0) <= 0.15,
            fmt::format("edges {:.0f} / {:.0f} kHz, ratio {:.3f} vs sqrt(5) +- 15%", *edge_high / 1e3,
                        *edge_low / 1e3, ratio));
  } else {
    // Locate the +-50 V edge past the swept range for the record.
    std::string beyond = "none below 3 MHz";
    const auto ext = error_sweep(1.01e6, 3e6, 10e3, 100.0, plan, g, RfDrive{});
    if (const auto e = plateau_edge(ext, threshold); e && edge_low) {
      beyond = fmt::format("{:.0f} kHz, ratio {:.3f}", *e / 1e3, *e / *edge_low);
    }
    o.check(false, fmt::format("+-10 V edge {}, +-50 V edge not reached by 1 MHz (extended sweep: {})",
                               edge_low ? fmt::format("{:.0f} kHz", *edge_low / 1e3) : "none", beyond));
  }
  const double t = seconds_since(t0);
  o.check(t < 300.0, fmt::format("{:.2f} s", t));
  return o;
}

Outcome scaling() {
  Outcome o;
  const auto g = ElectrodeGeometry::standard();
  const WaveformTable table = optimized(100.0);
  bool unsaturated = true;
  for (const auto& row : table.steps) unsaturated = unsaturated && saturated_pairs(row, 100.0).empty();
  o.check(unsaturated, "base voltage set unsaturated");
  for (const auto& r : scaling_law(table, g, RfDrive{}, {0.25, 4.0, 5.0})) {
    o.check(r.max_ratio_error <= 1e-6 && r.max_null_shift <= 1e-9,
            fmt::format("s={:g}: ratio error {:.2e}, null shift {:.2e} nm", r.scale, r.max_ratio_error,
                        r.max_null_shift * 1e9));
  }
  return o;
}

Outcome qp_oracle() {
  Outcome o;
  using Mat5 = Eigen::Matrix<double, 5, 5>;
  using Vec5 = Eigen::Matrix<double, 5, 1>;
  std::mt19937_64 rng(5150);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_int_distribution<int> rank_dist(1, 5);
  std::vector<std::pair<Mat5, Vec5>> instances;
  for (int i = 0; i < 100; ++i) {
    const int rank = rank_dist(rng);
    Eigen::MatrixXd A(rank, 5);
    for (int r = 0; r < rank; ++r)
      for (int c = 0; c < 5; ++c) A(r, c) = n(rng);
    Mat5 P = A.transpose() * A;
    P /= P.norm();
    Vec5 q;
    for (int c = 0; c < 5; ++c) q[c] = 0.8 * n(rng);
    instances.emplace_back(P, q);
  }

  std::vector<double> oracle_obj(instances.size());
  const unsigned workers = std::max(1u, std::thread::hardware_concurrency());
  std::vector<std::future<void>> jobs;
  for (unsigned w = 0; w < workers; ++w) {
    jobs.push_back(std::async(std::launch::async, [&, w] {
      for (std::size_t i = w; i < instances.size(); i += workers) {
        oracle_obj[i] = oracle::brute_force_box_qp(instances[i].first, instances[i].second, -1.0, 1.0);
      }
    }));
  }
  for (auto& j : jobs) j.get();

  double worst_gap = 0.0, worst_kkt = 0.0;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const auto r = solve_box_qp(make_box_problem(instances[i].first, instances[i].second, 2.0));
    worst_gap = std::max(worst_gap, std::abs(r.objective - oracle_obj[i]));
    worst_kkt = std::max(worst_kkt, r.kkt_residual);
  }
  o.check(worst_gap <= 1e-6, fmt::format("100 instances, max |objective - grid| {:.2e}", worst_gap));
  o.check(worst_kkt <= 1e-8, fmt::format("max KKT residual {:.2e}", worst_kkt));
  return o;
}

Outcome sequencer() {
  Outcome o;
  const DacSpec spec;
  std::mt19937_64 rng(777);
  std::uniform_int_distribution<int> rows(1, 32), hold(1, 200);
  std::uniform_real_distribution<double> volts(-55.0, 55.0);
  std::bernoulli_distribution repeat(0.3);
  int mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    WaveformTable t;
    const int n = rows(rng);
    for (int k = 0; k < n; ++k) {
      PairVoltages x{};
      for (double& e : x) e = volts(rng);
      if (k > 0 && repeat(rng)) x = t.steps.back();
      t.steps.push_back(x);
      t.schedule.push_back(0.0);
      t.residuals.push_back(0.0);
    }
    const double h = hold(rng) * 1e-6;
    const auto programs = encode_chunks(t, h, 1e6, spec);
    for (int k = 0; k < kPairCount; ++k) {
      mismatches += verify_stream(programs[k], naive_expansion(t, k, h, 1e6, spec)).has_value();
    }
  }
  o.check(mismatches == 0, fmt::format("1000 random tables, {} mismatching channels", mismatches));

  const WaveformTable table = optimized(100.0);
  const auto programs = encode_chunks(table, 100e-6, 1e6, spec);
  std::size_t words = 0, entries = 0, naive = 0;
  bool exact = true;
  for (int k = 0; k < kPairCount; ++k) {
    const auto ref = naive_expansion(table, k, 100e-6, 1e6, spec);
    naive = std::max(naive, ref.size());
    words = std::max(words, programs[k].pattern.size());
    entries = std::max<std::size_t>(entries, programs[k].ctrl_length);
    exact = exact && !verify_stream(programs[k], ref).has_value();
  }
  o.check(naive == 1100 && words <= 11 && entries <= 11 && exact,
          fmt::format("default waveform {} naive words -> {} pattern words + {} entries per channel", naive, words,
                      entries));
  return o;
}

Outcome analog() {
  Outcome o;
  const DacSpec spec;
  const double tau = spec.tau();
  const double dt = 1e-6;

  std::vector<std::int16_t> codes(400, static_cast<std::int16_t>(quantize(10.0, spec).code));
  const double step = dequantize(codes.front(), spec);
  const auto w = analog_chain(codes, spec, dt);
  double worst = 0.0;
  for (std::size_t n = 1; n < w.size(); ++n) {
    const double want = oracle::rc_step_after_ramp(step, spec.slew_rate, tau, w.t[n]);
    worst = std::max(worst, std::abs(w.volts[n] - want) / std::abs(want));
  }
  o.check(worst <= 1e-9, fmt::format("10 V step max relative error {:.2e}", worst));

  double qerr = 0.0;
  const double top = dequantize(spec.max_code(), spec);
  for (int i = 0; i <= 2000000; ++i) {
    const double v = -50.0 + (top + 50.0) * i / 2000000.0;
    qerr = std::max(qerr, std::abs(dequantize(quantize(v, spec).code, spec) - v));
  }
  o.check(qerr <= 0.763e-3, fmt::format("quantization error {:.4f} mV", qerr * 1e3));

  double max_rate = 0.0;
  auto track = [&](const AnalogWaveform& a) {
    for (std::size_t n = 1; n < a.size(); ++n) {
      max_rate = std::max(max_rate, std::abs(a.volts[n] - a.volts[n - 1]) / (a.t[n] - a.t[n - 1]));
    }
  };
  track(w);
  std::vector<std::int16_t> swing;
  for (int i = 0; i < 50; ++i) swing.push_back(spec.max_code());
  for (int i = 0; i < 50; ++i) swing.push_back(spec.min_code());
  track(analog_chain(swing, spec, 1.0 / 16e6));
  for (const auto& p : encode_chunks(optimized(100.0), 100e-6, 1e6, spec)) track(analog_chain(emulate(p), spec, dt));
  o.check(max_rate <= spec.slew_rate * (1 + 1e-9), fmt::format("max slope {:.4f} V/us", max_rate / 1e6));
  return o;
}

Outcome lorentzian() {
  Outcome o;
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> center(200e3, 400e3), width(0.8e3, 3e3), amp(0.2, 5.0), off(-0.5, 0.5);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const LorentzianParams p{center(rng), width(rng), amp(rng), off(rng)};
    const auto fit = fit_lorentzian(synth_resonance(p, {p.center - 7.5e3 + 13.0, 100.0, 150}, 0.0, 1));
    worst = std::max({worst, std::abs(fit.params.center / p.center - 1.0), std::abs(fit.params.fwhm / p.fwhm - 1.0),
                      std::abs(fit.params.amplitude / p.amplitude - 1.0),
                      std::abs(fit.params.offset - p.offset) / (std::abs(p.offset) + p.amplitude)});
  }
  o.check(worst <= 1e-9, fmt::format("noiseless max relative error {:.2e}", worst));

  const LorentzianParams reference{276.6e3, 1.72e3, 1.0, 0.0};
  const ResonanceSweep sweep{reference.center - 7.5e3, 100.0, 150};
  int within = 0, failed = 0;
  for (std::uint64_t seed = 1; seed <= 1000; ++seed) {
    try {
      const auto fit = fit_lorentzian(synth_resonance(reference, sweep, 0.05, seed));
      within += std::abs(fit.params.center - reference.center) <= 172.0;
    } catch (const std::exception&) {
      ++failed;
    }
  }
  o.check(within >= 950, fmt::format("{} of 1000 noisy fits within 172 Hz ({} fit errors)", within, failed));
  return o;
}

}  // namespace

int main() {
  run(1, "static trap", static_trap);
  run(2, "transport frequencies", frequency_table);
  run(3, "error landscape", error_landscape);
  run(4, "scaling law", scaling);
  run(5, "box QP vs grid oracle", qp_oracle);
  run(6, "sequencer roundtrip and compression", sequencer);
  run(7, "analog chain", analog);
  run(8, "Lorentzian fitter", lorentzian);
  std::printf("%d of 8 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
