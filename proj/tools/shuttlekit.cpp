#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "shuttle/analog_chain.hpp"
#include "shuttle/analysis.hpp"
#include "shuttle/config.hpp"
#include "shuttle/constants.hpp"
#include "shuttle/errors.hpp"
#include "shuttle/sequencer.hpp"

namespace fs = std::filesystem;
using namespace shuttle;

namespace {

// Files are buffered and only land on disk once every one of them is ready,
// so a failing command leaves nothing behind.
class OutputSet {
 public:
  void add(std::string name, std::string bytes) { files_.emplace_back(std::move(name), std::move(bytes)); }

  void commit(const fs::path& dir) const {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error(fmt::format("cannot create output directory {}: {}", dir.string(), ec.message()));

    std::vector<fs::path> staged;
    auto discard = [&] {
      for (const auto& p : staged) fs::remove(p, ec);
    };
    for (const auto& [name, bytes] : files_) {
      const fs::path tmp = dir / ("." + name + ".partial");
      std::ofstream out(tmp, std::ios::binary);
      out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
      out.close();
      staged.push_back(tmp);
      if (!out) {
        discard();
        throw Error(fmt::format("cannot write {}", (dir / name).string()));
      }
    }
    for (std::size_t i = 0; i < files_.size(); ++i) {
      fs::rename(staged[i], dir / files_[i].first, ec);
      if (ec) {
        discard();
        throw Error(fmt::format("cannot write {}: {}", (dir / files_[i].first).string(), ec.message()));
      }
    }
  }

  /// Commits to `dir` when given, otherwise prints the single file to stdout.
  void emit(const std::optional<fs::path>& dir) const {
    if (dir) {
      commit(*dir);
      return;
    }
    if (files_.size() != 1) throw ValidationError("this command writes several files; pass --out DIR");
    std::cout << files_.front().second;
  }

 private:
  std::vector<std::pair<std::string, std::string>> files_;
};

struct Common {
  std::string config_path;
  std::string out_dir;
  std::string format = "csv";

  ToolkitConfig load() const { return config_path.empty() ? ToolkitConfig{} : load_config(config_path); }
  std::optional<fs::path> out() const {
    return out_dir.empty() ? std::nullopt : std::optional<fs::path>(out_dir);
  }
};

std::string slurp_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError(fmt::format("cannot read {}", path));
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

WaveformTable load_table(const std::string& path, const TransportPlan& plan) {
  std::istringstream in(slurp_text(path));
  WaveformTable table;
  try {
    table = read_waveform_csv(in);
  } catch (const Error& e) {
    throw ValidationError(fmt::format("{}: {}", path, e.what()));
  }
  table.plan = plan;
  return table;
}

double hz(double omega) { return omega / constants::kTwoPi; }

int cmd_trap_info(const Common& common) {
  const ToolkitConfig cfg = common.load();
  const ElectrodeGeometry geometry = cfg.geometry();
  const DcVoltages voltages = cfg.static_voltages();
  const IonSpecies& ion = cfg.plan.ion;

  const double y_null = find_rf_null(geometry, cfg.rf);
  const Eigen::Vector3d eq = find_equilibrium(geometry, cfg.rf, ion, voltages, {0.0, y_null, 0.0});
  const SecularFrequencies f = secular_frequencies(geometry, cfg.rf, ion, voltages, eq);

  std::ostringstream s;
  s << fmt::format("rf_null_height_um {:.6f}\n", y_null / constants::kMicron);
  s << fmt::format("ion_position_um {:.6f} {:.6f} {:.6f}\n", eq.x() / constants::kMicron,
                   eq.y() / constants::kMicron, eq.z() / constants::kMicron);
  s << fmt::format("omega_x_mhz {:.6f}\n", hz(f.omega[0]) / 1e6);
  s << fmt::format("omega_y_mhz {:.6f}\n", hz(f.omega[1]) / 1e6);
  s << fmt::format("omega_z_mhz {:.6f}\n", hz(f.omega[2]) / 1e6);
  s << fmt::format("stable {}\n", f.all_stable() ? "yes" : "no");
  OutputSet files;
  files.add("trap_info.txt", s.str());
  files.emit(common.out());
  return 0;
}

int cmd_optimize(const Common& common, std::optional<double> fsr) {
  ToolkitConfig cfg = common.load();
  if (fsr) cfg.plan.fsr = *fsr;
  const WaveformTable table = optimize_transport(cfg.plan, cfg.geometry(), cfg.rf);
  for (std::size_t k = 0; k < table.size(); ++k) {
    const auto sat = saturated_pairs(table.steps[k], cfg.plan.fsr);
    if (!sat.empty()) {
      std::cerr << fmt::format("warning: step {} saturated pairs {}\n", k, std::string(sat.begin(), sat.end()));
    }
  }
  std::ostringstream s;
  write_waveform_csv(s, table);
  OutputSet files;
  files.add("waveform.csv", s.str());
  files.emit(common.out());
  return 0;
}

int cmd_verify(const Common& common, const std::string& table_path, std::optional<double> fsr) {
  ToolkitConfig cfg = common.load();
  if (fsr) cfg.plan.fsr = *fsr;
  const WaveformTable table = load_table(table_path, cfg.plan);
  const auto rows = verify_transport(table, cfg.geometry(), cfg.rf);
  for (const auto& v : rows) {
    if (v.failure) std::cerr << fmt::format("warning: step {}: {}\n", v.step, *v.failure);
  }
  std::ostringstream s;
  write_verification_csv(s, rows);
  OutputSet files;
  files.add("verification.csv", s.str());
  files.emit(common.out());
  return 0;
}

int cmd_sweep(const Common& common, std::optional<double> fsr) {
  const ToolkitConfig cfg = common.load();
  const ElectrodeGeometry geometry = cfg.geometry();
  const std::vector<double> fsrs = fsr ? std::vector<double>{*fsr} : cfg.sweep.fsrs;
  std::vector<SweepPoint> points;
  for (double f : fsrs) {
    auto part = error_sweep(cfg.sweep.f_lo, cfg.sweep.f_hi, cfg.sweep.step, f, cfg.plan, geometry, cfg.rf,
                            cfg.sweep.mode);
    for (const auto& p : part) {
      if (p.failure) std::cerr << fmt::format("warning: {:.9g} Hz at {:.9g} V: {}\n", p.freq_hz, f, *p.failure);
    }
    points.insert(points.end(), part.begin(), part.end());
  }
  std::ostringstream s;
  write_sweep_csv(s, points);
  OutputSet files;
  files.add("sweep.csv", s.str());
  files.emit(common.out());
  return 0;
}

int cmd_encode(const Common& common, const std::string& table_path, std::optional<double> hold_us,
               std::optional<double> rate) {
  const ToolkitConfig cfg = common.load();
  if (!common.out()) throw ValidationError("encode writes binary programs; pass --out DIR");
  const WaveformTable table = load_table(table_path, cfg.plan);
  const double hold = hold_us ? *hold_us * 1e-6 : cfg.encode.hold;
  const double update_rate = rate ? *rate : cfg.encode.update_rate;
  const auto programs = encode_chunks(table, hold, update_rate, cfg.dac, cfg.encode.caps);

  OutputSet files;
  for (const auto& p : programs) {
    std::ostringstream bin;
    write_program(bin, p);
    files.add(fmt::format("channel_{}.sqw", kPairLabels[p.channel_id]), bin.str());
  }
  files.commit(*common.out());
  for (const auto& p : programs) {
    std::cout << fmt::format("channel {}: {} pattern words, {} chunk entries, {} samples\n",
                             kPairLabels[p.channel_id], p.pattern.size(), p.ctrl_length, p.sample_count());
  }
  return 0;
}

int cmd_simulate(const Common& common, const std::vector<std::string>& programs) {
  const ToolkitConfig cfg = common.load();
  OutputSet files;
  for (const auto& path : programs) {
    std::istringstream in(slurp_text(path));
    SequencerProgram program;
    try {
      program = read_program(in);
    } catch (const Error& e) {
      throw ValidationError(fmt::format("{}: {}", path, e.what()));
    }
    DacSpec spec = cfg.dac;
    spec.resolution = program.resolution;
    if (program.update_rate > spec.max_update_rate) {
      throw ValidationError(fmt::format("{}: update rate {} Hz exceeds the DAC maximum", path, program.update_rate));
    }
    const auto codes = emulate(program);
    const AnalogWaveform wave = analog_chain(codes, spec, 1.0 / program.update_rate);
    std::ostringstream s;
    write_analog_csv(s, wave);
    files.add(fs::path(path).stem().string() + "_analog.csv", s.str());
  }
  files.emit(common.out());
  return 0;
}

int cmd_fit(const Common& common, const std::string& data_path, std::optional<std::uint64_t> seed) {
  const ToolkitConfig cfg = common.load();
  OutputSet files;
  ResonanceData data;
  if (data_path.empty()) {
    data = synth_resonance(cfg.resonance.params, cfg.resonance_sweep(), cfg.resonance.noise, seed.value_or(cfg.seed));
    std::ostringstream s;
    write_resonance_csv(s, data);
    files.add("resonance.csv", s.str());
  } else {
    std::istringstream in(slurp_text(data_path));
    data = read_resonance_csv(in);
  }
  const ResonanceFit fit = fit_lorentzian(data);
  std::ostringstream s;
  write_fit_summary(s, fit);
  files.add("fit.txt", s.str());
  if (common.out()) {
    files.commit(*common.out());
  }
  std::cout << s.str();
  return 0;
}

int cmd_report(const Common& common) {
  const ToolkitConfig cfg = common.load();
  if (!common.out()) throw ValidationError("report writes several files; pass --out DIR");
  const ElectrodeGeometry geometry = cfg.geometry();
  const auto [lo, hi] = std::minmax_element(cfg.sweep.fsrs.begin(), cfg.sweep.fsrs.end());

  TransportPlan low_plan = cfg.plan;
  low_plan.fsr = *lo;
  TransportPlan high_plan = cfg.plan;
  high_plan.fsr = *hi;
  const WaveformTable low = optimize_transport(low_plan, geometry, cfg.rf);
  const WaveformTable high = optimize_transport(high_plan, geometry, cfg.rf);

  OutputSet files;
  std::ostringstream frequencies;
  write_frequency_table(frequencies, verify_transport(low, geometry, cfg.rf), verify_transport(high, geometry, cfg.rf));
  files.add("frequency_table.csv", frequencies.str());

  std::vector<SweepPoint> points;
  for (double f : cfg.sweep.fsrs) {
    auto part = error_sweep(cfg.sweep.f_lo, cfg.sweep.f_hi, cfg.sweep.step, f, cfg.plan, geometry, cfg.rf,
                            cfg.sweep.mode);
    points.insert(points.end(), part.begin(), part.end());
  }
  std::ostringstream sweep_out;
  write_sweep_csv(sweep_out, points);
  files.add("error_sweep.csv", sweep_out.str());

  std::ostringstream scaling;
  write_scaling_csv(scaling, scaling_law(high, geometry, cfg.rf, {0.25, 4.0, 5.0}));
  files.add("scaling.csv", scaling.str());
  files.commit(*common.out());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ion-shuttling waveform toolkit"};
  app.require_subcommand(1);
  app.fallthrough();

  Common common;
  app.add_option("--config", common.config_path, "JSON configuration file")->check(CLI::ExistingFile);
  app.add_option("--out", common.out_dir, "Output directory");
  app.add_option("--format", common.format, "Output format")->check(CLI::IsMember({"csv"}));

  std::optional<double> fsr;
  std::optional<double> hold_us;
  std::optional<double> rate;
  std::optional<std::uint64_t> seed;
  std::string table_path;
  std::string data_path;
  std::vector<std::string> program_paths;

  auto positive = CLI::PositiveNumber;

  auto* trap_info = app.add_subcommand("trap-info", "RF null height and secular frequencies of the static trap");
  auto* optimize = app.add_subcommand("optimize", "Solve the transport waveform");
  optimize->add_option("--fsr", fsr, "DAC full-scale range in volts")->check(positive);
  auto* verify = app.add_subcommand("verify", "Achieved axial frequency per waveform step");
  verify->add_option("table", table_path, "Waveform CSV")->required();
  verify->add_option("--fsr", fsr, "Full-scale range used for saturation flags")->check(positive);
  auto* sweep = app.add_subcommand("sweep", "Optimization error versus target frequency");
  sweep->add_option("--fsr", fsr, "Sweep a single full-scale range")->check(positive);
  auto* encode = app.add_subcommand("encode", "Compile a waveform into sequencer programs");
  encode->add_option("table", table_path, "Waveform CSV")->required();
  encode->add_option("--hold", hold_us, "Hold time per step in microseconds")->check(positive);
  encode->add_option("--rate", rate, "DAC update rate in Hz")->check(positive);
  auto* simulate = app.add_subcommand("simulate", "Analog output of sequencer programs");
  simulate->add_option("programs", program_paths, "SQW1 program files")->required();
  auto* fit = app.add_subcommand("fit", "Lorentzian fit of resonance data (synthetic when no file is given)");
  fit->add_option("data", data_path, "CSV with frequency and response columns");
  fit->add_option("--seed", seed, "Seed for synthetic data");
  auto* report = app.add_subcommand("report", "Frequency table, error sweep and scaling table");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    std::cerr << "shuttlekit: error: " << msg << '\n';
    return 2;
  }

  try {
    if (*trap_info) return cmd_trap_info(common);
    if (*optimize) return cmd_optimize(common, fsr);
    if (*verify) return cmd_verify(common, table_path, fsr);
    if (*sweep) return cmd_sweep(common, fsr);
    if (*encode) return cmd_encode(common, table_path, hold_us, rate);
    if (*simulate) return cmd_simulate(common, program_paths);
    if (*fit) return cmd_fit(common, data_path, seed);
    if (*report) return cmd_report(common);
  } catch (const std::exception& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    std::cerr << "shuttlekit: error: " << msg << '\n';
    return 1;
  }
  return 1;
}
