#include <sstream>
#include <string>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "shuttle/analog_chain.hpp"
#include "shuttle/analysis.hpp"
#include "shuttle/config.hpp"
#include "shuttle/constants.hpp"
#include "shuttle/errors.hpp"
#include "shuttle/sequencer.hpp"

namespace py = pybind11;
using namespace shuttle;

namespace {

ToolkitConfig config_from(const std::string& json) { return parse_config(json); }

py::dict table_dict(const WaveformTable& t) {
  py::dict d;
  std::vector<double> z;
  for (double v : t.schedule) z.push_back(v / constants::kMicron);
  std::vector<std::vector<double>> volts;
  for (const auto& row : t.steps) volts.emplace_back(row.begin(), row.end());
  d["z_um"] = z;
  d["voltages"] = volts;
  d["residuals"] = t.residuals;
  d["fsr_v"] = t.plan.fsr;
  return d;
}

WaveformTable table_from(const std::vector<double>& z_um, const std::vector<std::vector<double>>& volts,
                         const TransportPlan& plan) {
  if (z_um.size() != volts.size()) throw ValidationError("z_um and voltages differ in length");
  WaveformTable t;
  t.plan = plan;
  for (std::size_t k = 0; k < volts.size(); ++k) {
    if (volts[k].size() != static_cast<std::size_t>(kPairCount)) throw ValidationError("each step needs five voltages");
    PairVoltages x{};
    std::copy(volts[k].begin(), volts[k].end(), x.begin());
    t.steps.push_back(x);
    t.schedule.push_back(z_um[k] * constants::kMicron);
    t.residuals.push_back(0.0);
  }
  return t;
}

}  // namespace

PYBIND11_MODULE(_shuttlekit, m) {
  m.doc() = "Ion-shuttling waveform toolkit";

  py::register_exception<Error>(m, "ShuttleError", PyExc_RuntimeError);

  m.def("default_config", [] { return dump_config(ToolkitConfig{}); }, "Default configuration as JSON text.");

  m.def(
      "trap_info",
      [](const std::string& config) {
        const ToolkitConfig c = config_from(config);
        const auto g = c.geometry();
        const DcVoltages v = c.static_voltages();
        const double y = find_rf_null(g, c.rf);
        const Eigen::Vector3d eq = find_equilibrium(g, c.rf, c.plan.ion, v, {0.0, y, 0.0});
        const auto f = secular_frequencies(g, c.rf, c.plan.ion, v, eq);
        py::dict d;
        d["rf_null_height_um"] = y / constants::kMicron;
        d["ion_position_um"] = std::vector<double>{eq.x() / constants::kMicron, eq.y() / constants::kMicron,
                                                   eq.z() / constants::kMicron};
        d["omega_hz"] = std::vector<double>{f.omega[0] / constants::kTwoPi, f.omega[1] / constants::kTwoPi,
                                            f.omega[2] / constants::kTwoPi};
        d["stable"] = f.all_stable();
        return d;
      },
      py::arg("config") = "{}", "RF null height and secular frequencies (Hz) of the static trap.");

  m.def(
      "optimize",
      [](const std::string& config, std::optional<double> fsr) {
        ToolkitConfig c = config_from(config);
        if (fsr) c.plan.fsr = *fsr;
        return table_dict(optimize_transport(c.plan, c.geometry(), c.rf));
      },
      py::arg("config") = "{}", py::arg("fsr") = py::none(), "Transport waveform table.");

  m.def(
      "verify",
      [](const std::vector<double>& z_um, const std::vector<std::vector<double>>& voltages, const std::string& config,
         std::optional<double> fsr) {
        ToolkitConfig c = config_from(config);
        if (fsr) c.plan.fsr = *fsr;
        py::list out;
        for (const auto& v : verify_transport(table_from(z_um, voltages, c.plan), c.geometry(), c.rf)) {
          py::dict d;
          d["step"] = v.step;
          d["z_um"] = v.z_k / constants::kMicron;
          d["null_z_um"] = v.null_z ? py::cast(*v.null_z / constants::kMicron) : py::none();
          d["achieved_hz"] = v.omega_achieved / constants::kTwoPi;
          d["eigen_hz"] = v.omega_eigen / constants::kTwoPi;
          d["target_hz"] = v.omega_target / constants::kTwoPi;
          d["saturated"] = std::string(v.saturated_pairs.begin(), v.saturated_pairs.end());
          d["failure"] = v.failure ? py::cast(*v.failure) : py::none();
          out.append(d);
        }
        return out;
      },
      py::arg("z_um"), py::arg("voltages"), py::arg("config") = "{}", py::arg("fsr") = py::none(),
      "Achieved axial frequency per step.");

  m.def(
      "error_sweep",
      [](double f_lo, double f_hi, double step, double fsr, const std::string& config) {
        const ToolkitConfig c = config_from(config);
        std::vector<std::pair<double, double>> out;
        for (const auto& p : error_sweep(f_lo, f_hi, step, fsr, c.plan, c.geometry(), c.rf, c.sweep.mode)) {
          out.emplace_back(p.freq_hz, p.error_sq);
        }
        return out;
      },
      py::arg("f_lo"), py::arg("f_hi"), py::arg("step"), py::arg("fsr"), py::arg("config") = "{}",
      "(frequency Hz, squared error) pairs.");

  m.def(
      "solve_box_qp",
      [](const Eigen::MatrixXd& P, const Eigen::VectorXd& q, double fsr) {
        const auto r = solve_box_qp(make_box_problem(P, q, fsr));
        return py::make_tuple(r.x, r.objective, r.kkt_residual);
      },
      py::arg("P"), py::arg("q"), py::arg("fsr"), "minimize 1/2 x'Px + q'x over |x_i| <= fsr/2.");

  m.def(
      "quantize",
      [](double volts, double fsr, int bits) {
        DacSpec s;
        s.fsr = fsr;
        s.resolution = bits;
        s.validate();
        const auto q = quantize(volts, s);
        return py::make_tuple(q.code, q.saturated);
      },
      py::arg("volts"), py::arg("fsr") = 100.0, py::arg("bits") = 16);

  m.def(
      "encode",
      [](const std::vector<std::vector<double>>& voltages, double hold_us, double rate_hz, const std::string& config) {
        const ToolkitConfig c = config_from(config);
        std::vector<double> z(voltages.size(), 0.0);
        py::list out;
        for (const auto& p : encode_chunks(table_from(z, voltages, c.plan), hold_us * 1e-6, rate_hz, c.dac,
                                           c.encode.caps)) {
          std::ostringstream bin;
          write_program(bin, p);
          out.append(py::bytes(bin.str()));
        }
        return out;
      },
      py::arg("voltages"), py::arg("hold_us") = 100.0, py::arg("rate_hz") = 1e6, py::arg("config") = "{}",
      "SQW1 program bytes per pair channel.");

  m.def(
      "emulate",
      [](const py::bytes& program) {
        std::istringstream in{std::string(program)};
        return emulate(read_program(in));
      },
      py::arg("program"), "Code stream produced by an SQW1 program.");

  m.def(
      "analog_chain",
      [](const std::vector<std::int16_t>& codes, double dt, const std::string& config) {
        const ToolkitConfig c = config_from(config);
        const auto w = analog_chain(codes, c.dac, dt);
        return py::make_tuple(w.t, w.volts);
      },
      py::arg("codes"), py::arg("dt"), py::arg("config") = "{}", "(times s, volts) of the analog output.");

  m.def(
      "lorentzian",
      [](double nu, double center, double fwhm, double amplitude, double offset) {
        return lorentzian_eval({center, fwhm, amplitude, offset}, nu);
      },
      py::arg("nu"), py::arg("center"), py::arg("fwhm"), py::arg("amplitude") = 1.0, py::arg("offset") = 0.0);

  m.def(
      "synth_resonance",
      [](double center, double fwhm, double amplitude, double offset, double start, double step, std::size_t count,
         double noise, std::uint64_t seed) {
        const auto d = synth_resonance({center, fwhm, amplitude, offset}, {start, step, count}, noise, seed);
        return py::make_tuple(d.nu, d.value);
      },
      py::arg("center"), py::arg("fwhm"), py::arg("amplitude"), py::arg("offset"), py::arg("start"), py::arg("step"),
      py::arg("count"), py::arg("noise") = 0.0, py::arg("seed") = 1);

  m.def(
      "fit_lorentzian",
      [](const std::vector<double>& nu, const std::vector<double>& value) {
        const auto f = fit_lorentzian({nu, value});
        py::dict d;
        d["center"] = f.params.center;
        d["fwhm"] = f.params.fwhm;
        d["amplitude"] = f.params.amplitude;
        d["offset"] = f.params.offset;
        d["residual_norm"] = f.residual_norm;
        d["covariance"] = Eigen::MatrixXd(f.covariance);
        return d;
      },
      py::arg("nu"), py::arg("value"));
}
