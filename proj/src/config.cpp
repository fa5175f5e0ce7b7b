#include "shuttle/config.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "shuttle/constants.hpp"
#include "shuttle/errors.hpp"

namespace shuttle {

namespace {

using nlohmann::json;

// Reads keys out of one JSON object and rejects whatever is left over.
class Section {
 public:
  Section(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) throw ValidationError(fmt::format("{}: expected an object", display()));
  }

  bool has(const std::string& key) const { return node_.contains(key); }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void number(const std::string& key, double& out, double scale = 1.0) {
    if (!take(key)) return;
    const json& v = node_.at(key);
    if (!v.is_number()) throw ValidationError(fmt::format("{}: expected a number", field(key)));
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw ValidationError(fmt::format("{}: must be finite", field(key)));
    out = x * scale;
  }

  template <class Int>
  void integer(const std::string& key, Int& out) {
    if (!take(key)) return;
    const json& v = node_.at(key);
    if (!v.is_number_integer()) throw ValidationError(fmt::format("{}: expected an integer", field(key)));
    if (v.is_number_unsigned()) {
      const auto u = v.get<std::uint64_t>();
      if (u > static_cast<std::uint64_t>(std::numeric_limits<Int>::max())) {
        throw ValidationError(fmt::format("{}: value out of range", field(key)));
      }
      out = static_cast<Int>(u);
    } else {
      const auto s = v.get<std::int64_t>();
      if constexpr (std::is_unsigned_v<Int>) {
        if (s < 0) throw ValidationError(fmt::format("{}: must be non-negative", field(key)));
      }
      if (s > static_cast<std::int64_t>(std::numeric_limits<Int>::max()) ||
          (std::is_signed_v<Int> && s < static_cast<std::int64_t>(std::numeric_limits<Int>::min()))) {
        throw ValidationError(fmt::format("{}: value out of range", field(key)));
      }
      out = static_cast<Int>(s);
    }
  }

  void boolean(const std::string& key, bool& out) {
    if (!take(key)) return;
    const json& v = node_.at(key);
    if (!v.is_boolean()) throw ValidationError(fmt::format("{}: expected true or false", field(key)));
    out = v.get<bool>();
  }

  void text(const std::string& key, std::string& out) {
    if (!take(key)) return;
    const json& v = node_.at(key);
    if (!v.is_string()) throw ValidationError(fmt::format("{}: expected a string", field(key)));
    out = v.get<std::string>();
  }

  std::vector<double> numbers(const std::string& key) {
    std::vector<double> out;
    const json& v = node_.at(key);
    take(key);
    if (!v.is_array()) throw ValidationError(fmt::format("{}: expected an array of numbers", field(key)));
    for (const auto& e : v) {
      if (!e.is_number() || !std::isfinite(e.get<double>())) {
        throw ValidationError(fmt::format("{}: expected an array of numbers", field(key)));
      }
      out.push_back(e.get<double>());
    }
    return out;
  }

  const json* child(const std::string& key) {
    if (!take(key)) return nullptr;
    return &node_.at(key);
  }

  void finish() const {
    for (const auto& [key, _] : node_.items()) {
      if (!seen_.count(key)) throw ValidationError(fmt::format("{}: unknown key", field(key)));
    }
  }

 private:
  bool take(const std::string& key) {
    if (!node_.contains(key)) return false;
    seen_.insert(key);
    return true;
  }
  std::string display() const { return path_.empty() ? "config" : path_; }

  const json& node_;
  std::string path_;
  std::set<std::string> seen_;
};

void require(bool ok, const std::string& field, std::string_view what) {
  if (!ok) throw ValidationError(fmt::format("{}: {}", field, what));
}

void read_geometry(const json& node, TrapDimensions& d) {
  Section s(node, "geometry");
  const std::pair<const char*, double*> lengths[] = {
      {"end_width_um", &d.end_width_um},       {"end_length_um", &d.end_length_um},
      {"rf_width_um", &d.rf_width_um},         {"rf_length_um", &d.rf_length_um},
      {"center_width_um", &d.center_width_um}, {"center_length_um", &d.center_length_um},
      {"rf_dc_gap_um", &d.rf_dc_gap_um},       {"dc_dc_gap_um", &d.dc_dc_gap_um},
  };
  for (const auto& [key, target] : lengths) {
    s.number(key, *target);
    require(*target > 0.0, s.field(key), "must be positive");
  }
  if (s.has("gap_policy")) {
    std::string policy;
    s.text("gap_policy", policy);
    if (policy == "midline_extension") {
      d.gap_policy = GapPolicy::MidlineExtension;
    } else if (policy == "grounded_gap") {
      d.gap_policy = GapPolicy::GroundedGap;
    } else {
      throw ValidationError("geometry.gap_policy: expected \"midline_extension\" or \"grounded_gap\"");
    }
  }
  s.finish();
}

void read_rf(const json& node, RfDrive& rf) {
  Section s(node, "rf");
  s.number("freq_mhz", rf.omega_rf, constants::kTwoPi * 1e6);
  require(rf.omega_rf > 0.0, s.field("freq_mhz"), "must be positive");
  s.number("amplitude_v", rf.v_amplitude);
  require(rf.v_amplitude >= 0.0, s.field("amplitude_v"), "must be non-negative");
  s.finish();
}

void read_ion(const json& node, IonSpecies& ion) {
  Section s(node, "ion");
  s.number("mass_u", ion.mass, constants::kAtomicMassUnit);
  require(ion.mass > 0.0, s.field("mass_u"), "must be positive");
  s.number("charge_e", ion.charge, constants::kElementaryCharge);
  require(ion.charge > 0.0, s.field("charge_e"), "must be positive");
  s.finish();
}

void read_plan(const json& node, TransportPlan& p) {
  Section s(node, "plan");
  s.number("z_start_um", p.z_start, constants::kMicron);
  s.number("z_end_um", p.z_end, constants::kMicron);
  s.integer("steps", p.steps);
  require(p.steps >= 1, s.field("steps"), "must be at least 1");
  s.number("window_um", p.window, constants::kMicron);
  require(p.window > 0.0, s.field("window_um"), "must be positive");
  s.integer("samples", p.samples);
  require(p.samples >= 5, s.field("samples"), "must be at least 5");
  s.number("target_freq_khz", p.omega_target, constants::kTwoPi * 1e3);
  require(p.omega_target > 0.0, s.field("target_freq_khz"), "must be positive");
  s.number("fsr_v", p.fsr);
  require(p.fsr > 0.0, s.field("fsr_v"), "must be positive");
  s.number("eval_x_um", p.eval_line.x0, constants::kMicron);
  s.number("eval_y_um", p.eval_line.y0, constants::kMicron);
  require(p.eval_line.y0 >= 0.0, s.field("eval_y_um"), "must be non-negative (0 selects the rf null)");
  s.boolean("subtract_center", p.subtract_center);
  s.finish();
}

void read_dac(const json& node, DacSpec& d) {
  Section s(node, "dac");
  s.integer("channels", d.channels);
  require(d.channels >= 1, s.field("channels"), "must be positive");
  s.number("fsr_v", d.fsr);
  require(d.fsr > 0.0, s.field("fsr_v"), "must be positive");
  s.integer("resolution_bits", d.resolution);
  require(d.resolution == 12 || d.resolution == 16, s.field("resolution_bits"), "must be 12 or 16");
  s.number("max_update_rate_hz", d.max_update_rate);
  require(d.max_update_rate > 0.0, s.field("max_update_rate_hz"), "must be positive");
  s.number("slew_rate_v_per_us", d.slew_rate, 1e6);
  require(d.slew_rate > 0.0, s.field("slew_rate_v_per_us"), "must be positive");
  s.number("lpf_cutoff_hz", d.lpf_cutoff);
  require(d.lpf_cutoff > 0.0, s.field("lpf_cutoff_hz"), "must be positive");
  s.number("gain", d.gain);
  require(d.gain > 0.0, s.field("gain"), "must be positive");
  s.number("noise_density_nv_per_rthz", d.noise_density, 1e-9);
  require(d.noise_density >= 0.0, s.field("noise_density_nv_per_rthz"), "must be non-negative");
  s.number("thd_db", d.thd_db);
  s.finish();
}

void read_sweep(const json& node, SweepConfig& c) {
  Section s(node, "sweep");
  s.number("f_lo_khz", c.f_lo, 1e3);
  require(c.f_lo > 0.0, s.field("f_lo_khz"), "must be positive");
  s.number("f_hi_khz", c.f_hi, 1e3);
  require(c.f_hi >= c.f_lo, s.field("f_hi_khz"), "must not be below f_lo_khz");
  s.number("step_khz", c.step, 1e3);
  require(c.step > 0.0, s.field("step_khz"), "must be positive");
  if (s.has("fsr_v")) {
    c.fsrs = s.numbers("fsr_v");
    require(!c.fsrs.empty(), s.field("fsr_v"), "must list at least one value");
    for (double f : c.fsrs) require(f > 0.0, s.field("fsr_v"), "values must be positive");
  }
  if (s.has("mode")) {
    std::string mode;
    s.text("mode", mode);
    if (mode == "first_step") {
      c.mode = SweepMode::FirstStep;
    } else if (mode == "all_steps") {
      c.mode = SweepMode::AllSteps;
    } else {
      throw ValidationError("sweep.mode: expected \"first_step\" or \"all_steps\"");
    }
  }
  s.finish();
}

void read_encode(const json& node, EncodeConfig& c) {
  Section s(node, "encode");
  s.number("hold_us", c.hold, 1e-6);
  require(c.hold > 0.0, s.field("hold_us"), "must be positive");
  s.number("rate_hz", c.update_rate);
  require(c.update_rate > 0.0, s.field("rate_hz"), "must be positive");
  s.integer("pattern_words", c.caps.pattern_words);
  s.integer("chunk_entries", c.caps.chunk_entries);
  s.finish();
}

void read_resonance(const json& node, ResonanceConfig& c) {
  Section s(node, "resonance");
  s.number("center_khz", c.params.center, 1e3);
  s.number("fwhm_khz", c.params.fwhm, 1e3);
  require(c.params.fwhm > 0.0, s.field("fwhm_khz"), "must be positive");
  s.number("amplitude", c.params.amplitude);
  s.number("offset", c.params.offset);
  s.number("span_khz", c.span, 1e3);
  require(c.span > 0.0, s.field("span_khz"), "must be positive");
  s.number("step_khz", c.step, 1e3);
  require(c.step > 0.0, s.field("step_khz"), "must be positive");
  s.number("noise_rel", c.noise);
  require(c.noise >= 0.0, s.field("noise_rel"), "must be non-negative");
  s.finish();
}

void read_static(const json& node, std::array<double, 2 * kPairCount>& v) {
  Section s(node, "static");
  if (s.has("end_voltages_v")) {
    const auto values = s.numbers("end_voltages_v");
    require(values.size() == v.size(), s.field("end_voltages_v"), "expected 10 values (E1..E10)");
    std::copy(values.begin(), values.end(), v.begin());
  }
  s.finish();
}

}  // namespace

ElectrodeGeometry ToolkitConfig::geometry() const { return ElectrodeGeometry::standard(dims); }

DcVoltages ToolkitConfig::static_voltages() const {
  DcVoltages v;
  for (int k = 0; k < kPairCount; ++k) {
    const double a = static_end_voltages[2 * k];
    const double b = static_end_voltages[2 * k + 1];
    if (a != b) {
      throw ValidationError(fmt::format("static.end_voltages_v: E{} and E{} form pair {} and must match", 2 * k + 1,
                                        2 * k + 2, kPairLabels[k]));
    }
    v.pairs[k] = a;
  }
  v.center = plan.center_voltage;
  return v;
}

ResonanceSweep ToolkitConfig::resonance_sweep() const {
  const auto count = static_cast<std::size_t>(std::llround(resonance.span / resonance.step));
  return {resonance.params.center - 0.5 * resonance.span, resonance.step, count};
}

ToolkitConfig parse_config(std::string_view json_text) {
  json root;
  try {
    root = json::parse(json_text.begin(), json_text.end());
  } catch (const json::parse_error& e) {
    throw ValidationError(fmt::format("config is not valid JSON (byte {})", e.byte));
  }

  ToolkitConfig c;
  Section s(root, "");
  if (const json* n = s.child("geometry")) read_geometry(*n, c.dims);
  if (const json* n = s.child("rf")) read_rf(*n, c.rf);
  if (const json* n = s.child("ion")) read_ion(*n, c.plan.ion);
  if (const json* n = s.child("plan")) read_plan(*n, c.plan);
  if (const json* n = s.child("dac")) read_dac(*n, c.dac);
  if (const json* n = s.child("sweep")) read_sweep(*n, c.sweep);
  if (const json* n = s.child("encode")) read_encode(*n, c.encode);
  if (const json* n = s.child("resonance")) read_resonance(*n, c.resonance);
  if (const json* n = s.child("static")) read_static(*n, c.static_end_voltages);
  s.number("center_voltage_v", c.plan.center_voltage);
  s.integer("seed", c.seed);
  s.finish();

  c.static_voltages();
  return c;
}

ToolkitConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError(fmt::format("cannot read config {}", path.string()));
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

std::string dump_config(const ToolkitConfig& c) {
  const auto& d = c.dims;
  json root;
  root["geometry"] = {
      {"end_width_um", d.end_width_um},       {"end_length_um", d.end_length_um},
      {"rf_width_um", d.rf_width_um},         {"rf_length_um", d.rf_length_um},
      {"center_width_um", d.center_width_um}, {"center_length_um", d.center_length_um},
      {"rf_dc_gap_um", d.rf_dc_gap_um},       {"dc_dc_gap_um", d.dc_dc_gap_um},
      {"gap_policy", d.gap_policy == GapPolicy::MidlineExtension ? "midline_extension" : "grounded_gap"},
  };
  root["rf"] = {{"freq_mhz", c.rf.omega_rf / (constants::kTwoPi * 1e6)}, {"amplitude_v", c.rf.v_amplitude}};
  root["ion"] = {{"mass_u", c.plan.ion.mass / constants::kAtomicMassUnit},
                 {"charge_e", c.plan.ion.charge / constants::kElementaryCharge}};
  const auto& p = c.plan;
  root["plan"] = {
      {"z_start_um", p.z_start / constants::kMicron},
      {"z_end_um", p.z_end / constants::kMicron},
      {"steps", p.steps},
      {"window_um", p.window / constants::kMicron},
      {"samples", p.samples},
      {"target_freq_khz", p.omega_target / (constants::kTwoPi * 1e3)},
      {"fsr_v", p.fsr},
      {"eval_x_um", p.eval_line.x0 / constants::kMicron},
      {"eval_y_um", p.eval_line.y0 / constants::kMicron},
      {"subtract_center", p.subtract_center},
  };
  root["dac"] = {
      {"channels", c.dac.channels},
      {"fsr_v", c.dac.fsr},
      {"resolution_bits", c.dac.resolution},
      {"max_update_rate_hz", c.dac.max_update_rate},
      {"slew_rate_v_per_us", c.dac.slew_rate / 1e6},
      {"lpf_cutoff_hz", c.dac.lpf_cutoff},
      {"gain", c.dac.gain},
      {"noise_density_nv_per_rthz", c.dac.noise_density / 1e-9},
      {"thd_db", c.dac.thd_db},
  };
  root["sweep"] = {
      {"f_lo_khz", c.sweep.f_lo / 1e3},
      {"f_hi_khz", c.sweep.f_hi / 1e3},
      {"step_khz", c.sweep.step / 1e3},
      {"fsr_v", c.sweep.fsrs},
      {"mode", c.sweep.mode == SweepMode::FirstStep ? "first_step" : "all_steps"},
  };
  root["encode"] = {
      {"hold_us", c.encode.hold / 1e-6},
      {"rate_hz", c.encode.update_rate},
      {"pattern_words", c.encode.caps.pattern_words},
      {"chunk_entries", c.encode.caps.chunk_entries},
  };
  root["resonance"] = {
      {"center_khz", c.resonance.params.center / 1e3},
      {"fwhm_khz", c.resonance.params.fwhm / 1e3},
      {"amplitude", c.resonance.params.amplitude},
      {"offset", c.resonance.params.offset},
      {"span_khz", c.resonance.span / 1e3},
      {"step_khz", c.resonance.step / 1e3},
      {"noise_rel", c.resonance.noise},
  };
  root["static"] = {{"end_voltages_v", c.static_end_voltages}};
  root["center_voltage_v"] = c.plan.center_voltage;
  root["seed"] = c.seed;
  return root.dump(2) + "\n";
}

}  // namespace shuttle
