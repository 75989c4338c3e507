#include "nvgyro/config.hpp"

#include <yaml-cpp/yaml.h>

#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include <fmt/format.h>

#include "nvgyro/config_schema.hpp"

namespace nvgyro {

std::vector<double> GridSpec::values(double scale) const {
  std::vector<double> v;
  if (points < 1) return v;
  v.reserve(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i) {
    const double t = points == 1 ? 0.0 : static_cast<double>(i) / (points - 1);
    const double x = log ? start * std::pow(stop / start, t) : start + (stop - start) * t;
    v.push_back(scale * x);
  }
  return v;
}

LambdaParams RunConfig::resolved_lambda() const {
  LambdaParams p = lambda;
  p.set_cooperativity(cooperativity);
  p.J = power_to_drive(power_dbm, p.kappa_c1, omega_d());
  return p;
}

std::vector<SchemaSection> config_schema(RunConfig& c) {
  using K = SchemaField::Kind;
  const double w = kTwoPi;
  auto& L = c.lambda;
  return {
      {"nv",
       {{"d_hz", K::Double, &c.nv.D, 1.0},
        {"q_hz", K::Double, &c.nv.Q, 1.0},
        {"a_par_hz", K::Double, &c.nv.A_par, 1.0},
        {"a_perp_hz", K::Double, &c.nv.A_perp, 1.0},
        {"gamma_e_hz_per_gauss", K::Double, &c.nv.gamma_e, w},
        {"gamma_n_hz_per_gauss", K::Double, &c.nv.gamma_n, w}}},
      {"field", {{"b_gauss", K::Vec3, c.field.b_gauss.data(), 1.0}}},
      {"lambda",
       {{"kappa_hz", K::Double, &L.kappa_c, w, true},
        {"kappa_c1_hz", K::Double, &L.kappa_c1, w},
        {"gamma_hz", K::Double, &L.Gamma, w, true},
        {"gamma_n_hz", K::Double, &L.Gamma_n, w, true},
        {"gamma_p_hz", K::Double, &L.gamma_p, w},
        {"gamma_th_per_s", K::Double, &L.gamma_th, 1.0},
        {"repump_to_2", K::Double, &L.repump_to_2, 1.0},
        {"nuclear_flip_fraction", K::Double, &L.nuclear_flip_fraction, 1.0},
        {"n_spins", K::Double, &L.N, 1.0},
        {"cooperativity", K::Double, &c.cooperativity, 1.0},
        {"power_dbm", K::Double, &c.power_dbm, 1.0},
        {"drive_frequency_hz", K::Double, &c.drive_frequency_hz, 1.0},
        {"omega_2_hz", K::Double, &L.omega_2, w},
        {"delta_hz", K::Double, &L.delta, w},
        {"delta_s_hz", K::Double, &L.delta_s, w},
        {"delta_2_hz", K::Double, &L.delta_2, w}}},
      {"noise",
       {{"temperature_k", K::Double, &c.noise.temperature, 1.0},
        {"impedance_ohm", K::Double, &c.noise.impedance, 1.0},
        {"xi", K::Double, &c.noise.xi, 1.0}}},
      {"spectrum",
       {{"omega_2_hz", K::Double, &c.spectrum.omega_2_hz, 1.0},
        {"probe_offset_hz", K::Grid, &c.spectrum.probe_offset_hz, 1.0}}},
      {"sweep",
       {{"power_dbm", K::Grid, &c.sweep.power_dbm, 1.0},
        {"omega_2_hz", K::Grid, &c.sweep.omega_2_hz, 1.0},
        {"lock_offset_hz", K::Double, &c.sweep.lock_offset_hz, 1.0},
        {"fd_step_hz", K::Double, &c.sweep.fd_step_hz, 1.0}}},
      {"coop",
       {{"cooperativity", K::DoubleList, &c.coop.cooperativity, 1.0},
        {"power_dbm", K::Grid, &c.coop.power_dbm, 1.0},
        {"omega_2_hz", K::Grid, &c.coop.omega_2_hz, 1.0}}},
      {"dynamics",
       {{"omega_2_hz", K::Double, &c.dynamics.omega_2_hz, 1.0},
        {"frame_offset_hz", K::Double, &c.dynamics.frame_offset_hz, 1.0},
        {"t_final_s", K::Double, &c.dynamics.t_final_s, 1.0},
        {"sample_dt_s", K::Double, &c.dynamics.sample_dt_s, 1.0}}},
      {"comag",
       {{"omega_2_hz", K::Double, &c.comag.omega_2_hz, 1.0},
        {"hyperfine_split_hz", K::Double, &c.comag.hyperfine_split_hz, 1.0},
        {"delta_hz", K::Grid, &c.comag.delta_hz, 1.0},
        {"delta_sc_hz", K::Grid, &c.comag.delta_sc_hz, 1.0},
        {"tone_hz", K::Grid, &c.comag.tone_hz, 1.0},
        {"p2_dbm", K::Double, &c.comag.p2_dbm, 1.0},
        {"omega_r_hz", K::Double, &c.comag.omega_r_hz, 1.0},
        {"delta_t_hz", K::Double, &c.comag.delta_t_hz, 1.0}}},
      {"vector",
       {{"omega_2_hz", K::Double, &c.vector.omega_2_hz, 1.0},
        {"spacing_hz", K::Double, &c.vector.spacing_hz, 1.0},
        {"rotation_deg_s", K::Vec3, c.vector.rotation_deg_s.data(), 1.0},
        {"reading_noise_hz", K::Double, &c.vector.reading_noise_hz, 1.0},
        {"trials", K::Int, &c.vector.trials, 1.0},
        {"field_drift_hz", K::Double, &c.vector.field_drift_hz, 1.0}}},
      {"oracle",
       {{"n_spins", K::IntList, &c.oracle.n_spins, 1.0},
        {"fock_cutoff", K::Int, &c.oracle.fock_cutoff, 1.0},
        {"weak_drive", K::Double, &c.oracle.weak_drive, 1.0},
        {"strong_drive", K::DoubleList, &c.oracle.strong_drive, 1.0},
        {"strong_cutoff", K::Int, &c.oracle.strong_cutoff, 1.0}}},
      {"output",
       {{"dir", K::String, &c.out_dir, 1.0},
        {"workers", K::Int, &c.workers, 1.0},
        {"seed", K::U64, &c.seed, 1.0}}},
  };
}

namespace {

std::string where(const std::string& source, const YAML::Mark& m) {
  if (m.is_null()) return source + ": ";
  return fmt::format("{}:{}:{}: ", source, m.line + 1, m.column + 1);
}

template <typename T>
T scalar(const YAML::Node& n, const std::string& source, const std::string& key, const char* what) {
  if (!n.IsScalar()) throw ConfigError(where(source, n.Mark()) + "'" + key + "' must be " + what);
  try {
    return n.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError(where(source, n.Mark()) + "'" + key + "' must be " + what + ", got '" + n.Scalar() + "'");
  }
}

double finite_double(const YAML::Node& n, const std::string& source, const std::string& key) {
  const double v = scalar<double>(n, source, key, "a number");
  if (!std::isfinite(v)) throw ConfigError(where(source, n.Mark()) + "'" + key + "' must be finite");
  return v;
}

void read_field(const SchemaField& f, const YAML::Node& n, const std::string& source, const std::string& key) {
  using K = SchemaField::Kind;
  switch (f.kind) {
    case K::Double:
      *static_cast<double*>(f.ptr) = f.scale * finite_double(n, source, key);
      break;
    case K::Int:
      *static_cast<int*>(f.ptr) = scalar<int>(n, source, key, "an integer");
      break;
    case K::U64:
      *static_cast<std::uint64_t*>(f.ptr) = scalar<std::uint64_t>(n, source, key, "a non-negative integer");
      break;
    case K::String:
      *static_cast<std::string*>(f.ptr) = scalar<std::string>(n, source, key, "a string");
      break;
    case K::Vec3: {
      if (!n.IsSequence() || n.size() != 3) throw ConfigError(where(source, n.Mark()) + "'" + key + "' must be a list of 3 numbers");
      auto* out = static_cast<double*>(f.ptr);
      for (std::size_t i = 0; i < 3; ++i) out[i] = f.scale * finite_double(n[i], source, key);
      break;
    }
    case K::DoubleList: {
      if (!n.IsSequence() || n.size() == 0) throw ConfigError(where(source, n.Mark()) + "'" + key + "' must be a non-empty list");
      auto& out = *static_cast<std::vector<double>*>(f.ptr);
      out.clear();
      for (const auto& e : n) out.push_back(f.scale * finite_double(e, source, key));
      break;
    }
    case K::IntList: {
      if (!n.IsSequence() || n.size() == 0) throw ConfigError(where(source, n.Mark()) + "'" + key + "' must be a non-empty list");
      auto& out = *static_cast<std::vector<int>*>(f.ptr);
      out.clear();
      for (const auto& e : n) out.push_back(scalar<int>(e, source, key, "an integer"));
      break;
    }
    case K::Grid: {
      if (!n.IsMap()) throw ConfigError(where(source, n.Mark()) + "'" + key + "' must be a map {start, stop, points, log}");
      auto& g = *static_cast<GridSpec*>(f.ptr);
      bool has_start = false, has_stop = false;
      for (const auto& kv : n) {
        const std::string k = kv.first.as<std::string>();
        const std::string full = key + "." + k;
        if (k == "start") {
          g.start = finite_double(kv.second, source, full);
          has_start = true;
        } else if (k == "stop") {
          g.stop = finite_double(kv.second, source, full);
          has_stop = true;
        } else if (k == "points") {
          g.points = scalar<int>(kv.second, source, full, "an integer");
        } else if (k == "log") {
          g.log = scalar<bool>(kv.second, source, full, "true or false");
        } else {
          throw ConfigError(where(source, kv.first.Mark()) + "unknown key '" + full + "'");
        }
      }
      if (!has_start || !has_stop) throw ConfigError(where(source, n.Mark()) + "'" + key + "' needs start and stop");
      if (g.points < 1) throw ConfigError(where(source, n.Mark()) + "'" + key + ".points' must be >= 1");
      if (g.log && (g.start <= 0.0 || g.stop <= 0.0))
        throw ConfigError(where(source, n.Mark()) + "'" + key + "' with log spacing needs positive start and stop");
      break;
    }
  }
}

void check_ranges(const RunConfig& c, const std::string& source) {
  auto fail = [&](const std::string& m) { throw ConfigError(source + ": " + m); };
  const auto& L = c.lambda;
  if (!(L.kappa_c > 0.0)) fail("'lambda.kappa_hz' must be > 0");
  if (!(L.kappa_c1 > 0.0)) fail("'lambda.kappa_c1_hz' must be > 0");
  if (!(L.Gamma > 0.0)) fail("'lambda.gamma_hz' must be > 0");
  if (!(L.Gamma_n > 0.0)) fail("'lambda.gamma_n_hz' must be > 0");
  if (L.gamma_p < 0.0 || L.gamma_th < 0.0) fail("'lambda' pump and thermal rates must be >= 0");
  if (L.repump_to_2 < 0.0 || L.repump_to_2 > 1.0) fail("'lambda.repump_to_2' must lie in [0, 1]");
  if (L.nuclear_flip_fraction < 0.0 || L.nuclear_flip_fraction > 1.0)
    fail("'lambda.nuclear_flip_fraction' must lie in [0, 1]");
  if (!(L.N > 0.0)) fail("'lambda.n_spins' must be > 0");
  if (c.cooperativity < 0.0) fail("'lambda.cooperativity' must be >= 0");
  if (!(c.drive_frequency_hz > 0.0)) fail("'lambda.drive_frequency_hz' must be > 0");
  if (c.noise.temperature < 0.0 || !(c.noise.impedance > 0.0) || c.noise.xi < 0.0)
    fail("'noise' needs temperature_k >= 0, impedance_ohm > 0, xi >= 0");
  if (!(c.sweep.fd_step_hz > 0.0)) fail("'sweep.fd_step_hz' must be > 0");
  if (!(c.dynamics.t_final_s > 0.0) || !(c.dynamics.sample_dt_s > 0.0))
    fail("'dynamics' needs t_final_s > 0 and sample_dt_s > 0");
  if (c.vector.trials < 1) fail("'vector.trials' must be >= 1");
  if (!(c.vector.spacing_hz > 0.0)) fail("'vector.spacing_hz' must be > 0");
  for (int n : c.oracle.n_spins)
    if (n < 1 || n > 3) fail("'oracle.n_spins' entries must be 1, 2 or 3");
  if (c.oracle.fock_cutoff < 2 || c.oracle.fock_cutoff > 30 || c.oracle.strong_cutoff < 2 || c.oracle.strong_cutoff > 30)
    fail("'oracle' Fock cutoffs must lie in [2, 30]");
  if (c.workers < 0) fail("'output.workers' must be >= 0");
  for (double C : c.coop.cooperativity)
    if (!(C > 0.0)) fail("'coop.cooperativity' entries must be > 0");
}

std::string fmt_double(double v) { return fmt::format("{:.12g}", v); }

}  // namespace

RunConfig parse_config(const std::string& text, const std::string& source) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(where(source, e.mark) + e.msg);
  }
  RunConfig cfg;
  auto schema = config_schema(cfg);
  if (root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
  if (!root.IsMap()) throw ConfigError(where(source, root.Mark()) + "top level must be a map of sections");

  std::vector<std::string> seen;
  for (const auto& sec_kv : root) {
    const std::string sec_name = sec_kv.first.as<std::string>();
    auto sec = std::find_if(schema.begin(), schema.end(), [&](const SchemaSection& s) { return sec_name == s.name; });
    if (sec == schema.end()) throw ConfigError(where(source, sec_kv.first.Mark()) + "unknown section '" + sec_name + "'");
    const YAML::Node& body = sec_kv.second;
    if (body.IsNull()) continue;
    if (!body.IsMap()) throw ConfigError(where(source, body.Mark()) + "section '" + sec_name + "' must be a map");
    for (const auto& kv : body) {
      const std::string key = kv.first.as<std::string>();
      const std::string full = sec_name + "." + key;
      auto f = std::find_if(sec->fields.begin(), sec->fields.end(), [&](const SchemaField& x) { return key == x.key; });
      if (f == sec->fields.end()) throw ConfigError(where(source, kv.first.Mark()) + "unknown key '" + full + "'");
      read_field(*f, kv.second, source, full);
      seen.push_back(full);
    }
  }
  for (const auto& sec : schema)
    for (const auto& f : sec.fields) {
      if (!f.required) continue;
      const std::string full = std::string(sec.name) + "." + f.key;
      if (std::find(seen.begin(), seen.end(), full) == seen.end()) {
        const YAML::Node s = root[sec.name];
        const YAML::Mark m = s ? s.Mark() : YAML::Mark::null_mark();
        throw ConfigError(where(source, m) + "missing required key '" + full + "'");
      }
    }
  check_ranges(cfg, source);
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open config file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

std::string render_config(const RunConfig& cfg_in, bool include_output) {
  RunConfig cfg = cfg_in;
  const auto schema = config_schema(cfg);
  using K = SchemaField::Kind;
  std::string out;
  for (const auto& sec : schema) {
    if (!include_output && std::string(sec.name) == "output") continue;
    out += fmt::format("{}:\n", sec.name);
    for (const auto& f : sec.fields) {
      std::string v;
      switch (f.kind) {
        case K::Double:
          v = fmt_double(*static_cast<const double*>(f.ptr) / f.scale);
          break;
        case K::Int:
          v = std::to_string(*static_cast<const int*>(f.ptr));
          break;
        case K::U64:
          v = std::to_string(*static_cast<const std::uint64_t*>(f.ptr));
          break;
        case K::String:
          v = *static_cast<const std::string*>(f.ptr);
          break;
        case K::Vec3: {
          const auto* p = static_cast<const double*>(f.ptr);
          v = fmt::format("[{}, {}, {}]", fmt_double(p[0] / f.scale), fmt_double(p[1] / f.scale),
                          fmt_double(p[2] / f.scale));
          break;
        }
        case K::DoubleList: {
          std::vector<std::string> items;
          for (double x : *static_cast<const std::vector<double>*>(f.ptr)) items.push_back(fmt_double(x / f.scale));
          v = "[" + fmt::format("{}", fmt::join(items, ", ")) + "]";
          break;
        }
        case K::IntList:
          v = "[" + fmt::format("{}", fmt::join(*static_cast<const std::vector<int>*>(f.ptr), ", ")) + "]";
          break;
        case K::Grid: {
          const auto& g = *static_cast<const GridSpec*>(f.ptr);
          v = fmt::format("{{start: {}, stop: {}, points: {}, log: {}}}", fmt_double(g.start), fmt_double(g.stop),
                          g.points, g.log ? "true" : "false");
          break;
        }
      }
      out += fmt::format("  {}: {}\n", f.key, v);
    }
  }
  return out;
}

std::string default_config_yaml() { return render_config(RunConfig{}, true); }

}  // namespace nvgyro
