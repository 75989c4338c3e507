#include "nvgyro/commands.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <random>

#include "nvgyro/multi_ensemble.hpp"
#include "nvgyro/output.hpp"
#include "nvgyro/quantum_oracle.hpp"

namespace nvgyro {
namespace {

using Rows = std::vector<std::vector<std::string>>;
using nlohmann::json;

double hz(double rad) { return rad / kTwoPi; }

json optional_num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

SweepSettings sweep_settings(const RunConfig& cfg) {
  SweepSettings s;
  s.noise = cfg.noise;
  s.lock_offset = kTwoPi * cfg.sweep.lock_offset_hz;
  s.fd_step = kTwoPi * cfg.sweep.fd_step_hz;
  s.workers = cfg.workers;
  return s;
}

json cell_json(const SweepCell& c) {
  return {{"p_dbm", c.p_dbm},
          {"omega_2_hz", hz(c.omega_2)},
          {"regime", to_string(c.regime)},
          {"eta_mdeg_s_rthz", optional_num(c.eta_mdeg)},
          {"sigma_n", optional_num(c.sigma_n)},
          {"S_v_per_hz", c.S}};
}

std::size_t cmd_levels(const RunConfig& cfg, ArtifactWriter& w) {
  const LevelSet levels = eigensystem(build_hamiltonian(cfg.nv, cfg.field));
  Rows rows;
  for (int i = 0; i < 9; ++i) {
    const auto& l = levels.labels[static_cast<std::size_t>(i)];
    rows.push_back({std::to_string(i), num(levels.energies(i)), l.str(), std::to_string(l.m_s), std::to_string(l.m_i),
                    num(l.overlap)});
  }
  w.csv("levels.csv", {"index", "energy_hz", "label", "m_s", "m_i", "overlap"}, rows);
  const LambdaExtraction lx = extract_lambda(levels);
  w.json("lambda.json", {{"omega_s_hz", lx.omega_s},
                         {"omega_2e_hz", lx.omega_2e},
                         {"q_eff_hz", lx.q_eff},
                         {"c_allowed", lx.c_allowed},
                         {"c_forbidden", lx.c_forbidden},
                         {"overlap", lx.overlap}});
  return 0;
}

std::size_t cmd_spectrum(const RunConfig& cfg, ArtifactWriter& w) {
  LambdaParams p = cfg.resolved_lambda();
  p.omega_2 = kTwoPi * cfg.spectrum.omega_2_hz;
  const auto scan = probe_spectrum(p, cfg.spectrum.probe_offset_hz.values(kTwoPi));
  Rows rows;
  std::size_t failures = 0;
  for (const auto& pt : scan) {
    failures += pt.ok ? 0 : 1;
    const cd a0 = pt.r + 1.0;
    rows.push_back({num(hz(pt.probe_offset)), num(pt.delta), num(a0.real()), num(a0.imag()), num(std::norm(pt.r)),
                    num(pt.intracavity), to_string(pt.regime), pt.ok ? "1" : "0"});
  }
  w.csv("spectrum.csv",
        {"probe_offset_hz", "delta_rad_s", "re_alpha0", "im_alpha0", "abs_r2", "intracavity", "regime", "ok"}, rows);
  const EitFeature f = eit_feature(scan);
  w.json("spectrum_summary.json", {{"feature_found", f.found},
                                   {"center_offset_hz", scan.empty() ? 0.0 : hz(scan[f.center].probe_offset)},
                                   {"center_intracavity", f.peak},
                                   {"floor_intracavity", f.floor},
                                   {"contrast", optional_num(f.contrast)},
                                   {"fwhm_hz", hz(f.fwhm)},
                                   {"failures", failures}});
  return failures;
}

std::size_t cmd_regime_map(const RunConfig& cfg, ArtifactWriter& w) {
  const LambdaParams p = cfg.resolved_lambda();
  const auto P = cfg.sweep.power_dbm.values();
  const auto O = cfg.sweep.omega_2_hz.values(kTwoPi);
  const SweepResult r = sweep_power_drive(p, P, O, sweep_settings(cfg));
  Rows rows;
  for (const auto& c : r.cells)
    rows.push_back({num(c.p_dbm), num(c.omega_2), to_string(c.regime), num(c.alpha0.real()), num(c.alpha0.imag()),
                    c.ok ? "1" : "0"});
  w.csv("regime_map.csv", {"p_dbm", "omega2_rad_s", "regime", "re_alpha0", "im_alpha0", "ok"}, rows);

  Rows b;
  for (std::size_t i = 0; i < P.size(); ++i) b.push_back({num(P[i]), num(hz(r.boundary[i]))});
  w.csv("oscillation_boundary.csv", {"p_dbm", "omega_2_threshold_hz"}, b);

  Rows pe;
  for (const auto& pt : perfect_eit_curve(p, P))
    pe.push_back({num(pt.p_dbm), num(hz(pt.omega_2)), pt.found ? "1" : "0"});
  w.csv("perfect_eit.csv", {"p_dbm", "omega_2_star_hz", "found"}, pe);
  return r.failures;
}

std::size_t cmd_sensitivity_map(const RunConfig& cfg, ArtifactWriter& w) {
  const LambdaParams p = cfg.resolved_lambda();
  const auto P = cfg.sweep.power_dbm.values();
  const SweepResult r = sweep_power_drive(p, P, cfg.sweep.omega_2_hz.values(kTwoPi), sweep_settings(cfg));
  Rows rows;
  for (const auto& c : r.cells)
    rows.push_back({num(c.p_dbm), num(c.omega_2), to_string(c.regime), num(c.eta_mdeg), num(c.S), num(c.alpha0.real()),
                    num(c.alpha0.imag()), num(c.sigma_n), c.ok ? "1" : "0", c.error});
  w.csv("sensitivity_map.csv",
        {"p_dbm", "omega2_rad_s", "regime", "eta_mdeg_s_sqrthz", "s_v_per_hz", "re_alpha0", "im_alpha0", "sigma_n", "ok",
         "error"},
        rows);
  const double sql = eta_sql(p.N, 2.0 / p.Gamma_n);
  json boundary = json::array();
  for (std::size_t i = 0; i < P.size(); ++i)
    if (std::isfinite(r.boundary[i])) boundary.push_back({P[i], hz(r.boundary[i])});
  json s = {{"eta_sql_mdeg_s_rthz", rad_to_deg(sql) * 1e3},
            {"failures", r.failures},
            {"oscillation_boundary_dbm_hz", boundary}};
  if (r.argmin) s["best"] = cell_json(r.cells[*r.argmin]);
  if (r.best_eit) s["best_eit"] = cell_json(r.cells[*r.best_eit]);
  if (r.best_mwi) s["best_mwi"] = cell_json(r.cells[*r.best_mwi]);
  if (r.best_eit && r.best_mwi) s["eit_over_mwi"] = r.cells[*r.best_eit].eta_mdeg / r.cells[*r.best_mwi].eta_mdeg;
  w.json("sensitivity_summary.json", s);
  return r.failures;
}

std::size_t cmd_coop_sweep(const RunConfig& cfg, ArtifactWriter& w) {
  const LambdaParams p = cfg.resolved_lambda();
  const CoopSweepResult r = sweep_cooperativity(p, cfg.coop.cooperativity, cfg.coop.power_dbm.values(),
                                                cfg.coop.omega_2_hz.values(kTwoPi), sweep_settings(cfg));
  Rows rows;
  std::vector<double> cs, etas;
  for (const auto& pt : r.points) {
    const auto& b = pt.best;
    rows.push_back({num(pt.cooperativity), num(pt.n_spins), pt.has_best ? "1" : "0", num(b.p_dbm), num(hz(b.omega_2)),
                    num(b.eta_mdeg), num(b.sigma_n), to_string(b.regime), pt.on_oscillation_boundary ? "1" : "0",
                    std::to_string(pt.oscillating_cells)});
    if (pt.has_best && pt.cooperativity < 10.0) {
      cs.push_back(pt.cooperativity);
      etas.push_back(b.eta_mdeg);
    }
  }
  w.csv("coop_sweep.csv",
        {"cooperativity", "n_spins", "has_best", "p_dbm", "omega_2_hz", "eta_mdeg_s_rthz", "sigma_n", "regime",
         "on_oscillation_boundary", "oscillating_cells"},
        rows);
  json s = {{"loglog_slope_below_c10", optional_num(loglog_slope(cs, etas))},
            {"oscillation_onset_c", optional_num(r.oscillation_onset)}};
  if (r.argmin) s["best_c"] = r.points[*r.argmin].cooperativity;
  w.json("coop_summary.json", s);
  return 0;
}

std::size_t cmd_dynamics(const RunConfig& cfg, ArtifactWriter& w) {
  LambdaParams p = cfg.resolved_lambda();
  p.omega_2 = kTwoPi * cfg.dynamics.omega_2_hz;
  p.delta_2 = kTwoPi * cfg.dynamics.frame_offset_hz;
  IntegrateOptions io;
  io.sample_dt = cfg.dynamics.sample_dt_s;
  io.keep_states = false;
  const SystemState start = MeanFieldModel(p.ensemble()).ground_state();
  const TimeTrace tr = integrate(p, start, cfg.dynamics.t_final_s, io);
  Rows rows;
  rows.reserve(tr.times.size());
  for (std::size_t i = 0; i < tr.times.size(); ++i)
    rows.push_back({num(tr.times[i]), num(tr.alpha[i].real()), num(tr.alpha[i].imag()), num(std::norm(tr.alpha[i]))});
  w.csv("dynamics.csv", {"t_s", "alpha_re", "alpha_im", "abs_alpha2"}, rows);
  w.json("dynamics_summary.json",
         {{"beat_frequency_hz", tr.beat_frequency ? json(hz(*tr.beat_frequency)) : json(nullptr)},
          {"frame_offset_hz", cfg.dynamics.frame_offset_hz},
          {"samples", tr.times.size()}});
  return 0;
}

std::size_t cmd_comag(const RunConfig& cfg, ArtifactWriter& w) {
  LambdaParams p = cfg.resolved_lambda();
  p.omega_2 = kTwoPi * cfg.comag.omega_2_hz;
  ComagLayout layout;
  layout.hyperfine_split = kTwoPi * cfg.comag.hyperfine_split_hz;

  const auto map = reflection_map(p, cfg.comag.delta_hz.values(kTwoPi), cfg.comag.delta_sc_hz.values(kTwoPi), layout,
                                  cfg.workers);
  Rows rows;
  std::size_t failures = 0;
  for (const auto& c : map) {
    failures += c.ok ? 0 : 1;
    rows.push_back({num(hz(c.delta)), num(hz(c.delta_sc)), num(c.abs_r2), num(c.r.real()), num(c.r.imag()),
                    to_string(c.regime), c.ok ? "1" : "0"});
  }
  w.csv("comag_map.csv", {"delta_hz", "delta_s_hz", "abs_r2", "r_re", "r_im", "regime", "ok"}, rows);

  Rows xr;
  for (int drive = 0; drive < 2; ++drive) {
    LambdaParams q = p;
    if (drive == 0) q.omega_2 = 0.0;
    for (std::size_t m = 0; m < 3; ++m) {
      const auto c = avoided_crossing(q, m, layout);
      xr.push_back({std::to_string(m + 1) + "+", drive ? "1" : "0", num(hz(c.lower)), num(hz(c.upper)),
                    num(hz(c.splitting)), c.found ? "1" : "0"});
    }
  }
  w.csv("crossings.csv", {"member", "drive_on", "lower_hz", "upper_hz", "splitting_hz", "found"}, xr);

  const EnsembleSet set = comag_set(p, 0.0, layout);
  const auto op = solve_multi_steady_state(set);
  const auto tones = cfg.comag.tone_hz.values(kTwoPi);
  const auto resp = second_tone_response(set, op, tones, cfg.comag.p2_dbm, cfg.omega_d());
  const auto rd = comag_readout(set, tones, cfg.comag.p2_dbm, cfg.noise, cfg.nv);
  Rows tr;
  for (std::size_t k = 0; k < tones.size(); ++k)
    tr.push_back({num(hz(tones[k])), num(resp.r2[k].real()), num(resp.r2[k].imag()), num(hz(resp.omega_R[k])),
                  num(rd.dim_r2[k]), num(rd.eta_r_mdeg[k])});
  w.csv("second_tone.csv", {"tone_offset_hz", "r2_re", "r2_im", "omega_r_hz", "dim_r2_per_rad_s", "eta_r_mdeg_s_rthz"},
        tr);

  const double omega_R = kTwoPi * cfg.comag.omega_r_hz, delta_T = kTwoPi * cfg.comag.delta_t_hz;
  w.json("comag_summary.json", {{"operating_regime", to_string(op.regime)},
                                {"best_tone_offset_hz", hz(rd.delta[rd.best])},
                                {"best_eta_r_mdeg_s_rthz", rd.eta_r_mdeg[rd.best]},
                                {"degradation_relocked", eit_degradation(set, omega_R, delta_T, {}, true)},
                                {"degradation_fixed_drive", eit_degradation(set, omega_R, delta_T, {}, false)},
                                {"omega_r_hz", cfg.comag.omega_r_hz},
                                {"delta_t_hz", cfg.comag.delta_t_hz},
                                {"map_failures", failures}});
  return failures;
}

std::size_t cmd_vector(const RunConfig& cfg, ArtifactWriter& w) {
  LambdaParams p = cfg.resolved_lambda();
  p.omega_2 = kTwoPi * cfg.vector.omega_2_hz;
  const double s = kTwoPi * cfg.vector.spacing_hz;
  const std::vector<double> offsets{-1.5 * s, -0.5 * s, 0.5 * s, 1.5 * s};
  const CrosstalkMatrix X = crosstalk_matrix(p, offsets, 0.0, {}, cfg.workers);
  Rows xr;
  for (long i = 0; i < X.M.rows(); ++i)
    for (long j = 0; j < X.M.cols(); ++j)
      xr.push_back({std::to_string(i), std::to_string(j), num(X.M(i, j)), num(X.M(i, j) / X.M(i, i))});
  w.csv("crosstalk.csv", {"probe", "member", "M_v_per_hz", "relative"}, xr);
  json axes = json::array(), matrix = json::array();
  for (std::size_t j = 0; j < X.axes.size(); ++j)
    axes.push_back({{"member", j},
                    {"offset_hz", hz(X.offsets[j])},
                    {"nv_axis", {X.axes[j].x(), X.axes[j].y(), X.axes[j].z()}}});
  for (long i = 0; i < X.M.rows(); ++i) {
    json row = json::array();
    for (long j = 0; j < X.M.cols(); ++j) row.push_back(X.M(i, j));
    matrix.push_back(row);
  }
  w.json("crosstalk.json", {{"M_v_per_hz", matrix}, {"condition", X.condition}, {"members", axes}});

  // Synthetic readout: per-axis signals s = M d + noise, read back naively
  // (s_i / M_ii) and with the crosstalk removed.
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const Eigen::Vector3d base_rate = Eigen::Vector3d(cfg.vector.rotation_deg_s[0], cfg.vector.rotation_deg_s[1],
                                                    cfg.vector.rotation_deg_s[2]) *
                                    (kPi / 180.0);
  const double noise = kTwoPi * cfg.vector.reading_noise_hz;
  double err_naive = 0.0, err_elim = 0.0;
  Rows vr;
  for (int t = 0; t < cfg.vector.trials; ++t) {
    Eigen::Vector3d R = base_rate;
    if (t > 0) R = base_rate.norm() * Eigen::Vector3d(gauss(rng), gauss(rng), gauss(rng)).normalized();
    const auto d = project_rotation(R, X.axes);
    const Eigen::VectorXd dv = Eigen::Map<const Eigen::VectorXd>(d.data(), static_cast<long>(d.size()));
    const Eigen::VectorXd sig = X.M * dv;
    std::vector<double> y(d.size());
    for (std::size_t i = 0; i < d.size(); ++i)
      y[i] = sig(static_cast<long>(i)) / X.M(static_cast<long>(i), static_cast<long>(i)) + noise * gauss(rng);
    const Eigen::Vector3d Rn = reconstruct_rotation(y, X.axes);
    const Eigen::Vector3d Re = reconstruct_rotation(y, X.axes, X.M);
    const double en = (Rn - R).norm() / R.norm(), ee = (Re - R).norm() / R.norm();
    err_naive += en * en;
    err_elim += ee * ee;
    vr.push_back({std::to_string(t), num(R.x()), num(R.y()), num(R.z()), num(Rn.x()), num(Rn.y()), num(Rn.z()),
                  num(Re.x()), num(Re.y()), num(Re.z()), num(en), num(ee)});
  }
  err_naive = std::sqrt(err_naive / cfg.vector.trials);
  err_elim = std::sqrt(err_elim / cfg.vector.trials);
  w.csv("reconstruction.csv",
        {"trial", "rx", "ry", "rz", "naive_x", "naive_y", "naive_z", "elim_x", "elim_y", "elim_z", "err_naive",
         "err_elim"},
        vr);

  // Comagnetometer demo: a field drift moves the electron line by delta_e and
  // the nuclear line by (gamma_n / gamma_e) delta_e.
  const double delta_e = kTwoPi * cfg.vector.field_drift_hz;
  const double true_d = project_rotation(base_rate, X.axes)[0];
  const double raw = true_d + (cfg.nv.gamma_n / cfg.nv.gamma_e) * delta_e;
  const double corrected = comagnetometer_correct(raw, delta_e, cfg.nv);

  w.json("vector_summary.json", {{"spacing_hz", cfg.vector.spacing_hz},
                                 {"condition", X.condition},
                                 {"max_offdiag_ratio", X.max_offdiag_ratio()},
                                 {"diagonally_dominant", X.diagonally_dominant()},
                                 {"rms_error_naive", err_naive},
                                 {"rms_error_eliminated", err_elim},
                                 {"improvement", err_naive / err_elim},
                                 {"comag_raw_error_rad_s", raw - true_d},
                                 {"comag_corrected_error_rad_s", corrected - true_d}});
  return 0;
}

json oracle_record(const OracleComparison& c, const std::string& channels, double drive) {
  const auto& p = c.config.params;
  return {{"config",
           {{"n_spins", c.config.n_spins},
            {"fock_cutoff", c.config.fock_cutoff},
            {"channels", channels},
            {"drive_over_half_kappa", drive},
            {"coupling_hz", hz(c.config.coupling())},
            {"omega_2_hz", hz(p.omega_2)},
            {"repump_to_2", p.repump_to_2},
            {"nuclear_flip_fraction", p.nuclear_flip_fraction}}},
          {"a_exact", {c.a_exact.real(), c.a_exact.imag()}},
          {"a_meanfield", {c.a_meanfield.real(), c.a_meanfield.imag()}},
          {"rel_err", c.rel_err},
          {"cutoff_shift", c.cutoff_shift},
          {"top_fock_population", c.top_fock_population}};
}

std::size_t cmd_oracle(const RunConfig& cfg, ArtifactWriter& w) {
  const LambdaParams base = cfg.resolved_lambda();
  json records = json::array();
  Rows rows;
  auto add = [&](const OracleComparison& c, const std::string& channels, double drive) {
    records.push_back(oracle_record(c, channels, drive));
    rows.push_back({std::to_string(c.config.n_spins), std::to_string(c.config.fock_cutoff), channels, num(drive),
                    num(c.a_exact.real()), num(c.a_exact.imag()), num(c.a_meanfield.real()), num(c.a_meanfield.imag()),
                    num(c.rel_err), num(c.cutoff_shift), num(c.top_fock_population)});
  };
  // "closed": no channel feeds |0,0>, so at Omega_2 = 0 each spin is a two-level system.
  for (const std::string channels : {"configured", "closed"}) {
    OracleConfig oc;
    oc.params = base;
    oc.params.omega_2 = 0.0;
    if (channels == "closed") {
      oc.params.repump_to_2 = 0.0;
      oc.params.nuclear_flip_fraction = 0.0;
    }
    oc.params.J = cfg.oracle.weak_drive * base.kappa() / 2.0;
    oc.fock_cutoff = cfg.oracle.fock_cutoff;
    for (int n : cfg.oracle.n_spins) {
      oc.n_spins = n;
      add(compare_with_mean_field(oc), channels, cfg.oracle.weak_drive);
    }
    if (channels == "closed") {
      oc.n_spins = 1;
      oc.fock_cutoff = cfg.oracle.strong_cutoff;
      for (double d : cfg.oracle.strong_drive) {
        oc.params.J = d * base.kappa() / 2.0;
        add(compare_with_mean_field(oc, false), "closed-strong", d);
      }
    }
  }
  w.csv("oracle.csv",
        {"n_spins", "fock_cutoff", "channels", "drive_over_half_kappa", "a_exact_re", "a_exact_im", "a_mf_re",
         "a_mf_im", "rel_err", "cutoff_shift", "top_fock_population"},
        rows);
  w.json("oracle.json", {{"records", records}});
  return 0;
}

using Handler = std::function<std::size_t(const RunConfig&, ArtifactWriter&)>;

const std::map<std::string, Handler>& handlers() {
  static const std::map<std::string, Handler> h{
      {"levels", cmd_levels},       {"spectrum", cmd_spectrum}, {"regime-map", cmd_regime_map},
      {"sensitivity-map", cmd_sensitivity_map}, {"coop-sweep", cmd_coop_sweep}, {"dynamics", cmd_dynamics},
      {"comag", cmd_comag},         {"vector", cmd_vector},     {"oracle-validate", cmd_oracle},
  };
  return h;
}

}  // namespace

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"levels",   "spectrum", "regime-map", "sensitivity-map", "coop-sweep",
                                              "dynamics", "comag",    "vector",     "oracle-validate"};
  return names;
}

CommandResult run_command(const std::string& name, const RunConfig& cfg) {
  const auto it = handlers().find(name);
  if (it == handlers().end()) throw ConfigError("unknown subcommand '" + name + "'");
  const std::size_t warn0 = warning_count();
  ArtifactWriter w(cfg.out_dir, name);
  CommandResult res;
  res.cell_failures = it->second(cfg, w);
  res.warnings = warning_count() - warn0;
  w.manifest(cfg, res.warnings, res.cell_failures);
  res.files = w.files();
  return res;
}

}  // namespace nvgyro
