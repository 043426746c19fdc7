#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "iontrap/constants.hpp"
#include "iontrap/electrode_field.hpp"
#include "iontrap/errors.hpp"
#include "iontrap/gate_engine.hpp"
#include "iontrap/ion_dynamics.hpp"
#include "iontrap/log.hpp"
#include "iontrap/normal_modes.hpp"
#include "iontrap/voltage_optimizer.hpp"

namespace iontrap::cli {

namespace fs = std::filesystem;
using nlohmann::json;
using Eigen::Vector3d;

namespace {

constexpr double kTwoPi = 2.0 * constants::kPi;

std::string resolve(const CommandContext& ctx, const std::string& path) {
  if (path.empty() || path.front() == '/') return path;
  return ctx.config_dir + "/" + path;
}

std::string out_path(const CommandContext& ctx, const std::string& name) {
  return ctx.out_dir + "/" + name;
}

// Central electrodes sorted by x define the well sites.
struct WellSite {
  int electrode_index;
  Eigen::Vector2d center;
};

std::vector<WellSite> well_sites(const TrapLayout& layout) {
  std::vector<WellSite> sites;
  for (int i = 0; i < static_cast<int>(layout.electrodes().size()); ++i) {
    const auto& e = layout.electrodes()[i];
    if (e.role == ElectrodeRole::DcCentral || e.role == ElectrodeRole::DcEdge)
      sites.push_back({i, e.center()});
  }
  std::sort(sites.begin(), sites.end(),
            [](const WellSite& a, const WellSite& b) {
              return a.center.x() < b.center.x();
            });
  return sites;
}

std::vector<int> ion_site_list(const CommandContext& ctx,
                               const std::vector<WellSite>& sites) {
  if (ctx.config.contains("wells") && ctx.config["wells"].contains("sites"))
    return ctx.config["wells"]["sites"].get<std::vector<int>>();
  std::vector<int> list;
  for (int s = 0; s < static_cast<int>(sites.size()); ++s)
    if (ctx.layout.electrodes()[sites[s].electrode_index].role ==
        ElectrodeRole::DcCentral)
      list.push_back(s);
  return list;
}

double height_guess(const CommandContext& ctx) {
  if (ctx.config.contains("wells"))
    return ctx.config["wells"].value("height_guess", 20e-6);
  return 20e-6;
}

std::vector<Vector3d> static_minima(const CommandContext& ctx,
                                    const TrapField& field,
                                    const std::vector<WellSite>& sites,
                                    const std::vector<int>& which) {
  std::vector<Vector3d> minima;
  const double h = height_guess(ctx);
  for (int s : which) {
    const Vector3d guess(sites[s].center.x(), sites[s].center.y(), h);
    minima.push_back(find_minimum(field, guess));
  }
  return minima;
}

json triple_to_json(const SecularTriple& t) {
  return {{"minimum", {t.minimum.x(), t.minimum.y(), t.minimum.z()}},
          {"omega_hz",
           {t.omega[0] / kTwoPi, t.omega[1] / kTwoPi, t.omega[2] / kTwoPi}}};
}

} // namespace

CommandContext load_context(const std::string& config_path,
                            const std::string& out_dir, std::uint64_t seed,
                            bool seed_given, int threads) {
  CommandContext ctx;
  std::ifstream in(config_path);
  if (!in) throw ConfigError("cannot open config file: " + config_path);
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    ctx.config = json::parse(ss.str());
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  ctx.config_dir = fs::path(config_path).parent_path().string();
  if (ctx.config_dir.empty()) ctx.config_dir = ".";
  ctx.out_dir = out_dir;
  fs::create_directories(out_dir);
  ctx.threads = std::max(1, threads);

  ctx.meta.config_hash = fnv1a_hash(ss.str());
  ctx.meta.seed = seed_given ? seed : ctx.config.value("seed", 1ull);

  if (!ctx.config.contains("layout"))
    throw ConfigError("config is missing the 'layout' path");
  ctx.layout = TrapLayout::load(resolve(ctx, ctx.config["layout"]));
  if (!ctx.config.contains("species"))
    throw ConfigError("config is missing the 'species' path");
  ctx.species = load_species(resolve(ctx, ctx.config["species"]));
  if (ctx.config.contains("dc_voltages") &&
      !ctx.config["dc_voltages"].is_null()) {
    ctx.dc_volts =
        load_dc_voltages(resolve(ctx, ctx.config["dc_voltages"]), ctx.layout);
  } else {
    ctx.dc_volts.assign(ctx.layout.dc_indices().size(), 0.0);
  }
  return ctx;
}

int cmd_trap_show(CommandContext& ctx) {
  const json block = ctx.config.value("trap_show", json::object());
  const TrapField field(ctx.layout, ctx.species, ctx.dc_volts);
  const auto sites = well_sites(ctx.layout);

  // Slice extent defaults to the central-electrode row.
  double x0 = -50e-6, x1 = 50e-6;
  if (!sites.empty()) {
    x0 = sites.front().center.x() - 20e-6;
    x1 = sites.back().center.x() + 20e-6;
  }
  const double z0 = block.value("z_min", 4e-6);
  const double z1 = block.value("z_max", 60e-6);
  const double y = block.value("y", 0.0);
  const int nx = block.value("grid_nx", 240);
  const int nz = block.value("grid_nz", 80);
  if (block.contains("x_min")) x0 = block["x_min"].get<double>();
  if (block.contains("x_max")) x1 = block["x_max"].get<double>();

  Eigen::MatrixXd slice(nx, nz);
  for (int i = 0; i < nx; ++i) {
    const double x = x0 + (x1 - x0) * i / (nx - 1);
    for (int k = 0; k < nz; ++k) {
      const double z = z0 + (z1 - z0) * k / (nz - 1);
      slice(i, k) = field.value({x, y, z});
    }
  }

  json wells = json::array();
  std::vector<Eigen::Vector2d> markers;
  int found = 0;
  for (size_t s = 0; s < sites.size(); ++s) {
    const Vector3d guess(sites[s].center.x(), sites[s].center.y(),
                         height_guess(ctx));
    json w;
    w["site"] = s;
    w["electrode"] = ctx.layout.electrodes()[sites[s].electrode_index].id;
    try {
      const Vector3d minimum = find_minimum(field, guess);
      const SecularTriple triple = secular_frequencies(field, minimum, ctx.species);
      const TrapDepthResult depth = trap_depth(field, minimum, ctx.species);
      w.update(triple_to_json(triple));
      w["depth_mev"] = depth.depth_mev;
      w["depth_bounded_by_box"] = depth.bounded_by_box;
      json qs = json::array();
      for (int k = 0; k < 3; ++k) {
        const StabilityQ q = stability_q(triple.omega[k], ctx.layout.drive());
        qs.push_back({{"q", q.q}, {"stable", q.stable}});
      }
      w["stability"] = qs;
      markers.push_back({minimum.x(), minimum.z()});
      ++found;
    } catch (const std::runtime_error& e) {
      w["error"] = e.what();
    }
    wells.push_back(w);
  }

  json report;
  report["meta"] = ctx.meta.comment_line();
  report["wells"] = wells;
  report["well_count"] = found;
  // Background-gas lifetime at documented UHV reference conditions.
  report["lifetime"] = {
      {"pressure_pa", 1.5e-9},
      {"temperature_k", 300.0},
      {"cross_section_m2", 5.0e-19},
      {"tau_s", lifetime_estimate(1.5e-9, 300.0, 5.0e-19,
                                  constants::kMassH2Amu *
                                      constants::kAtomicMassUnit)}};
  std::ofstream(out_path(ctx, "wells.json")) << report.dump(2) << "\n";

  write_grid_csv(out_path(ctx, "trap_map.csv"), slice, x0, x1, z0, z1, "x", "z",
                 ctx.meta);
  svg_field_map(out_path(ctx, "trap_map.svg"), slice, x0, x1, z0, z1, markers,
                "confining potential, x-z slice (V)", ctx.meta);
  std::printf("wells: %d\n", found);
  return 0;
}

int cmd_simulate(CommandContext& ctx) {
  const json block = ctx.config.value("sim", json::object());
  const auto sites = well_sites(ctx.layout);
  const auto with_ions = ion_site_list(ctx, sites);
  if (with_ions.empty()) throw ConfigError("no ion sites configured");

  const TrapField static_field(ctx.layout, ctx.species, ctx.dc_volts);
  const auto minima = static_minima(ctx, static_field, sites, with_ions);
  const std::vector<Species> ions(minima.size(), ctx.species);

  const double rf_period = ctx.layout.drive().period();
  SimConfig cfg;
  cfg.dt = rf_period / block.value("steps_per_rf_period", 20.0);
  cfg.n_steps = block.value("n_steps", 120000l);
  cfg.noise_temperature = block.value("temperature_k", 0.5e-3);
  cfg.rng_seed = ctx.meta.seed;
  // Default damping targets the slowest secular mode.
  const SecularTriple t0 = secular_frequencies(static_field, minima[0], ctx.species);
  cfg.damping = block.value("damping_kg_per_s",
                            ctx.species.mass * t0.omega.minCoeff() / 10.0);
  cfg.z_floor = 1e-6;

  const TrapTimeField field(ctx.layout, ctx.dc_volts);
  IonState init;
  init.positions = minima;
  init.velocities.assign(minima.size(), Vector3d::Zero());

  const int sample_every = block.value("sample_every", 20);
  const Trajectory traj = simulate_trajectory(field, ions, init, cfg, sample_every);
  traj.write_csv(out_path(ctx, "trajectory.csv"), ctx.meta.comment_line());

  SimConfig eq_cfg = cfg;
  eq_cfg.noise_temperature = 0.0; // equilibrium pass runs damped and noiseless
  EquilibriumOptions eopts;
  eopts.rf_period = rf_period;
  const EquilibriumResult eq = run_equilibrium(
      field, ions, traj.positions.back(), eq_cfg, eopts);
  write_equilibrium_json(out_path(ctx, "equilibrium.json"), eq.positions,
                         ctx.meta.comment_line());

  double z_mean = 0.0, z_min = 1e300, z_max = -1e300;
  for (const auto& p : eq.positions) {
    z_mean += p.z();
    z_min = std::min(z_min, p.z());
    z_max = std::max(z_max, p.z());
  }
  z_mean /= eq.positions.size();
  json stats = {{"meta", ctx.meta.comment_line()},
                {"z_mean", z_mean},
                {"height_spread_rel", (z_max - z_min) / z_mean},
                {"residual_m", eq.residual},
                {"steps_used", eq.steps_used}};
  std::ofstream(out_path(ctx, "sim_stats.json")) << stats.dump(2) << "\n";
  std::printf("equilibrium spread: %.3e z_mean\n", (z_max - z_min) / z_mean);
  return 0;
}

namespace {

int axis_index(const std::string& name) {
  if (name == "x") return 0;
  if (name == "y") return 1;
  if (name == "z") return 2;
  throw ConfigError("axis must be x, y or z");
}

int com_mode_index(const Eigen::MatrixXd& b) {
  int best = 0;
  double best_sum = -1.0;
  for (int m = 0; m < b.cols(); ++m) {
    const double s = std::abs(b.col(m).sum());
    if (s > best_sum) {
      best_sum = s;
      best = m;
    }
  }
  return best;
}

} // namespace

int cmd_modes(CommandContext& ctx) {
  const json block = ctx.config.value("modes", json::object());
  const auto sites = well_sites(ctx.layout);
  const auto with_ions = ion_site_list(ctx, sites);
  const TrapField field(ctx.layout, ctx.species, ctx.dc_volts);

  std::vector<Vector3d> positions;
  if (block.contains("equilibria")) {
    std::ifstream in(resolve(ctx, block["equilibria"]));
    if (!in) throw ConfigError("cannot open equilibria file");
    json j;
    in >> j;
    for (const auto& row : j.at("positions"))
      positions.push_back({row[0].get<double>(), row[1].get<double>(),
                           row[2].get<double>()});
  } else {
    positions = static_minima(ctx, field, sites, with_ions);
  }

  std::vector<SecularTriple> triples;
  for (const auto& p : positions)
    triples.push_back(secular_frequencies(field, p, ctx.species));
  const std::vector<Species> ions(positions.size(), ctx.species);
  const HessianSet hessians = assemble_hessian(triples, positions, ions);

  std::vector<std::string> wanted;
  const std::string axis = block.value("axis", "all");
  if (axis == "all")
    wanted = {"x", "y", "z"};
  else
    wanted = {axis};

  const double threshold = block.value("segment_threshold", 1e-4);
  json segments_report;
  segments_report["meta"] = ctx.meta.comment_line();
  for (const auto& name : wanted) {
    const int k = axis_index(name);
    const ModeSpectrum spec = diagonalize(hessians.axis[k],
                                          static_cast<ModeAxis>(k));
    if (!spec.stable()) {
      std::string msg = "unstable crystal, imaginary modes along " + name + ":";
      for (int m : spec.unstable) msg += " " + std::to_string(m);
      throw NotATrapError(msg);
    }
    write_spectrum_json(out_path(ctx, "spectrum_" + name + ".json"), spec,
                        ctx.meta.comment_line());

    const Eigen::MatrixXd m = interaction_matrix(spec);
    const int com = com_mode_index(spec.b);
    std::vector<std::string> labels(m.cols());
    char buf[48];
    for (int c = 0; c < m.cols(); ++c) {
      const double off_hz = (spec.omega[c] - spec.omega[com]) / kTwoPi;
      std::snprintf(buf, sizeof(buf), "%+.3f kHz", off_hz / 1e3);
      labels[c] = buf;
    }
    svg_heatmap(out_path(ctx, "interaction_" + name + ".svg"), m, labels,
                "interaction matrix, " + name + " modes", ctx.meta);

    const SegmentPartition part = detect_segments(spec, threshold);
    json segs = json::array();
    for (const auto& s : part.segments)
      segs.push_back({{"ions", s.ions}, {"modes", s.modes}});
    segments_report[name] = segs;
  }
  std::ofstream(out_path(ctx, "segments.json")) << segments_report.dump(2) << "\n";
  return 0;
}

int cmd_optimize(CommandContext& ctx) {
  if (!ctx.config.contains("optimize"))
    throw ConfigError("config is missing the 'optimize' block");
  const json block = ctx.config["optimize"];
  const auto sites = well_sites(ctx.layout);
  const auto with_ions = ion_site_list(ctx, sites);
  const int axis = axis_index(block.value("axis", "z"));

  std::vector<std::string> knobs;
  if (block.contains("knobs")) {
    knobs = block["knobs"].get<std::vector<std::string>>();
  } else {
    for (const auto& s : sites)
      knobs.push_back(ctx.layout.electrodes()[s.electrode_index].id);
  }

  const TrapField field(ctx.layout, ctx.species, ctx.dc_volts);
  std::vector<Vector3d> seeds = static_minima(ctx, field, sites, with_ions);
  TrapSiteModel model(ctx.layout, ctx.species, seeds, axis, knobs, ctx.dc_volts);

  Eigen::VectorXd v0 = Eigen::VectorXd::Zero(model.dimension());
  if (block.contains("initial_volts")) {
    const auto init = block["initial_volts"].get<std::vector<double>>();
    if (static_cast<int>(init.size()) != model.dimension())
      throw ConfigError("initial_volts length does not match knob count");
    for (int k = 0; k < model.dimension(); ++k) v0[k] = init[k];
  }

  Eigen::VectorXd targets(model.site_count());
  if (block.contains("targets_hz")) {
    const auto t = block["targets_hz"].get<std::vector<double>>();
    if (static_cast<int>(t.size()) != model.site_count())
      throw ConfigError("targets_hz length does not match site count");
    for (int s = 0; s < model.site_count(); ++s) targets[s] = kTwoPi * t[s];
  } else {
    // Default: pull every site to the mean of the current frequencies.
    const Eigen::VectorXd now = model.site_frequencies(v0);
    targets.setConstant(now.mean());
  }
  const Eigen::VectorXd weights = Eigen::VectorXd::Ones(model.site_count());

  OptimizerConfig cfg;
  cfg.max_iterations = block.value("max_iterations", 3000);
  cfg.tolerance_hz = block.value("tolerance_hz", 10.0);
  cfg.lr = block.value("lr", 0.05);
  cfg.threads = ctx.threads;
  cfg.depth_penalty_weight = block.value("depth_penalty_weight", 0.0);
  cfg.progress = [](int iter, double l, double err) {
    std::printf("%d, %.6e, %.3f\n", iter, l, err);
  };

  const VoltageBounds bounds = default_bounds(ctx.layout, knobs);
  const OptimizeResult result =
      optimize(model, targets, weights, v0, bounds, cfg);

  json run;
  run["meta"] = ctx.meta.comment_line();
  run["iterations"] = json::array();
  for (const auto& rec : result.history) {
    json it = {{"loss", rec.loss}, {"max_site_error_hz", rec.max_error_hz}};
    it["voltages"] = std::vector<double>(rec.volts.data(),
                                         rec.volts.data() + rec.volts.size());
    json freqs = json::array();
    for (int s = 0; s < rec.site_omega.size(); ++s)
      freqs.push_back(rec.site_omega[s] / kTwoPi);
    it["site_frequencies_hz"] = freqs;
    run["iterations"].push_back(it);
  }
  json final;
  final["voltages"] = json::object();
  for (size_t k = 0; k < knobs.size(); ++k) final["voltages"][knobs[k]] = result.volts[k];
  json freqs = json::array();
  for (int s = 0; s < result.site_omega.size(); ++s)
    freqs.push_back(result.site_omega[s] / kTwoPi);
  final["site_frequencies_hz"] = freqs;
  run["final"] = final;
  run["flags"] = {{"converged", result.converged},
                  {"stalled", result.stalled},
                  {"bounds_ok", result.bounds_ok},
                  {"depth_ok", result.depth_ok}};
  if (result.min_depth_mev) run["flags"]["min_depth_mev"] = *result.min_depth_mev;
  std::ofstream(out_path(ctx, "optimize_log.json")) << run.dump(2) << "\n";

  save_dc_voltages(out_path(ctx, "voltages_out.json"), ctx.layout,
                   model.full_dc(result.volts));
  return result.converged ? 0 : 5;
}

int cmd_gate(CommandContext& ctx, const std::string& action) {
  if (!ctx.config.contains("gate"))
    throw ConfigError("config is missing the 'gate' block");
  const json block = ctx.config["gate"];

  const double omega_c = kTwoPi * block.at("segment").at("omega_c_hz").get<double>();
  const double delta = kTwoPi * block["segment"].value("delta_hz", 1700.0);

  ModeSpectrum segment;
  segment.axis = ModeAxis::X;
  segment.omega = Eigen::Vector2d(omega_c, omega_c + delta);
  segment.eigenvalues = segment.omega.array().square();
  segment.b = Eigen::Matrix2d();
  const double r = 1.0 / std::sqrt(2.0);
  segment.b << r, r, r, -r;

  GateConfig gcfg;
  gcfg.t_g = block.value("t_g_s", 200e-6);
  gcfg.n_segments = block.value("n_segments", 5);
  gcfg.wavelength = block.value("wavelength_m", 313.2e-9);
  gcfg.beam_angle = block.value("beam_angle_rad", constants::kPi / 6.0);
  gcfg.rabi_cap = kTwoPi * block.value("rabi_cap_mhz", 0.25) * 1e6;

  const std::vector<Species> pair(2, ctx.species);
  const Eigen::MatrixXd eta = lamb_dicke(segment, pair, gcfg);

  ThermalState thermal;
  thermal.n_bar_c = block.value("n_bar_c", 0.0);
  thermal.omega_c = omega_c;
  DriftModel drift;
  drift.rate_per_min = block.value("drift_hz_per_min", 0.0);
  drift.angular = block.value("drift_angular", false);

  if (action == "solve") {
    gcfg.mu = kTwoPi * block.at("mu_hz").get<double>();
    const PulseSolution pulse = solve_pulse(gcfg, segment.omega, eta);
    pulse.write_json(out_path(ctx, "pulse.json"), ctx.meta.comment_line());
    Eigen::VectorXd omega_hz = pulse.omega_s / kTwoPi;
    svg_pulse_plot(out_path(ctx, "pulse.svg"), omega_hz,
                   "segmented Rabi frequency (Hz)", ctx.meta);
    const FidelityResult fid = fidelity(pulse, segment.omega, eta, thermal, drift);
    std::printf("chi = %.12f, infidelity = %.3e, max Rabi = %.3f MHz%s\n",
                fid.chi, 1.0 - fid.fidelity, pulse.max_rabi / (kTwoPi * 1e6),
                pulse.cap_ok ? "" : " (cap exceeded)");
    if (!pulse.cap_ok)
      throw GateInfeasibleError("pulse exceeds the configured Rabi cap");
    return 0;
  }

  const json sweep_block = block.value("sweep", json::object());
  SweepParams params;
  params.mu_lo = kTwoPi * sweep_block.value("lo_hz", omega_c / kTwoPi - 5e3);
  params.mu_hi = kTwoPi * sweep_block.value("hi_hz", omega_c / kTwoPi + 45e3);
  params.step = kTwoPi * sweep_block.value("step_hz", 2.0);
  params.resolve = sweep_block.value("resolve", true);
  params.threads = ctx.threads;

  const auto sweep = detuning_sweep(gcfg, segment.omega, eta, segment.omega, eta,
                                    thermal, drift, params);
  write_sweep_csv(out_path(ctx, "sweep.csv"), sweep, ctx.meta.comment_line());
  std::vector<double> xs, ys;
  long feasible = 0;
  for (const auto& pt : sweep) {
    xs.push_back(pt.mu / kTwoPi);
    ys.push_back(pt.infidelity);
    feasible += pt.feasible ? 1 : 0;
  }
  svg_log_plot(out_path(ctx, "sweep.svg"), xs, ys, "MS-gate infidelity",
               "detuning (Hz)", ctx.meta);
  std::printf("sweep: %zu points, %ld feasible\n", sweep.size(), feasible);
  if (feasible == 0)
    throw GateInfeasibleError("no feasible detuning in the sweep window");
  return 0;
}

} // namespace iontrap::cli
