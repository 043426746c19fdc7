#include "iontrap/ion_dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <fftw3.h>
#include <json.hpp>

#include "iontrap/constants.hpp"
#include "iontrap/errors.hpp"

namespace iontrap {

using Eigen::Vector3d;

TrapTimeField::TrapTimeField(const TrapLayout& layout, std::vector<double> dc_volts)
    : layout_(&layout), dc_volts_(std::move(dc_volts)) {
  if (dc_volts_.size() != layout.dc_indices().size())
    throw ConfigError("voltage vector length does not match DC electrode count");
}

double TrapTimeField::value(const Vector3d& p, double t) const {
  double phi = total_static_potential(*layout_, dc_volts_, p);
  phi += rf_instantaneous_potential(*layout_, layout_->drive(), t, p);
  return phi;
}

Vector3d TrapTimeField::gradient(const Vector3d& p, double t) const {
  Vector3d g = total_static_gradient(*layout_, dc_volts_, p);
  const double c = std::cos(layout_->drive().omega_rf * t);
  for (int i : layout_->rf_indices()) {
    const auto& e = layout_->electrodes()[i];
    g += layout_->drive().phase_sign(e.role) * c *
         rect_gradient(e, layout_->drive().v_rf, p);
  }
  return g;
}

std::vector<Vector3d> compute_forces(const TimeField& field,
                                     const std::vector<Species>& ions,
                                     const std::vector<Vector3d>& positions,
                                     double t, double min_separation) {
  const size_t n = ions.size();
  std::vector<Vector3d> f(n);
  for (size_t i = 0; i < n; ++i)
    f[i] = -ions[i].charge_coulomb() * field.gradient(positions[i], t);
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = i + 1; j < n; ++j) {
      const Vector3d d = positions[i] - positions[j];
      const double r = d.norm();
      if (r < min_separation)
        throw NearCollisionError("ions " + std::to_string(i) + " and " +
                                 std::to_string(j) + " within " +
                                 std::to_string(r) + " m");
      const Vector3d fc = constants::kCoulomb * ions[i].charge_coulomb() *
                          ions[j].charge_coulomb() / (r * r * r) * d;
      f[i] += fc;
      f[j] -= fc;
    }
  }
  return f;
}

LangevinIntegrator::LangevinIntegrator(const TimeField& field,
                                       std::vector<Species> ions,
                                       IonState initial, const SimConfig& cfg)
    : field_(&field), ions_(std::move(ions)), state_(std::move(initial)),
      cfg_(cfg), rng_state_(cfg.rng_seed ? cfg.rng_seed : 0x9e3779b97f4a7c15ULL) {
  if (!(cfg_.dt > 0.0)) throw ConfigError("dt must be positive");
  if (state_.positions.size() != ions_.size() ||
      state_.velocities.size() != ions_.size())
    throw ConfigError("state arrays do not match ion count");
  forces_ = compute_forces(*field_, ions_, state_.positions, state_.t,
                           cfg_.min_separation);
}

double LangevinIntegrator::gaussian() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  auto next = [this] {
    rng_state_ ^= rng_state_ >> 12;
    rng_state_ ^= rng_state_ << 25;
    rng_state_ ^= rng_state_ >> 27;
    return rng_state_ * 0x2545F4914F6CDD1DULL;
  };
  const double u1 = ((next() >> 11) + 1.0) * 1.1102230246251565e-16;
  const double u2 = (next() >> 11) * 1.1102230246251565e-16;
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 2.0 * constants::kPi * u2;
  spare_ = r * std::sin(a);
  have_spare_ = true;
  return r * std::cos(a);
}

void LangevinIntegrator::check_bounds() const {
  for (size_t i = 0; i < state_.positions.size(); ++i) {
    const Vector3d& p = state_.positions[i];
    if (p.z() <= cfg_.z_floor || std::abs(p.x()) > cfg_.box_halfwidth ||
        std::abs(p.y()) > cfg_.box_halfwidth)
      throw IonLossEvent(static_cast<int>(i), state_.t,
                         "ion " + std::to_string(i) + " lost at t = " +
                             std::to_string(state_.t) + " s");
  }
}

void LangevinIntegrator::step() {
  const double dt = cfg_.dt;
  const size_t n = ions_.size();
  std::vector<Vector3d> vhalf(n);
  for (size_t i = 0; i < n; ++i) {
    const Vector3d a =
        (forces_[i] - cfg_.damping * state_.velocities[i]) / ions_[i].mass;
    vhalf[i] = state_.velocities[i] + 0.5 * dt * a;
    state_.positions[i] += dt * vhalf[i];
  }
  check_bounds();
  const double t_new = state_.t + dt;
  forces_ = compute_forces(*field_, ions_, state_.positions, t_new,
                           cfg_.min_separation);
  const double sigma_p =
      cfg_.noise_temperature > 0.0
          ? std::sqrt(2.0 * cfg_.damping * constants::kBoltzmann *
                      cfg_.noise_temperature * dt)
          : 0.0;
  for (size_t i = 0; i < n; ++i) {
    const Vector3d a = (forces_[i] - cfg_.damping * vhalf[i]) / ions_[i].mass;
    state_.velocities[i] = vhalf[i] + 0.5 * dt * a;
    if (sigma_p > 0.0) {
      const Vector3d kick(gaussian(), gaussian(), gaussian());
      state_.velocities[i] += sigma_p / ions_[i].mass * kick;
    }
    if (!state_.positions[i].allFinite() || !state_.velocities[i].allFinite())
      throw IntegrationError(step_count_,
                             "non-finite state at step " +
                                 std::to_string(step_count_));
  }
  state_.t = t_new;
  ++step_count_;
}

void LangevinIntegrator::run(
    long n_steps, const std::function<void(long, const IonState&)>& observer) {
  for (long k = 0; k < n_steps; ++k) {
    step();
    if (observer) observer(k, state_);
  }
}

EquilibriumResult run_equilibrium(const TimeField& field,
                                  const std::vector<Species>& ions,
                                  const std::vector<Vector3d>& initial,
                                  const SimConfig& cfg,
                                  const EquilibriumOptions& opts) {
  IonState st;
  st.positions = initial;
  st.velocities.assign(initial.size(), Vector3d::Zero());
  LangevinIntegrator integ(field, ions, st, cfg);

  const double unit = opts.rf_period > 0.0 ? opts.rf_period : 20.0 * cfg.dt;
  const long steps_per_period = std::max<long>(1, std::lround(unit / cfg.dt));
  const long periods = std::max(1, opts.periods_per_window);

  std::vector<Vector3d> prev_mean;
  EquilibriumResult out;
  for (int w = 0; w < opts.max_windows; ++w) {
    std::vector<Vector3d> window_mean(initial.size(), Vector3d::Zero());
    std::vector<std::vector<Vector3d>> period_means(
        periods, std::vector<Vector3d>(initial.size(), Vector3d::Zero()));
    for (long pp = 0; pp < periods; ++pp) {
      for (long s = 0; s < steps_per_period; ++s) {
        integ.step();
        for (size_t i = 0; i < initial.size(); ++i)
          period_means[pp][i] += integ.state().positions[i];
      }
      for (size_t i = 0; i < initial.size(); ++i) {
        period_means[pp][i] /= double(steps_per_period);
        window_mean[i] += period_means[pp][i];
      }
    }
    for (auto& m : window_mean) m /= double(periods);

    double secular_amp = 0.0;
    for (long pp = 0; pp < periods; ++pp)
      for (size_t i = 0; i < initial.size(); ++i)
        secular_amp = std::max(secular_amp,
                               (period_means[pp][i] - window_mean[i]).norm());

    if (!prev_mean.empty()) {
      double drift = 0.0;
      for (size_t i = 0; i < initial.size(); ++i)
        drift = std::max(drift, (window_mean[i] - prev_mean[i]).norm());
      if (drift < opts.residual_tolerance &&
          secular_amp < opts.residual_tolerance) {
        out.positions = window_mean;
        out.residual = secular_amp;
        out.steps_used = integ.step_count();
        return out;
      }
    }
    prev_mean = window_mean;
  }
  throw SearchError("equilibrium did not settle within the window budget");
}

Trajectory simulate_trajectory(const TimeField& field,
                               const std::vector<Species>& ions,
                               const IonState& initial, const SimConfig& cfg,
                               int sample_every) {
  LangevinIntegrator integ(field, ions, initial, cfg);
  Trajectory traj;
  const long samples = cfg.n_steps / std::max(1, sample_every);
  traj.times.reserve(samples);
  traj.positions.reserve(samples);
  traj.velocities.reserve(samples);
  integ.run(cfg.n_steps, [&](long k, const IonState& st) {
    if (k % sample_every == 0) {
      traj.times.push_back(st.t);
      traj.positions.push_back(st.positions);
      traj.velocities.push_back(st.velocities);
    }
  });
  return traj;
}

void Trajectory::write_csv(const std::string& path, const std::string& meta_line) const {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write trajectory file: " + path);
  if (!meta_line.empty()) out << meta_line << '\n';
  out << "t,ion,x,y,z,vx,vy,vz\n";
  out.precision(12);
  for (size_t s = 0; s < times.size(); ++s) {
    for (size_t i = 0; i < positions[s].size(); ++i) {
      const auto& p = positions[s][i];
      const auto& v = velocities[s][i];
      out << times[s] << ',' << i << ',' << p.x() << ',' << p.y() << ','
          << p.z() << ',' << v.x() << ',' << v.y() << ',' << v.z() << '\n';
    }
  }
}

std::vector<double> axis_series(const Trajectory& traj, int ion, int axis) {
  std::vector<double> s;
  s.reserve(traj.positions.size());
  for (const auto& frame : traj.positions) s.push_back(frame[ion][axis]);
  return s;
}

namespace {

std::vector<double> magnitude_spectrum(const std::vector<double>& series) {
  const int n = static_cast<int>(series.size());
  double mean = 0.0;
  for (double v : series) mean += v;
  mean /= n;

  std::vector<double> in(n);
  for (int i = 0; i < n; ++i) {
    const double hann =
        0.5 - 0.5 * std::cos(2.0 * constants::kPi * i / (n - 1));
    in[i] = (series[i] - mean) * hann;
  }
  std::vector<std::complex<double>> spec(n / 2 + 1);
  fftw_plan plan = fftw_plan_dft_r2c_1d(
      n, in.data(), reinterpret_cast<fftw_complex*>(spec.data()), FFTW_ESTIMATE);
  fftw_execute(plan);
  fftw_destroy_plan(plan);

  std::vector<double> mag(spec.size());
  for (size_t i = 0; i < spec.size(); ++i) mag[i] = std::abs(spec[i]);
  return mag;
}

SpectrumPeak interpolate_peak(const std::vector<double>& mag, int k,
                              double bin_hz) {
  SpectrumPeak peak;
  peak.magnitude = mag[k];
  double delta = 0.0;
  if (k > 0 && k + 1 < static_cast<int>(mag.size()) && mag[k - 1] > 0.0 &&
      mag[k + 1] > 0.0) {
    const double la = std::log(mag[k - 1]);
    const double lb = std::log(mag[k]);
    const double lc = std::log(mag[k + 1]);
    const double denom = la - 2.0 * lb + lc;
    if (denom < 0.0) delta = 0.5 * (la - lc) / denom;
  }
  peak.frequency_hz = (k + delta) * bin_hz;
  return peak;
}

} // namespace

SpectrumPeak spectrum_peak(const std::vector<double>& series,
                           double sample_rate_hz) {
  if (series.size() < 16)
    throw AmbiguousSpectrumError("series too short for spectral analysis");
  const auto mag = magnitude_spectrum(series);
  const double bin = sample_rate_hz / series.size();

  int kmax = 2;
  for (int k = 2; k + 1 < static_cast<int>(mag.size()); ++k)
    if (mag[k] > mag[kmax]) kmax = k;

  std::vector<double> sorted(mag.begin() + 2, mag.end() - 1);
  std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2,
                   sorted.end());
  const double floor = sorted[sorted.size() / 2];
  if (!(mag[kmax] > 10.0 * floor))
    throw AmbiguousSpectrumError("no peak 10x above the median floor");
  return interpolate_peak(mag, kmax, bin);
}

SpectrumPeak spectrum_peak_near(const std::vector<double>& series,
                                double sample_rate_hz, double target_hz,
                                double window_hz) {
  const auto mag = magnitude_spectrum(series);
  const double bin = sample_rate_hz / series.size();
  const int lo = std::max(2, static_cast<int>((target_hz - window_hz) / bin));
  const int hi = std::min(static_cast<int>(mag.size()) - 2,
                          static_cast<int>((target_hz + window_hz) / bin) + 1);
  if (lo >= hi) throw AmbiguousSpectrumError("window outside spectral range");
  int kmax = lo;
  for (int k = lo; k <= hi; ++k)
    if (mag[k] > mag[kmax]) kmax = k;
  return interpolate_peak(mag, kmax, bin);
}

void write_equilibrium_json(const std::string& path,
                            const std::vector<Vector3d>& positions,
                            const std::string& meta_line) {
  nlohmann::json j;
  if (!meta_line.empty()) j["meta"] = meta_line;
  j["positions"] = nlohmann::json::array();
  for (const auto& p : positions) j["positions"].push_back({p.x(), p.y(), p.z()});
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write equilibrium file: " + path);
  out << j.dump(2) << "\n";
}

} // namespace iontrap
