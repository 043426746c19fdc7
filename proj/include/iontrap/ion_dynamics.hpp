#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <vector>

#include "iontrap/electrode_field.hpp"
#include "iontrap/geometry.hpp"

namespace iontrap {

// Time-dependent scalar potential in volts with analytic gradient.
class TimeField {
 public:
  virtual ~TimeField() = default;
  virtual double value(const Eigen::Vector3d& p, double t) const = 0;
  virtual Eigen::Vector3d gradient(const Eigen::Vector3d& p, double t) const = 0;
};

// DC superposition plus the oscillating RF term of a trap layout.
class TrapTimeField : public TimeField {
 public:
  TrapTimeField(const TrapLayout& layout, std::vector<double> dc_volts);
  double value(const Eigen::Vector3d& p, double t) const override;
  Eigen::Vector3d gradient(const Eigen::Vector3d& p, double t) const override;
  const TrapLayout& layout() const { return *layout_; }

 private:
  const TrapLayout* layout_;
  std::vector<double> dc_volts_;
};

struct SimConfig {
  double dt = 0.0;          // s; at most one twentieth of an RF period
  long n_steps = 0;
  double damping = 0.0;     // kg/s, per ion
  double noise_temperature = 0.0; // K; 0 disables the stochastic force
  std::uint64_t rng_seed = 1;
  double min_separation = 1e-9;   // m, near-collision guard
  double z_floor = -1e300;        // ions below this height count as lost
  double box_halfwidth = 5e-3;    // lateral escape bound
};

struct IonState {
  std::vector<Eigen::Vector3d> positions;
  std::vector<Eigen::Vector3d> velocities;
  double t = 0.0;
};

struct Trajectory {
  std::vector<double> times;
  // [sample][ion]
  std::vector<std::vector<Eigen::Vector3d>> positions;
  std::vector<std::vector<Eigen::Vector3d>> velocities;

  void write_csv(const std::string& path, const std::string& meta_line = "") const;
};

// Field force -Z e grad(phi) plus pairwise Coulomb repulsion.
std::vector<Eigen::Vector3d> compute_forces(const TimeField& field,
                                            const std::vector<Species>& ions,
                                            const std::vector<Eigen::Vector3d>& positions,
                                            double t,
                                            double min_separation = 1e-9);

// Velocity-Verlet integrator with Langevin damping and thermal kicks.
// Deterministic for a fixed seed.
class LangevinIntegrator {
 public:
  LangevinIntegrator(const TimeField& field, std::vector<Species> ions,
                     IonState initial, const SimConfig& cfg);

  void step();
  void run(long n_steps,
           const std::function<void(long, const IonState&)>& observer = {});

  const IonState& state() const { return state_; }
  long step_count() const { return step_count_; }

 private:
  double gaussian();
  void check_bounds() const;

  const TimeField* field_;
  std::vector<Species> ions_;
  IonState state_;
  SimConfig cfg_;
  std::vector<Eigen::Vector3d> forces_;
  std::uint64_t rng_state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
  long step_count_ = 0;
};

struct EquilibriumResult {
  std::vector<Eigen::Vector3d> positions; // RF-period averaged
  double residual = 0.0;                  // secular amplitude in final window, m
  long steps_used = 0;
};

struct EquilibriumOptions {
  double rf_period = 0.0;    // averaging unit; defaults to 20 dt when 0
  int periods_per_window = 20;
  double residual_tolerance = 1e-9; // m
  int max_windows = 4000;
};

// Damped evolution until the window-averaged positions settle.
EquilibriumResult run_equilibrium(const TimeField& field,
                                  const std::vector<Species>& ions,
                                  const std::vector<Eigen::Vector3d>& initial,
                                  const SimConfig& cfg,
                                  const EquilibriumOptions& opts = {});

// Records every `sample_every`-th step.
Trajectory simulate_trajectory(const TimeField& field,
                               const std::vector<Species>& ions,
                               const IonState& initial, const SimConfig& cfg,
                               int sample_every = 1);

struct SpectrumPeak {
  double frequency_hz = 0.0;
  double magnitude = 0.0;
};

// Dominant frequency of a uniformly sampled series via an FFT magnitude
// peak with parabolic interpolation. Throws AmbiguousSpectrumError when no
// peak stands 10x above the median floor.
SpectrumPeak spectrum_peak(const std::vector<double>& series, double sample_rate_hz);

// Local spectral maximum nearest to a target frequency (for sideband checks).
SpectrumPeak spectrum_peak_near(const std::vector<double>& series,
                                double sample_rate_hz, double target_hz,
                                double window_hz);

// Convenience extraction of one ion/axis from a trajectory.
std::vector<double> axis_series(const Trajectory& traj, int ion, int axis);

void write_equilibrium_json(const std::string& path,
                            const std::vector<Eigen::Vector3d>& positions,
                            const std::string& meta_line = "");

} // namespace iontrap
