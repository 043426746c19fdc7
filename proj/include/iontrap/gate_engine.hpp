#pragma once

#include <Eigen/Dense>
#include <complex>
#include <vector>

#include "iontrap/constants.hpp"
#include "iontrap/geometry.hpp"
#include "iontrap/normal_modes.hpp"

namespace iontrap {

struct GateConfig {
  int ion_i = 0;
  int ion_j = 1;
  double t_g = 200e-6;          // s
  double mu = 0.0;              // rad/s bichromatic detuning
  int n_segments = 5;           // 2N+1, odd
  double wavelength = 313.2e-9; // m
  double beam_angle = constants::kPi / 6.0; // rad, lasers vs trap axis
  double wavevector_scale = 0.0; // |dk| = scale * 2pi/lambda; 0: 2 cos(beam_angle)
  double rabi_cap = 2.0 * constants::kPi * 0.25e6; // rad/s

  double segment_time() const { return t_g / n_segments; }
  double effective_wavevector() const;
};

// eta_{i,m} = dk * b_{i,m} * sqrt(hbar / (2 m_i omega_m)).
Eigen::MatrixXd lamb_dicke(const ModeSpectrum& spectrum,
                           const std::vector<Species>& ions,
                           const GateConfig& cfg);

// Closed form of int_a^b sin(mu t) e^{i nu t} dt with stable small-frequency
// limits.
std::complex<double> sin_exp_integral(double mu, double nu, double a, double b);

// Triangle integral int_a^b dt2 int_a^t2 dt1 sin(mu t2) sin(mu t1)
// sin(omega (t2 - t1)).
double sine_triangle_integral(double mu, double omega, double a, double b);

// Linear frequency drift over the gate, sampled at interval midpoints.
struct DriftModel {
  double rate_per_min = 0.0; // drift of omega/2pi in Hz per minute (default)
  bool angular = false;      // apply the rate to omega directly instead

  double gamma_rad_s2() const;
};

// Per-interval mode frequencies, modes x segments.
Eigen::MatrixXd apply_drift(const Eigen::VectorXd& omega_m, const DriftModel& drift,
                            int n_segments, double t_p);

// Mode displacement amplitudes divided by eta: A_m = sum_s Omega_s I_s.
// alpha_{i,m} = i eta_{i,m} A_m.
Eigen::VectorXcd alpha_per_mode(const Eigen::VectorXd& omega_s, double mu,
                                double t_p, const Eigen::MatrixXd& omega_intervals);

Eigen::MatrixXcd alpha(const Eigen::VectorXd& omega_s, double mu, double t_p,
                       const Eigen::MatrixXd& eta,
                       const Eigen::MatrixXd& omega_intervals);

// Lower-triangular segment-pair tensor of the geometric phase for one ion
// pair; chi = Omega^T Gamma Omega.
Eigen::MatrixXd gamma_tensor(double mu, double t_p, int n_segments,
                             const Eigen::MatrixXd& omega_intervals,
                             const Eigen::VectorXd& eta_products);

struct PulseSolution {
  Eigen::VectorXd omega_s;       // rad/s, length 2N+1
  double mu = 0.0;
  double t_g = 0.0;
  Eigen::VectorXd residual_alpha; // |alpha| per segment mode after solving
  double chi = 0.0;
  double max_rabi = 0.0;
  bool cap_ok = true;

  void write_json(const std::string& path, const std::string& meta_line = "") const;
};

// Null-space pulse synthesis: zeros alpha on every segment mode and scales
// the null vector so that chi = pi/4. Throws GateInfeasibleError when the
// null space is empty or chi cannot reach +pi/4.
PulseSolution solve_pulse(const GateConfig& cfg,
                          const Eigen::VectorXd& segment_omegas,
                          const Eigen::MatrixXd& segment_eta);

struct ThermalState {
  double n_bar_c = 0.0; // mean phonon number of the pair COM mode
  double omega_c = 0.0; // rad/s
};

struct FidelityResult {
  double fidelity = 0.0;
  double chi = 0.0;
  double delta_chi = 0.0;
  Eigen::MatrixXcd alpha;  // ions x modes at t_g
  Eigen::VectorXd beta;    // thermal factors per mode
  double gamma_i = 0.0, gamma_j = 0.0, gamma_plus = 0.0, gamma_minus = 0.0;
};

// Analytic gate fidelity over the full mode set, including drifted
// frequencies and the thermal occupation factors.
FidelityResult fidelity(const PulseSolution& pulse,
                        const Eigen::VectorXd& full_omegas,
                        const Eigen::MatrixXd& full_eta,
                        const ThermalState& thermal, const DriftModel& drift);

struct SweepPoint {
  double mu = 0.0;       // rad/s
  double infidelity = 0.0;
  double max_rabi = 0.0; // rad/s
  bool feasible = false;
};

struct SweepParams {
  double mu_lo = 0.0; // rad/s
  double mu_hi = 0.0;
  double step = 0.0;
  bool resolve = true; // re-solve the pulse at every detuning
  int threads = 1;
};

std::vector<SweepPoint> detuning_sweep(const GateConfig& base,
                                       const Eigen::VectorXd& segment_omegas,
                                       const Eigen::MatrixXd& segment_eta,
                                       const Eigen::VectorXd& full_omegas,
                                       const Eigen::MatrixXd& full_eta,
                                       const ThermalState& thermal,
                                       const DriftModel& drift,
                                       const SweepParams& params);

void write_sweep_csv(const std::string& path, const std::vector<SweepPoint>& sweep,
                     const std::string& meta_line = "");

} // namespace iontrap
