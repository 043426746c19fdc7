#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "iontrap/geometry.hpp"

namespace iontrap {

// Potential of a rectangular electrode held at `volts` in an otherwise
// grounded plane (gapless approximation), valid for p.z > 0. Value in volts,
// gradient in V/m, hessian in V/m^2; all closed-form.
double rect_potential(const Electrode& e, double volts, const Eigen::Vector3d& p);
Eigen::Vector3d rect_gradient(const Electrode& e, double volts, const Eigen::Vector3d& p);
Eigen::Matrix3d rect_hessian(const Electrode& e, double volts, const Eigen::Vector3d& p);

// Scalar potential field (volts) with derivatives. Default derivatives use
// Richardson-extrapolated central differences with step max(1e-9 m, 1e-6 z).
class PotentialField {
 public:
  virtual ~PotentialField() = default;
  virtual double value(const Eigen::Vector3d& p) const = 0;
  virtual Eigen::Vector3d gradient(const Eigen::Vector3d& p) const;
  virtual Eigen::Matrix3d hessian(const Eigen::Vector3d& p) const;
  virtual double derivative_step(const Eigen::Vector3d& p) const;
};

// Static superposition of the DC electrodes at the given voltages,
// ordered like layout.dc_indices().
double total_static_potential(const TrapLayout& layout,
                              const std::vector<double>& dc_volts,
                              const Eigen::Vector3d& p);
Eigen::Vector3d total_static_gradient(const TrapLayout& layout,
                                      const std::vector<double>& dc_volts,
                                      const Eigen::Vector3d& p);

// Instantaneous RF potential at time t (RfMinus is pi out of phase).
double rf_instantaneous_potential(const TrapLayout& layout, const RfDrive& drive,
                                  double t, const Eigen::Vector3d& p);

// Ponderomotive (pseudo)potential in eV for a given species:
//   Z^2 e |grad phi_rf|^2 / (4 m Omega^2),
// with phi_rf the RF amplitude field at +/- v_rf.
double pseudopotential_ev(const TrapLayout& layout, const RfDrive& drive,
                          const Species& sp, const Eigen::Vector3d& p);

// Combined confining potential seen by one ion, expressed in volts so that
// the potential energy is Z e * value(). DC part analytic; pseudopotential
// gradient uses the closed-form RF field hessian.
class TrapField : public PotentialField {
 public:
  TrapField(const TrapLayout& layout, const Species& sp,
            std::vector<double> dc_volts);

  double value(const Eigen::Vector3d& p) const override;
  Eigen::Vector3d gradient(const Eigen::Vector3d& p) const override;

  double rf_amplitude(const Eigen::Vector3d& p) const;
  Eigen::Vector3d rf_amplitude_gradient(const Eigen::Vector3d& p) const;
  Eigen::Matrix3d rf_amplitude_hessian(const Eigen::Vector3d& p) const;
  double pseudopotential_volts(const Eigen::Vector3d& p) const;
  double dc_potential(const Eigen::Vector3d& p) const;
  Eigen::Vector3d dc_gradient(const Eigen::Vector3d& p) const;

  const TrapLayout& layout() const { return *layout_; }
  const Species& species() const { return species_; }
  const std::vector<double>& dc_volts() const { return dc_volts_; }
  void set_dc_volts(std::vector<double> v);

 private:
  const TrapLayout* layout_;
  Species species_;
  std::vector<double> dc_volts_;
  double pseudo_scale_; // Z e / (4 m Omega^2), volts per (V/m)^2
};

struct MinimumSearchOptions {
  int max_iterations = 200;
  double gradient_tolerance = 1e-12; // relative to |H| * z
  double max_step = 0.0;             // 0: auto (0.3 z per step)
};

// Damped Newton descent to a local minimum of the field. Throws SearchError
// on non-convergence and NotATrapError when the converged point has an
// indefinite hessian.
Eigen::Vector3d find_minimum(const PotentialField& field,
                             const Eigen::Vector3d& guess,
                             const MinimumSearchOptions& opts = {});

struct SecularTriple {
  Eigen::Vector3d omega;        // rad/s, ascending
  Eigen::Matrix3d axes;         // columns are principal axes
  Eigen::Vector3d minimum;      // m
};

// Frequencies from the hessian of the confining field (volts) at a minimum:
// omega_k = sqrt(Z e lambda_k / m).
SecularTriple secular_frequencies(const PotentialField& field,
                                  const Eigen::Vector3d& minimum,
                                  const Species& sp);

struct TrapDepthOptions {
  Eigen::Vector3d escape_axis = Eigen::Vector3d::UnitX();
  double lateral_range = 50e-6;  // walk distance each way along escape_axis
  double vertical_range = 200e-6;
  double step = 0.5e-6;
};

struct TrapDepthResult {
  double depth_mev = 0.0;
  bool bounded_by_box = false;   // no saddle found; edge value used
  Eigen::Vector3d saddle;        // location of the limiting barrier
};

// Barrier to the nearest escape path: line walk along +/- escape_axis with
// transverse re-minimization, plus a vertical scan. Result in meV per ion
// charge state.
TrapDepthResult trap_depth(const PotentialField& field,
                           const Eigen::Vector3d& minimum, const Species& sp,
                           const TrapDepthOptions& opts = {});

struct StabilityQ {
  double q = 0.0;
  bool stable = false;
};

// Lowest-order Mathieu parameter q = 2 sqrt(2) omega_sec / Omega_rf,
// stable below 0.908.
StabilityQ stability_q(double omega_sec, const RfDrive& drive);

// Background-collision lifetime estimate (seconds).
double lifetime_estimate(double pressure_pa, double temperature_k,
                         double cross_section_m2, double bg_mass_kg);

struct AnharmonicFit {
  double kappa2 = 0.0; // V/m^2
  double kappa3 = 0.0; // V/m^3
  double kappa4 = 0.0; // V/m^4
  std::optional<double> lambda3; // m, absent when kappa3 == 0
  std::optional<double> lambda4; // m, absent when kappa4 == 0
  double char_length = 0.0;      // m
  double alpha = 0.0;            // l^2 kappa4 / kappa2, signed
  double residual_rel = 0.0;     // fit residual at window edge / kappa2 w^2
};

struct AnharmonicFitOptions {
  Eigen::Vector3d axis = Eigen::Vector3d::UnitX();
  double window = 3e-6;   // m, half-width
  int samples = 201;
  double max_residual_rel = 0.01;
};

// Quartic expansion of the field along an axis through a minimum.
AnharmonicFit anharmonic_fit(const PotentialField& field,
                             const Eigen::Vector3d& minimum, const Species& sp,
                             const AnharmonicFitOptions& opts = {});

} // namespace iontrap
