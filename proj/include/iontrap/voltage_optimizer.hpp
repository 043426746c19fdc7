#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "iontrap/electrode_field.hpp"
#include "iontrap/geometry.hpp"

namespace iontrap {

// Maps a voltage vector to per-site secular frequencies along one axis.
// Implementations may keep warm-start state; clone() provides an
// independent copy for concurrent finite-difference probes.
class SiteFrequencyModel {
 public:
  virtual ~SiteFrequencyModel() = default;
  virtual int dimension() const = 0;
  virtual int site_count() const = 0;
  virtual Eigen::VectorXd site_frequencies(const Eigen::VectorXd& volts) = 0;
  virtual std::unique_ptr<SiteFrequencyModel> clone() const = 0;
  // Smallest trap depth over sites, when the model can compute one.
  virtual std::optional<double> min_trap_depth_mev(const Eigen::VectorXd&) {
    return std::nullopt;
  }
};

// Trap-backed model: each evaluation re-finds the site minima (warm-started
// from the previous ones) and reads the frequency along `axis`.
class TrapSiteModel : public SiteFrequencyModel {
 public:
  // knob_ids: DC electrode ids to vary; all other DC electrodes stay at
  // baseline (default 0 V).
  TrapSiteModel(const TrapLayout& layout, const Species& sp,
                std::vector<Eigen::Vector3d> site_guesses, int axis,
                std::vector<std::string> knob_ids,
                std::vector<double> baseline = {});

  int dimension() const override { return static_cast<int>(knobs_.size()); }
  int site_count() const override { return static_cast<int>(seeds_.size()); }
  Eigen::VectorXd site_frequencies(const Eigen::VectorXd& volts) override;
  std::unique_ptr<SiteFrequencyModel> clone() const override;
  std::optional<double> min_trap_depth_mev(const Eigen::VectorXd& volts) override;

  // Full secular triples at the current seeds (utility for reports).
  std::vector<SecularTriple> site_triples(const Eigen::VectorXd& volts);
  std::vector<double> full_dc(const Eigen::VectorXd& volts) const;
  const std::vector<Eigen::Vector3d>& seeds() const { return seeds_; }

 private:
  const TrapLayout* layout_;
  Species species_;
  std::vector<Eigen::Vector3d> seeds_;
  int axis_;
  std::vector<int> knobs_; // positions within the DC voltage vector
  std::vector<double> baseline_;
};

struct VoltageBounds {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;
  static VoltageBounds uniform(int n, double lo, double hi);
};

// Per-role defaults: central electrodes 0..6 V, side and edge 0..12 V.
VoltageBounds default_bounds(const TrapLayout& layout,
                             const std::vector<std::string>& knob_ids);

double loss(SiteFrequencyModel& model, const Eigen::VectorXd& volts,
            const Eigen::VectorXd& targets, const Eigen::VectorXd& weights);

// Central finite differences with a 1 mV step per electrode; falls back to a
// one-sided difference when a probe is infeasible.
Eigen::VectorXd loss_gradient(SiteFrequencyModel& model,
                              const Eigen::VectorXd& volts,
                              const Eigen::VectorXd& targets,
                              const Eigen::VectorXd& weights,
                              double step = 1e-3, int threads = 1);

struct AdamState {
  long step = 0;
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  double lr = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState init(int n, double lr = 0.05);
};

// Bias-corrected Adam update followed by projection onto the bounds.
void adam_step(AdamState& state, const Eigen::VectorXd& gradient,
               Eigen::VectorXd& volts, const VoltageBounds& bounds);

struct OptimizerConfig {
  int max_iterations = 3000;
  double tolerance_hz = 10.0;   // max per-site frequency error
  double lr = 0.05;
  double lr_min = 1e-7;
  double lr_decay = 0.5;
  int plateau_patience = 40;
  int stall_window = 50;
  double stall_rel = 1e-12;
  double gradient_step = 1e-3;
  int threads = 1;
  double depth_penalty_weight = 0.0; // quadratic penalty below 50 meV, off by default
  double depth_floor_mev = 50.0;
  std::function<void(int, double, double)> progress; // iter, loss, max_err_hz
};

struct IterationRecord {
  double loss = 0.0;
  double max_error_hz = 0.0;
  Eigen::VectorXd volts;
  Eigen::VectorXd site_omega; // rad/s
};

struct OptimizeResult {
  Eigen::VectorXd volts;
  Eigen::VectorXd site_omega; // rad/s at the returned voltages
  std::vector<IterationRecord> history;
  bool converged = false;
  bool stalled = false;
  bool bounds_ok = true;
  std::optional<double> min_depth_mev;
  bool depth_ok = true;
};

OptimizeResult optimize(SiteFrequencyModel& model, const Eigen::VectorXd& targets,
                        const Eigen::VectorXd& weights,
                        const Eigen::VectorXd& initial_volts,
                        const VoltageBounds& bounds,
                        const OptimizerConfig& cfg = {});

struct SensitivityEntry {
  Eigen::Vector3d percent = Eigen::Vector3d::Zero(); // per axis change at probe V
  bool feasible = true;
};

struct SensitivityTable {
  std::vector<std::string> electrode_ids;
  // [electrode][site]
  std::vector<std::vector<SensitivityEntry>> entries;
  double probe_voltage = 6.0;
};

// Secular-frequency change per site when each DC electrode alone moves from
// 0 V to the probe voltage.
SensitivityTable sensitivity_report(const TrapLayout& layout, const Species& sp,
                                    const std::vector<Eigen::Vector3d>& site_guesses,
                                    double probe_voltage = 6.0);

} // namespace iontrap
