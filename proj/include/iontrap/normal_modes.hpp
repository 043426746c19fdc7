#pragma once

#include <Eigen/Dense>
#include <array>
#include <vector>

#include "iontrap/electrode_field.hpp"
#include "iontrap/geometry.hpp"

namespace iontrap {

enum class ModeAxis { X = 0, Y = 1, Z = 2, Full3N = 3 };

struct ModeSpectrum {
  ModeAxis axis = ModeAxis::Full3N;
  Eigen::VectorXd omega;      // rad/s, ascending (0 for unstable entries)
  Eigen::MatrixXd b;          // rows: ions (or 3N coords), cols: modes
  Eigen::VectorXd eigenvalues; // omega^2, may be negative for unstable modes
  std::vector<int> unstable;   // mode indices with negative eigenvalue
  bool stable() const { return unstable.empty(); }
};

// Second derivatives of the pairwise Coulomb energy, 3N x 3N in J/m^2.
// Charges in coulombs.
Eigen::MatrixXd coulomb_hessian(const std::vector<Eigen::Vector3d>& positions,
                                const std::vector<double>& charges);

struct HessianSet {
  std::array<Eigen::MatrixXd, 3> axis; // mass-weighted, eigenvalues omega^2
  Eigen::MatrixXd full;                // 3N mass-weighted
  double cross_coupling = 0.0;         // max off-axis / diagonal block ratio
  bool decoupled = false;              // cross_coupling < 1e-6
};

// Mass-weighted hessians from per-site secular triples plus Coulomb terms.
HessianSet assemble_hessian(const std::vector<SecularTriple>& sites,
                            const std::vector<Eigen::Vector3d>& positions,
                            const std::vector<Species>& species);

ModeSpectrum diagonalize(const Eigen::MatrixXd& h, ModeAxis axis);

// Per-mode rescaling of the eigenvector matrix by its entry of maximum
// magnitude; the dominant ion of each mode reads +1.
Eigen::MatrixXd interaction_matrix(const ModeSpectrum& spectrum);

// Phonon-exchange rate between single ions in separate wells, rad/s.
double coupling_strength(const Species& a, const Species& b, double omega_a,
                         double omega_b, double d_ion);

struct ResonanceDetuning {
  double delta_minus = 0.0; // (omega_i - omega_j) / 2, rad/s
  bool coupled = false;
};

ResonanceDetuning resonance_detuning(double omega_i, double omega_j,
                                     double omega_coupling,
                                     double threshold = 1.0);

struct SegmentPartition {
  struct Segment {
    std::vector<int> ions;
    std::vector<int> modes;
  };
  std::vector<Segment> segments;
  double threshold = 0.0;
};

// Connected components of the ion-mode participation graph: ion i touches
// mode m when |b_im| / max_i' |b_i'm| > threshold.
SegmentPartition detect_segments(const ModeSpectrum& spectrum,
                                 double threshold = 1e-4);

// Axial chain in one or more wells, in units of the characteristic length of
// the reference (stiffest) well. kappa2_ratio[n] = kappa2_n / kappa2_ref and
// alpha[n] the quartic strength of well n; delta_u[n] is the offset of ion n
// from its own well center.
struct AnharmonicChain {
  Eigen::VectorXd u;            // dimensionless positions
  Eigen::VectorXd well_center;  // dimensionless well centers per ion
  Eigen::VectorXd kappa2_ratio;
  Eigen::VectorXd alpha;
};

// Dimensionless axial stiffness matrix: half the second-derivative matrix of
// the chain energy, so eigenvalues are omega^2 in units of omega_ref^2.
Eigen::MatrixXd anharmonic_jacobian(const AnharmonicChain& chain);

// Jacobian plus the physical spectrum for a reference-well frequency.
ModeSpectrum anharmonic_modes(const AnharmonicChain& chain, double omega_ref);

// Dimensionless chain energy (for oracles and equilibrium solving).
double anharmonic_energy(const AnharmonicChain& chain, const Eigen::VectorXd& u);

// Newton solve of the dimensionless equilibrium positions from a guess.
Eigen::VectorXd solve_anharmonic_equilibrium(const AnharmonicChain& chain,
                                             const Eigen::VectorXd& guess);

void write_spectrum_json(const std::string& path, const ModeSpectrum& spectrum,
                         const std::string& meta_line = "");

} // namespace iontrap
