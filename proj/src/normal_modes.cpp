#include "iontrap/normal_modes.hpp"

#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "iontrap/constants.hpp"
#include "iontrap/errors.hpp"

namespace iontrap {

using Eigen::MatrixXd;
using Eigen::Vector3d;
using Eigen::VectorXd;

MatrixXd coulomb_hessian(const std::vector<Vector3d>& positions,
                         const std::vector<double>& charges) {
  const int n = static_cast<int>(positions.size());
  if (charges.size() != positions.size())
    throw ConfigError("positions and charges must have the same length");
  MatrixXd h = MatrixXd::Zero(3 * n, 3 * n);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const Vector3d d = positions[i] - positions[j];
      const double r = d.norm();
      if (r < 1e-15)
        throw ConfigError("coincident ions in Coulomb hessian");
      const Vector3d s = d / r;
      const Eigen::Matrix3d block =
          constants::kCoulomb * charges[i] * charges[j] / (r * r * r) *
          (3.0 * s * s.transpose() - Eigen::Matrix3d::Identity());
      h.block<3, 3>(3 * i, 3 * i) += block;
      h.block<3, 3>(3 * j, 3 * j) += block;
      h.block<3, 3>(3 * i, 3 * j) -= block;
      h.block<3, 3>(3 * j, 3 * i) -= block;
    }
  }
  return h;
}

HessianSet assemble_hessian(const std::vector<SecularTriple>& sites,
                            const std::vector<Vector3d>& positions,
                            const std::vector<Species>& species) {
  const int n = static_cast<int>(positions.size());
  if (static_cast<int>(sites.size()) != n || static_cast<int>(species.size()) != n)
    throw ConfigError("sites, positions and species must have the same length");

  std::vector<double> charges(n);
  for (int i = 0; i < n; ++i) charges[i] = species[i].charge_coulomb();
  const MatrixXd coulomb = coulomb_hessian(positions, charges);

  // Site confinement curvature in J/m^2.
  std::vector<Eigen::Matrix3d> site_k(n);
  for (int i = 0; i < n; ++i) {
    const Eigen::Matrix3d w2 = sites[i].omega.array().square().matrix().asDiagonal();
    site_k[i] = species[i].mass * sites[i].axes * w2 * sites[i].axes.transpose();
  }

  HessianSet out;
  out.full = MatrixXd::Zero(3 * n, 3 * n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      Eigen::Matrix3d block = coulomb.block<3, 3>(3 * i, 3 * j);
      if (i == j) block += site_k[i];
      out.full.block<3, 3>(3 * i, 3 * j) =
          block / std::sqrt(species[i].mass * species[j].mass);
    }
  }

  double max_diag = 0.0, max_off = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) {
          const double v = std::abs(out.full(3 * i + a, 3 * j + b));
          if (a == b)
            max_diag = std::max(max_diag, v);
          else
            max_off = std::max(max_off, v);
        }
  out.cross_coupling = max_diag > 0.0 ? max_off / max_diag : 0.0;
  out.decoupled = out.cross_coupling < 1e-6;

  for (int axis = 0; axis < 3; ++axis) {
    MatrixXd h(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        h(i, j) = out.full(3 * i + axis, 3 * j + axis);
    out.axis[axis] = h;
  }
  return out;
}

ModeSpectrum diagonalize(const MatrixXd& h, ModeAxis axis) {
  const double asym = (h - h.transpose()).norm();
  if (asym > 1e-9 * std::max(1.0, h.norm()))
    throw ConfigError("diagonalize expects a symmetric matrix");
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (h + h.transpose()));
  ModeSpectrum spec;
  spec.axis = axis;
  spec.eigenvalues = es.eigenvalues();
  spec.b = es.eigenvectors();
  spec.omega = VectorXd::Zero(h.rows());
  const double tol = 1e-12 * std::max(1.0, spec.eigenvalues.cwiseAbs().maxCoeff());
  for (int m = 0; m < spec.eigenvalues.size(); ++m) {
    if (spec.eigenvalues[m] < -tol) {
      spec.unstable.push_back(m);
    } else {
      spec.omega[m] = std::sqrt(std::max(0.0, spec.eigenvalues[m]));
    }
  }
  return spec;
}

MatrixXd interaction_matrix(const ModeSpectrum& spectrum) {
  MatrixXd m = spectrum.b;
  for (int c = 0; c < m.cols(); ++c) {
    int imax = 0;
    m.col(c).cwiseAbs().maxCoeff(&imax);
    const double ref = m(imax, c);
    if (ref != 0.0) m.col(c) /= ref;
  }
  return m;
}

double coupling_strength(const Species& a, const Species& b, double omega_a,
                         double omega_b, double d_ion) {
  const double qq = a.charge_coulomb() * b.charge_coulomb();
  return constants::kCoulomb * qq /
         (std::sqrt(a.mass * b.mass) * std::sqrt(omega_a * omega_b) *
          d_ion * d_ion * d_ion);
}

ResonanceDetuning resonance_detuning(double omega_i, double omega_j,
                                     double omega_coupling, double threshold) {
  ResonanceDetuning r;
  r.delta_minus = 0.5 * (omega_i - omega_j);
  r.coupled = std::abs(r.delta_minus) <= threshold * omega_coupling;
  return r;
}

namespace {

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) {
    std::iota(parent.begin(), parent.end(), 0);
  }
  int find(int a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  }
  void unite(int a, int b) { parent[find(a)] = find(b); }
};

} // namespace

SegmentPartition detect_segments(const ModeSpectrum& spectrum, double threshold) {
  const int n_ions = static_cast<int>(spectrum.b.rows());
  const int n_modes = static_cast<int>(spectrum.b.cols());
  UnionFind uf(n_ions + n_modes);
  for (int m = 0; m < n_modes; ++m) {
    const double colmax = spectrum.b.col(m).cwiseAbs().maxCoeff();
    if (colmax <= 0.0) continue;
    for (int i = 0; i < n_ions; ++i)
      if (std::abs(spectrum.b(i, m)) > threshold * colmax)
        uf.unite(i, n_ions + m);
  }

  SegmentPartition part;
  part.threshold = threshold;
  std::vector<int> root_to_segment(n_ions + n_modes, -1);
  for (int i = 0; i < n_ions; ++i) {
    const int r = uf.find(i);
    if (root_to_segment[r] < 0) {
      root_to_segment[r] = static_cast<int>(part.segments.size());
      part.segments.emplace_back();
    }
    part.segments[root_to_segment[r]].ions.push_back(i);
  }
  for (int m = 0; m < n_modes; ++m) {
    const int r = uf.find(n_ions + m);
    if (root_to_segment[r] < 0) {
      root_to_segment[r] = static_cast<int>(part.segments.size());
      part.segments.emplace_back();
    }
    part.segments[root_to_segment[r]].modes.push_back(m);
  }
  return part;
}

namespace {

void check_distinct(const VectorXd& u) {
  for (int i = 0; i < u.size(); ++i)
    for (int j = i + 1; j < u.size(); ++j)
      if (std::abs(u[i] - u[j]) < 1e-12)
        throw ConfigError("duplicate dimensionless positions");
}

} // namespace

MatrixXd anharmonic_jacobian(const AnharmonicChain& chain) {
  const int n = static_cast<int>(chain.u.size());
  check_distinct(chain.u);
  MatrixXd a = MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    const double du = chain.u[i] - chain.well_center[i];
    double diag = chain.kappa2_ratio[i] + 6.0 * chain.alpha[i] * du * du;
    for (int p = 0; p < n; ++p) {
      if (p == i) continue;
      const double d = std::abs(chain.u[i] - chain.u[p]);
      diag += 2.0 / (d * d * d);
      a(i, p) = -2.0 / (d * d * d);
    }
    a(i, i) = diag;
  }
  return a;
}

ModeSpectrum anharmonic_modes(const AnharmonicChain& chain, double omega_ref) {
  ModeSpectrum spec = diagonalize(anharmonic_jacobian(chain), ModeAxis::X);
  spec.eigenvalues *= omega_ref * omega_ref;
  spec.omega *= omega_ref;
  return spec;
}

double anharmonic_energy(const AnharmonicChain& chain, const VectorXd& u) {
  const int n = static_cast<int>(u.size());
  double e = 0.0;
  for (int i = 0; i < n; ++i) {
    const double du = u[i] - chain.well_center[i];
    e += chain.kappa2_ratio[i] * du * du + chain.alpha[i] * du * du * du * du;
    for (int j = i + 1; j < n; ++j) e += 2.0 / std::abs(u[i] - u[j]);
  }
  return e;
}

VectorXd solve_anharmonic_equilibrium(const AnharmonicChain& chain,
                                      const VectorXd& guess) {
  VectorXd u = guess;
  const int n = static_cast<int>(u.size());
  AnharmonicChain work = chain;
  for (int iter = 0; iter < 200; ++iter) {
    VectorXd g = VectorXd::Zero(n);
    for (int i = 0; i < n; ++i) {
      const double du = u[i] - chain.well_center[i];
      g[i] = 2.0 * chain.kappa2_ratio[i] * du +
             4.0 * chain.alpha[i] * du * du * du;
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        const double d = u[i] - u[j];
        g[i] -= 2.0 / (d * d) * (d > 0 ? 1.0 : -1.0);
      }
    }
    if (g.cwiseAbs().maxCoeff() < 1e-13) return u;
    work.u = u;
    const MatrixXd h = 2.0 * anharmonic_jacobian(work);
    VectorXd step = h.ldlt().solve(-g);
    // Keep the ion ordering intact.
    double t = 1.0;
    const double e0 = anharmonic_energy(chain, u);
    for (int ls = 0; ls < 40; ++ls) {
      VectorXd trial = u + t * step;
      bool ordered = true;
      for (int i = 0; i + 1 < n; ++i) ordered &= trial[i] < trial[i + 1];
      if (ordered && anharmonic_energy(chain, trial) < e0 + 1e-30) {
        u = trial;
        break;
      }
      t *= 0.5;
    }
  }
  throw SearchError("anharmonic equilibrium did not converge");
}

void write_spectrum_json(const std::string& path, const ModeSpectrum& spectrum,
                         const std::string& meta_line) {
  nlohmann::json j;
  if (!meta_line.empty()) j["meta"] = meta_line;
  switch (spectrum.axis) {
    case ModeAxis::X: j["axis"] = "x"; break;
    case ModeAxis::Y: j["axis"] = "y"; break;
    case ModeAxis::Z: j["axis"] = "z"; break;
    case ModeAxis::Full3N: j["axis"] = "full3n"; break;
  }
  j["frequencies_hz"] = nlohmann::json::array();
  for (int m = 0; m < spectrum.omega.size(); ++m)
    j["frequencies_hz"].push_back(spectrum.omega[m] / (2.0 * constants::kPi));
  j["eigenvectors"] = nlohmann::json::array();
  for (int r = 0; r < spectrum.b.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (int c = 0; c < spectrum.b.cols(); ++c) row.push_back(spectrum.b(r, c));
    j["eigenvectors"].push_back(row);
  }
  j["unstable_modes"] = spectrum.unstable;
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write spectrum file: " + path);
  out << j.dump(2) << "\n";
}

} // namespace iontrap
