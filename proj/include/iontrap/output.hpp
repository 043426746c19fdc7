#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace iontrap {

inline constexpr const char* kToolVersion = "0.1.0";

// Reproducibility stamp embedded in every artifact.
struct MetaInfo {
  std::string tool_version = kToolVersion;
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;

  std::string comment_line() const; // "# iontrap <ver> config=<hex> seed=<n>"
};

std::uint64_t fnv1a_hash(const std::string& bytes);
std::uint64_t hash_file(const std::string& path);

// Diverging blue-white-red color for v in [-1, 1].
std::string diverging_color(double v);
// Sequential color for v in [0, 1].
std::string sequential_color(double v);

// Interaction-matrix heatmap: rows are modes, columns are ions; the right
// axis carries one label per mode (frequency offsets).
void svg_heatmap(const std::string& path, const Eigen::MatrixXd& ion_by_mode,
                 const std::vector<std::string>& right_labels,
                 const std::string& title, const MetaInfo& meta);

// Colored-cell map of a scalar field slice with optional point markers.
void svg_field_map(const std::string& path, const Eigen::MatrixXd& values,
                   double x0, double x1, double y0, double y1,
                   const std::vector<Eigen::Vector2d>& markers,
                   const std::string& title, const MetaInfo& meta);

// Log-scale line plot (x, y>0 pairs); gaps where y is non-finite.
void svg_log_plot(const std::string& path, const std::vector<double>& x,
                  const std::vector<double>& y, const std::string& title,
                  const std::string& x_label, const MetaInfo& meta);

// Per-interval bar chart of a pulse solution.
void svg_pulse_plot(const std::string& path, const Eigen::VectorXd& omega_s_hz,
                    const std::string& title, const MetaInfo& meta);

// CSV grid of a field slice: header "x,y,value" (column names configurable).
void write_grid_csv(const std::string& path, const Eigen::MatrixXd& values,
                    double x0, double x1, double y0, double y1,
                    const std::string& col_a, const std::string& col_b,
                    const MetaInfo& meta);

} // namespace iontrap
