#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace iontrap {

enum class ElectrodeRole { RfPlus, RfMinus, DcCentral, DcSide, DcEdge, Ground };

const char* to_string(ElectrodeRole role);
ElectrodeRole role_from_string(const std::string& s);

inline bool is_rf(ElectrodeRole r) {
  return r == ElectrodeRole::RfPlus || r == ElectrodeRole::RfMinus;
}
inline bool is_dc(ElectrodeRole r) {
  return r == ElectrodeRole::DcCentral || r == ElectrodeRole::DcSide ||
         r == ElectrodeRole::DcEdge;
}

// Planar rectangular electrode in the z = 0 plane, corners in meters.
struct Electrode {
  Eigen::Vector2d corner_a;
  Eigen::Vector2d corner_b;
  ElectrodeRole role = ElectrodeRole::Ground;
  std::string id;

  // Normalizes corner order so that a < b componentwise.
  void normalize();
  double width_x() const { return corner_b.x() - corner_a.x(); }
  double width_y() const { return corner_b.y() - corner_a.y(); }
  Eigen::Vector2d center() const { return 0.5 * (corner_a + corner_b); }
};

// RF drive shared by all RF electrodes. RfMinus carries a pi phase shift,
// i.e. its instantaneous voltage is -v_rf cos(omega_rf t).
struct RfDrive {
  double v_rf = 0.0;     // volts, 0-to-peak
  double omega_rf = 0.0; // rad/s

  double period() const;
  int phase_sign(ElectrodeRole role) const; // +1 RfPlus, -1 RfMinus, 0 else
};

struct Species {
  double mass = 0.0; // kg
  int charge = 1;    // units of e
  std::string label;

  double charge_coulomb() const;
  static Species ca40();
  static Species be9();
};

class TrapLayout {
 public:
  TrapLayout() = default;
  TrapLayout(std::vector<Electrode> electrodes, RfDrive drive);

  const std::vector<Electrode>& electrodes() const { return electrodes_; }
  const RfDrive& drive() const { return drive_; }
  RfDrive& drive() { return drive_; }

  // Indices into electrodes() for each group, in declaration order.
  const std::vector<int>& dc_indices() const { return dc_; }
  const std::vector<int>& rf_indices() const { return rf_; }
  std::vector<std::string> dc_electrode_ids() const;

  int index_of(const std::string& id) const; // -1 when absent

  static TrapLayout load(const std::string& path);
  void save(const std::string& path) const;
  static TrapLayout from_json_text(const std::string& text);
  std::string to_json_text() const;

 private:
  void validate() const;
  void rebuild_index();

  std::vector<Electrode> electrodes_;
  RfDrive drive_;
  std::vector<int> dc_;
  std::vector<int> rf_;
};

Species load_species(const std::string& path);
void save_species(const Species& sp, const std::string& path);

// Voltage file: flat JSON object {electrode_id: volts}. Returns the values
// ordered like layout.dc_indices(); missing ids default to 0 V.
std::vector<double> load_dc_voltages(const std::string& path, const TrapLayout& layout);
void save_dc_voltages(const std::string& path, const TrapLayout& layout,
                      const std::vector<double>& volts);

} // namespace iontrap
