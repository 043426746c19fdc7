#include "iontrap/layout_builder.hpp"

#include <string>

#include "iontrap/constants.hpp"
#include "iontrap/errors.hpp"

namespace iontrap {

double site_center_x(const ExampleLayoutParams& p, int site) {
  return (site - 0.5 * (p.n_sites - 1)) * p.pitch;
}

Eigen::Vector3d site_guess(const ExampleLayoutParams& p, int site, double height) {
  return {site_center_x(p, site), 0.0, height};
}

TrapLayout build_example_layout(const ExampleLayoutParams& p) {
  if (p.notch >= p.pitch)
    throw ConfigError("notch side must be smaller than the pitch");
  if (p.dc_core >= p.notch)
    throw ConfigError("central DC electrode must fit inside the notch");
  if (p.strip_width <= p.notch)
    throw ConfigError("RF strip must be wider than the notch");

  std::vector<Electrode> els;
  auto add = [&els](double xa, double ya, double xb, double yb,
                    ElectrodeRole role, const std::string& id) {
    Electrode e;
    e.corner_a = {xa, ya};
    e.corner_b = {xb, yb};
    e.role = role;
    e.id = id;
    els.push_back(e);
  };

  const double x_left = site_center_x(p, 0) - p.notch / 2 - p.margin;
  const double x_right = site_center_x(p, p.n_sites - 1) + p.notch / 2 + p.margin;
  const double hn = p.notch / 2;
  const double hd = p.dc_core / 2;
  const double hw = p.strip_width / 2;

  // RF+ strip decomposed around the notch row.
  add(x_left, hn, x_right, hw, ElectrodeRole::RfPlus, "rf_top");
  add(x_left, -hw, x_right, -hn, ElectrodeRole::RfPlus, "rf_bottom");
  for (int i = 0; i <= p.n_sites; ++i) {
    const double xa = (i == 0) ? x_left : site_center_x(p, i - 1) + hn;
    const double xb = (i == p.n_sites) ? x_right : site_center_x(p, i) - hn;
    add(xa, -hn, xb, hn, ElectrodeRole::RfPlus, "rf_sp" + std::to_string(i));
  }

  for (int i = 0; i < p.n_sites; ++i) {
    const double xc = site_center_x(p, i);
    const std::string n = std::to_string(i);
    // RF- ring filling the notch around the central DC electrode.
    add(xc - hn, -hn, xc + hn, -hd, ElectrodeRole::RfMinus, "rfm" + n + "_s");
    add(xc - hn, hd, xc + hn, hn, ElectrodeRole::RfMinus, "rfm" + n + "_n");
    add(xc - hn, -hd, xc - hd, hd, ElectrodeRole::RfMinus, "rfm" + n + "_w");
    add(xc + hd, -hd, xc + hn, hd, ElectrodeRole::RfMinus, "rfm" + n + "_e");
    const ElectrodeRole central_role = (i == 0 || i == p.n_sites - 1)
                                           ? ElectrodeRole::DcEdge
                                           : ElectrodeRole::DcCentral;
    add(xc - hd, -hd, xc + hd, hd, central_role, "dc_c" + n);
    // Side rails for stray-field compensation and extra tuning.
    add(xc - p.pitch / 2, hw, xc + p.pitch / 2, hw + p.side_width,
        ElectrodeRole::DcSide, "dc_t" + n);
    add(xc - p.pitch / 2, -hw - p.side_width, xc + p.pitch / 2, -hw,
        ElectrodeRole::DcSide, "dc_b" + n);
  }

  RfDrive drive;
  drive.v_rf = p.v_rf;
  drive.omega_rf = 2.0 * constants::kPi * p.omega_rf_hz;
  return TrapLayout(std::move(els), drive);
}

} // namespace iontrap
