#include "iontrap/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "iontrap/constants.hpp"
#include "iontrap/errors.hpp"

namespace iontrap {

using nlohmann::json;

const char* to_string(ElectrodeRole role) {
  switch (role) {
    case ElectrodeRole::RfPlus: return "rf_plus";
    case ElectrodeRole::RfMinus: return "rf_minus";
    case ElectrodeRole::DcCentral: return "dc_central";
    case ElectrodeRole::DcSide: return "dc_side";
    case ElectrodeRole::DcEdge: return "dc_edge";
    case ElectrodeRole::Ground: return "ground";
  }
  return "ground";
}

ElectrodeRole role_from_string(const std::string& s) {
  if (s == "rf_plus") return ElectrodeRole::RfPlus;
  if (s == "rf_minus") return ElectrodeRole::RfMinus;
  if (s == "dc_central") return ElectrodeRole::DcCentral;
  if (s == "dc_side") return ElectrodeRole::DcSide;
  if (s == "dc_edge") return ElectrodeRole::DcEdge;
  if (s == "ground") return ElectrodeRole::Ground;
  throw ConfigError("unknown electrode role: " + s);
}

void Electrode::normalize() {
  if (corner_a.x() > corner_b.x()) std::swap(corner_a.x(), corner_b.x());
  if (corner_a.y() > corner_b.y()) std::swap(corner_a.y(), corner_b.y());
}

double RfDrive::period() const { return 2.0 * constants::kPi / omega_rf; }

int RfDrive::phase_sign(ElectrodeRole role) const {
  if (role == ElectrodeRole::RfPlus) return 1;
  if (role == ElectrodeRole::RfMinus) return -1;
  return 0;
}

double Species::charge_coulomb() const {
  return charge * constants::kElementaryCharge;
}

Species Species::ca40() {
  return {constants::kMassCa40Amu * constants::kAtomicMassUnit, 1, "Ca40"};
}

Species Species::be9() {
  return {constants::kMassBe9Amu * constants::kAtomicMassUnit, 1, "Be9"};
}

TrapLayout::TrapLayout(std::vector<Electrode> electrodes, RfDrive drive)
    : electrodes_(std::move(electrodes)), drive_(drive) {
  for (auto& e : electrodes_) e.normalize();
  validate();
  rebuild_index();
}

namespace {

bool interiors_overlap(const Electrode& a, const Electrode& b) {
  const double ox = std::min(a.corner_b.x(), b.corner_b.x()) -
                    std::max(a.corner_a.x(), b.corner_a.x());
  const double oy = std::min(a.corner_b.y(), b.corner_b.y()) -
                    std::max(a.corner_a.y(), b.corner_a.y());
  // Shared edges are fine; require a strictly positive intersection area.
  const double tol = 1e-12;
  return ox > tol && oy > tol;
}

} // namespace

void TrapLayout::validate() const {
  for (const auto& e : electrodes_) {
    if (!(e.width_x() > 0.0) || !(e.width_y() > 0.0))
      throw ConfigError("electrode '" + e.id + "' has degenerate corners");
  }
  for (size_t i = 0; i < electrodes_.size(); ++i)
    for (size_t j = i + 1; j < electrodes_.size(); ++j)
      if (interiors_overlap(electrodes_[i], electrodes_[j]))
        throw ConfigError("electrodes '" + electrodes_[i].id + "' and '" +
                          electrodes_[j].id + "' overlap");
  bool has_rf = false;
  for (const auto& e : electrodes_) has_rf |= is_rf(e.role);
  if (has_rf) {
    if (!(drive_.v_rf > 0.0)) throw ConfigError("rf drive requires v_rf > 0");
    if (!(drive_.omega_rf > 0.0))
      throw ConfigError("rf drive requires omega_rf > 0");
  }
}

void TrapLayout::rebuild_index() {
  dc_.clear();
  rf_.clear();
  for (int i = 0; i < static_cast<int>(electrodes_.size()); ++i) {
    if (is_dc(electrodes_[i].role)) dc_.push_back(i);
    if (is_rf(electrodes_[i].role)) rf_.push_back(i);
  }
}

std::vector<std::string> TrapLayout::dc_electrode_ids() const {
  std::vector<std::string> ids;
  ids.reserve(dc_.size());
  for (int i : dc_) ids.push_back(electrodes_[i].id);
  return ids;
}

int TrapLayout::index_of(const std::string& id) const {
  for (int i = 0; i < static_cast<int>(electrodes_.size()); ++i)
    if (electrodes_[i].id == id) return i;
  return -1;
}

TrapLayout TrapLayout::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("layout parse error: ") + e.what());
  }
  std::vector<Electrode> els;
  for (const auto& je : j.at("electrodes")) {
    Electrode e;
    e.id = je.at("id").get<std::string>();
    e.role = role_from_string(je.at("role").get<std::string>());
    e.corner_a = {je.at("xa").get<double>(), je.at("ya").get<double>()};
    e.corner_b = {je.at("xb").get<double>(), je.at("yb").get<double>()};
    els.push_back(e);
  }
  RfDrive drive;
  if (j.contains("drive")) {
    drive.v_rf = j["drive"].value("v_rf", 0.0);
    drive.omega_rf = 2.0 * constants::kPi * j["drive"].value("omega_rf_hz", 0.0);
  }
  return TrapLayout(std::move(els), drive);
}

std::string TrapLayout::to_json_text() const {
  json j;
  j["electrodes"] = json::array();
  for (const auto& e : electrodes_) {
    j["electrodes"].push_back({{"id", e.id},
                               {"role", to_string(e.role)},
                               {"xa", e.corner_a.x()},
                               {"ya", e.corner_a.y()},
                               {"xb", e.corner_b.x()},
                               {"yb", e.corner_b.y()}});
  }
  j["drive"] = {{"v_rf", drive_.v_rf},
                {"omega_rf_hz", drive_.omega_rf / (2.0 * constants::kPi)}};
  return j.dump(2) + "\n";
}

TrapLayout TrapLayout::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open layout file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

void TrapLayout::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write layout file: " + path);
  out << to_json_text();
}

Species load_species(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open species file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("species parse error: ") + e.what());
  }
  Species sp;
  sp.label = j.at("label").get<std::string>();
  sp.mass = j.at("mass_amu").get<double>() * constants::kAtomicMassUnit;
  sp.charge = j.at("charge").get<int>();
  if (!(sp.mass > 0.0)) throw ConfigError("species mass must be positive");
  if (sp.charge < 1) throw ConfigError("species charge must be >= 1");
  return sp;
}

void save_species(const Species& sp, const std::string& path) {
  json j = {{"label", sp.label},
            {"mass_amu", sp.mass / constants::kAtomicMassUnit},
            {"charge", sp.charge}};
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write species file: " + path);
  out << j.dump(2) << "\n";
}

std::vector<double> load_dc_voltages(const std::string& path,
                                     const TrapLayout& layout) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open voltage file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("voltage parse error: ") + e.what());
  }
  std::vector<double> v(layout.dc_indices().size(), 0.0);
  const auto ids = layout.dc_electrode_ids();
  for (auto it = j.begin(); it != j.end(); ++it) {
    auto pos = std::find(ids.begin(), ids.end(), it.key());
    if (pos == ids.end())
      throw ConfigError("voltage file names unknown DC electrode '" +
                        it.key() + "'");
    v[static_cast<size_t>(pos - ids.begin())] = it.value().get<double>();
  }
  return v;
}

void save_dc_voltages(const std::string& path, const TrapLayout& layout,
                      const std::vector<double>& volts) {
  const auto ids = layout.dc_electrode_ids();
  if (volts.size() != ids.size())
    throw ConfigError("voltage vector length does not match DC electrode count");
  json j = json::object();
  for (size_t i = 0; i < ids.size(); ++i) j[ids[i]] = volts[i];
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write voltage file: " + path);
  out << j.dump(2) << "\n";
}

} // namespace iontrap
