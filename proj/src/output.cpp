#include "iontrap/output.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "iontrap/errors.hpp"

namespace iontrap {

std::string MetaInfo::comment_line() const {
  std::ostringstream ss;
  ss << "# iontrap " << tool_version << " config=" << std::hex << config_hash
     << std::dec << " seed=" << seed;
  return ss.str();
}

std::uint64_t fnv1a_hash(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t hash_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open file for hashing: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return fnv1a_hash(ss.str());
}

namespace {

std::string rgb(int r, int g, int b) {
  char buf[8];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, b);
  return buf;
}

std::ofstream open_svg(const std::string& path, int w, int h,
                       const MetaInfo& meta) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write svg file: " + path);
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<!-- " << meta.comment_line().substr(2) << " -->\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w
      << "\" height=\"" << h << "\" viewBox=\"0 0 " << w << ' ' << h
      << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  return out;
}

void svg_text(std::ofstream& out, double x, double y, const std::string& s,
              int size = 11, const char* anchor = "start") {
  out << "<text x=\"" << x << "\" y=\"" << y << "\" font-size=\"" << size
      << "\" font-family=\"sans-serif\" text-anchor=\"" << anchor << "\">" << s
      << "</text>\n";
}

} // namespace

std::string diverging_color(double v) {
  v = std::clamp(v, -1.0, 1.0);
  // blue (-1) -> white (0) -> red (+1)
  if (v < 0.0) {
    const double t = 1.0 + v;
    return rgb(static_cast<int>(33 + t * (255 - 33)),
               static_cast<int>(102 + t * (255 - 102)),
               static_cast<int>(172 + t * (255 - 172)));
  }
  const double t = 1.0 - v;
  return rgb(static_cast<int>(178 + t * (255 - 178)),
             static_cast<int>(24 + t * (255 - 24)),
             static_cast<int>(43 + t * (255 - 43)));
}

std::string sequential_color(double v) {
  v = std::clamp(v, 0.0, 1.0);
  // dark violet -> yellow
  const int r = static_cast<int>(68 + v * (253 - 68));
  const int g = static_cast<int>(1 + v * (231 - 1));
  const int b = static_cast<int>(84 + v * (37 - 84));
  return rgb(r, g, b);
}

void svg_heatmap(const std::string& path, const Eigen::MatrixXd& ion_by_mode,
                 const std::vector<std::string>& right_labels,
                 const std::string& title, const MetaInfo& meta) {
  const int n_ions = static_cast<int>(ion_by_mode.rows());
  const int n_modes = static_cast<int>(ion_by_mode.cols());
  const int cell = 22;
  const int left = 60, top = 40, right = 110, bottom = 40;
  const int w = left + n_ions * cell + right;
  const int h = top + n_modes * cell + bottom;
  auto out = open_svg(path, w, h, meta);
  svg_text(out, left, 22, title, 13);

  for (int m = 0; m < n_modes; ++m) {
    for (int i = 0; i < n_ions; ++i) {
      out << "<rect x=\"" << left + i * cell << "\" y=\"" << top + m * cell
          << "\" width=\"" << cell << "\" height=\"" << cell << "\" fill=\""
          << diverging_color(ion_by_mode(i, m))
          << "\" stroke=\"#888\" stroke-width=\"0.5\"/>\n";
    }
    if (m < static_cast<int>(right_labels.size()))
      svg_text(out, left + n_ions * cell + 8, top + m * cell + cell / 2 + 4,
               right_labels[m], 10);
  }
  for (int i = 0; i < n_ions; ++i)
    svg_text(out, left + i * cell + cell / 2, top + n_modes * cell + 16,
             std::to_string(i + 1), 10, "middle");
  svg_text(out, left + n_ions * cell / 2, h - 8, "ion", 11, "middle");
  svg_text(out, 16, top + n_modes * cell / 2, "mode", 11);
  out << "</svg>\n";
}

void svg_field_map(const std::string& path, const Eigen::MatrixXd& values,
                   double x0, double x1, double y0, double y1,
                   const std::vector<Eigen::Vector2d>& markers,
                   const std::string& title, const MetaInfo& meta) {
  const int nx = static_cast<int>(values.rows());
  const int ny = static_cast<int>(values.cols());
  const int plot_w = 720;
  const int plot_h = std::max(120, plot_w * ny / std::max(1, nx));
  const int left = 50, top = 40;
  const int w = left + plot_w + 30;
  const int h = top + plot_h + 40;
  auto out = open_svg(path, w, h, meta);
  svg_text(out, left, 22, title, 13);

  double vmin = values.minCoeff(), vmax = values.maxCoeff();
  if (vmax <= vmin) vmax = vmin + 1.0;
  const double cw = double(plot_w) / nx;
  const double ch = double(plot_h) / ny;
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < ny; ++j) {
      const double t = (values(i, j) - vmin) / (vmax - vmin);
      out << "<rect x=\"" << left + i * cw << "\" y=\"" << top + (ny - 1 - j) * ch
          << "\" width=\"" << cw + 0.5 << "\" height=\"" << ch + 0.5
          << "\" fill=\"" << sequential_color(t) << "\"/>\n";
    }
  for (const auto& mk : markers) {
    const double px = left + (mk.x() - x0) / (x1 - x0) * plot_w;
    const double py = top + plot_h - (mk.y() - y0) / (y1 - y0) * plot_h;
    out << "<circle cx=\"" << px << "\" cy=\"" << py
        << "\" r=\"3\" fill=\"none\" stroke=\"white\" stroke-width=\"1.5\"/>\n";
  }
  svg_text(out, left, h - 10,
           "range [" + std::to_string(vmin) + ", " + std::to_string(vmax) + "]",
           10);
  out << "</svg>\n";
}

void svg_log_plot(const std::string& path, const std::vector<double>& x,
                  const std::vector<double>& y, const std::string& title,
                  const std::string& x_label, const MetaInfo& meta) {
  const int w = 860, h = 420;
  const int left = 70, top = 40, right = 20, bottom = 50;
  auto out = open_svg(path, w, h, meta);
  svg_text(out, left, 22, title, 13);

  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (size_t k = 0; k < x.size(); ++k) {
    if (!std::isfinite(y[k]) || y[k] <= 0.0) continue;
    xmin = std::min(xmin, x[k]);
    xmax = std::max(xmax, x[k]);
    ymin = std::min(ymin, y[k]);
    ymax = std::max(ymax, y[k]);
  }
  if (xmax <= xmin || ymax <= ymin) {
    svg_text(out, left, h / 2, "no finite data", 12);
    out << "</svg>\n";
    return;
  }
  const double ly0 = std::floor(std::log10(ymin));
  const double ly1 = std::ceil(std::log10(ymax));
  auto px = [&](double xv) {
    return left + (xv - xmin) / (xmax - xmin) * (w - left - right);
  };
  auto py = [&](double yv) {
    return top + (ly1 - std::log10(yv)) / (ly1 - ly0) * (h - top - bottom);
  };

  for (int d = static_cast<int>(ly0); d <= static_cast<int>(ly1); ++d) {
    const double yy = py(std::pow(10.0, d));
    out << "<line x1=\"" << left << "\" y1=\"" << yy << "\" x2=\"" << w - right
        << "\" y2=\"" << yy << "\" stroke=\"#ddd\"/>\n";
    svg_text(out, 8, yy + 4, "1e" + std::to_string(d), 10);
  }

  bool open = false;
  std::ostringstream pts;
  auto flush = [&] {
    if (open) {
      out << "<polyline fill=\"none\" stroke=\"#c0392b\" stroke-width=\"1\" "
             "points=\""
          << pts.str() << "\"/>\n";
      pts.str("");
      open = false;
    }
  };
  for (size_t k = 0; k < x.size(); ++k) {
    if (!std::isfinite(y[k]) || y[k] <= 0.0) {
      flush();
      continue;
    }
    pts << px(x[k]) << ',' << py(y[k]) << ' ';
    open = true;
  }
  flush();
  svg_text(out, (left + w - right) / 2, h - 14, x_label, 11, "middle");
  out << "</svg>\n";
}

void svg_pulse_plot(const std::string& path, const Eigen::VectorXd& omega_s_hz,
                    const std::string& title, const MetaInfo& meta) {
  const int n = static_cast<int>(omega_s_hz.size());
  const int w = 560, h = 320;
  const int left = 70, top = 40, bottom = 40;
  auto out = open_svg(path, w, h, meta);
  svg_text(out, left, 22, title, 13);
  const double vmax = std::max(1.0, omega_s_hz.cwiseAbs().maxCoeff());
  const double mid = top + (h - top - bottom) / 2.0;
  const double bar_w = double(w - left - 30) / n;
  out << "<line x1=\"" << left << "\" y1=\"" << mid << "\" x2=\"" << w - 20
      << "\" y2=\"" << mid << "\" stroke=\"#888\"/>\n";
  for (int s = 0; s < n; ++s) {
    const double hgt = omega_s_hz[s] / vmax * (h - top - bottom) / 2.0;
    const double y = hgt >= 0 ? mid - hgt : mid;
    out << "<rect x=\"" << left + s * bar_w + 2 << "\" y=\"" << y
        << "\" width=\"" << bar_w - 4 << "\" height=\"" << std::abs(hgt)
        << "\" fill=\"#2980b9\"/>\n";
    svg_text(out, left + s * bar_w + bar_w / 2, h - 20, std::to_string(s + 1),
             10, "middle");
  }
  svg_text(out, 10, top + 10,
           "max " + std::to_string(vmax / 1e6) + " MHz", 10);
  svg_text(out, (left + w) / 2, h - 4, "interval", 11, "middle");
  out << "</svg>\n";
}

void write_grid_csv(const std::string& path, const Eigen::MatrixXd& values,
                    double x0, double x1, double y0, double y1,
                    const std::string& col_a, const std::string& col_b,
                    const MetaInfo& meta) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write csv file: " + path);
  out << meta.comment_line() << '\n';
  out << col_a << ',' << col_b << ",value\n";
  out.precision(10);
  const int nx = static_cast<int>(values.rows());
  const int ny = static_cast<int>(values.cols());
  for (int i = 0; i < nx; ++i) {
    const double xa = nx > 1 ? x0 + (x1 - x0) * i / (nx - 1) : x0;
    for (int j = 0; j < ny; ++j) {
      const double yb = ny > 1 ? y0 + (y1 - y0) * j / (ny - 1) : y0;
      out << xa << ',' << yb << ',' << values(i, j) << '\n';
    }
  }
}

} // namespace iontrap
