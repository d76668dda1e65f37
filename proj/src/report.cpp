#include "divkit/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <map>

#include <nlohmann/json.hpp>

#include "divkit/binio.hpp"
#include "divkit/errors.hpp"

namespace divkit {

namespace {

constexpr int kWidth = 760;
constexpr int kHeight = 420;
constexpr int kMarginLeft = 70;
constexpr int kMarginRight = 30;
constexpr int kMarginTop = 40;
constexpr int kMarginBottom = 60;

const char* kPalette[] = {"#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3",
                          "#937860", "#da8bc3", "#8c8c8c", "#ccb974", "#64b5cd",
                          "#2f4b7c", "#ff7c43", "#2ca02c", "#d62728", "#9467bd"};
constexpr size_t kPaletteSize = sizeof(kPalette) / sizeof(kPalette[0]);

std::string fmt(double v) {
  if (!std::isfinite(v)) return "0";
  char buf[40];
  const int n = std::snprintf(buf, sizeof(buf), "%.6g", v);
  return std::string(buf, buf + n);
}

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Scale {
  double lo = 0.0, hi = 1.0;
  double pixel_lo = 0.0, pixel_hi = 1.0;
  double at(double v) const {
    const double t = (v - lo) / (hi - lo);
    return pixel_lo + t * (pixel_hi - pixel_lo);
  }
};

std::string svg_header(const std::string& title) {
  std::string out;
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(kWidth) +
         "\" height=\"" + std::to_string(kHeight) + "\" viewBox=\"0 0 " +
         std::to_string(kWidth) + " " + std::to_string(kHeight) + "\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out += "<text x=\"" + std::to_string(kWidth / 2) +
         "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">" +
         escape_xml(title) + "</text>\n";
  return out;
}

void axes(std::string& out, const Scale& xs, const Scale& ys, const std::string& x_label,
          const std::string& y_label) {
  out += "<line x1=\"" + std::to_string(kMarginLeft) + "\" y1=\"" +
         std::to_string(kHeight - kMarginBottom) + "\" x2=\"" +
         std::to_string(kWidth - kMarginRight) + "\" y2=\"" +
         std::to_string(kHeight - kMarginBottom) + "\" stroke=\"black\"/>\n";
  out += "<line x1=\"" + std::to_string(kMarginLeft) + "\" y1=\"" + std::to_string(kMarginTop) +
         "\" x2=\"" + std::to_string(kMarginLeft) + "\" y2=\"" +
         std::to_string(kHeight - kMarginBottom) + "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = xs.lo + (xs.hi - xs.lo) * i / 4.0;
    const double yv = ys.lo + (ys.hi - ys.lo) * i / 4.0;
    out += "<text x=\"" + fmt(xs.at(xv)) + "\" y=\"" +
           std::to_string(kHeight - kMarginBottom + 18) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" + fmt(xv) +
           "</text>\n";
    out += "<text x=\"" + std::to_string(kMarginLeft - 8) + "\" y=\"" + fmt(ys.at(yv) + 4) +
           "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" + fmt(yv) +
           "</text>\n";
  }
  out += "<text x=\"" + std::to_string((kMarginLeft + kWidth - kMarginRight) / 2) + "\" y=\"" +
         std::to_string(kHeight - 14) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" +
         escape_xml(x_label) + "</text>\n";
  out += "<text x=\"18\" y=\"" + std::to_string((kMarginTop + kHeight - kMarginBottom) / 2) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
         "transform=\"rotate(-90 18 " +
         std::to_string((kMarginTop + kHeight - kMarginBottom) / 2) + ")\">" +
         escape_xml(y_label) + "</text>\n";
}

std::map<std::string, std::vector<double>> group_distances(
    const std::vector<DistanceRecord>& records) {
  std::map<std::string, std::vector<double>> groups;  // sorted keys -> deterministic order
  for (const auto& r : records) {
    const auto key = r.source_i <= r.source_j ? r.source_i + " / " + r.source_j
                                              : r.source_j + " / " + r.source_i;
    groups[key].push_back(r.distance);
  }
  return groups;
}

void legend(std::string& out, const std::vector<std::string>& names) {
  for (size_t g = 0; g < names.size(); ++g) {
    const int y = kMarginTop + static_cast<int>(g) * 16;
    out += "<rect x=\"" + std::to_string(kWidth - kMarginRight - 170) + "\" y=\"" +
           std::to_string(y) + "\" width=\"10\" height=\"10\" fill=\"" +
           kPalette[g % kPaletteSize] + "\"/>\n";
    out += "<text x=\"" + std::to_string(kWidth - kMarginRight - 155) + "\" y=\"" +
           std::to_string(y + 9) + "\" font-family=\"sans-serif\" font-size=\"11\">" +
           escape_xml(names[g]) + "</text>\n";
  }
}

}  // namespace

std::string render_distance_histogram(const std::vector<DistanceRecord>& records,
                                      const std::string& title) {
  if (records.empty()) throw DataError("histogram: no records");
  const auto groups = group_distances(records);

  double lo = records.front().distance, hi = lo;
  for (const auto& r : records) {
    lo = std::min(lo, r.distance);
    hi = std::max(hi, r.distance);
  }
  if (hi <= lo) hi = lo + 1e-9;
  const size_t bins = 40;
  const double width = (hi - lo) / static_cast<double>(bins);

  std::vector<std::vector<double>> densities;
  std::vector<std::string> names;
  double peak = 0.0;
  for (const auto& [name, values] : groups) {
    std::vector<double> density(bins, 0.0);
    for (double v : values) {
      size_t idx = static_cast<size_t>((v - lo) / width);
      if (idx >= bins) idx = bins - 1;
      density[idx] += 1.0 / static_cast<double>(values.size());
    }
    for (double d : density) peak = std::max(peak, d);
    densities.push_back(std::move(density));
    names.push_back(name);
  }
  if (peak <= 0.0) peak = 1.0;

  Scale xs{lo, hi, kMarginLeft, static_cast<double>(kWidth - kMarginRight)};
  Scale ys{0.0, peak, static_cast<double>(kHeight - kMarginBottom),
           static_cast<double>(kMarginTop)};

  std::string out = svg_header(title);
  axes(out, xs, ys, "pairwise cosine distance", "relative frequency");
  for (size_t g = 0; g < densities.size(); ++g) {
    std::string path;
    for (size_t i = 0; i < bins; ++i) {
      const double x0 = xs.at(lo + width * static_cast<double>(i));
      const double x1 = xs.at(lo + width * static_cast<double>(i + 1));
      const double y = ys.at(densities[g][i]);
      path += (i == 0 ? "M" : "L") + fmt(x0) + " " + fmt(y) + " L" + fmt(x1) + " " + fmt(y) +
              " ";
    }
    out += "<path d=\"" + path + "\" fill=\"none\" stroke=\"" + kPalette[g % kPaletteSize] +
           "\" stroke-width=\"1.5\"/>\n";
  }
  legend(out, names);
  out += "</svg>\n";
  return out;
}

std::string render_distance_violins(const std::vector<DistanceRecord>& records,
                                    const std::string& title) {
  if (records.empty()) throw DataError("violins: no records");
  const auto groups = group_distances(records);

  double lo = records.front().distance, hi = lo;
  for (const auto& r : records) {
    lo = std::min(lo, r.distance);
    hi = std::max(hi, r.distance);
  }
  if (hi <= lo) hi = lo + 1e-9;
  const double pad = 0.05 * (hi - lo);
  Scale ys{lo - pad, hi + pad, static_cast<double>(kHeight - kMarginBottom),
           static_cast<double>(kMarginTop)};

  const size_t k = groups.size();
  const double slot = static_cast<double>(kWidth - kMarginLeft - kMarginRight) /
                      static_cast<double>(k);
  const double half_width = 0.38 * slot;

  std::string out = svg_header(title);
  Scale xs{0.0, static_cast<double>(k), kMarginLeft,
           static_cast<double>(kWidth - kMarginRight)};
  axes(out, xs, ys, "", "pairwise cosine distance");

  size_t g = 0;
  for (const auto& [name, values] : groups) {
    const double center = kMarginLeft + slot * (static_cast<double>(g) + 0.5);

    // Gaussian KDE with Silverman bandwidth, evaluated on 60 points.
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    var /= std::max<size_t>(values.size() - 1, 1);
    double bw = 1.06 * std::sqrt(var) *
                std::pow(static_cast<double>(values.size()), -0.2);
    if (bw <= 0.0) bw = 0.01 * (hi - lo);

    const size_t grid = 60;
    std::vector<double> density(grid, 0.0);
    double dmax = 0.0;
    for (size_t i = 0; i < grid; ++i) {
      const double y = (lo - pad) + (hi - lo + 2 * pad) * static_cast<double>(i) /
                                        static_cast<double>(grid - 1);
      double d = 0.0;
      for (double v : values) {
        const double z = (y - v) / bw;
        d += std::exp(-0.5 * z * z);
      }
      density[i] = d;
      dmax = std::max(dmax, d);
    }
    if (dmax <= 0.0) dmax = 1.0;

    std::string path;
    for (size_t i = 0; i < grid; ++i) {
      const double y = (lo - pad) + (hi - lo + 2 * pad) * static_cast<double>(i) /
                                        static_cast<double>(grid - 1);
      const double x = center + half_width * density[i] / dmax;
      path += (i == 0 ? "M" : "L") + fmt(x) + " " + fmt(ys.at(y)) + " ";
    }
    for (size_t i = grid; i-- > 0;) {
      const double y = (lo - pad) + (hi - lo + 2 * pad) * static_cast<double>(i) /
                                        static_cast<double>(grid - 1);
      const double x = center - half_width * density[i] / dmax;
      path += "L" + fmt(x) + " " + fmt(ys.at(y)) + " ";
    }
    path += "Z";
    out += "<path d=\"" + path + "\" fill=\"" + kPalette[g % kPaletteSize] +
           "\" fill-opacity=\"0.6\" stroke=\"" + kPalette[g % kPaletteSize] + "\"/>\n";

    out += "<text x=\"" + fmt(center) + "\" y=\"" + std::to_string(kHeight - kMarginBottom + 18) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"9\" "
           "transform=\"rotate(30 " +
           fmt(center) + " " + std::to_string(kHeight - kMarginBottom + 18) + ")\">" +
           escape_xml(name) + "</text>\n";
    ++g;
  }
  out += "</svg>\n";
  return out;
}

std::string render_sweep_chart(const std::vector<CurvePoint>& points,
                               const std::vector<CurvePoint>& fit_curve,
                               const std::string& title, const std::string& x_label,
                               const std::string& y_label) {
  if (points.empty()) throw DataError("sweep chart: no points");
  double xlo = points.front().x, xhi = xlo;
  double ylo = points.front().y - points.front().ci, yhi = points.front().y + points.front().ci;
  for (const auto& p : points) {
    xlo = std::min(xlo, p.x);
    xhi = std::max(xhi, p.x);
    ylo = std::min(ylo, p.y - p.ci);
    yhi = std::max(yhi, p.y + p.ci);
  }
  if (xhi <= xlo) xhi = xlo + 1e-9;
  if (yhi <= ylo) yhi = ylo + 1e-9;
  const double ypad = 0.08 * (yhi - ylo);

  Scale xs{xlo, xhi, kMarginLeft, static_cast<double>(kWidth - kMarginRight)};
  Scale ys{ylo - ypad, yhi + ypad, static_cast<double>(kHeight - kMarginBottom),
           static_cast<double>(kMarginTop)};

  std::string out = svg_header(title);
  axes(out, xs, ys, x_label, y_label);

  if (!fit_curve.empty()) {
    std::string path;
    bool first = true;
    for (const auto& p : fit_curve) {
      if (!std::isfinite(p.y)) continue;
      path += (first ? "M" : "L") + fmt(xs.at(p.x)) + " " + fmt(ys.at(p.y)) + " ";
      first = false;
    }
    out += "<path d=\"" + path + "\" fill=\"none\" stroke=\"#c44e52\" stroke-width=\"1.5\" "
           "stroke-dasharray=\"5 3\"/>\n";
  }

  std::string line;
  for (size_t i = 0; i < points.size(); ++i) {
    line += (i == 0 ? "M" : "L") + fmt(xs.at(points[i].x)) + " " + fmt(ys.at(points[i].y)) + " ";
  }
  out += "<path d=\"" + line + "\" fill=\"none\" stroke=\"#4c72b0\" stroke-width=\"2\"/>\n";
  for (const auto& p : points) {
    const double x = xs.at(p.x);
    out += "<line x1=\"" + fmt(x) + "\" y1=\"" + fmt(ys.at(p.y - p.ci)) + "\" x2=\"" + fmt(x) +
           "\" y2=\"" + fmt(ys.at(p.y + p.ci)) + "\" stroke=\"#4c72b0\"/>\n";
    out += "<circle cx=\"" + fmt(x) + "\" cy=\"" + fmt(ys.at(p.y)) +
           "\" r=\"3\" fill=\"#4c72b0\"/>\n";
  }
  out += "</svg>\n";
  return out;
}

namespace {

struct Artifacts {
  std::vector<std::pair<std::string, nlohmann::json>> coefficients;
  std::vector<std::pair<std::string, nlohmann::json>> sweeps;
  std::vector<std::pair<std::string, std::vector<DistanceRecord>>> distance_tables;
  std::vector<std::string> missing;
};

Artifacts scan_artifacts(const std::string& dir) {
  namespace fs = std::filesystem;
  Artifacts found;
  if (!fs::exists(dir)) return found;

  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file()) files.push_back(entry.path().filename().string());
  }
  std::sort(files.begin(), files.end());

  for (const auto& name : files) {
    const std::string path = dir + "/" + name;
    if (name.size() > 5 && name.substr(name.size() - 5) == ".json") {
      nlohmann::json doc = nlohmann::json::parse(read_file_bytes(path), nullptr, false);
      if (doc.is_discarded() || !doc.is_object()) {
        found.missing.push_back(name + " (unparseable json)");
        continue;
      }
      if (doc.contains("kind") && doc.contains("value")) {
        found.coefficients.emplace_back(name, std::move(doc));
      } else if (doc.contains("points") && doc.contains("sweep_variable")) {
        found.sweeps.emplace_back(name, std::move(doc));
      }
      continue;
    }
    if (name.size() > 4 && name.substr(name.size() - 4) == ".csv") {
      try {
        auto records = read_distances_csv(path);
        if (!records.empty()) found.distance_tables.emplace_back(name, std::move(records));
      } catch (const DataError&) {
        // Not a distances table (e.g. a sweep point csv); skip quietly.
      }
    }
  }
  return found;
}

std::string stem_of(const std::string& name) {
  const auto dot = name.find_last_of('.');
  return dot == std::string::npos ? name : name.substr(0, dot);
}

}  // namespace

ReportOutcome write_report(const std::string& artifacts_dir, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const Artifacts artifacts = scan_artifacts(artifacts_dir);
  ReportOutcome outcome;
  outcome.missing = artifacts.missing;

  std::string html = "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\">"
                     "<title>divkit report</title></head>\n<body>\n";
  html += "<h1>divkit report</h1>\n";

  if (artifacts.coefficients.empty() && artifacts.sweeps.empty() &&
      artifacts.distance_tables.empty()) {
    html += "<p>No artifacts found in " + escape_xml(artifacts_dir) +
            ". Run a coefficient or experiment subcommand first.</p>\n";
  }

  if (!artifacts.coefficients.empty()) {
    html += "<h2>Coefficients</h2>\n<table border=\"1\" cellpadding=\"4\">"
            "<tr><th>file</th><th>kind</th><th>value</th><th>95% ci</th><th>pairs</th></tr>\n";
    for (const auto& [name, doc] : artifacts.coefficients) {
      html += "<tr><td>" + escape_xml(name) + "</td><td>" +
              escape_xml(doc.value("kind", std::string("?"))) + "</td><td>" +
              fmt(doc.value("value", 0.0)) + "</td><td>&plusmn;" +
              fmt(doc.value("ci_half_width", 0.0)) + "</td><td>" +
              std::to_string(doc.value("n_pairs", uint64_t{0})) + "</td></tr>\n";
    }
    html += "</table>\n";
  }

  for (const auto& [name, records] : artifacts.distance_tables) {
    const std::string hist_file = stem_of(name) + ".hist.svg";
    const std::string violin_file = stem_of(name) + ".violin.svg";
    write_file_bytes(out_dir + "/" + hist_file,
                     render_distance_histogram(records, "Pairwise distances: " + stem_of(name)));
    write_file_bytes(out_dir + "/" + violin_file,
                     render_distance_violins(records, "Distance groups: " + stem_of(name)));
    outcome.rendered.push_back(hist_file);
    outcome.rendered.push_back(violin_file);
    html += "<h2>" + escape_xml(name) + "</h2>\n";
    html += "<img src=\"" + hist_file + "\" alt=\"histogram\">\n";
    html += "<img src=\"" + violin_file + "\" alt=\"violins\">\n";
  }

  for (const auto& [name, doc] : artifacts.sweeps) {
    std::vector<CurvePoint> points;
    for (const auto& p : doc["points"]) {
      points.push_back(
          {p.value("x", 0.0), p.value("value", 0.0), p.value("ci_half_width", 0.0)});
    }
    if (points.empty()) {
      outcome.missing.push_back(name + " (no points)");
      continue;
    }
    std::vector<CurvePoint> curve;
    if (doc.contains("fit") && doc["fit"].contains("params")) {
      const std::string kind = doc["fit"].value("kind", std::string("none"));
      std::vector<double> params;
      for (const auto& v : doc["fit"]["params"]) params.push_back(v.get<double>());
      if ((kind == "saturating_exp" || kind == "growth_exp") && params.size() == 3) {
        const double xlo = points.front().x;
        const double xhi = points.back().x;
        for (int i = 0; i < 100; ++i) {
          const double x = xlo + (xhi - xlo) * i / 99.0;
          const double y = kind == "saturating_exp" ? saturating_exp(x, params)
                                                    : growth_exp(x, params);
          curve.push_back({x, y, 0.0});
        }
      }
    }
    const std::string svg_file = stem_of(name) + ".svg";
    write_file_bytes(out_dir + "/" + svg_file,
                     render_sweep_chart(points, curve,
                                        doc.value("sweep_variable", std::string("sweep")),
                                        doc.value("sweep_variable", std::string("x")),
                                        "diversity coefficient"));
    outcome.rendered.push_back(svg_file);
    html += "<h2>" + escape_xml(name) + "</h2>\n<img src=\"" + svg_file +
            "\" alt=\"sweep\">\n";
    if (doc.contains("fit")) {
      html += "<p>fit: " + escape_xml(doc["fit"].value("kind", std::string("none"))) +
              ", R&sup2; = " + fmt(doc["fit"].value("r_squared", 0.0)) + "</p>\n";
    }
  }

  if (!outcome.missing.empty()) {
    html += "<h2>Skipped artifacts</h2>\n<ul>\n";
    for (const auto& m : outcome.missing) html += "<li>" + escape_xml(m) + "</li>\n";
    html += "</ul>\n";
  }
  html += "</body></html>\n";
  write_file_bytes(out_dir + "/index.html", html);
  return outcome;
}

}  // namespace divkit
