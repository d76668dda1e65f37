#pragma once

#include <string>
#include <vector>

#include "divkit/metrics.hpp"

namespace divkit {

/// Static SVG renderings, no scripts, byte-deterministic for identical
/// inputs. Styling is intentionally minimal: one palette, fixed canvas.

/// Overlaid per-group histograms of pairwise distances with a legend entry
/// per (source_i, source_j) group.
std::string render_distance_histogram(const std::vector<DistanceRecord>& records,
                                      const std::string& title);

/// One violin (mirrored kernel-density outline) per label group.
std::string render_distance_violins(const std::vector<DistanceRecord>& records,
                                    const std::string& title);

struct CurvePoint {
  double x = 0.0;
  double y = 0.0;
  double ci = 0.0;
};

/// Line chart with error bars and an optional fitted-curve overlay
/// (sampled at 100 x positions).
std::string render_sweep_chart(const std::vector<CurvePoint>& points,
                               const std::vector<CurvePoint>& fit_curve,
                               const std::string& title, const std::string& x_label,
                               const std::string& y_label);

struct ReportOutcome {
  std::vector<std::string> rendered;  // svg files written
  std::vector<std::string> missing;   // inputs listed but unusable
};

/// Scans an artifacts directory for coefficient JSONs, distance CSVs and
/// sweep JSONs, renders SVGs next to an index.html. Unreadable artifacts are
/// listed in the report rather than failing the run; an empty directory
/// produces an empty-state page.
ReportOutcome write_report(const std::string& artifacts_dir, const std::string& out_dir);

}  // namespace divkit
