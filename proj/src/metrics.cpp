#include "divkit/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "divkit/binio.hpp"
#include "divkit/errors.hpp"
#include "divkit/parallel.hpp"

namespace divkit {

const char* coefficient_kind_name(CoefficientKind kind) {
  switch (kind) {
    case CoefficientKind::diversity: return "diversity";
    case CoefficientKind::cross_diversity: return "cross_diversity";
    case CoefficientKind::alignment: return "alignment";
  }
  return "?";
}

double cosine_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DataError("cosine_distance: dimension mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na <= 0.0 || nb <= 0.0) throw DataError("cosine_distance: zero-norm embedding");
  return 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
}

namespace {

std::vector<std::pair<uint32_t, uint32_t>> pair_index(size_t n) {
  std::vector<std::pair<uint32_t, uint32_t>> pairs;
  pairs.reserve(n * (n - 1) / 2);
  for (uint32_t i = 0; i + 1 < n; ++i) {
    for (uint32_t j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
  }
  return pairs;
}

struct MeanCi {
  double mean = 0.0;
  double ci = 0.0;
};

// Serial reduction in index order; the callers rely on this being
// independent of how the distances were produced.
MeanCi mean_ci(std::span<const double> distances) {
  const size_t n = distances.size();
  double total = 0.0;
  for (double d : distances) total += d;
  const double mean = total / static_cast<double>(n);
  if (n < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double d : distances) ss += (d - mean) * (d - mean);
  const double s = std::sqrt(ss / static_cast<double>(n - 1));
  return {mean, 1.96 * s / std::sqrt(static_cast<double>(n))};
}

}  // namespace

std::vector<double> pairwise_distances(std::span<const Task2VecEmbedding> embeddings) {
  const auto pairs = pair_index(embeddings.size());
  std::vector<double> out(pairs.size());
  parallel_for(pairs.size(), [&](size_t k) {
    out[k] = cosine_distance(embeddings[pairs[k].first].values,
                             embeddings[pairs[k].second].values);
  });
  return out;
}

std::vector<double> pairwise_distances_serial(std::span<const Task2VecEmbedding> embeddings) {
  const auto pairs = pair_index(embeddings.size());
  std::vector<double> out(pairs.size());
  for (size_t k = 0; k < pairs.size(); ++k) {
    out[k] = cosine_distance(embeddings[pairs[k].first].values,
                             embeddings[pairs[k].second].values);
  }
  return out;
}

CoefficientResult diversity_coefficient(std::span<const Task2VecEmbedding> embeddings) {
  if (embeddings.size() < 2) throw DataError("diversity needs at least 2 embeddings");
  const auto distances = pairwise_distances(embeddings);
  const auto [mean, ci] = mean_ci(distances);
  return {mean, ci, distances.size(), CoefficientKind::diversity};
}

CoefficientResult cross_diversity_coefficient(std::span<const Task2VecEmbedding> a,
                                              std::span<const Task2VecEmbedding> b) {
  if (a.empty() || b.empty()) throw DataError("cross diversity needs nonempty sets");
  std::vector<double> distances(a.size() * b.size());
  parallel_for(distances.size(), [&](size_t k) {
    const size_t i = k / b.size();
    const size_t j = k % b.size();
    distances[k] = cosine_distance(a[i].values, b[j].values);
  });
  const auto [mean, ci] = mean_ci(distances);
  return {mean, ci, distances.size(), CoefficientKind::cross_diversity};
}

CoefficientResult alignment_coefficient(std::span<const Task2VecEmbedding> a,
                                        std::span<const Task2VecEmbedding> b) {
  CoefficientResult r = cross_diversity_coefficient(a, b);
  r.value = 1.0 - r.value;
  r.kind = CoefficientKind::alignment;
  return r;
}

std::vector<DistanceRecord> pairwise_table(std::span<const Task2VecEmbedding> embeddings,
                                           std::span<const std::string> labels) {
  if (embeddings.size() < 2) throw DataError("pairwise_table needs at least 2 embeddings");
  if (labels.size() != embeddings.size()) {
    throw DataError("pairwise_table: label count mismatch");
  }
  const auto pairs = pair_index(embeddings.size());
  const auto distances = pairwise_distances(embeddings);
  std::vector<DistanceRecord> records(pairs.size());
  for (size_t k = 0; k < pairs.size(); ++k) {
    const auto [i, j] = pairs[k];
    records[k] = {i, j, labels[i], labels[j], distances[k]};
  }
  return records;
}

size_t count_label_groups(const std::vector<DistanceRecord>& records) {
  std::vector<std::pair<std::string, std::string>> groups;
  for (const auto& r : records) {
    auto g = std::minmax(r.source_i, r.source_j);
    std::pair<std::string, std::string> key{g.first, g.second};
    if (std::find(groups.begin(), groups.end(), key) == groups.end()) groups.push_back(key);
  }
  return groups.size();
}

DistributionSummary distribution_summary(std::span<const double> values) {
  const size_t n = values.size();
  if (n < 2) throw DataError("distribution_summary needs at least 2 values");

  DistributionSummary s;
  double total = 0.0;
  s.min = values[0];
  s.max = values[0];
  for (double v : values) {
    total += v;
    s.min = std::min(s.min, v);
    s.max = std::max(s.max, v);
  }
  s.mean = total / static_cast<double>(n);

  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double v : values) {
    const double d = v - s.mean;
    m2 += d * d;
    m3 += d * d * d;
    m4 += d * d * d * d;
  }
  s.stddev = std::sqrt(m2 / static_cast<double>(n - 1));
  m2 /= static_cast<double>(n);
  m3 /= static_cast<double>(n);
  m4 /= static_cast<double>(n);
  if (m2 > 0.0) {
    s.skewness = m3 / std::pow(m2, 1.5);
    s.excess_kurtosis = m4 / (m2 * m2) - 3.0;
  }

  // Histogram: Freedman-Diaconis width, sqrt rule when the IQR collapses.
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(n - 1);
    const size_t lo = static_cast<size_t>(pos);
    const size_t hi = std::min(lo + 1, n - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
  };

  const double range = s.max - s.min;
  if (range <= 0.0) {
    s.histogram.push_back({s.min, s.max, n});
    return s;
  }
  double width = 2.0 * (quantile(0.75) - quantile(0.25)) /
                 std::cbrt(static_cast<double>(n));
  if (width <= 0.0) {
    width = range / std::ceil(std::sqrt(static_cast<double>(n)));
  }
  size_t bins = static_cast<size_t>(std::ceil(range / width));
  bins = std::clamp<size_t>(bins, 1, 10000);
  width = range / static_cast<double>(bins);

  s.histogram.resize(bins);
  for (size_t i = 0; i < bins; ++i) {
    s.histogram[i].lo = s.min + width * static_cast<double>(i);
    s.histogram[i].hi = s.min + width * static_cast<double>(i + 1);
  }
  s.histogram.back().hi = s.max;  // last bin inclusive
  for (double v : sorted) {
    size_t idx = static_cast<size_t>((v - s.min) / width);
    if (idx >= bins) idx = bins - 1;
    ++s.histogram[idx].count;
  }
  return s;
}

namespace {

std::string format_double(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

}  // namespace

void write_distances_csv(const std::string& path, const std::vector<DistanceRecord>& records) {
  std::string out = "i,j,source_i,source_j,distance\n";
  for (const auto& r : records) {
    out += std::to_string(r.i);
    out += ',';
    out += std::to_string(r.j);
    out += ',';
    out += r.source_i;
    out += ',';
    out += r.source_j;
    out += ',';
    out += format_double(r.distance);
    out += '\n';
  }
  write_file_bytes(path, out);
}

std::vector<DistanceRecord> read_distances_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("missing file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw DataError(path + ": empty csv");
  if (line != "i,j,source_i,source_j,distance") {
    throw DataError(path + ": unexpected csv header");
  }
  std::vector<DistanceRecord> records;
  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    DistanceRecord r;
    std::string cell;
    try {
      std::getline(fields, cell, ',');
      r.i = static_cast<uint32_t>(std::stoul(cell));
      std::getline(fields, cell, ',');
      r.j = static_cast<uint32_t>(std::stoul(cell));
      std::getline(fields, r.source_i, ',');
      std::getline(fields, r.source_j, ',');
      std::getline(fields, cell, ',');
      r.distance = std::stod(cell);
    } catch (const std::exception&) {
      throw DataError(path + ":" + std::to_string(line_no) + ": malformed csv row");
    }
    records.push_back(std::move(r));
  }
  return records;
}

void write_coefficient_json(const std::string& path, const CoefficientResult& result,
                            const std::string& probe_fingerprint_hex,
                            const std::string& config_echo_json) {
  nlohmann::ordered_json doc;
  doc["kind"] = coefficient_kind_name(result.kind);
  doc["value"] = result.value;
  doc["ci_half_width"] = result.ci_half_width;
  doc["n_pairs"] = result.n_pairs;
  doc["probe_fingerprint"] = probe_fingerprint_hex;
  doc["config_echo"] = config_echo_json.empty()
                           ? nlohmann::ordered_json::object()
                           : nlohmann::ordered_json::parse(config_echo_json);
  write_file_bytes(path, doc.dump(2) + "\n");
}

}  // namespace divkit
