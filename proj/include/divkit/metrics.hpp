#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "divkit/task2vec.hpp"

namespace divkit {

struct DistanceRecord {
  uint32_t i = 0;  // always i < j
  uint32_t j = 0;
  std::string source_i;
  std::string source_j;
  double distance = 0.0;
};

enum class CoefficientKind { diversity, cross_diversity, alignment };

const char* coefficient_kind_name(CoefficientKind kind);

struct CoefficientResult {
  double value = 0.0;
  double ci_half_width = 0.0;  // 95% normal-approximation interval
  uint64_t n_pairs = 0;
  CoefficientKind kind = CoefficientKind::diversity;
};

/// 1 - a.b / (|a| |b|). Throws DataError on zero-norm input.
double cosine_distance(std::span<const double> a, std::span<const double> b);

/// Distances for all unordered pairs i < j, in pair-index order (0-1, 0-2,
/// ..., 1-2, ...). The parallel version fills disjoint slots and is
/// byte-identical to the serial reference for any thread count.
std::vector<double> pairwise_distances(std::span<const Task2VecEmbedding> embeddings);
std::vector<double> pairwise_distances_serial(std::span<const Task2VecEmbedding> embeddings);

/// Mean cosine distance over all unordered pairs; ci_half_width is
/// 1.96 s / sqrt(n_pairs) with s the sample standard deviation of the pair
/// distances (0 when only one pair exists).
CoefficientResult diversity_coefficient(std::span<const Task2VecEmbedding> embeddings);

/// Mean over all |A| x |B| cross pairs.
CoefficientResult cross_diversity_coefficient(std::span<const Task2VecEmbedding> a,
                                              std::span<const Task2VecEmbedding> b);

/// 1 - cross diversity, same interval width.
CoefficientResult alignment_coefficient(std::span<const Task2VecEmbedding> a,
                                        std::span<const Task2VecEmbedding> b);

/// All unordered pairs with their source labels attached.
std::vector<DistanceRecord> pairwise_table(std::span<const Task2VecEmbedding> embeddings,
                                           std::span<const std::string> labels);

/// Number of distinct unordered (source_i, source_j) label pairs; k source
/// datasets yield k(k+1)/2 groups.
size_t count_label_groups(const std::vector<DistanceRecord>& records);

struct HistogramBin {
  double lo = 0.0;
  double hi = 0.0;
  uint64_t count = 0;
};

struct DistributionSummary {
  double mean = 0.0;
  double stddev = 0.0;           // sample standard deviation
  double skewness = 0.0;         // 0 by convention for degenerate input
  double excess_kurtosis = 0.0;  // 0 by convention for degenerate input
  double min = 0.0;
  double max = 0.0;
  std::vector<HistogramBin> histogram;
};

/// Freedman-Diaconis bins; when the IQR is zero the width falls back to
/// range / ceil(sqrt(n)), and all-equal input yields a single bin.
DistributionSummary distribution_summary(std::span<const double> values);

/// CSV with header i,j,source_i,source_j,distance.
void write_distances_csv(const std::string& path, const std::vector<DistanceRecord>& records);
std::vector<DistanceRecord> read_distances_csv(const std::string& path);

/// {kind, value, ci_half_width, n_pairs, probe_fingerprint, config_echo}.
void write_coefficient_json(const std::string& path, const CoefficientResult& result,
                            const std::string& probe_fingerprint_hex,
                            const std::string& config_echo_json);

}  // namespace divkit
