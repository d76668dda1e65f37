#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "divkit/corpus.hpp"
#include "divkit/fit.hpp"
#include "divkit/ginc.hpp"
#include "divkit/metrics.hpp"
#include "divkit/probe.hpp"
#include "divkit/task2vec.hpp"

namespace divkit {

/// Everything needed to build a probe for a corpus: featurizer family and
/// optimizer settings, plus pretraining budget when config.pretrained.
struct ProbeSpec {
  FeaturizerKind featurizer = FeaturizerKind::random_embedding_mean;
  uint32_t m = 64;
  ProbeConfig config;
  FimMode fim = FimMode::exact();
  uint32_t pretrain_steps = 200;
  uint32_t pretrain_minibatch = 32;
};

Featurizer make_featurizer(const ProbeSpec& spec, uint32_t vocab_size);

/// Shared pipeline: sample batches from the datasets, build the probe
/// (pretraining on `reference` when spec.config.pretrained), fine-tune per
/// batch when configured, and embed. `reference` may be null when
/// pretraining is off.
struct PipelineResult {
  std::vector<Batch> batches;
  EmbeddingSet embeddings;
  uint64_t probe_fingerprint = 0;
};

PipelineResult run_pipeline(const std::vector<TokenizedCorpus>& datasets,
                            const SamplingPlan& plan, const ProbeSpec& spec,
                            const TokenizedCorpus* reference);

struct SweepPoint {
  double x = 0.0;
  CoefficientResult coefficient;
  double runtime_seconds = 0.0;
};

struct SweepResult {
  std::string sweep_variable;
  std::vector<SweepPoint> points;
  FitResult fit;
  double spearman = 0.0;  // rank correlation of diversity vs x
};

/// Diversity vs number of latent concepts, saturating-exponential fit.
/// Every point regenerates its corpus and batches from seeds derived off
/// (base.seed, plan.master_seed, x), so points are independent resamples.
SweepResult run_concept_sweep(const GincConfig& base, std::span<const uint32_t> concept_counts,
                              const SamplingPlan& plan, const ProbeSpec& spec);

/// Diversity vs vocabulary size, exponential fit.
SweepResult run_vocab_sweep(const GincConfig& base, std::span<const uint32_t> vocab_sizes,
                            const SamplingPlan& plan, const ProbeSpec& spec);

/// Diversity vs batch size on a fixed corpus; no curve fit, first
/// differences reported alongside.
SweepResult run_batch_size_sweep(const TokenizedCorpus& corpus,
                                 std::span<const uint32_t> batch_sizes,
                                 const SamplingPlan& base_plan, const ProbeSpec& spec,
                                 const TokenizedCorpus* reference);

struct ProbeGridRow {
  std::string label;  // "pt ft", "pt no ft", "rand ft", "rand no ft"
  CoefficientResult coefficient;
};

/// The four probe configurations {pretrained, random} x {finetune, none},
/// all evaluated on one shared batch set.
std::vector<ProbeGridRow> run_probe_config_grid(const TokenizedCorpus& corpus,
                                                const TokenizedCorpus& reference,
                                                const SamplingPlan& plan,
                                                const ProbeSpec& spec);

struct ConcatReport {
  std::vector<std::pair<std::string, CoefficientResult>> per_dataset;
  std::vector<std::pair<std::string, CoefficientResult>> cross_pairs;  // "A|B" keys
  CoefficientResult pooled;      // diversity over all per-dataset embeddings
  CoefficientResult union_mode;  // diversity of union-sampled batches
  std::vector<DistanceRecord> table;
  std::vector<std::string> labels;  // one per pooled embedding
};

/// Concatenation study over >= 2 datasets: per-dataset diversities, pairwise
/// cross diversities, pooled diversity and the labeled distance table. The
/// pooled value is cross-checked against the pair-count-weighted identity.
ConcatReport run_concat_study(const std::vector<TokenizedCorpus>& datasets,
                              const SamplingPlan& plan, const ProbeSpec& spec,
                              const TokenizedCorpus* reference);

/// First differences of the sweep's diversity values.
std::vector<double> first_differences(const SweepResult& sweep);

/// JSON document with config echo, points, fit and timings, plus a CSV
/// point table.
void write_sweep_json(const std::string& path, const SweepResult& sweep,
                      const std::string& config_echo_json);
void write_sweep_csv(const std::string& path, const SweepResult& sweep);

}  // namespace divkit
