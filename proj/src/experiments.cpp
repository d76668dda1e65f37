#include "divkit/experiments.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>

#include <nlohmann/json.hpp>

#include "divkit/binio.hpp"
#include "divkit/errors.hpp"
#include "divkit/rng.hpp"

namespace divkit {

namespace {

double now_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

std::vector<const Task2VecEmbedding*> by_label(const EmbeddingSet& set,
                                               const std::string& label) {
  std::vector<const Task2VecEmbedding*> out;
  for (size_t i = 0; i < set.embeddings.size(); ++i) {
    if (set.labels[i] == label) out.push_back(&set.embeddings[i]);
  }
  return out;
}

std::vector<Task2VecEmbedding> deref(const std::vector<const Task2VecEmbedding*>& ptrs) {
  std::vector<Task2VecEmbedding> out;
  out.reserve(ptrs.size());
  for (auto* p : ptrs) out.push_back(*p);
  return out;
}

}  // namespace

Featurizer make_featurizer(const ProbeSpec& spec, uint32_t vocab_size) {
  switch (spec.featurizer) {
    case FeaturizerKind::random_embedding_mean:
      return Featurizer::random_embedding_mean(vocab_size, spec.m, spec.config.init_seed);
    case FeaturizerKind::hashed_ngram:
      return Featurizer::hashed_ngram(spec.m, spec.config.init_seed);
    case FeaturizerKind::external_stream:
      throw DataError("external_stream featurizers must be constructed from a stream file");
  }
  throw DataError("unknown featurizer kind");
}

PipelineResult run_pipeline(const std::vector<TokenizedCorpus>& datasets,
                            const SamplingPlan& plan, const ProbeSpec& spec,
                            const TokenizedCorpus* reference) {
  if (datasets.empty()) throw DataError("run_pipeline: no datasets");
  const uint32_t vocab_size = datasets.front().vocab_size;
  for (const auto& d : datasets) {
    if (d.vocab_size != vocab_size) {
      throw DataError("run_pipeline: datasets tokenized against different vocabularies");
    }
  }

  PipelineResult result;
  result.batches = sample_batches(datasets, plan);

  const Featurizer featurizer = make_featurizer(spec, vocab_size);
  Head init = Head::zeros(vocab_size, spec.m);
  if (spec.config.pretrained) {
    if (reference == nullptr) {
      throw DataError("run_pipeline: pretrained probe needs a reference corpus");
    }
    init = pretrain_reference(featurizer, init, *reference, spec.pretrain_steps, spec.config,
                              plan.max_len, spec.pretrain_minibatch);
  }

  result.probe_fingerprint = probe_fingerprint(featurizer, spec.config);
  result.embeddings.embeddings =
      embed_batches(result.batches, featurizer, init, spec.config, spec.fim);
  result.embeddings.vocab_size = vocab_size;
  result.embeddings.m = spec.m;
  result.embeddings.labels.reserve(result.batches.size());
  for (const auto& b : result.batches) result.embeddings.labels.push_back(b.label);
  return result;
}

namespace {

/// One sweep point: fresh corpus + batches from seeds derived off the point
/// value, shared probe settings.
SweepPoint ginc_sweep_point(GincConfig config, const SamplingPlan& base_plan,
                            const ProbeSpec& spec, uint32_t x) {
  const double t0 = now_seconds();

  config.seed = mix_seed(config.seed, x);
  SamplingPlan plan = base_plan;
  plan.master_seed = mix_seed(base_plan.master_seed, x);

  const GincCorpus ginc = generate_ginc_corpus(config);

  TokenizedCorpus reference;
  const TokenizedCorpus* ref_ptr = nullptr;
  if (spec.config.pretrained) {
    GincConfig ref_config = config;
    ref_config.seed = mix_seed(config.seed, 0x5efe);
    reference = generate_ginc_corpus(ref_config).corpus;
    ref_ptr = &reference;
  }

  const PipelineResult run = run_pipeline({ginc.corpus}, plan, spec, ref_ptr);
  SweepPoint point;
  point.x = static_cast<double>(x);
  point.coefficient = diversity_coefficient(run.embeddings.embeddings);
  point.runtime_seconds = now_seconds() - t0;
  return point;
}

SweepResult finish_sweep(SweepResult sweep, bool saturating_fit, bool do_fit) {
  std::vector<double> xs, ys;
  for (const auto& p : sweep.points) {
    xs.push_back(p.x);
    ys.push_back(p.coefficient.value);
  }
  sweep.spearman = spearman_rho(xs, ys);
  if (do_fit) {
    sweep.fit = saturating_fit ? fit_saturating(xs, ys) : fit_growth(xs, ys);
  } else {
    sweep.fit.kind = "none";
  }
  return sweep;
}

}  // namespace

SweepResult run_concept_sweep(const GincConfig& base, std::span<const uint32_t> concept_counts,
                              const SamplingPlan& plan, const ProbeSpec& spec) {
  if (concept_counts.size() < 3) throw DataError("concept sweep needs >= 3 points");
  if (!std::is_sorted(concept_counts.begin(), concept_counts.end())) {
    throw DataError("concept sweep: counts must be strictly increasing");
  }
  SweepResult sweep;
  sweep.sweep_variable = "n_concepts";
  for (uint32_t count : concept_counts) {
    GincConfig config = base;
    config.n_concepts = count;
    sweep.points.push_back(ginc_sweep_point(config, plan, spec, count));
  }
  return finish_sweep(std::move(sweep), /*saturating_fit=*/true, /*do_fit=*/true);
}

SweepResult run_vocab_sweep(const GincConfig& base, std::span<const uint32_t> vocab_sizes,
                            const SamplingPlan& plan, const ProbeSpec& spec) {
  if (vocab_sizes.size() < 3) throw DataError("vocab sweep needs >= 3 points");
  if (!std::is_sorted(vocab_sizes.begin(), vocab_sizes.end())) {
    throw DataError("vocab sweep: sizes must be strictly increasing");
  }
  SweepResult sweep;
  sweep.sweep_variable = "vocab_size";
  for (uint32_t size : vocab_sizes) {
    GincConfig config = base;
    config.vocab_size = size;
    sweep.points.push_back(ginc_sweep_point(config, plan, spec, size));
  }
  return finish_sweep(std::move(sweep), /*saturating_fit=*/false, /*do_fit=*/true);
}

SweepResult run_batch_size_sweep(const TokenizedCorpus& corpus,
                                 std::span<const uint32_t> batch_sizes,
                                 const SamplingPlan& base_plan, const ProbeSpec& spec,
                                 const TokenizedCorpus* reference) {
  if (batch_sizes.size() < 2) throw DataError("batch-size sweep needs >= 2 sizes");
  if (!std::is_sorted(batch_sizes.begin(), batch_sizes.end())) {
    throw DataError("batch-size sweep: sizes must be increasing");
  }
  for (uint32_t size : batch_sizes) {
    const uint64_t tokens = static_cast<uint64_t>(size) * base_plan.n_batches *
                            base_plan.max_len;
    if (tokens > 50'000'000ULL) {
      throw DataError("batch-size sweep: requested shape exceeds the 50M-token guard");
    }
  }

  SweepResult sweep;
  sweep.sweep_variable = "batch_size";
  for (uint32_t size : batch_sizes) {
    const double t0 = now_seconds();
    SamplingPlan plan = base_plan;
    plan.batch_size = size;
    plan.master_seed = mix_seed(base_plan.master_seed, size);
    const PipelineResult run = run_pipeline({corpus}, plan, spec, reference);
    SweepPoint point;
    point.x = static_cast<double>(size);
    point.coefficient = diversity_coefficient(run.embeddings.embeddings);
    point.runtime_seconds = now_seconds() - t0;
    sweep.points.push_back(std::move(point));
  }
  return finish_sweep(std::move(sweep), /*saturating_fit=*/false, /*do_fit=*/false);
}

std::vector<double> first_differences(const SweepResult& sweep) {
  std::vector<double> diffs;
  for (size_t i = 1; i < sweep.points.size(); ++i) {
    diffs.push_back(sweep.points[i].coefficient.value -
                    sweep.points[i - 1].coefficient.value);
  }
  return diffs;
}

std::vector<ProbeGridRow> run_probe_config_grid(const TokenizedCorpus& corpus,
                                                const TokenizedCorpus& reference,
                                                const SamplingPlan& plan,
                                                const ProbeSpec& spec) {
  // Shared inputs across the four cells: one batch set, one pretrained head,
  // one fresh-featurizer seed for the random rows.
  const std::vector<Batch> batches = sample_batches({corpus}, plan);

  const Featurizer pretrained_feat = make_featurizer(spec, corpus.vocab_size);
  ProbeSpec random_spec = spec;
  random_spec.config.init_seed = mix_seed(spec.config.init_seed, 0xf2e5);
  const Featurizer random_feat = make_featurizer(random_spec, corpus.vocab_size);

  const Head zero = Head::zeros(corpus.vocab_size, spec.m);
  const Head pretrained = pretrain_reference(pretrained_feat, zero, reference,
                                             spec.pretrain_steps, spec.config, plan.max_len,
                                             spec.pretrain_minibatch);

  std::vector<ProbeGridRow> rows;
  for (const bool use_pretrained : {true, false}) {
    for (const bool use_finetune : {true, false}) {
      ProbeConfig config = spec.config;
      config.pretrained = use_pretrained;
      config.finetune = use_finetune;
      const Featurizer& feat = use_pretrained ? pretrained_feat : random_feat;
      const Head& init = use_pretrained ? pretrained : zero;
      const auto embeddings = embed_batches(batches, feat, init, config, spec.fim);
      ProbeGridRow row;
      row.label = std::string(use_pretrained ? "pt" : "rand") +
                  (use_finetune ? " ft" : " no ft");
      row.coefficient = diversity_coefficient(embeddings);
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

ConcatReport run_concat_study(const std::vector<TokenizedCorpus>& datasets,
                              const SamplingPlan& plan, const ProbeSpec& spec,
                              const TokenizedCorpus* reference) {
  if (datasets.size() < 2) throw DataError("concat study needs >= 2 datasets");
  const size_t k = datasets.size();

  SamplingPlan per_dataset_plan = plan;
  per_dataset_plan.mode = SamplingMode::per_dataset;
  if (per_dataset_plan.n_batches % k != 0) {
    throw DataError("concat study: n_batches must be divisible by the dataset count");
  }
  const PipelineResult pooled_run = run_pipeline(datasets, per_dataset_plan, spec, reference);

  ConcatReport report;
  report.labels = pooled_run.embeddings.labels;
  report.table = pairwise_table(pooled_run.embeddings.embeddings, report.labels);
  report.pooled = diversity_coefficient(pooled_run.embeddings.embeddings);

  for (const auto& dataset : datasets) {
    const auto group = deref(by_label(pooled_run.embeddings, dataset.label));
    report.per_dataset.emplace_back(dataset.label, diversity_coefficient(group));
  }
  for (size_t a = 0; a < k; ++a) {
    for (size_t b = a + 1; b < k; ++b) {
      const auto ga = deref(by_label(pooled_run.embeddings, datasets[a].label));
      const auto gb = deref(by_label(pooled_run.embeddings, datasets[b].label));
      report.cross_pairs.emplace_back(datasets[a].label + "|" + datasets[b].label,
                                      cross_diversity_coefficient(ga, gb));
    }
  }

  // Arithmetic identity: the pooled mean distance must equal the
  // pair-count-weighted mean of the within- and cross-group means.
  double weighted = 0.0;
  uint64_t total_pairs = 0;
  for (const auto& [label, coeff] : report.per_dataset) {
    weighted += coeff.value * static_cast<double>(coeff.n_pairs);
    total_pairs += coeff.n_pairs;
  }
  for (const auto& [label, coeff] : report.cross_pairs) {
    weighted += coeff.value * static_cast<double>(coeff.n_pairs);
    total_pairs += coeff.n_pairs;
  }
  if (total_pairs != report.pooled.n_pairs) {
    throw NumericError("concat study: pair accounting mismatch");
  }
  const double recombined = weighted / static_cast<double>(total_pairs);
  if (std::abs(recombined - report.pooled.value) >
      1e-9 * std::max(1.0, std::abs(report.pooled.value))) {
    throw NumericError("concat study: pooled diversity violates the concatenation identity");
  }

  // Union-mode comparison run: same totals, uniform mixture.
  SamplingPlan union_plan = plan;
  union_plan.mode = SamplingMode::union_mode;
  union_plan.mixture_weights.assign(k, 1.0 / static_cast<double>(k));
  union_plan.master_seed = mix_seed(plan.master_seed, 0x0111);
  const PipelineResult union_run = run_pipeline(datasets, union_plan, spec, reference);
  report.union_mode = diversity_coefficient(union_run.embeddings.embeddings);

  return report;
}

namespace {

std::string format_double(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

}  // namespace

void write_sweep_json(const std::string& path, const SweepResult& sweep,
                      const std::string& config_echo_json) {
  nlohmann::ordered_json doc;
  doc["sweep_variable"] = sweep.sweep_variable;
  doc["spearman"] = sweep.spearman;
  nlohmann::ordered_json points = nlohmann::ordered_json::array();
  for (const auto& p : sweep.points) {
    points.push_back({{"x", p.x},
                      {"value", p.coefficient.value},
                      {"ci_half_width", p.coefficient.ci_half_width},
                      {"n_pairs", p.coefficient.n_pairs},
                      {"runtime_seconds", p.runtime_seconds}});
  }
  doc["points"] = std::move(points);
  doc["fit"] = {{"kind", sweep.fit.kind},
                {"params", sweep.fit.params},
                {"r_squared", sweep.fit.r_squared},
                {"converged", sweep.fit.converged}};
  if (sweep.sweep_variable == "batch_size") {
    doc["first_differences"] = first_differences(sweep);
  }
  doc["config_echo"] = config_echo_json.empty()
                           ? nlohmann::ordered_json::object()
                           : nlohmann::ordered_json::parse(config_echo_json);
  write_file_bytes(path, doc.dump(2) + "\n");
}

void write_sweep_csv(const std::string& path, const SweepResult& sweep) {
  std::string out = "x,value,ci_half_width,n_pairs\n";
  for (const auto& p : sweep.points) {
    out += format_double(p.x);
    out += ',';
    out += format_double(p.coefficient.value);
    out += ',';
    out += format_double(p.coefficient.ci_half_width);
    out += ',';
    out += std::to_string(p.coefficient.n_pairs);
    out += '\n';
  }
  write_file_bytes(path, out);
}

}  // namespace divkit
