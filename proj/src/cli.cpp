#include "divkit/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "divkit/binio.hpp"
#include "divkit/bounds.hpp"
#include "divkit/corpus.hpp"
#include "divkit/errors.hpp"
#include "divkit/experiments.hpp"
#include "divkit/ginc.hpp"
#include "divkit/metrics.hpp"
#include "divkit/parallel.hpp"
#include "divkit/probe.hpp"
#include "divkit/report.hpp"
#include "divkit/task2vec.hpp"

namespace divkit {

namespace {

namespace fs = std::filesystem;

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream stream(s);
  while (std::getline(stream, cell, ',')) {
    if (!cell.empty()) out.push_back(cell);
  }
  return out;
}

/// Declared options of one subcommand. Values resolve with precedence
/// explicit flag > config file > default, and the resolved table is the
/// config echo. Unknown config keys are rejected.
class Opts {
 public:
  Opts(CLI::App* cmd, std::string name) : cmd_(cmd), name_(std::move(name)) {}

  void declare(const std::string& key, const std::string& flag, const std::string& def,
               const std::string& help, bool multi = false) {
    auto raw = std::make_unique<std::vector<std::string>>();
    CLI::Option* opt = cmd_->add_option(flag, *raw, help);
    if (multi) opt->take_all();
    entries_.push_back({key, def, std::move(raw), multi});
  }

  void resolve(const nlohmann::json& config) {
    for (auto& e : entries_) {
      if (!e.raw->empty()) {
        e.value = e.multi ? join(*e.raw) : e.raw->back();
      } else if (config.contains(e.key)) {
        e.value = config_string(config[e.key]);
      } else {
        e.value = e.def;
      }
    }
    for (const auto& [key, unused] : config.items()) {
      if (key == "subcommand") continue;
      const bool known = std::any_of(entries_.begin(), entries_.end(),
                                     [&](const Entry& e) { return e.key == key; });
      if (!known) {
        throw UsageError("config key \"" + key + "\" is not valid for subcommand " + name_);
      }
    }
  }

  const std::string& str(const std::string& key) const { return find(key).value; }
  bool has(const std::string& key) const { return !find(key).value.empty(); }

  uint32_t u32(const std::string& key) const {
    return static_cast<uint32_t>(parse_u64(key));
  }
  uint64_t u64(const std::string& key) const { return parse_u64(key); }

  double f64(const std::string& key) const {
    const auto& v = str(key);
    try {
      size_t used = 0;
      const double d = std::stod(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return d;
    } catch (const std::exception&) {
      throw UsageError("option " + key + ": expected a number, got \"" + v + "\"");
    }
  }

  bool boolean(const std::string& key) const {
    const auto& v = str(key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw UsageError("option " + key + ": expected true/false, got \"" + v + "\"");
  }

  std::vector<std::string> list(const std::string& key) const {
    return split_commas(str(key));
  }

  std::vector<uint32_t> u32_list(const std::string& key) const {
    std::vector<uint32_t> out;
    for (const auto& cell : list(key)) out.push_back(parse_u64_str(key, cell));
    return out;
  }

  std::vector<double> f64_list(const std::string& key) const {
    std::vector<double> out;
    for (const auto& cell : list(key)) {
      try {
        out.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw UsageError("option " + key + ": expected numbers, got \"" + cell + "\"");
      }
    }
    return out;
  }

  /// Sorted-key JSON of every resolved option plus the subcommand name.
  nlohmann::json echo() const {
    nlohmann::json doc;
    doc["subcommand"] = name_;
    for (const auto& e : entries_) doc[e.key] = e.value;
    return doc;
  }

  const std::string& name() const { return name_; }

 private:
  struct Entry {
    std::string key;
    std::string def;
    std::unique_ptr<std::vector<std::string>> raw;
    bool multi = false;
    std::string value;
  };

  static std::string join(const std::vector<std::string>& parts) {
    std::string out;
    for (size_t i = 0; i < parts.size(); ++i) {
      if (i) out += ',';
      out += parts[i];
    }
    return out;
  }

  static std::string config_string(const nlohmann::json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    return v.dump();
  }

  uint64_t parse_u64(const std::string& key) const { return parse_u64_str(key, str(key)); }

  uint64_t parse_u64_str(const std::string& key, const std::string& v) const {
    try {
      size_t used = 0;
      const uint64_t n = std::stoull(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return n;
    } catch (const std::exception&) {
      throw UsageError("option " + key + ": expected an integer, got \"" + v + "\"");
    }
  }

  const Entry& find(const std::string& key) const {
    for (const auto& e : entries_) {
      if (e.key == key) return e;
    }
    throw UsageError("internal: undeclared option " + key);
  }

  CLI::App* cmd_;
  std::string name_;
  std::vector<Entry> entries_;
};

void write_echo(const std::string& path, const Opts& opts) {
  write_file_bytes(path, opts.echo().dump(2) + "\n");
}

std::string echo_path_for(const std::string& out_file) {
  return out_file + ".config.json";
}

// ---------------------------------------------------------------------------
// Shared option groups

void declare_corpus_inputs(Opts& o) {
  o.declare("io.input", "--input", "", "input corpus file(s)", /*multi=*/true);
  o.declare("io.label", "--label", "", "dataset label(s), one per input", /*multi=*/true);
  o.declare("io.format", "--format", "plaintext", "input format: plaintext|jsonl");
}

void declare_plan(Opts& o) {
  o.declare("plan.mode", "--mode", "per_dataset", "sampling mode: union|per_dataset");
  o.declare("plan.weights", "--weights", "", "union-mode mixture weights, comma separated");
  o.declare("plan.n_batches", "--n-batches", "30", "number of batches");
  o.declare("plan.batch_size", "--batch-size", "64", "sequences per batch");
  o.declare("plan.max_len", "--max-len", "32", "sequence length after pad/truncate");
  o.declare("seed", "--seed", "0", "master seed; all randomness derives from it");
}

void declare_probe(Opts& o) {
  o.declare("probe.featurizer", "--featurizer", "random_embedding_mean",
            "featurizer: random_embedding_mean|hashed_ngram|external_stream");
  o.declare("probe.m", "--m", "64", "feature dimension");
  o.declare("probe.pretrained", "--pretrained", "true", "pretrain the head on a reference corpus");
  o.declare("probe.finetune", "--finetune", "true", "fine-tune the head per batch");
  o.declare("probe.epochs", "--epochs", "10", "fine-tuning epochs");
  o.declare("probe.lr", "--lr", "0.01", "AdamW learning rate");
  o.declare("probe.weight_decay", "--weight-decay", "0.01", "AdamW weight decay");
  o.declare("probe.beta1", "--beta1", "0.9", "AdamW beta1");
  o.declare("probe.beta2", "--beta2", "0.999", "AdamW beta2");
  o.declare("probe.eps", "--eps", "1e-8", "AdamW epsilon");
  o.declare("probe.pretrain_steps", "--pretrain-steps", "200", "pretraining minibatch steps");
  o.declare("fim.mode", "--fim", "exact", "FIM mode: exact|monte_carlo");
  o.declare("fim.mc_samples", "--mc-samples", "100", "Monte Carlo samples per position");
  o.declare("fim.mc_seed", "--mc-seed", "0", "Monte Carlo seed");
}

SamplingPlan plan_from(const Opts& o) {
  SamplingPlan plan;
  const auto mode = o.str("plan.mode");
  if (mode == "union") {
    plan.mode = SamplingMode::union_mode;
  } else if (mode == "per_dataset") {
    plan.mode = SamplingMode::per_dataset;
  } else {
    throw UsageError("plan.mode must be union or per_dataset, got \"" + mode + "\"");
  }
  if (o.has("plan.weights")) plan.mixture_weights = o.f64_list("plan.weights");
  plan.n_batches = o.u32("plan.n_batches");
  plan.batch_size = o.u32("plan.batch_size");
  plan.max_len = o.u32("plan.max_len");
  plan.master_seed = o.u64("seed");
  return plan;
}

ProbeSpec probe_from(const Opts& o) {
  ProbeSpec spec;
  spec.featurizer = featurizer_kind_from_name(o.str("probe.featurizer"));
  spec.m = o.u32("probe.m");
  spec.config.pretrained = o.boolean("probe.pretrained");
  spec.config.finetune = o.boolean("probe.finetune");
  spec.config.epochs = o.u32("probe.epochs");
  spec.config.learning_rate = o.f64("probe.lr");
  spec.config.weight_decay = o.f64("probe.weight_decay");
  spec.config.beta1 = o.f64("probe.beta1");
  spec.config.beta2 = o.f64("probe.beta2");
  spec.config.eps = o.f64("probe.eps");
  spec.config.init_seed = o.u64("seed");
  spec.pretrain_steps = o.u32("probe.pretrain_steps");
  const auto fim = o.str("fim.mode");
  if (fim == "exact") {
    spec.fim = FimMode::exact();
  } else if (fim == "monte_carlo") {
    spec.fim = FimMode::monte_carlo(o.u32("fim.mc_samples"), o.u64("fim.mc_seed"));
  } else {
    throw UsageError("fim.mode must be exact or monte_carlo, got \"" + fim + "\"");
  }
  return spec;
}

CorpusFormat format_from(const Opts& o) {
  const auto& f = o.str("io.format");
  if (f == "plaintext") return CorpusFormat::plaintext;
  if (f == "jsonl") return CorpusFormat::jsonl;
  throw UsageError("io.format must be plaintext or jsonl, got \"" + f + "\"");
}

// ---------------------------------------------------------------------------
// Vocabulary file: {"tokens": [...], "pad_id": 0, "eos_id": 1}

void write_vocab_json(const std::string& path, const Vocabulary& vocab) {
  nlohmann::ordered_json doc;
  doc["tokens"] = vocab.tokens;
  doc["pad_id"] = vocab.pad_id;
  doc["eos_id"] = vocab.eos_id;
  write_file_bytes(path, doc.dump(2) + "\n");
}

Vocabulary load_vocab_json(const std::string& path) {
  nlohmann::json doc = nlohmann::json::parse(read_file_bytes(path), nullptr, false);
  if (doc.is_discarded() || !doc.contains("tokens") || !doc["tokens"].is_array()) {
    throw DataError(path + ": not a vocabulary file");
  }
  std::vector<std::string> tokens;
  for (const auto& t : doc["tokens"]) tokens.push_back(t.get<std::string>());
  return Vocabulary::from_tokens(std::move(tokens));
}

std::vector<TokenizedCorpus> load_labeled_corpora(const Opts& o, const Vocabulary& vocab) {
  const auto inputs = o.list("io.input");
  auto labels = o.list("io.label");
  if (inputs.empty()) throw UsageError("at least one --input is required");
  if (labels.empty()) {
    for (const auto& path : inputs) labels.push_back(fs::path(path).stem().string());
  }
  if (labels.size() != inputs.size()) {
    throw UsageError("--label count must match --input count");
  }
  const CorpusFormat format = format_from(o);
  std::vector<TokenizedCorpus> corpora;
  for (size_t i = 0; i < inputs.size(); ++i) {
    const auto docs = load_corpus(inputs[i], format);
    if (docs.empty()) throw DataError(inputs[i] + ": corpus is empty");
    corpora.push_back(tokenize_corpus(vocab, docs, labels[i]));
  }
  return corpora;
}

// ---------------------------------------------------------------------------
// Handlers

void run_vocab(const Opts& o) {
  const auto inputs = o.list("io.input");
  if (inputs.empty()) throw UsageError("vocab: at least one --input is required");
  const CorpusFormat format = format_from(o);
  std::vector<std::string> docs;
  for (const auto& path : inputs) {
    auto part = load_corpus(path, format);
    docs.insert(docs.end(), part.begin(), part.end());
  }
  const Vocabulary vocab = build_vocab(docs, o.u32("vocab.max_vocab"));
  const auto& out = o.str("io.out");
  write_vocab_json(out, vocab);
  write_echo(echo_path_for(out), o);
}

void run_batches(const Opts& o) {
  const Vocabulary vocab = load_vocab_json(o.str("io.vocab"));
  const auto corpora = load_labeled_corpora(o, vocab);
  SamplingPlan plan = plan_from(o);
  if (plan.mode == SamplingMode::union_mode && plan.mixture_weights.empty()) {
    plan.mixture_weights.assign(corpora.size(), 1.0 / static_cast<double>(corpora.size()));
  }
  const auto batches = sample_batches(corpora, plan);
  const auto& out = o.str("io.out");
  save_batches(out, batches, vocab.size());
  write_echo(echo_path_for(out), o);
}

void run_embed(const Opts& o) {
  const BatchArchive archive = load_batches(o.str("io.batches"));
  ProbeSpec spec = probe_from(o);

  Featurizer featurizer = [&]() {
    if (spec.featurizer == FeaturizerKind::external_stream) {
      if (!o.has("io.features")) {
        throw UsageError("embed: --features is required for external_stream");
      }
      auto stream = load_external_features(o.str("io.features"));
      if (stream.max_len < archive.max_len) {
        throw DataError("external features cover max_len " + std::to_string(stream.max_len) +
                        " but batches need " + std::to_string(archive.max_len));
      }
      return Featurizer::external_stream(std::move(stream));
    }
    return make_featurizer(spec, archive.vocab_size);
  }();
  if (spec.featurizer == FeaturizerKind::external_stream) spec.m = featurizer.dim();

  Head init = Head::zeros(archive.vocab_size, spec.m);
  if (spec.config.pretrained) {
    if (!o.has("io.reference") || !o.has("io.vocab")) {
      throw UsageError("embed: --pretrained true needs --reference and --vocab");
    }
    const Vocabulary vocab = load_vocab_json(o.str("io.vocab"));
    if (vocab.size() != archive.vocab_size) {
      throw DataError("vocabulary size does not match the batch archive");
    }
    const auto docs = load_corpus(o.str("io.reference"), format_from(o));
    const auto reference = tokenize_corpus(vocab, docs, "reference");
    if (reference.docs.empty()) throw DataError("reference corpus is empty");
    init = pretrain_reference(featurizer, init, reference, spec.pretrain_steps, spec.config,
                              archive.max_len, spec.pretrain_minibatch);
  }

  EmbeddingSet set;
  set.embeddings = embed_batches(archive.batches, featurizer, init, spec.config, spec.fim);
  set.vocab_size = archive.vocab_size;
  set.m = spec.m;
  for (const auto& b : archive.batches) set.labels.push_back(b.label);

  const auto& out = o.str("io.out");
  save_embeddings(out, set);
  write_echo(echo_path_for(out), o);
}

void write_coefficient_outputs(const Opts& o, const CoefficientResult& result,
                               const EmbeddingSet& set) {
  const auto& out = o.str("io.out");
  write_coefficient_json(out, result, fingerprint_to_hex(set.embeddings.front().probe_fingerprint),
                         o.echo().dump());
  write_echo(echo_path_for(out), o);
}

void run_div(const Opts& o) {
  const EmbeddingSet set = load_embeddings(o.str("io.embeddings"));
  if (set.embeddings.size() < 2) {
    throw DataError("fewer than 2 embeddings in " + o.str("io.embeddings"));
  }
  const CoefficientResult result = diversity_coefficient(set.embeddings);
  write_coefficient_outputs(o, result, set);
  if (o.has("io.distances_out")) {
    write_distances_csv(o.str("io.distances_out"), pairwise_table(set.embeddings, set.labels));
  }
}

void run_xdiv_or_align(const Opts& o, bool align) {
  const EmbeddingSet a = load_embeddings(o.str("io.embeddings_a"));
  const EmbeddingSet b = load_embeddings(o.str("io.embeddings_b"));
  if (a.embeddings.empty() || b.embeddings.empty()) {
    throw DataError("cross coefficients need nonempty embedding sets");
  }
  const CoefficientResult result = align
                                       ? alignment_coefficient(a.embeddings, b.embeddings)
                                       : cross_diversity_coefficient(a.embeddings, b.embeddings);
  write_coefficient_outputs(o, result, a);
  if (o.has("io.distances_out")) {
    std::vector<DistanceRecord> records;
    for (uint32_t i = 0; i < a.embeddings.size(); ++i) {
      for (uint32_t j = 0; j < b.embeddings.size(); ++j) {
        records.push_back({i, j, a.labels[i], b.labels[j],
                           cosine_distance(a.embeddings[i].values, b.embeddings[j].values)});
      }
    }
    write_distances_csv(o.str("io.distances_out"), records);
  }
}

void run_bounds(const Opts& o) {
  const Vocabulary vocab = load_vocab_json(o.str("io.vocab"));
  BoundConfig config;
  const auto& kind = o.str("bound.kind");
  if (kind == "lower") {
    config.kind = BoundKind::lower;
  } else if (kind == "upper") {
    config.kind = BoundKind::upper;
  } else {
    throw UsageError("bound.kind must be lower or upper, got \"" + kind + "\"");
  }
  config.reference_vocab_size = o.u32("bound.reference_vocab_size");
  config.n_sequences = o.u32("bound.n_sequences");
  config.seq_len = o.u32("bound.seq_len");
  config.seed = o.u64("seed");

  const TokenizedCorpus corpus = generate_bound_corpus(vocab, config);
  std::string text;
  for (const auto& doc : corpus.docs) {
    for (size_t t = 0; t < doc.size(); ++t) {
      if (t) text += ' ';
      text += vocab.tokens[doc[t]];
    }
    text += '\n';
  }
  const auto& out = o.str("io.out");
  write_file_bytes(out, text);
  write_echo(echo_path_for(out), o);
}

GincConfig ginc_from(const Opts& o) {
  GincConfig config;
  config.n_concepts = o.u32("ginc.concepts");
  config.vocab_size = o.u32("ginc.vocab_size");
  config.n_hidden_states = o.u32("ginc.hidden");
  config.transition_alpha = o.f64("ginc.transition_alpha");
  config.emission_alpha = o.f64("ginc.emission_alpha");
  config.n_docs = o.u32("ginc.docs");
  config.doc_len = o.u32("ginc.doc_len");
  config.delimiter_period = o.u32("ginc.delimiter_period");
  config.per_concept_emissions = o.boolean("ginc.per_concept_emissions");
  config.seed = o.u64("seed");
  return config;
}

void declare_ginc(Opts& o) {
  o.declare("ginc.concepts", "--concepts", "10", "number of latent concepts");
  o.declare("ginc.vocab_size", "--vocab-size", "100", "word tokens plus delimiter");
  o.declare("ginc.hidden", "--hidden", "10", "hidden states per HMM");
  o.declare("ginc.transition_alpha", "--transition-alpha", "0.5", "transition Dirichlet alpha");
  o.declare("ginc.emission_alpha", "--emission-alpha", "0.1", "emission Dirichlet alpha");
  o.declare("ginc.docs", "--docs", "1000", "documents to generate");
  o.declare("ginc.doc_len", "--doc-len", "100", "tokens per document");
  o.declare("ginc.delimiter_period", "--delimiter-period", "10",
            "insert the delimiter every n-th token");
  o.declare("ginc.per_concept_emissions", "--per-concept-emissions", "false",
            "re-draw emission rows per concept");
}

void run_ginc(const Opts& o) {
  const GincCorpus ginc = generate_ginc_corpus(ginc_from(o));
  const auto& out = o.str("io.out");
  write_ginc_plaintext(out, o.str("io.labels_out"), ginc);
  if (o.has("io.vocab_out")) write_vocab_json(o.str("io.vocab_out"), ginc.vocab);
  write_echo(echo_path_for(out), o);
}

void write_sweep_outputs(const Opts& o, const SweepResult& sweep) {
  const std::string dir = o.str("io.out_dir");
  fs::create_directories(dir);
  const std::string stem = "sweep_" + sweep.sweep_variable;
  write_sweep_json(dir + "/" + stem + ".json", sweep, o.echo().dump());
  write_sweep_csv(dir + "/" + stem + ".csv", sweep);
  write_echo(dir + "/config_echo.json", o);
}

void run_sweep_concepts(const Opts& o) {
  const auto counts = o.u32_list("sweep.counts");
  const SweepResult sweep = run_concept_sweep(ginc_from(o), counts, plan_from(o), probe_from(o));
  write_sweep_outputs(o, sweep);
}

void run_sweep_vocab(const Opts& o) {
  const auto sizes = o.u32_list("sweep.sizes");
  const SweepResult sweep = run_vocab_sweep(ginc_from(o), sizes, plan_from(o), probe_from(o));
  write_sweep_outputs(o, sweep);
}

void run_sweep_batchsize(const Opts& o) {
  const Vocabulary vocab = load_vocab_json(o.str("io.vocab"));
  const auto corpora = load_labeled_corpora(o, vocab);
  if (corpora.size() != 1) throw UsageError("sweep-batchsize expects exactly one --input");

  TokenizedCorpus reference;
  const TokenizedCorpus* ref_ptr = nullptr;
  const ProbeSpec spec = probe_from(o);
  if (spec.config.pretrained) {
    if (!o.has("io.reference")) {
      throw UsageError("sweep-batchsize: --pretrained true needs --reference");
    }
    const auto docs = load_corpus(o.str("io.reference"), format_from(o));
    reference = tokenize_corpus(vocab, docs, "reference");
    ref_ptr = &reference;
  }
  const SweepResult sweep = run_batch_size_sweep(corpora.front(), o.u32_list("sweep.sizes"),
                                                 plan_from(o), spec, ref_ptr);
  write_sweep_outputs(o, sweep);
}

void run_probe_grid_cmd(const Opts& o) {
  const Vocabulary vocab = load_vocab_json(o.str("io.vocab"));
  const auto corpora = load_labeled_corpora(o, vocab);
  if (corpora.size() != 1) throw UsageError("probe-grid expects exactly one --input");
  if (!o.has("io.reference")) throw UsageError("probe-grid needs --reference");
  const auto ref_docs = load_corpus(o.str("io.reference"), format_from(o));
  const TokenizedCorpus reference = tokenize_corpus(vocab, ref_docs, "reference");

  const auto rows = run_probe_config_grid(corpora.front(), reference, plan_from(o),
                                          probe_from(o));
  const std::string dir = o.str("io.out_dir");
  fs::create_directories(dir);
  nlohmann::ordered_json doc;
  nlohmann::ordered_json cells = nlohmann::ordered_json::array();
  for (const auto& row : rows) {
    cells.push_back({{"label", row.label},
                     {"value", row.coefficient.value},
                     {"ci_half_width", row.coefficient.ci_half_width},
                     {"n_pairs", row.coefficient.n_pairs}});
  }
  doc["rows"] = std::move(cells);
  doc["config_echo"] = o.echo();
  write_file_bytes(dir + "/probe_grid.json", doc.dump(2) + "\n");
  write_echo(dir + "/config_echo.json", o);
}

void run_concat_study_cmd(const Opts& o) {
  const Vocabulary vocab = load_vocab_json(o.str("io.vocab"));
  const auto corpora = load_labeled_corpora(o, vocab);

  TokenizedCorpus reference;
  const TokenizedCorpus* ref_ptr = nullptr;
  const ProbeSpec spec = probe_from(o);
  if (spec.config.pretrained) {
    if (!o.has("io.reference")) {
      throw UsageError("concat-study: --pretrained true needs --reference");
    }
    const auto docs = load_corpus(o.str("io.reference"), format_from(o));
    reference = tokenize_corpus(vocab, docs, "reference");
    ref_ptr = &reference;
  }

  const ConcatReport report = run_concat_study(corpora, plan_from(o), spec, ref_ptr);

  const std::string dir = o.str("io.out_dir");
  fs::create_directories(dir);
  auto coeff_json = [](const CoefficientResult& c) {
    return nlohmann::ordered_json{{"kind", coefficient_kind_name(c.kind)},
                                  {"value", c.value},
                                  {"ci_half_width", c.ci_half_width},
                                  {"n_pairs", c.n_pairs}};
  };
  nlohmann::ordered_json doc;
  nlohmann::ordered_json per = nlohmann::ordered_json::array();
  for (const auto& [label, coeff] : report.per_dataset) {
    auto cell = coeff_json(coeff);
    cell["dataset"] = label;
    per.push_back(std::move(cell));
  }
  doc["per_dataset"] = std::move(per);
  nlohmann::ordered_json cross = nlohmann::ordered_json::array();
  for (const auto& [pair, coeff] : report.cross_pairs) {
    auto cell = coeff_json(coeff);
    cell["pair"] = pair;
    cross.push_back(std::move(cell));
  }
  doc["cross_pairs"] = std::move(cross);
  doc["pooled"] = coeff_json(report.pooled);
  doc["union"] = coeff_json(report.union_mode);
  doc["config_echo"] = o.echo();
  write_file_bytes(dir + "/concat_study.json", doc.dump(2) + "\n");
  write_distances_csv(dir + "/concat_distances.csv", report.table);
  write_echo(dir + "/config_echo.json", o);
}

void run_report_cmd(const Opts& o) {
  const auto outcome = write_report(o.str("io.artifacts"), o.str("io.out_dir"));
  write_echo(o.str("io.out_dir") + "/config_echo.json", o);
  for (const auto& m : outcome.missing) {
    std::cerr << "report: skipped " << m << "\n";
  }
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  try {
    CLI::App app{"divkit: Task2Vec diversity coefficients for text datasets"};
    app.require_subcommand(0, 1);
    std::string config_path;
    app.add_option("--config", config_path, "JSON config file with flat dotted keys");
    int threads = 0;
    app.add_option("--threads", threads,
                   "worker thread bound (default: DIVKIT_THREADS or OpenMP default)");

    std::vector<std::unique_ptr<Opts>> all_opts;
    std::map<std::string, std::pair<Opts*, void (*)(const Opts&)>> handlers;

    auto add = [&](const std::string& name, const std::string& desc,
                   void (*fill)(Opts&), void (*handler)(const Opts&)) {
      CLI::App* cmd = app.add_subcommand(name, desc);
      auto opts = std::make_unique<Opts>(cmd, name);
      fill(*opts);
      handlers[name] = {opts.get(), handler};
      all_opts.push_back(std::move(opts));
    };

    add("vocab", "build a vocabulary from corpora",
        [](Opts& o) {
          declare_corpus_inputs(o);
          o.declare("vocab.max_vocab", "--max-vocab", "1000", "vocabulary size cap");
          o.declare("io.out", "--out", "vocab.json", "output vocabulary file");
        },
        run_vocab);

    add("batches", "sample a deterministic batch archive",
        [](Opts& o) {
          declare_corpus_inputs(o);
          o.declare("io.vocab", "--vocab", "", "vocabulary json file");
          declare_plan(o);
          o.declare("io.out", "--out", "batches.dvb", "output batch archive");
        },
        run_batches);

    add("embed", "compute Task2Vec embeddings for a batch archive",
        [](Opts& o) {
          o.declare("io.batches", "--batches", "", "input batch archive");
          o.declare("io.out", "--out", "embeddings.t2v", "output embedding file");
          o.declare("io.reference", "--reference", "", "reference corpus for pretraining");
          o.declare("io.vocab", "--vocab", "", "vocabulary json (needed with --reference)");
          o.declare("io.features", "--features", "", "FTS1 stream for external_stream");
          o.declare("io.format", "--format", "plaintext", "reference format: plaintext|jsonl");
          o.declare("seed", "--seed", "0", "probe init seed");
          declare_probe(o);
        },
        run_embed);

    add("div", "diversity coefficient of an embedding file",
        [](Opts& o) {
          o.declare("io.embeddings", "--embeddings", "", "input embedding file");
          o.declare("io.out", "--out", "diversity.json", "output coefficient json");
          o.declare("io.distances_out", "--distances-out", "", "optional pairwise distances csv");
        },
        run_div);

    add("xdiv", "cross diversity between two embedding files",
        [](Opts& o) {
          o.declare("io.embeddings_a", "--embeddings-a", "", "first embedding file");
          o.declare("io.embeddings_b", "--embeddings-b", "", "second embedding file");
          o.declare("io.out", "--out", "cross_diversity.json", "output coefficient json");
          o.declare("io.distances_out", "--distances-out", "", "optional cross distances csv");
        },
        [](const Opts& o) { run_xdiv_or_align(o, false); });

    add("align", "alignment coefficient (1 - cross diversity)",
        [](Opts& o) {
          o.declare("io.embeddings_a", "--embeddings-a", "", "first embedding file");
          o.declare("io.embeddings_b", "--embeddings-b", "", "second embedding file");
          o.declare("io.out", "--out", "alignment.json", "output coefficient json");
          o.declare("io.distances_out", "--distances-out", "", "optional cross distances csv");
        },
        [](const Opts& o) { run_xdiv_or_align(o, true); });

    add("bounds", "generate a lower or upper bound calibration corpus",
        [](Opts& o) {
          o.declare("bound.kind", "--kind", "lower", "lower|upper");
          o.declare("io.vocab", "--vocab", "", "vocabulary json file");
          o.declare("bound.reference_vocab_size", "--reference-vocab-size", "50257",
                    "eos probability denominator (lower bound)");
          o.declare("bound.n_sequences", "--n-sequences", "1000", "documents to generate");
          o.declare("bound.seq_len", "--seq-len", "32", "tokens per document");
          o.declare("seed", "--seed", "0", "generation seed");
          o.declare("io.out", "--out", "bound.txt", "output plaintext corpus");
        },
        run_bounds);

    add("ginc", "generate a GINC-style mixture-of-HMMs corpus",
        [](Opts& o) {
          declare_ginc(o);
          o.declare("seed", "--seed", "0", "generation seed");
          o.declare("io.out", "--out", "ginc.txt", "output plaintext corpus");
          o.declare("io.labels_out", "--labels-out", "ginc_concepts.csv",
                    "sidecar doc->concept csv");
          o.declare("io.vocab_out", "--vocab-out", "", "optional vocabulary json output");
        },
        run_ginc);

    add("sweep-concepts", "diversity vs number of latent concepts",
        [](Opts& o) {
          o.declare("sweep.counts", "--counts", "1,2,5,10,50,100", "concept counts");
          declare_ginc(o);
          declare_plan(o);
          declare_probe(o);
          o.declare("io.out_dir", "--out-dir", "sweep_concepts_out", "output directory");
        },
        run_sweep_concepts);

    add("sweep-vocab", "diversity vs vocabulary size",
        [](Opts& o) {
          o.declare("sweep.sizes", "--sizes", "50,100,200,500,1000", "vocab sizes");
          declare_ginc(o);
          declare_plan(o);
          declare_probe(o);
          o.declare("io.out_dir", "--out-dir", "sweep_vocab_out", "output directory");
        },
        run_sweep_vocab);

    add("sweep-batchsize", "diversity vs batch size on a fixed corpus",
        [](Opts& o) {
          o.declare("sweep.sizes", "--sizes", "8,16,32,64", "batch sizes");
          declare_corpus_inputs(o);
          o.declare("io.vocab", "--vocab", "", "vocabulary json file");
          o.declare("io.reference", "--reference", "", "reference corpus for pretraining");
          declare_plan(o);
          declare_probe(o);
          o.declare("io.out_dir", "--out-dir", "sweep_batchsize_out", "output directory");
        },
        run_sweep_batchsize);

    add("probe-grid", "the four probe configurations on shared batches",
        [](Opts& o) {
          declare_corpus_inputs(o);
          o.declare("io.vocab", "--vocab", "", "vocabulary json file");
          o.declare("io.reference", "--reference", "", "reference corpus for pretraining");
          declare_plan(o);
          declare_probe(o);
          o.declare("io.out_dir", "--out-dir", "probe_grid_out", "output directory");
        },
        run_probe_grid_cmd);

    add("concat-study", "per-dataset, cross, pooled and union diversity",
        [](Opts& o) {
          declare_corpus_inputs(o);
          o.declare("io.vocab", "--vocab", "", "vocabulary json file");
          o.declare("io.reference", "--reference", "", "reference corpus for pretraining");
          declare_plan(o);
          declare_probe(o);
          o.declare("io.out_dir", "--out-dir", "concat_study_out", "output directory");
        },
        run_concat_study_cmd);

    add("report", "render a static html+svg report from artifacts",
        [](Opts& o) {
          o.declare("io.artifacts", "--artifacts", ".", "artifacts directory to scan");
          o.declare("io.out_dir", "--out-dir", "report_out", "output directory");
        },
        run_report_cmd);

    // A config file may carry the subcommand; synthesize it when the command
    // line names none.
    std::vector<std::string> args(argv + 1, argv + argc);
    nlohmann::json config = nlohmann::json::object();
    for (size_t i = 0; i < args.size(); ++i) {
      std::string value;
      if (args[i] == "--config" && i + 1 < args.size()) {
        value = args[i + 1];
      } else if (args[i].rfind("--config=", 0) == 0) {
        value = args[i].substr(9);
      } else {
        continue;
      }
      config = nlohmann::json::parse(read_file_bytes(value), nullptr, false);
      if (config.is_discarded() || !config.is_object()) {
        throw UsageError(value + ": config must be a json object");
      }
      break;
    }
    const bool has_subcommand = std::any_of(args.begin(), args.end(), [&](const std::string& a) {
      return handlers.count(a) > 0;
    });
    if (!has_subcommand && config.contains("subcommand")) {
      args.insert(args.begin(), config["subcommand"].get<std::string>());
    }

    try {
      // CLI11's vector overload expects reversed arguments.
      app.parse(std::vector<std::string>(args.rbegin(), args.rend()));
    } catch (const CLI::CallForHelp& e) {
      return app.exit(e);
    } catch (const CLI::ParseError& e) {
      std::cerr << "usage error: " << e.what() << "\n";
      return 1;
    }

    if (threads > 0) set_max_threads(threads);

    const auto subcommands = app.get_subcommands();
    if (subcommands.empty()) {
      std::cerr << app.help() << "\n";
      return 1;
    }
    auto& [opts, handler] = handlers.at(subcommands.front()->get_name());
    if (config.contains("subcommand") &&
        config["subcommand"].get<std::string>() != opts->name()) {
      throw UsageError("config subcommand \"" + config["subcommand"].get<std::string>() +
                       "\" does not match \"" + opts->name() + "\"");
    }
    opts->resolve(config);
    handler(*opts);
    return 0;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace divkit
