#include "divkit/task2vec.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>

#include <nlohmann/json.hpp>

#include "divkit/binio.hpp"
#include "divkit/errors.hpp"
#include "divkit/parallel.hpp"
#include "divkit/rng.hpp"

namespace divkit {

std::string fingerprint_to_hex(uint64_t fp) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fp));
  return buf;
}

namespace {

uint64_t fingerprint_from_hex(const std::string& hex) {
  return std::strtoull(hex.c_str(), nullptr, 16);
}

}  // namespace

Task2VecEmbedding embed(const Batch& batch, const Featurizer& featurizer, const Head& head,
                        const FimMode& mode, uint64_t probe_fp) {
  if (mode.kind == FimMode::Kind::monte_carlo && mode.n_samples < 1) {
    throw DataError("monte_carlo mode needs n_samples >= 1");
  }

  const uint32_t V = head.vocab_size;
  const uint32_t m = head.m;
  const BatchFeatures f = batch_features(featurizer, batch);
  if (f.n_positions == 0) throw DataError("embed: batch has no content positions");

  Task2VecEmbedding out;
  out.batch_index = batch.batch_index;
  out.probe_fingerprint = probe_fp;
  out.mode = mode;
  out.values.assign(static_cast<size_t>(V) * m + V, 0.0);

  std::vector<double> p(V);
  std::vector<double> phi2(m);
  std::vector<double> coef(V);

  for (size_t r = 0; r < f.n_positions; ++r) {
    const auto phi = f.row(r);
    next_token_distribution(head, phi, p);
    for (uint32_t j = 0; j < m; ++j) phi2[j] = phi[j] * phi[j];

    if (mode.kind == FimMode::Kind::exact) {
      for (uint32_t v = 0; v < V; ++v) coef[v] = p[v] * (1.0 - p[v]);
    } else {
      // Empirical token frequencies over n_samples model draws; the squared
      // score for sampled token k is (1[k=v] - p_v)^2, so the estimate per v
      // is freq_v (1-p_v)^2 + (1-freq_v) p_v^2.
      Rng rng(mix_seed(mix_seed(mode.mc_seed, batch.batch_index), r));
      std::vector<uint32_t> counts(V, 0);
      for (uint32_t s = 0; s < mode.n_samples; ++s) {
        ++counts[rng.categorical(p)];
      }
      const double inv_n = 1.0 / static_cast<double>(mode.n_samples);
      for (uint32_t v = 0; v < V; ++v) {
        const double freq = counts[v] * inv_n;
        const double one_minus = 1.0 - p[v];
        coef[v] = freq * one_minus * one_minus + (1.0 - freq) * p[v] * p[v];
      }
    }

    for (uint32_t v = 0; v < V; ++v) {
      const double c = coef[v];
      double* wrow = out.values.data() + static_cast<size_t>(v) * m;
      for (uint32_t j = 0; j < m; ++j) wrow[j] += c * phi2[j];
      out.values[static_cast<size_t>(V) * m + v] += c;
    }
  }

  const double inv = 1.0 / static_cast<double>(f.n_positions);
  for (auto& v : out.values) {
    v *= inv;
    if (!std::isfinite(v)) throw NumericError("non-finite embedding entry");
  }
  return out;
}

namespace {

Task2VecEmbedding embed_one(const Batch& batch, const Featurizer& featurizer,
                            const Head& init, const ProbeConfig& config,
                            const FimMode& mode, uint64_t fp) {
  if (config.finetune) {
    const Head tuned = finetune_head(init, featurizer, batch, config);
    return embed(batch, featurizer, tuned, mode, fp);
  }
  return embed(batch, featurizer, init, mode, fp);
}

}  // namespace

std::vector<Task2VecEmbedding> embed_batches(const std::vector<Batch>& batches,
                                             const Featurizer& featurizer, const Head& init,
                                             const ProbeConfig& config, const FimMode& mode) {
  const uint64_t fp = probe_fingerprint(featurizer, config);
  std::vector<Task2VecEmbedding> out(batches.size());
  parallel_for(batches.size(), [&](size_t i) {
    out[i] = embed_one(batches[i], featurizer, init, config, mode, fp);
  });
  return out;
}

std::vector<Task2VecEmbedding> embed_batches_serial(const std::vector<Batch>& batches,
                                                    const Featurizer& featurizer,
                                                    const Head& init, const ProbeConfig& config,
                                                    const FimMode& mode) {
  const uint64_t fp = probe_fingerprint(featurizer, config);
  std::vector<Task2VecEmbedding> out(batches.size());
  for (size_t i = 0; i < batches.size(); ++i) {
    out[i] = embed_one(batches[i], featurizer, init, config, mode, fp);
  }
  return out;
}

void save_embeddings(const std::string& path, const EmbeddingSet& set) {
  if (set.embeddings.empty()) throw DataError("save_embeddings: nothing to save");
  const size_t dim = set.embeddings.front().values.size();
  if (set.labels.size() != set.embeddings.size()) {
    throw DataError("save_embeddings: label count mismatch");
  }

  const auto& mode = set.embeddings.front().mode;
  nlohmann::ordered_json meta;
  meta["probe_fingerprint"] = fingerprint_to_hex(set.embeddings.front().probe_fingerprint);
  if (mode.kind == FimMode::Kind::exact) {
    meta["fim_mode"] = {{"kind", "exact"}};
  } else {
    meta["fim_mode"] = {
        {"kind", "monte_carlo"}, {"n_samples", mode.n_samples}, {"mc_seed", mode.mc_seed}};
  }
  meta["vocab_size"] = set.vocab_size;
  meta["m"] = set.m;
  nlohmann::ordered_json indices = nlohmann::ordered_json::array();
  nlohmann::ordered_json labels = nlohmann::ordered_json::array();
  for (size_t i = 0; i < set.embeddings.size(); ++i) {
    indices.push_back(set.embeddings[i].batch_index);
    labels.push_back(set.labels[i]);
  }
  meta["batch_indices"] = std::move(indices);
  meta["labels"] = std::move(labels);
  const std::string meta_str = meta.dump();

  std::string out;
  out.reserve(16 + meta_str.size() + set.embeddings.size() * dim * 4);
  out += "T2V1";
  put_u32(out, static_cast<uint32_t>(set.embeddings.size()));
  put_u32(out, static_cast<uint32_t>(dim));
  put_u32(out, static_cast<uint32_t>(meta_str.size()));
  out += meta_str;
  for (const auto& e : set.embeddings) {
    if (e.values.size() != dim) throw DataError("save_embeddings: inconsistent dimensions");
    for (double v : e.values) put_f32(out, static_cast<float>(v));
  }
  write_file_bytes(path, out);
}

EmbeddingSet load_embeddings(const std::string& path) {
  const std::string data = read_file_bytes(path);
  ByteReader reader(data, path);
  reader.expect_magic("T2V1");
  const uint32_t count = reader.u32();
  const uint32_t dim = reader.u32();
  const uint32_t meta_len = reader.u32();
  nlohmann::json meta = nlohmann::json::parse(reader.bytes(meta_len), nullptr, false);
  if (meta.is_discarded()) throw DataError(path + ": bad metadata block");

  if (reader.remaining() != static_cast<size_t>(count) * dim * 4) {
    throw DataError(path + ": shape mismatch between header and payload");
  }

  EmbeddingSet set;
  set.vocab_size = meta.value("vocab_size", 0u);
  set.m = meta.value("m", 0u);
  const uint64_t fp = fingerprint_from_hex(meta.value("probe_fingerprint", std::string("0")));

  FimMode mode;
  if (meta.contains("fim_mode") && meta["fim_mode"].value("kind", "exact") == "monte_carlo") {
    mode = FimMode::monte_carlo(meta["fim_mode"].value("n_samples", 1u),
                                meta["fim_mode"].value("mc_seed", uint64_t{0}));
  }

  set.embeddings.resize(count);
  set.labels.assign(count, "");
  if (meta.contains("labels") && meta["labels"].size() == count) {
    for (uint32_t i = 0; i < count; ++i) set.labels[i] = meta["labels"][i].get<std::string>();
  }
  for (uint32_t i = 0; i < count; ++i) {
    auto& e = set.embeddings[i];
    e.probe_fingerprint = fp;
    e.mode = mode;
    e.batch_index = (meta.contains("batch_indices") && meta["batch_indices"].size() == count)
                        ? meta["batch_indices"][i].get<uint32_t>()
                        : i;
    e.values.resize(dim);
    for (auto& v : e.values) v = reader.f32();
  }
  return set;
}

}  // namespace divkit
