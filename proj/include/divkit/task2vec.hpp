#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "divkit/corpus.hpp"
#include "divkit/probe.hpp"

namespace divkit {

/// How the expectation over model-sampled tokens is evaluated. exact is the
/// closed form of the sampled estimator's expectation and is the default;
/// monte_carlo keeps the sampled formulation for oracle checks.
struct FimMode {
  enum class Kind { exact, monte_carlo };
  Kind kind = Kind::exact;
  uint32_t n_samples = 1;  // monte_carlo only
  uint64_t mc_seed = 0;

  static FimMode exact() { return FimMode{}; }
  static FimMode monte_carlo(uint32_t n_samples, uint64_t mc_seed) {
    return FimMode{Kind::monte_carlo, n_samples, mc_seed};
  }
};

/// Diagonal of the head-parameter Fisher Information for one batch, ordered
/// W row-major then b. Entries are nonnegative by construction.
struct Task2VecEmbedding {
  std::vector<double> values;  // vocab_size * m + vocab_size
  uint32_t batch_index = 0;
  uint64_t probe_fingerprint = 0;
  FimMode mode;
};

/// Per-batch FIM diagonal, averaged over all non-pad positions.
///
/// exact: the W entry (v, j) accumulates p_v (1 - p_v) phi_j^2, the b entry v
/// accumulates p_v (1 - p_v). monte_carlo: n_samples tokens are drawn from p
/// per position and squared score components (1[x=v] - p_v)^2 phi_j^2 are
/// averaged; sample seeds derive from (mc_seed, batch_index, position).
Task2VecEmbedding embed(const Batch& batch, const Featurizer& featurizer, const Head& head,
                        const FimMode& mode, uint64_t probe_fingerprint);

/// Full per-batch pipeline: fine-tune (when config.finetune) from the given
/// initial head, then compute the FIM diagonal. Batches run in parallel and
/// write disjoint slots, so results are independent of the thread count; the
/// _serial variant is the reference the tests compare against.
std::vector<Task2VecEmbedding> embed_batches(const std::vector<Batch>& batches,
                                             const Featurizer& featurizer, const Head& init,
                                             const ProbeConfig& config, const FimMode& mode);
std::vector<Task2VecEmbedding> embed_batches_serial(const std::vector<Batch>& batches,
                                                    const Featurizer& featurizer,
                                                    const Head& init, const ProbeConfig& config,
                                                    const FimMode& mode);

/// Embedding archive contents. Labels ride in the header metadata so the
/// coefficient tools can group by source dataset.
struct EmbeddingSet {
  std::vector<Task2VecEmbedding> embeddings;
  std::vector<std::string> labels;  // one per embedding
  uint32_t vocab_size = 0;
  uint32_t m = 0;
};

/// "T2V1" file: magic, u32 count, u32 dim, a length-prefixed JSON metadata
/// block (probe fingerprint, fim mode, vocab size, m, batch indices, labels),
/// then count x dim float32 little-endian values.
void save_embeddings(const std::string& path, const EmbeddingSet& set);
EmbeddingSet load_embeddings(const std::string& path);

std::string fingerprint_to_hex(uint64_t fingerprint);

}  // namespace divkit
