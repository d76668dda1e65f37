// Serial-vs-parallel timing for the two hot kernels: the per-batch
// fine-tune + FIM pipeline and the pairwise distance matrix. Also checks
// that both code paths agree bit-for-bit, which is the contract the test
// suite relies on.

#include <chrono>
#include <cstdio>
#include <vector>

#include "divkit/corpus.hpp"
#include "divkit/ginc.hpp"
#include "divkit/metrics.hpp"
#include "divkit/parallel.hpp"
#include "divkit/probe.hpp"
#include "divkit/task2vec.hpp"

using namespace divkit;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

template <class F>
double timed(F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  f();
  return seconds_since(t0);
}

}  // namespace

int main() {
  GincConfig ginc_config;
  ginc_config.n_concepts = 10;
  ginc_config.n_docs = 400;
  ginc_config.seed = 7;
  const GincCorpus ginc = generate_ginc_corpus(ginc_config);

  SamplingPlan plan;
  plan.mode = SamplingMode::per_dataset;
  plan.n_batches = 16;
  plan.batch_size = 32;
  plan.max_len = 32;
  plan.master_seed = 11;
  const auto batches = sample_batches({ginc.corpus}, plan);

  const Featurizer featurizer =
      Featurizer::random_embedding_mean(ginc.corpus.vocab_size, 48, 3);
  const Head init = Head::zeros(ginc.corpus.vocab_size, 48);
  ProbeConfig config;
  config.pretrained = false;
  config.epochs = 10;

  std::printf("threads available: %d\n", max_threads());
  const int parallel_threads = max_threads();

  std::vector<Task2VecEmbedding> serial_embeddings, parallel_embeddings;
  set_max_threads(1);
  const double embed_serial = timed([&] {
    serial_embeddings = embed_batches_serial(batches, featurizer, init, config, FimMode::exact());
  });
  set_max_threads(parallel_threads);
  const double embed_parallel = timed([&] {
    parallel_embeddings = embed_batches(batches, featurizer, init, config, FimMode::exact());
  });

  bool identical = serial_embeddings.size() == parallel_embeddings.size();
  for (size_t i = 0; identical && i < serial_embeddings.size(); ++i) {
    identical = serial_embeddings[i].values == parallel_embeddings[i].values;
  }

  std::printf("embed_batches   serial %8.3fs   parallel %8.3fs   speedup %5.2fx   %s\n",
              embed_serial, embed_parallel, embed_serial / embed_parallel,
              identical ? "bit-identical" : "MISMATCH");

  // Pairwise distances on a larger synthetic set.
  std::vector<Task2VecEmbedding> many;
  for (int rep = 0; rep < 40; ++rep) {
    for (const auto& e : serial_embeddings) {
      many.push_back(e);
      many.back().values[0] += 1e-6 * static_cast<double>(rep);
    }
  }
  std::vector<double> distances_serial, distances_parallel;
  set_max_threads(1);
  const double pair_serial =
      timed([&] { distances_serial = pairwise_distances_serial(many); });
  set_max_threads(parallel_threads);
  const double pair_parallel = timed([&] { distances_parallel = pairwise_distances(many); });

  std::printf("pairwise (%zu)  serial %8.3fs   parallel %8.3fs   speedup %5.2fx   %s\n",
              distances_serial.size(), pair_serial, pair_parallel, pair_serial / pair_parallel,
              distances_serial == distances_parallel ? "bit-identical" : "MISMATCH");

  return identical && distances_serial == distances_parallel ? 0 : 1;
}
