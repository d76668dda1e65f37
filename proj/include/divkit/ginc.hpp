#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "divkit/corpus.hpp"

namespace divkit {

/// Mixture-of-HMMs corpus generator. Each latent concept owns a transition
/// matrix; emission rows are shared across concepts within a seed family
/// (per_concept_emissions re-draws them per concept), so concept-count and
/// vocab-size effects stay separable.
struct GincConfig {
  uint32_t n_concepts = 10;
  uint32_t vocab_size = 100;  // word tokens plus the delimiter
  uint32_t n_hidden_states = 10;
  double transition_alpha = 0.5;
  double emission_alpha = 0.1;
  uint32_t n_docs = 1000;
  uint32_t doc_len = 100;
  uint64_t seed = 0;
  bool per_concept_emissions = false;
  uint32_t delimiter_period = 10;  // every period-th token is the delimiter
};

struct ConceptHMM {
  uint32_t concept_id = 0;
  uint32_t n_hidden = 0;
  uint32_t n_words = 0;                // emittable word tokens
  std::vector<double> transition;      // n_hidden x n_hidden, row-stochastic
  std::vector<double> emission;        // n_hidden x n_words, row-stochastic
  std::vector<double> initial;         // n_hidden, uniform

  std::span<const double> transition_row(uint32_t h) const {
    return {transition.data() + static_cast<size_t>(h) * n_hidden, n_hidden};
  }
  std::span<const double> emission_row(uint32_t h) const {
    return {emission.data() + static_cast<size_t>(h) * n_words, n_words};
  }
};

/// pad, eos, the delimiter "\", then word tokens "a".."z", "aa", "ab", ...
/// in bijective base-26 order until size-1 word tokens exist.
Vocabulary generate_ginc_vocab(uint32_t size);

/// Deterministic per-concept HMM draw: transition rows ~ Dirichlet
/// (transition_alpha) seeded by (seed, concept_id); emission rows shared
/// across concepts unless per_concept_emissions.
ConceptHMM sample_concept(const GincConfig& config, uint32_t concept_id);

struct GincCorpus {
  Vocabulary vocab;
  TokenizedCorpus corpus;
  std::vector<uint32_t> concept_of_doc;
};

/// Per document: concept drawn uniformly, then the HMM rolled for doc_len
/// tokens with the delimiter inserted every delimiter_period-th position
/// (the hidden chain advances only on emission steps).
GincCorpus generate_ginc_corpus(const GincConfig& config);

/// One document per line, tokens whitespace-joined; sidecar CSV maps
/// doc_index to concept_id.
void write_ginc_plaintext(const std::string& corpus_path, const std::string& labels_csv_path,
                          const GincCorpus& ginc);

}  // namespace divkit
