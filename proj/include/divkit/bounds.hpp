#pragma once

#include <cstdint>

#include "divkit/corpus.hpp"

namespace divkit {

enum class BoundKind { lower, upper };

/// Synthetic calibration corpora. The lower bound is a near-constant
/// two-token stream: eos with probability 1 / reference_vocab_size, one
/// fixed non-special token (drawn once per seed) with the remaining mass.
/// The upper bound draws every position uniformly over the vocabulary
/// (pad excluded, since pad never occurs inside content).
struct BoundConfig {
  BoundKind kind = BoundKind::lower;
  uint32_t reference_vocab_size = 50257;  // probability denominator, lower bound only
  uint32_t n_sequences = 1000;
  uint32_t seq_len = 32;
  uint64_t seed = 0;
};

TokenizedCorpus generate_bound_corpus(const Vocabulary& vocab, const BoundConfig& config);

}  // namespace divkit
