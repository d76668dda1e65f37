#include <doctest.h>

#include <cmath>
#include <map>
#include <vector>

#include "divkit/bounds.hpp"
#include "divkit/errors.hpp"
#include "divkit/ginc.hpp"

using namespace divkit;

namespace {

std::map<uint32_t, uint64_t> token_histogram(const TokenizedCorpus& corpus) {
  std::map<uint32_t, uint64_t> counts;
  for (const auto& doc : corpus.docs) {
    for (uint32_t id : doc) ++counts[id];
  }
  return counts;
}

uint64_t total_tokens(const TokenizedCorpus& corpus) {
  uint64_t n = 0;
  for (const auto& doc : corpus.docs) n += doc.size();
  return n;
}

}  // namespace

TEST_CASE("lower bound emits the two-point law") {
  const Vocabulary vocab = generate_ginc_vocab(100);
  BoundConfig config;
  config.kind = BoundKind::lower;
  config.reference_vocab_size = 50257;
  config.n_sequences = 160000;
  config.seq_len = 32;  // ~5.1M tokens
  config.seed = 7;

  const auto corpus = generate_bound_corpus(vocab, config);
  const auto counts = token_histogram(corpus);
  const uint64_t n = total_tokens(corpus);

  // Exactly two distinct tokens: eos plus one fixed non-special token.
  REQUIRE(counts.size() == 2);
  REQUIRE(counts.count(vocab.eos_id) == 1);

  // p(eos) = 1/50257 ~= 1.9898e-5, checked within 3 sigma of binomial.
  const double p = 1.0 / 50257.0;
  const double expect = p * static_cast<double>(n);
  const double sigma = std::sqrt(static_cast<double>(n) * p * (1 - p));
  CHECK(std::abs(static_cast<double>(counts.at(vocab.eos_id)) - expect) < 3 * sigma);
}

TEST_CASE("lower bound with denominator 2 is a fair Bernoulli stream") {
  const Vocabulary vocab = generate_ginc_vocab(10);
  BoundConfig config;
  config.kind = BoundKind::lower;
  config.reference_vocab_size = 2;
  config.n_sequences = 4000;
  config.seq_len = 50;
  config.seed = 3;

  const auto corpus = generate_bound_corpus(vocab, config);
  const auto counts = token_histogram(corpus);
  const uint64_t n = total_tokens(corpus);
  REQUIRE(counts.size() == 2);
  const double half = static_cast<double>(n) / 2.0;
  const double sigma = std::sqrt(static_cast<double>(n) * 0.25);
  for (const auto& [id, c] : counts) {
    CHECK(std::abs(static_cast<double>(c) - half) < 3 * sigma);
  }
}

TEST_CASE("the fixed token changes only with the seed") {
  const Vocabulary vocab = generate_ginc_vocab(50);
  BoundConfig config;
  config.kind = BoundKind::lower;
  config.reference_vocab_size = 1000;  // eos rare
  config.n_sequences = 10;
  config.seq_len = 64;

  config.seed = 1;
  const auto a = generate_bound_corpus(vocab, config);
  const auto b = generate_bound_corpus(vocab, config);
  CHECK(a.docs == b.docs);

  config.seed = 2;
  bool differs = false;
  const auto c = generate_bound_corpus(vocab, config);
  for (size_t i = 0; i < a.docs.size() && !differs; ++i) differs = a.docs[i] != c.docs[i];
  CHECK(differs);
}

TEST_CASE("upper bound frequencies are uniform within 3 sigma") {
  const uint32_t vocab_size = 100;
  const Vocabulary vocab = generate_ginc_vocab(vocab_size - 2);  // |V| = 100 incl. pad/eos
  REQUIRE(vocab.size() == vocab_size);

  BoundConfig config;
  config.kind = BoundKind::upper;
  config.n_sequences = 31250;
  config.seq_len = 32;  // 1M tokens
  config.seed = 11;

  const auto corpus = generate_bound_corpus(vocab, config);
  const auto counts = token_histogram(corpus);
  const uint64_t n = total_tokens(corpus);
  CHECK(counts.count(0) == 0);  // pad never sampled

  const double p = 1.0 / static_cast<double>(vocab_size - 1);
  const double expect = p * static_cast<double>(n);
  const double sigma = std::sqrt(static_cast<double>(n) * p * (1 - p));
  for (const auto& [id, c] : counts) {
    CHECK(std::abs(static_cast<double>(c) - expect) < 3 * sigma);
  }
}

TEST_CASE("upper bound reaches maximal unigram entropy") {
  const Vocabulary vocab = generate_ginc_vocab(98);  // |V| = 100
  BoundConfig config;
  config.kind = BoundKind::upper;
  config.n_sequences = 31250;
  config.seq_len = 32;
  config.seed = 13;

  const auto corpus = generate_bound_corpus(vocab, config);
  const auto counts = token_histogram(corpus);
  const double n = static_cast<double>(total_tokens(corpus));
  double entropy = 0.0;
  for (const auto& [id, c] : counts) {
    const double p = static_cast<double>(c) / n;
    entropy -= p * std::log(p);
  }
  // Within 1% of log |V| at 1e6 tokens.
  CHECK(entropy > 0.99 * std::log(static_cast<double>(vocab.size())));
}

TEST_CASE("bound preconditions") {
  const Vocabulary vocab = generate_ginc_vocab(10);
  BoundConfig config;
  config.reference_vocab_size = 1;
  CHECK_THROWS_AS(generate_bound_corpus(vocab, config), DataError);
}
