#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "divkit/errors.hpp"
#include "divkit/ginc.hpp"
#include "divkit/rng.hpp"

using namespace divkit;

TEST_CASE("ginc vocabulary enumeration") {
  SUBCASE("size 4 is delimiter plus a b c") {
    const Vocabulary v = generate_ginc_vocab(4);
    REQUIRE(v.tokens.size() == 6);  // pad, eos on top of the 4 emittable tokens
    CHECK(v.tokens[2] == "\\");
    CHECK(v.tokens[3] == "a");
    CHECK(v.tokens[4] == "b");
    CHECK(v.tokens[5] == "c");
  }
  SUBCASE("size 28 holds exactly 27 word tokens plus the delimiter") {
    const Vocabulary v = generate_ginc_vocab(28);
    CHECK(v.tokens.size() == 30);
    CHECK(v.tokens[3] == "a");
    CHECK(v.tokens[28] == "z");
    CHECK(v.tokens[29] == "aa");
  }
  SUBCASE("word index 26 rolls over to aa") {
    const Vocabulary v = generate_ginc_vocab(40);
    CHECK(v.tokens[3 + 26] == "aa");
    CHECK(v.tokens[3 + 27] == "ab");
  }
  SUBCASE("minimum size enforced") {
    CHECK_THROWS_AS(generate_ginc_vocab(2), DataError);
  }
}

TEST_CASE("sample_concept determinism and structure") {
  GincConfig config;
  config.n_concepts = 5;
  config.vocab_size = 20;
  config.n_hidden_states = 6;
  config.seed = 17;

  SUBCASE("same (seed, concept) twice gives identical matrices") {
    const auto a = sample_concept(config, 3);
    const auto b = sample_concept(config, 3);
    CHECK(a.transition == b.transition);
    CHECK(a.emission == b.emission);
    const auto c = sample_concept(config, 4);
    CHECK(a.transition != c.transition);
  }

  SUBCASE("emissions are shared across concepts by default") {
    const auto a = sample_concept(config, 0);
    const auto b = sample_concept(config, 4);
    CHECK(a.emission == b.emission);

    GincConfig per = config;
    per.per_concept_emissions = true;
    const auto c = sample_concept(per, 0);
    const auto d = sample_concept(per, 4);
    CHECK(c.emission != d.emission);
  }

  SUBCASE("rows are stochastic") {
    const auto hmm = sample_concept(config, 1);
    for (uint32_t h = 0; h < hmm.n_hidden; ++h) {
      double t_total = 0.0, e_total = 0.0;
      for (double v : hmm.transition_row(h)) {
        CHECK(v >= 0.0);
        t_total += v;
      }
      for (double v : hmm.emission_row(h)) {
        CHECK(v >= 0.0);
        e_total += v;
      }
      CHECK(t_total == doctest::Approx(1.0).epsilon(1e-9));
      CHECK(e_total == doctest::Approx(1.0).epsilon(1e-9));
    }
  }

  SUBCASE("huge alpha approaches uniform rows") {
    GincConfig flat = config;
    flat.transition_alpha = 1e6;
    const auto hmm = sample_concept(flat, 2);
    const double uniform = 1.0 / static_cast<double>(hmm.n_hidden);
    for (double v : hmm.transition) CHECK(std::abs(v - uniform) < 1e-2);
  }

  SUBCASE("single hidden state collapses to [[1]]") {
    GincConfig tiny = config;
    tiny.n_hidden_states = 1;
    const auto hmm = sample_concept(tiny, 0);
    REQUIRE(hmm.transition.size() == 1);
    CHECK(hmm.transition[0] == doctest::Approx(1.0));
  }
}

TEST_CASE("generated corpus structure") {
  GincConfig config;
  config.n_concepts = 4;
  config.vocab_size = 30;
  config.n_docs = 200;
  config.doc_len = 50;
  config.seed = 23;

  const GincCorpus ginc = generate_ginc_corpus(config);
  REQUIRE(ginc.corpus.docs.size() == 200);
  REQUIRE(ginc.concept_of_doc.size() == 200);

  SUBCASE("emitted tokens stay inside the vocabulary") {
    for (const auto& doc : ginc.corpus.docs) {
      REQUIRE(doc.size() == 50);
      for (uint32_t id : doc) {
        CHECK(id >= 2);  // never pad/eos
        CHECK(id < ginc.vocab.size());
      }
    }
  }

  SUBCASE("delimiter appears exactly at the configured period") {
    for (const auto& doc : ginc.corpus.docs) {
      for (size_t t = 0; t < doc.size(); ++t) {
        if ((t + 1) % config.delimiter_period == 0) {
          CHECK(doc[t] == 2);
        } else {
          CHECK(doc[t] != 2);
        }
      }
    }
  }

  SUBCASE("single concept labels everything zero") {
    GincConfig single = config;
    single.n_concepts = 1;
    const GincCorpus one = generate_ginc_corpus(single);
    for (uint32_t c : one.concept_of_doc) CHECK(c == 0);
  }

  SUBCASE("regeneration is deterministic") {
    const GincCorpus again = generate_ginc_corpus(config);
    CHECK(again.corpus.docs == ginc.corpus.docs);
    CHECK(again.concept_of_doc == ginc.concept_of_doc);
  }
}

TEST_CASE("concept frequencies are uniform within 3 sigma") {
  GincConfig config;
  config.n_concepts = 8;
  config.vocab_size = 20;
  config.n_docs = 10000;
  config.doc_len = 5;
  config.seed = 29;

  const GincCorpus ginc = generate_ginc_corpus(config);
  std::vector<uint64_t> counts(config.n_concepts, 0);
  for (uint32_t c : ginc.concept_of_doc) ++counts[c];
  const double p = 1.0 / config.n_concepts;
  const double expect = p * config.n_docs;
  const double sigma = std::sqrt(config.n_docs * p * (1 - p));
  for (uint64_t c : counts) {
    CHECK(std::abs(static_cast<double>(c) - expect) < 3 * sigma);
  }
}

TEST_CASE("hidden chain converges to the stationary distribution") {
  GincConfig config;
  config.n_concepts = 1;
  config.vocab_size = 12;
  config.n_hidden_states = 5;
  config.seed = 31;
  const ConceptHMM hmm = sample_concept(config, 0);

  // Power-iteration oracle for pi = pi P.
  std::vector<double> pi(hmm.n_hidden, 1.0 / hmm.n_hidden);
  for (int iter = 0; iter < 10000; ++iter) {
    std::vector<double> next(hmm.n_hidden, 0.0);
    for (uint32_t i = 0; i < hmm.n_hidden; ++i) {
      for (uint32_t j = 0; j < hmm.n_hidden; ++j) {
        next[j] += pi[i] * hmm.transition[i * hmm.n_hidden + j];
      }
    }
    pi = std::move(next);
  }

  // Roll the chain with the test's own sampler (independent of corpus
  // generation) and compare occupancy.
  const size_t steps = 200000;
  Rng rng(55);
  uint32_t state = static_cast<uint32_t>(rng.categorical(hmm.initial));
  std::vector<uint64_t> visits(hmm.n_hidden, 0);
  for (size_t t = 0; t < steps; ++t) {
    ++visits[state];
    state = static_cast<uint32_t>(rng.categorical(hmm.transition_row(state)));
  }
  for (uint32_t h = 0; h < hmm.n_hidden; ++h) {
    const double expect = pi[h] * static_cast<double>(steps);
    // Markov-dependent draws mix slowly; allow a widened multinomial band.
    const double sigma = std::sqrt(static_cast<double>(steps) * pi[h] * (1 - pi[h]));
    CHECK(std::abs(static_cast<double>(visits[h]) - expect) < 6 * sigma);
  }
}
