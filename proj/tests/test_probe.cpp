#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <vector>

#include "divkit/corpus.hpp"
#include "divkit/errors.hpp"
#include "divkit/probe.hpp"
#include "divkit/rng.hpp"

using namespace divkit;

namespace {

Sequence seq_of(std::vector<uint32_t> ids, uint32_t max_len) {
  Sequence s;
  s.true_len = static_cast<uint32_t>(ids.size());
  s.token_ids = std::move(ids);
  s.token_ids.resize(max_len, 0);
  return s;
}

Batch batch_of(std::vector<Sequence> seqs, uint32_t index = 0) {
  Batch b;
  b.sequences = std::move(seqs);
  b.batch_index = index;
  b.label = "test";
  return b;
}

Head random_head(uint32_t V, uint32_t m, uint64_t seed, double scale = 0.5) {
  Head h = Head::zeros(V, m);
  Rng rng(seed);
  for (auto& w : h.W) w = rng.normal() * scale;
  for (auto& w : h.b) w = rng.normal() * scale;
  return h;
}

BatchFeatures random_features(uint32_t V, uint32_t m, size_t n, uint64_t seed) {
  BatchFeatures f;
  f.m = m;
  f.n_positions = n;
  f.phi.resize(n * m);
  f.targets.resize(n);
  Rng rng(seed);
  for (auto& v : f.phi) v = rng.normal();
  for (auto& t : f.targets) t = 1 + rng.uniform_u32(V - 1);
  return f;
}

}  // namespace

TEST_CASE("random_embedding_mean features") {
  const uint32_t V = 8, m = 4;
  const auto feat = Featurizer::random_embedding_mean(V, m, 99);
  const auto seq = seq_of({3, 5, 7}, 6);
  std::vector<double> phi(m);

  SUBCASE("empty context is the zero vector") {
    feat.features(seq, 1, phi);
    for (double v : phi) CHECK(v == 0.0);
  }
  SUBCASE("singleton context is that embedding row") {
    feat.features(seq, 2, phi);
    std::vector<double> expect(m, 0.0);
    Sequence probeseq = seq_of({3, 3}, 4);
    feat.features(probeseq, 2, expect);
    CHECK(phi == expect);
  }
  SUBCASE("two-token context is the element-wise mean") {
    // Hand-computed oracle: mean of row(3) and row(5) via singleton lookups.
    std::vector<double> row3(m), row5(m);
    feat.features(seq_of({3, 0}, 4), 2, row3);
    feat.features(seq_of({5, 0}, 4), 2, row5);
    feat.features(seq, 3, phi);
    for (uint32_t j = 0; j < m; ++j) {
      CHECK(phi[j] == doctest::Approx(0.5 * (row3[j] + row5[j])).epsilon(1e-15));
    }
  }
  SUBCASE("position out of range") {
    CHECK_THROWS_AS(feat.features(seq, 4, phi), DataError);
  }
}

TEST_CASE("hashed_ngram features are unit-norm past t=1") {
  const auto feat = Featurizer::hashed_ngram(16, 7);
  const auto seq = seq_of({3, 5, 7, 9}, 6);
  std::vector<double> phi(16);
  feat.features(seq, 1, phi);
  double norm = 0;
  for (double v : phi) norm += v * v;
  CHECK(norm == 0.0);
  for (uint32_t t = 2; t <= 4; ++t) {
    feat.features(seq, t, phi);
    norm = 0;
    for (double v : phi) norm += v * v;
    CHECK(norm == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("external stream round-trips and serves positions") {
  ExternalFeatures ext;
  ext.n_sequences = 2;
  ext.max_len = 3;
  ext.m = 2;
  ext.data = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12};
  const auto path =
      (std::filesystem::temp_directory_path() / "divkit_stream.fts").string();
  save_external_features(path, ext);
  const auto loaded = load_external_features(path);
  CHECK(loaded.data == ext.data);

  const auto feat = Featurizer::external_stream(loaded);
  std::vector<double> phi(2);
  const auto seq = seq_of({1, 2, 3}, 3);
  feat.features(seq, 2, phi, 1);
  CHECK(phi[0] == 9.0f);
  CHECK(phi[1] == 10.0f);
  CHECK_THROWS_AS(feat.features(seq, 2, phi, 5), DataError);
}

TEST_CASE("softmax distribution") {
  const uint32_t V = 5, m = 3;
  std::vector<double> p(V), phi(m, 0.3);

  SUBCASE("zero head is uniform") {
    const Head head = Head::zeros(V, m);
    next_token_distribution(head, phi, p);
    for (double v : p) CHECK(v == doctest::Approx(0.2).epsilon(1e-12));
  }
  SUBCASE("dominant bias concentrates") {
    Head head = Head::zeros(V, m);
    head.b[0] = 200.0;
    for (uint32_t v = 1; v < V; ++v) head.b[v] = -200.0;
    next_token_distribution(head, phi, p);
    CHECK(p[0] == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("matches the naive exp/normalize oracle") {
    const Head head = random_head(V, m, 5);
    Rng rng(6);
    std::vector<double> raw(m);
    for (auto& v : raw) v = rng.normal();
    next_token_distribution(head, raw, p);

    std::vector<double> oracle(V);
    double total = 0;
    for (uint32_t v = 0; v < V; ++v) {
      double logit = head.b[v];
      for (uint32_t j = 0; j < m; ++j) logit += head.W[v * m + j] * raw[j];
      oracle[v] = std::exp(logit);
      total += oracle[v];
    }
    double sum_p = 0;
    for (uint32_t v = 0; v < V; ++v) {
      CHECK(p[v] == doctest::Approx(oracle[v] / total).epsilon(1e-12));
      sum_p += p[v];
      CHECK(p[v] > 0.0);
    }
    CHECK(sum_p == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("gradient matches central finite differences") {
  const uint32_t V = 6, m = 4;
  Head head = random_head(V, m, 21, 0.3);
  const auto f = random_features(V, m, 10, 22);

  Head grad;
  cross_entropy_gradient(head, f, grad);

  const double h = 1e-5;
  auto check_param = [&](double& param, double analytic) {
    const double saved = param;
    param = saved + h;
    const double up = cross_entropy(head, f);
    param = saved - h;
    const double down = cross_entropy(head, f);
    param = saved;
    const double numeric = (up - down) / (2 * h);
    CHECK(analytic == doctest::Approx(numeric).epsilon(1e-4));
  };

  for (uint32_t v = 0; v < V; v += 2) {
    for (uint32_t j = 0; j < m; j += 2) check_param(head.W[v * m + j], grad.W[v * m + j]);
    check_param(head.b[v], grad.b[v]);
  }
}

TEST_CASE("pad positions contribute zero gradient") {
  const uint32_t V = 6, m = 3;
  const auto feat = Featurizer::random_embedding_mean(V, m, 1);
  const Head head = random_head(V, m, 2, 0.2);

  // Same content, one padded to twice the length: identical gradients.
  const auto padded = batch_of({seq_of({2, 3, 4}, 8), seq_of({5, 2}, 8)});
  const auto tight = batch_of({seq_of({2, 3, 4}, 4), seq_of({5, 2}, 4)});

  Head g_padded, g_tight;
  cross_entropy_gradient(head, batch_features(feat, padded), g_padded);
  cross_entropy_gradient(head, batch_features(feat, tight), g_tight);
  for (size_t i = 0; i < g_padded.W.size(); ++i) {
    CHECK(g_padded.W[i] == doctest::Approx(g_tight.W[i]).epsilon(1e-14));
  }
  for (size_t i = 0; i < g_padded.b.size(); ++i) {
    CHECK(g_padded.b[i] == doctest::Approx(g_tight.b[i]).epsilon(1e-14));
  }
}

TEST_CASE("finetune_head") {
  const uint32_t V = 6, m = 4;
  const auto feat = Featurizer::random_embedding_mean(V, m, 31);
  const auto batch = batch_of({seq_of({2, 2, 2, 2, 2, 2}, 8), seq_of({2, 2, 2, 2}, 8)});
  ProbeConfig config;
  config.epochs = 0;

  SUBCASE("zero epochs is a no-op") {
    const Head init = random_head(V, m, 33, 0.2);
    const Head out = finetune_head(init, feat, batch, config);
    CHECK(out.W == init.W);
    CHECK(out.b == init.b);
  }

  SUBCASE("loss never increases and p(repeated token) rises monotonically") {
    config.epochs = 1;
    Head head = Head::zeros(V, m);
    const auto f = batch_features(feat, batch);
    double prev_loss = cross_entropy(head, f);

    // p(token 2 | context of 2s) at the position after one context token.
    std::vector<double> phi(m), p(V);
    feat.features(batch.sequences[0], 2, phi);
    double prev_p = 0.0;
    for (int epoch = 0; epoch < 10; ++epoch) {
      head = finetune_head(head, feat, batch, config);
      const double loss = cross_entropy(head, f);
      CHECK(loss <= prev_loss + 1e-6);
      prev_loss = loss;
      next_token_distribution(head, phi, p);
      CHECK(p[2] > prev_p);
      prev_p = p[2];
    }
    CHECK(prev_p > 0.5);
  }
}

TEST_CASE("pretrain_reference") {
  const uint32_t m = 8;
  const Vocabulary vocab = build_vocab({"a b"}, 4);
  const uint32_t V = vocab.size();
  const auto feat = Featurizer::random_embedding_mean(V, m, 41);

  TokenizedCorpus ref;
  ref.label = "ref";
  ref.vocab_size = V;
  for (int i = 0; i < 8; ++i) ref.docs.push_back(encode(vocab, "a b"));

  ProbeConfig config;
  config.learning_rate = 0.05;
  config.weight_decay = 0.0;
  config.init_seed = 17;

  SUBCASE("zero steps is a no-op") {
    const Head init = random_head(V, m, 43, 0.1);
    const Head out = pretrain_reference(feat, init, ref, 0, config, 4);
    CHECK(out.W == init.W);
  }

  SUBCASE("repeated bigram drives p(b|a) high and loss down") {
    const Head init = Head::zeros(V, m);
    const Head out = pretrain_reference(feat, init, ref, 400, config, 4);

    Batch probe = batch_of({seq_of(encode(vocab, "a b"), 4), seq_of(encode(vocab, "a b"), 4)});
    const auto f = batch_features(feat, probe);
    CHECK(cross_entropy(out, f) < cross_entropy(init, f));

    std::vector<double> phi(m), p(V);
    feat.features(probe.sequences[0], 2, phi);  // context ["a"]
    next_token_distribution(out, phi, p);
    CHECK(p[vocab.encode_token("b")] > 0.9);
  }

  SUBCASE("empty reference rejected") {
    TokenizedCorpus empty;
    empty.vocab_size = V;
    CHECK_THROWS_AS(pretrain_reference(feat, Head::zeros(V, m), empty, 10, config, 4),
                    DataError);
  }
}
