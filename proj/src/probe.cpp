#include "divkit/probe.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "divkit/binio.hpp"
#include "divkit/errors.hpp"
#include "divkit/rng.hpp"

namespace divkit {

const char* featurizer_kind_name(FeaturizerKind kind) {
  switch (kind) {
    case FeaturizerKind::random_embedding_mean: return "random_embedding_mean";
    case FeaturizerKind::hashed_ngram: return "hashed_ngram";
    case FeaturizerKind::external_stream: return "external_stream";
  }
  return "?";
}

FeaturizerKind featurizer_kind_from_name(const std::string& name) {
  if (name == "random_embedding_mean") return FeaturizerKind::random_embedding_mean;
  if (name == "hashed_ngram") return FeaturizerKind::hashed_ngram;
  if (name == "external_stream") return FeaturizerKind::external_stream;
  throw DataError("unknown featurizer kind: " + name);
}

void save_external_features(const std::string& path, const ExternalFeatures& f) {
  if (f.data.size() != static_cast<size_t>(f.n_sequences) * f.max_len * f.m) {
    throw DataError("external features: data size does not match counts");
  }
  std::string out;
  out.reserve(16 + f.data.size() * 4);
  out += "FTS1";
  put_u32(out, f.n_sequences);
  put_u32(out, f.max_len);
  put_u32(out, f.m);
  for (float v : f.data) put_f32(out, v);
  write_file_bytes(path, out);
}

ExternalFeatures load_external_features(const std::string& path) {
  const std::string data = read_file_bytes(path);
  ByteReader reader(data, path);
  reader.expect_magic("FTS1");
  ExternalFeatures f;
  f.n_sequences = reader.u32();
  f.max_len = reader.u32();
  f.m = reader.u32();
  const size_t count = static_cast<size_t>(f.n_sequences) * f.max_len * f.m;
  if (reader.remaining() != count * 4) throw DataError(path + ": size mismatch");
  f.data.resize(count);
  for (auto& v : f.data) v = reader.f32();
  return f;
}

Featurizer Featurizer::random_embedding_mean(uint32_t vocab_size, uint32_t m, uint64_t seed) {
  Featurizer f;
  f.kind_ = FeaturizerKind::random_embedding_mean;
  f.vocab_size_ = vocab_size;
  f.m_ = m;
  f.seed_ = seed;
  f.embedding_.resize(static_cast<size_t>(vocab_size) * m);
  Rng rng(mix_seed(seed, 0x7ab1e));
  const double scale = 1.0 / std::sqrt(static_cast<double>(m));
  for (auto& v : f.embedding_) v = rng.normal() * scale;

  uint64_t h = fnv1a64("random_embedding_mean", 21);
  h = fnv1a64(&vocab_size, 4, h);
  h = fnv1a64(&m, 4, h);
  h = fnv1a64(&seed, 8, h);
  f.fingerprint_ = h;
  return f;
}

Featurizer Featurizer::hashed_ngram(uint32_t m, uint64_t salt) {
  Featurizer f;
  f.kind_ = FeaturizerKind::hashed_ngram;
  f.m_ = m;
  f.seed_ = salt;
  uint64_t h = fnv1a64("hashed_ngram", 12);
  h = fnv1a64(&m, 4, h);
  h = fnv1a64(&salt, 8, h);
  f.fingerprint_ = h;
  return f;
}

Featurizer Featurizer::external_stream(ExternalFeatures features) {
  Featurizer f;
  f.kind_ = FeaturizerKind::external_stream;
  f.m_ = features.m;
  uint64_t h = fnv1a64("external_stream", 15);
  h = fnv1a64(features.data.data(), features.data.size() * 4, h);
  f.fingerprint_ = h;
  f.external_ = std::make_shared<const ExternalFeatures>(std::move(features));
  return f;
}

void Featurizer::features(const Sequence& seq, uint32_t t, std::span<double> out,
                          uint32_t global_seq_index) const {
  if (t < 1 || t > seq.true_len) throw DataError("featurize: position out of range");
  std::fill(out.begin(), out.end(), 0.0);

  switch (kind_) {
    case FeaturizerKind::random_embedding_mean: {
      if (t == 1) return;  // empty context
      for (uint32_t i = 0; i + 1 < t; ++i) {
        const double* row = embedding_.data() + static_cast<size_t>(seq.token_ids[i]) * m_;
        for (uint32_t j = 0; j < m_; ++j) out[j] += row[j];
      }
      const double inv = 1.0 / static_cast<double>(t - 1);
      for (uint32_t j = 0; j < m_; ++j) out[j] *= inv;
      return;
    }
    case FeaturizerKind::hashed_ngram: {
      if (t == 1) return;
      const uint64_t prev = seq.token_ids[t - 2];
      out[mix64(seed_ ^ 0x11u ^ (prev + 1) * 0x9e3779b97f4a7c15ULL) % m_] += 1.0;
      if (t >= 3) {
        const uint64_t prev2 = seq.token_ids[t - 3];
        out[mix64(seed_ ^ 0x22u ^ (prev2 + 1) * 0xbf58476d1ce4e5b9ULL ^
                  (prev + 1) * 0x94d049bb133111ebULL) %
            m_] += 1.0;
      }
      double norm = 0.0;
      for (double v : out) norm += v * v;
      if (norm > 0.0) {
        const double inv = 1.0 / std::sqrt(norm);
        for (auto& v : out) v *= inv;
      }
      return;
    }
    case FeaturizerKind::external_stream: {
      const auto& ext = *external_;
      if (global_seq_index >= ext.n_sequences || t > ext.max_len) {
        throw DataError("external_stream: no entry for sequence " +
                        std::to_string(global_seq_index) + " position " + std::to_string(t));
      }
      const size_t off =
          (static_cast<size_t>(global_seq_index) * ext.max_len + (t - 1)) * ext.m;
      for (uint32_t j = 0; j < m_; ++j) out[j] = ext.data[off + j];
      return;
    }
  }
}

Head Head::zeros(uint32_t vocab_size, uint32_t m) {
  Head h;
  h.vocab_size = vocab_size;
  h.m = m;
  h.W.assign(static_cast<size_t>(vocab_size) * m, 0.0);
  h.b.assign(vocab_size, 0.0);
  return h;
}

uint64_t probe_fingerprint(const Featurizer& featurizer, const ProbeConfig& c) {
  uint64_t h = featurizer.fingerprint();
  const unsigned char flags =
      static_cast<unsigned char>((c.pretrained ? 1 : 0) | (c.finetune ? 2 : 0));
  h = fnv1a64(&flags, 1, h);
  h = fnv1a64(&c.epochs, 4, h);
  const double scalars[5] = {c.learning_rate, c.weight_decay, c.beta1, c.beta2, c.eps};
  h = fnv1a64(scalars, sizeof(scalars), h);
  h = fnv1a64(&c.init_seed, 8, h);
  return h;
}

void next_token_distribution(const Head& head, std::span<const double> phi,
                             std::span<double> p_out) {
  const uint32_t V = head.vocab_size;
  const uint32_t m = head.m;
  double max_logit = -1e300;
  for (uint32_t v = 0; v < V; ++v) {
    const double* row = head.W.data() + static_cast<size_t>(v) * m;
    double logit = head.b[v];
    for (uint32_t j = 0; j < m; ++j) logit += row[j] * phi[j];
    if (!std::isfinite(logit)) throw NumericError("non-finite logit");
    p_out[v] = logit;
    if (logit > max_logit) max_logit = logit;
  }
  double total = 0.0;
  for (uint32_t v = 0; v < V; ++v) {
    p_out[v] = std::exp(p_out[v] - max_logit);
    total += p_out[v];
  }
  const double inv = 1.0 / total;
  for (uint32_t v = 0; v < V; ++v) p_out[v] *= inv;
}

BatchFeatures batch_features(const Featurizer& featurizer, const Batch& batch) {
  BatchFeatures out;
  out.m = featurizer.dim();
  size_t total = 0;
  for (const auto& seq : batch.sequences) total += seq.true_len;
  out.n_positions = total;
  out.phi.resize(total * out.m);
  out.targets.resize(total);

  size_t row = 0;
  for (size_t s = 0; s < batch.sequences.size(); ++s) {
    const auto& seq = batch.sequences[s];
    const uint32_t global =
        batch.batch_index * static_cast<uint32_t>(batch.sequences.size()) +
        static_cast<uint32_t>(s);
    for (uint32_t t = 1; t <= seq.true_len; ++t, ++row) {
      featurizer.features(seq, t, {out.phi.data() + row * out.m, out.m}, global);
      out.targets[row] = seq.token_ids[t - 1];
    }
  }
  return out;
}

double cross_entropy(const Head& head, const BatchFeatures& f) {
  if (f.n_positions == 0) throw DataError("cross_entropy: no positions");
  std::vector<double> p(head.vocab_size);
  double total = 0.0;
  for (size_t r = 0; r < f.n_positions; ++r) {
    next_token_distribution(head, f.row(r), p);
    total += -std::log(std::max(p[f.targets[r]], 1e-300));
  }
  return total / static_cast<double>(f.n_positions);
}

void cross_entropy_gradient(const Head& head, const BatchFeatures& f, Head& grad) {
  const uint32_t V = head.vocab_size;
  const uint32_t m = head.m;
  grad.vocab_size = V;
  grad.m = m;
  grad.W.assign(static_cast<size_t>(V) * m, 0.0);
  grad.b.assign(V, 0.0);

  std::vector<double> p(V);
  for (size_t r = 0; r < f.n_positions; ++r) {
    const auto phi = f.row(r);
    next_token_distribution(head, phi, p);
    p[f.targets[r]] -= 1.0;  // now holds dL/dlogit for this row
    for (uint32_t v = 0; v < V; ++v) {
      const double coef = p[v];
      if (coef == 0.0) continue;
      double* wrow = grad.W.data() + static_cast<size_t>(v) * m;
      for (uint32_t j = 0; j < m; ++j) wrow[j] += coef * phi[j];
      grad.b[v] += coef;
    }
  }
  const double inv = 1.0 / static_cast<double>(f.n_positions);
  for (auto& g : grad.W) g *= inv;
  for (auto& g : grad.b) g *= inv;
}

namespace {

/// Decoupled-weight-decay Adam over the head parameters (W then b, one
/// shared step counter).
class AdamW {
 public:
  AdamW(size_t n, const ProbeConfig& c) : c_(c), m_(n, 0.0), v_(n, 0.0) {}

  void step(Head& head, const Head& grad) {
    ++t_;
    bc1_ = 1.0 - std::pow(c_.beta1, t_);
    bc2_ = 1.0 - std::pow(c_.beta2, t_);
    apply({head.W.data(), head.W.size()}, {grad.W.data(), grad.W.size()}, 0);
    apply({head.b.data(), head.b.size()}, {grad.b.data(), grad.b.size()}, head.W.size());
  }

 private:
  void apply(std::span<double> params, std::span<const double> grad, size_t offset) {
    for (size_t i = 0; i < params.size(); ++i) {
      const size_t k = offset + i;
      m_[k] = c_.beta1 * m_[k] + (1.0 - c_.beta1) * grad[i];
      v_[k] = c_.beta2 * v_[k] + (1.0 - c_.beta2) * grad[i] * grad[i];
      const double mhat = m_[k] / bc1_;
      const double vhat = v_[k] / bc2_;
      params[i] -= c_.learning_rate *
                   (mhat / (std::sqrt(vhat) + c_.eps) + c_.weight_decay * params[i]);
    }
  }

  ProbeConfig c_;
  int t_ = 0;
  double bc1_ = 1.0, bc2_ = 1.0;
  std::vector<double> m_, v_;
};

}  // namespace

Head finetune_head(const Head& init, const Featurizer& featurizer, const Batch& batch,
                   const ProbeConfig& config) {
  Head head = init;
  if (config.epochs == 0) return head;

  const BatchFeatures f = batch_features(featurizer, batch);
  AdamW opt(head.n_params(), config);
  Head grad;

  for (uint32_t epoch = 0; epoch < config.epochs; ++epoch) {
    cross_entropy_gradient(head, f, grad);
    opt.step(head, grad);
    for (double w : head.b) {
      if (!std::isfinite(w)) {
        throw NumericError("finetune diverged at epoch " + std::to_string(epoch));
      }
    }
  }
  const double final_loss = cross_entropy(head, f);
  if (!std::isfinite(final_loss)) {
    throw NumericError("finetune diverged at epoch " + std::to_string(config.epochs));
  }
  return head;
}

Head pretrain_reference(const Featurizer& featurizer, const Head& init,
                        const TokenizedCorpus& reference, uint32_t steps,
                        const ProbeConfig& config, uint32_t max_len,
                        uint32_t minibatch_sequences) {
  if (reference.docs.empty()) throw DataError("pretrain_reference: empty reference corpus");
  Head head = init;
  if (steps == 0) return head;

  AdamW opt(head.n_params(), config);
  Rng rng(mix_seed(config.init_seed, 0x9e7a1));
  Head grad;

  for (uint32_t step = 0; step < steps; ++step) {
    Batch mini;
    mini.batch_index = step;
    mini.label = reference.label;
    for (uint32_t s = 0; s < minibatch_sequences; ++s) {
      const auto& doc =
          reference.docs[rng.uniform_u32(static_cast<uint32_t>(reference.docs.size()))];
      Sequence seq;
      seq.true_len = std::min<uint32_t>(static_cast<uint32_t>(doc.size()), max_len);
      seq.token_ids.assign(doc.begin(), doc.begin() + seq.true_len);
      seq.token_ids.resize(max_len, 0);
      mini.sequences.push_back(std::move(seq));
    }
    const BatchFeatures f = batch_features(featurizer, mini);
    cross_entropy_gradient(head, f, grad);
    opt.step(head, grad);
    if (!std::isfinite(head.b[0])) {
      throw NumericError("pretraining diverged at step " + std::to_string(step));
    }
  }
  return head;
}

}  // namespace divkit
