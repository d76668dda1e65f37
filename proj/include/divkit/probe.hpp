#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "divkit/corpus.hpp"

namespace divkit {

enum class FeaturizerKind { random_embedding_mean, hashed_ngram, external_stream };

const char* featurizer_kind_name(FeaturizerKind kind);
FeaturizerKind featurizer_kind_from_name(const std::string& name);

/// Precomputed context features for external_stream: one m-vector per
/// (sequence, position), loaded from an "FTS1" file.
struct ExternalFeatures {
  uint32_t n_sequences = 0;
  uint32_t max_len = 0;
  uint32_t m = 0;
  std::vector<float> data;  // (sequence, position) row-major
};

void save_external_features(const std::string& path, const ExternalFeatures& features);
ExternalFeatures load_external_features(const std::string& path);

/// The frozen probe body. Parameters are fixed at construction; only the
/// head on top of it is ever trained.
class Featurizer {
 public:
  static Featurizer random_embedding_mean(uint32_t vocab_size, uint32_t m, uint64_t seed);
  static Featurizer hashed_ngram(uint32_t m, uint64_t salt);
  static Featurizer external_stream(ExternalFeatures features);

  FeaturizerKind kind() const { return kind_; }
  uint32_t dim() const { return m_; }
  uint64_t fingerprint() const { return fingerprint_; }

  /// Feature vector for predicting position t (1-based); the context is
  /// tokens [0, t-1). For external_stream, global_seq_index selects the
  /// stream row.
  void features(const Sequence& seq, uint32_t t, std::span<double> out,
                uint32_t global_seq_index = 0) const;

 private:
  Featurizer() = default;

  FeaturizerKind kind_ = FeaturizerKind::random_embedding_mean;
  uint32_t m_ = 0;
  uint32_t vocab_size_ = 0;
  uint64_t seed_ = 0;
  uint64_t fingerprint_ = 0;
  std::vector<double> embedding_;  // vocab_size x m, random_embedding_mean only
  std::shared_ptr<const ExternalFeatures> external_;
};

/// Trainable linear softmax head: logits = W phi + b.
struct Head {
  uint32_t vocab_size = 0;
  uint32_t m = 0;
  std::vector<double> W;  // vocab_size x m, row-major
  std::vector<double> b;  // vocab_size

  static Head zeros(uint32_t vocab_size, uint32_t m);
  size_t n_params() const { return W.size() + b.size(); }
};

struct ProbeConfig {
  bool pretrained = true;
  bool finetune = true;
  uint32_t epochs = 10;
  double learning_rate = 1e-2;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  uint64_t init_seed = 0;
};

uint64_t probe_fingerprint(const Featurizer& featurizer, const ProbeConfig& config);

/// softmax(W phi + b) with max-subtraction. Throws NumericError on
/// non-finite logits.
void next_token_distribution(const Head& head, std::span<const double> phi,
                             std::span<double> p_out);

/// All prediction positions of a batch: row r holds the context features,
/// targets[r] the token to predict. Pad positions are not rows.
struct BatchFeatures {
  uint32_t m = 0;
  size_t n_positions = 0;
  std::vector<double> phi;       // n_positions x m
  std::vector<uint32_t> targets;

  std::span<const double> row(size_t r) const { return {phi.data() + r * m, m}; }
};

BatchFeatures batch_features(const Featurizer& featurizer, const Batch& batch);

/// Mean next-token cross-entropy over the rows.
double cross_entropy(const Head& head, const BatchFeatures& features);

/// Analytic gradient of cross_entropy w.r.t. W and b (weight decay excluded;
/// AdamW applies it decoupled).
void cross_entropy_gradient(const Head& head, const BatchFeatures& features, Head& grad);

/// AdamW on the averaged next-token cross-entropy: one full-batch update per
/// epoch, config.epochs epochs. Throws NumericError (with the epoch index)
/// if the loss goes non-finite.
Head finetune_head(const Head& init, const Featurizer& featurizer, const Batch& batch,
                   const ProbeConfig& config);

/// AdamW steps on minibatches drawn from the reference corpus; returns the
/// head used as the "pretrained" initialization.
Head pretrain_reference(const Featurizer& featurizer, const Head& init,
                        const TokenizedCorpus& reference, uint32_t steps,
                        const ProbeConfig& config, uint32_t max_len,
                        uint32_t minibatch_sequences = 32);

}  // namespace divkit
