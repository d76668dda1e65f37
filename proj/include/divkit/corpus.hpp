#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace divkit {

/// Token table. Index 0 is always the pad token, index 1 the eos token;
/// unknown tokens map to eos at encode time.
struct Vocabulary {
  std::vector<std::string> tokens;
  std::unordered_map<std::string, uint32_t> id_of;
  uint32_t pad_id = 0;
  uint32_t eos_id = 1;

  static constexpr const char* kPadToken = "<pad>";
  static constexpr const char* kEosToken = "<eos>";

  /// Builds the lookup table and validates uniqueness / reserved slots.
  static Vocabulary from_tokens(std::vector<std::string> tokens);

  uint32_t size() const { return static_cast<uint32_t>(tokens.size()); }
  uint32_t encode_token(const std::string& tok) const {
    auto it = id_of.find(tok);
    return it == id_of.end() ? eos_id : it->second;
  }
};

/// Fixed-shape token row. Positions >= true_len hold pad; positions below
/// never do.
struct Sequence {
  std::vector<uint32_t> token_ids;
  uint32_t true_len = 0;
  uint32_t source = 0;  // dataset index at sampling time
};

struct Batch {
  std::vector<Sequence> sequences;
  uint32_t batch_index = 0;
  std::string label;  // single dataset name, or "union" for mixed batches

  uint32_t max_len() const {
    return sequences.empty() ? 0 : static_cast<uint32_t>(sequences.front().token_ids.size());
  }
  /// Multiset of dataset indices present in this batch.
  std::map<uint32_t, size_t> source_counts() const;
};

enum class SamplingMode { union_mode, per_dataset };

struct SamplingPlan {
  SamplingMode mode = SamplingMode::per_dataset;
  std::vector<double> mixture_weights;  // union mode only, one per dataset
  uint32_t n_batches = 2;
  uint32_t batch_size = 2;
  uint32_t max_len = 32;
  uint64_t master_seed = 0;
};

/// Documents already encoded to token ids against some Vocabulary.
struct TokenizedCorpus {
  std::string label;
  uint32_t vocab_size = 0;
  std::vector<std::vector<uint32_t>> docs;
};

enum class CorpusFormat { plaintext, jsonl };

/// Reads documents in file order. Plaintext is one document per line; jsonl
/// records must carry a string "text" field. Documents that are empty after
/// whitespace trimming are dropped. A UTF-8 BOM on the first line is stripped.
std::vector<std::string> load_corpus(const std::string& path, CorpusFormat format);

/// pad, eos, then the (max_vocab - 2) most frequent whitespace tokens, ties
/// broken lexicographically.
Vocabulary build_vocab(const std::vector<std::string>& documents, uint32_t max_vocab);

/// Whitespace-splits one document; unknown tokens become eos.
std::vector<uint32_t> encode(const Vocabulary& vocab, const std::string& document);

TokenizedCorpus tokenize_corpus(const Vocabulary& vocab,
                                const std::vector<std::string>& documents,
                                std::string label);

/// Deterministic batch sampling. Union mode draws each sequence's dataset
/// independently from mixture_weights; per-dataset mode assigns equal blocks
/// of single-source batches. Documents are drawn with replacement, then
/// padded or truncated to max_len.
std::vector<Batch> sample_batches(const std::vector<TokenizedCorpus>& datasets,
                                  const SamplingPlan& plan);

struct BatchArchive {
  uint32_t vocab_size = 0;
  uint32_t max_len = 0;
  uint32_t batch_size = 0;
  std::vector<Batch> batches;  // labels restored from the footer
};

/// "DVB1" archive: magic, then vocab size / max_len / batch_size / n_batches
/// as u32 LE, then token ids u32 LE in (batch, sequence, position) order,
/// then a footer of length-prefixed dataset labels, one per batch.
void save_batches(const std::string& path, const std::vector<Batch>& batches,
                  uint32_t vocab_size);
BatchArchive load_batches(const std::string& path);

}  // namespace divkit
