#include "divkit/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "divkit/binio.hpp"
#include "divkit/errors.hpp"
#include "divkit/parallel.hpp"
#include "divkit/rng.hpp"

namespace divkit {

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

void strip_bom(std::string& line) {
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF &&
      static_cast<unsigned char>(line[1]) == 0xBB &&
      static_cast<unsigned char>(line[2]) == 0xBF) {
    line.erase(0, 3);
  }
}

}  // namespace

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  if (tokens.size() < 3) throw DataError("vocabulary needs pad, eos and at least one token");
  if (tokens[0] != kPadToken || tokens[1] != kEosToken) {
    throw DataError("vocabulary must start with <pad>, <eos>");
  }
  Vocabulary v;
  v.tokens = std::move(tokens);
  v.id_of.reserve(v.tokens.size());
  for (uint32_t i = 0; i < v.tokens.size(); ++i) {
    if (!v.id_of.emplace(v.tokens[i], i).second) {
      throw DataError("duplicate token in vocabulary: " + v.tokens[i]);
    }
  }
  return v;
}

std::map<uint32_t, size_t> Batch::source_counts() const {
  std::map<uint32_t, size_t> counts;
  for (const auto& s : sequences) ++counts[s.source];
  return counts;
}

std::vector<std::string> load_corpus(const std::string& path, CorpusFormat format) {
  std::ifstream in(path);
  if (!in) throw DataError("missing file: " + path);

  std::vector<std::string> docs;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1) strip_bom(line);

    if (format == CorpusFormat::plaintext) {
      if (!trim(line).empty()) docs.push_back(line);
      continue;
    }

    if (trim(line).empty()) continue;
    nlohmann::json rec = nlohmann::json::parse(line, nullptr, false);
    if (rec.is_discarded() || !rec.is_object() || !rec.contains("text") ||
        !rec["text"].is_string()) {
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": malformed jsonl record (expected object with string \"text\")");
    }
    std::string text = rec["text"].get<std::string>();
    if (!trim(text).empty()) docs.push_back(std::move(text));
  }
  return docs;
}

Vocabulary build_vocab(const std::vector<std::string>& documents, uint32_t max_vocab) {
  if (max_vocab < 3) throw DataError("max_vocab must be at least 3");
  if (documents.empty()) throw DataError("cannot build vocabulary from an empty corpus");

  std::unordered_map<std::string, uint64_t> counts;
  for (const auto& doc : documents) {
    std::istringstream words(doc);
    std::string tok;
    while (words >> tok) {
      if (tok == Vocabulary::kPadToken || tok == Vocabulary::kEosToken) continue;
      ++counts[tok];
    }
  }

  std::vector<std::pair<std::string, uint64_t>> ranked(counts.begin(), counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  std::vector<std::string> tokens{Vocabulary::kPadToken, Vocabulary::kEosToken};
  const size_t keep = std::min<size_t>(ranked.size(), max_vocab - 2);
  for (size_t i = 0; i < keep; ++i) tokens.push_back(ranked[i].first);
  return Vocabulary::from_tokens(std::move(tokens));
}

std::vector<uint32_t> encode(const Vocabulary& vocab, const std::string& document) {
  std::vector<uint32_t> ids;
  std::istringstream words(document);
  std::string tok;
  while (words >> tok) ids.push_back(vocab.encode_token(tok));
  return ids;
}

TokenizedCorpus tokenize_corpus(const Vocabulary& vocab,
                                const std::vector<std::string>& documents,
                                std::string label) {
  TokenizedCorpus corpus;
  corpus.label = std::move(label);
  corpus.vocab_size = vocab.size();
  corpus.docs.reserve(documents.size());
  for (const auto& doc : documents) {
    auto ids = encode(vocab, doc);
    if (!ids.empty()) corpus.docs.push_back(std::move(ids));
  }
  return corpus;
}

namespace {

Sequence make_sequence(const std::vector<uint32_t>& doc, uint32_t max_len, uint32_t source) {
  Sequence seq;
  seq.true_len = std::min<uint32_t>(static_cast<uint32_t>(doc.size()), max_len);
  seq.token_ids.assign(doc.begin(), doc.begin() + seq.true_len);
  seq.token_ids.resize(max_len, 0);  // pad_id == 0 by construction
  seq.source = source;
  return seq;
}

}  // namespace

std::vector<Batch> sample_batches(const std::vector<TokenizedCorpus>& datasets,
                                  const SamplingPlan& plan) {
  const size_t k = datasets.size();
  if (k == 0) throw DataError("sample_batches: no datasets");
  for (const auto& d : datasets) {
    if (d.docs.empty()) throw DataError("sample_batches: empty corpus \"" + d.label + "\"");
  }
  if (plan.n_batches < 2) throw DataError("sample_batches: n_batches must be >= 2");
  if (plan.batch_size < 2) throw DataError("sample_batches: batch_size must be >= 2");
  if (plan.max_len < 1) throw DataError("sample_batches: max_len must be >= 1");

  if (plan.mode == SamplingMode::union_mode) {
    if (plan.mixture_weights.size() != k) {
      throw DataError("sample_batches: mixture_weights count does not match dataset count");
    }
    double total = 0.0;
    for (double w : plan.mixture_weights) {
      if (w < 0.0) throw DataError("sample_batches: negative mixture weight");
      total += w;
    }
    if (std::abs(total - 1.0) > 1e-9) {
      throw DataError("sample_batches: mixture_weights must sum to 1");
    }
  } else if (plan.n_batches % k != 0) {
    throw DataError("sample_batches: per-dataset mode needs n_batches divisible by dataset count");
  }

  std::vector<Batch> batches(plan.n_batches);
  const uint32_t per_dataset_block = plan.n_batches / static_cast<uint32_t>(k);

  parallel_for(plan.n_batches, [&](size_t b) {
    Rng rng(mix_seed(plan.master_seed, b));
    Batch& batch = batches[b];
    batch.batch_index = static_cast<uint32_t>(b);
    batch.sequences.reserve(plan.batch_size);

    uint32_t fixed_source = 0;
    if (plan.mode == SamplingMode::per_dataset) {
      fixed_source = static_cast<uint32_t>(b) / per_dataset_block;
      batch.label = datasets[fixed_source].label;
    } else {
      batch.label = "union";
    }

    for (uint32_t s = 0; s < plan.batch_size; ++s) {
      uint32_t source = fixed_source;
      if (plan.mode == SamplingMode::union_mode) {
        source = static_cast<uint32_t>(rng.categorical(plan.mixture_weights));
      }
      const auto& docs = datasets[source].docs;
      const auto& doc = docs[rng.uniform_u32(static_cast<uint32_t>(docs.size()))];
      batch.sequences.push_back(make_sequence(doc, plan.max_len, source));
    }
  });

  return batches;
}

void save_batches(const std::string& path, const std::vector<Batch>& batches,
                  uint32_t vocab_size) {
  if (batches.empty()) throw DataError("save_batches: nothing to save");
  const uint32_t max_len = batches.front().max_len();
  const uint32_t batch_size = static_cast<uint32_t>(batches.front().sequences.size());

  std::string out;
  out.reserve(20 + static_cast<size_t>(batches.size()) * batch_size * max_len * 4);
  out += "DVB1";
  put_u32(out, vocab_size);
  put_u32(out, max_len);
  put_u32(out, batch_size);
  put_u32(out, static_cast<uint32_t>(batches.size()));

  for (const auto& batch : batches) {
    if (batch.sequences.size() != batch_size || batch.max_len() != max_len) {
      throw DataError("save_batches: ragged batch shapes");
    }
    for (const auto& seq : batch.sequences) {
      for (uint32_t id : seq.token_ids) put_u32(out, id);
    }
  }
  for (const auto& batch : batches) {
    put_u32(out, static_cast<uint32_t>(batch.label.size()));
    out += batch.label;
  }
  write_file_bytes(path, out);
}

BatchArchive load_batches(const std::string& path) {
  const std::string data = read_file_bytes(path);
  ByteReader reader(data, path);
  reader.expect_magic("DVB1");

  BatchArchive archive;
  archive.vocab_size = reader.u32();
  archive.max_len = reader.u32();
  archive.batch_size = reader.u32();
  const uint32_t n_batches = reader.u32();

  archive.batches.resize(n_batches);
  for (uint32_t b = 0; b < n_batches; ++b) {
    Batch& batch = archive.batches[b];
    batch.batch_index = b;
    batch.sequences.resize(archive.batch_size);
    for (auto& seq : batch.sequences) {
      seq.token_ids.resize(archive.max_len);
      for (auto& id : seq.token_ids) {
        id = reader.u32();
        if (id >= archive.vocab_size) throw DataError(path + ": token id out of range");
      }
      uint32_t len = archive.max_len;
      for (uint32_t t = 0; t < archive.max_len; ++t) {
        if (seq.token_ids[t] == 0) {  // pad_id
          len = t;
          break;
        }
      }
      if (len == 0) throw DataError(path + ": sequence with no content tokens");
      seq.true_len = len;
    }
  }

  std::vector<std::string> labels(n_batches);
  std::vector<std::string> distinct;
  for (uint32_t b = 0; b < n_batches; ++b) {
    labels[b] = reader.bytes(reader.u32());
    if (std::find(distinct.begin(), distinct.end(), labels[b]) == distinct.end()) {
      distinct.push_back(labels[b]);
    }
  }
  for (uint32_t b = 0; b < n_batches; ++b) {
    archive.batches[b].label = labels[b];
    const uint32_t source = static_cast<uint32_t>(
        std::find(distinct.begin(), distinct.end(), labels[b]) - distinct.begin());
    for (auto& seq : archive.batches[b].sequences) seq.source = source;
  }
  return archive;
}

}  // namespace divkit
