#include "divkit/ginc.hpp"

#include "divkit/binio.hpp"
#include "divkit/errors.hpp"
#include "divkit/parallel.hpp"
#include "divkit/rng.hpp"

namespace divkit {

namespace {

constexpr uint32_t kDelimiterId = 2;  // first id after pad/eos
constexpr uint64_t kTransitionTag = 0x7a;
constexpr uint64_t kEmissionTag = 0xe3;

/// Bijective base-26 word: 0 -> "a", 25 -> "z", 26 -> "aa", ...
std::string word_token(uint32_t index) {
  std::string out;
  int64_t n = index;
  for (;;) {
    out.insert(out.begin(), static_cast<char>('a' + n % 26));
    n = n / 26 - 1;
    if (n < 0) break;
  }
  return out;
}

void fill_dirichlet_rows(std::vector<double>& matrix, uint32_t rows, uint32_t cols,
                         double alpha, Rng& rng) {
  matrix.resize(static_cast<size_t>(rows) * cols);
  for (uint32_t r = 0; r < rows; ++r) {
    const auto row = rng.dirichlet(alpha, cols);
    std::copy(row.begin(), row.end(), matrix.begin() + static_cast<size_t>(r) * cols);
  }
}

void validate(const GincConfig& c) {
  if (c.n_concepts < 1) throw DataError("ginc: n_concepts must be >= 1");
  if (c.vocab_size < 3) throw DataError("ginc: vocab_size must be >= 3");
  if (c.n_hidden_states < 1) throw DataError("ginc: n_hidden_states must be >= 1");
  if (c.transition_alpha <= 0.0 || c.emission_alpha <= 0.0) {
    throw DataError("ginc: Dirichlet concentrations must be positive");
  }
  if (c.n_docs < 1 || c.doc_len < 1) throw DataError("ginc: n_docs and doc_len must be >= 1");
  if (c.delimiter_period < 2) throw DataError("ginc: delimiter_period must be >= 2");
}

}  // namespace

Vocabulary generate_ginc_vocab(uint32_t size) {
  if (size < 3) throw DataError("ginc vocab size must be >= 3");
  std::vector<std::string> tokens{Vocabulary::kPadToken, Vocabulary::kEosToken, "\\"};
  for (uint32_t w = 0; w + 1 < size; ++w) tokens.push_back(word_token(w));
  return Vocabulary::from_tokens(std::move(tokens));
}

ConceptHMM sample_concept(const GincConfig& config, uint32_t concept_id) {
  validate(config);
  if (concept_id >= config.n_concepts) throw DataError("ginc: concept_id out of range");

  ConceptHMM hmm;
  hmm.concept_id = concept_id;
  hmm.n_hidden = config.n_hidden_states;
  hmm.n_words = config.vocab_size - 1;  // delimiter is inserted, never emitted

  Rng trans_rng(mix_seed(mix_seed(config.seed, kTransitionTag), concept_id));
  fill_dirichlet_rows(hmm.transition, hmm.n_hidden, hmm.n_hidden, config.transition_alpha,
                      trans_rng);

  const uint64_t emission_index = config.per_concept_emissions ? concept_id : 0;
  Rng emit_rng(mix_seed(mix_seed(config.seed, kEmissionTag), emission_index));
  fill_dirichlet_rows(hmm.emission, hmm.n_hidden, hmm.n_words, config.emission_alpha,
                      emit_rng);

  hmm.initial.assign(hmm.n_hidden, 1.0 / static_cast<double>(hmm.n_hidden));
  return hmm;
}

GincCorpus generate_ginc_corpus(const GincConfig& config) {
  validate(config);

  GincCorpus out;
  out.vocab = generate_ginc_vocab(config.vocab_size);

  std::vector<ConceptHMM> concepts(config.n_concepts);
  parallel_for(config.n_concepts, [&](size_t c) {
    concepts[c] = sample_concept(config, static_cast<uint32_t>(c));
  });

  out.corpus.label = "ginc";
  out.corpus.vocab_size = out.vocab.size();
  out.corpus.docs.resize(config.n_docs);
  out.concept_of_doc.resize(config.n_docs);

  parallel_for(config.n_docs, [&](size_t d) {
    Rng rng(mix_seed(mix_seed(config.seed, 0xd0c5), d));
    const uint32_t concept = rng.uniform_u32(config.n_concepts);
    out.concept_of_doc[d] = concept;
    const ConceptHMM& hmm = concepts[concept];

    auto& doc = out.corpus.docs[d];
    doc.resize(config.doc_len);
    uint32_t hidden = static_cast<uint32_t>(rng.categorical(hmm.initial));
    for (uint32_t t = 0; t < config.doc_len; ++t) {
      if ((t + 1) % config.delimiter_period == 0) {
        doc[t] = kDelimiterId;
        continue;  // structural token: the hidden chain does not advance
      }
      const uint32_t word = static_cast<uint32_t>(rng.categorical(hmm.emission_row(hidden)));
      doc[t] = kDelimiterId + 1 + word;
      hidden = static_cast<uint32_t>(rng.categorical(hmm.transition_row(hidden)));
    }
  });
  return out;
}

void write_ginc_plaintext(const std::string& corpus_path, const std::string& labels_csv_path,
                          const GincCorpus& ginc) {
  std::string text;
  for (const auto& doc : ginc.corpus.docs) {
    for (size_t t = 0; t < doc.size(); ++t) {
      if (t) text += ' ';
      text += ginc.vocab.tokens[doc[t]];
    }
    text += '\n';
  }
  write_file_bytes(corpus_path, text);

  std::string csv = "doc_index,concept_id\n";
  for (size_t d = 0; d < ginc.concept_of_doc.size(); ++d) {
    csv += std::to_string(d);
    csv += ',';
    csv += std::to_string(ginc.concept_of_doc[d]);
    csv += '\n';
  }
  write_file_bytes(labels_csv_path, csv);
}

}  // namespace divkit
