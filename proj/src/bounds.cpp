#include "divkit/bounds.hpp"

#include "divkit/errors.hpp"
#include "divkit/parallel.hpp"
#include "divkit/rng.hpp"

namespace divkit {

TokenizedCorpus generate_bound_corpus(const Vocabulary& vocab, const BoundConfig& config) {
  if (vocab.size() < 3) throw DataError("bound corpus needs a vocabulary of at least 3 tokens");
  if (config.reference_vocab_size < 2) {
    throw DataError("reference_vocab_size must be at least 2");
  }
  if (config.n_sequences == 0 || config.seq_len == 0) {
    throw DataError("bound corpus needs positive n_sequences and seq_len");
  }

  TokenizedCorpus corpus;
  corpus.vocab_size = vocab.size();
  corpus.label = config.kind == BoundKind::lower ? "lower_bound" : "upper_bound";
  corpus.docs.resize(config.n_sequences);

  // The non-special token is fixed for the whole corpus and re-drawn only
  // when the seed changes.
  Rng pick(mix_seed(config.seed, 0xb0));
  const uint32_t fixed_token = 2 + pick.uniform_u32(vocab.size() - 2);
  const double p_eos = 1.0 / static_cast<double>(config.reference_vocab_size);

  parallel_for(config.n_sequences, [&](size_t d) {
    Rng rng(mix_seed(config.seed, d));
    auto& doc = corpus.docs[d];
    doc.resize(config.seq_len);
    for (auto& id : doc) {
      if (config.kind == BoundKind::lower) {
        id = rng.next_double() < p_eos ? vocab.eos_id : fixed_token;
      } else {
        id = 1 + rng.uniform_u32(vocab.size() - 1);  // uniform over non-pad ids
      }
    }
  });
  return corpus;
}

}  // namespace divkit
