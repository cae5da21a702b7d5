#pragma once

#include <cstdint>
#include <vector>

#include "isf/acoustic.hpp"
#include "isf/eval.hpp"
#include "isf/ngram_lm.hpp"
#include "isf/vocab.hpp"

namespace isf {

/// Desk-scale stand-in for the LM-training text, held-out text and noisy
/// test utterances. Everything derives from one seed.
struct ExperimentOptions {
  SyntheticLanguageOptions language;
  std::size_t lm_sentences = 20000;
  std::size_t heldout_sentences = 1000;
  std::size_t test_utterances = 200;
  double noise = 0.4;
  std::size_t spread = 3;
  NGramOptions lm;
};

struct Experiment {
  Vocabulary vocab;
  NGramLM flm;
  NGramLM blm;
  NGramLM pblm;
  /// Held-out sentences in forward order.
  std::vector<TokenSeq> heldout;
  std::vector<Utterance> test_set;
};

/// The language itself is fixed by `language_seed`; `seed` drives all sampled
/// text and grid noise.
Experiment build_experiment(const ExperimentOptions& options, std::uint64_t seed,
                            std::uint64_t language_seed = 7);

/// Trains forward, backward and partial-sentence-aware backward models on
/// the same forward corpus.
struct ModelTriple {
  NGramLM flm;
  NGramLM blm;
  NGramLM pblm;
};
ModelTriple train_models(std::span<const TokenSeq> corpus, const Vocabulary& vocab,
                         const NGramOptions& options);

}  // namespace isf
