#include "isf/harness.hpp"

#include <cstdio>

#include "isf/corpus.hpp"
#include "isf/random.hpp"

namespace isf {

ModelTriple train_models(std::span<const TokenSeq> corpus, const Vocabulary& vocab,
                         const NGramOptions& options) {
  NGramOptions fwd = options;
  fwd.orientation = Orientation::kForward;
  NGramOptions bwd = options;
  bwd.orientation = Orientation::kBackward;

  auto flm = NGramLM::train(corpus, vocab, fwd);

  NGramLM::Trainer blm(vocab, bwd);
  NGramLM::Trainer pblm(vocab, bwd);
  for (const auto& s : corpus) {
    TokenSeq reversed(s.rbegin(), s.rend());
    blm.add(reversed);
    for_each_partial(std::span<const TokenId>(s), [&](std::span<const TokenId> p) { pblm.add(p); });
  }
  return {std::move(flm), std::move(blm).finish(), std::move(pblm).finish()};
}

Experiment build_experiment(const ExperimentOptions& options, std::uint64_t seed,
                            std::uint64_t language_seed) {
  SyntheticLanguage language(options.language, language_seed);
  const auto train_text = language.generate(options.lm_sentences, mix_seed(seed, 1));
  const auto heldout_text = language.generate(options.heldout_sentences, mix_seed(seed, 2));
  const auto test_text = language.generate(options.test_utterances, mix_seed(seed, 3));

  auto vocab = Vocabulary::build(train_text, 500);
  std::vector<TokenSeq> train;
  train.reserve(train_text.size());
  for (const auto& s : train_text) train.push_back(vocab.encode(s));
  auto models = train_models(train, vocab, options.lm);

  std::vector<TokenSeq> heldout;
  for (const auto& s : heldout_text) heldout.push_back(vocab.encode(s));

  std::vector<Utterance> test_set;
  test_set.reserve(test_text.size());
  for (std::size_t i = 0; i < test_text.size(); ++i) {
    auto ref = vocab.encode(test_text[i]);
    SynthOptions so;
    so.noise = options.noise;
    so.spread = options.spread;
    so.seed = mix_seed(seed, 1000 + i);
    char id[32];
    std::snprintf(id, sizeof id, "utt%04zu", i);
    auto grid = synth_grid(ref, vocab, so);
    test_set.push_back({id, std::move(grid), std::move(ref)});
  }
  return {std::move(vocab), std::move(models.flm), std::move(models.blm), std::move(models.pblm),
          std::move(heldout), std::move(test_set)};
}

}  // namespace isf
