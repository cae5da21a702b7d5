#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "isf/acoustic.hpp"
#include "isf/common.hpp"
#include "isf/decoder.hpp"
#include "isf/fusion.hpp"
#include "isf/ngram_lm.hpp"

namespace isf {

struct WerReport {
  std::size_t substitutions = 0;
  std::size_t deletions = 0;
  std::size_t insertions = 0;
  std::size_t reference_length = 0;

  std::size_t errors() const { return substitutions + deletions + insertions; }
  /// Percentage.
  double wer() const;
  WerReport& operator+=(const WerReport& other);
};

/// Levenshtein alignment; backtrace ties prefer substitution, then deletion,
/// then insertion. Throws ConfigError on an empty reference.
WerReport edit_distance_wer(std::span<const TokenId> reference, std::span<const TokenId> hypothesis);

struct Utterance {
  std::string id;
  PosteriorGrid grid;
  TokenSeq reference;
};

/// One decoding setup: fusion weights/schedule plus the backward model it
/// fuses (BLM or PBLM). `backward` may be null only when beta is 0 and no
/// post-processing weight applies.
struct Method {
  std::string name;
  FusionConfig config;
  const NGramLM* backward = nullptr;
};

struct SweepRow {
  std::string name;
  FusionConfig config;
  /// Corpus-level WER (summed edits over summed reference length).
  WerReport total;
  std::vector<WerReport> per_utterance;
  std::vector<TokenSeq> hypotheses;
  std::size_t isf_evaluations = 0;
  std::size_t candidates_scored = 0;

  double wer() const { return total.wer(); }
};

struct SweepResult {
  std::vector<SweepRow> rows;

  const SweepRow& row(std::string_view name) const;
  /// Rows as TSV: name, config, WER, S, D, I, N, ISF evaluations, candidates.
  std::string to_tsv() const;
  /// WER delta and relative change for every ordered pair of rows, TSV.
  std::string deltas_tsv() const;
  std::string to_json() const;
};

/// Decodes every utterance under every method; utterances run on up to
/// `jobs` threads with results merged in input order.
SweepResult run_method_comparison(std::span<const Utterance> test_set, const NGramLM& flm,
                                  std::span<const Method> methods, std::size_t jobs = 1);

/// Rows for every L in `limits` plus L = inf, each with and without
/// post-processing. Row names: "L=<n> post", "L=<n> no-post", "L=inf post",
/// "L=inf no-post". `base.interval` must be 1.
SweepResult run_length_sweep(std::span<const Utterance> test_set, const NGramLM& flm,
                             const NGramLM& blm, const FusionConfig& base,
                             std::span<const std::size_t> limits, std::size_t jobs = 1);

/// One-sided sign test: P(X >= wins) for X ~ Binomial(wins + losses, 1/2).
double sign_test_p(std::size_t wins, std::size_t losses);

}  // namespace isf
