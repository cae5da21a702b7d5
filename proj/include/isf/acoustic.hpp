#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "isf/common.hpp"
#include "isf/vocab.hpp"

namespace isf {

/// Per-step decoder posteriors standing in for an attention decoder. Row t
/// (1-based) is a log-probability distribution over the forward prediction
/// support, i.e. token ids 1..support_size (eos plus the ordinary tokens).
///
/// Rows do not depend on the hypothesis prefix.
class PosteriorGrid {
 public:
  /// `logprobs` is row-major, steps x support_size. Throws ValidationError if
  /// any row is not normalized within 1e-9 or contains NaN/+inf.
  PosteriorGrid(std::vector<double> logprobs, std::size_t steps, std::size_t support_size,
                std::string vocab_hash, std::optional<TokenSeq> reference = std::nullopt);

  static PosteriorGrid load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  std::size_t max_steps() const { return steps_; }
  std::size_t support_size() const { return support_; }
  const std::string& vocab_hash() const { return vocab_hash_; }
  const std::optional<TokenSeq>& reference() const { return reference_; }

  /// Throws std::out_of_range if `step` is outside 1..max_steps(); the decoder
  /// treats that as the forced-final boundary.
  double logprob(std::size_t step, TokenId token) const;
  std::span<const double> row(std::size_t step) const;

  bool operator==(const PosteriorGrid&) const = default;

 private:
  std::vector<double> logprobs_;
  std::size_t steps_;
  std::size_t support_;
  std::string vocab_hash_;
  std::optional<TokenSeq> reference_;
};

/// Score of `token` at `step`. `prefix` is accepted for prefix-aware scorers
/// and ignored by the grid.
double dec_logprob(const PosteriorGrid& grid, std::size_t step, TokenId token,
                   std::span<const TokenId> prefix = {});

struct SynthOptions {
  /// Mean posterior mass moved off the reference token, in [0, 1).
  double noise = 0.0;
  /// Number of confusable tokens sharing the moved mass.
  std::size_t spread = 3;
  std::uint64_t seed = 0;
  /// Extra eos rows after the reference.
  std::size_t slack = 10;
  /// Whether the slack rows also receive confusion noise. Off by default:
  /// noisy slack rows let a length reward pay for inserting tokens after
  /// the utterance has ended.
  bool noisy_slack = false;
};

inline constexpr double kGridFloor = 1e-8;

/// Noisy posterior grid for `reference`. Row t targets reference token t (eos
/// once the reference is exhausted). Per row the moved mass e_t is drawn from
/// an exponential with mean `noise` (capped below 1) and split over `spread`
/// random confusable tokens with flat-Dirichlet shares; the target keeps
/// 1 - e_t. Every entry gets a kGridFloor floor before renormalization.
/// Pure function of (reference, options).
PosteriorGrid synth_grid(std::span<const TokenId> reference, const Vocabulary& vocab,
                         const SynthOptions& options);

PosteriorGrid uniform_grid(std::size_t steps, const Vocabulary& vocab);

/// Argmax token per row until eos (ties go to the lower id).
TokenSeq greedy_decode(const PosteriorGrid& grid);

struct SyntheticLanguageOptions {
  std::size_t vocab_size = 40;
  /// Successors per token in the hidden first-order chain.
  std::size_t branching = 3;
  /// Fraction of tokens allowed to end a sentence.
  double final_fraction = 0.25;
  /// Probability of ending after a sentence-final token.
  double end_prob = 0.35;
  std::size_t min_length = 4;
  std::size_t max_length = 40;
};

/// Seeded random first-order Markov source used as desk-scale text: sparse,
/// skewed successor sets and a restricted set of sentence-final tokens, so
/// forward and backward n-gram models both have structure to learn.
class SyntheticLanguage {
 public:
  SyntheticLanguage(const SyntheticLanguageOptions& options, std::uint64_t seed);

  std::vector<std::vector<std::string>> generate(std::size_t sentences, std::uint64_t seed) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  SyntheticLanguageOptions options_;
  std::vector<std::string> tokens_;
  std::vector<std::vector<std::pair<std::size_t, double>>> successors_;  // cumulative weights
  std::vector<std::pair<std::size_t, double>> initial_;
  std::vector<bool> final_;
};

}  // namespace isf
