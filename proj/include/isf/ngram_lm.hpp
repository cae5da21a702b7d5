#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "isf/common.hpp"
#include "isf/vocab.hpp"

namespace isf {

enum class Orientation { kForward, kBackward };

const char* to_string(Orientation o);
Orientation parse_orientation(std::string_view s);

struct NGramOptions {
  int order = 3;
  /// lambdas[n-1] weights the order-n maximum-likelihood estimate. The
  /// remaining mass 1 - sum(lambdas) goes to the uniform 1/(V+1) floor, so
  /// sum(lambdas) must stay below 1.
  std::vector<double> lambdas = {0.1, 0.3, 0.5};
  Orientation orientation = Orientation::kForward;
};

/// Order-N Jelinek-Mercer interpolated n-gram model with a uniform floor.
///
///   P(w | c) = sum_n lambda_n * ML_n(w | c_n) + lambda_0 / (V + 1)
///
/// where c_n is the last n-1 tokens of c. When c_n was never observed in
/// training (or c is shorter than n-1 tokens), lambda_n is handed down to the
/// next lower order, so every conditional stays normalized over the
/// prediction support.
///
/// A forward model is trained on sos body eos; a backward model is trained on
/// eos body sos, where body is an already reversed sentence.
class NGramLM {
 public:
  class Trainer;

  static NGramLM train(std::span<const TokenSeq> corpus, const Vocabulary& vocab,
                       const NGramOptions& options);

  static NGramLM load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  /// Natural-log probability of `token` after `context`. Only the last
  /// order-1 tokens of the context are used. Throws std::invalid_argument if
  /// `token` is outside the prediction support.
  double logprob(TokenId token, std::span<const TokenId> context) const;
  double prob(TokenId token, std::span<const TokenId> context) const;

  int order() const { return order_; }
  const std::vector<double>& lambdas() const { return lambdas_; }
  Orientation orientation() const { return orientation_; }
  TokenId start_symbol() const;
  TokenId terminal_symbol() const;
  bool in_support(TokenId id) const;
  /// Prediction support in ascending id order.
  std::vector<TokenId> support() const;
  std::size_t support_size() const { return vocab_total_ - 1; }
  std::size_t vocab_total() const { return vocab_total_; }
  const std::string& vocab_hash() const { return vocab_hash_; }

  /// Number of distinct (context, token) records stored at `order`.
  std::size_t ngram_count(int order) const;

 private:
  struct ContextEntry {
    std::uint64_t total = 0;
    std::vector<std::pair<TokenId, std::uint64_t>> successors;  // sorted by token

    std::uint64_t count(TokenId token) const;
  };
  using Level = std::unordered_map<std::uint64_t, ContextEntry>;

  NGramLM() = default;
  void init(int order, std::vector<double> lambdas, Orientation orientation,
            std::size_t vocab_total, std::string vocab_hash);
  std::uint64_t pack(std::span<const TokenId> ctx) const;
  std::vector<TokenId> unpack(std::uint64_t key, std::size_t length) const;
  void check_token(TokenId id) const;

  int order_ = 1;
  std::vector<double> lambdas_;
  double floor_weight_ = 0.0;
  Orientation orientation_ = Orientation::kForward;
  std::size_t vocab_total_ = 0;
  std::string vocab_hash_;
  unsigned bits_per_token_ = 1;
  std::vector<Level> levels_;  // levels_[n-1] holds order-n contexts
};

/// Incremental count accumulation; lets callers stream very large corpora
/// (e.g. partial-sentence data) without materializing them.
class NGramLM::Trainer {
 public:
  Trainer(const Vocabulary& vocab, NGramOptions options);

  /// Adds one sentence body (no start/terminal symbols).
  void add(std::span<const TokenId> body);
  std::size_t sentences() const { return sentences_; }
  NGramLM finish() &&;

 private:
  NGramLM lm_;
  std::vector<std::unordered_map<std::uint64_t, std::unordered_map<TokenId, std::uint64_t>>>
      counts_;
  std::size_t sentences_ = 0;
  TokenSeq wrapped_;
};

double lm_logprob(const NGramLM& lm, TokenId token, std::span<const TokenId> context);

/// Chain-rule log-probability of start body terminal; the start symbol's own
/// probability is taken as 1.
double sequence_logprob(const NGramLM& lm, std::span<const TokenId> body);

/// Token-based perplexity. Each sentence contributes |body| + 1 predictions
/// (the terminal symbol is predicted, the start symbol is not).
double perplexity(const NGramLM& lm, std::span<const TokenSeq> dataset);

struct PerplexityReport {
  double total_logprob = 0.0;
  std::size_t predictions = 0;
  std::size_t sentences = 0;
  double perplexity() const;
};

PerplexityReport evaluate_perplexity(const NGramLM& lm, std::span<const TokenSeq> dataset);

}  // namespace isf
