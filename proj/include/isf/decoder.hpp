#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "isf/acoustic.hpp"
#include "isf/common.hpp"
#include "isf/fusion.hpp"
#include "isf/ngram_lm.hpp"

namespace isf {

struct Hypothesis {
  /// w_1..w_t; sos is implicit and eos is never stored.
  TokenSeq body;
  double total_score = 0.0;
  BlmBookkeeping blm_book;
  bool ended = false;

  bool operator==(const Hypothesis&) const = default;
};

struct StepStats {
  std::size_t step = 0;
  std::size_t candidates_scored = 0;
  std::size_t isf_evaluations = 0;
  std::size_t hypotheses_ended = 0;
  bool isf_step = false;

  bool operator==(const StepStats&) const = default;
};

struct DecodeResult {
  /// Ended hypotheses sorted by (score desc, body asc).
  std::vector<Hypothesis> nbest;
  std::vector<StepStats> steps;

  std::size_t isf_evaluations() const;
  std::size_t candidates_scored() const;
  std::size_t hypotheses_ended() const;

  bool operator==(const DecodeResult&) const = default;
};

struct DecodeOptions {
  /// Threads for the batched ISF evaluation of first-pruning survivors.
  std::size_t threads = 1;
};

/// Label-synchronous beam search over `grid` with shallow fusion of `flm`
/// and iterative shallow fusion of the backward model `blm`.
///
/// At every step each live hypothesis is extended with the full prediction
/// support and scored with dec + alpha*flm + gamma. On ISF steps the
/// candidates are first cut to the best min(B^2, B(V+1)), rescored with
/// beta * isf_delta and cut again to B; other steps cut straight to B.
/// Candidates ending in eos leave the beam for the ended set (with the
/// post-processing backward score when scheduled). Survivors at the last
/// grid step are force-finalized with an eos that carries no decoder score.
///
/// Throws ValidationError when the models and grid disagree on vocabulary.
DecodeResult beam_search(const PosteriorGrid& grid, const NGramLM& flm, const NGramLM& blm,
                         const FusionConfig& config, const DecodeOptions& options = {});

/// The same search with every ISF code path removed at compile time.
/// `config.beta` and the schedule fields are ignored.
DecodeResult beam_search_without_isf(const PosteriorGrid& grid, const NGramLM& flm,
                                     const FusionConfig& config);

/// Non-incremental total score of a completed hypothesis under `config`:
/// sum over body + eos of dec + alpha*flm + gamma, plus beta times the
/// difference between the backward score at the last scheduled ISF
/// application and the empty-hypothesis score.
double rescore_total(std::span<const TokenId> body, const PosteriorGrid& grid,
                     const NGramLM& flm, const NGramLM& blm, const FusionConfig& config);

/// Orders (score desc, body asc); the tie-break used for pruning and n-best.
bool hypothesis_before(double score_a, std::span<const TokenId> body_a, double score_b,
                       std::span<const TokenId> body_b);

/// Throws ValidationError naming both hashes on mismatch.
void check_compatible(const PosteriorGrid& grid, const NGramLM& flm, const NGramLM* blm);

}  // namespace isf
