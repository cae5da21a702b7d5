#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>

#include "isf/common.hpp"
#include "isf/ngram_lm.hpp"

namespace isf {

/// Weights and schedule for shallow fusion (forward LM, weight alpha) and
/// iterative shallow fusion (backward LM, weight beta).
struct FusionConfig {
  double alpha = 0.0;
  double beta = 0.0;
  /// Reward per emitted token, eos included.
  double gamma = 0.0;
  std::size_t beam = 10;
  /// ISF every `interval` steps; nullopt means never on partial hypotheses.
  std::optional<std::size_t> interval = 1;
  /// ISF only while the hypothesis has at most `limit` tokens; nullopt = no limit.
  std::optional<std::size_t> limit;
  /// Apply the backward score to every hypothesis reaching the real eos.
  bool post_processing = true;
  /// First pruning keeps the top `beam` candidates per parent before the
  /// global top beam^2 cut.
  bool per_parent_first_prune = false;

  /// Throws ConfigError.
  void validate() const;

  static FusionConfig shallow_fusion();  // (0.5, 0.0, 2.0)
  static FusionConfig isf_only();        // (0.0, 0.5, 2.0)
  static FusionConfig combined();        // (0.5, 0.5, 5.0)
  static FusionConfig no_fusion();       // (0, 0, 0)
};

struct BlmBookkeeping {
  double last_score = 0.0;
  std::size_t last_step = 0;

  bool operator==(const BlmBookkeeping&) const = default;
};

/// log P_blm(eos, w_t..w_1, sos): the backward LM reads the body right to
/// left after a temporary eos. The eos start contributes log 1.
double backward_sequence_score(const NGramLM& blm, std::span<const TokenId> body);

/// Bookkeeping for the empty hypothesis: log P_blm(sos | eos) at step 0.
BlmBookkeeping initial_bookkeeping(const NGramLM& blm);

struct IsfDelta {
  /// Unscaled; the caller multiplies by beta.
  double delta;
  BlmBookkeeping book;
};

/// Replaces the previously applied backward score with the one for `body`.
/// `step` is the decoding step of the application; it equals |body| for a
/// partial hypothesis and |body| + 1 when `body` just reached the real eos.
IsfDelta isf_delta(const NGramLM& blm, std::span<const TokenId> body, std::size_t step,
                   const BlmBookkeeping& book);

inline IsfDelta isf_delta(const NGramLM& blm, std::span<const TokenId> extended_body,
                          const BlmBookkeeping& book) {
  return isf_delta(blm, extended_body, extended_body.size(), book);
}

/// (is_final && post_processing) || (t <= limit && t % interval == 0)
bool isf_applies(const FusionConfig& config, std::size_t step, bool is_final);

/// dec + alpha * flm + isf_term + gamma, where isf_term is beta * delta (or 0).
inline double step_score(const FusionConfig& config, double dec_lp, double flm_lp,
                         double isf_term) {
  return dec_lp + config.alpha * flm_lp + isf_term + config.gamma;
}

std::string describe(const FusionConfig& config);

}  // namespace isf
