#include "isf/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "isf/parallel.hpp"

namespace isf {

namespace {

struct Candidate {
  std::size_t parent;
  TokenId token;
  double score;
  BlmBookkeeping book;
};

// Live hypotheses are kept in body order, so (parent, token) order is the
// lexicographic order of the extended bodies.
bool candidate_before(const Candidate& a, const Candidate& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.parent != b.parent) return a.parent < b.parent;
  return a.token < b.token;
}

void keep_best(std::vector<Candidate>& cands, std::size_t keep) {
  keep = std::min(keep, cands.size());
  std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(keep), cands.end(),
                    candidate_before);
  cands.resize(keep);
}

void keep_best_per_parent(std::vector<Candidate>& cands, std::size_t keep) {
  // Candidates arrive grouped by parent.
  std::vector<Candidate> out;
  auto begin = cands.begin();
  while (begin != cands.end()) {
    auto end = std::find_if(begin, cands.end(),
                            [&](const Candidate& c) { return c.parent != begin->parent; });
    std::vector<Candidate> group(begin, end);
    keep_best(group, keep);
    out.insert(out.end(), group.begin(), group.end());
    begin = end;
  }
  cands = std::move(out);
}

void finalize_ended(std::vector<Hypothesis>& ended) {
  std::sort(ended.begin(), ended.end(), [](const Hypothesis& a, const Hypothesis& b) {
    return hypothesis_before(a.total_score, a.body, b.total_score, b.body);
  });
}

template <bool kWithIsf>
DecodeResult decode(const PosteriorGrid& grid, const NGramLM& flm, const NGramLM* blm,
                    const FusionConfig& config, const DecodeOptions& options) {
  config.validate();
  check_compatible(grid, flm, kWithIsf ? blm : nullptr);

  const std::size_t support = grid.support_size();
  const std::size_t beam = config.beam;
  const std::size_t steps = grid.max_steps();

  BlmBookkeeping initial{};
  if constexpr (kWithIsf) initial = initial_bookkeeping(*blm);

  DecodeResult result;
  std::vector<Hypothesis> live{Hypothesis{{}, 0.0, initial, false}};
  std::vector<Hypothesis>& ended = result.nbest;
  std::vector<Candidate> cands;
  TokenSeq ctx;

  // Final backward rescoring for a hypothesis whose real eos is emitted at
  // `step`. No evaluation is needed when the last application already
  // covered the whole body.
  auto apply_final = [&](std::span<const TokenId> body, std::size_t step, double& score,
                         BlmBookkeeping& book, StepStats& st) {
    if constexpr (kWithIsf) {
      if (!isf_applies(config, step, true) || book.last_step == body.size()) return;
      const auto d = isf_delta(*blm, body, step, book);
      score += config.beta * d.delta;
      book = d.book;
      ++st.isf_evaluations;
    }
  };

  for (std::size_t t = 1; t <= steps && !live.empty(); ++t) {
    StepStats st;
    st.step = t;

    cands.clear();
    cands.reserve(live.size() * support);
    for (std::size_t p = 0; p < live.size(); ++p) {
      const auto& h = live[p];
      ctx.assign(1, Vocabulary::kSos);
      ctx.insert(ctx.end(), h.body.begin(), h.body.end());
      for (std::size_t j = 1; j <= support; ++j) {
        const auto w = static_cast<TokenId>(j);
        const double inc =
            step_score(config, dec_logprob(grid, t, w, h.body), flm.logprob(w, ctx), 0.0);
        cands.push_back({p, w, h.total_score + inc, h.blm_book});
      }
    }
    st.candidates_scored = cands.size();

    bool isf_step = false;
    if constexpr (kWithIsf) isf_step = isf_applies(config, t, false);
    st.isf_step = isf_step;

    if (isf_step) {
      if (config.per_parent_first_prune) keep_best_per_parent(cands, beam);
      keep_best(cands, std::min(beam * beam, beam * support));

      // Batched rescoring: a pure map over survivors, merged in index order.
      std::vector<std::size_t> evaluated(cands.size(), 0);
      parallel_for(cands.size(), options.threads, [&](std::size_t i) {
        auto& c = cands[i];
        const auto& parent = live[c.parent].body;
        if (c.token == Vocabulary::kEos) {
          StepStats local;
          apply_final(parent, t, c.score, c.book, local);
          evaluated[i] = local.isf_evaluations;
          return;
        }
        TokenSeq extended(parent);
        extended.push_back(c.token);
        const auto d = isf_delta(*blm, extended, t, c.book);
        c.score += config.beta * d.delta;
        c.book = d.book;
        evaluated[i] = 1;
      });
      st.isf_evaluations += std::accumulate(evaluated.begin(), evaluated.end(), std::size_t{0});
      keep_best(cands, beam);
    } else {
      keep_best(cands, beam);
      for (auto& c : cands) {
        if (c.token == Vocabulary::kEos) apply_final(live[c.parent].body, t, c.score, c.book, st);
      }
    }

    std::vector<Hypothesis> next;
    next.reserve(cands.size());
    for (const auto& c : cands) {
      const auto& parent = live[c.parent];
      if (c.token == Vocabulary::kEos) {
        ended.push_back({parent.body, c.score, c.book, true});
        ++st.hypotheses_ended;
      } else {
        Hypothesis h{parent.body, c.score, c.book, false};
        h.body.push_back(c.token);
        next.push_back(std::move(h));
      }
    }
    std::sort(next.begin(), next.end(),
              [](const Hypothesis& a, const Hypothesis& b) { return a.body < b.body; });
    live = std::move(next);
    result.steps.push_back(st);
  }

  if (!live.empty()) {
    // Out of grid rows: close every survivor with an eos that has no decoder score.
    StepStats st;
    st.step = steps + 1;
    for (auto& h : live) {
      ctx.assign(1, Vocabulary::kSos);
      ctx.insert(ctx.end(), h.body.begin(), h.body.end());
      h.total_score += step_score(config, 0.0, flm.logprob(Vocabulary::kEos, ctx), 0.0);
      apply_final(h.body, steps + 1, h.total_score, h.blm_book, st);
      h.ended = true;
      ended.push_back(std::move(h));
      ++st.hypotheses_ended;
    }
    result.steps.push_back(st);
  }

  if (ended.empty()) throw DecodeError("beam search produced no ended hypothesis");
  finalize_ended(ended);
  return result;
}

}  // namespace

bool hypothesis_before(double score_a, std::span<const TokenId> body_a, double score_b,
                       std::span<const TokenId> body_b) {
  if (score_a != score_b) return score_a > score_b;
  return std::lexicographical_compare(body_a.begin(), body_a.end(), body_b.begin(), body_b.end());
}

void check_compatible(const PosteriorGrid& grid, const NGramLM& flm, const NGramLM* blm) {
  if (flm.orientation() != Orientation::kForward) {
    throw ValidationError("forward LM has backward orientation");
  }
  if (flm.vocab_hash() != grid.vocab_hash() || flm.support_size() != grid.support_size()) {
    throw ValidationError("vocabulary mismatch: grid " + grid.vocab_hash() + " vs forward LM " +
                          flm.vocab_hash());
  }
  if (blm) {
    if (blm->orientation() != Orientation::kBackward) {
      throw ValidationError("backward LM has forward orientation");
    }
    if (blm->vocab_hash() != grid.vocab_hash() || blm->support_size() != grid.support_size()) {
      throw ValidationError("vocabulary mismatch: grid " + grid.vocab_hash() +
                            " vs backward LM " + blm->vocab_hash());
    }
  }
}

std::size_t DecodeResult::isf_evaluations() const {
  std::size_t n = 0;
  for (const auto& s : steps) n += s.isf_evaluations;
  return n;
}

std::size_t DecodeResult::candidates_scored() const {
  std::size_t n = 0;
  for (const auto& s : steps) n += s.candidates_scored;
  return n;
}

std::size_t DecodeResult::hypotheses_ended() const {
  std::size_t n = 0;
  for (const auto& s : steps) n += s.hypotheses_ended;
  return n;
}

DecodeResult beam_search(const PosteriorGrid& grid, const NGramLM& flm, const NGramLM& blm,
                         const FusionConfig& config, const DecodeOptions& options) {
  return decode<true>(grid, flm, &blm, config, options);
}

DecodeResult beam_search_without_isf(const PosteriorGrid& grid, const NGramLM& flm,
                                     const FusionConfig& config) {
  return decode<false>(grid, flm, nullptr, config, {});
}

double rescore_total(std::span<const TokenId> body, const PosteriorGrid& grid, const NGramLM& flm,
                     const NGramLM& blm, const FusionConfig& config) {
  const std::size_t n = body.size();
  if (n > grid.max_steps()) {
    throw std::invalid_argument("hypothesis longer than the grid");
  }
  TokenSeq ctx{Vocabulary::kSos};
  double total = 0.0;
  for (std::size_t i = 1; i <= n; ++i) {
    const TokenId w = body[i - 1];
    if (w == Vocabulary::kEos || w == Vocabulary::kSos) {
      throw std::invalid_argument("rescore_total: body contains a boundary symbol");
    }
    total += grid.logprob(i, w) + config.alpha * flm.logprob(w, ctx) + config.gamma;
    ctx.push_back(w);
  }
  const std::size_t eos_step = n + 1;
  const double eos_dec = eos_step <= grid.max_steps() ? grid.logprob(eos_step, Vocabulary::kEos) : 0.0;
  total += eos_dec + config.alpha * flm.logprob(Vocabulary::kEos, ctx) + config.gamma;

  std::size_t covered = 0;
  bool any = false;
  if (isf_applies(config, eos_step, true)) {
    covered = n;
    any = true;
  } else {
    for (std::size_t s = n; s >= 1; --s) {
      if (isf_applies(config, s, false)) {
        covered = s;
        any = true;
        break;
      }
    }
  }
  if (any) {
    total += config.beta * (backward_sequence_score(blm, body.first(covered)) -
                            backward_sequence_score(blm, {}));
  }
  return total;
}

}  // namespace isf
