#pragma once

// Test-only fixtures and independent oracles. Nothing here calls into the
// implementation path it is used to check, except LM conditionals, which the
// n-gram tests validate separately against count_oracle_prob.

#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "isf/acoustic.hpp"
#include "isf/decoder.hpp"
#include "isf/fusion.hpp"
#include "isf/ngram_lm.hpp"
#include "isf/random.hpp"
#include "isf/vocab.hpp"

namespace isf::testing {

/// Vocabulary with `v` ordinary tokens counting unk, i.e. v - 1 named tokens.
inline Vocabulary make_vocab(std::size_t v) {
  std::vector<std::string> toks;
  for (std::size_t i = 0; i + 1 < v; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "t%02zu", i);
    toks.emplace_back(buf);
  }
  return Vocabulary(std::move(toks));
}

inline std::vector<TokenSeq> random_corpus(const Vocabulary& vocab, std::size_t sentences,
                                           std::size_t max_len, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<TokenSeq> out;
  const std::size_t ordinary = vocab.size();
  for (std::size_t s = 0; s < sentences; ++s) {
    TokenSeq seq(1 + rng.index(max_len));
    // Skewed draw so some n-grams repeat.
    for (auto& t : seq) {
      const double u = rng.uniform();
      t = static_cast<TokenId>(Vocabulary::kUnk + static_cast<std::size_t>(u * u * static_cast<double>(ordinary)));
    }
    out.push_back(std::move(seq));
  }
  return out;
}

inline TokenSeq random_body(const Vocabulary& vocab, std::size_t len, Rng& rng) {
  TokenSeq out(len);
  for (auto& t : out) t = static_cast<TokenId>(Vocabulary::kUnk + rng.index(vocab.size()));
  return out;
}

/// Dense random grid: softmax of Gaussian-ish logits scaled by `sharpness`.
inline PosteriorGrid random_grid(const Vocabulary& vocab, std::size_t steps, std::uint64_t seed,
                                 double sharpness = 3.0) {
  Rng rng(seed);
  const std::size_t s = vocab.support_size();
  std::vector<double> table;
  std::vector<double> logits(s);
  for (std::size_t t = 0; t < steps; ++t) {
    double mx = -1e300;
    for (auto& l : logits) {
      l = sharpness * (rng.uniform() + rng.uniform() + rng.uniform() - 1.5);
      mx = std::max(mx, l);
    }
    double z = 0.0;
    for (double l : logits) z += std::exp(l - mx);
    for (double l : logits) table.push_back(l - mx - std::log(z));
  }
  return PosteriorGrid(std::move(table), steps, s, vocab.hash());
}

/// P(w | context) by rescanning the raw corpus for every query. Mirrors the
/// model definition: JM interpolation with weight hand-down for unseen or
/// too-short contexts and a uniform floor.
inline double count_oracle_prob(const std::vector<TokenSeq>& corpus, const Vocabulary& vocab,
                                const NGramOptions& opt, TokenId token, const TokenSeq& context) {
  const bool fwd = opt.orientation == Orientation::kForward;
  const TokenId start = fwd ? Vocabulary::kSos : Vocabulary::kEos;
  const TokenId term = fwd ? Vocabulary::kEos : Vocabulary::kSos;
  std::vector<TokenSeq> wrapped;
  for (const auto& s : corpus) {
    TokenSeq w{start};
    w.insert(w.end(), s.begin(), s.end());
    w.push_back(term);
    wrapped.push_back(std::move(w));
  }
  const double uniform = 1.0 / static_cast<double>(vocab.support_size());
  double lam_sum = 0.0;
  for (double l : opt.lambdas) lam_sum += l;
  double p = (1.0 - lam_sum) * uniform;
  double carry = 0.0;
  for (int n = opt.order; n >= 1; --n) {
    const std::size_t len = static_cast<std::size_t>(n - 1);
    const double lam = opt.lambdas[static_cast<std::size_t>(n - 1)];
    if (len > context.size()) {
      carry += lam;
      continue;
    }
    TokenSeq ctx(context.end() - static_cast<std::ptrdiff_t>(len), context.end());
    double c_ctx = 0.0, c_w = 0.0;
    for (const auto& w : wrapped) {
      for (std::size_t i = 1; i < w.size(); ++i) {
        if (i < len) continue;
        bool match = true;
        for (std::size_t k = 0; k < len; ++k) {
          if (w[i - len + k] != ctx[k]) {
            match = false;
            break;
          }
        }
        if (!match) continue;
        c_ctx += 1.0;
        if (w[i] == token) c_w += 1.0;
      }
    }
    if (c_ctx == 0.0) {
      carry += lam;
      continue;
    }
    p += (lam + carry) * c_w / c_ctx;
    carry = 0.0;
  }
  return p + carry * uniform;
}

/// log P_blm(eos, w_t..w_1, sos), summed one term at a time.
inline double backward_oracle(const NGramLM& blm, const TokenSeq& body) {
  double total = 0.0;
  for (std::size_t tau = body.size(); tau >= 1; --tau) {
    TokenSeq ctx{Vocabulary::kEos};
    for (std::size_t k = body.size(); k > tau; --k) ctx.push_back(body[k - 1]);
    total += blm.logprob(body[tau - 1], ctx);
  }
  TokenSeq ctx{Vocabulary::kEos};
  for (std::size_t k = body.size(); k >= 1; --k) ctx.push_back(body[k - 1]);
  total += blm.logprob(Vocabulary::kSos, ctx);
  return total;
}

/// Full fused score of a completed hypothesis when the final backward score
/// covers the whole body.
inline double fused_score_oracle(const TokenSeq& body, const PosteriorGrid& grid,
                                 const NGramLM& flm, const NGramLM& blm, double alpha,
                                 double beta, double gamma) {
  double total = 0.0;
  for (std::size_t i = 0; i <= body.size(); ++i) {
    const TokenId w = i < body.size() ? body[i] : Vocabulary::kEos;
    const std::size_t step = i + 1;
    const double dec = step <= grid.max_steps() ? grid.row(step)[static_cast<std::size_t>(w - 1)] : 0.0;
    TokenSeq ctx{Vocabulary::kSos};
    ctx.insert(ctx.end(), body.begin(), body.begin() + static_cast<std::ptrdiff_t>(i));
    total += dec + alpha * flm.logprob(w, ctx) + gamma;
  }
  return total + beta * (backward_oracle(blm, body) - backward_oracle(blm, {}));
}

/// Visits every body over the ordinary tokens with length 0..max_len.
inline void enumerate_bodies(const Vocabulary& vocab, std::size_t max_len,
                             const std::function<void(const TokenSeq&)>& visit) {
  TokenSeq body;
  std::function<void()> rec = [&] {
    visit(body);
    if (body.size() == max_len) return;
    for (std::size_t j = 0; j < vocab.size(); ++j) {
      body.push_back(static_cast<TokenId>(Vocabulary::kUnk + j));
      rec();
      body.pop_back();
    }
  };
  rec();
}

struct ToyModels {
  Vocabulary vocab;
  NGramLM flm;
  NGramLM blm;
};

inline ToyModels toy_models(std::size_t v, std::uint64_t seed, int order = 3,
                            std::size_t sentences = 200) {
  auto vocab = make_vocab(v);
  auto corpus = random_corpus(vocab, sentences, 8, seed);
  NGramOptions fo{order, std::vector<double>(static_cast<std::size_t>(order), 0.8 / order),
                  Orientation::kForward};
  NGramOptions bo = fo;
  bo.orientation = Orientation::kBackward;
  std::vector<TokenSeq> reversed;
  for (const auto& s : corpus) reversed.emplace_back(s.rbegin(), s.rend());
  auto flm = NGramLM::train(corpus, vocab, fo);
  auto blm = NGramLM::train(reversed, vocab, bo);
  return {std::move(vocab), std::move(flm), std::move(blm)};
}

}  // namespace isf::testing
