#include <cmath>

#include "doctest.h"
#include "isf/eval.hpp"
#include "isf/harness.hpp"
#include "support.hpp"

using namespace isf;
using namespace isf::testing;

namespace {

// Plain dynamic-programming edit distance, no backtrace.
std::size_t levenshtein(const TokenSeq& a, const TokenSeq& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

}  // namespace

TEST_CASE("word error rate examples") {
  const TokenSeq abc{3, 4, 5};
  auto same = edit_distance_wer(abc, abc);
  CHECK(same.errors() == 0);
  CHECK(same.wer() == 0.0);

  auto sub = edit_distance_wer(abc, TokenSeq{3, 9, 5});
  CHECK(sub.substitutions == 1);
  CHECK(sub.errors() == 1);
  CHECK(sub.wer() == doctest::Approx(100.0 / 3.0));

  auto del = edit_distance_wer(TokenSeq{3, 4}, TokenSeq{});
  CHECK(del.deletions == 2);
  CHECK(del.wer() == 100.0);

  auto ins = edit_distance_wer(TokenSeq{3}, TokenSeq{3, 4, 4});
  CHECK(ins.insertions == 2);
  CHECK(ins.wer() == 200.0);

  CHECK_THROWS_AS(edit_distance_wer(TokenSeq{}, abc), ConfigError);
}

TEST_CASE("edit counts agree with a plain Levenshtein distance") {
  auto vocab = make_vocab(5);
  Rng rng(3);
  for (int q = 0; q < 500; ++q) {
    auto ref = random_body(vocab, 1 + rng.index(8), rng);
    auto hyp = random_body(vocab, rng.index(9), rng);
    auto r = edit_distance_wer(ref, hyp);
    CHECK(r.errors() == levenshtein(ref, hyp));
    CHECK(r.reference_length == ref.size());
    CHECK(ref.size() - r.deletions - r.substitutions + r.insertions == hyp.size() - r.substitutions);
    // Reversing both sequences preserves the distance.
    TokenSeq rr(ref.rbegin(), ref.rend()), rh(hyp.rbegin(), hyp.rend());
    CHECK(edit_distance_wer(rr, rh).errors() == r.errors());
  }
}

TEST_CASE("reports accumulate") {
  WerReport a{1, 2, 0, 10}, b{0, 0, 3, 5};
  a += b;
  CHECK(a.errors() == 6);
  CHECK(a.reference_length == 15);
  CHECK(a.wer() == doctest::Approx(40.0));
}

TEST_CASE("sign test") {
  CHECK(sign_test_p(5, 0) == doctest::Approx(1.0 / 32.0));
  CHECK(sign_test_p(4, 1) == doctest::Approx(6.0 / 32.0));
  CHECK(sign_test_p(0, 0) == 1.0);
  CHECK(sign_test_p(0, 3) == doctest::Approx(1.0));
}

TEST_CASE("method comparison is deterministic and parallel-safe") {
  ExperimentOptions opt;
  opt.lm_sentences = 2000;
  opt.heldout_sentences = 10;
  opt.test_utterances = 30;
  auto ex = build_experiment(opt, 1);
  std::vector<Method> methods{{"none", FusionConfig::no_fusion(), nullptr},
                              {"sf", FusionConfig::shallow_fusion(), nullptr},
                              {"isf", FusionConfig::combined(), &ex.pblm}};
  auto a = run_method_comparison(ex.test_set, ex.flm, methods, 1);
  auto b = run_method_comparison(ex.test_set, ex.flm, methods, 4);
  CHECK(a.to_tsv() == b.to_tsv());
  CHECK(a.to_json() == b.to_json());
  CHECK(a.row("isf").hypotheses == b.row("isf").hypotheses);
  CHECK(a.rows.size() == 3);
  CHECK(a.row("none").isf_evaluations == 0);
  CHECK(a.row("isf").isf_evaluations > 0);
  CHECK_THROWS(a.row("missing"));

  // Corpus WER is the pooled edit count, not a mean of per-utterance rates.
  WerReport pooled;
  for (const auto& u : a.row("sf").per_utterance) pooled += u;
  CHECK(pooled.errors() == a.row("sf").total.errors());

  auto again = build_experiment(opt, 1);
  CHECK(run_method_comparison(again.test_set, again.flm, methods, 2).to_tsv() == a.to_tsv());
}

TEST_CASE("length sweep produces the expected rows") {
  ExperimentOptions opt;
  opt.lm_sentences = 1000;
  opt.heldout_sentences = 10;
  opt.test_utterances = 10;
  auto ex = build_experiment(opt, 2);
  const std::vector<std::size_t> limits{3, 6};
  auto sweep = run_length_sweep(ex.test_set, ex.flm, ex.pblm, FusionConfig::combined(), limits);
  CHECK(sweep.rows.size() == 6);
  CHECK(sweep.row("L=3 post").config.limit == 3u);
  CHECK_FALSE(sweep.row("L=6 no-post").config.post_processing);
  CHECK_FALSE(sweep.row("L=inf post").config.limit.has_value());
  auto bad = FusionConfig::combined();
  bad.interval = 2;
  CHECK_THROWS_AS(run_length_sweep(ex.test_set, ex.flm, ex.pblm, bad, limits), ConfigError);
}
