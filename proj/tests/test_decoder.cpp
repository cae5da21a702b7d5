#include <cmath>

#include "doctest.h"
#include "isf/decoder.hpp"
#include "support.hpp"

using namespace isf;
using namespace isf::testing;

namespace {

struct Best {
  TokenSeq body;
  double score = -1e300;
};

// Brute-force argmax of the fused score over every body that fits the grid,
// ties broken toward the lexicographically smaller body.
Best brute_force(const PosteriorGrid& grid, const ToyModels& toy, const FusionConfig& c) {
  Best best;
  bool first = true;
  enumerate_bodies(toy.vocab, grid.max_steps(), [&](const TokenSeq& body) {
    const double s = fused_score_oracle(body, grid, toy.flm, toy.blm, c.alpha, c.beta, c.gamma);
    if (first || s > best.score + 1e-12 || (std::abs(s - best.score) <= 1e-12 && body < best.body)) {
      best = {body, s};
      first = false;
    }
  });
  return best;
}

std::vector<FusionConfig> schedules(FusionConfig base) {
  std::vector<FusionConfig> out;
  for (std::optional<std::size_t> interval : {std::optional<std::size_t>(1), std::optional<std::size_t>(2),
                                              std::optional<std::size_t>(5), std::optional<std::size_t>()}) {
    for (std::optional<std::size_t> limit : {std::optional<std::size_t>(5), std::optional<std::size_t>()}) {
      for (bool post : {true, false}) {
        FusionConfig c = base;
        c.interval = interval;
        c.limit = limit;
        c.post_processing = post;
        out.push_back(c);
      }
    }
  }
  return out;
}

}  // namespace

TEST_CASE("one-hot grid without LMs decodes the reference") {
  auto toy = toy_models(10, 1);
  const TokenSeq ref{3, 7, 7, 4, 10};
  auto grid = synth_grid(ref, toy.vocab, {});
  for (auto c : {FusionConfig::no_fusion(), FusionConfig::combined()}) {
    auto r = beam_search(grid, toy.flm, toy.blm, c);
    REQUIRE_FALSE(r.nbest.empty());
    CHECK(r.nbest.front().body == ref);
    CHECK(r.nbest.front().ended);
  }
}

TEST_CASE("beam search with a full beam finds the exhaustive argmax") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto toy = toy_models(4, seed, 2, 30);
    auto grid = random_grid(toy.vocab, 3, seed + 100, 2.0);
    for (auto c : {FusionConfig::combined(), FusionConfig::shallow_fusion(), FusionConfig::isf_only()}) {
      c.beam = 125;
      const auto oracle = brute_force(grid, toy, c);
      const auto r = beam_search(grid, toy.flm, toy.blm, c);
      CHECK(r.nbest.front().body == oracle.body);
      CHECK(std::abs(r.nbest.front().total_score - oracle.score) < 1e-9);
      c.interval = std::nullopt;
      CHECK(beam_search(grid, toy.flm, toy.blm, c).nbest.front().body == oracle.body);
    }
  }
}

TEST_CASE("exact ties resolve to the lexicographically smaller body") {
  auto vocab = make_vocab(4);
  auto corpus = random_corpus(vocab, 10, 3, 1);
  std::vector<TokenSeq> rev;
  for (const auto& s : corpus) rev.emplace_back(s.rbegin(), s.rend());
  auto flm = NGramLM::train(corpus, vocab, {2, {0.0, 0.0}, Orientation::kForward});
  auto blm = NGramLM::train(rev, vocab, {2, {0.0, 0.0}, Orientation::kBackward});
  auto grid = uniform_grid(3, vocab);
  FusionConfig c = FusionConfig::combined();
  c.beam = 125;
  auto r = beam_search(grid, flm, blm, c);
  // Everything is uniform, so the length reward picks length 3 and every
  // length-3 body ties exactly.
  CHECK(r.nbest.front().body == TokenSeq{2, 2, 2});
  CHECK(r.nbest[1].body == TokenSeq{2, 2, 3});
  CHECK(r.nbest[1].total_score == r.nbest.front().total_score);
}

TEST_CASE("incremental scores match non-incremental rescoring under every schedule") {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    auto toy = toy_models(12, seed);
    auto grid = random_grid(toy.vocab, 8, seed + 50);
    for (const auto& c : schedules([] {
           auto b = FusionConfig::combined();
           b.beam = 4;
           return b;
         }())) {
      auto r = beam_search(grid, toy.flm, toy.blm, c);
      for (const auto& h : r.nbest) {
        CHECK(std::abs(h.total_score - rescore_total(h.body, grid, toy.flm, toy.blm, c)) < 1e-9);
      }
    }
  }
}

TEST_CASE("n-best is sorted and bounded") {
  auto toy = toy_models(10, 2);
  auto grid = random_grid(toy.vocab, 10, 9);
  auto c = FusionConfig::combined();
  c.beam = 5;
  auto r = beam_search(grid, toy.flm, toy.blm, c);
  for (std::size_t i = 1; i < r.nbest.size(); ++i) {
    CHECK(hypothesis_before(r.nbest[i - 1].total_score, r.nbest[i - 1].body, r.nbest[i].total_score,
                            r.nbest[i].body));
  }
  for (const auto& h : r.nbest) CHECK(h.body.size() <= grid.max_steps());
  CHECK(r.hypotheses_ended() == r.nbest.size());
  CHECK(r.steps.size() <= grid.max_steps() + 1);
  for (const auto& s : r.steps) {
    if (s.isf_step) CHECK(s.isf_evaluations <= std::min<std::size_t>(25, 5 * 11));
  }
}

TEST_CASE("zero backward weight matches the build without ISF") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto toy = toy_models(15, seed);
    auto grid = random_grid(toy.vocab, 12, seed + 7);
    auto c = FusionConfig::shallow_fusion();
    c.beam = 6;
    auto with = beam_search(grid, toy.flm, toy.blm, c);
    auto without = beam_search_without_isf(grid, toy.flm, c);
    REQUIRE(with.nbest.size() == without.nbest.size());
    for (std::size_t i = 0; i < with.nbest.size(); ++i) {
      CHECK(with.nbest[i].body == without.nbest[i].body);
      CHECK(with.nbest[i].total_score == without.nbest[i].total_score);
    }
    REQUIRE(with.steps.size() == without.steps.size());
    for (std::size_t i = 0; i < with.steps.size(); ++i) {
      CHECK(with.steps[i].candidates_scored == without.steps[i].candidates_scored);
      CHECK(with.steps[i].hypotheses_ended == without.steps[i].hypotheses_ended);
    }
    CHECK(without.isf_evaluations() == 0);
  }
}

TEST_CASE("post-processing only equals shallow fusion plus final rescoring") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto toy = toy_models(15, seed + 20);
    auto grid = random_grid(toy.vocab, 12, seed + 3);
    auto c = FusionConfig::combined();
    c.interval = std::nullopt;
    auto sf = c;
    sf.beta = 0.0;
    auto isf = beam_search(grid, toy.flm, toy.blm, c);
    auto base = beam_search_without_isf(grid, toy.flm, sf);
    const double initial = backward_sequence_score(toy.blm, {});
    for (auto& h : base.nbest) h.total_score += c.beta * (backward_sequence_score(toy.blm, h.body) - initial);
    std::sort(base.nbest.begin(), base.nbest.end(), [](const Hypothesis& a, const Hypothesis& b) {
      return hypothesis_before(a.total_score, a.body, b.total_score, b.body);
    });
    REQUIRE(isf.nbest.size() == base.nbest.size());
    for (std::size_t i = 0; i < isf.nbest.size(); ++i) {
      CHECK(isf.nbest[i].body == base.nbest[i].body);
      CHECK(std::abs(isf.nbest[i].total_score - base.nbest[i].total_score) < 1e-9);
    }
  }
}

TEST_CASE("sparser schedules do less backward work") {
  auto toy = toy_models(20, 4);
  std::size_t every = 0, sparse = 0, never = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto grid = random_grid(toy.vocab, 15, seed);
    auto c = FusionConfig::combined();
    c.beam = 5;
    every += beam_search(grid, toy.flm, toy.blm, c).isf_evaluations();
    c.interval = 5;
    sparse += beam_search(grid, toy.flm, toy.blm, c).isf_evaluations();
    c.interval = std::nullopt;
    never += beam_search(grid, toy.flm, toy.blm, c).isf_evaluations();
  }
  CHECK(sparse * 4 <= every);
  CHECK(never < sparse);
}

TEST_CASE("thread count does not change results") {
  auto toy = toy_models(20, 6);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto grid = random_grid(toy.vocab, 15, seed);
    auto c = FusionConfig::combined();
    auto a = beam_search(grid, toy.flm, toy.blm, c, {1});
    auto b = beam_search(grid, toy.flm, toy.blm, c, {8});
    CHECK(a == b);
  }
}

TEST_CASE("per-parent first pruning still accounts scores correctly") {
  auto toy = toy_models(12, 9);
  auto grid = random_grid(toy.vocab, 8, 1);
  auto c = FusionConfig::combined();
  c.beam = 3;
  c.per_parent_first_prune = true;
  auto r = beam_search(grid, toy.flm, toy.blm, c);
  for (const auto& h : r.nbest) {
    CHECK(std::abs(h.total_score - rescore_total(h.body, grid, toy.flm, toy.blm, c)) < 1e-9);
  }
}

TEST_CASE("mismatched vocabularies are rejected") {
  auto toy = toy_models(10, 1);
  auto other = make_vocab(11);
  auto grid = uniform_grid(4, other);
  CHECK_THROWS_AS(beam_search(grid, toy.flm, toy.blm, FusionConfig::combined()), ValidationError);
  auto ok = uniform_grid(4, toy.vocab);
  CHECK_THROWS_AS(beam_search(ok, toy.blm, toy.blm, FusionConfig::combined()), ValidationError);
  CHECK_THROWS_AS(beam_search(ok, toy.flm, toy.flm, FusionConfig::combined()), ValidationError);
  try {
    check_compatible(grid, toy.flm, nullptr);
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    CHECK(msg.find(grid.vocab_hash()) != std::string::npos);
    CHECK(msg.find(toy.flm.vocab_hash()) != std::string::npos);
  }
}
