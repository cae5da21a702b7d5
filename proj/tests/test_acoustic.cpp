#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "isf/acoustic.hpp"
#include "isf/eval.hpp"
#include "isf/random.hpp"
#include "isf/text_io.hpp"
#include "support.hpp"

using namespace isf;
using namespace isf::testing;

namespace {

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("isf_test_grid_" + name);
}

}  // namespace

TEST_CASE("uniform grid") {
  auto vocab = make_vocab(7);
  auto g = uniform_grid(4, vocab);
  for (std::size_t t = 1; t <= 4; ++t) {
    for (TokenId w = 1; w <= 7; ++w) CHECK(g.logprob(t, w) == doctest::Approx(std::log(1.0 / 8.0)));
  }
  CHECK_THROWS_AS(g.logprob(0, 1), std::out_of_range);
  CHECK_THROWS_AS(g.logprob(5, 1), std::out_of_range);
  CHECK_THROWS_AS(g.logprob(1, Vocabulary::kSos), std::invalid_argument);
}

TEST_CASE("noiseless grid is one-hot up to the floor") {
  auto vocab = make_vocab(6);
  const TokenSeq ref{3, 5};
  SynthOptions so;
  so.slack = 2;
  auto g = synth_grid(ref, vocab, so);
  CHECK(g.max_steps() == 4);
  CHECK(g.logprob(1, 3) > -1e-6);
  CHECK(g.logprob(2, 5) > -1e-6);
  CHECK(g.logprob(3, Vocabulary::kEos) > -1e-6);
  CHECK(g.logprob(1, 4) < std::log(2e-8));
  CHECK(g.logprob(1, Vocabulary::kEos) < std::log(2e-8));
  CHECK(greedy_decode(g) == ref);
  CHECK(g.reference() == ref);
  CHECK(dec_logprob(g, 2, 5, ref) == g.logprob(2, 5));
}

TEST_CASE("synth_grid is a pure function of its inputs") {
  auto vocab = make_vocab(20);
  const TokenSeq ref{3, 9, 4, 4, 12, 7};
  SynthOptions so{0.4, 3, 77};
  auto a = synth_grid(ref, vocab, so);
  auto b = synth_grid(ref, vocab, so);
  CHECK(a == b);
  so.seed = 78;
  CHECK_FALSE(synth_grid(ref, vocab, so) == a);
}

TEST_CASE("noisy rows stay normalized and confine noise to the spread") {
  auto vocab = make_vocab(30);
  Rng rng(5);
  for (int n = 0; n < 20; ++n) {
    auto ref = random_body(vocab, 1 + rng.index(10), rng);
    SynthOptions so{0.6, 1 + rng.index(5), rng.next()};
    auto g = synth_grid(ref, vocab, so);
    for (std::size_t t = 1; t <= g.max_steps(); ++t) {
      double sum = 0.0;
      std::size_t above_floor = 0;
      for (double lp : g.row(t)) {
        sum += std::exp(lp);
        if (lp > std::log(1e-6)) ++above_floor;
      }
      CHECK(std::abs(sum - 1.0) < 1e-12);
      CHECK(above_floor <= so.spread + 1);
    }
  }
}

TEST_CASE("synth_grid argument checks") {
  auto vocab = make_vocab(5);
  CHECK_THROWS_AS(synth_grid(TokenSeq{}, vocab, {}), ConfigError);
  CHECK_THROWS_AS(synth_grid(TokenSeq{3}, vocab, {1.0, 3, 0}), ConfigError);
  CHECK_THROWS_AS(synth_grid(TokenSeq{3}, vocab, {0.2, 0, 0}), ConfigError);
  CHECK_THROWS_AS(synth_grid(TokenSeq{Vocabulary::kEos}, vocab, {}), ConfigError);
}

TEST_CASE("greedy WER shrinks with the noise level") {
  auto vocab = make_vocab(25);
  Rng rng(8);
  std::vector<TokenSeq> refs;
  for (int i = 0; i < 100; ++i) refs.push_back(random_body(vocab, 3 + rng.index(10), rng));
  double prev = 1e9;
  for (double eps : {0.6, 0.4, 0.2, 0.05, 0.0}) {
    WerReport tot;
    for (std::size_t i = 0; i < refs.size(); ++i) {
      auto g = synth_grid(refs[i], vocab, {eps, 3, mix_seed(11, i)});
      tot += edit_distance_wer(refs[i], greedy_decode(g));
    }
    CHECK(tot.wer() <= prev);
    prev = tot.wer();
  }
  CHECK(prev == 0.0);
}

TEST_CASE("greedy WER regression on the synthetic test set") {
  // eps = 0.4, spread 3, 200 utterances. Values frozen from the first run.
  SyntheticLanguage lang({}, 7);
  auto text = lang.generate(200, 3);
  auto vocab = Vocabulary::build(text, 500);
  WerReport tot;
  for (std::size_t i = 0; i < text.size(); ++i) {
    auto ref = vocab.encode(text[i]);
    auto g = synth_grid(ref, vocab, {0.4, 3, mix_seed(0, 1000 + i)});
    tot += edit_distance_wer(ref, greedy_decode(g));
  }
  CHECK(tot.reference_length == 2464);
  CHECK(tot.wer() > 22.0);
  CHECK(tot.wer() < 26.0);
  CHECK(tot.substitutions == 454);
  CHECK(tot.deletions == 140);
  CHECK(tot.insertions == 0);
}

TEST_CASE("save/load round trip") {
  auto vocab = make_vocab(12);
  const TokenSeq ref{3, 4, 10, 11};
  auto g = synth_grid(ref, vocab, {0.3, 2, 4});
  auto p = temp_path("rt.grid");
  g.save(p);
  CHECK(PosteriorGrid::load(p) == g);

  auto r = random_grid(vocab, 5, 3);
  r.save(p);
  auto back = PosteriorGrid::load(p);
  CHECK(back == r);
  CHECK_FALSE(back.reference().has_value());
}

TEST_CASE("non-normalized row is rejected with its row number") {
  auto vocab = make_vocab(4);
  auto g = uniform_grid(3, vocab);
  auto p = temp_path("bad.grid");
  g.save(p);
  std::string text = read_file(p);
  auto lines = std::vector<std::string>{};
  std::size_t start = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '\n') {
      lines.push_back(text.substr(start, i - start));
      start = i + 1;
    }
  }
  lines[6] = "-1 -1 -1 -1 -1";  // second row
  {
    std::ofstream out(p);
    for (const auto& l : lines) out << l << '\n';
  }
  try {
    PosteriorGrid::load(p);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("row 2") != std::string::npos);
  }
  CHECK_THROWS_AS(PosteriorGrid({0.0, -1.0}, 1, 2, "h"), ValidationError);
  CHECK_THROWS_AS(PosteriorGrid({0.0}, 1, 2, "h"), ValidationError);
}

TEST_CASE("synthetic language is reproducible") {
  SyntheticLanguageOptions opt;
  opt.vocab_size = 12;
  SyntheticLanguage a(opt, 3), b(opt, 3);
  CHECK(a.generate(50, 9) == b.generate(50, 9));
  CHECK(a.generate(50, 9) != a.generate(50, 10));
  for (const auto& s : a.generate(200, 1)) {
    CHECK(s.size() >= 1);
    CHECK(s.size() <= opt.max_length);
  }
}
