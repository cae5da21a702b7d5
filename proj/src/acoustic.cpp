#include "isf/acoustic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "isf/random.hpp"
#include "isf/text_io.hpp"

namespace isf {

namespace {

constexpr std::string_view kMagic = "#isf-posterior-grid v1";
constexpr double kRowTolerance = 1e-9;

void validate_row(std::span<const double> row, std::size_t step) {
  double sum = 0.0;
  for (double lp : row) {
    if (std::isnan(lp) || lp > 0.0) {
      throw ValidationError("grid row " + std::to_string(step) +
                            " contains an invalid log-probability " + format_double(lp));
    }
    sum += std::exp(lp);
  }
  if (std::abs(sum - 1.0) > kRowTolerance) {
    throw ValidationError("grid row " + std::to_string(step) + " is not normalized (sums to " +
                          format_double(sum) + ")");
  }
}

}  // namespace

PosteriorGrid::PosteriorGrid(std::vector<double> logprobs, std::size_t steps,
                             std::size_t support_size, std::string vocab_hash,
                             std::optional<TokenSeq> reference)
    : logprobs_(std::move(logprobs)),
      steps_(steps),
      support_(support_size),
      vocab_hash_(std::move(vocab_hash)),
      reference_(std::move(reference)) {
  if (steps_ < 1) throw ValidationError("grid must have at least one step");
  if (support_ < 2) throw ValidationError("grid support must contain eos and one token");
  if (logprobs_.size() != steps_ * support_) {
    throw ValidationError("grid table has " + std::to_string(logprobs_.size()) +
                          " entries, expected " + std::to_string(steps_ * support_));
  }
  for (std::size_t t = 1; t <= steps_; ++t) validate_row(row(t), t);
  if (reference_) {
    for (TokenId id : *reference_) {
      if (id < Vocabulary::kUnk || static_cast<std::size_t>(id) > support_) {
        throw ValidationError("grid reference contains invalid token id " + std::to_string(id));
      }
    }
  }
}

std::span<const double> PosteriorGrid::row(std::size_t step) const {
  if (step < 1 || step > steps_) {
    throw std::out_of_range("grid step " + std::to_string(step) + " outside 1.." +
                            std::to_string(steps_));
  }
  return std::span<const double>(logprobs_).subspan((step - 1) * support_, support_);
}

double PosteriorGrid::logprob(std::size_t step, TokenId token) const {
  if (token < Vocabulary::kEos || static_cast<std::size_t>(token) > support_) {
    throw std::invalid_argument("token " + std::to_string(token) + " outside grid support");
  }
  return row(step)[static_cast<std::size_t>(token - 1)];
}

double dec_logprob(const PosteriorGrid& grid, std::size_t step, TokenId token,
                   std::span<const TokenId> /*prefix*/) {
  return grid.logprob(step, token);
}

void PosteriorGrid::save(const std::filesystem::path& path) const {
  auto out = open_output(path);
  out << kMagic << '\n';
  out << "steps " << steps_ << '\n';
  out << "support " << support_ << '\n';
  out << "vocab_hash " << vocab_hash_ << '\n';
  out << "reference";
  if (reference_) {
    for (TokenId id : *reference_) out << ' ' << id;
  } else {
    out << " -";
  }
  out << '\n';
  for (std::size_t t = 1; t <= steps_; ++t) {
    auto r = row(t);
    for (std::size_t j = 0; j < r.size(); ++j) {
      if (j) out << ' ';
      out << format_double(r[j]);
    }
    out << '\n';
  }
}

PosteriorGrid PosteriorGrid::load(const std::filesystem::path& path) {
  auto in = open_input(path);
  const std::string src = path.string();
  std::string line;
  std::size_t lineno = 0;
  auto header = [&](std::string_view key) {
    if (!std::getline(in, line)) throw ParseError(src, lineno + 1, "unexpected end of file");
    ++lineno;
    auto f = split_whitespace(line);
    if (f.size() < 2 || f[0] != key) {
      throw ParseError(src, lineno, "expected '" + std::string(key) + "' header");
    }
    return f;
  };
  if (!std::getline(in, line) || line != kMagic) throw ParseError(src, 1, "not an isf grid file");
  ++lineno;

  std::size_t steps = 0, support = 0;
  std::string hash;
  std::optional<TokenSeq> reference;
  try {
    steps = static_cast<std::size_t>(parse_int(header("steps")[1]));
    support = static_cast<std::size_t>(parse_int(header("support")[1]));
    hash = header("vocab_hash")[1];
    auto rf = header("reference");
    if (!(rf.size() == 2 && rf[1] == "-")) {
      reference.emplace();
      for (std::size_t i = 1; i < rf.size(); ++i) {
        reference->push_back(static_cast<TokenId>(parse_int(rf[i])));
      }
    }
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception& e) {
    throw ParseError(src, lineno, e.what());
  }

  std::vector<double> table;
  table.reserve(steps * support);
  for (std::size_t t = 1; t <= steps; ++t) {
    if (!std::getline(in, line)) throw ParseError(src, lineno + 1, "missing grid row " + std::to_string(t));
    ++lineno;
    auto f = split_whitespace(line);
    if (f.size() != support) {
      throw ParseError(src, lineno, "grid row " + std::to_string(t) + " has " +
                                        std::to_string(f.size()) + " values, expected " +
                                        std::to_string(support));
    }
    try {
      for (const auto& v : f) table.push_back(parse_double(v));
    } catch (const std::exception& e) {
      throw ParseError(src, lineno, e.what());
    }
  }
  while (std::getline(in, line)) {
    ++lineno;
    if (!split_whitespace(line).empty()) throw ParseError(src, lineno, "trailing data after grid rows");
  }
  return PosteriorGrid(std::move(table), steps, support, std::move(hash), std::move(reference));
}

PosteriorGrid synth_grid(std::span<const TokenId> reference, const Vocabulary& vocab,
                         const SynthOptions& options) {
  if (reference.empty()) throw ConfigError("synth_grid needs a non-empty reference");
  if (!(options.noise >= 0.0 && options.noise < 1.0)) {
    throw ConfigError("grid noise must lie in [0, 1)");
  }
  const std::size_t support = vocab.support_size();
  if (options.spread < 1 || options.spread > support - 1) {
    throw ConfigError("confusion spread must lie in [1, " + std::to_string(support - 1) + "]");
  }
  for (TokenId id : reference) {
    if (!vocab.is_ordinary(id)) throw ConfigError("reference contains a non-ordinary token");
  }

  const std::size_t steps = reference.size() + options.slack;
  Rng rng(options.seed);
  std::vector<double> table;
  table.reserve(steps * support);
  std::vector<double> p(support);
  std::vector<std::size_t> others(support - 1);
  std::vector<double> shares(options.spread);

  for (std::size_t t = 1; t <= steps; ++t) {
    const TokenId target = t <= reference.size() ? reference[t - 1] : Vocabulary::kEos;
    const auto target_col = static_cast<std::size_t>(target - 1);

    double moved = 0.0;
    if (options.noise > 0.0) moved = std::min(-options.noise * std::log(rng.uniform_open()), 0.999);
    if (t > reference.size() && !options.noisy_slack) moved = 0.0;

    // Partial Fisher-Yates over the non-target columns.
    std::size_t k = 0;
    for (std::size_t c = 0; c < support; ++c) {
      if (c != target_col) others[k++] = c;
    }
    for (std::size_t i = 0; i < options.spread; ++i) {
      std::swap(others[i], others[i + rng.index(others.size() - i)]);
    }
    double share_sum = 0.0;
    for (auto& s : shares) share_sum += (s = -std::log(rng.uniform_open()));

    std::fill(p.begin(), p.end(), kGridFloor);
    p[target_col] += 1.0 - moved;
    for (std::size_t i = 0; i < options.spread; ++i) p[others[i]] += moved * shares[i] / share_sum;
    const double z = std::accumulate(p.begin(), p.end(), 0.0);
    for (double v : p) table.push_back(std::log(v / z));
  }
  return PosteriorGrid(std::move(table), steps, support, vocab.hash(),
                       TokenSeq(reference.begin(), reference.end()));
}

PosteriorGrid uniform_grid(std::size_t steps, const Vocabulary& vocab) {
  const std::size_t support = vocab.support_size();
  std::vector<double> table(steps * support, -std::log(static_cast<double>(support)));
  return PosteriorGrid(std::move(table), steps, support, vocab.hash());
}

TokenSeq greedy_decode(const PosteriorGrid& grid) {
  TokenSeq out;
  for (std::size_t t = 1; t <= grid.max_steps(); ++t) {
    auto r = grid.row(t);
    const auto best = static_cast<TokenId>(std::max_element(r.begin(), r.end()) - r.begin()) + 1;
    if (best == Vocabulary::kEos) break;
    out.push_back(best);
  }
  return out;
}

SyntheticLanguage::SyntheticLanguage(const SyntheticLanguageOptions& options, std::uint64_t seed)
    : options_(options) {
  const std::size_t n = options.vocab_size;
  if (n < 2) throw ConfigError("synthetic language needs at least two tokens");
  if (options.branching < 1 || options.branching > n) {
    throw ConfigError("branching must lie in [1, vocab_size]");
  }
  if (options.min_length < 1 || options.max_length < options.min_length) {
    throw ConfigError("invalid synthetic sentence length bounds");
  }
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "w%03zu", i);
    tokens_.emplace_back(buf);
  }

  auto draw_weighted_set = [&](std::size_t count) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = 0; i < count; ++i) std::swap(idx[i], idx[i + rng.index(n - i)]);
    // Geometric-like decay keeps one dominant successor per token.
    std::vector<std::pair<std::size_t, double>> out;
    double w = 1.0, total = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
      total += w;
      out.emplace_back(idx[i], total);
      w *= 0.45;
    }
    for (auto& [_, c] : out) c /= total;
    return out;
  };

  successors_.reserve(n);
  for (std::size_t i = 0; i < n; ++i) successors_.push_back(draw_weighted_set(options.branching));
  initial_ = draw_weighted_set(std::min(n, options.branching * 2));
  final_.assign(n, false);
  const auto finals = std::max<std::size_t>(1, static_cast<std::size_t>(
                                                   std::lround(options.final_fraction * static_cast<double>(n))));
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < finals; ++i) {
    std::swap(idx[i], idx[i + rng.index(n - i)]);
    final_[idx[i]] = true;
  }
}

std::vector<std::vector<std::string>> SyntheticLanguage::generate(std::size_t sentences,
                                                                  std::uint64_t seed) const {
  Rng rng(seed);
  auto pick = [&](const std::vector<std::pair<std::size_t, double>>& cdf) {
    const double u = rng.uniform();
    for (const auto& [tok, c] : cdf) {
      if (u < c) return tok;
    }
    return cdf.back().first;
  };
  std::vector<std::vector<std::string>> out;
  out.reserve(sentences);
  for (std::size_t s = 0; s < sentences; ++s) {
    std::vector<std::string> sentence;
    std::size_t cur = pick(initial_);
    sentence.push_back(tokens_[cur]);
    while (sentence.size() < options_.max_length) {
      if (final_[cur] && sentence.size() >= options_.min_length && rng.uniform() < options_.end_prob) {
        break;
      }
      cur = pick(successors_[cur]);
      sentence.push_back(tokens_[cur]);
    }
    out.push_back(std::move(sentence));
  }
  return out;
}

}  // namespace isf
