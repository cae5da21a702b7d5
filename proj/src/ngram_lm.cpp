#include "isf/ngram_lm.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numeric>

#include "isf/text_io.hpp"

namespace isf {

namespace {

constexpr std::string_view kMagic = "#isf-ngram-lm v1";

void validate_options(const NGramOptions& o) {
  if (o.order < 1) throw ConfigError("n-gram order must be >= 1");
  if (o.lambdas.size() != static_cast<std::size_t>(o.order)) {
    throw ConfigError("expected " + std::to_string(o.order) + " interpolation weights, got " +
                      std::to_string(o.lambdas.size()));
  }
  double sum = 0.0;
  for (double l : o.lambdas) {
    if (!(l >= 0.0 && l < 1.0)) throw ConfigError("interpolation weights must lie in [0, 1)");
    sum += l;
  }
  if (!(sum < 1.0)) throw ConfigError("interpolation weights must sum to less than 1");
}

}  // namespace

const char* to_string(Orientation o) {
  return o == Orientation::kForward ? "forward" : "backward";
}

Orientation parse_orientation(std::string_view s) {
  if (s == "forward" || s == "fwd") return Orientation::kForward;
  if (s == "backward" || s == "bwd") return Orientation::kBackward;
  throw ConfigError("unknown orientation '" + std::string(s) + "' (expected fwd|bwd)");
}

std::uint64_t NGramLM::ContextEntry::count(TokenId token) const {
  auto it = std::lower_bound(successors.begin(), successors.end(), token,
                             [](const auto& p, TokenId t) { return p.first < t; });
  return (it != successors.end() && it->first == token) ? it->second : 0;
}

void NGramLM::init(int order, std::vector<double> lambdas, Orientation orientation,
                   std::size_t vocab_total, std::string vocab_hash) {
  validate_options({order, lambdas, orientation});
  if (vocab_total < 3) throw ConfigError("vocabulary must contain the special symbols");
  order_ = order;
  lambdas_ = std::move(lambdas);
  floor_weight_ = 1.0 - std::accumulate(lambdas_.begin(), lambdas_.end(), 0.0);
  orientation_ = orientation;
  vocab_total_ = vocab_total;
  vocab_hash_ = std::move(vocab_hash);
  bits_per_token_ = static_cast<unsigned>(std::bit_width(vocab_total - 1));
  if (static_cast<std::size_t>(bits_per_token_) * static_cast<std::size_t>(order - 1) > 64) {
    throw ConfigError("order " + std::to_string(order) + " too high for a vocabulary of " +
                      std::to_string(vocab_total) + " tokens");
  }
  levels_.assign(static_cast<std::size_t>(order), {});
}

std::uint64_t NGramLM::pack(std::span<const TokenId> ctx) const {
  std::uint64_t key = 0;
  for (TokenId t : ctx) key = (key << bits_per_token_) | static_cast<std::uint64_t>(t);
  return key;
}

std::vector<TokenId> NGramLM::unpack(std::uint64_t key, std::size_t length) const {
  std::vector<TokenId> ctx(length);
  const std::uint64_t mask = (std::uint64_t{1} << bits_per_token_) - 1;
  for (std::size_t i = length; i-- > 0;) {
    ctx[i] = static_cast<TokenId>(key & mask);
    key >>= bits_per_token_;
  }
  return ctx;
}

TokenId NGramLM::start_symbol() const {
  return orientation_ == Orientation::kForward ? Vocabulary::kSos : Vocabulary::kEos;
}

TokenId NGramLM::terminal_symbol() const {
  return orientation_ == Orientation::kForward ? Vocabulary::kEos : Vocabulary::kSos;
}

bool NGramLM::in_support(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= vocab_total_) return false;
  return id != start_symbol();
}

std::vector<TokenId> NGramLM::support() const {
  std::vector<TokenId> out;
  out.reserve(support_size());
  for (std::size_t i = 0; i < vocab_total_; ++i) {
    if (in_support(static_cast<TokenId>(i))) out.push_back(static_cast<TokenId>(i));
  }
  return out;
}

void NGramLM::check_token(TokenId id) const {
  if (!in_support(id)) {
    throw std::invalid_argument("token " + std::to_string(id) +
                                " is not in the prediction support of this " +
                                to_string(orientation_) + " model");
  }
}

std::size_t NGramLM::ngram_count(int order) const {
  if (order < 1 || order > order_) return 0;
  std::size_t n = 0;
  for (const auto& [_, e] : levels_[static_cast<std::size_t>(order - 1)]) n += e.successors.size();
  return n;
}

double NGramLM::prob(TokenId token, std::span<const TokenId> context) const {
  check_token(token);
  const std::size_t usable = std::min(context.size(), static_cast<std::size_t>(order_ - 1));
  const auto ctx = context.last(usable);
  for (TokenId t : ctx) {
    if (t < 0 || static_cast<std::size_t>(t) >= vocab_total_) {
      throw std::invalid_argument("context token " + std::to_string(t) + " out of range");
    }
  }
  const double uniform = 1.0 / static_cast<double>(support_size());

  double p = floor_weight_ * uniform;
  double carry = 0.0;
  for (int n = order_; n >= 1; --n) {
    const double weight = lambdas_[static_cast<std::size_t>(n - 1)];
    const auto len = static_cast<std::size_t>(n - 1);
    if (len > usable) {
      carry += weight;
      continue;
    }
    const auto& level = levels_[static_cast<std::size_t>(n - 1)];
    auto it = level.find(pack(ctx.last(len)));
    if (it == level.end() || it->second.total == 0) {
      carry += weight;
      continue;
    }
    const double ml = static_cast<double>(it->second.count(token)) /
                      static_cast<double>(it->second.total);
    p += (weight + carry) * ml;
    carry = 0.0;
  }
  // Only reachable for a model with no unigram events.
  if (carry > 0.0) p += carry * uniform;
  return p;
}

double NGramLM::logprob(TokenId token, std::span<const TokenId> context) const {
  return std::log(prob(token, context));
}

NGramLM::Trainer::Trainer(const Vocabulary& vocab, NGramOptions options) {
  lm_.init(options.order, std::move(options.lambdas), options.orientation, vocab.total_count(),
           vocab.hash());
  counts_.resize(static_cast<std::size_t>(lm_.order_));
}

void NGramLM::Trainer::add(std::span<const TokenId> body) {
  wrapped_.clear();
  wrapped_.push_back(lm_.start_symbol());
  for (TokenId t : body) {
    if (t < Vocabulary::kUnk || static_cast<std::size_t>(t) >= lm_.vocab_total_) {
      throw std::invalid_argument("training sentence contains non-ordinary token " +
                                  std::to_string(t));
    }
    wrapped_.push_back(t);
  }
  wrapped_.push_back(lm_.terminal_symbol());
  const std::span<const TokenId> w(wrapped_);
  for (std::size_t i = 1; i < w.size(); ++i) {
    for (std::size_t n = 1; n <= static_cast<std::size_t>(lm_.order_) && n - 1 <= i; ++n) {
      ++counts_[n - 1][lm_.pack(w.subspan(i - (n - 1), n - 1))][w[i]];
    }
  }
  ++sentences_;
}

NGramLM NGramLM::Trainer::finish() && {
  if (sentences_ == 0) throw ConfigError("cannot train a language model on an empty corpus");
  for (std::size_t n = 0; n < counts_.size(); ++n) {
    auto& level = lm_.levels_[n];
    level.reserve(counts_[n].size());
    for (auto& [key, succ] : counts_[n]) {
      ContextEntry e;
      e.successors.assign(succ.begin(), succ.end());
      std::sort(e.successors.begin(), e.successors.end());
      for (const auto& [_, c] : e.successors) e.total += c;
      level.emplace(key, std::move(e));
    }
    counts_[n].clear();
  }
  return std::move(lm_);
}

NGramLM NGramLM::train(std::span<const TokenSeq> corpus, const Vocabulary& vocab,
                       const NGramOptions& options) {
  validate_options(options);
  if (corpus.empty()) throw ConfigError("cannot train a language model on an empty corpus");
  Trainer trainer(vocab, options);
  for (const auto& s : corpus) trainer.add(s);
  return std::move(trainer).finish();
}

void NGramLM::save(const std::filesystem::path& path) const {
  auto out = open_output(path);
  out << kMagic << '\n';
  out << "order " << order_ << '\n';
  out << "orientation " << to_string(orientation_) << '\n';
  out << "lambdas";
  for (double l : lambdas_) out << ' ' << format_double(l);
  out << '\n';
  out << "vocab_total " << vocab_total_ << '\n';
  out << "vocab_hash " << vocab_hash_ << '\n';
  out << "ngrams\n";
  for (std::size_t n = 0; n < levels_.size(); ++n) {
    std::vector<std::pair<std::vector<TokenId>, const ContextEntry*>> sorted;
    sorted.reserve(levels_[n].size());
    for (const auto& [key, e] : levels_[n]) sorted.emplace_back(unpack(key, n), &e);
    std::sort(sorted.begin(), sorted.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (const auto& [ctx, e] : sorted) {
      for (const auto& [tok, c] : e->successors) {
        out << (n + 1);
        for (TokenId t : ctx) out << ' ' << t;
        out << ' ' << tok << ' ' << c << '\n';
      }
    }
  }
  out << "end\n";
}

NGramLM NGramLM::load(const std::filesystem::path& path) {
  auto in = open_input(path);
  const std::string src = path.string();
  std::string line;
  std::size_t lineno = 0;

  auto next = [&](std::string_view what) {
    if (!std::getline(in, line)) throw ParseError(src, lineno + 1, "unexpected end of file, expected " + std::string(what));
    ++lineno;
    return split_whitespace(line);
  };
  auto header = [&](std::string_view key, std::size_t min_values) {
    auto f = next(key);
    if (f.empty() || f[0] != key || f.size() < 1 + min_values) {
      throw ParseError(src, lineno, "expected '" + std::string(key) + "' header");
    }
    return f;
  };

  if (!std::getline(in, line) || line != kMagic) throw ParseError(src, 1, "not an isf n-gram model file");
  ++lineno;

  NGramLM lm;
  try {
    const int order = static_cast<int>(parse_int(header("order", 1)[1]));
    const Orientation orientation = parse_orientation(header("orientation", 1)[1]);
    auto lf = header("lambdas", 1);
    std::vector<double> lambdas;
    for (std::size_t i = 1; i < lf.size(); ++i) lambdas.push_back(parse_double(lf[i]));
    const auto total = static_cast<std::size_t>(parse_int(header("vocab_total", 1)[1]));
    const std::string hash = header("vocab_hash", 1)[1];
    lm.init(order, std::move(lambdas), orientation, total, hash);
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception& e) {
    throw ParseError(src, lineno, e.what());
  }
  header("ngrams", 0);

  std::vector<std::unordered_map<std::uint64_t, ContextEntry>> levels(lm.levels_.size());
  bool ended = false;
  while (std::getline(in, line)) {
    ++lineno;
    auto f = split_whitespace(line);
    if (f.size() == 1 && f[0] == "end") {
      ended = true;
      break;
    }
    try {
      if (f.empty()) throw std::invalid_argument("empty record");
      const auto n = parse_int(f[0]);
      if (n < 1 || n > lm.order_) throw std::invalid_argument("record order out of range");
      if (f.size() != static_cast<std::size_t>(n) + 2) {
        throw std::invalid_argument("expected " + std::to_string(n + 2) + " fields");
      }
      std::vector<TokenId> ids;
      for (std::size_t i = 1; i <= static_cast<std::size_t>(n); ++i) {
        const auto v = parse_int(f[i]);
        if (v < 0 || static_cast<std::size_t>(v) >= lm.vocab_total_) {
          throw std::invalid_argument("token id out of range");
        }
        ids.push_back(static_cast<TokenId>(v));
      }
      const auto c = parse_int(f.back());
      if (c <= 0) throw std::invalid_argument("count must be positive");
      const TokenId tok = ids.back();
      if (!lm.in_support(tok)) throw std::invalid_argument("predicted token outside support");
      ids.pop_back();
      auto& e = levels[static_cast<std::size_t>(n - 1)][lm.pack(ids)];
      if (!e.successors.empty() && e.successors.back().first >= tok) {
        throw std::invalid_argument("records not sorted");
      }
      e.successors.emplace_back(tok, static_cast<std::uint64_t>(c));
      e.total += static_cast<std::uint64_t>(c);
    } catch (const std::exception& e) {
      throw ParseError(src, lineno, e.what());
    }
  }
  if (!ended) throw ParseError(src, lineno + 1, "missing 'end' marker");
  lm.levels_ = std::move(levels);
  return lm;
}

double lm_logprob(const NGramLM& lm, TokenId token, std::span<const TokenId> context) {
  return lm.logprob(token, context);
}

double sequence_logprob(const NGramLM& lm, std::span<const TokenId> body) {
  TokenSeq ctx;
  ctx.reserve(body.size() + 1);
  ctx.push_back(lm.start_symbol());
  double total = 0.0;
  for (TokenId t : body) {
    total += lm.logprob(t, ctx);
    ctx.push_back(t);
  }
  total += lm.logprob(lm.terminal_symbol(), ctx);
  return total;
}

double PerplexityReport::perplexity() const {
  return std::exp(-total_logprob / static_cast<double>(predictions));
}

PerplexityReport evaluate_perplexity(const NGramLM& lm, std::span<const TokenSeq> dataset) {
  if (dataset.empty()) throw ConfigError("cannot compute perplexity of an empty dataset");
  PerplexityReport r;
  for (const auto& s : dataset) {
    r.total_logprob += sequence_logprob(lm, s);
    r.predictions += s.size() + 1;
    ++r.sentences;
  }
  return r;
}

double perplexity(const NGramLM& lm, std::span<const TokenSeq> dataset) {
  return evaluate_perplexity(lm, dataset).perplexity();
}

}  // namespace isf
