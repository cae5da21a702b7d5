#include "isf/vocab.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include "isf/text_io.hpp"

namespace isf {

namespace {

bool is_special(std::string_view s) {
  return s == Vocabulary::kSosSymbol || s == Vocabulary::kEosSymbol ||
         s == Vocabulary::kUnkSymbol;
}

}  // namespace

Vocabulary::Vocabulary() : Vocabulary(std::vector<std::string>{}) {}

Vocabulary::Vocabulary(std::vector<std::string> ordinary) {
  tokens_.reserve(ordinary.size() + 3);
  tokens_.emplace_back(kSosSymbol);
  tokens_.emplace_back(kEosSymbol);
  tokens_.emplace_back(kUnkSymbol);
  for (auto& t : ordinary) {
    if (is_special(t)) throw ConfigError("special symbol '" + t + "' listed as ordinary token");
    if (t.empty()) throw ConfigError("empty token string");
    tokens_.push_back(std::move(t));
  }
  std::uint64_t h = fnv1a64("isf-vocab");
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], static_cast<TokenId>(i)).second) {
      throw ConfigError("duplicate token '" + tokens_[i] + "'");
    }
    h = fnv1a64(tokens_[i], h);
    h = fnv1a64("\n", h);
  }
  hash_ = to_hex(h);
}

Vocabulary Vocabulary::build(std::span<const std::vector<std::string>> corpus,
                             std::size_t max_size) {
  if (corpus.empty()) throw ConfigError("cannot build a vocabulary from an empty corpus");
  if (max_size < 1) throw ConfigError("vocabulary max_size must be >= 1");
  std::map<std::string, std::size_t> freq;
  for (const auto& sentence : corpus) {
    for (const auto& tok : sentence) {
      if (!is_special(tok)) ++freq[tok];
    }
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(), freq.end());
  // std::map iteration is already lexicographic; stable_sort keeps that as the tie-break.
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (ranked.size() > max_size) ranked.resize(max_size);
  std::vector<std::string> ordinary;
  ordinary.reserve(ranked.size());
  for (auto& [tok, _] : ranked) ordinary.push_back(std::move(tok));
  return Vocabulary(std::move(ordinary));
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::string line;
  std::vector<std::string> ordinary;
  std::size_t lineno = 0;
  const std::string_view expected[3] = {kSosSymbol, kEosSymbol, kUnkSymbol};
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (lineno <= 3) {
      if (line != expected[lineno - 1]) {
        throw ParseError(path.string(), lineno,
                         "expected special symbol '" + std::string(expected[lineno - 1]) + "'");
      }
      continue;
    }
    if (line.empty() || split_whitespace(line).size() != 1) {
      throw ParseError(path.string(), lineno, "expected exactly one token per line");
    }
    ordinary.push_back(line);
  }
  if (lineno < 3) throw ParseError(path.string(), lineno + 1, "missing special symbols");
  try {
    return Vocabulary(std::move(ordinary));
  } catch (const ConfigError& e) {
    throw ParseError(path.string(), lineno, e.what());
  }
}

void Vocabulary::save(const std::filesystem::path& path) const {
  auto out = open_output(path);
  for (const auto& t : tokens_) out << t << '\n';
}

std::optional<TokenId> Vocabulary::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

TokenId Vocabulary::id_of(std::string_view token) const {
  auto id = find(token);
  if (!id || *id == kSos || *id == kEos) return kUnk;
  return *id;
}

const std::string& Vocabulary::lookup(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw std::out_of_range("token id " + std::to_string(id) + " out of range");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

TokenSeq Vocabulary::encode(std::span<const std::string> text) const {
  TokenSeq out;
  out.reserve(text.size());
  for (const auto& t : text) out.push_back(id_of(t));
  return out;
}

TokenSeq Vocabulary::encode(std::string_view text) const {
  auto toks = split_whitespace(text);
  return encode(std::span<const std::string>(toks));
}

std::vector<std::string> Vocabulary::decode(std::span<const TokenId> ids) const {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (TokenId id : ids) out.push_back(lookup(id));
  return out;
}

std::string Vocabulary::to_text(std::span<const TokenId> ids) const {
  auto toks = decode(ids);
  return join(toks);
}

}  // namespace isf
