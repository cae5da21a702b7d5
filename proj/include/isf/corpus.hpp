#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

#include "isf/common.hpp"

namespace isf {

struct CorpusStats {
  std::size_t sentence_count = 0;
  std::size_t token_count = 0;

  /// 0 for an empty corpus.
  double average_length() const {
    return sentence_count == 0 ? 0.0
                               : static_cast<double>(token_count) /
                                     static_cast<double>(sentence_count);
  }

  void add(std::size_t length) {
    ++sentence_count;
    token_count += length;
  }
};

template <class T>
CorpusStats corpus_stats(std::span<const std::vector<T>> sentences) {
  CorpusStats s;
  for (const auto& x : sentences) s.add(x.size());
  return s;
}

inline CorpusStats corpus_stats(std::span<const TokenSeq> sentences) {
  return corpus_stats<TokenId>(sentences);
}

template <class T>
std::vector<std::vector<T>> reverse_corpus(std::span<const std::vector<T>> sentences) {
  std::vector<std::vector<T>> out;
  out.reserve(sentences.size());
  for (const auto& s : sentences) out.emplace_back(s.rbegin(), s.rend());
  return out;
}

inline std::vector<TokenSeq> reverse_corpus(std::span<const TokenSeq> sentences) {
  return reverse_corpus<TokenId>(sentences);
}

/// Streams the backward partial-sentence training data for one sentence
/// w_1..w_n: the reversed prefixes w_t..w_1 for t = n down to 1. Each view
/// is valid only for the duration of the callback.
template <class T, class Sink>
void for_each_partial(std::span<const T> sentence, Sink&& sink) {
  std::vector<T> reversed(sentence.rbegin(), sentence.rend());
  const std::size_t n = reversed.size();
  for (std::size_t t = n; t >= 1; --t) {
    sink(std::span<const T>(reversed).subspan(n - t));
  }
}

template <class T, class Sink>
void for_each_partial(std::span<const std::vector<T>> sentences, Sink&& sink) {
  for (const auto& s : sentences) for_each_partial(std::span<const T>(s), sink);
}

template <class T>
std::vector<std::vector<T>> make_partial_corpus(std::span<const std::vector<T>> sentences) {
  std::vector<std::vector<T>> out;
  for_each_partial(sentences,
                   [&](std::span<const T> p) { out.emplace_back(p.begin(), p.end()); });
  return out;
}

inline std::vector<TokenSeq> make_partial_corpus(std::span<const TokenSeq> sentences) {
  return make_partial_corpus<TokenId>(sentences);
}

/// Stats of make_partial_corpus(sentences) without materializing it.
template <class T>
CorpusStats partial_corpus_stats(std::span<const std::vector<T>> sentences) {
  CorpusStats s;
  for (const auto& x : sentences) {
    const std::size_t n = x.size();
    s.sentence_count += n;
    s.token_count += n * (n + 1) / 2;
  }
  return s;
}

}  // namespace isf
