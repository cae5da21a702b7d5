#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "isf/common.hpp"

namespace isf {

/// Closed token inventory. Ids are dense; the three special symbols always
/// occupy ids 0..2 so every model and grid agrees on them without a lookup.
///
/// Prediction support of a forward model is {eos} plus the ordinary tokens
/// (ids 1..total_count-1, a contiguous range); a backward model predicts
/// {sos} plus the ordinary tokens instead.
class Vocabulary {
 public:
  static constexpr TokenId kSos = 0;
  static constexpr TokenId kEos = 1;
  static constexpr TokenId kUnk = 2;
  static constexpr std::string_view kSosSymbol = "<s>";
  static constexpr std::string_view kEosSymbol = "</s>";
  static constexpr std::string_view kUnkSymbol = "<unk>";

  /// Specials only.
  Vocabulary();

  /// `ordinary` must not contain duplicates or special symbols.
  explicit Vocabulary(std::vector<std::string> ordinary);

  /// Keeps the `max_size` most frequent tokens (ties broken by token string).
  static Vocabulary build(std::span<const std::vector<std::string>> corpus, std::size_t max_size);

  static Vocabulary load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  TokenId id_of(std::string_view token) const;
  std::optional<TokenId> find(std::string_view token) const;
  const std::string& lookup(TokenId id) const;

  TokenSeq encode(std::span<const std::string> text) const;
  TokenSeq encode(std::string_view text) const;
  std::vector<std::string> decode(std::span<const TokenId> ids) const;
  std::string to_text(std::span<const TokenId> ids) const;

  std::size_t total_count() const { return tokens_.size(); }
  /// V: ordinary tokens including unk.
  std::size_t size() const { return tokens_.size() - 2; }
  /// V + 1.
  std::size_t support_size() const { return tokens_.size() - 1; }
  bool is_ordinary(TokenId id) const {
    return id >= kUnk && static_cast<std::size_t>(id) < tokens_.size();
  }

  const std::string& hash() const { return hash_; }
  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
  std::string hash_;
};

}  // namespace isf
