// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "tagan/error.hpp"

namespace tagan {

/// Token <-> id bijection with reserved ids for padding (0) and unknown (1).
class Vocabulary {
public:
  static constexpr int kPadId = 0;
  static constexpr int kUnkId = 1;

  Vocabulary();

  /// Register a token (idempotent); returns its id.
  int add(const std::string& token);

  bool contains(const std::string& token) const;

  /// Id of a known token; throws VocabularyError for unknown tokens.
  int id_of(const std::string& token) const;

  /// Id of a token, falling back to the unknown id.
  int id_or_unk(const std::string& token) const;

  const std::string& token_of(int id) const;
  int size() const { return static_cast<int>(tokens_.size()); }

  /// Newline-delimited token list; line number = id, line 0 = padding token.
  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

/// A tokenized caption: ordered token ids (length >= 1) plus the raw text.
struct Caption {
  std::vector<int> ids;
  std::string text;

  int length() const { return static_cast<int>(ids.size()); }
};

/// Lowercase and split on whitespace and punctuation.
std::vector<std::string> tokenize(const std::string& text);

/// Tokenize and map to ids. With allow_unknown, missing tokens map to the
/// unknown id (any were_unknown flag reported via the optional out-param);
/// otherwise a missing token raises VocabularyError.
Caption encode_caption(const std::string& text, const Vocabulary& vocab,
                       bool allow_unknown = false,
                       std::vector<std::string>* unknown_tokens = nullptr);

}  // namespace tagan
