// SPDX-License-Identifier: Apache-2.0
#include "tagan/vocab.hpp"

#include <cctype>
#include <fstream>

namespace tagan {

Vocabulary::Vocabulary() {
  add("<pad>");
  add("<unk>");
}

int Vocabulary::add(const std::string& token) {
  auto it = ids_.find(token);
  if (it != ids_.end()) return it->second;
  const int id = static_cast<int>(tokens_.size());
  tokens_.push_back(token);
  ids_[token] = id;
  return id;
}

bool Vocabulary::contains(const std::string& token) const {
  return ids_.count(token) != 0;
}

int Vocabulary::id_of(const std::string& token) const {
  auto it = ids_.find(token);
  if (it == ids_.end()) {
    throw VocabularyError("unknown token: '" + token + "'");
  }
  return it->second;
}

int Vocabulary::id_or_unk(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? kUnkId : it->second;
}

const std::string& Vocabulary::token_of(int id) const {
  if (id < 0 || id >= size()) {
    throw VocabularyError("token id " + std::to_string(id) + " out of range");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write vocabulary file: " + path);
  for (const auto& token : tokens_) out << token << '\n';
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read vocabulary file: " + path);
  Vocabulary v;
  v.tokens_.clear();
  v.ids_.clear();
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const int id = static_cast<int>(v.tokens_.size());
    v.tokens_.push_back(line);
    v.ids_[line] = id;
  }
  if (v.size() < 2) {
    throw IoError("vocabulary file too small (needs pad and unk): " + path);
  }
  return v;
}

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char raw : text) {
    const unsigned char c = static_cast<unsigned char>(raw);
    if (std::isalnum(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (!current.empty()) {
      tokens.push_back(current);
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(current);
  return tokens;
}

Caption encode_caption(const std::string& text, const Vocabulary& vocab,
                       bool allow_unknown,
                       std::vector<std::string>* unknown_tokens) {
  Caption caption;
  caption.text = text;
  for (const auto& token : tokenize(text)) {
    if (vocab.contains(token)) {
      caption.ids.push_back(vocab.id_of(token));
    } else if (allow_unknown) {
      caption.ids.push_back(Vocabulary::kUnkId);
      if (unknown_tokens) unknown_tokens->push_back(token);
    } else {
      throw VocabularyError("unknown token: '" + token + "'");
    }
  }
  if (caption.ids.empty()) {
    throw ContractError("caption has no tokens: '" + text + "'");
  }
  return caption;
}

}  // namespace tagan
