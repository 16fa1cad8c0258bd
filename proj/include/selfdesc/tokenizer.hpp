#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "selfdesc/io.hpp"

namespace selfdesc::model {

using TokenId = int;

// Splits on whitespace, then each chunk into alphanumeric runs and single
// punctuation characters. Pieces glued to the previous piece carry a "##"
// prefix, so detokenize(tokenize(s)) == s for single-spaced, trimmed s.
// "[MD]" and "[EG]" chunks stay whole.
std::vector<std::string> tokenize(std::string_view text);
std::string detokenize(const std::vector<std::string>& tokens);

class Vocab {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kUnk = 1;
  static constexpr TokenId kEos = 2;
  static constexpr TokenId kMd = 3;
  static constexpr TokenId kEg = 4;
  static constexpr std::size_t kSpecialCount = 5;

  Vocab();
  // Specials first, then every distinct token in lexicographic order.
  static Vocab build(const std::vector<std::string>& texts);
  static Vocab from_tokens(std::vector<std::string> tokens);

  TokenId id(const std::string& token) const;  // kUnk on a miss
  const std::string& token(TokenId id) const;
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::vector<TokenId> encode(std::string_view text) const;
  std::string decode(const std::vector<TokenId>& ids) const;  // stops at EOS

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> ids_;
};

inline constexpr std::size_t kDefaultMaxInput = 256;

// Prompt tokens followed by input tokens. Throws PreconditionError beyond
// max_len.
std::vector<TokenId> encode_input(std::string_view prompt, std::string_view input,
                                  const Vocab& vocab,
                                  std::size_t max_len = kDefaultMaxInput);

}  // namespace selfdesc::model
