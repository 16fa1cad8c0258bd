#include "selfdesc/tokenizer.hpp"

#include <algorithm>
#include <set>

#include "selfdesc/errors.hpp"
#include "selfdesc/text.hpp"

namespace selfdesc::model {

namespace {

constexpr std::string_view kGlue = "##";
const std::vector<std::string> kSpecials = {"[PAD]", "[UNK]", "[EOS]", "[MD]", "[EG]"};

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  for (const auto& chunk : text::split_whitespace(text)) {
    if (chunk == "[MD]" || chunk == "[EG]") {
      out.push_back(chunk);
      continue;
    }
    const auto cps = text::decode(chunk);
    bool first = true;
    std::size_t i = 0;
    while (i < cps.size()) {
      std::size_t j = i + 1;
      if (text::is_alnum(cps[i])) {
        while (j < cps.size() && text::is_alnum(cps[j])) ++j;
      }
      auto piece = text::encode(std::u32string_view(cps).substr(i, j - i));
      out.push_back(first ? piece : std::string(kGlue) + piece);
      first = false;
      i = j;
    }
  }
  return out;
}

std::string detokenize(const std::vector<std::string>& tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (t.size() > kGlue.size() && t.starts_with(kGlue)) {
      out += t.substr(kGlue.size());
    } else {
      if (!out.empty()) out += ' ';
      out += t;
    }
  }
  return out;
}

Vocab::Vocab() : tokens_(kSpecials) {
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    ids_.emplace(tokens_[i], static_cast<TokenId>(i));
  }
}

Vocab Vocab::build(const std::vector<std::string>& texts) {
  std::set<std::string> seen;
  for (const auto& t : texts) {
    for (auto& tok : tokenize(t)) seen.insert(std::move(tok));
  }
  for (const auto& s : kSpecials) seen.erase(s);
  return from_tokens({seen.begin(), seen.end()});
}

Vocab Vocab::from_tokens(std::vector<std::string> tokens) {
  Vocab v;
  for (auto& t : tokens) {
    if (std::find(kSpecials.begin(), kSpecials.end(), t) != kSpecials.end()) continue;
    v.tokens_.push_back(std::move(t));
  }
  for (std::size_t i = Vocab::kSpecialCount; i < v.tokens_.size(); ++i) {
    if (!v.ids_.emplace(v.tokens_[i], static_cast<TokenId>(i)).second) {
      throw DataError("duplicate vocabulary token '" + v.tokens_[i] + "'");
    }
  }
  return v;
}

TokenId Vocab::id(const std::string& token) const {
  const auto it = ids_.find(token);
  return it == ids_.end() ? kUnk : it->second;
}

const std::string& Vocab::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw PreconditionError("token id out of range");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

std::vector<TokenId> Vocab::encode(std::string_view text) const {
  std::vector<TokenId> out;
  for (const auto& t : tokenize(text)) out.push_back(id(t));
  return out;
}

std::string Vocab::decode(const std::vector<TokenId>& ids) const {
  std::vector<std::string> toks;
  for (auto id : ids) {
    if (id == kEos) break;
    if (id == kPad) continue;
    toks.push_back(token(id));
  }
  return detokenize(toks);
}

std::vector<TokenId> encode_input(std::string_view prompt, std::string_view input,
                                  const Vocab& vocab, std::size_t max_len) {
  auto ids = vocab.encode(prompt);
  const auto rest = vocab.encode(input);
  ids.insert(ids.end(), rest.begin(), rest.end());
  if (ids.size() > max_len) {
    throw PreconditionError("input of " + std::to_string(ids.size()) +
                            " tokens exceeds the limit of " + std::to_string(max_len));
  }
  return ids;
}

}  // namespace selfdesc::model
