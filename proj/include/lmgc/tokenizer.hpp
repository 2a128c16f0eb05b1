#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "corpus.hpp"
#include "error.hpp"
#include "lexicon.hpp"

namespace lmgc {

using TokenId = std::int32_t;

/// Reserved ids 0..6.
enum class Special : TokenId { Agg = 0, Sep, Pad, Unk, Mask, TgtBegin, TgtEnd };

inline constexpr std::size_t kSpecialCount = 7;
inline constexpr std::array<std::string_view, kSpecialCount> kSpecialNames = {
    "[AGG]", "[SEP]", "[PAD]", "[UNK]", "[MASK]", "[TGT]", "[/TGT]"};

inline constexpr TokenId id_of(Special s) { return static_cast<TokenId>(s); }
inline constexpr bool is_special(TokenId id) { return id >= 0 && static_cast<std::size_t>(id) < kSpecialCount; }

/// Lowercases, splits on whitespace and emits every ASCII punctuation
/// character as its own token. Non-ASCII bytes are kept inside words.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (c < 0x80 && std::isspace(c)) {
      flush();
    } else if (c < 0x80 && std::ispunct(c)) {
      flush();
      out.emplace_back(1, ch);
    } else {
      cur.push_back(static_cast<char>(c < 0x80 ? std::tolower(c) : c));
    }
  }
  flush();
  return out;
}

/// Multiword WordNet lemmas use underscores; render them as separate words.
inline std::vector<std::string> tokenize_lemma(std::string_view lemma) {
  std::string spaced(lemma);
  std::replace(spaced.begin(), spaced.end(), '_', ' ');
  return tokenize(spaced);
}

struct TokenSequence {
  std::vector<TokenId> ids;
  std::vector<std::uint8_t> segments;

  std::size_t size() const noexcept { return ids.size(); }
  friend bool operator==(const TokenSequence&, const TokenSequence&) = default;
};

class Vocabulary {
public:
  /// Only the special tokens.
  Vocabulary() {
    for (auto name : kSpecialNames) id_to_token_.emplace_back(name);
    for (std::size_t i = 0; i < id_to_token_.size(); ++i) token_to_id_.emplace(id_to_token_[i], static_cast<TokenId>(i));
  }

  /// Appends regular tokens after the specials. Duplicates and special
  /// spellings are rejected.
  explicit Vocabulary(const std::vector<std::string>& tokens) : Vocabulary() {
    for (const auto& t : tokens) {
      if (!token_to_id_.emplace(t, static_cast<TokenId>(id_to_token_.size())).second)
        throw Error(ErrorKind::SchemaError, "duplicate vocabulary token '" + t + "'");
      id_to_token_.push_back(t);
    }
  }

  std::size_t size() const noexcept { return id_to_token_.size(); }

  TokenId lookup(std::string_view token) const {
    auto it = token_to_id_.find(std::string(token));
    return it == token_to_id_.end() ? id_of(Special::Unk) : it->second;
  }

  bool contains(std::string_view token) const { return token_to_id_.count(std::string(token)) != 0; }

  const std::string& token(TokenId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size())
      throw Error(ErrorKind::IdOutOfRange, std::to_string(id) + " >= " + std::to_string(id_to_token_.size()));
    return id_to_token_[static_cast<std::size_t>(id)];
  }

  /// Regular (non-special) tokens in id order.
  std::span<const std::string> regular_tokens() const {
    return std::span<const std::string>(id_to_token_).subspan(kSpecialCount);
  }

  nlohmann::json to_json() const {
    nlohmann::json specials = nlohmann::json::object();
    for (std::size_t i = 0; i < kSpecialCount; ++i) specials[std::string(kSpecialNames[i])] = i;
    auto regular = regular_tokens();
    return {{"specials", specials}, {"tokens", std::vector<std::string>(regular.begin(), regular.end())}};
  }

  static Vocabulary from_json(const nlohmann::json& j) {
    try {
      const auto& specials = j.at("specials");
      for (std::size_t i = 0; i < kSpecialCount; ++i)
        if (specials.at(std::string(kSpecialNames[i])).get<std::size_t>() != i)
          throw Error(ErrorKind::SchemaError, "special token ids differ from the reserved layout");
      return Vocabulary(j.at("tokens").get<std::vector<std::string>>());
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::SchemaError, std::string("vocabulary: ") + e.what());
    }
  }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.id_to_token_ == b.id_to_token_; }

private:
  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, TokenId> token_to_id_;
};

inline std::vector<TokenId> encode(std::span<const std::string> tokens, const Vocabulary& vocab) {
  std::vector<TokenId> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(vocab.lookup(t));
  return ids;
}

inline std::vector<std::string> decode(std::span<const TokenId> ids, const Vocabulary& vocab) {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (auto id : ids) out.push_back(vocab.token(id));
  return out;
}

/// Frequency-ranked vocabulary over corpus surfaces, lexicon lemmas and
/// glosses. Ties are broken by lexicographic order. `max_size` bounds the
/// number of regular tokens (specials excluded).
inline Vocabulary build_vocab(std::span<const WsdCorpus> corpora, const GlossLexicon* lexicon, std::size_t min_freq = 1,
                              std::optional<std::size_t> max_size = std::nullopt) {
  if (min_freq < 1) throw Error(ErrorKind::InvalidConfig, "min_freq must be >= 1");
  std::map<std::string, std::size_t> counts;
  auto add = [&](const std::vector<std::string>& toks) {
    for (const auto& t : toks) ++counts[t];
  };
  for (const auto& c : corpora)
    for (const auto& s : c.sentences())
      for (const auto& t : s.tokens) add(tokenize(t.surface));
  if (lexicon) {
    for (const auto& [key, senses] : lexicon->groups()) {
      for (const auto& e : senses) {
        add(tokenize_lemma(e.lemma));
        add(tokenize(e.gloss));
      }
    }
  }
  std::vector<std::pair<std::string, std::size_t>> ranked;
  for (auto& [tok, n] : counts)
    if (n >= min_freq) ranked.emplace_back(tok, n);
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  if (max_size && ranked.size() > *max_size) ranked.resize(*max_size);
  std::vector<std::string> tokens;
  tokens.reserve(ranked.size());
  for (auto& [tok, n] : ranked) tokens.push_back(std::move(tok));
  return Vocabulary(tokens);
}

/// Builds from raw text lines; used by tests and tools that have no corpus.
inline Vocabulary build_vocab_from_text(std::span<const std::string> texts, std::size_t min_freq = 1,
                                        std::optional<std::size_t> max_size = std::nullopt) {
  WsdCorpus corpus("text");
  for (const auto& t : texts) {
    if (t.empty()) continue;
    WsdSentence s;
    s.sentence_id = "t" + std::to_string(corpus.sentences().size());
    s.tokens.push_back(CorpusToken{t, std::nullopt, std::nullopt, std::nullopt});
    corpus.add_sentence(std::move(s));
  }
  return build_vocab(std::span<const WsdCorpus>(&corpus, 1), nullptr, min_freq, max_size);
}

inline Vocabulary load_vocab(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::SchemaError, path + ": " + e.what());
  }
  return Vocabulary::from_json(j);
}

inline void save_vocab(const Vocabulary& vocab, const std::string& path) { write_file(path, vocab.to_json().dump(1) + "\n"); }

}  // namespace lmgc
