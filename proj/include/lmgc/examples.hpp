#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "corpus.hpp"
#include "error.hpp"
#include "lexicon.hpp"
#include "rng.hpp"
#include "tokenizer.hpp"

namespace lmgc {

struct BuilderConfig {
  std::size_t max_len = 160;
  double mask_prob = 0.15;
  // Replacement split for a selected position: [MASK], random token, unchanged.
  double mask_token_share = 0.8;
  double random_token_share = 0.1;
  double keep_share = 0.1;
  std::uint64_t seed = 0;

  void validate() const {
    if (max_len < 8) throw Error(ErrorKind::InvalidConfig, "max_len must be >= 8");
    auto in_unit = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (!in_unit(mask_prob) || !in_unit(mask_token_share) || !in_unit(random_token_share) || !in_unit(keep_share))
      throw Error(ErrorKind::InvalidConfig, "probabilities must lie in [0, 1]");
    if (std::abs(mask_token_share + random_token_share + keep_share - 1.0) > 1e-9)
      throw Error(ErrorKind::InvalidConfig, "mask split must sum to 1");
  }
};

/// [AGG] left [TGT] target [/TGT] right [SEP] lemma gloss [SEP]
/// Segment 0 runs through the first [SEP] inclusive.
struct SentenceGlossPair {
  TokenSequence sequence;
  std::size_t target_position = 0;  // index of the first target token
  std::size_t target_width = 0;
  bool label = false;
  std::string sense_key;

  std::size_t tgt_begin_index() const { return target_position - 1; }
  std::size_t tgt_end_index() const { return target_position + target_width; }
  friend bool operator==(const SentenceGlossPair&, const SentenceGlossPair&) = default;
};

struct CandidateGroup {
  std::string instance_id;
  std::vector<SentenceGlossPair> pairs;
  std::vector<std::size_t> gold_indices;
  std::size_t primary_gold = 0;

  std::size_t k() const noexcept { return pairs.size(); }
  friend bool operator==(const CandidateGroup&, const CandidateGroup&) = default;
};

struct MaskedPosition {
  std::size_t pair = 0;
  std::size_t token = 0;
  TokenId original = 0;
  friend bool operator==(const MaskedPosition&, const MaskedPosition&) = default;
};

struct MaskedGroup {
  CandidateGroup base;
  std::vector<TokenSequence> masked_sequences;
  std::vector<MaskedPosition> masked_positions;
};

namespace detail {

struct PairPieces {
  std::vector<std::string> left, target, right, lemma, gloss;

  std::size_t fixed() const { return 5 + target.size() + lemma.size(); }
  std::size_t full_length() const { return fixed() + left.size() + right.size() + gloss.size(); }
};

inline PairPieces pair_pieces(const WsdSentence& sentence, std::size_t token_index, const SenseEntry& sense) {
  PairPieces p;
  for (std::size_t i = 0; i < sentence.tokens.size(); ++i) {
    auto toks = tokenize(sentence.tokens[i].surface);
    auto& dst = i < token_index ? p.left : (i == token_index ? p.target : p.right);
    dst.insert(dst.end(), toks.begin(), toks.end());
  }
  if (p.target.empty()) p.target = tokenize_lemma(sense.lemma);
  p.lemma = tokenize_lemma(sense.lemma);
  p.gloss = tokenize(sense.gloss);
  return p;
}

}  // namespace detail

/// Length the pair would have without truncation.
inline std::size_t untruncated_length(const WsdSentence& sentence, std::size_t token_index, const SenseEntry& sense) {
  return detail::pair_pieces(sentence, token_index, sense).full_length();
}

/// Lays out one sentence-gloss pair. Over budget, the gloss tail is cut
/// first; if the context alone still does not fit, context tokens are
/// removed from whichever side of the target is longer (right on ties).
inline SentenceGlossPair build_pair(const WsdSentence& sentence, std::size_t token_index, const SenseEntry& sense,
                                    const std::set<std::string>& gold, const Vocabulary& vocab,
                                    const BuilderConfig& config) {
  auto p = detail::pair_pieces(sentence, token_index, sense);
  if (p.fixed() > config.max_len)
    throw Error(ErrorKind::TargetTruncated, sentence.sentence_id + ": target and lemma exceed max_len");
  const std::size_t budget = config.max_len - p.fixed();
  std::size_t context = p.left.size() + p.right.size();
  if (context + p.gloss.size() > budget) p.gloss.resize(context >= budget ? 0 : budget - context);
  std::size_t left_keep = p.left.size();
  std::size_t right_keep = p.right.size();
  while (left_keep + right_keep > budget) {
    if (left_keep > right_keep)
      --left_keep;
    else
      --right_keep;
  }

  SentenceGlossPair pair;
  pair.label = gold.count(sense.sense_key) != 0;
  pair.sense_key = sense.sense_key;
  auto& ids = pair.sequence.ids;
  auto& seg = pair.sequence.segments;
  auto push = [&](TokenId id, std::uint8_t s) {
    ids.push_back(id);
    seg.push_back(s);
  };
  push(id_of(Special::Agg), 0);
  for (std::size_t i = p.left.size() - left_keep; i < p.left.size(); ++i) push(vocab.lookup(p.left[i]), 0);
  push(id_of(Special::TgtBegin), 0);
  pair.target_position = ids.size();
  pair.target_width = p.target.size();
  for (const auto& t : p.target) push(vocab.lookup(t), 0);
  push(id_of(Special::TgtEnd), 0);
  for (std::size_t i = 0; i < right_keep; ++i) push(vocab.lookup(p.right[i]), 0);
  push(id_of(Special::Sep), 0);
  for (const auto& t : p.lemma) push(vocab.lookup(t), 1);
  for (const auto& t : p.gloss) push(vocab.lookup(t), 1);
  push(id_of(Special::Sep), 1);
  return pair;
}

/// All candidate pairs of one instance, ordered by sense rank.
inline CandidateGroup build_group(const WsdCorpus& corpus, const std::string& instance_id, const GlossLexicon& lexicon,
                                  const GoldKeys& gold, const Vocabulary& vocab, const BuilderConfig& config) {
  const auto ref = corpus.locate(instance_id);
  if (!ref) throw Error(ErrorKind::UnknownInstanceId, instance_id);
  const CorpusToken& tok = corpus.token(*ref);
  const auto g = gold.find(instance_id);
  if (g == gold.end()) throw Error(ErrorKind::MissingGold, instance_id);
  std::span<const SenseEntry> candidates;
  if (tok.pos) candidates = lexicon.candidates(tok.lemma.value_or(tok.surface), *tok.pos);
  if (candidates.empty()) throw Error(ErrorKind::NoCandidates, instance_id);

  CandidateGroup group;
  group.instance_id = instance_id;
  const WsdSentence& sentence = corpus.sentences()[ref->sentence];
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    group.pairs.push_back(build_pair(sentence, ref->token, candidates[i], g->second, vocab, config));
    if (group.pairs.back().label) group.gold_indices.push_back(i);
  }
  if (group.gold_indices.empty()) throw Error(ErrorKind::GoldNotInInventory, instance_id);
  group.primary_gold = group.gold_indices.front();
  return group;
}

struct GroupBuildResult {
  std::vector<CandidateGroup> groups;  // sorted by instance_id
  std::vector<std::string> skipped;    // NoCandidates / GoldNotInInventory
  std::size_t pairs = 0;
  std::size_t pairs_within_budget = 0;  // untruncated length <= max_len
};

inline GroupBuildResult build_groups(const WsdCorpus& corpus, const GoldKeys& gold, const GlossLexicon& lexicon,
                                     const Vocabulary& vocab, const BuilderConfig& config) {
  config.validate();
  GroupBuildResult result;
  for (const auto& id : corpus.instance_order()) {
    try {
      result.groups.push_back(build_group(corpus, id, lexicon, gold, vocab, config));
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::NoCandidates && e.kind() != ErrorKind::GoldNotInInventory) throw;
      result.skipped.push_back(id);
      continue;
    }
    const auto ref = *corpus.locate(id);
    const CorpusToken& tok = corpus.token(ref);
    for (const auto& sense : lexicon.candidates(tok.lemma.value_or(tok.surface), *tok.pos)) {
      ++result.pairs;
      if (untruncated_length(corpus.sentences()[ref.sentence], ref.token, sense) <= config.max_len)
        ++result.pairs_within_budget;
    }
  }
  std::sort(result.groups.begin(), result.groups.end(),
            [](const CandidateGroup& a, const CandidateGroup& b) { return a.instance_id < b.instance_id; });
  return result;
}

inline std::uint64_t pair_stream_seed(std::uint64_t seed, std::string_view instance_id, std::size_t pair_index) {
  return hash_combine(seed, hash_combine(fnv1a64(instance_id), pair_index));
}

/// Context-only masking. Each eligible position (segment 0, not a special,
/// outside the bracketed target) is selected with `mask_prob`, then
/// replaced by [MASK], a random regular token or left unchanged.
inline MaskedGroup apply_masking(const CandidateGroup& group, const BuilderConfig& config, std::size_t vocab_size) {
  config.validate();
  MaskedGroup out;
  out.base = group;
  for (std::size_t p = 0; p < group.pairs.size(); ++p) {
    const auto& pair = group.pairs[p];
    TokenSequence seq = pair.sequence;
    Rng rng(pair_stream_seed(config.seed, group.instance_id, p));
    for (std::size_t i = 0; i < seq.ids.size(); ++i) {
      if (seq.segments[i] != 0 || is_special(seq.ids[i])) continue;
      if (i >= pair.target_position && i < pair.target_position + pair.target_width) continue;
      if (rng.uniform() >= config.mask_prob) continue;
      out.masked_positions.push_back({p, i, seq.ids[i]});
      const double r = rng.uniform();
      if (r < config.mask_token_share) {
        seq.ids[i] = id_of(Special::Mask);
      } else if (r < config.mask_token_share + config.random_token_share) {
        seq.ids[i] = vocab_size > kSpecialCount
                         ? static_cast<TokenId>(kSpecialCount + rng.below(vocab_size - kSpecialCount))
                         : id_of(Special::Mask);
      }
    }
    out.masked_sequences.push_back(std::move(seq));
  }
  return out;
}

inline nlohmann::json group_to_json(const CandidateGroup& g) {
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& p : g.pairs) {
    pairs.push_back({{"ids", p.sequence.ids},
                     {"segments", p.sequence.segments},
                     {"label", p.label},
                     {"sense_key", p.sense_key},
                     {"target", p.target_position},
                     {"width", p.target_width}});
  }
  return {{"instance_id", g.instance_id}, {"pairs", pairs}, {"gold", g.gold_indices}, {"primary_gold", g.primary_gold}};
}

inline CandidateGroup group_from_json(const nlohmann::json& j) {
  CandidateGroup g;
  g.instance_id = j.at("instance_id").get<std::string>();
  for (const auto& pj : j.at("pairs")) {
    SentenceGlossPair p;
    p.sequence.ids = pj.at("ids").get<std::vector<TokenId>>();
    p.sequence.segments = pj.at("segments").get<std::vector<std::uint8_t>>();
    p.label = pj.at("label").get<bool>();
    p.sense_key = pj.value("sense_key", std::string());
    p.target_position = pj.at("target").get<std::size_t>();
    p.target_width = pj.at("width").get<std::size_t>();
    if (p.sequence.ids.size() != p.sequence.segments.size() || p.target_position == 0 ||
        p.tgt_end_index() >= p.sequence.ids.size())
      throw Error(ErrorKind::SchemaError, "inconsistent pair layout");
    g.pairs.push_back(std::move(p));
  }
  g.gold_indices = j.at("gold").get<std::vector<std::size_t>>();
  g.primary_gold = j.at("primary_gold").get<std::size_t>();
  if (g.pairs.empty() || g.gold_indices.empty() ||
      std::find(g.gold_indices.begin(), g.gold_indices.end(), g.primary_gold) == g.gold_indices.end())
    throw Error(ErrorKind::SchemaError, "group without valid gold");
  for (std::size_t i = 0; i < g.pairs.size(); ++i) {
    const bool gold = std::find(g.gold_indices.begin(), g.gold_indices.end(), i) != g.gold_indices.end();
    if (gold != g.pairs[i].label) throw Error(ErrorKind::SchemaError, "labels disagree with gold indices");
  }
  return g;
}

inline std::string serialize_groups(std::span<const CandidateGroup> groups) {
  std::string out;
  for (const auto& g : groups) {
    out += group_to_json(g).dump();
    out += '\n';
  }
  return out;
}

inline std::vector<CandidateGroup> parse_groups(std::string_view text, const std::string& origin = "<groups>") {
  std::vector<CandidateGroup> groups;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      groups.push_back(group_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::SchemaError, origin + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(ErrorKind::SchemaError, origin + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return groups;
}

inline void export_groups(std::span<const CandidateGroup> groups, const std::string& path) {
  write_file(path, serialize_groups(groups));
}

inline std::vector<CandidateGroup> import_groups(const std::string& path) { return parse_groups(read_file(path), path); }

}  // namespace lmgc
