#pragma once

#include <cstdio>
#include <set>
#include <string>
#include <vector>

#include "corpus.hpp"
#include "error.hpp"
#include "eval.hpp"
#include "lexicon.hpp"
#include "rng.hpp"
#include "tokenizer.hpp"
#include "train.hpp"

namespace lmgc {

/// Desk-scale WSD data with a known decision rule. Every sense gloss carries
/// a marker word; a sentence contains its gold sense's marker with
/// probability `signal_strength`. No other candidate gloss of that lemma
/// contains the same marker.
struct SyntheticSpec {
  std::size_t n_lemmas = 20;
  std::size_t senses_per_lemma = 4;
  std::size_t n_sentences = 100;
  std::size_t vocab_size = 200;  // filler words
  double signal_strength = 1.0;
  std::uint64_t seed = 0;
  std::size_t context_words = 8;
  std::size_t gloss_words = 4;
  /// Distinct marker words. 0 gives every sense its own marker; otherwise
  /// sense j of lemma i uses marker (i + j) mod marker_pool, which keeps
  /// markers distinct within a lemma when marker_pool >= senses_per_lemma.
  std::size_t marker_pool = 0;

  void validate() const {
    if (n_lemmas == 0 || n_sentences == 0 || vocab_size == 0)
      throw Error(ErrorKind::InvalidSpec, "n_lemmas, n_sentences and vocab_size must be positive");
    if (senses_per_lemma < 2) throw Error(ErrorKind::InvalidSpec, "senses_per_lemma must be >= 2");
    if (!(signal_strength >= 0.0 && signal_strength <= 1.0))
      throw Error(ErrorKind::InvalidSpec, "signal_strength must lie in [0, 1]");
    if (marker_pool != 0 && marker_pool < senses_per_lemma)
      throw Error(ErrorKind::InvalidSpec, "marker_pool must be 0 or >= senses_per_lemma");
  }
};

struct SyntheticData {
  GlossLexicon lexicon;
  WsdCorpus corpus;
  GoldKeys gold;
};

namespace detail {

inline std::string padded(std::size_t v, int width) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%0*zu", width, v);
  return buf;
}

inline std::string synthetic_lemma(std::size_t i) { return "lem" + std::to_string(i); }
inline std::string synthetic_key(std::size_t lemma, std::size_t sense) {
  return synthetic_lemma(lemma) + "%1:00:" + padded(sense, 2) + "::";
}

inline std::string marker_word(const SyntheticSpec& spec, std::size_t lemma, std::size_t sense) {
  const std::size_t m = spec.marker_pool == 0 ? lemma * spec.senses_per_lemma + sense : (lemma + sense) % spec.marker_pool;
  return "mk" + std::to_string(m);
}

}  // namespace detail

inline SyntheticData generate(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  auto filler = [&] { return "w" + std::to_string(rng.below(spec.vocab_size)); };

  std::vector<SenseEntry> entries;
  for (std::size_t i = 0; i < spec.n_lemmas; ++i) {
    for (std::size_t j = 0; j < spec.senses_per_lemma; ++j) {
      std::vector<std::string> words;
      for (std::size_t w = 0; w < spec.gloss_words; ++w) words.push_back(filler());
      words.insert(words.begin() + static_cast<std::ptrdiff_t>(rng.below(words.size() + 1)),
                   detail::marker_word(spec, i, j));
      std::string gloss;
      for (const auto& w : words) gloss += (gloss.empty() ? "" : " ") + w;
      entries.push_back({detail::synthetic_key(i, j), detail::synthetic_lemma(i), PartOfSpeech::Noun, gloss,
                         static_cast<int>(j + 1)});
    }
  }

  SyntheticData data{GlossLexicon::from_entries(std::move(entries)), WsdCorpus("synthetic"), {}};
  for (std::size_t s = 0; s < spec.n_sentences; ++s) {
    const std::size_t lemma = rng.below(spec.n_lemmas);
    const std::size_t sense = rng.below(spec.senses_per_lemma);
    const bool signal = rng.uniform() < spec.signal_strength;
    std::vector<CorpusToken> toks;
    for (std::size_t w = 0; w < spec.context_words; ++w) toks.push_back({filler(), std::nullopt, std::nullopt, std::nullopt});
    if (signal) {
      const auto at = static_cast<std::ptrdiff_t>(rng.below(toks.size() + 1));
      toks.insert(toks.begin() + at, CorpusToken{detail::marker_word(spec, lemma, sense), std::nullopt, std::nullopt,
                                                 std::nullopt});
    }
    WsdSentence sentence;
    sentence.sentence_id = "d000.s" + detail::padded(s, 6);
    const std::string id = sentence.sentence_id + ".t000";
    const auto at = static_cast<std::ptrdiff_t>(rng.below(toks.size() + 1));
    toks.insert(toks.begin() + at,
                CorpusToken{detail::synthetic_lemma(lemma), detail::synthetic_lemma(lemma), PartOfSpeech::Noun, id});
    sentence.tokens = std::move(toks);
    data.gold[id] = {detail::synthetic_key(lemma, sense)};
    data.corpus.add_sentence(std::move(sentence));
  }
  return data;
}

/// The Bayes-optimal rule: pick the candidate whose gloss contains a marker
/// word that also occurs in the context; otherwise the rank-1 sense.
inline PredictionResult marker_oracle(const WsdCorpus& corpus, const GlossLexicon& lexicon) {
  PredictionResult out;
  for (const auto& id : corpus.instance_order()) {
    const auto ref = *corpus.locate(id);
    const CorpusToken& tok = corpus.token(ref);
    const auto candidates = lexicon.candidates(*tok.lemma, *tok.pos);
    if (candidates.empty()) {
      out.skipped.push_back(id);
      continue;
    }
    std::set<std::string> markers;
    for (const auto& t : corpus.sentences()[ref.sentence].tokens)
      if (t.surface.starts_with("mk")) markers.insert(t.surface);
    std::size_t pick = 0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      bool hit = false;
      for (const auto& w : tokenize(candidates[i].gloss)) hit = hit || markers.count(w) != 0;
      if (hit) {
        pick = i;
        break;
      }
    }
    out.predictions.push_back({id, candidates[pick].sense_key});
  }
  return out;
}

/// Two short sentences that share a keyword (label 1) or not (label 0),
/// balanced, encoded as [AGG] a [SEP] b [SEP].
struct PairTaskSpec {
  std::size_t n_examples = 400;
  std::size_t keywords = 8;
  std::size_t filler_words = 30;
  std::size_t sentence_words = 4;
  std::uint64_t seed = 0;
};

struct PairTaskExample {
  std::string first, second;
  int label = 0;
};

inline std::vector<PairTaskExample> generate_pair_task(const PairTaskSpec& spec) {
  if (spec.keywords < 2 || spec.filler_words == 0) throw Error(ErrorKind::InvalidSpec, "need >= 2 keywords and fillers");
  Rng rng(spec.seed);
  auto sentence = [&](std::size_t kw) {
    std::vector<std::string> w;
    for (std::size_t i = 0; i < spec.sentence_words; ++i) w.push_back("f" + std::to_string(rng.below(spec.filler_words)));
    w.insert(w.begin() + static_cast<std::ptrdiff_t>(rng.below(w.size() + 1)), "kw" + std::to_string(kw));
    std::string s;
    for (const auto& x : w) s += (s.empty() ? "" : " ") + x;
    return s;
  };
  std::vector<PairTaskExample> out;
  for (std::size_t n = 0; n < spec.n_examples; ++n) {
    const int label = static_cast<int>(n % 2);
    const std::size_t a = rng.below(spec.keywords);
    std::size_t b = a;
    if (!label) b = (a + 1 + rng.below(spec.keywords - 1)) % spec.keywords;
    out.push_back({sentence(a), sentence(b), label});
  }
  return out;
}

inline std::vector<std::string> pair_task_texts(const PairTaskSpec& spec) {
  std::vector<std::string> t;
  for (std::size_t i = 0; i < spec.keywords; ++i) t.push_back("kw" + std::to_string(i));
  for (std::size_t i = 0; i < spec.filler_words; ++i) t.push_back("f" + std::to_string(i));
  return t;
}

inline std::vector<LabeledSequence> encode_pair_task(std::span<const PairTaskExample> examples, const Vocabulary& vocab) {
  std::vector<LabeledSequence> out;
  for (const auto& ex : examples) {
    LabeledSequence ls;
    ls.label = ex.label;
    auto push = [&](TokenId id, std::uint8_t seg) {
      ls.sequence.ids.push_back(id);
      ls.sequence.segments.push_back(seg);
    };
    push(id_of(Special::Agg), 0);
    for (auto id : encode(tokenize(ex.first), vocab)) push(id, 0);
    push(id_of(Special::Sep), 0);
    for (auto id : encode(tokenize(ex.second), vocab)) push(id, 1);
    push(id_of(Special::Sep), 1);
    out.push_back(std::move(ls));
  }
  return out;
}

}  // namespace lmgc
