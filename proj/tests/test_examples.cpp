#include <catch_amalgamated.hpp>

#include <lmgc/examples.hpp>

#include "support.hpp"

using namespace lmgc;

namespace {

WsdSentence sentence_of(const std::vector<std::string>& words, std::size_t target, const std::string& lemma) {
  WsdSentence s;
  s.sentence_id = "s0";
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i == target)
      s.tokens.push_back({words[i], lemma, PartOfSpeech::Noun, std::string("s0.t0")});
    else
      s.tokens.push_back({words[i], std::nullopt, std::nullopt, std::nullopt});
  }
  return s;
}

Vocabulary vocab_of(const std::string& text) {
  const std::vector<std::string> t{text};
  return build_vocab_from_text(t);
}

}  // namespace

TEST_CASE("pair layout") {
  const auto v = vocab_of("the cell divides a small room");
  const auto s = sentence_of({"the", "cell", "divides"}, 1, "cell");
  const SenseEntry e{"cell%1:06:03::", "cell", PartOfSpeech::Noun, "a small room", 1};
  const auto p = build_pair(s, 1, e, {"cell%1:06:03::"}, v, BuilderConfig{});
  std::vector<std::string> want{"[AGG]", "the", "[TGT]", "cell", "[/TGT]", "divides", "[SEP]",
                                "cell",  "a",   "small", "room", "[SEP]"};
  CHECK(decode(p.sequence.ids, v) == want);
  CHECK(p.sequence.segments == std::vector<std::uint8_t>{0, 0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1});
  CHECK(p.label);
  CHECK(p.target_position == 3);
  CHECK(p.target_width == 1);
  CHECK(!build_pair(s, 1, e, {"other%1:00:00::"}, v, BuilderConfig{}).label);
}

TEST_CASE("long glosses are cut to the budget") {
  std::string gloss;
  for (int i = 0; i < 400; ++i) gloss += "g" + std::to_string(i % 17) + " ";
  const auto v = vocab_of(gloss + " the cell divides");
  const auto s = sentence_of({"the", "cell", "divides"}, 1, "cell");
  const SenseEntry e{"cell%1:00:00::", "cell", PartOfSpeech::Noun, gloss, 1};
  const auto p = build_pair(s, 1, e, {}, v, BuilderConfig{});
  CHECK(p.sequence.size() == 160);
  CHECK(p.sequence.ids.back() == id_of(Special::Sep));
  CHECK(decode(std::span(p.sequence.ids).subspan(0, 7), v) ==
        std::vector<std::string>{"[AGG]", "the", "[TGT]", "cell", "[/TGT]", "divides", "[SEP]"});
  CHECK(untruncated_length(s, 1, e) == 409);
}

TEST_CASE("long contexts are trimmed from the longer side") {
  std::vector<std::string> words;
  for (int i = 0; i < 30; ++i) words.push_back("l" + std::to_string(i));
  words.push_back("cell");
  for (int i = 0; i < 10; ++i) words.push_back("r" + std::to_string(i));
  std::string all;
  for (auto& w : words) all += w + " ";
  const auto v = vocab_of(all + "room");
  const auto s = sentence_of(words, 30, "cell");
  const SenseEntry e{"cell%1:00:00::", "cell", PartOfSpeech::Noun, "room", 1};
  BuilderConfig cfg;
  cfg.max_len = 20;
  const auto p = build_pair(s, 30, e, {}, v, cfg);
  CHECK(p.sequence.size() == 20);
  // fixed part: AGG TGT cell /TGT SEP cell SEP = 7, leaving 13 context tokens, no gloss
  const auto toks = decode(p.sequence.ids, v);
  CHECK(std::count(toks.begin(), toks.end(), "room") == 0);
  CHECK(toks[1] == "l23");
  CHECK(toks[p.target_position] == "cell");

  cfg.max_len = 8;
  CHECK_THROWS_AS(build_pair(sentence_of({"cell"}, 0, "a_b_c_d"), 0, SenseEntry{"k%1", "a_b_c_d", PartOfSpeech::Noun, "x", 1},
                             {}, v, cfg),
                  Error);
}

TEST_CASE("group ordering and gold") {
  const auto lex = parse_tsv_lexicon(
      "cell%1:00:01::\tcell\tNOUN\t1\tone\n"
      "cell%1:00:02::\tcell\tNOUN\t2\ttwo\n"
      "cell%1:00:03::\tcell\tNOUN\t3\tthree\n"
      "cell%1:00:04::\tcell\tNOUN\t4\tfour\n"
      "mono%1:00:00::\tmono\tNOUN\t1\tonly\n");
  WsdCorpus c("c");
  c.add_sentence(sentence_of({"a", "cell"}, 1, "cell"));
  WsdSentence m = sentence_of({"mono"}, 0, "mono");
  m.sentence_id = "s1";
  m.tokens[0].instance_id = "s1.t0";
  c.add_sentence(m);
  const auto v = build_vocab(std::span<const WsdCorpus>(&c, 1), &lex);
  const GoldKeys gold{{"s0.t0", {"cell%1:00:02::"}}, {"s1.t0", {"mono%1:00:00::"}}};
  const auto g = build_group(c, "s0.t0", lex, gold, v, BuilderConfig{});
  CHECK(g.k() == 4);
  CHECK(g.primary_gold == 1);
  CHECK(g.gold_indices == std::vector<std::size_t>{1});
  const auto mono = build_group(c, "s1.t0", lex, gold, v, BuilderConfig{});
  CHECK(mono.k() == 1);
  CHECK(mono.gold_indices == std::vector<std::size_t>{0});

  GoldKeys wrong = gold;
  wrong["s0.t0"] = {"cell%1:00:09::"};
  try {
    build_group(c, "s0.t0", lex, wrong, v, BuilderConfig{});
    FAIL();
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::GoldNotInInventory);
  }
  const auto all = build_groups(c, wrong, lex, v, BuilderConfig{});
  CHECK(all.groups.size() == 1);
  CHECK(all.skipped == std::vector<std::string>{"s0.t0"});
}

TEST_CASE("negatives summed over groups equal corpus stats") {
  SyntheticSpec spec;
  spec.n_sentences = 80;
  spec.seed = 5;
  const auto c = testing::compile(spec);
  std::size_t neg = 0, pos = 0;
  for (const auto& g : c.groups) {
    neg += g.k() - g.gold_indices.size();
    pos += g.gold_indices.size();
  }
  const auto s = compute_stats(c.data.corpus, c.data.gold, c.data.lexicon);
  CHECK(neg == s.negative_pairs);
  CHECK(pos == s.positive_pairs);
}

TEST_CASE("masking eligibility") {
  SyntheticSpec spec;
  spec.n_sentences = 20;
  spec.seed = 2;
  const auto c = testing::compile(spec);
  BuilderConfig none;
  none.mask_prob = 0.0;
  for (const auto& g : c.groups) CHECK(apply_masking(g, none, c.vocab.size()).masked_positions.empty());

  BuilderConfig all;
  all.mask_prob = 1.0;
  all.mask_token_share = 1.0;
  all.random_token_share = 0.0;
  all.keep_share = 0.0;
  for (const auto& g : c.groups) {
    const auto m = apply_masking(g, all, c.vocab.size());
    for (std::size_t p = 0; p < g.k(); ++p) {
      const auto& orig = g.pairs[p];
      const auto& seq = m.masked_sequences[p];
      for (std::size_t i = 0; i < seq.size(); ++i) {
        const bool in_target = i >= orig.target_position && i < orig.target_position + orig.target_width;
        const bool eligible = orig.sequence.segments[i] == 0 && !is_special(orig.sequence.ids[i]) && !in_target;
        if (eligible)
          CHECK(seq.ids[i] == id_of(Special::Mask));
        else
          CHECK(seq.ids[i] == orig.sequence.ids[i]);
      }
    }
  }
}

TEST_CASE("empirical mask rate") {
  SyntheticSpec spec;
  spec.n_sentences = 1200;
  spec.context_words = 30;
  spec.seed = 9;
  const auto c = testing::compile(spec);
  BuilderConfig cfg;
  cfg.seed = 4;
  std::size_t eligible = 0, masked = 0, mask_tok = 0, kept = 0;
  for (const auto& g : c.groups) {
    const auto m = apply_masking(g, cfg, c.vocab.size());
    for (const auto& p : g.pairs)
      for (std::size_t i = 0; i < p.sequence.size(); ++i)
        if (p.sequence.segments[i] == 0 && !is_special(p.sequence.ids[i]) &&
            !(i >= p.target_position && i < p.target_position + p.target_width))
          ++eligible;
    masked += m.masked_positions.size();
    for (const auto& mp : m.masked_positions) {
      const TokenId now = m.masked_sequences[mp.pair].ids[mp.token];
      if (now == id_of(Special::Mask)) ++mask_tok;
      if (now == mp.original) ++kept;
    }
  }
  REQUIRE(eligible >= 100000);
  const double rate = static_cast<double>(masked) / static_cast<double>(eligible);
  CHECK(rate >= 0.14);
  CHECK(rate <= 0.16);
  CHECK(static_cast<double>(mask_tok) / static_cast<double>(masked) == Catch::Approx(0.8).margin(0.01));
  CHECK(static_cast<double>(kept) / static_cast<double>(masked) == Catch::Approx(0.1).margin(0.01));
}

TEST_CASE("masking is reproducible per instance") {
  SyntheticSpec spec;
  spec.n_sentences = 10;
  const auto c = testing::compile(spec);
  BuilderConfig cfg;
  cfg.mask_prob = 0.5;
  const auto a = apply_masking(c.groups[3], cfg, c.vocab.size());
  const auto b = apply_masking(c.groups[3], cfg, c.vocab.size());
  CHECK(a.masked_sequences == b.masked_sequences);
  CHECK(a.masked_positions == b.masked_positions);
}

TEST_CASE("group file round trip") {
  SyntheticSpec spec;
  spec.n_sentences = 100;
  spec.senses_per_lemma = 3;
  spec.seed = 21;
  const auto c = testing::compile(spec);
  REQUIRE(c.groups.size() == 100);
  testing::TempDir dir;
  export_groups(c.groups, dir.file("g.jsonl"));
  CHECK(import_groups(dir.file("g.jsonl")) == c.groups);
  export_groups(c.groups, dir.file("h.jsonl"));
  CHECK(read_file(dir.file("g.jsonl")) == read_file(dir.file("h.jsonl")));

  std::string text = serialize_groups(c.groups);
  text.resize(text.size() - 40);
  try {
    parse_groups(text, "g.jsonl");
    FAIL();
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::SchemaError);
    CHECK(std::string(e.what()).find("g.jsonl:100") != std::string::npos);
  }
}
