#include <catch_amalgamated.hpp>

#include <algorithm>

#include <lmgc/corpus.hpp>
#include <lmgc/fixtures.hpp>

#include "support.hpp"

using namespace lmgc;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error thrown");
  return ErrorKind::IoError;
}

const char* kTwoSentences = R"(<?xml version="1.0" encoding="UTF-8" ?>
<corpus lang="en" source="test">
<text id="d000">
<sentence id="d000.s000">
<wf lemma="the" pos="DET">The</wf>
<instance id="d000.s000.t000" lemma="cell" pos="NOUN">cell</instance>
<instance id="d000.s000.t001" lemma="divide" pos="VERB">divides</instance>
<wf lemma="." pos=".">.</wf>
</sentence>
<sentence id="d000.s001">
<instance id="d000.s001.t000" lemma="quickly" pos="ADV">Quickly</instance>
<wf lemma="," pos=".">,</wf>
<instance id="d000.s001.t001" lemma="new_york" pos="NOUN">New York</instance>
<instance id="d000.s001.t002" lemma="red" pos="ADJ">red</instance>
</sentence>
</text>
</corpus>
)";

}  // namespace

TEST_CASE("single sentence without a corpus root") {
  const auto c = parse_framework_xml(
      "<sentence><wf lemma=\"the\" pos=\"DET\">The</wf><instance id=\"d0.s0.t0\" lemma=\"cell\" "
      "pos=\"NOUN\">cell</instance></sentence>",
      "x");
  REQUIRE(c.instance_count() == 1);
  const auto& tok = c.token(*c.locate("d0.s0.t0"));
  CHECK(*tok.lemma == "cell");
  CHECK(*tok.pos == PartOfSpeech::Noun);
  CHECK(c.sentences()[0].tokens.size() == 2);
}

TEST_CASE("framework xml structure and document order") {
  const auto c = parse_framework_xml(kTwoSentences, "toy");
  CHECK(c.name() == "toy");
  CHECK(c.sentences().size() == 2);
  CHECK(c.instance_order() ==
        std::vector<std::string>{"d000.s000.t000", "d000.s000.t001", "d000.s001.t000", "d000.s001.t001", "d000.s001.t002"});
  CHECK(c.token(*c.locate("d000.s001.t001")).surface == "New York");
  CHECK(!c.locate("nope"));
}

TEST_CASE("xml errors") {
  CHECK(kind_of([] {
          parse_framework_xml("<corpus><text><sentence id=\"a\"><instance id=\"x\" lemma=\"a\" pos=\"NOUN\">a</instance>"
                              "</sentence><sentence id=\"b\"><instance id=\"x\" lemma=\"a\" pos=\"NOUN\">a</instance>"
                              "</sentence></text></corpus>",
                              "d");
        }) == ErrorKind::DuplicateInstanceId);
  CHECK(kind_of([] { parse_framework_xml("<corpus><text><sentence>", "d"); }) == ErrorKind::XmlSyntaxError);
  CHECK(kind_of([] {
          parse_framework_xml("<sentence><instance lemma=\"a\" pos=\"NOUN\">a</instance></sentence>", "d");
        }) == ErrorKind::MissingAttribute);
}

TEST_CASE("xml export round-trips") {
  const auto c = parse_framework_xml(kTwoSentences, "toy");
  CHECK(parse_framework_xml(export_framework_xml(c), "toy") == c);
  testing::TempDir dir;
  write_file(dir.file("toy.data.xml"), kTwoSentences);
  CHECK(load_framework_xml(dir.file("toy.data.xml")) == c);

  WsdCorpus esc("esc");
  esc.add_sentence({"s0", {{"a<b & \"c\"", std::nullopt, std::nullopt, std::nullopt},
                           {"x", "x", PartOfSpeech::Noun, std::string("s0.t0")}}});
  CHECK(parse_framework_xml(export_framework_xml(esc), "esc") == esc);
}

TEST_CASE("gold keys") {
  auto g = parse_gold_keys("d0.s0.t0 cell%1:06:03::\n");
  CHECK(g == GoldKeys{{"d0.s0.t0", {"cell%1:06:03::"}}});
  g = parse_gold_keys("d0.s0.t0 a%1:00:00:: a%1:00:01::\r\n");
  CHECK(g.at("d0.s0.t0").size() == 2);
  CHECK(kind_of([] { parse_gold_keys("d0.s0.t0\n"); }) == ErrorKind::EmptyKeySet);
  CHECK(parse_gold_keys(export_gold_keys(g)) == g);
}

TEST_CASE("stats on a four-sense fixture") {
  const auto lex = parse_tsv_lexicon(
      "cell%1:06:00::\tcell\tNOUN\t1\ta room\n"
      "cell%1:06:01::\tcell\tNOUN\t2\ta unit of life\n"
      "cell%1:06:02::\tcell\tNOUN\t3\ta battery\n"
      "cell%1:06:03::\tcell\tNOUN\t4\ta phone\n");
  const auto c = parse_framework_xml(
      "<sentence><instance id=\"d0.s0.t0\" lemma=\"cell\" pos=\"NOUN\">cell</instance></sentence>", "c");
  const auto s = compute_stats(c, parse_gold_keys("d0.s0.t0 cell%1:06:01::\n"), lex);
  CHECK(s.noun == 1);
  CHECK(s.total == 1);
  CHECK(s.positive_pairs == 1);
  CHECK(s.negative_pairs == 3);
  CHECK(s.unresolvable == 0);

  const auto missing = compute_stats(c, parse_gold_keys("d0.s0.t0 cell%1:99:99::\n"), lex);
  CHECK(missing.unresolvable == 1);
  CHECK(missing.positive_pairs == 0);
  CHECK(kind_of([&] { compute_stats(c, GoldKeys{}, lex); }) == ErrorKind::MissingGold);
}

TEST_CASE("stats of an empty corpus are zero") { CHECK(compute_stats(WsdCorpus("e"), {}, GlossLexicon{}) == CorpusStats{}); }

TEST_CASE("stats are invariant to sentence order") {
  SyntheticSpec spec;
  spec.n_sentences = 60;
  spec.seed = 3;
  const auto d = generate(spec);
  std::vector<WsdSentence> sentences = d.corpus.sentences();
  std::reverse(sentences.begin(), sentences.end());
  WsdCorpus shuffled("r");
  for (auto& s : sentences) shuffled.add_sentence(s);
  CHECK(compute_stats(shuffled, d.gold, d.lexicon) == compute_stats(d.corpus, d.gold, d.lexicon));
}

TEST_CASE("pos tally sums to total") {
  const auto c = parse_framework_xml(kTwoSentences, "toy");
  GoldKeys g;
  for (const auto& id : c.instance_order()) g[id] = {"zz%1:00:00::"};
  const auto s = compute_stats(c, g, GlossLexicon{});
  CHECK(s.noun == 2);
  CHECK(s.verb == 1);
  CHECK(s.adj == 1);
  CHECK(s.adv == 1);
  CHECK(s.noun + s.verb + s.adj + s.adv == s.total);
  CHECK(s.unresolvable == 5);
}
