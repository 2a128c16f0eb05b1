#include <catch_amalgamated.hpp>

#include <fstream>
#include <sstream>

#include <lmgc/lexicon.hpp>

#include "support.hpp"

using namespace lmgc;

namespace {

// A cut-down dict/ tree: "bank" has three noun senses and one verb sense,
// "long" an adjective sense at rank 2.
void write_dict(const testing::TempDir& dir) {
  lmgc::write_file(dir.file("index.sense"),
                   "bank%1:14:00:: 08420278 1 20\n"
                   "bank%1:17:01:: 09213565 2 10\n"
                   "bank%1:04:00:: 00169305 3 0\n"
                   "bank%2:40:00:: 02312318 1 2\n"
                   "long%3:00:02:: 01436003 2 2\n"
                   "long%3:00:01:: 01433493 1 9\n"
                   "banking%1:04:00:: 00069003 1 0\n");
  lmgc::write_file(dir.file("data.noun"),
                   "  1 This software and database is being provided\n"
                   "08420278 14 n 03 depository_financial_institution 0 bank 0 banking_concern 0 000 | a financial "
                   "institution that accepts deposits; \"he cashed a check at the bank\"\n"
                   "09213565 17 n 01 bank 0 000 | sloping land (especially the slope beside a body of water); \"they "
                   "pulled the canoe up on the bank\"\n"
                   "00169305 04 n 01 bank 0 000 | the funds held by a gambling house\n"
                   "00069003 04 n 01 banking 0 000 | transacting business with a bank\n");
  lmgc::write_file(dir.file("data.verb"),
                   "02312318 40 v 01 bank 0 000 | do business with a bank;  \"Do you bank at this branch?\"\n");
  lmgc::write_file(dir.file("data.adj"),
                   "01433493 00 a 01 long 0 000 | primarily temporal sense; being or indicating a relatively great "
                   "duration\n"
                   "01436003 00 a 01 long 0 000 | primarily spatial sense; of relatively great or greater than average "
                   "spatial extension; \"a long road\"\n");
  lmgc::write_file(dir.file("data.adv"), "");
}

// Independent count: lines of index.sense whose key starts with
// "<lemma>%<ss_type>".
std::size_t grep_count(const std::string& path, const std::string& lemma, char ss_type) {
  std::ifstream in(path);
  std::string line;
  std::size_t n = 0;
  const std::string prefix = lemma + "%" + ss_type;
  while (std::getline(in, line))
    if (line.rfind(prefix, 0) == 0) ++n;
  return n;
}

}  // namespace

TEST_CASE("empty index.sense gives an empty lexicon") {
  testing::TempDir dir;
  write_file(dir.file("index.sense"), "");
  for (auto f : {"data.noun", "data.verb", "data.adj", "data.adv"}) write_file(dir.file(f), "");
  const auto lex = import_wordnet(WordNetFiles::from_dir(dir.path()));
  CHECK(lex.size() == 0);
  CHECK(lex.empty());
}

TEST_CASE("index line resolves to the data record") {
  testing::TempDir dir;
  write_dict(dir);
  const auto lex = import_wordnet(WordNetFiles::from_dir(dir.path()));
  const SenseEntry* e = lex.find("long%3:00:02::");
  REQUIRE(e);
  CHECK(e->lemma == "long");
  CHECK(e->pos == PartOfSpeech::Adjective);
  CHECK(e->sense_rank == 2);
  CHECK(e->gloss == "primarily spatial sense; of relatively great or greater than average spatial extension");

  const auto bank = lex.candidates("bank", PartOfSpeech::Noun);
  REQUIRE(bank.size() == 3);
  CHECK(bank[0].gloss == "a financial institution that accepts deposits");
  CHECK(bank[1].gloss == "sloping land (especially the slope beside a body of water)");
  CHECK(lex.candidates("bank", PartOfSpeech::Verb)[0].gloss == "do business with a bank");
}

TEST_CASE("polysemy counts agree with a grep over index.sense") {
  testing::TempDir dir;
  write_dict(dir);
  const auto lex = import_wordnet(WordNetFiles::from_dir(dir.path()));
  CHECK(lex.candidates("bank", PartOfSpeech::Noun).size() == grep_count(dir.file("index.sense"), "bank", '1'));
  CHECK(lex.candidates("bank", PartOfSpeech::Verb).size() == grep_count(dir.file("index.sense"), "bank", '2'));
  CHECK(lex.candidates("long", PartOfSpeech::Adjective).size() == grep_count(dir.file("index.sense"), "long", '3'));
  CHECK(lex.candidates("banking", PartOfSpeech::Noun).size() == 1);
}

TEST_CASE("dangling offset and malformed index lines") {
  testing::TempDir dir;
  write_dict(dir);
  write_file(dir.file("index.sense"), "bank%1:14:00:: 99999999 1 20\n");
  try {
    import_wordnet(WordNetFiles::from_dir(dir.path()));
    FAIL("expected DanglingOffset");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DanglingOffset);
  }
  write_file(dir.file("index.sense"), "bank%1:14:00:: 08420278\n");
  try {
    import_wordnet(WordNetFiles::from_dir(dir.path()));
    FAIL("expected MalformedLine");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::MalformedLine);
    CHECK(std::string(e.what()).find(":1:") != std::string::npos);
  }
}

TEST_CASE("tsv lexicon basics") {
  const auto lex = parse_tsv_lexicon("cell%1:06:03::\tcell\tNOUN\t1\ta small room\n");
  CHECK(lex.size() == 1);
  CHECK(lex.candidates("cell", PartOfSpeech::Noun).size() == 1);
  CHECK(candidate_senses(lex, "unknown", PartOfSpeech::Noun).empty());

  CHECK_THROWS_MATCHES(parse_tsv_lexicon("a%1:00:00::\ta\tNOUN\t1\tx\na%1:00:00::\tb\tNOUN\t1\ty\n"), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& e) { return e.kind() == ErrorKind::DuplicateSenseKey; }));
}

TEST_CASE("candidates come back in rank order") {
  const auto lex = parse_tsv_lexicon(
      "x%1:00:02::\tx\tNOUN\t2\tsecond\n"
      "x%1:00:01::\tx\tNOUN\t1\tfirst\n"
      "x%1:00:03::\tx\tNOUN\t3\tthird\n");
  const auto c = lex.candidates("x", PartOfSpeech::Noun);
  REQUIRE(c.size() == 3);
  for (int i = 0; i < 3; ++i) CHECK(c[static_cast<std::size_t>(i)].sense_rank == i + 1);
}

TEST_CASE("tsv export round-trips and multiword lemmas normalize") {
  const auto lex = parse_tsv_lexicon(
      "new_york%1:15:00::\tNew York\tNOUN\t1\ta city\n"
      "run%2:38:00::\trun\tVERB\t1\tmove fast\n"
      "fast%4:02:00::\tfast\tADV\t1\tquickly\n");
  CHECK(lex.candidates("new_york", PartOfSpeech::Noun).size() == 1);
  CHECK(lex.candidates("New York", PartOfSpeech::Noun).size() == 1);
  CHECK(parse_tsv_lexicon(export_tsv_lexicon(lex)) == lex);
}

TEST_CASE("malformed tsv names the line") {
  try {
    parse_tsv_lexicon("a%1:00:00::\ta\tNOUN\t1\tx\nbroken line\n", "lex.tsv");
    FAIL("expected MalformedLine");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::MalformedLine);
    CHECK(std::string(e.what()).find("lex.tsv:2") != std::string::npos);
  }
}

TEST_CASE("gloss definition drops examples") {
  CHECK(gloss_definition("a financial institution; \"he cashed a check\"") == "a financial institution");
  CHECK(gloss_definition("one; two; \"ex\"") == "one; two");
  CHECK(gloss_definition("plain   text ") == "plain text");
}
