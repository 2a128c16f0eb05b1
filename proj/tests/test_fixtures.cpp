#include <catch_amalgamated.hpp>

#include <lmgc/fixtures.hpp>

#include "support.hpp"

using namespace lmgc;

TEST_CASE("marker oracle is perfect at full signal") {
  for (std::size_t k : {2, 3, 4, 7}) {
    SyntheticSpec spec;
    spec.senses_per_lemma = k;
    spec.n_sentences = 300;
    spec.seed = k;
    const auto d = generate(spec);
    const auto r = marker_oracle(d.corpus, d.lexicon);
    CHECK(score(r.predictions, d.gold, d.corpus).all.f1 == 1.0);
  }
  SyntheticSpec pooled;
  pooled.marker_pool = 5;
  pooled.n_sentences = 300;
  const auto d = generate(pooled);
  CHECK(score(marker_oracle(d.corpus, d.lexicon).predictions, d.gold, d.corpus).all.f1 == 1.0);
}

TEST_CASE("without signal guessing sits near 1/k") {
  double sum = 0.0;
  const int seeds = 20;
  for (int s = 0; s < seeds; ++s) {
    SyntheticSpec spec;
    spec.signal_strength = 0.0;
    spec.n_sentences = 200;
    spec.seed = static_cast<std::uint64_t>(s);
    const auto d = generate(spec);
    Rng rng(1000 + s);
    std::vector<Prediction> guess;
    for (const auto& id : d.corpus.instance_order()) {
      const auto& tok = d.corpus.token(*d.corpus.locate(id));
      const auto c = d.lexicon.candidates(*tok.lemma, *tok.pos);
      guess.push_back({id, c[rng.below(c.size())].sense_key});
    }
    sum += score(guess, d.gold, d.corpus).all.f1;
    // no context carries a marker
    for (const auto& sent : d.corpus.sentences())
      for (const auto& t : sent.tokens) CHECK(!t.surface.starts_with("mk"));
  }
  CHECK(sum / seeds == Catch::Approx(0.25).margin(0.02));
}

TEST_CASE("generation is deterministic and well-formed") {
  SyntheticSpec spec;
  spec.seed = 77;
  const auto a = generate(spec);
  const auto b = generate(spec);
  CHECK(export_framework_xml(a.corpus) == export_framework_xml(b.corpus));
  CHECK(export_tsv_lexicon(a.lexicon) == export_tsv_lexicon(b.lexicon));
  CHECK(export_gold_keys(a.gold) == export_gold_keys(b.gold));

  CHECK(parse_framework_xml(export_framework_xml(a.corpus), a.corpus.name()) == a.corpus);
  CHECK(parse_tsv_lexicon(export_tsv_lexicon(a.lexicon)) == a.lexicon);
  CHECK(parse_gold_keys(export_gold_keys(a.gold)) == a.gold);

  spec.seed = 78;
  CHECK(export_framework_xml(generate(spec).corpus) != export_framework_xml(a.corpus));
}

TEST_CASE("only the gold gloss shares the marker") {
  SyntheticSpec spec;
  spec.n_sentences = 200;
  spec.marker_pool = 6;
  const auto d = generate(spec);
  for (const auto& id : d.corpus.instance_order()) {
    const auto ref = *d.corpus.locate(id);
    std::set<std::string> ctx;
    for (const auto& t : d.corpus.sentences()[ref.sentence].tokens) ctx.insert(t.surface);
    const auto& tok = d.corpus.token(ref);
    for (const auto& c : d.lexicon.candidates(*tok.lemma, *tok.pos)) {
      bool shares = false;
      for (const auto& w : tokenize(c.gloss)) shares = shares || (w.starts_with("mk") && ctx.count(w));
      CHECK(shares == (d.gold.at(id).count(c.sense_key) == 1));
    }
  }
}

TEST_CASE("stats match the closed form") {
  for (std::size_t k : {2, 4, 5}) {
    SyntheticSpec spec;
    spec.senses_per_lemma = k;
    spec.n_sentences = 123;
    const auto d = generate(spec);
    const auto s = compute_stats(d.corpus, d.gold, d.lexicon);
    CHECK(s.total == 123);
    CHECK(s.positive_pairs == 123);
    CHECK(s.negative_pairs == 123 * (k - 1));
    CHECK(s.unresolvable == 0);
  }
}

TEST_CASE("invalid specs") {
  SyntheticSpec spec;
  spec.senses_per_lemma = 1;
  CHECK_THROWS_AS(generate(spec), Error);
  spec = {};
  spec.signal_strength = 1.5;
  CHECK_THROWS_AS(generate(spec), Error);
  spec = {};
  spec.marker_pool = 2;
  CHECK_THROWS_AS(generate(spec), Error);
}

TEST_CASE("pair task labels follow the shared keyword") {
  PairTaskSpec spec;
  const auto ex = generate_pair_task(spec);
  std::size_t ones = 0;
  for (const auto& e : ex) {
    std::set<std::string> a;
    for (const auto& w : tokenize(e.first))
      if (w.starts_with("kw")) a.insert(w);
    bool share = false;
    for (const auto& w : tokenize(e.second)) share = share || a.count(w);
    CHECK(share == (e.label == 1));
    ones += static_cast<std::size_t>(e.label);
  }
  CHECK(ones * 2 == ex.size());
}
