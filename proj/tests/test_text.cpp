#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "pcc/dataset.hpp"
#include "pcc/metrics.hpp"
#include "pcc/retrieval.hpp"
#include "pcc/vocab.hpp"

#include <cmath>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

using namespace pcc;

TEST_CASE("vocabulary: fixed id layout") {
  Vocabulary v = Vocabulary::build({}, 1);
  CHECK(v.size() == kNumSpecials + kNumAminoAcids + kNumStructCodes);  // 541 floor
  CHECK(v.id_of("<PAD>") == kPadId);
  CHECK(v.id_of("<EOS>") == kEosId);
  CHECK(v.id_of("<UNK>") == kUnkId);
  CHECK(v.id_of("<PROT_S>") == kProtSeqOpenId);
  CHECK(v.aa_id('A') == kAaBeginId);
  CHECK(v.aa_id('Y') == kAaEndId - 1);
  CHECK(v.str_id(0) == kStrBeginId);
  CHECK(v.str_id(511) == kStrEndId - 1);
  CHECK(Vocabulary::str_code(v.str_id(137)) == 137);
  CHECK(v.class_of(kEosId) == TokenClass::Special);
  CHECK(v.class_of(v.aa_id('C')) == TokenClass::AminoAcid);
  CHECK(v.class_of(v.str_id(5)) == TokenClass::Structure);
  CHECK_THROWS(v.aa_id('B'));
  CHECK_THROWS(v.str_id(512));
}

TEST_CASE("vocabulary: counting, threshold, determinism") {
  Vocabulary v = Vocabulary::build({"a a b"}, 2);
  CHECK(v.id_of("a") >= kTextBeginId);
  CHECK(v.id_of("b") == -1);
  std::vector<int> ids = v.encode_text("a b");
  CHECK(ids[0] == v.id_of("a"));
  CHECK(ids[1] == kUnkId);

  // Count-desc then lexicographic ordering of the text block.
  Vocabulary sorted = Vocabulary::build({"beta beta alpha alpha gamma"}, 1);
  CHECK(sorted.id_of("alpha") == kTextBeginId);
  CHECK(sorted.id_of("beta") == kTextBeginId + 1);
  CHECK(sorted.id_of("gamma") == kTextBeginId + 2);

  Vocabulary again = Vocabulary::build({"beta beta alpha alpha gamma"}, 1);
  CHECK(again.size() == sorted.size());
  for (int i = 0; i < sorted.size(); ++i) CHECK(again.token_of(i) == sorted.token_of(i));
}

TEST_CASE("vocabulary: round-trip and persistence") {
  Vocabulary v = Vocabulary::build({"the protein performs binding activity"}, 1);
  const std::string text = "the protein performs binding";
  CHECK(v.decode(v.encode_text(text)) == text);

  const std::string path =
      (std::filesystem::temp_directory_path() / "pcc_vocab_test.json").string();
  v.save(path);
  Vocabulary loaded = Vocabulary::load(path);
  CHECK(loaded.size() == v.size());
  for (int i = 0; i < v.size(); ++i) CHECK(loaded.token_of(i) == v.token_of(i));
  std::filesystem::remove(path);
}

TEST_CASE("tokenize_metric: lowercase, punctuation split") {
  auto toks = tokenize_metric("The protein performs ATP-binding, fast!");
  std::vector<std::string> expected{"the", "protein", "performs", "atp", "binding", "fast"};
  CHECK(toks == expected);
  CHECK(tokenize_metric("").empty());
  CHECK(tokenize_metric("...").empty());
}

TEST_CASE("keyword lexicon: longest match, aliases, case folding") {
  KeywordLexicon lex;
  lex.add("metal ion binding");
  lex.add("ion binding");
  lex.add("catalysis", {"catalytic activity"});

  CHECK(lex.extract("performs metal ion binding in vivo") ==
        std::set<std::string>{"metal ion binding"});
  CHECK(lex.extract("shows ion binding and metal ion binding") ==
        std::set<std::string>{"ion binding", "metal ion binding"});
  CHECK(lex.extract("Metal Ion Binding!") == std::set<std::string>{"metal ion binding"});
  CHECK(lex.extract("has catalytic activity") == std::set<std::string>{"catalysis"});
  CHECK(lex.extract("").empty());
  CHECK(lex.extract("nothing relevant here").empty());
}

TEST_CASE("keyword lexicon: persistence round-trip") {
  KeywordLexicon lex;
  lex.add("alpha ridge", {"ridge alpha"});
  lex.add("beta sheet");
  const std::string path =
      (std::filesystem::temp_directory_path() / "pcc_lexicon_test.json").string();
  lex.save(path);
  KeywordLexicon loaded = KeywordLexicon::load(path);
  CHECK(loaded.size() == 2);
  CHECK(loaded.extract("a ridge alpha form") == std::set<std::string>{"alpha ridge"});
  std::filesystem::remove(path);
}

TEST_CASE("jaccard and emji fixtures") {
  CHECK(jaccard({"A", "B"}, {"B", "C"}) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(jaccard({}, {}) == 1.0);
  CHECK(jaccard({"A"}, {"B"}) == 0.0);
  CHECK(jaccard({"A"}, {"A"}) == 1.0);

  std::vector<std::set<std::string>> pred{{"B", "C"}, {"A"}};
  std::vector<std::set<std::string>> label{{"A", "B"}, {"A"}};
  CHECK(emji(pred, label) == doctest::Approx((1.0 / 3.0 + 1.0) / 2.0).epsilon(1e-12));
  CHECK(emji(pred, label) == emji(label, pred));  // symmetric
  CHECK_THROWS(emji(pred, {{"A"}}));
}

TEST_CASE("bleu fixtures") {
  CHECK(bleu("a b c d", "a b c d").score == doctest::Approx(1.0).epsilon(1e-12));
  // p1 = 3/4, p2 = 1/3, BP = 1 -> sqrt(1/4) = 0.5
  auto fixture = bleu("a b c d", "a b x d");
  CHECK(fixture.score == doctest::Approx(0.5).epsilon(1e-9));
  CHECK_FALSE(fixture.empty_prediction);

  // Short prediction: p1 = p2 = 1, BP = exp(1 - 3/2).
  CHECK(bleu("a b", "a b c").score == doctest::Approx(std::exp(-0.5)).epsilon(1e-9));

  auto empty = bleu("", "a b");
  CHECK(empty.score == 0.0);
  CHECK(empty.empty_prediction);

  CHECK(bleu("x y z", "a b c").score == 0.0);
  CHECK(bleu("a b c d", "a b x d", 1).score == doctest::Approx(0.75).epsilon(1e-9));
}

TEST_CASE("rouge fixtures") {
  CHECK(rouge_l("a c", "a b c") == doctest::Approx(0.8).epsilon(1e-9));
  CHECK(rouge_l("a b c", "a b c") == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rouge_l("x y", "a b") == 0.0);
  CHECK(rouge_l("", "") == 1.0);  // declared both-empty convention

  // Unigram F1 with P = R = 1/2.
  CHECK(rouge_n("a b", "a c", 1) == doctest::Approx(0.5).epsilon(1e-9));
  // Bigram overlap {a b} of pred {a b, b c} vs ref {a b, b d}.
  CHECK(rouge_n("a b c", "a b d", 2) == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(rouge_n("a", "a", 2) == 0.0);  // no bigrams to match
}

TEST_CASE("bm25: hand-evaluated Okapi scores on a 3-document corpus") {
  std::vector<QARecord> docs(3);
  docs[0].id = "d1";
  docs[0].question = "cat sat";
  docs[0].sequence = "A";
  docs[1].id = "d2";
  docs[1].question = "cat cat ran";
  docs[1].sequence = "C";
  docs[2].id = "d3";
  docs[2].question = "dog barked";
  docs[2].sequence = "D";

  Bm25Index index = Bm25Index::build(docs, 1.5, 0.75);
  CHECK(index.size() == 3);

  // Document terms: question words plus lowercase amino-acid unigrams, so
  // lengths are 3, 4, 3 and avgdl = 10/3.
  const double avgdl = 10.0 / 3.0;
  const double idf_cat = std::log(1.0 + (3.0 - 2.0 + 0.5) / (2.0 + 0.5));

  auto tf_term = [&](double tf, double dl) {
    return tf * (1.5 + 1.0) / (tf + 1.5 * (1.0 - 0.75 + 0.75 * dl / avgdl));
  };
  CHECK(index.score("d1", {"cat"}) == doctest::Approx(idf_cat * tf_term(1, 3)).epsilon(1e-9));
  CHECK(index.score("d2", {"cat"}) == doctest::Approx(idf_cat * tf_term(2, 4)).epsilon(1e-9));
  CHECK(index.score("d3", {"cat"}) == 0.0);

  // Two-term query: "a" occurs only in d1.
  const double idf_a = std::log(1.0 + (3.0 - 1.0 + 0.5) / (1.0 + 0.5));
  CHECK(index.score("d1", {"cat", "a"}) ==
        doctest::Approx(idf_cat * tf_term(1, 3) + idf_a * tf_term(1, 3)).epsilon(1e-9));

  CHECK_THROWS(index.score("nope", {"cat"}));
}

TEST_CASE("bm25: ranking behavior") {
  std::vector<QARecord> docs(3);
  docs[0].id = "d1";
  docs[0].question = "cat sat here";
  docs[0].sequence = "A";
  docs[1].id = "d2";
  docs[1].question = "dog ran far";
  docs[1].sequence = "C";
  docs[2].id = "d3";
  docs[2].question = "bird flew up";
  docs[2].sequence = "D";
  Bm25Index index = Bm25Index::build(docs);

  // Only one document mentions the query term.
  auto top = index.rank("dog", "W", 3);
  CHECK(top[0] == "d2");

  // No lexical overlap anywhere: scores all zero, order falls back to id.
  auto none = index.rank("zebra", "Y", 3);
  CHECK(none == std::vector<std::string>{"d1", "d2", "d3"});

  // Monotone in term frequency at fixed document length.
  std::vector<QARecord> pair(2);
  pair[0].id = "p1";
  pair[0].question = "cat cat x";
  pair[0].sequence = "A";
  pair[1].id = "p2";
  pair[1].question = "cat x y";
  pair[1].sequence = "C";
  Bm25Index pidx = Bm25Index::build(pair);
  CHECK(pidx.score("p1", {"cat"}) > pidx.score("p2", {"cat"}));

  CHECK_THROWS(Bm25Index::build({}));
}
