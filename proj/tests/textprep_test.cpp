#include <doctest.h>

#include <set>

#include "bullysense/textprep.hpp"
#include "test_support.hpp"

using namespace bullysense;
using namespace bullysense::textprep;
namespace ts = bullysense::testsup;

namespace {

CleanOptions all_on() { return CleanOptions{true, true, true, true, true}; }

// Messy strings for the idempotence property: urls, handles, unicode,
// control chars, punctuation runs.
std::string random_messy_string(Rng& rng) {
  static const std::vector<std::string> kPieces = {
      "hello",  "WORLD",   "http://spam.example/x?y=1", "www.foo.bar",   "@user42",
      "!!!",    "don't",   "caf\xC3\xA9",               "\xE2\x80\x94",  "123",
      "a",      "\tmixed", "\xC2\xA0",                  "\xF0\x9F\x98\x80", "line\nbreak",
      "semi;colon", "comma,", "(parens)",              "E=mc^2",        "...",
  };
  std::string out;
  size_t n = 1 + rng.bounded(12);
  for (size_t i = 0; i < n; ++i) {
    if (i && rng.next_double() < 0.8) out.push_back(' ');
    out += kPieces[rng.bounded(kPieces.size())];
  }
  return out;
}

}  // namespace

TEST_CASE("clean_text applies the ordered transforms") {
  CHECK(clean_text("You are a MORON!!\n", all_on()) == "you are a moron");
  CHECK(clean_text("", all_on()) == "");
  CHECK(clean_text("hello world", all_on()) == "hello world");
  CHECK(clean_text("see http://foo.bar/baz now", all_on()) == "see now");
  CHECK(clean_text("WWW.SHOUTY.COM link", all_on()) == "link");
  CHECK(clean_text("hey @you_2 stop", all_on()) == "hey stop");
  CHECK(clean_text("tabs\tand\nnewlines", all_on()) == "tabs and newlines");
  CHECK(clean_text("  padded  ", all_on()) == "padded");
  CHECK(clean_text("don't!", all_on()) == "dont");
  CHECK(clean_text("nb\xC2\xA0sp", all_on()) == "nb sp");      // U+00A0 is whitespace
  CHECK(clean_text("em\xE2\x80\x94" "dash", all_on()) == "emdash");  // U+2014 stripped
  CHECK(clean_text("caf\xC3\xA9 time", all_on()) == "caf\xC3\xA9 time");  // letters kept
}

TEST_CASE("clean_text honors individual option flags") {
  CleanOptions keep_case{false, true, true, true, true};
  CHECK(clean_text("Hello THERE", keep_case) == "Hello THERE");
  CleanOptions keep_punct{true, true, true, false, true};
  CHECK(clean_text("wow!!", keep_punct) == "wow!!");
  CleanOptions keep_urls{true, false, true, true, true};
  CHECK(clean_text("see http://a.b", keep_urls).find("httpab") != std::string::npos);
  CleanOptions no_collapse{true, true, true, true, false};
  CHECK(clean_text("a  b", no_collapse) == "a  b");
}

TEST_CASE("clean_text idempotence property") {
  Rng rng(2024);
  for (int iter = 0; iter < 200; ++iter) {
    std::string s = random_messy_string(rng);
    CleanOptions opts{rng.next_double() < 0.8, rng.next_double() < 0.8, rng.next_double() < 0.8,
                      rng.next_double() < 0.8, true};
    std::string once = clean_text(s, opts);
    CHECK(clean_text(once, opts) == once);
  }
}

TEST_CASE("word_tokenize splits on whitespace runs") {
  CHECK(word_tokenize("you are a moron") == std::vector<std::string>{"you", "are", "a", "moron"});
  CHECK(word_tokenize("") == std::vector<std::string>{});
  CHECK(word_tokenize("a  b") == std::vector<std::string>{"a", "b"});
  CHECK(word_tokenize("  x ") == std::vector<std::string>{"x"});
}

TEST_CASE("remove_stop_and_single") {
  StopwordList sw = ts::tiny_stopwords();
  REQUIRE(sw.words.count("you"));
  REQUIRE(sw.words.count("are"));
  REQUIRE(sw.words.count("a"));
  CHECK(remove_stop_and_single({"you", "are", "a", "moron"}, sw) ==
        std::vector<std::string>{"moron"});
  CHECK(remove_stop_and_single({}, sw) == std::vector<std::string>{});

  StopwordList empty = StopwordList::from_words({}, "empty");
  CHECK(remove_stop_and_single({"x", "y", "zz"}, empty) == std::vector<std::string>{"zz"});
  // single-character rule counts codepoints, not bytes
  CHECK(remove_stop_and_single({"\xC3\xA9", "ok"}, empty) == std::vector<std::string>{"ok"});
}

TEST_CASE("stopword list loading") {
  StopwordList sw = ts::tiny_stopwords();
  CHECK(sw.source_id.rfind("sha256:", 0) == 0);
  CHECK(sw.words.size() > 100);
  for (const auto& w : sw.words) {
    CHECK_FALSE(w.empty());
    CHECK(w.find(' ') == std::string::npos);
  }
}

TEST_CASE("build_vocab ordering and min_freq") {
  std::vector<std::vector<std::string>> corpora = {{"a", "b"}, {"b", "c"}};
  Vocabulary v = Vocabulary::build(corpora, 1);
  CHECK(v.size() == 5);
  CHECK(v.id_of("b") == 2);  // highest frequency first
  CHECK(v.id_of("a") == 3);  // ties broken lexicographically
  CHECK(v.id_of("c") == 4);

  Vocabulary v2 = Vocabulary::build(corpora, 2);
  CHECK(v2.size() == 3);
  CHECK(v2.id_of("b") == 2);
  CHECK(v2.id_of("a") == Vocabulary::kUnkId);

  Vocabulary v3 = Vocabulary::build({}, 1);
  CHECK(v3.size() == 2);

  CHECK_THROWS_AS(Vocabulary::build(corpora, 0), ArgumentError);
}

TEST_CASE("encode_words maps unknowns to UNK and never to PAD") {
  Vocabulary v = Vocabulary::build({{"a", "b"}, {"b", "c"}}, 1);
  CHECK(encode_words({"b", "zzz"}, v) == std::vector<int32_t>{2, 1});
  CHECK(encode_words({}, v) == std::vector<int32_t>{});
  CHECK(encode_words({"b", "b"}, v) == std::vector<int32_t>{2, 2});

  Rng rng(5);
  for (int i = 0; i < 100; ++i) {
    std::string token(1 + rng.bounded(6), 'a' + static_cast<char>(rng.bounded(26)));
    CHECK(v.id_of(token) != Vocabulary::kPadId);
  }
}

TEST_CASE("vocabulary save/load round-trip") {
  Vocabulary v = Vocabulary::build({{"moron", "idiot", "moron"}}, 1);
  ts::TempDir tmp("vocab");
  v.save(tmp.file("vocab.txt"));
  Vocabulary re = Vocabulary::load(tmp.file("vocab.txt"));
  CHECK(re.size() == v.size());
  CHECK(re.id_of("moron") == v.id_of("moron"));
  CHECK(re.id_of("idiot") == v.id_of("idiot"));
}

TEST_CASE("pad_truncate") {
  EncodedSequence s = pad_truncate({5, 6, 7, 8, 9}, 8, 0);
  CHECK(s.ids == std::vector<int32_t>{5, 6, 7, 8, 9, 0, 0, 0});
  CHECK(s.mask == std::vector<uint8_t>{1, 1, 1, 1, 1, 0, 0, 0});
  CHECK_FALSE(s.truncated);
  CHECK(s.original_length == 5);

  std::vector<int32_t> longer(200, 3);
  EncodedSequence t = pad_truncate(longer, 128, 0);
  CHECK(t.ids.size() == 128);
  CHECK(t.truncated);
  CHECK(t.mask_sum() == 128);
  CHECK(t.original_length == 200);

  EncodedSequence e = pad_truncate({}, 4, 9);
  CHECK(e.ids == std::vector<int32_t>{9, 9, 9, 9});
  CHECK(e.mask_sum() == 0);
  CHECK(e.original_length == 0);

  CHECK_THROWS_AS(pad_truncate({1}, 0, 0), ArgumentError);
}

TEST_CASE("pad_truncate mask law over random inputs") {
  Rng rng(77);
  for (int iter = 0; iter < 200; ++iter) {
    size_t n = rng.bounded(40);
    std::vector<int32_t> ids(n, 1);
    int max_len = 1 + static_cast<int>(rng.bounded(30));
    EncodedSequence s = pad_truncate(ids, max_len, 0);
    CHECK(s.ids.size() == static_cast<size_t>(max_len));
    CHECK(s.mask.size() == static_cast<size_t>(max_len));
    CHECK(s.mask_sum() == std::min<int64_t>(static_cast<int64_t>(n), max_len));
    // mask is a prefix of ones
    bool seen_zero = false;
    for (uint8_t m : s.mask) {
      if (m == 0) seen_zero = true;
      if (seen_zero) CHECK(m == 0);
    }
  }
}

TEST_CASE("load_embedding_file") {
  Vocabulary v = Vocabulary::build({{"moron", "idiot", "moron", "idiot"}}, 1);

  SUBCASE("full coverage with header line") {
    EmbeddingTable t = load_embedding_file(ts::fixture_path("vectors_dim3.txt"), v, 3, 1);
    CHECK(t.dim == 3);
    CHECK(t.rows.rows() == v.size());
    CHECK(t.coverage == 1.0);
    CHECK(t.rows(v.id_of("moron"), 0) == doctest::Approx(0.1));
    CHECK(t.rows(v.id_of("idiot"), 1) == doctest::Approx(0.4));
    // PAD row all zeros
    for (int d = 0; d < 3; ++d) CHECK(t.rows(Vocabulary::kPadId, d) == 0.0f);
  }

  SUBCASE("missing word gets a seeded, reproducible row") {
    Vocabulary bigger = Vocabulary::build({{"moron", "idiot", "unseen", "moron", "idiot", "unseen"}}, 1);
    EmbeddingTable a = load_embedding_file(ts::fixture_path("vectors_dim3.txt"), bigger, 3, 42);
    EmbeddingTable b = load_embedding_file(ts::fixture_path("vectors_dim3.txt"), bigger, 3, 42);
    CHECK(a.coverage < 1.0);
    CHECK(a.coverage == doctest::Approx(2.0 / 3.0));
    for (int d = 0; d < 3; ++d) {
      CHECK(a.rows(bigger.id_of("unseen"), d) == b.rows(bigger.id_of("unseen"), d));
      CHECK(std::abs(a.rows(bigger.id_of("unseen"), d)) <= 0.25f);
    }
    EmbeddingTable c = load_embedding_file(ts::fixture_path("vectors_dim3.txt"), bigger, 3, 43);
    bool any_diff = false;
    for (int d = 0; d < 3; ++d)
      any_diff = any_diff || a.rows(bigger.id_of("unseen"), d) != c.rows(bigger.id_of("unseen"), d);
    CHECK(any_diff);
  }

  SUBCASE("dimension mismatch") {
    CHECK_THROWS_AS(load_embedding_file(ts::fixture_path("vectors_dim4.txt"), v, 3, 1),
                    FormatError);
  }
  SUBCASE("malformed line reports its number") {
    CHECK_THROWS_WITH_AS(load_embedding_file(ts::fixture_path("vectors_bad_line.txt"), v, 3, 1),
                         doctest::Contains("line 2"), FormatError);
  }
}

TEST_CASE("vocabulary built from train split leaks nothing from test") {
  corpus::Corpus c = ts::synthetic_corpus(60, 9);
  corpus::SplitSpec spec;
  spec.seed = 1;
  corpus::SplitBundle b = corpus::split(c, spec);

  StopwordList sw = ts::tiny_stopwords();
  PreprocessProfile profile = PreprocessProfile::word_default();
  std::vector<std::vector<std::string>> train_tokens;
  std::set<std::string> train_token_set;
  for (const auto& r : b.train.records) {
    auto toks = remove_stop_and_single(word_tokenize(clean_text(r.text, profile.clean)), sw);
    train_token_set.insert(toks.begin(), toks.end());
    train_tokens.push_back(std::move(toks));
  }
  Vocabulary v = Vocabulary::build(train_tokens, 1);

  for (const auto& r : b.test.records) {
    for (const auto& tok : remove_stop_and_single(
             word_tokenize(clean_text(r.text, profile.clean)), sw)) {
      if (!train_token_set.count(tok)) CHECK(v.id_of(tok) == Vocabulary::kUnkId);
    }
  }
}
