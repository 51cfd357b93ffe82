#include <doctest.h>

#include <json.hpp>

#include "bullysense/subword.hpp"
#include "test_support.hpp"

using namespace bullysense;
using namespace bullysense::textprep;
namespace ts = bullysense::testsup;
using nlohmann::json;

namespace {

// Hand-built wordpiece asset with a vocabulary small enough to verify
// encodings on paper.
std::string make_wordpiece_dir(ts::TempDir& tmp) {
  std::vector<std::string> vocab = {"[PAD]", "[UNK]", "[CLS]", "[SEP]", "you",
                                    "are",   "a",     "moron", "mo",    "##ron",
                                    "idiot", "!",     "##s"};
  std::string txt;
  for (const auto& t : vocab) txt += t + "\n";
  write_text_file(tmp.file("vocab.txt"), txt);
  json cfg{{"type", "wordpiece"},
           {"vocab_file", "vocab.txt"},
           {"lowercase", true},
           {"special",
            {{"pad", "[PAD]"}, {"unk", "[UNK]"}, {"cls", "[CLS]"}, {"sep", "[SEP]"}}}};
  write_text_file(tmp.file("tokenizer.json"), cfg.dump(2));
  return tmp.path();
}

std::string make_bpe_dir(ts::TempDir& tmp) {
  json vocab;
  int32_t id = 0;
  for (const std::string& s : {"<s>", "<pad>", "</s>", "<unk>"}) vocab[s] = id++;
  for (int b = 33; b <= 126; ++b) vocab[std::string(1, static_cast<char>(b))] = id++;
  vocab["Ġ"] = id++;  // byte 0x20
  for (const std::string& s : {"th", "the", "Ġc", "Ġca", "Ġcat"}) vocab[s] = id++;
  write_text_file(tmp.file("vocab.json"), vocab.dump(2));
  write_text_file(tmp.file("merges.txt"),
                  "#version: test\nt h\nth e\nĠ c\nĠc a\nĠca t\n");
  json cfg{{"type", "byte_bpe"},
           {"vocab_file", "vocab.json"},
           {"merges_file", "merges.txt"},
           {"special", {{"pad", "<pad>"}, {"unk", "<unk>"}, {"bos", "<s>"}, {"eos", "</s>"}}}};
  write_text_file(tmp.file("tokenizer.json"), cfg.dump(2));
  return tmp.path();
}

}  // namespace

TEST_CASE("wordpiece encoding matches hand computation") {
  ts::TempDir tmp("wp");
  std::string dir = make_wordpiece_dir(tmp);
  auto enc = SubwordEncoder::load(dir, "tiny-test", 16);

  SUBCASE("known words") {
    EncodedSequence s = enc->encode("you are a moron");
    // [CLS] you are a moron [SEP]
    std::vector<int32_t> want = {2, 4, 5, 6, 7, 3};
    want.resize(16, 0);
    CHECK(s.ids == want);
    CHECK(s.mask_sum() == 6);
    CHECK(s.original_length == 6);
    CHECK_FALSE(s.truncated);
  }
  SUBCASE("lowercasing and punctuation split") {
    EncodedSequence s = enc->encode("You ARE a moron!");
    std::vector<int32_t> want = {2, 4, 5, 6, 7, 11, 3};
    want.resize(16, 0);
    CHECK(s.ids == want);
  }
  SUBCASE("greedy continuation pieces") {
    EncodedSequence s = enc->encode("moronron");
    std::vector<int32_t> want = {2, 7, 9, 3};  // moron + ##ron
    want.resize(16, 0);
    CHECK(s.ids == want);
  }
  SUBCASE("word with no piece decomposition becomes UNK") {
    EncodedSequence s = enc->encode("qzqz");
    std::vector<int32_t> want = {2, 1, 3};
    want.resize(16, 0);
    CHECK(s.ids == want);
  }
  SUBCASE("plural via ##s") {
    EncodedSequence s = enc->encode("morons idiots");
    std::vector<int32_t> want = {2, 7, 12, 10, 12, 3};
    want.resize(16, 0);
    CHECK(s.ids == want);
  }
  SUBCASE("empty input keeps only the specials") {
    EncodedSequence s = enc->encode("");
    CHECK(s.mask_sum() == 2);
    CHECK(s.ids[0] == 2);
    CHECK(s.ids[1] == 3);
    CHECK_FALSE(s.truncated);
  }
  SUBCASE("long input truncates to max_length") {
    std::string huge;
    for (int i = 0; i < 2000; ++i) huge += "moron ";
    EncodedSequence s = enc->encode(huge);
    CHECK(s.truncated);
    CHECK(s.ids.size() == 16);
    CHECK(s.mask_sum() == 16);
    CHECK(s.ids[15] == 3);  // [SEP] survives truncation
    CHECK(s.original_length == 2002);
  }
  SUBCASE("determinism") {
    EncodedSequence a = enc->encode("you idiot");
    EncodedSequence b = enc->encode("you idiot");
    CHECK(a == b);
  }
  SUBCASE("mask law on varied inputs") {
    for (const char* text : {"", "you", "you are", "moron moron moron moron moron moron moron"}) {
      EncodedSequence s = enc->encode(text);
      CHECK(s.mask_sum() == std::min<int64_t>(s.original_length, 16));
    }
  }
}

TEST_CASE("byte BPE encoding applies merges by rank") {
  ts::TempDir tmp("bpe");
  std::string dir = make_bpe_dir(tmp);
  auto enc = SubwordEncoder::load(dir, "tiny-roberta-test", 16);

  json vocab = json::parse(read_text_file(tmp.file("vocab.json")));
  auto id_of = [&](const std::string& s) { return vocab.at(s).get<int32_t>(); };

  SUBCASE("merged word plus space-prefixed word") {
    EncodedSequence s = enc->encode("the cat");
    // "the" merges t+h -> th, th+e -> the; " cat" merges up to "Ġcat"
    std::vector<int32_t> want = {0, id_of("the"), id_of("Ġcat"), 2};
    want.resize(16, 1);  // <pad> id is 1
    CHECK(s.ids == want);
    CHECK(s.mask_sum() == 4);
  }
  SUBCASE("unmerged symbols fall back to single bytes") {
    EncodedSequence s = enc->encode("tx");
    std::vector<int32_t> want = {0, id_of("t"), id_of("x"), 2};
    want.resize(16, 1);
    CHECK(s.ids == want);
  }
  SUBCASE("out-of-alphabet bytes become UNK") {
    EncodedSequence s = enc->encode("\xC3\xA9");  // two bytes outside vocab
    CHECK(s.ids[1] == 3);
    CHECK(s.ids[2] == 3);
  }
  SUBCASE("determinism and mask law") {
    EncodedSequence a = enc->encode("the the the");
    EncodedSequence b = enc->encode("the the the");
    CHECK(a == b);
    CHECK(a.mask_sum() == std::min<int64_t>(a.original_length, 16));
  }
}

TEST_CASE("tokenizer asset errors") {
  ts::TempDir tmp("badtok");
  CHECK_THROWS_WITH_AS(SubwordEncoder::load(tmp.path(), "ckpt-x", 16),
                       doctest::Contains("ckpt-x"), AssetError);

  write_text_file(tmp.file("tokenizer.json"), "{\"type\": \"mystery\"}");
  CHECK_THROWS_AS(SubwordEncoder::load(tmp.path(), "ckpt-x", 16), AssetError);
}

TEST_CASE("copy_assets replicates tokenizer files") {
  ts::TempDir src("copysrc");
  make_wordpiece_dir(src);
  ts::TempDir dst("copydst");
  SubwordEncoder::copy_assets(src.path(), dst.path());
  auto enc = SubwordEncoder::load(dst.path(), "copied", 8);
  CHECK(enc->encode("you").mask_sum() == 3);
}
