#include "test_support.hpp"

#include <unistd.h>

#include <atomic>
#include <set>
#include <utility>

#include <json.hpp>

#include "bullysense/nn/tensor.hpp"
#include "bullysense/subword.hpp"
#include "bullysense/textprep.hpp"

namespace bullysense::testsup {

namespace fs = std::filesystem;
using nlohmann::json;

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  fs::path base = fs::temp_directory_path() / "bullysense_tests";
  path_ = (base / (tag + "-" + std::to_string(::getpid()) + "-" +
                   std::to_string(counter.fetch_add(1))))
              .string();
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

std::string TempDir::file(const std::string& name) const {
  return (fs::path(path_) / name).string();
}

std::string fixture_path(const std::string& name) {
  return (fs::path(BULLYSENSE_SOURCE_DIR) / "tests" / "fixtures" / name).string();
}

std::string data_path(const std::string& name) {
  return (fs::path(BULLYSENSE_SOURCE_DIR) / "data" / name).string();
}

corpus::Corpus synthetic_corpus(size_t size, uint64_t seed, int min_per_class) {
  static const std::vector<std::string> kInsultWords = {
      "idiot", "moron", "loser", "stupid", "pathetic", "trash", "fool", "dumb", "clown", "worthless"};
  static const std::vector<std::string> kNeutralWords = {
      "article", "weather", "thanks", "interesting", "agree", "point", "coffee",
      "morning", "question", "detail"};
  static const std::vector<std::string> kFillerWords = {
      "the", "you", "this", "really", "just", "about", "today", "think", "have", "with"};

  Rng rng(seed);
  corpus::Corpus c;
  c.name = "synthetic";
  for (size_t i = 0; i < size; ++i) {
    bool insulting;
    if (min_per_class > 0 && size >= 2 * static_cast<size_t>(min_per_class)) {
      if (i < static_cast<size_t>(min_per_class))
        insulting = true;
      else if (i < static_cast<size_t>(2 * min_per_class))
        insulting = false;
      else
        insulting = rng.next_double() < 0.3;
    } else {
      insulting = rng.next_double() < 0.3;
    }
    const auto& pool = insulting ? kInsultWords : kNeutralWords;
    size_t len = 3 + rng.bounded(9);
    std::string text;
    for (size_t w = 0; w < len; ++w) {
      if (!text.empty()) text.push_back(' ');
      if (rng.next_double() < 0.55)
        text += pool[rng.bounded(pool.size())];
      else
        text += kFillerWords[rng.bounded(kFillerWords.size())];
    }
    corpus::LabeledComment r;
    r.id = static_cast<int64_t>(i);
    r.text = text;
    r.label = insulting ? Label::kInsulting : Label::kNeutral;
    r.origin = corpus::Origin::kTrainFile;
    c.records.push_back(std::move(r));
  }
  c.counts = corpus::stats(c);
  return c;
}

corpus::Corpus memorization_corpus() {
  static const std::vector<std::pair<std::string, Label>> kRows = {
      {"you are a complete idiot", Label::kInsulting},
      {"what a lovely afternoon for tea", Label::kNeutral},
      {"nobody likes you, loser", Label::kInsulting},
      {"the meeting is at noon tomorrow", Label::kNeutral},
      {"shut your stupid mouth", Label::kInsulting},
      {"great summary, thanks for sharing", Label::kNeutral},
      {"pathetic excuse for a human", Label::kInsulting},
      {"remember to water the plants", Label::kNeutral},
      {"go away you worthless troll", Label::kInsulting},
      {"the train arrives in ten minutes", Label::kNeutral},
  };
  corpus::Corpus c;
  c.name = "memorization";
  for (size_t i = 0; i < kRows.size(); ++i) {
    corpus::LabeledComment r;
    r.id = static_cast<int64_t>(i);
    r.text = kRows[i].first;
    r.label = kRows[i].second;
    c.records.push_back(std::move(r));
  }
  c.counts = corpus::stats(c);
  return c;
}

OracleReport oracle_report(const std::vector<Label>& gold, const std::vector<Label>& pred) {
  OracleReport o{};
  for (size_t i = 0; i < gold.size(); ++i) {
    int g = label_to_int(gold[i]), p = label_to_int(pred[i]);
    if (g == 1 && p == 1) ++o.tp;
    if (g == 1 && p == 0) ++o.fn;
    if (g == 0 && p == 1) ++o.fp;
    if (g == 0 && p == 0) ++o.tn;
  }
  auto safe_div = [](double num, double den) { return den > 0.0 ? num / den : 0.0; };
  o.precision_insult = safe_div(static_cast<double>(o.tp), static_cast<double>(o.tp + o.fp));
  o.recall_insult = safe_div(static_cast<double>(o.tp), static_cast<double>(o.tp + o.fn));
  o.f1_insult = safe_div(2.0 * o.precision_insult * o.recall_insult,
                         o.precision_insult + o.recall_insult);
  o.precision_neutral = safe_div(static_cast<double>(o.tn), static_cast<double>(o.tn + o.fn));
  o.recall_neutral = safe_div(static_cast<double>(o.tn), static_cast<double>(o.tn + o.fp));
  o.f1_neutral = safe_div(2.0 * o.precision_neutral * o.recall_neutral,
                          o.precision_neutral + o.recall_neutral);
  o.macro_f1 = (o.f1_neutral + o.f1_insult) / 2.0;
  o.accuracy = safe_div(static_cast<double>(o.tp + o.tn),
                        static_cast<double>(o.tp + o.tn + o.fp + o.fn));
  return o;
}

namespace {

// Wordpiece vocab covering the given texts whole-word, plus specials and
// the lowercase alphabet as fallback pieces.
std::vector<std::string> wordpiece_vocab_for(const std::vector<std::string>& texts) {
  std::vector<std::string> vocab = {"[PAD]", "[UNK]", "[CLS]", "[SEP]"};
  std::set<std::string> words;
  for (const auto& t : texts) {
    textprep::CleanOptions opts;  // defaults: full cleaning
    for (const auto& w : textprep::word_tokenize(textprep::clean_text(t, opts)))
      words.insert(w);
  }
  for (const auto& w : words) vocab.push_back(w);
  for (char c = 'a'; c <= 'z'; ++c) {
    vocab.push_back(std::string(1, c));
    vocab.push_back("##" + std::string(1, c));
  }
  for (char c = '0'; c <= '9'; ++c) {
    vocab.push_back(std::string(1, c));
    vocab.push_back("##" + std::string(1, c));
  }
  return vocab;
}

void write_transformer_weights(const std::string& dir, uint64_t seed, int vocab_size, int hidden,
                               int layers, int heads, int intermediate, int max_positions,
                               int type_vocab, int pad_id, int position_offset) {
  nn::TransformerConfig<float> cfg;
  cfg.vocab_size = vocab_size;
  cfg.hidden = hidden;
  cfg.layers = layers;
  cfg.heads = heads;
  cfg.intermediate = intermediate;
  cfg.max_positions = max_positions;
  cfg.type_vocab_size = type_vocab;
  cfg.pad_id = pad_id;
  cfg.position_offset = position_offset;
  nn::TransformerClassifier<float> net(cfg);
  Rng rng(seed);
  net.init(rng);
  std::vector<std::pair<std::string, nn::MatF>> tensors;
  for (const auto* t : std::as_const(net).params()) {
    if (t->name.rfind("head.", 0) == 0) continue;  // checkpoints carry no head
    tensors.emplace_back(t->name, t->w);
  }
  nn::write_tensor_file((fs::path(dir) / "weights.bin").string(), tensors);

  json arch{{"vocab_size", vocab_size},   {"hidden", hidden},
            {"layers", layers},           {"heads", heads},
            {"intermediate", intermediate},{"max_positions", max_positions},
            {"type_vocab_size", type_vocab},{"pad_id", pad_id},
            {"position_offset", position_offset},{"ln_eps", 1e-12}};
  write_text_file((fs::path(dir) / "config.json").string(), arch.dump(2) + "\n");
}

}  // namespace

void write_tiny_bert_checkpoint(const std::string& dir, uint64_t seed,
                                const std::vector<std::string>& vocab_texts, int hidden,
                                int layers, int heads) {
  fs::create_directories(dir);
  std::vector<std::string> vocab = wordpiece_vocab_for(vocab_texts);
  std::string vocab_txt;
  for (const auto& t : vocab) {
    vocab_txt += t;
    vocab_txt.push_back('\n');
  }
  write_text_file((fs::path(dir) / "vocab.txt").string(), vocab_txt);
  json tok{{"type", "wordpiece"},
           {"vocab_file", "vocab.txt"},
           {"lowercase", true},
           {"special",
            {{"pad", "[PAD]"}, {"unk", "[UNK]"}, {"cls", "[CLS]"}, {"sep", "[SEP]"}}}};
  write_text_file((fs::path(dir) / "tokenizer.json").string(), tok.dump(2) + "\n");
  write_transformer_weights(dir, seed, static_cast<int>(vocab.size()), hidden, layers, heads,
                            hidden * 2, 128, 2, 0, 0);
}

void write_tiny_roberta_checkpoint(const std::string& dir, uint64_t seed, int hidden, int layers,
                                   int heads) {
  fs::create_directories(dir);
  // Byte alphabet plus a handful of merges; ids follow roberta layout.
  std::vector<std::string> symbols;
  for (int b = 33; b <= 126; ++b) symbols.push_back(std::string(1, static_cast<char>(b)));
  symbols.push_back("Ġ");  // byte 0x20
  std::vector<std::pair<std::string, std::string>> merges = {
      {"t", "h"}, {"th", "e"}, {"o", "u"}, {"y", "ou"}, {"i", "d"},
      {"id", "i"}, {"idi", "o"}, {"idio", "t"}, {"Ġ", "a"}, {"Ġ", "you"}};
  json vocab;
  int32_t next_id = 0;
  vocab["<s>"] = next_id++;
  vocab["<pad>"] = next_id++;
  vocab["</s>"] = next_id++;
  vocab["<unk>"] = next_id++;
  for (const auto& s : symbols) vocab[s] = next_id++;
  std::string merges_txt = "#version: tiny\n";
  for (const auto& [a, b] : merges) {
    if (!vocab.contains(a + b)) vocab[a + b] = next_id++;
    merges_txt += a + " " + b + "\n";
  }
  write_text_file((fs::path(dir) / "vocab.json").string(), vocab.dump(2) + "\n");
  write_text_file((fs::path(dir) / "merges.txt").string(), merges_txt);
  json tok{{"type", "byte_bpe"},
           {"vocab_file", "vocab.json"},
           {"merges_file", "merges.txt"},
           {"special", {{"pad", "<pad>"}, {"unk", "<unk>"}, {"bos", "<s>"}, {"eos", "</s>"}}}};
  write_text_file((fs::path(dir) / "tokenizer.json").string(), tok.dump(2) + "\n");
  write_transformer_weights(dir, seed, next_id, hidden, layers, heads, hidden * 2, 130, 0, 1, 2);
}

textprep::StopwordList tiny_stopwords() {
  return textprep::StopwordList::load(data_path("stopwords_en.txt"));
}

models::TrainedModel train_small_bilstm(uint64_t seed, size_t corpus_size, int max_epochs) {
  corpus::Corpus c = synthetic_corpus(corpus_size, seed, 10);
  corpus::SplitSpec spec;
  spec.seed = seed;
  corpus::SplitBundle bundle = corpus::split(c, spec);

  textprep::StopwordList sw = tiny_stopwords();
  std::vector<std::vector<std::string>> token_lists;
  textprep::PreprocessProfile profile = textprep::PreprocessProfile::word_default();
  for (const auto& r : bundle.train.records)
    token_lists.push_back(textprep::remove_stop_and_single(
        textprep::word_tokenize(textprep::clean_text(r.text, profile.clean)), sw));
  textprep::Vocabulary vocab = textprep::Vocabulary::build(token_lists, 1);

  models::ModelKind kind;
  kind.variant = models::ModelVariant::kBiLstm;
  models::TrainConfig config;
  config.seed = seed;
  config.max_epochs = max_epochs;
  config.max_len = 32;
  config.batch_size = 16;
  config.patience = std::max(2, max_epochs);
  models::BuildOptions options = models::BuildOptions::defaults_for(kind);
  options.bilstm_hidden = 32;
  options.bilstm_embed_dim = 24;

  models::BiLstmData data;
  data.vocab = std::move(vocab);
  data.stopwords = std::move(sw);
  models::ModelHandle handle =
      models::build_model(kind, config, models::AssetLocator::empty(), options, std::move(data));
  return models::train(std::move(handle), bundle).model;
}

}  // namespace bullysense::testsup
