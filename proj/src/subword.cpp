#include "bullysense/subword.hpp"

#include <algorithm>
#include <array>
#include <filesystem>
#include <map>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

namespace bullysense::textprep {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

bool is_ascii_punct(uint32_t cp) {
  return (cp >= '!' && cp <= '/') || (cp >= ':' && cp <= '@') || (cp >= '[' && cp <= '`') ||
         (cp >= '{' && cp <= '~');
}

bool is_space_cp(uint32_t cp) {
  switch (cp) {
    case ' ': case '\t': case '\n': case '\v': case '\f': case '\r':
    case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029:
    case 0x202F: case 0x205F: case 0x3000:
      return true;
    default:
      return (cp >= 0x2000 && cp <= 0x200A);
  }
}

bool is_unicode_punct(uint32_t cp) {
  return is_ascii_punct(cp) ||
         (cp >= 0xA1 && cp <= 0xBF) || cp == 0xD7 || cp == 0xF7 ||
         (cp >= 0x2000 && cp <= 0x206F) || (cp >= 0x2E00 && cp <= 0x2E7F) ||
         (cp >= 0x3000 && cp <= 0x303F) || (cp >= 0xFE30 && cp <= 0xFE6F) ||
         (cp >= 0xFF01 && cp <= 0xFF0F) || (cp >= 0xFF1A && cp <= 0xFF20) ||
         (cp >= 0xFF3B && cp <= 0xFF40) || (cp >= 0xFF5B && cp <= 0xFF65);
}

uint32_t lower_cp(uint32_t cp) {
  if (cp >= 'A' && cp <= 'Z') return cp + 0x20;
  if (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) return cp + 0x20;
  return cp;
}

EncodedSequence assemble(std::vector<int32_t> piece_ids, int32_t bos, int32_t eos, int32_t pad,
                         int max_length) {
  // original_length counts the two specials.
  int64_t original = static_cast<int64_t>(piece_ids.size()) + 2;
  bool truncated = original > max_length;
  if (truncated) piece_ids.resize(static_cast<size_t>(max_length) - 2);

  std::vector<int32_t> ids;
  ids.reserve(static_cast<size_t>(max_length));
  ids.push_back(bos);
  ids.insert(ids.end(), piece_ids.begin(), piece_ids.end());
  ids.push_back(eos);
  size_t real = ids.size();
  ids.resize(static_cast<size_t>(max_length), pad);

  EncodedSequence seq;
  seq.ids = std::move(ids);
  seq.mask.assign(real, 1);
  seq.mask.resize(static_cast<size_t>(max_length), 0);
  seq.truncated = truncated;
  seq.original_length = original;
  return seq;
}

// --- WordPiece ------------------------------------------------------------

class WordPieceEncoder final : public SubwordEncoder {
 public:
  WordPieceEncoder(std::string checkpoint_id, int max_length, const std::string& vocab_path,
                   bool lowercase, std::string pad_tok, std::string unk_tok, std::string cls_tok,
                   std::string sep_tok)
      : SubwordEncoder(std::move(checkpoint_id), max_length), lowercase_(lowercase) {
    std::string content = read_text_file(vocab_path);
    std::istringstream in(content);
    std::string line;
    int32_t id = 0;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      vocab_.emplace(line, id++);
    }
    auto special = [&](const std::string& tok) {
      auto it = vocab_.find(tok);
      if (it == vocab_.end())
        throw AssetError("tokenizer for " + checkpoint_id_ + ": special token \"" + tok +
                         "\" missing from vocab");
      return it->second;
    };
    pad_id_ = special(pad_tok);
    unk_id_ = special(unk_tok);
    cls_id_ = special(cls_tok);
    sep_id_ = special(sep_tok);
    size_ = id;
  }

  int32_t vocab_size() const override { return size_; }
  int32_t pad_id() const override { return pad_id_; }

  EncodedSequence encode(std::string_view text) const override {
    std::vector<int32_t> pieces;
    for (const std::string& word : basic_tokenize(text)) wordpiece(word, pieces);
    return assemble(std::move(pieces), cls_id_, sep_id_, pad_id_, max_length_);
  }

 private:
  // Whitespace split with punctuation broken out as single-char tokens.
  std::vector<std::string> basic_tokenize(std::string_view text) const {
    std::vector<std::string> words;
    std::string cur;
    size_t i = 0;
    while (i < text.size()) {
      uint32_t cp = utf8_next(text, i);
      if (lowercase_) cp = lower_cp(cp);
      if (is_space_cp(cp) || cp == 0) {
        if (!cur.empty()) words.push_back(std::move(cur)), cur.clear();
        continue;
      }
      if (is_unicode_punct(cp)) {
        if (!cur.empty()) words.push_back(std::move(cur)), cur.clear();
        std::string p;
        utf8_append(p, cp);
        words.push_back(std::move(p));
        continue;
      }
      utf8_append(cur, cp);
    }
    if (!cur.empty()) words.push_back(std::move(cur));
    return words;
  }

  void wordpiece(const std::string& word, std::vector<int32_t>& out) const {
    constexpr size_t kMaxWordChars = 100;
    std::vector<uint32_t> cps = utf8_decode(word);
    if (cps.size() > kMaxWordChars) {
      out.push_back(unk_id_);
      return;
    }
    std::vector<int32_t> pieces;
    size_t start = 0;
    while (start < cps.size()) {
      size_t end = cps.size();
      int32_t found = -1;
      while (end > start) {
        std::string sub = start > 0 ? "##" : "";
        for (size_t k = start; k < end; ++k) utf8_append(sub, cps[k]);
        auto it = vocab_.find(sub);
        if (it != vocab_.end()) {
          found = it->second;
          break;
        }
        --end;
      }
      if (found < 0) {
        out.push_back(unk_id_);
        return;
      }
      pieces.push_back(found);
      start = end;
    }
    out.insert(out.end(), pieces.begin(), pieces.end());
  }

  std::unordered_map<std::string, int32_t> vocab_;
  bool lowercase_;
  int32_t pad_id_ = 0, unk_id_ = 0, cls_id_ = 0, sep_id_ = 0, size_ = 0;
};

// --- Byte-level BPE ---------------------------------------------------------

std::array<uint32_t, 256> byte_unicode_table() {
  std::array<uint32_t, 256> table{};
  uint32_t n = 0;
  for (int b = 0; b < 256; ++b) {
    bool printable = (b >= 33 && b <= 126) || (b >= 161 && b <= 172) || (b >= 174 && b <= 255);
    table[static_cast<size_t>(b)] = printable ? static_cast<uint32_t>(b) : 256 + n++;
  }
  return table;
}

class ByteBpeEncoder final : public SubwordEncoder {
 public:
  ByteBpeEncoder(std::string checkpoint_id, int max_length, const std::string& vocab_path,
                 const std::string& merges_path, std::string pad_tok, std::string unk_tok,
                 std::string bos_tok, std::string eos_tok)
      : SubwordEncoder(std::move(checkpoint_id), max_length), byte_table_(byte_unicode_table()) {
    json v;
    try {
      v = json::parse(read_text_file(vocab_path));
    } catch (const json::exception& e) {
      throw AssetError("tokenizer vocab " + vocab_path + ": " + e.what());
    }
    for (auto it = v.begin(); it != v.end(); ++it)
      vocab_[it.key()] = it.value().get<int32_t>();
    size_ = static_cast<int32_t>(vocab_.size());

    std::istringstream in(read_text_file(merges_path));
    std::string line;
    int rank = 0;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line[0] == '#') continue;
      size_t sp = line.find(' ');
      if (sp == std::string::npos) continue;
      merges_[line.substr(0, sp) + "\x01" + line.substr(sp + 1)] = rank++;
    }
    auto special = [&](const std::string& tok) {
      auto it = vocab_.find(tok);
      if (it == vocab_.end())
        throw AssetError("tokenizer for " + checkpoint_id_ + ": special token \"" + tok +
                         "\" missing from vocab");
      return it->second;
    };
    pad_id_ = special(pad_tok);
    unk_id_ = special(unk_tok);
    bos_id_ = special(bos_tok);
    eos_id_ = special(eos_tok);
  }

  int32_t vocab_size() const override { return size_; }
  int32_t pad_id() const override { return pad_id_; }

  EncodedSequence encode(std::string_view text) const override {
    std::vector<int32_t> pieces;
    for (const std::string& chunk : pretokenize(text)) {
      for (const std::string& sym : bpe(chunk)) {
        auto it = vocab_.find(sym);
        pieces.push_back(it == vocab_.end() ? unk_id_ : it->second);
      }
    }
    return assemble(std::move(pieces), bos_id_, eos_id_, pad_id_, max_length_);
  }

 private:
  enum class Kind { kLetter, kDigit, kOther, kSpace };

  static Kind kind_of(uint32_t cp) {
    if ((cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z')) return Kind::kLetter;
    if (cp >= '0' && cp <= '9') return Kind::kDigit;
    if (is_space_cp(cp)) return Kind::kSpace;
    if (cp >= 0x80 && !is_unicode_punct(cp)) return Kind::kLetter;
    return Kind::kOther;
  }

  // GPT-2 style pre-tokenization: runs of letters, digits or symbols, each
  // optionally absorbing one leading space; whitespace runs otherwise.
  std::vector<std::string> pretokenize(std::string_view text) const {
    std::vector<uint32_t> cps = utf8_decode(text);
    std::vector<std::string> out;
    size_t i = 0;
    while (i < cps.size()) {
      size_t start = i;
      bool leading_space = false;
      if (cps[i] == ' ' && i + 1 < cps.size() && kind_of(cps[i + 1]) != Kind::kSpace) {
        leading_space = true;
        ++i;
      }
      if (i >= cps.size()) {
        i = start;
        leading_space = false;
      }
      Kind k = kind_of(cps[i]);
      size_t j = i;
      if (k == Kind::kSpace) {
        while (j < cps.size() && kind_of(cps[j]) == Kind::kSpace) ++j;
      } else {
        while (j < cps.size() && kind_of(cps[j]) == k) ++j;
      }
      std::string chunk;
      if (leading_space) chunk.push_back(' ');
      for (size_t p = i; p < j; ++p) utf8_append(chunk, cps[p]);
      out.push_back(std::move(chunk));
      i = j;
    }
    return out;
  }

  std::vector<std::string> bpe(const std::string& chunk) const {
    // Bytes to the printable alphabet, one symbol per byte.
    std::vector<std::string> syms;
    for (unsigned char byte : chunk) {
      std::string s;
      utf8_append(s, byte_table_[byte]);
      syms.push_back(std::move(s));
    }
    while (syms.size() > 1) {
      int best_rank = INT32_MAX;
      size_t best_pos = 0;
      for (size_t i = 0; i + 1 < syms.size(); ++i) {
        auto it = merges_.find(syms[i] + "\x01" + syms[i + 1]);
        if (it != merges_.end() && it->second < best_rank) {
          best_rank = it->second;
          best_pos = i;
        }
      }
      if (best_rank == INT32_MAX) break;
      syms[best_pos] += syms[best_pos + 1];
      syms.erase(syms.begin() + static_cast<int64_t>(best_pos) + 1);
    }
    return syms;
  }

  std::array<uint32_t, 256> byte_table_;
  std::unordered_map<std::string, int32_t> vocab_;
  std::unordered_map<std::string, int> merges_;
  int32_t pad_id_ = 0, unk_id_ = 0, bos_id_ = 0, eos_id_ = 0, size_ = 0;
};

}  // namespace

std::unique_ptr<SubwordEncoder> SubwordEncoder::load(const std::string& dir,
                                                     const std::string& checkpoint_id,
                                                     int max_length) {
  fs::path root(dir);
  fs::path cfg_path = root / "tokenizer.json";
  if (!fs::exists(cfg_path))
    throw AssetError("checkpoint \"" + checkpoint_id + "\": missing tokenizer.json in " + dir);
  json cfg;
  try {
    cfg = json::parse(read_text_file(cfg_path.string()));
  } catch (const json::exception& e) {
    throw AssetError("checkpoint \"" + checkpoint_id + "\": bad tokenizer.json: " + e.what());
  }
  try {
    std::string type = cfg.at("type").get<std::string>();
    const auto& sp = cfg.at("special");
    if (type == "wordpiece") {
      return std::make_unique<WordPieceEncoder>(
          checkpoint_id, max_length, (root / cfg.at("vocab_file").get<std::string>()).string(),
          cfg.value("lowercase", true), sp.at("pad").get<std::string>(),
          sp.at("unk").get<std::string>(), sp.at("cls").get<std::string>(),
          sp.at("sep").get<std::string>());
    }
    if (type == "byte_bpe") {
      return std::make_unique<ByteBpeEncoder>(
          checkpoint_id, max_length, (root / cfg.at("vocab_file").get<std::string>()).string(),
          (root / cfg.at("merges_file").get<std::string>()).string(),
          sp.at("pad").get<std::string>(), sp.at("unk").get<std::string>(),
          sp.at("bos").get<std::string>(), sp.at("eos").get<std::string>());
    }
    throw AssetError("checkpoint \"" + checkpoint_id + "\": unknown tokenizer type \"" + type +
                     "\"");
  } catch (const json::exception& e) {
    throw AssetError("checkpoint \"" + checkpoint_id + "\": tokenizer.json: " + e.what());
  }
}

void SubwordEncoder::copy_assets(const std::string& src_dir, const std::string& dst_dir) {
  fs::path src(src_dir), dst(dst_dir);
  fs::create_directories(dst);
  json cfg = json::parse(read_text_file((src / "tokenizer.json").string()));
  std::vector<std::string> files = {"tokenizer.json"};
  if (cfg.contains("vocab_file")) files.push_back(cfg["vocab_file"].get<std::string>());
  if (cfg.contains("merges_file")) files.push_back(cfg["merges_file"].get<std::string>());
  for (const auto& f : files)
    fs::copy_file(src / f, dst / f, fs::copy_options::overwrite_existing);
}

}  // namespace bullysense::textprep
