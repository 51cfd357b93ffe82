#include "bullysense/textprep.hpp"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <map>
#include <sstream>

#include "bullysense/sha256.hpp"

namespace bullysense::textprep {

namespace {

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

bool is_ascii_alnum(uint32_t cp) {
  return (cp >= '0' && cp <= '9') || (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z');
}

// Non-ASCII punctuation, symbol and control blocks dropped by the
// punctuation strip. Letters of any script are kept.
bool is_nonascii_punct(uint32_t cp) {
  return (cp >= 0x80 && cp <= 0xBF) || cp == 0xD7 || cp == 0xF7 ||
         (cp >= 0x2000 && cp <= 0x206F) || (cp >= 0x20A0 && cp <= 0x20CF) ||
         (cp >= 0x2100 && cp <= 0x2BFF) || (cp >= 0x2E00 && cp <= 0x2E7F) ||
         (cp >= 0x3000 && cp <= 0x303F) || (cp >= 0xFE00 && cp <= 0xFE6F) ||
         (cp >= 0xFF01 && cp <= 0xFF0F) || (cp >= 0xFF1A && cp <= 0xFF20) ||
         (cp >= 0xFF3B && cp <= 0xFF40) || (cp >= 0xFF5B && cp <= 0xFF65) ||
         (cp >= 0xFFF9 && cp <= 0xFFFD) || (cp >= 0x1F000 && cp <= 0x1FAFF);
}

uint32_t lower_cp(uint32_t cp) {
  if (cp >= 'A' && cp <= 'Z') return cp + 0x20;
  if (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) return cp + 0x20;  // Latin-1
  return cp;
}

bool is_handle_char(uint32_t cp) {
  return is_ascii_alnum(cp) || cp == '_';
}

bool has_prefix_ci(const std::vector<uint32_t>& cps, size_t pos, const char* prefix) {
  size_t n = std::strlen(prefix);
  if (pos + n > cps.size()) return false;
  for (size_t i = 0; i < n; ++i) {
    uint32_t cp = cps[pos + i];
    if (lower_cp(cp) != static_cast<uint32_t>(prefix[i])) return false;
  }
  return true;
}

}  // namespace

std::string clean_text(std::string_view text, const CleanOptions& options) {
  std::vector<uint32_t> cps = utf8_decode(text);

  if (options.strip_urls) {
    std::vector<uint32_t> out;
    out.reserve(cps.size());
    size_t i = 0;
    bool at_word_start = true;
    while (i < cps.size()) {
      if (at_word_start && (has_prefix_ci(cps, i, "http://") || has_prefix_ci(cps, i, "https://") ||
                            has_prefix_ci(cps, i, "www."))) {
        while (i < cps.size() && !is_space_cp(cps[i])) ++i;
        continue;
      }
      at_word_start = is_space_cp(cps[i]);
      out.push_back(cps[i]);
      ++i;
    }
    cps = std::move(out);
  }

  if (options.strip_user_handles) {
    std::vector<uint32_t> out;
    out.reserve(cps.size());
    size_t i = 0;
    while (i < cps.size()) {
      if (cps[i] == '@' && i + 1 < cps.size() && is_handle_char(cps[i + 1])) {
        ++i;
        while (i < cps.size() && is_handle_char(cps[i])) ++i;
        continue;
      }
      out.push_back(cps[i]);
      ++i;
    }
    cps = std::move(out);
  }

  if (options.lowercase)
    for (auto& cp : cps) cp = lower_cp(cp);

  if (options.strip_punctuation) {
    std::vector<uint32_t> out;
    out.reserve(cps.size());
    for (uint32_t cp : cps) {
      if (is_space_cp(cp) || is_ascii_alnum(cp) || (cp >= 0x80 && !is_nonascii_punct(cp)))
        out.push_back(cp);
    }
    cps = std::move(out);
  }

  std::string result;
  result.reserve(cps.size());
  if (options.collapse_whitespace) {
    bool pending_space = false;
    bool emitted = false;
    for (uint32_t cp : cps) {
      if (is_space_cp(cp)) {
        pending_space = emitted;
        continue;
      }
      if (pending_space) {
        result.push_back(' ');
        pending_space = false;
      }
      utf8_append(result, cp);
      emitted = true;
    }
  } else {
    for (uint32_t cp : cps) utf8_append(result, cp);
  }
  return result;
}

StopwordList StopwordList::load(const std::string& path) {
  std::string content = read_text_file(path);
  StopwordList list;
  list.source_id = "sha256:" + sha256_hex(content).substr(0, 12);
  std::istringstream in(content);
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    for (char ch : line)
      if (ch == ' ' || ch == '\t')
        throw FormatError("stopword file " + path + " line " + std::to_string(line_no) +
                          ": internal whitespace");
    for (char& ch : line)
      if (ch >= 'A' && ch <= 'Z') ch = static_cast<char>(ch + 0x20);
    list.words.insert(line);
  }
  return list;
}

StopwordList StopwordList::from_words(std::vector<std::string> words, std::string source_id) {
  StopwordList list;
  list.source_id = std::move(source_id);
  for (auto& w : words) list.words.insert(std::move(w));
  return list;
}

std::vector<std::string> word_tokenize(std::string_view clean) {
  std::vector<std::string> tokens;
  std::string cur;
  size_t i = 0;
  while (i < clean.size()) {
    uint32_t cp = utf8_next(clean, i);
    if (is_space_cp(cp)) {
      if (!cur.empty()) tokens.push_back(std::move(cur)), cur.clear();
    } else {
      utf8_append(cur, cp);
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

std::vector<std::string> remove_stop_and_single(const std::vector<std::string>& tokens,
                                                const StopwordList& stopwords) {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) {
    if (utf8_length(t) <= 1) continue;
    if (stopwords.words.count(t)) continue;
    out.push_back(t);
  }
  return out;
}

Vocabulary Vocabulary::build(const std::vector<std::vector<std::string>>& corpora_tokens,
                             int min_freq) {
  if (min_freq < 1) throw ArgumentError("build_vocab: min_freq must be >= 1");
  std::unordered_map<std::string, int64_t> freq;
  for (const auto& tokens : corpora_tokens)
    for (const auto& t : tokens) ++freq[t];

  std::vector<std::pair<std::string, int64_t>> kept;
  kept.reserve(freq.size());
  for (auto& [tok, n] : freq)
    if (n >= min_freq) kept.emplace_back(tok, n);
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  Vocabulary v;
  v.min_freq_ = min_freq;
  v.id_to_token_ = {"<pad>", "<unk>"};
  v.id_to_token_.reserve(kept.size() + 2);
  for (auto& [tok, n] : kept) {
    v.token_to_id_[tok] = static_cast<int32_t>(v.id_to_token_.size());
    v.id_to_token_.push_back(tok);
  }
  return v;
}

int32_t Vocabulary::id_of(std::string_view token) const {
  auto it = token_to_id_.find(std::string(token));
  return it == token_to_id_.end() ? kUnkId : it->second;
}

const std::string& Vocabulary::token_of(int32_t id) const {
  if (id < 0 || id >= size()) throw ArgumentError("vocab id out of range: " + std::to_string(id));
  return id_to_token_[static_cast<size_t>(id)];
}

bool Vocabulary::contains(std::string_view token) const {
  return token_to_id_.count(std::string(token)) > 0;
}

void Vocabulary::save(const std::string& path) const {
  std::string out;
  for (const auto& t : id_to_token_) {
    out += t;
    out.push_back('\n');
  }
  write_text_file(path, out);
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::string content = read_text_file(path);
  std::istringstream in(content);
  std::string line;
  Vocabulary v;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    v.id_to_token_.push_back(line);
  }
  if (v.id_to_token_.size() < 2 || v.id_to_token_[0] != "<pad>" || v.id_to_token_[1] != "<unk>")
    throw ArtifactError("vocabulary file " + path + ": missing <pad>/<unk> header rows");
  for (size_t i = 2; i < v.id_to_token_.size(); ++i)
    v.token_to_id_[v.id_to_token_[i]] = static_cast<int32_t>(i);
  return v;
}

std::vector<int32_t> encode_words(const std::vector<std::string>& tokens,
                                  const Vocabulary& vocab) {
  std::vector<int32_t> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(vocab.id_of(t));
  return ids;
}

int64_t EncodedSequence::mask_sum() const {
  int64_t s = 0;
  for (uint8_t m : mask) s += m;
  return s;
}

EncodedSequence pad_truncate(const std::vector<int32_t>& ids, int max_len, int32_t pad_id) {
  if (max_len < 1) throw ArgumentError("pad_truncate: max_len must be >= 1");
  EncodedSequence seq;
  seq.original_length = static_cast<int64_t>(ids.size());
  seq.truncated = seq.original_length > max_len;
  size_t keep = seq.truncated ? static_cast<size_t>(max_len) : ids.size();
  seq.ids.assign(ids.begin(), ids.begin() + static_cast<int64_t>(keep));
  seq.ids.resize(static_cast<size_t>(max_len), pad_id);
  seq.mask.assign(keep, 1);
  seq.mask.resize(static_cast<size_t>(max_len), 0);
  return seq;
}

EmbeddingTable load_embedding_file(const std::string& path, const Vocabulary& vocab,
                                   int expected_dim, uint64_t seed) {
  if (expected_dim < 1) throw ArgumentError("load_embedding_file: expected_dim must be >= 1");
  std::string content = read_text_file(path);
  std::istringstream in(content);
  std::string line;
  size_t line_no = 0;
  std::unordered_map<int32_t, std::vector<float>> found;
  bool first_data_line = true;

  auto split_ws = [](const std::string& s) {
    std::vector<std::string> parts;
    std::istringstream ss(s);
    std::string p;
    while (ss >> p) parts.push_back(p);
    return parts;
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto parts = split_ws(line);
    if (first_data_line && parts.size() == 2) {
      // "count dim" header
      char* end = nullptr;
      long dim = std::strtol(parts[1].c_str(), &end, 10);
      bool numeric = end && *end == '\0';
      long cnt = std::strtol(parts[0].c_str(), &end, 10);
      numeric = numeric && end && *end == '\0';
      if (numeric) {
        (void)cnt;
        if (dim != expected_dim)
          throw FormatError(path + ": header dimension " + std::to_string(dim) +
                            " != expected " + std::to_string(expected_dim));
        first_data_line = false;
        continue;
      }
    }
    first_data_line = false;
    if (parts.size() < 2)
      throw FormatError(path + " line " + std::to_string(line_no) + ": malformed vector line");
    if (static_cast<int>(parts.size()) - 1 != expected_dim)
      throw FormatError(path + " line " + std::to_string(line_no) + ": vector dimension " +
                        std::to_string(parts.size() - 1) + " != expected " +
                        std::to_string(expected_dim));
    const std::string& token = parts[0];
    if (!vocab.contains(token)) continue;
    std::vector<float> vec(static_cast<size_t>(expected_dim));
    for (int d = 0; d < expected_dim; ++d) {
      char* end = nullptr;
      vec[static_cast<size_t>(d)] = std::strtof(parts[static_cast<size_t>(d) + 1].c_str(), &end);
      if (!end || *end != '\0')
        throw FormatError(path + " line " + std::to_string(line_no) + ": bad number \"" +
                          parts[static_cast<size_t>(d) + 1] + "\"");
    }
    found[vocab.id_of(token)] = std::move(vec);
  }

  EmbeddingTable table;
  table.dim = expected_dim;
  table.rows.setZero(vocab.size(), expected_dim);
  Rng rng(seed);
  int64_t hits = 0;
  for (int32_t id = 2; id < vocab.size(); ++id) {
    auto it = found.find(id);
    if (it != found.end()) {
      for (int d = 0; d < expected_dim; ++d) table.rows(id, d) = it->second[static_cast<size_t>(d)];
      ++hits;
    } else {
      for (int d = 0; d < expected_dim; ++d)
        table.rows(id, d) = static_cast<float>(rng.uniform(-0.25, 0.25));
    }
  }
  // UNK gets a seeded row as well; PAD stays zero.
  for (int d = 0; d < expected_dim; ++d)
    table.rows(Vocabulary::kUnkId, d) = static_cast<float>(rng.uniform(-0.25, 0.25));
  int64_t denom = vocab.size() - 2;
  table.coverage = denom > 0 ? static_cast<double>(hits) / static_cast<double>(denom) : 1.0;
  return table;
}

PreprocessProfile PreprocessProfile::word_default() {
  PreprocessProfile p;
  p.clean = CleanOptions{true, true, true, true, true};
  p.remove_stopwords = true;
  return p;
}

PreprocessProfile PreprocessProfile::subword_default() {
  PreprocessProfile p;
  p.clean = CleanOptions{false, true, true, false, true};
  p.remove_stopwords = false;
  return p;
}

}  // namespace bullysense::textprep
