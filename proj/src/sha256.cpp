#include "bullysense/sha256.hpp"

#include <openssl/evp.h>

#include <fstream>
#include <memory>

#include "bullysense/common.hpp"

namespace bullysense {

namespace {

struct DigestCtx {
  EVP_MD_CTX* ctx;
  DigestCtx() : ctx(EVP_MD_CTX_new()) {
    if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1)
      throw Error("sha256 init failed");
  }
  ~DigestCtx() { EVP_MD_CTX_free(ctx); }
  void update(const void* data, size_t n) {
    if (EVP_DigestUpdate(ctx, data, n) != 1) throw Error("sha256 update failed");
  }
  std::string finish() {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_DigestFinal_ex(ctx, md, &len) != 1) throw Error("sha256 final failed");
    return to_hex(md, len);
  }
};

}  // namespace

std::string sha256_hex(std::string_view data) {
  DigestCtx d;
  d.update(data.data(), data.size());
  return d.finish();
}

std::string sha256_file_hex(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file: " + path);
  DigestCtx d;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof(buf));
    std::streamsize got = in.gcount();
    if (got > 0) d.update(buf, static_cast<size_t>(got));
  }
  if (in.bad()) throw IoError("read failed: " + path);
  return d.finish();
}

}  // namespace bullysense
