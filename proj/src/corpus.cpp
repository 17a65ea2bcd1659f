#include <openssl/evp.h>

#include <algorithm>
#include <fstream>
#include <memory>

#include "armgraph/graph_prep.hpp"

namespace armgraph::prep {
namespace {

struct DigestContext {
  DigestContext() : ctx(EVP_MD_CTX_new()) {
    if (ctx == nullptr || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
      throw PrepError(PrepErrc::kIoError, "cannot initialise SHA-256");
    }
  }
  ~DigestContext() { EVP_MD_CTX_free(ctx); }
  DigestContext(const DigestContext&) = delete;
  DigestContext& operator=(const DigestContext&) = delete;

  void update(const void* data, std::size_t n) { EVP_DigestUpdate(ctx, data, n); }

  std::string hex_final() {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, md, &len);
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
      out += kHex[md[i] >> 4];
      out += kHex[md[i] & 0xf];
    }
    return out;
  }

  EVP_MD_CTX* ctx;
};

}  // namespace

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
  DigestContext d;
  d.update(bytes.data(), bytes.size());
  return d.hex_final();
}

std::string compute_sha256(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw PrepError(PrepErrc::kIoError, "cannot open " + file.string());
  DigestContext d;
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    d.update(buf, static_cast<std::size_t>(in.gcount()));
  }
  if (in.bad()) throw PrepError(PrepErrc::kIoError, "cannot read " + file.string());
  return d.hex_final();
}

std::vector<std::filesystem::path> collect_shared_libraries(
    const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::is_directory(root, ec)) {
    throw PrepError(PrepErrc::kIoError, "not a directory: " + root.string());
  }
  std::vector<fs::path> out;
  for (fs::recursive_directory_iterator it(root, ec), end; !ec && it != end; it.increment(ec)) {
    if (it->is_regular_file() && it->path().filename().string().find(".so") != std::string::npos) {
      out.push_back(it->path());
    }
  }
  if (ec) throw PrepError(PrepErrc::kIoError, "cannot walk " + root.string() + ": " + ec.message());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace armgraph::prep
