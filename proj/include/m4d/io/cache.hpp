// masklet4d - cross-modal 4D masklet annotation engine
// SPDX-License-Identifier: Apache-2.0
//
// Content-addressed intermediate files: an artifact's name is the SHA-256 of
// the stage name, its input bytes and its configuration.

#ifndef M4D_IO_CACHE_HPP
#define M4D_IO_CACHE_HPP

#include <openssl/evp.h>

#include <array>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <string_view>

#include "m4d/io/binary.hpp"

namespace m4d::io {

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new(), &EVP_MD_CTX_free) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1) throw std::runtime_error("sha256 init");
  }

  Sha256& update(std::string_view data) {
    if (EVP_DigestUpdate(ctx_.get(), data.data(), data.size()) != 1) throw std::runtime_error("sha256 update");
    return *this;
  }

  /// Length-prefixed, so ("ab","c") and ("a","bc") differ.
  Sha256& field(std::string_view data) {
    ByteWriter w;
    w.u64(data.size());
    update(w.bytes());
    return update(data);
  }

  std::string hex() {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int n = 0;
    if (EVP_DigestFinal_ex(ctx_.get(), md.data(), &n) != 1) throw std::runtime_error("sha256 final");
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < n; ++i) {
      out.push_back(kHex[md[i] >> 4]);
      out.push_back(kHex[md[i] & 0xF]);
    }
    return out;
  }

 private:
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx_;
};

inline std::string sha256_hex(std::string_view data) { return Sha256().update(data).hex(); }

/// Artifact store rooted at a work directory.
class ArtifactCache {
 public:
  explicit ArtifactCache(std::filesystem::path root) : root_(std::move(root)) {}

  [[nodiscard]] std::filesystem::path path_for(const std::string& stage, const std::string& key,
                                               const std::string& ext = ".bin") const {
    return root_ / (stage + "-" + key.substr(0, 16) + ext);
  }

  /// Returns cached bytes for (stage, key) or produces, stores and returns them.
  std::string get_or_make(const std::string& stage, const std::string& key,
                          const std::function<std::string()>& make, bool* hit = nullptr) {
    const auto p = path_for(stage, key);
    if (std::filesystem::exists(p)) {
      if (hit) *hit = true;
      return read_file(p);
    }
    if (hit) *hit = false;
    std::string bytes = make();
    write_file(p, bytes);
    return bytes;
  }

  [[nodiscard]] const std::filesystem::path& root() const { return root_; }

 private:
  std::filesystem::path root_;
};

}  // namespace m4d::io

#endif  // M4D_IO_CACHE_HPP
