#pragma once

// Thin wrappers over libcrypto: single-block AES-128 encryption, AES-CMAC,
// and SHA-256.

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>

#include <openssl/core_names.h>
#include <openssl/evp.h>

namespace hmg::lora {

using Key128 = std::array<std::uint8_t, 16>;
using Block = std::array<std::uint8_t, 16>;

namespace detail {

struct CipherCtxFree {
  void operator()(EVP_CIPHER_CTX* c) const { EVP_CIPHER_CTX_free(c); }
};
struct MacFree {
  void operator()(EVP_MAC* m) const { EVP_MAC_free(m); }
};
struct MacCtxFree {
  void operator()(EVP_MAC_CTX* c) const { EVP_MAC_CTX_free(c); }
};
struct MdCtxFree {
  void operator()(EVP_MD_CTX* c) const { EVP_MD_CTX_free(c); }
};

inline void check(int ok, const char* what) {
  if (ok != 1) throw std::runtime_error(std::string("libcrypto: ") + what + " failed");
}

}  // namespace detail

inline Block aes128_encrypt(const Key128& key, const Block& in) {
  std::unique_ptr<EVP_CIPHER_CTX, detail::CipherCtxFree> ctx(EVP_CIPHER_CTX_new());
  if (!ctx) throw std::runtime_error("libcrypto: cipher context allocation failed");
  detail::check(EVP_EncryptInit_ex(ctx.get(), EVP_aes_128_ecb(), nullptr, key.data(), nullptr), "AES init");
  EVP_CIPHER_CTX_set_padding(ctx.get(), 0);
  Block out{};
  int len = 0;
  detail::check(EVP_EncryptUpdate(ctx.get(), out.data(), &len, in.data(), static_cast<int>(in.size())), "AES");
  return out;
}

inline Block aes_cmac(const Key128& key, std::span<const std::uint8_t> msg) {
  std::unique_ptr<EVP_MAC, detail::MacFree> mac(EVP_MAC_fetch(nullptr, "CMAC", nullptr));
  if (!mac) throw std::runtime_error("libcrypto: CMAC unavailable");
  std::unique_ptr<EVP_MAC_CTX, detail::MacCtxFree> ctx(EVP_MAC_CTX_new(mac.get()));
  if (!ctx) throw std::runtime_error("libcrypto: MAC context allocation failed");
  char cipher[] = "AES-128-CBC";
  OSSL_PARAM params[] = {OSSL_PARAM_construct_utf8_string(OSSL_MAC_PARAM_CIPHER, cipher, 0), OSSL_PARAM_construct_end()};
  detail::check(EVP_MAC_init(ctx.get(), key.data(), key.size(), params), "CMAC init");
  detail::check(EVP_MAC_update(ctx.get(), msg.data(), msg.size()), "CMAC update");
  Block out{};
  std::size_t len = 0;
  detail::check(EVP_MAC_final(ctx.get(), out.data(), &len, out.size()), "CMAC final");
  return out;
}

inline std::array<std::uint8_t, 32> sha256(std::span<const std::uint8_t> data) {
  std::unique_ptr<EVP_MD_CTX, detail::MdCtxFree> ctx(EVP_MD_CTX_new());
  if (!ctx) throw std::runtime_error("libcrypto: digest context allocation failed");
  detail::check(EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr), "SHA-256 init");
  detail::check(EVP_DigestUpdate(ctx.get(), data.data(), data.size()), "SHA-256 update");
  std::array<std::uint8_t, 32> out{};
  unsigned len = 0;
  detail::check(EVP_DigestFinal_ex(ctx.get(), out.data(), &len), "SHA-256 final");
  return out;
}

}  // namespace hmg::lora
