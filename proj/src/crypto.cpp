#include "seclab/crypto.hpp"

#include <openssl/evp.h>
#include <openssl/hmac.h>

#include <memory>
#include <string>

namespace seclab::crypto {
namespace {

struct CipherCtxDeleter {
  void operator()(EVP_CIPHER_CTX* ctx) const { EVP_CIPHER_CTX_free(ctx); }
};
using CipherCtx = std::unique_ptr<EVP_CIPHER_CTX, CipherCtxDeleter>;

// Explicitly fetched algorithm objects live for the whole process; this
// keeps the per-call path free of provider lookups.
const EVP_MD* digest_for(AuthAlgorithm alg) {
  static EVP_MD* md5 = EVP_MD_fetch(nullptr, "MD5", nullptr);
  static EVP_MD* sha1 = EVP_MD_fetch(nullptr, "SHA1", nullptr);
  const EVP_MD* md = alg == AuthAlgorithm::hmac_md5 ? md5 : sha1;
  if (md == nullptr) throw CryptoError("digest unavailable: " + std::string(to_string(alg)));
  return md;
}

const EVP_CIPHER* cipher_for(CipherAlgorithm alg, std::size_t key_len) {
  static EVP_CIPHER* aes128 = EVP_CIPHER_fetch(nullptr, "AES-128-CBC", nullptr);
  static EVP_CIPHER* aes192 = EVP_CIPHER_fetch(nullptr, "AES-192-CBC", nullptr);
  static EVP_CIPHER* tdes = EVP_CIPHER_fetch(nullptr, "DES-EDE3-CBC", nullptr);
  const EVP_CIPHER* c = nullptr;
  if (alg == CipherAlgorithm::tdes_cbc)
    c = tdes;
  else
    c = key_len == 16 ? aes128 : aes192;
  if (c == nullptr) throw CryptoError("cipher unavailable: " + std::string(to_string(alg)));
  return c;
}

void check_cipher_args(CipherAlgorithm alg, ByteView key, ByteView iv, ByteView text) {
  if (!key_length_valid(alg, key.size()))
    throw KeyLengthError(std::string(to_string(alg)) + ": invalid key length " +
                         std::to_string(key.size()));
  if (iv.size() != block_bytes(alg))
    throw CryptoError(std::string(to_string(alg)) + ": iv must be " +
                      std::to_string(block_bytes(alg)) + " bytes");
  if (text.empty() || text.size() % block_bytes(alg) != 0)
    throw CryptoError(std::string(to_string(alg)) + ": input of " + std::to_string(text.size()) +
                      " bytes is not a positive multiple of the block size");
}

Bytes run_cbc(CipherAlgorithm alg, ByteView key, ByteView iv, ByteView in, bool encrypt) {
  check_cipher_args(alg, key, iv, in);
  CipherCtx ctx(EVP_CIPHER_CTX_new());
  if (!ctx) throw CryptoError("EVP_CIPHER_CTX_new failed");
  if (EVP_CipherInit_ex2(ctx.get(), cipher_for(alg, key.size()), key.data(), iv.data(),
                         encrypt ? 1 : 0, nullptr) != 1)
    throw CryptoError("cipher init failed");
  EVP_CIPHER_CTX_set_padding(ctx.get(), 0);
  Bytes out(in.size());
  int len = 0;
  if (EVP_CipherUpdate(ctx.get(), out.data(), &len, in.data(), static_cast<int>(in.size())) != 1)
    throw CryptoError("cipher update failed");
  int tail = 0;
  if (EVP_CipherFinal_ex(ctx.get(), out.data() + len, &tail) != 1)
    throw CryptoError("cipher final failed");
  out.resize(static_cast<std::size_t>(len + tail));
  return out;
}

}  // namespace

bool key_length_valid(AuthAlgorithm a, std::size_t n) { return n == key_bytes(a); }

bool key_length_valid(CipherAlgorithm c, std::size_t n) {
  if (c == CipherAlgorithm::aes_cbc) return n == 16 || n == 24;
  return n == 24;
}

bool key_length_valid(const Algorithm& alg, std::size_t n) {
  return std::visit([n](auto a) { return key_length_valid(a, n); }, alg);
}

std::string_view to_string(AuthAlgorithm a) {
  return a == AuthAlgorithm::hmac_md5 ? "hmac-md5" : "hmac-sha1";
}

std::string_view to_string(CipherAlgorithm c) {
  return c == CipherAlgorithm::aes_cbc ? "aes-cbc" : "3des-cbc";
}

std::string_view to_string(const Algorithm& alg) {
  return std::visit([](auto a) { return to_string(a); }, alg);
}

Bytes hmac(AuthAlgorithm alg, ByteView key, ByteView message) {
  unsigned char full[EVP_MAX_MD_SIZE];
  unsigned int full_len = 0;
  static const unsigned char kEmpty = 0;
  const unsigned char* k = key.empty() ? &kEmpty : key.data();
  const unsigned char* msg = message.empty() ? &kEmpty : message.data();
  if (HMAC(digest_for(alg), k, static_cast<int>(key.size()), msg, message.size(), full,
           &full_len) == nullptr)
    throw CryptoError("HMAC failed");
  return Bytes(full, full + full_len);
}

wire::Icv mac(AuthAlgorithm alg, ByteView key, ByteView message) {
  if (!key_length_valid(alg, key.size()))
    throw KeyLengthError(std::string(to_string(alg)) + ": key must be " +
                         std::to_string(key_bytes(alg)) + " bytes, got " +
                         std::to_string(key.size()));
  auto full = hmac(alg, key, message);
  wire::Icv icv{};
  std::copy_n(full.begin(), kIcvBytes, icv.begin());
  return icv;
}

Bytes encrypt_cbc(CipherAlgorithm alg, ByteView key, ByteView iv, ByteView plaintext) {
  return run_cbc(alg, key, iv, plaintext, true);
}

Bytes decrypt_cbc(CipherAlgorithm alg, ByteView key, ByteView iv, ByteView ciphertext) {
  return run_cbc(alg, key, iv, ciphertext, false);
}

Bytes random_bytes(std::size_t n, Rng& rng) {
  Bytes out(n);
  std::size_t i = 0;
  while (i < n) {
    std::uint64_t word = rng();
    for (int k = 0; k < 8 && i < n; ++k, ++i) out[i] = static_cast<std::uint8_t>(word >> (8 * k));
  }
  return out;
}

Bytes random_key(std::size_t bits, Rng& rng) {
  if (bits != 128 && bits != 160 && bits != 192)
    throw KeyLengthError("unsupported key size " + std::to_string(bits) +
                         " bits (expected 128, 160 or 192)");
  return random_bytes(bits / 8, rng);
}

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw CryptoError("sha256 failed");
  return wire::to_hex(ByteView(digest, len));
}

}  // namespace seclab::crypto
