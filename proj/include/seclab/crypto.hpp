// Keyed primitives used by AH and ESP: HMAC-MD5-96, HMAC-SHA1-96,
// AES-CBC and 3DES-CBC (no padding; ESP pads before calling in).

#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string_view>
#include <type_traits>
#include <utility>
#include <variant>

#include "seclab/wire.hpp"

namespace seclab::crypto {

class KeyLengthError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class CryptoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class AuthAlgorithm { hmac_md5, hmac_sha1 };
enum class CipherAlgorithm { aes_cbc, tdes_cbc };
using Algorithm = std::variant<AuthAlgorithm, CipherAlgorithm>;

inline constexpr std::size_t kIcvBytes = wire::kIcvBytes;

constexpr std::size_t key_bytes(AuthAlgorithm a) {
  return a == AuthAlgorithm::hmac_md5 ? 16 : 20;
}

constexpr std::size_t block_bytes(CipherAlgorithm c) {
  return c == CipherAlgorithm::aes_cbc ? 16 : 8;
}

/// Default key size for generated keys; AES also accepts 16.
constexpr std::size_t key_bytes(CipherAlgorithm) { return 24; }

bool key_length_valid(AuthAlgorithm a, std::size_t n);
bool key_length_valid(CipherAlgorithm c, std::size_t n);
bool key_length_valid(const Algorithm& alg, std::size_t n);

/// setkey spellings: hmac-md5, hmac-sha1, aes-cbc, 3des-cbc.
std::string_view to_string(AuthAlgorithm a);
std::string_view to_string(CipherAlgorithm c);
std::string_view to_string(const Algorithm& alg);

/// Full-length HMAC with a key of any length.
Bytes hmac(AuthAlgorithm alg, ByteView key, ByteView message);
/// 96-bit truncated HMAC; the key must match the SA key length.
wire::Icv mac(AuthAlgorithm alg, ByteView key, ByteView message);

Bytes encrypt_cbc(CipherAlgorithm alg, ByteView key, ByteView iv, ByteView plaintext);
Bytes decrypt_cbc(CipherAlgorithm alg, ByteView key, ByteView iv, ByteView ciphertext);

using Rng = std::mt19937_64;

/// Fills `n` bytes straight from the engine's output words so the sequence
/// does not depend on the standard library's distribution implementations.
Bytes random_bytes(std::size_t n, Rng& rng);

/// `bits` must be one of 128, 160 or 192.
Bytes random_key(std::size_t bits, Rng& rng);

enum class CryptoOp { mac, encrypt, decrypt };

struct CryptoCostSample {
  CryptoOp operation = CryptoOp::mac;
  Algorithm algorithm = AuthAlgorithm::hmac_md5;
  std::size_t payload_bytes = 0;
  std::chrono::nanoseconds elapsed{1};
};

/// Runs `fn` under a monotonic clock and returns its result together with
/// the cost sample. Durations below the clock's resolution are reported
/// as 1 ns.
template <class Fn>
auto timed(CryptoOp op, Algorithm alg, std::size_t payload_bytes, Fn&& fn)
    -> std::pair<std::invoke_result_t<Fn>, CryptoCostSample> {
  auto start = std::chrono::steady_clock::now();
  auto result = std::forward<Fn>(fn)();
  auto stop = std::chrono::steady_clock::now();
  auto elapsed = std::chrono::duration_cast<std::chrono::nanoseconds>(stop - start);
  if (elapsed <= std::chrono::nanoseconds::zero()) elapsed = std::chrono::nanoseconds{1};
  return {std::move(result), CryptoCostSample{op, alg, payload_bytes, elapsed}};
}

/// SHA-256 hex digest, used for trace fingerprints.
std::string sha256_hex(std::string_view data);

}  // namespace seclab::crypto
