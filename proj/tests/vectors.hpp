// Published known-answer vectors: RFC 2202 (HMAC-MD5, HMAC-SHA1),
// NIST SP 800-38A (AES-CBC) and the classic DES/3DES examples.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "oracles.hpp"

namespace vectors {

using Bytes = std::vector<std::uint8_t>;

struct Mac {
  Bytes key;
  Bytes data;
  std::string digest;
};

struct Cbc {
  std::string name;
  Bytes key;
  Bytes iv;
  Bytes plaintext;
  Bytes ciphertext;
};

inline Bytes repeat(std::uint8_t b, std::size_t n) { return Bytes(n, b); }

inline Bytes counting_key() {
  Bytes k;
  for (int i = 1; i <= 25; ++i) k.push_back(static_cast<std::uint8_t>(i));
  return k;
}

inline const char* kLargeKey = "Test Using Larger Than Block-Size Key - Hash Key First";
inline const char* kLargeKeyAndData =
    "Test Using Larger Than Block-Size Key and Larger Than One Block-Size Data";

inline std::vector<Mac> hmac_md5() {
  using oracle::text;
  return {
      {repeat(0x0b, 16), text("Hi There"), "9294727a3638bb1c13f48ef8158bfc9d"},
      {text("Jefe"), text("what do ya want for nothing?"), "750c783e6ab0b503eaa86e310a5db738"},
      {repeat(0xaa, 16), repeat(0xdd, 50), "56be34521d144c88dbb8c733f0e8b3f6"},
      {counting_key(), repeat(0xcd, 50), "697eaf0aca3a3aea3a75164746ffaa79"},
      {repeat(0x0c, 16), text("Test With Truncation"), "56461ef2342edc00f9bab995690efd4c"},
      {repeat(0xaa, 80), text(kLargeKey), "6b1ab7fe4bd7bf8f0b62e6ce61b9d0cd"},
      {repeat(0xaa, 80), text(kLargeKeyAndData), "6f630fad67cda0ee1fb1f562db3aa53e"},
  };
}

inline std::vector<Mac> hmac_sha1() {
  using oracle::text;
  return {
      {repeat(0x0b, 20), text("Hi There"), "b617318655057264e28bc0b6fb378c8ef146be00"},
      {text("Jefe"), text("what do ya want for nothing?"),
       "effcdf6ae5eb2fa2d27416d5f184df9c259a7c79"},
      {repeat(0xaa, 20), repeat(0xdd, 50), "125d7342b9ac11cd91a39af48aa17b4f63f175d3"},
      {counting_key(), repeat(0xcd, 50), "4c9007f4026250c6bc8414f9bf50c86c2d7235da"},
      {repeat(0x0c, 20), text("Test With Truncation"), "4c1a03424b55e07fe7f27be1d58bb9324a9a5a04"},
      {repeat(0xaa, 80), text(kLargeKey), "aa4ae5e15272d00e95705637ce8a3b55ed402112"},
      {repeat(0xaa, 80), text(kLargeKeyAndData), "e8e99d0f45237d786d6bbaa7965c7808bbff1a91"},
  };
}

inline std::vector<Cbc> aes_cbc() {
  using oracle::unhex;
  auto iv = unhex("000102030405060708090a0b0c0d0e0f");
  auto pt = unhex(
      "6bc1bee22e409f96e93d7e117393172a ae2d8a571e03ac9c9eb76fac45af8e51"
      "30c81c46a35ce411e5fbc1191a0a52ef f69f2445df4f9b17ad2b417be66c3710");
  return {
      {"CBC-AES128", unhex("2b7e151628aed2a6abf7158809cf4f3c"), iv, pt,
       unhex("7649abac8119b246cee98e9b12e9197d 5086cb9b507219ee95db113a917678b2"
             "73bed6b8e3c1743b7116e69e22229516 3ff1caa1681fac09120eca307586e1a7")},
      {"CBC-AES192", unhex("8e73b0f7da0e6452c810f32b809079e562f8ead2522c6b7b"), iv, pt,
       unhex("4f021db243bc633d7178183a9fa071e8 b4d9ada9ad7dedf4e5e738763f69145a"
             "571b242012fb7ae07fa9baac3df102e0 08b0e27988598881d920a9e64f5615cd")},
  };
}

inline std::vector<Cbc> tdes_cbc() {
  using oracle::text;
  using oracle::unhex;
  std::vector<Cbc> v{
      {"DES-CBC example, key repeated", unhex("0123456789abcdef 0123456789abcdef 0123456789abcdef"),
       unhex("1234567890abcdef"), text("Now is the time for all "),
       unhex("e5c7cdde872bf27c43e934008c389c0f683788499a7c05f6")},
  };
  // Three-key ECB example run one block at a time under a zero IV.
  auto key = unhex("0123456789ABCDEF23456789ABCDEF01456789ABCDEF0123");
  auto pt = text("The qufck brown fox jump");
  auto ct = unhex("a826fd8ce53b855f cce21c8112256fe6 68d5c05dd9b6b900");
  for (std::size_t i = 0; i < 3; ++i)
    v.push_back({"3DES three-key block " + std::to_string(i), key, Bytes(8, 0),
                 Bytes(pt.begin() + 8 * i, pt.begin() + 8 * (i + 1)),
                 Bytes(ct.begin() + 8 * i, ct.begin() + 8 * (i + 1))});
  return v;
}

}  // namespace vectors
