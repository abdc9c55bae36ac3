#include "doctest.h"
#include "oracles.hpp"
#include "seclab/ipsec.hpp"

#include <random>

using namespace seclab;
using namespace seclab::ipsec;
using wire::Address;

namespace {

const Address kA = Address::parse("192.168.2.12");
const Address kC = Address::parse("192.168.2.22");

wire::Packet stream_packet(std::size_t body, std::uint64_t id, crypto::Rng& rng) {
  wire::UdpPayload u;
  u.src_port = 1234;
  u.dst_port = 1234;
  u.stream_id = 1;
  u.packet_id = id;
  u.body = crypto::random_bytes(body, rng);
  return wire::make_udp_packet(kA, kC, std::move(u));
}

std::string setkey_for(std::string_view cipher, std::string_view auth, std::size_t cipher_key,
                       std::size_t auth_key) {
  auto key = [](std::size_t n, int seed) {
    std::string s = "0x";
    for (std::size_t i = 0; i < n; ++i) {
      char buf[3];
      std::snprintf(buf, sizeof buf, "%02x", static_cast<unsigned>((i * 37 + seed) & 0xff));
      s += buf;
    }
    return s;
  };
  std::string t = "flush;\nspdflush;\n";
  t += "add 192.168.2.22 192.168.2.12 ah 0x200 -A " + std::string(auth) + " " + key(auth_key, 1) + ";\n";
  t += "add 192.168.2.12 192.168.2.22 ah 0x300 -A " + std::string(auth) + " " + key(auth_key, 2) + ";\n";
  t += "add 192.168.2.22 192.168.2.12 esp 0x201 -E " + std::string(cipher) + " " + key(cipher_key, 3) + ";\n";
  t += "add 192.168.2.12 192.168.2.22 esp 0x301 -E " + std::string(cipher) + " " + key(cipher_key, 4) + ";\n";
  t += "spdadd 192.168.2.22 192.168.2.12 any -P in ipsec esp/transport//require ah/transport//require;\n";
  t += "spdadd 192.168.2.12 192.168.2.22 any -P out ipsec esp/transport//require ah/transport//require;\n";
  return t;
}

struct Scheme {
  const char* cipher;
  const char* auth;
  std::size_t cipher_key;
  std::size_t auth_key;
  std::size_t block;
};

const Scheme kSchemes[] = {
    {"aes-cbc", "hmac-md5", 24, 16, 16},
    {"aes-cbc", "hmac-sha1", 24, 20, 16},
    {"3des-cbc", "hmac-md5", 24, 16, 8},
    {"3des-cbc", "hmac-sha1", 24, 20, 8},
};

}  // namespace

TEST_CASE("reference configuration parses to four SAs and two policies") {
  auto db = parse_setkey(reference_setkey_conf());
  REQUIRE(db.sad().size() == 4);
  REQUIRE(db.spd().size() == 2);

  const auto& sad = db.sad();
  CHECK(sad[0].spi == 0x200);
  CHECK(sad[0].protocol == SecProtocol::ah);
  CHECK(sad[0].src == kC);
  CHECK(sad[0].dst == kA);
  CHECK(sad[0].algorithm == crypto::Algorithm{crypto::AuthAlgorithm::hmac_md5});
  CHECK(oracle::hex(sad[0].key) == "ce516b2abf2fa2e6ab952f0454f7ab11");
  CHECK(sad[1].spi == 0x300);
  CHECK(sad[1].key.size() == 16);
  CHECK(sad[2].spi == 0x201);
  CHECK(sad[2].protocol == SecProtocol::esp);
  CHECK(sad[2].algorithm == crypto::Algorithm{crypto::CipherAlgorithm::aes_cbc});
  CHECK(sad[2].key.size() == 24);
  CHECK(sad[3].spi == 0x301);
  CHECK(oracle::hex(sad[3].key) == "d7ffecd485b1410d6d600598c14728962e4096ff9bf5ea42");

  CHECK(db.spd()[0].direction == Direction::in);
  CHECK(db.spd()[0].selector_src == kC);
  CHECK(db.spd()[1].direction == Direction::out);
  CHECK(db.spd()[1].transforms == std::vector<SecProtocol>{SecProtocol::esp, SecProtocol::ah});

  auto again = parse_setkey(render_setkey(db));
  CHECK(again == db);
}

TEST_CASE("setkey dialect") {
  SUBCASE("statements may share a line and comments are ignored") {
    auto db = parse_setkey(
        "flush; spdflush; # reset\n"
        "add 10.0.0.1 10.0.0.2 ah 256 -A hmac-sha1 0x0102030405060708090a0b0c0d0e0f1011121314;");
    REQUIRE(db.sad().size() == 1);
    CHECK(db.sad()[0].spi == 256);
  }
  SUBCASE("rijndael-cbc is AES") {
    auto db = parse_setkey(
        "add 10.0.0.1 10.0.0.2 esp 0x10 -E rijndael-cbc 0x000102030405060708090a0b0c0d0e0f;");
    CHECK(db.sad()[0].algorithm == crypto::Algorithm{crypto::CipherAlgorithm::aes_cbc});
  }
  SUBCASE("flush empties the SAD, spdflush the SPD") {
    auto db = parse_setkey(reference_setkey_conf());
    apply_setkey("flush;", db);
    CHECK(db.sad().empty());
    CHECK(db.spd().size() == 2);
    apply_setkey("spdflush;", db);
    CHECK(db.spd().empty());
  }
  SUBCASE("three byte key is rejected with its position") {
    try {
      parse_setkey("flush;\nadd 10.0.0.1 10.0.0.2 ah 0x100 -A hmac-md5 0x010203;\n");
      FAIL("expected SetkeyError");
    } catch (const SetkeyError& e) {
      CHECK(e.line() == 2);
      CHECK(e.column() > 1);
    }
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(parse_setkey("frobnicate;"), SetkeyError);
    CHECK_THROWS_AS(parse_setkey("add 10.0.0.1 10.0.0.2 ah 1 -A hmac-md5 0x123;"), SetkeyError);
    CHECK_THROWS_AS(parse_setkey("add 10.0.0.1 10.0.0.2 ah 1 -E aes-cbc 0x00;"), SetkeyError);
    CHECK_THROWS_AS(parse_setkey("add 10.0.0.1 10.0.0.2 ah 1 -A hmac-md5 "
                                 "0x000102030405060708090a0b0c0d0e0f"),
                    SetkeyError);
    auto dup = std::string("add 10.0.0.1 10.0.0.2 ah 1 -A hmac-md5 0x000102030405060708090a0b0c0d0e0f;");
    CHECK_THROWS_AS(parse_setkey(dup + dup), SetkeyError);
    CHECK_THROWS_AS(parse_setkey("spdadd 10.0.0.1 10.0.0.2 any -P sideways ipsec esp/transport//require;"),
                    SetkeyError);
  }
  SUBCASE("ESP only policy has a single transform") {
    auto db = parse_setkey(
        "spdadd 10.0.0.1 10.0.0.2 any -P out ipsec esp/transport//require;");
    CHECK(db.spd()[0].transforms == std::vector<SecProtocol>{SecProtocol::esp});
  }
}

TEST_CASE("mirror flips policy directions") {
  auto db = parse_setkey(reference_setkey_conf());
  auto m = mirror(db);
  CHECK(m.sad() == db.sad());
  REQUIRE(m.spd().size() == 2);
  CHECK(m.spd()[0].direction == Direction::out);
  CHECK(m.spd()[1].direction == Direction::in);
  CHECK(mirror(m) == db);
}

TEST_CASE("AH seal and verify") {
  auto sender = parse_setkey(reference_setkey_conf());
  auto receiver = mirror(sender);
  crypto::Rng rng(5);
  auto p = stream_packet(100, 0, rng);
  auto sealed = ah_seal(p, *sender.find_outbound_sa(kA, kC, SecProtocol::ah));
  CHECK(sealed.net.total_length == p.net.total_length + 24);
  CHECK(sealed.ah->sequence == 1);

  SUBCASE("accepts and strips") {
    auto v = ah_verify(sealed, receiver);
    REQUIRE(v.accepted());
    CHECK(v.packet() == p);
  }
  SUBCASE("TTL is mutable in flight") {
    sealed.net.ttl = 3;
    CHECK(ah_verify(sealed, receiver).accepted());
  }
  SUBCASE("replay") {
    REQUIRE(ah_verify(sealed, receiver).accepted());
    auto v = ah_verify(sealed, receiver);
    CHECK(v.cause() == RejectCause::replay);
  }
  SUBCASE("tampered body") {
    std::get<wire::UdpPayload>(sealed.transport).body[7] ^= 0x10;
    CHECK(ah_verify(sealed, receiver).cause() == RejectCause::integrity);
  }
  SUBCASE("wrong key") {
    receiver.find_sa(kC, 0x300, SecProtocol::ah)->key[0] ^= 1;
    CHECK(ah_verify(sealed, receiver).cause() == RejectCause::integrity);
  }
  SUBCASE("unknown SPI") {
    sealed.ah->spi = 0x999;
    CHECK(ah_verify(sealed, receiver).cause() == RejectCause::no_sa);
  }
}

TEST_CASE("ESP seal and open for both ciphers") {
  for (const auto& s : kSchemes) {
    CAPTURE(s.cipher);
    auto sender = parse_setkey(setkey_for(s.cipher, s.auth, s.cipher_key, s.auth_key));
    auto receiver = mirror(sender);
    crypto::Rng rng(11);
    for (std::size_t body : {0u, 1u, 3u, 4u, 5u, 100u, 1304u}) {
      auto p = stream_packet(body, body, rng);
      auto sealed = esp_seal(p, *sender.find_outbound_sa(kA, kC, SecProtocol::esp), rng);
      CHECK(sealed.esp->data.size() % s.block == 0);
      CHECK(wire::deserialize(wire::serialize(sealed)) == sealed);
      auto v = esp_open(sealed, receiver);
      REQUIRE(v.accepted());
      CHECK(v.packet() == p);
    }
  }
}

TEST_CASE("ESP rejects garbage, unknown SPI and the wrong cipher") {
  auto sender = parse_setkey(setkey_for("aes-cbc", "hmac-md5", 24, 16));
  auto receiver = mirror(sender);
  crypto::Rng rng(3);
  auto sealed = esp_seal(stream_packet(50, 1, rng), *sender.find_outbound_sa(kA, kC, SecProtocol::esp), rng);

  SUBCASE("short data") {
    auto bad = sealed;
    bad.esp->data.resize(16);
    wire::update_length(bad);
    CHECK(esp_open(bad, receiver).cause() == RejectCause::padding);
  }
  SUBCASE("unknown SPI") {
    auto bad = sealed;
    bad.esp->spi = 7;
    CHECK(esp_open(bad, receiver).cause() == RejectCause::no_sa);
  }
  SUBCASE("random ciphertext is rejected, never accepted") {
    for (int i = 0; i < 200; ++i) {
      auto bad = sealed;
      bad.esp->data = crypto::random_bytes(bad.esp->data.size(), rng);
      CHECK_FALSE(esp_open(bad, receiver).accepted());
    }
  }
  SUBCASE("3DES receiver cannot open AES traffic") {
    auto other = mirror(parse_setkey(setkey_for("3des-cbc", "hmac-md5", 24, 16)));
    CHECK_FALSE(esp_open(sealed, other).accepted());
  }
}

TEST_CASE("outbound then inbound is the identity for every scheme") {
  for (const auto& s : kSchemes) {
    CAPTURE(s.cipher);
    CAPTURE(s.auth);
    auto sender = parse_setkey(setkey_for(s.cipher, s.auth, s.cipher_key, s.auth_key));
    auto receiver = mirror(sender);
    crypto::Rng rng(17);
    for (std::uint64_t i = 0; i < 200; ++i) {
      auto p = stream_packet(rng() % 1500, i, rng);
      auto sealed = outbound(p, sender, rng);
      CHECK(sealed.net.protocol == wire::Protocol::ah);
      CHECK(sealed.ah->next_protocol == wire::Protocol::esp);
      auto v = inbound(wire::deserialize(wire::serialize(sealed)), receiver);
      REQUIRE(v.accepted());
      CHECK(v.packet() == p);
    }
  }
}

TEST_CASE("size law matches the padding oracle for bodies 0..4096") {
  for (const auto& s : kSchemes) {
    CAPTURE(s.cipher);
    auto sender = parse_setkey(setkey_for(s.cipher, s.auth, s.cipher_key, s.auth_key));
    crypto::Rng rng(23);
    for (std::size_t body = 0; body <= 4096; ++body) {
      auto p = stream_packet(body, body, rng);
      auto sealed = outbound(p, sender, rng);
      std::size_t growth = wire::serialize(sealed).size() - wire::serialize(p).size();
      REQUIRE(growth == oracle::ah_esp_growth(12 + body, s.block));
    }
  }
}

TEST_CASE("default payload: AES costs 8 bytes more than 3DES") {
  crypto::Rng rng(1);
  auto aes = parse_setkey(setkey_for("aes-cbc", "hmac-md5", 24, 16));
  auto tdes = parse_setkey(setkey_for("3des-cbc", "hmac-md5", 24, 16));
  auto p = stream_packet(1304, 0, rng);
  CHECK(p.net.total_length == 20 + 8 + 1316);
  auto a = outbound(p, aes, rng);
  auto t = outbound(p, tdes, rng);
  CHECK(a.net.total_length - p.net.total_length == 52);
  CHECK(a.net.total_length - t.net.total_length == 8);
  CHECK(8 + a.esp->data.size() == 1352);
  CHECK(8 + t.esp->data.size() == 1344);
}

TEST_CASE("policy enforcement") {
  auto sender = parse_setkey(reference_setkey_conf());
  auto receiver = mirror(sender);
  crypto::Rng rng(2);
  auto p = stream_packet(10, 0, rng);

  SUBCASE("cleartext arrival violates the in-policy") {
    CHECK(inbound(p, receiver).cause() == RejectCause::policy);
  }
  SUBCASE("AH without ESP violates the in-policy") {
    auto sealed = ah_seal(p, *sender.find_outbound_sa(kA, kC, SecProtocol::ah));
    CHECK(inbound(sealed, receiver).cause() == RejectCause::policy);
  }
  SUBCASE("out-policy without an SA") {
    apply_setkey("flush;", sender);
    CHECK_THROWS_AS(outbound(p, sender, rng), NoSaForPolicy);
  }
  SUBCASE("no policy leaves traffic alone") {
    SecurityDatabases empty;
    CHECK(outbound(p, empty, rng) == p);
    CHECK(inbound(p, empty).packet() == p);
  }
}

TEST_CASE("single-bit tampering is never silently accepted") {
  for (const auto& s : kSchemes) {
    CAPTURE(s.cipher);
    CAPTURE(s.auth);
    auto sender = parse_setkey(setkey_for(s.cipher, s.auth, s.cipher_key, s.auth_key));
    auto receiver = mirror(sender);
    crypto::Rng rng(31);
    auto bytes = wire::serialize(outbound(stream_packet(300, 0, rng), sender, rng));
    int silent = 0;
    for (int trial = 0; trial < 1000; ++trial) {
      auto flipped = bytes;
      std::size_t bit = 20 * 8 + rng() % ((bytes.size() - 20) * 8);
      flipped[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
      try {
        if (inbound(wire::deserialize(flipped), receiver).accepted()) ++silent;
      } catch (const wire::DecodeError&) {
      }
    }
    CHECK(silent == 0);
  }
}

TEST_CASE("protocol filter") {
  auto f = ProtocolFilter::parse("udp,olsr");
  CHECK(f.permits(wire::Protocol::udp));
  CHECK(f.permits(wire::Protocol::olsr));
  CHECK_FALSE(f.permits(wire::Protocol::esp));
  CHECK_FALSE(f.permits(wire::Protocol::ah));
  auto n = ProtocolFilter::parse("50,51");
  CHECK(n.permits(wire::Protocol::esp));
  CHECK(n.permits(wire::Protocol::ah));
  CHECK_FALSE(n.permits(wire::Protocol::udp));
  CHECK(ProtocolFilter::parse("all").permits(wire::Protocol::ah));
  CHECK(ProtocolFilter().permits(wire::Protocol::esp));
  CHECK_THROWS(ProtocolFilter::parse("tcp"));
  CHECK_THROWS(ProtocolFilter::parse("6"));
}
