#include "seclab/ipsec.hpp"

#include <openssl/crypto.h>

#include <algorithm>
#include <charconv>

namespace seclab::ipsec {
namespace {

crypto::AuthAlgorithm auth_of(const SecurityAssociation& sa) {
  if (const auto* a = std::get_if<crypto::AuthAlgorithm>(&sa.algorithm)) return *a;
  throw PolicyError("AH SA carries a cipher algorithm");
}

crypto::CipherAlgorithm cipher_of(const SecurityAssociation& sa) {
  if (const auto* c = std::get_if<crypto::CipherAlgorithm>(&sa.algorithm)) return *c;
  throw PolicyError("ESP SA carries an authentication algorithm");
}

std::uint32_t next_sequence(SecurityAssociation& sa) {
  if (sa.tx_sequence == UINT32_MAX) throw PolicyError("sequence number space exhausted");
  return ++sa.tx_sequence;
}

}  // namespace

std::string_view to_string(SecProtocol p) { return p == SecProtocol::ah ? "ah" : "esp"; }
std::string_view to_string(Direction d) { return d == Direction::in ? "in" : "out"; }

std::string_view to_string(RejectCause c) {
  switch (c) {
    case RejectCause::no_sa: return "no_sa";
    case RejectCause::integrity: return "integrity";
    case RejectCause::replay: return "replay";
    case RejectCause::padding: return "padding";
    case RejectCause::policy: return "policy";
    case RejectCause::decode: return "decode";
  }
  return "?";
}

bool SecurityPolicy::requires_protocol(SecProtocol p) const {
  return std::find(transforms.begin(), transforms.end(), p) != transforms.end();
}

void SecurityDatabases::add_sa(SecurityAssociation sa) {
  bool auth = std::holds_alternative<crypto::AuthAlgorithm>(sa.algorithm);
  if (auth != (sa.protocol == SecProtocol::ah))
    throw PolicyError("algorithm family does not match SA protocol");
  if (!crypto::key_length_valid(sa.algorithm, sa.key.size()))
    throw PolicyError("key length " + std::to_string(sa.key.size()) + " invalid for " +
                      std::string(crypto::to_string(sa.algorithm)));
  if (find_sa(sa.dst, sa.spi, sa.protocol) != nullptr)
    throw PolicyError("duplicate SA for (" + sa.dst.to_string() + ", " + std::to_string(sa.spi) +
                      ", " + std::string(to_string(sa.protocol)) + ")");
  sad_.push_back(std::move(sa));
}

void SecurityDatabases::add_policy(SecurityPolicy policy) {
  if (policy.transforms.empty()) throw PolicyError("policy without transforms");
  spd_.push_back(std::move(policy));
}

SecurityAssociation* SecurityDatabases::find_sa(wire::Address dst, std::uint32_t spi,
                                                SecProtocol protocol) {
  for (auto& sa : sad_)
    if (sa.dst == dst && sa.spi == spi && sa.protocol == protocol) return &sa;
  return nullptr;
}

SecurityAssociation* SecurityDatabases::find_outbound_sa(wire::Address src, wire::Address dst,
                                                         SecProtocol protocol) {
  for (auto& sa : sad_)
    if (sa.src == src && sa.dst == dst && sa.protocol == protocol) return &sa;
  return nullptr;
}

const SecurityPolicy* SecurityDatabases::match_policy(wire::Address src, wire::Address dst,
                                                      Direction d) const {
  for (const auto& sp : spd_)
    if (sp.direction == d && sp.selector_src == src && sp.selector_dst == dst) return &sp;
  return nullptr;
}

std::size_t esp_pad_length(std::size_t payload_bytes, std::size_t block) {
  std::size_t rem = (payload_bytes + wire::kEspTrailerBytes) % block;
  return rem == 0 ? 0 : block - rem;
}

wire::Icv compute_icv(const wire::Packet& p, crypto::AuthAlgorithm alg, ByteView key,
                      CostLog* costs) {
  wire::Packet zeroed = p;
  zeroed.net.ttl = 0;
  if (zeroed.ah) zeroed.ah->icv.fill(0);
  Bytes bytes = wire::serialize(zeroed);
  if (costs == nullptr) return crypto::mac(alg, key, bytes);
  auto [icv, sample] = crypto::timed(crypto::CryptoOp::mac, alg, bytes.size(),
                                     [&] { return crypto::mac(alg, key, bytes); });
  costs->push_back(sample);
  return icv;
}

wire::Packet ah_seal(wire::Packet p, SecurityAssociation& sa, CostLog* costs) {
  if (sa.protocol != SecProtocol::ah) throw PolicyError("ah_seal needs an AH SA");
  if (p.ah) throw PolicyError("packet already carries AH");
  auto alg = auth_of(sa);
  wire::AhHeader ah;
  ah.next_protocol = p.net.protocol;
  ah.spi = sa.spi;
  ah.sequence = next_sequence(sa);
  p.ah = ah;
  p.net.protocol = wire::Protocol::ah;
  wire::update_length(p);
  p.ah->icv = compute_icv(p, alg, sa.key, costs);
  return p;
}

Verdict ah_verify(wire::Packet p, SecurityDatabases& db, CostLog* costs) {
  if (!p.ah) return Verdict::reject(RejectCause::decode);
  SecurityAssociation* sa = db.find_sa(p.net.dst, p.ah->spi, SecProtocol::ah);
  if (sa == nullptr) return Verdict::reject(RejectCause::no_sa);
  wire::Icv expected = compute_icv(p, auth_of(*sa), sa->key, costs);
  if (CRYPTO_memcmp(expected.data(), p.ah->icv.data(), expected.size()) != 0)
    return Verdict::reject(RejectCause::integrity);
  if (p.ah->sequence <= sa->rx_highest_seen) return Verdict::reject(RejectCause::replay);
  sa->rx_highest_seen = p.ah->sequence;
  p.net.protocol = p.ah->next_protocol;
  p.ah.reset();
  wire::update_length(p);
  return Verdict::accept(std::move(p));
}

wire::Packet esp_seal(wire::Packet p, SecurityAssociation& sa, crypto::Rng& iv_source,
                      CostLog* costs) {
  if (sa.protocol != SecProtocol::esp) throw PolicyError("esp_seal needs an ESP SA");
  if (p.ah || p.esp) throw PolicyError("ESP must be applied to a bare transport packet");
  auto alg = cipher_of(sa);
  std::size_t block = crypto::block_bytes(alg);

  Bytes plaintext = wire::serialize_transport(p.transport);
  std::size_t pad = esp_pad_length(plaintext.size(), block);
  for (std::size_t i = 1; i <= pad; ++i) plaintext.push_back(static_cast<std::uint8_t>(i));
  plaintext.push_back(static_cast<std::uint8_t>(pad));
  plaintext.push_back(static_cast<std::uint8_t>(p.net.protocol));

  Bytes iv = crypto::random_bytes(block, iv_source);
  Bytes ciphertext;
  if (costs != nullptr) {
    auto [ct, sample] = crypto::timed(crypto::CryptoOp::encrypt, alg, plaintext.size(), [&] {
      return crypto::encrypt_cbc(alg, sa.key, iv, plaintext);
    });
    costs->push_back(sample);
    ciphertext = std::move(ct);
  } else {
    ciphertext = crypto::encrypt_cbc(alg, sa.key, iv, plaintext);
  }

  wire::EspEnvelope esp;
  esp.spi = sa.spi;
  esp.sequence = next_sequence(sa);
  esp.data = std::move(iv);
  esp.data.insert(esp.data.end(), ciphertext.begin(), ciphertext.end());
  p.esp = std::move(esp);
  p.transport = std::monostate{};
  p.net.protocol = wire::Protocol::esp;
  wire::update_length(p);
  return p;
}

Verdict esp_open(wire::Packet p, SecurityDatabases& db, CostLog* costs) {
  if (!p.esp || p.ah) return Verdict::reject(RejectCause::decode);
  SecurityAssociation* sa = db.find_sa(p.net.dst, p.esp->spi, SecProtocol::esp);
  if (sa == nullptr) return Verdict::reject(RejectCause::no_sa);
  auto alg = cipher_of(*sa);
  std::size_t block = crypto::block_bytes(alg);
  const Bytes& data = p.esp->data;
  if (data.size() < 2 * block || (data.size() - block) % block != 0)
    return Verdict::reject(RejectCause::padding);

  auto iv = p.esp->iv(block);
  auto ct = p.esp->ciphertext(block);
  Bytes plaintext;
  if (costs != nullptr) {
    auto [pt, sample] = crypto::timed(crypto::CryptoOp::decrypt, alg, ct.size(),
                                      [&] { return crypto::decrypt_cbc(alg, sa->key, iv, ct); });
    costs->push_back(sample);
    plaintext = std::move(pt);
  } else {
    plaintext = crypto::decrypt_cbc(alg, sa->key, iv, ct);
  }

  std::size_t n = plaintext.size();
  std::size_t pad = plaintext[n - 2];
  if (pad >= block || pad + wire::kEspTrailerBytes > n) return Verdict::reject(RejectCause::padding);
  std::size_t payload_len = n - wire::kEspTrailerBytes - pad;
  for (std::size_t i = 0; i < pad; ++i)
    if (plaintext[payload_len + i] != i + 1) return Verdict::reject(RejectCause::padding);
  // Minimal padding only.
  if (esp_pad_length(payload_len, block) != pad) return Verdict::reject(RejectCause::padding);

  auto next = wire::protocol_from_code(plaintext[n - 1]);
  if (!next || (*next != wire::Protocol::udp && *next != wire::Protocol::olsr))
    return Verdict::reject(RejectCause::decode);
  wire::Transport transport;
  try {
    transport = wire::deserialize_transport(ByteView(plaintext).first(payload_len), *next);
  } catch (const wire::DecodeError&) {
    return Verdict::reject(RejectCause::decode);
  }

  if (p.esp->sequence <= sa->rx_highest_seen) return Verdict::reject(RejectCause::replay);
  sa->rx_highest_seen = p.esp->sequence;

  p.esp.reset();
  p.transport = std::move(transport);
  p.net.protocol = *next;
  wire::update_length(p);
  return Verdict::accept(std::move(p));
}

wire::Packet outbound(wire::Packet p, SecurityDatabases& db, crypto::Rng& iv_source,
                      CostLog* costs) {
  const SecurityPolicy* policy = db.match_policy(p.net.src, p.net.dst, Direction::out);
  if (policy == nullptr) return p;

  SecurityAssociation* esp_sa = nullptr;
  SecurityAssociation* ah_sa = nullptr;
  if (policy->requires_protocol(SecProtocol::esp)) {
    esp_sa = db.find_outbound_sa(p.net.src, p.net.dst, SecProtocol::esp);
    if (esp_sa == nullptr)
      throw NoSaForPolicy("no ESP SA for " + p.net.src.to_string() + " -> " + p.net.dst.to_string());
  }
  if (policy->requires_protocol(SecProtocol::ah)) {
    ah_sa = db.find_outbound_sa(p.net.src, p.net.dst, SecProtocol::ah);
    if (ah_sa == nullptr)
      throw NoSaForPolicy("no AH SA for " + p.net.src.to_string() + " -> " + p.net.dst.to_string());
  }
  if (esp_sa != nullptr) p = esp_seal(std::move(p), *esp_sa, iv_source, costs);
  if (ah_sa != nullptr) p = ah_seal(std::move(p), *ah_sa, costs);
  return p;
}

Verdict inbound(wire::Packet p, SecurityDatabases& db, CostLog* costs) {
  bool had_ah = p.ah.has_value();
  bool had_esp = p.esp.has_value();
  if (had_ah) {
    auto v = ah_verify(std::move(p), db, costs);
    if (!v) return v;
    p = std::move(v.packet());
  }
  if (p.esp) {
    auto v = esp_open(std::move(p), db, costs);
    if (!v) return v;
    p = std::move(v.packet());
  }
  if (const auto* policy = db.match_policy(p.net.src, p.net.dst, Direction::in)) {
    if (policy->requires_protocol(SecProtocol::ah) && !had_ah)
      return Verdict::reject(RejectCause::policy);
    if (policy->requires_protocol(SecProtocol::esp) && !had_esp)
      return Verdict::reject(RejectCause::policy);
  }
  return Verdict::accept(std::move(p));
}

ProtocolFilter::ProtocolFilter()
    : allowed_{wire::Protocol::udp, wire::Protocol::esp, wire::Protocol::ah, wire::Protocol::olsr} {}

ProtocolFilter ProtocolFilter::parse(std::string_view list) {
  std::set<wire::Protocol> allowed;
  std::size_t start = 0;
  while (start <= list.size()) {
    auto comma = list.find(',', start);
    auto name = list.substr(start, comma == std::string_view::npos ? std::string_view::npos
                                                                    : comma - start);
    if (name == "all") return allow_all();
    if (name == "udp")
      allowed.insert(wire::Protocol::udp);
    else if (name == "esp")
      allowed.insert(wire::Protocol::esp);
    else if (name == "ah")
      allowed.insert(wire::Protocol::ah);
    else if (name == "olsr")
      allowed.insert(wire::Protocol::olsr);
    else if (!name.empty()) {
      unsigned code = 0;
      auto [end, ec] = std::from_chars(name.data(), name.data() + name.size(), code);
      auto proto = ec == std::errc{} && end == name.data() + name.size() && code < 256
                       ? wire::protocol_from_code(static_cast<std::uint8_t>(code))
                       : std::nullopt;
      if (!proto) throw std::invalid_argument("unknown protocol '" + std::string(name) + "' in filter");
      allowed.insert(*proto);
    }
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return ProtocolFilter(std::move(allowed));
}

}  // namespace seclab::ipsec
