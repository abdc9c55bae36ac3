// Transport-mode IPsec engine: security databases, the setkey.conf
// dialect, AH seal/verify, ESP seal/open and SPD-driven packet processing.

#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "seclab/crypto.hpp"
#include "seclab/wire.hpp"

namespace seclab::ipsec {

enum class SecProtocol { ah, esp };
enum class Direction { in, out };

std::string_view to_string(SecProtocol p);
std::string_view to_string(Direction d);

struct SecurityAssociation {
  wire::Address src;
  wire::Address dst;
  SecProtocol protocol = SecProtocol::ah;
  std::uint32_t spi = 0;
  crypto::Algorithm algorithm = crypto::AuthAlgorithm::hmac_md5;
  Bytes key;
  std::uint32_t tx_sequence = 0;
  std::uint32_t rx_highest_seen = 0;

  bool operator==(const SecurityAssociation&) const = default;
};

/// Transport mode with level "require" is the only combination supported,
/// so a transform is fully described by its protocol.
struct SecurityPolicy {
  wire::Address selector_src;
  wire::Address selector_dst;
  Direction direction = Direction::out;
  std::vector<SecProtocol> transforms;

  bool requires_protocol(SecProtocol p) const;
  bool operator==(const SecurityPolicy&) const = default;
};

class PolicyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Outbound policy names a transform for which no SA exists.
class NoSaForPolicy : public PolicyError {
 public:
  using PolicyError::PolicyError;
};

class SecurityDatabases {
 public:
  void flush() { sad_.clear(); }
  void spdflush() { spd_.clear(); }

  /// Throws PolicyError on a duplicate (dst, spi, protocol) or a key that
  /// does not fit the algorithm.
  void add_sa(SecurityAssociation sa);
  /// Throws PolicyError on an empty transform list.
  void add_policy(SecurityPolicy policy);

  SecurityAssociation* find_sa(wire::Address dst, std::uint32_t spi, SecProtocol protocol);
  SecurityAssociation* find_outbound_sa(wire::Address src, wire::Address dst, SecProtocol protocol);

  /// First policy in file order whose selectors equal (src, dst).
  const SecurityPolicy* match_policy(wire::Address src, wire::Address dst, Direction d) const;

  const std::vector<SecurityAssociation>& sad() const { return sad_; }
  const std::vector<SecurityPolicy>& spd() const { return spd_; }

  bool operator==(const SecurityDatabases&) const = default;

 private:
  std::vector<SecurityAssociation> sad_;
  std::vector<SecurityPolicy> spd_;
};

/// Parse or semantic error with a 1-based source position.
class SetkeyError : public std::runtime_error {
 public:
  SetkeyError(std::size_t line, std::size_t column, const std::string& message);
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

SecurityDatabases parse_setkey(std::string_view text);
void apply_setkey(std::string_view text, SecurityDatabases& db);
std::string render_setkey(const SecurityDatabases& db);

/// The same SAs with every policy direction flipped: the configuration
/// the peer host loads.
SecurityDatabases mirror(const SecurityDatabases& db);

/// MD5/AES host configuration for 192.168.2.12 talking to 192.168.2.22,
/// verbatim as distributed with the original testbed.
std::string_view reference_setkey_conf();

enum class RejectCause { no_sa, integrity, replay, padding, policy, decode };
std::string_view to_string(RejectCause c);

class Verdict {
 public:
  static Verdict accept(wire::Packet p) { return Verdict(std::move(p)); }
  static Verdict reject(RejectCause c) { return Verdict(c); }

  bool accepted() const { return std::holds_alternative<wire::Packet>(state_); }
  explicit operator bool() const { return accepted(); }

  const wire::Packet& packet() const { return std::get<wire::Packet>(state_); }
  wire::Packet& packet() { return std::get<wire::Packet>(state_); }
  RejectCause cause() const { return std::get<RejectCause>(state_); }

 private:
  explicit Verdict(wire::Packet p) : state_(std::move(p)) {}
  explicit Verdict(RejectCause c) : state_(c) {}
  std::variant<wire::Packet, RejectCause> state_;
};

/// Collects the cost of every primitive invocation made while processing
/// one packet. Passing nullptr skips collection.
using CostLog = std::vector<crypto::CryptoCostSample>;

/// Smallest pad length such that payload + pad + 2 trailer bytes is a
/// multiple of `block`.
std::size_t esp_pad_length(std::size_t payload_bytes, std::size_t block);

/// ICV over the serialized packet with TTL and ICV bytes zeroed.
wire::Icv compute_icv(const wire::Packet& p, crypto::AuthAlgorithm alg, ByteView key,
                      CostLog* costs = nullptr);

wire::Packet ah_seal(wire::Packet p, SecurityAssociation& sa, CostLog* costs = nullptr);
Verdict ah_verify(wire::Packet p, SecurityDatabases& db, CostLog* costs = nullptr);

wire::Packet esp_seal(wire::Packet p, SecurityAssociation& sa, crypto::Rng& iv_source,
                      CostLog* costs = nullptr);
Verdict esp_open(wire::Packet p, SecurityDatabases& db, CostLog* costs = nullptr);

/// Applies the first matching out-policy (ESP innermost, AH outermost).
/// Packets without a matching policy pass unchanged.
wire::Packet outbound(wire::Packet p, SecurityDatabases& db, crypto::Rng& iv_source,
                      CostLog* costs = nullptr);

/// Strips AH then ESP and checks the result against the matching
/// in-policy.
Verdict inbound(wire::Packet p, SecurityDatabases& db, CostLog* costs = nullptr);

/// Per-node allow list on the outermost protocol, applied to inbound,
/// outbound and forwarded traffic alike.
class ProtocolFilter {
 public:
  ProtocolFilter();  // allows everything
  explicit ProtocolFilter(std::set<wire::Protocol> allowed) : allowed_(std::move(allowed)) {}

  static ProtocolFilter allow_all() { return ProtocolFilter(); }
  /// Comma separated protocol names or numbers, e.g. "udp,olsr" or "50,51".
  static ProtocolFilter parse(std::string_view list);

  bool permits(wire::Protocol p) const { return allowed_.contains(p); }
  const std::set<wire::Protocol>& allowed() const { return allowed_; }

 private:
  std::set<wire::Protocol> allowed_;
};

}  // namespace seclab::ipsec
