// On-wire packet layouts for the MANET security lab.
//
// Every packet is a fixed 20-byte network header followed by an optional
// AH header, an optional ESP envelope and (when not encrypted) a transport
// payload, which is either a UDP datagram or an OLSR control message.
//
//    +-----------+------+---------------------------+
//    | NetHeader |  AH  | ESP (spi|seq|iv|cipher)   |
//    +-----------+------+---------------------------+
//
// When both transforms are applied AH sits outside ESP so the ICV
// authenticates the encrypted envelope.

#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace seclab {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

}  // namespace seclab

namespace seclab::wire {

class DecodeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EncodeError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// IPv4-style 32-bit node address, rendered in dotted-quad form.
class Address {
 public:
  constexpr Address() = default;
  constexpr explicit Address(std::uint32_t value) : value_(value) {}

  /// Throws DecodeError when `text` is not a dotted quad.
  static Address parse(std::string_view text);
  static std::optional<Address> try_parse(std::string_view text);
  static constexpr Address broadcast() { return Address{0xffffffffu}; }

  constexpr std::uint32_t value() const { return value_; }
  std::string to_string() const;

  constexpr auto operator<=>(const Address&) const = default;

 private:
  std::uint32_t value_ = 0;
};

enum class Protocol : std::uint8_t {
  udp = 17,
  esp = 50,
  ah = 51,
  olsr = 138,
};

std::optional<Protocol> protocol_from_code(std::uint8_t code);
std::string_view to_string(Protocol p);

inline constexpr std::size_t kNetHeaderBytes = 20;
inline constexpr std::size_t kUdpHeaderBytes = 8;
inline constexpr std::size_t kStreamTagBytes = 12;
inline constexpr std::size_t kIcvBytes = 12;
inline constexpr std::size_t kAhHeaderBytes = 12 + kIcvBytes;
inline constexpr std::size_t kEspHeaderBytes = 8;
inline constexpr std::size_t kEspTrailerBytes = 2;
inline constexpr std::uint8_t kDefaultTtl = 64;

struct NetHeader {
  Address src;
  Address dst;
  Protocol protocol = Protocol::udp;
  std::uint8_t ttl = kDefaultTtl;
  std::uint16_t total_length = 0;

  bool operator==(const NetHeader&) const = default;
};

using Icv = std::array<std::uint8_t, kIcvBytes>;

struct AhHeader {
  Protocol next_protocol = Protocol::udp;
  // Length of AH in 32-bit words minus 2; fixed by the 96-bit ICV.
  std::uint8_t payload_len = kAhHeaderBytes / 4 - 2;
  std::uint32_t spi = 0;
  std::uint32_t sequence = 0;
  Icv icv{};

  bool operator==(const AhHeader&) const = default;
};

/// ESP envelope as seen on the wire. `data` is IV followed by ciphertext;
/// the IV length belongs to the SA, so the split happens at open time.
struct EspEnvelope {
  std::uint32_t spi = 0;
  std::uint32_t sequence = 0;
  Bytes data;

  ByteView iv(std::size_t block) const;
  ByteView ciphertext(std::size_t block) const;

  bool operator==(const EspEnvelope&) const = default;
};

/// UDP datagram whose first 12 payload bytes tag it with a stream and a
/// globally unique packet id.
struct UdpPayload {
  std::uint16_t src_port = 0;
  std::uint16_t dst_port = 0;
  std::uint32_t stream_id = 0;
  std::uint64_t packet_id = 0;
  Bytes body;

  /// Datagram size: tag plus body, excluding the UDP header.
  std::size_t datagram_size() const { return kStreamTagBytes + body.size(); }

  bool operator==(const UdpPayload&) const = default;
};

// OLSR link and neighbor type codes.
enum class LinkType : std::uint8_t { unspecified = 0, asymmetric = 1, symmetric = 2, lost = 3 };
enum class NeighborType : std::uint8_t { not_neighbor = 0, symmetric = 1, mpr = 2 };

struct LinkBlock {
  LinkType link = LinkType::unspecified;
  NeighborType neighbor = NeighborType::not_neighbor;
  std::vector<Address> addresses;

  bool operator==(const LinkBlock&) const = default;
};

struct HelloMessage {
  std::uint8_t htime_s = 2;
  std::uint8_t willingness = 3;
  std::vector<LinkBlock> blocks;

  bool operator==(const HelloMessage&) const = default;
};

struct TcMessage {
  std::uint16_t ansn = 0;
  std::vector<Address> advertised;

  bool operator==(const TcMessage&) const = default;
};

struct OlsrMessage {
  Address originator;
  std::uint8_t vtime_s = 6;
  std::uint8_t ttl = 255;
  std::uint8_t hop_count = 0;
  std::uint16_t message_seq = 0;
  std::variant<HelloMessage, TcMessage> body;

  bool is_hello() const { return std::holds_alternative<HelloMessage>(body); }
  bool is_tc() const { return std::holds_alternative<TcMessage>(body); }

  bool operator==(const OlsrMessage&) const = default;
};

/// Empty only while the transport is sealed inside an ESP envelope.
using Transport = std::variant<std::monostate, UdpPayload, OlsrMessage>;

struct Packet {
  NetHeader net;
  std::optional<AhHeader> ah;
  std::optional<EspEnvelope> esp;
  Transport transport;

  /// Protocol code of the innermost cleartext layer carried by this packet.
  std::optional<Protocol> transport_protocol() const;

  bool operator==(const Packet&) const = default;
};

std::size_t transport_size(const Transport& t);
std::size_t packet_size(const Packet& p);

/// Recomputes net.total_length from the current layers.
void update_length(Packet& p);

Bytes serialize_transport(const Transport& t);
/// Decodes a whole transport layer; trailing bytes are an error.
Transport deserialize_transport(ByteView bytes, Protocol protocol);

/// Throws EncodeError when the protocol chain or total_length disagree
/// with the layers present.
Bytes serialize(const Packet& p);
/// Throws DecodeError on truncation, unknown protocol codes or length
/// fields that disagree with the buffer.
Packet deserialize(ByteView bytes);

Packet make_udp_packet(Address src, Address dst, UdpPayload payload);
Packet make_olsr_packet(Address src, OlsrMessage message);

std::string to_hex(ByteView bytes);

/// `<time_us> <node_id> <TX|RX|FWD> <hex bytes>`
std::string hex_trace_line(std::int64_t time_us, std::uint32_t node_id, std::string_view action,
                           ByteView bytes);

}  // namespace seclab::wire
