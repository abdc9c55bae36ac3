#include "seclab/wire.hpp"

#include <algorithm>
#include <charconv>

namespace seclab::wire {
namespace {

class Writer {
 public:
  explicit Writer(Bytes& out) : out_(out) {}

  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) {
    out_.push_back(static_cast<std::uint8_t>(v >> 8));
    out_.push_back(static_cast<std::uint8_t>(v));
  }
  void u32(std::uint32_t v) {
    u16(static_cast<std::uint16_t>(v >> 16));
    u16(static_cast<std::uint16_t>(v));
  }
  void u64(std::uint64_t v) {
    u32(static_cast<std::uint32_t>(v >> 32));
    u32(static_cast<std::uint32_t>(v));
  }
  void bytes(ByteView v) { out_.insert(out_.end(), v.begin(), v.end()); }

 private:
  Bytes& out_;
};

class Reader {
 public:
  Reader(ByteView in, const char* layer) : in_(in), layer_(layer) {}

  std::uint8_t u8() { return take(1)[0]; }
  std::uint16_t u16() {
    auto b = take(2);
    return static_cast<std::uint16_t>(b[0] << 8 | b[1]);
  }
  std::uint32_t u32() {
    std::uint32_t hi = u16();
    return hi << 16 | u16();
  }
  std::uint64_t u64() {
    std::uint64_t hi = u32();
    return hi << 32 | u32();
  }
  ByteView take(std::size_t n) {
    if (remaining() < n)
      throw DecodeError(std::string(layer_) + ": truncated (need " + std::to_string(n) +
                        " bytes, have " + std::to_string(remaining()) + ")");
    auto out = in_.subspan(pos_, n);
    pos_ += n;
    return out;
  }
  ByteView rest() { return take(remaining()); }
  std::size_t remaining() const { return in_.size() - pos_; }
  void expect_end() const {
    if (remaining() != 0)
      throw DecodeError(std::string(layer_) + ": " + std::to_string(remaining()) +
                        " trailing bytes");
  }

 private:
  ByteView in_;
  std::size_t pos_ = 0;
  const char* layer_;
};

Protocol decode_protocol(std::uint8_t code, const char* layer) {
  auto p = protocol_from_code(code);
  if (!p)
    throw DecodeError(std::string(layer) + ": unknown protocol code " + std::to_string(code));
  return *p;
}

constexpr std::uint8_t kVersionIhl = 0x45;
constexpr std::uint8_t kHelloType = 1;
constexpr std::uint8_t kTcType = 2;
constexpr std::size_t kOlsrHeaderBytes = 12;

std::uint8_t link_code(const LinkBlock& b) {
  return static_cast<std::uint8_t>(static_cast<unsigned>(b.neighbor) << 2 |
                                   static_cast<unsigned>(b.link));
}

std::size_t olsr_body_size(const OlsrMessage& m) {
  if (const auto* hello = std::get_if<HelloMessage>(&m.body)) {
    std::size_t n = 4;
    for (const auto& block : hello->blocks) n += 4 + 4 * block.addresses.size();
    return n;
  }
  return 4 + 4 * std::get<TcMessage>(m.body).advertised.size();
}

void write_olsr(Writer& w, const OlsrMessage& m) {
  std::size_t size = kOlsrHeaderBytes + olsr_body_size(m);
  if (size > 0xffff) throw EncodeError("olsr: message too large");
  w.u8(m.is_hello() ? kHelloType : kTcType);
  w.u8(m.vtime_s);
  w.u16(static_cast<std::uint16_t>(size));
  w.u32(m.originator.value());
  w.u8(m.ttl);
  w.u8(m.hop_count);
  w.u16(m.message_seq);
  if (const auto* hello = std::get_if<HelloMessage>(&m.body)) {
    w.u16(0);
    w.u8(hello->htime_s);
    w.u8(hello->willingness);
    for (const auto& block : hello->blocks) {
      w.u8(link_code(block));
      w.u8(0);
      w.u16(static_cast<std::uint16_t>(4 + 4 * block.addresses.size()));
      for (auto a : block.addresses) w.u32(a.value());
    }
  } else {
    const auto& tc = std::get<TcMessage>(m.body);
    w.u16(tc.ansn);
    w.u16(0);
    for (auto a : tc.advertised) w.u32(a.value());
  }
}

OlsrMessage read_olsr(ByteView bytes) {
  Reader r(bytes, "olsr");
  OlsrMessage m;
  std::uint8_t type = r.u8();
  m.vtime_s = r.u8();
  std::uint16_t size = r.u16();
  if (size != bytes.size()) throw DecodeError("olsr: message size field mismatch");
  m.originator = Address{r.u32()};
  m.ttl = r.u8();
  m.hop_count = r.u8();
  m.message_seq = r.u16();
  if (type == kHelloType) {
    HelloMessage hello;
    if (r.u16() != 0) throw DecodeError("olsr: nonzero hello reserved field");
    hello.htime_s = r.u8();
    hello.willingness = r.u8();
    while (r.remaining() > 0) {
      LinkBlock block;
      std::uint8_t code = r.u8();
      if (r.u8() != 0) throw DecodeError("olsr: nonzero link block reserved field");
      std::uint16_t block_size = r.u16();
      if (block_size < 4 || block_size % 4 != 0)
        throw DecodeError("olsr: bad link block size");
      unsigned link = code & 0x3u;
      unsigned neighbor = code >> 2;
      if (neighbor > 2) throw DecodeError("olsr: bad neighbor type");
      block.link = static_cast<LinkType>(link);
      block.neighbor = static_cast<NeighborType>(neighbor);
      for (std::size_t i = 0; i < (block_size - 4u) / 4u; ++i)
        block.addresses.emplace_back(r.u32());
      hello.blocks.push_back(std::move(block));
    }
    m.body = std::move(hello);
  } else if (type == kTcType) {
    TcMessage tc;
    tc.ansn = r.u16();
    if (r.u16() != 0) throw DecodeError("olsr: nonzero tc reserved field");
    if (r.remaining() % 4 != 0) throw DecodeError("olsr: ragged tc address list");
    while (r.remaining() > 0) tc.advertised.emplace_back(r.u32());
    m.body = std::move(tc);
  } else {
    throw DecodeError("olsr: unknown message type " + std::to_string(type));
  }
  return m;
}

Protocol transport_code(const Transport& t) {
  if (std::holds_alternative<UdpPayload>(t)) return Protocol::udp;
  if (std::holds_alternative<OlsrMessage>(t)) return Protocol::olsr;
  throw EncodeError("no cleartext transport");
}

}  // namespace

Address Address::parse(std::string_view text) {
  if (auto a = try_parse(text)) return *a;
  throw DecodeError("bad address '" + std::string(text) + "'");
}

std::optional<Address> Address::try_parse(std::string_view text) {
  std::uint32_t value = 0;
  const char* p = text.data();
  const char* end = text.data() + text.size();
  for (int octet = 0; octet < 4; ++octet) {
    if (octet > 0) {
      if (p == end || *p != '.') return std::nullopt;
      ++p;
    }
    unsigned part = 0;
    auto [next, ec] = std::from_chars(p, end, part);
    if (ec != std::errc{} || part > 255 || next - p > 3) return std::nullopt;
    value = value << 8 | part;
    p = next;
  }
  if (p != end) return std::nullopt;
  return Address{value};
}

std::string Address::to_string() const {
  return std::to_string(value_ >> 24) + '.' + std::to_string(value_ >> 16 & 0xff) + '.' +
         std::to_string(value_ >> 8 & 0xff) + '.' + std::to_string(value_ & 0xff);
}

std::optional<Protocol> protocol_from_code(std::uint8_t code) {
  switch (code) {
    case 17: return Protocol::udp;
    case 50: return Protocol::esp;
    case 51: return Protocol::ah;
    case 138: return Protocol::olsr;
    default: return std::nullopt;
  }
}

std::string_view to_string(Protocol p) {
  switch (p) {
    case Protocol::udp: return "udp";
    case Protocol::esp: return "esp";
    case Protocol::ah: return "ah";
    case Protocol::olsr: return "olsr";
  }
  return "?";
}

ByteView EspEnvelope::iv(std::size_t block) const {
  return ByteView(data).first(std::min(block, data.size()));
}

ByteView EspEnvelope::ciphertext(std::size_t block) const {
  return ByteView(data).subspan(std::min(block, data.size()));
}

std::optional<Protocol> Packet::transport_protocol() const {
  if (std::holds_alternative<UdpPayload>(transport)) return Protocol::udp;
  if (std::holds_alternative<OlsrMessage>(transport)) return Protocol::olsr;
  return std::nullopt;
}

std::size_t transport_size(const Transport& t) {
  if (const auto* udp = std::get_if<UdpPayload>(&t)) return kUdpHeaderBytes + udp->datagram_size();
  if (const auto* olsr = std::get_if<OlsrMessage>(&t)) return kOlsrHeaderBytes + olsr_body_size(*olsr);
  return 0;
}

std::size_t packet_size(const Packet& p) {
  std::size_t n = kNetHeaderBytes + transport_size(p.transport);
  if (p.ah) n += kAhHeaderBytes;
  if (p.esp) n += kEspHeaderBytes + p.esp->data.size();
  return n;
}

void update_length(Packet& p) {
  std::size_t n = packet_size(p);
  if (n > 0xffff) throw EncodeError("packet exceeds 65535 bytes");
  p.net.total_length = static_cast<std::uint16_t>(n);
}

Bytes serialize_transport(const Transport& t) {
  Bytes out;
  out.reserve(transport_size(t));
  Writer w(out);
  if (const auto* udp = std::get_if<UdpPayload>(&t)) {
    std::size_t len = kUdpHeaderBytes + udp->datagram_size();
    if (len > 0xffff) throw EncodeError("udp: datagram too large");
    w.u16(udp->src_port);
    w.u16(udp->dst_port);
    w.u16(static_cast<std::uint16_t>(len));
    w.u16(0);
    w.u32(udp->stream_id);
    w.u64(udp->packet_id);
    w.bytes(udp->body);
  } else if (const auto* olsr = std::get_if<OlsrMessage>(&t)) {
    write_olsr(w, *olsr);
  } else {
    throw EncodeError("no cleartext transport to serialize");
  }
  return out;
}

Transport deserialize_transport(ByteView bytes, Protocol protocol) {
  if (protocol == Protocol::olsr) return read_olsr(bytes);
  if (protocol != Protocol::udp)
    throw DecodeError("transport: " + std::string(to_string(protocol)) + " is not a transport");
  Reader r(bytes, "udp");
  UdpPayload udp;
  udp.src_port = r.u16();
  udp.dst_port = r.u16();
  std::uint16_t len = r.u16();
  if (len != bytes.size()) throw DecodeError("udp: length field mismatch");
  if (r.u16() != 0) throw DecodeError("udp: nonzero checksum field");
  udp.stream_id = r.u32();
  udp.packet_id = r.u64();
  auto body = r.rest();
  udp.body.assign(body.begin(), body.end());
  return udp;
}

Bytes serialize(const Packet& p) {
  // Protocol chain: net -> [ah] -> [esp] -> transport.
  Protocol inner;
  if (p.esp) {
    if (!std::holds_alternative<std::monostate>(p.transport))
      throw EncodeError("esp packet must not carry a cleartext transport");
    inner = Protocol::esp;
  } else {
    inner = transport_code(p.transport);
  }
  if (p.ah) {
    if (p.net.protocol != Protocol::ah) throw EncodeError("net protocol must be ah");
    if (p.ah->next_protocol != inner) throw EncodeError("ah next_protocol mismatch");
    if (p.ah->payload_len != kAhHeaderBytes / 4 - 2) throw EncodeError("ah payload_len invalid");
  } else if (p.net.protocol != inner) {
    throw EncodeError("net protocol does not match inner layer");
  }
  std::size_t expected = packet_size(p);
  if (p.net.total_length != expected)
    throw EncodeError("total_length " + std::to_string(p.net.total_length) +
                      " != layer size " + std::to_string(expected));

  Bytes out;
  out.reserve(expected);
  Writer w(out);
  w.u8(kVersionIhl);
  w.u8(0);
  w.u16(p.net.total_length);
  w.u32(0);
  w.u8(p.net.ttl);
  w.u8(static_cast<std::uint8_t>(p.net.protocol));
  w.u16(0);
  w.u32(p.net.src.value());
  w.u32(p.net.dst.value());
  if (p.ah) {
    w.u8(static_cast<std::uint8_t>(p.ah->next_protocol));
    w.u8(p.ah->payload_len);
    w.u16(0);
    w.u32(p.ah->spi);
    w.u32(p.ah->sequence);
    w.bytes(p.ah->icv);
  }
  if (p.esp) {
    w.u32(p.esp->spi);
    w.u32(p.esp->sequence);
    w.bytes(p.esp->data);
  } else {
    w.bytes(serialize_transport(p.transport));
  }
  return out;
}

Packet deserialize(ByteView bytes) {
  Reader r(bytes, "net");
  Packet p;
  if (r.u8() != kVersionIhl) throw DecodeError("net: bad version/ihl");
  if (r.u8() != 0) throw DecodeError("net: nonzero reserved byte");
  p.net.total_length = r.u16();
  if (p.net.total_length != bytes.size())
    throw DecodeError("net: total_length " + std::to_string(p.net.total_length) +
                      " != buffer " + std::to_string(bytes.size()));
  if (r.u32() != 0) throw DecodeError("net: nonzero reserved word");
  p.net.ttl = r.u8();
  p.net.protocol = decode_protocol(r.u8(), "net");
  if (r.u16() != 0) throw DecodeError("net: nonzero checksum field");
  p.net.src = Address{r.u32()};
  p.net.dst = Address{r.u32()};

  Protocol next = p.net.protocol;
  if (next == Protocol::ah) {
    AhHeader ah;
    ah.next_protocol = decode_protocol(r.u8(), "ah");
    if (ah.next_protocol == Protocol::ah) throw DecodeError("ah: nested ah");
    ah.payload_len = r.u8();
    if (ah.payload_len != kAhHeaderBytes / 4 - 2)
      throw DecodeError("ah: unsupported payload_len " + std::to_string(ah.payload_len));
    if (r.u16() != 0) throw DecodeError("ah: nonzero reserved field");
    ah.spi = r.u32();
    ah.sequence = r.u32();
    auto icv = r.take(kIcvBytes);
    std::copy(icv.begin(), icv.end(), ah.icv.begin());
    next = ah.next_protocol;
    p.ah = ah;
  }
  if (next == Protocol::esp) {
    EspEnvelope esp;
    esp.spi = r.u32();
    esp.sequence = r.u32();
    auto data = r.rest();
    esp.data.assign(data.begin(), data.end());
    p.esp = std::move(esp);
    return p;
  }
  p.transport = deserialize_transport(r.rest(), next);
  return p;
}

Packet make_udp_packet(Address src, Address dst, UdpPayload payload) {
  Packet p;
  p.net.src = src;
  p.net.dst = dst;
  p.net.protocol = Protocol::udp;
  p.transport = std::move(payload);
  update_length(p);
  return p;
}

Packet make_olsr_packet(Address src, OlsrMessage message) {
  Packet p;
  p.net.src = src;
  p.net.dst = Address::broadcast();
  p.net.protocol = Protocol::olsr;
  p.net.ttl = 1;
  p.transport = std::move(message);
  update_length(p);
  return p;
}

std::string to_hex(ByteView bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (auto b : bytes) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0xf]);
  }
  return out;
}

std::string hex_trace_line(std::int64_t time_us, std::uint32_t node_id, std::string_view action,
                           ByteView bytes) {
  std::string line = std::to_string(time_us);
  line += ' ';
  line += std::to_string(node_id);
  line += ' ';
  line += action;
  line += ' ';
  line += to_hex(bytes);
  return line;
}

}  // namespace seclab::wire
