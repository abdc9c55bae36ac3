// Constant-bit-rate UDP "video" source and the matching sink.

#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <vector>

#include "seclab/crypto.hpp"
#include "seclab/sim_time.hpp"
#include "seclab/wire.hpp"

namespace seclab::traffic {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline constexpr std::size_t kDefaultPayloadBytes = 1316;
inline constexpr double kDefaultRatePps = 25.0;
inline constexpr std::uint16_t kVideoPort = 1234;

struct StreamConfig {
  wire::Address src;
  wire::Address dst;
  std::uint32_t stream_id = 1;
  /// UDP datagram size including the 12-byte stream tag.
  std::size_t payload_bytes = kDefaultPayloadBytes;
  double rate_pps = kDefaultRatePps;
  SimTime duration = seconds(300);

  /// Throws ConfigError when an invariant does not hold.
  void validate() const;
  std::uint64_t packet_count() const;
  /// Offset of emission `index` from the stream start.
  SimTime offset(std::uint64_t index) const;
};

struct Emission {
  std::uint64_t packet_id = 0;
  SimTime time{0};
};

/// floor(rate * duration) emissions at uniform spacing, ids 0, 1, 2, ...
std::vector<Emission> generate(const StreamConfig& config, SimTime start);

/// Pseudorandom datagram for emission `packet_id`.
wire::Packet make_packet(const StreamConfig& config, std::uint64_t packet_id, crypto::Rng& rng);

struct Receipt {
  std::uint64_t packet_id = 0;
  SimTime rx_time{0};
  bool duplicate = false;
};

class StreamSink {
 public:
  explicit StreamSink(std::uint32_t stream_id = 1) : stream_id_(stream_id) {}

  /// Records a delivered stream packet; returns the receipt, flagged when
  /// the packet id was already seen.
  Receipt sink(const wire::UdpPayload& payload, SimTime now);

  std::uint32_t stream_id() const { return stream_id_; }
  const std::vector<Receipt>& receipts() const { return receipts_; }
  std::size_t unique_count() const { return first_seen_.size(); }
  std::size_t duplicate_count() const { return receipts_.size() - first_seen_.size(); }
  bool received(std::uint64_t packet_id) const { return first_seen_.contains(packet_id); }

 private:
  std::uint32_t stream_id_;
  std::vector<Receipt> receipts_;
  std::map<std::uint64_t, SimTime> first_seen_;
};

}  // namespace seclab::traffic
