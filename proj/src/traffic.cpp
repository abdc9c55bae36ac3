#include "seclab/traffic.hpp"

#include <cmath>
#include <string>

namespace seclab::traffic {

void StreamConfig::validate() const {
  if (payload_bytes < wire::kStreamTagBytes)
    throw ConfigError("payload_bytes must be at least " + std::to_string(wire::kStreamTagBytes) +
                      " (stream tag)");
  if (payload_bytes + wire::kUdpHeaderBytes > 0xffff - 512)
    throw ConfigError("payload_bytes too large for a single datagram");
  if (!(rate_pps > 0.0) || rate_pps > 1e6) throw ConfigError("rate_pps must be in (0, 1e6]");
  if (duration <= SimTime::zero()) throw ConfigError("duration must be positive");
}

std::uint64_t StreamConfig::packet_count() const {
  // Small epsilon so that e.g. 25 pps x 0.04 s counts as exactly one.
  double n = rate_pps * to_seconds(duration);
  return static_cast<std::uint64_t>(std::floor(n + 1e-9));
}

SimTime StreamConfig::offset(std::uint64_t index) const {
  return SimTime{std::llround(static_cast<double>(index) * 1e6 / rate_pps)};
}

std::vector<Emission> generate(const StreamConfig& config, SimTime start) {
  config.validate();
  std::vector<Emission> out;
  std::uint64_t n = config.packet_count();
  out.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) out.push_back({i, start + config.offset(i)});
  return out;
}

wire::Packet make_packet(const StreamConfig& config, std::uint64_t packet_id, crypto::Rng& rng) {
  wire::UdpPayload udp;
  udp.src_port = kVideoPort;
  udp.dst_port = kVideoPort;
  udp.stream_id = config.stream_id;
  udp.packet_id = packet_id;
  udp.body = crypto::random_bytes(config.payload_bytes - wire::kStreamTagBytes, rng);
  return wire::make_udp_packet(config.src, config.dst, std::move(udp));
}

Receipt StreamSink::sink(const wire::UdpPayload& payload, SimTime now) {
  Receipt r{payload.packet_id, now, false};
  auto [it, inserted] = first_seen_.emplace(payload.packet_id, now);
  r.duplicate = !inserted;
  receipts_.push_back(r);
  return r;
}

}  // namespace seclab::traffic
