// Post-processing over simulator traces: per-node totals and rates,
// sampled end-to-end delay and the CSV / series report files.

#pragma once

#include <cstdint>
#include <map>
#include <ostream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "seclab/sim_time.hpp"
#include "seclab/simnet.hpp"

namespace seclab::metrics {

struct NodeCounters {
  std::uint64_t tx_packets = 0;
  std::uint64_t rx_packets = 0;
  std::uint64_t fwd_packets = 0;
  std::uint64_t tx_bytes = 0;
  std::uint64_t rx_bytes = 0;
  std::uint64_t fwd_bytes = 0;
  std::map<sim::DropCause, std::uint64_t> drops;

  std::uint64_t captured_packets() const { return tx_packets + rx_packets + fwd_packets; }
  std::uint64_t captured_bytes() const { return tx_bytes + rx_bytes + fwd_bytes; }
};

/// Rates are over everything a capture on the node would see: packets it
/// originated, received and forwarded.
struct NodeSummary {
  NodeCounters counters;
  double avg_packet_size_bytes = 0.0;
  double bit_rate_bps = 0.0;
  double packet_rate_pps = 0.0;
};

/// Counts records with begin <= time < end; rates divide by (end - begin).
std::map<sim::NodeId, NodeSummary> summarize(const std::vector<sim::TraceRecord>& trace,
                                             SimTime begin, SimTime end);

struct StampedPacket {
  std::uint64_t packet_id = 0;
  SimTime time{0};
};

struct DelaySample {
  std::uint64_t packet_id = 0;
  SimTime send_time{0};
  SimTime recv_time{0};

  SimTime delay() const { return recv_time - send_time; }
  bool operator==(const DelaySample&) const = default;
};

struct DelaySampling {
  std::vector<DelaySample> samples;
  /// Ids picked by the stride that were never delivered.
  std::vector<std::uint64_t> skipped_ids;
  bool short_sample = false;
};

/// Takes the sent packets at indices 0, spacing, 2*spacing, ... and pairs
/// each with its receipt. A lost pick moves on to the next sent packet
/// inside the same stride. With fewer than count*spacing deliveries only
/// the complete strides are used and the result is flagged short.
DelaySampling sample_delays(const std::vector<StampedPacket>& sent,
                            const std::vector<StampedPacket>& received, std::size_t count = 20,
                            std::size_t spacing = 10);

class NoSamples : public std::domain_error {
 public:
  NoSamples() : std::domain_error("no delay samples") {}
};

/// Arithmetic mean in microseconds.
double average_delay_us(const std::vector<DelaySample>& samples);

struct ReportRow {
  std::string scheme;
  std::string scenario;
  std::string node_role;
  std::uint64_t tx_packets = 0;
  std::uint64_t rx_packets = 0;
  std::uint64_t fwd_packets = 0;
  double avg_packet_size_bytes = 0.0;
  double bit_rate_bps = 0.0;
  double packet_rate_pps = 0.0;
  std::optional<double> avg_delay_us;

  bool operator==(const ReportRow&) const = default;
};

inline constexpr const char* kCsvHeader =
    "scheme,scenario,node_role,tx_packets,rx_packets,fwd_packets,avg_packet_size_bytes,"
    "bit_rate_bps,packet_rate_pps,avg_delay_us";

ReportRow make_row(std::string scheme, std::string scenario, std::string node_role,
                   const NodeSummary& summary, std::optional<double> avg_delay_us);

void write_csv(std::ostream& out, const std::vector<ReportRow>& rows);
std::vector<ReportRow> read_csv(std::istream& in);

/// `index,packet_id,delay_us` per sample.
void write_delay_series(std::ostream& out, const std::vector<DelaySample>& samples);

}  // namespace seclab::metrics
