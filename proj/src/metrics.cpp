#include "seclab/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <istream>
#include <sstream>

namespace seclab::metrics {
namespace {

std::string fixed3(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

std::map<sim::NodeId, NodeSummary> summarize(const std::vector<sim::TraceRecord>& trace,
                                             SimTime begin, SimTime end) {
  std::map<sim::NodeId, NodeSummary> out;
  for (const auto& r : trace) {
    if (r.time < begin || r.time >= end) continue;
    auto& c = out[r.node].counters;
    switch (r.action) {
      case sim::Action::tx:
        ++c.tx_packets;
        c.tx_bytes += r.bytes;
        break;
      case sim::Action::rx:
        ++c.rx_packets;
        c.rx_bytes += r.bytes;
        break;
      case sim::Action::fwd:
        ++c.fwd_packets;
        c.fwd_bytes += r.bytes;
        break;
      case sim::Action::drop:
        if (r.cause) ++c.drops[*r.cause];
        break;
      case sim::Action::send:
      case sim::Action::deliver:
        break;
    }
  }
  double window_s = to_seconds(end - begin);
  for (auto& [id, s] : out) {
    auto packets = s.counters.captured_packets();
    auto bytes = s.counters.captured_bytes();
    if (packets > 0) s.avg_packet_size_bytes = static_cast<double>(bytes) / packets;
    if (window_s > 0.0) {
      s.bit_rate_bps = 8.0 * static_cast<double>(bytes) / window_s;
      s.packet_rate_pps = static_cast<double>(packets) / window_s;
    }
  }
  return out;
}

DelaySampling sample_delays(const std::vector<StampedPacket>& sent,
                            const std::vector<StampedPacket>& received, std::size_t count,
                            std::size_t spacing) {
  if (spacing == 0) throw std::invalid_argument("spacing must be positive");
  std::map<std::uint64_t, SimTime> first_rx;
  for (const auto& r : received) first_rx.emplace(r.packet_id, r.time);

  std::size_t delivered = 0;
  for (const auto& s : sent) delivered += first_rx.contains(s.packet_id) ? 1 : 0;

  DelaySampling out;
  std::size_t strides = count;
  if (delivered < count * spacing) {
    out.short_sample = true;
    strides = delivered / spacing;
  }
  for (std::size_t k = 0; k < strides; ++k) {
    std::size_t stop = std::min((k + 1) * spacing, sent.size());
    for (std::size_t j = k * spacing; j < stop; ++j) {
      auto it = first_rx.find(sent[j].packet_id);
      if (it == first_rx.end()) {
        out.skipped_ids.push_back(sent[j].packet_id);
        continue;
      }
      out.samples.push_back({sent[j].packet_id, sent[j].time, it->second});
      break;
    }
  }
  return out;
}

double average_delay_us(const std::vector<DelaySample>& samples) {
  if (samples.empty()) throw NoSamples();
  std::int64_t total = 0;
  for (const auto& s : samples) total += s.delay().count();
  return static_cast<double>(total) / static_cast<double>(samples.size());
}

ReportRow make_row(std::string scheme, std::string scenario, std::string node_role,
                   const NodeSummary& summary, std::optional<double> avg_delay_us) {
  ReportRow row;
  row.scheme = std::move(scheme);
  row.scenario = std::move(scenario);
  row.node_role = std::move(node_role);
  row.tx_packets = summary.counters.tx_packets;
  row.rx_packets = summary.counters.rx_packets;
  row.fwd_packets = summary.counters.fwd_packets;
  row.avg_packet_size_bytes = summary.avg_packet_size_bytes;
  row.bit_rate_bps = summary.bit_rate_bps;
  row.packet_rate_pps = summary.packet_rate_pps;
  row.avg_delay_us = avg_delay_us;
  return row;
}

void write_csv(std::ostream& out, const std::vector<ReportRow>& rows) {
  out << kCsvHeader << '\n';
  for (const auto& r : rows) {
    out << r.scheme << ',' << r.scenario << ',' << r.node_role << ',' << r.tx_packets << ','
        << r.rx_packets << ',' << r.fwd_packets << ',' << fixed3(r.avg_packet_size_bytes) << ','
        << fixed3(r.bit_rate_bps) << ',' << fixed3(r.packet_rate_pps) << ','
        << (r.avg_delay_us ? fixed3(*r.avg_delay_us) : std::string{}) << '\n';
  }
}

std::vector<ReportRow> read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader)
    throw std::runtime_error("report: unexpected CSV header");
  std::vector<ReportRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = split_csv_line(line);
    if (f.size() != 10) throw std::runtime_error("report: expected 10 fields: " + line);
    ReportRow r;
    r.scheme = f[0];
    r.scenario = f[1];
    r.node_role = f[2];
    r.tx_packets = std::stoull(f[3]);
    r.rx_packets = std::stoull(f[4]);
    r.fwd_packets = std::stoull(f[5]);
    r.avg_packet_size_bytes = std::stod(f[6]);
    r.bit_rate_bps = std::stod(f[7]);
    r.packet_rate_pps = std::stod(f[8]);
    if (!f[9].empty()) r.avg_delay_us = std::stod(f[9]);
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_delay_series(std::ostream& out, const std::vector<DelaySample>& samples) {
  out << "index,packet_id,delay_us\n";
  for (std::size_t i = 0; i < samples.size(); ++i)
    out << i << ',' << samples[i].packet_id << ',' << samples[i].delay().count() << '\n';
}

}  // namespace seclab::metrics
