// Deterministic discrete-event network: static in-range adjacency, OLSR
// agents on every node, IPsec at the stream endpoints and plain IP
// forwarding in between.

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "seclab/crypto.hpp"
#include "seclab/ipsec.hpp"
#include "seclab/olsr.hpp"
#include "seclab/sim_time.hpp"
#include "seclab/traffic.hpp"
#include "seclab/wire.hpp"

namespace seclab::sim {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

using NodeId = std::uint32_t;

inline constexpr std::uint64_t kDefaultBandwidthBps = 6'000'000;
inline constexpr SimTime kDefaultPropagation{5};
inline constexpr SimTime kDefaultForwardProcessing{200};

struct NodeSpec {
  NodeId id = 0;
  wire::Address address;
};

struct LinkSpec {
  NodeId a = 0;
  NodeId b = 0;
  std::uint64_t bandwidth_bps = kDefaultBandwidthBps;
  SimTime propagation = kDefaultPropagation;
  /// Independent per-transmission loss probability; 0 disables loss.
  double loss = 0.0;
};

class Topology {
 public:
  void add_node(NodeId id, wire::Address address);
  void add_link(LinkSpec link);

  const std::vector<NodeSpec>& nodes() const { return nodes_; }
  const std::vector<LinkSpec>& links() const { return links_; }
  const NodeSpec& node(NodeId id) const;
  std::optional<NodeId> node_for(wire::Address address) const;
  const LinkSpec* link(NodeId a, NodeId b) const;
  std::vector<NodeId> neighbors(NodeId id) const;
  bool connected() const;

  /// Line format: `node <id> <address>` and
  /// `link <id> <id> [bandwidth_bps] [prop_us]`; '#' comments.
  static Topology parse(std::string_view text);
  std::string render() const;

  /// 192.168.2.12 <-> 192.168.2.22
  static Topology single_hop();
  /// 192.168.2.12 <-> 192.168.2.2 <-> 192.168.2.22
  static Topology multi_hop();

 private:
  std::vector<NodeSpec> nodes_;
  std::vector<LinkSpec> links_;
};

/// ceil(bytes * 8 / bandwidth) in whole microseconds.
SimTime serialization_delay(std::size_t bytes, std::uint64_t bandwidth_bps);

enum class DelayMode { parametric, measured };

struct AlgorithmCost {
  double setup_us = 0.0;
  double per_byte_ns = 0.0;
};

/// Turns the crypto work done for one packet into simulated processing
/// time. Parametric mode prices each operation from a per-algorithm table;
/// measured mode charges the wall-clock time the primitive actually took.
class DelayModel {
 public:
  DelayModel();

  DelayMode mode = DelayMode::parametric;
  SimTime forward_processing = kDefaultForwardProcessing;

  const AlgorithmCost& cost(const crypto::Algorithm& alg) const { return costs_.at(alg); }
  void set_cost(const crypto::Algorithm& alg, AlgorithmCost cost);

  SimTime charge(const ipsec::CostLog& log) const;

 private:
  std::map<crypto::Algorithm, AlgorithmCost> costs_;
};

enum class EventKind { emit, link_delivery, timer, app_delivery };

struct StreamTag {
  std::uint32_t stream_id = 0;
  std::uint64_t packet_id = 0;

  bool operator==(const StreamTag&) const = default;
};

struct Event {
  SimTime time{0};
  std::uint64_t seq = 0;
  EventKind kind = EventKind::timer;
  std::optional<StreamTag> tag;
  std::function<void()> fire;
};

/// Min-heap on (time, insertion order).
class EventQueue {
 public:
  void push(SimTime time, EventKind kind, std::function<void()> fire,
            std::optional<StreamTag> tag = std::nullopt);
  Event pop();
  bool empty() const { return heap_.empty(); }
  std::size_t size() const { return heap_.size(); }
  SimTime next_time() const { return heap_.front().time; }
  const std::vector<Event>& pending() const { return heap_; }

 private:
  std::vector<Event> heap_;
  std::uint64_t next_seq_ = 0;
};

enum class Action { send, tx, rx, fwd, deliver, drop };

enum class DropCause {
  no_route,
  filtered,
  ttl_expired,
  out_of_range,
  link_loss,
  no_sa,
  integrity,
  replay,
  padding,
  policy,
  decode,
  no_sa_for_policy,
};

std::string_view to_string(Action a);
std::string_view to_string(DropCause c);
DropCause drop_cause_for(ipsec::RejectCause c);

struct TraceRecord {
  SimTime time{0};
  NodeId node = 0;
  Action action = Action::tx;
  wire::Protocol protocol = wire::Protocol::udp;
  std::uint32_t bytes = 0;
  std::optional<StreamTag> tag;
  std::optional<DropCause> cause;
};

/// `<time_us> <node> <action> <protocol> <bytes> <stream:packet|-> <cause|->`
std::string format(const TraceRecord& r);

struct HopCost {
  SimTime serialization{0};
  SimTime propagation{0};
  SimTime processing{0};

  SimTime total() const { return serialization + propagation + processing; }
};

/// A packet in flight plus simulator-side metadata that never goes on the
/// wire.
struct Frame {
  wire::Packet packet;
  std::optional<StreamTag> tag;
  SimTime send_time{0};
  std::vector<HopCost> hops;
};

struct DeliveryRecord {
  StreamTag tag;
  SimTime send_time{0};
  SimTime recv_time{0};
  std::vector<HopCost> hops;
};

struct StreamStats {
  std::uint64_t sent = 0;
  std::map<DropCause, std::uint64_t> drops;

  std::uint64_t dropped() const;
};

struct SimConfig {
  std::uint64_t seed = 1;
  olsr::Timing timing;
  DelayModel delay;
  bool naive_flooding = false;
  bool hex_trace = false;
};

/// Independent, reproducible generator for one (seed, purpose, index).
crypto::Rng derive_rng(std::uint64_t seed, std::uint32_t purpose, std::uint32_t index);

class Simulator {
 public:
  Simulator(Topology topology, SimConfig config);
  // Scheduled events capture `this`.
  Simulator(const Simulator&) = delete;
  Simulator& operator=(const Simulator&) = delete;

  void set_security(NodeId node, ipsec::SecurityDatabases db);
  ipsec::SecurityDatabases* security(NodeId node);
  void set_protocol_filter(NodeId node, ipsec::ProtocolFilter filter);

  /// Schedules every emission of the stream starting at `start`.
  void add_stream(const traffic::StreamConfig& config, SimTime start);

  void schedule(SimTime at, EventKind kind, std::function<void()> fire,
                std::optional<StreamTag> tag = std::nullopt);
  /// Fires every event with time <= end, in order.
  void run_until(SimTime end);
  SimTime now() const { return now_; }

  /// Hands `frame` to the link towards `next_hop` after `processing`.
  void transmit(NodeId node, Frame frame, NodeId next_hop, SimTime processing);
  /// Arrival of a frame at `node` as if heard from `from`.
  void node_receive(NodeId node, NodeId from, Frame frame);

  const Topology& topology() const { return topology_; }
  const SimConfig& config() const { return config_; }
  const olsr::Agent& agent(NodeId node) const;
  const std::vector<TraceRecord>& trace() const { return trace_; }
  const std::vector<std::string>& hex_trace() const { return hex_trace_; }
  std::string trace_text() const;
  std::string trace_digest() const;

  const std::vector<DeliveryRecord>& deliveries() const { return deliveries_; }
  const traffic::StreamSink& sink(std::uint32_t stream_id) const;
  const StreamStats& stream_stats(std::uint32_t stream_id) const;
  std::uint64_t in_flight(std::uint32_t stream_id) const;
  /// sent == delivered + in flight + dropped for the stream.
  bool conservation_holds(std::uint32_t stream_id) const;
  std::uint64_t olsr_retransmissions() const;

 private:
  struct Node {
    NodeSpec spec;
    olsr::Agent agent;
    std::optional<ipsec::SecurityDatabases> security;
    ipsec::ProtocolFilter filter;
    crypto::Rng iv_rng;
  };

  Node& node(NodeId id);
  void record(NodeId node, Action action, const wire::Packet& packet, std::size_t bytes,
              const std::optional<StreamTag>& tag, std::optional<DropCause> cause = std::nullopt);
  void drop(NodeId node, const Frame& frame, DropCause cause);
  void broadcast(NodeId node, wire::Packet packet);
  void hello_timer(NodeId node);
  void tc_timer(NodeId node);
  void emit(std::uint32_t stream_id, std::uint64_t packet_id);
  void deliver_local(NodeId node, Frame frame);
  void warm_up_primitives();

  Topology topology_;
  SimConfig config_;
  std::vector<Node> nodes_;
  EventQueue queue_;
  SimTime now_{0};
  crypto::Rng loss_rng_;

  struct Stream {
    traffic::StreamConfig config;
    NodeId source = 0;
    crypto::Rng payload_rng;
    traffic::StreamSink sink;
    StreamStats stats;
  };
  std::map<std::uint32_t, Stream> streams_;

  std::vector<TraceRecord> trace_;
  std::vector<std::string> hex_trace_;
  std::vector<DeliveryRecord> deliveries_;
};

/// One line per route: `<node> <dest> <nexthop> <hops>`, sorted.
std::string dump_routes(const Simulator& sim);

}  // namespace seclab::sim
