#include "seclab/simnet.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <deque>
#include <set>
#include <sstream>

namespace seclab::sim {
namespace {

enum RngPurpose : std::uint32_t {
  kPurposePhase = 1,
  kPurposeIv = 2,
  kPurposePayload = 3,
  kPurposeLoss = 4,
};

SimTime ceil_us(double ns) {
  return SimTime{static_cast<std::int64_t>(std::ceil(ns / 1000.0 - 1e-9))};
}

std::vector<std::string_view> split_words(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

template <class T>
T parse_number(std::string_view text, std::size_t line, const char* what) {
  T value{};
  auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || p != text.data() + text.size())
    throw ConfigError("topology:" + std::to_string(line) + ": invalid " + what + " '" +
                      std::string(text) + "'");
  return value;
}

}  // namespace

void Topology::add_node(NodeId id, wire::Address address) {
  for (const auto& n : nodes_) {
    if (n.id == id) throw ConfigError("duplicate node id " + std::to_string(id));
    if (n.address == address) throw ConfigError("duplicate node address " + address.to_string());
  }
  nodes_.push_back({id, address});
}

void Topology::add_link(LinkSpec link) {
  if (link.a == link.b) throw ConfigError("self link on node " + std::to_string(link.a));
  node(link.a);
  node(link.b);
  if (link.bandwidth_bps == 0)
    throw ConfigError("link " + std::to_string(link.a) + "-" + std::to_string(link.b) +
                      " has zero bandwidth");
  if (link.propagation < SimTime::zero()) throw ConfigError("negative propagation delay");
  if (link.loss < 0.0 || link.loss >= 1.0) throw ConfigError("loss must be in [0, 1)");
  if (this->link(link.a, link.b) != nullptr)
    throw ConfigError("duplicate link " + std::to_string(link.a) + "-" + std::to_string(link.b));
  links_.push_back(link);
}

const NodeSpec& Topology::node(NodeId id) const {
  for (const auto& n : nodes_)
    if (n.id == id) return n;
  throw ConfigError("unknown node " + std::to_string(id));
}

std::optional<NodeId> Topology::node_for(wire::Address address) const {
  for (const auto& n : nodes_)
    if (n.address == address) return n.id;
  return std::nullopt;
}

const LinkSpec* Topology::link(NodeId a, NodeId b) const {
  for (const auto& l : links_)
    if ((l.a == a && l.b == b) || (l.a == b && l.b == a)) return &l;
  return nullptr;
}

std::vector<NodeId> Topology::neighbors(NodeId id) const {
  std::vector<NodeId> out;
  for (const auto& l : links_) {
    if (l.a == id) out.push_back(l.b);
    if (l.b == id) out.push_back(l.a);
  }
  std::sort(out.begin(), out.end());
  return out;
}

bool Topology::connected() const {
  if (nodes_.empty()) return true;
  std::set<NodeId> seen{nodes_.front().id};
  std::deque<NodeId> queue{nodes_.front().id};
  while (!queue.empty()) {
    NodeId u = queue.front();
    queue.pop_front();
    for (NodeId v : neighbors(u))
      if (seen.insert(v).second) queue.push_back(v);
  }
  return seen.size() == nodes_.size();
}

Topology Topology::parse(std::string_view text) {
  Topology t;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    auto nl = text.find('\n');
    auto line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    auto words = split_words(line);
    if (words.empty()) continue;
    auto where = "topology:" + std::to_string(line_no) + ": ";
    try {
      if (words[0] == "node") {
        if (words.size() != 3) throw ConfigError(where + "expected 'node <id> <address>'");
        auto address = wire::Address::try_parse(words[2]);
        if (!address) throw ConfigError(where + "invalid address '" + std::string(words[2]) + "'");
        t.add_node(parse_number<NodeId>(words[1], line_no, "node id"), *address);
      } else if (words[0] == "link") {
        if (words.size() < 3 || words.size() > 5)
          throw ConfigError(where + "expected 'link <id> <id> [bandwidth_bps] [prop_us]'");
        LinkSpec l;
        l.a = parse_number<NodeId>(words[1], line_no, "node id");
        l.b = parse_number<NodeId>(words[2], line_no, "node id");
        if (words.size() > 3) l.bandwidth_bps = parse_number<std::uint64_t>(words[3], line_no, "bandwidth");
        if (words.size() > 4)
          l.propagation = SimTime{parse_number<std::int64_t>(words[4], line_no, "propagation")};
        t.add_link(l);
      } else {
        throw ConfigError(where + "unknown directive '" + std::string(words[0]) + "'");
      }
    } catch (const ConfigError& e) {
      std::string msg = e.what();
      if (msg.rfind("topology:", 0) == 0) throw;
      throw ConfigError(where + msg);
    }
  }
  return t;
}

std::string Topology::render() const {
  std::ostringstream out;
  for (const auto& n : nodes_) out << "node " << n.id << ' ' << n.address.to_string() << '\n';
  for (const auto& l : links_)
    out << "link " << l.a << ' ' << l.b << ' ' << l.bandwidth_bps << ' ' << l.propagation.count()
        << '\n';
  return out.str();
}

Topology Topology::single_hop() {
  Topology t;
  t.add_node(1, wire::Address::parse("192.168.2.12"));
  t.add_node(2, wire::Address::parse("192.168.2.22"));
  t.add_link({1, 2});
  return t;
}

Topology Topology::multi_hop() {
  Topology t;
  t.add_node(1, wire::Address::parse("192.168.2.12"));
  t.add_node(2, wire::Address::parse("192.168.2.2"));
  t.add_node(3, wire::Address::parse("192.168.2.22"));
  t.add_link({1, 2});
  t.add_link({2, 3});
  return t;
}

SimTime serialization_delay(std::size_t bytes, std::uint64_t bandwidth_bps) {
  if (bandwidth_bps == 0) throw ConfigError("zero bandwidth");
  std::uint64_t bits_us = static_cast<std::uint64_t>(bytes) * 8u * 1'000'000u;
  return SimTime{static_cast<std::int64_t>((bits_us + bandwidth_bps - 1) / bandwidth_bps)};
}

DelayModel::DelayModel() {
  costs_[crypto::AuthAlgorithm::hmac_md5] = {2.0, 4.0};
  costs_[crypto::AuthAlgorithm::hmac_sha1] = {3.0, 6.0};
  costs_[crypto::CipherAlgorithm::aes_cbc] = {3.0, 12.0};
  costs_[crypto::CipherAlgorithm::tdes_cbc] = {4.0, 45.0};
}

void DelayModel::set_cost(const crypto::Algorithm& alg, AlgorithmCost cost) {
  if (cost.setup_us < 0.0 || cost.per_byte_ns < 0.0) throw ConfigError("negative crypto cost");
  costs_[alg] = cost;
}

SimTime DelayModel::charge(const ipsec::CostLog& log) const {
  double ns = 0.0;
  for (const auto& sample : log) {
    if (mode == DelayMode::measured) {
      ns += static_cast<double>(sample.elapsed.count());
    } else {
      const auto& c = cost(sample.algorithm);
      ns += c.setup_us * 1000.0 + c.per_byte_ns * static_cast<double>(sample.payload_bytes);
    }
  }
  return ceil_us(ns);
}

void EventQueue::push(SimTime time, EventKind kind, std::function<void()> fire,
                      std::optional<StreamTag> tag) {
  heap_.push_back(Event{time, next_seq_++, kind, tag, std::move(fire)});
  std::push_heap(heap_.begin(), heap_.end(), [](const Event& a, const Event& b) {
    return std::tie(a.time, a.seq) > std::tie(b.time, b.seq);
  });
}

Event EventQueue::pop() {
  std::pop_heap(heap_.begin(), heap_.end(), [](const Event& a, const Event& b) {
    return std::tie(a.time, a.seq) > std::tie(b.time, b.seq);
  });
  Event e = std::move(heap_.back());
  heap_.pop_back();
  return e;
}

std::string_view to_string(Action a) {
  switch (a) {
    case Action::send: return "SEND";
    case Action::tx: return "TX";
    case Action::rx: return "RX";
    case Action::fwd: return "FWD";
    case Action::deliver: return "DELIVER";
    case Action::drop: return "DROP";
  }
  return "?";
}

std::string_view to_string(DropCause c) {
  switch (c) {
    case DropCause::no_route: return "no_route";
    case DropCause::filtered: return "filtered";
    case DropCause::ttl_expired: return "ttl_expired";
    case DropCause::out_of_range: return "out_of_range";
    case DropCause::link_loss: return "link_loss";
    case DropCause::no_sa: return "no_sa";
    case DropCause::integrity: return "integrity";
    case DropCause::replay: return "replay";
    case DropCause::padding: return "padding";
    case DropCause::policy: return "policy";
    case DropCause::decode: return "decode";
    case DropCause::no_sa_for_policy: return "no_sa_for_policy";
  }
  return "?";
}

DropCause drop_cause_for(ipsec::RejectCause c) {
  switch (c) {
    case ipsec::RejectCause::no_sa: return DropCause::no_sa;
    case ipsec::RejectCause::integrity: return DropCause::integrity;
    case ipsec::RejectCause::replay: return DropCause::replay;
    case ipsec::RejectCause::padding: return DropCause::padding;
    case ipsec::RejectCause::policy: return DropCause::policy;
    case ipsec::RejectCause::decode: return DropCause::decode;
  }
  return DropCause::decode;
}

std::string format(const TraceRecord& r) {
  std::string line = std::to_string(r.time.count());
  line += ' ';
  line += std::to_string(r.node);
  line += ' ';
  line += to_string(r.action);
  line += ' ';
  line += wire::to_string(r.protocol);
  line += ' ';
  line += std::to_string(r.bytes);
  line += ' ';
  line += r.tag ? std::to_string(r.tag->stream_id) + ":" + std::to_string(r.tag->packet_id) : "-";
  line += ' ';
  line += r.cause ? std::string(to_string(*r.cause)) : "-";
  return line;
}

std::uint64_t StreamStats::dropped() const {
  std::uint64_t n = 0;
  for (const auto& [cause, count] : drops) n += count;
  return n;
}

crypto::Rng derive_rng(std::uint64_t seed, std::uint32_t purpose, std::uint32_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    purpose, index};
  return crypto::Rng(seq);
}

Simulator::Simulator(Topology topology, SimConfig config)
    : topology_(std::move(topology)),
      config_(std::move(config)),
      loss_rng_(derive_rng(config_.seed, kPurposeLoss, 0)) {
  for (const auto& spec : topology_.nodes())
    nodes_.push_back(Node{spec, olsr::Agent(spec.address, config_.timing, config_.naive_flooding),
                          std::nullopt, ipsec::ProtocolFilter::allow_all(),
                          derive_rng(config_.seed, kPurposeIv, spec.id)});

  // Deterministic per-node phase offsets stand in for message jitter.
  for (const auto& n : nodes_) {
    auto rng = derive_rng(config_.seed, kPurposePhase, n.spec.id);
    auto hello_phase = SimTime{static_cast<std::int64_t>(
        rng() % static_cast<std::uint64_t>(config_.timing.hello_interval.count()))};
    auto tc_phase = SimTime{static_cast<std::int64_t>(
        rng() % static_cast<std::uint64_t>(config_.timing.tc_interval.count()))};
    NodeId id = n.spec.id;
    schedule(hello_phase, EventKind::timer, [this, id] { hello_timer(id); });
    schedule(tc_phase, EventKind::timer, [this, id] { tc_timer(id); });
  }
  if (config_.delay.mode == DelayMode::measured) warm_up_primitives();
}

Simulator::Node& Simulator::node(NodeId id) {
  for (auto& n : nodes_)
    if (n.spec.id == id) return n;
  throw ConfigError("unknown node " + std::to_string(id));
}

const olsr::Agent& Simulator::agent(NodeId id) const {
  for (const auto& n : nodes_)
    if (n.spec.id == id) return n.agent;
  throw ConfigError("unknown node " + std::to_string(id));
}

void Simulator::set_security(NodeId id, ipsec::SecurityDatabases db) {
  node(id).security = std::move(db);
}

ipsec::SecurityDatabases* Simulator::security(NodeId id) {
  auto& n = node(id);
  return n.security ? &*n.security : nullptr;
}

void Simulator::set_protocol_filter(NodeId id, ipsec::ProtocolFilter filter) {
  node(id).filter = std::move(filter);
}

void Simulator::add_stream(const traffic::StreamConfig& config, SimTime start) {
  auto source = topology_.node_for(config.src);
  if (!source) throw ConfigError("stream source " + config.src.to_string() + " is not a node");
  if (!topology_.node_for(config.dst))
    throw ConfigError("stream destination " + config.dst.to_string() + " is not a node");
  if (streams_.contains(config.stream_id))
    throw ConfigError("duplicate stream id " + std::to_string(config.stream_id));
  auto emissions = traffic::generate(config, start);
  streams_.emplace(config.stream_id,
                   Stream{config, *source, derive_rng(config_.seed, kPurposePayload, config.stream_id),
                          traffic::StreamSink(config.stream_id), {}});
  for (const auto& e : emissions) {
    std::uint32_t sid = config.stream_id;
    std::uint64_t pid = e.packet_id;
    schedule(e.time, EventKind::emit, [this, sid, pid] { emit(sid, pid); });
  }
}

void Simulator::schedule(SimTime at, EventKind kind, std::function<void()> fire,
                         std::optional<StreamTag> tag) {
  queue_.push(at, kind, std::move(fire), tag);
}

void Simulator::run_until(SimTime end) {
  while (!queue_.empty() && queue_.next_time() <= end) {
    Event e = queue_.pop();
    now_ = e.time;
    e.fire();
  }
}

void Simulator::record(NodeId id, Action action, const wire::Packet& packet, std::size_t bytes,
                       const std::optional<StreamTag>& tag, std::optional<DropCause> cause) {
  trace_.push_back(TraceRecord{now_, id, action, packet.net.protocol,
                               static_cast<std::uint32_t>(bytes), tag, cause});
  if (config_.hex_trace && (action == Action::tx || action == Action::rx || action == Action::fwd))
    hex_trace_.push_back(
        wire::hex_trace_line(now_.count(), id, to_string(action), wire::serialize(packet)));
}

void Simulator::drop(NodeId id, const Frame& frame, DropCause cause) {
  record(id, Action::drop, frame.packet, frame.packet.net.total_length, frame.tag, cause);
  if (frame.tag) {
    auto it = streams_.find(frame.tag->stream_id);
    if (it != streams_.end()) ++it->second.stats.drops[cause];
  }
}

void Simulator::transmit(NodeId id, Frame frame, NodeId next_hop, SimTime processing) {
  const LinkSpec* link = topology_.link(id, next_hop);
  if (link == nullptr) {
    drop(id, frame, DropCause::out_of_range);
    return;
  }
  std::size_t bytes = wire::serialize(frame.packet).size();
  HopCost hop{serialization_delay(bytes, link->bandwidth_bps), link->propagation, processing};
  if (link->loss > 0.0) {
    double u = static_cast<double>(loss_rng_() >> 11) * 0x1.0p-53;
    if (u < link->loss) {
      drop(id, frame, DropCause::link_loss);
      return;
    }
  }
  frame.hops.push_back(hop);
  SimTime arrival = now_ + hop.total();
  auto tag = frame.tag;
  schedule(
      arrival, EventKind::link_delivery,
      [this, next_hop, id, f = std::move(frame)]() mutable { node_receive(next_hop, id, std::move(f)); },
      tag);
}

void Simulator::broadcast(NodeId id, wire::Packet packet) {
  auto& n = node(id);
  Frame frame{std::move(packet), std::nullopt, now_, {}};
  if (!n.filter.permits(frame.packet.net.protocol)) {
    drop(id, frame, DropCause::filtered);
    return;
  }
  record(id, Action::tx, frame.packet, frame.packet.net.total_length, std::nullopt);
  for (NodeId neighbor : topology_.neighbors(id)) transmit(id, frame, neighbor, SimTime::zero());
}

void Simulator::hello_timer(NodeId id) {
  auto& n = node(id);
  n.agent.expire(now_);
  broadcast(id, n.agent.emit_hello(now_));
  schedule(now_ + config_.timing.hello_interval, EventKind::timer, [this, id] { hello_timer(id); });
}

void Simulator::tc_timer(NodeId id) {
  auto& n = node(id);
  n.agent.expire(now_);
  if (auto tc = n.agent.emit_tc(now_)) broadcast(id, std::move(*tc));
  schedule(now_ + config_.timing.tc_interval, EventKind::timer, [this, id] { tc_timer(id); });
}

void Simulator::emit(std::uint32_t stream_id, std::uint64_t packet_id) {
  auto& stream = streams_.at(stream_id);
  auto& src = node(stream.source);
  StreamTag tag{stream_id, packet_id};
  Frame frame{traffic::make_packet(stream.config, packet_id, stream.payload_rng), tag, now_, {}};
  ++stream.stats.sent;
  record(src.spec.id, Action::send, frame.packet, frame.packet.net.total_length, tag);

  ipsec::CostLog costs;
  if (src.security) {
    try {
      frame.packet = ipsec::outbound(std::move(frame.packet), *src.security, src.iv_rng, &costs);
    } catch (const ipsec::NoSaForPolicy&) {
      drop(src.spec.id, frame, DropCause::no_sa_for_policy);
      return;
    }
  }
  if (!src.filter.permits(frame.packet.net.protocol)) {
    drop(src.spec.id, frame, DropCause::filtered);
    return;
  }
  auto route = src.agent.route_to(frame.packet.net.dst);
  auto next = route ? topology_.node_for(route->next_hop) : std::nullopt;
  if (!next) {
    drop(src.spec.id, frame, DropCause::no_route);
    return;
  }
  record(src.spec.id, Action::tx, frame.packet, frame.packet.net.total_length, tag);
  transmit(src.spec.id, std::move(frame), *next, config_.delay.charge(costs));
}

void Simulator::node_receive(NodeId id, NodeId from, Frame frame) {
  auto& n = node(id);
  record(id, Action::rx, frame.packet, frame.packet.net.total_length, frame.tag);
  if (!n.filter.permits(frame.packet.net.protocol)) {
    drop(id, frame, DropCause::filtered);
    return;
  }

  const auto& dst = frame.packet.net.dst;
  if (dst == wire::Address::broadcast()) {
    if (frame.packet.net.protocol == wire::Protocol::olsr) {
      auto relay = n.agent.receive(frame.packet, topology_.node(from).address, now_);
      if (relay) broadcast(id, std::move(*relay));
    }
    return;
  }
  if (dst == n.spec.address) {
    deliver_local(id, std::move(frame));
    return;
  }

  // Intermediate hop: plain IP forwarding, no security transforms.
  auto route = n.agent.route_to(dst);
  auto next = route ? topology_.node_for(route->next_hop) : std::nullopt;
  if (!next) {
    drop(id, frame, DropCause::no_route);
    return;
  }
  if (frame.packet.net.ttl <= 1) {
    drop(id, frame, DropCause::ttl_expired);
    return;
  }
  --frame.packet.net.ttl;
  record(id, Action::fwd, frame.packet, frame.packet.net.total_length, frame.tag);
  transmit(id, std::move(frame), *next, config_.delay.forward_processing);
}

void Simulator::deliver_local(NodeId id, Frame frame) {
  auto& n = node(id);
  ipsec::CostLog costs;
  if (n.security) {
    auto verdict = ipsec::inbound(std::move(frame.packet), *n.security, &costs);
    if (!verdict) {
      // The rejected bytes are gone; keep the header for the trace record.
      drop(id, frame, drop_cause_for(verdict.cause()));
      return;
    }
    frame.packet = std::move(verdict.packet());
  } else if (frame.packet.ah || frame.packet.esp) {
    drop(id, frame, DropCause::no_sa);
    return;
  }

  SimTime processing = config_.delay.charge(costs);
  frame.hops.push_back({SimTime::zero(), SimTime::zero(), processing});
  auto tag = frame.tag;
  schedule(
      now_ + processing, EventKind::app_delivery,
      [this, id, f = std::move(frame)]() mutable {
        record(id, Action::deliver, f.packet, f.packet.net.total_length, f.tag);
        const auto* udp = std::get_if<wire::UdpPayload>(&f.packet.transport);
        if (udp == nullptr) return;
        auto it = streams_.find(udp->stream_id);
        if (it == streams_.end()) return;
        auto receipt = it->second.sink.sink(*udp, now_);
        if (f.tag && !receipt.duplicate)
          deliveries_.push_back({*f.tag, f.send_time, now_, std::move(f.hops)});
      },
      tag);
}

void Simulator::warm_up_primitives() {
  Bytes key(24, 0x5a), iv(16, 0), block(64, 0);
  crypto::mac(crypto::AuthAlgorithm::hmac_md5, ByteView(key).first(16), block);
  crypto::mac(crypto::AuthAlgorithm::hmac_sha1, ByteView(key).first(20), block);
  crypto::encrypt_cbc(crypto::CipherAlgorithm::aes_cbc, key, iv, block);
  crypto::encrypt_cbc(crypto::CipherAlgorithm::tdes_cbc, key, ByteView(iv).first(8), block);
}

std::string Simulator::trace_text() const {
  std::string text;
  for (const auto& r : trace_) {
    text += format(r);
    text += '\n';
  }
  return text;
}

std::string Simulator::trace_digest() const { return crypto::sha256_hex(trace_text()); }

const traffic::StreamSink& Simulator::sink(std::uint32_t stream_id) const {
  return streams_.at(stream_id).sink;
}

const StreamStats& Simulator::stream_stats(std::uint32_t stream_id) const {
  return streams_.at(stream_id).stats;
}

std::uint64_t Simulator::in_flight(std::uint32_t stream_id) const {
  std::uint64_t n = 0;
  for (const auto& e : queue_.pending())
    if (e.tag && e.tag->stream_id == stream_id &&
        (e.kind == EventKind::link_delivery || e.kind == EventKind::app_delivery))
      ++n;
  return n;
}

bool Simulator::conservation_holds(std::uint32_t stream_id) const {
  const auto& s = streams_.at(stream_id);
  return s.stats.sent == s.sink.unique_count() + in_flight(stream_id) + s.stats.dropped();
}

std::uint64_t Simulator::olsr_retransmissions() const {
  std::uint64_t n = 0;
  for (const auto& node : nodes_) n += node.agent.retransmissions();
  return n;
}

std::string dump_routes(const Simulator& sim) {
  std::vector<std::tuple<NodeId, std::uint32_t, std::string>> rows;
  for (const auto& spec : sim.topology().nodes()) {
    for (const auto& [dest, route] : sim.agent(spec.id).routes()) {
      rows.emplace_back(spec.id, dest.value(),
                        std::to_string(spec.id) + ' ' + dest.to_string() + ' ' +
                            route.next_hop.to_string() + ' ' + std::to_string(route.hops));
    }
  }
  std::sort(rows.begin(), rows.end());
  std::string out;
  for (const auto& row : rows) {
    out += std::get<2>(row);
    out += '\n';
  }
  return out;
}

}  // namespace seclab::sim
