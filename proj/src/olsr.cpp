#include "seclab/olsr.hpp"

#include <algorithm>
#include <deque>
#include <tuple>

namespace seclab::olsr {
namespace {

// Sequence number comparison with wraparound.
bool seq_newer(std::uint16_t a, std::uint16_t b) {
  return (a > b && a - b <= 32768) || (b > a && b - a > 32768);
}

std::uint8_t whole_seconds(SimTime t) {
  auto s = t.count() / 1'000'000;
  return static_cast<std::uint8_t>(std::clamp<std::int64_t>(s, 1, 255));
}

}  // namespace

std::set<Address> select_mprs(const std::map<Address, std::set<Address>>& coverage) {
  std::set<Address> mprs;
  std::map<Address, std::vector<Address>> covered_by;
  for (const auto& [neighbor, reach] : coverage)
    for (auto y : reach) covered_by[y].push_back(neighbor);

  std::set<Address> uncovered;
  for (const auto& [y, covers] : covered_by) uncovered.insert(y);

  for (const auto& [y, covers] : covered_by)
    if (covers.size() == 1) mprs.insert(covers.front());
  for (auto m : mprs)
    for (auto y : coverage.at(m)) uncovered.erase(y);

  while (!uncovered.empty()) {
    std::optional<Address> best;
    std::tuple<std::size_t, std::size_t> best_key{0, 0};
    for (const auto& [neighbor, reach] : coverage) {
      if (mprs.contains(neighbor)) continue;
      std::size_t gain = 0;
      for (auto y : reach) gain += uncovered.contains(y) ? 1 : 0;
      if (gain == 0) continue;
      // Iteration is in ascending address order, so only a strictly
      // better key displaces the incumbent.
      std::tuple<std::size_t, std::size_t> key{gain, reach.size()};
      if (!best || key > best_key) {
        best = neighbor;
        best_key = key;
      }
    }
    if (!best) break;
    mprs.insert(*best);
    for (auto y : coverage.at(*best)) uncovered.erase(y);
  }
  return mprs;
}

RoutingTable compute_routes(Address self, const std::set<Address>& sym_neighbors,
                            const std::vector<TwoHopTuple>& two_hop,
                            const std::vector<TopologyTuple>& topology) {
  std::map<Address, std::set<Address>> edges;
  edges[self] = sym_neighbors;
  for (const auto& t : two_hop)
    if (sym_neighbors.contains(t.neighbor)) edges[t.neighbor].insert(t.two_hop);
  for (const auto& t : topology)
    if (t.last != self) edges[t.last].insert(t.dest);

  RoutingTable routes;
  std::deque<Address> queue{self};
  std::set<Address> visited{self};
  while (!queue.empty()) {
    Address u = queue.front();
    queue.pop_front();
    auto it = edges.find(u);
    if (it == edges.end()) continue;
    for (auto v : it->second) {
      if (!visited.insert(v).second) continue;
      Route r;
      r.dest = v;
      if (u == self) {
        r.next_hop = v;
        r.hops = 1;
      } else {
        r.next_hop = routes.at(u).next_hop;
        r.hops = routes.at(u).hops + 1;
      }
      routes.emplace(v, r);
      queue.push_back(v);
    }
  }
  return routes;
}

Agent::Agent(Address self, Timing timing, bool naive_flooding)
    : self_(self), timing_(timing), naive_flooding_(naive_flooding) {}

LinkTuple* Agent::find_link(Address neighbor) {
  for (auto& l : links_)
    if (l.neighbor == neighbor) return &l;
  return nullptr;
}

Agent::DuplicateTuple* Agent::find_duplicate(Address originator, std::uint16_t seq) {
  for (auto& d : duplicates_)
    if (d.originator == originator && d.seq == seq) return &d;
  return nullptr;
}

wire::OlsrMessage Agent::new_message(SimTime vtime) {
  wire::OlsrMessage m;
  m.originator = self_;
  m.vtime_s = whole_seconds(vtime);
  m.message_seq = ++message_seq_;
  return m;
}

wire::Packet Agent::emit_hello(SimTime now) {
  std::map<std::pair<wire::NeighborType, wire::LinkType>, std::vector<Address>> groups;
  for (const auto& l : links_) {
    wire::LinkType lt = l.symmetric(now)  ? wire::LinkType::symmetric
                        : l.heard(now)    ? wire::LinkType::asymmetric
                                          : wire::LinkType::lost;
    wire::NeighborType nt = wire::NeighborType::not_neighbor;
    if (l.symmetric(now))
      nt = mprs_.contains(l.neighbor) ? wire::NeighborType::mpr : wire::NeighborType::symmetric;
    groups[{nt, lt}].push_back(l.neighbor);
  }
  wire::HelloMessage hello;
  hello.htime_s = whole_seconds(timing_.hello_interval);
  hello.willingness = kWillDefault;
  for (auto& [code, addresses] : groups)
    hello.blocks.push_back({code.second, code.first, std::move(addresses)});

  auto msg = new_message(timing_.neighbor_hold());
  msg.ttl = 1;
  msg.body = std::move(hello);
  return wire::make_olsr_packet(self_, std::move(msg));
}

std::optional<wire::Packet> Agent::emit_tc(SimTime now) {
  (void)now;
  auto selectors = mpr_selectors();
  if (selectors.empty()) return std::nullopt;
  if (selectors != advertised_selectors_) {
    ++ansn_;
    advertised_selectors_ = selectors;
  }
  wire::TcMessage tc;
  tc.ansn = ansn_;
  tc.advertised.assign(selectors.begin(), selectors.end());
  auto msg = new_message(timing_.topology_hold());
  msg.ttl = 255;
  msg.body = std::move(tc);
  return wire::make_olsr_packet(self_, std::move(msg));
}

std::optional<wire::Packet> Agent::receive(const wire::Packet& packet, Address from, SimTime now) {
  const auto* msg = std::get_if<wire::OlsrMessage>(&packet.transport);
  if (msg == nullptr || msg->originator == self_) return std::nullopt;
  expire(now);
  if (msg->is_hello()) {
    process_hello(*msg, from, now);
    return std::nullopt;
  }
  if (find_duplicate(msg->originator, msg->message_seq) != nullptr) return std::nullopt;
  duplicates_.push_back({msg->originator, msg->message_seq, false, now + timing_.duplicate_hold()});
  process_tc(*msg, from, now);
  return forward_flood(*msg, from);
}

void Agent::process_hello(const wire::OlsrMessage& msg, Address from, SimTime now) {
  const auto& hello = std::get<wire::HelloMessage>(msg.body);
  SimTime vtime = seconds(msg.vtime_s);

  LinkTuple* link = find_link(from);
  if (link == nullptr) {
    links_.push_back({from, SimTime{0}, SimTime{0}, SimTime{0}});
    link = &links_.back();
  }
  link->asym_until = now + vtime;
  for (const auto& block : hello.blocks) {
    if (std::find(block.addresses.begin(), block.addresses.end(), self_) == block.addresses.end())
      continue;
    if (block.link == wire::LinkType::lost)
      link->sym_until = SimTime{0};
    else if (block.link == wire::LinkType::symmetric || block.link == wire::LinkType::asymmetric)
      link->sym_until = now + vtime;
  }
  link->expires = std::max(link->asym_until, link->sym_until);

  if (link->symmetric(now)) {
    bool selected = false;
    for (const auto& block : hello.blocks) {
      for (auto addr : block.addresses) {
        if (addr == self_) {
          selected = selected || block.neighbor == wire::NeighborType::mpr;
          continue;
        }
        if (block.neighbor == wire::NeighborType::not_neighbor) {
          std::erase_if(two_hop_, [&](const TwoHopTuple& t) {
            return t.neighbor == from && t.two_hop == addr;
          });
          continue;
        }
        auto it = std::find_if(two_hop_.begin(), two_hop_.end(), [&](const TwoHopTuple& t) {
          return t.neighbor == from && t.two_hop == addr;
        });
        if (it == two_hop_.end())
          two_hop_.push_back({from, addr, now + vtime});
        else
          it->expires = now + vtime;
      }
    }
    if (selected)
      selectors_[from] = now + vtime;
    else
      selectors_.erase(from);
  }
  recompute(now);
}

void Agent::process_tc(const wire::OlsrMessage& msg, Address from, SimTime now) {
  if (!symmetric_neighbors(now).contains(from)) return;
  const auto& tc = std::get<wire::TcMessage>(msg.body);
  for (const auto& t : topology_)
    if (t.last == msg.originator && seq_newer(t.ansn, tc.ansn)) return;
  std::erase_if(topology_, [&](const TopologyTuple& t) {
    return t.last == msg.originator && seq_newer(tc.ansn, t.ansn);
  });
  SimTime expires = now + seconds(msg.vtime_s);
  for (auto dest : tc.advertised) {
    auto it = std::find_if(topology_.begin(), topology_.end(), [&](const TopologyTuple& t) {
      return t.dest == dest && t.last == msg.originator;
    });
    if (it == topology_.end())
      topology_.push_back({dest, msg.originator, tc.ansn, expires});
    else
      it->expires = expires;
  }
  recompute(now);
}

std::optional<wire::Packet> Agent::forward_flood(const wire::OlsrMessage& msg, Address from) {
  DuplicateTuple* dup = find_duplicate(msg.originator, msg.message_seq);
  if (dup != nullptr && dup->retransmitted) return std::nullopt;
  if (msg.ttl <= 1) return std::nullopt;
  if (!naive_flooding_ && !selectors_.contains(from)) return std::nullopt;
  if (dup != nullptr) dup->retransmitted = true;
  wire::OlsrMessage relay = msg;
  --relay.ttl;
  ++relay.hop_count;
  ++retransmissions_;
  return wire::make_olsr_packet(self_, std::move(relay));
}

void Agent::expire(SimTime now) {
  std::erase_if(links_, [&](const LinkTuple& l) { return l.expires <= now; });
  std::erase_if(two_hop_, [&](const TwoHopTuple& t) { return t.expires <= now; });
  std::erase_if(selectors_, [&](const auto& kv) { return kv.second <= now; });
  std::erase_if(topology_, [&](const TopologyTuple& t) { return t.expires <= now; });
  std::erase_if(duplicates_, [&](const DuplicateTuple& d) { return d.expires <= now; });
  recompute(now);
}

std::set<Address> Agent::symmetric_neighbors(SimTime now) const {
  std::set<Address> out;
  for (const auto& l : links_)
    if (l.symmetric(now)) out.insert(l.neighbor);
  return out;
}

std::set<Address> Agent::strict_two_hop(SimTime now) const {
  std::set<Address> out;
  for (const auto& [neighbor, reach] : coverage(now)) out.insert(reach.begin(), reach.end());
  return out;
}

std::map<Address, std::set<Address>> Agent::coverage(SimTime now) const {
  auto sym = symmetric_neighbors(now);
  std::map<Address, std::set<Address>> out;
  for (auto n : sym) out[n];
  for (const auto& t : two_hop_) {
    if (t.expires <= now || !sym.contains(t.neighbor)) continue;
    if (t.two_hop == self_ || sym.contains(t.two_hop)) continue;
    out[t.neighbor].insert(t.two_hop);
  }
  return out;
}

std::set<Address> Agent::mpr_selectors() const {
  std::set<Address> out;
  for (const auto& [addr, until] : selectors_) out.insert(addr);
  return out;
}

std::optional<Route> Agent::route_to(Address dest) const {
  auto it = routes_.find(dest);
  if (it == routes_.end()) return std::nullopt;
  return it->second;
}

void Agent::recompute(SimTime now) {
  mprs_ = select_mprs(coverage(now));
  std::vector<TwoHopTuple> live;
  for (const auto& t : two_hop_)
    if (t.expires > now) live.push_back(t);
  routes_ = compute_routes(self_, symmetric_neighbors(now), live, topology_);
}

}  // namespace seclab::olsr
