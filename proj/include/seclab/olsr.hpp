// Proactive link-state routing after RFC 3626: HELLO link sensing,
// multipoint relay selection, TC flooding through MPRs and hop-count
// shortest-path routes. One Agent per node, single interface, no HNA/MID.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "seclab/sim_time.hpp"
#include "seclab/wire.hpp"

namespace seclab::olsr {

using wire::Address;

struct Timing {
  SimTime hello_interval = seconds(2);
  SimTime tc_interval = seconds(5);

  SimTime neighbor_hold() const { return 3 * hello_interval; }
  SimTime topology_hold() const { return 3 * tc_interval; }
  SimTime duplicate_hold() const { return seconds(30); }
};

inline constexpr std::uint8_t kWillDefault = 3;

struct LinkTuple {
  Address neighbor;
  SimTime sym_until{0};
  SimTime asym_until{0};
  SimTime expires{0};

  bool symmetric(SimTime now) const { return sym_until > now; }
  bool heard(SimTime now) const { return asym_until > now; }
};

struct TwoHopTuple {
  Address neighbor;
  Address two_hop;
  SimTime expires{0};
};

struct TopologyTuple {
  Address dest;
  Address last;
  std::uint16_t ansn = 0;
  SimTime expires{0};
};

struct Route {
  Address dest;
  Address next_hop;
  std::uint32_t hops = 0;

  bool operator==(const Route&) const = default;
};

using RoutingTable = std::map<Address, Route>;

/// Greedy MPR heuristic. `coverage` maps each symmetric one-hop neighbor
/// to the strict two-hop neighbors reachable through it. Neighbors that
/// are the only path to some two-hop node are taken first; then the
/// neighbor reaching the most still-uncovered nodes, ties going to the
/// larger total reach and then to the lower address.
std::set<Address> select_mprs(const std::map<Address, std::set<Address>>& coverage);

/// Hop-count shortest paths from `self` over symmetric neighbors,
/// two-hop links and topology (last -> dest) edges.
RoutingTable compute_routes(Address self, const std::set<Address>& sym_neighbors,
                            const std::vector<TwoHopTuple>& two_hop,
                            const std::vector<TopologyTuple>& topology);

class Agent {
 public:
  explicit Agent(Address self, Timing timing = {}, bool naive_flooding = false);

  Address address() const { return self_; }
  const Timing& timing() const { return timing_; }

  wire::Packet emit_hello(SimTime now);
  /// Nothing to send while no neighbor has chosen this node as MPR.
  std::optional<wire::Packet> emit_tc(SimTime now);

  /// Handles an OLSR packet heard from neighbor `from`; returns the
  /// retransmission to broadcast, if the flooding rules call for one.
  std::optional<wire::Packet> receive(const wire::Packet& packet, Address from, SimTime now);

  void process_hello(const wire::OlsrMessage& msg, Address from, SimTime now);
  void process_tc(const wire::OlsrMessage& msg, Address from, SimTime now);
  std::optional<wire::Packet> forward_flood(const wire::OlsrMessage& msg, Address from);

  /// Drops expired tuples; recomputes MPRs and routes if anything changed.
  void expire(SimTime now);

  std::set<Address> symmetric_neighbors(SimTime now) const;
  std::set<Address> strict_two_hop(SimTime now) const;
  const std::vector<LinkTuple>& links() const { return links_; }
  const std::vector<TwoHopTuple>& two_hop() const { return two_hop_; }
  const std::set<Address>& mpr_set() const { return mprs_; }
  std::set<Address> mpr_selectors() const;
  const std::vector<TopologyTuple>& topology() const { return topology_; }
  const RoutingTable& routes() const { return routes_; }
  std::optional<Route> route_to(Address dest) const;
  std::uint16_t ansn() const { return ansn_; }
  std::uint64_t retransmissions() const { return retransmissions_; }

 private:
  struct DuplicateTuple {
    Address originator;
    std::uint16_t seq = 0;
    bool retransmitted = false;
    SimTime expires{0};
  };

  LinkTuple* find_link(Address neighbor);
  DuplicateTuple* find_duplicate(Address originator, std::uint16_t seq);
  std::map<Address, std::set<Address>> coverage(SimTime now) const;
  void recompute(SimTime now);
  wire::OlsrMessage new_message(SimTime vtime);

  Address self_;
  Timing timing_;
  bool naive_flooding_;

  std::vector<LinkTuple> links_;
  std::vector<TwoHopTuple> two_hop_;
  std::set<Address> mprs_;
  std::map<Address, SimTime> selectors_;
  std::vector<TopologyTuple> topology_;
  std::vector<DuplicateTuple> duplicates_;
  RoutingTable routes_;

  std::uint16_t message_seq_ = 0;
  std::uint16_t ansn_ = 0;
  std::set<Address> advertised_selectors_;
  std::uint64_t retransmissions_ = 0;
};

}  // namespace seclab::olsr
