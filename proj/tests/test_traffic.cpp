#include "doctest.h"
#include "seclab/simnet.hpp"
#include "seclab/traffic.hpp"

#include <cmath>

using namespace seclab;
using namespace seclab::traffic;

namespace {

StreamConfig config(double rate, double duration_s) {
  StreamConfig c;
  c.src = wire::Address::parse("192.168.2.12");
  c.dst = wire::Address::parse("192.168.2.22");
  c.rate_pps = rate;
  c.duration = SimTime{std::llround(duration_s * 1e6)};
  return c;
}

}  // namespace

TEST_CASE("emission count is floor(rate x duration)") {
  CHECK(generate(config(25, 300), SimTime{0}).size() == 7500);
  CHECK(generate(config(25, 0.04), SimTime{0}).size() == 1);
  CHECK(generate(config(25, 0.039), SimTime{0}).empty());
  CHECK(generate(config(30, 1), SimTime{0}).size() == 30);
  CHECK(generate(config(7, 10), SimTime{0}).size() == 70);
}

TEST_CASE("emissions are evenly spaced with sequential ids") {
  auto e = generate(config(25, 10), seconds(20));
  REQUIRE(e.size() == 250);
  for (std::size_t i = 0; i < e.size(); ++i) {
    CHECK(e[i].packet_id == i);
    CHECK(e[i].time == seconds(20) + SimTime{static_cast<std::int64_t>(40000 * i)});
  }
  auto odd = generate(config(3, 2), SimTime{0});
  REQUIRE(odd.size() == 6);
  for (std::size_t i = 1; i < odd.size(); ++i) {
    auto gap = (odd[i].time - odd[i - 1].time).count();
    CHECK(gap >= 333333);
    CHECK(gap <= 333334);
  }
}

TEST_CASE("config validation") {
  auto c = config(25, 1);
  c.payload_bytes = 11;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.payload_bytes = 12;
  CHECK_NOTHROW(c.validate());
  CHECK_THROWS_AS(config(0, 1).validate(), ConfigError);
  CHECK_THROWS_AS(config(-1, 1).validate(), ConfigError);
  CHECK_THROWS_AS(config(25, 0).validate(), ConfigError);
}

TEST_CASE("stream packets carry the tag and the configured size") {
  crypto::Rng rng(1);
  auto c = config(25, 1);
  auto p = make_packet(c, 42, rng);
  const auto& u = std::get<wire::UdpPayload>(p.transport);
  CHECK(u.packet_id == 42);
  CHECK(u.stream_id == 1);
  CHECK(u.datagram_size() == 1316);
  CHECK(p.net.total_length == 20 + 8 + 1316);
  auto q = make_packet(c, 43, rng);
  CHECK(std::get<wire::UdpPayload>(q.transport).body != u.body);
}

TEST_CASE("sink flags duplicates and keeps arrival order") {
  StreamSink sink;
  wire::UdpPayload u;
  u.stream_id = 1;
  for (std::uint64_t id : {3u, 1u, 2u}) {
    u.packet_id = id;
    CHECK_FALSE(sink.sink(u, SimTime{static_cast<std::int64_t>(id)}).duplicate);
  }
  u.packet_id = 1;
  CHECK(sink.sink(u, SimTime{9}).duplicate);
  CHECK(sink.unique_count() == 3);
  CHECK(sink.duplicate_count() == 1);
  REQUIRE(sink.receipts().size() == 4);
  CHECK(sink.receipts()[0].packet_id == 3);
  CHECK(sink.receipts()[1].packet_id == 1);
  CHECK(sink.received(2));
  CHECK_FALSE(sink.received(4));
}

TEST_CASE("lossless single hop delivers every emission") {
  sim::Simulator s(sim::Topology::single_hop(), {});
  auto c = config(25, 20);
  s.add_stream(c, seconds(20));
  s.run_until(seconds(45));
  auto emitted = generate(c, seconds(20));
  REQUIRE(s.sink(1).unique_count() == emitted.size());
  for (const auto& e : emitted) CHECK(s.sink(1).received(e.packet_id));
  CHECK(s.sink(1).duplicate_count() == 0);
}
