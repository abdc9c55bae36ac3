#include "doctest.h"
#include "oracles.hpp"
#include "seclab/runner.hpp"

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

using namespace seclab;
using namespace seclab::runner;

namespace {

RunSpec quick(Scenario scenario, EspChoice esp, AhChoice ah, std::uint64_t seed = 1) {
  RunSpec s;
  s.scenario = scenario;
  s.esp = esp;
  s.ah = ah;
  s.seed = seed;
  s.duration_s = 20.0;
  return s;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("seclab-" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("scheme names") {
  CHECK(quick(Scenario::single_hop, EspChoice::none, AhChoice::none).scheme() == "plain");
  CHECK(quick(Scenario::single_hop, EspChoice::aes, AhChoice::md5).scheme() == "aes-md5");
  CHECK(quick(Scenario::single_hop, EspChoice::tdes, AhChoice::sha1).scheme() == "3des-sha1");
  CHECK(quick(Scenario::single_hop, EspChoice::aes, AhChoice::none).scheme() == "aes");
  CHECK(parse_scenario("multi-hop") == Scenario::multi_hop);
  CHECK(parse_esp("3des") == EspChoice::tdes);
  CHECK_THROWS_AS(parse_ah("sha256"), ConfigError);
  CHECK_THROWS_AS(parse_delay_mode("fast"), ConfigError);
}

TEST_CASE("baseline run") {
  auto r = execute(quick(Scenario::single_hop, EspChoice::none, AhChoice::none));
  CHECK(r.sent == 500);
  CHECK(r.delivered == 500);
  CHECK(r.conservation);
  REQUIRE(r.rows.size() == 2);
  CHECK(r.rows[0].node_role == "sender");
  CHECK(r.rows[1].node_role == "receiver");
  CHECK(r.rows[0].scheme == "plain");
  CHECK(r.rows[1].avg_delay_us);
  CHECK_FALSE(r.rows[0].avg_delay_us);
  CHECK(r.setkey_texts.empty());
  // 1344 bytes at 6 Mbit/s plus 5 us propagation, no crypto.
  CHECK(*r.avg_delay_us == 1792.0 + 5.0);
}

TEST_CASE("same seed, same outputs") {
  auto spec = quick(Scenario::multi_hop, EspChoice::aes, AhChoice::sha1, 7);
  auto a = execute(spec), b = execute(spec);
  CHECK(a.csv == b.csv);
  CHECK(a.trace_digest == b.trace_digest);
  CHECK(a.setkey_texts == b.setkey_texts);
  auto c = execute(quick(Scenario::multi_hop, EspChoice::aes, AhChoice::sha1, 8));
  CHECK(c.trace_digest != a.trace_digest);
  CHECK(c.setkey_texts != a.setkey_texts);
}

TEST_CASE("generated setkey files") {
  SUBCASE("ESP only has a single transform") {
    auto r = execute(quick(Scenario::single_hop, EspChoice::aes, AhChoice::none));
    REQUIRE(r.setkey_texts.size() == 2);
    auto db = ipsec::parse_setkey(r.setkey_texts.at(1));
    CHECK(db.sad().size() == 2);
    REQUIRE(db.spd().size() == 2);
    for (const auto& sp : db.spd())
      CHECK(sp.transforms == std::vector<ipsec::SecProtocol>{ipsec::SecProtocol::esp});
    CHECK(r.setkey_texts.at(1).find(" ah ") == std::string::npos);
    CHECK(r.delivered == r.sent);
  }
  SUBCASE("key sizes follow the algorithm") {
    auto r = execute(quick(Scenario::single_hop, EspChoice::tdes, AhChoice::sha1));
    auto db = ipsec::parse_setkey(r.setkey_texts.at(1));
    for (const auto& sa : db.sad())
      CHECK(sa.key.size() == (sa.protocol == ipsec::SecProtocol::ah ? 20u : 24u));
    CHECK(r.setkey_round_trip);
  }
  SUBCASE("receiver loads the mirror image") {
    auto r = execute(quick(Scenario::multi_hop, EspChoice::aes, AhChoice::md5));
    auto sender = ipsec::parse_setkey(r.setkey_texts.at(1));
    auto receiver = ipsec::parse_setkey(r.setkey_texts.at(3));
    CHECK(receiver == ipsec::mirror(sender));
    CHECK_FALSE(r.setkey_texts.contains(2));
  }
}

TEST_CASE("reference configuration run") {
  auto spec = quick(Scenario::multi_hop, EspChoice::none, AhChoice::none);
  spec.fig2 = true;
  auto r = execute(spec);
  CHECK(r.scheme == "aes-md5");
  CHECK(r.delivered == r.sent);
  CHECK(ipsec::parse_setkey(r.setkey_texts.at(1)) ==
        ipsec::parse_setkey(ipsec::reference_setkey_conf()));
}

TEST_CASE("secured stream grows by exactly the size law") {
  auto plain = execute(quick(Scenario::single_hop, EspChoice::none, AhChoice::none));
  for (auto [esp, block] : {std::pair{EspChoice::aes, 16u}, std::pair{EspChoice::tdes, 8u}}) {
    auto secured = execute(quick(Scenario::single_hop, esp, AhChoice::md5));
    CHECK(secured.total_bytes() > plain.total_bytes());
    // Stream packets only: the sender's stream TX bytes over the window.
    auto stream_bytes = [](const RunResult& r) {
      return r.summaries.at(1).counters.tx_bytes;
    };
    auto olsr = plain.summaries.at(1).counters.tx_bytes - 500 * (20 + 8 + 1316);
    CHECK(stream_bytes(secured) - olsr == 500 * (20 + 8 + 1316 + oracle::ah_esp_growth(1316, block)));
  }
}

TEST_CASE("forwarder filter starves the secured stream") {
  auto spec = quick(Scenario::multi_hop, EspChoice::aes, AhChoice::sha1);
  spec.forwarder_allow = "udp,olsr";
  auto blocked = execute(spec);
  CHECK(blocked.delivered == 0);
  CHECK(blocked.drops.at(sim::DropCause::filtered) == blocked.sent);
  CHECK_FALSE(blocked.avg_delay_us);
  CHECK(blocked.conservation);

  spec.forwarder_allow = "udp,olsr,esp,ah";
  auto open = execute(spec);
  CHECK(open.delivered == open.sent);

  auto plain = quick(Scenario::multi_hop, EspChoice::none, AhChoice::none);
  plain.forwarder_allow = "udp,olsr";
  CHECK(execute(plain).delivered == 500);
}

TEST_CASE("custom topology") {
  auto dir = temp_dir("custom");
  std::filesystem::create_directories(dir);
  {
    std::ofstream(dir / "line.topo") << "node 1 10.0.0.1\nnode 2 10.0.0.2\nnode 3 10.0.0.3\n"
                                        "node 4 10.0.0.4\nlink 1 2\nlink 2 3\nlink 3 4\n";
  }
  RunSpec spec = quick(Scenario::custom, EspChoice::aes, AhChoice::md5);
  spec.topology_path = dir / "line.topo";
  auto r = execute(spec);
  CHECK(r.delivered == r.sent);
  CHECK(r.roles.at(2) == "node2");
  CHECK(r.roles.at(4) == "receiver");

  spec.topology_path.clear();
  CHECK_THROWS_AS(execute(spec), ConfigError);
  {
    std::ofstream(dir / "split.topo") << "node 1 10.0.0.1\nnode 2 10.0.0.2\n";
  }
  spec.topology_path = dir / "split.topo";
  CHECK_THROWS_AS(execute(spec), ConfigError);
}

TEST_CASE("explicit setkey file replaces the generated one") {
  auto dir = temp_dir("setkey");
  std::filesystem::create_directories(dir);
  {
    std::ofstream(dir / "bad.conf") << "add 192.168.2.12 192.168.2.22 ah 0x300 -A hmac-md5 0x0102;\n";
  }
  auto spec = quick(Scenario::single_hop, EspChoice::none, AhChoice::none);
  spec.setkey_files[1] = dir / "bad.conf";
  CHECK_THROWS_AS(execute(spec), ipsec::SetkeyError);

  {
    std::ofstream(dir / "a.conf") << ipsec::reference_setkey_conf();
    std::ofstream(dir / "c.conf") << ipsec::render_setkey(
        ipsec::mirror(ipsec::parse_setkey(ipsec::reference_setkey_conf())));
  }
  spec.setkey_files = {{1, dir / "a.conf"}, {2, dir / "c.conf"}};
  auto r = execute(spec);
  CHECK(r.delivered == r.sent);
  CHECK(r.setkey_texts.size() == 2);
}

TEST_CASE("run writes its artifacts") {
  auto dir = temp_dir("run");
  auto spec = quick(Scenario::multi_hop, EspChoice::tdes, AhChoice::md5);
  spec.out_dir = dir;
  spec.dump_routes = true;
  auto r = run(spec);
  CHECK(slurp(dir / "report.csv") == r.csv);
  CHECK(slurp(dir / "trace.sha256") == r.trace_digest + "\n");
  CHECK(std::filesystem::exists(dir / "delays-3des-md5.csv"));
  CHECK(std::filesystem::exists(dir / "trace.txt"));
  CHECK(slurp(dir / "routes.txt") == r.routes);
  for (sim::NodeId id : {1u, 3u}) {
    auto text = slurp(dir / ("setkey-" + std::to_string(id) + ".conf"));
    CHECK(ipsec::render_setkey(ipsec::parse_setkey(text)) == text);
  }
  std::istringstream csv(r.csv);
  auto parsed = metrics::read_csv(csv);
  REQUIRE(parsed.size() == r.rows.size());
  std::ostringstream again;
  metrics::write_csv(again, parsed);
  CHECK(again.str() == r.csv);
}

TEST_CASE("median") {
  std::mt19937_64 rng(4);
  for (int n = 1; n <= 9; ++n) {
    std::vector<double> v;
    for (int i = 0; i < n; ++i) v.push_back(static_cast<double>(rng() % 100));
    CHECK(median(v) == oracle::median(v));
  }
  CHECK_THROWS(median({}));
}

TEST_CASE("sweep over one seed") {
  SweepSpec spec;
  spec.seeds = {3};
  spec.duration_s = 10.0;
  auto r = sweep(spec);
  CHECK(r.cells.size() == 10);
  std::map<std::string, int> per_role;
  for (const auto& row : r.medians) ++per_role[row.node_role];
  CHECK(per_role["sender"] == 10);
  CHECK(per_role["receiver"] == 10);
  CHECK(per_role["forwarder"] == 5);
  CHECK(r.invariants_hold());
  CHECK(r.all_checks_pass());
  CHECK(r.checks.size() == 2 * 5);
}

TEST_CASE("sweep medians across five seeds") {
  SweepSpec spec;
  spec.seeds = {1, 2, 3, 4, 5};
  spec.duration_s = 8.0;
  auto r = sweep(spec);
  REQUIRE(r.cells.size() == 50);
  for (const auto& m : r.medians) {
    std::vector<double> delays, sizes;
    for (const auto& cell : r.cells)
      for (const auto& row : cell.rows)
        if (row.scheme == m.scheme && row.scenario == m.scenario && row.node_role == m.node_role) {
          sizes.push_back(row.avg_packet_size_bytes);
          if (row.avg_delay_us) delays.push_back(*row.avg_delay_us);
        }
    REQUIRE(sizes.size() == 5);
    CHECK(m.avg_packet_size_bytes == oracle::median(sizes));
    if (!delays.empty()) CHECK(*m.avg_delay_us == oracle::median(delays));
  }
}
