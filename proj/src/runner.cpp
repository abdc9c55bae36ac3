#include "seclab/runner.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace seclab::runner {
namespace {

constexpr std::uint32_t kPurposeKeys = 100;
constexpr std::uint32_t kStreamId = 1;

constexpr std::uint32_t kSpiAhForward = 0x300;
constexpr std::uint32_t kSpiEspForward = 0x301;
constexpr std::uint32_t kSpiAhReverse = 0x200;
constexpr std::uint32_t kSpiEspReverse = 0x201;

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

SimTime duration_of(double seconds_value) {
  return SimTime{std::llround(seconds_value * 1e6)};
}

sim::Topology load_topology(const RunSpec& spec) {
  switch (spec.scenario) {
    case Scenario::single_hop: return sim::Topology::single_hop();
    case Scenario::multi_hop: return sim::Topology::multi_hop();
    case Scenario::custom: return sim::Topology::parse(read_file(spec.topology_path));
  }
  throw ConfigError("unknown scenario");
}

std::map<sim::NodeId, std::string> assign_roles(const sim::Topology& topo, Scenario scenario) {
  std::map<sim::NodeId, std::string> roles;
  const auto& nodes = topo.nodes();
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (i == 0)
      roles[nodes[i].id] = "sender";
    else if (i + 1 == nodes.size())
      roles[nodes[i].id] = "receiver";
    else if (scenario == Scenario::multi_hop)
      roles[nodes[i].id] = "forwarder";
    else
      roles[nodes[i].id] = "node" + std::to_string(nodes[i].id);
  }
  return roles;
}

std::optional<crypto::CipherAlgorithm> cipher_for(EspChoice e) {
  switch (e) {
    case EspChoice::none: return std::nullopt;
    case EspChoice::aes: return crypto::CipherAlgorithm::aes_cbc;
    case EspChoice::tdes: return crypto::CipherAlgorithm::tdes_cbc;
  }
  return std::nullopt;
}

std::optional<crypto::AuthAlgorithm> auth_for(AhChoice a) {
  switch (a) {
    case AhChoice::none: return std::nullopt;
    case AhChoice::md5: return crypto::AuthAlgorithm::hmac_md5;
    case AhChoice::sha1: return crypto::AuthAlgorithm::hmac_sha1;
  }
  return std::nullopt;
}

std::size_t key_bits(const crypto::Algorithm& alg) {
  return std::visit([](auto a) { return crypto::key_bytes(a) * 8; }, alg);
}

}  // namespace

std::string_view to_string(Scenario s) {
  switch (s) {
    case Scenario::single_hop: return "single-hop";
    case Scenario::multi_hop: return "multi-hop";
    case Scenario::custom: return "custom";
  }
  return "?";
}

std::string_view to_string(EspChoice e) {
  switch (e) {
    case EspChoice::none: return "none";
    case EspChoice::aes: return "aes";
    case EspChoice::tdes: return "3des";
  }
  return "?";
}

std::string_view to_string(AhChoice a) {
  switch (a) {
    case AhChoice::none: return "none";
    case AhChoice::md5: return "md5";
    case AhChoice::sha1: return "sha1";
  }
  return "?";
}

Scenario parse_scenario(std::string_view text) {
  if (text == "single-hop" || text == "single_hop") return Scenario::single_hop;
  if (text == "multi-hop" || text == "multi_hop") return Scenario::multi_hop;
  if (text == "custom") return Scenario::custom;
  throw ConfigError("unknown scenario '" + std::string(text) + "'");
}

EspChoice parse_esp(std::string_view text) {
  if (text == "none") return EspChoice::none;
  if (text == "aes") return EspChoice::aes;
  if (text == "3des") return EspChoice::tdes;
  throw ConfigError("unknown ESP cipher '" + std::string(text) + "'");
}

AhChoice parse_ah(std::string_view text) {
  if (text == "none") return AhChoice::none;
  if (text == "md5") return AhChoice::md5;
  if (text == "sha1") return AhChoice::sha1;
  throw ConfigError("unknown AH algorithm '" + std::string(text) + "'");
}

sim::DelayMode parse_delay_mode(std::string_view text) {
  if (text == "parametric") return sim::DelayMode::parametric;
  if (text == "measured") return sim::DelayMode::measured;
  throw ConfigError("unknown delay mode '" + std::string(text) + "'");
}

std::string RunSpec::scheme() const {
  if (fig2) return "aes-md5";
  if (!secured()) return "plain";
  if (esp == EspChoice::none) return std::string(to_string(ah));
  if (ah == AhChoice::none) return std::string(to_string(esp));
  return std::string(to_string(esp)) + "-" + std::string(to_string(ah));
}

void RunSpec::validate() const {
  if (scenario == Scenario::custom && topology_path.empty())
    throw ConfigError("custom scenario requires a topology file");
  if (scenario != Scenario::custom && !topology_path.empty())
    throw ConfigError("a topology file requires the custom scenario");
  if (fig2 && scenario == Scenario::custom)
    throw ConfigError("the reference configuration names the preset addresses");
  if (fig2 && ((esp != EspChoice::none && esp != EspChoice::aes) ||
               (ah != AhChoice::none && ah != AhChoice::md5)))
    throw ConfigError("the reference configuration is AES with MD5");
  if (!(duration_s > 0.0)) throw ConfigError("duration must be positive");
}

std::uint64_t RunResult::total_bytes() const {
  std::uint64_t total = 0;
  for (const auto& [id, s] : summaries) total += s.counters.captured_bytes();
  return total;
}

ipsec::SecurityDatabases generate_security(EspChoice esp, AhChoice ah, wire::Address sender,
                                           wire::Address receiver, crypto::Rng& rng) {
  ipsec::SecurityDatabases db;
  auto add_pair = [&](ipsec::SecProtocol proto, crypto::Algorithm alg, std::uint32_t fwd_spi,
                      std::uint32_t rev_spi) {
    auto bits = key_bits(alg);
    db.add_sa({receiver, sender, proto, rev_spi, alg, crypto::random_key(bits, rng)});
    db.add_sa({sender, receiver, proto, fwd_spi, alg, crypto::random_key(bits, rng)});
  };
  std::vector<ipsec::SecProtocol> transforms;
  if (auto a = auth_for(ah)) add_pair(ipsec::SecProtocol::ah, *a, kSpiAhForward, kSpiAhReverse);
  if (auto c = cipher_for(esp)) {
    add_pair(ipsec::SecProtocol::esp, *c, kSpiEspForward, kSpiEspReverse);
    transforms.push_back(ipsec::SecProtocol::esp);
  }
  if (ah != AhChoice::none) transforms.push_back(ipsec::SecProtocol::ah);
  if (transforms.empty()) return db;
  db.add_policy({receiver, sender, ipsec::Direction::in, transforms});
  db.add_policy({sender, receiver, ipsec::Direction::out, transforms});
  return db;
}

RunResult execute(const RunSpec& spec) {
  spec.validate();
  sim::Topology topo = load_topology(spec);
  if (topo.nodes().size() < 2) throw ConfigError("topology needs at least two nodes");
  if (!topo.connected()) throw ConfigError("topology is not connected");

  RunResult result;
  result.scheme = spec.scheme();
  result.scenario = std::string(to_string(spec.scenario));
  result.roles = assign_roles(topo, spec.scenario);

  const auto& sender = topo.nodes().front();
  const auto& receiver = topo.nodes().back();

  std::map<sim::NodeId, ipsec::SecurityDatabases> security;
  if (spec.fig2) {
    security[sender.id] = ipsec::parse_setkey(ipsec::reference_setkey_conf());
    security[receiver.id] = ipsec::mirror(security[sender.id]);
  } else if (spec.secured()) {
    auto rng = sim::derive_rng(spec.seed, kPurposeKeys, 0);
    security[sender.id] =
        generate_security(spec.esp, spec.ah, sender.address, receiver.address, rng);
    security[receiver.id] = ipsec::mirror(security[sender.id]);
  }
  for (const auto& [id, path] : spec.setkey_files) {
    topo.node(id);
    security[id] = ipsec::parse_setkey(read_file(path));
  }
  for (const auto& [id, db] : security) {
    auto text = ipsec::render_setkey(db);
    result.setkey_round_trip = result.setkey_round_trip && ipsec::parse_setkey(text) == db;
    result.setkey_texts[id] = std::move(text);
  }

  sim::SimConfig config;
  config.seed = spec.seed;
  config.delay.mode = spec.delay_mode;
  config.hex_trace = spec.hex_trace;
  sim::Simulator simulator(topo, config);
  for (auto& [id, db] : security) simulator.set_security(id, std::move(db));
  if (spec.forwarder_allow) {
    auto filter = ipsec::ProtocolFilter::parse(*spec.forwarder_allow);
    for (const auto& n : topo.nodes())
      if (n.id != sender.id && n.id != receiver.id) simulator.set_protocol_filter(n.id, filter);
  }

  traffic::StreamConfig stream;
  stream.src = sender.address;
  stream.dst = receiver.address;
  stream.stream_id = kStreamId;
  stream.payload_bytes = spec.payload_bytes;
  stream.rate_pps = spec.rate_pps;
  stream.duration = duration_of(spec.duration_s);
  try {
    stream.validate();
  } catch (const traffic::ConfigError& e) {
    throw ConfigError(e.what());
  }
  simulator.add_stream(stream, kWarmUp);
  SimTime window_end = kWarmUp + stream.duration;
  simulator.run_until(window_end + kDrain);

  result.summaries = metrics::summarize(simulator.trace(), kWarmUp, window_end);
  for (const auto& n : topo.nodes()) result.summaries[n.id];

  std::vector<metrics::StampedPacket> sent, received;
  for (const auto& r : simulator.trace())
    if (r.action == sim::Action::send && r.tag && r.tag->stream_id == kStreamId)
      sent.push_back({r.tag->packet_id, r.time});
  for (const auto& d : simulator.deliveries())
    if (d.tag.stream_id == kStreamId) received.push_back({d.tag.packet_id, d.recv_time});
  result.delays = metrics::sample_delays(sent, received);
  if (!result.delays.samples.empty())
    result.avg_delay_us = metrics::average_delay_us(result.delays.samples);

  const auto& stats = simulator.stream_stats(kStreamId);
  result.sent = stats.sent;
  result.delivered = simulator.sink(kStreamId).unique_count();
  result.drops = stats.drops;
  result.conservation = simulator.conservation_holds(kStreamId);

  for (const auto& n : topo.nodes()) {
    std::optional<double> delay;
    if (n.id == receiver.id) delay = result.avg_delay_us;
    result.rows.push_back(metrics::make_row(result.scheme, result.scenario, result.roles[n.id],
                                            result.summaries[n.id], delay));
  }
  std::ostringstream csv;
  metrics::write_csv(csv, result.rows);
  result.csv = csv.str();
  result.trace_digest = simulator.trace_digest();
  result.routes = sim::dump_routes(simulator);

  if (!spec.out_dir.empty()) {
    std::filesystem::create_directories(spec.out_dir);
    write_file(spec.out_dir / "trace.txt", simulator.trace_text());
    if (spec.hex_trace) {
      std::string hex;
      for (const auto& line : simulator.hex_trace()) hex += line + "\n";
      write_file(spec.out_dir / "trace.hex", hex);
    }
  }
  return result;
}

RunResult run(const RunSpec& spec) {
  RunResult result = execute(spec);
  if (spec.out_dir.empty()) return result;
  const auto& dir = spec.out_dir;
  write_file(dir / "report.csv", result.csv);
  std::ostringstream series;
  metrics::write_delay_series(series, result.delays.samples);
  write_file(dir / ("delays-" + result.scheme + ".csv"), series.str());
  for (const auto& [id, text] : result.setkey_texts)
    write_file(dir / ("setkey-" + std::to_string(id) + ".conf"), text);
  write_file(dir / "trace.sha256", result.trace_digest + "\n");
  if (spec.dump_routes) write_file(dir / "routes.txt", result.routes);
  return result;
}

std::vector<std::pair<EspChoice, AhChoice>> sweep_schemes() {
  return {{EspChoice::none, AhChoice::none},
          {EspChoice::aes, AhChoice::md5},
          {EspChoice::aes, AhChoice::sha1},
          {EspChoice::tdes, AhChoice::md5},
          {EspChoice::tdes, AhChoice::sha1}};
}

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median of nothing");
  std::sort(values.begin(), values.end());
  std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : (values[n / 2 - 1] + values[n / 2]) / 2.0;
}

bool SweepResult::all_checks_pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
}

bool SweepResult::invariants_hold() const {
  return std::all_of(cells.begin(), cells.end(), [](const auto& c) { return c.invariants_hold(); });
}

namespace {

std::vector<metrics::ReportRow> median_rows(const std::vector<RunResult>& cells) {
  std::vector<std::tuple<std::string, std::string, std::string>> order;
  std::map<std::tuple<std::string, std::string, std::string>, std::vector<metrics::ReportRow>> groups;
  for (const auto& cell : cells) {
    for (const auto& row : cell.rows) {
      auto key = std::make_tuple(row.scheme, row.scenario, row.node_role);
      if (!groups.contains(key)) order.push_back(key);
      groups[key].push_back(row);
    }
  }
  std::vector<metrics::ReportRow> out;
  for (const auto& key : order) {
    const auto& rows = groups[key];
    auto med = [&](auto field) {
      std::vector<double> v;
      for (const auto& r : rows) v.push_back(static_cast<double>(field(r)));
      return median(std::move(v));
    };
    metrics::ReportRow m;
    std::tie(m.scheme, m.scenario, m.node_role) = key;
    m.tx_packets = static_cast<std::uint64_t>(std::llround(med([](const auto& r) { return r.tx_packets; })));
    m.rx_packets = static_cast<std::uint64_t>(std::llround(med([](const auto& r) { return r.rx_packets; })));
    m.fwd_packets = static_cast<std::uint64_t>(std::llround(med([](const auto& r) { return r.fwd_packets; })));
    m.avg_packet_size_bytes = med([](const auto& r) { return r.avg_packet_size_bytes; });
    m.bit_rate_bps = med([](const auto& r) { return r.bit_rate_bps; });
    m.packet_rate_pps = med([](const auto& r) { return r.packet_rate_pps; });
    std::vector<double> delays;
    for (const auto& r : rows)
      if (r.avg_delay_us) delays.push_back(*r.avg_delay_us);
    if (!delays.empty()) m.avg_delay_us = median(std::move(delays));
    out.push_back(std::move(m));
  }
  return out;
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(1);
  s << std::fixed << v;
  return s.str();
}

void check_cells(std::uint64_t seed, const std::string& scenario,
                 const std::map<std::string, const RunResult*>& by_scheme,
                 std::vector<OrderingCheck>& checks) {
  const RunResult& plain = *by_scheme.at("plain");
  for (const auto& [scheme, cell] : by_scheme) {
    if (scheme == "plain") continue;
    OrderingCheck c{seed, scenario, "size:" + scheme, true, {}};
    if (cell->total_bytes() <= plain.total_bytes()) {
      c.passed = false;
      c.detail += "total bytes " + std::to_string(cell->total_bytes()) +
                  " <= " + std::to_string(plain.total_bytes()) + "; ";
    }
    for (const auto& [id, s] : cell->summaries) {
      double base = plain.summaries.at(id).avg_packet_size_bytes;
      if (s.avg_packet_size_bytes <= base) {
        c.passed = false;
        c.detail += cell->roles.at(id) + " avg size " + fmt(s.avg_packet_size_bytes) +
                    " <= " + fmt(base) + "; ";
      }
    }
    if (c.passed) c.detail = "total " + std::to_string(cell->total_bytes()) + " > " +
                             std::to_string(plain.total_bytes());
    checks.push_back(std::move(c));
  }

  auto delay = [&](const std::string& scheme) {
    const auto& d = by_scheme.at(scheme)->avg_delay_us;
    return d ? *d : std::nan("");
  };
  double aes_worst = std::max(delay("aes-md5"), delay("aes-sha1"));
  double tdes_best = std::min(delay("3des-md5"), delay("3des-sha1"));
  OrderingCheck c{seed, scenario, "delay:aes<3des", aes_worst < tdes_best,
                  "max(aes) " + fmt(aes_worst) + " us vs min(3des) " + fmt(tdes_best) + " us"};
  checks.push_back(std::move(c));
}

}  // namespace

SweepResult sweep(const SweepSpec& spec) {
  if (spec.seeds.empty()) throw ConfigError("sweep needs at least one seed");
  SweepResult result;
  for (auto seed : spec.seeds) {
    for (auto scenario : {Scenario::single_hop, Scenario::multi_hop}) {
      std::map<std::string, const RunResult*> by_scheme;
      std::size_t first = result.cells.size();
      for (auto [esp, ah] : sweep_schemes()) {
        RunSpec rs;
        rs.scenario = scenario;
        rs.esp = esp;
        rs.ah = ah;
        rs.delay_mode = spec.delay_mode;
        rs.seed = seed;
        rs.duration_s = spec.duration_s;
        rs.rate_pps = spec.rate_pps;
        rs.payload_bytes = spec.payload_bytes;
        result.cells.push_back(execute(rs));
      }
      for (std::size_t i = first; i < result.cells.size(); ++i)
        by_scheme[result.cells[i].scheme] = &result.cells[i];
      check_cells(seed, std::string(to_string(scenario)), by_scheme, result.checks);
    }
  }
  result.medians = median_rows(result.cells);

  if (!spec.out_dir.empty()) {
    std::filesystem::create_directories(spec.out_dir);
    std::ostringstream med;
    metrics::write_csv(med, result.medians);
    write_file(spec.out_dir / "report.csv", med.str());
    for (auto seed : spec.seeds) {
      std::vector<metrics::ReportRow> rows;
      std::size_t k = 0;
      for (const auto& cell : result.cells) {
        // Cells are laid out seed-major, ten per seed.
        if (spec.seeds[k / 10] == seed) rows.insert(rows.end(), cell.rows.begin(), cell.rows.end());
        ++k;
      }
      std::ostringstream csv;
      metrics::write_csv(csv, rows);
      write_file(spec.out_dir / ("report-seed" + std::to_string(seed) + ".csv"), csv.str());
    }
    for (std::size_t k = 0; k < result.cells.size(); ++k) {
      const auto& cell = result.cells[k];
      std::ostringstream series;
      metrics::write_delay_series(series, cell.delays.samples);
      write_file(spec.out_dir / ("delays-" + cell.scenario + "-" + cell.scheme + "-seed" +
                                 std::to_string(spec.seeds[k / 10]) + ".csv"),
                 series.str());
    }
    std::ostringstream checks;
    for (const auto& c : result.checks)
      checks << (c.passed ? "PASS " : "FAIL ") << "seed=" << c.seed << ' ' << c.scenario << ' '
             << c.name << " (" << c.detail << ")\n";
    write_file(spec.out_dir / "checks.txt", checks.str());
  }
  return result;
}

}  // namespace seclab::runner
