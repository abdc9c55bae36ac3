// manet_seclab: run one secured stream scenario or the full scheme sweep.
//
//   manet_seclab run --scenario multi-hop --esp aes --ah sha1 --seed 7 --out out/
//   manet_seclab sweep --seeds 1,2,3,4,5 --delay-mode measured --out sweep/
//
// Exit status: 0 success, 1 an invariant or ordering check failed,
// 2 configuration error.

#include <cstdlib>
#include <iostream>

#include "CLI11.hpp"
#include "seclab/runner.hpp"

namespace {

using namespace seclab;

struct RunArgs {
  std::string scenario = "single-hop";
  std::string esp = "none";
  std::string ah = "none";
  std::string delay_mode = "parametric";
  std::uint64_t seed = 1;
  double duration_s = 300.0;
  double rate_pps = traffic::kDefaultRatePps;
  std::size_t payload_bytes = traffic::kDefaultPayloadBytes;
  std::vector<std::string> setkey;
  std::string topology;
  bool dump_routes = false;
  bool fig2 = false;
  bool hex_trace = false;
  std::string forwarder_allow;
  std::string out;
};

struct SweepArgs {
  std::vector<std::uint64_t> seeds{1};
  std::string delay_mode = "parametric";
  double duration_s = 300.0;
  double rate_pps = traffic::kDefaultRatePps;
  std::size_t payload_bytes = traffic::kDefaultPayloadBytes;
  std::string out;
};

runner::RunSpec to_spec(const RunArgs& a) {
  runner::RunSpec spec;
  spec.scenario = runner::parse_scenario(a.scenario);
  spec.esp = runner::parse_esp(a.esp);
  spec.ah = runner::parse_ah(a.ah);
  spec.delay_mode = runner::parse_delay_mode(a.delay_mode);
  spec.seed = a.seed;
  spec.duration_s = a.duration_s;
  spec.rate_pps = a.rate_pps;
  spec.payload_bytes = a.payload_bytes;
  spec.topology_path = a.topology;
  if (!a.topology.empty() && spec.scenario != runner::Scenario::custom)
    spec.scenario = runner::Scenario::custom;
  for (const auto& item : a.setkey) {
    auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0)
      throw runner::ConfigError("--setkey expects <node-id>=<path>, got '" + item + "'");
    sim::NodeId id = 0;
    try {
      id = static_cast<sim::NodeId>(std::stoul(item.substr(0, eq)));
    } catch (const std::exception&) {
      throw runner::ConfigError("--setkey: bad node id in '" + item + "'");
    }
    spec.setkey_files[id] = item.substr(eq + 1);
  }
  spec.fig2 = a.fig2;
  spec.dump_routes = a.dump_routes;
  spec.hex_trace = a.hex_trace;
  if (!a.forwarder_allow.empty()) spec.forwarder_allow = a.forwarder_allow;
  spec.out_dir = a.out;
  return spec;
}

int do_run(const RunArgs& args) {
  auto spec = to_spec(args);
  auto result = runner::run(spec);
  std::cout << result.csv;
  std::cout << "# sent=" << result.sent << " delivered=" << result.delivered;
  for (const auto& [cause, n] : result.drops) std::cout << " drop:" << sim::to_string(cause) << '=' << n;
  std::cout << '\n';
  if (result.delays.short_sample) std::cout << "# short delay sample\n";
  std::cout << "# trace sha256 " << result.trace_digest << '\n';
  if (spec.dump_routes) std::cout << result.routes;
  if (!result.conservation) std::cerr << "invariant failed: packet conservation\n";
  if (!result.setkey_round_trip) std::cerr << "invariant failed: setkey round trip\n";
  return result.invariants_hold() ? 0 : 1;
}

int do_sweep(const SweepArgs& args) {
  runner::SweepSpec spec;
  spec.seeds = args.seeds;
  spec.delay_mode = runner::parse_delay_mode(args.delay_mode);
  spec.duration_s = args.duration_s;
  spec.rate_pps = args.rate_pps;
  spec.payload_bytes = args.payload_bytes;
  spec.out_dir = args.out;
  auto result = runner::sweep(spec);
  metrics::write_csv(std::cout, result.medians);
  for (const auto& c : result.checks)
    std::cout << (c.passed ? "PASS " : "FAIL ") << "seed=" << c.seed << ' ' << c.scenario << ' '
              << c.name << " (" << c.detail << ")\n";
  if (!result.invariants_hold()) std::cerr << "invariant failed in at least one cell\n";
  return result.invariants_hold() && result.all_checks_pass() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deterministic MANET security overhead lab"};
  app.require_subcommand(1);

  RunArgs run_args;
  auto* run = app.add_subcommand("run", "Run one scenario");
  run->add_option("--scenario", run_args.scenario, "single-hop, multi-hop or custom");
  run->add_option("--esp", run_args.esp, "none, aes or 3des");
  run->add_option("--ah", run_args.ah, "none, md5 or sha1");
  run->add_option("--delay-mode", run_args.delay_mode, "parametric or measured");
  run->add_option("--seed", run_args.seed)->envname("MANET_SECLAB_SEED");
  run->add_option("--duration-s", run_args.duration_s);
  run->add_option("--rate-pps", run_args.rate_pps);
  run->add_option("--payload-bytes", run_args.payload_bytes);
  run->add_option("--setkey", run_args.setkey, "<node-id>=<path>, repeatable");
  run->add_option("--topology", run_args.topology, "topology file (implies custom)");
  run->add_flag("--dump-routes", run_args.dump_routes);
  run->add_flag("--fig2", run_args.fig2, "load the reference MD5/AES setkey.conf");
  run->add_flag("--hex-trace", run_args.hex_trace, "also write trace.hex");
  run->add_option("--forwarder-allow", run_args.forwarder_allow,
                  "protocols intermediate nodes pass, e.g. udp,olsr");
  run->add_option("--out", run_args.out, "output directory");

  SweepArgs sweep_args;
  auto* sweep = app.add_subcommand("sweep", "Run the ten scheme/scenario cells per seed");
  sweep->add_option("--seeds", sweep_args.seeds)->delimiter(',')->envname("MANET_SECLAB_SEED");
  sweep->add_option("--delay-mode", sweep_args.delay_mode);
  sweep->add_option("--duration-s", sweep_args.duration_s);
  sweep->add_option("--rate-pps", sweep_args.rate_pps);
  sweep->add_option("--payload-bytes", sweep_args.payload_bytes);
  sweep->add_option("--out", sweep_args.out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*run) return do_run(run_args);
    return do_sweep(sweep_args);
  } catch (const runner::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
  } catch (const traffic::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
  } catch (const ipsec::SetkeyError& e) {
    std::cerr << "setkey error: " << e.what() << '\n';
  } catch (const ipsec::PolicyError& e) {
    std::cerr << "policy error: " << e.what() << '\n';
  } catch (const wire::DecodeError& e) {
    std::cerr << "config error: " << e.what() << '\n';
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "config error: " << e.what() << '\n';
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
  }
  return 2;
}
