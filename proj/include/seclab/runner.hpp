// Scenario runner: builds the network, provisions keys and policies, runs
// one stream and turns the trace into report rows. `sweep` repeats the
// ten scheme/scenario cells over several seeds.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "seclab/ipsec.hpp"
#include "seclab/metrics.hpp"
#include "seclab/simnet.hpp"

namespace seclab::runner {

using sim::ConfigError;

enum class Scenario { single_hop, multi_hop, custom };
enum class EspChoice { none, aes, tdes };
enum class AhChoice { none, md5, sha1 };

std::string_view to_string(Scenario s);
std::string_view to_string(EspChoice e);
std::string_view to_string(AhChoice a);
Scenario parse_scenario(std::string_view text);
EspChoice parse_esp(std::string_view text);
AhChoice parse_ah(std::string_view text);
sim::DelayMode parse_delay_mode(std::string_view text);

struct RunSpec {
  Scenario scenario = Scenario::single_hop;
  std::filesystem::path topology_path;
  EspChoice esp = EspChoice::none;
  AhChoice ah = AhChoice::none;
  sim::DelayMode delay_mode = sim::DelayMode::parametric;
  std::uint64_t seed = 1;
  double duration_s = 300.0;
  double rate_pps = traffic::kDefaultRatePps;
  std::size_t payload_bytes = traffic::kDefaultPayloadBytes;
  /// Per-node setkey files that replace the generated configuration.
  std::map<sim::NodeId, std::filesystem::path> setkey_files;
  /// Loads the reference MD5/AES configuration instead of fresh keys.
  bool fig2 = false;
  /// Allow list applied at every node that is neither sender nor receiver.
  std::optional<std::string> forwarder_allow;
  bool dump_routes = false;
  bool hex_trace = false;
  std::filesystem::path out_dir;

  bool secured() const { return esp != EspChoice::none || ah != AhChoice::none; }
  /// plain, aes-md5, 3des-sha1, aes (ESP only), md5 (AH only), ...
  std::string scheme() const;
  void validate() const;
};

inline constexpr SimTime kWarmUp = seconds(20);
inline constexpr SimTime kDrain = seconds(2);

struct RunResult {
  std::string scheme;
  std::string scenario;
  std::vector<metrics::ReportRow> rows;
  std::map<sim::NodeId, std::string> roles;
  std::map<sim::NodeId, metrics::NodeSummary> summaries;
  metrics::DelaySampling delays;
  std::optional<double> avg_delay_us;
  std::uint64_t sent = 0;
  std::uint64_t delivered = 0;
  std::map<sim::DropCause, std::uint64_t> drops;
  bool conservation = false;
  bool setkey_round_trip = true;
  std::map<sim::NodeId, std::string> setkey_texts;
  std::string trace_digest;
  std::string csv;
  std::string routes;

  bool invariants_hold() const { return conservation && setkey_round_trip; }
  /// Sum of the capture bytes over all nodes.
  std::uint64_t total_bytes() const;
};

/// Runs the simulation; nothing is written to disk.
RunResult execute(const RunSpec& spec);

/// execute() plus, when spec.out_dir is set: report.csv, delays-<scheme>.csv,
/// setkey-<node>.conf per secured node, trace.sha256 and optionally
/// routes.txt and trace.hex.
RunResult run(const RunSpec& spec);

/// Security configuration generated for the sender; the receiver loads the
/// mirror image.
ipsec::SecurityDatabases generate_security(EspChoice esp, AhChoice ah, wire::Address sender,
                                           wire::Address receiver, crypto::Rng& rng);

struct SweepSpec {
  std::vector<std::uint64_t> seeds{1};
  sim::DelayMode delay_mode = sim::DelayMode::parametric;
  double duration_s = 300.0;
  double rate_pps = traffic::kDefaultRatePps;
  std::size_t payload_bytes = traffic::kDefaultPayloadBytes;
  std::filesystem::path out_dir;
};

struct OrderingCheck {
  std::uint64_t seed = 0;
  std::string scenario;
  std::string name;
  bool passed = false;
  std::string detail;
};

struct SweepResult {
  std::vector<RunResult> cells;
  /// Per (scheme, scenario, role) medians across seeds.
  std::vector<metrics::ReportRow> medians;
  std::vector<OrderingCheck> checks;

  bool all_checks_pass() const;
  bool invariants_hold() const;
};

/// The five schemes in report order: plain, aes-md5, aes-sha1, 3des-md5,
/// 3des-sha1.
std::vector<std::pair<EspChoice, AhChoice>> sweep_schemes();

double median(std::vector<double> values);

SweepResult sweep(const SweepSpec& spec);

}  // namespace seclab::runner
