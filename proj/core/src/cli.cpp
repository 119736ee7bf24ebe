#include "qscf/cli.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "qscf/errors.hpp"
#include "qscf/net_harness.hpp"
#include "qscf/security_analysis.hpp"

namespace qscf::cli {

using nlohmann::ordered_json;

namespace {

std::string fmt(const char* spec, double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string num(double v) { return fmt("%.12g", v); }

// Percentage with one decimal, the precision used throughout the outputs.
std::string pct(double p) { return fmt("%.1f", 100.0 * p) + "%"; }

void emit(const CommonOptions& options, const std::string& text) {
  if (options.out_path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(options.out_path, std::ios::binary);
  if (!out) {
    throw ConfigError("cannot open output file: " + options.out_path);
  }
  out << text;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw ConfigError("cannot open output file: " + path);
  }
  out << text;
}

std::string label_name(int index) {
  static const char* names[4] = {"00", "01", "10", "11"};
  return names[index];
}

std::string iotable_csv(const IoTable& table,
                        const std::array<std::uint64_t, 4>* detections) {
  std::string csv = "sent,det_00,det_01,det_10,det_11";
  if (detections) csv += ",detections";
  csv += "\n";
  for (int row = 0; row < 4; ++row) {
    csv += label_name(row);
    for (int col = 0; col < 4; ++col) {
      csv += "," + num(table.p[row][col]);
    }
    if (detections) csv += "," + std::to_string((*detections)[row]);
    csv += "\n";
  }
  return csv;
}

}  // namespace

RunConfig load_config(const CommonOptions& options) {
  if (options.config_path.empty()) {
    throw ConfigError("no config file given (use --config PATH)");
  }
  RunConfig config = load_run_config(options.config_path);
  for (const std::string& assignment : options.overrides) {
    apply_override(config, assignment);
  }
  if (options.format != "json" && options.format != "csv") {
    throw ConfigError("format must be 'json' or 'csv'");
  }

  config.scenario.rng = ScenarioRng::from_master_seed(options.seed);
  if (!options.random_file.empty()) {
    std::error_code ec;
    const auto size = std::filesystem::file_size(options.random_file, ec);
    if (ec) {
      throw ConfigError("cannot stat random file: " + options.random_file);
    }
    if (size < 2) {
      throw ConfigError("random file too small to split between parties: " +
                        options.random_file);
    }
    // Alice draws from the first half of the file, Bob from the second;
    // channel randomness stays on the seeded stream.
    config.scenario.rng.alice =
        RngSpec::file(options.random_file, 0, size / 2);
    config.scenario.rng.bob = RngSpec::file(options.random_file, size / 2, 0);
  }
  return config;
}

void run_analyze(const AnalyzeOptions& options) {
  const RunConfig config = load_config(options.common);
  const SecurityReport report = quantum_gain(config.scenario);

  if (options.common.format == "csv") {
    std::string csv =
        "p_alice,p_bob,p_honest_abort,p_classical,gain,gain_pp,gain_rel_pct,"
        "rate_hz\n";
    csv += num(report.p_alice) + "," + num(report.p_bob) + "," +
           num(report.p_honest_abort) + "," + num(report.p_classical) + "," +
           num(report.gain) + "," + num(report.gain_pp) + "," +
           num(report.gain_rel_pct) + "," + num(report.rate_hz) + "\n";
    emit(options.common, csv);
    return;
  }
  ordered_json j;
  j["scenario"] = scenario_to_json(config.scenario);
  j["p_alice"] = report.p_alice;
  j["p_bob"] = report.p_bob;
  j["p_honest_abort"] = report.p_honest_abort;
  j["p_classical"] = report.p_classical;
  j["gain"] = report.gain;
  j["gain_pp"] = report.gain_pp;
  j["gain_rel_pct"] = report.gain_rel_pct;
  j["rate_hz"] = report.rate_hz;
  j["display"]["p_alice"] = pct(report.p_alice);
  j["display"]["p_bob"] = pct(report.p_bob);
  j["display"]["p_honest_abort"] = pct(report.p_honest_abort);
  j["display"]["p_classical"] = pct(report.p_classical);
  j["display"]["gain"] = fmt("%.4g", report.gain_pp) + " pp";
  j["display"]["rate"] = fmt("%.1f", report.rate_hz) + " flips/s";
  emit(options.common, j.dump(2) + "\n");
}

void run_simulate(const SimulateOptions& options) {
  const RunConfig config = load_config(options.common);
  const ScenarioConfig& sc = config.scenario;
  const bool want_io = !options.iotable_path.empty();
  const SessionResult result =
      run_session_full(sc, options.n_flips, options.common.jobs, want_io);
  const SessionStats& stats = result.stats;

  const PhotonStatistics phot = photon_statistics(sc.source);
  const double p_click = per_pulse_click_prob(phot, sc.link);
  const double h_expected =
      honest_abort_prob(sc.link.qber, p_click, sc.pulses_per_flip);
  const double abort_observed =
      static_cast<double>(stats.n_abort_nodetect + stats.n_abort_mismatch) /
      static_cast<double>(stats.n_flips);
  const double abort_sigma = std::sqrt(h_expected * (1.0 - h_expected) /
                                       static_cast<double>(stats.n_flips));

  if (want_io) {
    write_file(options.iotable_path,
               iotable_csv(result.io.table, &result.io.detections_per_row));
  }

  char digest[17];
  std::snprintf(digest, sizeof digest, "%016llx",
                static_cast<unsigned long long>(stats.outcome_digest));

  if (options.common.format == "csv") {
    std::string csv =
        "n_flips,n_success,n_abort_nodetect,n_abort_mismatch,p0_hat,p1_hat,"
        "duration_model_s,rate_hz,outcome_digest\n";
    csv += std::to_string(stats.n_flips) + "," +
           std::to_string(stats.n_success) + "," +
           std::to_string(stats.n_abort_nodetect) + "," +
           std::to_string(stats.n_abort_mismatch) + "," + num(stats.p0_hat) +
           "," + num(stats.p1_hat) + "," + num(stats.duration_model_s) + "," +
           num(stats.rate_hz) + "," + digest + "\n";
    emit(options.common, csv);
    return;
  }

  ordered_json j;
  j["scenario"] = scenario_to_json(sc);
  j["n_flips"] = stats.n_flips;
  j["stats"]["n_success"] = stats.n_success;
  j["stats"]["n_abort_nodetect"] = stats.n_abort_nodetect;
  j["stats"]["n_abort_mismatch"] = stats.n_abort_mismatch;
  j["stats"]["n_outcome0"] = stats.n_outcome0;
  j["stats"]["n_outcome1"] = stats.n_outcome1;
  j["stats"]["p0_hat"] = stats.p0_hat;
  j["stats"]["p1_hat"] = stats.p1_hat;
  j["stats"]["duration_model_s"] = stats.duration_model_s;
  j["stats"]["rate_hz"] = stats.rate_hz;
  j["stats"]["alice_bits"] = stats.alice_bits;
  j["stats"]["bob_bits"] = stats.bob_bits;
  j["stats"]["outcome_digest"] = digest;
  j["analytic"]["p_click"] = p_click;
  j["analytic"]["p_honest_abort"] = h_expected;
  j["analytic"]["abort_observed"] = abort_observed;
  j["analytic"]["abort_sigma"] = abort_sigma;
  j["analytic"]["abort_within_4sigma"] =
      std::abs(abort_observed - h_expected) <= 4.0 * abort_sigma;
  j["display"]["abort_observed"] = pct(abort_observed);
  j["display"]["p0_hat"] = pct(stats.p0_hat);
  j["display"]["rate"] = fmt("%.1f", stats.rate_hz) + " flips/s";
  emit(options.common, j.dump(2) + "\n");
}

std::vector<std::uint64_t> default_k_grid() {
  return {1000,   3000,   10000,   30000,   50000,
          100000, 300000, 1000000, 3000000};
}

std::vector<double> default_mu_grid() {
  return {1e-4, 3e-4, 1e-3, 1.3e-3, 3e-3, 1e-2};
}

void run_sweep(const SweepOptions& options) {
  const RunConfig config = load_config(options.common);
  SourceKind kind = config.scenario.source.kind;
  if (options.kind == "sps") {
    kind = SourceKind::Sps;
  } else if (options.kind == "wcp") {
    kind = SourceKind::Wcp;
  } else if (!options.kind.empty()) {
    throw ConfigError("sweep kind must be 'sps' or 'wcp'");
  }
  const auto k_grid = options.k_grid.empty() ? default_k_grid()
                                             : options.k_grid;
  const auto mu_grid =
      options.mu_grid.empty() ? default_mu_grid() : options.mu_grid;
  const GainMap map =
      sweep_gain(kind, config.scenario.source.g2, k_grid, mu_grid,
                 config.scenario.link, options.fixed_a, options.common.jobs);

  if (options.common.format == "json") {
    ordered_json j;
    j["kind"] = kind == SourceKind::Sps ? "sps" : "wcp";
    j["cells"] = ordered_json::array();
    for (const GainCell& cell : map.cells) {
      ordered_json c;
      c["K"] = cell.pulses_per_flip;
      c["mu"] = cell.mu;
      c["a_star"] = cell.a_star;
      c["p_alice"] = cell.p_alice;
      c["p_bob"] = cell.p_bob;
      c["H"] = cell.honest_abort;
      c["p_classical"] = cell.p_classical;
      c["gain"] = cell.gain;
      c["fairness_ok"] = cell.fairness_ok;
      if (!cell.note.empty()) c["note"] = cell.note;
      j["cells"].push_back(c);
    }
    emit(options.common, j.dump(2) + "\n");
    return;
  }
  std::string csv = "K,mu,a_star,p_alice,p_bob,H,p_classical,gain,note\n";
  for (const GainCell& cell : map.cells) {
    std::string note = cell.note;
    for (char& ch : note) {
      if (ch == ',' || ch == '\n') ch = ';';
    }
    csv += std::to_string(cell.pulses_per_flip) + "," + num(cell.mu) + "," +
           num(cell.a_star) + "," + num(cell.p_alice) + "," +
           num(cell.p_bob) + "," + num(cell.honest_abort) + "," +
           num(cell.p_classical) + "," + num(cell.gain) + "," + note + "\n";
  }
  emit(options.common, csv);
}

void run_iotable(const IoTableOptions& options) {
  const RunConfig config = load_config(options.common);
  const ScenarioConfig& sc = config.scenario;
  if (!options.simulated) {
    const IoTable table = expected_io_table(sc.state_param_a, sc.link.qber);
    if (options.common.format == "json") {
      ordered_json j;
      j["mode"] = "expected";
      j["rows"] = table.p;
      emit(options.common, j.dump(2) + "\n");
    } else {
      emit(options.common, iotable_csv(table, nullptr));
    }
    return;
  }
  const SimulatedIoTable io =
      simulated_io_table(sc, options.n_flips, options.common.jobs);
  if (options.common.format == "json") {
    ordered_json j;
    j["mode"] = "simulated";
    j["n_flips"] = options.n_flips;
    j["rows"] = io.table.p;
    j["detections_per_row"] = io.detections_per_row;
    j["all_rows_sufficient"] = io.all_rows_ok();
    emit(options.common, j.dump(2) + "\n");
  } else {
    emit(options.common, iotable_csv(io.table, &io.detections_per_row));
  }
}

void run_fairness(const FairnessOptions& options) {
  const RunConfig config = load_config(options.common);
  const ScenarioConfig& sc = config.scenario;
  const PhotonStatistics stats = photon_statistics(sc.source);
  const StateParameter a_star = solve_fair_a(stats, sc.pulses_per_flip);
  const double p_alice = alice_cheat_prob(a_star.value());
  const double p_bob = bob_cheat_prob(a_star.value(), stats,
                                      sc.pulses_per_flip);
  if (options.common.format == "csv") {
    std::string csv = "a_star,p_alice,p_bob,residual\n";
    csv += num(a_star.value()) + "," + num(p_alice) + "," + num(p_bob) + "," +
           num(std::abs(p_alice - p_bob)) + "\n";
    emit(options.common, csv);
    return;
  }
  ordered_json j;
  j["a_star"] = a_star.value();
  j["p_alice"] = p_alice;
  j["p_bob"] = p_bob;
  j["residual"] = std::abs(p_alice - p_bob);
  j["config_a"] = sc.state_param_a;
  emit(options.common, j.dump(2) + "\n");
}

namespace {

ScenarioConfig party_scenario(const PartyOptions& options) {
  RunConfig config = load_config(options.common);
  return config.scenario;
}

BitSource party_bits(const PartyOptions& options, std::uint64_t stream_id) {
  if (!options.common.random_file.empty()) {
    return BitSource::from_file(options.common.random_file);
  }
  return BitSource::seeded(options.common.seed, stream_id);
}

void emit_party_summary(const PartyOptions& options,
                        const ordered_json& summary) {
  if (options.common.format == "csv") {
    std::string header;
    std::string row;
    for (auto it = summary.begin(); it != summary.end(); ++it) {
      if (!it.value().is_primitive()) continue;
      header += (header.empty() ? "" : ",") + it.key();
      row += row.empty() ? "" : ",";
      row += it.value().is_string() ? it.value().get<std::string>()
                                    : it.value().dump();
    }
    emit(options.common, header + "\n" + row + "\n");
    return;
  }
  emit(options.common, summary.dump(2) + "\n");
}

}  // namespace

void run_alice_party(const PartyOptions& options) {
  if (options.endpoint.empty()) {
    throw ConfigError("alice needs --endpoint to reach physics");
  }
  const ScenarioConfig sc = party_scenario(options);
  auto stream = net::connect_endpoint(options.endpoint);
  const net::PartySummary summary =
      net::run_alice(*stream, sc, options.n_flips, party_bits(options, 1));
  emit_party_summary(options, summary.to_json());
}

void run_bob_party(const PartyOptions& options) {
  if (options.endpoint.empty()) {
    throw ConfigError("bob needs --endpoint to reach physics");
  }
  const ScenarioConfig sc = party_scenario(options);
  auto stream = net::connect_endpoint(options.endpoint);
  net::BobOptions bob;
  bob.cheat = options.cheat;
  bob.cheat_target = options.cheat_target;
  const net::PartySummary summary = net::run_bob(
      *stream, sc, options.n_flips, party_bits(options, 2), bob);
  emit_party_summary(options, summary.to_json());
}

void run_physics_party(const PartyOptions& options) {
  if (options.alice_endpoint.empty() || options.bob_endpoint.empty()) {
    throw ConfigError(
        "physics needs --alice-endpoint and --bob-endpoint to serve");
  }
  ScenarioConfig sc = party_scenario(options);
  sc.rng.physics = RngSpec::seeded(options.common.seed, 3);
  net::Listener alice_listener(options.alice_endpoint);
  net::Listener bob_listener(options.bob_endpoint);
  std::cerr << "physics listening: alice=" << alice_listener.bound_endpoint()
            << " bob=" << bob_listener.bound_endpoint() << "\n";
  auto alice_stream = alice_listener.accept_one();
  auto bob_stream = bob_listener.accept_one();
  const net::PhysicsSummary summary = net::serve_physics(
      sc, options.n_flips, *alice_stream, *bob_stream);
  emit_party_summary(options, summary.to_json());
  if (!summary.clean_finish) {
    throw ProtocolError("session did not finish cleanly: " + summary.note);
  }
}

int guarded(const std::function<void()>& fn) {
  try {
    fn();
    return kExitOk;
  } catch (const EntropyExhausted& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitEntropy;
  } catch (const ProtocolError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitProtocol;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
}

}  // namespace qscf::cli
