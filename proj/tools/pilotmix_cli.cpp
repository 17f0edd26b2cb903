// pilotmix: sweeps, closed-form bounds, self-checks and frame traces.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "pilotmix/collision.hpp"
#include "pilotmix/core_model.hpp"
#include "pilotmix/harness.hpp"
#include "pilotmix/receiver.hpp"
#include "pilotmix/verify.hpp"

namespace {

using namespace pilotmix;

constexpr int kConfigExit = 2;
constexpr int kUsageExit = 3;

struct Common {
  std::string config_path;
  std::string mode;
  std::string out_path;
  std::optional<double> snr_db;
};

/// Errors go to stderr as one JSON object per line.
void emit_error(const std::string& kind, const std::string& field, const std::string& message) {
  nlohmann::json err{{"error", kind}, {"field", field}, {"message", message}};
  std::cerr << err.dump() << '\n';
}

ProtocolConfig resolve_config(const Common& common) {
  ProtocolConfig cfg = common.config_path.empty() ? ProtocolConfig{} : load_config(common.config_path);
  if (!common.mode.empty()) {
    try {
      cfg.receiver_mode = parse_receiver_mode(common.mode);
    } catch (const std::exception& e) {
      throw ConfigException("receiver_mode", e.what());
    }
  }
  if (common.snr_db) cfg.snr_db = *common.snr_db;
  return require_valid(cfg);
}

/// Runs `body` with `out` bound to the --out file or stdout.
template <typename F>
void with_output(const std::string& path, F&& body) {
  if (path.empty() || path == "-") {
    body(std::cout);
    return;
  }
  std::ofstream file(path);
  if (!file) throw std::runtime_error("cannot write " + path);
  body(file);
}

void add_common(CLI::App* cmd, Common& common) {
  cmd->add_option("--config", common.config_path, "JSON protocol configuration");
  cmd->add_option("--mode", common.mode, "NoSic, InnerOnly, InnerAck, Nested or NestedAck");
  cmd->add_option("--out", common.out_path, "Output file (default: stdout)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pilot-mixture coded random access simulator"};
  app.require_subcommand(1);

  Common common;

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo PLR sweep, CSV output");
  add_common(simulate, common);
  std::string engine_name = "CollisionOracle";
  std::string sweep_text;
  std::int64_t trials = 1000;
  std::uint64_t seed = 1;
  std::optional<std::int64_t> min_loss_events;
  int workers = 1;
  bool genie = false;
  simulate->add_option("--engine", engine_name, "Phy, CollisionOracle or Analysis");
  simulate->add_option("--sweep", sweep_text, "e.g. k_a=100:2400:100")->required();
  simulate->add_option("--trials", trials, "Trials per value (maximum with a stop rule)");
  simulate->add_option("--seed", seed, "Master seed");
  simulate->add_option("--min-loss-events", min_loss_events,
                       "Stop a point once this many packets were lost");
  simulate->add_option("--workers", workers, "Worker threads (0: hardware concurrency)");
  simulate->add_option("--snr-db", common.snr_db, "Override the config's SNR");
  simulate->add_flag("--genie", genie, "Bounded-distance genie instead of BCH decoding");

  // bounds
  auto* bounds = app.add_subcommand("bounds", "Closed-form collision floor and no-SIC PLR");
  add_common(bounds, common);
  std::string bounds_sweep;
  std::vector<int> orders;
  bounds->add_option("--sweep", bounds_sweep, "e.g. k_a=1800:1800:1")->required();
  bounds->add_option("--orders", orders,
                     "Preamble orders p to tabulate (default: 1-4 and the config's)")
      ->delimiter(',');

  // verify
  auto* verify = app.add_subcommand("verify", "Built-in reference checks per module");

  // trace
  auto* trace = app.add_subcommand("trace", "Decode one frame and print its event log");
  add_common(trace, common);
  int users = 10;
  std::string grid_path;
  trace->add_option("--users", users, "Active users in the frame");
  trace->add_option("--seed", seed, "Frame seed");
  trace->add_option("--grid", grid_path, "Replay a grid file instead of random choices");
  trace->add_option("--snr-db", common.snr_db, "Override the config's SNR");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kUsageExit;
  }

  try {
    if (*verify) {
      const bool ok = report_verification(std::cout, run_verification());
      return ok ? 0 : 1;
    }

    const ProtocolConfig cfg = resolve_config(common);

    if (*simulate) {
      SweepSpec spec;
      spec.base = cfg;
      std::tie(spec.sweep_variable, spec.values) = parse_sweep(sweep_text);
      spec.engine = parse_engine(engine_name);
      spec.trials = trials;
      spec.master_seed = seed;
      spec.workers = workers > 0 ? workers : static_cast<int>(std::thread::hardware_concurrency());
      spec.trial_options.genie_codec = genie;
      if (min_loss_events) spec.stop_rule = StopRule{*min_loss_events};
      const auto rows = run_sweep(spec);
      with_output(common.out_path, [&](std::ostream& out) { write_csv(out, rows, cfg); });
      return 0;
    }

    if (*bounds) {
      const auto [variable, values] = parse_sweep(bounds_sweep);
      if (orders.empty()) {
        orders = {1, 2, 3, 4};
        if (cfg.psi.is_concentrated() && cfg.psi.min_degree() > 4) {
          orders.push_back(cfg.psi.min_degree());
        }
      }
      std::vector<int> usable;
      for (int p : orders) {
        if (p <= cfg.n_pilots) usable.push_back(p);
      }
      const auto rows = run_bounds(cfg, variable, values, usable);
      with_output(common.out_path, [&](std::ostream& out) { write_csv(out, rows, cfg); });
      return 0;
    }

    if (*trace) {
      FrameResult result;
      TraceLog log;
      if (!grid_path.empty()) {
        result = run_grid_instance(read_grid_file(grid_path), cfg, seed, &log);
      } else {
        TrialOptions options;
        options.trace = true;
        const TrialOutcome outcome = run_trial(cfg, users, seed, Engine::Phy, options);
        log = outcome.trace;
      }
      with_output(common.out_path, [&](std::ostream& out) {
        for (const auto& event : log) out << format_trace_event(event) << '\n';
      });
      return 0;
    }
  } catch (const ConfigException& e) {
    for (const auto& err : e.errors()) emit_error("config", err.field, err.message);
    return kConfigExit;
  } catch (const std::exception& e) {
    emit_error("runtime", "", e.what());
    return 1;
  }
  return 0;
}
