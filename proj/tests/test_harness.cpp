#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "pilotmix/harness.hpp"

using namespace pilotmix;

namespace {

ProtocolConfig small_framed() {
  ProtocolConfig cfg;
  cfg.n_slots = 10;
  cfg.n_pilots = 16;
  cfg.n_antennas = 32;
  return cfg;
}

ProtocolConfig unframed(int n_pilots, int p, int antennas, double snr_db) {
  ProtocolConfig cfg;
  cfg.n_slots = 1;
  cfg.n_pilots = n_pilots;
  cfg.n_antennas = antennas;
  cfg.lambda = DegreeDistribution::concentrated(1);
  cfg.psi = DegreeDistribution::concentrated(p);
  cfg.snr_db = snr_db;
  cfg.receiver_mode = ReceiverMode::InnerOnly;
  cfg.framed = false;
  return cfg;
}

// Everything but the trailing wall_time column.
std::string counts_only(const std::vector<PlrEstimate>& rows, const ProtocolConfig& cfg) {
  std::string out;
  for (const auto& row : rows) {
    const std::string line = csv_row(row, cfg);
    out += line.substr(0, line.rfind(',')) + '\n';
  }
  return out;
}

}  // namespace

TEST_CASE("wilson interval") {
  // Frozen from the closed form with z = 1.959963984540054.
  const Interval a = wilson_interval(10, 100);
  CHECK(a.low == doctest::Approx(0.0552291370606751).epsilon(1e-12));
  CHECK(a.high == doctest::Approx(0.17436566150491345).epsilon(1e-12));

  const Interval none = wilson_interval(0, 50);
  CHECK(none.low == 0.0);
  CHECK(none.high == doctest::Approx(0.07134759913335872).epsilon(1e-12));

  const Interval all = wilson_interval(50, 50);
  CHECK(all.low == doctest::Approx(0.9286524008666414).epsilon(1e-12));
  CHECK(all.high == 1.0);

  const Interval empty = wilson_interval(0, 0);
  CHECK(empty.low == 0.0);
  CHECK(empty.high == 1.0);
}

TEST_CASE("trials are deterministic and empty trials lose nothing") {
  const ProtocolConfig cfg = small_framed();
  const TrialOutcome zero = run_trial(cfg, 0, 7, Engine::CollisionOracle);
  CHECK(zero.lost == 0);
  CHECK(zero.resolved == 0);

  for (Engine engine : {Engine::CollisionOracle, Engine::Phy}) {
    const TrialOutcome a = run_trial(cfg, 12, 99, engine);
    const TrialOutcome b = run_trial(cfg, 12, 99, engine);
    CHECK(a.lost == b.lost);
    CHECK(a.resolved_users == b.resolved_users);
    CHECK(a.lost + a.resolved == 12);
  }
  CHECK_THROWS_AS(run_trial(cfg, 3, 1, Engine::Analysis), std::invalid_argument);
}

TEST_CASE("trial seeds separate values and trials") {
  CHECK(trial_seed(1, 100, 0) != trial_seed(1, 100, 1));
  CHECK(trial_seed(1, 100, 0) != trial_seed(1, 200, 0));
  CHECK(trial_seed(1, 100, 0) != trial_seed(2, 100, 0));
  CHECK(trial_seed(1, 100, 5) == trial_seed(1, 100, 5));
}

TEST_CASE("sweep counts do not depend on the worker count") {
  SweepSpec spec;
  spec.base = small_framed();
  spec.base.n_pilots = 4;
  spec.values = {10, 20, 30};
  spec.trials = 200;
  spec.master_seed = 42;
  spec.stop_rule = StopRule{25};
  spec.batch_size = 16;

  spec.workers = 1;
  const std::string serial = counts_only(run_sweep(spec), spec.base);
  spec.workers = 4;
  const std::string parallel = counts_only(run_sweep(spec), spec.base);
  CHECK(serial == parallel);
  CHECK(serial.find(",0,0,0,") == std::string::npos);

  spec.master_seed = 43;
  CHECK(counts_only(run_sweep(spec), spec.base) != serial);
}

TEST_CASE("stop rule halts at the first batch boundary past the threshold") {
  SweepSpec spec;
  spec.base = small_framed();
  spec.values = {5};
  spec.trials = 1000;
  spec.batch_size = 10;
  spec.stop_rule = StopRule{25};
  // Every trial loses exactly one of five packets.
  spec.trial_override = [](int k, std::uint64_t) {
    TrialOutcome t;
    t.lost = 1;
    t.resolved = k - 1;
    return t;
  };
  const auto rows = run_sweep(spec);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].trials == 30);
  CHECK(rows[0].packets_lost == 30);
  CHECK(rows[0].packets_sent == 150);
  CHECK(rows[0].plr == doctest::Approx(0.2));

  spec.stop_rule.reset();
  spec.trials = 37;
  const auto fixed = run_sweep(spec);
  CHECK(fixed[0].trials == 37);
  CHECK(fixed[0].packets_lost == 37);
}

TEST_CASE("analysis engine yields closed-form rows without trials") {
  SweepSpec spec;
  spec.base = ProtocolConfig{};
  spec.values = {400};
  spec.engine = Engine::Analysis;
  const auto rows = run_sweep(spec);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].trials == 0);
  CHECK(rows[0].mode == "NoSic");
  CHECK(rows[0].plr > 5e-4);
  CHECK(rows[0].plr < 2e-3);
}

TEST_CASE("bounds rows") {
  const auto rows = run_bounds(ProtocolConfig{}, SweepVariable::KA, {1800}, {1, 2});
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].mode == "LowerBound");
  CHECK(rows[0].p_or_psi == "1");
  CHECK(rows[0].plr == doctest::Approx(5.657562721773529e-05).epsilon(1e-9));
  CHECK(rows[1].mode == "NoSic");
  CHECK(rows[2].p_or_psi == "2");
  CHECK(rows[2].plr == doctest::Approx(1.4400230123672499e-08).epsilon(1e-9));
}

TEST_CASE("parse_sweep") {
  const auto [var, values] = parse_sweep("k_a=100:2400:100");
  CHECK(var == SweepVariable::KA);
  REQUIRE(values.size() == 24);
  CHECK(values.front() == 100);
  CHECK(values.back() == 2400);

  const auto [var2, single] = parse_sweep("k_s=8:8:1");
  CHECK(var2 == SweepVariable::KS);
  CHECK(single == std::vector<int>{8});

  for (const char* bad : {"k_a", "k_b=1:2:1", "k_a=1:2", "k_a=5:1:1", "k_a=1:5:0", "k_a=1:5:1x"}) {
    CHECK_THROWS_AS(parse_sweep(bad), std::invalid_argument);
  }
}

TEST_CASE("csv schema") {
  const ProtocolConfig cfg;
  CHECK(csv_header() ==
        "engine,mode,N_s,N_P,M,r_or_lambda,p_or_psi,snr_db,swept_name,swept_value,trials,"
        "sent,lost,plr,ci_low,ci_high,wall_time_s");
  PlrEstimate row;
  row.swept_name = "k_a";
  row.swept_value = 400;
  row.trials = 3;
  row.packets_sent = 1200;
  row.packets_lost = 6;
  row.plr = 0.005;
  row.ci_low = 0.002;
  row.ci_high = 0.01;
  row.mode = "Nested";
  row.wall_time_s = 1.25;
  CHECK(csv_row(row, cfg) ==
        "CollisionOracle,Nested,62,128,256,2,2,10,k_a,400,3,1200,6,0.005,0.002,0.01,1.250");

  std::ostringstream out;
  write_csv(out, {row, row}, cfg);
  const std::string text = out.str();
  CHECK(std::count(text.begin(), text.end(), '\n') == 3);
}

// The oracle is not a strict upper bound: when users collide on every pilot,
// MRC over the shared estimate can still decode the stronger one (capture).
// Containment therefore holds in most, not all, trials, and every PHY-only
// decode must be such a capture.
TEST_CASE("phy resolved set is contained in the oracle's up to capture") {
  int trials = 0;
  int contained = 0;
  for (int k_s : {8, 16, 32}) {
    const ProtocolConfig cfg = unframed(128, 2, 256, 20.0);
    for (std::uint64_t t = 0; t < 30; ++t) {
      const std::uint64_t seed = trial_seed(5, k_s, static_cast<std::int64_t>(t));
      const TrialOutcome phy = run_trial(cfg, k_s, seed, Engine::Phy);
      const TrialOutcome oracle = run_trial(cfg, k_s, seed, Engine::CollisionOracle);
      std::vector<UserId> a = phy.resolved_users;
      std::vector<UserId> b = oracle.resolved_users;
      std::sort(a.begin(), a.end());
      std::sort(b.begin(), b.end());
      ++trials;
      if (std::includes(b.begin(), b.end(), a.begin(), a.end())) {
        ++contained;
        continue;
      }
      std::vector<std::vector<int>> pilots;
      for (int u = 0; u < k_s; ++u) {
        pilots.push_back(derive_choices(trial_payload(seed, u), cfg).pilot_subsets[0]);
      }
      for (UserId u : a) {
        if (std::binary_search(b.begin(), b.end(), u)) continue;
        for (int pilot : pilots[u]) {
          bool shared = false;
          for (int v = 0; v < k_s; ++v) {
            const bool unresolved = !std::binary_search(b.begin(), b.end(), UserId(v));
            if (UserId(v) != u && unresolved &&
                std::count(pilots[v].begin(), pilots[v].end(), pilot) > 0) {
              shared = true;
            }
          }
          CHECK_MESSAGE(shared, "user " << u << " decoded without capture");
        }
      }
    }
  }
  MESSAGE("contained in " << contained << " of " << trials);
  CHECK(contained >= 0.95 * trials);
}
