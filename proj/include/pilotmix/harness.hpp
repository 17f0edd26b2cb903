#pragma once

// Monte Carlo engine: per-trial realizations, parameter sweeps with
// deterministic seeding, PLR estimates with Wilson intervals, CSV output.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pilotmix/codec.hpp"
#include "pilotmix/core_model.hpp"
#include "pilotmix/phy.hpp"
#include "pilotmix/receiver.hpp"

namespace pilotmix {

enum class Engine { Phy, CollisionOracle, Analysis };
std::string_view to_string(Engine engine);
Engine parse_engine(std::string_view name);

enum class SweepVariable { KA, KS };
std::string_view to_string(SweepVariable v);

/// Ground-truth frame for the PHY engine: users, their symbols, and a seed
/// from which every channel vector and noise matrix is drawn. Channel
/// (user, slot) and noise (slot) streams are independent of the receiver
/// mode, so all modes see the same realization.
class PhyFrameModel {
 public:
  PhyFrameModel(const ProtocolConfig& cfg, const PilotBook& book,
                std::vector<UserTransmission> users, std::vector<Symbols> payloads,
                std::uint64_t seed);

  const std::vector<UserTransmission>& users() const { return users_; }
  CVector channel(std::size_t user_index, int slot) const;
  /// Slot signal with every user except those acknowledged before `slot`.
  SlotSignal synthesize(int slot, const std::map<UserId, int>& acked = {}) const;
  SlotSource source() const;

 private:
  const ProtocolConfig& cfg_;
  const PilotBook& book_;
  std::vector<UserTransmission> users_;
  std::vector<Symbols> payloads_;
  std::uint64_t seed_;
  std::vector<std::vector<std::size_t>> slot_members_;
};

struct TrialOptions {
  /// Replace BCH decoding by the bounded-distance genie (approximation).
  bool genie_codec = false;
  bool trace = false;
};

struct TrialOutcome {
  int lost = 0;
  int resolved = 0;
  /// Ids of the resolved users (user id = index in the trial).
  std::vector<UserId> resolved_users;
  TraceLog trace;
};

/// Information bits of user `index` in a trial.
Bits trial_payload(std::uint64_t trial_seed, int index);

/// One realization with k_active users. Deterministic in
/// (cfg, k_active, trial_seed, engine, options).
TrialOutcome run_trial(const ProtocolConfig& cfg, int k_active, std::uint64_t trial_seed,
                       Engine engine, TrialOptions options = {});

/// Runs the PHY receiver on a constructed instance whose placements are
/// prescribed by `grid` (cfg's n_slots / n_pilots are taken from the grid).
/// Payloads are random with the grid's user ids embedded; placements are
/// replayed through a lookup table instead of derive_choices.
FrameResult run_grid_instance(const class FrameGrid& grid, ProtocolConfig cfg,
                              std::uint64_t seed, TraceLog* trace = nullptr);

struct StopRule {
  std::int64_t min_loss_events = 100;
};

struct SweepSpec {
  ProtocolConfig base;
  SweepVariable sweep_variable = SweepVariable::KA;
  std::vector<int> values;
  /// Trial budget per value; with a stop rule, the maximum.
  std::int64_t trials = 1;
  std::uint64_t master_seed = 1;
  Engine engine = Engine::CollisionOracle;
  std::optional<StopRule> stop_rule;
  int workers = 1;
  /// Stop-rule checks happen only at batch boundaries, so results do not
  /// depend on the worker count.
  int batch_size = 64;
  TrialOptions trial_options;
  /// Test hook replacing run_trial.
  std::function<TrialOutcome(int k_active, std::uint64_t trial_seed)> trial_override;
};

struct PlrEstimate {
  std::string swept_name;
  int swept_value = 0;
  std::int64_t trials = 0;
  std::int64_t packets_sent = 0;
  std::int64_t packets_lost = 0;
  double plr = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  Engine engine = Engine::CollisionOracle;
  std::string mode;
  /// Overrides the config's psi in the CSV when nonempty.
  std::string p_or_psi;
  double wall_time_s = 0.0;
};

struct Interval {
  double low;
  double high;
};

/// Wilson score interval, z = 1.959964 (95%).
Interval wilson_interval(std::int64_t lost, std::int64_t sent, double z = 1.959963984540054);

std::uint64_t trial_seed(std::uint64_t master_seed, int swept_value, std::int64_t trial);

std::vector<PlrEstimate> run_sweep(const SweepSpec& spec);

/// Closed-form rows for each swept value and each concentrated preamble
/// order: the collision floor ("LowerBound") and the no-SIC approximation
/// ("NoSic"). An empty `orders` uses the config's psi for the no-SIC row and
/// requires a concentrated psi for the floor.
std::vector<PlrEstimate> run_bounds(const ProtocolConfig& cfg, SweepVariable variable,
                                    const std::vector<int>& values,
                                    const std::vector<int>& orders);

/// "k_a=100:2400:100" -> (KA, {100, 200, ..., 2400}); bounds inclusive.
std::pair<SweepVariable, std::vector<int>> parse_sweep(std::string_view text);

std::string csv_header();
std::string csv_row(const PlrEstimate& row, const ProtocolConfig& cfg);
void write_csv(std::ostream& out, const std::vector<PlrEstimate>& rows,
               const ProtocolConfig& cfg);

}  // namespace pilotmix
