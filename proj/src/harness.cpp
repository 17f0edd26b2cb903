#include "pilotmix/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>
#include <thread>

#include "pilotmix/analysis.hpp"
#include "pilotmix/collision.hpp"

namespace pilotmix {

namespace {

enum StreamTag : std::uint64_t { kPayloadStream = 1, kChannelStream = 2, kNoiseStream = 3 };

std::string format_double(double v, const char* fmt = "%.10g") {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

std::string degree_label(const DegreeDistribution& d) {
  return d.is_concentrated() ? std::to_string(d.min_degree()) : d.to_string();
}

}  // namespace

std::string_view to_string(Engine engine) {
  switch (engine) {
    case Engine::Phy:
      return "Phy";
    case Engine::CollisionOracle:
      return "CollisionOracle";
    case Engine::Analysis:
      return "Analysis";
  }
  return "?";
}

Engine parse_engine(std::string_view name) {
  for (Engine e : {Engine::Phy, Engine::CollisionOracle, Engine::Analysis}) {
    if (to_string(e) == name) return e;
  }
  throw std::invalid_argument("unknown engine '" + std::string(name) + "'");
}

std::string_view to_string(SweepVariable v) { return v == SweepVariable::KA ? "k_a" : "k_s"; }

PhyFrameModel::PhyFrameModel(const ProtocolConfig& cfg, const PilotBook& book,
                             std::vector<UserTransmission> users,
                             std::vector<Symbols> payloads, std::uint64_t seed)
    : cfg_(cfg),
      book_(book),
      users_(std::move(users)),
      payloads_(std::move(payloads)),
      seed_(seed),
      slot_members_(static_cast<std::size_t>(cfg.n_slots)) {
  if (users_.size() != payloads_.size()) throw std::invalid_argument("one payload per user");
  for (std::size_t u = 0; u < users_.size(); ++u) {
    for (int slot : users_[u].slot_indices) {
      if (slot < 0 || slot >= cfg.n_slots) throw std::out_of_range("user slot out of range");
      slot_members_[slot].push_back(u);
    }
  }
}

CVector PhyFrameModel::channel(std::size_t user_index, int slot) const {
  CounterRng rng(derive_seed(seed_, kChannelStream, users_.at(user_index).user_id, slot));
  return draw_channel(cfg_.n_antennas, rng);
}

SlotSignal PhyFrameModel::synthesize(int slot, const std::map<UserId, int>& acked) const {
  std::vector<CVector> channels;
  std::vector<std::size_t> members;
  for (std::size_t u : slot_members_.at(static_cast<std::size_t>(slot))) {
    const auto it = acked.find(users_[u].user_id);
    if (it != acked.end() && it->second < slot) continue;
    members.push_back(u);
    channels.push_back(channel(u, slot));
  }
  std::vector<SlotUser> contributions;
  contributions.reserve(members.size());
  for (std::size_t i = 0; i < members.size(); ++i) {
    const std::size_t u = members[i];
    contributions.push_back({*users_[u].subset_in_slot(slot), payloads_[u], channels[i]});
  }
  CounterRng noise(derive_seed(seed_, kNoiseStream, slot));
  return synthesize_slot(contributions, book_, cfg_.n_antennas, cfg_.payload_symbols,
                         cfg_.noise_variance(), noise);
}

SlotSource PhyFrameModel::source() const {
  return [this](int slot, const std::map<UserId, int>& acked) {
    return synthesize(slot, acked);
  };
}

Bits trial_payload(std::uint64_t seed, int index) {
  CounterRng rng(derive_seed(seed, kPayloadStream, index));
  return codec::make_information_bits(static_cast<UserId>(index), rng);
}

TrialOutcome run_trial(const ProtocolConfig& cfg, int k_active, std::uint64_t seed,
                       Engine engine, TrialOptions options) {
  require_valid(cfg);
  if (engine == Engine::Analysis) {
    throw std::invalid_argument("the analysis engine has no trials");
  }
  TrialOutcome outcome;
  if (k_active <= 0) return outcome;

  std::vector<UserTransmission> users;
  users.reserve(static_cast<std::size_t>(k_active));
  for (int u = 0; u < k_active; ++u) users.push_back(derive_choices(trial_payload(seed, u), cfg));

  if (engine == Engine::CollisionOracle) {
    const FrameGrid grid(cfg.n_slots, cfg.n_pilots, std::move(users));
    const auto resolved = peel_frame(grid, cfg.receiver_mode);
    outcome.resolved_users.assign(resolved.begin(), resolved.end());
    outcome.resolved = static_cast<int>(resolved.size());
    outcome.lost = k_active - outcome.resolved;
    return outcome;
  }

  const PilotBook book(cfg.n_pilots);
  codec::PacketCodec real_codec;
  codec::GenieCodec genie_codec;
  std::vector<Symbols> payloads;
  payloads.reserve(users.size());
  for (const auto& tx : users) {
    payloads.push_back(real_codec.modulate(tx.payload_bits));
    if (options.genie_codec) {
      for (int slot : tx.slot_indices) genie_codec.add_candidate(slot, tx.payload_bits);
    }
  }
  const codec::PacketCodec& codec =
      options.genie_codec ? static_cast<const codec::PacketCodec&>(genie_codec) : real_codec;

  const PhyFrameModel model(cfg, book, users, std::move(payloads), seed);
  Receiver receiver(cfg, book, codec);
  if (options.trace) receiver.set_trace(&outcome.trace, seed);
  const FrameResult result = receiver.run_frame(model.source());

  for (const auto& [id, bits] : result.resolved) {
    if (id < users.size() && users[id].payload_bits == bits) outcome.resolved_users.push_back(id);
  }
  outcome.resolved = static_cast<int>(outcome.resolved_users.size());
  outcome.lost = k_active - outcome.resolved;
  return outcome;
}

FrameResult run_grid_instance(const FrameGrid& grid, ProtocolConfig cfg, std::uint64_t seed,
                              TraceLog* trace) {
  cfg.n_slots = grid.n_slots();
  cfg.n_pilots = grid.n_pilots();
  std::vector<UserTransmission> users = grid.users();
  std::vector<Symbols> payloads;
  const codec::PacketCodec codec;
  for (auto& tx : users) {
    CounterRng rng(derive_seed(seed, kPayloadStream, tx.user_id));
    tx.payload_bits = codec::make_information_bits(tx.user_id, rng);
    tx.repetition_degree = static_cast<int>(tx.slot_indices.size());
    payloads.push_back(codec.modulate(tx.payload_bits));
  }
  const PilotBook book(cfg.n_pilots);
  const PhyFrameModel model(cfg, book, users, std::move(payloads), seed);
  Receiver receiver(cfg, book, codec, table_resolver(users));
  if (trace != nullptr) receiver.set_trace(trace, seed);
  return receiver.run_frame(model.source());
}

Interval wilson_interval(std::int64_t lost, std::int64_t sent, double z) {
  if (sent <= 0) return {0.0, 1.0};
  const double n = static_cast<double>(sent);
  const double phat = static_cast<double>(lost) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (phat + z2 / (2 * n)) / denom;
  const double half = z * std::sqrt(phat * (1 - phat) / n + z2 / (4 * n * n)) / denom;
  return {std::max(0.0, std::min(center - half, phat)),
          std::min(1.0, std::max(center + half, phat))};
}

std::uint64_t trial_seed(std::uint64_t master_seed, int swept_value, std::int64_t trial) {
  return derive_seed(master_seed, static_cast<std::uint64_t>(swept_value),
                     static_cast<std::uint64_t>(trial));
}

namespace {

std::vector<TrialOutcome> run_batch(const SweepSpec& spec, const ProtocolConfig& cfg,
                                    int value, std::int64_t first, std::int64_t count) {
  std::vector<TrialOutcome> out(static_cast<std::size_t>(count));
  auto work = [&](std::int64_t i) {
    const std::uint64_t seed = trial_seed(spec.master_seed, value, first + i);
    out[static_cast<std::size_t>(i)] =
        spec.trial_override ? spec.trial_override(value, seed)
                            : run_trial(cfg, value, seed, spec.engine, spec.trial_options);
  };
  const int workers = static_cast<int>(std::min<std::int64_t>(std::max(1, spec.workers), count));
  if (workers <= 1) {
    for (std::int64_t i = 0; i < count; ++i) work(i);
    return out;
  }
  std::atomic<std::int64_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::int64_t i = next++; i < count && !failed; i = next++) {
        try {
          work(i);
        } catch (...) {
          if (!failed.exchange(true)) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return out;
}

PlrEstimate make_estimate(std::string_view name, int value, std::int64_t trials,
                          std::int64_t sent, std::int64_t lost, Engine engine,
                          std::string mode) {
  PlrEstimate row;
  row.swept_name = std::string(name);
  row.swept_value = value;
  row.trials = trials;
  row.packets_sent = sent;
  row.packets_lost = lost;
  row.plr = sent > 0 ? static_cast<double>(lost) / static_cast<double>(sent) : 0.0;
  const Interval ci = wilson_interval(lost, sent);
  row.ci_low = ci.low;
  row.ci_high = ci.high;
  row.engine = engine;
  row.mode = std::move(mode);
  return row;
}

PlrEstimate closed_form_row(std::string_view name, int value, double plr, std::string mode) {
  PlrEstimate row = make_estimate(name, value, 0, 0, 0, Engine::Analysis, std::move(mode));
  row.plr = plr;
  row.ci_low = plr;
  row.ci_high = plr;
  return row;
}

double no_sic_formula(const ProtocolConfig& cfg, const DegreeDistribution& psi, int users) {
  return cfg.framed ? analysis::plr_framed_nosic(cfg.lambda, psi, cfg.n_slots, cfg.n_pilots, users)
                    : analysis::plr_slotted_nosic(psi, cfg.n_pilots, users);
}

}  // namespace

std::vector<PlrEstimate> run_sweep(const SweepSpec& spec) {
  const ProtocolConfig& cfg = require_valid(spec.base);
  if (spec.values.empty()) throw std::invalid_argument("sweep has no values");
  if (spec.trials < 1) throw std::invalid_argument("trials must be >= 1");
  const std::string_view name = to_string(spec.sweep_variable);

  std::vector<PlrEstimate> rows;
  for (int value : spec.values) {
    const auto start = std::chrono::steady_clock::now();
    PlrEstimate row;
    if (spec.engine == Engine::Analysis) {
      row = closed_form_row(name, value, no_sic_formula(cfg, cfg.psi, value), "NoSic");
    } else {
      const std::int64_t batch = spec.stop_rule ? std::max(1, spec.batch_size) : spec.trials;
      std::int64_t done = 0;
      std::int64_t lost = 0;
      std::int64_t sent = 0;
      while (done < spec.trials) {
        const std::int64_t count = std::min(batch, spec.trials - done);
        for (const TrialOutcome& t : run_batch(spec, cfg, value, done, count)) {
          lost += t.lost;
          sent += t.lost + t.resolved;
        }
        done += count;
        if (spec.stop_rule && lost >= spec.stop_rule->min_loss_events) break;
      }
      row = make_estimate(name, value, done, sent, lost, spec.engine,
                          std::string(to_string(cfg.receiver_mode)));
    }
    row.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<PlrEstimate> run_bounds(const ProtocolConfig& base, SweepVariable variable,
                                    const std::vector<int>& values,
                                    const std::vector<int>& orders) {
  const ProtocolConfig& cfg = require_valid(base);
  const std::string_view name = to_string(variable);
  std::vector<DegreeDistribution> psis;
  if (orders.empty()) {
    psis.push_back(cfg.psi);
  } else {
    for (int p : orders) psis.push_back(DegreeDistribution::concentrated(p));
  }

  std::vector<PlrEstimate> rows;
  for (int value : values) {
    for (const auto& psi : psis) {
      ProtocolConfig variant = cfg;
      variant.psi = psi;
      require_valid(variant);
      const auto start = std::chrono::steady_clock::now();
      PlrEstimate floor_row;
      const bool concentrated = psi.is_concentrated() && cfg.lambda.is_concentrated();
      if (concentrated) {
        floor_row = closed_form_row(
            name, value, analysis::plr_lower_bound(analysis::bound_query(variant, value)),
            "LowerBound");
      }
      PlrEstimate formula_row =
          closed_form_row(name, value, no_sic_formula(variant, psi, value), "NoSic");
      const double elapsed =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      for (PlrEstimate* row : {&floor_row, &formula_row}) {
        if (row->mode.empty()) continue;
        row->p_or_psi = degree_label(psi);
        row->wall_time_s = elapsed;
        rows.push_back(std::move(*row));
      }
    }
  }
  return rows;
}

std::pair<SweepVariable, std::vector<int>> parse_sweep(std::string_view text) {
  const auto eq = text.find('=');
  if (eq == std::string_view::npos) throw std::invalid_argument("sweep must look like k_a=a:b:step");
  const std::string_view name = text.substr(0, eq);
  SweepVariable variable;
  if (name == "k_a") {
    variable = SweepVariable::KA;
  } else if (name == "k_s") {
    variable = SweepVariable::KS;
  } else {
    throw std::invalid_argument("sweep variable must be k_a or k_s");
  }
  int start = 0;
  int stop = 0;
  int step = 0;
  const std::string range(text.substr(eq + 1));
  char tail = 0;
  if (std::sscanf(range.c_str(), "%d:%d:%d%c", &start, &stop, &step, &tail) != 3 || step <= 0 ||
      start > stop || start < 0) {
    throw std::invalid_argument("bad sweep range '" + range + "'");
  }
  std::vector<int> values;
  for (int v = start; v <= stop; v += step) values.push_back(v);
  return {variable, values};
}

std::string csv_header() {
  return "engine,mode,N_s,N_P,M,r_or_lambda,p_or_psi,snr_db,swept_name,swept_value,trials,"
         "sent,lost,plr,ci_low,ci_high,wall_time_s";
}

std::string csv_row(const PlrEstimate& row, const ProtocolConfig& cfg) {
  std::string out;
  out += std::string(to_string(row.engine)) + ',' + row.mode + ',';
  out += std::to_string(cfg.n_slots) + ',' + std::to_string(cfg.n_pilots) + ',' +
         std::to_string(cfg.n_antennas) + ',';
  out += degree_label(cfg.lambda) + ',';
  out += (row.p_or_psi.empty() ? degree_label(cfg.psi) : row.p_or_psi) + ',';
  out += format_double(cfg.snr_db) + ',';
  out += row.swept_name + ',' + std::to_string(row.swept_value) + ',';
  out += std::to_string(row.trials) + ',' + std::to_string(row.packets_sent) + ',' +
         std::to_string(row.packets_lost) + ',';
  out += format_double(row.plr) + ',' + format_double(row.ci_low) + ',' +
         format_double(row.ci_high) + ',';
  out += format_double(row.wall_time_s, "%.3f");
  return out;
}

void write_csv(std::ostream& out, const std::vector<PlrEstimate>& rows,
               const ProtocolConfig& cfg) {
  out << csv_header() << '\n';
  for (const auto& row : rows) out << csv_row(row, cfg) << '\n';
}

}  // namespace pilotmix
