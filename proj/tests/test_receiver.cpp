#include "doctest.h"

#include <cmath>
#include <limits>
#include <sstream>

#include "pilotmix/codec.hpp"
#include "pilotmix/collision.hpp"
#include "pilotmix/harness.hpp"
#include "pilotmix/instances.hpp"
#include "pilotmix/receiver.hpp"

using namespace pilotmix;

namespace {

FrameGrid grid_of(std::string_view text) {
  std::istringstream in{std::string(text)};
  return read_grid(in);
}

ProtocolConfig noiseless(ReceiverMode mode, int antennas = 32) {
  ProtocolConfig cfg;
  cfg.snr_db = std::numeric_limits<double>::infinity();
  cfg.n_antennas = antennas;
  cfg.receiver_mode = mode;
  return cfg;
}

std::set<UserId> ids(const FrameResult& r) {
  std::set<UserId> out;
  for (const auto& entry : r.resolved) out.insert(entry.first);
  return out;
}

std::vector<std::string> lines(const TraceLog& log) {
  std::vector<std::string> out;
  for (const auto& e : log) out.push_back(format_trace_event(e));
  return out;
}

// Single user with pilots {2, 5} of 8, alone in its slot.
struct Singleton {
  PilotBook book{8};
  codec::PacketCodec pc;
  CVector h;
  Symbols x;
  std::vector<int> subset{2, 5};
  SlotSignal slot;
  DecodedPacket pkt;

  explicit Singleton(int antennas) {
    CounterRng rng(17);
    h = draw_channel(antennas, rng);
    x = pc.modulate(codec::make_information_bits(1, rng));
    const std::vector<SlotUser> users{{subset, x, h}};
    slot = synthesize_slot(users, book, antennas, 256, 0.0, rng);
    pkt.transmission.user_id = 1;
    pkt.transmission.slot_indices = {0};
    pkt.transmission.pilot_subsets = {subset};
    pkt.payload_symbols = x;
    pkt.site = {0, 2, 0};
    pkt.effective_scale = std::sqrt(2.0);
  }
};

}  // namespace

TEST_CASE("inner SIC: scaled estimate cancels exactly, literal leaves (1 - 1/sqrt 2)") {
  Singleton s(16);
  const CVector phi = estimate_channel_mf(s.slot, 2, s.book);

  SlotSignal scaled = s.slot;
  inner_sic_subtract(scaled, phi, s.pkt, s.book, InnerSicScale::EffectiveChannel);
  CHECK(scaled.preamble_part.norm() < 1e-12);
  CHECK(scaled.payload_part.norm() < 1e-10);
  CHECK(scaled.sic_count == 1);

  SlotSignal literal = s.slot;
  inner_sic_subtract(literal, phi, s.pkt, s.book, InnerSicScale::Literal);
  const double factor = 1.0 - 1.0 / std::sqrt(2.0);
  const double want_p = 8.0 * s.h.squaredNorm() * factor * factor;
  const double want_y = 256.0 * s.h.squaredNorm() * factor * factor;
  CHECK(literal.preamble_part.squaredNorm() > 0.0);
  CHECK(literal.preamble_part.squaredNorm() == doctest::Approx(want_p).epsilon(1e-10));
  CHECK(literal.payload_part.squaredNorm() == doctest::Approx(want_y).epsilon(1e-10));
}

TEST_CASE("outer SIC: payload-aided estimate is exact without noise") {
  Singleton s(16);
  const CVector h_hat = outer_sic_estimate(s.slot, s.x);
  CHECK((h_hat - s.h).norm() < 1e-12);
  SlotSignal slot = s.slot;
  outer_sic_subtract(slot, h_hat, build_preamble(s.subset, s.book), s.x);
  CHECK(slot.preamble_part.norm() < 1e-11);
  CHECK(slot.payload_part.norm() < 1e-11);
}

TEST_CASE("rank-1 projection update tracks a full recomputation") {
  Singleton s(16);
  CounterRng rng(5);
  SlotSignal slot = s.slot;
  // Add a second user and some noise so the update is non-trivial.
  const CVector h2 = draw_channel(16, rng);
  const Symbols x2 = s.pc.modulate(codec::make_information_bits(2, rng));
  slot.preamble_part += h2 * build_preamble(std::vector<int>{5, 7}, s.book);
  slot.payload_part += h2 * x2;
  SlotProjection proj = project_slot(slot, s.book);
  const CVector h_hat = outer_sic_estimate(slot, s.x);
  cancel_contribution(slot, proj, h_hat, s.subset, s.book, s.x);
  const SlotProjection fresh = project_slot(slot, s.book);
  CHECK((proj.phis - fresh.phis).norm() < 1e-10);
  CHECK((proj.energy - fresh.energy).norm() < 1e-8);
  CHECK((proj.combined - fresh.combined).norm() < 1e-8 * fresh.combined.norm());
}

TEST_CASE("chain instance: inner SIC restarts the sweep after each decode") {
  const FrameGrid g = grid_of(instances::kChain);
  for (std::uint64_t seed : {1, 2, 3, 4}) {
    TraceLog log;
    const auto r = run_grid_instance(g, noiseless(ReceiverMode::InnerOnly), seed, &log);
    CHECK(ids(r) == std::set<UserId>{1, 2, 3});
    REQUIRE(log.size() == 3);
    // A on its private pilot, then B and C on the pilots freed in turn.
    CHECK(log[0].user == 1);
    CHECK(log[0].pilot == 0);
    CHECK(log[0].sic_iteration == 0);
    CHECK(log[1].user == 2);
    CHECK(log[1].pilot == 1);
    CHECK(log[1].sic_iteration == 1);
    CHECK(log[2].user == 3);
    CHECK(log[2].pilot == 2);
    CHECK(log[2].sic_iteration == 2);
  }
}

TEST_CASE("outer-only instance: frozen realization without capture") {
  // Seed 1 draws channels for which neither colliding pair can be captured,
  // so the outcome matches the hand-traced collision model.
  const FrameGrid g = grid_of(instances::kOuterOnly);
  TraceLog inner_log;
  CHECK(ids(run_grid_instance(g, noiseless(ReceiverMode::NoSic), 1)) == std::set<UserId>{2, 3});
  CHECK(ids(run_grid_instance(g, noiseless(ReceiverMode::InnerOnly), 1, &inner_log)) ==
        std::set<UserId>{2, 3});
  TraceLog log;
  CHECK(ids(run_grid_instance(g, noiseless(ReceiverMode::Nested), 1, &log)) ==
        std::set<UserId>{1, 2, 3});
  CHECK(lines(log) == std::vector<std::string>{
                          "trial=1 slot=0 pilot=1 sic=0 user=3 phase=inner",
                          "trial=1 slot=1 pilot=1 sic=0 user=2 phase=inner",
                          "trial=1 slot=1 pilot=0 sic=2 user=1 phase=outer",
                          "trial=1 slot=0 pilot=0 sic=2 user=1 phase=outer",
                      });
}

TEST_CASE("shadowed instance: A surfaces only after B's replica is removed") {
  const FrameGrid g = grid_of(instances::kShadowed);
  TraceLog log;
  CHECK(ids(run_grid_instance(g, noiseless(ReceiverMode::InnerOnly), 1)) == std::set<UserId>{2});
  CHECK(ids(run_grid_instance(g, noiseless(ReceiverMode::Nested), 1, &log)) ==
        std::set<UserId>{1, 2});
  CHECK(lines(log) == std::vector<std::string>{
                          "trial=1 slot=1 pilot=2 sic=0 user=2 phase=inner",
                          "trial=1 slot=0 pilot=0 sic=1 user=1 phase=outer",
                      });
}

TEST_CASE("ACK removes a decoded user from its later slots") {
  // User 1 is alone in slot 0 and collides with user 2 in slot 1.
  const FrameGrid g = grid_of("grid 2 4\n1 0,1 0;0\n2 1 0\n");
  for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
    TraceLog log;
    CHECK(ids(run_grid_instance(g, noiseless(ReceiverMode::InnerAck), seed, &log)) ==
          std::set<UserId>{1, 2});
    REQUIRE(log.size() == 2);
    CHECK(log[1].user == 2);
    CHECK(log[1].slot == 1);
    CHECK(ids(run_grid_instance(g, noiseless(ReceiverMode::NestedAck), seed)) ==
          std::set<UserId>{1, 2});
  }
}

TEST_CASE("ACK modes never outer-cancel a replica that was not sent") {
  // User 1 is decoded in slot 0 and acknowledged. Its slot-1 replica was
  // never transmitted, so the outer phase must leave slot 1 untouched.
  const FrameGrid g = grid_of("grid 2 4\n1 0,1 0;1\n2 1 2\n");
  TraceLog log;
  CHECK(ids(run_grid_instance(g, noiseless(ReceiverMode::NestedAck), 3, &log)) ==
        std::set<UserId>{1, 2});
  for (const auto& e : log) CHECK(e.phase == SicPhase::Inner);
}

TEST_CASE("a decode on a pilot outside the replayed subset is rejected") {
  Singleton s(32);
  UserTransmission wrong;
  wrong.user_id = 1;
  wrong.slot_indices = {0};
  wrong.pilot_subsets = {{3}};
  ProtocolConfig cfg = noiseless(ReceiverMode::InnerOnly);
  cfg.n_pilots = 8;
  const Receiver rx(cfg, s.book, s.pc, table_resolver({wrong}));
  CHECK_FALSE(rx.try_decode(s.slot, 0, 2, estimate_channel_mf(s.slot, 2, s.book)).has_value());

  UserTransmission right = wrong;
  right.pilot_subsets = {s.subset};
  const Receiver rx2(cfg, s.book, s.pc, table_resolver({right}));
  const auto pkt = rx2.try_decode(s.slot, 0, 2, estimate_channel_mf(s.slot, 2, s.book));
  REQUIRE(pkt.has_value());
  CHECK(pkt->effective_scale == doctest::Approx(std::sqrt(2.0)));
  CHECK(pkt->site.pilot == 2);
}

TEST_CASE("identical choices are lost in every mode") {
  const FrameGrid g = grid_of(instances::kIdenticalPair);
  for (auto mode : {ReceiverMode::NoSic, ReceiverMode::InnerOnly, ReceiverMode::Nested}) {
    const auto got = ids(run_grid_instance(g, noiseless(mode), 2));
    CHECK(got.count(3) == 1);
  }
}

TEST_CASE("trace records round-trip") {
  const TraceEvent e{7, 3, 17, 1, 42, SicPhase::Outer};
  const std::string line = format_trace_event(e);
  CHECK(line == "trial=7 slot=3 pilot=17 sic=1 user=42 phase=outer");
  CHECK(parse_trace_event(line) == e);
  CHECK_THROWS(parse_trace_event("trial=1 slot=2"));
  CHECK_THROWS(parse_trace_event("trial=1 slot=2 pilot=3 sic=0 user=1 phase=sideways"));
  CHECK_THROWS(parse_trace_event("trial=x slot=2 pilot=3 sic=0 user=1 phase=inner"));
}

TEST_CASE("mode ordering on random frames") {
  // Nested only adds cancellations after the inner pass, so at high SNR it
  // resolves at least as many users as inner-only in every frame.
  ProtocolConfig cfg;
  cfg.n_slots = 16;
  cfg.n_pilots = 32;
  cfg.n_antennas = 64;
  cfg.snr_db = 20;
  const int trials = 40;
  int nested_ok = 0;
  int inner_ok = 0;
  for (int t = 0; t < trials; ++t) {
    int resolved[3];
    int i = 0;
    for (auto mode : {ReceiverMode::NoSic, ReceiverMode::InnerOnly, ReceiverMode::Nested}) {
      cfg.receiver_mode = mode;
      resolved[i++] = run_trial(cfg, 60, derive_seed(99, t), Engine::Phy).resolved;
    }
    if (resolved[2] >= resolved[1]) ++nested_ok;
    if (resolved[1] >= resolved[0]) ++inner_ok;
  }
  CHECK(nested_ok == trials);
  CHECK(inner_ok >= trials - 1);
}
