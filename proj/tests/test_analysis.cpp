#include "doctest.h"

#include <cmath>

#include "pilotmix/analysis.hpp"
#include "pilotmix/collision.hpp"

using namespace pilotmix;
using namespace pilotmix::analysis;

// Reference values below were computed once with 50-digit arithmetic
// (direct products and sums, no log-domain tricks) and frozen.

namespace {

BoundQuery framed(int p, int n_users) {
  BoundQuery q;
  q.scenario = Scenario::FramedNested;
  q.n_slots = 62;
  q.n_pilots = 128;
  q.r = 2;
  q.p = p;
  q.n_users = n_users;
  return q;
}

}  // namespace

TEST_CASE("collision floor at the framed operating point") {
  CHECK(plr_lower_bound(framed(1, 1800)) ==
        doctest::Approx(5.657562721773529e-05).epsilon(1e-9));
  CHECK(plr_lower_bound(framed(2, 1800)) ==
        doctest::Approx(1.4400230123672499e-08).epsilon(1e-9));
}

TEST_CASE("collision floor, unframed") {
  BoundQuery q;
  q.scenario = Scenario::SlottedUnframed;
  q.n_pilots = 128;
  q.p = 2;
  q.n_users = 100;
  CHECK(plr_lower_bound(q) == doctest::Approx(0.0091493393305512908).epsilon(1e-9));
  q.n_pilots = 32;
  q.p = 1;
  q.n_users = 10;
  CHECK(plr_lower_bound(q) == doctest::Approx(0.15841512818515184).epsilon(1e-12));
}

TEST_CASE("collision probability edge cases") {
  BoundQuery q;
  q.scenario = Scenario::SlottedUnframed;
  q.n_pilots = 4;
  q.p = 2;
  q.n_users = 1;
  CHECK(collision_prob(q) == 0.0);
  q.n_users = 7;  // more users than the six choices
  CHECK(collision_prob(q) == 1.0);
  q.n_users = 2;
  CHECK(collision_prob(q) == doctest::Approx(1.0 / 6.0));
  CHECK(log_choice_count(q) == doctest::Approx(std::log(6.0)));
  q.n_users = 0;
  CHECK_THROWS(collision_prob(q));
  q.n_users = 2;
  q.p = 5;
  CHECK_THROWS(collision_prob(q));
  // Huge choice counts stay finite and tiny.
  BoundQuery big = framed(8, 2);
  CHECK(collision_prob(big) > 0.0);
  CHECK(collision_prob(big) < 1e-20);
}

TEST_CASE("bound_query takes degrees from the config") {
  ProtocolConfig cfg;
  const BoundQuery q = bound_query(cfg, 10);
  CHECK(q.r == 2);
  CHECK(q.p == 2);
  CHECK(q.scenario == Scenario::FramedNested);
  cfg.psi = DegreeDistribution({{1, 0.5}, {2, 0.5}});
  CHECK_THROWS_AS(bound_query(cfg, 10), std::invalid_argument);
}

TEST_CASE("slotted no-SIC formula") {
  const auto psi2 = DegreeDistribution::concentrated(2);
  CHECK(plr_slotted_nosic(psi2, 128, 64) ==
        doctest::Approx(0.39591785730717322).epsilon(1e-12));
  CHECK(plr_slotted_nosic(DegreeDistribution::concentrated(3), 32, 20) ==
        doctest::Approx(0.60534979719388293).epsilon(1e-12));
  CHECK(plr_slotted_nosic(psi2, 128, 1) == 0.0);
  CHECK(plr_slotted_nosic(DegreeDistribution({{1, 0.5}, {3, 0.5}}), 64, 10) ==
        doctest::Approx(0.13194686225003524).epsilon(1e-12));
  CHECK_THROWS(plr_slotted_nosic(psi2, 128, 0));
}

TEST_CASE("framed no-SIC formula") {
  const auto x2 = DegreeDistribution::concentrated(2);
  CHECK(plr_framed_nosic(x2, x2, 62, 128, 200) ==
        doctest::Approx(1.0723745711285772e-4).epsilon(1e-10));
  CHECK(plr_framed_nosic(x2, x2, 62, 128, 400) ==
        doctest::Approx(1.2420173532846750e-3).epsilon(1e-10));
  CHECK(plr_framed_nosic(x2, x2, 62, 128, 800) ==
        doctest::Approx(1.2694615821577611e-2).epsilon(1e-10));
  const DegreeDistribution mixed({{1, 0.5}, {2, 0.5}});
  CHECK(plr_framed_nosic(mixed, x2, 62, 128, 400) ==
        doctest::Approx(0.010883606616329315).epsilon(1e-10));
}

TEST_CASE("framed formula with one slot and r = 1 is the slotted formula") {
  const auto x1 = DegreeDistribution::concentrated(1);
  for (int p = 1; p <= 4; ++p) {
    for (int k : {1, 2, 10, 100}) {
      const auto psi = DegreeDistribution::concentrated(p);
      CHECK(plr_framed_nosic(x1, psi, 1, 64, k) ==
            doctest::Approx(plr_slotted_nosic(psi, 64, k)).epsilon(1e-11));
    }
  }
}

TEST_CASE("no-SIC formula is exact for p = 1 and an approximation beyond") {
  const auto x1 = DegreeDistribution::concentrated(1);
  for (int n = 1; n <= 6; ++n) {
    for (int k = 1; k <= 4; ++k) {
      CHECK(plr_slotted_nosic(x1, n, k) ==
            doctest::Approx(enumerate_slot_loss(n, x1, k)).epsilon(1e-12));
    }
  }
  const auto x2 = DegreeDistribution::concentrated(2);
  CHECK(plr_slotted_nosic(x2, 4, 2) == doctest::Approx(0.25));
  CHECK(enumerate_slot_loss(4, x2, 2) == doctest::Approx(1.0 / 6.0));
}

TEST_CASE("crossing of the framed formula through 1e-3") {
  const auto x2 = DegreeDistribution::concentrated(2);
  int crossing = 0;
  for (int k = 1; k <= 2000; ++k) {
    if (plr_framed_nosic(x2, x2, 62, 128, k) >= 1e-3) {
      crossing = k;
      break;
    }
  }
  CHECK(crossing >= 340);
  CHECK(crossing <= 460);
}

TEST_CASE("compensated summation") {
  CompensatedSum s;
  s.add(1.0);
  for (int i = 0; i < 1000; ++i) s.add(1e-17);
  s.add(-1.0);
  CHECK(s.value() == doctest::Approx(1e-14).epsilon(1e-6));
}
