#include "doctest.h"

#include <bit>
#include <cmath>

#include "pilotmix/codec.hpp"
#include "pilotmix/core_model.hpp"
#include "pilotmix/phy.hpp"

using namespace pilotmix;

namespace {

CMatrix random_matrix(int rows, int cols, CounterRng& rng) {
  CMatrix m(rows, cols);
  for (auto& v : m.reshaped()) v = {rng.uniform01() - 0.5, rng.uniform01() - 0.5};
  return m;
}

}  // namespace

TEST_CASE("Sylvester construction") {
  const PilotBook book(32);
  for (int i = 0; i < 32; ++i) {
    for (int j = 0; j < 32; ++j) {
      CHECK(book.matrix()(i, j) == ((std::popcount(unsigned(i & j)) % 2) ? -1.0 : 1.0));
    }
  }
  // Recursive definition H_2n = [[H, H], [H, -H]].
  const PilotBook half(16);
  CHECK(book.matrix().topLeftCorner(16, 16) == half.matrix());
  CHECK(book.matrix().bottomRightCorner(16, 16) == -half.matrix());
  CHECK_THROWS_AS(PilotBook(24), std::invalid_argument);
  CHECK_THROWS_AS(PilotBook(0), std::invalid_argument);
}

TEST_CASE("fast projection equals P S^T / N_P") {
  const PilotBook book(64);
  CounterRng rng(1);
  const CMatrix p = random_matrix(8, 64, rng);
  const CMatrix direct = p * book.matrix().transpose().cast<std::complex<double>>() / 64.0;
  CHECK((book.project_all(p) - direct).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("preamble is the normalized pilot sum with energy N_P") {
  const PilotBook book(128);
  CounterRng rng(2);
  for (int p = 1; p <= 8; ++p) {
    const auto subset = sample_without_replacement(128, p, rng);
    const Symbols pre = build_preamble(subset, book);
    CHECK(std::abs(pre.squaredNorm() - 128.0) < 1e-10);
    Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(128);
    for (int j : subset) sum += book.sequence(j);
    CHECK((pre - sum.cast<std::complex<double>>() / std::sqrt(double(p))).norm() < 1e-12);
  }
  const std::vector<int> empty;
  CHECK_THROWS(build_preamble(empty, book));
  const std::vector<int> bad{128};
  CHECK_THROWS(build_preamble(bad, book));
}

TEST_CASE("channel draws are CN(0, 1)") {
  CounterRng rng(3);
  const CVector h = draw_channel(20000, rng);
  CHECK(h.squaredNorm() / 20000 == doctest::Approx(1.0).epsilon(0.03));
  CHECK(std::abs(h.mean()) < 0.03);
  CHECK(h.real().squaredNorm() / 20000 == doctest::Approx(0.5).epsilon(0.04));
}

TEST_CASE("slot synthesis is linear superposition plus noise") {
  const PilotBook book(16);
  CounterRng rng(4);
  const CVector h1 = draw_channel(4, rng);
  const CVector h2 = draw_channel(4, rng);
  const Symbols x1 = Symbols::Constant(256, {1.0, 0.0});
  const Symbols x2 = Symbols::Constant(256, {0.0, 1.0});
  const std::vector<int> s1{1, 5};
  const std::vector<int> s2{2};
  const std::vector<SlotUser> users{{s1, x1, h1}, {s2, x2, h2}};
  CounterRng silent(5);
  const SlotSignal clean = synthesize_slot(users, book, 4, 256, 0.0, silent);
  const CMatrix want_p = h1 * build_preamble(s1, book) + h2 * build_preamble(s2, book);
  const CMatrix want_y = h1 * x1 + h2 * x2;
  CHECK((clean.preamble_part - want_p).norm() < 1e-12);
  CHECK((clean.payload_part - want_y).norm() < 1e-12);

  CounterRng noisy(6);
  const std::vector<SlotUser> none;
  const SlotSignal only_noise = synthesize_slot(none, book, 64, 256, 0.5, noisy);
  const double measured = only_noise.payload_part.squaredNorm() / (64.0 * 256.0);
  CHECK(measured == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("matched filter on a singleton returns h / sqrt(p)") {
  const PilotBook book(32);
  CounterRng rng(7);
  const CVector h = draw_channel(16, rng);
  const Symbols x = Symbols::Ones(256);
  const std::vector<int> subset{0, 9, 30};
  const std::vector<SlotUser> users{{subset, x, h}};
  CounterRng silent(8);
  const SlotSignal slot = synthesize_slot(users, book, 16, 256, 0.0, silent);
  for (int j : subset) CHECK((estimate_channel_mf(slot, j, book) - h / std::sqrt(3.0)).norm() < 1e-12);
  CHECK(estimate_channel_mf(slot, 4, book).norm() < 1e-12);
}

TEST_CASE("MRC recovers the payload up to a positive scale") {
  const PilotBook book(8);
  const codec::PacketCodec pc;
  CounterRng rng(9);
  const Bits info = codec::make_information_bits(11, rng);
  const Symbols x = pc.modulate(info);
  const CVector h = draw_channel(32, rng);
  const std::vector<int> subset{3};
  const std::vector<SlotUser> users{{subset, x, h}};
  CounterRng silent(10);
  const SlotSignal slot = synthesize_slot(users, book, 32, 256, 0.0, silent);
  const auto est = estimate_payload_mrc(slot, estimate_channel_mf(slot, 3, book));
  REQUIRE(est.has_value());
  CHECK((*est - x).norm() < 1e-10);
  // Zero matched filter: nothing to combine.
  CHECK_FALSE(estimate_payload_mrc(slot, CVector::Zero(32)).has_value());
}

TEST_CASE("noiseless single user decodes end to end at M = 32") {
  const PilotBook book(32);
  const codec::PacketCodec pc;
  ProtocolConfig cfg;
  cfg.n_pilots = 32;
  cfg.psi = DegreeDistribution::concentrated(2);
  int ok = 0;
  for (int trial = 0; trial < 200; ++trial) {
    CounterRng rng(derive_seed(11, trial));
    const Bits info = codec::make_information_bits(static_cast<UserId>(trial), rng);
    const auto tx = derive_choices(info, cfg);
    const Symbols x = pc.modulate(info);
    const CVector h = draw_channel(32, rng);
    const std::vector<SlotUser> users{{tx.pilot_subsets[0], x, h}};
    const SlotSignal slot = synthesize_slot(users, book, 32, 256, 0.0, rng);
    const int pilot = tx.pilot_subsets[0][0];
    const auto est = estimate_payload_mrc(slot, estimate_channel_mf(slot, pilot, book));
    if (est && pc.validate(*est, 0) == info) ++ok;
  }
  CHECK(ok == 200);
}
