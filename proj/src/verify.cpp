#include "pilotmix/verify.hpp"

#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <ostream>
#include <sstream>

#include "pilotmix/analysis.hpp"
#include "pilotmix/codec.hpp"
#include "pilotmix/collision.hpp"
#include "pilotmix/core_model.hpp"
#include "pilotmix/harness.hpp"
#include "pilotmix/instances.hpp"
#include "pilotmix/phy.hpp"
#include "pilotmix/receiver.hpp"

namespace pilotmix {

namespace {

std::string fmt(const char* f, double a, double b = 0.0) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

FrameGrid grid_of(std::string_view text) {
  std::istringstream in{std::string(text)};
  return read_grid(in);
}

std::string ids(const std::set<UserId>& s) {
  std::string out = "{";
  for (UserId id : s) out += (out.size() > 1 ? "," : "") + std::to_string(id);
  return out + "}";
}

std::set<UserId> resolved_ids(const FrameResult& r) {
  std::set<UserId> out;
  for (const auto& entry : r.resolved) out.insert(entry.first);
  return out;
}

class Collector {
 public:
  void check(const std::string& module, const std::string& name,
             const std::function<std::pair<bool, std::string>()>& body) {
    CheckResult r{module, name, false, ""};
    try {
      auto [ok, detail] = body();
      r.passed = ok;
      r.detail = std::move(detail);
    } catch (const std::exception& e) {
      r.detail = std::string("exception: ") + e.what();
    }
    results.push_back(std::move(r));
  }

  std::vector<CheckResult> results;
};

void core_model_checks(Collector& c) {
  c.check("core-model", "choices replay from payload", [] {
    ProtocolConfig cfg;
    for (int i = 0; i < 50; ++i) {
      CounterRng rng(derive_seed(7, i));
      const Bits bits = codec::make_information_bits(static_cast<UserId>(i), rng);
      if (!(derive_choices(bits, cfg) == derive_choices(bits, cfg))) {
        return std::pair{false, "mismatch at user " + std::to_string(i)};
      }
    }
    return std::pair{true, std::string("50 payloads")};
  });
  c.check("core-model", "unframed uses the single slot", [] {
    ProtocolConfig cfg;
    cfg.framed = false;
    cfg.n_slots = 1;
    cfg.lambda = DegreeDistribution::concentrated(1);
    CounterRng rng(3);
    const auto tx = derive_choices(codec::make_information_bits(9, rng), cfg);
    return std::pair{tx.slot_indices == std::vector<int>{0}, std::string()};
  });
  c.check("core-model", "psi = x^N_P picks every pilot", [] {
    ProtocolConfig cfg;
    cfg.n_pilots = 8;
    cfg.psi = DegreeDistribution::concentrated(8);
    CounterRng rng(4);
    const auto tx = derive_choices(codec::make_information_bits(1, rng), cfg);
    bool ok = true;
    for (const auto& s : tx.pilot_subsets) ok = ok && s == std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7};
    return std::pair{ok, std::string()};
  });
  c.check("core-model", "invalid configs are rejected", [] {
    ProtocolConfig a;
    a.n_pilots = 100;
    ProtocolConfig b;
    b.psi = DegreeDistribution::concentrated(200);
    const bool ok = !validate_config(a).empty() && !validate_config(b).empty() &&
                    validate_config(ProtocolConfig{}).empty();
    return std::pair{ok, std::string()};
  });
}

void phy_checks(Collector& c) {
  c.check("phy-baseband", "pilots are orthogonal", [] {
    const PilotBook book(64);
    const Eigen::MatrixXd gram = book.matrix() * book.matrix().transpose();
    const double err = (gram - 64.0 * Eigen::MatrixXd::Identity(64, 64)).cwiseAbs().maxCoeff();
    return std::pair{err == 0.0, fmt("max |S S^T - N I| = %g", err)};
  });
  c.check("phy-baseband", "preamble energy equals N_P", [] {
    const PilotBook book(128);
    CounterRng rng(11);
    double worst = 0.0;
    for (int p = 1; p <= 6; ++p) {
      const auto subset = sample_without_replacement(128, p, rng);
      const double e = build_preamble(subset, book).squaredNorm();
      worst = std::max(worst, std::abs(e - 128.0));
    }
    return std::pair{worst < 1e-9, fmt("max deviation %g", worst)};
  });
  c.check("phy-baseband", "matched filter returns h / sqrt(p)", [] {
    const PilotBook book(16);
    CounterRng rng(5);
    const CVector h = draw_channel(8, rng);
    const Symbols x = Symbols::Ones(256);
    const std::vector<int> subset{3, 9};
    const SlotUser user{subset, x, h};
    CounterRng noise(6);
    const SlotSignal slot = synthesize_slot(std::span(&user, 1), book, 8, 256, 0.0, noise);
    const double err = (estimate_channel_mf(slot, 9, book) - h / std::sqrt(2.0)).norm();
    return std::pair{err < 1e-12, fmt("error %g", err)};
  });
}

void codec_checks(Collector& c) {
  c.check("codec", "generator has degree n - k = 90", [] {
    const auto& g = codec::default_bch().generator();
    return std::pair{g.size() == 91 && g.front() == 1 && g.back() == 1,
                     "degree " + std::to_string(static_cast<int>(g.size()) - 1)};
  });
  c.check("codec", "corrects 10 random errors", [] {
    const auto& bch = codec::default_bch();
    CounterRng rng(21);
    for (int trial = 0; trial < 100; ++trial) {
      Bits info(codec::kInfoLength);
      for (auto& b : info) b = static_cast<std::uint8_t>(rng() & 1u);
      Bits word = bch.encode(info);
      for (int pos : sample_without_replacement(codec::kCodeLength, codec::kCorrectable, rng)) {
        word[static_cast<std::size_t>(pos)] ^= 1u;
      }
      const auto decoded = bch.decode(word);
      if (!decoded || *decoded != info) return std::pair{false, "trial " + std::to_string(trial)};
    }
    return std::pair{true, std::string("100 words")};
  });
  c.check("codec", "CRC catches every single-bit flip", [] {
    CounterRng rng(22);
    const Bits info = codec::make_information_bits(77, rng);
    for (std::size_t i = 0; i < info.size(); ++i) {
      Bits bad = info;
      bad[i] ^= 1u;
      if (codec::crc_check(bad)) return std::pair{false, "bit " + std::to_string(i)};
    }
    return std::pair{codec::crc_check(info), std::string()};
  });
  c.check("codec", "noiseless packet round trip", [] {
    const codec::PacketCodec pc;
    CounterRng rng(23);
    const Bits info = codec::make_information_bits(5, rng);
    const auto out = pc.validate(pc.modulate(info) * 0.3, 0);
    return std::pair{out && *out == info, std::string()};
  });
}

void receiver_checks(Collector& c) {
  c.check("receiver-sic", "scaled inner SIC leaves no residual for p = 2", [] {
    const PilotBook book(8);
    CounterRng rng(31);
    const CVector h = draw_channel(16, rng);
    const codec::PacketCodec pc;
    const Bits info = codec::make_information_bits(1, rng);
    const Symbols x = pc.modulate(info);
    const std::vector<int> subset{2, 5};
    const SlotUser user{subset, x, h};
    CounterRng noise(32);
    const SlotSignal clean = synthesize_slot(std::span(&user, 1), book, 16, 256, 0.0, noise);
    DecodedPacket pkt;
    pkt.transmission.pilot_subsets = {subset};
    pkt.transmission.slot_indices = {0};
    pkt.payload_symbols = x;
    pkt.site = {0, 2, 0};
    pkt.effective_scale = std::sqrt(2.0);
    const CVector phi = estimate_channel_mf(clean, 2, book);
    SlotSignal scaled = clean;
    inner_sic_subtract(scaled, phi, pkt, book, InnerSicScale::EffectiveChannel);
    SlotSignal literal = clean;
    inner_sic_subtract(literal, phi, pkt, book, InnerSicScale::Literal);
    const double expected = 8 * h.squaredNorm() * std::pow(1 - 1 / std::sqrt(2.0), 2);
    const double rs = scaled.preamble_part.squaredNorm();
    const double rl = literal.preamble_part.squaredNorm();
    return std::pair{rs < 1e-18 * expected + 1e-20 && std::abs(rl - expected) < 1e-9 * expected,
                     fmt("scaled %g, literal %g", rs, rl)};
  });

  ProtocolConfig noiseless;
  noiseless.snr_db = std::numeric_limits<double>::infinity();
  noiseless.n_antennas = 32;

  c.check("receiver-sic", "chain resolves under inner SIC", [noiseless] {
    ProtocolConfig cfg = noiseless;
    cfg.receiver_mode = ReceiverMode::InnerOnly;
    const auto got = resolved_ids(run_grid_instance(grid_of(instances::kChain), cfg, 41));
    return std::pair{got == std::set<UserId>{1, 2, 3}, ids(got)};
  });
  // Seed 1 draws channels without capture: the colliding pairs stay
  // undecodable, as in the collision model.
  c.check("receiver-sic", "outer SIC recovers a doubly jammed user", [noiseless] {
    ProtocolConfig inner = noiseless;
    inner.receiver_mode = ReceiverMode::InnerOnly;
    ProtocolConfig nested = noiseless;
    nested.receiver_mode = ReceiverMode::Nested;
    const FrameGrid g = grid_of(instances::kOuterOnly);
    TraceLog log;
    const auto a = resolved_ids(run_grid_instance(g, inner, 1));
    const auto b = resolved_ids(run_grid_instance(g, nested, 1, &log));
    bool outer_decode = false;
    for (const auto& e : log) outer_decode |= e.user == 1 && e.phase == SicPhase::Outer;
    return std::pair{a == std::set<UserId>{2, 3} && b == std::set<UserId>{1, 2, 3} && outer_decode,
                     "inner " + ids(a) + " nested " + ids(b)};
  });
}

void collision_checks(Collector& c) {
  c.check("collision-oracle", "chain: singletons only without SIC", [] {
    const FrameGrid g = grid_of(instances::kChain);
    const auto none = peel_frame(g, ReceiverMode::NoSic);
    const auto inner = peel_frame(g, ReceiverMode::InnerOnly);
    return std::pair{none == std::set<UserId>{1, 3} && inner == std::set<UserId>{1, 2, 3},
                     "no-SIC " + ids(none) + " inner " + ids(inner)};
  });
  c.check("collision-oracle", "identical choices stay unresolved", [] {
    const FrameGrid g = grid_of(instances::kIdenticalPair);
    const auto got = peel_frame(g, ReceiverMode::Nested);
    return std::pair{got == std::set<UserId>{3} && unresolvable_collision_count(g.users()) == 2,
                     ids(got)};
  });
  c.check("collision-oracle", "enumeration matches (1-1/N_P)^(K-1) for p = 1", [] {
    const double got = enumerate_slot_loss(4, DegreeDistribution::concentrated(1), 3);
    const double want = 1.0 - std::pow(0.75, 2);
    return std::pair{std::abs(got - want) < 1e-12, fmt("%.12g vs %.12g", got, want)};
  });
  c.check("collision-oracle", "enumeration for N_P = 4, p = 2, K = 2 is 1/6", [] {
    const double got = enumerate_slot_loss(4, DegreeDistribution::concentrated(2), 2);
    return std::pair{std::abs(got - 1.0 / 6.0) < 1e-12, fmt("%.12g", got)};
  });
}

void analysis_checks(Collector& c) {
  c.check("analysis", "collision floor at N_s = 62, N_P = 128, r = 2, K = 1800", [] {
    analysis::BoundQuery q;
    q.scenario = analysis::Scenario::FramedNested;
    q.n_slots = 62;
    q.r = 2;
    q.n_pilots = 128;
    q.n_users = 1800;
    q.p = 1;
    const double p1 = analysis::plr_lower_bound(q);
    q.p = 2;
    const double p2 = analysis::plr_lower_bound(q);
    const bool ok = std::abs(p1 - 5.7e-5) < 0.05e-5 && std::abs(p2 - 1.4e-8) < 0.05e-8;
    return std::pair{ok, fmt("p=1 %.3g, p=2 %.3g", p1, p2)};
  });
  c.check("analysis", "framed formula reduces to the slotted one", [] {
    const auto psi = DegreeDistribution::concentrated(3);
    const double framed =
        analysis::plr_framed_nosic(DegreeDistribution::concentrated(1), psi, 1, 64, 12);
    const double slotted = analysis::plr_slotted_nosic(psi, 64, 12);
    return std::pair{std::abs(framed - slotted) < 1e-12, fmt("%.12g vs %.12g", framed, slotted)};
  });
  c.check("analysis", "no-SIC approximation is exact for p = 1", [] {
    const auto psi = DegreeDistribution::concentrated(1);
    const double formula = analysis::plr_slotted_nosic(psi, 8, 4);
    const double exact = enumerate_slot_loss(8, psi, 4);
    return std::pair{std::abs(formula - exact) < 1e-12, fmt("%.12g vs %.12g", formula, exact)};
  });
}

}  // namespace

std::vector<CheckResult> run_verification() {
  Collector c;
  core_model_checks(c);
  phy_checks(c);
  codec_checks(c);
  receiver_checks(c);
  collision_checks(c);
  analysis_checks(c);
  return c.results;
}

bool report_verification(std::ostream& out, const std::vector<CheckResult>& results) {
  std::map<std::string, std::pair<int, int>> per_module;
  std::vector<std::string> order;
  for (const auto& r : results) {
    out << (r.passed ? "PASS " : "FAIL ") << r.module << ": " << r.name;
    if (!r.detail.empty()) out << " (" << r.detail << ")";
    out << '\n';
    if (!per_module.count(r.module)) order.push_back(r.module);
    auto& [pass, total] = per_module[r.module];
    pass += r.passed ? 1 : 0;
    ++total;
  }
  bool all = true;
  for (const auto& m : order) {
    const auto [pass, total] = per_module[m];
    out << "module " << m << ": " << (pass == total ? "PASS" : "FAIL") << " (" << pass << '/'
        << total << ")\n";
    all = all && pass == total;
  }
  return all;
}

}  // namespace pilotmix
