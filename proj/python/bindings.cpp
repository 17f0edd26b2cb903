#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "pilotmix/analysis.hpp"
#include "pilotmix/codec.hpp"
#include "pilotmix/collision.hpp"
#include "pilotmix/core_model.hpp"
#include "pilotmix/harness.hpp"
#include "pilotmix/verify.hpp"

namespace py = pybind11;
using namespace pilotmix;

namespace {

ProtocolConfig config_from_dict(const py::dict& d) {
  // Round-trip through JSON text so the Python side gets the same
  // validation and error messages as config files.
  const py::module_ json = py::module_::import("json");
  const std::string text = py::str(json.attr("dumps")(d));
  return config_from_json(nlohmann::json::parse(text));
}

py::dict config_to_dict(const ProtocolConfig& cfg) {
  const py::module_ json = py::module_::import("json");
  return json.attr("loads")(config_to_json(cfg).dump());
}

py::dict estimate_to_dict(const PlrEstimate& row) {
  py::dict d;
  d["swept_name"] = row.swept_name;
  d["swept_value"] = row.swept_value;
  d["trials"] = row.trials;
  d["sent"] = row.packets_sent;
  d["lost"] = row.packets_lost;
  d["plr"] = row.plr;
  d["ci_low"] = row.ci_low;
  d["ci_high"] = row.ci_high;
  d["engine"] = std::string(to_string(row.engine));
  d["mode"] = row.mode;
  d["p_or_psi"] = row.p_or_psi;
  d["wall_time_s"] = row.wall_time_s;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Pilot-mixture coded random access: simulation core";

  py::register_exception<ConfigException>(m, "ConfigError", PyExc_ValueError);

  m.def("default_config", [] { return config_to_dict(ProtocolConfig{}); });
  m.def("validate_config", [](const py::dict& d) { return config_to_dict(config_from_dict(d)); },
        "Fill defaults and validate; raises ConfigError.");

  m.def("derive_choices", [](const std::vector<std::uint8_t>& bits, const py::dict& cfg) {
    const UserTransmission tx = derive_choices(bits, config_from_dict(cfg));
    py::dict d;
    d["user_id"] = tx.user_id;
    d["slots"] = tx.slot_indices;
    d["pilots"] = tx.pilot_subsets;
    return d;
  });
  m.def("information_bits", [](std::uint32_t user_id, std::uint64_t seed) {
    CounterRng rng(seed);
    return codec::make_information_bits(user_id, rng);
  });

  m.def("bch_encode", [](const std::vector<std::uint8_t>& info) {
    return codec::default_bch().encode(info);
  });
  m.def("bch_decode", [](const std::vector<std::uint8_t>& word) {
    return codec::default_bch().decode(word);
  });
  m.def("crc16", [](const std::vector<std::uint8_t>& bits) { return codec::crc16(bits); });
  m.def("modulate", [](const std::vector<std::uint8_t>& info) {
    return Eigen::VectorXcd(codec::PacketCodec{}.modulate(info).transpose());
  });
  m.def("validate", [](const Eigen::VectorXcd& symbols) {
    return codec::PacketCodec{}.validate(symbols.transpose(), 0);
  });

  m.def("collision_bound",
        [](int n_pilots, int n_slots, int r, int p, int n_users, bool framed) {
          analysis::BoundQuery q;
          q.scenario = framed ? analysis::Scenario::FramedNested
                              : analysis::Scenario::SlottedUnframed;
          q.n_pilots = n_pilots;
          q.n_slots = n_slots;
          q.r = r;
          q.p = p;
          q.n_users = n_users;
          return analysis::plr_lower_bound(q);
        },
        py::arg("n_pilots"), py::arg("n_slots"), py::arg("r"), py::arg("p"),
        py::arg("n_users"), py::arg("framed") = true);
  m.def("plr_slotted_nosic",
        [](std::map<int, double> psi, int n_pilots, int k_s) {
          return analysis::plr_slotted_nosic(DegreeDistribution(std::move(psi)), n_pilots, k_s);
        });
  m.def("plr_framed_nosic",
        [](std::map<int, double> lambda, std::map<int, double> psi, int n_slots, int n_pilots,
           int k_a) {
          return analysis::plr_framed_nosic(DegreeDistribution(std::move(lambda)),
                                            DegreeDistribution(std::move(psi)), n_slots,
                                            n_pilots, k_a);
        });
  m.def("enumerate_slot_loss", [](int n_pilots, std::map<int, double> psi, int k_s) {
    return enumerate_slot_loss(n_pilots, DegreeDistribution(std::move(psi)), k_s);
  });
  m.def("peel_grid", [](const std::string& text, const std::string& mode) {
    std::istringstream in(text);
    return peel_frame(read_grid(in), parse_receiver_mode(mode));
  });

  m.def("run_trial",
        [](const py::dict& cfg, int k_active, std::uint64_t seed, const std::string& engine) {
          const TrialOutcome t = run_trial(config_from_dict(cfg), k_active, seed,
                                           parse_engine(engine));
          return py::make_tuple(t.lost, t.resolved);
        },
        py::arg("config"), py::arg("k_active"), py::arg("seed"),
        py::arg("engine") = "CollisionOracle");
  m.def("run_sweep",
        [](const py::dict& cfg, const std::string& sweep, std::int64_t trials,
           std::uint64_t seed, const std::string& engine, int workers,
           std::optional<std::int64_t> min_loss_events) {
          SweepSpec spec;
          spec.base = config_from_dict(cfg);
          std::tie(spec.sweep_variable, spec.values) = parse_sweep(sweep);
          spec.trials = trials;
          spec.master_seed = seed;
          spec.engine = parse_engine(engine);
          spec.workers = workers;
          if (min_loss_events) spec.stop_rule = StopRule{*min_loss_events};
          std::vector<PlrEstimate> rows;
          {
            py::gil_scoped_release release;
            rows = run_sweep(spec);
          }
          py::list out;
          for (const auto& row : rows) out.append(estimate_to_dict(row));
          return out;
        },
        py::arg("config"), py::arg("sweep"), py::arg("trials") = 100, py::arg("seed") = 1,
        py::arg("engine") = "CollisionOracle", py::arg("workers") = 1,
        py::arg("min_loss_events") = py::none());
  m.def("sweep_csv",
        [](const py::dict& cfg, const std::string& sweep, std::int64_t trials,
           std::uint64_t seed, const std::string& engine) {
          SweepSpec spec;
          spec.base = config_from_dict(cfg);
          std::tie(spec.sweep_variable, spec.values) = parse_sweep(sweep);
          spec.trials = trials;
          spec.master_seed = seed;
          spec.engine = parse_engine(engine);
          std::ostringstream out;
          write_csv(out, run_sweep(spec), spec.base);
          return out.str();
        },
        py::arg("config"), py::arg("sweep"), py::arg("trials") = 100, py::arg("seed") = 1,
        py::arg("engine") = "CollisionOracle");

  m.def("verify", [] {
    py::list out;
    for (const auto& r : run_verification()) {
      out.append(py::make_tuple(r.module, r.name, r.passed, r.detail));
    }
    return out;
  });
}
