#include "pilotmix/core_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

namespace pilotmix {

namespace {

constexpr std::string_view kModeNames[] = {"NoSic", "InnerOnly", "InnerAck",
                                           "Nested", "NestedAck"};

bool is_power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

std::string format_number(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace

std::string_view to_string(ReceiverMode mode) {
  return kModeNames[static_cast<int>(mode)];
}

ReceiverMode parse_receiver_mode(std::string_view name) {
  for (int i = 0; i < 5; ++i) {
    if (kModeNames[i] == name) return static_cast<ReceiverMode>(i);
  }
  throw std::invalid_argument("unknown receiver mode '" + std::string(name) + "'");
}

DegreeDistribution::DegreeDistribution() : coefficients_{{1, 1.0}} {}

DegreeDistribution::DegreeDistribution(std::map<int, double> coefficients) {
  double total = 0.0;
  for (const auto& [degree, prob] : coefficients) {
    if (degree < 1) {
      throw std::invalid_argument("degree " + std::to_string(degree) + " is < 1");
    }
    if (!(prob >= 0.0 && prob <= 1.0)) {
      throw std::invalid_argument("probability of degree " +
                                  std::to_string(degree) + " outside [0, 1]");
    }
    total += prob;
    if (prob > 0.0) coefficients_.emplace(degree, prob);
  }
  if (coefficients_.empty() || std::abs(total - 1.0) > 1e-12) {
    throw std::invalid_argument("degree probabilities sum to " +
                                format_number(total) + ", not 1");
  }
}

DegreeDistribution DegreeDistribution::concentrated(int degree) {
  return DegreeDistribution({{degree, 1.0}});
}

double DegreeDistribution::probability(int degree) const {
  const auto it = coefficients_.find(degree);
  return it == coefficients_.end() ? 0.0 : it->second;
}

int DegreeDistribution::sample(CounterRng& rng) const {
  if (is_concentrated()) return min_degree();
  const double u = rng.uniform01();
  double cumulative = 0.0;
  for (const auto& [degree, prob] : coefficients_) {
    cumulative += prob;
    if (u < cumulative) return degree;
  }
  return max_degree();
}

std::string DegreeDistribution::to_string() const {
  if (is_concentrated()) return "x^" + std::to_string(min_degree());
  std::string out;
  for (const auto& [degree, prob] : coefficients_) {
    if (!out.empty()) out += '+';
    out += format_number(prob) + "x^" + std::to_string(degree);
  }
  return out;
}

double mean_degree(const DegreeDistribution& d) {
  double mean = 0.0;
  for (const auto& [degree, prob] : d.coefficients()) mean += degree * prob;
  return mean;
}

double ProtocolConfig::noise_variance() const {
  if (std::isinf(snr_db) && snr_db > 0) return 0.0;
  return std::pow(10.0, -snr_db / 10.0);
}

ConfigException::ConfigException(std::vector<ConfigError> errors)
    : std::runtime_error([&] {
        std::string msg = "invalid configuration:";
        for (const auto& e : errors) msg += " [" + e.field + "] " + e.message + ";";
        return msg;
      }()),
      errors_(std::move(errors)) {}

std::vector<ConfigError> validate_config(const ProtocolConfig& cfg) {
  std::vector<ConfigError> errors;
  if (cfg.n_slots < 1) errors.push_back({"n_slots", "must be >= 1"});
  if (!is_power_of_two(cfg.n_pilots)) {
    errors.push_back({"n_pilots", "not a power of two"});
  }
  if (cfg.n_antennas < 1) errors.push_back({"n_antennas", "must be >= 1"});
  if (cfg.payload_symbols != codec::kSymbolsPerPacket) {
    errors.push_back({"payload_symbols",
                      "must equal the codec output length " +
                          std::to_string(codec::kSymbolsPerPacket)});
  }
  if (cfg.lambda.max_degree() > cfg.n_slots) {
    errors.push_back({"lambda", "support exceeds slots"});
  }
  if (cfg.psi.max_degree() > cfg.n_pilots) {
    errors.push_back({"psi", "support exceeds pilots"});
  }
  if (std::isnan(cfg.snr_db) || cfg.snr_db == -std::numeric_limits<double>::infinity()) {
    errors.push_back({"snr_db", "must be a number or +inf"});
  }
  if (!cfg.framed) {
    if (cfg.lambda != DegreeDistribution::concentrated(1)) {
      errors.push_back({"lambda", "unframed operation requires lambda = x^1"});
    }
    if (cfg.n_slots != 1) {
      errors.push_back({"n_slots", "unframed operation uses a single slot"});
    }
  }
  return errors;
}

const ProtocolConfig& require_valid(const ProtocolConfig& cfg) {
  auto errors = validate_config(cfg);
  if (!errors.empty()) throw ConfigException(std::move(errors));
  return cfg;
}

namespace {

DegreeDistribution distribution_from_json(const nlohmann::json& j) {
  if (j.is_number_integer()) return DegreeDistribution::concentrated(j.get<int>());
  if (!j.is_object()) {
    throw std::invalid_argument("expected an object mapping degree to probability");
  }
  std::map<int, double> coefficients;
  for (const auto& [key, value] : j.items()) {
    std::size_t used = 0;
    const int degree = std::stoi(key, &used);
    if (used != key.size()) throw std::invalid_argument("bad degree key '" + key + "'");
    coefficients[degree] = value.get<double>();
  }
  return DegreeDistribution(std::move(coefficients));
}

nlohmann::json distribution_to_json(const DegreeDistribution& d) {
  nlohmann::json out = nlohmann::json::object();
  for (const auto& [degree, prob] : d.coefficients()) out[std::to_string(degree)] = prob;
  return out;
}

}  // namespace

ProtocolConfig config_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) {
    throw ConfigException("<root>", "configuration must be a JSON object");
  }
  ProtocolConfig cfg;
  std::vector<ConfigError> errors;
  for (const auto& [key, value] : doc.items()) {
    try {
      if (key == "n_slots") {
        cfg.n_slots = value.get<int>();
      } else if (key == "n_pilots") {
        cfg.n_pilots = value.get<int>();
      } else if (key == "n_antennas") {
        cfg.n_antennas = value.get<int>();
      } else if (key == "payload_symbols") {
        cfg.payload_symbols = value.get<int>();
      } else if (key == "lambda") {
        cfg.lambda = distribution_from_json(value);
      } else if (key == "psi") {
        cfg.psi = distribution_from_json(value);
      } else if (key == "snr_db") {
        if (value.is_string() && value.get<std::string>() == "inf") {
          cfg.snr_db = std::numeric_limits<double>::infinity();
        } else {
          cfg.snr_db = value.get<double>();
        }
      } else if (key == "receiver_mode") {
        cfg.receiver_mode = parse_receiver_mode(value.get<std::string>());
      } else if (key == "framed") {
        cfg.framed = value.get<bool>();
      } else {
        errors.push_back({key, "unknown field"});
      }
    } catch (const std::exception& e) {
      errors.push_back({key, e.what()});
    }
  }
  if (!errors.empty()) throw ConfigException(std::move(errors));
  return require_valid(cfg);
}

nlohmann::json config_to_json(const ProtocolConfig& cfg) {
  nlohmann::json out;
  out["n_slots"] = cfg.n_slots;
  out["n_pilots"] = cfg.n_pilots;
  out["n_antennas"] = cfg.n_antennas;
  out["payload_symbols"] = cfg.payload_symbols;
  out["lambda"] = distribution_to_json(cfg.lambda);
  out["psi"] = distribution_to_json(cfg.psi);
  if (std::isinf(cfg.snr_db)) {
    out["snr_db"] = "inf";
  } else {
    out["snr_db"] = cfg.snr_db;
  }
  out["receiver_mode"] = std::string(to_string(cfg.receiver_mode));
  out["framed"] = cfg.framed;
  return out;
}

ProtocolConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigException("<file>", "cannot open " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigException("<file>", e.what());
  }
  return config_from_json(doc);
}

const std::vector<int>* UserTransmission::subset_in_slot(int slot) const {
  const auto it = std::lower_bound(slot_indices.begin(), slot_indices.end(), slot);
  if (it == slot_indices.end() || *it != slot) return nullptr;
  return &pilot_subsets[static_cast<std::size_t>(it - slot_indices.begin())];
}

std::uint64_t payload_key(std::span<const std::uint8_t> payload_bits) {
  std::uint64_t h = mix64(payload_bits.size());
  std::uint64_t word = 0;
  int filled = 0;
  for (std::uint8_t bit : payload_bits) {
    word = (word << 1) | (bit & 1u);
    if (++filled == 64) {
      h = hash_combine(h, word);
      word = 0;
      filled = 0;
    }
  }
  if (filled > 0) h = hash_combine(h, word);
  return h;
}

std::vector<int> sample_without_replacement(int n, int k, CounterRng& rng) {
  if (k < 0 || k > n) throw std::invalid_argument("cannot draw k of n without replacement");
  std::vector<int> pool(static_cast<std::size_t>(n));
  std::iota(pool.begin(), pool.end(), 0);
  for (int i = 0; i < k; ++i) {
    const auto j = i + static_cast<int>(rng.below(static_cast<std::uint64_t>(n - i)));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(static_cast<std::size_t>(k));
  std::sort(pool.begin(), pool.end());
  return pool;
}

UserTransmission derive_choices(std::span<const std::uint8_t> payload_bits,
                                const ProtocolConfig& cfg) {
  if (payload_bits.size() != static_cast<std::size_t>(codec::kInfoLength)) {
    throw std::invalid_argument("payload must have " +
                                std::to_string(codec::kInfoLength) + " bits");
  }
  if (cfg.lambda.max_degree() > cfg.n_slots || cfg.psi.max_degree() > cfg.n_pilots) {
    throw ConfigException("lambda/psi", "distribution support exceeds slots or pilots");
  }
  CounterRng rng(payload_key(payload_bits));
  UserTransmission tx;
  tx.user_id = codec::user_id_of(payload_bits);
  tx.payload_bits.assign(payload_bits.begin(), payload_bits.end());
  tx.repetition_degree = cfg.lambda.sample(rng);
  tx.slot_indices = sample_without_replacement(cfg.n_slots, tx.repetition_degree, rng);
  tx.pilot_subsets.reserve(tx.slot_indices.size());
  for (std::size_t i = 0; i < tx.slot_indices.size(); ++i) {
    const int order = cfg.psi.sample(rng);
    tx.pilot_subsets.push_back(sample_without_replacement(cfg.n_pilots, order, rng));
  }
  return tx;
}

}  // namespace pilotmix
