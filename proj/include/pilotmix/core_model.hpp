#pragma once

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "pilotmix/codec.hpp"
#include "pilotmix/random.hpp"

namespace pilotmix {

enum class ReceiverMode { NoSic, InnerOnly, InnerAck, Nested, NestedAck };

std::string_view to_string(ReceiverMode mode);
/// Accepts the enumerator names exactly ("NoSic", "InnerOnly", ...).
ReceiverMode parse_receiver_mode(std::string_view name);

constexpr bool uses_inner_sic(ReceiverMode m) { return m != ReceiverMode::NoSic; }
constexpr bool uses_outer_sic(ReceiverMode m) {
  return m == ReceiverMode::Nested || m == ReceiverMode::NestedAck;
}
constexpr bool uses_ack(ReceiverMode m) {
  return m == ReceiverMode::InnerAck || m == ReceiverMode::NestedAck;
}

/// Finite probability distribution over positive degrees, e.g. the
/// repetition degree (Lambda) or the preamble order (Psi). Zero-probability
/// entries are dropped on construction.
class DegreeDistribution {
 public:
  /// x^1.
  DegreeDistribution();
  /// Throws std::invalid_argument unless degrees are >= 1, probabilities lie
  /// in [0, 1], and they sum to 1 within 1e-12.
  explicit DegreeDistribution(std::map<int, double> coefficients);

  static DegreeDistribution concentrated(int degree);

  const std::map<int, double>& coefficients() const { return coefficients_; }
  int min_degree() const { return coefficients_.begin()->first; }
  int max_degree() const { return coefficients_.rbegin()->first; }
  bool is_concentrated() const { return coefficients_.size() == 1; }
  double probability(int degree) const;

  int sample(CounterRng& rng) const;

  /// "x^2" for concentrated, otherwise "0.5x^2+0.5x^3".
  std::string to_string() const;

  bool operator==(const DegreeDistribution&) const = default;

 private:
  std::map<int, double> coefficients_;
};

/// Sum of k * d_k, the PGF derivative at 1.
double mean_degree(const DegreeDistribution& d);

struct ProtocolConfig {
  int n_slots = 62;
  int n_pilots = 128;
  int n_antennas = 256;
  int payload_symbols = codec::kSymbolsPerPacket;
  DegreeDistribution lambda = DegreeDistribution::concentrated(2);
  DegreeDistribution psi = DegreeDistribution::concentrated(2);
  /// Per payload symbol, per antenna, unit channel variance. +inf = noiseless.
  double snr_db = 10.0;
  ReceiverMode receiver_mode = ReceiverMode::Nested;
  /// false = slotted-unframed, single-slot analysis.
  bool framed = true;

  /// sigma_z^2 = 10^(-snr_db / 10).
  double noise_variance() const;

  bool operator==(const ProtocolConfig&) const = default;
};

struct ConfigError {
  std::string field;
  std::string message;
};

class ConfigException : public std::runtime_error {
 public:
  explicit ConfigException(std::vector<ConfigError> errors);
  ConfigException(std::string field, std::string message)
      : ConfigException(std::vector<ConfigError>{{std::move(field), std::move(message)}}) {}
  const std::vector<ConfigError>& errors() const { return errors_; }

 private:
  std::vector<ConfigError> errors_;
};

/// Every violated invariant, empty when the config is valid.
std::vector<ConfigError> validate_config(const ProtocolConfig& cfg);
/// Returns cfg, or throws ConfigException listing all violations.
const ProtocolConfig& require_valid(const ProtocolConfig& cfg);

/// Field names as in ProtocolConfig. Missing fields keep their defaults,
/// unknown fields are rejected, and the result is validated.
ProtocolConfig config_from_json(const nlohmann::json& doc);
nlohmann::json config_to_json(const ProtocolConfig& cfg);
ProtocolConfig load_config(const std::filesystem::path& path);

/// One user's payload and every random choice it makes in a frame.
struct UserTransmission {
  UserId user_id = 0;
  Bits payload_bits;
  int repetition_degree = 0;
  /// Sorted, distinct.
  std::vector<int> slot_indices;
  /// pilot_subsets[i] belongs to slot_indices[i]; each sorted, distinct.
  std::vector<std::vector<int>> pilot_subsets;

  /// Pilot subset used in `slot`, or nullptr when the user is not there.
  const std::vector<int>* subset_in_slot(int slot) const;

  bool operator==(const UserTransmission&) const = default;
};

/// Replays a user's choices from its information bits. The bits key a
/// counter-based stream; draws are, in order, r ~ Lambda, r distinct slots
/// (partial Fisher-Yates), then for each slot in ascending order p ~ Psi and
/// p distinct pilots (partial Fisher-Yates).
UserTransmission derive_choices(std::span<const std::uint8_t> payload_bits,
                                const ProtocolConfig& cfg);

/// Stream key derived from information bits.
std::uint64_t payload_key(std::span<const std::uint8_t> payload_bits);

/// k distinct values from [0, n), sorted.
std::vector<int> sample_without_replacement(int n, int k, CounterRng& rng);

}  // namespace pilotmix
