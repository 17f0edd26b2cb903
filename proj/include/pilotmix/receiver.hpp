#pragma once

// Nested SIC receiver. Each slot is swept pilot by pilot (matched-filter
// channel estimate, MRC payload estimate, decode); a validated packet is
// cancelled from the slot and the sweep restarts. Buffered packets then drive
// cancellation of their replicas in other slots using payload-aided channel
// re-estimates, with a fresh slot sweep after every subtraction.

#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "pilotmix/codec.hpp"
#include "pilotmix/core_model.hpp"
#include "pilotmix/phy.hpp"

namespace pilotmix {

enum class SicPhase { Inner, Outer };

std::string_view to_string(SicPhase phase);

/// How the inner-SIC channel estimate is scaled before subtraction.
enum class InnerSicScale {
  /// sqrt(p) * phi_j: the matched filter returns h / sqrt(p) for a user with
  /// a p-pilot mixture, so this cancels the user exactly.
  EffectiveChannel,
  /// phi_j as is. Leaves a (1 - 1/sqrt(p)) residual for p > 1; kept for
  /// comparison only.
  Literal,
};

struct DecodeSite {
  int slot = 0;
  int pilot = 0;
  int sic_iteration = 0;
};

struct DecodedPacket {
  UserTransmission transmission;
  Symbols payload_symbols;
  DecodeSite site;
  /// sqrt(p) for the pilot mixture used in the decode slot.
  double effective_scale = 1.0;
  SicPhase phase = SicPhase::Inner;

  UserId user_id() const { return transmission.user_id; }
};

struct TraceEvent {
  std::uint64_t trial = 0;
  int slot = 0;
  int pilot = 0;
  int sic_iteration = 0;
  UserId user = 0;
  SicPhase phase = SicPhase::Inner;

  bool operator==(const TraceEvent&) const = default;
};

using TraceLog = std::vector<TraceEvent>;

/// "trial=0 slot=3 pilot=17 sic=1 user=42 phase=inner"
std::string format_trace_event(const TraceEvent& event);
TraceEvent parse_trace_event(std::string_view line);

/// Per-slot matched-filter outputs kept in sync with the slot signal:
/// phis = project_all(P), energy_j = ||phi_j||^2, combined = phis^H Y.
struct SlotProjection {
  CMatrix phis;
  Eigen::VectorXd energy;
  CMatrix combined;
};

SlotProjection project_slot(const SlotSignal& slot, const PilotBook& book);

/// Subtracts h_hat p and h_hat x from the slot, where p is the preamble of
/// `subset`, and applies the matching rank-1 update to `projection`.
void cancel_contribution(SlotSignal& slot, SlotProjection& projection, const CVector& h_hat,
                         std::span<const int> subset, const PilotBook& book,
                         const Symbols& payload);

struct FrameState {
  std::vector<SlotSignal> slots;
  std::deque<DecodedPacket> decoded_buffer;
  std::set<UserId> resolved_users;
  /// User -> slot in which it was acknowledged (ACK modes only).
  std::map<UserId, int> ack_set;
  /// Per slot, users whose contribution has already been subtracted.
  std::vector<std::set<UserId>> cancelled;
  std::vector<std::optional<SlotProjection>> projections;
};

struct FrameResult {
  /// Validated information bits per resolved user.
  std::map<UserId, Bits> resolved;
  /// Every decode event, in order.
  std::vector<DecodedPacket> packets;
};

/// Maps validated information bits to the sender's placement.
using PlacementResolver = std::function<UserTransmission(std::span<const std::uint8_t>)>;

/// Resolver that looks placements up by user id; for constructed instances
/// whose choices are prescribed rather than derived from the payload.
PlacementResolver table_resolver(std::vector<UserTransmission> placements);

/// Produces slot `slot` given the users acknowledged in earlier slots, who
/// must not contribute to it.
using SlotSource = std::function<SlotSignal(int slot, const std::map<UserId, int>& acked)>;

/// Matched-filter cancellation: subtract h_hat p and h_hat x with h_hat the
/// (scaled) matched-filter estimate of the decode pilot.
void inner_sic_subtract(SlotSignal& slot, const CVector& phi, const DecodedPacket& pkt,
                        const PilotBook& book,
                        InnerSicScale scale = InnerSicScale::EffectiveChannel);

/// Payload-aided channel estimate Y x^H / ||x||^2.
CVector outer_sic_estimate(const SlotSignal& slot, const Symbols& payload);

void outer_sic_subtract(SlotSignal& slot, const CVector& h_hat, const Symbols& preamble,
                        const Symbols& payload);

class Receiver {
 public:
  /// An empty resolver means derive_choices under cfg.
  Receiver(const ProtocolConfig& cfg, const PilotBook& pilots,
           const codec::PacketCodec& codec, PlacementResolver resolver = {});

  void set_trace(TraceLog* log, std::uint64_t trial) {
    trace_ = log;
    trial_ = trial;
  }

  /// Decode attempt on one pilot. Valid only if the packet passes the codec
  /// and its replayed placement puts this pilot in this slot.
  std::optional<DecodedPacket> try_decode(const SlotSignal& signal, int slot, int pilot,
                                          const CVector& phi) const;

  /// Pilot sweep of one slot. With inner SIC every new packet is cancelled
  /// and the sweep restarts from the first pilot; it ends after a full sweep
  /// yields nothing new. Without SIC a single sweep is made.
  std::vector<DecodedPacket> process_slot(int slot, FrameState& frame, SicPhase phase) const;

  /// Whole-frame pipeline for cfg.receiver_mode.
  FrameResult run_frame(const SlotSource& source) const;

 private:
  std::optional<DecodedPacket> accept_estimate(const Symbols& estimate, int slot, int pilot,
                                               int sic_count) const;
  void record(const DecodedPacket& pkt) const;

  const ProtocolConfig& cfg_;
  const PilotBook& pilots_;
  const codec::PacketCodec& codec_;
  PlacementResolver resolve_;
  TraceLog* trace_ = nullptr;
  std::uint64_t trial_ = 0;
};

}  // namespace pilotmix
