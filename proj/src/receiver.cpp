#include "pilotmix/receiver.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace pilotmix {

std::string_view to_string(SicPhase phase) {
  return phase == SicPhase::Inner ? "inner" : "outer";
}

std::string format_trace_event(const TraceEvent& e) {
  std::ostringstream os;
  os << "trial=" << e.trial << " slot=" << e.slot << " pilot=" << e.pilot
     << " sic=" << e.sic_iteration << " user=" << e.user << " phase=" << to_string(e.phase);
  return os.str();
}

TraceEvent parse_trace_event(std::string_view line) {
  TraceEvent e;
  int seen = 0;
  std::istringstream is{std::string(line)};
  std::string token;
  while (is >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("bad trace token '" + token + "'");
    const std::string key = token.substr(0, eq);
    const std::string value = token.substr(eq + 1);
    auto number = [&](auto& out) {
      const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
      if (ec != std::errc{} || ptr != value.data() + value.size()) {
        throw std::invalid_argument("bad trace value '" + token + "'");
      }
    };
    if (key == "trial") {
      number(e.trial);
    } else if (key == "slot") {
      number(e.slot);
    } else if (key == "pilot") {
      number(e.pilot);
    } else if (key == "sic") {
      number(e.sic_iteration);
    } else if (key == "user") {
      number(e.user);
    } else if (key == "phase") {
      if (value == "inner") {
        e.phase = SicPhase::Inner;
      } else if (value == "outer") {
        e.phase = SicPhase::Outer;
      } else {
        throw std::invalid_argument("bad trace phase '" + value + "'");
      }
    } else {
      throw std::invalid_argument("unknown trace key '" + key + "'");
    }
    ++seen;
  }
  if (seen != 6) throw std::invalid_argument("incomplete trace record");
  return e;
}

PlacementResolver table_resolver(std::vector<UserTransmission> placements) {
  std::map<UserId, UserTransmission> table;
  for (auto& tx : placements) table.emplace(tx.user_id, std::move(tx));
  return [table = std::move(table)](std::span<const std::uint8_t> info) {
    const auto it = table.find(codec::user_id_of(info));
    if (it == table.end()) throw std::out_of_range("no placement for decoded user");
    UserTransmission tx = it->second;
    tx.payload_bits.assign(info.begin(), info.end());
    return tx;
  };
}

void inner_sic_subtract(SlotSignal& slot, const CVector& phi, const DecodedPacket& pkt,
                        const PilotBook& book, InnerSicScale scale) {
  const auto* subset = pkt.transmission.subset_in_slot(pkt.site.slot);
  if (subset == nullptr) throw std::logic_error("packet is not placed in its decode slot");
  const double gain = scale == InnerSicScale::EffectiveChannel ? pkt.effective_scale : 1.0;
  const CVector h_hat = gain * phi;
  slot.preamble_part.noalias() -= h_hat * build_preamble(*subset, book);
  slot.payload_part.noalias() -= h_hat * pkt.payload_symbols;
  ++slot.sic_count;
}

CVector outer_sic_estimate(const SlotSignal& slot, const Symbols& payload) {
  const double energy = payload.squaredNorm();
  if (energy == 0.0) throw std::invalid_argument("zero-energy payload");
  return slot.payload_part * payload.adjoint() / energy;
}

void outer_sic_subtract(SlotSignal& slot, const CVector& h_hat, const Symbols& preamble,
                        const Symbols& payload) {
  slot.preamble_part.noalias() -= h_hat * preamble;
  slot.payload_part.noalias() -= h_hat * payload;
  ++slot.sic_count;
}

SlotProjection project_slot(const SlotSignal& slot, const PilotBook& book) {
  SlotProjection out;
  out.phis = book.project_all(slot.preamble_part);
  out.energy = out.phis.colwise().squaredNorm().transpose();
  std::vector<Eigen::Index> active;
  for (Eigen::Index j = 0; j < out.energy.size(); ++j) {
    if (out.energy[j] > 0.0) active.push_back(j);
  }
  if (active.size() == static_cast<std::size_t>(out.energy.size())) {
    out.combined = out.phis.adjoint() * slot.payload_part;
    return out;
  }
  // Silent pilots (noiseless runs) have zero rows; skip them.
  out.combined = CMatrix::Zero(out.phis.cols(), slot.payload_part.cols());
  for (Eigen::Index j : active) {
    out.combined.row(j).noalias() = out.phis.col(j).adjoint() * slot.payload_part;
  }
  return out;
}

void cancel_contribution(SlotSignal& slot, SlotProjection& projection, const CVector& h_hat,
                         std::span<const int> subset, const PilotBook& book,
                         const Symbols& payload) {
  const Symbols preamble = build_preamble(subset, book);
  // The preamble projects onto c = p S^T / N_P: 1/sqrt(p) on the subset.
  // Expanding (phis - h c)^H (Y - h x) around the old phis and Y:
  // combined -= (phis^H h) x + c^H (h^H Y - ||h||^2 x), the second term
  // touching only the subset rows.
  const double weight = 1.0 / std::sqrt(static_cast<double>(subset.size()));
  const CVector a = projection.phis.adjoint() * h_hat;
  const Eigen::RowVectorXcd b =
      weight * (h_hat.adjoint() * slot.payload_part - h_hat.squaredNorm() * payload);
  projection.combined.noalias() -= a * payload;
  for (int i : subset) {
    projection.combined.row(i) -= b;
    projection.phis.col(i) -= h_hat * weight;
    projection.energy[i] = projection.phis.col(i).squaredNorm();
  }
  outer_sic_subtract(slot, h_hat, preamble, payload);
}

Receiver::Receiver(const ProtocolConfig& cfg, const PilotBook& pilots,
                   const codec::PacketCodec& codec, PlacementResolver resolver)
    : cfg_(cfg), pilots_(pilots), codec_(codec), resolve_(std::move(resolver)) {
  if (!resolve_) {
    resolve_ = [&cfg = cfg_](std::span<const std::uint8_t> info) {
      return derive_choices(info, cfg);
    };
  }
}

std::optional<DecodedPacket> Receiver::try_decode(const SlotSignal& signal, int slot,
                                                  int pilot, const CVector& phi) const {
  const auto estimate = estimate_payload_mrc(signal, phi);
  if (!estimate) return std::nullopt;
  return accept_estimate(*estimate, slot, pilot, signal.sic_count);
}

std::optional<DecodedPacket> Receiver::accept_estimate(const Symbols& estimate, int slot,
                                                       int pilot, int sic_count) const {
  auto info = codec_.validate(estimate, slot);
  if (!info) return std::nullopt;

  DecodedPacket pkt;
  pkt.transmission = resolve_(*info);
  const auto* subset = pkt.transmission.subset_in_slot(slot);
  if (subset == nullptr || !std::binary_search(subset->begin(), subset->end(), pilot)) {
    return std::nullopt;
  }
  pkt.payload_symbols = codec_.modulate(*info);
  pkt.site = {slot, pilot, sic_count};
  pkt.effective_scale = std::sqrt(static_cast<double>(subset->size()));
  return pkt;
}

void Receiver::record(const DecodedPacket& pkt) const {
  if (trace_ == nullptr) return;
  trace_->push_back({trial_, pkt.site.slot, pkt.site.pilot, pkt.site.sic_iteration,
                     pkt.user_id(), pkt.phase});
}

std::vector<DecodedPacket> Receiver::process_slot(int slot, FrameState& frame,
                                                  SicPhase phase) const {
  SlotSignal& signal = frame.slots.at(static_cast<std::size_t>(slot));
  std::set<UserId>& cancelled = frame.cancelled.at(static_cast<std::size_t>(slot));
  const bool inner_sic = uses_inner_sic(cfg_.receiver_mode);
  const int n_pilots = pilots_.size();
  std::vector<DecodedPacket> found;
  std::set<UserId> seen;

  // phi_j^H Y for every pilot, kept current across cancellations.
  auto& cached = frame.projections.at(static_cast<std::size_t>(slot));
  if (!cached) cached = project_slot(signal, pilots_);
  SlotProjection& proj = *cached;

  bool restart = true;
  while (restart) {
    restart = false;
    for (int j = 0; j < n_pilots; ++j) {
      if (proj.energy[j] == 0.0) continue;
      const Symbols estimate = proj.combined.row(j) / proj.energy[j];
      auto pkt = accept_estimate(estimate, slot, j, signal.sic_count);
      if (!pkt || cancelled.contains(pkt->user_id()) || seen.contains(pkt->user_id())) {
        continue;
      }
      pkt->phase = phase;
      seen.insert(pkt->user_id());
      record(*pkt);
      if (inner_sic) {
        const CVector h_hat = pkt->effective_scale * proj.phis.col(j);
        cancel_contribution(signal, proj, h_hat, *pkt->transmission.subset_in_slot(slot),
                            pilots_, pkt->payload_symbols);
        cancelled.insert(pkt->user_id());
        found.push_back(std::move(*pkt));
        restart = true;
        break;
      }
      found.push_back(std::move(*pkt));
    }
  }
  return found;
}

FrameResult Receiver::run_frame(const SlotSource& source) const {
  const ReceiverMode mode = cfg_.receiver_mode;
  FrameState frame;
  frame.slots.resize(static_cast<std::size_t>(cfg_.n_slots));
  frame.cancelled.resize(static_cast<std::size_t>(cfg_.n_slots));
  frame.projections.resize(static_cast<std::size_t>(cfg_.n_slots));
  FrameResult result;

  auto accept = [&](std::vector<DecodedPacket>&& packets, int slot, bool acknowledge) {
    for (auto& pkt : packets) {
      frame.resolved_users.insert(pkt.user_id());
      result.resolved.emplace(pkt.user_id(), pkt.transmission.payload_bits);
      if (acknowledge) frame.ack_set.emplace(pkt.user_id(), slot);
      if (uses_outer_sic(mode)) frame.decoded_buffer.push_back(pkt);
      result.packets.push_back(std::move(pkt));
    }
  };

  static const std::map<UserId, int> kNoAcks;
  for (int n = 0; n < cfg_.n_slots; ++n) {
    frame.slots[n] = source(n, uses_ack(mode) ? frame.ack_set : kNoAcks);
    accept(process_slot(n, frame, SicPhase::Inner), n, uses_ack(mode));
  }

  while (!frame.decoded_buffer.empty()) {
    const DecodedPacket pkt = std::move(frame.decoded_buffer.front());
    frame.decoded_buffer.pop_front();
    const UserTransmission& tx = pkt.transmission;
    const auto ack = frame.ack_set.find(pkt.user_id());
    for (std::size_t i = 0; i < tx.slot_indices.size(); ++i) {
      const int m = tx.slot_indices[i];
      if (frame.cancelled[m].contains(pkt.user_id())) continue;
      // An acknowledged user stopped transmitting after its ACK slot.
      if (ack != frame.ack_set.end() && m > ack->second) continue;
      SlotSignal& signal = frame.slots[m];
      const CVector h_hat = outer_sic_estimate(signal, pkt.payload_symbols);
      auto& cached = frame.projections[m];
      if (!cached) cached = project_slot(signal, pilots_);
      cancel_contribution(signal, *cached, h_hat, tx.pilot_subsets[i], pilots_,
                          pkt.payload_symbols);
      frame.cancelled[m].insert(pkt.user_id());
      accept(process_slot(m, frame, SicPhase::Outer), m, false);
    }
  }
  return result;
}

}  // namespace pilotmix
