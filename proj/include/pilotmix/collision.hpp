#pragma once

// Collision-model abstraction of the access protocol: a packet decodes iff it
// has a singleton pilot in its slot, and SIC becomes peeling on the
// slot x pilot grid. Used as a fast large-scale simulator and as the
// brute-force reference for the closed-form benchmarks.

#include <iosfwd>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "pilotmix/core_model.hpp"

namespace pilotmix {

class FrameGrid {
 public:
  /// Throws std::invalid_argument if a user's slots or pilots are out of
  /// range, repeated, or mismatched in count.
  FrameGrid(int n_slots, int n_pilots, std::vector<UserTransmission> users);

  int n_slots() const { return n_slots_; }
  int n_pilots() const { return n_pilots_; }
  const std::vector<UserTransmission>& users() const { return users_; }

  /// Indices into users() of the users on (slot, pilot).
  const std::vector<int>& occupancy(int slot, int pilot) const {
    return cells_[static_cast<std::size_t>(slot) * n_pilots_ + pilot];
  }
  /// Indices into users() of the users with a replica in the slot.
  const std::vector<int>& users_in_slot(int slot) const { return slot_users_[slot]; }
  /// K_s of the slot.
  int slot_load(int slot) const { return static_cast<int>(slot_users_[slot].size()); }

 private:
  int n_slots_;
  int n_pilots_;
  std::vector<UserTransmission> users_;
  std::vector<std::vector<int>> cells_;
  std::vector<std::vector<int>> slot_users_;
};

/// True iff some pilot of the user's subset in `slot` has occupancy 1.
/// Throws std::invalid_argument if the user has no replica there.
bool has_singleton(const FrameGrid& grid, int user_index, int slot);

struct PeelOptions {
  /// When set, users within a slot are visited in a shuffled order.
  CounterRng* shuffle = nullptr;
};

/// Resolved user ids under the collision model for the given receiver mode.
std::set<UserId> peel_frame(const FrameGrid& grid, ReceiverMode mode,
                            PeelOptions options = {});

/// Number of users whose complete (slots, per-slot pilot subsets) tuple is
/// shared with at least one other user.
int unresolvable_collision_count(std::span<const UserTransmission> users);

/// Exact single-slot loss probability of a tagged user with k_s users in
/// the slot, by enumerating every joint pilot choice (weighted by psi).
/// Throws std::length_error beyond 1e8 joint outcomes.
double enumerate_slot_loss(int n_pilots, const DegreeDistribution& psi, int k_s,
                           ReceiverMode mode = ReceiverMode::NoSic);

/// Line format: "grid <n_slots> <n_pilots>" header, then one user per line,
/// "<id> <slot,slot,...> <pilot,pilot;pilot,...>" with one ';'-separated
/// subset per slot. '#' starts a comment.
std::string write_grid(const FrameGrid& grid);
FrameGrid read_grid(std::istream& in);
FrameGrid read_grid_file(const std::string& path);

}  // namespace pilotmix
