#pragma once

// Baseband model of one slot: orthogonal +/-1 pilots, Rayleigh block fading,
// the received preamble/payload matrices, matched-filter channel estimates
// and MRC payload estimates.

#include <optional>
#include <span>

#include <Eigen/Dense>

#include "pilotmix/codec.hpp"
#include "pilotmix/random.hpp"

namespace pilotmix {

using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;

/// Rows of the Sylvester Hadamard matrix of order N_P.
class PilotBook {
 public:
  /// Throws std::invalid_argument unless n_pilots is a power of two.
  explicit PilotBook(int n_pilots);

  int size() const { return static_cast<int>(hadamard_.rows()); }
  const Eigen::MatrixXd& matrix() const { return hadamard_; }
  Eigen::RowVectorXd sequence(int j) const { return hadamard_.row(j); }

  /// Column j is P s_j^H / ||s_j||^2, for every pilot at once (fast
  /// Walsh-Hadamard transform over the pilot axis).
  CMatrix project_all(const CMatrix& preamble_part) const;

 private:
  Eigen::MatrixXd hadamard_;
};

/// (1/sqrt(p)) * sum of the chosen pilots. Throws on an empty subset or an
/// index outside the book.
Symbols build_preamble(std::span<const int> pilot_subset, const PilotBook& book);

struct SlotSignal {
  CMatrix preamble_part;  // M x N_P
  CMatrix payload_part;   // M x N_D
  int sic_count = 0;
};

/// One user's contribution to a slot.
struct SlotUser {
  std::span<const int> pilot_subset;
  const Symbols& payload;
  const CVector& channel;
};

/// M i.i.d. CN(0, 1) coefficients.
CVector draw_channel(int n_antennas, CounterRng& rng);

/// P = sum h_k p(k) + Z_p and Y = sum h_k x(k) + Z, noise entries
/// CN(0, noise_variance).
SlotSignal synthesize_slot(std::span<const SlotUser> users, const PilotBook& book,
                           int n_antennas, int payload_symbols,
                           double noise_variance, CounterRng& noise_rng);

/// phi_j = P s_j^H / ||s_j||^2.
CVector estimate_channel_mf(const SlotSignal& slot, int pilot, const PilotBook& book);

/// x_hat = phi^H Y / ||phi||^2; nullopt when phi is exactly zero.
std::optional<Symbols> estimate_payload_mrc(const SlotSignal& slot, const CVector& phi);

}  // namespace pilotmix
