#include "pilotmix/phy.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace pilotmix {

PilotBook::PilotBook(int n_pilots) {
  if (n_pilots < 1 || (n_pilots & (n_pilots - 1)) != 0) {
    throw std::invalid_argument("pilot count " + std::to_string(n_pilots) +
                                " is not a power of two");
  }
  hadamard_.resize(n_pilots, n_pilots);
  for (int i = 0; i < n_pilots; ++i) {
    for (int j = 0; j < n_pilots; ++j) {
      hadamard_(i, j) = (__builtin_popcount(static_cast<unsigned>(i & j)) & 1) ? -1.0 : 1.0;
    }
  }
}

CMatrix PilotBook::project_all(const CMatrix& preamble_part) const {
  const Eigen::Index n = size();
  if (preamble_part.cols() != n) throw std::invalid_argument("preamble width mismatch");
  CMatrix out = preamble_part;
  for (Eigen::Index half = 1; half < n; half *= 2) {
    for (Eigen::Index block = 0; block < n; block += 2 * half) {
      for (Eigen::Index i = block; i < block + half; ++i) {
        for (Eigen::Index r = 0; r < out.rows(); ++r) {
          const std::complex<double> a = out(r, i);
          const std::complex<double> b = out(r, i + half);
          out(r, i) = a + b;
          out(r, i + half) = a - b;
        }
      }
    }
  }
  out /= static_cast<double>(n);
  return out;
}

Symbols build_preamble(std::span<const int> pilot_subset, const PilotBook& book) {
  if (pilot_subset.empty()) throw std::invalid_argument("empty pilot subset");
  Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(book.size());
  for (int j : pilot_subset) {
    if (j < 0 || j >= book.size()) throw std::out_of_range("pilot index out of range");
    sum += book.matrix().row(j);
  }
  sum /= std::sqrt(static_cast<double>(pilot_subset.size()));
  return sum.cast<std::complex<double>>();
}

namespace {

void fill_gaussian(CMatrix& m, double variance, CounterRng& rng) {
  std::normal_distribution<double> normal(0.0, std::sqrt(variance / 2.0));
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      const double re = normal(rng);
      const double im = normal(rng);
      m(r, c) = {re, im};
    }
  }
}

}  // namespace

CVector draw_channel(int n_antennas, CounterRng& rng) {
  CMatrix h(n_antennas, 1);
  fill_gaussian(h, 1.0, rng);
  return h.col(0);
}

SlotSignal synthesize_slot(std::span<const SlotUser> users, const PilotBook& book,
                           int n_antennas, int payload_symbols,
                           double noise_variance, CounterRng& noise_rng) {
  SlotSignal slot;
  slot.preamble_part.resize(n_antennas, book.size());
  slot.payload_part.resize(n_antennas, payload_symbols);
  if (noise_variance > 0.0) {
    fill_gaussian(slot.preamble_part, noise_variance, noise_rng);
    fill_gaussian(slot.payload_part, noise_variance, noise_rng);
  } else {
    slot.preamble_part.setZero();
    slot.payload_part.setZero();
  }
  for (const SlotUser& u : users) {
    if (u.channel.size() != n_antennas || u.payload.size() != payload_symbols) {
      throw std::invalid_argument("slot user dimension mismatch");
    }
    slot.preamble_part.noalias() += u.channel * build_preamble(u.pilot_subset, book);
    slot.payload_part.noalias() += u.channel * u.payload;
  }
  return slot;
}

CVector estimate_channel_mf(const SlotSignal& slot, int pilot, const PilotBook& book) {
  if (pilot < 0 || pilot >= book.size()) throw std::out_of_range("pilot index out of range");
  const Eigen::VectorXcd s = book.matrix().row(pilot).transpose().cast<std::complex<double>>();
  return slot.preamble_part * s / static_cast<double>(book.size());
}

std::optional<Symbols> estimate_payload_mrc(const SlotSignal& slot, const CVector& phi) {
  const double energy = phi.squaredNorm();
  if (energy == 0.0) return std::nullopt;
  return Symbols(phi.adjoint() * slot.payload_part / energy);
}

}  // namespace pilotmix
