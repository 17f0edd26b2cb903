#pragma once

// Packet codec: (511, 421, t=10) binary BCH, CRC-16 validation field, one
// zero pad bit, and Gray-mapped QPSK. A packet is valid only when the BCH
// decoder succeeds and the CRC over the recovered information field passes.

#include <complex>
#include <cstdint>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "pilotmix/random.hpp"

namespace pilotmix {

/// One bit per element, values 0 or 1.
using Bits = std::vector<std::uint8_t>;
using Symbols = Eigen::RowVectorXcd;
using UserId = std::uint32_t;

namespace codec {

inline constexpr int kCodeLength = 511;
inline constexpr int kInfoLength = 421;
inline constexpr int kCorrectable = 10;
inline constexpr int kCrcBits = 16;
inline constexpr int kPadBits = 1;
inline constexpr int kUserIdBits = 32;
inline constexpr int kDataBits = kInfoLength - kCrcBits;
inline constexpr int kSymbolsPerPacket = (kCodeLength + kPadBits) / 2;

static_assert(kDataBits >= kUserIdBits + 64,
              "information field must carry the user id and seed entropy");

/// GF(2^m) with log/antilog tables.
class GaloisField {
 public:
  GaloisField(int m, unsigned primitive_poly);

  int degree() const { return m_; }
  /// Multiplicative group order, 2^m - 1.
  int order() const { return n_; }

  unsigned exp(int power) const;
  /// Discrete log; a must be nonzero.
  int log(unsigned a) const { return log_[a]; }
  unsigned mul(unsigned a, unsigned b) const;
  unsigned div(unsigned a, unsigned b) const;

 private:
  int m_;
  int n_;
  std::vector<unsigned> exp_;
  std::vector<int> log_;
};

/// Narrow-sense binary BCH code of length 2^m - 1 correcting t errors.
///
/// Codeword layout is systematic: bits [0, k) are the information bits, bits
/// [k, n) the parity. Bit i is the coefficient of x^(n-1-i).
class BchCode {
 public:
  /// The (511, 421, 10) code over GF(2^9) with primitive x^9 + x^4 + 1.
  BchCode();
  BchCode(int m, int t, unsigned primitive_poly);

  int n() const { return n_; }
  int k() const { return k_; }
  int t() const { return t_; }
  /// Generator coefficients, index = power of x.
  const Bits& generator() const { return generator_; }

  Bits encode(std::span<const std::uint8_t> info) const;

  /// Bounded-distance hard-decision decoding (Berlekamp-Massey + Chien
  /// search). Returns the information bits, or nullopt when the syndrome is
  /// uncorrectable. Patterns beyond t errors may also miscorrect.
  std::optional<Bits> decode(std::span<const std::uint8_t> received) const;

 private:
  GaloisField field_;
  int n_;
  int k_;
  int t_;
  Bits generator_;
  std::vector<std::uint64_t> generator_words_;  // generator minus leading term
  /// Per bit position, alpha^(j d) for odd j = 1, 3, ..., 2t - 1 in 16-bit
  /// lanes, so odd syndromes are a XOR over the set bits.
  std::vector<std::uint64_t> syndrome_table_;
  int syndrome_words_ = 0;
};

/// The shared (511, 421, 10) instance.
const BchCode& default_bch();

/// CRC-16/CCITT-FALSE (poly 0x1021, init 0xFFFF) over a bit sequence, MSB
/// first.
std::uint16_t crc16(std::span<const std::uint8_t> bits);
/// Returns data followed by its 16 CRC bits.
Bits crc_attach(std::span<const std::uint8_t> data);
/// Checks a data+CRC field produced by crc_attach.
bool crc_check(std::span<const std::uint8_t> info);

/// Gray labeling (b0, b1) -> ((1 - 2 b0) + i (1 - 2 b1)) / sqrt(2).
Symbols qpsk_map(std::span<const std::uint8_t> bits);
/// Sign slicer; invariant to positive real scaling of the input.
Bits qpsk_demap(const Symbols& symbols);

/// Information field: 32-bit user id (MSB first), uniform random bits, CRC.
Bits make_information_bits(UserId id, CounterRng& rng);
UserId user_id_of(std::span<const std::uint8_t> info);

/// TX/RX chain for one packet. The base implementation runs the real
/// BCH + CRC decoder.
class PacketCodec {
 public:
  PacketCodec() = default;
  PacketCodec(const PacketCodec&) = default;
  PacketCodec& operator=(const PacketCodec&) = default;
  virtual ~PacketCodec() = default;

  /// 511-bit codeword followed by the zero pad bit.
  Bits transmit_bits(std::span<const std::uint8_t> info) const;
  /// Encode, pad, and map to kSymbolsPerPacket QPSK symbols.
  Symbols modulate(std::span<const std::uint8_t> info) const;

  /// Slices an MRC output and returns the validated information bits.
  /// `slot` is the slot being processed; only the genie variant uses it.
  virtual std::optional<Bits> validate(const Symbols& estimate,
                                       int slot) const;
};

/// Fast approximation: a block is declared valid iff its sliced bits are
/// within t of the codeword of some user transmitting in the slot. Needs
/// ground truth, so it is a simulation shortcut and never used for
/// acceptance runs.
class GenieCodec final : public PacketCodec {
 public:
  void add_candidate(int slot, const Bits& info);

  std::optional<Bits> validate(const Symbols& estimate,
                               int slot) const override;

 private:
  struct Candidate {
    Bits info;
    Bits coded;
  };
  std::unordered_map<int, std::vector<Candidate>> candidates_;
};

}  // namespace codec
}  // namespace pilotmix
