#include "pilotmix/codec.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <string>

namespace pilotmix::codec {

GaloisField::GaloisField(int m, unsigned primitive_poly)
    : m_(m), n_((1 << m) - 1), exp_(2 * ((1 << m) - 1)), log_(1 << m, -1) {
  if (m < 2 || m > 16) throw std::invalid_argument("GF degree out of range");
  unsigned a = 1;
  for (int i = 0; i < n_; ++i) {
    if (log_[a] != -1) {
      throw std::invalid_argument("polynomial is not primitive");
    }
    exp_[i] = a;
    log_[a] = i;
    a <<= 1;
    if (a & (1u << m)) a ^= primitive_poly;
  }
  for (int i = n_; i < 2 * n_; ++i) exp_[i] = exp_[i - n_];
}

unsigned GaloisField::exp(int power) const {
  if (power >= 0 && power < 2 * n_) return exp_[power];
  power %= n_;
  if (power < 0) power += n_;
  return exp_[power];
}

unsigned GaloisField::mul(unsigned a, unsigned b) const {
  if (a == 0 || b == 0) return 0;
  return exp_[log_[a] + log_[b]];
}

unsigned GaloisField::div(unsigned a, unsigned b) const {
  if (b == 0) throw std::domain_error("division by zero in GF");
  if (a == 0) return 0;
  return exp_[log_[a] - log_[b] + n_];
}

namespace {

/// True iff the locator divides x^n - 1 (n = field order), i.e. it has
/// deg distinct nonzero roots. x^(n+1) mod locator by repeated squaring is
/// far cheaper than a full Chien search on garbage syndromes.
bool splits_into_distinct_roots(const GaloisField& f, std::vector<unsigned> locator) {
  const int deg = static_cast<int>(locator.size()) - 1;
  if (deg == 0) return true;
  const unsigned lead_inv = f.div(1, locator.back());
  for (auto& c : locator) c = f.mul(c, lead_inv);
  // Reduce a polynomial (coefficients by power) modulo the monic locator.
  auto reduce = [&](std::vector<unsigned>& a) {
    for (int top = static_cast<int>(a.size()) - 1; top >= deg; --top) {
      const unsigned c = a[top];
      if (c == 0) continue;
      for (int i = 0; i <= deg; ++i) a[top - deg + i] ^= f.mul(c, locator[i]);
    }
    a.resize(deg);
  };
  std::vector<unsigned> x(2, 0);
  x[1] = 1;
  reduce(x);
  const std::vector<unsigned> x_mod = x;
  // Squaring is linear in characteristic 2: (sum a_i x^i)^2 = sum a_i^2 x^2i.
  std::vector<unsigned> r = x_mod;
  for (int s = 0; s < f.degree(); ++s) {
    std::vector<unsigned> sq(2 * r.size(), 0);
    for (std::size_t i = 0; i < r.size(); ++i) sq[2 * i] = f.mul(r[i], r[i]);
    reduce(sq);
    r = std::move(sq);
  }
  return r == x_mod;
}


// Minimal polynomial of alpha^power over GF(2), index = power of x.
Bits minimal_polynomial(const GaloisField& gf, int power) {
  std::set<int> coset;
  for (int c = power % gf.order(); coset.insert(c).second;
       c = (2 * c) % gf.order()) {
  }
  std::vector<unsigned> poly{1};
  for (int c : coset) {
    // poly *= (x + alpha^c)
    std::vector<unsigned> next(poly.size() + 1, 0);
    const unsigned root = gf.exp(c);
    for (std::size_t i = 0; i < poly.size(); ++i) {
      next[i + 1] ^= poly[i];
      next[i] ^= gf.mul(poly[i], root);
    }
    poly = std::move(next);
  }
  Bits out(poly.size());
  for (std::size_t i = 0; i < poly.size(); ++i) {
    if (poly[i] > 1) throw std::logic_error("minimal polynomial not binary");
    out[i] = static_cast<std::uint8_t>(poly[i]);
  }
  return out;
}

Bits multiply_gf2(const Bits& a, const Bits& b) {
  Bits out(a.size() + b.size() - 1, 0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a[i]) continue;
    for (std::size_t j = 0; j < b.size(); ++j) out[i + j] ^= b[j];
  }
  return out;
}

int coset_leader(int power, int order) {
  int leader = power;
  for (int c = (2 * power) % order; c != power; c = (2 * c) % order) {
    leader = std::min(leader, c);
  }
  return leader;
}

}  // namespace

BchCode::BchCode() : BchCode(9, kCorrectable, 0x211) {}

BchCode::BchCode(int m, int t, unsigned primitive_poly)
    : field_(m, primitive_poly), n_((1 << m) - 1), t_(t) {
  if (t < 1 || 2 * t >= n_) throw std::invalid_argument("invalid BCH t");
  generator_ = Bits{1};
  std::set<int> used;
  for (int power = 1; power <= 2 * t - 1; power += 2) {
    if (!used.insert(coset_leader(power, n_)).second) continue;
    generator_ = multiply_gf2(generator_, minimal_polynomial(field_, power));
  }
  const int parity = static_cast<int>(generator_.size()) - 1;
  k_ = n_ - parity;
  if (k_ <= 0) throw std::invalid_argument("BCH code has no information bits");
  generator_words_.assign((parity + 63) / 64, 0);
  for (int d = 0; d < parity; ++d) {
    if (generator_[d]) generator_words_[d / 64] |= std::uint64_t{1} << (d % 64);
  }
  if (m > 16) throw std::invalid_argument("BCH field too large");
  syndrome_words_ = (t + 3) / 4;
  syndrome_table_.assign(static_cast<std::size_t>(n_) * syndrome_words_, 0);
  for (int b = 0; b < n_; ++b) {
    const long d = n_ - 1 - b;
    for (int i = 0; i < t; ++i) {
      const std::uint64_t term = field_.exp(static_cast<int>(((2 * i + 1) * d) % n_));
      syndrome_table_[static_cast<std::size_t>(b) * syndrome_words_ + i / 4] |= term
                                                                                << (16 * (i % 4));
    }
  }
}

Bits BchCode::encode(std::span<const std::uint8_t> info) const {
  if (static_cast<int>(info.size()) != k_) {
    throw std::invalid_argument("BCH encode expects " + std::to_string(k_) +
                                " bits, got " + std::to_string(info.size()));
  }
  const int parity = n_ - k_;
  const int top_word = (parity - 1) / 64;
  const int top_bit = (parity - 1) % 64;
  const std::uint64_t top_mask =
      top_bit == 63 ? ~std::uint64_t{0} : (std::uint64_t{1} << (top_bit + 1)) - 1;
  std::vector<std::uint64_t> reg(generator_words_.size(), 0);

  for (std::uint8_t bit : info) {
    const bool feedback = ((reg[top_word] >> top_bit) & 1u) ^ (bit & 1u);
    for (int w = top_word; w > 0; --w) {
      reg[w] = (reg[w] << 1) | (reg[w - 1] >> 63);
    }
    reg[0] <<= 1;
    reg[top_word] &= top_mask;
    if (feedback) {
      for (std::size_t w = 0; w < reg.size(); ++w) reg[w] ^= generator_words_[w];
    }
  }

  Bits codeword(info.begin(), info.end());
  codeword.resize(n_);
  for (int l = 0; l < parity; ++l) {
    const int d = parity - 1 - l;
    codeword[k_ + l] = static_cast<std::uint8_t>((reg[d / 64] >> (d % 64)) & 1u);
  }
  return codeword;
}

std::optional<Bits> BchCode::decode(std::span<const std::uint8_t> received) const {
  if (static_cast<int>(received.size()) != n_) {
    throw std::invalid_argument("BCH decode expects " + std::to_string(n_) +
                                " bits, got " + std::to_string(received.size()));
  }
  const int two_t = 2 * t_;

  std::vector<std::uint64_t> odd(static_cast<std::size_t>(syndrome_words_), 0);
  for (int b = 0; b < n_; ++b) {
    if (!received[b]) continue;
    const std::uint64_t* row = &syndrome_table_[static_cast<std::size_t>(b) * syndrome_words_];
    for (int w = 0; w < syndrome_words_; ++w) odd[w] ^= row[w];
  }

  // syndrome[j - 1] = r(alpha^j); even ones are squares of earlier ones.
  std::vector<unsigned> syndrome(two_t, 0);
  bool clean = true;
  for (int j = 1; j <= two_t; ++j) {
    unsigned s = 0;
    if (j % 2 == 0) {
      s = field_.mul(syndrome[j / 2 - 1], syndrome[j / 2 - 1]);
    } else {
      const int i = j / 2;
      s = static_cast<unsigned>((odd[i / 4] >> (16 * (i % 4))) & 0xFFFFu);
    }
    syndrome[j - 1] = s;
    clean = clean && s == 0;
  }
  if (clean) return Bits(received.begin(), received.begin() + k_);

  // Berlekamp-Massey: shortest LFSR (error locator) generating the syndromes.
  std::vector<unsigned> locator{1};
  std::vector<unsigned> previous{1};
  int length = 0;
  int shift = 1;
  unsigned previous_discrepancy = 1;
  for (int step = 0; step < two_t; ++step) {
    unsigned discrepancy = syndrome[step];
    for (int i = 1; i <= length && i < static_cast<int>(locator.size()); ++i) {
      discrepancy ^= field_.mul(locator[i], syndrome[step - i]);
    }
    if (discrepancy == 0) {
      ++shift;
      continue;
    }
    const unsigned scale = field_.div(discrepancy, previous_discrepancy);
    std::vector<unsigned> updated = locator;
    if (updated.size() < previous.size() + shift) {
      updated.resize(previous.size() + shift, 0);
    }
    for (std::size_t i = 0; i < previous.size(); ++i) {
      updated[i + shift] ^= field_.mul(scale, previous[i]);
    }
    if (2 * length <= step) {
      previous = std::move(locator);
      length = step + 1 - length;
      previous_discrepancy = discrepancy;
      shift = 1;
    } else {
      ++shift;
    }
    locator = std::move(updated);
  }
  while (locator.size() > 1 && locator.back() == 0) locator.pop_back();
  const int locator_degree = static_cast<int>(locator.size()) - 1;
  if (length > t_ || locator_degree != length) return std::nullopt;

  if (!splits_into_distinct_roots(field_, locator)) return std::nullopt;

  // Chien search: an error at degree d is a root at alpha^(-d). Term i is
  // tracked by its log, which drops by i per step.
  std::vector<int> term_log;
  std::vector<int> term_step;
  for (std::size_t i = 0; i < locator.size(); ++i) {
    if (!locator[i]) continue;
    term_log.push_back(field_.log(locator[i]));
    term_step.push_back(static_cast<int>(i));
  }
  Bits corrected(received.begin(), received.end());
  int roots = 0;
  for (int d = 0; d < n_ && roots < length; ++d) {
    unsigned value = 0;
    for (std::size_t i = 0; i < term_log.size(); ++i) {
      value ^= field_.exp(term_log[i]);
      term_log[i] -= term_step[i];
      if (term_log[i] < 0) term_log[i] += n_;
    }
    if (value == 0) {
      corrected[n_ - 1 - d] ^= 1u;
      ++roots;
    }
  }
  if (roots != length) return std::nullopt;
  return Bits(corrected.begin(), corrected.begin() + k_);
}

const BchCode& default_bch() {
  static const BchCode code;
  return code;
}

std::uint16_t crc16(std::span<const std::uint8_t> bits) {
  std::uint16_t crc = 0xFFFF;
  for (std::uint8_t bit : bits) {
    const bool feedback = ((crc >> 15) & 1u) ^ (bit & 1u);
    crc = static_cast<std::uint16_t>(crc << 1);
    if (feedback) crc ^= 0x1021;
  }
  return crc;
}

Bits crc_attach(std::span<const std::uint8_t> data) {
  Bits out(data.begin(), data.end());
  const std::uint16_t crc = crc16(data);
  for (int i = kCrcBits - 1; i >= 0; --i) {
    out.push_back(static_cast<std::uint8_t>((crc >> i) & 1u));
  }
  return out;
}

bool crc_check(std::span<const std::uint8_t> info) {
  if (info.size() < static_cast<std::size_t>(kCrcBits)) return false;
  const auto data = info.first(info.size() - kCrcBits);
  const std::uint16_t crc = crc16(data);
  for (int i = 0; i < kCrcBits; ++i) {
    const unsigned expected = (crc >> (kCrcBits - 1 - i)) & 1u;
    if (info[data.size() + i] != expected) return false;
  }
  return true;
}

Symbols qpsk_map(std::span<const std::uint8_t> bits) {
  if (bits.size() % 2 != 0) {
    throw std::invalid_argument("QPSK mapping needs an even number of bits");
  }
  const double a = 1.0 / std::sqrt(2.0);
  Symbols out(static_cast<Eigen::Index>(bits.size() / 2));
  for (Eigen::Index s = 0; s < out.size(); ++s) {
    const double re = bits[2 * s] ? -a : a;
    const double im = bits[2 * s + 1] ? -a : a;
    out[s] = {re, im};
  }
  return out;
}

Bits qpsk_demap(const Symbols& symbols) {
  Bits out(2 * static_cast<std::size_t>(symbols.size()));
  for (Eigen::Index s = 0; s < symbols.size(); ++s) {
    out[2 * s] = symbols[s].real() < 0.0;
    out[2 * s + 1] = symbols[s].imag() < 0.0;
  }
  return out;
}

Bits make_information_bits(UserId id, CounterRng& rng) {
  Bits data;
  data.reserve(kInfoLength);
  for (int i = kUserIdBits - 1; i >= 0; --i) {
    data.push_back(static_cast<std::uint8_t>((id >> i) & 1u));
  }
  std::uint64_t word = 0;
  int available = 0;
  while (static_cast<int>(data.size()) < kDataBits) {
    if (available == 0) {
      word = rng();
      available = 64;
    }
    data.push_back(static_cast<std::uint8_t>(word & 1u));
    word >>= 1;
    --available;
  }
  return crc_attach(data);
}

UserId user_id_of(std::span<const std::uint8_t> info) {
  if (info.size() < static_cast<std::size_t>(kUserIdBits)) {
    throw std::invalid_argument("information field too short for a user id");
  }
  UserId id = 0;
  for (int i = 0; i < kUserIdBits; ++i) id = (id << 1) | (info[i] & 1u);
  return id;
}

Bits PacketCodec::transmit_bits(std::span<const std::uint8_t> info) const {
  Bits bits = default_bch().encode(info);
  bits.resize(bits.size() + kPadBits, 0);
  return bits;
}

Symbols PacketCodec::modulate(std::span<const std::uint8_t> info) const {
  return qpsk_map(transmit_bits(info));
}

std::optional<Bits> PacketCodec::validate(const Symbols& estimate, int) const {
  if (estimate.size() != kSymbolsPerPacket) return std::nullopt;
  const Bits sliced = qpsk_demap(estimate);
  auto info = default_bch().decode(std::span(sliced).first(kCodeLength));
  if (!info || !crc_check(*info)) return std::nullopt;
  return info;
}

void GenieCodec::add_candidate(int slot, const Bits& info) {
  candidates_[slot].push_back({info, default_bch().encode(info)});
}

std::optional<Bits> GenieCodec::validate(const Symbols& estimate, int slot) const {
  const auto it = candidates_.find(slot);
  if (it == candidates_.end() || estimate.size() != kSymbolsPerPacket) {
    return std::nullopt;
  }
  const Bits sliced = qpsk_demap(estimate);
  for (const Candidate& c : it->second) {
    int distance = 0;
    for (int b = 0; b < kCodeLength && distance <= kCorrectable; ++b) {
      distance += sliced[b] != c.coded[b];
    }
    if (distance <= kCorrectable) return c.info;
  }
  return std::nullopt;
}

}  // namespace pilotmix::codec
