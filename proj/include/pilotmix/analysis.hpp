#pragma once

// Closed-form benchmarks: unresolvable-collision probability and the PLR
// floor it implies, and the no-SIC PLR approximations for slotted-unframed
// and framed access.

#include "pilotmix/core_model.hpp"

namespace pilotmix::analysis {

enum class Scenario { SlottedUnframed, FramedNested };

struct BoundQuery {
  Scenario scenario = Scenario::FramedNested;
  int n_pilots = 128;
  /// Ignored for SlottedUnframed.
  int n_slots = 62;
  int r = 2;
  int p = 2;
  /// K_s (unframed) or K_a (framed).
  int n_users = 1;
};

/// Query for a config's concentrated Lambda/Psi. Throws
/// std::invalid_argument for irregular distributions, which the collision
/// bound does not cover.
BoundQuery bound_query(const ProtocolConfig& cfg, int n_users);

/// Throws std::invalid_argument on out-of-range degrees or n_users < 1.
void check_query(const BoundQuery& q);

/// Number of distinct choices C: binom(N_P, p) unframed,
/// binom(N_s, r) * binom(N_P, p)^r framed. Returned in natural log.
double log_choice_count(const BoundQuery& q);

/// Birthday probability that at least two of N users make the same choice,
/// 1 - prod_{i<N} (C - i) / C, in the log domain.
double collision_prob(const BoundQuery& q);

/// 2 P_u / N: at least two of the N users are in the collision.
double plr_lower_bound(const BoundQuery& q);

/// sum_p (1 - (1 - Psi'(1)/N_P)^(K_s-1))^p Psi_p.
double plr_slotted_nosic(const DegreeDistribution& psi, int n_pilots, int k_s);

/// sum_r Lambda_r [ sum_p Psi_p sum_j (-1)^j C(p,j)
///   (1 - a + a (1 - Psi'(1)/N_P)^j)^(K_a-1) ]^r, a = Lambda'(1)/N_s.
double plr_framed_nosic(const DegreeDistribution& lambda, const DegreeDistribution& psi,
                        int n_slots, int n_pilots, int k_a);

/// Neumaier-compensated accumulator.
class CompensatedSum {
 public:
  void add(double x);
  double value() const { return sum_ + compensation_; }

 private:
  double sum_ = 0.0;
  double compensation_ = 0.0;
};

}  // namespace pilotmix::analysis
