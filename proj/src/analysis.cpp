#include "pilotmix/analysis.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace pilotmix::analysis {

namespace {

double log_binomial(int n, int k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

double binomial(int n, int k) {
  double out = 1.0;
  for (int i = 1; i <= k; ++i) out = out * (n - k + i) / i;
  return out;
}

}  // namespace

void CompensatedSum::add(double x) {
  const double t = sum_ + x;
  if (std::abs(sum_) >= std::abs(x)) {
    compensation_ += (sum_ - t) + x;
  } else {
    compensation_ += (x - t) + sum_;
  }
  sum_ = t;
}

BoundQuery bound_query(const ProtocolConfig& cfg, int n_users) {
  if (!cfg.lambda.is_concentrated() || !cfg.psi.is_concentrated()) {
    throw std::invalid_argument("collision bound needs concentrated lambda and psi");
  }
  BoundQuery q;
  q.scenario = cfg.framed ? Scenario::FramedNested : Scenario::SlottedUnframed;
  q.n_pilots = cfg.n_pilots;
  q.n_slots = cfg.n_slots;
  q.r = cfg.lambda.min_degree();
  q.p = cfg.psi.min_degree();
  q.n_users = n_users;
  check_query(q);
  return q;
}

void check_query(const BoundQuery& q) {
  if (q.n_users < 1) throw std::invalid_argument("n_users must be >= 1");
  if (q.p < 1 || q.p > q.n_pilots) throw std::invalid_argument("p must lie in [1, N_P]");
  if (q.scenario == Scenario::FramedNested && (q.r < 1 || q.r > q.n_slots)) {
    throw std::invalid_argument("r must lie in [1, N_s]");
  }
}

double log_choice_count(const BoundQuery& q) {
  check_query(q);
  const double per_slot = log_binomial(q.n_pilots, q.p);
  if (q.scenario == Scenario::SlottedUnframed) return per_slot;
  return log_binomial(q.n_slots, q.r) + q.r * per_slot;
}

double collision_prob(const BoundQuery& q) {
  check_query(q);
  // Exact integer C while it fits in a double mantissa.
  double choices = binomial(q.n_pilots, q.p);
  if (q.scenario == Scenario::FramedNested) {
    choices = binomial(q.n_slots, q.r) * std::pow(choices, q.r);
  }
  if (!(choices < 0x1.0p53)) choices = std::exp(log_choice_count(q));
  if (q.n_users > choices) return 1.0;
  double log_no_collision = 0.0;
  for (int i = 1; i < q.n_users; ++i) log_no_collision += std::log1p(-i / choices);
  return -std::expm1(log_no_collision);
}

double plr_lower_bound(const BoundQuery& q) {
  return 2.0 * collision_prob(q) / q.n_users;
}

double plr_slotted_nosic(const DegreeDistribution& psi, int n_pilots, int k_s) {
  if (k_s < 1) throw std::invalid_argument("k_s must be >= 1");
  const double density = mean_degree(psi) / n_pilots;
  if (density > 1.0) throw std::invalid_argument("Psi'(1) exceeds N_P");
  const double interfered =
      k_s == 1 ? 0.0 : -std::expm1((k_s - 1) * std::log1p(-density));
  CompensatedSum total;
  for (const auto& [p, prob] : psi.coefficients()) total.add(std::pow(interfered, p) * prob);
  return total.value();
}

double plr_framed_nosic(const DegreeDistribution& lambda, const DegreeDistribution& psi,
                        int n_slots, int n_pilots, int k_a) {
  if (k_a < 1) throw std::invalid_argument("k_a must be >= 1");
  const double slot_density = mean_degree(lambda) / n_slots;
  const double pilot_density = mean_degree(psi) / n_pilots;
  if (slot_density > 1.0) throw std::invalid_argument("Lambda'(1) exceeds N_s");
  if (pilot_density > 1.0) throw std::invalid_argument("Psi'(1) exceeds N_P");

  CompensatedSum replica_lost;
  for (const auto& [p, psi_p] : psi.coefficients()) {
    CompensatedSum alternating;
    for (int j = 0; j <= p; ++j) {
      const double base =
          1.0 - slot_density + slot_density * std::pow(1.0 - pilot_density, j);
      const double term = binomial(p, j) * std::pow(base, k_a - 1);
      alternating.add(j % 2 == 0 ? term : -term);
    }
    replica_lost.add(psi_p * alternating.value());
  }
  CompensatedSum total;
  for (const auto& [r, lambda_r] : lambda.coefficients()) {
    total.add(lambda_r * std::pow(replica_lost.value(), r));
  }
  return total.value();
}

}  // namespace pilotmix::analysis
