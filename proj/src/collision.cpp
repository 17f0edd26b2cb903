#include "pilotmix/collision.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace pilotmix {

FrameGrid::FrameGrid(int n_slots, int n_pilots, std::vector<UserTransmission> users)
    : n_slots_(n_slots),
      n_pilots_(n_pilots),
      users_(std::move(users)),
      cells_(static_cast<std::size_t>(n_slots) * n_pilots),
      slot_users_(static_cast<std::size_t>(n_slots)) {
  if (n_slots < 1 || n_pilots < 1) throw std::invalid_argument("empty grid");
  for (int u = 0; u < static_cast<int>(users_.size()); ++u) {
    const auto& tx = users_[u];
    if (tx.slot_indices.size() != tx.pilot_subsets.size()) {
      throw std::invalid_argument("user " + std::to_string(tx.user_id) +
                                  ": slot and subset counts differ");
    }
    for (std::size_t i = 0; i < tx.slot_indices.size(); ++i) {
      const int slot = tx.slot_indices[i];
      if (slot < 0 || slot >= n_slots || (i > 0 && slot <= tx.slot_indices[i - 1])) {
        throw std::invalid_argument("user " + std::to_string(tx.user_id) +
                                    ": slots must be sorted, distinct, in range");
      }
      const auto& subset = tx.pilot_subsets[i];
      if (subset.empty()) throw std::invalid_argument("empty pilot subset");
      for (std::size_t k = 0; k < subset.size(); ++k) {
        if (subset[k] < 0 || subset[k] >= n_pilots || (k > 0 && subset[k] <= subset[k - 1])) {
          throw std::invalid_argument("user " + std::to_string(tx.user_id) +
                                      ": pilots must be sorted, distinct, in range");
        }
        cells_[static_cast<std::size_t>(slot) * n_pilots + subset[k]].push_back(u);
      }
      slot_users_[slot].push_back(u);
    }
  }
}

bool has_singleton(const FrameGrid& grid, int user_index, int slot) {
  const auto* subset = grid.users().at(user_index).subset_in_slot(slot);
  if (subset == nullptr) throw std::invalid_argument("user has no replica in this slot");
  return std::any_of(subset->begin(), subset->end(),
                     [&](int j) { return grid.occupancy(slot, j).size() == 1; });
}

namespace {

// Mutable peeling state over a grid.
class Peeler {
 public:
  Peeler(const FrameGrid& grid, PeelOptions options)
      : grid_(grid),
        options_(options),
        counts_(static_cast<std::size_t>(grid.n_slots()) * grid.n_pilots(), 0),
        present_(static_cast<std::size_t>(grid.n_slots())),
        resolved_(grid.users().size(), false) {
    for (int n = 0; n < grid.n_slots(); ++n) {
      for (int j = 0; j < grid.n_pilots(); ++j) {
        counts_[cell(n, j)] = static_cast<int>(grid.occupancy(n, j).size());
      }
      for (int u : grid.users_in_slot(n)) present_[n].insert(u);
    }
  }

  bool singleton(int u, int slot) const {
    const auto* subset = grid_.users()[u].subset_in_slot(slot);
    return std::any_of(subset->begin(), subset->end(),
                       [&](int j) { return counts_[cell(slot, j)] == 1; });
  }

  bool remove(int u, int slot) {
    if (present_[slot].erase(u) == 0) return false;
    for (int j : *grid_.users()[u].subset_in_slot(slot)) --counts_[cell(slot, j)];
    return true;
  }

  /// Peels one slot to its fixpoint; returns newly resolved users.
  std::vector<int> slot_fixpoint(int slot) {
    std::vector<int> fresh;
    bool changed = true;
    while (changed) {
      changed = false;
      std::vector<int> order(present_[slot].begin(), present_[slot].end());
      if (options_.shuffle != nullptr) {
        for (std::size_t i = order.size(); i > 1; --i) {
          std::swap(order[i - 1], order[options_.shuffle->below(i)]);
        }
      }
      for (int u : order) {
        if (!present_[slot].contains(u) || !singleton(u, slot)) continue;
        remove(u, slot);
        if (!resolved_[u]) {
          resolved_[u] = true;
          fresh.push_back(u);
        }
        changed = true;
      }
    }
    return fresh;
  }

  void mark_resolved(int u) { resolved_[u] = true; }

  std::set<UserId> resolved_ids() const {
    std::set<UserId> out;
    for (std::size_t u = 0; u < resolved_.size(); ++u) {
      if (resolved_[u]) out.insert(grid_.users()[u].user_id);
    }
    return out;
  }

 private:
  std::size_t cell(int slot, int pilot) const {
    return static_cast<std::size_t>(slot) * grid_.n_pilots() + pilot;
  }

  const FrameGrid& grid_;
  PeelOptions options_;
  std::vector<int> counts_;
  std::vector<std::set<int>> present_;
  std::vector<bool> resolved_;
};

}  // namespace

std::set<UserId> peel_frame(const FrameGrid& grid, ReceiverMode mode, PeelOptions options) {
  Peeler peeler(grid, options);

  if (mode == ReceiverMode::NoSic) {
    for (int n = 0; n < grid.n_slots(); ++n) {
      for (int u : grid.users_in_slot(n)) {
        if (has_singleton(grid, u, n)) peeler.mark_resolved(u);
      }
    }
    return peeler.resolved_ids();
  }

  std::deque<int> buffer;
  for (int n = 0; n < grid.n_slots(); ++n) {
    for (int u : peeler.slot_fixpoint(n)) {
      buffer.push_back(u);
      if (uses_ack(mode)) {
        const auto& slots = grid.users()[u].slot_indices;
        for (int later : slots) {
          if (later > n) peeler.remove(u, later);
        }
      }
    }
  }

  if (uses_outer_sic(mode)) {
    while (!buffer.empty()) {
      const int u = buffer.front();
      buffer.pop_front();
      for (int slot : grid.users()[u].slot_indices) {
        if (!peeler.remove(u, slot)) continue;
        for (int v : peeler.slot_fixpoint(slot)) buffer.push_back(v);
      }
    }
  }
  return peeler.resolved_ids();
}

int unresolvable_collision_count(std::span<const UserTransmission> users) {
  using Key = std::pair<std::vector<int>, std::vector<std::vector<int>>>;
  std::map<Key, int> multiplicity;
  for (const auto& tx : users) ++multiplicity[{tx.slot_indices, tx.pilot_subsets}];
  int count = 0;
  for (const auto& [key, m] : multiplicity) {
    if (m > 1) count += m;
  }
  return count;
}

namespace {

double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  double out = 1.0;
  for (int i = 1; i <= k; ++i) out = out * (n - k + i) / i;
  return out;
}

// Lost users among pilot masks in one slot.
int lost_in_slot(std::vector<std::uint64_t> masks, bool sic) {
  const int k = static_cast<int>(masks.size());
  std::vector<bool> done(static_cast<std::size_t>(k), false);
  int resolved = 0;
  bool changed = true;
  while (changed) {
    changed = false;
    std::uint64_t seen_once = 0;
    std::uint64_t seen_twice = 0;
    for (int u = 0; u < k; ++u) {
      if (done[u]) continue;
      seen_twice |= seen_once & masks[u];
      seen_once |= masks[u];
    }
    const std::uint64_t singles = seen_once & ~seen_twice;
    std::vector<int> fresh;
    for (int u = 0; u < k; ++u) {
      if (!done[u] && (masks[u] & singles)) fresh.push_back(u);
    }
    for (int u : fresh) {
      done[u] = true;
      ++resolved;
      changed = sic;
    }
  }
  return k - resolved;
}

}  // namespace

double enumerate_slot_loss(int n_pilots, const DegreeDistribution& psi, int k_s,
                           ReceiverMode mode) {
  if (k_s < 1) throw std::invalid_argument("k_s must be >= 1");
  if (n_pilots < 1 || n_pilots > 63) throw std::invalid_argument("enumeration needs n_pilots in [1, 63]");
  if (psi.max_degree() > n_pilots) throw std::invalid_argument("psi support exceeds pilots");

  struct Choice {
    std::uint64_t mask;
    double weight;
  };
  std::vector<Choice> choices;
  for (const auto& [order, prob] : psi.coefficients()) {
    const double each = prob / binomial(n_pilots, order);
    // All masks with `order` bits set, in increasing order.
    std::uint64_t mask = (std::uint64_t{1} << order) - 1;
    const std::uint64_t limit = std::uint64_t{1} << n_pilots;
    while (mask < limit) {
      choices.push_back({mask, each});
      const std::uint64_t low = mask & (~mask + 1);
      const std::uint64_t ripple = mask + low;
      mask = ripple | (((mask ^ ripple) >> 2) / low);
    }
  }
  const double outcomes = std::pow(static_cast<double>(choices.size()), k_s);
  if (outcomes > 1e8) throw std::length_error("enumeration exceeds 1e8 joint outcomes");

  const bool sic = uses_inner_sic(mode);
  std::vector<std::size_t> index(static_cast<std::size_t>(k_s), 0);
  std::vector<std::uint64_t> masks(static_cast<std::size_t>(k_s));
  double loss = 0.0;
  while (true) {
    double weight = 1.0;
    for (int u = 0; u < k_s; ++u) {
      masks[u] = choices[index[u]].mask;
      weight *= choices[index[u]].weight;
    }
    loss += weight * lost_in_slot(masks, sic) / k_s;
    int pos = 0;
    while (pos < k_s && ++index[pos] == choices.size()) index[pos++] = 0;
    if (pos == k_s) break;
  }
  return loss;
}

namespace {

std::vector<int> parse_int_list(const std::string& text, char sep) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) {
    if (item.empty()) throw std::invalid_argument("empty list element in '" + text + "'");
    std::size_t used = 0;
    out.push_back(std::stoi(item, &used));
    if (used != item.size()) throw std::invalid_argument("bad integer '" + item + "'");
  }
  return out;
}

}  // namespace

std::string write_grid(const FrameGrid& grid) {
  std::ostringstream os;
  os << "grid " << grid.n_slots() << ' ' << grid.n_pilots() << '\n';
  for (const auto& tx : grid.users()) {
    os << tx.user_id << ' ';
    for (std::size_t i = 0; i < tx.slot_indices.size(); ++i) {
      os << (i ? "," : "") << tx.slot_indices[i];
    }
    os << ' ';
    for (std::size_t i = 0; i < tx.pilot_subsets.size(); ++i) {
      if (i) os << ';';
      for (std::size_t k = 0; k < tx.pilot_subsets[i].size(); ++k) {
        os << (k ? "," : "") << tx.pilot_subsets[i][k];
      }
    }
    os << '\n';
  }
  return os.str();
}

FrameGrid read_grid(std::istream& in) {
  std::string line;
  int n_slots = -1;
  int n_pilots = -1;
  std::vector<UserTransmission> users;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string first;
    if (!(ls >> first)) continue;
    try {
      if (first == "grid") {
        if (!(ls >> n_slots >> n_pilots)) throw std::invalid_argument("bad grid header");
        continue;
      }
      if (n_slots < 0) throw std::invalid_argument("missing grid header");
      std::string slots_text;
      std::string subsets_text;
      if (!(ls >> slots_text >> subsets_text)) throw std::invalid_argument("expected id, slots, subsets");
      UserTransmission tx;
      tx.user_id = static_cast<UserId>(std::stoul(first));
      tx.slot_indices = parse_int_list(slots_text, ',');
      std::stringstream ss(subsets_text);
      std::string subset;
      while (std::getline(ss, subset, ';')) tx.pilot_subsets.push_back(parse_int_list(subset, ','));
      tx.repetition_degree = static_cast<int>(tx.slot_indices.size());
      users.push_back(std::move(tx));
    } catch (const std::exception& e) {
      throw std::invalid_argument("grid line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (n_slots < 0) throw std::invalid_argument("missing grid header");
  return FrameGrid(n_slots, n_pilots, std::move(users));
}

FrameGrid read_grid_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open grid file " + path);
  return read_grid(in);
}

}  // namespace pilotmix
