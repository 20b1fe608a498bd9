#include "dtc/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace dtc {

IndexSet one_based_range(std::size_t first, std::size_t step, std::size_t last) {
  if (first == 0 || step == 0) throw ArgumentError("one_based_range: first and step must be >= 1");
  IndexSet out;
  for (std::size_t v = first; v <= last; v += step) out.push_back(v - 1);
  return out;
}

Partition::Partition(std::size_t num_phases, std::vector<IndexSet> area_phases,
                     std::vector<IndexSet> adjacency)
    : num_phases_(num_phases),
      area_phases_(std::move(area_phases)),
      adjacency_(std::move(adjacency)) {
  const std::size_t n = area_phases_.size();
  if (n == 0) throw ArgumentError("partition needs at least one area");
  if (adjacency_.size() != n) {
    throw ArgumentError("adjacency has " + std::to_string(adjacency_.size()) +
                        " entries for " + std::to_string(n) + " areas");
  }
  std::vector<int> owner(num_phases_, -1);
  for (std::size_t a = 0; a < n; ++a) {
    if (area_phases_[a].empty()) throw ArgumentError("area " + std::to_string(a) + " has no phases");
    for (std::size_t i : area_phases_[a]) {
      if (i >= num_phases_) throw ArgumentError("phase " + std::to_string(i) + " out of range");
      if (owner[i] != -1) throw ArgumentError("phase " + std::to_string(i) + " assigned twice");
      owner[i] = static_cast<int>(a);
    }
  }
  for (std::size_t i = 0; i < num_phases_; ++i) {
    if (owner[i] == -1) throw ArgumentError("phase " + std::to_string(i) + " not in any area");
  }
  for (std::size_t a = 0; a < n; ++a) {
    auto& nb = adjacency_[a];
    std::sort(nb.begin(), nb.end());
    if (std::adjacent_find(nb.begin(), nb.end()) != nb.end()) {
      throw ArgumentError("duplicate neighbor of area " + std::to_string(a));
    }
    for (std::size_t m : nb) {
      if (m >= n) throw ArgumentError("neighbor " + std::to_string(m) + " out of range");
      if (m == a) throw ArgumentError("self loop at area " + std::to_string(a));
    }
  }
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t m : adjacency_[a]) {
      if (!std::binary_search(adjacency_[m].begin(), adjacency_[m].end(), a)) {
        throw ArgumentError("adjacency is not symmetric: " + std::to_string(a) + " -> " +
                            std::to_string(m));
      }
    }
  }
}

Partition Partition::contiguous(const std::vector<std::size_t>& sizes,
                                std::vector<IndexSet> adjacency) {
  std::vector<IndexSet> areas;
  std::size_t next = 0;
  for (std::size_t s : sizes) {
    IndexSet a(s);
    for (std::size_t r = 0; r < s; ++r) a[r] = next++;
    areas.push_back(std::move(a));
  }
  return Partition(next, std::move(areas), std::move(adjacency));
}

std::vector<IndexSet> Partition::chain(std::size_t n) {
  std::vector<IndexSet> adj(n);
  for (std::size_t a = 0; a + 1 < n; ++a) {
    adj[a].push_back(a + 1);
    adj[a + 1].push_back(a);
  }
  return adj;
}

std::vector<IndexSet> Partition::complete(std::size_t n) {
  std::vector<IndexSet> adj(n);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b)
      if (a != b) adj[a].push_back(b);
  return adj;
}

bool Partition::adjacent(std::size_t m, std::size_t n) const {
  if (m >= num_areas()) return false;
  return std::binary_search(adjacency_[m].begin(), adjacency_[m].end(), n);
}

std::vector<std::pair<std::size_t, std::size_t>> Partition::edges() const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t a = 0; a < num_areas(); ++a)
    for (std::size_t b : adjacency_[a])
      if (a < b) out.emplace_back(a, b);
  return out;
}

IndexSet draw_phases(const IndexSet& candidates, std::size_t count, std::uint64_t seed) {
  if (count > candidates.size()) {
    throw ArgumentError("cannot draw " + std::to_string(count) + " phases from " +
                        std::to_string(candidates.size()) + " candidates");
  }
  IndexSet pool = candidates;
  std::mt19937_64 rng(seed);
  // Partial Fisher-Yates with an explicit index draw, so the result does not
  // depend on the standard library's shuffle implementation.
  for (std::size_t r = 0; r < count; ++r) {
    const std::size_t span = pool.size() - r;
    const std::size_t pick = r + static_cast<std::size_t>(rng() % span);
    std::swap(pool[r], pool[pick]);
  }
  pool.resize(count);
  std::sort(pool.begin(), pool.end());
  return pool;
}

namespace {

void check_indices(const IndexSet& idx, std::size_t limit, const char* what, std::size_t area) {
  for (std::size_t v : idx) {
    if (v >= limit) {
      throw ArgumentError(std::string(what) + " index " + std::to_string(v) +
                          " out of range in area " + std::to_string(area));
    }
  }
}

void check_phases(const Partition& p, std::size_t area, const IndexSet& phases) {
  const IndexSet& own = p.phases(area);
  for (std::size_t i : phases) {
    if (std::find(own.begin(), own.end(), i) == own.end()) {
      throw ArgumentError("phase " + std::to_string(i) + " does not belong to area " +
                          std::to_string(area));
    }
  }
}

}  // namespace

void validate_scheme(const Partition& p, const SamplingScheme& s, const Dims3& dims) {
  if (p.num_phases() != dims.I) {
    throw ArgumentError("partition covers " + std::to_string(p.num_phases()) +
                        " phases but tensor has " + std::to_string(dims.I));
  }
  if (s.areas.size() != p.num_areas()) {
    throw ArgumentError("scheme describes " + std::to_string(s.areas.size()) +
                        " areas, partition has " + std::to_string(p.num_areas()));
  }
  for (std::size_t a = 0; a < s.areas.size(); ++a) {
    for (const auto& c : s.areas[a].components) {
      if (const auto* h = std::get_if<HorizontalSlab>(&c)) {
        check_phases(p, a, h->phases);
        check_indices(h->times, dims.K, "time", a);
      } else if (const auto* f = std::get_if<FrontalSlab>(&c)) {
        check_indices(f->times, dims.K, "time", a);
      } else {
        const auto& fb = std::get<Fiber>(c);
        check_phases(p, a, fb.phases);
        check_indices(fb.measurements, dims.J, "measurement", a);
        check_indices(fb.times, dims.K, "time", a);
      }
    }
  }
}

namespace {

void mark_area(const Partition& p, std::size_t area, const AreaSampling& s, const Dims3& dims,
               Mask3& mask) {
  for (const auto& c : s.components) {
    if (const auto* h = std::get_if<HorizontalSlab>(&c)) {
      for (std::size_t i : h->phases)
        for (std::size_t j = 0; j < dims.J; ++j)
          for (std::size_t k : h->times) mask(i, j, k) = 1;
    } else if (const auto* f = std::get_if<FrontalSlab>(&c)) {
      for (std::size_t i : p.phases(area))
        for (std::size_t j = 0; j < dims.J; ++j)
          for (std::size_t k : f->times) mask(i, j, k) = 1;
    } else {
      const auto& fb = std::get<Fiber>(c);
      for (std::size_t i : fb.phases)
        for (std::size_t j : fb.measurements)
          for (std::size_t k : fb.times) mask(i, j, k) = 1;
    }
  }
}

}  // namespace

Mask3 build_area_mask(const Partition& p, std::size_t area, const AreaSampling& s,
                      const Dims3& dims) {
  SamplingScheme single;
  single.areas.resize(p.num_areas());
  single.areas.at(area) = s;
  validate_scheme(p, single, dims);
  Mask3 mask(dims, 0);
  mark_area(p, area, s, dims, mask);
  return mask;
}

Mask3 build_mask(const Partition& p, const SamplingScheme& s, const Dims3& dims) {
  validate_scheme(p, s, dims);
  Mask3 mask(dims, 0);
  for (std::size_t a = 0; a < s.areas.size(); ++a) mark_area(p, a, s.areas[a], dims, mask);
  return mask;
}

MaskedTensor3 add_noise(const MaskedTensor3& t, double rel_std, std::uint64_t seed) {
  if (!(rel_std >= 0.0)) throw ArgumentError("rel_std must be nonnegative");
  if (rel_std == 0.0) return t;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Tensor3 noisy = t.data();
  auto x = noisy.values();
  auto w = t.mask().values();
  for (std::size_t n = 0; n < x.size(); ++n) {
    if (!w[n]) continue;
    double z = normal(rng);
    while (std::abs(z) > 6.0) z = normal(rng);
    x[n] += z * rel_std * std::abs(x[n]);
  }
  return MaskedTensor3(std::move(noisy), t.mask(), t.labels());
}

}  // namespace dtc
