#include "dtc/identifiability.hpp"

#include <algorithm>
#include <array>
#include <functional>
#include <optional>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <sstream>
#include <variant>

namespace dtc {

const char* to_string(SubtensorKind kind) {
  switch (kind) {
    case SubtensorKind::Slab: return "slab";
    case SubtensorKind::Fiber: return "fiber";
    case SubtensorKind::FrontalOnly: return "frontal";
  }
  return "?";
}

namespace {

double floor_log2(std::size_t n) {
  if (n == 0) return -std::numeric_limits<double>::infinity();
  return std::floor(std::log2(static_cast<double>(n)));
}

IndexSet sorted_unique(IndexSet v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

void append(IndexSet& dst, const IndexSet& src) { dst.insert(dst.end(), src.begin(), src.end()); }

std::string join_one_based(const IndexSet& idx, std::size_t limit = 12) {
  std::ostringstream os;
  os << "[";
  for (std::size_t n = 0; n < idx.size() && n < limit; ++n) os << (n ? ", " : "") << idx[n] + 1;
  if (idx.size() > limit) os << ", ... (" << idx.size() << " total)";
  os << "]";
  return os.str();
}

}  // namespace

UniquenessReport local_uniqueness_check(const AreaSamplingStats& s, std::size_t rank) {
  if (rank == 0) throw ArgumentError("rank must be positive");
  UniquenessReport r;
  r.kind = s.kind;
  r.required = std::log2(4.0 * static_cast<double>(rank));

  std::array<std::size_t, 3> dims{};
  bool degenerate = false;
  switch (s.kind) {
    case SubtensorKind::Slab: {
      const double p = floor_log2(s.sampled_phases);
      const double j = floor_log2(s.measurements);
      const double k = floor_log2(s.sampled_times);
      r.terms = {{"floor(log2|Sp|)+floor(log2 J)", p + j},
                 {"floor(log2|Sp|)+floor(log2 Kn)", p + k},
                 {"floor(log2 J)+floor(log2 Kn)", j + k},
                 {"log2(4 J |St|)", std::log2(4.0 * static_cast<double>(s.measurements) *
                                              static_cast<double>(s.frontal_times))}};
      dims = {s.sampled_phases, s.measurements, s.sampled_times};
      degenerate = s.sampled_phases < 2 || s.frontal_times < 2;
      break;
    }
    case SubtensorKind::Fiber: {
      const double p = floor_log2(s.sampled_phases);
      const double m = floor_log2(s.measurements);
      r.terms = {{"floor(log2|Sp|)+floor(log2|Sm|)", p + m},
                 {"floor(log2|Sp|)+floor(log2 K)", p + floor_log2(s.total_times)},
                 {"floor(log2|Sm|)+floor(log2 Kn)", m + floor_log2(s.sampled_times)}};
      dims = {s.sampled_phases, s.measurements, s.sampled_times};
      degenerate = s.sampled_phases < 2 || s.measurements < 2;
      break;
    }
    case SubtensorKind::FrontalOnly:
      dims = {s.sampled_phases, s.measurements, s.frontal_times};
      degenerate = s.sampled_phases < 2 || s.frontal_times < 2;
      break;
  }

  std::sort(dims.begin(), dims.end(), std::greater<>());
  if (dims[2] == 0) {
    r.generic_bound = r.generic_bound_conservative = 0.0;
  } else {
    const double e = floor_log2(dims[1]) + floor_log2(dims[2]) - 2.0;
    r.generic_bound = std::exp2(e);
    r.generic_bound_conservative = std::exp2(e - 1.0);
  }
  r.generic_bound_holds = static_cast<double>(rank) <= r.generic_bound;

  std::ostringstream os;
  os << to_string(s.kind) << " sub-tensor " << s.sampled_phases << "x" << s.measurements << "x"
     << (s.kind == SubtensorKind::FrontalOnly ? s.frontal_times : s.sampled_times) << ": ";
  if (degenerate) {
    r.unique = false;
    r.min_term = -std::numeric_limits<double>::infinity();
    os << "degenerate (fewer than two samples along a sampled axis)";
  } else if (s.kind == SubtensorKind::FrontalOnly) {
    r.unique = r.generic_bound_holds;
    r.min_term = r.generic_bound;
    os << "F=" << rank << (r.unique ? " <= " : " > ") << "generic bound " << r.generic_bound;
  } else {
    r.min_term = std::numeric_limits<double>::infinity();
    for (const auto& t : r.terms) r.min_term = std::min(r.min_term, t.value);
    r.unique = r.min_term >= r.required;
    os << "min term " << r.min_term << (r.unique ? " >= " : " < ") << "log2(4F) = " << r.required;
  }
  os << " (generic bound " << r.generic_bound << ", conservative " << r.generic_bound_conservative
     << ")";
  r.summary = os.str();
  return r;
}

namespace {

struct AreaComponents {
  IndexSet h_phases, h_times;
  IndexSet frontal_times;
  IndexSet f_phases, f_measurements, f_times;
  bool fiber_covers_area = false;
};

AreaComponents collect(const Partition& p, std::size_t area, const AreaSampling& s) {
  AreaComponents c;
  IndexSet own = sorted_unique(p.phases(area));
  for (const auto& comp : s.components) {
    if (const auto* h = std::get_if<HorizontalSlab>(&comp)) {
      if (h->phases.empty() || h->times.empty()) continue;
      append(c.h_phases, h->phases);
      append(c.h_times, h->times);
    } else if (const auto* f = std::get_if<FrontalSlab>(&comp)) {
      append(c.frontal_times, f->times);
    } else {
      const auto& fb = std::get<Fiber>(comp);
      if (fb.phases.empty() || fb.measurements.empty() || fb.times.empty()) continue;
      append(c.f_phases, fb.phases);
      append(c.f_measurements, fb.measurements);
      append(c.f_times, fb.times);
      if (sorted_unique(fb.phases) == own) c.fiber_covers_area = true;
    }
  }
  c.h_phases = sorted_unique(std::move(c.h_phases));
  c.h_times = sorted_unique(std::move(c.h_times));
  c.frontal_times = sorted_unique(std::move(c.frontal_times));
  c.f_phases = sorted_unique(std::move(c.f_phases));
  c.f_measurements = sorted_unique(std::move(c.f_measurements));
  c.f_times = sorted_unique(std::move(c.f_times));
  return c;
}

}  // namespace

std::vector<AreaSamplingStats> area_sampling_stats(const Partition& p, std::size_t area,
                                                   const AreaSampling& s, const Dims3& dims) {
  const AreaComponents c = collect(p, area, s);
  std::vector<AreaSamplingStats> out;
  if (!c.h_phases.empty()) {
    out.push_back({SubtensorKind::Slab, c.h_phases.size(), dims.J, c.h_times.size(),
                   c.frontal_times.size(), dims.K});
  } else if (!c.frontal_times.empty()) {
    out.push_back({SubtensorKind::FrontalOnly, p.phases(area).size(), dims.J, 0,
                   c.frontal_times.size(), dims.K});
  }
  if (!c.f_phases.empty()) {
    out.push_back({SubtensorKind::Fiber, c.f_phases.size(), c.f_measurements.size(),
                   c.f_times.size(), 0, dims.K});
  }
  return out;
}

std::vector<IdentifiableSets> derive_identifiable_sets(const Partition& p,
                                                       const SamplingScheme& s,
                                                       const Dims3& dims) {
  validate_scheme(p, s, dims);
  IndexSet all_measurements(dims.J);
  std::iota(all_measurements.begin(), all_measurements.end(), std::size_t{0});

  std::vector<IdentifiableSets> out(p.num_areas());
  for (std::size_t a = 0; a < p.num_areas(); ++a) {
    const AreaComponents c = collect(p, a, s.areas[a]);
    IdentifiableSets& ids = out[a];
    const bool frontal = !c.frontal_times.empty();
    if (frontal || c.fiber_covers_area) {
      ids.phases = sorted_unique(p.phases(a));
    } else {
      ids.phases = c.h_phases;
      append(ids.phases, c.f_phases);
      ids.phases = sorted_unique(std::move(ids.phases));
    }
    if (frontal || !c.h_phases.empty()) {
      ids.measurements = all_measurements;
    } else {
      ids.measurements = c.f_measurements;
    }
    ids.times = c.h_times;
    append(ids.times, c.frontal_times);
    append(ids.times, c.f_times);
    ids.times = sorted_unique(std::move(ids.times));
  }
  return out;
}

IndexSet intersection(const IndexSet& a, const IndexSet& b) {
  IndexSet sa = sorted_unique(a), sb = sorted_unique(b), out;
  std::set_intersection(sa.begin(), sa.end(), sb.begin(), sb.end(), std::back_inserter(out));
  return out;
}

std::size_t intersection_size(const IndexSet& a, const IndexSet& b) {
  return intersection(a, b).size();
}

bool mutual_identifiability(const IdentifiableSets& a, const IdentifiableSets& b) {
  const std::size_t m = intersection_size(a.measurements, b.measurements);
  const std::size_t t = intersection_size(a.times, b.times);
  return (m >= 2 && t >= 1) || (t >= 2 && m >= 1);
}

std::vector<IndexSet> IdentifiabilityGraph::components() const {
  std::vector<std::size_t> parent(num_vertices);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t v) {
    while (parent[v] != v) v = parent[v] = parent[parent[v]];
    return v;
  };
  for (const auto& [m, n] : edges) {
    const std::size_t rm = find(m), rn = find(n);
    if (rm != rn) parent[std::max(rm, rn)] = std::min(rm, rn);
  }
  std::vector<IndexSet> groups(num_vertices);
  for (std::size_t v = 0; v < num_vertices; ++v) groups[find(v)].push_back(v);
  std::vector<IndexSet> out;
  for (auto& g : groups)
    if (!g.empty()) out.push_back(std::move(g));
  return out;
}

bool IdentifiabilityGraph::connected() const { return components().size() <= 1; }

IdentifiabilityGraph build_identifiability_graph(const std::vector<IdentifiableSets>& sets) {
  IdentifiabilityGraph g;
  g.num_vertices = sets.size();
  for (std::size_t m = 0; m < sets.size(); ++m)
    for (std::size_t n = m + 1; n < sets.size(); ++n)
      if (mutual_identifiability(sets[m], sets[n])) g.edges.emplace_back(m, n);
  return g;
}

IdentifiabilityVerdict check_identifiability(const Partition& p, const SamplingScheme& s,
                                             std::size_t rank, const Dims3& dims) {
  if (rank == 0) throw ArgumentError("rank must be positive");
  IdentifiabilityVerdict v;
  v.sets = derive_identifiable_sets(p, s, dims);
  const std::size_t n_areas = p.num_areas();

  v.local_uniqueness = true;
  for (std::size_t a = 0; a < n_areas; ++a) {
    const auto stats = area_sampling_stats(p, a, s.areas[a], dims);
    std::optional<UniquenessReport> best;
    for (const auto& st : stats) {
      UniquenessReport r = local_uniqueness_check(st, rank);
      if (!best || (r.unique && !best->unique) ||
          (r.unique == best->unique && r.min_term - r.required > best->min_term - best->required)) {
        best = std::move(r);
      }
    }
    const bool ok = best && best->unique;
    v.area_unique.push_back(ok);
    if (best) {
      v.area_reports.push_back(*best);
    } else {
      UniquenessReport empty;
      empty.summary = "no samples";
      v.area_reports.push_back(std::move(empty));
    }
    if (!ok) {
      v.local_uniqueness = false;
      v.diagnostics.push_back("area " + std::to_string(a + 1) +
                              ": sampled sub-tensor is not certified unique (" +
                              v.area_reports.back().summary + ")");
    }
  }

  v.phase_coverage = true;
  for (std::size_t a = 0; a < n_areas; ++a) {
    const IndexSet own = sorted_unique(p.phases(a));
    if (v.sets[a].phases != own) {
      v.phase_coverage = false;
      IndexSet missing;
      std::set_difference(own.begin(), own.end(), v.sets[a].phases.begin(),
                          v.sets[a].phases.end(), std::back_inserter(missing));
      v.diagnostics.push_back("area " + std::to_string(a + 1) + ": P_n misses " +
                              std::to_string(missing.size()) + " of " +
                              std::to_string(own.size()) + " phases " +
                              join_one_based(missing));
    }
  }

  auto coverage = [&](std::size_t size, auto member, const char* label, bool& flag) {
    IndexSet seen;
    for (const auto& ids : v.sets) append(seen, ids.*member);
    seen = sorted_unique(std::move(seen));
    IndexSet missing;
    for (std::size_t x = 0, c = 0; x < size; ++x) {
      while (c < seen.size() && seen[c] < x) ++c;
      if (c == seen.size() || seen[c] != x) missing.push_back(x);
    }
    flag = missing.empty();
    if (!flag) {
      v.diagnostics.push_back(std::string("union of ") + label + " misses " +
                              std::to_string(missing.size()) + " indices " +
                              join_one_based(missing));
    }
  };
  coverage(dims.J, &IdentifiableSets::measurements, "M_n (measurements)", v.measurement_coverage);
  coverage(dims.K, &IdentifiableSets::times, "T_n (times)", v.time_coverage);

  v.graph = build_identifiability_graph(v.sets);
  v.graph_connected = v.graph.connected();
  if (!v.graph_connected) {
    std::ostringstream os;
    os << "identifiability graph disconnected: components";
    for (const auto& comp : v.graph.components()) os << " " << join_one_based(comp);
    v.diagnostics.push_back(os.str());
  }

  v.verdict = v.local_uniqueness && v.phase_coverage && v.measurement_coverage &&
              v.time_coverage && v.graph_connected;
  return v;
}

std::string IdentifiabilityVerdict::render() const {
  std::ostringstream os;
  auto yn = [](bool b) { return b ? "pass" : "FAIL"; };
  os << "identifiability: " << (verdict ? "RECOVERABLE" : "NOT CERTIFIED") << "\n";
  os << "  local uniqueness      " << yn(local_uniqueness) << "\n";
  for (std::size_t a = 0; a < area_reports.size(); ++a) {
    os << "    area " << a + 1 << ": " << yn(area_unique[a]) << "  " << area_reports[a].summary
       << "\n";
  }
  os << "  phase coverage        " << yn(phase_coverage) << "\n";
  os << "  measurement coverage  " << yn(measurement_coverage) << "\n";
  os << "  time coverage         " << yn(time_coverage) << "\n";
  os << "  graph connected       " << yn(graph_connected) << "  edges:";
  for (const auto& [m, n] : graph.edges) os << " (" << m + 1 << "," << n + 1 << ")";
  os << "\n";
  for (const auto& d : diagnostics) os << "  - " << d << "\n";
  return os.str();
}

namespace {

struct RatioColumn {
  Eigen::Index anchor = -1;
  std::vector<Eigen::Index> rows;
  std::vector<double> ratios;
};

RatioColumn ratio_column(const Matrix& M, const IndexSet& rows, Eigen::Index f) {
  RatioColumn rc;
  double best = 0.0;
  for (std::size_t r : rows) {
    const double v = std::abs(M(static_cast<Eigen::Index>(r), f));
    if (v > best) {
      best = v;
      rc.anchor = static_cast<Eigen::Index>(r);
    }
  }
  if (rc.anchor < 0) return rc;
  for (std::size_t r : rows) {
    const auto ri = static_cast<Eigen::Index>(r);
    if (ri == rc.anchor || M(ri, f) == 0.0) continue;
    rc.rows.push_back(ri);
    rc.ratios.push_back(M(ri, f) / M(rc.anchor, f));
  }
  return rc;
}

double ratio_distance(const RatioColumn& ref, const Matrix& other, Eigen::Index g) {
  const double denom = other(ref.anchor, g);
  if (denom == 0.0 || !std::isfinite(denom)) return std::numeric_limits<double>::infinity();
  double worst = 0.0;
  for (std::size_t n = 0; n < ref.rows.size(); ++n) {
    const double u = other(ref.rows[n], g) / denom;
    const double v = ref.ratios[n];
    const double scale = std::max({std::abs(u), std::abs(v), 1e-300});
    worst = std::max(worst, std::abs(u - v) / scale);
  }
  return worst;
}

double anchored_scale(const Matrix& ref, const Matrix& other, const IndexSet& rows,
                      Eigen::Index f, Eigen::Index g, const char* factor) {
  Eigen::Index best_row = -1;
  double best = 0.0;
  for (std::size_t r : rows) {
    const auto ri = static_cast<Eigen::Index>(r);
    const double v = std::abs(ref(ri, f));
    if (v > best && other(ri, g) != 0.0) {
      best = v;
      best_row = ri;
    }
  }
  if (best_row < 0) {
    throw AlignmentError(std::string("no usable shared ") + factor + " row for column " +
                         std::to_string(f));
  }
  return ref(best_row, f) / other(best_row, g);
}

}  // namespace

FactorAlignment align_factors(const FactorFragment& reference, const FactorFragment& other,
                              const IndexSet& common_measurements, const IndexSet& common_times,
                              const AlignmentOptions& options) {
  const IndexSet cm = sorted_unique(common_measurements);
  const IndexSet ct = sorted_unique(common_times);
  const bool use_b = cm.size() >= 2 && ct.size() >= 1;
  const bool use_c = ct.size() >= 2 && cm.size() >= 1;
  if (!use_b && !use_c) {
    throw PreconditionError("alignment needs >= 2 shared rows in one of B/C and >= 1 in the "
                            "other; got " + std::to_string(cm.size()) + " measurement and " +
                            std::to_string(ct.size()) + " time rows");
  }
  const Eigen::Index F = reference.B.cols();
  if (other.B.cols() != F || reference.C.cols() != F || other.C.cols() != F ||
      reference.B.rows() != other.B.rows() || reference.C.rows() != other.C.rows()) {
    throw DimensionError("align_factors: fragment shapes differ");
  }
  for (std::size_t r : cm)
    if (r >= static_cast<std::size_t>(reference.B.rows())) throw ArgumentError("measurement row out of range");
  for (std::size_t r : ct)
    if (r >= static_cast<std::size_t>(reference.C.rows())) throw ArgumentError("time row out of range");

  const Matrix& ref_key = use_b ? reference.B : reference.C;
  const Matrix& oth_key = use_b ? other.B : other.C;
  const IndexSet& key_rows = use_b ? cm : ct;

  Matrix dist(F, F);
  for (Eigen::Index f = 0; f < F; ++f) {
    const RatioColumn rc = ratio_column(ref_key, key_rows, f);
    if (rc.anchor < 0 || rc.rows.empty()) {
      throw AlignmentError("column " + std::to_string(f) +
                           " has fewer than two nonzero shared rows to form ratios");
    }
    for (Eigen::Index g = 0; g < F; ++g) dist(f, g) = ratio_distance(rc, oth_key, g);
  }

  FactorAlignment out;
  out.permutation.assign(static_cast<std::size_t>(F), 0);
  std::vector<bool> ref_done(F, false), oth_done(F, false);
  for (Eigen::Index step = 0; step < F; ++step) {
    double best = std::numeric_limits<double>::infinity();
    Eigen::Index bf = -1, bg = -1;
    for (Eigen::Index f = 0; f < F; ++f) {
      if (ref_done[f]) continue;
      for (Eigen::Index g = 0; g < F; ++g) {
        if (!oth_done[g] && dist(f, g) < best) {
          best = dist(f, g);
          bf = f;
          bg = g;
        }
      }
    }
    if (bf < 0 || !(best <= options.rel_tol)) {
      throw AlignmentError("ratio matrix matches no permutation within tolerance (best residual " +
                           std::to_string(best) + ")");
    }
    int candidates = 0;
    for (Eigen::Index g = 0; g < F; ++g)
      if (!oth_done[g] && dist(bf, g) <= options.rel_tol) ++candidates;
    if (candidates > 1) {
      throw AlignmentError("ambiguous match for column " + std::to_string(bf));
    }
    ref_done[bf] = oth_done[bg] = true;
    out.permutation[static_cast<std::size_t>(bf)] = static_cast<std::size_t>(bg);
  }

  out.scale_A.resize(F);
  out.scale_B.resize(F);
  out.scale_C.resize(F);
  for (Eigen::Index f = 0; f < F; ++f) {
    const auto g = static_cast<Eigen::Index>(out.permutation[static_cast<std::size_t>(f)]);
    out.scale_B(f) = anchored_scale(reference.B, other.B, cm, f, g, "B");
    out.scale_C(f) = anchored_scale(reference.C, other.C, ct, f, g, "C");
    out.scale_A(f) = 1.0 / (out.scale_B(f) * out.scale_C(f));
  }
  return out;
}

FactorFragment apply_alignment(const FactorFragment& f, const FactorAlignment& al) {
  const auto F = static_cast<Eigen::Index>(al.permutation.size());
  FactorFragment out{Matrix(f.A.rows(), F), Matrix(f.B.rows(), F), Matrix(f.C.rows(), F)};
  for (Eigen::Index c = 0; c < F; ++c) {
    const auto src = static_cast<Eigen::Index>(al.permutation[static_cast<std::size_t>(c)]);
    out.A.col(c) = f.A.col(src) * al.scale_A(c);
    out.B.col(c) = f.B.col(src) * al.scale_B(c);
    out.C.col(c) = f.C.col(src) * al.scale_C(c);
  }
  return out;
}

FactorTriple merge_fragments(const Partition& p, const std::vector<FactorFragment>& fragments,
                             const std::vector<IdentifiableSets>& sets,
                             const AlignmentOptions& options) {
  const std::size_t n = p.num_areas();
  if (fragments.size() != n || sets.size() != n) {
    throw DimensionError("merge_fragments: need one fragment and one set per area");
  }
  const IdentifiabilityGraph g = build_identifiability_graph(sets);
  if (!g.connected()) throw PreconditionError("identifiability graph is not connected");

  std::vector<IndexSet> adj(n);
  for (const auto& [a, b] : g.edges) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  std::vector<std::optional<FactorFragment>> aligned(n);
  aligned[0] = fragments[0];
  std::queue<std::size_t> frontier;
  frontier.push(0);
  while (!frontier.empty()) {
    const std::size_t m = frontier.front();
    frontier.pop();
    for (std::size_t k : adj[m]) {
      if (aligned[k]) continue;
      const FactorAlignment al =
          align_factors(*aligned[m], fragments[k], intersection(sets[m].measurements, sets[k].measurements),
                        intersection(sets[m].times, sets[k].times), options);
      aligned[k] = apply_alignment(fragments[k], al);
      frontier.push(k);
    }
  }

  const Eigen::Index F = fragments[0].B.cols();
  const Eigen::Index J = fragments[0].B.rows();
  const Eigen::Index K = fragments[0].C.rows();
  Matrix A = Matrix::Zero(static_cast<Eigen::Index>(p.num_phases()), F);
  Matrix B = Matrix::Zero(J, F);
  Matrix C = Matrix::Zero(K, F);
  std::vector<bool> have_b(J, false), have_c(K, false);
  for (std::size_t a = 0; a < n; ++a) {
    const FactorFragment& fr = *aligned[a];
    const IndexSet& phases = p.phases(a);
    if (static_cast<std::size_t>(fr.A.rows()) != phases.size()) {
      throw DimensionError("fragment " + std::to_string(a) + " has wrong number of A rows");
    }
    for (std::size_t r = 0; r < phases.size(); ++r)
      A.row(static_cast<Eigen::Index>(phases[r])) = fr.A.row(static_cast<Eigen::Index>(r));
    for (std::size_t j : sets[a].measurements) {
      if (!have_b[j]) {
        B.row(static_cast<Eigen::Index>(j)) = fr.B.row(static_cast<Eigen::Index>(j));
        have_b[j] = true;
      }
    }
    for (std::size_t k : sets[a].times) {
      if (!have_c[k]) {
        C.row(static_cast<Eigen::Index>(k)) = fr.C.row(static_cast<Eigen::Index>(k));
        have_c[k] = true;
      }
    }
  }
  return FactorTriple(std::move(A), std::move(B), std::move(C));
}

}  // namespace dtc
