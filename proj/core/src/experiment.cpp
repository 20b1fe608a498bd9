#include "dtc/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace dtc {

using json = nlohmann::json;

// ---------------------------------------------------------------- IndexSpec

IndexSet IndexSpec::resolve(std::size_t axis_length) const {
  IndexSet out;
  switch (kind) {
    case Kind::All:
      out.resize(axis_length);
      for (std::size_t i = 0; i < axis_length; ++i) out[i] = i;
      return out;
    case Kind::List:
      for (std::size_t v : list) {
        if (v >= axis_length) {
          throw ArgumentError("index " + std::to_string(v + 1) + " exceeds axis length " +
                              std::to_string(axis_length));
        }
      }
      out = list;
      std::sort(out.begin(), out.end());
      out.erase(std::unique(out.begin(), out.end()), out.end());
      return out;
    case Kind::Range: {
      const std::size_t end = last == 0 ? axis_length : last;
      if (end > axis_length) {
        throw ArgumentError("range end " + std::to_string(end) + " exceeds axis length " +
                            std::to_string(axis_length));
      }
      return one_based_range(first, step, end);
    }
  }
  return out;
}

namespace {

std::size_t parse_positive(const std::string& s, const std::string& whole) {
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || v == 0) {
    throw ArgumentError("bad index '" + s + "' in '" + whole + "'");
  }
  return v;
}

}  // namespace

IndexSpec IndexSpec::parse(const std::string& text) {
  IndexSpec spec;
  if (text == "all") return spec;
  std::vector<std::string> parts;
  std::stringstream ss(text);
  for (std::string part; std::getline(ss, part, ':');) parts.push_back(part);
  if (parts.size() == 1) return of({parse_positive(parts[0], text) - 1});
  if (parts.size() != 2 && parts.size() != 3) {
    throw ArgumentError("index range must be first:last or first:step:last, got '" + text + "'");
  }
  spec.kind = Kind::Range;
  spec.first = parse_positive(parts.front(), text);
  spec.step = parts.size() == 3 ? parse_positive(parts[1], text) : 1;
  spec.last = parts.back() == "end" ? 0 : parse_positive(parts.back(), text);
  return spec;
}

IndexSpec IndexSpec::of(IndexSet zero_based) {
  IndexSpec spec;
  spec.kind = Kind::List;
  spec.list = std::move(zero_based);
  return spec;
}

std::string IndexSpec::to_string() const {
  switch (kind) {
    case Kind::All:
      return "all";
    case Kind::Range:
      return std::to_string(first) + ":" + std::to_string(step) + ":" +
             (last == 0 ? std::string("end") : std::to_string(last));
    case Kind::List: {
      std::string s;
      for (std::size_t v : list) s += (s.empty() ? "" : ",") + std::to_string(v + 1);
      return "[" + s + "]";
    }
  }
  return {};
}

// ------------------------------------------------------------- partitions

Partition PartitionSpec::build(std::size_t num_phases) const {
  std::vector<IndexSet> phases = areas;
  if (phases.empty()) {
    if (sizes.empty()) throw ArgumentError("partition needs 'sizes' or 'areas'");
    std::size_t total = 0;
    for (std::size_t s : sizes) total += s;
    if (total != num_phases) {
      throw ArgumentError("partition sizes sum to " + std::to_string(total) + " but the tensor has " +
                          std::to_string(num_phases) + " phases");
    }
    std::size_t next = 0;
    for (std::size_t s : sizes) {
      IndexSet a(s);
      for (auto& v : a) v = next++;
      phases.push_back(std::move(a));
    }
  }
  std::vector<IndexSet> adj;
  switch (topology) {
    case Topology::Chain: adj = Partition::chain(phases.size()); break;
    case Topology::Complete: adj = Partition::complete(phases.size()); break;
    case Topology::Explicit: adj = adjacency; break;
  }
  return Partition(num_phases, std::move(phases), std::move(adj));
}

SamplingScheme resolve_sampling(const SamplingSpec& spec, const Partition& p, const Dims3& dims) {
  if (spec.size() != p.num_areas()) {
    throw ArgumentError("sampling lists " + std::to_string(spec.size()) + " areas but the partition has " +
                        std::to_string(p.num_areas()));
  }
  SamplingScheme s;
  s.areas.resize(spec.size());
  for (std::size_t a = 0; a < spec.size(); ++a) {
    for (const ComponentSpec& c : spec[a]) {
      IndexSet phases = c.phases.kind == IndexSpec::Kind::All ? p.phases(a) : c.phases.resolve(dims.I);
      if (c.draw > 0) phases = draw_phases(phases, c.draw, c.draw_seed);
      const IndexSet times = c.times.resolve(dims.K);
      switch (c.type) {
        case ComponentSpec::Type::Horizontal:
          s.areas[a].components.push_back(HorizontalSlab{std::move(phases), times});
          break;
        case ComponentSpec::Type::Frontal:
          s.areas[a].components.push_back(FrontalSlab{times});
          break;
        case ComponentSpec::Type::Fiber:
          s.areas[a].components.push_back(
              Fiber{std::move(phases), c.measurements.resolve(dims.J), times});
          break;
      }
    }
  }
  validate_scheme(p, s, dims);
  return s;
}

// ------------------------------------------------------------ JSON config

namespace {

void only_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ArgumentError(where + " must be an object");
  for (const auto& [key, _] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      throw ArgumentError("unknown key '" + key + "' in " + where);
    }
  }
}

IndexSpec index_from(const json& j, const std::string& where) {
  if (j.is_string()) return IndexSpec::parse(j.get<std::string>());
  if (j.is_number_unsigned() || j.is_number_integer()) {
    const auto v = j.get<long long>();
    if (v < 1) throw ArgumentError(where + ": indices are 1-based");
    return IndexSpec::of({static_cast<std::size_t>(v - 1)});
  }
  if (j.is_array()) {
    IndexSet list;
    for (const auto& v : j) {
      if (!v.is_number_integer() || v.get<long long>() < 1) {
        throw ArgumentError(where + ": indices must be positive integers");
      }
      list.push_back(static_cast<std::size_t>(v.get<long long>() - 1));
    }
    return IndexSpec::of(std::move(list));
  }
  throw ArgumentError(where + ": expected an index list, number, range string or \"all\"");
}

json index_to(const IndexSpec& s) {
  if (s.kind != IndexSpec::Kind::List) return s.to_string();
  json out = json::array();
  for (std::size_t v : s.list) out.push_back(v + 1);
  return out;
}

SamplingSpec sampling_from(const json& j, const std::string& where) {
  if (!j.is_array()) throw ArgumentError(where + " must be a list with one entry per area");
  SamplingSpec spec;
  for (std::size_t a = 0; a < j.size(); ++a) {
    const std::string at = where + "[" + std::to_string(a + 1) + "]";
    if (!j[a].is_array()) throw ArgumentError(at + " must be a list of components");
    std::vector<ComponentSpec> comps;
    for (const auto& c : j[a]) {
      only_keys(c, {"type", "phases", "draw", "draw_seed", "measurements", "times"}, at);
      ComponentSpec cs;
      const std::string type = c.at("type").get<std::string>();
      if (type == "horizontal") cs.type = ComponentSpec::Type::Horizontal;
      else if (type == "frontal") cs.type = ComponentSpec::Type::Frontal;
      else if (type == "fiber") cs.type = ComponentSpec::Type::Fiber;
      else throw ArgumentError(at + ": unknown component type '" + type + "'");
      if (cs.type == ComponentSpec::Type::Frontal &&
          (c.contains("phases") || c.contains("measurements") || c.contains("draw"))) {
        throw ArgumentError(at + ": frontal slabs take only 'times'");
      }
      if (cs.type == ComponentSpec::Type::Horizontal && c.contains("measurements")) {
        throw ArgumentError(at + ": horizontal slabs cover all measurements");
      }
      if (c.contains("phases")) cs.phases = index_from(c["phases"], at + ".phases");
      if (c.contains("measurements")) cs.measurements = index_from(c["measurements"], at + ".measurements");
      if (c.contains("times")) cs.times = index_from(c["times"], at + ".times");
      cs.draw = c.value("draw", std::size_t{0});
      cs.draw_seed = c.value("draw_seed", std::uint64_t{0});
      comps.push_back(std::move(cs));
    }
    spec.push_back(std::move(comps));
  }
  return spec;
}

json sampling_to(const SamplingSpec& spec) {
  json out = json::array();
  for (const auto& area : spec) {
    json comps = json::array();
    for (const auto& c : area) {
      json cj;
      switch (c.type) {
        case ComponentSpec::Type::Horizontal:
          cj = {{"type", "horizontal"}, {"phases", index_to(c.phases)}, {"times", index_to(c.times)}};
          break;
        case ComponentSpec::Type::Frontal:
          cj = {{"type", "frontal"}, {"times", index_to(c.times)}};
          break;
        case ComponentSpec::Type::Fiber:
          cj = {{"type", "fiber"},
                {"phases", index_to(c.phases)},
                {"measurements", index_to(c.measurements)},
                {"times", index_to(c.times)}};
          break;
      }
      if (c.draw > 0) {
        cj["draw"] = c.draw;
        cj["draw_seed"] = c.draw_seed;
      }
      comps.push_back(std::move(cj));
    }
    out.push_back(std::move(comps));
  }
  return out;
}

std::vector<IndexSet> lists_from(const json& j, const std::string& where) {
  if (!j.is_array()) throw ArgumentError(where + " must be a list of lists");
  std::vector<IndexSet> out;
  for (const auto& l : j) {
    IndexSpec s = index_from(l, where);
    if (s.kind != IndexSpec::Kind::List) throw ArgumentError(where + " entries must be explicit lists");
    out.push_back(s.list);
  }
  return out;
}

json lists_to(const std::vector<IndexSet>& lists) {
  json out = json::array();
  for (const auto& l : lists) out.push_back(index_to(IndexSpec::of(l)));
  return out;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("config is not valid JSON: ") + e.what(), 0);
  }
  ExperimentConfig cfg;
  try {
    only_keys(root,
              {"schema", "dataset", "partition", "sampling", "cases", "noise", "normalize", "strict",
               "score", "solver", "output"},
              "config");
    if (root.contains("schema") && root["schema"] != "dtc.experiment/1") {
      throw ArgumentError("unsupported config schema " + root["schema"].dump());
    }

    const json& ds = root.at("dataset");
    only_keys(ds, {"kind", "path", "dims", "phases", "times", "rank", "seed", "factor_scale"}, "dataset");
    const std::string kind = ds.at("kind").get<std::string>();
    if (kind == "file") {
      cfg.dataset.kind = DatasetSpec::Kind::File;
      cfg.dataset.path = ds.at("path").get<std::string>();
    } else if (kind == "lowrank") {
      cfg.dataset.kind = DatasetSpec::Kind::LowRank;
      const auto dims = ds.at("dims").get<std::vector<std::size_t>>();
      if (dims.size() != 3) throw ArgumentError("dataset.dims must have three entries");
      cfg.dataset.dims = {dims[0], dims[1], dims[2]};
    } else if (kind == "power") {
      cfg.dataset.kind = DatasetSpec::Kind::PowerLike;
      cfg.dataset.dims = {ds.at("phases").get<std::size_t>(), kMeasurementTypes.size(),
                          ds.at("times").get<std::size_t>()};
    } else {
      throw ArgumentError("unknown dataset kind '" + kind + "'");
    }
    cfg.dataset.rank = ds.value("rank", cfg.dataset.rank);
    cfg.dataset.seed = ds.value("seed", cfg.dataset.seed);
    cfg.dataset.factor_scale = ds.value("factor_scale", cfg.dataset.factor_scale);

    const json& pj = root.at("partition");
    only_keys(pj, {"sizes", "areas", "topology", "adjacency"}, "partition");
    if (pj.contains("sizes")) cfg.partition.sizes = pj["sizes"].get<std::vector<std::size_t>>();
    if (pj.contains("areas")) cfg.partition.areas = lists_from(pj["areas"], "partition.areas");
    if (pj.contains("adjacency")) {
      cfg.partition.topology = PartitionSpec::Topology::Explicit;
      cfg.partition.adjacency = lists_from(pj["adjacency"], "partition.adjacency");
    } else {
      const std::string topo = pj.value("topology", std::string("chain"));
      if (topo == "chain") cfg.partition.topology = PartitionSpec::Topology::Chain;
      else if (topo == "complete") cfg.partition.topology = PartitionSpec::Topology::Complete;
      else throw ArgumentError("unknown topology '" + topo + "'");
    }

    cfg.sampling = sampling_from(root.at("sampling"), "sampling");
    if (root.contains("cases")) {
      for (const auto& c : root["cases"]) {
        only_keys(c, {"name", "sampling"}, "cases");
        cfg.cases.push_back({c.at("name").get<std::string>(), sampling_from(c.at("sampling"), "cases.sampling")});
      }
    }
    if (root.contains("noise")) {
      only_keys(root["noise"], {"rel_std", "seed"}, "noise");
      cfg.noise_rel_std = root["noise"].value("rel_std", 0.0);
      cfg.noise_seed = root["noise"].value("seed", std::uint64_t{0});
    }
    cfg.normalize = root.value("normalize", cfg.normalize);
    cfg.strict = root.value("strict", cfg.strict);
    const std::string score = root.value("score", std::string("unobserved"));
    if (score == "unobserved") cfg.score = ScoreSet::Unobserved;
    else if (score == "all") cfg.score = ScoreSet::All;
    else throw ArgumentError("score must be 'unobserved' or 'all'");

    if (root.contains("solver")) {
      const json& sj = root["solver"];
      only_keys(sj,
                {"rank", "penalty_mu", "penalty_lambda", "max_iters", "kkt_tol", "ridge_eps",
                 "init_iters", "init_restarts", "init_svd", "seed", "align_init", "threads"},
                "solver");
      AdmmConfig& a = cfg.solver;
      a.rank = sj.value("rank", cfg.dataset.rank);
      a.penalty_mu = sj.value("penalty_mu", a.penalty_mu);
      a.penalty_lambda = sj.value("penalty_lambda", a.penalty_lambda);
      a.max_iters = sj.value("max_iters", a.max_iters);
      a.kkt_tol = sj.value("kkt_tol", a.kkt_tol);
      a.ridge_eps = sj.value("ridge_eps", a.ridge_eps);
      a.init_iters = sj.value("init_iters", a.init_iters);
      a.init_restarts = sj.value("init_restarts", a.init_restarts);
      a.init_svd = sj.value("init_svd", a.init_svd);
      a.seed = sj.value("seed", a.seed);
      a.align_init = sj.value("align_init", a.align_init);
      a.threads = sj.value("threads", a.threads);
    } else {
      cfg.solver.rank = cfg.dataset.rank;
    }
    if (root.contains("output")) cfg.output = root["output"].get<std::string>();
  } catch (const json::exception& e) {
    throw ArgumentError(std::string("invalid config: ") + e.what());
  }
  if (cfg.noise_rel_std < 0.0) throw ArgumentError("noise.rel_std must be nonnegative");
  cfg.solver.validate();
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config '" + path.string() + "'", 0);
  std::stringstream ss;
  ss << in.rdbuf();
  ExperimentConfig cfg = from_json(ss.str());
  if (cfg.dataset.kind == DatasetSpec::Kind::File && cfg.dataset.path.is_relative()) {
    cfg.dataset.path = path.parent_path() / cfg.dataset.path;
  }
  return cfg;
}

std::string ExperimentConfig::to_json() const {
  json root;
  root["schema"] = "dtc.experiment/1";
  json ds;
  switch (dataset.kind) {
    case DatasetSpec::Kind::File:
      ds = {{"kind", "file"}, {"path", dataset.path.generic_string()}};
      break;
    case DatasetSpec::Kind::LowRank:
      ds = {{"kind", "lowrank"},
            {"dims", {dataset.dims.I, dataset.dims.J, dataset.dims.K}},
            {"rank", dataset.rank},
            {"seed", dataset.seed},
            {"factor_scale", dataset.factor_scale}};
      break;
    case DatasetSpec::Kind::PowerLike:
      ds = {{"kind", "power"},
            {"phases", dataset.dims.I},
            {"times", dataset.dims.K},
            {"rank", dataset.rank},
            {"seed", dataset.seed}};
      break;
  }
  root["dataset"] = std::move(ds);
  json pj;
  if (!partition.sizes.empty()) pj["sizes"] = partition.sizes;
  if (!partition.areas.empty()) pj["areas"] = lists_to(partition.areas);
  switch (partition.topology) {
    case PartitionSpec::Topology::Chain: pj["topology"] = "chain"; break;
    case PartitionSpec::Topology::Complete: pj["topology"] = "complete"; break;
    case PartitionSpec::Topology::Explicit: pj["adjacency"] = lists_to(partition.adjacency); break;
  }
  root["partition"] = std::move(pj);
  root["sampling"] = sampling_to(sampling);
  if (!cases.empty()) {
    json cj = json::array();
    for (const auto& c : cases) cj.push_back({{"name", c.name}, {"sampling", sampling_to(c.sampling)}});
    root["cases"] = std::move(cj);
  }
  root["noise"] = {{"rel_std", noise_rel_std}, {"seed", noise_seed}};
  root["normalize"] = normalize;
  root["strict"] = strict;
  root["score"] = score == ScoreSet::All ? "all" : "unobserved";
  root["solver"] = {{"rank", solver.rank},
                    {"penalty_mu", solver.penalty_mu},
                    {"penalty_lambda", solver.penalty_lambda},
                    {"max_iters", solver.max_iters},
                    {"kkt_tol", solver.kkt_tol},
                    {"ridge_eps", solver.ridge_eps},
                    {"init_iters", solver.init_iters},
                    {"init_restarts", solver.init_restarts},
                    {"init_svd", solver.init_svd},
                    {"seed", solver.seed},
                    {"align_init", solver.align_init}};
  return root.dump(2);
}

std::string ExperimentConfig::digest() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : to_json()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << h;
  return os.str();
}

// ---------------------------------------------------------------- pipeline

PreparedExperiment prepare_experiment(const ExperimentConfig& cfg) {
  PreparedExperiment prep;
  switch (cfg.dataset.kind) {
    case DatasetSpec::Kind::File:
      prep.dataset = load_dataset(cfg.dataset.path);
      break;
    case DatasetSpec::Kind::LowRank:
      prep.dataset = synthesize_lowrank(cfg.dataset.dims, cfg.dataset.rank, cfg.dataset.seed,
                                        cfg.dataset.factor_scale);
      break;
    case DatasetSpec::Kind::PowerLike:
      prep.dataset = synthesize_power_like(cfg.dataset.dims.I, cfg.dataset.dims.K,
                                           cfg.dataset.rank, cfg.dataset.seed);
      break;
  }
  prep.partition = cfg.partition.build(prep.dataset.truth.dims().I);
  return prep;
}

const char* to_string(RunStatus s) {
  switch (s) {
    case RunStatus::Ok: return "ok";
    case RunStatus::IdentifiabilityFailed: return "identifiability_failed";
    case RunStatus::Diverged: return "diverged";
  }
  return "unknown";
}

CaseOutcome run_case(const ExperimentConfig& cfg, const PreparedExperiment& prep,
                     const SamplingSpec& sampling, const std::string& name) {
  CaseOutcome out;
  out.name = name;
  const Tensor3& truth = prep.dataset.truth;
  const Dims3& dims = truth.dims();
  out.scheme = resolve_sampling(sampling, prep.partition, dims);
  const Mask3 mask = build_mask(prep.partition, out.scheme, dims);
  out.observed = add_noise(MaskedTensor3(truth, mask, prep.dataset.labels), cfg.noise_rel_std,
                           cfg.noise_seed);
  out.identifiability = check_identifiability(prep.partition, out.scheme, cfg.solver.rank, dims);
  if (!out.identifiability.verdict) {
    for (const auto& d : out.identifiability.diagnostics) out.warnings.push_back("identifiability: " + d);
    if (cfg.strict) {
      out.status = RunStatus::IdentifiabilityFailed;
      out.failure = "sampling scheme fails the identifiability check";
      return out;
    }
  }
  NormalizationState norm;
  MaskedTensor3 input = out.observed;
  if (cfg.normalize) {
    Normalized n = normalize(out.observed);
    input = std::move(n.tensor);
    norm = std::move(n.state);
    out.warnings.insert(out.warnings.end(), n.warnings.begin(), n.warnings.end());
  }
  try {
    out.solve = run_distributed(input, prep.partition, cfg.solver);
  } catch (const DivergenceError& e) {
    out.status = RunStatus::Diverged;
    out.failure = e.what();
    return out;
  }
  out.warnings.insert(out.warnings.end(), out.solve->warnings.begin(), out.solve->warnings.end());
  Tensor3 estimate = reconstruct(out.solve->factors);
  if (cfg.normalize) estimate = denormalize(estimate, norm);
  out.metrics = score(truth, estimate, mask, cfg.score, prep.dataset.power_layout());
  out.estimate = std::move(estimate);
  return out;
}

namespace {

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json metrics_json(const MetricsReport& m) {
  return {{"scored_set", m.scored == ScoreSet::All ? "all" : "unobserved"},
          {"scored_entries", m.scored_entries},
          {"relative_error", m.relative_error},
          {"relative_mae", m.relative_mae},
          {"mape_vmag_pct", optional_number(m.mape_vmag_pct)},
          {"mae_angle_deg", optional_number(m.mae_angle_deg)},
          {"mae_p", optional_number(m.mae_p)},
          {"mae_q", optional_number(m.mae_q)}};
}

json case_json(const CaseOutcome& c) {
  const IdentifiabilityVerdict& v = c.identifiability;
  json j;
  j["name"] = c.name;
  j["status"] = to_string(c.status);
  json areas = json::array();
  for (std::size_t a = 0; a < v.area_reports.size(); ++a) {
    areas.push_back({{"area", a + 1},
                     {"unique", v.area_unique[a]},
                     {"kind", to_string(v.area_reports[a].kind)},
                     {"min_term", v.area_reports[a].min_term},
                     {"required", v.area_reports[a].required}});
  }
  j["identifiability"] = {{"verdict", v.verdict},
                          {"clauses",
                           {{"local_uniqueness", v.local_uniqueness},
                            {"phase_coverage", v.phase_coverage},
                            {"measurement_coverage", v.measurement_coverage},
                            {"time_coverage", v.time_coverage},
                            {"graph_connected", v.graph_connected}}},
                          {"areas", std::move(areas)},
                          {"diagnostics", v.diagnostics}};
  j["observed_entries"] = c.observed.observed_count();
  j["metrics"] = c.metrics ? metrics_json(*c.metrics) : json(nullptr);
  if (c.solve) {
    const auto& s = *c.solve;
    json res = nullptr;
    if (!s.trace.rows.empty()) {
      const TraceRow& r = s.trace.rows.back();
      res = {{"objective", r.objective},
             {"max_consensus_B", r.max_consensus_B},
             {"max_consensus_C", r.max_consensus_C},
             {"max_stationarity", r.max_stationarity},
             {"dual_delta", r.dual_delta},
             {"dual_antisymmetry", r.dual_antisymmetry}};
    }
    j["solver"] = {{"iterations", s.iterations},
                   {"converged", s.converged},
                   {"rounds", s.log.rounds.size()},
                   {"final_residuals", std::move(res)}};
  } else {
    j["solver"] = nullptr;
  }
  if (!c.failure.empty()) j["failure"] = c.failure;
  j["warnings"] = c.warnings;
  return j;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArgumentError("cannot write '" + path.string() + "'");
  out << text;
}

std::string fmt(const std::optional<double>& v) {
  if (!v) return "";
  std::ostringstream os;
  os.precision(10);
  os << *v;
  return os.str();
}

}  // namespace

std::string curves_csv(const std::vector<CaseOutcome>& cases) {
  std::ostringstream os;
  os << "case,verdict,status,mape_vmag_pct,mae_angle_deg,mae_p,mae_q,relative_error,relative_mae,"
        "iterations\n";
  for (const auto& c : cases) {
    const auto& m = c.metrics;
    os << c.name << ',' << (c.identifiability.verdict ? "pass" : "fail") << ',' << to_string(c.status)
       << ',' << fmt(m ? m->mape_vmag_pct : std::nullopt) << ','
       << fmt(m ? m->mae_angle_deg : std::nullopt) << ',' << fmt(m ? m->mae_p : std::nullopt) << ','
       << fmt(m ? m->mae_q : std::nullopt) << ','
       << fmt(m ? std::optional<double>(m->relative_error) : std::nullopt) << ','
       << fmt(m ? std::optional<double>(m->relative_mae) : std::nullopt) << ','
       << (c.solve ? std::to_string(c.solve->iterations) : std::string()) << '\n';
  }
  return os.str();
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  ExperimentResult result;
  const PreparedExperiment prep = prepare_experiment(cfg);
  result.main = run_case(cfg, prep, cfg.sampling, "main");
  for (const auto& c : cfg.cases) result.cases.push_back(run_case(cfg, prep, c.sampling, c.name));

  switch (result.main.status) {
    case RunStatus::Ok: result.exit_code = 0; break;
    case RunStatus::IdentifiabilityFailed: result.exit_code = 2; break;
    case RunStatus::Diverged: result.exit_code = 3; break;
  }

  json report = case_json(result.main);
  report["schema"] = "dtc.report/1";
  report["config_digest"] = cfg.digest();
  const Dims3& d = prep.dataset.truth.dims();
  report["dataset"] = {{"dims", {d.I, d.J, d.K}}, {"power_layout", prep.dataset.power_layout()}};
  report["seeds"] = {{"dataset", cfg.dataset.seed}, {"noise", cfg.noise_seed}, {"solver", cfg.solver.seed}};
  report["noise_rel_std"] = cfg.noise_rel_std;
  if (!result.cases.empty()) {
    json cj = json::array();
    for (const auto& c : result.cases) cj.push_back(case_json(c));
    report["cases"] = std::move(cj);
  }
  result.report_json = report.dump(2) + "\n";

  if (!cfg.output.empty()) {
    std::filesystem::create_directories(cfg.output);
    write_file(cfg.output / "report.json", result.report_json);
    if (result.main.solve) {
      write_file(cfg.output / "trace.csv", result.main.solve->trace.to_csv());
      write_file(cfg.output / "rounds.jsonl", result.main.solve->log.to_jsonl());
    }
    if (!result.cases.empty()) write_file(cfg.output / "curves.csv", curves_csv(result.cases));
  }
  return result;
}

}  // namespace dtc
