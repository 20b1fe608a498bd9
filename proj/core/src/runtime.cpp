#include "dtc/runtime.hpp"

#include <algorithm>
#include <chrono>
#include <istream>
#include <sstream>

#include <json.hpp>

#include "parallel.hpp"

namespace dtc {

using json = nlohmann::json;

const char* to_string(RoundPhase phase) {
  return phase == RoundPhase::Init ? "init" : "admm";
}

MessageBus::MessageBus(std::vector<IndexSet> adjacency)
    : adjacency_(std::move(adjacency)),
      inbox_(adjacency_.size()),
      locks_(adjacency_.size()) {}

void MessageBus::send(FactorMessage message) {
  const std::size_t n = adjacency_.size();
  if (message.from >= n || message.to >= n) {
    throw TopologyError("message between unknown areas " + std::to_string(message.from + 1) +
                        " -> " + std::to_string(message.to + 1));
  }
  const IndexSet& nb = adjacency_[message.from];
  if (!std::binary_search(nb.begin(), nb.end(), message.to)) {
    throw TopologyError("area " + std::to_string(message.from + 1) + " tried to message area " +
                        std::to_string(message.to + 1) + ", which is not a neighbor");
  }
  const std::size_t to = message.to;
  std::lock_guard lock(locks_[to]);
  inbox_[to].push_back(std::move(message));
}

std::map<std::size_t, FactorMessage> MessageBus::take(std::size_t area, std::size_t round) {
  std::map<std::size_t, FactorMessage> out;
  {
    std::lock_guard lock(locks_.at(area));
    auto& box = inbox_[area];
    for (auto it = box.begin(); it != box.end();) {
      if (it->round == round && !out.contains(it->from)) {
        const std::size_t from = it->from;
        out.emplace(from, std::move(*it));
        it = box.erase(it);
      } else {
        ++it;
      }
    }
  }
  for (std::size_t nb : adjacency_[area]) {
    if (!out.contains(nb)) {
      throw DeadlockError("round " + std::to_string(round) + ": area " + std::to_string(area + 1) +
                              " has no message from neighbor " + std::to_string(nb + 1),
                          round);
    }
  }
  return out;
}

namespace {

using Clock = std::chrono::steady_clock;

double micros_since(Clock::time_point start) {
  return std::chrono::duration<double, std::micro>(Clock::now() - start).count();
}

class Runtime {
 public:
  Runtime(const std::vector<AreaProblem>& areas, const Partition& p, const AdmmConfig& cfg)
      : areas_(areas), cfg_(cfg), bus_(p.adjacency()), n_(areas.size()) {}

  // One synchronous round: every actor runs `before` and sends its B, C and
  // known rows to each neighbor; after the barrier every actor receives and
  // runs `after` on the messages.
  template <typename Before, typename After>
  RoundLog round(RoundPhase phase, Before&& before, After&& after) {
    RoundLog log;
    log.round = ++round_;
    log.phase = phase;
    log.sent.assign(n_, 0);
    log.received.assign(n_, 0);
    log.compute_us.assign(n_, 0.0);
    std::vector<std::vector<MessageRecord>> delivered(n_);
    detail::parallel_for(n_, cfg_.threads, [&](std::size_t a) {
      const auto start = Clock::now();
      before(a);
      for (std::size_t nb : areas_[a].neighbors) {
        bus_.send({a, nb, log.round, states[a].B, states[a].C, known[a]});
        ++log.sent[a];
      }
      log.compute_us[a] += micros_since(start);
    });
    detail::parallel_for(n_, cfg_.threads, [&](std::size_t a) {
      const auto start = Clock::now();
      auto inbox = bus_.take(a, log.round);
      log.received[a] = inbox.size();
      for (const auto& [from, msg] : inbox) delivered[a].push_back({from, a});
      after(a, inbox);
      log.compute_us[a] += micros_since(start);
    });
    for (auto& d : delivered) log.messages.insert(log.messages.end(), d.begin(), d.end());
    return log;
  }

  std::vector<AdmmAreaState> states;
  std::vector<ObservedRows> known;

 private:
  const std::vector<AreaProblem>& areas_;
  const AdmmConfig& cfg_;
  MessageBus bus_;
  std::size_t n_;
  std::size_t round_ = 0;
};

}  // namespace

DistributedResult run_distributed(const MaskedTensor3& t, const Partition& p,
                                  const AdmmConfig& cfg) {
  cfg.validate();
  const std::vector<AreaProblem> areas = split_areas(t, p);
  const std::size_t n = areas.size();
  DistributedResult result;
  result.log.adjacency = p.adjacency();
  Runtime rt(areas, p, cfg);

  // Local CPD needs no communication.
  std::vector<InitResult> inits(n);
  detail::parallel_for(n, cfg.threads, [&](std::size_t a) {
    inits[a] = init_local_cpd(areas[a].local, cfg.rank, cfg.init_iters, area_seed(cfg.seed, a),
                              cfg.ridge_eps, cfg.init_restarts, cfg.init_svd);
  });
  rt.states.reserve(n);
  rt.known.resize(n);
  for (std::size_t a = 0; a < n; ++a) {
    for (auto& w : inits[a].warnings) {
      result.warnings.push_back("area " + std::to_string(a + 1) + ": " + w);
    }
    rt.states.push_back(make_area_state(std::move(inits[a].factors), areas[a].neighbors));
    rt.known[a] = observed_rows(areas[a].workspace);
  }

  auto nothing = [](std::size_t) {};
  if (init_rounds(p, cfg) > 0) {
    const AlignmentTree tree = alignment_tree(p);
    std::vector<std::string> align_warnings(n);
    for (std::size_t level = 1; level <= tree.max_depth; ++level) {
      result.log.rounds.push_back(rt.round(
          RoundPhase::Init, nothing, [&](std::size_t a, std::map<std::size_t, FactorMessage>& in) {
            if (tree.depth[a] != level) return;
            const FactorMessage& up = in.at(tree.parent[a]);
            refit_from_neighbor(areas[a].workspace, rt.states[a], up.B, up.C, cfg);
            if (!align_to_neighbor(rt.states[a], rt.known[a], up.B, up.C, up.known)) {
              align_warnings[a] = "area " + std::to_string(a + 1) +
                                  ": shares no observed measurement/time rows with area " +
                                  std::to_string(tree.parent[a] + 1) +
                                  "; initial factors not aligned";
            }
          }));
      for (auto& w : align_warnings) {
        if (!w.empty()) result.warnings.push_back(std::move(w));
        w.clear();
      }
    }
    const std::size_t fill = graph_diameter(p);
    for (std::size_t r = 0; r < fill; ++r) {
      result.log.rounds.push_back(rt.round(
          RoundPhase::Init, nothing, [&](std::size_t a, std::map<std::size_t, FactorMessage>& in) {
            std::map<std::size_t, AreaSnapshot> nb;
            for (auto& [from, msg] : in) nb.emplace(from, AreaSnapshot{msg.B, msg.C, msg.known});
            fill_unknown_rows(rt.states[a], rt.known[a], nb);
          }));
    }
  }

  // Neighbors' copies as last received.
  std::vector<NeighborMatrices> nb_B(n), nb_C(n);
  auto store = [&](std::size_t a, std::map<std::size_t, FactorMessage>& in) {
    for (auto& [from, msg] : in) {
      nb_B[a][from] = std::move(msg.B);
      nb_C[a][from] = std::move(msg.C);
    }
  };
  result.log.rounds.push_back(rt.round(RoundPhase::Init, nothing, store));

  std::vector<double> dual_sq(n);
  std::vector<AreaResiduals> residuals(n);
  for (std::size_t iter = 1; iter <= cfg.max_iters; ++iter) {
    RoundLog log = rt.round(
        RoundPhase::Admm,
        [&](std::size_t a) { primal_step(areas[a].workspace, rt.states[a], nb_B[a], nb_C[a], cfg); },
        [&](std::size_t a, std::map<std::size_t, FactorMessage>& in) {
          store(a, in);
          dual_sq[a] = update_duals(rt.states[a], nb_B[a], nb_C[a]);
          residuals[a] = kkt_residuals(areas[a].workspace, rt.states[a], nb_B[a], nb_C[a], cfg);
        });
    check_finite(rt.states, iter);
    result.trace.rows.push_back(summarize_round(iter, areas, rt.states, residuals, dual_sq));
    log.residuals = result.trace.rows.back();
    result.log.rounds.push_back(std::move(log));
    result.iterations = iter;
    if (residuals_below(result.trace.rows.back(), cfg.kkt_tol)) {
      result.converged = true;
      break;
    }
  }
  result.factors = assemble_global(p, rt.states);
  result.states = std::move(rt.states);
  return result;
}

namespace {

json one_based(const IndexSet& s) {
  json out = json::array();
  for (std::size_t v : s) out.push_back(v + 1);
  return out;
}

IndexSet zero_based(const json& j, std::size_t line) {
  IndexSet out;
  for (const auto& v : j) {
    const auto x = v.get<std::size_t>();
    if (x == 0) throw ParseError("area ids are 1-based", line);
    out.push_back(x - 1);
  }
  return out;
}

}  // namespace

std::string CommunicationLog::to_jsonl() const {
  std::ostringstream os;
  json topo{{"event", "topology"}, {"schema", "dtc.rounds/1"}, {"areas", adjacency.size()}};
  json adj = json::array();
  for (const auto& nb : adjacency) adj.push_back(one_based(nb));
  topo["adjacency"] = std::move(adj);
  os << topo.dump() << '\n';
  for (const auto& r : rounds) {
    json ev{{"event", "round"}, {"round", r.round}, {"phase", to_string(r.phase)}};
    json msgs = json::array();
    for (const auto& m : r.messages) msgs.push_back({m.from + 1, m.to + 1});
    ev["messages"] = std::move(msgs);
    ev["sent"] = r.sent;
    ev["received"] = r.received;
    ev["compute_us"] = r.compute_us;
    if (r.residuals) {
      ev["residuals"] = {{"objective", r.residuals->objective},
                         {"max_consensus_B", r.residuals->max_consensus_B},
                         {"max_consensus_C", r.residuals->max_consensus_C},
                         {"max_stationarity", r.residuals->max_stationarity},
                         {"dual_delta", r.residuals->dual_delta},
                         {"dual_antisymmetry", r.residuals->dual_antisymmetry}};
    }
    os << ev.dump() << '\n';
  }
  return os.str();
}

CommunicationLog CommunicationLog::from_jsonl(std::istream& in) {
  CommunicationLog log;
  bool have_topology = false;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json ev = json::parse(text);
      const std::string kind = ev.at("event").get<std::string>();
      if (kind == "topology") {
        log.adjacency.clear();
        for (const auto& nb : ev.at("adjacency")) log.adjacency.push_back(zero_based(nb, line));
        have_topology = true;
      } else if (kind == "round") {
        RoundLog r;
        r.round = ev.at("round").get<std::size_t>();
        const std::string phase = ev.at("phase").get<std::string>();
        if (phase != "init" && phase != "admm") throw ParseError("unknown phase '" + phase + "'", line);
        r.phase = phase == "init" ? RoundPhase::Init : RoundPhase::Admm;
        for (const auto& m : ev.at("messages")) {
          const IndexSet pair = zero_based(m, line);
          if (pair.size() != 2) throw ParseError("message must be [from, to]", line);
          r.messages.push_back({pair[0], pair[1]});
        }
        r.sent = ev.value("sent", std::vector<std::size_t>{});
        r.received = ev.value("received", std::vector<std::size_t>{});
        r.compute_us = ev.value("compute_us", std::vector<double>{});
        if (ev.contains("residuals")) {
          const json& res = ev["residuals"];
          TraceRow row;
          row.iter = r.round;
          row.objective = res.value("objective", 0.0);
          row.max_consensus_B = res.value("max_consensus_B", 0.0);
          row.max_consensus_C = res.value("max_consensus_C", 0.0);
          row.max_stationarity = res.value("max_stationarity", 0.0);
          row.dual_delta = res.value("dual_delta", 0.0);
          row.dual_antisymmetry = res.value("dual_antisymmetry", 0.0);
          r.residuals = row;
        }
        log.rounds.push_back(std::move(r));
      } else {
        throw ParseError("unknown event '" + kind + "'", line);
      }
    } catch (const json::exception& e) {
      throw ParseError(std::string("malformed log line: ") + e.what(), line);
    }
  }
  if (!have_topology) throw ParseError("log has no topology event", 0);
  return log;
}

AuditReport audit_communication(const CommunicationLog& log) {
  AuditReport report;
  const std::size_t n = log.adjacency.size();
  for (const auto& nb : log.adjacency) report.expected_per_round += nb.size();
  auto adjacent = [&](std::size_t a, std::size_t b) {
    const IndexSet& nb = log.adjacency[a];
    return std::binary_search(nb.begin(), nb.end(), b);
  };
  auto area = [](std::size_t a) { return "area " + std::to_string(a + 1); };
  for (const auto& r : log.rounds) {
    const std::string where = "round " + std::to_string(r.round) + ": ";
    ++report.rounds;
    report.messages += r.messages.size();
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> count;
    std::vector<std::size_t> sent(n, 0), received(n, 0);
    for (const auto& m : r.messages) {
      if (m.from >= n || m.to >= n) {
        report.violations.push_back(where + "message between unknown areas " +
                                    std::to_string(m.from + 1) + " -> " + std::to_string(m.to + 1));
        continue;
      }
      ++sent[m.from];
      ++received[m.to];
      if (!adjacent(m.from, m.to)) {
        report.violations.push_back(where + area(m.from) + " sent to " + area(m.to) +
                                    ", which is not a neighbor");
        continue;
      }
      ++count[{m.from, m.to}];
    }
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b : log.adjacency[a]) {
        const std::size_t c = count[{a, b}];
        if (c == 0) {
          report.violations.push_back(where + area(b) + " received no message from " + area(a));
        } else if (c > 1) {
          report.violations.push_back(where + area(a) + " sent " + std::to_string(c) +
                                      " messages to " + area(b));
        }
      }
      if (r.sent.size() == n && r.sent[a] != sent[a]) {
        report.violations.push_back(where + area(a) + " reports " + std::to_string(r.sent[a]) +
                                    " sent messages but " + std::to_string(sent[a]) +
                                    " were delivered");
      }
      if (r.received.size() == n && r.received[a] != received[a]) {
        report.violations.push_back(where + area(a) + " reports " + std::to_string(r.received[a]) +
                                    " received messages but " + std::to_string(received[a]) +
                                    " were delivered");
      }
    }
    if ((!r.sent.empty() && r.sent.size() != n) || (!r.received.empty() && r.received.size() != n)) {
      report.violations.push_back(where + "per-area counters do not cover all areas");
    }
  }
  return report;
}

}  // namespace dtc
