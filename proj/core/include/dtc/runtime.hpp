#pragma once

// Message-passing execution of the consensus ADMM solver. Every area is an
// actor that owns its state and talks to the other areas only through a
// MessageBus that refuses messages between non-neighbors. Rounds are
// synchronous: all actors compute and send, then all receive.

#include <cstddef>
#include <deque>
#include <iosfwd>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dtc/admm.hpp"
#include "dtc/sampling.hpp"
#include "dtc/tensor.hpp"

namespace dtc {

enum class RoundPhase { Init, Admm };

const char* to_string(RoundPhase phase);

struct FactorMessage {
  std::size_t from = 0;
  std::size_t to = 0;
  std::size_t round = 0;
  Matrix B;
  Matrix C;
  /// Rows the sender holds data for; only used during initialization.
  ObservedRows known;
};

/// Mailboxes of all areas. send() and take() are safe to call concurrently.
class MessageBus {
 public:
  explicit MessageBus(std::vector<IndexSet> adjacency);

  /// Throws TopologyError when `to` is not a neighbor of `from`.
  void send(FactorMessage message);

  /// Removes and returns the round's message from every neighbor of `area`,
  /// keyed by sender. Throws DeadlockError if any is missing.
  std::map<std::size_t, FactorMessage> take(std::size_t area, std::size_t round);

  const std::vector<IndexSet>& adjacency() const noexcept { return adjacency_; }

 private:
  std::vector<IndexSet> adjacency_;
  std::vector<std::deque<FactorMessage>> inbox_;
  std::vector<std::mutex> locks_;
};

struct MessageRecord {
  std::size_t from = 0;
  std::size_t to = 0;
  friend bool operator==(const MessageRecord&, const MessageRecord&) = default;
};

struct RoundLog {
  std::size_t round = 0;
  RoundPhase phase = RoundPhase::Admm;
  std::vector<MessageRecord> messages;
  std::vector<std::size_t> sent;      ///< per area
  std::vector<std::size_t> received;  ///< per area
  std::vector<double> compute_us;     ///< per area
  std::optional<TraceRow> residuals;  ///< ADMM rounds only
};

/// The topology the run used plus every round it executed.
struct CommunicationLog {
  std::vector<IndexSet> adjacency;
  std::vector<RoundLog> rounds;

  /// One JSON object per line: a topology event, then one event per round.
  /// Area ids are 1-based.
  std::string to_jsonl() const;
  /// Throws ParseError on malformed lines.
  static CommunicationLog from_jsonl(std::istream& in);
};

struct DistributedResult {
  FactorTriple factors;
  ConvergenceTrace trace;
  std::vector<AdmmAreaState> states;
  std::size_t iterations = 0;
  bool converged = false;
  std::vector<std::string> warnings;
  CommunicationLog log;
};

/// Same algorithm and output as run_admm, executed by per-area actors. With
/// cfg.threads > 1 actors of one round run concurrently.
DistributedResult run_distributed(const MaskedTensor3& t, const Partition& p,
                                  const AdmmConfig& cfg);

struct AuditReport {
  std::vector<std::string> violations;
  std::size_t rounds = 0;
  std::size_t messages = 0;
  std::size_t expected_per_round = 0;  ///< 2 |edges|

  bool ok() const noexcept { return violations.empty(); }
};

/// Checks that every message follows an edge of the topology, that every
/// area sent and received exactly one message per neighbor in every round,
/// and that the recorded per-area counters agree with the message list.
AuditReport audit_communication(const CommunicationLog& log);

}  // namespace dtc
