#pragma once

// Explicit-state safety checking over the VM. Each state is a heap
// snapshot; each edge is one scheduler-to-scheduler transition, selected
// by the vector of answers given to hc.choose.

#include "gvm/vm.hpp"

#include <optional>
#include <string>
#include <vector>

namespace gvm {

struct Edge {
  std::vector<std::uint64_t> choices;
  std::vector<std::uint64_t> bounds;
  std::vector<InterruptRecord> interrupts;
  std::vector<std::string> traces;
  std::vector<FaultRecord> faults;
  std::uint8_t flags = 0;

  bool error() const { return flags & flag::Error; }
  bool accept() const { return flags & flag::Accept; }
};

struct Successor {
  Edge edge;
  TransitionStatus status = TransitionStatus::Ok;
  Snapshot state; // meaningless when status == Terminal
  std::string diagnostic;
};

struct ExpansionCost {
  std::uint64_t transitions = 0;
  std::uint64_t instructions = 0;
};

// All leaves of the choice tree of one transition out of `s`, in
// lexicographic order of their choice vectors. Stops early (last entry
// carries the status) on a budget overrun or divergence.
std::vector<Successor> successors(const Machine &m, const Snapshot &s, const VmOptions &opts,
                                  ExpansionCost *cost = nullptr);
// Same for the boot transition.
std::vector<Successor> boot_successors(const Machine &m, const VmOptions &opts,
                                       ExpansionCost *cost = nullptr);

enum class SearchOrder { BFS, DFS };

struct ExploreOptions {
  VmOptions vm;
  bool symmetry = true;
  SearchOrder search = SearchOrder::BFS;
  std::uint64_t max_states = 1'000'000;
  unsigned workers = 1;
  bool record_graph = false;
  // false: keep exploring past error edges and collect every error state.
  bool stop_at_error = true;
};

struct Stats {
  std::uint64_t states = 0;
  std::uint64_t expanded = 0; // states whose successors were computed
  std::uint64_t edges = 0;
  std::uint64_t transitions = 0;
  std::uint64_t instructions = 0;
  double seconds = 0;
};

struct Counterexample {
  std::string program_hash;
  std::vector<Edge> edges; // boot edge first, error edge last
  std::string final_key;
  std::string error; // fault kind name, or "os" when the OS raised Error
};

enum class VerdictKind { Safe, ErrorFound, BudgetExceeded };
std::string_view verdict_name(VerdictKind k);

struct GraphEdge {
  std::int64_t from = -1; // -1: pre-boot
  std::int64_t to = -1;   // -1: terminal
  Edge edge;
};

struct Verdict {
  VerdictKind kind = VerdictKind::Safe;
  Stats stats;
  std::optional<Counterexample> cex;
  Snapshot error_state;
  std::string diagnostic;
  std::vector<GraphEdge> graph; // only with record_graph
  std::vector<std::string> error_states; // state_hash of error states, sorted
};

Verdict verify(const Machine &m, const ExploreOptions &opts = {});

std::string hex64(std::uint64_t v);
std::string program_hash(const gir::Program &p);
std::string state_hash(const Snapshot &s);

std::string write_counterexample(const Counterexample &c);
std::optional<Counterexample> parse_counterexample(std::string_view text, std::string *error);

struct ReplayResult {
  bool ok = false;
  std::string message;
  std::vector<std::string> transcript;
  Snapshot final_state;
};

ReplayResult replay(const Machine &m, const Counterexample &c, const VmOptions &opts = {},
                    bool verbose = false);

std::string state_space_dot(const Verdict &v);

} // namespace gvm
