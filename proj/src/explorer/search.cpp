#include "gvm/explorer.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <set>
#include <thread>
#include <unordered_map>

namespace gvm {

namespace {

// Answers the first choices from a fixed prefix and every later one with 0.
class PrefixOracle final : public TransitionOracle {
public:
  explicit PrefixOracle(std::vector<std::uint64_t> prefix) : prefix_(std::move(prefix)) {}
  std::optional<std::uint64_t> choose(std::uint64_t bound) override {
    std::uint64_t v = pos_ < prefix_.size() ? prefix_[pos_] : 0;
    ++pos_;
    if (v >= bound)
      return std::nullopt;
    return v;
  }

private:
  std::vector<std::uint64_t> prefix_;
  std::size_t pos_ = 0;
};

Edge edge_of(TransitionResult &r) {
  Edge e;
  e.choices = std::move(r.choices);
  e.bounds = std::move(r.bounds);
  e.interrupts = std::move(r.interrupts);
  e.traces = std::move(r.traces);
  e.faults = std::move(r.faults);
  e.flags = r.flags;
  return e;
}

template <class Run>
std::vector<Successor> enumerate(Run &&run, ExpansionCost *cost) {
  std::vector<Successor> out;
  std::vector<std::uint64_t> prefix;
  for (;;) {
    PrefixOracle oracle(prefix);
    TransitionResult r = run(oracle);
    if (cost) {
      ++cost->transitions;
      cost->instructions += r.instructions;
    }
    Successor s;
    s.status = r.status;
    s.diagnostic = std::move(r.diagnostic);
    s.state = std::move(r.successor);
    s.edge = edge_of(r);
    bool stop = s.status == TransitionStatus::BudgetExceeded ||
                s.status == TransitionStatus::Diverged;
    auto choices = s.edge.choices;
    auto bounds = s.edge.bounds;
    out.push_back(std::move(s));
    if (stop)
      break;
    // Advance the deepest choice that still has an untried value.
    std::size_t i = choices.size();
    while (i > 0 && choices[i - 1] + 1 >= bounds[i - 1])
      --i;
    if (i == 0)
      break;
    prefix.assign(choices.begin(), choices.begin() + std::ptrdiff_t(i));
    ++prefix.back();
  }
  return out;
}

struct Expanded {
  std::vector<Successor> succ;
  std::vector<CanonicalKey> keys;
  ExpansionCost cost;
};

struct StateInfo {
  std::int64_t parent = -1;
  Edge edge; // edge from parent (boot edge for initial states)
};

} // namespace

std::vector<Successor> successors(const Machine &m, const Snapshot &s, const VmOptions &opts,
                                  ExpansionCost *cost) {
  return enumerate([&](TransitionOracle &o) { return m.run(s, o, opts); }, cost);
}

std::vector<Successor> boot_successors(const Machine &m, const VmOptions &opts,
                                       ExpansionCost *cost) {
  return enumerate([&](TransitionOracle &o) { return m.boot(o, opts); }, cost);
}

std::string_view verdict_name(VerdictKind k) {
  switch (k) {
  case VerdictKind::Safe: return "safe";
  case VerdictKind::ErrorFound: return "error";
  case VerdictKind::BudgetExceeded: return "budget";
  }
  return "?";
}

namespace {

class Search {
public:
  Search(const Machine &m, const ExploreOptions &opts) : m_(m), opts_(opts) {}

  Verdict run() {
    auto start = std::chrono::steady_clock::now();
    Expanded boot;
    boot.succ = boot_successors(m_, opts_.vm, &boot.cost);
    key_all(boot);
    std::vector<std::pair<std::int64_t, Snapshot>> frontier;
    merge(-1, boot, frontier);

    if (opts_.search == SearchOrder::BFS)
      bfs(frontier);
    else
      dfs(frontier);

    v_.stats.states = states_.size();
    v_.stats.expanded = expanded_;
    v_.error_states.assign(error_hashes_.begin(), error_hashes_.end());
    v_.stats.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return std::move(v_);
  }

private:
  bool done() const {
    return v_.kind == VerdictKind::BudgetExceeded ||
           (v_.kind == VerdictKind::ErrorFound && opts_.stop_at_error);
  }

  CanonicalKey key(const Snapshot &s) const {
    return opts_.symmetry ? canonicalize(s) : raw_key(s);
  }

  void key_all(Expanded &e) const {
    e.keys.resize(e.succ.size());
    for (std::size_t i = 0; i < e.succ.size(); ++i)
      if (e.succ[i].status == TransitionStatus::Ok)
        e.keys[i] = key(e.succ[i].state);
  }

  Expanded expand(const Snapshot &s) {
    ++expanded_;
    Expanded e;
    e.succ = successors(m_, s, opts_.vm, &e.cost);
    key_all(e);
    return e;
  }

  // Folds the successors of `from` into the state graph, in order. New
  // non-error states are appended to `fresh`.
  void merge(std::int64_t from, Expanded &e,
             std::vector<std::pair<std::int64_t, Snapshot>> &fresh) {
    v_.stats.transitions += e.cost.transitions;
    v_.stats.instructions += e.cost.instructions;
    for (std::size_t i = 0; i < e.succ.size() && !done(); ++i) {
      auto &s = e.succ[i];
      ++v_.stats.edges;
      if (s.status == TransitionStatus::BudgetExceeded ||
          s.status == TransitionStatus::Diverged) {
        v_.kind = VerdictKind::BudgetExceeded;
        v_.diagnostic = s.diagnostic;
        return;
      }
      if (s.status == TransitionStatus::Terminal) {
        if (opts_.record_graph)
          v_.graph.push_back({from, -1, s.edge});
        continue;
      }
      auto [it, inserted] = index_.try_emplace(std::move(e.keys[i]), std::int64_t(states_.size()));
      std::int64_t to = it->second;
      if (opts_.record_graph)
        v_.graph.push_back({from, to, s.edge});
      if (s.edge.error()) {
        if (inserted)
          states_.push_back({from, s.edge});
        if (!opts_.stop_at_error)
          error_hashes_.insert(state_hash(s.state));
        if (v_.kind != VerdictKind::ErrorFound)
          error_found(from, s);
        continue;
      }
      if (!inserted)
        continue;
      states_.push_back({from, s.edge});
      if (states_.size() > opts_.max_states) {
        v_.kind = VerdictKind::BudgetExceeded;
        v_.diagnostic = "state limit of " + std::to_string(opts_.max_states) + " exceeded";
        return;
      }
      fresh.emplace_back(to, std::move(s.state));
    }
  }

  void error_found(std::int64_t from, Successor &s) {
    v_.kind = VerdictKind::ErrorFound;
    Counterexample c;
    c.program_hash = program_hash(m_.program());
    for (std::int64_t at = from; at >= 0; at = states_[std::size_t(at)].parent)
      c.edges.push_back(states_[std::size_t(at)].edge);
    std::reverse(c.edges.begin(), c.edges.end());
    c.edges.push_back(s.edge);
    c.final_key = state_hash(s.state);
    c.error = s.edge.faults.empty() ? "os" : std::string(fault_name(s.edge.faults.back().kind));
    v_.cex = std::move(c);
    v_.error_state = std::move(s.state);
  }

  void bfs(std::vector<std::pair<std::int64_t, Snapshot>> frontier) {
    unsigned workers = std::max(1u, opts_.workers);
    while (!frontier.empty() && !done()) {
      std::vector<Expanded> results(frontier.size());
      if (workers == 1 || frontier.size() == 1) {
        for (std::size_t i = 0; i < frontier.size(); ++i)
          results[i] = expand(frontier[i].second);
      } else {
        std::atomic<std::size_t> next{0};
        auto work = [&] {
          for (std::size_t i; (i = next.fetch_add(1)) < frontier.size();)
            results[i] = expand(frontier[i].second);
        };
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < std::min<std::size_t>(workers, frontier.size()); ++t)
          pool.emplace_back(work);
        for (auto &t : pool)
          t.join();
      }
      std::vector<std::pair<std::int64_t, Snapshot>> next_level;
      for (std::size_t i = 0; i < frontier.size() && !done(); ++i)
        merge(frontier[i].first, results[i], next_level);
      frontier = std::move(next_level);
    }
  }

  void dfs(std::vector<std::pair<std::int64_t, Snapshot>> initial) {
    std::vector<std::pair<std::int64_t, Snapshot>> stack(
        std::make_move_iterator(initial.rbegin()), std::make_move_iterator(initial.rend()));
    while (!stack.empty() && !done()) {
      auto [id, snap] = std::move(stack.back());
      stack.pop_back();
      Expanded e = expand(snap);
      std::vector<std::pair<std::int64_t, Snapshot>> fresh;
      merge(id, e, fresh);
      for (auto it = fresh.rbegin(); it != fresh.rend(); ++it)
        stack.push_back(std::move(*it));
    }
  }

  const Machine &m_;
  const ExploreOptions &opts_;
  Verdict v_;
  std::unordered_map<CanonicalKey, std::int64_t> index_;
  std::vector<StateInfo> states_;
  std::atomic<std::uint64_t> expanded_{0};
  std::set<std::string> error_hashes_;
};

} // namespace

Verdict verify(const Machine &m, const ExploreOptions &opts) { return Search(m, opts).run(); }

} // namespace gvm
