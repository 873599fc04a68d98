#include "gvm/cli.hpp"

#include "gvm/explorer.hpp"
#include "gvm/mos.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

namespace gvm::cli {

namespace {

struct RunConfig {
  std::vector<std::string> inputs;
  bool no_tau_cfl = false;
  bool no_tau_mem = false;
  bool no_symmetry = false;
  std::string search = "bfs";
  std::uint64_t max_states = 1'000'000;
  std::uint64_t step_budget = 1'000'000;
  bool malloc_can_fail = false;
  bool dump_heap = false;
  std::string dot;
  bool stats = false;
  unsigned workers = 1;
  std::string prelude;
  std::string cex;
  bool verbose = false;
  bool state_space = false;
  std::uint64_t max_transitions = 100'000;
};

std::optional<std::string> read_file(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    return std::nullopt;
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool write_file(const std::string &path, const std::string &text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  return bool(out);
}

VmOptions vm_options(const RunConfig &c) {
  VmOptions o;
  o.tau_cfl = !c.no_tau_cfl;
  o.tau_mem = !c.no_tau_mem;
  o.step_budget = c.step_budget;
  return o;
}

class Session {
public:
  Session(const RunConfig &cfg, std::ostream &out, std::ostream &err)
      : cfg_(cfg), out_(out), err_(err) {}

  // Parses, links and instruments the inputs. Prints diagnostics.
  bool load() {
    std::vector<mos::SourceFile> user;
    for (auto &path : cfg_.inputs) {
      auto text = read_file(path);
      if (!text) {
        err_ << "gvm: cannot read '" << path << "'\n";
        return false;
      }
      user.push_back({path, std::move(*text)});
    }
    mos::BuildOptions bo;
    bo.malloc_can_fail = cfg_.malloc_can_fail;
    if (!cfg_.prelude.empty()) {
      try {
        bo.prelude = mos::read_prelude_dir(cfg_.prelude);
      } catch (const std::exception &e) {
        err_ << "gvm: " << e.what() << "\n";
        return false;
      }
    }
    auto r = mos::build(user, bo);
    for (auto &e : r.errors)
      err_ << e << "\n";
    if (!r.ok())
      return false;
    try {
      machine_.emplace(std::move(r.build->program));
    } catch (const std::exception &e) {
      err_ << "gvm: " << e.what() << "\n";
      return false;
    }
    return true;
  }

  int verify() {
    ExploreOptions eo;
    eo.vm = vm_options(cfg_);
    eo.symmetry = !cfg_.no_symmetry;
    eo.search = cfg_.search == "dfs" ? SearchOrder::DFS : SearchOrder::BFS;
    eo.max_states = cfg_.max_states;
    eo.workers = cfg_.workers;
    eo.record_graph = !cfg_.dot.empty();
    Verdict v = gvm::verify(*machine_, eo);

    if (!cfg_.dot.empty() && !write_file(cfg_.dot, state_space_dot(v))) {
      err_ << "gvm: cannot write '" << cfg_.dot << "'\n";
      return kError;
    }
    int code = kSafe;
    if (v.kind == VerdictKind::ErrorFound) {
      code = report_error(v);
    } else if (v.kind == VerdictKind::BudgetExceeded) {
      err_ << "gvm: budget exceeded: " << v.diagnostic << "\n";
      code = kBudget;
    }
    out_ << "verdict=" << verdict_name(v.kind) << "\n";
    out_ << "states=" << v.stats.states << "\n";
    out_ << "edges=" << v.stats.edges << "\n";
    if (cfg_.stats) {
      out_ << "transitions=" << v.stats.transitions << "\n";
      out_ << "instructions=" << v.stats.instructions << "\n";
      out_ << "wall_seconds=" << v.stats.seconds << "\n";
    }
    return code;
  }

  int run() {
    FirstChoice oracle;
    auto opts = vm_options(cfg_);
    TransitionResult t = machine_->boot(oracle, opts);
    for (std::uint64_t n = 0;; ++n) {
      for (auto &s : t.traces)
        out_ << s << "\n";
      for (auto &f : t.faults)
        out_ << "fault " << machine_->describe_fault(f) << "\n";
      if (t.status == TransitionStatus::BudgetExceeded) {
        err_ << "gvm: " << t.diagnostic << "\n";
        return kBudget;
      }
      if (t.error()) {
        if (t.faults.empty())
          out_ << "error raised by the OS\n";
        dump_heap(t.successor);
        return kError;
      }
      if (t.status == TransitionStatus::Terminal) {
        dump_heap(t.successor);
        return kSafe;
      }
      if (n >= cfg_.max_transitions) {
        err_ << "gvm: no terminal state after " << n << " transitions\n";
        return kBudget;
      }
      Snapshot s = std::move(t.successor);
      t = machine_->run(s, oracle, opts);
    }
  }

  int replay() {
    std::string path = cfg_.cex.empty() ? cfg_.inputs.front() + ".cex" : cfg_.cex;
    auto text = read_file(path);
    if (!text) {
      err_ << "gvm: cannot read '" << path << "'\n";
      return kError;
    }
    std::string why;
    auto c = parse_counterexample(*text, &why);
    if (!c) {
      err_ << "gvm: " << path << ": " << why << "\n";
      return kError;
    }
    auto r = gvm::replay(*machine_, *c, vm_options(cfg_), cfg_.verbose);
    for (auto &l : r.transcript)
      out_ << l << "\n";
    (r.ok ? out_ : err_) << r.message << "\n";
    if (r.ok && cfg_.dump_heap)
      out_ << heap_dot(r.final_state);
    return r.ok ? kSafe : kError;
  }

  int dump() {
    std::string dot;
    if (cfg_.state_space) {
      ExploreOptions eo;
      eo.vm = vm_options(cfg_);
      eo.symmetry = !cfg_.no_symmetry;
      eo.max_states = cfg_.max_states;
      eo.record_graph = true;
      dot = state_space_dot(gvm::verify(*machine_, eo));
    } else {
      FirstChoice oracle;
      auto t = machine_->boot(oracle, vm_options(cfg_));
      dot = heap_dot(t.successor);
    }
    if (cfg_.dot.empty()) {
      out_ << dot;
    } else if (!write_file(cfg_.dot, dot)) {
      err_ << "gvm: cannot write '" << cfg_.dot << "'\n";
      return kError;
    }
    return kSafe;
  }

private:
  int report_error(const Verdict &v) {
    auto &c = *v.cex;
    out_ << "error found after " << c.edges.size() << " transitions: " << c.error << "\n";
    for (std::size_t i = 0; i < c.edges.size(); ++i) {
      auto &e = c.edges[i];
      out_ << (i == 0 ? "boot" : "step " + std::to_string(i));
      if (!e.choices.empty()) {
        out_ << " choose";
        for (auto x : e.choices)
          out_ << " " << x;
      }
      out_ << "\n";
      for (auto &t : e.traces)
        out_ << "  trace: " << t << "\n";
      for (auto &f : e.faults)
        out_ << "  fault: " << machine_->describe_fault(f) << "\n";
    }
    std::string path = cfg_.inputs.front() + ".cex";
    if (!write_file(path, write_counterexample(c))) {
      err_ << "gvm: cannot write '" << path << "'\n";
      return kError;
    }
    out_ << "counterexample written to " << path << "\n";
    auto r = gvm::replay(*machine_, c, vm_options(cfg_));
    (r.ok ? out_ : err_) << r.message << "\n";
    if (cfg_.dump_heap)
      out_ << heap_dot(v.error_state);
    return kError;
  }

  void dump_heap(const Snapshot &s) {
    if (cfg_.dump_heap)
      out_ << heap_dot(s);
  }

  const RunConfig &cfg_;
  std::ostream &out_, &err_;
  std::optional<Machine> machine_;
};

void add_common(CLI::App &sub, RunConfig &c) {
  sub.add_option("inputs", c.inputs, "GIR source files")->required()->check(CLI::ExistingFile);
  sub.add_flag("--no-tau-cfl", c.no_tau_cfl, "fire every interrupt_cfl");
  sub.add_flag("--no-tau-mem", c.no_tau_mem, "fire every interrupt_mem");
  sub.add_option("--step-budget", c.step_budget, "instructions per transition")
      ->check(CLI::PositiveNumber);
  sub.add_flag("--malloc-can-fail", c.malloc_can_fail, "let malloc return null");
  sub.add_flag("--dump-heap", c.dump_heap, "print the final heap as DOT");
  sub.add_option("--prelude", c.prelude, "directory of OS prelude .gir files")
      ->check(CLI::ExistingDirectory);
}

void add_search(CLI::App &sub, RunConfig &c) {
  sub.add_flag("--no-symmetry", c.no_symmetry, "compare states without heap renumbering");
  sub.add_option("--max-states", c.max_states, "state limit")->check(CLI::PositiveNumber);
}

} // namespace

int main(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
  RunConfig cfg;
  CLI::App app{"gvm: model checker for GIR programs"};
  app.require_subcommand(1);

  auto *verify = app.add_subcommand("verify", "explore all executions");
  add_common(*verify, cfg);
  add_search(*verify, cfg);
  verify->add_option("--search", cfg.search, "bfs or dfs")
      ->check(CLI::IsMember({"bfs", "dfs"}));
  verify->add_option("--dot", cfg.dot, "write the state space as DOT");
  verify->add_flag("--stats", cfg.stats, "print statistics");
  verify->add_option("--workers", cfg.workers, "parallel expansion threads")
      ->check(CLI::Range(1u, 256u));

  auto *run = app.add_subcommand("run", "execute once, every choice 0");
  add_common(*run, cfg);
  run->add_option("--max-transitions", cfg.max_transitions, "give up after this many")
      ->check(CLI::PositiveNumber);

  auto *replay = app.add_subcommand("replay", "re-execute a counterexample");
  add_common(*replay, cfg);
  replay->add_option("--cex", cfg.cex, "counterexample file (default <input>.cex)");
  replay->add_flag("-v,--verbose", cfg.verbose, "print per-edge traces");

  auto *dump = app.add_subcommand("dump", "print the boot heap or the state space as DOT");
  add_common(*dump, cfg);
  add_search(*dump, cfg);
  dump->add_option("--dot", cfg.dot, "output path (default stdout)");
  dump->add_flag("--state-space", cfg.state_space, "dump the explored state space");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
    if (cfg.search == "dfs" && cfg.workers > 1)
      throw CLI::ValidationError("--workers", "parallel expansion needs --search bfs");
  } catch (const CLI::ParseError &e) {
    int rc = app.exit(e, out, err);
    return rc == 0 ? kSafe : kUsage;
  }

  Session s(cfg, out, err);
  if (!s.load())
    return kError;
  if (*verify)
    return s.verify();
  if (*run)
    return s.run();
  if (*replay)
    return s.replay();
  return s.dump();
}

} // namespace gvm::cli
