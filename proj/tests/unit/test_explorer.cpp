#include "gvm/explorer.hpp"

#include "../oracles/interleavings.hpp"
#include "../support.hpp"

#include <doctest.h>

#include <algorithm>

using namespace gvm;

namespace {

const char *kCorpus[] = {"race_counter.gir",   "atomic_counter.gir", "mutex_counter.gir",
                         "deadlock_abba.gir",  "lock_order.gir",     "race_shared_arg.gir",
                         "atomic_shared_arg.gir", "race_three.gir",  "mutex_loop.gir",
                         "race_loop.gir"};

// `threads` workers each increment `counter` once (atomically or not);
// main then asserts counter != k. The error is reachable exactly when k
// is a possible final value.
std::string counter_program(int threads, bool atomic, int k) {
  std::string s = "extern thread_create, thread_join, assert, atomic_begin, atomic_end\n"
                  "global counter 8 = 0000000000000000\n"
                  "fn worker(1) regs 4 {\n";
  if (atomic)
    s += "  %3 = call atomic_begin()\n";
  s += "  %1 = load.8 @counter\n  %2 = add %1, 1\n  store.8 @counter, %2\n";
  if (atomic)
    s += "  call atomic_end(%3)\n";
  s += "  ret 0\n}\nfn main(0) regs 8 {\n";
  for (int i = 0; i < threads; ++i)
    s += "  %" + std::to_string(i) + " = call thread_create(&worker, 0)\n";
  for (int i = 0; i < threads; ++i)
    s += "  call thread_join(%" + std::to_string(i) + ")\n";
  s += "  %6 = load.8 @counter\n  %7 = icmp.ne %6, " + std::to_string(k) +
       "\n  call assert(%7)\n  ret\n}\n";
  return s;
}

VmOptions unreduced() {
  VmOptions o;
  o.tau_cfl = o.tau_mem = false;
  return o;
}

} // namespace

TEST_CASE("successors enumerate the choice tree in lexicographic order") {
  std::string src = "fn __boot(1) regs 4 {\nentry:\n  %1 = hc.choose 2\n  br %1, more, done\n"
                    "more:\n  %2 = hc.choose 2\n  jump done\ndone:\n  ret\n}\n"
                    "fn scheduler() {\n  ret\n}\n";
  Machine m(gvmtest::bare_program(src));
  ExpansionCost cost;
  auto succ = boot_successors(m, {}, &cost);
  std::vector<std::vector<std::uint64_t>> got;
  for (auto &s : succ)
    got.push_back(s.edge.choices);
  CHECK(got == std::vector<std::vector<std::uint64_t>>{{0}, {1, 0}, {1, 1}});
  CHECK(cost.transitions == 3);
}

TEST_CASE("reachable outcomes match exhaustive interleaving") {
  struct Shape {
    int threads;
    bool atomic;
  };
  for (auto shape : {Shape{2, false}, Shape{3, false}, Shape{2, true}, Shape{3, true}}) {
    std::vector<oracle::Thread> ts(std::size_t(shape.threads),
                                   shape.atomic ? oracle::atomic_increment("c")
                                                : oracle::increment("c"));
    std::set<std::int64_t> expected;
    for (auto &out : oracle::all_outcomes(ts, {{"c", 0}}))
      expected.insert(out.at("c"));
    for (int k = 0; k <= shape.threads + 1; ++k) {
      CAPTURE(shape.threads);
      CAPTURE(shape.atomic);
      CAPTURE(k);
      auto m = gvmtest::machine(counter_program(shape.threads, shape.atomic, k));
      auto v = verify(m);
      CHECK((v.kind == VerdictKind::ErrorFound) == (expected.count(k) == 1));
      ExploreOptions full;
      full.vm = unreduced();
      CHECK(verify(m, full).kind == v.kind);
    }
  }
}

TEST_CASE("the lost update has the expected interleaving count") {
  std::uint64_t n = 0;
  auto outs = oracle::all_outcomes({oracle::increment("c"), oracle::increment("c")}, {{"c", 0}}, &n);
  CHECK(n == 20);
  CHECK(outs.size() == 2);
}

TEST_CASE("interrupt elision keeps verdicts and error states") {
  for (auto rel : kCorpus) {
    CAPTURE(rel);
    auto m = gvmtest::corpus_machine(rel);
    ExploreOptions reduced, full;
    reduced.stop_at_error = full.stop_at_error = false;
    full.vm = unreduced();
    auto a = verify(m, reduced), b = verify(m, full);
    CHECK(a.kind == b.kind);
    CHECK(a.stats.states <= b.stats.states);
    CHECK(std::includes(b.error_states.begin(), b.error_states.end(), a.error_states.begin(),
                        a.error_states.end()));
    CHECK(a.error_states.empty() == b.error_states.empty());
  }
  auto m = gvmtest::corpus_machine("race_counter.gir");
  ExploreOptions full;
  full.vm = unreduced();
  CHECK(verify(m).stats.states < verify(m, full).stats.states);
}

TEST_CASE("symmetry reduction merges renumbered heaps") {
  auto m = gvmtest::corpus_machine("symmetry.gir");
  ExploreOptions raw;
  raw.symmetry = false;
  auto a = verify(m), b = verify(m, raw);
  CHECK(a.kind == VerdictKind::Safe);
  CHECK(b.kind == VerdictKind::Safe);
  CHECK(a.stats.states == 3);
  CHECK(b.stats.states == 5);
}

TEST_CASE("a deterministic program visits the states of its single run") {
  auto src = "extern assert\nglobal g 8 = 0000000000000000\n"
             "fn main(0) regs 3 {\nentry:\n  %0 = add 0, 0\n  jump head\n"
             "head:\n  %1 = icmp.ult %0, 4\n  br %1, body, out\n"
             "body:\n  %2 = load.8 @g\n  %2 = add %2, 1\n  store.8 @g, %2\n"
             "  %0 = add %0, 1\n  jump head\n"
             "out:\n  %2 = load.8 @g\n  %2 = icmp.eq %2, 4\n  call assert(%2)\n  ret\n}\n";
  auto m = gvmtest::machine(src);
  auto run = gvmtest::smoke_run(m);
  REQUIRE(run.terminal());
  std::size_t fired = 0;
  for (auto &t : run.steps)
    for (auto &i : t.interrupts)
      fired += i.fired;
  CHECK(fired > 0);
  auto v = verify(m);
  CHECK(v.kind == VerdictKind::Safe);
  // The initial state, one state per interrupt and the exited state.
  CHECK(v.stats.states == fired + 2);
  CHECK(v.stats.states == run.steps.size() - 1);
}

TEST_CASE("terminal edges add no state") {
  auto v = verify(gvmtest::corpus_machine("hello.gir"));
  CHECK(v.kind == VerdictKind::Safe);
  CHECK(v.stats.states == 2);
  CHECK(v.stats.edges == 3);
  CHECK(v.stats.expanded == 2);
}

TEST_CASE("every non-error state is expanded") {
  for (auto rel : kCorpus) {
    CAPTURE(rel);
    auto m = gvmtest::corpus_machine(rel);
    ExploreOptions all;
    all.stop_at_error = false;
    auto v = verify(m, all);
    CHECK(v.stats.expanded + v.error_states.size() == v.stats.states);
  }
}

TEST_CASE("counterexamples replay") {
  for (auto rel : {"race_counter.gir", "deadlock_abba.gir", "race_shared_arg.gir",
                   "race_three.gir", "race_loop.gir"}) {
    CAPTURE(rel);
    auto m = gvmtest::corpus_machine(rel);
    auto v = verify(m);
    REQUIRE(v.kind == VerdictKind::ErrorFound);
    REQUIRE(v.cex);
    CHECK(v.cex->final_key == state_hash(v.error_state));
    auto r = replay(m, *v.cex);
    CHECK(r.ok);
    CHECK(r.message.find("replay ok") == 0);

    auto text = write_counterexample(*v.cex);
    std::string why;
    auto back = parse_counterexample(text, &why);
    REQUIRE(back);
    CHECK(write_counterexample(*back) == text);
    CHECK(replay(m, *back).ok);
  }
}

TEST_CASE("breadth-first counterexamples are shortest") {
  auto m = gvmtest::corpus_machine("race_three.gir");
  auto bfs = verify(m);
  ExploreOptions d;
  d.search = SearchOrder::DFS;
  auto dfs = verify(m, d);
  REQUIRE(bfs.cex);
  REQUIRE(dfs.cex);
  CHECK(bfs.cex->edges.size() <= dfs.cex->edges.size());
  CHECK(replay(m, *dfs.cex).ok);
  CHECK(dfs.kind == VerdictKind::ErrorFound);
}

TEST_CASE("breadth-first and depth-first agree on safe programs") {
  for (auto rel : {"atomic_counter.gir", "mutex_counter.gir", "lock_order.gir", "mutex_loop.gir"}) {
    CAPTURE(rel);
    auto m = gvmtest::corpus_machine(rel);
    ExploreOptions d;
    d.search = SearchOrder::DFS;
    auto a = verify(m), b = verify(m, d);
    CHECK(a.kind == VerdictKind::Safe);
    CHECK(b.kind == VerdictKind::Safe);
    CHECK(a.stats.states == b.stats.states);
    CHECK(a.stats.edges == b.stats.edges);
  }
}

TEST_CASE("tampered counterexamples diverge") {
  auto m = gvmtest::corpus_machine("race_counter.gir");
  auto v = verify(m);
  REQUIRE(v.cex);

  auto wrong_hash = *v.cex;
  wrong_hash.program_hash = "0000000000000000";
  auto r = replay(m, wrong_hash);
  CHECK(!r.ok);
  CHECK(r.message.find("program-hash mismatch") != std::string::npos);

  auto extra = *v.cex;
  extra.edges.front().choices.push_back(0);
  CHECK(!replay(m, extra).ok);

  auto flipped = *v.cex;
  bool changed = false;
  for (auto &e : flipped.edges)
    for (std::size_t i = 0; i < e.choices.size() && !changed; ++i)
      if (e.bounds.empty() || e.bounds[i] > 1) {
        e.choices[i] = e.choices[i] == 0 ? 1 : 0;
        changed = true;
      }
  REQUIRE(changed);
  CHECK(!replay(m, flipped).ok);

  auto key = *v.cex;
  key.final_key = "0123456789abcdef";
  auto rk = replay(m, key);
  CHECK(!rk.ok);
  CHECK(rk.message.find("final key") != std::string::npos);

  auto kind = *v.cex;
  kind.error = "DivisionByZero";
  CHECK(!replay(m, kind).ok);

  auto truncated = *v.cex;
  truncated.edges.pop_back();
  CHECK(!replay(m, truncated).ok);

  auto traced = *v.cex;
  traced.edges.back().traces.push_back("nope");
  CHECK(!replay(m, traced).ok);
}

TEST_CASE("counterexample parse errors") {
  std::string why;
  CHECK(!parse_counterexample("", &why));
  CHECK(!parse_counterexample("GVMCEX 2\n", &why));
  CHECK(why.find("version") != std::string::npos);
  CHECK(!parse_counterexample("GVMCEX 1\nprogram-hash 1\nchoose 1\n", &why));
  CHECK(why.find("line 3") == 0);
  CHECK(!parse_counterexample("GVMCEX 1\nprogram-hash 1\nedge\nfrob\n", &why));
  CHECK(!parse_counterexample("GVMCEX 1\nprogram-hash 1\nedge\n", &why));
  CHECK(why.find("error") != std::string::npos);
  CHECK(!parse_counterexample("GVMCEX 1\nprogram-hash 1\nedge\nint 12 maybe\nerror os\n", &why));
  auto ok = parse_counterexample(
      "GVMCEX 1\nprogram-hash ab\nedge\nchoose 2\nint c000000100000004 fired\n"
      "trace \"a\\\"b\\n\\x01\"\nfinal-key cd\nerror os\n",
      &why);
  REQUIRE(ok);
  CHECK(ok->edges[0].choices == std::vector<std::uint64_t>{2});
  CHECK(ok->edges[0].interrupts[0].pc == Pointer::code(1, 4));
  CHECK(ok->edges[0].interrupts[0].fired);
  CHECK(ok->edges[0].traces[0] == "a\"b\n\x01");
}

TEST_CASE("verbose replay prints each edge") {
  auto m = gvmtest::corpus_machine("race_counter.gir");
  auto v = verify(m);
  REQUIRE(v.cex);
  auto r = replay(m, *v.cex, {}, true);
  REQUIRE(r.ok);
  CHECK(r.transcript.front().rfind("edge 0", 0) == 0);
  CHECK(r.transcript.back() == "error os");
  CHECK(std::count(r.transcript.begin(), r.transcript.end(), "  trace \"assertion failed\"") == 1);
}

TEST_CASE("parallel expansion is deterministic") {
  for (auto rel : {"race_three.gir", "mutex_loop.gir", "race_loop.gir"}) {
    CAPTURE(rel);
    auto m = gvmtest::corpus_machine(rel);
    auto one = verify(m);
    for (unsigned w : {2u, 4u}) {
      ExploreOptions par;
      par.workers = w;
      auto v = verify(m, par);
      CHECK(v.kind == one.kind);
      CHECK(v.stats.states == one.stats.states);
      CHECK(v.stats.edges == one.stats.edges);
      CHECK(v.stats.transitions == one.stats.transitions);
      if (one.cex)
        CHECK(write_counterexample(*v.cex) == write_counterexample(*one.cex));
    }
  }
}

TEST_CASE("state limits stop the search") {
  auto m = gvmtest::corpus_machine("mutex_loop.gir");
  ExploreOptions small;
  small.max_states = 3;
  auto v = verify(m, small);
  CHECK(v.kind == VerdictKind::BudgetExceeded);
  CHECK(v.diagnostic.find("state limit") != std::string::npos);

  ExploreOptions steps;
  steps.vm.step_budget = 10;
  auto s = verify(m, steps);
  CHECK(s.kind == VerdictKind::BudgetExceeded);
  CHECK(s.diagnostic.find("step budget") != std::string::npos);
}

TEST_CASE("state graph export") {
  auto m = gvmtest::corpus_machine("hello.gir");
  ExploreOptions g;
  g.record_graph = true;
  auto v = verify(m, g);
  REQUIRE(v.graph.size() == v.stats.edges);
  CHECK(v.graph.front().from == -1);
  CHECK(v.graph.back().to == -1);
  auto dot = state_space_dot(v);
  CHECK(dot.find("init -> s0") != std::string::npos);
  CHECK(dot.find("s1 -> end") != std::string::npos);
}

TEST_CASE("program hashes follow the program text") {
  auto a = gvmtest::build_user(gvmtest::corpus("race_counter.gir")).program;
  auto b = gvmtest::build_user(gvmtest::corpus("race_counter.gir")).program;
  auto c = gvmtest::build_user(gvmtest::corpus("atomic_counter.gir")).program;
  CHECK(program_hash(a) == program_hash(b));
  CHECK(program_hash(a) != program_hash(c));
  CHECK(program_hash(a).size() == 16);
}
