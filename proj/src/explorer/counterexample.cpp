#include "gvm/explorer.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <sstream>

namespace gvm {

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string program_hash(const gir::Program &p) { return hex64(fnv1a(gir::print(p))); }

std::string state_hash(const Snapshot &s) { return hex64(fnv1a(canonicalize(s))); }

namespace {

std::string quote(std::string_view s) {
  std::string out = "\"";
  for (unsigned char c : s) {
    if (c == '"' || c == '\\') {
      out += '\\';
      out += char(c);
    } else if (c == '\n') {
      out += "\\n";
    } else if (c < 0x20 || c >= 0x7f) {
      char buf[5];
      std::snprintf(buf, sizeof buf, "\\x%02x", c);
      out += buf;
    } else {
      out += char(c);
    }
  }
  return out + "\"";
}

std::optional<std::string> unquote(std::string_view s) {
  if (s.size() < 2 || s.front() != '"' || s.back() != '"')
    return std::nullopt;
  s = s.substr(1, s.size() - 2);
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\\') {
      out += s[i];
      continue;
    }
    if (++i >= s.size())
      return std::nullopt;
    switch (s[i]) {
    case 'n': out += '\n'; break;
    case 'x': {
      if (i + 2 >= s.size())
        return std::nullopt;
      unsigned v = 0;
      if (std::sscanf(std::string(s.substr(i + 1, 2)).c_str(), "%2x", &v) != 1)
        return std::nullopt;
      out += char(v);
      i += 2;
      break;
    }
    default: out += s[i]; break;
    }
  }
  return out;
}

} // namespace

// Interrupt pcs are written as code pointers in hex: they are only
// meaningful together with the program hash.
std::string write_counterexample(const Counterexample &c) {
  std::ostringstream os;
  os << "GVMCEX 1\n";
  os << "program-hash " << c.program_hash << "\n";
  for (auto &e : c.edges) {
    os << "edge\n";
    for (auto v : e.choices)
      os << "choose " << v << "\n";
    for (auto &i : e.interrupts)
      os << "int " << hex64(i.pc.raw()) << " " << (i.fired ? "fired" : "skip") << "\n";
    for (auto &t : e.traces)
      os << "trace " << quote(t) << "\n";
  }
  os << "final-key " << c.final_key << "\n";
  os << "error " << c.error << "\n";
  return os.str();
}

std::optional<Counterexample> parse_counterexample(std::string_view text, std::string *error) {
  auto fail = [&](int line, const std::string &msg) -> std::optional<Counterexample> {
    if (error)
      *error = "line " + std::to_string(line) + ": " + msg;
    return std::nullopt;
  };
  Counterexample c;
  std::istringstream in{std::string(text)};
  std::string line;
  int n = 0;
  bool saw_error = false;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    if (line.empty())
      continue;
    auto sp = line.find(' ');
    std::string word = line.substr(0, sp);
    std::string rest = sp == std::string::npos ? "" : line.substr(sp + 1);
    if (n == 1) {
      if (word != "GVMCEX")
        return fail(n, "not a counterexample file");
      if (rest != "1")
        return fail(n, "unsupported counterexample version '" + rest + "'");
      continue;
    }
    if (saw_error)
      return fail(n, "content after 'error' line");
    if (word == "program-hash") {
      c.program_hash = rest;
    } else if (word == "edge") {
      c.edges.emplace_back();
    } else if (word == "choose" || word == "int" || word == "trace") {
      if (c.edges.empty())
        return fail(n, "'" + word + "' before the first 'edge'");
      auto &e = c.edges.back();
      if (word == "choose") {
        char *end = nullptr;
        unsigned long long v = std::strtoull(rest.c_str(), &end, 10);
        if (rest.empty() || *end)
          return fail(n, "bad choice value");
        e.choices.push_back(v);
      } else if (word == "int") {
        auto sp2 = rest.find(' ');
        if (sp2 == std::string::npos)
          return fail(n, "expected 'int <pc> fired|skip'");
        std::string pc = rest.substr(0, sp2), what = rest.substr(sp2 + 1);
        char *end = nullptr;
        unsigned long long raw = std::strtoull(pc.c_str(), &end, 16);
        if (pc.empty() || *end || (what != "fired" && what != "skip"))
          return fail(n, "expected 'int <pc> fired|skip'");
        e.interrupts.push_back({Pointer::decode(raw), what == "fired"});
      } else {
        auto s = unquote(rest);
        if (!s)
          return fail(n, "bad quoted trace");
        e.traces.push_back(std::move(*s));
      }
    } else if (word == "final-key") {
      c.final_key = rest;
    } else if (word == "error") {
      c.error = rest;
      saw_error = true;
    } else {
      return fail(n, "unknown record '" + word + "'");
    }
  }
  if (n == 0)
    return fail(1, "empty file");
  if (c.program_hash.empty())
    return fail(n, "missing program-hash");
  if (c.edges.empty())
    return fail(n, "no edges");
  if (!saw_error)
    return fail(n, "missing 'error' line");
  return c;
}

namespace {

class ReplayOracle final : public TransitionOracle {
public:
  ReplayOracle(const Machine &m, const Edge &e) : m_(m), e_(e) {}

  std::optional<std::uint64_t> choose(std::uint64_t bound) override {
    if (ci_ >= e_.choices.size())
      return mismatch("transition asks for more choices than recorded");
    auto v = e_.choices[ci_++];
    if (v >= bound)
      return mismatch("recorded choice " + std::to_string(v) + " out of bound " +
                      std::to_string(bound));
    return v;
  }

  std::optional<bool> interrupt(Pointer pc, bool natural) override {
    (void)natural;
    if (ii_ >= e_.interrupts.size())
      return mismatch_b("unrecorded interrupt point at " + m_.describe_pc(pc));
    auto &r = e_.interrupts[ii_++];
    if (r.pc.raw() != pc.raw())
      return mismatch_b("interrupt point " + m_.describe_pc(pc) + " where the log has " +
                        m_.describe_pc(r.pc));
    return r.fired;
  }

  std::string leftover() const {
    if (!why_.empty())
      return why_;
    if (ci_ != e_.choices.size())
      return "unused recorded choices";
    if (ii_ != e_.interrupts.size())
      return "unused interrupt hints";
    return {};
  }

private:
  std::nullopt_t mismatch(std::string why) {
    why_ = std::move(why);
    return std::nullopt;
  }
  std::optional<bool> mismatch_b(std::string why) {
    why_ = std::move(why);
    return std::nullopt;
  }

  const Machine &m_;
  const Edge &e_;
  std::size_t ci_ = 0, ii_ = 0;
  std::string why_;
};

} // namespace

ReplayResult replay(const Machine &m, const Counterexample &c, const VmOptions &opts,
                    bool verbose) {
  ReplayResult r;
  auto diverge = [&](std::string msg) {
    r.ok = false;
    r.message = "replay diverged: " + msg;
    return r;
  };
  auto hash = program_hash(m.program());
  if (hash != c.program_hash)
    return diverge("program-hash mismatch (counterexample " + c.program_hash +
                   ", program " + hash + ")");

  Snapshot state;
  for (std::size_t i = 0; i < c.edges.size(); ++i) {
    auto &e = c.edges[i];
    ReplayOracle oracle(m, e);
    TransitionResult t = i == 0 ? m.boot(oracle, opts) : m.run(state, oracle, opts);
    std::string edge_name = "edge " + std::to_string(i);
    if (auto why = oracle.leftover(); !why.empty() || t.status == TransitionStatus::Diverged)
      return diverge(edge_name + ": " + (why.empty() ? t.diagnostic : why));
    if (t.status == TransitionStatus::BudgetExceeded)
      return diverge(edge_name + ": " + t.diagnostic);
    if (t.traces != e.traces)
      return diverge(edge_name + ": trace output differs from the recording");
    if (t.status == TransitionStatus::Terminal)
      return diverge(edge_name + ": reached a terminal state");
    bool last = i + 1 == c.edges.size();
    if (t.error() != last)
      return diverge(edge_name + (last ? ": final edge does not raise Error"
                                       : ": Error raised before the final edge"));
    if (verbose) {
      std::string line = edge_name;
      if (!t.choices.empty()) {
        line += " choices";
        for (auto v : t.choices)
          line += " " + std::to_string(v);
      }
      std::size_t fired = 0;
      for (auto &x : t.interrupts)
        fired += x.fired;
      if (fired)
        line += " (interrupted)";
      r.transcript.push_back(line);
      for (auto &tr : t.traces)
        r.transcript.push_back("  trace " + quote(tr));
    }
    if (last) {
      std::string kind = t.faults.empty() ? "os" : std::string(fault_name(t.faults.back().kind));
      for (auto &f : t.faults)
        r.transcript.push_back("fault " + m.describe_fault(f));
      if (kind != c.error)
        return diverge("error kind " + kind + " where the recording has " + c.error);
      auto key = state_hash(t.successor);
      if (key != c.final_key)
        return diverge("final key " + key + " where the recording has " + c.final_key);
      r.transcript.push_back("error " + kind);
      r.final_state = std::move(t.successor);
    }
    state = std::move(t.successor);
  }
  r.ok = true;
  r.message = "replay ok: final key " + c.final_key;
  return r;
}

std::string state_space_dot(const Verdict &v) {
  std::ostringstream os;
  os << "digraph states {\n  init [shape=point];\n  end [shape=doublecircle,label=\"\"];\n";
  std::int64_t max_id = -1;
  for (auto &g : v.graph)
    max_id = std::max({max_id, g.from, g.to});
  for (std::int64_t i = 0; i <= max_id; ++i)
    os << "  s" << i << " [label=\"" << i << "\"];\n";
  for (auto &g : v.graph) {
    os << "  " << (g.from < 0 ? std::string("init") : "s" + std::to_string(g.from)) << " -> "
       << (g.to < 0 ? std::string("end") : "s" + std::to_string(g.to));
    std::string label;
    for (auto c : g.edge.choices)
      label += (label.empty() ? "" : ",") + std::to_string(c);
    os << " [label=\"" << label << "\"";
    if (g.edge.error())
      os << ",color=red";
    os << "];\n";
  }
  os << "}\n";
  return os.str();
}

} // namespace gvm
