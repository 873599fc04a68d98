#include "gvm/heap.hpp"

#include <sstream>
#include <unordered_map>

namespace gvm {

namespace {

constexpr std::uint32_t kDanglingId = Pointer::kInvalidId - 1;

void put32(std::string &out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i)
    out.push_back(char(v >> (8 * i)));
}

void put64(std::string &out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i)
    out.push_back(char(v >> (8 * i)));
}

void put_bitmap(std::string &out, const std::vector<std::uint8_t> &flags) {
  std::uint8_t acc = 0;
  for (std::size_t i = 0; i < flags.size(); ++i) {
    if (flags[i])
      acc |= std::uint8_t(1u << (i % 8));
    if (i % 8 == 7) {
      out.push_back(char(acc));
      acc = 0;
    }
  }
  if (flags.size() % 8)
    out.push_back(char(acc));
}

template <class Renumber>
void put_object(std::string &out, const HeapObject &o, Renumber &&renumber) {
  put32(out, o.size());
  std::size_t at = out.size();
  out.append(reinterpret_cast<const char *>(o.bytes.data()), o.bytes.size());
  for (std::uint32_t s = 0; s < o.ptrmap.size(); ++s) {
    if (!o.ptrmap[s] || s * 8 + 8 > o.size())
      continue;
    Pointer p = o.pointer_at(s * 8);
    if (!p.is_heap() || p.id == 0 || !p.valid_id())
      continue;
    p.id = renumber(p.id);
    std::uint64_t raw = p.raw();
    for (int i = 0; i < 8; ++i)
      out[at + s * 8 + i] = char(raw >> (8 * i));
  }
  put_bitmap(out, o.def);
  put_bitmap(out, o.ptrmap);
  out.push_back(char(o.shared ? 1 : 0));
}

} // namespace

std::vector<std::uint32_t> canonical_order(const Snapshot &s) {
  std::unordered_map<std::uint32_t, const HeapObject *> by_id;
  by_id.reserve(s.objects.size());
  for (auto &[id, o] : s.objects)
    by_id.emplace(id, o.get());

  std::vector<std::uint32_t> order;
  std::unordered_map<std::uint32_t, bool> visited;
  // Explicit stack of (object, remaining edges) to get recursive pre-order
  // without recursion.
  struct Frame {
    std::vector<std::pair<std::uint32_t, Pointer>> edges;
    std::size_t next = 0;
  };
  auto visit = [&](std::uint32_t start) {
    auto it = by_id.find(start);
    if (it == by_id.end() || visited[start])
      return;
    visited[start] = true;
    order.push_back(start);
    std::vector<Frame> stack;
    stack.push_back({it->second->edges()});
    while (!stack.empty()) {
      auto &top = stack.back();
      if (top.next == top.edges.size()) {
        stack.pop_back();
        continue;
      }
      std::uint32_t target = top.edges[top.next++].second.id;
      auto t = by_id.find(target);
      if (t == by_id.end() || visited[target])
        continue;
      visited[target] = true;
      order.push_back(target);
      stack.push_back({t->second->edges()});
    }
  };
  for (auto r : {s.root, s.globals, s.constants})
    if (r.is_heap() && r.id != 0)
      visit(r.id);
  return order;
}

CanonicalKey canonicalize(const Snapshot &s) {
  auto order = canonical_order(s);
  std::unordered_map<std::uint32_t, std::uint32_t> index;
  index.reserve(order.size());
  for (std::size_t i = 0; i < order.size(); ++i)
    index.emplace(order[i], std::uint32_t(i + 1));
  auto renumber = [&](std::uint32_t id) {
    auto it = index.find(id);
    return it == index.end() ? kDanglingId : it->second;
  };

  CanonicalKey key = "GVM1";
  for (auto id : order)
    put_object(key, *s.find(id), renumber);
  put64(key, s.fault_handler.raw());
  key.push_back(char(s.flags));
  return key;
}

CanonicalKey raw_key(const Snapshot &s) {
  CanonicalKey key = "GVM1";
  put32(key, s.root.id);
  put32(key, s.globals.id);
  put32(key, s.constants.id);
  for (auto &[id, o] : s.objects) {
    put32(key, id);
    put_object(key, *o, [](std::uint32_t v) { return v; });
  }
  put64(key, s.fault_handler.raw());
  key.push_back(char(s.flags));
  return key;
}

std::string heap_dot(const Snapshot &s) {
  std::ostringstream os;
  os << "digraph heap {\n  node [shape=record];\n";
  auto role = [&](std::uint32_t id) -> const char * {
    if (id == s.root.id && s.root.is_heap())
      return "sched";
    if (id == s.globals.id)
      return "globals";
    if (id == s.constants.id)
      return "constants";
    return "";
  };
  for (auto &[id, o] : s.objects) {
    os << "  n" << id << " [label=\"#" << id;
    if (*role(id))
      os << " " << role(id);
    os << "|size " << o->size();
    if (o->shared)
      os << "|shared";
    os << "\"];\n";
  }
  for (auto &[id, o] : s.objects)
    for (auto &[off, p] : o->edges())
      os << "  n" << id << " -> n" << p.id << " [label=\"+" << off << "\"];\n";
  os << "}\n";
  return os.str();
}

} // namespace gvm
