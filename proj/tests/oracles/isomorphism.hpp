#pragma once

// Brute-force isomorphism of two heap snapshots, for checking the
// canonical form. Objects are the ones reachable from the three roots;
// two snapshots are isomorphic when some bijection between those objects
// maps roots to roots and every object to one with the same size, bytes,
// definedness, pointer map and shared flag, where the id inside each
// pointer slot is compared through the bijection. Pointers to objects
// outside the snapshot all count as the same "dangling" target.

#include "gvm/heap.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <vector>

namespace oracle {

inline std::vector<std::uint32_t> reachable(const gvm::Snapshot &s) {
  std::set<std::uint32_t> seen;
  std::vector<std::uint32_t> work;
  for (auto r : {s.root, s.globals, s.constants})
    if (r.is_heap() && r.id != 0 && s.find(r.id))
      work.push_back(r.id);
  while (!work.empty()) {
    auto id = work.back();
    work.pop_back();
    if (!seen.insert(id).second)
      continue;
    const gvm::HeapObject *o = s.find(id);
    for (std::uint32_t slot = 0; slot * 8 + 8 <= o->size(); ++slot) {
      if (!o->ptrmap[slot])
        continue;
      auto p = o->pointer_at(slot * 8);
      if (p.is_heap() && p.id != 0 && p.valid_id() && s.find(p.id))
        work.push_back(p.id);
    }
  }
  return {seen.begin(), seen.end()};
}

inline bool isomorphic(const gvm::Snapshot &a, const gvm::Snapshot &b) {
  if (a.flags != b.flags || a.fault_handler.raw() != b.fault_handler.raw())
    return false;
  auto ra = reachable(a), rb = reachable(b);
  if (ra.size() != rb.size())
    return false;

  std::vector<std::size_t> perm(rb.size());
  for (std::size_t i = 0; i < perm.size(); ++i)
    perm[i] = i;

  auto present = [](const gvm::Snapshot &s, const std::vector<std::uint32_t> &r,
                    std::uint32_t id) { return std::binary_search(r.begin(), r.end(), id); };

  do {
    std::map<std::uint32_t, std::uint32_t> f;
    for (std::size_t i = 0; i < ra.size(); ++i)
      f[ra[i]] = rb[perm[i]];
    auto maps = [&](gvm::Pointer pa, gvm::Pointer pb) {
      bool heap_a = pa.is_heap() && pa.id != 0 && pa.valid_id();
      bool heap_b = pb.is_heap() && pb.id != 0 && pb.valid_id();
      if (heap_a != heap_b)
        return pa.raw() == pb.raw();
      if (!heap_a)
        return pa.raw() == pb.raw();
      if (pa.offset != pb.offset)
        return false;
      bool in_a = present(a, ra, pa.id), in_b = present(b, rb, pb.id);
      if (in_a != in_b)
        return false;
      return in_a ? f.at(pa.id) == pb.id : true;
    };
    bool ok = true;
    for (auto [ptr_a, ptr_b] : {std::pair{a.root, b.root}, std::pair{a.globals, b.globals},
                                std::pair{a.constants, b.constants}})
      ok = ok && maps(ptr_a, ptr_b);
    for (std::size_t i = 0; ok && i < ra.size(); ++i) {
      const gvm::HeapObject *oa = a.find(ra[i]);
      const gvm::HeapObject *ob = b.find(f[ra[i]]);
      if (oa->size() != ob->size() || oa->def != ob->def || oa->ptrmap != ob->ptrmap ||
          oa->shared != ob->shared) {
        ok = false;
        break;
      }
      std::vector<bool> in_slot(oa->size(), false);
      for (std::uint32_t slot = 0; slot * 8 + 8 <= oa->size(); ++slot) {
        if (!oa->ptrmap[slot])
          continue;
        for (int k = 0; k < 8; ++k)
          in_slot[slot * 8 + k] = true;
        if (!maps(oa->pointer_at(slot * 8), ob->pointer_at(slot * 8))) {
          ok = false;
          break;
        }
      }
      for (std::uint32_t k = 0; ok && k < oa->size(); ++k)
        if (!in_slot[k] && oa->bytes[k] != ob->bytes[k])
          ok = false;
    }
    if (ok)
      return true;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return false;
}

} // namespace oracle
