#include "gvm/heap.hpp"

#include "../oracles/isomorphism.hpp"
#include "../oracles/random_heap.hpp"

#include <doctest.h>

using namespace gvm;

TEST_CASE("pointer encoding") {
  Pointer p{PtrTag::Global, 5, 12};
  CHECK(p.raw() == (std::uint64_t(1) << 62 | std::uint64_t(5) << 32 | 12));
  CHECK(Pointer::decode(p.raw()) == p);
  CHECK(Pointer::heap(0).is_null());
  CHECK(!Pointer{PtrTag::Constant, 0, 0}.is_null());
  for (auto tag : {PtrTag::Heap, PtrTag::Global, PtrTag::Constant, PtrTag::Code}) {
    Pointer q{tag, Pointer::kMaxId - 1, 0xffffffffu};
    CHECK(Pointer::decode(q.raw()) == q);
  }
}

TEST_CASE("offset overflow poisons the id") {
  auto p = Pointer::heap(7, 10);
  CHECK(p.advanced(-10).offset == 0);
  CHECK(p.advanced(-10).valid_id());
  CHECK(!p.advanced(-11).valid_id());
  CHECK(!Pointer::heap(7, 0xfffffff0u).advanced(0x20).valid_id());
  // Coming back into range does not heal it.
  CHECK(!p.advanced(-11).advanced(11).valid_id());
}

TEST_CASE("load and store round trip with definedness") {
  Heap h;
  auto p = h.make(16);
  auto r = h.read(p, 8);
  REQUIRE(r);
  CHECK(!r.value.defined);
  CHECK(h.write(p.advanced(4), 4, 0xdeadbeef, true, false) == FaultKind::None);
  auto w = h.read(p.advanced(4), 4);
  CHECK(w.value.bits == 0xdeadbeef);
  CHECK(w.value.defined);
  CHECK(!h.read(p, 8).value.defined); // bytes 0..3 still undefined
  CHECK(h.read(p.advanced(2), 2).value.defined == false);
  CHECK(h.read(p.advanced(6), 1).value.bits == 0xad); // little endian
}

TEST_CASE("pointer slots") {
  Heap h;
  auto a = h.make(16), b = h.make(8);
  CHECK(h.write(a.advanced(8), 8, b.raw(), true, true) == FaultKind::None);
  CHECK(h.read(a.advanced(8), 8).value.is_pointer);
  CHECK(h.object(a.id)->edges().size() == 1);
  // Unaligned pointer stores are plain bytes.
  CHECK(h.write(a.advanced(1), 8, b.raw(), true, true) == FaultKind::None);
  CHECK(!h.read(a.advanced(1), 8).value.is_pointer);
  CHECK(h.object(a.id)->edges().empty());
  // A partial overwrite clears the slot.
  h.write(a, 8, b.raw(), true, true);
  h.write(a.advanced(3), 1, 0, true, false);
  CHECK(!h.read(a, 8).value.is_pointer);
  // Undefined pointer values are not edges.
  h.write(a, 8, b.raw(), false, true);
  CHECK(!h.read(a, 8).value.is_pointer);
}

TEST_CASE("memory faults") {
  Heap h;
  auto p = h.make(8);
  CHECK(h.read(p.advanced(1), 8).fault == FaultKind::OutOfBounds);
  CHECK(h.read(p.advanced(8), 1).fault == FaultKind::OutOfBounds);
  CHECK(h.read(p.advanced(-1), 1).fault == FaultKind::OutOfBounds);
  CHECK(h.read(Pointer::heap(0), 1).fault == FaultKind::BadPointer);
  CHECK(h.read(Pointer::heap(99), 1).fault == FaultKind::BadPointer);
  CHECK(h.read(Pointer::code(0, 0), 1).fault == FaultKind::BadPointer);
  CHECK(h.free(p.advanced(4)) == FaultKind::InvalidFree);
  CHECK(h.free(Pointer::heap(0)) == FaultKind::InvalidFree);
  CHECK(h.free(Pointer::heap(99)) == FaultKind::InvalidFree);
  CHECK(h.free(p) == FaultKind::None);
  CHECK(h.read(p, 1).fault == FaultKind::UseAfterFree);
  CHECK(h.write(p, 1, 0, true, false) == FaultKind::UseAfterFree);
  CHECK(h.size(p).fault == FaultKind::UseAfterFree);
  CHECK(h.free(p) == FaultKind::DoubleFree);
}

TEST_CASE("freed objects stay freed across snapshots") {
  Heap h;
  auto root = h.make(8);
  auto child = h.make(8);
  h.write(root, 8, child.raw(), true, true);
  h.free(child);
  auto s = h.snapshot(root, {}, 0);
  CHECK(s.objects.size() == 1);
  auto g = Heap::restore(s);
  CHECK(g.read(child, 1).fault == FaultKind::UseAfterFree);
  CHECK(g.free(child) == FaultKind::DoubleFree);
  CHECK(g.make(1).id == child.id + 1);
}

TEST_CASE("resize keeps a prefix") {
  Heap h;
  auto p = h.make(16);
  h.write(p, 8, 42, true, false);
  h.write(p.advanced(8), 8, p.raw(), true, true);
  CHECK(h.resize(p, 12) == FaultKind::None);
  CHECK(h.size(p).value == 12);
  CHECK(h.read(p, 8).value.bits == 42);
  CHECK(h.object(p.id)->edges().empty());
  CHECK(h.resize(p, 32) == FaultKind::None);
  CHECK(!h.read(p.advanced(24), 8).value.defined);
  CHECK(h.resize(p.advanced(1), 8) == FaultKind::BadPointer);
}

TEST_CASE("restored heaps copy on write") {
  Heap h;
  auto p = h.make(8);
  h.write(p, 8, 1, true, false);
  auto s = h.snapshot(p, {}, 0);
  auto g = Heap::restore(s);
  g.write(p, 8, 2, true, false);
  CHECK(g.read(p, 8).value.bits == 2);
  CHECK(s.find(p.id)->bytes[0] == 1);
  CHECK(Heap::restore(s).read(p, 8).value.bits == 1);
}

TEST_CASE("slot objects") {
  Heap h;
  std::vector<std::uint8_t> init{1, 2, 3};
  auto g = h.make_slot_object({3, 16}, {&init, nullptr});
  auto c = h.make_slot_object({4}, {&init});
  h.set_globals(g);
  h.set_constants(c);
  Pointer g0{PtrTag::Global, 0, 0}, g1{PtrTag::Global, 1, 0};
  CHECK(h.read(g0.advanced(2), 1).value.bits == 3);
  CHECK(!h.read(g1, 8).value.defined);
  CHECK(h.read(g0, 4).fault == FaultKind::OutOfBounds);
  CHECK(h.read({PtrTag::Global, 2, 0}, 1).fault == FaultKind::BadPointer);
  CHECK(h.write(g1.advanced(8), 8, 5, true, false) == FaultKind::None);
  Pointer c0{PtrTag::Constant, 0, 0};
  CHECK(h.read(c0, 1).value.bits == 1);
  CHECK(!h.read(c0.advanced(3), 1).value.defined);
  CHECK(h.write(c0, 1, 0, true, false) == FaultKind::ReadOnly);
  auto s = h.read_string(g0);
  CHECK(s.value == "\x01\x02\x03");
}

TEST_CASE("sharing propagates along edges") {
  Heap h;
  auto a = h.make(8), b = h.make(8), c = h.make(8);
  h.write(b, 8, c.raw(), true, true);
  h.write(a, 8, b.raw(), true, true);
  h.mark_shared(a);
  CHECK(h.object(c.id)->shared);
  auto d = h.make(8);
  h.write(c, 8, d.raw(), true, true);
  CHECK(h.object(d.id)->shared);
}

TEST_CASE("snapshots hold reachable objects only") {
  Heap h;
  auto root = h.make(16);
  auto kept = h.make(4);
  h.make(4); // garbage
  h.write(root, 8, kept.raw(), true, true);
  auto s = h.snapshot(root, {}, 0);
  REQUIRE(s.objects.size() == 2);
  CHECK(s.objects[0].first == root.id);
  CHECK(s.objects[1].first == kept.id);
}

TEST_CASE("canonical form ignores allocation order") {
  auto build = [](bool swap) {
    Heap h;
    Pointer root, x, y;
    if (swap) {
      y = h.make(4);
      root = h.make(16);
      x = h.make(8);
    } else {
      root = h.make(16);
      x = h.make(8);
      y = h.make(4);
    }
    h.write(root, 8, x.raw(), true, true);
    h.write(root.advanced(8), 8, y.raw(), true, true);
    h.write(x, 8, 77, true, false);
    return h.snapshot(root, {}, 0);
  };
  auto a = build(false), b = build(true);
  CHECK(raw_key(a) != raw_key(b));
  CHECK(canonicalize(a) == canonicalize(b));
}

TEST_CASE("canonical form separates slot order") {
  Heap h;
  auto root = h.make(16), x = h.make(8), y = h.make(4);
  h.write(root, 8, x.raw(), true, true);
  h.write(root.advanced(8), 8, y.raw(), true, true);
  auto a = h.snapshot(root, {}, 0);
  h.write(root, 8, y.raw(), true, true);
  h.write(root.advanced(8), 8, x.raw(), true, true);
  auto b = h.snapshot(root, {}, 0);
  CHECK(canonicalize(a) != canonicalize(b));
}

TEST_CASE("canonical form includes flags and fault handler") {
  Heap h;
  auto root = h.make(8);
  auto base = h.snapshot(root, {}, 0);
  CHECK(canonicalize(base) != canonicalize(h.snapshot(root, {}, flag::Error)));
  CHECK(canonicalize(base) != canonicalize(h.snapshot(root, Pointer::code(1), 0)));
}

TEST_CASE("canonical form agrees with brute-force isomorphism") {
  oracle::Rng rng(7);
  int equal = 0, unequal = 0;
  for (int i = 0; i < 300; ++i) {
    auto a = oracle::random_snapshot(rng);
    auto b = i % 2 ? oracle::relabel(a, rng) : oracle::mutate(oracle::relabel(a, rng), rng);
    bool iso = oracle::isomorphic(a, b);
    CHECK(iso == (canonicalize(a) == canonicalize(b)));
    (iso ? equal : unequal)++;
  }
  CHECK(equal > 0);
  CHECK(unequal > 0);
}

TEST_CASE("fnv1a reference values") {
  CHECK(fnv1a("") == 0xcbf29ce484222325ull);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cull);
  CHECK(fnv1a("foobar") == 0x85944171f73967e8ull);
}

TEST_CASE("heap dot lists reachable objects") {
  Heap h;
  auto root = h.make(8), x = h.make(8);
  h.write(root, 8, x.raw(), true, true);
  auto dot = heap_dot(h.snapshot(root, {}, 0));
  CHECK(dot.find("digraph") != std::string::npos);
  CHECK(dot.find("->") != std::string::npos);
}
