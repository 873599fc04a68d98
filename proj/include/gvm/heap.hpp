#pragma once

#include "gvm/abi.hpp"
#include "gvm/pointer.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace gvm {

// A node of the memory graph. `def` holds one flag per byte, `ptrmap` one
// flag per aligned 8-byte slot; a set ptrmap slot always has all eight
// bytes defined and is an edge of the graph.
struct HeapObject {
  std::vector<std::uint8_t> bytes;
  std::vector<std::uint8_t> def;
  std::vector<std::uint8_t> ptrmap;
  bool valid = true;
  bool shared = false;

  explicit HeapObject(std::uint32_t size = 0)
      : bytes(size, 0), def(size, 0), ptrmap((size + 7) / 8, 0) {}

  std::uint32_t size() const { return std::uint32_t(bytes.size()); }
  void resize(std::uint32_t n);
  bool slot_is_pointer(std::uint32_t offset) const {
    return offset % 8 == 0 && offset + 8 <= size() && ptrmap[offset / 8];
  }
  Pointer pointer_at(std::uint32_t offset) const;

  // Heap pointers stored in this object, in ascending slot order.
  std::vector<std::pair<std::uint32_t, Pointer>> edges() const;
};

// The outcome of a checked memory operation: a fault kind or a value.
template <class T> struct Checked {
  FaultKind fault = FaultKind::None;
  T value{};
  explicit operator bool() const { return fault == FaultKind::None; }
  static Checked fail(FaultKind k) { return {k, T{}}; }
};

struct Loaded {
  std::uint64_t bits = 0;
  bool defined = false;
  bool is_pointer = false;
};

// Where a tagged pointer lands: an object id, a byte offset inside it and
// whether stores are allowed there.
struct Location {
  std::uint32_t object = 0;
  std::uint32_t offset = 0;
  bool read_only = false;
};

struct Snapshot {
  Pointer root;      // scheduler state
  Pointer globals;   // globals slot object
  Pointer constants; // constants slot object
  Pointer fault_handler;
  std::vector<std::pair<std::uint32_t, std::shared_ptr<const HeapObject>>> objects; // by id
  std::uint32_t next_id = 1;
  std::uint8_t flags = 0; // flag::Error | flag::Accept of the producing edge

  const HeapObject *find(std::uint32_t id) const;
};

using CanonicalKey = std::string;

class Heap {
public:
  Heap() = default;
  static Heap restore(const Snapshot &s);

  Pointer make(std::uint32_t size);
  FaultKind free(Pointer p);
  Checked<std::uint32_t> size(Pointer p) const;
  FaultKind resize(Pointer p, std::uint32_t n);

  Checked<Location> locate(Pointer p, unsigned width) const;
  Checked<Loaded> read(Pointer p, unsigned width) const;
  FaultKind write(Pointer p, unsigned width, std::uint64_t bits, bool defined,
                  bool is_pointer);
  // Reads a NUL-terminated byte string (bounded by the slot or object).
  Checked<std::string> read_string(Pointer p) const;

  void mark_shared(Pointer p);

  Snapshot snapshot(Pointer root, Pointer fault_handler, std::uint8_t flags) const;

  void set_globals(Pointer p) { globals_ = p.is_heap() ? p.id : 0; }
  void set_constants(Pointer p) { constants_ = p.is_heap() ? p.id : 0; }
  Pointer globals() const { return Pointer::heap(globals_); }
  Pointer constants() const { return Pointer::heap(constants_); }

  // Builds a slot object (globals or constants): a header of
  // {u32 count, {u32 offset, u32 length}*} followed by 8-aligned slots.
  Pointer make_slot_object(const std::vector<std::uint32_t> &sizes,
                           const std::vector<const std::vector<std::uint8_t> *> &init);

  const HeapObject *object(std::uint32_t id) const;
  std::uint32_t next_id() const { return next_id_; }
  std::vector<std::uint32_t> ids() const;

private:
  HeapObject *mutable_object(std::uint32_t id);
  Checked<std::pair<std::uint32_t, std::uint32_t>> slot(std::uint32_t holder,
                                                        std::uint32_t index) const;

  std::unordered_map<std::uint32_t, std::shared_ptr<HeapObject>> objects_;
  std::uint32_t next_id_ = 1;
  std::uint32_t globals_ = 0, constants_ = 0;
};

// Ids of the objects reachable from the snapshot roots, in DFS pre-order
// (root first, then globals, then constants; slots in ascending offset).
std::vector<std::uint32_t> canonical_order(const Snapshot &s);

// Byte layout: "GVM1", then per object in canonical order
// {u32 size, bytes, def bitmap, ptrmap bitmap, u8 shared}, then the u64
// fault handler pointer and the u8 state flags. Heap pointer ids inside the bytes are replaced by 1-based visit
// indices; dangling ids map to Pointer::kInvalidId - 1.
CanonicalKey canonicalize(const Snapshot &s);

// Same layout without renumbering, objects in id order, each prefixed by
// its u32 id. Used when symmetry reduction is disabled.
CanonicalKey raw_key(const Snapshot &s);

std::string heap_dot(const Snapshot &s);

std::uint64_t fnv1a(std::string_view bytes);

} // namespace gvm
