#include "gvm/heap.hpp"

#include <algorithm>

namespace gvm {

void HeapObject::resize(std::uint32_t n) {
  std::uint32_t old = size();
  bytes.resize(n, 0);
  def.resize(n, 0);
  // A slot cut by the new end is no longer an intact pointer.
  if (n < old && n % 8 != 0)
    ptrmap[n / 8] = 0;
  ptrmap.resize((n + 7) / 8, 0);
}

Pointer HeapObject::pointer_at(std::uint32_t offset) const {
  std::uint64_t bits = 0;
  for (int i = 7; i >= 0; --i)
    bits = bits << 8 | bytes[offset + i];
  return Pointer::decode(bits);
}

std::vector<std::pair<std::uint32_t, Pointer>> HeapObject::edges() const {
  std::vector<std::pair<std::uint32_t, Pointer>> out;
  for (std::uint32_t s = 0; s < ptrmap.size(); ++s)
    if (ptrmap[s] && s * 8 + 8 <= size())
      if (auto p = pointer_at(s * 8); p.is_heap() && p.id != 0 && p.valid_id())
        out.emplace_back(s * 8, p);
  return out;
}

const HeapObject *Snapshot::find(std::uint32_t id) const {
  auto it = std::lower_bound(objects.begin(), objects.end(), id,
                             [](const auto &e, std::uint32_t v) { return e.first < v; });
  return it != objects.end() && it->first == id ? it->second.get() : nullptr;
}

Heap Heap::restore(const Snapshot &s) {
  Heap h;
  h.objects_.reserve(s.objects.size());
  for (auto &[id, obj] : s.objects)
    // Objects stay shared with the snapshot until first written.
    h.objects_.emplace(id, std::const_pointer_cast<HeapObject>(obj));
  h.next_id_ = s.next_id;
  h.set_globals(s.globals);
  h.set_constants(s.constants);
  return h;
}

Pointer Heap::make(std::uint32_t size) {
  std::uint32_t id = next_id_++;
  objects_.emplace(id, std::make_shared<HeapObject>(size));
  return Pointer::heap(id);
}

const HeapObject *Heap::object(std::uint32_t id) const {
  auto it = objects_.find(id);
  return it == objects_.end() ? nullptr : it->second.get();
}

std::vector<std::uint32_t> Heap::ids() const {
  std::vector<std::uint32_t> out;
  for (auto &[id, o] : objects_)
    if (o->valid)
      out.push_back(id);
  std::sort(out.begin(), out.end());
  return out;
}

HeapObject *Heap::mutable_object(std::uint32_t id) {
  auto it = objects_.find(id);
  if (it == objects_.end())
    return nullptr;
  if (it->second.use_count() > 1)
    it->second = std::make_shared<HeapObject>(*it->second);
  return it->second.get();
}

FaultKind Heap::free(Pointer p) {
  if (!p.is_heap() || p.id == 0 || !p.valid_id() || p.offset != 0)
    return FaultKind::InvalidFree;
  auto *o = object(p.id);
  if (!o)
    return p.id < next_id_ ? FaultKind::DoubleFree : FaultKind::InvalidFree;
  if (!o->valid)
    return FaultKind::DoubleFree;
  auto *m = mutable_object(p.id);
  m->valid = false;
  m->shared = false;
  m->bytes.clear();
  m->def.clear();
  m->ptrmap.clear();
  return FaultKind::None;
}

namespace {

FaultKind missing(std::uint32_t id, std::uint32_t next) {
  return id != 0 && id < next ? FaultKind::UseAfterFree : FaultKind::BadPointer;
}

} // namespace

Checked<std::uint32_t> Heap::size(Pointer p) const {
  if (!p.is_heap() || !p.valid_id())
    return Checked<std::uint32_t>::fail(FaultKind::BadPointer);
  auto *o = object(p.id);
  if (!o || !o->valid)
    return Checked<std::uint32_t>::fail(o ? FaultKind::UseAfterFree : missing(p.id, next_id_));
  return {FaultKind::None, o->size()};
}

FaultKind Heap::resize(Pointer p, std::uint32_t n) {
  if (!p.is_heap() || !p.valid_id() || p.offset != 0)
    return FaultKind::BadPointer;
  auto *o = object(p.id);
  if (!o || !o->valid)
    return o ? FaultKind::UseAfterFree : missing(p.id, next_id_);
  mutable_object(p.id)->resize(n);
  return FaultKind::None;
}

Checked<std::pair<std::uint32_t, std::uint32_t>> Heap::slot(std::uint32_t holder,
                                                            std::uint32_t index) const {
  using R = Checked<std::pair<std::uint32_t, std::uint32_t>>;
  auto *o = holder ? object(holder) : nullptr;
  if (!o || !o->valid || o->size() < 4)
    return R::fail(FaultKind::BadPointer);
  auto u32 = [&](std::uint32_t at) {
    return std::uint32_t(o->bytes[at]) | std::uint32_t(o->bytes[at + 1]) << 8 |
           std::uint32_t(o->bytes[at + 2]) << 16 | std::uint32_t(o->bytes[at + 3]) << 24;
  };
  std::uint32_t count = u32(0);
  if (index >= count || 4 + 8 * std::uint64_t(index) + 8 > o->size())
    return R::fail(FaultKind::BadPointer);
  std::uint32_t off = u32(4 + 8 * index), len = u32(8 + 8 * index);
  if (std::uint64_t(off) + len > o->size())
    return R::fail(FaultKind::BadPointer);
  return {FaultKind::None, {off, len}};
}

Checked<Location> Heap::locate(Pointer p, unsigned width) const {
  using R = Checked<Location>;
  if (!p.valid_id())
    return R::fail(p.tag == PtrTag::Code ? FaultKind::BadPointer : FaultKind::OutOfBounds);
  switch (p.tag) {
  case PtrTag::Heap: {
    if (p.id == 0)
      return R::fail(FaultKind::BadPointer);
    auto *o = object(p.id);
    if (!o)
      return R::fail(missing(p.id, next_id_));
    if (!o->valid)
      return R::fail(FaultKind::UseAfterFree);
    if (std::uint64_t(p.offset) + width > o->size())
      return R::fail(FaultKind::OutOfBounds);
    return {FaultKind::None, {p.id, p.offset, false}};
  }
  case PtrTag::Global:
  case PtrTag::Constant: {
    std::uint32_t holder = p.tag == PtrTag::Global ? globals_ : constants_;
    auto s = slot(holder, p.id);
    if (!s)
      return R::fail(s.fault);
    if (std::uint64_t(p.offset) + width > s.value.second)
      return R::fail(FaultKind::OutOfBounds);
    return {FaultKind::None, {holder, s.value.first + p.offset, p.tag == PtrTag::Constant}};
  }
  case PtrTag::Code:
    break;
  }
  return R::fail(FaultKind::BadPointer);
}

Checked<Loaded> Heap::read(Pointer p, unsigned width) const {
  auto loc = locate(p, width);
  if (!loc)
    return Checked<Loaded>::fail(loc.fault);
  auto *o = object(loc.value.object);
  std::uint32_t off = loc.value.offset;
  Loaded out;
  out.defined = true;
  for (unsigned i = 0; i < width; ++i) {
    out.bits |= std::uint64_t(o->bytes[off + i]) << (8 * i);
    out.defined = out.defined && o->def[off + i];
  }
  out.is_pointer = width == 8 && o->slot_is_pointer(off);
  return {FaultKind::None, out};
}

FaultKind Heap::write(Pointer p, unsigned width, std::uint64_t bits, bool defined,
                      bool is_pointer) {
  auto loc = locate(p, width);
  if (!loc)
    return loc.fault;
  if (loc.value.read_only)
    return FaultKind::ReadOnly;
  if (width == 0)
    return FaultKind::None;
  auto *o = mutable_object(loc.value.object);
  std::uint32_t off = loc.value.offset;
  for (unsigned i = 0; i < width; ++i) {
    o->bytes[off + i] = std::uint8_t(bits >> (8 * i));
    o->def[off + i] = defined;
  }
  for (std::uint32_t s = off / 8; s <= (off + width - 1) / 8; ++s)
    o->ptrmap[s] = 0;
  bool edge = is_pointer && defined && width == 8 && off % 8 == 0;
  if (edge) {
    o->ptrmap[off / 8] = 1;
    if (o->shared)
      mark_shared(Pointer::decode(bits));
  }
  return FaultKind::None;
}

Checked<std::string> Heap::read_string(Pointer p) const {
  auto loc = locate(p, 1);
  if (!loc)
    return Checked<std::string>::fail(loc.fault);
  // Bound by the slot for indirect pointers, by the object otherwise.
  std::uint32_t limit = object(loc.value.object)->size();
  if (p.tag == PtrTag::Global || p.tag == PtrTag::Constant) {
    auto s = slot(loc.value.object, p.id);
    limit = s.value.first + s.value.second;
  }
  auto *o = object(loc.value.object);
  std::string out;
  for (std::uint32_t i = loc.value.offset; i < limit; ++i) {
    if (!o->def[i])
      return Checked<std::string>::fail(FaultKind::HypercallMisuse);
    if (o->bytes[i] == 0)
      return {FaultKind::None, out};
    out.push_back(char(o->bytes[i]));
  }
  return {FaultKind::None, out};
}

void Heap::mark_shared(Pointer p) {
  if (!p.is_heap() || p.id == 0 || !p.valid_id())
    return;
  std::vector<std::uint32_t> work{p.id};
  while (!work.empty()) {
    std::uint32_t id = work.back();
    work.pop_back();
    auto *o = object(id);
    if (!o || !o->valid || o->shared)
      continue;
    mutable_object(id)->shared = true;
    for (auto &[off, target] : o->edges())
      work.push_back(target.id);
  }
}

Pointer Heap::make_slot_object(const std::vector<std::uint32_t> &sizes,
                               const std::vector<const std::vector<std::uint8_t> *> &init) {
  auto align8 = [](std::uint64_t v) { return (v + 7) & ~std::uint64_t(7); };
  std::uint64_t at = align8(4 + 8 * std::uint64_t(sizes.size()));
  std::vector<std::uint32_t> offsets;
  for (auto s : sizes) {
    offsets.push_back(std::uint32_t(at));
    at = align8(at + s);
  }
  Pointer obj = make(std::uint32_t(at));
  auto *o = mutable_object(obj.id);
  auto put32 = [&](std::uint32_t where, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) {
      o->bytes[where + i] = std::uint8_t(v >> (8 * i));
      o->def[where + i] = 1;
    }
  };
  put32(0, std::uint32_t(sizes.size()));
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    put32(std::uint32_t(4 + 8 * i), offsets[i]);
    put32(std::uint32_t(8 + 8 * i), sizes[i]);
    if (i < init.size() && init[i])
      for (std::size_t b = 0; b < init[i]->size() && b < sizes[i]; ++b) {
        o->bytes[offsets[i] + b] = (*init[i])[b];
        o->def[offsets[i] + b] = 1;
      }
  }
  return obj;
}

Snapshot Heap::snapshot(Pointer root, Pointer fault_handler, std::uint8_t flags) const {
  Snapshot s;
  s.root = root;
  s.globals = globals();
  s.constants = constants();
  s.fault_handler = fault_handler;
  s.next_id = next_id_;
  s.flags = flags;

  std::vector<std::uint32_t> work;
  for (auto r : {root, s.globals, s.constants})
    if (r.is_heap() && r.id != 0)
      work.push_back(r.id);
  std::vector<std::uint32_t> seen;
  std::unordered_map<std::uint32_t, bool> visited;
  while (!work.empty()) {
    std::uint32_t id = work.back();
    work.pop_back();
    if (visited[id])
      continue;
    visited[id] = true;
    auto it = objects_.find(id);
    if (it == objects_.end() || !it->second->valid)
      continue;
    seen.push_back(id);
    for (auto &[off, target] : it->second->edges())
      work.push_back(target.id);
  }
  std::sort(seen.begin(), seen.end());
  s.objects.reserve(seen.size());
  for (auto id : seen)
    s.objects.emplace_back(id, objects_.at(id));
  return s;
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

} // namespace gvm
