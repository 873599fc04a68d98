#pragma once

#include <cstdint>
#include <string>

namespace gvm {

enum class PtrTag : std::uint8_t { Heap = 0, Global = 1, Constant = 2, Code = 3 };

// A 64-bit pointer: the offset lives in the low 32 bits, the object id in
// bits 32..61 and the type tag in the top two bits. Heap id 0 is null.
// For code pointers, id is the function index and offset the instruction
// index within that function.
struct Pointer {
  static constexpr std::uint32_t kMaxId = (1u << 30) - 1;
  // Ids at kInvalidId never resolve; offset overflow moves a pointer here.
  static constexpr std::uint32_t kInvalidId = kMaxId;

  PtrTag tag = PtrTag::Heap;
  std::uint32_t id = 0;
  std::uint32_t offset = 0;

  constexpr std::uint64_t raw() const {
    return (std::uint64_t(tag) << 62) | (std::uint64_t(id & kMaxId) << 32) | offset;
  }

  static constexpr Pointer decode(std::uint64_t bits) {
    return Pointer{PtrTag(bits >> 62), std::uint32_t((bits >> 32) & kMaxId),
                   std::uint32_t(bits)};
  }

  static constexpr Pointer heap(std::uint32_t id, std::uint32_t offset = 0) {
    return {PtrTag::Heap, id, offset};
  }
  static constexpr Pointer code(std::uint32_t fn, std::uint32_t pc = 0) {
    return {PtrTag::Code, fn, pc};
  }

  constexpr bool is_null() const { return raw() == 0; }
  constexpr bool is_heap() const { return tag == PtrTag::Heap; }
  constexpr bool valid_id() const { return id != kInvalidId; }

  // Byte displacement; leaving [0, 2^32) poisons the id for good.
  constexpr Pointer advanced(std::int64_t delta) const {
    Pointer p = *this;
    std::int64_t off = std::int64_t(offset) + delta;
    p.offset = std::uint32_t(off);
    if (off < 0 || off > std::int64_t(UINT32_MAX))
      p.id = kInvalidId;
    return p;
  }

  friend constexpr bool operator==(const Pointer &, const Pointer &) = default;
};

std::string to_string(const Pointer &p);

} // namespace gvm
