#include "gvm/abi.hpp"
#include "gvm/pointer.hpp"

#include <array>
#include <utility>

namespace gvm {

namespace {

constexpr std::array<std::string_view, kFaultKindCount + 1> kFaultNames = {
    "None",          "OutOfBounds",     "UseAfterFree",     "DoubleFree",
    "InvalidFree",   "BadPointer",      "ReadOnly",         "UndefinedControl",
    "DivisionByZero", "BadJumpTarget",  "CallArityMismatch", "HypercallMisuse",
    "DoubleFault",
};

constexpr std::pair<std::string_view, std::int64_t> kNamedConstants[] = {
    {"get", 0},           {"set", 1},
    {"set_bits", 2},      {"clear_bits", 3},
    {"FramePtr", 0},      {"GlobalsPtr", 1},
    {"ConstantsPtr", 2},  {"SchedStatePtr", 3},
    {"FaultHandlerPtr", 4}, {"Flags", 5},
    {"PC", 6},
    {"ERROR", 1},         {"ACCEPT", 2},
    {"MASK", 4},          {"INTERRUPTED", 8},
    {"load1", mem_kind(false, 1)},  {"load2", mem_kind(false, 2)},
    {"load4", mem_kind(false, 4)},  {"load8", mem_kind(false, 8)},
    {"store1", mem_kind(true, 1)},  {"store2", mem_kind(true, 2)},
    {"store4", mem_kind(true, 4)},  {"store8", mem_kind(true, 8)},
};

} // namespace

std::string_view fault_name(FaultKind k) {
  auto i = std::size_t(k);
  return i < kFaultNames.size() ? kFaultNames[i] : "Unknown";
}

std::optional<FaultKind> fault_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kFaultNames.size(); ++i)
    if (kFaultNames[i] == name)
      return FaultKind(i);
  return std::nullopt;
}

std::optional<std::int64_t> abi_constant(std::string_view name) {
  for (auto &[n, v] : kNamedConstants)
    if (n == name)
      return v;
  if (auto f = fault_from_name(name); f && *f != FaultKind::None)
    return std::int64_t(*f);
  return std::nullopt;
}

std::string to_string(const Pointer &p) {
  static constexpr const char *tags[] = {"heap", "global", "const", "code"};
  std::string s = tags[int(p.tag)];
  s += ':';
  s += p.valid_id() ? std::to_string(p.id) : std::string("invalid");
  s += '+';
  s += std::to_string(p.offset);
  return s;
}

} // namespace gvm
