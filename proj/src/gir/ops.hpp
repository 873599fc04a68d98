#pragma once

#include "gvm/gir.hpp"

namespace gvm::gir::detail {

struct OpInfo {
  Op op;
  std::string_view name;
  int min_args;
  int max_args; // -1: variadic (call)
  bool needs_dst;
  bool takes_width;
};

const OpInfo &info(Op op);
const OpInfo *lookup(std::string_view mnemonic);

} // namespace gvm::gir::detail
