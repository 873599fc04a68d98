#include "gvm/vm.hpp"

#include <charconv>
#include <cstdio>
#include <set>
#include <stdexcept>
#include <tuple>

namespace gvm {

using gir::Op;
using gir::Operand;

namespace {

// Thrown inside the evaluator to route an illegal instruction to the
// fault handler. `cont` overrides the default continuation (next pc).
struct Fault {
  FaultKind kind;
  std::optional<std::uint32_t> cont{};
  Value operand{};
};

constexpr std::uint64_t kMaxObjectSize = 1ull << 31;

std::uint64_t width_mask(unsigned w) { return w >= 8 ? ~0ull : (1ull << (8 * w)) - 1; }

Value integer(std::uint64_t bits, bool defined) { return {bits, defined, false}; }
Value pointer(Pointer p) { return {p.raw(), true, true}; }

} // namespace

Machine::Machine(gir::Program linked) : program_(std::move(linked)) {
  for (auto &f : program_.functions) {
    FunctionImage img{f.name, f.nparams, f.nregs, {}};
    auto starts = f.block_starts();
    for (auto &b : f.blocks)
      for (auto ins : b.code) {
        for (auto &a : ins.args)
          if (a.kind == Operand::Kind::Label)
            a.value = starts.at(std::size_t(a.value));
        img.code.push_back(std::move(ins));
      }
    functions_.push_back(std::move(img));
  }
  auto boot = program_.function_index("__boot");
  auto sched = program_.function_index("scheduler");
  if (!boot || !sched)
    throw std::invalid_argument("program lacks '__boot' or 'scheduler'");
  boot_fn_ = *boot;
  scheduler_fn_ = *sched;
  main_fn_ = program_.function_index("main");
  if (functions_[scheduler_fn_].nparams != 0)
    throw std::invalid_argument("'scheduler' must take no parameters");
}

std::string Machine::describe_pc(Pointer pc) const {
  if (pc.tag != PtrTag::Code || pc.id >= functions_.size())
    return to_string(pc);
  return functions_[pc.id].name + ":" + std::to_string(pc.offset);
}

std::optional<Pointer> Machine::parse_pc(std::string_view text) const {
  auto colon = text.rfind(':');
  if (colon == std::string_view::npos)
    return std::nullopt;
  auto name = text.substr(0, colon);
  std::uint32_t off = 0;
  auto digits = text.substr(colon + 1);
  auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), off);
  if (ec != std::errc() || p != digits.data() + digits.size())
    return std::nullopt;
  for (std::uint32_t i = 0; i < functions_.size(); ++i)
    if (functions_[i].name == name)
      return Pointer::code(i, off);
  return std::nullopt;
}

std::string Machine::describe_fault(const FaultRecord &f) const {
  char buf[32];
  std::snprintf(buf, sizeof buf, "0x%llx", static_cast<unsigned long long>(f.operand.bits));
  std::string s = std::string(fault_name(f.kind)) + " at " + describe_pc(f.pc);
  if (f.kind != FaultKind::DoubleFault)
    s += ", continues at " + describe_pc(f.cont_pc);
  s += ", operand " + std::string(buf);
  if (!f.operand.defined)
    s += " (undefined)";
  else if (f.operand.pointer)
    s += " (pointer)";
  return s;
}

class Evaluator {
public:
  Evaluator(const Machine &m, TransitionOracle &oracle, const VmOptions &opts)
      : m_(m), oracle_(oracle), opts_(opts) {}

  TransitionResult boot() {
    booting_ = true;
    auto &prog = m_.program();
    std::vector<std::uint32_t> sizes;
    std::vector<const std::vector<std::uint8_t> *> init;
    for (auto &g : prog.globals) {
      sizes.push_back(g.size);
      init.push_back(g.init ? &*g.init : nullptr);
    }
    Pointer globals = heap_.make_slot_object(sizes, init);
    heap_.set_globals(globals);
    heap_.mark_shared(globals);
    sizes.clear();
    init.clear();
    for (auto &c : prog.constants) {
      sizes.push_back(std::uint32_t(c.bytes.size()));
      init.push_back(&c.bytes);
    }
    heap_.set_constants(heap_.make_slot_object(sizes, init));

    flags_ = flag::Mask;
    std::vector<Value> args;
    if (m_.functions_[m_.boot_fn_].nparams >= 1)
      args.push_back(m_.main_fn_ ? pointer(Pointer::code(*m_.main_fn_)) : integer(0, true));
    args.resize(m_.functions_[m_.boot_fn_].nparams, integer(0, true));
    enter(m_.boot_fn_, args, Pointer{});
    loop();
    return finish();
  }

  TransitionResult run(const Snapshot &s) {
    heap_ = Heap::restore(s);
    sched_state_ = s.root;
    fault_handler_ = s.fault_handler;
    flags_ = flag::Mask;
    enter(m_.scheduler_fn_, {}, Pointer{});
    loop();
    return finish();
  }

private:
  using Image = Machine::FunctionImage;

  const Image &image(std::uint32_t fn) const { return m_.functions_[fn]; }
  Pointer code_ptr(std::uint32_t pc) const { return Pointer::code(fn_, pc); }
  bool masked() const { return flags_ & flag::Mask; }
  static Pointer at(Pointer base, std::uint32_t off) { return Pointer::heap(base.id, off); }

  void loop() {
    while (!ended_) {
      if (res_.instructions >= opts_.step_budget) {
        res_.status = TransitionStatus::BudgetExceeded;
        res_.diagnostic = "step budget of " + std::to_string(opts_.step_budget) +
                          " exceeded at " + m_.describe_pc(code_ptr(pc_)) +
                          " (missing interrupt point?)";
        return;
      }
      step();
    }
  }

  TransitionResult finish() {
    res_.flags = std::uint8_t(flags_ & (flag::Error | flag::Accept));
    res_.successor = heap_.snapshot(sched_state_, fault_handler_, res_.flags);
    if (res_.status == TransitionStatus::Ok && !booting_ && res_.user_instructions == 0 &&
        !res_.error())
      res_.status = TransitionStatus::Terminal;
    return std::move(res_);
  }

  void end() { ended_ = true; }

  void diverge(std::string why) {
    res_.status = TransitionStatus::Diverged;
    res_.diagnostic = std::move(why);
    end();
  }

  // -- frames and registers -------------------------------------------------

  Loaded load(Pointer p, unsigned w) {
    auto r = heap_.read(p, w);
    if (!r)
      throw Fault{r.fault};
    return r.value;
  }

  void store(Pointer p, unsigned w, Value v) {
    if (auto f = heap_.write(p, w, v.bits, v.defined, v.pointer); f != FaultKind::None)
      throw Fault{f};
  }

  Value reg(std::uint32_t r) {
    auto l = load(at(frame_, kFrameRegs + 8 * r), 8);
    return {l.bits, l.defined, l.is_pointer};
  }

  void set_reg(std::uint32_t r, Value v) { store(at(frame_, kFrameRegs + 8 * r), 8, v); }

  Value operand(const Operand &a) {
    switch (a.kind) {
    case Operand::Kind::Reg: return reg(std::uint32_t(a.value));
    case Operand::Kind::Imm: return integer(std::uint64_t(a.value), true);
    case Operand::Kind::Global:
      return pointer({PtrTag::Global, std::uint32_t(a.value), 0});
    case Operand::Kind::Const:
      return pointer({PtrTag::Constant, std::uint32_t(a.value), 0});
    case Operand::Kind::Func: return pointer(Pointer::code(std::uint32_t(a.value)));
    case Operand::Kind::Label: return integer(std::uint64_t(a.value), true);
    }
    return {};
  }

  Pointer make_frame(std::uint32_t fn, const std::vector<Value> &args, Pointer parent) {
    auto &img = image(fn);
    Pointer f = heap_.make(frame_size(img.nregs));
    store(at(f, kFrameParent), 8, parent.is_null() ? integer(0, true) : pointer(parent));
    store(at(f, kFramePC), 8, pointer(Pointer::code(fn)));
    store(at(f, frame_alloca_slot(img.nregs)), 8, integer(0, true));
    for (std::size_t i = 0; i < args.size(); ++i)
      store(at(f, kFrameRegs + 8 * std::uint32_t(i)), 8, args[i]);
    return f;
  }

  void enter(std::uint32_t fn, const std::vector<Value> &args, Pointer parent) {
    frame_ = make_frame(fn, args, parent);
    fn_ = fn;
    pc_ = 0;
  }

  // A resumable code pointer stored in a frame: valid function and pc.
  std::optional<Pointer> saved_pc(Pointer frame) {
    auto r = heap_.read(at(frame, kFramePC), 8);
    if (!r || !r.value.defined)
      return std::nullopt;
    Pointer p = Pointer::decode(r.value.bits);
    if (p.tag != PtrTag::Code || p.id >= m_.functions_.size() ||
        p.offset >= image(p.id).code.size())
      return std::nullopt;
    return p;
  }

  Pointer parent_of(Pointer frame) {
    auto r = load(at(frame, kFrameParent), 8);
    return r.is_pointer ? Pointer::decode(r.bits) : Pointer{};
  }

  void release_frame(Pointer frame, std::uint32_t nregs) {
    auto list = heap_.read(at(frame, frame_alloca_slot(nregs)), 8);
    if (list && list.value.is_pointer) {
      Pointer lp = Pointer::decode(list.value.bits);
      if (auto *o = heap_.object(lp.id); o && o->valid)
        for (auto &[off, target] : o->edges())
          heap_.free(target);
      heap_.free(lp);
    }
    heap_.free(frame);
  }

  // Switches to `frame`, resuming at its saved pc.
  void resume(Pointer frame) {
    if (!frame.is_heap() || frame.id == 0)
      throw Fault{FaultKind::BadJumpTarget, {}, pointer(frame)};
    auto sz = heap_.size(frame);
    auto pc = sz ? saved_pc(frame) : std::nullopt;
    if (!pc || sz.value != frame_size(image(pc->id).nregs))
      throw Fault{FaultKind::BadJumpTarget, {}, pointer(frame)};
    frame_ = frame;
    fn_ = pc->id;
    pc_ = pc->offset;
  }

  // -- interrupts -----------------------------------------------------------

  void fire(std::uint32_t resume_pc) {
    store(at(frame_, kFramePC), 8, pointer(code_ptr(resume_pc)));
    if (sched_state_.is_heap() && sched_state_.id != 0)
      heap_.write(at(sched_state_, kSchedIntFrameOffset), 8, frame_.raw(), true, true);
    end();
  }

  bool decide(std::uint32_t pc, bool natural) {
    auto d = oracle_.interrupt(code_ptr(pc), natural);
    if (!d) {
      diverge("interrupt hint mismatch at " + m_.describe_pc(code_ptr(pc)));
      return false;
    }
    res_.interrupts.push_back({code_ptr(pc), *d});
    return *d;
  }

  void check_pending(std::uint32_t resume_pc) {
    if ((flags_ & flag::Interrupted) && !masked()) {
      flags_ &= ~flag::Interrupted;
      fire(resume_pc);
    }
  }

  // -- faults ---------------------------------------------------------------

  void raise(const Fault &f, std::uint32_t cont) {
    FaultRecord rec{f.kind, code_ptr(pc_), code_ptr(cont), frame_, f.operand};
    if (handler_frame_) {
      rec.kind = FaultKind::DoubleFault;
      res_.faults.push_back(rec);
      flags_ |= flag::Error;
      end();
      return;
    }
    res_.faults.push_back(rec);
    if (fault_handler_.tag != PtrTag::Code || fault_handler_.id >= m_.functions_.size() ||
        image(fault_handler_.id).nparams != 4) {
      flags_ |= flag::Error;
      end();
      return;
    }
    auto r = heap_.write(at(frame_, kFramePC), 8, code_ptr(cont).raw(), true, true);
    if (r != FaultKind::None) {
      flags_ |= flag::Error;
      end();
      return;
    }
    std::vector<Value> args = {integer(std::uint64_t(f.kind), true), pointer(rec.pc),
                               pointer(rec.cont_pc), pointer(frame_)};
    saved_mask_ = masked();
    flags_ |= flag::Mask;
    enter(fault_handler_.id, args, frame_);
    handler_frame_ = frame_.id;
  }

  // -- evaluation -----------------------------------------------------------

  void step() {
    auto &img = image(fn_);
    if (pc_ >= img.code.size()) {
      raise(Fault{FaultKind::BadJumpTarget}, pc_);
      return;
    }
    const auto &ins = img.code[pc_];
    ++res_.instructions;
    if (!masked())
      ++res_.user_instructions;
    std::uint32_t here = pc_;
    try {
      execute(ins);
    } catch (const Fault &f) {
      // Restore the faulting position; execute() may have moved it.
      pc_ = here;
      if (ins.dst >= 0) {
        try {
          set_reg(std::uint32_t(ins.dst), integer(0, false));
        } catch (const Fault &) {
        }
      }
      raise(f, f.cont.value_or(here + 1));
    }
  }

  Value arith(Op op, Value a, Value b) {
    std::uint64_t x = a.bits, y = b.bits, r = 0;
    bool defined = a.defined && b.defined;
    auto sx = std::int64_t(x), sy = std::int64_t(y);
    switch (op) {
    case Op::Add: r = x + y; break;
    case Op::Sub: r = x - y; break;
    case Op::Mul: r = x * y; break;
    case Op::UDiv:
    case Op::URem:
    case Op::SDiv:
    case Op::SRem:
      if (y == 0)
        throw Fault{FaultKind::DivisionByZero, {}, b};
      if (op == Op::UDiv)
        r = x / y;
      else if (op == Op::URem)
        r = x % y;
      else if (sx == INT64_MIN && sy == -1)
        r = op == Op::SDiv ? x : 0;
      else
        r = std::uint64_t(op == Op::SDiv ? sx / sy : sx % sy);
      break;
    case Op::And: r = x & y; break;
    case Op::Or: r = x | y; break;
    case Op::Xor: r = x ^ y; break;
    case Op::Shl:
    case Op::LShr:
    case Op::AShr:
      if (y >= 64) {
        defined = false;
        r = 0;
      } else if (op == Op::Shl) {
        r = x << y;
      } else if (op == Op::LShr) {
        r = x >> y;
      } else {
        r = std::uint64_t(sx >> y);
      }
      break;
    case Op::IcmpEq: r = x == y; break;
    case Op::IcmpNe: r = x != y; break;
    case Op::IcmpUlt: r = x < y; break;
    case Op::IcmpUle: r = x <= y; break;
    case Op::IcmpSlt: r = sx < sy; break;
    case Op::IcmpSle: r = sx <= sy; break;
    default: break;
    }
    return integer(r, defined);
  }

  void execute(const gir::Instruction &ins) {
    auto &a = ins.args;
    auto dst = [&](Value v) { set_reg(std::uint32_t(ins.dst), v); };
    auto opt_dst = [&](Value v) {
      if (ins.dst >= 0)
        dst(v);
    };
    std::uint32_t next = pc_ + 1;

    switch (ins.op) {
    case Op::Add: case Op::Sub: case Op::Mul: case Op::UDiv: case Op::SDiv:
    case Op::URem: case Op::SRem: case Op::And: case Op::Or: case Op::Xor:
    case Op::Shl: case Op::LShr: case Op::AShr: case Op::IcmpEq: case Op::IcmpNe:
    case Op::IcmpUlt: case Op::IcmpUle: case Op::IcmpSlt: case Op::IcmpSle:
      dst(arith(ins.op, operand(a[0]), operand(a[1])));
      break;

    case Op::ZExt:
    case Op::Trunc:
    case Op::SExt: {
      Value v = operand(a[0]);
      if (ins.width == 8) {
        dst(v);
        break;
      }
      std::uint64_t bits = v.bits & width_mask(ins.width);
      if (ins.op == Op::SExt) {
        unsigned shift = 64 - 8 * ins.width;
        bits = std::uint64_t(std::int64_t(bits << shift) >> shift);
      }
      dst(integer(bits, v.defined));
      break;
    }

    case Op::Gep: {
      Value p = operand(a[0]), k = operand(a[1]);
      if (!p.pointer) {
        dst(integer(p.bits + k.bits, p.defined && k.defined));
        break;
      }
      Pointer moved = Pointer::decode(p.bits).advanced(std::int64_t(k.bits));
      dst({moved.raw(), p.defined && k.defined, true});
      break;
    }
    case Op::PtrToInt: {
      Value v = operand(a[0]);
      dst(integer(v.bits, v.defined));
      break;
    }
    case Op::IntToPtr: {
      Value v = operand(a[0]);
      dst({v.bits, v.defined, true});
      break;
    }

    case Op::Load: {
      Value addr = operand(a[0]);
      auto l = heap_.read(Pointer::decode(addr.bits), ins.width);
      if (!l)
        throw Fault{l.fault, {}, addr};
      dst({l.value.bits, l.value.defined, l.value.is_pointer});
      break;
    }
    case Op::Store: {
      Value addr = operand(a[0]), v = operand(a[1]);
      if (ins.width < 8)
        v.bits &= width_mask(ins.width);
      if (auto f = heap_.write(Pointer::decode(addr.bits), ins.width, v.bits, v.defined,
                               v.pointer);
          f != FaultKind::None)
        throw Fault{f, {}, addr};
      break;
    }

    case Op::Jump:
      pc_ = std::uint32_t(a[0].value);
      return;
    case Op::Br: {
      Value c = operand(a[0]);
      auto target = std::uint32_t(c.bits != 0 ? a[1].value : a[2].value);
      if (!c.defined)
        throw Fault{FaultKind::UndefinedControl, target, c};
      pc_ = target;
      return;
    }
    case Op::Call: {
      Value callee = operand(a[0]);
      if (!callee.defined)
        throw Fault{FaultKind::UndefinedControl, {}, callee};
      Pointer cp = Pointer::decode(callee.bits);
      if (cp.tag != PtrTag::Code || cp.id >= m_.functions_.size() || cp.offset != 0)
        throw Fault{FaultKind::BadJumpTarget, {}, callee};
      if (a.size() - 1 != image(cp.id).nparams)
        throw Fault{FaultKind::CallArityMismatch, {}, callee};
      std::vector<Value> args;
      for (std::size_t i = 1; i < a.size(); ++i)
        args.push_back(operand(a[i]));
      store(at(frame_, kFramePC), 8, pointer(code_ptr(pc_)));
      enter(cp.id, args, frame_);
      return;
    }
    case Op::Ret: {
      Value rv = a.empty() ? Value{} : operand(a[0]);
      Pointer parent = parent_of(frame_);
      bool from_handler = handler_frame_ && *handler_frame_ == frame_.id;
      std::optional<Pointer> site;
      if (!parent.is_null()) {
        site = saved_pc(parent);
        if (!site)
          throw Fault{FaultKind::BadJumpTarget, {}, pointer(parent)};
      }
      release_frame(frame_, image(fn_).nregs);
      if (parent.is_null()) {
        end();
        return;
      }
      frame_ = parent;
      fn_ = site->id;
      pc_ = site->offset;
      if (from_handler) {
        handler_frame_.reset();
        if (!saved_mask_)
          flags_ &= ~flag::Mask;
        check_pending(pc_);
        return;
      }
      auto &call = image(fn_).code[pc_];
      if (call.op == Op::Call) {
        if (call.dst >= 0)
          set_reg(std::uint32_t(call.dst), rv);
        ++pc_;
      }
      return;
    }
    case Op::Unreachable:
      throw Fault{FaultKind::BadJumpTarget};

    case Op::Alloca: {
      Value n = operand(a[0]);
      if (n.bits > kMaxObjectSize)
        throw Fault{FaultKind::HypercallMisuse, {}, n};
      Pointer obj = heap_.make(std::uint32_t(n.bits));
      std::uint32_t slot = frame_alloca_slot(image(fn_).nregs);
      auto list = load(at(frame_, slot), 8);
      if (list.is_pointer) {
        Pointer lp = Pointer::decode(list.bits);
        auto sz = heap_.size(lp);
        if (!sz)
          throw Fault{sz.fault};
        heap_.resize(lp, sz.value + 8);
        store(at(lp, sz.value), 8, pointer(obj));
      } else {
        Pointer lp = heap_.make(8);
        store(lp, 8, pointer(obj));
        store(at(frame_, slot), 8, pointer(lp));
      }
      dst(pointer(obj));
      break;
    }

    case Op::HcObjMake: {
      Value n = operand(a[0]);
      if (!n.defined || n.bits > kMaxObjectSize)
        throw Fault{FaultKind::HypercallMisuse, {}, n};
      opt_dst(pointer(heap_.make(std::uint32_t(n.bits))));
      break;
    }
    case Op::HcObjFree: {
      Value p = operand(a[0]);
      if (auto f = heap_.free(Pointer::decode(p.bits)); f != FaultKind::None)
        throw Fault{f, {}, p};
      break;
    }
    case Op::HcObjSize: {
      Value p = operand(a[0]);
      auto s = heap_.size(Pointer::decode(p.bits));
      if (!s)
        throw Fault{s.fault, {}, p};
      opt_dst(integer(s.value, true));
      break;
    }
    case Op::HcObjResize: {
      Value p = operand(a[0]), n = operand(a[1]);
      if (!n.defined || n.bits > kMaxObjectSize)
        throw Fault{FaultKind::HypercallMisuse, {}, n};
      if (auto f = heap_.resize(Pointer::decode(p.bits), std::uint32_t(n.bits));
          f != FaultKind::None)
        throw Fault{f, {}, p};
      break;
    }
    case Op::HcObjShared:
      heap_.mark_shared(Pointer::decode(operand(a[0]).bits));
      break;
    case Op::HcTrace: {
      Value p = operand(a[0]);
      auto s = heap_.read_string(Pointer::decode(p.bits));
      if (!s)
        throw Fault{FaultKind::HypercallMisuse, {}, p};
      res_.traces.push_back(std::move(s.value));
      break;
    }
    case Op::HcInterruptCfl: {
      if (masked())
        break;
      std::uint64_t key = std::uint64_t(fn_) << 32 | pc_;
      bool seen = !cfl_pcs_.insert(key).second;
      bool natural = !opts_.tau_cfl || seen;
      if (decide(pc_, natural))
        fire(next);
      else if (!ended_)
        pc_ = next;
      return;
    }
    case Op::HcInterruptMem: {
      if (masked())
        break;
      Value addr = operand(a[0]), kind = operand(a[1]);
      unsigned width = unsigned(kind.bits >> 1);
      if (width != 1 && width != 2 && width != 4 && width != 8)
        throw Fault{FaultKind::HypercallMisuse, {}, kind};
      bool is_store = kind.bits & 1;
      bool natural = false;
      if (auto loc = heap_.locate(Pointer::decode(addr.bits), width)) {
        if (!opts_.tau_mem)
          natural = true;
        else if (heap_.object(loc.value.object)->shared)
          natural = is_store ||
                    !mem_loads_.insert({loc.value.object, loc.value.offset, width}).second;
      }
      if (decide(pc_, natural))
        fire(next);
      else if (!ended_)
        pc_ = next;
      return;
    }
    case Op::HcChoose: {
      Value n = operand(a[0]);
      if (!n.defined || n.bits == 0 || std::int64_t(n.bits) < 0)
        throw Fault{FaultKind::HypercallMisuse, {}, n};
      auto c = oracle_.choose(n.bits);
      if (!c || *c >= n.bits) {
        diverge("choice oracle gave no value in [0, " + std::to_string(n.bits) + ")");
        return;
      }
      res_.choices.push_back(*c);
      res_.bounds.push_back(n.bits);
      opt_dst(integer(*c, true));
      break;
    }
    case Op::HcControl:
      if (control(ins, next))
        return;
      break;
    }
    pc_ = next;
  }

  // Returns true when control has already been transferred.
  bool control(const gir::Instruction &ins, std::uint32_t next) {
    Value action = operand(ins.args[0]), reg = operand(ins.args[1]),
          value = operand(ins.args[2]);
    if (!action.defined || !reg.defined || reg.bits > 6 || action.bits > 3)
      throw Fault{FaultKind::HypercallMisuse, {}, action.defined ? reg : action};
    auto r = ControlReg(reg.bits);
    auto act = ControlAction(action.bits);
    auto set_dst = [&](Value v) {
      if (ins.dst >= 0)
        set_reg(std::uint32_t(ins.dst), v);
    };

    if (act == ControlAction::Get) {
      switch (r) {
      case ControlReg::FramePtr: set_dst(pointer(frame_)); break;
      case ControlReg::GlobalsPtr: set_dst(pointer(heap_.globals())); break;
      case ControlReg::ConstantsPtr: set_dst(pointer(heap_.constants())); break;
      case ControlReg::SchedStatePtr:
        set_dst(sched_state_.is_null() ? integer(0, true) : pointer(sched_state_));
        break;
      case ControlReg::FaultHandlerPtr:
        set_dst(fault_handler_.is_null() ? integer(0, true) : pointer(fault_handler_));
        break;
      case ControlReg::Flags: set_dst(integer(flags_, true)); break;
      case ControlReg::PC: set_dst(pointer(code_ptr(pc_))); break;
      }
      return false;
    }

    if (act == ControlAction::SetBits || act == ControlAction::ClearBits) {
      if (r != ControlReg::Flags || !value.defined)
        throw Fault{FaultKind::HypercallMisuse, {}, value};
      std::uint64_t bits = value.bits & 0xf;
      if (act == ControlAction::SetBits)
        flags_ |= bits;
      else
        flags_ &= ~bits;
      set_dst(integer(flags_, true));
      pc_ = next;
      check_pending(next);
      return true;
    }

    if (!value.defined)
      throw Fault{FaultKind::HypercallMisuse, {}, value};
    Pointer p = Pointer::decode(value.bits);
    switch (r) {
    case ControlReg::FramePtr:
      if (value.bits == 0) {
        end();
        return true;
      }
      resume(p);
      handler_frame_.reset();
      return true;
    case ControlReg::GlobalsPtr:
      if (!p.is_heap() || !heap_.object(p.id))
        throw Fault{FaultKind::HypercallMisuse, {}, value};
      heap_.set_globals(p);
      return false;
    case ControlReg::ConstantsPtr:
      if (!booting_ || !p.is_heap() || !heap_.object(p.id))
        throw Fault{FaultKind::HypercallMisuse, {}, value};
      heap_.set_constants(p);
      return false;
    case ControlReg::SchedStatePtr:
      if (value.bits != 0 && (!p.is_heap() || !heap_.object(p.id)))
        throw Fault{FaultKind::HypercallMisuse, {}, value};
      sched_state_ = value.bits ? p : Pointer{};
      return false;
    case ControlReg::FaultHandlerPtr:
      if (value.bits != 0 && (p.tag != PtrTag::Code || p.id >= m_.functions_.size()))
        throw Fault{FaultKind::HypercallMisuse, {}, value};
      fault_handler_ = value.bits ? p : Pointer{};
      return false;
    case ControlReg::Flags:
      flags_ = value.bits & 0xf;
      pc_ = next;
      check_pending(next);
      return true;
    case ControlReg::PC:
      throw Fault{FaultKind::HypercallMisuse, {}, reg};
    }
    return false;
  }

  const Machine &m_;
  TransitionOracle &oracle_;
  const VmOptions &opts_;
  Heap heap_;
  TransitionResult res_;

  Pointer frame_;
  std::uint32_t fn_ = 0, pc_ = 0;
  Pointer sched_state_, fault_handler_;
  std::uint64_t flags_ = 0;
  bool booting_ = false;
  bool ended_ = false;
  std::optional<std::uint32_t> handler_frame_;
  bool saved_mask_ = false;

  std::set<std::uint64_t> cfl_pcs_;
  std::set<std::tuple<std::uint32_t, std::uint32_t, unsigned>> mem_loads_;
};

TransitionResult Machine::boot(TransitionOracle &oracle, const VmOptions &opts) const {
  return Evaluator(*this, oracle, opts).boot();
}

TransitionResult Machine::run(const Snapshot &s, TransitionOracle &oracle,
                              const VmOptions &opts) const {
  return Evaluator(*this, oracle, opts).run(s);
}

} // namespace gvm
