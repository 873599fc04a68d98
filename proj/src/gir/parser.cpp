#include "ops.hpp"

#include "gvm/abi.hpp"

#include <cctype>
#include <charconv>
#include <map>

namespace gvm::gir {

namespace {

struct Token {
  enum Kind { Eof, Word, Reg, GlobalSym, ConstSym, FuncSym, String, Minus,
              LParen, RParen, LBrace, RBrace, Comma, Colon, Eq, Error };
  Kind kind = Eof;
  std::string_view text;
  int line = 0, col = 0;
};

bool word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.';
}

class Lexer {
public:
  explicit Lexer(std::string_view src) : src_(src) {}

  Token next() {
    skip_space();
    Token t;
    t.line = line_;
    t.col = int(pos_ - line_begin_) + 1;
    if (pos_ >= src_.size()) {
      t.kind = Token::Eof;
      return t;
    }
    char c = src_[pos_];
    std::size_t start = pos_;
    auto single = [&](Token::Kind k) {
      ++pos_;
      t.kind = k;
      t.text = src_.substr(start, 1);
      return t;
    };
    switch (c) {
    case '(': return single(Token::LParen);
    case ')': return single(Token::RParen);
    case '{': return single(Token::LBrace);
    case '}': return single(Token::RBrace);
    case ',': return single(Token::Comma);
    case ':': return single(Token::Colon);
    case '=': return single(Token::Eq);
    case '-': return single(Token::Minus);
    case '"': return string(t);
    case '%': case '@': case '$': case '&': {
      ++pos_;
      std::size_t body = pos_;
      while (pos_ < src_.size() && word_char(src_[pos_]))
        ++pos_;
      t.text = src_.substr(body, pos_ - body);
      if (t.text.empty()) {
        t.kind = Token::Error;
        t.text = src_.substr(start, 1);
        return t;
      }
      t.kind = c == '%' ? Token::Reg
             : c == '@' ? Token::GlobalSym
             : c == '$' ? Token::ConstSym
                        : Token::FuncSym;
      return t;
    }
    default:
      break;
    }
    if (word_char(c)) {
      while (pos_ < src_.size() && word_char(src_[pos_]))
        ++pos_;
      t.kind = Token::Word;
      t.text = src_.substr(start, pos_ - start);
      return t;
    }
    ++pos_;
    t.kind = Token::Error;
    t.text = src_.substr(start, 1);
    return t;
  }

private:
  void skip_space() {
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (c == '\n') {
        ++line_;
        line_begin_ = ++pos_;
      } else if (c == ' ' || c == '\t' || c == '\r') {
        ++pos_;
      } else if (c == ';') {
        while (pos_ < src_.size() && src_[pos_] != '\n')
          ++pos_;
      } else {
        break;
      }
    }
  }

  Token string(Token &t) {
    std::size_t start = ++pos_;
    while (pos_ < src_.size() && src_[pos_] != '"' && src_[pos_] != '\n') {
      if (src_[pos_] == '\\' && pos_ + 1 < src_.size())
        ++pos_;
      ++pos_;
    }
    if (pos_ >= src_.size() || src_[pos_] != '"') {
      t.kind = Token::Error;
      t.text = "\"";
      return t;
    }
    t.kind = Token::String;
    t.text = src_.substr(start, pos_ - start);
    ++pos_;
    return t;
  }

  std::string_view src_;
  std::size_t pos_ = 0, line_begin_ = 0;
  int line_ = 1;
};

std::optional<std::int64_t> parse_int(std::string_view w) {
  std::uint64_t v = 0;
  const char *b = w.data(), *e = w.data() + w.size();
  int base = 10;
  if (w.size() > 2 && w[0] == '0' && (w[1] == 'x' || w[1] == 'X')) {
    b += 2;
    base = 16;
  }
  auto [p, ec] = std::from_chars(b, e, v, base);
  if (ec != std::errc() || p != e)
    return std::nullopt;
  return std::int64_t(v);
}

std::optional<std::vector<std::uint8_t>> parse_hex(std::string_view w) {
  if (w.size() % 2)
    return std::nullopt;
  std::vector<std::uint8_t> out;
  for (std::size_t i = 0; i < w.size(); i += 2) {
    unsigned v = 0;
    auto [p, ec] = std::from_chars(w.data() + i, w.data() + i + 2, v, 16);
    if (ec != std::errc() || p != w.data() + i + 2)
      return std::nullopt;
    out.push_back(std::uint8_t(v));
  }
  return out;
}

std::vector<std::uint8_t> unescape(std::string_view s) {
  std::vector<std::uint8_t> out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    char c = s[i];
    if (c == '\\' && i + 1 < s.size()) {
      char n = s[++i];
      switch (n) {
      case 'n': c = '\n'; break;
      case 't': c = '\t'; break;
      case '0': c = '\0'; break;
      default: c = n; break;
      }
    }
    out.push_back(std::uint8_t(c));
  }
  return out;
}

bool is_keyword(std::string_view w) {
  return w == "fn" || w == "global" || w == "const" || w == "extern";
}

class Parser {
public:
  explicit Parser(std::string_view src) : lex_(src) { advance(); }

  Parsed<Program> run() {
    while (tok_.kind != Token::Eof) {
      if (tok_.kind == Token::Word && tok_.text == "fn")
        function();
      else if (tok_.kind == Token::Word && tok_.text == "global")
        global();
      else if (tok_.kind == Token::Word && tok_.text == "const")
        constant();
      else if (tok_.kind == Token::Word && tok_.text == "extern")
        externs();
      else {
        error(tok_, "expected 'fn', 'global', 'const' or 'extern'");
        recover_line();
      }
    }
    Parsed<Program> out;
    if (!syntax_failed_) {
      check_duplicates();
      for (auto &d : resolve(prog_))
        diags_.push_back(d);
      if (diags_.empty())
        for (auto &d : validate(prog_))
          diags_.push_back(d);
      out.value = std::move(prog_);
    }
    out.diagnostics = std::move(diags_);
    return out;
  }

private:
  void advance() {
    prev_line_ = tok_.line;
    tok_ = lex_.next();
  }

  bool accept(Token::Kind k) {
    if (tok_.kind != k)
      return false;
    advance();
    return true;
  }

  bool expect(Token::Kind k, const char *what) {
    if (accept(k))
      return true;
    error(tok_, std::string("expected ") + what);
    return false;
  }

  void error(const Token &at, std::string msg) {
    if (at.kind == Token::Error)
      msg = "unexpected character '" + std::string(at.text) + "'";
    diags_.push_back({at.line, at.col, std::move(msg)});
    syntax_failed_ = true;
  }

  // Skip the rest of the offending line.
  void recover_line() {
    int line = tok_.line;
    while (tok_.kind != Token::Eof && tok_.line == line)
      advance();
  }

  std::optional<std::string> name(const char *what) {
    if (tok_.kind != Token::Word || is_keyword(tok_.text) ||
        std::isdigit(static_cast<unsigned char>(tok_.text[0]))) {
      error(tok_, std::string("expected ") + what);
      return std::nullopt;
    }
    std::string n(tok_.text);
    advance();
    return n;
  }

  std::optional<std::int64_t> integer(const char *what) {
    bool neg = accept(Token::Minus);
    if (tok_.kind == Token::Word)
      if (auto v = parse_int(tok_.text)) {
        advance();
        return neg ? -*v : *v;
      }
    error(tok_, std::string("expected ") + what);
    return std::nullopt;
  }

  std::optional<std::vector<std::uint8_t>> bytes() {
    if (tok_.kind == Token::String) {
      auto b = unescape(tok_.text);
      b.push_back(0);
      advance();
      return b;
    }
    if (tok_.kind == Token::Word)
      if (auto b = parse_hex(tok_.text)) {
        advance();
        return b;
      }
    error(tok_, "expected hex bytes or string literal");
    return std::nullopt;
  }

  void global() {
    int line = tok_.line;
    advance();
    GlobalDecl g;
    auto n = name("global name");
    auto size = n ? integer("global size") : std::nullopt;
    if (!n || !size || *size < 0 || *size > INT32_MAX) {
      if (n && size)
        error(tok_, "global size out of range");
      recover_line();
      return;
    }
    g.name = *n;
    g.size = std::uint32_t(*size);
    if (tok_.kind == Token::Eq && tok_.line == line) {
      advance();
      auto b = bytes();
      if (!b) {
        recover_line();
        return;
      }
      if (b->size() > g.size) {
        error(tok_, "initializer larger than global '" + g.name + "'");
        return;
      }
      g.init = std::move(*b);
    }
    symbol_lines_.emplace_back(g.name, line);
    prog_.globals.push_back(std::move(g));
  }

  void constant() {
    int line = tok_.line;
    advance();
    auto n = name("constant name");
    if (!n || !expect(Token::Eq, "'='")) {
      recover_line();
      return;
    }
    auto b = bytes();
    if (!b) {
      recover_line();
      return;
    }
    symbol_lines_.emplace_back(*n, line);
    prog_.constants.push_back({*n, std::move(*b)});
  }

  void externs() {
    advance();
    do {
      auto n = name("extern symbol name");
      if (!n) {
        recover_line();
        return;
      }
      prog_.externs.push_back(*n);
    } while (accept(Token::Comma));
  }

  void function() {
    Function f;
    f.line = tok_.line;
    advance();
    auto n = name("function name");
    if (!n || !expect(Token::LParen, "'('")) {
      skip_function();
      return;
    }
    f.name = *n;
    if (tok_.kind != Token::RParen) {
      auto np = integer("parameter count");
      if (!np || *np < 0 || *np > 255) {
        skip_function();
        return;
      }
      f.nparams = std::uint32_t(*np);
    }
    if (!expect(Token::RParen, "')'")) {
      skip_function();
      return;
    }
    std::optional<std::int64_t> regs;
    if (tok_.kind == Token::Word && tok_.text == "regs") {
      advance();
      regs = integer("register count");
      if (!regs || *regs < 0 || *regs > 4096) {
        skip_function();
        return;
      }
    }
    if (!expect(Token::LBrace, "'{'")) {
      skip_function();
      return;
    }
    std::int64_t max_reg = -1;
    while (tok_.kind != Token::RBrace && tok_.kind != Token::Eof) {
      if (tok_.kind == Token::Word && !detail::lookup(mnemonic_base(tok_.text))) {
        Token label = tok_;
        advance();
        if (!accept(Token::Colon)) {
          error(label, "unknown opcode '" + std::string(label.text) + "'");
          recover_line();
          continue;
        }
        f.blocks.push_back({std::string(label.text), {}});
        continue;
      }
      if (f.blocks.empty())
        f.blocks.push_back({"entry", {}});
      if (auto ins = instruction(max_reg))
        f.blocks.back().code.push_back(std::move(*ins));
      else
        recover_line();
    }
    if (!expect(Token::RBrace, "'}'"))
      return;
    f.nregs = regs ? std::uint32_t(*regs)
                   : std::uint32_t(std::max<std::int64_t>(f.nparams, max_reg + 1));
    symbol_lines_.emplace_back(f.name, f.line);
    prog_.functions.push_back(std::move(f));
  }

  void skip_function() {
    while (tok_.kind != Token::Eof && tok_.kind != Token::RBrace)
      advance();
    accept(Token::RBrace);
  }

  static std::string_view mnemonic_base(std::string_view w) {
    auto dot = w.rfind('.');
    if (dot != std::string_view::npos && dot + 1 < w.size() &&
        parse_int(w.substr(dot + 1)))
      return w.substr(0, dot);
    return w;
  }

  std::optional<Instruction> instruction(std::int64_t &max_reg) {
    Instruction ins;
    ins.line = tok_.line;
    ins.col = tok_.col;
    if (tok_.kind == Token::Reg) {
      auto r = parse_int(tok_.text);
      if (!r) {
        error(tok_, "bad register '%" + std::string(tok_.text) + "'");
        return std::nullopt;
      }
      ins.dst = std::int32_t(*r);
      max_reg = std::max(max_reg, *r);
      advance();
      if (!expect(Token::Eq, "'=' after destination register"))
        return std::nullopt;
    }
    if (tok_.kind != Token::Word) {
      error(tok_, "expected opcode");
      return std::nullopt;
    }
    Token optok = tok_;
    auto base = mnemonic_base(tok_.text);
    auto *oi = detail::lookup(base);
    if (!oi) {
      error(tok_, "unknown opcode '" + std::string(tok_.text) + "'");
      return std::nullopt;
    }
    ins.op = oi->op;
    if (base.size() != tok_.text.size()) {
      auto w = parse_int(tok_.text.substr(base.size() + 1));
      if (!oi->takes_width) {
        error(tok_, "opcode '" + std::string(base) + "' takes no width");
        return std::nullopt;
      }
      ins.width = std::uint8_t(*w);
    } else if (oi->takes_width) {
      error(tok_, "opcode '" + std::string(base) + "' needs a width suffix");
      return std::nullopt;
    }
    advance();

    if (ins.op == Op::Call) {
      auto callee = operand(ins, 0, max_reg, true);
      if (!callee || !expect(Token::LParen, "'(' after callee"))
        return std::nullopt;
      ins.args.push_back(*callee);
      if (tok_.kind != Token::RParen) {
        do {
          auto a = operand(ins, ins.args.size(), max_reg, false);
          if (!a)
            return std::nullopt;
          ins.args.push_back(*a);
        } while (accept(Token::Comma));
      }
      if (!expect(Token::RParen, "')'"))
        return std::nullopt;
    } else if (starts_operand(oi->min_args > 0)) {
      do {
        auto a = operand(ins, ins.args.size(), max_reg, false);
        if (!a)
          return std::nullopt;
        ins.args.push_back(*a);
      } while (accept(Token::Comma));
    }

    int n = int(ins.args.size());
    if (n < oi->min_args || (oi->max_args >= 0 && n > oi->max_args)) {
      error(optok, "arity mismatch: '" + std::string(oi->name) + "' takes " +
                       std::to_string(oi->min_args) +
                       (oi->max_args != oi->min_args
                            ? "-" + std::to_string(oi->max_args)
                            : std::string()) +
                       " operand(s), got " + std::to_string(n));
      return std::nullopt;
    }
    if (oi->needs_dst && ins.dst < 0) {
      error(optok, "'" + std::string(oi->name) + "' needs a destination register");
      return std::nullopt;
    }
    return ins;
  }

  // An optional operand (ret) is present only when the next token plainly
  // looks like one; mandatory operand lists always parse.
  bool starts_operand(bool mandatory) const {
    if (mandatory)
      return true;
    if (tok_.line != prev_line_)
      return false;
    switch (tok_.kind) {
    case Token::Reg: case Token::GlobalSym: case Token::ConstSym:
    case Token::FuncSym: case Token::Minus:
      return true;
    case Token::Word:
      return std::isdigit(static_cast<unsigned char>(tok_.text[0])) ||
             abi_constant(tok_.text).has_value();
    default:
      return false;
    }
  }

  std::optional<Operand> operand(const Instruction &ins, std::size_t index,
                                 std::int64_t &max_reg, bool callee) {
    Token t = tok_;
    if (t.line != ins.line) {
      diags_.push_back({ins.line, ins.col, "expected operand before end of line"});
      syntax_failed_ = true;
      return std::nullopt;
    }
    switch (t.kind) {
    case Token::Reg: {
      auto r = parse_int(t.text);
      if (!r) {
        error(t, "bad register '%" + std::string(t.text) + "'");
        return std::nullopt;
      }
      advance();
      max_reg = std::max(max_reg, *r);
      return Operand::reg(*r);
    }
    case Token::GlobalSym:
      advance();
      return Operand::sym(Operand::Kind::Global, std::string(t.text));
    case Token::ConstSym:
      advance();
      return Operand::sym(Operand::Kind::Const, std::string(t.text));
    case Token::FuncSym:
      advance();
      return Operand::sym(Operand::Kind::Func, std::string(t.text));
    case Token::Minus: {
      auto v = integer("integer");
      if (!v)
        return std::nullopt;
      return Operand::imm(*v);
    }
    case Token::Word: {
      if (std::isdigit(static_cast<unsigned char>(t.text[0]))) {
        auto v = parse_int(t.text);
        if (!v) {
          error(t, "bad integer '" + std::string(t.text) + "'");
          return std::nullopt;
        }
        advance();
        return Operand::imm(*v);
      }
      advance();
      if (callee)
        return Operand::sym(Operand::Kind::Func, std::string(t.text));
      bool label = (ins.op == Op::Jump && index == 0) ||
                   (ins.op == Op::Br && (index == 1 || index == 2));
      if (label)
        return Operand::sym(Operand::Kind::Label, std::string(t.text));
      if (auto c = abi_constant(t.text))
        return Operand::imm(*c);
      error(t, "unknown identifier '" + std::string(t.text) + "'");
      return std::nullopt;
    }
    default:
      error(t, "expected operand");
      return std::nullopt;
    }
  }

  void check_duplicates() {
    std::map<std::string, int> seen;
    for (auto &[n, line] : symbol_lines_) {
      auto [it, fresh] = seen.emplace(n, line);
      if (!fresh)
        diags_.push_back({line, 1, "duplicate symbol '" + n + "' (first defined on line " +
                                       std::to_string(it->second) + ")"});
    }
  }

  Lexer lex_;
  Token tok_;
  int prev_line_ = 0;
  Program prog_;
  std::vector<Diagnostic> diags_;
  std::vector<std::pair<std::string, int>> symbol_lines_;
  bool syntax_failed_ = false;
};

} // namespace

Parsed<Program> parse_program(std::string_view text) { return Parser(text).run(); }

} // namespace gvm::gir
