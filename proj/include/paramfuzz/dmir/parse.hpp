// Copyright 2026 paramfuzz project authors. All rights reserved.
// Use of this source code is governed by Apache 2 LICENSE that can be found in the LICENSE file.

#pragma once

#include <cctype>
#include <set>
#include <unordered_map>

#include "paramfuzz/dmir/ast.hpp"
#include "paramfuzz/util.hpp"

namespace paramfuzz::dmir {

// ---------------------------------------------------------------------------
// Lexer

namespace detail {

enum class Tok {
  End,
  Ident,
  Int,
  Str,
  LBrace,
  RBrace,
  LParen,
  RParen,
  LBracket,
  RBracket,
  Semi,
  Colon,
  Comma,
  Dot,
  Assign,
  Eq,
  Ne,
  Lt,
  Le,
  Gt,
  Ge,
  Plus,
  Minus,
  Star,
  Slash,
  Percent,
  AndAnd,
  OrOr,
  Bang,
};

struct Token {
  Tok kind = Tok::End;
  std::string text;
  int64_t ival = 0;
  int line = 1, col = 1;
};

class Lexer {
 public:
  explicit Lexer(const std::string& src) : src_(src) { advance(); }

  const Token& peek() const { return tok_; }

  Token take() {
    Token t = tok_;
    advance();
    return t;
  }

 private:
  void advance() {
    skip_ws();
    tok_ = Token{};
    tok_.line = line_;
    tok_.col = col_;
    if (pos_ >= src_.size()) {
      tok_.kind = Tok::End;
      return;
    }
    char c = src_[pos_];
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      size_t start = pos_;
      while (pos_ < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
        bump();
      tok_.kind = Tok::Ident;
      tok_.text = src_.substr(start, pos_ - start);
      return;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      size_t start = pos_;
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) bump();
      tok_.kind = Tok::Int;
      tok_.text = src_.substr(start, pos_ - start);
      errno = 0;
      tok_.ival = strtoll(tok_.text.c_str(), nullptr, 10);
      if (errno == ERANGE) throw ParseError("integer literal out of range", tok_.line, tok_.col);
      return;
    }
    if (c == '"') {
      bump();
      std::string out;
      while (pos_ < src_.size() && src_[pos_] != '"') {
        char d = src_[pos_];
        if (d == '\\') {
          bump();
          if (pos_ >= src_.size()) break;
          char e = src_[pos_];
          switch (e) {
            case 'n': out.push_back('\n'); break;
            case 't': out.push_back('\t'); break;
            case '\\': out.push_back('\\'); break;
            case '"': out.push_back('"'); break;
            default: throw ParseError("bad escape", line_, col_);
          }
          bump();
        } else if (d == '\n') {
          throw ParseError("unterminated string", tok_.line, tok_.col);
        } else {
          out.push_back(d);
          bump();
        }
      }
      if (pos_ >= src_.size()) throw ParseError("unterminated string", tok_.line, tok_.col);
      bump();  // closing quote
      tok_.kind = Tok::Str;
      tok_.text = out;
      return;
    }
    bump();
    switch (c) {
      case '{': tok_.kind = Tok::LBrace; return;
      case '}': tok_.kind = Tok::RBrace; return;
      case '(': tok_.kind = Tok::LParen; return;
      case ')': tok_.kind = Tok::RParen; return;
      case '[': tok_.kind = Tok::LBracket; return;
      case ']': tok_.kind = Tok::RBracket; return;
      case ';': tok_.kind = Tok::Semi; return;
      case ':': tok_.kind = Tok::Colon; return;
      case ',': tok_.kind = Tok::Comma; return;
      case '.': tok_.kind = Tok::Dot; return;
      case '+': tok_.kind = Tok::Plus; return;
      case '-': tok_.kind = Tok::Minus; return;
      case '*': tok_.kind = Tok::Star; return;
      case '/': tok_.kind = Tok::Slash; return;
      case '%': tok_.kind = Tok::Percent; return;
      case '=':
        if (pos_ < src_.size() && src_[pos_] == '=') {
          bump();
          tok_.kind = Tok::Eq;
        } else {
          tok_.kind = Tok::Assign;
        }
        return;
      case '!':
        if (pos_ < src_.size() && src_[pos_] == '=') {
          bump();
          tok_.kind = Tok::Ne;
        } else {
          tok_.kind = Tok::Bang;
        }
        return;
      case '<':
        if (pos_ < src_.size() && src_[pos_] == '=') {
          bump();
          tok_.kind = Tok::Le;
        } else {
          tok_.kind = Tok::Lt;
        }
        return;
      case '>':
        if (pos_ < src_.size() && src_[pos_] == '=') {
          bump();
          tok_.kind = Tok::Ge;
        } else {
          tok_.kind = Tok::Gt;
        }
        return;
      case '&':
        if (pos_ < src_.size() && src_[pos_] == '&') {
          bump();
          tok_.kind = Tok::AndAnd;
          return;
        }
        throw ParseError("stray '&'", line_, col_);
      case '|':
        if (pos_ < src_.size() && src_[pos_] == '|') {
          bump();
          tok_.kind = Tok::OrOr;
          return;
        }
        throw ParseError("stray '|'", line_, col_);
      default:
        throw ParseError(std::string("unexpected character '") + c + "'", tok_.line, tok_.col);
    }
  }

  void skip_ws() {
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (c == '#') {
        while (pos_ < src_.size() && src_[pos_] != '\n') bump();
      } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        bump();
      } else {
        break;
      }
    }
  }

  void bump() {
    if (src_[pos_] == '\n') {
      line_++;
      col_ = 1;
    } else {
      col_++;
    }
    pos_++;
  }

  const std::string& src_;
  size_t pos_ = 0;
  int line_ = 1, col_ = 1;
  Token tok_;
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Parser. Ids (blocks, edges, statements) are assigned in parse order, which
// makes them a pure function of the source text.

class Parser {
 public:
  static DmirProgram parse(const std::string& source) {
    Parser p(source);
    p.parse_program();
    p.resolve();
    p.prog_.source_hash = fnv1a64(source);
    return std::move(p.prog_);
  }

 private:
  using Tok = detail::Tok;
  using Token = detail::Token;

  explicit Parser(const std::string& src) : lex_(src) {}

  // --- token helpers

  [[noreturn]] void fail(const std::string& msg) {
    const Token& t = lex_.peek();
    throw ParseError(msg, t.line, t.col);
  }

  Token expect(Tok k, const char* what) {
    if (lex_.peek().kind != k) fail(std::string("expected ") + what);
    return lex_.take();
  }

  bool accept(Tok k) {
    if (lex_.peek().kind == k) {
      lex_.take();
      return true;
    }
    return false;
  }

  bool peek_kw(const char* kw) {
    return lex_.peek().kind == Tok::Ident && lex_.peek().text == kw;
  }

  bool accept_kw(const char* kw) {
    if (peek_kw(kw)) {
      lex_.take();
      return true;
    }
    return false;
  }

  Token expect_kw(const char* kw) {
    if (!peek_kw(kw)) fail(std::string("expected '") + kw + "'");
    return lex_.take();
  }

  std::string expect_ident(const char* what) {
    if (lex_.peek().kind != Tok::Ident) fail(std::string("expected ") + what);
    return lex_.take().text;
  }

  // --- id assignment

  BlockPtr new_block() {
    auto b = std::make_unique<Block>();
    b->id = prog_.block_count++;
    return b;
  }

  int new_edge() { return prog_.edge_count++; }
  int new_stmt_id() { return prog_.stmt_count++; }

  // --- grammar

  void parse_program() {
    while (lex_.peek().kind != Tok::End) {
      if (accept_kw("module")) {
        parse_module();
      } else if (accept_kw("bus")) {
        prog_.buses.push_back(expect_ident("bus name"));
        expect(Tok::Semi, "';'");
      } else if (accept_kw("device")) {
        parse_device();
      } else {
        fail("expected 'module', 'bus' or 'device'");
      }
    }
  }

  void parse_module() {
    ModuleDecl m;
    m.name = expect_ident("module name");
    expect(Tok::LBrace, "'{'");
    while (!accept(Tok::RBrace)) {
      if (accept_kw("param")) {
        ParamDecl p;
        p.name = expect_ident("param name");
        expect(Tok::Colon, "':'");
        p.type = parse_ptype();
        expect(Tok::Assign, "'='");
        p.def = parse_literal();
        expect(Tok::Semi, "';'");
        if (!literal_matches(p.def, p.type))
          throw TypeError("param " + m.name + "." + p.name + ": default literal does not match " +
                          ptype_name(p.type));
        if (p.type == PType::Int) p.def.type = PType::Int;
        m.params.push_back(std::move(p));
      } else if (accept_kw("driver")) {
        m.drivers.push_back(parse_driver());
      } else {
        fail("expected 'param' or 'driver'");
      }
    }
    prog_.modules.push_back(std::move(m));
  }

  PType parse_ptype() {
    std::string t = expect_ident("type");
    if (t == "uint") return PType::Uint;
    if (t == "int") return PType::Int;
    if (t == "bool") return PType::Bool;
    if (t == "string") return PType::String;
    fail("unknown type '" + t + "'");
  }

  Literal parse_literal() {
    Literal lit;
    const Token& t = lex_.peek();
    if (t.kind == Tok::Int) {
      lit.type = PType::Uint;
      lit.i = lex_.take().ival;
    } else if (t.kind == Tok::Minus) {
      lex_.take();
      Token v = expect(Tok::Int, "integer");
      lit.type = PType::Int;
      lit.i = -v.ival;
    } else if (t.kind == Tok::Str) {
      lit.type = PType::String;
      lit.s = lex_.take().text;
    } else if (peek_kw("true")) {
      lex_.take();
      lit.type = PType::Bool;
      lit.i = 1;
    } else if (peek_kw("false")) {
      lex_.take();
      lit.type = PType::Bool;
      lit.i = 0;
    } else {
      fail("expected literal");
    }
    return lit;
  }

  // Does an integer-class literal fit the declared type?
  static bool literal_matches(const Literal& lit, PType t) {
    switch (t) {
      case PType::Uint: return lit.type == PType::Uint && lit.i >= 0;
      case PType::Int: return lit.type == PType::Int || lit.type == PType::Uint;
      case PType::Bool: return lit.type == PType::Bool;
      case PType::String: return lit.type == PType::String;
    }
    return false;
  }

  DriverDecl parse_driver() {
    DriverDecl d;
    d.name = expect_ident("driver name");
    expect(Tok::LBrace, "'{'");
    while (!accept(Tok::RBrace)) {
      if (accept_kw("devnode")) {
        d.devnode = true;
        expect(Tok::Semi, "';'");
      } else if (accept_kw("field")) {
        FieldDecl f;
        f.name = expect_ident("field name");
        expect(Tok::Colon, "':'");
        std::string t = expect_ident("field type");
        if (t == "uint") f.type = FType::Uint;
        else if (t == "int") f.type = FType::Int;
        else if (t == "bool") f.type = FType::Bool;
        else if (t == "string") f.type = FType::String;
        else if (t == "handle") f.type = FType::Handle;
        else if (t == "list") f.type = FType::List;
        else fail("unknown field type '" + t + "'");
        if (accept(Tok::Assign)) {
          if (f.type == FType::Handle || f.type == FType::List)
            fail("handle/list fields cannot have defaults");
          f.def = parse_literal();
          f.has_default = true;
          PType pt = f.type == FType::Uint   ? PType::Uint
                     : f.type == FType::Int  ? PType::Int
                     : f.type == FType::Bool ? PType::Bool
                                             : PType::String;
          if (!literal_matches(f.def, pt))
            throw TypeError("field " + d.name + "." + f.name + ": default literal does not match " +
                            ftype_name(f.type));
        }
        expect(Tok::Semi, "';'");
        d.fields.push_back(std::move(f));
      } else if (peek_kw("attr") || peek_kw("group")) {
        d.attrs.push_back(parse_attr_node(0));
      } else if (accept_kw("op")) {
        d.ops.push_back(parse_op());
      } else {
        fail("expected 'devnode', 'field', 'attr', 'group' or 'op'");
      }
    }
    return d;
  }

  AttrNode parse_attr_node(int depth) {
    if (depth > 8) fail("attribute group nesting deeper than 8");
    AttrNode node;
    if (accept_kw("group")) {
      auto g = std::make_unique<AttrGroupDecl>();
      g->name = expect_ident("group name");
      expect(Tok::LBrace, "'{'");
      while (!accept(Tok::RBrace)) {
        if (!peek_kw("attr") && !peek_kw("group")) fail("expected 'attr' or 'group'");
        g->members.push_back(parse_attr_node(depth + 1));
      }
      node.group = std::move(g);
      return node;
    }
    expect_kw("attr");
    auto a = std::make_unique<AttrDecl>();
    a->line = lex_.peek().line;
    a->fname = expect(Tok::Str, "attribute file name string").text;
    if (accept_kw("rw")) a->writable = true;
    else if (accept_kw("ro")) a->writable = false;
    else fail("expected 'rw' or 'ro'");
    expect(Tok::LBrace, "'{'");
    while (!accept(Tok::RBrace)) {
      if (accept_kw("store")) {
        if (a->store) fail("duplicate store block");
        a->store = parse_block();
      } else if (accept_kw("show")) {
        if (a->show) fail("duplicate show block");
        a->show = parse_block();
      } else {
        fail("expected 'store' or 'show'");
      }
    }
    if (a->writable && !a->store) fail("rw attribute \"" + a->fname + "\" has no store block");
    node.attr = std::move(a);
    return node;
  }

  OpDecl parse_op() {
    OpDecl op;
    op.name = expect_ident("op name");
    expect(Tok::LParen, "'('");
    if (!accept(Tok::RParen)) {
      do {
        OpArg a;
        a.name = expect_ident("argument name");
        expect(Tok::Colon, "':'");
        a.type = parse_ptype();
        if (a.type == PType::Bool) fail("op arguments must be uint, int or string");
        op.args.push_back(std::move(a));
      } while (accept(Tok::Comma));
      expect(Tok::RParen, "')'");
    }
    op.body = parse_block();
    return op;
  }

  void parse_device() {
    DeviceDecl dev;
    dev.line = lex_.peek().line;
    dev.id = expect_ident("device id");
    expect(Tok::Colon, "':'");
    expect_kw("driver");
    expect(Tok::Assign, "'='");
    dev.driver = expect_ident("driver name");
    expect(Tok::Comma, "','");
    expect_kw("parent");
    expect(Tok::Assign, "'='");
    dev.parent = expect_ident("parent id");
    if (accept(Tok::Comma)) {
      expect_kw("devnode");
      expect(Tok::Assign, "'='");
      dev.devnode_name = expect(Tok::Str, "devnode name string").text;
    }
    expect(Tok::Semi, "';'");
    prog_.devices.push_back(std::move(dev));
  }

  // --- statements

  BlockPtr parse_block() {
    expect(Tok::LBrace, "'{'");
    auto blk = new_block();
    while (!accept(Tok::RBrace)) blk->stmts.push_back(parse_stmt());
    return blk;
  }

  Stmt parse_stmt() {
    Stmt s;
    s.line = lex_.peek().line;
    s.col = lex_.peek().col;
    s.id = new_stmt_id();

    if (accept_kw("if")) {
      s.kind = StmtKind::If;
      s.true_edge = new_edge();
      s.false_edge = new_edge();
      expect(Tok::LParen, "'('");
      s.cond = parse_expr();
      expect(Tok::RParen, "')'");
      s.then_blk = parse_block();
      if (accept_kw("else")) s.else_blk = parse_block();
      return s;
    }
    if (accept_kw("switch")) {
      s.kind = StmtKind::Switch;
      expect(Tok::LParen, "'('");
      s.cond = parse_expr();
      expect(Tok::RParen, "')'");
      expect(Tok::LBrace, "'{'");
      while (accept_kw("case")) {
        Stmt::Case c;
        c.edge = new_edge();
        c.label = parse_literal();
        expect(Tok::Colon, "':'");
        c.body = parse_block();
        s.cases.push_back(std::move(c));
      }
      if (accept_kw("default")) {
        s.default_edge = new_edge();
        expect(Tok::Colon, "':'");
        s.default_blk = parse_block();
      } else {
        s.default_edge = new_edge();  // implicit fall-through edge
      }
      expect(Tok::RBrace, "'}'");
      if (s.cases.empty()) fail("switch needs at least one case");
      return s;
    }
    if (accept_kw("return")) {
      s.kind = StmtKind::Return;
      std::string code = expect_ident("status code");
      if (code == "OK") s.status = Status::Ok;
      else if (code == "EINVAL") s.status = Status::Einval;
      else if (code == "EIO") s.status = Status::Eio;
      else fail("unknown status '" + code + "'");
      expect(Tok::Semi, "';'");
      return s;
    }
    if (accept_kw("let")) {
      s.kind = StmtKind::HelperLet;
      s.let_name = expect_ident("binding name");
      expect(Tok::Assign, "'='");
      std::string h = expect_ident("helper name");
      expect(Tok::LParen, "'('");
      expect_kw("buf");
      if (h == "match_string") {
        s.helper = Helper::MatchString;
        expect(Tok::Comma, "','");
        expect(Tok::LBracket, "'['");
        do {
          s.match_set.push_back(expect(Tok::Str, "string").text);
        } while (accept(Tok::Comma));
        expect(Tok::RBracket, "']'");
      } else if (h == "kstrtouint") {
        s.helper = Helper::KstrToUint;
      } else if (h == "kstrtoint") {
        s.helper = Helper::KstrToInt;
      } else if (h == "kstrtobool") {
        s.helper = Helper::KstrToBool;
      } else if (h == "scan") {
        s.helper = Helper::Scan;
        expect(Tok::Comma, "','");
        s.scan_format = expect(Tok::Str, "format string").text;
        validate_scan_format(s.scan_format);
      } else {
        fail("unknown helper '" + h + "'");
      }
      expect(Tok::RParen, "')'");
      expect(Tok::Semi, "';'");
      return s;
    }
    if (peek_kw("lock") || peek_kw("unlock")) {
      s.kind = peek_kw("unlock") ? StmtKind::Unlock : StmtKind::Lock;
      lex_.take();
      expect(Tok::LParen, "'('");
      s.lock_name = expect_ident("lock name");
      expect(Tok::RParen, "')'");
      expect(Tok::Semi, "';'");
      return s;
    }
    if (peek_kw("alloc") || peek_kw("free") || peek_kw("use")) {
      s.kind = peek_kw("alloc") ? StmtKind::Alloc
               : peek_kw("free") ? StmtKind::Free
                                 : StmtKind::Use;
      lex_.take();
      expect(Tok::LParen, "'('");
      s.lv = parse_lvalue();
      expect(Tok::RParen, "')'");
      expect(Tok::Semi, "';'");
      return s;
    }
    if (peek_kw("list_add") || peek_kw("list_del")) {
      s.kind = peek_kw("list_del") ? StmtKind::ListDel : StmtKind::ListAdd;
      lex_.take();
      expect(Tok::LParen, "'('");
      s.list = parse_listref();
      expect(Tok::Comma, "','");
      s.lv = parse_lvalue();
      expect(Tok::RParen, "')'");
      expect(Tok::Semi, "';'");
      return s;
    }
    if (accept_kw("list_iter")) {
      s.kind = StmtKind::ListIter;
      expect(Tok::LParen, "'('");
      s.list = parse_listref();
      expect(Tok::RParen, "')'");
      s.body = parse_block();
      return s;
    }
    if (accept_kw("yield")) {
      s.kind = StmtKind::Yield;
      expect(Tok::Semi, "';'");
      return s;
    }

    // assignment: lvalue = expr ;
    s.kind = StmtKind::Assign;
    s.lv = parse_lvalue();
    if (s.lv.kind == LValue::It) fail("cannot assign to 'it'");
    expect(Tok::Assign, "'='");
    s.rhs = parse_expr();
    expect(Tok::Semi, "';'");
    return s;
  }

  static void validate_scan_format(const std::string& fmt) {
    int directives = 0;
    for (size_t i = 0; i < fmt.size(); i++) {
      if (fmt[i] == '%') {
        if (i + 1 >= fmt.size()) throw ResolveError("scan: trailing '%' in format");
        char d = fmt[i + 1];
        if (d != 'u' && d != 'd' && d != 's')
          throw ResolveError(std::string("scan: unsupported directive %") + d);
        directives++;
        i++;
      }
    }
    if (directives != 1) throw ResolveError("scan: format must contain exactly one directive");
  }

  LValue parse_lvalue() {
    LValue lv;
    lv.line = lex_.peek().line;
    lv.col = lex_.peek().col;
    if (accept_kw("it")) {
      lv.kind = LValue::It;
      return lv;
    }
    if (accept_kw("self")) {
      lv.kind = LValue::SelfField;
    } else if (accept_kw("parent")) {
      lv.kind = LValue::ParentField;
    } else {
      fail("expected 'self', 'parent' or 'it'");
    }
    expect(Tok::Dot, "'.'");
    lv.field = expect_ident("field name");
    return lv;
  }

  ListRef parse_listref() {
    ListRef lr;
    if (accept_kw("self")) {
      expect(Tok::Dot, "'.'");
      lr.global = false;
      lr.name = expect_ident("list field name");
    } else {
      lr.global = true;
      lr.name = expect_ident("list name");
    }
    return lr;
  }

  // --- expressions (precedence climbing)

  Expr parse_expr() { return parse_or(); }

  Expr parse_or() {
    Expr e = parse_and();
    while (lex_.peek().kind == Tok::OrOr) {
      Token t = lex_.take();
      Expr rhs = parse_and();
      e = make_bin(BinOp::Or, std::move(e), std::move(rhs), t);
    }
    return e;
  }

  Expr parse_and() {
    Expr e = parse_cmp();
    while (lex_.peek().kind == Tok::AndAnd) {
      Token t = lex_.take();
      Expr rhs = parse_cmp();
      e = make_bin(BinOp::And, std::move(e), std::move(rhs), t);
    }
    return e;
  }

  Expr parse_cmp() {
    Expr e = parse_add();
    for (;;) {
      BinOp op;
      switch (lex_.peek().kind) {
        case Tok::Eq: op = BinOp::Eq; break;
        case Tok::Ne: op = BinOp::Ne; break;
        case Tok::Lt: op = BinOp::Lt; break;
        case Tok::Le: op = BinOp::Le; break;
        case Tok::Gt: op = BinOp::Gt; break;
        case Tok::Ge: op = BinOp::Ge; break;
        default: return e;
      }
      Token t = lex_.take();
      Expr rhs = parse_add();
      e = make_bin(op, std::move(e), std::move(rhs), t);
    }
  }

  Expr parse_add() {
    Expr e = parse_mul();
    for (;;) {
      BinOp op;
      if (lex_.peek().kind == Tok::Plus) op = BinOp::Add;
      else if (lex_.peek().kind == Tok::Minus) op = BinOp::Sub;
      else return e;
      Token t = lex_.take();
      Expr rhs = parse_mul();
      e = make_bin(op, std::move(e), std::move(rhs), t);
    }
  }

  Expr parse_mul() {
    Expr e = parse_unary();
    for (;;) {
      BinOp op;
      if (lex_.peek().kind == Tok::Star) op = BinOp::Mul;
      else if (lex_.peek().kind == Tok::Slash) op = BinOp::Div;
      else if (lex_.peek().kind == Tok::Percent) op = BinOp::Mod;
      else if (peek_kw("mod")) op = BinOp::Mod;
      else return e;
      Token t = lex_.take();
      Expr rhs = parse_unary();
      e = make_bin(op, std::move(e), std::move(rhs), t);
    }
  }

  Expr parse_unary() {
    if (lex_.peek().kind == Tok::Bang) {
      Token t = lex_.take();
      Expr e;
      e.kind = ExprKind::Unary;
      e.uop = UnOp::Not;
      e.line = t.line;
      e.col = t.col;
      e.kids.push_back(parse_unary());
      return e;
    }
    if (lex_.peek().kind == Tok::Minus) {
      Token t = lex_.take();
      Expr e;
      e.kind = ExprKind::Unary;
      e.uop = UnOp::Neg;
      e.line = t.line;
      e.col = t.col;
      e.kids.push_back(parse_unary());
      return e;
    }
    return parse_primary();
  }

  Expr parse_primary() {
    Expr e;
    const Token& t = lex_.peek();
    e.line = t.line;
    e.col = t.col;
    if (t.kind == Tok::Int) {
      e.kind = ExprKind::IntLit;
      e.ival = lex_.take().ival;
      return e;
    }
    if (t.kind == Tok::Str) {
      e.kind = ExprKind::StrLit;
      e.sval = lex_.take().text;
      return e;
    }
    if (t.kind == Tok::LParen) {
      lex_.take();
      e = parse_expr();
      expect(Tok::RParen, "')'");
      return e;
    }
    if (t.kind == Tok::Ident) {
      if (t.text == "true" || t.text == "false") {
        e.kind = ExprKind::BoolLit;
        e.ival = t.text == "true" ? 1 : 0;
        lex_.take();
        return e;
      }
      if (t.text == "buf") {
        e.kind = ExprKind::BufRef;
        lex_.take();
        return e;
      }
      if (t.text == "self" || t.text == "parent") {
        bool self = t.text == "self";
        lex_.take();
        expect(Tok::Dot, "'.'");
        e.kind = self ? ExprKind::SelfField : ExprKind::ParentField;
        e.name = expect_ident("field name");
        return e;
      }
      if (t.text == "param") {
        lex_.take();
        expect(Tok::Dot, "'.'");
        e.kind = ExprKind::ParamRef;
        e.module = expect_ident("module name");
        expect(Tok::Dot, "'.'");
        e.name = expect_ident("param name");
        return e;
      }
      // bare identifier: op argument or let-local; resolved later
      e.kind = ExprKind::ArgRef;
      e.name = lex_.take().text;
      return e;
    }
    fail("expected expression");
  }

  static Expr make_bin(BinOp op, Expr lhs, Expr rhs, const Token& t) {
    Expr e;
    e.kind = ExprKind::Binary;
    e.bop = op;
    e.line = t.line;
    e.col = t.col;
    e.kids.push_back(std::move(lhs));
    e.kids.push_back(std::move(rhs));
    return e;
  }

  // -------------------------------------------------------------------------
  // Resolution: uniqueness, reference and type checks, slot assignment.

  enum class VType { Int, Str, Handle };

  struct BodyCtx {
    int module = -1;
    const DriverDecl* driver = nullptr;
    const OpDecl* op = nullptr;  // set for op bodies
    bool in_store = false;
    std::unordered_map<std::string, std::pair<int, VType>> locals;  // name -> (slot, type)
    int next_local = 0;
    int iter_depth = 0;
  };

  void resolve() {
    // Name uniqueness.
    std::set<std::string> mod_names, drv_names, dev_ids;
    for (auto& m : prog_.modules) {
      if (!mod_names.insert(m.name).second)
        throw ResolveError("duplicate module name '" + m.name + "'");
      std::set<std::string> pnames;
      for (auto& p : m.params)
        if (!pnames.insert(p.name).second)
          throw ResolveError("duplicate param '" + m.name + "." + p.name + "'");
      for (auto& d : m.drivers) {
        if (!drv_names.insert(d.name).second)
          throw ResolveError("duplicate driver name '" + d.name + "'");
        std::set<std::string> fnames, onames, anames;
        for (auto& f : d.fields)
          if (!fnames.insert(f.name).second)
            throw ResolveError("duplicate field '" + d.name + "." + f.name + "'");
        for (auto& o : d.ops)
          if (!onames.insert(o.name).second)
            throw ResolveError("duplicate op '" + d.name + "." + o.name + "'");
        for (const auto& fa : flatten_attrs(d))
          if (!anames.insert(fa.attr->fname).second)
            throw ResolveError("duplicate attribute \"" + fa.attr->fname + "\" in driver '" +
                               d.name + "'");
      }
    }
    for (auto& b : prog_.buses) {
      if (mod_names.count(b)) throw ResolveError("bus '" + b + "' collides with a module name");
    }

    // Flat param slots.
    for (size_t m = 0; m < prog_.modules.size(); m++)
      for (size_t p = 0; p < prog_.modules[m].params.size(); p++) {
        prog_.modules[m].params[p].flat_index = static_cast<int>(prog_.flat_params.size());
        prog_.flat_params.emplace_back(static_cast<int>(m), static_cast<int>(p));
      }

    // Field slots.
    for (auto& m : prog_.modules)
      for (size_t di = 0; di < m.drivers.size(); di++) {
        auto& d = m.drivers[di];
        d.module_index = static_cast<int>(&m - prog_.modules.data());
        for (auto& f : d.fields) {
          if (f.type == FType::List) f.list_slot = d.list_count++;
          else f.slot = d.scalar_count++;
        }
      }

    // Devices.
    for (auto& dev : prog_.devices) {
      if (!dev_ids.insert(dev.id).second)
        throw ResolveError("duplicate device id '" + dev.id + "'");
    }
    for (auto& dev : prog_.devices) {
      const DriverDecl* drv = prog_.find_driver(dev.driver, &dev.driver_module, &dev.driver_index);
      if (!drv) throw ResolveError("device '" + dev.id + "': unknown driver '" + dev.driver + "'");
      if (drv->devnode != dev.devnode_name.has_value())
        throw ResolveError("device '" + dev.id + "': devnode name must be present iff driver '" +
                           drv->name + "' declares devnode");
      if (prog_.is_bus(dev.parent)) {
        dev.parent_device = -1;
      } else {
        dev.parent_device = prog_.find_device(dev.parent);
        if (dev.parent_device < 0)
          throw ResolveError("device '" + dev.id + "': unknown parent '" + dev.parent + "'");
      }
    }
    // Parent acyclicity.
    for (size_t i = 0; i < prog_.devices.size(); i++) {
      int steps = 0;
      int cur = static_cast<int>(i);
      while (cur >= 0) {
        cur = prog_.devices[cur].parent_device;
        if (++steps > static_cast<int>(prog_.devices.size()))
          throw ResolveError("device '" + prog_.devices[i].id + "': parent cycle");
      }
    }

    // Bodies.
    for (size_t m = 0; m < prog_.modules.size(); m++) {
      for (auto& d : prog_.modules[m].drivers) {
        for (auto& node : d.attrs) resolve_attr_node(static_cast<int>(m), d, node);
        for (auto& op : d.ops) {
          BodyCtx ctx;
          ctx.module = static_cast<int>(m);
          ctx.driver = &d;
          ctx.op = &op;
          resolve_block(*op.body, ctx);
          op.locals = ctx.next_local;
        }
      }
    }
  }

  void resolve_attr_node(int mod, DriverDecl& d, AttrNode& node) {
    if (node.group) {
      for (auto& m : node.group->members) resolve_attr_node(mod, d, m);
      return;
    }
    AttrDecl& a = *node.attr;
    if (a.store) {
      BodyCtx ctx;
      ctx.module = mod;
      ctx.driver = &d;
      ctx.in_store = true;
      resolve_block(*a.store, ctx);
      a.store_locals = ctx.next_local;
    }
    if (a.show) {
      BodyCtx ctx;
      ctx.module = mod;
      ctx.driver = &d;
      resolve_block(*a.show, ctx);
      a.show_locals = ctx.next_local;
    }
  }

  int lock_id(const std::string& name) {
    for (size_t i = 0; i < prog_.lock_names.size(); i++)
      if (prog_.lock_names[i] == name) return static_cast<int>(i);
    prog_.lock_names.push_back(name);
    return static_cast<int>(prog_.lock_names.size() - 1);
  }

  int global_list_id(const std::string& name) {
    for (size_t i = 0; i < prog_.global_lists.size(); i++)
      if (prog_.global_lists[i] == name) return static_cast<int>(i);
    prog_.global_lists.push_back(name);
    return static_cast<int>(prog_.global_lists.size() - 1);
  }

  static VType ftype_class(FType t) {
    switch (t) {
      case FType::String: return VType::Str;
      case FType::Handle: return VType::Handle;
      default: return VType::Int;
    }
  }

  // Any driver in the program declaring `field`? Used for parent.x checks.
  const FieldDecl* any_driver_field(const std::string& field) const {
    for (const auto& m : prog_.modules)
      for (const auto& d : m.drivers)
        if (const FieldDecl* f = d.find_field(field)) return f;
    return nullptr;
  }

  void resolve_lvalue(LValue& lv, BodyCtx& ctx, bool want_handle) {
    if (lv.kind == LValue::It) {
      if (ctx.iter_depth == 0) throw ResolveError("'it' used outside list_iter");
      return;
    }
    const FieldDecl* f = nullptr;
    if (lv.kind == LValue::SelfField) {
      f = ctx.driver->find_field(lv.field);
      if (!f)
        throw ResolveError("driver '" + ctx.driver->name + "' has no field '" + lv.field + "'");
      lv.index = f->slot;
    } else {
      f = any_driver_field(lv.field);
      if (!f) throw ResolveError("no driver declares field '" + lv.field + "' (parent ref)");
      // parent fields are resolved by name at runtime; index stays -1
    }
    if (want_handle && f->type != FType::Handle)
      throw TypeError("'" + lv.field + "' is not a handle field");
    if (!want_handle && f->type == FType::List)
      throw TypeError("list field '" + lv.field + "' cannot be assigned");
  }

  void resolve_listref(ListRef& lr, BodyCtx& ctx) {
    if (lr.global) {
      lr.index = global_list_id(lr.name);
      return;
    }
    const FieldDecl* f = ctx.driver->find_field(lr.name);
    if (!f || f->type != FType::List)
      throw ResolveError("'" + lr.name + "' is not a list field of driver '" + ctx.driver->name +
                         "'");
    lr.index = f->list_slot;
  }

  void resolve_block(Block& blk, BodyCtx& ctx) {
    for (auto& s : blk.stmts) resolve_stmt(s, ctx);
  }

  void resolve_stmt(Stmt& s, BodyCtx& ctx) {
    switch (s.kind) {
      case StmtKind::Assign: {
        VType rt = resolve_expr(s.rhs, ctx);
        if (s.lv.kind == LValue::It) throw ResolveError("cannot assign to 'it'");
        resolve_lvalue(s.lv, ctx, /*want_handle=*/false);
        const FieldDecl* f = s.lv.kind == LValue::SelfField ? ctx.driver->find_field(s.lv.field)
                                                            : any_driver_field(s.lv.field);
        VType lt = ftype_class(f->type);
        if (lt == VType::Handle) {
          bool ok = (s.rhs.kind == ExprKind::SelfField || s.rhs.kind == ExprKind::ParentField) &&
                    rt == VType::Handle;
          if (!ok) throw TypeError("handle fields can only be assigned from handle fields");
        } else if (lt != rt) {
          throw TypeError("type mismatch assigning to '" + s.lv.field + "'");
        }
        break;
      }
      case StmtKind::If: {
        if (resolve_expr(s.cond, ctx) != VType::Int)
          throw TypeError("if condition must be integer/bool");
        resolve_block(*s.then_blk, ctx);
        if (s.else_blk) resolve_block(*s.else_blk, ctx);
        break;
      }
      case StmtKind::Switch: {
        VType st = resolve_expr(s.cond, ctx);
        if (st == VType::Handle) throw TypeError("cannot switch on a handle");
        for (auto& c : s.cases) {
          bool lbl_str = c.label.type == PType::String;
          if ((st == VType::Str) != lbl_str)
            throw TypeError("switch case label type mismatch");
          resolve_block(*c.body, ctx);
        }
        if (s.default_blk) resolve_block(*s.default_blk, ctx);
        break;
      }
      case StmtKind::Return:
        break;
      case StmtKind::HelperLet: {
        if (!ctx.in_store) throw ResolveError("helper calls may appear only inside store blocks");
        if (ctx.locals.count(s.let_name) ||
            (ctx.op && [&] {
              for (const auto& a : ctx.op->args)
                if (a.name == s.let_name) return true;
              return false;
            }()))
          throw ResolveError("duplicate binding '" + s.let_name + "'");
        VType vt = VType::Int;
        if (s.helper == Helper::Scan && s.scan_format.find("%s") != std::string::npos)
          vt = VType::Str;
        s.let_slot = ctx.next_local++;
        ctx.locals[s.let_name] = {s.let_slot, vt};
        break;
      }
      case StmtKind::Lock:
      case StmtKind::Unlock:
        s.lock_index = lock_id(s.lock_name);
        break;
      case StmtKind::Alloc:
        if (s.lv.kind == LValue::It) throw ResolveError("cannot alloc into 'it'");
        resolve_lvalue(s.lv, ctx, /*want_handle=*/true);
        break;
      case StmtKind::Free:
      case StmtKind::Use:
        resolve_lvalue(s.lv, ctx, /*want_handle=*/true);
        break;
      case StmtKind::ListAdd:
      case StmtKind::ListDel:
        resolve_listref(s.list, ctx);
        resolve_lvalue(s.lv, ctx, /*want_handle=*/true);
        break;
      case StmtKind::ListIter: {
        resolve_listref(s.list, ctx);
        ctx.iter_depth++;
        resolve_block(*s.body, ctx);
        ctx.iter_depth--;
        break;
      }
      case StmtKind::Yield:
        break;
    }
  }

  VType resolve_expr(Expr& e, BodyCtx& ctx) {
    switch (e.kind) {
      case ExprKind::IntLit:
      case ExprKind::BoolLit:
        return VType::Int;
      case ExprKind::StrLit:
        return VType::Str;
      case ExprKind::BufRef:
        if (!ctx.in_store)
          throw ResolveError("'buf' is only available inside store blocks");
        return VType::Str;
      case ExprKind::SelfField: {
        const FieldDecl* f = ctx.driver->find_field(e.name);
        if (!f)
          throw ResolveError("driver '" + ctx.driver->name + "' has no field '" + e.name + "'");
        if (f->type == FType::List) throw TypeError("list field in expression");
        e.index = f->slot;
        return ftype_class(f->type);
      }
      case ExprKind::ParentField: {
        const FieldDecl* f = any_driver_field(e.name);
        if (!f) throw ResolveError("no driver declares field '" + e.name + "' (parent ref)");
        if (f->type == FType::List) throw TypeError("list field in expression");
        return ftype_class(f->type);
      }
      case ExprKind::ParamRef: {
        for (size_t m = 0; m < prog_.modules.size(); m++) {
          if (prog_.modules[m].name != e.module) continue;
          for (auto& p : prog_.modules[m].params)
            if (p.name == e.name) {
              e.index = p.flat_index;
              return p.type == PType::String ? VType::Str : VType::Int;
            }
          throw ResolveError("module '" + e.module + "' has no param '" + e.name + "'");
        }
        throw ResolveError("unknown module '" + e.module + "' in param ref");
      }
      case ExprKind::ArgRef: {
        auto it = ctx.locals.find(e.name);
        if (it != ctx.locals.end()) {
          e.kind = ExprKind::LocalRef;
          e.index = it->second.first;
          return it->second.second;
        }
        if (ctx.op) {
          for (size_t i = 0; i < ctx.op->args.size(); i++)
            if (ctx.op->args[i].name == e.name) {
              e.index = static_cast<int>(i);
              return ctx.op->args[i].type == PType::String ? VType::Str : VType::Int;
            }
        }
        throw ResolveError("unknown identifier '" + e.name + "'");
      }
      case ExprKind::LocalRef:
        return VType::Int;  // unreachable on fresh parse
      case ExprKind::Unary: {
        VType t = resolve_expr(e.kids[0], ctx);
        if (t != VType::Int) throw TypeError("unary operator needs integer operand");
        return VType::Int;
      }
      case ExprKind::Binary: {
        VType a = resolve_expr(e.kids[0], ctx);
        VType b = resolve_expr(e.kids[1], ctx);
        if (e.bop == BinOp::Eq || e.bop == BinOp::Ne) {
          if (a != b || a == VType::Handle) throw TypeError("bad operands to ==/!=");
          return VType::Int;
        }
        if (a != VType::Int || b != VType::Int)
          throw TypeError("operator needs integer operands");
        return VType::Int;
      }
    }
    return VType::Int;
  }

  detail::Lexer lex_;
  DmirProgram prog_;
};

inline DmirProgram parse(const std::string& source) { return Parser::parse(source); }

}  // namespace paramfuzz::dmir
