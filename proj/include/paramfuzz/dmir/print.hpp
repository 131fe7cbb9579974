// Copyright 2026 paramfuzz project authors. All rights reserved.
// Use of this source code is governed by Apache 2 LICENSE that can be found in the LICENSE file.

#pragma once

#include <sstream>

#include "paramfuzz/dmir/ast.hpp"

namespace paramfuzz::dmir {

// Canonical pretty-printer. print(parse(s)) reparses to a structurally
// identical program with identical block/edge/statement ids.

namespace detail {

inline std::string escape(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      default: out.push_back(c);
    }
  }
  out.push_back('"');
  return out;
}

inline std::string literal_text(const Literal& lit) {
  switch (lit.type) {
    case PType::Uint: return std::to_string(lit.i);
    case PType::Int: return lit.i < 0 ? std::to_string(lit.i) : std::to_string(lit.i);
    case PType::Bool: return lit.i ? "true" : "false";
    case PType::String: return escape(lit.s);
  }
  return "0";
}

inline int bin_prec(BinOp op) {
  switch (op) {
    case BinOp::Or: return 1;
    case BinOp::And: return 2;
    case BinOp::Eq:
    case BinOp::Ne:
    case BinOp::Lt:
    case BinOp::Le:
    case BinOp::Gt:
    case BinOp::Ge: return 3;
    case BinOp::Add:
    case BinOp::Sub: return 4;
    default: return 5;
  }
}

inline const char* bin_text(BinOp op) {
  switch (op) {
    case BinOp::Add: return "+";
    case BinOp::Sub: return "-";
    case BinOp::Mul: return "*";
    case BinOp::Div: return "/";
    case BinOp::Mod: return "%";
    case BinOp::Eq: return "==";
    case BinOp::Ne: return "!=";
    case BinOp::Lt: return "<";
    case BinOp::Le: return "<=";
    case BinOp::Gt: return ">";
    case BinOp::Ge: return ">=";
    case BinOp::And: return "&&";
    case BinOp::Or: return "||";
  }
  return "?";
}

class Printer {
 public:
  std::string print(const DmirProgram& p) {
    for (const auto& m : p.modules) {
      line("module " + m.name + " {");
      indent_++;
      for (const auto& pa : m.params)
        line("param " + pa.name + ": " + ptype_name(pa.type) + " = " + literal_text(pa.def) + ";");
      for (const auto& d : m.drivers) print_driver(d);
      indent_--;
      line("}");
    }
    for (const auto& b : p.buses) line("bus " + b + ";");
    for (const auto& dev : p.devices) {
      std::string l = "device " + dev.id + ": driver=" + dev.driver + ", parent=" + dev.parent;
      if (dev.devnode_name) l += ", devnode=" + escape(*dev.devnode_name);
      line(l + ";");
    }
    return out_.str();
  }

 private:
  void print_driver(const DriverDecl& d) {
    line("driver " + d.name + " {");
    indent_++;
    if (d.devnode) line("devnode;");
    for (const auto& f : d.fields) {
      std::string l = "field " + f.name + ": " + ftype_name(f.type);
      if (f.has_default) l += " = " + literal_text(f.def);
      line(l + ";");
    }
    for (const auto& n : d.attrs) print_attr_node(n);
    for (const auto& op : d.ops) {
      std::string head = "op " + op.name + "(";
      for (size_t i = 0; i < op.args.size(); i++) {
        if (i) head += ", ";
        head += op.args[i].name + ": " + ptype_name(op.args[i].type);
      }
      line(head + ") {");
      print_block_body(*op.body);
      line("}");
    }
    indent_--;
    line("}");
  }

  void print_attr_node(const AttrNode& n) {
    if (n.group) {
      line("group " + n.group->name + " {");
      indent_++;
      for (const auto& m : n.group->members) print_attr_node(m);
      indent_--;
      line("}");
      return;
    }
    const AttrDecl& a = *n.attr;
    line("attr " + escape(a.fname) + (a.writable ? " rw {" : " ro {"));
    indent_++;
    if (a.store) {
      line("store {");
      print_block_body(*a.store);
      line("}");
    }
    if (a.show) {
      line("show {");
      print_block_body(*a.show);
      line("}");
    }
    indent_--;
    line("}");
  }

  void print_block_body(const Block& b) {
    indent_++;
    for (const auto& s : b.stmts) print_stmt(s);
    indent_--;
  }

  std::string lv_text(const LValue& lv) {
    switch (lv.kind) {
      case LValue::SelfField: return "self." + lv.field;
      case LValue::ParentField: return "parent." + lv.field;
      case LValue::It: return "it";
    }
    return "?";
  }

  std::string list_text(const ListRef& lr) { return lr.global ? lr.name : "self." + lr.name; }

  void print_stmt(const Stmt& s) {
    switch (s.kind) {
      case StmtKind::Assign:
        line(lv_text(s.lv) + " = " + expr_text(s.rhs, 0) + ";");
        break;
      case StmtKind::If:
        line("if (" + expr_text(s.cond, 0) + ") {");
        print_block_body(*s.then_blk);
        if (s.else_blk) {
          line("} else {");
          print_block_body(*s.else_blk);
        }
        line("}");
        break;
      case StmtKind::Switch:
        line("switch (" + expr_text(s.cond, 0) + ") {");
        indent_++;
        for (const auto& c : s.cases) {
          line("case " + literal_text(c.label) + ": {");
          print_block_body(*c.body);
          line("}");
        }
        if (s.default_blk) {
          line("default: {");
          print_block_body(*s.default_blk);
          line("}");
        }
        indent_--;
        line("}");
        break;
      case StmtKind::Return:
        line(std::string("return ") + status_name(s.status) + ";");
        break;
      case StmtKind::HelperLet: {
        std::string h;
        switch (s.helper) {
          case Helper::MatchString: {
            h = "match_string(buf, [";
            for (size_t i = 0; i < s.match_set.size(); i++) {
              if (i) h += ", ";
              h += escape(s.match_set[i]);
            }
            h += "])";
            break;
          }
          case Helper::KstrToUint: h = "kstrtouint(buf)"; break;
          case Helper::KstrToInt: h = "kstrtoint(buf)"; break;
          case Helper::KstrToBool: h = "kstrtobool(buf)"; break;
          case Helper::Scan: h = "scan(buf, " + escape(s.scan_format) + ")"; break;
        }
        line("let " + s.let_name + " = " + h + ";");
        break;
      }
      case StmtKind::Lock: line("lock(" + s.lock_name + ");"); break;
      case StmtKind::Unlock: line("unlock(" + s.lock_name + ");"); break;
      case StmtKind::Alloc: line("alloc(" + lv_text(s.lv) + ");"); break;
      case StmtKind::Free: line("free(" + lv_text(s.lv) + ");"); break;
      case StmtKind::Use: line("use(" + lv_text(s.lv) + ");"); break;
      case StmtKind::ListAdd:
        line("list_add(" + list_text(s.list) + ", " + lv_text(s.lv) + ");");
        break;
      case StmtKind::ListDel:
        line("list_del(" + list_text(s.list) + ", " + lv_text(s.lv) + ");");
        break;
      case StmtKind::ListIter:
        line("list_iter(" + list_text(s.list) + ") {");
        print_block_body(*s.body);
        line("}");
        break;
      case StmtKind::Yield: line("yield;"); break;
    }
  }

  std::string expr_text(const Expr& e, int parent_prec) {
    switch (e.kind) {
      case ExprKind::IntLit: return std::to_string(e.ival);
      case ExprKind::BoolLit: return e.ival ? "true" : "false";
      case ExprKind::StrLit: return escape(e.sval);
      case ExprKind::SelfField: return "self." + e.name;
      case ExprKind::ParentField: return "parent." + e.name;
      case ExprKind::ParamRef: return "param." + e.module + "." + e.name;
      case ExprKind::ArgRef:
      case ExprKind::LocalRef: return e.name;
      case ExprKind::BufRef: return "buf";
      case ExprKind::Unary: {
        std::string inner = expr_text(e.kids[0], 6);
        return (e.uop == UnOp::Not ? "!" : "-") + inner;
      }
      case ExprKind::Binary: {
        int prec = bin_prec(e.bop);
        std::string t = expr_text(e.kids[0], prec) + " " + bin_text(e.bop) + " " +
                        expr_text(e.kids[1], prec + 1);
        if (prec < parent_prec) return "(" + t + ")";
        return t;
      }
    }
    return "?";
  }

  void line(const std::string& s) {
    for (int i = 0; i < indent_; i++) out_ << "  ";
    out_ << s << "\n";
  }

  std::ostringstream out_;
  int indent_ = 0;
};

}  // namespace detail

inline std::string print(const DmirProgram& p) { return detail::Printer().print(p); }

}  // namespace paramfuzz::dmir
