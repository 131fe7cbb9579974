// Copyright 2026 paramfuzz project authors. All rights reserved.
// Use of this source code is governed by Apache 2 LICENSE that can be found in the LICENSE file.

#pragma once

#include <algorithm>
#include <optional>

#include "paramfuzz/dmir/ast.hpp"

namespace paramfuzz::extractor {

// ---------------------------------------------------------------------------
// Records

enum class SpecKind {
  StringSet,
  UintRange,
  IntRange,
  Bool,
  Formatted,
  AnyString,
  IgnoresInput,
  Undetermined,
};

inline const char* spec_kind_name(SpecKind k) {
  switch (k) {
    case SpecKind::StringSet: return "string_set";
    case SpecKind::UintRange: return "uint_range";
    case SpecKind::IntRange: return "int_range";
    case SpecKind::Bool: return "bool";
    case SpecKind::Formatted: return "formatted";
    case SpecKind::AnyString: return "any_string";
    case SpecKind::IgnoresInput: return "ignores_input";
    case SpecKind::Undetermined: return "undetermined";
  }
  return "?";
}

struct ValueSpec {
  SpecKind kind = SpecKind::Undetermined;
  std::vector<std::string> strings;  // StringSet
  int64_t lo = 0, hi = 0;            // UintRange / IntRange
  std::string format;                // Formatted
  std::string reason;                // Undetermined
};

struct AttributeRecord {
  std::string driver;
  std::string fname;
  std::string rel_path;  // sysfs path relative to the device directory
  int store_ref = -1;    // block id of the store body
  bool writable = true;
  ValueSpec value_spec;
  bool spec_set = false;
};

struct ModuleParamRecord {
  std::string module;
  std::string name;
  dmir::PType ptype = dmir::PType::Uint;
  dmir::Literal def;
};

// ---------------------------------------------------------------------------
// Store function identification: recursive walk over every driver's
// attribute declarations, descending into nested groups; read-only
// attributes are dropped. Output sorted by (driver, fname).

namespace detail {

inline void walk_attr_decls(const dmir::DriverDecl& drv, const std::vector<dmir::AttrNode>& nodes,
                            const std::string& prefix, std::vector<AttributeRecord>& out) {
  for (const auto& node : nodes) {
    if (node.group) {
      // Recurse into the nested declaration, like the sub-field walk.
      walk_attr_decls(drv, node.group->members, prefix + node.group->name + "/", out);
      continue;
    }
    const dmir::AttrDecl& a = *node.attr;
    if (!a.writable) continue;
    AttributeRecord rec;
    rec.driver = drv.name;
    rec.fname = a.fname;
    rec.rel_path = prefix + a.fname;
    rec.store_ref = a.store ? a.store->id : -1;
    rec.writable = true;
    out.push_back(std::move(rec));
  }
}

}  // namespace detail

inline std::vector<AttributeRecord> identify_store_functions(const dmir::DmirProgram& prog) {
  std::vector<AttributeRecord> out;
  for (const auto& m : prog.modules)
    for (const auto& d : m.drivers) detail::walk_attr_decls(d, d.attrs, "", out);
  std::sort(out.begin(), out.end(), [](const AttributeRecord& a, const AttributeRecord& b) {
    return std::tie(a.driver, a.fname) < std::tie(b.driver, b.fname);
  });
  return out;
}

// ---------------------------------------------------------------------------
// Module parameter collection; no validation logic is attached.

inline std::vector<ModuleParamRecord> collect_module_params(const dmir::DmirProgram& prog) {
  std::vector<ModuleParamRecord> out;
  for (const auto& m : prog.modules)
    for (const auto& p : m.params) out.push_back({m.name, p.name, p.type, p.def});
  std::sort(out.begin(), out.end(), [](const ModuleParamRecord& a, const ModuleParamRecord& b) {
    return std::tie(a.module, a.name) < std::tie(b.module, b.name);
  });
  return out;
}

// ---------------------------------------------------------------------------
// Valid value extraction: taint analysis of one store block with buf as the
// source.

namespace detail {

inline bool expr_refs_buf(const dmir::Expr& e) {
  if (e.kind == dmir::ExprKind::BufRef) return true;
  for (const auto& k : e.kids)
    if (expr_refs_buf(k)) return true;
  return false;
}

inline bool expr_refs_local(const dmir::Expr& e, int slot) {
  if (e.kind == dmir::ExprKind::LocalRef && e.index == slot) return true;
  for (const auto& k : e.kids)
    if (expr_refs_local(k, slot)) return true;
  return false;
}

inline bool expr_has_or(const dmir::Expr& e) {
  if (e.kind == dmir::ExprKind::Binary && e.bop == dmir::BinOp::Or) return true;
  for (const auto& k : e.kids)
    if (expr_has_or(k)) return true;
  return false;
}

inline std::optional<int64_t> const_value(const dmir::Expr& e) {
  if (e.kind == dmir::ExprKind::IntLit || e.kind == dmir::ExprKind::BoolLit) return e.ival;
  if (e.kind == dmir::ExprKind::Unary && e.uop == dmir::UnOp::Neg) {
    auto v = const_value(e.kids[0]);
    if (v) return -*v;
  }
  return std::nullopt;
}

// True when the statement subtree lexically reads buf (directly or through a
// helper call, which always consumes buf).
inline bool stmt_touches_buf(const dmir::Stmt& s) {
  auto block_touches = [](const dmir::Block& b) {
    for (const auto& st : b.stmts)
      if (stmt_touches_buf(st)) return true;
    return false;
  };
  switch (s.kind) {
    case dmir::StmtKind::Assign: return expr_refs_buf(s.rhs);
    case dmir::StmtKind::HelperLet: return true;
    case dmir::StmtKind::If:
      if (expr_refs_buf(s.cond)) return true;
      if (block_touches(*s.then_blk)) return true;
      return s.else_blk && block_touches(*s.else_blk);
    case dmir::StmtKind::Switch: {
      if (expr_refs_buf(s.cond)) return true;
      for (const auto& c : s.cases)
        if (block_touches(*c.body)) return true;
      return s.default_blk && block_touches(*s.default_blk);
    }
    case dmir::StmtKind::ListIter: return block_touches(*s.body);
    default: return false;
  }
}

inline bool block_touches_buf(const dmir::Block& b) {
  for (const auto& s : b.stmts)
    if (stmt_touches_buf(s)) return true;
  return false;
}

// Does any list_iter body lexically consume buf? Byte-wise processing defeats
// the static analysis.
inline bool buf_in_iter_body(const dmir::Block& b, bool in_iter) {
  for (const auto& s : b.stmts) {
    switch (s.kind) {
      case dmir::StmtKind::Assign:
        if (in_iter && expr_refs_buf(s.rhs)) return true;
        break;
      case dmir::StmtKind::HelperLet:
        if (in_iter) return true;
        break;
      case dmir::StmtKind::If:
        if (in_iter && expr_refs_buf(s.cond)) return true;
        if (buf_in_iter_body(*s.then_blk, in_iter)) return true;
        if (s.else_blk && buf_in_iter_body(*s.else_blk, in_iter)) return true;
        break;
      case dmir::StmtKind::Switch:
        if (in_iter && expr_refs_buf(s.cond)) return true;
        for (const auto& c : s.cases)
          if (buf_in_iter_body(*c.body, in_iter)) return true;
        if (s.default_blk && buf_in_iter_body(*s.default_blk, in_iter)) return true;
        break;
      case dmir::StmtKind::ListIter:
        if (buf_in_iter_body(*s.body, true)) return true;
        break;
      default:
        break;
    }
  }
  return false;
}

inline void find_helpers(const dmir::Block& b, std::vector<const dmir::Stmt*>& out) {
  for (const auto& s : b.stmts) {
    if (s.kind == dmir::StmtKind::HelperLet) out.push_back(&s);
    if (s.then_blk) find_helpers(*s.then_blk, out);
    if (s.else_blk) find_helpers(*s.else_blk, out);
    for (const auto& c : s.cases) find_helpers(*c.body, out);
    if (s.default_blk) find_helpers(*s.default_blk, out);
    if (s.body) find_helpers(*s.body, out);
  }
}

// Comparison-based interval narrowing from one guard condition. Disjunctions
// contribute nothing (sound fallback); conjunctions narrow with every
// comparison on the tracked local.
inline void narrow_from_cond(const dmir::Expr& cond, int slot, int64_t* lo, int64_t* hi) {
  using dmir::BinOp;
  using dmir::ExprKind;
  if (expr_has_or(cond)) return;
  if (cond.kind == ExprKind::Binary && cond.bop == BinOp::And) {
    narrow_from_cond(cond.kids[0], slot, lo, hi);
    narrow_from_cond(cond.kids[1], slot, lo, hi);
    return;
  }
  if (cond.kind != ExprKind::Binary) return;
  const dmir::Expr &l = cond.kids[0], &r = cond.kids[1];
  bool l_is_var = l.kind == ExprKind::LocalRef && l.index == slot;
  bool r_is_var = r.kind == ExprKind::LocalRef && r.index == slot;
  std::optional<int64_t> c;
  BinOp op = cond.bop;
  if (l_is_var && (c = const_value(r))) {
    // v OP c
  } else if (r_is_var && (c = const_value(l))) {
    // c OP v  ==  v FLIP(OP) c
    switch (op) {
      case BinOp::Lt: op = BinOp::Gt; break;
      case BinOp::Le: op = BinOp::Ge; break;
      case BinOp::Gt: op = BinOp::Lt; break;
      case BinOp::Ge: op = BinOp::Le; break;
      default: break;
    }
  } else {
    return;
  }
  switch (op) {
    case BinOp::Le: *hi = std::min(*hi, *c); break;
    case BinOp::Lt: *hi = std::min(*hi, *c - 1); break;
    case BinOp::Ge: *lo = std::max(*lo, *c); break;
    case BinOp::Gt: *lo = std::max(*lo, *c + 1); break;
    case BinOp::Eq:
      *lo = std::max(*lo, *c);
      *hi = std::min(*hi, *c);
      break;
    default: break;
  }
}

// Finds the first field write whose rhs references the tracked local and the
// guard conditions whose TRUE branch control-dominates it. An else branch or
// a switch body keeps the outer guards but never contributes its own
// condition.
struct WriteSearch {
  int slot;
  bool found = false;
  std::vector<const dmir::Expr*> guards;

  void visit(const dmir::Block& b, std::vector<const dmir::Expr*>& stack) {
    for (const auto& s : b.stmts) {
      if (found) return;
      switch (s.kind) {
        case dmir::StmtKind::Assign:
          if (s.lv.kind != dmir::LValue::It && expr_refs_local(s.rhs, slot)) {
            found = true;
            guards = stack;
            return;
          }
          break;
        case dmir::StmtKind::If:
          stack.push_back(&s.cond);
          visit(*s.then_blk, stack);
          stack.pop_back();
          if (found) return;
          if (s.else_blk) visit(*s.else_blk, stack);
          if (found) return;
          break;
        case dmir::StmtKind::Switch:
          for (const auto& c : s.cases) {
            visit(*c.body, stack);
            if (found) return;
          }
          if (s.default_blk) visit(*s.default_blk, stack);
          if (found) return;
          break;
        case dmir::StmtKind::ListIter:
          visit(*s.body, stack);
          if (found) return;
          break;
        default:
          break;
      }
    }
  }
};

// Is there a field write anywhere inside the true branch of a condition
// referencing the slot? (The match_string "result guards the write" shape.)
inline bool guarded_field_write(const dmir::Block& b, int slot, bool under_guard) {
  for (const auto& s : b.stmts) {
    switch (s.kind) {
      case dmir::StmtKind::Assign:
        if (under_guard && s.lv.kind != dmir::LValue::It) return true;
        break;
      case dmir::StmtKind::If: {
        bool guard = under_guard || expr_refs_local(s.cond, slot);
        if (guarded_field_write(*s.then_blk, slot, guard)) return true;
        if (s.else_blk && guarded_field_write(*s.else_blk, slot, under_guard)) return true;
        break;
      }
      case dmir::StmtKind::Switch: {
        bool guard = under_guard || expr_refs_local(s.cond, slot);
        for (const auto& c : s.cases)
          if (guarded_field_write(*c.body, slot, guard)) return true;
        if (s.default_blk && guarded_field_write(*s.default_blk, slot, guard)) return true;
        break;
      }
      case dmir::StmtKind::ListIter:
        if (guarded_field_write(*s.body, slot, under_guard)) return true;
        break;
      default:
        break;
    }
  }
  return false;
}

// Any assignment whose rhs reads buf directly (raw string sink)?
inline bool raw_buf_write(const dmir::Block& b) {
  for (const auto& s : b.stmts) {
    if (s.kind == dmir::StmtKind::Assign && s.lv.kind != dmir::LValue::It &&
        expr_refs_buf(s.rhs))
      return true;
    if (s.then_blk && raw_buf_write(*s.then_blk)) return true;
    if (s.else_blk && raw_buf_write(*s.else_blk)) return true;
    for (const auto& c : s.cases)
      if (raw_buf_write(*c.body)) return true;
    if (s.default_blk && raw_buf_write(*s.default_blk)) return true;
    if (s.body && raw_buf_write(*s.body)) return true;
  }
  return false;
}

}  // namespace detail

inline ValueSpec extract_valid_values(const dmir::DmirProgram& prog,
                                      const AttributeRecord& record) {
  const dmir::DriverDecl* drv = prog.find_driver(record.driver);
  const dmir::Block* store = nullptr;
  for (const auto& fa : dmir::flatten_attrs(*drv))
    if (fa.attr->fname == record.fname) store = fa.attr->store.get();

  ValueSpec spec;
  if (!store) {
    spec.kind = SpecKind::Undetermined;
    spec.reason = "no store block";
    return spec;
  }

  // (e) store never reads buf
  if (!detail::block_touches_buf(*store)) {
    spec.kind = SpecKind::IgnoresInput;
    return spec;
  }
  // (f) buf consumed inside a loop body
  if (detail::buf_in_iter_body(*store, false)) {
    spec.kind = SpecKind::Undetermined;
    spec.reason = "byte-wise processing";
    return spec;
  }

  std::vector<const dmir::Stmt*> lets;
  detail::find_helpers(*store, lets);

  // (a) string comparison whose result guards the attribute update
  for (const auto* s : lets) {
    if (s->helper != dmir::Helper::MatchString) continue;
    if (detail::guarded_field_write(*store, s->let_slot, false)) {
      spec.kind = SpecKind::StringSet;
      spec.strings = s->match_set;
      return spec;
    }
  }
  // (b) conversion helpers, narrowed by dominating comparisons
  for (const auto* s : lets) {
    if (s->helper == dmir::Helper::KstrToBool) {
      spec.kind = SpecKind::Bool;
      return spec;
    }
    if (s->helper != dmir::Helper::KstrToUint && s->helper != dmir::Helper::KstrToInt) continue;
    bool is_uint = s->helper == dmir::Helper::KstrToUint;
    int64_t lo = is_uint ? 0 : INT64_MIN;
    int64_t hi = INT64_MAX;
    detail::WriteSearch ws{s->let_slot};
    std::vector<const dmir::Expr*> stack;
    ws.visit(*store, stack);
    if (ws.found) {
      for (const auto* g : ws.guards) detail::narrow_from_cond(*g, s->let_slot, &lo, &hi);
    }
    if (lo > hi) {  // contradictory guards: sound fallback
      lo = is_uint ? 0 : INT64_MIN;
      hi = INT64_MAX;
    }
    spec.kind = is_uint ? SpecKind::UintRange : SpecKind::IntRange;
    spec.lo = lo;
    spec.hi = hi;
    return spec;
  }
  // (c) formatted input
  for (const auto* s : lets) {
    if (s->helper == dmir::Helper::Scan) {
      spec.kind = SpecKind::Formatted;
      spec.format = s->scan_format;
      return spec;
    }
  }
  // (d) raw buf stored into a field
  if (detail::raw_buf_write(*store)) {
    spec.kind = SpecKind::AnyString;
    return spec;
  }
  spec.kind = SpecKind::Undetermined;
  spec.reason = "buf used outside recognized sinks";
  return spec;
}

// Convenience: identification plus value extraction for every record.
inline std::vector<AttributeRecord> extract_all(const dmir::DmirProgram& prog) {
  auto records = identify_store_functions(prog);
  for (auto& r : records) {
    r.value_spec = extract_valid_values(prog, r);
    r.spec_set = true;
  }
  return records;
}

}  // namespace paramfuzz::extractor
