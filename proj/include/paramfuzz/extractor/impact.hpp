// Copyright 2026 paramfuzz project authors. All rights reserved.
// Use of this source code is governed by Apache 2 LICENSE that can be found in the LICENSE file.

#pragma once

#include <set>

#include "paramfuzz/dmir/ast.hpp"

namespace paramfuzz::extractor {

// Counts the branch statements (if/switch) and the basic blocks they
// dominate that are affected by each class of user-controlled data:
// op arguments, module parameters, and store-written device attributes.
//
// Taint is data flow only: an assignment propagates taint from rhs to the
// written field; locals bound by helpers are never tainted here (their
// source is buf, which belongs to none of the three classes). Fields taint
// program-wide (shared state crosses op boundaries); args and let-locals are
// body-scoped. Callee bodies do not exist in DMIR, matching the decision to
// drop callees from the count.

struct ImpactCounts {
  int affected_if = 0;
  int affected_switch = 0;
  int affected_basic_blocks = 0;

  bool operator==(const ImpactCounts&) const = default;
};

struct ImpactReport {
  ImpactCounts op_args;
  ImpactCounts module_params;
  ImpactCounts device_attrs;

  bool operator==(const ImpactReport&) const = default;
};

enum class TaintSource { OpArgs, ModuleParams, DeviceAttrs };

namespace impact_detail {

struct Body {
  const dmir::Block* block = nullptr;
  const dmir::DriverDecl* driver = nullptr;
  const dmir::OpDecl* op = nullptr;  // null for store/show bodies
  bool is_store = false;
};

inline void collect_bodies(const dmir::DmirProgram& prog, std::vector<Body>& out) {
  std::function<void(const dmir::DriverDecl&, const dmir::AttrNode&)> visit_attr =
      [&](const dmir::DriverDecl& d, const dmir::AttrNode& n) {
        if (n.group) {
          for (const auto& m : n.group->members) visit_attr(d, m);
          return;
        }
        if (n.attr->store) out.push_back({n.attr->store.get(), &d, nullptr, true});
        if (n.attr->show) out.push_back({n.attr->show.get(), &d, nullptr, false});
      };
  for (const auto& m : prog.modules)
    for (const auto& d : m.drivers) {
      for (const auto& n : d.attrs) visit_attr(d, n);
      for (const auto& op : d.ops) out.push_back({op.body.get(), &d, &op, false});
    }
}

// Taint state. Field taint is keyed (driver, field); parent refs fall back
// to name matching across all drivers.
struct Taint {
  TaintSource source;
  std::set<std::pair<std::string, std::string>> fields;
  std::set<std::pair<int, int>> locals;  // (body block id, local slot)

  bool field_tainted(const std::string& driver, const std::string& name) const {
    return fields.count({driver, name}) != 0;
  }
  bool any_field_named(const std::string& name) const {
    for (const auto& [d, f] : fields)
      if (f == name) return true;
    return false;
  }
};

inline bool expr_tainted(const dmir::Expr& e, const Body& body, const Taint& t) {
  using dmir::ExprKind;
  switch (e.kind) {
    case ExprKind::SelfField: return t.field_tainted(body.driver->name, e.name);
    case ExprKind::ParentField: return t.any_field_named(e.name);
    case ExprKind::ParamRef: return t.source == TaintSource::ModuleParams;
    case ExprKind::ArgRef: return t.source == TaintSource::OpArgs && body.op != nullptr;
    case ExprKind::LocalRef: return t.locals.count({body.block->id, e.index}) != 0;
    default:
      for (const auto& k : e.kids)
        if (expr_tainted(k, body, t)) return true;
      return false;
  }
}

// One propagation sweep over every assignment; returns true when the taint
// set grew.
inline bool propagate_block(const dmir::Block& b, const Body& body, Taint& t,
                            const dmir::DmirProgram& prog) {
  bool changed = false;
  for (const auto& s : b.stmts) {
    switch (s.kind) {
      case dmir::StmtKind::Assign: {
        if (expr_tainted(s.rhs, body, t)) {
          if (s.lv.kind == dmir::LValue::SelfField) {
            changed |= t.fields.insert({body.driver->name, s.lv.field}).second;
          } else if (s.lv.kind == dmir::LValue::ParentField) {
            for (const auto& m : prog.modules)
              for (const auto& d : m.drivers)
                if (d.find_field(s.lv.field))
                  changed |= t.fields.insert({d.name, s.lv.field}).second;
          }
        }
        break;
      }
      case dmir::StmtKind::If:
        changed |= propagate_block(*s.then_blk, body, t, prog);
        if (s.else_blk) changed |= propagate_block(*s.else_blk, body, t, prog);
        break;
      case dmir::StmtKind::Switch:
        for (const auto& c : s.cases) changed |= propagate_block(*c.body, body, t, prog);
        if (s.default_blk) changed |= propagate_block(*s.default_blk, body, t, prog);
        break;
      case dmir::StmtKind::ListIter:
        changed |= propagate_block(*s.body, body, t, prog);
        break;
      default:
        break;
    }
  }
  return changed;
}

inline void nested_blocks_of(const dmir::Stmt& s, std::vector<const dmir::Block*>& out) {
  std::function<void(const dmir::Block&)> all = [&](const dmir::Block& b) {
    out.push_back(&b);
    for (const auto& st : b.stmts) {
      if (st.then_blk) all(*st.then_blk);
      if (st.else_blk) all(*st.else_blk);
      for (const auto& c : st.cases) all(*c.body);
      if (st.default_blk) all(*st.default_blk);
      if (st.body) all(*st.body);
    }
  };
  if (s.then_blk) all(*s.then_blk);
  if (s.else_blk) all(*s.else_blk);
  for (const auto& c : s.cases) all(*c.body);
  if (s.default_blk) all(*s.default_blk);
  if (s.body) all(*s.body);
}

inline void count_block(const dmir::Block& b, const Body& body, const Taint& t,
                        ImpactCounts& counts, std::set<int>& dominated) {
  for (const auto& s : b.stmts) {
    if (s.kind == dmir::StmtKind::If || s.kind == dmir::StmtKind::Switch) {
      if (expr_tainted(s.cond, body, t)) {
        if (s.kind == dmir::StmtKind::If) counts.affected_if++;
        else counts.affected_switch++;
        std::vector<const dmir::Block*> nested;
        nested_blocks_of(s, nested);
        for (const auto* nb : nested) dominated.insert(nb->id);
      }
    }
    if (s.then_blk) count_block(*s.then_blk, body, t, counts, dominated);
    if (s.else_blk) count_block(*s.else_blk, body, t, counts, dominated);
    for (const auto& c : s.cases) count_block(*c.body, body, t, counts, dominated);
    if (s.default_blk) count_block(*s.default_blk, body, t, counts, dominated);
    if (s.body) count_block(*s.body, body, t, counts, dominated);
  }
}

// Fields lexically written anywhere inside store blocks: the attribute state
// itself, the seed set for the device-attr class.
inline void seed_store_writes(const dmir::Block& b, const dmir::DriverDecl& drv,
                              const dmir::DmirProgram& prog, Taint& t) {
  for (const auto& s : b.stmts) {
    if (s.kind == dmir::StmtKind::Assign) {
      if (s.lv.kind == dmir::LValue::SelfField) {
        t.fields.insert({drv.name, s.lv.field});
      } else if (s.lv.kind == dmir::LValue::ParentField) {
        for (const auto& m : prog.modules)
          for (const auto& d : m.drivers)
            if (d.find_field(s.lv.field)) t.fields.insert({d.name, s.lv.field});
      }
    }
    if (s.then_blk) seed_store_writes(*s.then_blk, drv, prog, t);
    if (s.else_blk) seed_store_writes(*s.else_blk, drv, prog, t);
    for (const auto& c : s.cases) seed_store_writes(*c.body, drv, prog, t);
    if (s.default_blk) seed_store_writes(*s.default_blk, drv, prog, t);
    if (s.body) seed_store_writes(*s.body, drv, prog, t);
  }
}

inline ImpactCounts count_for_source(const dmir::DmirProgram& prog, const std::vector<Body>& bodies,
                                     TaintSource src) {
  Taint t;
  t.source = src;
  if (src == TaintSource::DeviceAttrs) {
    for (const auto& b : bodies)
      if (b.is_store) seed_store_writes(*b.block, *b.driver, prog, t);
  }
  // Fixpoint: assignments carry taint into fields, fields carry it across
  // bodies.
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& b : bodies) changed |= propagate_block(*b.block, b, t, prog);
  }
  ImpactCounts counts;
  std::set<int> dominated;
  for (const auto& b : bodies) count_block(*b.block, b, t, counts, dominated);
  counts.affected_basic_blocks = static_cast<int>(dominated.size());
  return counts;
}

}  // namespace impact_detail

inline ImpactReport impact_count(const dmir::DmirProgram& prog) {
  std::vector<impact_detail::Body> bodies;
  impact_detail::collect_bodies(prog, bodies);
  ImpactReport rep;
  rep.op_args = impact_detail::count_for_source(prog, bodies, TaintSource::OpArgs);
  rep.module_params = impact_detail::count_for_source(prog, bodies, TaintSource::ModuleParams);
  rep.device_attrs = impact_detail::count_for_source(prog, bodies, TaintSource::DeviceAttrs);
  return rep;
}

}  // namespace paramfuzz::extractor
