// Copyright 2026 paramfuzz project authors. All rights reserved.
// Use of this source code is governed by Apache 2 LICENSE that can be found in the LICENSE file.

#pragma once

#include <algorithm>
#include <functional>

#include "paramfuzz/dmir/ast.hpp"

namespace paramfuzz::dmir {

// Control-flow view of one body. Blocks are the lexical blocks (the body
// itself plus every nested if/switch/list_iter block); edges are the
// conditional edges only: two per if, one per switch case plus one default
// (the default edge exists even without a default block, as the
// fall-through). Edge ids come from the parser and are stable across runs.

enum class EdgeKind { IfTrue, IfFalse, Case, Default };

struct CfgEdge {
  int id = -1;
  int stmt_id = -1;       // the branching statement
  EdgeKind kind = EdgeKind::IfTrue;
  int target_block = -1;  // -1 for if-false without else / implicit default
};

struct Cfg {
  std::vector<int> blocks;     // block ids, lexical order
  std::vector<CfgEdge> edges;  // lexical order
};

namespace detail {

inline void collect_cfg(const Block& b, Cfg& cfg) {
  cfg.blocks.push_back(b.id);
  for (const auto& s : b.stmts) {
    switch (s.kind) {
      case StmtKind::If: {
        cfg.edges.push_back({s.true_edge, s.id, EdgeKind::IfTrue, s.then_blk->id});
        cfg.edges.push_back(
            {s.false_edge, s.id, EdgeKind::IfFalse, s.else_blk ? s.else_blk->id : -1});
        collect_cfg(*s.then_blk, cfg);
        if (s.else_blk) collect_cfg(*s.else_blk, cfg);
        break;
      }
      case StmtKind::Switch: {
        for (const auto& c : s.cases)
          cfg.edges.push_back({c.edge, s.id, EdgeKind::Case, c.body->id});
        cfg.edges.push_back(
            {s.default_edge, s.id, EdgeKind::Default, s.default_blk ? s.default_blk->id : -1});
        for (const auto& c : s.cases) collect_cfg(*c.body, cfg);
        if (s.default_blk) collect_cfg(*s.default_blk, cfg);
        break;
      }
      case StmtKind::ListIter:
        collect_cfg(*s.body, cfg);
        break;
      default:
        break;
    }
  }
}

}  // namespace detail

inline Cfg control_flow_graph(const Block& body) {
  Cfg cfg;
  detail::collect_cfg(body, cfg);
  return cfg;
}

// All conditional edge ids of a whole program, for coverage accounting.
inline std::vector<int> all_edges(const DmirProgram& p) {
  std::vector<int> out;
  auto add_block = [&](const Block* b) {
    if (!b) return;
    Cfg c = control_flow_graph(*b);
    for (const auto& e : c.edges) out.push_back(e.id);
  };
  std::function<void(const AttrNode&)> add_attr = [&](const AttrNode& n) {
    if (n.group) {
      for (const auto& m : n.group->members) add_attr(m);
    } else {
      add_block(n.attr->store.get());
      add_block(n.attr->show.get());
    }
  };
  for (const auto& m : p.modules)
    for (const auto& d : m.drivers) {
      for (const auto& n : d.attrs) add_attr(n);
      for (const auto& op : d.ops) add_block(op.body.get());
    }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace paramfuzz::dmir
