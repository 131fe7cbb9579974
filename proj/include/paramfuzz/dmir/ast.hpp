// Copyright 2026 paramfuzz project authors. All rights reserved.
// Use of this source code is governed by Apache 2 LICENSE that can be found in the LICENSE file.

#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace paramfuzz::dmir {

// ---------------------------------------------------------------------------
// Errors

struct ParseError : std::runtime_error {
  int line, col;
  ParseError(const std::string& msg, int l, int c)
      : std::runtime_error("parse error at " + std::to_string(l) + ":" + std::to_string(c) +
                           ": " + msg),
        line(l),
        col(c) {}
};

struct ResolveError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TypeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Types and literals

enum class PType { Uint, Int, Bool, String };
enum class FType { Uint, Int, Bool, String, Handle, List };

inline const char* ptype_name(PType t) {
  switch (t) {
    case PType::Uint: return "uint";
    case PType::Int: return "int";
    case PType::Bool: return "bool";
    case PType::String: return "string";
  }
  return "?";
}

inline const char* ftype_name(FType t) {
  switch (t) {
    case FType::Uint: return "uint";
    case FType::Int: return "int";
    case FType::Bool: return "bool";
    case FType::String: return "string";
    case FType::Handle: return "handle";
    case FType::List: return "list";
  }
  return "?";
}

// Literal of the declared type; bools live in `i` as 0/1.
struct Literal {
  PType type = PType::Int;
  int64_t i = 0;
  std::string s;
};

// ---------------------------------------------------------------------------
// Expressions

enum class ExprKind {
  IntLit,
  BoolLit,
  StrLit,
  SelfField,    // self.x
  ParentField,  // parent.x
  ParamRef,     // param.m.x
  ArgRef,       // op argument
  LocalRef,     // helper-let binding
  BufRef,       // the store input string
  Unary,
  Binary,
};

enum class BinOp { Add, Sub, Mul, Div, Mod, Eq, Ne, Lt, Le, Gt, Ge, And, Or };
enum class UnOp { Not, Neg };

struct Expr {
  ExprKind kind = ExprKind::IntLit;
  int64_t ival = 0;          // IntLit / BoolLit
  std::string sval;          // StrLit
  std::string name;          // field / arg / local / param name
  std::string module;        // ParamRef module
  int index = -1;            // resolved slot (field/arg/local/flat-param)
  BinOp bop = BinOp::Add;
  UnOp uop = UnOp::Not;
  std::vector<Expr> kids;    // Unary: 1, Binary: 2
  int line = 0, col = 0;
};

// ---------------------------------------------------------------------------
// Statements

enum class StmtKind {
  Assign,
  If,
  Switch,
  Return,
  HelperLet,
  Lock,
  Unlock,
  Alloc,
  Free,
  Use,
  ListAdd,
  ListDel,
  ListIter,
  Yield,
};

enum class Helper { MatchString, KstrToUint, KstrToInt, KstrToBool, Scan };

// Status codes a block can return. Runtime adds Enoent for path errors.
enum class Status { Ok, Einval, Eio, Enoent };

inline const char* status_name(Status s) {
  switch (s) {
    case Status::Ok: return "OK";
    case Status::Einval: return "EINVAL";
    case Status::Eio: return "EIO";
    case Status::Enoent: return "ENOENT";
  }
  return "?";
}

struct LValue {
  enum Kind { SelfField, ParentField, It } kind = SelfField;
  std::string field;
  int index = -1;  // resolved field slot (unused for It)
  int line = 0, col = 0;
};

// Target of list_add/list_del/list_iter: a global shared list or a
// device-local list field.
struct ListRef {
  bool global = true;
  std::string name;
  int index = -1;  // global list id, or list-field slot
};

struct Block;
using BlockPtr = std::unique_ptr<Block>;

struct Stmt {
  StmtKind kind = StmtKind::Yield;
  int id = -1;  // unique statement id, parse order
  int line = 0, col = 0;

  LValue lv;    // Assign dest; Alloc/Free/Use operand; ListAdd/ListDel element
  Expr rhs;     // Assign
  Expr cond;    // If / Switch scrutinee

  BlockPtr then_blk, else_blk;
  int true_edge = -1, false_edge = -1;

  struct Case {
    Literal label;
    BlockPtr body;
    int edge = -1;
  };
  std::vector<Case> cases;
  BlockPtr default_blk;
  int default_edge = -1;  // present even when no default block (fall-through)

  Status status = Status::Ok;  // Return

  std::string let_name;  // HelperLet
  int let_slot = -1;
  Helper helper = Helper::MatchString;
  std::vector<std::string> match_set;
  std::string scan_format;

  std::string lock_name;  // Lock / Unlock
  int lock_index = -1;

  ListRef list;   // ListAdd / ListDel / ListIter
  BlockPtr body;  // ListIter
};

struct Block {
  int id = -1;  // unique block id, parse order
  std::vector<Stmt> stmts;
};

// ---------------------------------------------------------------------------
// Declarations

struct ParamDecl {
  std::string name;
  PType type = PType::Uint;
  Literal def;
  int flat_index = -1;  // program-wide param slot
};

struct FieldDecl {
  std::string name;
  FType type = FType::Uint;
  Literal def;
  bool has_default = false;
  int slot = -1;       // scalar slot (uint/int/bool/string/handle)
  int list_slot = -1;  // list slot
};

struct AttrDecl {
  std::string fname;    // sysfs file name
  bool writable = false;  // rw vs ro
  BlockPtr store, show;
  int store_locals = 0, show_locals = 0;
  int line = 0;
};

struct AttrGroupDecl;

// One entry in a driver's attribute declaration list: an attribute or a
// nested group. Exactly one pointer is set.
struct AttrNode {
  std::unique_ptr<AttrDecl> attr;
  std::unique_ptr<AttrGroupDecl> group;
};

struct AttrGroupDecl {
  std::string name;
  std::vector<AttrNode> members;
};

struct OpArg {
  std::string name;
  PType type = PType::Uint;  // uint | int | string
};

struct OpDecl {
  std::string name;
  std::vector<OpArg> args;
  BlockPtr body;
  int locals = 0;
};

struct DriverDecl {
  std::string name;
  bool devnode = false;
  std::vector<FieldDecl> fields;
  std::vector<AttrNode> attrs;
  std::vector<OpDecl> ops;
  int module_index = -1;
  int scalar_count = 0, list_count = 0;

  const FieldDecl* find_field(const std::string& n) const {
    for (const auto& f : fields)
      if (f.name == n) return &f;
    return nullptr;
  }
};

struct ModuleDecl {
  std::string name;
  std::vector<ParamDecl> params;
  std::vector<DriverDecl> drivers;
};

struct DeviceDecl {
  std::string id;
  std::string driver;
  std::string parent;  // device id or bus name
  std::optional<std::string> devnode_name;
  int driver_module = -1, driver_index = -1;  // resolved
  int parent_device = -1;                     // -1 when parent is a bus
  int line = 0;
};

// A flattened view of one attribute of a driver, in declaration order.
struct FlatAttr {
  const AttrDecl* attr = nullptr;
  std::string rel_path;  // e.g. "power/control" for grouped attrs
};

struct DmirProgram {
  std::vector<ModuleDecl> modules;
  std::vector<std::string> buses;
  std::vector<DeviceDecl> devices;

  // Id spaces assigned at parse time (pure functions of the source text).
  int block_count = 0;
  int edge_count = 0;
  int stmt_count = 0;

  std::vector<std::string> lock_names;    // index = lock id
  std::vector<std::string> global_lists;  // index = global list id

  // Flat module-parameter table: (module idx, param idx) per slot.
  std::vector<std::pair<int, int>> flat_params;

  uint64_t source_hash = 0;

  const ModuleDecl& module_of(int idx) const { return modules[idx]; }
  const DriverDecl* find_driver(const std::string& name, int* mod_idx = nullptr,
                                int* drv_idx = nullptr) const {
    for (size_t m = 0; m < modules.size(); m++)
      for (size_t d = 0; d < modules[m].drivers.size(); d++)
        if (modules[m].drivers[d].name == name) {
          if (mod_idx) *mod_idx = static_cast<int>(m);
          if (drv_idx) *drv_idx = static_cast<int>(d);
          return &modules[m].drivers[d];
        }
    return nullptr;
  }
  int find_device(const std::string& id) const {
    for (size_t i = 0; i < devices.size(); i++)
      if (devices[i].id == id) return static_cast<int>(i);
    return -1;
  }
  bool is_bus(const std::string& name) const {
    for (const auto& b : buses)
      if (b == name) return true;
    return false;
  }
};

// Depth-first, declaration-order flattening of a driver's attributes,
// including attrs nested inside groups. The group path becomes a relative
// sysfs sub-path ("g/h/file").
inline void flatten_attrs_into(const std::vector<AttrNode>& nodes, const std::string& prefix,
                               std::vector<FlatAttr>& out) {
  for (const auto& n : nodes) {
    if (n.attr) {
      out.push_back({n.attr.get(), prefix + n.attr->fname});
    } else {
      flatten_attrs_into(n.group->members, prefix + n.group->name + "/", out);
    }
  }
}

inline std::vector<FlatAttr> flatten_attrs(const DriverDecl& driver) {
  std::vector<FlatAttr> out;
  flatten_attrs_into(driver.attrs, "", out);
  return out;
}

}  // namespace paramfuzz::dmir
