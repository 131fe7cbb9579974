// Copyright 2026 paramfuzz project authors. All rights reserved.
// Use of this source code is governed by Apache 2 LICENSE that can be found in the LICENSE file.

#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>

#include "paramfuzz/dmir/ast.hpp"
#include "paramfuzz/util.hpp"

namespace paramfuzz::vkernel {

struct BootError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Runtime value: integer-class (uint/int/bool/handle) or string.
struct Value {
  bool is_str = false;
  int64_t i = 0;
  std::string s;
};

// ---------------------------------------------------------------------------
// Coverage

class CoverageMap {
 public:
  CoverageMap() = default;
  explicit CoverageMap(int edge_count) : bits_(edge_count, 0) {}

  bool add(int edge) {
    if (edge < 0 || edge >= static_cast<int>(bits_.size())) return false;
    if (bits_[edge]) return false;
    bits_[edge] = 1;
    count_++;
    return true;
  }

  bool contains(int edge) const {
    return edge >= 0 && edge < static_cast<int>(bits_.size()) && bits_[edge];
  }

  int count() const { return count_; }

  void merge(const CoverageMap& other) {
    if (bits_.size() < other.bits_.size()) bits_.resize(other.bits_.size(), 0);
    for (size_t i = 0; i < other.bits_.size(); i++)
      if (other.bits_[i] && !bits_[i]) {
        bits_[i] = 1;
        count_++;
      }
  }

  std::vector<int> ids() const {
    std::vector<int> out;
    for (size_t i = 0; i < bits_.size(); i++)
      if (bits_[i]) out.push_back(static_cast<int>(i));
    return out;
  }

  void clear() {
    std::fill(bits_.begin(), bits_.end(), 0);
    count_ = 0;
  }

 private:
  std::vector<uint8_t> bits_;
  int count_ = 0;
};

// ---------------------------------------------------------------------------
// Bug reports

enum class BugType { UAF, NPD, DIV0, DOUBLE_FREE, DEADLOCK };

inline const char* bug_type_name(BugType t) {
  switch (t) {
    case BugType::UAF: return "UAF";
    case BugType::NPD: return "NPD";
    case BugType::DIV0: return "DIV0";
    case BugType::DOUBLE_FREE: return "DOUBLE_FREE";
    case BugType::DEADLOCK: return "DEADLOCK";
  }
  return "?";
}

struct BugReport {
  BugType type = BugType::UAF;
  std::string driver;
  std::string entry;  // op name or attr file name
  int stmt_id = -1;
  std::string title;  // "TYPE/driver/entry/stmtN", the dedup key

  static BugReport make(BugType t, const std::string& driver, const std::string& entry,
                        int stmt_id) {
    BugReport r{t, driver, entry, stmt_id, ""};
    r.title = std::string(bug_type_name(t)) + "/" + driver + "/" + entry + "/stmt" +
              std::to_string(stmt_id);
    return r;
  }
};

// ---------------------------------------------------------------------------
// Virtual filesystem

enum class NodeKind { Dir, BusDir, DeviceDir, GroupDir, AttrFile, ParamFile, DevNode };

struct VfsNode {
  NodeKind kind = NodeKind::Dir;
  int device = -1;  // DeviceDir / AttrFile / DevNode
  int attr = -1;    // flat-attr index within the device's driver (AttrFile)
  int param = -1;   // flat module-param index (ParamFile)
  bool writable = false;
  std::vector<std::string> children;  // sorted child names
};

struct Vfs {
  std::map<std::string, VfsNode> nodes;

  const VfsNode* find(const std::string& path) const {
    auto it = nodes.find(path);
    return it == nodes.end() ? nullptr : &it->second;
  }

  bool exists(const std::string& path) const { return nodes.count(path) != 0; }

  std::vector<std::string> list(const std::string& path) const {
    const VfsNode* n = find(path);
    return n ? n->children : std::vector<std::string>{};
  }
};

// ---------------------------------------------------------------------------
// Booted kernel: the immutable image built from the program's device decls.

struct DeviceInfo {
  int index = -1;
  const dmir::DeviceDecl* decl = nullptr;
  const dmir::DriverDecl* driver = nullptr;
  int parent = -1;  // device index, -1 for bus roots
  std::vector<int> children;
  std::string bus;  // root bus of this device's tree
  std::string sysfs_path;
  std::string devnode_path;  // empty when driver has no devnode
};

struct DriverRt {
  const dmir::DriverDecl* decl = nullptr;
  std::vector<dmir::FlatAttr> flat_attrs;
  std::map<std::string, const dmir::OpDecl*> ops;
};

class BootedKernel {
 public:
  explicit BootedKernel(const dmir::DmirProgram& prog) : prog_(&prog) {
    // Driver runtime tables.
    for (const auto& m : prog.modules)
      for (const auto& d : m.drivers) {
        DriverRt rt;
        rt.decl = &d;
        rt.flat_attrs = dmir::flatten_attrs(d);
        for (const auto& op : d.ops) rt.ops[op.name] = &op;
        drivers_[d.name] = std::move(rt);
      }

    // Device tree with sysfs paths (parents may be declared after children).
    devices_.resize(prog.devices.size());
    for (size_t i = 0; i < prog.devices.size(); i++) build_device(static_cast<int>(i));

    // Namespace roots.
    add_dir("/sys", NodeKind::Dir);
    add_dir("/dev", NodeKind::Dir);
    for (const auto& b : prog.buses) add_child("/sys", b, NodeKind::BusDir);

    // Module parameter files.
    if (!prog.flat_params.empty()) add_child("/sys", "module", NodeKind::Dir);
    for (size_t idx = 0; idx < prog.flat_params.size(); idx++) {
      auto [mi, pi] = prog.flat_params[idx];
      const auto& m = prog.modules[mi];
      std::string mdir = "/sys/module/" + m.name;
      if (!vfs_.exists(mdir)) add_child("/sys/module", m.name, NodeKind::Dir);
      std::string pdir = mdir + "/parameters";
      if (!vfs_.exists(pdir)) add_child(mdir, "parameters", NodeKind::Dir);
      VfsNode n;
      n.kind = NodeKind::ParamFile;
      n.param = static_cast<int>(idx);
      n.writable = true;
      insert_node(pdir + "/" + m.params[pi].name, pdir, m.params[pi].name, n);
    }

    // Device directories, attribute files, devnodes.
    std::set<std::string> devnodes_seen;
    for (auto& dev : devices_) {
      std::string parent_dir =
          dev.parent < 0 ? "/sys/" + dev.bus : devices_[dev.parent].sysfs_path;
      VfsNode dn;
      dn.kind = NodeKind::DeviceDir;
      dn.device = dev.index;
      insert_node(dev.sysfs_path, parent_dir, dev.decl->id, dn);

      const DriverRt& rt = drivers_.at(dev.decl->driver);
      for (size_t ai = 0; ai < rt.flat_attrs.size(); ai++) {
        const auto& fa = rt.flat_attrs[ai];
        // materialize group directories along the relative path
        auto parts = split(fa.rel_path, '/');
        std::string cur = dev.sysfs_path;
        for (size_t k = 0; k + 1 < parts.size(); k++) {
          std::string next = cur + "/" + parts[k];
          if (!vfs_.exists(next)) {
            VfsNode g;
            g.kind = NodeKind::GroupDir;
            g.device = dev.index;
            insert_node(next, cur, parts[k], g);
          }
          cur = next;
        }
        VfsNode an;
        an.kind = NodeKind::AttrFile;
        an.device = dev.index;
        an.attr = static_cast<int>(ai);
        an.writable = fa.attr->writable;
        insert_node(cur + "/" + parts.back(), cur, parts.back(), an);
        if (an.writable) writable_param_paths_.push_back(cur + "/" + parts.back());
      }

      if (dev.decl->devnode_name) {
        if (!devnodes_seen.insert(*dev.decl->devnode_name).second)
          throw BootError("duplicate devnode '" + *dev.decl->devnode_name + "'");
        dev.devnode_path = "/dev/" + *dev.decl->devnode_name;
        VfsNode vn;
        vn.kind = NodeKind::DevNode;
        vn.device = dev.index;
        insert_node(dev.devnode_path, "/dev", *dev.decl->devnode_name, vn);
        dev_paths_.emplace_back(dev.devnode_path, dev.index);
      }
    }
    for (size_t idx = 0; idx < prog.flat_params.size(); idx++) {
      auto [mi, pi] = prog.flat_params[idx];
      writable_param_paths_.push_back("/sys/module/" + prog.modules[mi].name + "/parameters/" +
                                      prog.modules[mi].params[pi].name);
    }
    std::sort(writable_param_paths_.begin(), writable_param_paths_.end());
    std::sort(dev_paths_.begin(), dev_paths_.end());

    edge_count_ = prog.edge_count;
  }

  const dmir::DmirProgram& program() const { return *prog_; }
  const Vfs& vfs() const { return vfs_; }
  const std::vector<DeviceInfo>& devices() const { return devices_; }
  const DriverRt& driver_rt(const std::string& name) const { return drivers_.at(name); }
  int edge_count() const { return edge_count_; }

  // Sorted /dev entries: (path, device index).
  const std::vector<std::pair<std::string, int>>& dev_paths() const { return dev_paths_; }
  // Sorted writable parameter file paths (attr files + module params).
  const std::vector<std::string>& writable_param_paths() const { return writable_param_paths_; }

  std::vector<std::string> match_dev_paths(const std::string& pattern) const {
    std::vector<std::string> out;
    for (const auto& [p, d] : dev_paths_)
      if (pattern_match(pattern, p)) out.push_back(p);
    return out;
  }

  std::vector<std::string> match_param_paths(const std::string& pattern) const {
    std::vector<std::string> out;
    for (const auto& p : writable_param_paths_)
      if (pattern_match(pattern, p)) out.push_back(p);
    return out;
  }

 private:
  void build_device(int i) {
    DeviceInfo& d = devices_[i];
    if (d.index >= 0) return;  // already built
    const auto& decl = prog_->devices[i];
    d.index = i;
    d.decl = &decl;
    d.driver = &prog_->modules[decl.driver_module].drivers[decl.driver_index];
    d.parent = decl.parent_device;
    if (d.parent < 0) {
      d.bus = decl.parent;
      d.sysfs_path = "/sys/" + decl.parent + "/" + decl.id;
    } else {
      build_device(d.parent);
      d.bus = devices_[d.parent].bus;
      d.sysfs_path = devices_[d.parent].sysfs_path + "/" + decl.id;
      devices_[d.parent].children.push_back(i);
    }
  }

  void add_dir(const std::string& path, NodeKind kind) {
    VfsNode n;
    n.kind = kind;
    vfs_.nodes.emplace(path, std::move(n));
  }

  void add_child(const std::string& parent, const std::string& name, NodeKind kind) {
    VfsNode n;
    n.kind = kind;
    insert_node(parent + "/" + name, parent, name, n);
  }

  void insert_node(const std::string& path, const std::string& parent, const std::string& name,
                   const VfsNode& node) {
    vfs_.nodes[path] = node;
    auto& kids = vfs_.nodes[parent].children;
    kids.insert(std::upper_bound(kids.begin(), kids.end(), name), name);
  }

  const dmir::DmirProgram* prog_;
  Vfs vfs_;
  std::vector<DeviceInfo> devices_;
  std::map<std::string, DriverRt> drivers_;
  std::vector<std::pair<std::string, int>> dev_paths_;
  std::vector<std::string> writable_param_paths_;
  int edge_count_ = 0;
};

// ---------------------------------------------------------------------------
// Mutable kernel state. Value-semantic so the interleaving enumerator can
// fork it at choice points.

struct HandleTable {
  std::vector<uint8_t> freed;  // index = id - 1

  int64_t alloc() {
    freed.push_back(0);
    return static_cast<int64_t>(freed.size());
  }
  bool valid(int64_t id) const { return id >= 1 && id <= static_cast<int64_t>(freed.size()); }
  bool is_freed(int64_t id) const { return freed[id - 1] != 0; }
  void mark_freed(int64_t id) { freed[id - 1] = 1; }
  void clear() { freed.clear(); }
};

struct KernelState {
  const BootedKernel* boot = nullptr;
  std::vector<std::vector<Value>> fields;                  // per device, scalar slots
  std::vector<std::vector<std::vector<int64_t>>> dlists;   // per device, list slots
  std::vector<Value> params;                               // flat param slots
  std::vector<int> lock_owner;                             // per lock, -1 free
  HandleTable handles;
  std::vector<std::vector<int64_t>> global_lists;
  CoverageMap coverage;
  std::optional<BugReport> verdict;

  explicit KernelState(const BootedKernel& bk) : boot(&bk) { reset(); }

  // Back to boot defaults: declared param/field values, empty handle table,
  // empty lists, all locks free, empty coverage, no verdict.
  void reset() {
    const auto& prog = boot->program();
    fields.assign(boot->devices().size(), {});
    dlists.assign(boot->devices().size(), {});
    for (const auto& dev : boot->devices()) {
      auto& fs = fields[dev.index];
      fs.resize(dev.driver->scalar_count);
      dlists[dev.index].resize(dev.driver->list_count);
      for (const auto& f : dev.driver->fields) {
        if (f.type == dmir::FType::List) continue;
        Value v;
        if (f.type == dmir::FType::String) {
          v.is_str = true;
          v.s = f.has_default ? f.def.s : "";
        } else {
          v.i = f.has_default ? f.def.i : 0;
        }
        fs[f.slot] = std::move(v);
      }
    }
    params.clear();
    for (auto [mi, pi] : prog.flat_params) {
      const auto& p = prog.modules[mi].params[pi];
      Value v;
      if (p.type == dmir::PType::String) {
        v.is_str = true;
        v.s = p.def.s;
      } else {
        v.i = p.def.i;
      }
      params.push_back(std::move(v));
    }
    lock_owner.assign(prog.lock_names.size(), -1);
    handles.clear();
    global_lists.assign(prog.global_lists.size(), {});
    coverage = CoverageMap(boot->edge_count());
    verdict.reset();
  }
};

}  // namespace paramfuzz::vkernel
