// Copyright 2026 paramfuzz project authors. All rights reserved.
// Use of this source code is governed by Apache 2 LICENSE that can be found in the LICENSE file.

#pragma once

#include <cassert>
#include <functional>

#include "paramfuzz/rng.hpp"
#include "paramfuzz/testcase.hpp"
#include "paramfuzz/vkernel/state.hpp"

namespace paramfuzz::vkernel {

// Engine-level failure (trace divergence, enumeration blowup). Never a
// kernel verdict; campaign code logs and drops these.
struct EngineError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CallStatus {
  bool executed = false;
  dmir::Status status = dmir::Status::Ok;
  std::optional<dmir::Status> open_status;  // syz_mod_dev second phase
};

struct ExecutionResult {
  CoverageMap coverage;
  std::optional<BugReport> verdict;
  std::vector<std::vector<CallStatus>> statuses;
  std::vector<int> trace;  // scheduler picks, one per executed slice
};

// String conversion helpers exposed for the extraction oracle as well.
namespace helpers {

inline bool parse_uint(const std::string& s, int64_t* out) {
  if (s.empty()) return false;
  size_t i = 0;
  if (s[0] == '+') i = 1;
  if (i >= s.size()) return false;
  uint64_t v = 0;
  for (; i < s.size(); i++) {
    if (s[i] < '0' || s[i] > '9') return false;
    v = v * 10 + static_cast<uint64_t>(s[i] - '0');
    if (v > static_cast<uint64_t>(INT64_MAX)) return false;
  }
  *out = static_cast<int64_t>(v);
  return true;
}

inline bool parse_int(const std::string& s, int64_t* out) {
  if (s.empty()) return false;
  bool neg = false;
  size_t i = 0;
  if (s[0] == '-' || s[0] == '+') {
    neg = s[0] == '-';
    i = 1;
  }
  if (i >= s.size()) return false;
  uint64_t v = 0;
  for (; i < s.size(); i++) {
    if (s[i] < '0' || s[i] > '9') return false;
    v = v * 10 + static_cast<uint64_t>(s[i] - '0');
    if (v > static_cast<uint64_t>(INT64_MAX)) return false;
  }
  *out = neg ? -static_cast<int64_t>(v) : static_cast<int64_t>(v);
  return true;
}

inline bool parse_bool(const std::string& s, int64_t* out) {
  static const char* kTrue[] = {"1", "y", "Y", "true", "on"};
  static const char* kFalse[] = {"0", "n", "N", "false", "off"};
  for (const char* t : kTrue)
    if (s == t) {
      *out = 1;
      return true;
    }
  for (const char* f : kFalse)
    if (s == f) {
      *out = 0;
      return true;
    }
  return false;
}

// One-directive scan: literal text around a single %u, %d or %s. %s must be
// the final element and consumes the (non-empty) remainder.
inline bool scan_match(const std::string& fmt, const std::string& input, Value* out) {
  size_t d = fmt.find('%');
  std::string prefix = fmt.substr(0, d);
  char dir = fmt[d + 1];
  std::string suffix = fmt.substr(d + 2);
  if (input.size() < prefix.size() || input.compare(0, prefix.size(), prefix) != 0) return false;
  std::string rest = input.substr(prefix.size());
  if (dir == 's') {
    if (rest.empty()) return false;
    out->is_str = true;
    out->s = rest;
    return true;
  }
  if (rest.size() < suffix.size() ||
      rest.compare(rest.size() - suffix.size(), suffix.size(), suffix) != 0)
    return false;
  std::string num = rest.substr(0, rest.size() - suffix.size());
  out->is_str = false;
  return dir == 'u' ? parse_uint(num, &out->i) : parse_int(num, &out->i);
}

inline int match_string(const std::vector<std::string>& set, const std::string& s) {
  for (size_t i = 0; i < set.size(); i++)
    if (set[i] == s) return static_cast<int>(i);
  return -1;
}

}  // namespace helpers

// ---------------------------------------------------------------------------
// CaseRunner: executes one TestCase against a freshly reset KernelState under
// the deterministic cooperative scheduler. Value-semantic (copyable) so the
// interleaving enumerator can fork execution at scheduler choice points.

class CaseRunner {
 public:
  CaseRunner(const BootedKernel& boot, const TestCase& tc)
      : boot_(&boot),
        tc_(&tc),
        state_(boot),
        sched_rng_(tc.schedule_seed),
        expand_rng_(~tc.schedule_seed) {
    threads_.resize(tc.threads.size());
    for (size_t t = 0; t < tc.threads.size(); t++) {
      threads_[t].index = static_cast<int>(t);
      statuses_.emplace_back(tc.threads[t].size());
    }
  }

  // --- driving

  ExecutionResult run(const std::vector<int>* forced_trace = nullptr) {
    size_t k = 0;
    while (!finished()) {
      std::vector<int> r = runnable();
      if (r.empty()) {
        mark_deadlock();
        break;
      }
      int pick;
      if (forced_trace) {
        if (k >= forced_trace->size()) throw EngineError("trace exhausted before case finished");
        pick = (*forced_trace)[k++];
        bool ok = std::find(r.begin(), r.end(), pick) != r.end();
        if (!ok) throw EngineError("trace divergence: thread not runnable");
      } else {
        pick = r[sched_rng_.below(r.size())];
      }
      step(pick);
    }
    return collect();
  }

  bool finished() const {
    if (state_.verdict) return true;
    for (const auto& t : threads_)
      if (!t.done) return false;
    return true;
  }

  std::vector<int> runnable() const {
    std::vector<int> out;
    for (const auto& t : threads_) {
      if (t.done) continue;
      if (t.at_lock) {
        int owner = state_.lock_owner[t.pending_lock];
        if (owner != -1) continue;  // held (self-relock also blocks: non-reentrant)
      }
      out.push_back(t.index);
    }
    return out;
  }

  // All threads blocked: instantaneous deadlock verdict attributed to the
  // lowest-index blocked thread's lock statement.
  void mark_deadlock() {
    for (const auto& t : threads_) {
      if (t.done || !t.at_lock) continue;
      set_verdict(BugReport::make(BugType::DEADLOCK, t.driver_name, t.entry_name, t.lock_stmt));
      return;
    }
    // No thread at a lock: nothing to do (all finished).
  }

  ExecutionResult collect() const {
    ExecutionResult res;
    res.coverage = state_.coverage;
    res.verdict = state_.verdict;
    res.statuses = statuses_;
    res.trace = trace_;
    return res;
  }

  const KernelState& state() const { return state_; }

  // Runs the picked thread up to its next yield point (explicit yield, lock
  // acquisition, helper boundary or call boundary).
  void step(int thread) {
    trace_.push_back(thread);
    ThreadExec& t = threads_[thread];
    if (t.at_lock) {
      // Acquisition was the yield point; the lock is free now.
      state_.lock_owner[t.pending_lock] = thread;
      t.at_lock = false;
      t.frame_stack.back().next++;
      exec_until_yield(t);
      return;
    }
    if (t.frame_stack.empty()) {
      start_call(t);
      return;
    }
    exec_until_yield(t);
  }

 private:
  struct Frame {
    const dmir::Block* block = nullptr;
    size_t next = 0;
    const dmir::Stmt* iter = nullptr;  // set for list_iter body instances
    std::vector<int64_t> snapshot;
    size_t iter_pos = 0;
  };

  struct ThreadExec {
    int index = 0;
    size_t call_idx = 0;
    bool done = false;

    // current call execution context
    std::vector<Frame> frame_stack;
    int device = -1;
    std::string driver_name, entry_name;
    std::vector<Value> locals;
    std::vector<Value> args;
    std::string buf;
    bool syz_open_pending = false;  // syz_mod_dev: open /dev after the write

    bool at_lock = false;
    int pending_lock = -1;
    int lock_stmt = -1;
  };

  const Call& cur_call(const ThreadExec& t) const { return (*tc_).threads[t.index][t.call_idx]; }

  void set_verdict(BugReport r) {
    if (state_.verdict) return;
    state_.verdict = std::move(r);
    for (auto& t : threads_) t.done = true;
  }

  void finish_call(ThreadExec& t, dmir::Status st) {
    CallStatus& cs = statuses_[t.index][t.call_idx];
    if (t.syz_open_pending) {
      cs.executed = true;
      cs.status = st;
      cs.open_status = do_open(t, cur_call(t));
    } else {
      cs.executed = true;
      cs.status = st;
    }
    t.frame_stack.clear();
    t.locals.clear();
    t.syz_open_pending = false;
    t.call_idx++;
    if (t.call_idx >= (*tc_).threads[t.index].size()) t.done = true;
  }

  // --- call dispatch

  void start_call(ThreadExec& t) {
    const Call& c = cur_call(t);
    switch (c.kind) {
      case CallKind::OpenDev: {
        CallStatus& cs = statuses_[t.index][t.call_idx];
        cs.executed = true;
        cs.status = do_open(t, c);
        t.call_idx++;
        if (t.call_idx >= (*tc_).threads[t.index].size()) t.done = true;
        return;
      }
      case CallKind::InvokeOp: {
        auto it = fds_.find(c.fd);
        if (it == fds_.end()) {
          finish_call(t, dmir::Status::Enoent);
          return;
        }
        const DeviceInfo& dev = boot_->devices()[it->second];
        const DriverRt& rt = boot_->driver_rt(dev.driver->name);
        auto oit = rt.ops.find(c.op);
        if (oit == rt.ops.end()) {
          finish_call(t, dmir::Status::Enoent);
          return;
        }
        const dmir::OpDecl* op = oit->second;
        t.device = dev.index;
        t.driver_name = dev.driver->name;
        t.entry_name = op->name;
        t.buf.clear();
        t.locals.assign(op->locals, Value{});
        t.args.clear();
        for (size_t i = 0; i < op->args.size(); i++) {
          Value v;
          if (op->args[i].type == dmir::PType::String) {
            v.is_str = true;
            if (i < c.args.size() && c.args[i].is_str) v.s = c.args[i].s;
          } else if (i < c.args.size() && !c.args[i].is_str) {
            v.i = c.args[i].i;
          }
          t.args.push_back(std::move(v));
        }
        t.frame_stack.push_back(Frame{op->body.get(), 0, nullptr, {}, 0});
        exec_until_yield(t);
        return;
      }
      case CallKind::WriteParam: {
        begin_write(t, c, /*syz=*/false);
        return;
      }
      case CallKind::SyzModDev: {
        begin_write(t, c, /*syz=*/true);
        return;
      }
    }
  }

  dmir::Status do_open(ThreadExec& t, const Call& c) {
    std::vector<std::string> cands = boot_->match_dev_paths(c.dev);
    if (cands.empty()) return dmir::Status::Enoent;
    size_t idx;
    if (c.kind == CallKind::SyzModDev) {
      idx = static_cast<size_t>(c.seed % cands.size());
    } else {
      idx = static_cast<size_t>(expand_rng_.below(cands.size()));
    }
    const VfsNode* n = boot_->vfs().find(cands[idx]);
    if (c.result > 0) fds_[c.result] = n->device;
    return dmir::Status::Ok;
  }

  void begin_write(ThreadExec& t, const Call& c, bool syz) {
    t.syz_open_pending = syz;
    std::string path = c.path;
    if (has_wildcard(path)) {
      std::vector<std::string> cands = boot_->match_param_paths(path);
      if (cands.empty()) {
        finish_call(t, dmir::Status::Enoent);
        return;
      }
      size_t idx = syz ? static_cast<size_t>(c.seed % cands.size())
                       : static_cast<size_t>(expand_rng_.below(cands.size()));
      path = cands[idx];
    }
    const VfsNode* n = boot_->vfs().find(path);
    if (!n || (n->kind != NodeKind::ParamFile && n->kind != NodeKind::AttrFile)) {
      finish_call(t, dmir::Status::Enoent);
      return;
    }
    if (n->kind == NodeKind::ParamFile) {
      finish_call(t, write_module_param(n->param, c.value));
      return;
    }
    if (!n->writable) {
      finish_call(t, dmir::Status::Eio);
      return;
    }
    const DeviceInfo& dev = boot_->devices()[n->device];
    const DriverRt& rt = boot_->driver_rt(dev.driver->name);
    const dmir::FlatAttr& fa = rt.flat_attrs[n->attr];
    t.device = dev.index;
    t.driver_name = dev.driver->name;
    t.entry_name = fa.attr->fname;
    t.buf = c.value;
    t.locals.assign(fa.attr->store_locals, Value{});
    t.args.clear();
    t.frame_stack.push_back(Frame{fa.attr->store.get(), 0, nullptr, {}, 0});
    exec_until_yield(t);
  }

  // Module parameters have no validation callbacks; only the type conversion
  // itself can reject the payload.
  dmir::Status write_module_param(int flat, const std::string& value) {
    auto [mi, pi] = boot_->program().flat_params[flat];
    const dmir::ParamDecl& p = boot_->program().modules[mi].params[pi];
    Value v;
    switch (p.type) {
      case dmir::PType::Uint:
        if (!helpers::parse_uint(value, &v.i)) return dmir::Status::Einval;
        break;
      case dmir::PType::Int:
        if (!helpers::parse_int(value, &v.i)) return dmir::Status::Einval;
        break;
      case dmir::PType::Bool:
        if (!helpers::parse_bool(value, &v.i)) return dmir::Status::Einval;
        break;
      case dmir::PType::String:
        v.is_str = true;
        v.s = value;
        break;
    }
    state_.params[flat] = std::move(v);
    return dmir::Status::Ok;
  }

  // --- interpretation

  enum class SliceEnd { Yield, CallDone, Verdict };

  void exec_until_yield(ThreadExec& t) {
    while (true) {
      if (state_.verdict) return;
      if (t.frame_stack.empty()) return;  // call finished
      Frame& f = t.frame_stack.back();
      if (f.next >= f.block->stmts.size()) {
        if (f.iter) {
          f.iter_pos++;
          if (f.iter_pos < f.snapshot.size()) {
            f.next = 0;
            continue;
          }
        }
        t.frame_stack.pop_back();
        if (t.frame_stack.empty()) {
          finish_call(t, dmir::Status::Ok);  // fell off the end of the body
          return;
        }
        continue;
      }
      const dmir::Stmt& s = f.block->stmts[f.next];
      switch (exec_stmt(t, f, s)) {
        case StepResult::Continue: break;
        case StepResult::EndSlice: return;
        case StepResult::CallDone: return;
        case StepResult::Aborted: return;
      }
    }
  }

  enum class StepResult { Continue, EndSlice, CallDone, Aborted };

  StepResult exec_stmt(ThreadExec& t, Frame& f, const dmir::Stmt& s) {
    switch (s.kind) {
      case dmir::StmtKind::Assign: {
        Value v;
        if (!eval(t, s.rhs, &v)) return StepResult::Aborted;
        if (!write_lvalue(t, s.lv, v)) {
          finish_call(t, dmir::Status::Eio);
          return StepResult::CallDone;
        }
        f.next++;
        return StepResult::Continue;
      }
      case dmir::StmtKind::If: {
        Value c;
        if (!eval(t, s.cond, &c)) return StepResult::Aborted;
        bool taken = c.i != 0;
        state_.coverage.add(taken ? s.true_edge : s.false_edge);
        f.next++;
        if (taken) {
          t.frame_stack.push_back(Frame{s.then_blk.get(), 0, nullptr, {}, 0});
        } else if (s.else_blk) {
          t.frame_stack.push_back(Frame{s.else_blk.get(), 0, nullptr, {}, 0});
        }
        return StepResult::Continue;
      }
      case dmir::StmtKind::Switch: {
        Value v;
        if (!eval(t, s.cond, &v)) return StepResult::Aborted;
        f.next++;
        const dmir::Block* target = nullptr;
        int edge = s.default_edge;
        for (const auto& c : s.cases) {
          bool hit = c.label.type == dmir::PType::String ? (v.is_str && v.s == c.label.s)
                                                         : (!v.is_str && v.i == c.label.i);
          if (hit) {
            target = c.body.get();
            edge = c.edge;
            break;
          }
        }
        if (!target && s.default_blk) target = s.default_blk.get();
        state_.coverage.add(edge);
        if (target) t.frame_stack.push_back(Frame{target, 0, nullptr, {}, 0});
        return StepResult::Continue;
      }
      case dmir::StmtKind::Return:
        finish_call(t, s.status);
        return StepResult::CallDone;
      case dmir::StmtKind::HelperLet: {
        bool ok = true;
        Value out;
        switch (s.helper) {
          case dmir::Helper::MatchString:
            out.i = helpers::match_string(s.match_set, t.buf);
            break;
          case dmir::Helper::KstrToUint: ok = helpers::parse_uint(t.buf, &out.i); break;
          case dmir::Helper::KstrToInt: ok = helpers::parse_int(t.buf, &out.i); break;
          case dmir::Helper::KstrToBool: ok = helpers::parse_bool(t.buf, &out.i); break;
          case dmir::Helper::Scan: ok = helpers::scan_match(s.scan_format, t.buf, &out); break;
        }
        if (!ok) {
          // Conversion failure aborts the store with EINVAL, like the
          // kernel's `if (ret) return ret;` idiom after kstrto*().
          finish_call(t, dmir::Status::Einval);
          return StepResult::CallDone;
        }
        t.locals[s.let_slot] = std::move(out);
        f.next++;
        return StepResult::EndSlice;  // helper boundary
      }
      case dmir::StmtKind::Lock: {
        if (state_.lock_owner[s.lock_index] == -1) {
          // Free now, but acquisition is still a scheduling point: the
          // acquire happens when this thread is picked again.
        }
        t.at_lock = true;
        t.pending_lock = s.lock_index;
        t.lock_stmt = s.id;
        return StepResult::EndSlice;
      }
      case dmir::StmtKind::Unlock:
        if (state_.lock_owner[s.lock_index] == t.index) state_.lock_owner[s.lock_index] = -1;
        f.next++;
        return StepResult::Continue;
      case dmir::StmtKind::Alloc: {
        int64_t id = state_.handles.alloc();
        Value v;
        v.i = id;
        if (!write_lvalue(t, s.lv, v)) {
          finish_call(t, dmir::Status::Eio);
          return StepResult::CallDone;
        }
        f.next++;
        return StepResult::Continue;
      }
      case dmir::StmtKind::Free: {
        int64_t id;
        if (!read_handle(t, s.lv, &id)) {
          finish_call(t, dmir::Status::Eio);
          return StepResult::CallDone;
        }
        if (id == 0) {  // kfree(NULL): legal no-op
          f.next++;
          return StepResult::Continue;
        }
        if (state_.handles.is_freed(id)) {
          set_verdict(BugReport::make(BugType::DOUBLE_FREE, t.driver_name, t.entry_name, s.id));
          return StepResult::Aborted;
        }
        state_.handles.mark_freed(id);
        Value null;
        if (s.lv.kind != dmir::LValue::It) write_lvalue(t, s.lv, null);
        f.next++;
        return StepResult::Continue;
      }
      case dmir::StmtKind::Use: {
        int64_t id;
        if (!read_handle(t, s.lv, &id)) {
          finish_call(t, dmir::Status::Eio);
          return StepResult::CallDone;
        }
        if (id == 0) {
          set_verdict(BugReport::make(BugType::NPD, t.driver_name, t.entry_name, s.id));
          return StepResult::Aborted;
        }
        if (state_.handles.is_freed(id)) {
          set_verdict(BugReport::make(BugType::UAF, t.driver_name, t.entry_name, s.id));
          return StepResult::Aborted;
        }
        f.next++;
        return StepResult::Continue;
      }
      case dmir::StmtKind::ListAdd:
      case dmir::StmtKind::ListDel: {
        int64_t id;
        if (!read_handle(t, s.lv, &id)) {
          finish_call(t, dmir::Status::Eio);
          return StepResult::CallDone;
        }
        std::vector<int64_t>* lst = list_of(t, s.list);
        if (s.kind == dmir::StmtKind::ListAdd) {
          lst->push_back(id);
        } else {
          auto it = std::find(lst->begin(), lst->end(), id);
          if (it != lst->end()) lst->erase(it);
        }
        f.next++;
        return StepResult::Continue;
      }
      case dmir::StmtKind::ListIter: {
        f.next++;
        std::vector<int64_t> snap = *list_of(t, s.list);  // snapshot cursor
        if (!snap.empty())
          t.frame_stack.push_back(Frame{s.body.get(), 0, &s, std::move(snap), 0});
        return StepResult::Continue;
      }
      case dmir::StmtKind::Yield:
        f.next++;
        return StepResult::EndSlice;
    }
    return StepResult::Continue;
  }

  std::vector<int64_t>* list_of(ThreadExec& t, const dmir::ListRef& lr) {
    if (lr.global) return &state_.global_lists[lr.index];
    return &state_.dlists[t.device][lr.index];
  }

  // Innermost active iteration element.
  bool iter_element(const ThreadExec& t, int64_t* out) const {
    for (auto it = t.frame_stack.rbegin(); it != t.frame_stack.rend(); ++it) {
      if (it->iter) {
        *out = it->snapshot[it->iter_pos];
        return true;
      }
    }
    return false;
  }

  // Resolve the device + scalar slot an lvalue names. Fails (false) when a
  // parent ref has no parent device or the parent's driver lacks the field:
  // the call then returns EIO, the hardware-gone analog.
  bool locate_field(const ThreadExec& t, dmir::LValue::Kind kind, const std::string& field,
                    int resolved_slot, int* dev_out, int* slot_out) const {
    if (kind == dmir::LValue::SelfField) {
      *dev_out = t.device;
      *slot_out = resolved_slot;
      return true;
    }
    int parent = boot_->devices()[t.device].parent;
    if (parent < 0) return false;
    const dmir::FieldDecl* f = boot_->devices()[parent].driver->find_field(field);
    if (!f || f->type == dmir::FType::List) return false;
    *dev_out = parent;
    *slot_out = f->slot;
    return true;
  }

  bool read_handle(const ThreadExec& t, const dmir::LValue& lv, int64_t* out) {
    if (lv.kind == dmir::LValue::It) return iter_element(t, out);
    int dev, slot;
    if (!locate_field(t, lv.kind, lv.field, lv.index, &dev, &slot)) return false;
    *out = state_.fields[dev][slot].i;
    return true;
  }

  bool write_lvalue(ThreadExec& t, const dmir::LValue& lv, const Value& v) {
    int dev, slot;
    if (!locate_field(t, lv.kind, lv.field, lv.index, &dev, &slot)) return false;
    state_.fields[dev][slot] = v;
    return true;
  }

  // Expression evaluation; returns false when a verdict aborted the case
  // (division by zero) or a parent field was unreachable.
  bool eval(ThreadExec& t, const dmir::Expr& e, Value* out) {
    switch (e.kind) {
      case dmir::ExprKind::IntLit:
      case dmir::ExprKind::BoolLit:
        out->is_str = false;
        out->i = e.ival;
        return true;
      case dmir::ExprKind::StrLit:
        out->is_str = true;
        out->s = e.sval;
        return true;
      case dmir::ExprKind::BufRef:
        out->is_str = true;
        out->s = t.buf;
        return true;
      case dmir::ExprKind::SelfField:
        *out = state_.fields[t.device][e.index];
        return true;
      case dmir::ExprKind::ParentField: {
        int dev, slot;
        if (!locate_field(t, dmir::LValue::ParentField, e.name, -1, &dev, &slot)) {
          finish_call(t, dmir::Status::Eio);
          return false;
        }
        *out = state_.fields[dev][slot];
        return true;
      }
      case dmir::ExprKind::ParamRef:
        *out = state_.params[e.index];
        return true;
      case dmir::ExprKind::ArgRef:
        *out = t.args[e.index];
        return true;
      case dmir::ExprKind::LocalRef:
        *out = t.locals[e.index];
        return true;
      case dmir::ExprKind::Unary: {
        Value v;
        if (!eval(t, e.kids[0], &v)) return false;
        out->is_str = false;
        out->i = e.uop == dmir::UnOp::Not
                     ? (v.i == 0 ? 1 : 0)
                     : static_cast<int64_t>(-static_cast<uint64_t>(v.i));
        return true;
      }
      case dmir::ExprKind::Binary: {
        using dmir::BinOp;
        // Short-circuit logical operators.
        if (e.bop == BinOp::And || e.bop == BinOp::Or) {
          Value a;
          if (!eval(t, e.kids[0], &a)) return false;
          bool lhs = a.i != 0;
          if (e.bop == BinOp::And && !lhs) {
            out->is_str = false;
            out->i = 0;
            return true;
          }
          if (e.bop == BinOp::Or && lhs) {
            out->is_str = false;
            out->i = 1;
            return true;
          }
          Value b;
          if (!eval(t, e.kids[1], &b)) return false;
          out->is_str = false;
          out->i = b.i != 0 ? 1 : 0;
          return true;
        }
        Value a, b;
        if (!eval(t, e.kids[0], &a) || !eval(t, e.kids[1], &b)) return false;
        out->is_str = false;
        switch (e.bop) {
          case BinOp::Add:
            out->i = static_cast<int64_t>(static_cast<uint64_t>(a.i) + static_cast<uint64_t>(b.i));
            return true;
          case BinOp::Sub:
            out->i = static_cast<int64_t>(static_cast<uint64_t>(a.i) - static_cast<uint64_t>(b.i));
            return true;
          case BinOp::Mul:
            out->i = static_cast<int64_t>(static_cast<uint64_t>(a.i) * static_cast<uint64_t>(b.i));
            return true;
          case BinOp::Div:
          case BinOp::Mod: {
            if (b.i == 0) {
              set_verdict(BugReport::make(BugType::DIV0, t.driver_name, t.entry_name,
                                          cur_stmt_id(t)));
              return false;
            }
            if (a.i == INT64_MIN && b.i == -1) {  // wrap, not UB
              out->i = e.bop == BinOp::Div ? INT64_MIN : 0;
              return true;
            }
            out->i = e.bop == BinOp::Div ? a.i / b.i : a.i % b.i;
            return true;
          }
          case BinOp::Eq:
            out->i = a.is_str ? (a.s == b.s ? 1 : 0) : (a.i == b.i ? 1 : 0);
            return true;
          case BinOp::Ne:
            out->i = a.is_str ? (a.s != b.s ? 1 : 0) : (a.i != b.i ? 1 : 0);
            return true;
          case BinOp::Lt: out->i = a.i < b.i ? 1 : 0; return true;
          case BinOp::Le: out->i = a.i <= b.i ? 1 : 0; return true;
          case BinOp::Gt: out->i = a.i > b.i ? 1 : 0; return true;
          case BinOp::Ge: out->i = a.i >= b.i ? 1 : 0; return true;
          default: return true;
        }
      }
    }
    return true;
  }

  int cur_stmt_id(const ThreadExec& t) const {
    const Frame& f = t.frame_stack.back();
    return f.block->stmts[f.next].id;
  }

  const BootedKernel* boot_;
  const TestCase* tc_;
  KernelState state_;
  SplitMix64 sched_rng_;
  SplitMix64 expand_rng_;
  std::vector<ThreadExec> threads_;
  std::vector<std::vector<CallStatus>> statuses_;
  std::map<int, int> fds_;  // fd id -> device index
  std::vector<int> trace_;
};

// ---------------------------------------------------------------------------
// Entry points

inline ExecutionResult run_case(const BootedKernel& boot, const TestCase& tc,
                                const std::vector<int>* forced_trace = nullptr) {
  CaseRunner r(boot, tc);
  return r.run(forced_trace);
}

// Single-threaded convenience: write one value to a path (used heavily by
// the extraction soundness oracle).
inline dmir::Status write_param_once(const BootedKernel& boot, const std::string& path,
                                     const std::string& value) {
  TestCase tc;
  Call c;
  c.kind = CallKind::WriteParam;
  c.path = path;
  c.value = value;
  tc.threads.push_back({c});
  tc.schedule_seed = 0;
  ExecutionResult res = run_case(boot, tc);
  if (res.verdict) return dmir::Status::Eio;
  return res.statuses[0][0].status;
}

// Exhaustive interleaving exploration for small cases. Returns the set of
// reachable outcomes; a clean run contributes "" to the set.
inline std::set<std::string> enumerate_interleavings(const BootedKernel& boot, const TestCase& tc,
                                                     size_t max_nodes = 2'000'000) {
  std::set<std::string> verdicts;
  size_t nodes = 0;
  std::function<void(const CaseRunner&)> dfs = [&](const CaseRunner& st) {
    if (++nodes > max_nodes) throw EngineError("interleaving enumeration exceeded node budget");
    if (st.finished()) {
      const auto& v = st.state().verdict;
      verdicts.insert(v ? v->title : "");
      return;
    }
    std::vector<int> r = st.runnable();
    if (r.empty()) {
      CaseRunner dead = st;
      dead.mark_deadlock();
      const auto& v = dead.state().verdict;
      verdicts.insert(v ? v->title : "");
      return;
    }
    for (int t : r) {
      CaseRunner child = st;
      child.step(t);
      dfs(child);
    }
  };
  dfs(CaseRunner(boot, tc));
  return verdicts;
}

}  // namespace paramfuzz::vkernel
