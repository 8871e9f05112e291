#include "promptloom/executor.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <unordered_set>

#include <omp.h>

namespace promptloom {

std::string_view to_string(BlockStatus s) noexcept {
  switch (s) {
    case BlockStatus::Pending: return "Pending";
    case BlockStatus::SkippedFrozen: return "SkippedFrozen";
    case BlockStatus::SkippedBranch: return "SkippedBranch";
    case BlockStatus::Running: return "Running";
    case BlockStatus::Done: return "Done";
    case BlockStatus::Failed: return "Failed";
  }
  return "?";
}

std::optional<BlockStatus> parse_block_status(std::string_view s) noexcept {
  for (auto st : {BlockStatus::Pending, BlockStatus::SkippedFrozen, BlockStatus::SkippedBranch,
                  BlockStatus::Running, BlockStatus::Done, BlockStatus::Failed}) {
    if (to_string(st) == s) return st;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// ChainState
// ---------------------------------------------------------------------------

const DataEntry* ChainState::find(std::string_view id) const {
  for (const auto& [layer, list] : entries) {
    for (const auto& e : list) {
      if (e.id == id) return &e;
    }
  }
  return nullptr;
}

DataEntry* ChainState::find(std::string_view id) {
  return const_cast<DataEntry*>(std::as_const(*this).find(id));
}

std::vector<DataEntry> ChainState::live(const LayerId& layer) const {
  std::vector<DataEntry> out;
  auto it = entries.find(layer);
  if (it == entries.end()) return out;
  for (const auto& e : it->second) {
    if (!e.orphaned) out.push_back(e);
  }
  return out;
}

std::size_t ChainState::entry_count() const {
  std::size_t n = 0;
  for (const auto& [layer, list] : entries) n += list.size();
  return n;
}

namespace {

EntryId next_id(ChainState& state) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "e%08llu", static_cast<unsigned long long>(state.next_entry_seq++));
  return buf;
}

void sort_layer(std::vector<DataEntry>& list) {
  std::stable_sort(list.begin(), list.end(), path_less);
}

bool in_lineage(const DataEntry& e, const EntryId& id) {
  return std::find(e.lineage.begin(), e.lineage.end(), id) != e.lineage.end();
}

// Marks every descendant of `id` stale (deferred for frozen ones); with
// `orphan`, also flags them as having lost an ancestor.
void touch_descendants(ChainState& state, const EntryId& id, bool orphan) {
  for (auto& [layer, list] : state.entries) {
    for (auto& e : list) {
      if (!in_lineage(e, id)) continue;
      if (orphan) e.orphaned = true;
      if (e.frozen) {
        state.deferred_stale.insert(e.id);
      } else {
        e.stale = true;
      }
    }
  }
}

bool remove_entry(ChainState& state, const EntryId& id) {
  for (auto& [layer, list] : state.entries) {
    auto it = std::find_if(list.begin(), list.end(), [&](const DataEntry& e) { return e.id == id; });
    if (it != list.end()) {
      list.erase(it);
      state.deferred_stale.erase(id);
      return true;
    }
  }
  return false;
}

bool retained(const DataEntry& e, bool overwrite_user) {
  return e.frozen || (e.origin == Origin::User && !overwrite_user);
}

std::int64_t wall_clock_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

}  // namespace

// ---------------------------------------------------------------------------
// State construction
// ---------------------------------------------------------------------------

ChainState make_state(const Chain& chain) {
  ChainState s;
  s.chain_id = chain.id;
  for (const auto& [id, layer] : chain.layers) s.entries[id];
  return s;
}

EntryId seed_entry(ChainState& state, const Chain& chain, const LayerId& layer,
                   std::string text) {
  const auto& l = chain.layer(layer);
  if (!l.is_root) throw Error("seeds go into root layers; '" + layer + "' is not one");
  DataEntry e;
  e.id = next_id(state);
  e.layer = layer;
  e.text = std::move(text);
  e.origin = Origin::Seed;
  auto id = e.id;
  auto& list = state.entries[layer];
  list.push_back(std::move(e));
  sort_layer(list);
  return id;
}

EntryId add_entry(ChainState& state, const Chain& chain, const LayerId& layer,
                  std::string text, std::vector<EntryId> lineage) {
  chain.layer(layer);
  for (const auto& a : lineage) {
    if (state.find(a) == nullptr) throw UnknownEntry(a);
  }
  DataEntry e;
  e.id = next_id(state);
  e.layer = layer;
  e.text = std::move(text);
  e.lineage = std::move(lineage);
  e.origin = Origin::User;
  auto id = e.id;
  auto& list = state.entries[layer];
  list.push_back(std::move(e));
  sort_layer(list);
  return id;
}

void reconcile(const Chain& chain, ChainState& state) {
  for (auto it = state.entries.begin(); it != state.entries.end();) {
    if (chain.find_layer(it->first) == nullptr) {
      for (const auto& e : it->second) state.deferred_stale.erase(e.id);
      it = state.entries.erase(it);
    } else {
      ++it;
    }
  }
  for (const auto& [id, layer] : chain.layers) state.entries[id];

  std::unordered_set<EntryId> ids;
  for (const auto& [layer, list] : state.entries) {
    for (const auto& e : list) ids.insert(e.id);
  }
  for (auto& [layer, list] : state.entries) {
    for (auto& e : list) {
      const bool missing = std::any_of(e.lineage.begin(), e.lineage.end(),
                                       [&](const EntryId& a) { return !ids.count(a); });
      if (missing && !e.orphaned) {
        e.orphaned = true;
        if (e.frozen) state.deferred_stale.insert(e.id);
        else e.stale = true;
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Planning
// ---------------------------------------------------------------------------

std::vector<BlockPlan> plan_step(const Chain& chain, const ChainState& state,
                                 const StepId& step_id, bool overwrite_user) {
  const Step& step = chain.step(step_id);

  std::vector<LayerEntries> inputs;
  for (const auto& layer : step.inputs) {
    auto live = state.live(layer);
    if (live.empty()) throw MissingUpstream(step.id, layer);
    inputs.push_back({layer, std::move(live)});
  }
  std::vector<DataEntry> guards;
  if (step.branch) {
    guards = state.live(step.branch->guard_layer);
    if (guards.empty()) throw MissingUpstream(step.id, step.branch->guard_layer);
    std::stable_sort(guards.begin(), guards.end(), path_less);
  }

  std::unordered_set<EntryId> known;
  for (const auto& [layer, list] : state.entries) {
    for (const auto& e : list) known.insert(e.id);
  }

  std::vector<LineageGroup> groups;
  if (step.inputs.empty()) {
    LineageGroup g;
    g.global = true;
    groups.push_back(std::move(g));
  } else {
    groups = group_lineages(inputs, step.effective_scope(), known);
  }

  const auto tmpl = instantiate(chain, step);
  const auto outputs = state.live(step.output);
  const std::string wanted = step.branch ? guard_key(step.branch->equals_label) : "";

  std::vector<BlockPlan> plans;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    BlockPlan p;
    p.step_id = step.id;
    p.index = i;
    p.group = std::move(groups[i]);
    p.preview = render(tmpl, step, tmpl.task_description, p.group);

    for (const auto& o : outputs) {
      const bool match = p.group.global || in_lineage(o, p.group.anchors.front());
      if (match) p.outputs.push_back(o.id);
    }

    if (step.branch) {
      const DataEntry* guard = nullptr;
      for (const auto& g : guards) {
        const bool hit = std::any_of(p.group.entries.begin(), p.group.entries.end(),
                                     [&](const DataEntry& m) { return related(g, m); });
        if (hit) {
          guard = &g;
          break;
        }
      }
      if (guard == nullptr || guard_key(guard->text) != wanted) {
        p.status = BlockStatus::SkippedBranch;
      }
    }
    if (p.status == BlockStatus::Pending && !p.outputs.empty()) {
      const bool all_kept = std::all_of(p.outputs.begin(), p.outputs.end(), [&](const EntryId& id) {
        return retained(*state.find(id), overwrite_user);
      });
      if (all_kept) p.status = BlockStatus::SkippedFrozen;
    }
    plans.push_back(std::move(p));
  }
  return plans;
}

bool needs_rerun(const BlockPlan& plan, const ChainState& state) {
  if (plan.outputs.empty()) return true;
  for (const auto& m : plan.group.entries) {
    if (m.stale) return true;
  }
  std::unordered_set<EntryId> covered;
  for (const auto& id : plan.outputs) {
    const DataEntry* o = state.find(id);
    if (o == nullptr || o->stale) return true;
    covered.insert(o->lineage.begin(), o->lineage.end());
  }
  return std::any_of(plan.group.entries.begin(), plan.group.entries.end(),
                     [&](const DataEntry& m) { return !covered.count(m.id); });
}

// ---------------------------------------------------------------------------
// Execution
// ---------------------------------------------------------------------------

BlockResult execute_block(const Chain& chain, const BlockPlan& plan, const Backend& backend) {
  BlockResult r;
  try {
    const Step& step = chain.step(plan.step_id);
    r.completion = backend.complete(plan.preview);
    if (r.completion->finish_reason == FinishReason::Error) {
      r.status = BlockStatus::Failed;
      r.error = "backend reported an error finish";
      return r;
    }
    r.parsed = parse_output(*r.completion, defaults_for(step.op).parse_type,
                            plan.preview.stop_sequences);
  } catch (const std::exception& e) {
    r.status = BlockStatus::Failed;
    r.error = e.what();
  }
  return r;
}

const RunRecord& commit_block(const Chain& chain, ChainState& state, const BlockPlan& plan,
                              const BlockResult& result, const RunOptions& options) {
  const Step& step = chain.step(plan.step_id);
  RunRecord rec;
  rec.timestamp_ms = options.clock ? options.clock() : wall_clock_ms();
  rec.plan = plan;
  rec.plan.status = result.status;
  rec.request = plan.preview;
  rec.completion = result.completion;
  rec.status = result.status;
  rec.error = result.error;
  rec.warnings = result.parsed.warnings;

  if (result.status == BlockStatus::Done) {
    rec.parsed = result.parsed.values;
    for (const auto& id : plan.outputs) {
      const DataEntry* o = state.find(id);
      if (o == nullptr || retained(*o, options.overwrite_user)) continue;
      remove_entry(state, id);
      touch_descendants(state, id, true);
      rec.replaced_entry_ids.push_back(id);
    }
    const auto lineage = plan.group.merged_lineage();
    auto& list = state.entries[step.output];
    for (const auto& value : result.parsed.values) {
      DataEntry e;
      e.id = next_id(state);
      e.layer = step.output;
      e.text = value;
      e.lineage = lineage;
      e.origin = Origin::Model;
      rec.created_entry_ids.push_back(e.id);
      list.push_back(std::move(e));
    }
    sort_layer(list);
  }
  state.history.push_back(std::move(rec));
  return state.history.back();
}

const RunRecord& run_block(const Chain& chain, ChainState& state, const BlockPlan& plan,
                           const Backend& backend, const RunOptions& options) {
  if (plan.status != BlockStatus::Pending) {
    throw Error("block " + std::to_string(plan.index) + " of step '" + plan.step_id +
                "' is " + std::string(to_string(plan.status)) + ", not Pending");
  }
  if (options.observer) options.observer(plan, BlockStatus::Running);
  const auto result = execute_block(chain, plan, backend);
  const auto& rec = commit_block(chain, state, plan, result, options);
  if (options.observer) options.observer(plan, result.status);
  return rec;
}

StepRun run_step(const Chain& chain, ChainState& state, const StepId& step_id,
                 const Backend& backend, const RunOptions& options) {
  const Step& step = chain.step(step_id);

  StepRun run;
  run.step_id = step_id;
  run.plans = plan_step(chain, state, step_id, options.overwrite_user);

  // Orphans never join a group, so dropping them does not change the plans.
  std::vector<EntryId> pruned;
  for (const auto& e : state.entries[step.output]) {
    if (e.orphaned && !e.frozen) pruned.push_back(e.id);
  }
  for (const auto& id : pruned) {
    remove_entry(state, id);
    touch_descendants(state, id, true);
  }

  std::vector<std::size_t> selected;
  for (const auto& p : run.plans) {
    if (p.status != BlockStatus::Pending) continue;
    if (options.only_block && *options.only_block != p.index) continue;
    if (options.mode == RunMode::StaleOnly && !needs_rerun(p, state)) continue;
    selected.push_back(p.index);
  }

  std::vector<BlockResult> results(selected.size());
  auto work = [&](std::size_t k) {
    const auto& plan = run.plans[selected[k]];
    if (options.observer) options.observer(plan, BlockStatus::Running);
    results[k] = execute_block(chain, plan, backend);
  };

  const auto n = static_cast<std::ptrdiff_t>(selected.size());
  if (options.policy == ExecutionPolicy::Parallel && n > 1) {
    const int threads = options.max_threads > 0 ? options.max_threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(threads)
    for (std::ptrdiff_t k = 0; k < n; ++k) work(static_cast<std::size_t>(k));
  } else {
    for (std::ptrdiff_t k = 0; k < n; ++k) work(static_cast<std::size_t>(k));
  }

  for (std::size_t k = 0; k < selected.size(); ++k) {
    auto& plan = run.plans[selected[k]];
    commit_block(chain, state, plan, results[k], options);
    plan.status = results[k].status;
    ++run.executed;
    if (plan.status == BlockStatus::Failed) ++run.failed;
    if (options.observer) options.observer(plan, plan.status);
  }
  return run;
}

std::size_t ChainRun::executed() const {
  std::size_t n = 0;
  for (const auto& s : steps) n += s.executed;
  return n;
}

std::size_t ChainRun::failed() const {
  std::size_t n = 0;
  for (const auto& s : steps) n += s.failed;
  return n;
}

ChainRun run_chain(const Chain& chain, ChainState& state, const Backend& backend, RunMode mode,
                   RunOptions options) {
  options.mode = mode;
  options.only_block.reset();
  ChainRun run;
  for (const auto& id : topological_order(chain)) {
    try {
      run.steps.push_back(run_step(chain, state, id, backend, options));
    } catch (const MissingUpstream& e) {
      run.blocked.emplace_back(id, e.what());
    }
  }
  return run;
}

// ---------------------------------------------------------------------------
// Entry edits
// ---------------------------------------------------------------------------

std::vector<EntryId> descendants_of(const ChainState& state, const EntryId& id) {
  std::vector<EntryId> out;
  for (const auto& [layer, list] : state.entries) {
    for (const auto& e : list) {
      if (in_lineage(e, id)) out.push_back(e.id);
    }
  }
  return out;
}

bool edit_entry(ChainState& state, const EntryId& id, const EntryEdit& edit) {
  DataEntry* e = state.find(id);
  if (e == nullptr) throw UnknownEntry(id);

  return std::visit(
      [&](const auto& op) -> bool {
        using Op = std::decay_t<decltype(op)>;
        if constexpr (std::is_same_v<Op, entry_edit::SetText>) {
          if (e->text == op.text) return false;
          e->text = op.text;
          e->origin = Origin::User;
          e->stale = false;
          state.deferred_stale.erase(id);
          touch_descendants(state, id, false);
          return true;
        } else if constexpr (std::is_same_v<Op, entry_edit::Freeze>) {
          if (e->frozen) return false;
          if (e->stale) throw FreezeStale(id);
          e->frozen = true;
          return true;
        } else if constexpr (std::is_same_v<Op, entry_edit::Unfreeze>) {
          if (!e->frozen) return false;
          e->frozen = false;
          if (state.deferred_stale.erase(id) > 0) e->stale = true;
          return true;
        } else {
          remove_entry(state, id);
          touch_descendants(state, id, true);
          return true;
        }
      },
      edit);
}

}  // namespace promptloom
