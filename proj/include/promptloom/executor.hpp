#pragma once

// Plans running blocks for a step, sends them to a backend and commits the
// parsed outputs back into a ChainState with lineage, staleness and freezing.
//
// Block execution is split in two phases. execute_block talks to the backend
// and never touches the state, so blocks of one step can run concurrently.
// commit_block applies a result to the state; commits always happen in plan
// order, which makes the final state independent of completion order.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "promptloom/backend.hpp"
#include "promptloom/chain.hpp"
#include "promptloom/lineage.hpp"
#include "promptloom/parser.hpp"
#include "promptloom/prompt.hpp"

namespace promptloom {

enum class BlockStatus { Pending, SkippedFrozen, SkippedBranch, Running, Done, Failed };

std::string_view to_string(BlockStatus s) noexcept;
std::optional<BlockStatus> parse_block_status(std::string_view s) noexcept;

struct BlockPlan {
  StepId step_id;
  std::size_t index = 0;
  LineageGroup group;
  PromptRequest preview;
  BlockStatus status = BlockStatus::Pending;
  // Output-layer entries currently derived from this group.
  std::vector<EntryId> outputs;

  friend bool operator==(const BlockPlan&, const BlockPlan&) = default;
};

struct RunRecord {
  std::int64_t timestamp_ms = 0;
  BlockPlan plan;
  PromptRequest request;
  std::optional<RawCompletion> completion;
  std::vector<std::string> parsed;
  std::vector<EntryId> replaced_entry_ids;
  std::vector<EntryId> created_entry_ids;
  BlockStatus status = BlockStatus::Done;  // Done or Failed
  std::string error;
  std::vector<std::string> warnings;

  friend bool operator==(const RunRecord&, const RunRecord&) = default;
};

struct ChainState {
  std::string chain_id;
  std::map<LayerId, std::vector<DataEntry>> entries;
  std::vector<RunRecord> history;
  std::uint64_t next_entry_seq = 1;
  // Frozen entries whose ancestors changed; they turn stale when unfrozen.
  std::set<EntryId> deferred_stale;

  const DataEntry* find(std::string_view id) const;
  DataEntry* find(std::string_view id);
  // Entries of a layer that still take part in grouping (not orphaned).
  std::vector<DataEntry> live(const LayerId& layer) const;
  std::size_t entry_count() const;

  friend bool operator==(const ChainState&, const ChainState&) = default;
};

enum class RunMode { Full, StaleOnly };
enum class ExecutionPolicy { Sequential, Parallel };

struct RunOptions {
  ExecutionPolicy policy = ExecutionPolicy::Parallel;
  int max_threads = 0;  // 0: OpenMP default
  bool overwrite_user = false;
  RunMode mode = RunMode::Full;
  std::optional<std::size_t> only_block;
  std::function<std::int64_t()> clock;  // defaults to wall-clock milliseconds
  // Called on every status change. May be invoked from worker threads.
  std::function<void(const BlockPlan&, BlockStatus)> observer;
};

// ---------------------------------------------------------------------------
// State construction
// ---------------------------------------------------------------------------

ChainState make_state(const Chain& chain);
EntryId seed_entry(ChainState& state, const Chain& chain, const LayerId& layer,
                   std::string text);
// A user-authored entry, e.g. an extra list item.
EntryId add_entry(ChainState& state, const Chain& chain, const LayerId& layer,
                  std::string text, std::vector<EntryId> lineage = {});
// Drops entries of layers the chain no longer has and flags orphans.
void reconcile(const Chain& chain, ChainState& state);

// ---------------------------------------------------------------------------
// Planning and execution
// ---------------------------------------------------------------------------

// Throws MissingUpstream when an input or guard layer has no live entries,
// UnknownStep for an unknown id.
std::vector<BlockPlan> plan_step(const Chain& chain, const ChainState& state,
                                 const StepId& step_id, bool overwrite_user = false);

// StaleOnly predicate: some member or output is stale, no outputs exist yet,
// or the outputs do not cover every member.
bool needs_rerun(const BlockPlan& plan, const ChainState& state);

struct BlockResult {
  std::optional<RawCompletion> completion;
  ParsedOutput parsed;
  BlockStatus status = BlockStatus::Done;
  std::string error;
};

// Sends plan.preview to the backend and parses the reply. Never throws for
// backend or parse failures; those come back as a Failed result.
BlockResult execute_block(const Chain& chain, const BlockPlan& plan, const Backend& backend);

// Applies a result: replaces the plan's non-retained outputs, stales and
// orphans their descendants, creates new entries and appends the record.
const RunRecord& commit_block(const Chain& chain, ChainState& state, const BlockPlan& plan,
                              const BlockResult& result, const RunOptions& options = {});

// execute_block + commit_block. The plan must be Pending.
const RunRecord& run_block(const Chain& chain, ChainState& state, const BlockPlan& plan,
                           const Backend& backend, const RunOptions& options = {});

struct StepRun {
  StepId step_id;
  std::vector<BlockPlan> plans;  // final statuses
  std::size_t executed = 0;
  std::size_t failed = 0;
};

StepRun run_step(const Chain& chain, ChainState& state, const StepId& step_id,
                 const Backend& backend, const RunOptions& options = {});

struct ChainRun {
  std::vector<StepRun> steps;
  // Steps that could not be planned, with the reason.
  std::vector<std::pair<StepId, std::string>> blocked;
  std::size_t executed() const;
  std::size_t failed() const;
};

// Steps in topological order. A step that cannot be planned is recorded in
// `blocked` and the rest of the chain continues.
ChainRun run_chain(const Chain& chain, ChainState& state, const Backend& backend,
                   RunMode mode, RunOptions options = {});

// ---------------------------------------------------------------------------
// Entry edits
// ---------------------------------------------------------------------------

namespace entry_edit {
struct SetText {
  std::string text;
};
struct Freeze {};
struct Unfreeze {};
struct Delete {};
}  // namespace entry_edit

using EntryEdit =
    std::variant<entry_edit::SetText, entry_edit::Freeze, entry_edit::Unfreeze, entry_edit::Delete>;

// Returns false when the edit changes nothing (same text, flag already set).
// Throws UnknownEntry or FreezeStale.
bool edit_entry(ChainState& state, const EntryId& id, const EntryEdit& e);

// Ids whose lineage contains `id`.
std::vector<EntryId> descendants_of(const ChainState& state, const EntryId& id);

}  // namespace promptloom
