#pragma once

// Chain data model: layers, entries, steps and the DAG that connects them.
//
// A Chain is a value. Structural edits never mutate a chain in place; they
// return a new chain that has passed validation, or throw EditRejected.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "promptloom/errors.hpp"

namespace promptloom {

using LayerId = std::string;
using StepId = std::string;
using EntryId = std::string;

enum class OperationKind {
  Classification,
  FactualQuery,
  Generation,
  Ideation,
  InformationExtraction,
  Rewriting,
  SplitPoints,
  ComposePoints,
};

inline constexpr OperationKind kAllOperations[] = {
    OperationKind::Classification, OperationKind::FactualQuery,
    OperationKind::Generation,     OperationKind::Ideation,
    OperationKind::InformationExtraction, OperationKind::Rewriting,
    OperationKind::SplitPoints,    OperationKind::ComposePoints,
};

enum class Mapping { OneToOne, OneToMany, ManyToOne };

Mapping mapping_of(OperationKind op) noexcept;
std::string_view to_string(OperationKind op) noexcept;
std::optional<OperationKind> parse_operation(std::string_view name) noexcept;

enum class Cardinality { Single, List };

struct DataLayer {
  LayerId id;
  std::string name;
  int color_tag = 0;
  Cardinality cardinality = Cardinality::Single;
  std::optional<StepId> producer;
  bool is_root = false;

  friend bool operator==(const DataLayer&, const DataLayer&) = default;
};

enum class Origin { Model, User, Seed };

struct DataEntry {
  EntryId id;
  LayerId layer;
  std::string text;
  std::vector<EntryId> lineage;  // root-to-parent
  bool frozen = false;
  bool stale = false;
  // Set once an ancestor is deleted or replaced; such entries no longer take
  // part in grouping and are pruned when their producing step runs again.
  bool orphaned = false;
  Origin origin = Origin::Model;

  std::vector<EntryId> path() const {
    auto p = lineage;
    p.push_back(id);
    return p;
  }

  friend bool operator==(const DataEntry&, const DataEntry&) = default;
};

// Few-shot example: layer id -> text (inputs and the output of one demo).
using FewShotExample = std::map<LayerId, std::string>;

struct BranchCondition {
  LayerId guard_layer;
  std::string equals_label;

  friend bool operator==(const BranchCondition&, const BranchCondition&) = default;
};

enum class AggregationScope { PerLineage, Global };

AggregationScope default_scope(OperationKind op) noexcept;

struct Step {
  StepId id;
  OperationKind op = OperationKind::Generation;
  std::vector<LayerId> inputs;
  LayerId output;
  std::string task_description;  // empty -> operation pattern
  std::map<LayerId, std::string> prefixes;  // override; default is layer name
  std::vector<FewShotExample> few_shot;
  double temperature = 0.0;
  std::optional<BranchCondition> branch;
  std::optional<AggregationScope> scope;

  AggregationScope effective_scope() const noexcept {
    return scope.value_or(default_scope(op));
  }

  friend bool operator==(const Step&, const Step&) = default;
};

struct Chain {
  std::string id;
  std::string name;
  std::map<LayerId, DataLayer> layers;
  std::map<StepId, Step> steps;

  const DataLayer* find_layer(std::string_view id) const;
  const Step* find_step(std::string_view id) const;
  const DataLayer& layer(std::string_view id) const;
  const Step& step(std::string_view id) const;
  std::vector<LayerId> root_layers() const;
  // Layers not consumed by any step (inputs or guards).
  std::vector<LayerId> leaf_layers() const;
  std::vector<StepId> consumers_of(std::string_view layer_id) const;

  friend bool operator==(const Chain&, const Chain&) = default;
};

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

enum class ViolationCode {
  EmptyLayerName,
  DuplicateLayerName,
  RootHasProducer,
  MissingProducer,
  LayerProducerMismatch,
  UnknownLayer,
  OutputIsRoot,
  DuplicateProducer,
  CardinalityMismatch,
  UnknownPrefixLayer,
  UnknownFewShotLayer,
  TemperatureOutOfRange,
  BranchGuardUnknown,
  BranchGuardNotClassification,
  CycleDetected,
  DanglingInput,
};

std::string_view to_string(ViolationCode code) noexcept;

struct Violation {
  ViolationCode code;
  std::vector<std::string> subjects;  // offending layer/step ids
  std::string message;

  friend bool operator==(const Violation&, const Violation&) = default;
};

using ValidationReport = std::vector<Violation>;

ValidationReport validate_chain(const Chain& chain);

// Producer-before-consumer order; ready steps are taken in lexicographic id
// order. Throws CycleDetected.
std::vector<StepId> topological_order(const Chain& chain);

// ---------------------------------------------------------------------------
// Structural edits
// ---------------------------------------------------------------------------

namespace edit {

struct AddStep {
  Step step;
  DataLayer output_layer;  // created with producer = step.id
};
struct RemoveStep {
  StepId step_id;
};
struct AddLayer {
  DataLayer layer;  // root layers only
};
struct RemoveLayer {
  LayerId layer_id;
};
struct RenameLayer {
  LayerId layer_id;
  std::string name;
};
struct Rewire {
  StepId step_id;
  std::vector<LayerId> inputs;
  // When absent, entries for layers no longer wired are dropped.
  std::optional<std::map<LayerId, std::string>> prefixes;
  std::optional<std::vector<FewShotExample>> few_shot;
};
struct SetTemperature {
  StepId step_id;
  double temperature;
};
struct SetTaskDescription {
  StepId step_id;
  std::string text;
};
struct SetBranch {
  StepId step_id;
  std::optional<BranchCondition> branch;
};
struct SetPrefix {
  StepId step_id;
  LayerId layer_id;
  std::optional<std::string> prefix;  // nullopt -> back to layer name
};

}  // namespace edit

using StructuralEdit =
    std::variant<edit::AddStep, edit::RemoveStep, edit::AddLayer,
                 edit::RemoveLayer, edit::RenameLayer, edit::Rewire,
                 edit::SetTemperature, edit::SetTaskDescription,
                 edit::SetBranch, edit::SetPrefix>;

std::string_view edit_kind(const StructuralEdit& e) noexcept;

class EditRejected : public Error {
 public:
  EditRejected(std::string reason, ValidationReport report = {})
      : Error("edit rejected: " + reason),
        reason_(std::move(reason)),
        report_(std::move(report)) {}
  const std::string& reason() const noexcept { return reason_; }
  const ValidationReport& report() const noexcept { return report_; }

 private:
  std::string reason_;
  ValidationReport report_;
};

// Returns the edited chain, which passes validate_chain. Throws EditRejected
// naming the violated invariant; the input chain is never touched.
Chain apply_edit(const Chain& chain, const StructuralEdit& e);

// Edit that undoes `e` when applied to apply_edit(before, e).
StructuralEdit inverse_edit(const Chain& before, const StructuralEdit& e);

}  // namespace promptloom
