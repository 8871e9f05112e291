#include "promptloom/chain.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace promptloom {

Mapping mapping_of(OperationKind op) noexcept {
  switch (op) {
    case OperationKind::SplitPoints:
    case OperationKind::Ideation:
      return Mapping::OneToMany;
    case OperationKind::ComposePoints:
      return Mapping::ManyToOne;
    default:
      return Mapping::OneToOne;
  }
}

std::string_view to_string(OperationKind op) noexcept {
  switch (op) {
    case OperationKind::Classification: return "Classification";
    case OperationKind::FactualQuery: return "FactualQuery";
    case OperationKind::Generation: return "Generation";
    case OperationKind::Ideation: return "Ideation";
    case OperationKind::InformationExtraction: return "InformationExtraction";
    case OperationKind::Rewriting: return "Rewriting";
    case OperationKind::SplitPoints: return "SplitPoints";
    case OperationKind::ComposePoints: return "ComposePoints";
  }
  return "?";
}

std::optional<OperationKind> parse_operation(std::string_view name) noexcept {
  for (auto op : kAllOperations) {
    if (to_string(op) == name) return op;
  }
  return std::nullopt;
}

AggregationScope default_scope(OperationKind op) noexcept {
  return op == OperationKind::ComposePoints ? AggregationScope::Global
                                            : AggregationScope::PerLineage;
}

std::string_view to_string(ViolationCode code) noexcept {
  switch (code) {
    case ViolationCode::EmptyLayerName: return "EmptyLayerName";
    case ViolationCode::DuplicateLayerName: return "DuplicateLayerName";
    case ViolationCode::RootHasProducer: return "RootHasProducer";
    case ViolationCode::MissingProducer: return "MissingProducer";
    case ViolationCode::LayerProducerMismatch: return "LayerProducerMismatch";
    case ViolationCode::UnknownLayer: return "UnknownLayer";
    case ViolationCode::OutputIsRoot: return "OutputIsRoot";
    case ViolationCode::DuplicateProducer: return "DuplicateProducer";
    case ViolationCode::CardinalityMismatch: return "CardinalityMismatch";
    case ViolationCode::UnknownPrefixLayer: return "UnknownPrefixLayer";
    case ViolationCode::UnknownFewShotLayer: return "UnknownFewShotLayer";
    case ViolationCode::TemperatureOutOfRange: return "TemperatureOutOfRange";
    case ViolationCode::BranchGuardUnknown: return "BranchGuardUnknown";
    case ViolationCode::BranchGuardNotClassification: return "BranchGuardNotClassification";
    case ViolationCode::CycleDetected: return "CycleDetected";
    case ViolationCode::DanglingInput: return "DanglingInput";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Chain lookups
// ---------------------------------------------------------------------------

const DataLayer* Chain::find_layer(std::string_view id) const {
  auto it = layers.find(std::string(id));
  return it == layers.end() ? nullptr : &it->second;
}

const Step* Chain::find_step(std::string_view id) const {
  auto it = steps.find(std::string(id));
  return it == steps.end() ? nullptr : &it->second;
}

const DataLayer& Chain::layer(std::string_view id) const {
  if (auto* l = find_layer(id)) return *l;
  throw Error("unknown layer '" + std::string(id) + "'");
}

const Step& Chain::step(std::string_view id) const {
  if (auto* s = find_step(id)) return *s;
  throw UnknownStep(std::string(id));
}

std::vector<LayerId> Chain::root_layers() const {
  std::vector<LayerId> out;
  for (const auto& [id, l] : layers) {
    if (l.is_root) out.push_back(id);
  }
  return out;
}

std::vector<StepId> Chain::consumers_of(std::string_view layer_id) const {
  std::vector<StepId> out;
  for (const auto& [id, s] : steps) {
    bool uses = std::find(s.inputs.begin(), s.inputs.end(), layer_id) != s.inputs.end();
    if (s.branch && s.branch->guard_layer == layer_id) uses = true;
    if (uses) out.push_back(id);
  }
  return out;
}

std::vector<LayerId> Chain::leaf_layers() const {
  std::vector<LayerId> out;
  for (const auto& [id, l] : layers) {
    if (consumers_of(id).empty()) out.push_back(id);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Graph helpers
// ---------------------------------------------------------------------------

namespace {

// Layers a step depends on: its inputs plus its branch guard.
std::vector<LayerId> dependencies(const Step& s) {
  auto deps = s.inputs;
  if (s.branch) deps.push_back(s.branch->guard_layer);
  return deps;
}

// layer -> step that outputs it (first in id order when duplicated)
std::map<LayerId, StepId> output_index(const Chain& chain) {
  std::map<LayerId, StepId> out;
  for (const auto& [id, s] : chain.steps) out.emplace(s.output, id);
  return out;
}

struct KahnResult {
  std::vector<StepId> order;
  std::vector<StepId> stuck;  // steps on or behind a cycle
};

KahnResult kahn(const Chain& chain) {
  const auto producers = output_index(chain);
  std::map<StepId, std::set<StepId>> preds;
  std::map<StepId, std::vector<StepId>> succs;
  for (const auto& [id, s] : chain.steps) {
    preds[id];
    for (const auto& dep : dependencies(s)) {
      auto it = producers.find(dep);
      if (it == producers.end()) continue;
      if (preds[id].insert(it->second).second) succs[it->second].push_back(id);
    }
  }
  std::set<StepId> ready;
  std::map<StepId, std::size_t> indegree;
  for (const auto& [id, p] : preds) {
    indegree[id] = p.size();
    if (p.empty()) ready.insert(id);
  }
  KahnResult r;
  while (!ready.empty()) {
    auto next = *ready.begin();
    ready.erase(ready.begin());
    r.order.push_back(next);
    for (const auto& succ : succs[next]) {
      if (--indegree[succ] == 0) ready.insert(succ);
    }
  }
  for (const auto& [id, deg] : indegree) {
    if (deg > 0) r.stuck.push_back(id);
  }
  return r;
}

bool contains(const std::vector<LayerId>& v, const LayerId& x) {
  return std::find(v.begin(), v.end(), x) != v.end();
}

}  // namespace

// ---------------------------------------------------------------------------
// validate_chain
// ---------------------------------------------------------------------------

ValidationReport validate_chain(const Chain& chain) {
  ValidationReport report;
  auto add = [&](ViolationCode code, std::vector<std::string> subjects,
                 std::string message) {
    report.push_back({code, std::move(subjects), std::move(message)});
  };

  std::map<std::string, LayerId> names;
  for (const auto& [id, l] : chain.layers) {
    if (l.name.empty()) {
      add(ViolationCode::EmptyLayerName, {id}, "layer '" + id + "' has an empty name");
    } else if (auto [it, fresh] = names.emplace(l.name, id); !fresh) {
      add(ViolationCode::DuplicateLayerName, {it->second, id},
          "layers '" + it->second + "' and '" + id + "' share the name '" + l.name + "'");
    }
    if (l.is_root && l.producer) {
      add(ViolationCode::RootHasProducer, {id, *l.producer},
          "root layer '" + id + "' names producer '" + *l.producer + "'");
    } else if (!l.is_root && !l.producer) {
      add(ViolationCode::MissingProducer, {id},
          "non-root layer '" + id + "' has no producing step");
    } else if (!l.is_root) {
      const Step* s = chain.find_step(*l.producer);
      if (s == nullptr || s->output != id) {
        add(ViolationCode::LayerProducerMismatch, {id, *l.producer},
            "layer '" + id + "' lists producer '" + *l.producer +
                "' but that step does not output it");
      }
    }
  }

  for (const auto& [id, s] : chain.steps) {
    for (const auto& in : dependencies(s)) {
      if (!chain.find_layer(in)) {
        add(ViolationCode::UnknownLayer, {id, in},
            "step '" + id + "' references unknown layer '" + in + "'");
      }
    }
    const DataLayer* out = chain.find_layer(s.output);
    if (out == nullptr) {
      add(ViolationCode::UnknownLayer, {id, s.output},
          "step '" + id + "' outputs unknown layer '" + s.output + "'");
    } else if (out->is_root) {
      add(ViolationCode::OutputIsRoot, {id, s.output},
          "step '" + id + "' outputs root layer '" + s.output + "'");
    } else if (out->producer && *out->producer != id) {
      // The layer-side check already reports producers that do not output it.
      const Step* claimed = chain.find_step(*out->producer);
      if (claimed != nullptr && claimed->output == s.output) {
        add(ViolationCode::DuplicateProducer, {s.output, id},
            "layer '" + s.output + "' is output by both '" + *out->producer +
                "' and '" + id + "'");
      }
    }

    if (out != nullptr) {
      const auto mapping = mapping_of(s.op);
      if (mapping == Mapping::OneToMany && out->cardinality != Cardinality::List) {
        add(ViolationCode::CardinalityMismatch, {id, s.output},
            "step '" + id + "' (" + std::string(to_string(s.op)) +
                ") needs a list output layer");
      }
      if (mapping != Mapping::OneToMany && out->cardinality != Cardinality::Single) {
        add(ViolationCode::CardinalityMismatch, {id, s.output},
            "step '" + id + "' (" + std::string(to_string(s.op)) +
                ") needs a single-valued output layer");
      }
      if (mapping == Mapping::ManyToOne) {
        bool any_list = false;
        for (const auto& in : s.inputs) {
          const auto* l = chain.find_layer(in);
          if (l && l->cardinality == Cardinality::List) any_list = true;
        }
        if (!any_list) {
          add(ViolationCode::CardinalityMismatch, {id},
              "step '" + id + "' (ComposePoints) needs at least one list input");
        }
      }
    }

    for (const auto& [layer, _] : s.prefixes) {
      if (layer != s.output && !contains(s.inputs, layer)) {
        add(ViolationCode::UnknownPrefixLayer, {id, layer},
            "step '" + id + "' has a prefix for unwired layer '" + layer + "'");
      }
    }
    std::set<LayerId> reported;
    for (const auto& example : s.few_shot) {
      for (const auto& [layer, _] : example) {
        if (layer != s.output && !contains(s.inputs, layer) &&
            reported.insert(layer).second) {
          add(ViolationCode::UnknownFewShotLayer, {id, layer},
              "step '" + id + "' has a few-shot field for unwired layer '" + layer + "'");
        }
      }
    }
    if (!(s.temperature >= 0.0 && s.temperature <= 1.0)) {
      add(ViolationCode::TemperatureOutOfRange, {id},
          "step '" + id + "' temperature must lie in [0, 1]");
    }
    if (s.branch) {
      const auto producers = output_index(chain);
      auto it = producers.find(s.branch->guard_layer);
      if (!chain.find_layer(s.branch->guard_layer) || it == producers.end()) {
        add(ViolationCode::BranchGuardUnknown, {id, s.branch->guard_layer},
            "step '" + id + "' guard layer '" + s.branch->guard_layer +
                "' is not produced by any step");
      } else if (chain.step(it->second).op != OperationKind::Classification) {
        add(ViolationCode::BranchGuardNotClassification, {id, it->second},
            "step '" + id + "' guard layer is produced by non-classification step '" +
                it->second + "'");
      }
    }
  }

  const auto k = kahn(chain);
  if (!k.stuck.empty()) {
    std::string list;
    for (const auto& s : k.stuck) list += (list.empty() ? "" : ", ") + s;
    add(ViolationCode::CycleDetected, k.stuck, "steps form a cycle: " + list);
    return report;
  }

  std::set<LayerId> available;
  for (const auto& r : chain.root_layers()) available.insert(r);
  for (const auto& id : k.order) {
    const auto& s = chain.step(id);
    bool ok = true;
    for (const auto& dep : dependencies(s)) {
      if (!available.count(dep)) {
        ok = false;
        if (chain.find_layer(dep)) {
          add(ViolationCode::DanglingInput, {id, dep},
              "step '" + id + "' input '" + dep + "' is not reachable from a root layer");
        }
      }
    }
    if (ok) available.insert(s.output);
  }
  return report;
}

std::vector<StepId> topological_order(const Chain& chain) {
  auto k = kahn(chain);
  if (!k.stuck.empty()) {
    throw CycleDetected("chain '" + chain.id + "' contains a cycle");
  }
  return k.order;
}

// ---------------------------------------------------------------------------
// Structural edits
// ---------------------------------------------------------------------------

std::string_view edit_kind(const StructuralEdit& e) noexcept {
  static constexpr std::string_view names[] = {
      "AddStep",  "RemoveStep", "AddLayer",           "RemoveLayer", "RenameLayer",
      "Rewire",   "SetTemperature", "SetTaskDescription", "SetBranch", "SetPrefix"};
  return names[e.index()];
}

namespace {

Step& mutable_step(Chain& c, const StepId& id) {
  auto it = c.steps.find(id);
  if (it == c.steps.end()) throw EditRejected("UnknownStep: '" + id + "'");
  return it->second;
}

DataLayer& mutable_layer(Chain& c, const LayerId& id) {
  auto it = c.layers.find(id);
  if (it == c.layers.end()) throw EditRejected("UnknownLayer: '" + id + "'");
  return it->second;
}

struct Applier {
  Chain& c;

  void operator()(const edit::AddStep& e) {
    if (c.steps.count(e.step.id)) throw EditRejected("DuplicateId: step '" + e.step.id + "'");
    if (c.layers.count(e.output_layer.id)) {
      throw EditRejected("DuplicateId: layer '" + e.output_layer.id + "'");
    }
    Step s = e.step;
    if (s.output.empty()) s.output = e.output_layer.id;
    if (s.output != e.output_layer.id) {
      throw EditRejected("LayerProducerMismatch: step output differs from the new layer");
    }
    DataLayer l = e.output_layer;
    l.is_root = false;
    l.producer = s.id;
    c.layers.emplace(l.id, std::move(l));
    c.steps.emplace(s.id, std::move(s));
  }

  void operator()(const edit::RemoveStep& e) {
    const Step& s = mutable_step(c, e.step_id);
    auto consumers = c.consumers_of(s.output);
    if (!consumers.empty()) {
      throw EditRejected("LayerInUse: output '" + s.output + "' is consumed by '" +
                         consumers.front() + "'");
    }
    c.layers.erase(s.output);
    c.steps.erase(e.step_id);
  }

  void operator()(const edit::AddLayer& e) {
    if (c.layers.count(e.layer.id)) throw EditRejected("DuplicateId: layer '" + e.layer.id + "'");
    if (!e.layer.is_root || e.layer.producer) {
      throw EditRejected("MissingProducer: only root layers can be added directly");
    }
    c.layers.emplace(e.layer.id, e.layer);
  }

  void operator()(const edit::RemoveLayer& e) {
    mutable_layer(c, e.layer_id);
    for (const auto& [id, s] : c.steps) {
      bool used = s.output == e.layer_id || contains(s.inputs, e.layer_id) ||
                  (s.branch && s.branch->guard_layer == e.layer_id) ||
                  s.prefixes.count(e.layer_id);
      if (used) {
        throw EditRejected("LayerInUse: layer '" + e.layer_id + "' is referenced by '" + id + "'");
      }
    }
    c.layers.erase(e.layer_id);
  }

  void operator()(const edit::RenameLayer& e) {
    auto& l = mutable_layer(c, e.layer_id);
    const std::string old = l.name;
    l.name = e.name;
    for (auto& [_, s] : c.steps) {
      auto it = s.prefixes.find(e.layer_id);
      if (it != s.prefixes.end() && it->second == old) it->second = e.name;
    }
  }

  void operator()(const edit::Rewire& e) {
    auto& s = mutable_step(c, e.step_id);
    s.inputs = e.inputs;
    auto wired = [&](const LayerId& l) { return l == s.output || contains(s.inputs, l); };
    if (e.prefixes) {
      s.prefixes = *e.prefixes;
    } else {
      std::erase_if(s.prefixes, [&](const auto& kv) { return !wired(kv.first); });
    }
    if (e.few_shot) {
      s.few_shot = *e.few_shot;
    } else {
      for (auto& ex : s.few_shot) {
        std::erase_if(ex, [&](const auto& kv) { return !wired(kv.first); });
      }
    }
  }

  void operator()(const edit::SetTemperature& e) {
    mutable_step(c, e.step_id).temperature = e.temperature;
  }
  void operator()(const edit::SetTaskDescription& e) {
    mutable_step(c, e.step_id).task_description = e.text;
  }
  void operator()(const edit::SetBranch& e) { mutable_step(c, e.step_id).branch = e.branch; }
  void operator()(const edit::SetPrefix& e) {
    auto& s = mutable_step(c, e.step_id);
    if (e.prefix) {
      s.prefixes[e.layer_id] = *e.prefix;
    } else {
      s.prefixes.erase(e.layer_id);
    }
  }
};

}  // namespace

Chain apply_edit(const Chain& chain, const StructuralEdit& e) {
  Chain next = chain;
  std::visit(Applier{next}, e);
  auto report = validate_chain(next);
  if (!report.empty()) {
    std::string reason(to_string(report.front().code));
    reason += ": " + report.front().message;
    throw EditRejected(std::move(reason), std::move(report));
  }
  return next;
}

StructuralEdit inverse_edit(const Chain& before, const StructuralEdit& e) {
  struct Inverter {
    const Chain& c;
    StructuralEdit operator()(const edit::AddStep& x) const { return edit::RemoveStep{x.step.id}; }
    StructuralEdit operator()(const edit::RemoveStep& x) const {
      const auto& s = c.step(x.step_id);
      return edit::AddStep{s, c.layer(s.output)};
    }
    StructuralEdit operator()(const edit::AddLayer& x) const { return edit::RemoveLayer{x.layer.id}; }
    StructuralEdit operator()(const edit::RemoveLayer& x) const {
      return edit::AddLayer{c.layer(x.layer_id)};
    }
    StructuralEdit operator()(const edit::RenameLayer& x) const {
      return edit::RenameLayer{x.layer_id, c.layer(x.layer_id).name};
    }
    StructuralEdit operator()(const edit::Rewire& x) const {
      const auto& s = c.step(x.step_id);
      return edit::Rewire{x.step_id, s.inputs, s.prefixes, s.few_shot};
    }
    StructuralEdit operator()(const edit::SetTemperature& x) const {
      return edit::SetTemperature{x.step_id, c.step(x.step_id).temperature};
    }
    StructuralEdit operator()(const edit::SetTaskDescription& x) const {
      return edit::SetTaskDescription{x.step_id, c.step(x.step_id).task_description};
    }
    StructuralEdit operator()(const edit::SetBranch& x) const {
      return edit::SetBranch{x.step_id, c.step(x.step_id).branch};
    }
    StructuralEdit operator()(const edit::SetPrefix& x) const {
      const auto& s = c.step(x.step_id);
      auto it = s.prefixes.find(x.layer_id);
      return edit::SetPrefix{x.step_id, x.layer_id,
                             it == s.prefixes.end() ? std::nullopt
                                                    : std::optional<std::string>(it->second)};
    }
  };
  return std::visit(Inverter{before}, e);
}

}  // namespace promptloom
