#include "promptloom/lineage.hpp"

#include <algorithm>
#include <set>

namespace promptloom {

namespace {

bool in_lineage(const DataEntry& e, const EntryId& id) {
  return std::find(e.lineage.begin(), e.lineage.end(), id) != e.lineage.end();
}

}  // namespace

bool related(const DataEntry& a, const DataEntry& b) {
  return in_lineage(a, b.id) || in_lineage(b, a.id);
}

bool path_less(const DataEntry& a, const DataEntry& b) {
  const auto pa = a.path();
  const auto pb = b.path();
  return std::lexicographical_compare(pa.begin(), pa.end(), pb.begin(), pb.end());
}

std::vector<EntryId> LineageGroup::merged_lineage() const {
  std::vector<EntryId> out;
  std::set<EntryId> seen;
  for (const auto& e : entries) {
    for (const auto& id : e.path()) {
      if (seen.insert(id).second) out.push_back(id);
    }
  }
  return out;
}

bool LineageGroup::contains(const EntryId& id) const {
  return std::any_of(entries.begin(), entries.end(),
                     [&](const DataEntry& e) { return e.id == id; });
}

std::vector<LineageGroup> group_lineages(std::span<const LayerEntries> inputs,
                                         AggregationScope scope,
                                         const std::unordered_set<EntryId>& known_ids) {
  for (const auto& layer : inputs) {
    for (const auto& e : layer.entries) {
      for (const auto& ancestor : e.lineage) {
        if (!known_ids.count(ancestor)) throw OrphanEntry(e.id, ancestor);
      }
    }
  }

  std::vector<LineageGroup> groups;
  if (scope == AggregationScope::Global) {
    LineageGroup g;
    g.global = true;
    for (const auto& layer : inputs) {
      g.entries.insert(g.entries.end(), layer.entries.begin(), layer.entries.end());
    }
    if (g.entries.empty()) return groups;
    std::stable_sort(g.entries.begin(), g.entries.end(), path_less);
    for (const auto& e : g.entries) g.anchors.push_back(e.id);
    groups.push_back(std::move(g));
    return groups;
  }

  if (inputs.empty()) return groups;

  // Ties go to the earlier input.
  std::size_t anchor_layer = 0;
  std::size_t deepest = 0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    std::size_t layer_max = 0;
    for (const auto& e : inputs[i].entries) layer_max = std::max(layer_max, e.lineage.size());
    if (layer_max > deepest) {
      deepest = layer_max;
      anchor_layer = i;
    }
  }

  auto anchors = inputs[anchor_layer].entries;
  std::stable_sort(anchors.begin(), anchors.end(), path_less);

  // Layers with no relation to any anchor are broadcast to every group.
  std::vector<bool> broadcast(inputs.size(), false);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (i == anchor_layer) continue;
    bool any = false;
    for (const auto& e : inputs[i].entries) {
      for (const auto& a : anchors) {
        if (related(e, a)) {
          any = true;
          break;
        }
      }
      if (any) break;
    }
    broadcast[i] = !any;
  }

  for (const auto& a : anchors) {
    LineageGroup g;
    g.anchors.push_back(a.id);
    g.entries.push_back(a);
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      if (i == anchor_layer) continue;
      for (const auto& e : inputs[i].entries) {
        if (broadcast[i] || related(e, a)) g.entries.push_back(e);
      }
    }
    std::stable_sort(g.entries.begin(), g.entries.end(), path_less);
    groups.push_back(std::move(g));
  }
  return groups;
}

}  // namespace promptloom
