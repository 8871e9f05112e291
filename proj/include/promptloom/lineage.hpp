#pragma once

#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "promptloom/chain.hpp"

namespace promptloom {

// Entries of one input layer, in the step's input order.
struct LayerEntries {
  LayerId layer;
  std::vector<DataEntry> entries;
};

// The input entries consumed by one running block.
struct LineageGroup {
  std::vector<DataEntry> entries;  // sorted by path (lineage + id)
  // Outputs derived from any of these ids belong to this group. PerLineage
  // groups have one anchor; a Global group anchors on every member.
  std::vector<EntryId> anchors;
  bool global = false;

  bool empty() const noexcept { return entries.empty(); }
  // Ordered union of member paths; the lineage given to produced entries.
  std::vector<EntryId> merged_lineage() const;
  bool contains(const EntryId& id) const;

  friend bool operator==(const LineageGroup&, const LineageGroup&) = default;
};

// True when one entry is an ancestor of the other.
bool related(const DataEntry& a, const DataEntry& b);

bool path_less(const DataEntry& a, const DataEntry& b);

// PerLineage: the input layer whose entries carry the longest lineage is the
// anchor layer; each anchor entry forms one group together with the related
// (ancestor or descendant) entries of the other input layers. A non-anchor
// layer none of whose entries relate to any anchor is shared by every group.
// Global: one group holding every entry.
//
// Throws OrphanEntry if a lineage id is absent from `known_ids`.
std::vector<LineageGroup> group_lineages(std::span<const LayerEntries> inputs,
                                         AggregationScope scope,
                                         const std::unordered_set<EntryId>& known_ids);

}  // namespace promptloom
