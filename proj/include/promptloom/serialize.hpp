#pragma once

// JSON encodings shared by chain files, transcripts and the service.
// Decoders are strict: unknown or mistyped fields raise SchemaError with a
// JSON-pointer path to the offending field.

#include <string>

#include <json.hpp>

#include "promptloom/chain.hpp"
#include "promptloom/executor.hpp"

namespace promptloom {

using Json = nlohmann::json;

Json to_json(const DataLayer& layer);
Json to_json(const Step& step);
// Layers and steps only; formatVersion and seeds belong to the chain document.
Json chain_body_to_json(const Chain& chain);

DataLayer layer_from_json(const Json& j, const std::string& path);
Step step_from_json(const Json& j, const std::string& path);
// Reads id, name, layers, steps; producers are derived from step outputs.
// Keys in `extra` are accepted at the top level and ignored.
Chain chain_from_json(const Json& j, const std::string& path = "",
                      std::initializer_list<std::string_view> extra = {});

Json to_json(const DataEntry& e);
DataEntry entry_from_json(const Json& j, const std::string& path);

Json to_json(const ChainState& s);
ChainState state_from_json(const Json& j);

Json to_json(const PromptRequest& r);
PromptRequest request_from_json(const Json& j, const std::string& path);
Json to_json(const RawCompletion& c);
Json to_json(const LineageGroup& g);
Json to_json(const BlockPlan& p);
Json to_json(const RunRecord& r);
RunRecord record_from_json(const Json& j, const std::string& path = "");

Json to_json(const Violation& v);
Json to_json(const ValidationReport& report);

Json to_json(const StructuralEdit& e);
StructuralEdit edit_from_json(const Json& j, const std::string& path = "");

std::string_view to_string(Origin o) noexcept;
std::string_view to_string(Cardinality c) noexcept;
std::string_view to_string(AggregationScope s) noexcept;

}  // namespace promptloom
