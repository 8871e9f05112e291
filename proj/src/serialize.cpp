#include "promptloom/serialize.hpp"

#include <set>

namespace promptloom {

std::string_view to_string(Origin o) noexcept {
  switch (o) {
    case Origin::Model: return "model";
    case Origin::User: return "user";
    case Origin::Seed: return "seed";
  }
  return "?";
}

std::string_view to_string(Cardinality c) noexcept {
  return c == Cardinality::List ? "list" : "single";
}

std::string_view to_string(AggregationScope s) noexcept {
  return s == AggregationScope::Global ? "global" : "perLineage";
}

namespace {

std::string type_name(const Json& j) { return j.type_name(); }

// Strict object reader; every key must be consumed or explicitly allowed.
class Reader {
 public:
  Reader(const Json& j, std::string path, std::initializer_list<std::string_view> extra = {})
      : j_(j), path_(std::move(path)) {
    if (!j.is_object()) throw SchemaError(where(), "expected object, got " + type_name(j));
    for (auto k : extra) seen_.insert(std::string(k));
  }

  std::string where() const { return path_.empty() ? "/" : path_; }
  std::string at(std::string_view key) const { return path_ + "/" + std::string(key); }

  const Json* raw(std::string_view key) {
    seen_.insert(std::string(key));
    auto it = j_.find(std::string(key));
    return it == j_.end() ? nullptr : &*it;
  }

  const Json& need(std::string_view key) {
    const Json* v = raw(key);
    if (v == nullptr) throw SchemaError(at(key), "missing required field");
    return *v;
  }

  std::string str(std::string_view key) { return as_string(need(key), at(key)); }
  std::string str_or(std::string_view key, std::string def) {
    const Json* v = raw(key);
    return v ? as_string(*v, at(key)) : def;
  }
  bool boolean_or(std::string_view key, bool def) {
    const Json* v = raw(key);
    if (v == nullptr) return def;
    if (!v->is_boolean()) throw SchemaError(at(key), "expected boolean");
    return v->get<bool>();
  }
  std::int64_t integer(std::string_view key) { return as_int(need(key), at(key)); }
  std::int64_t integer_or(std::string_view key, std::int64_t def) {
    const Json* v = raw(key);
    return v ? as_int(*v, at(key)) : def;
  }
  std::optional<double> number_opt(std::string_view key) {
    const Json* v = raw(key);
    if (v == nullptr || v->is_null()) return std::nullopt;
    if (!v->is_number()) throw SchemaError(at(key), "expected number");
    return v->get<double>();
  }
  std::vector<std::string> strings(std::string_view key, bool required = false) {
    const Json* v = required ? &need(key) : raw(key);
    if (v == nullptr) return {};
    return as_strings(*v, at(key));
  }
  std::map<std::string, std::string> string_map(std::string_view key) {
    const Json* v = raw(key);
    if (v == nullptr) return {};
    return as_string_map(*v, at(key));
  }
  const Json& array(std::string_view key, bool required = true) {
    static const Json empty = Json::array();
    const Json* v = required ? &need(key) : raw(key);
    if (v == nullptr) return empty;
    if (!v->is_array()) throw SchemaError(at(key), "expected array");
    return *v;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw SchemaError(at(it.key()), "unknown field");
    }
  }

  static std::string as_string(const Json& v, const std::string& path) {
    if (!v.is_string()) throw SchemaError(path, "expected string, got " + type_name(v));
    return v.get<std::string>();
  }
  static std::int64_t as_int(const Json& v, const std::string& path) {
    if (!v.is_number_integer()) throw SchemaError(path, "expected integer");
    return v.get<std::int64_t>();
  }
  static std::vector<std::string> as_strings(const Json& v, const std::string& path) {
    if (!v.is_array()) throw SchemaError(path, "expected array of strings");
    std::vector<std::string> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      out.push_back(as_string(v[i], path + "/" + std::to_string(i)));
    }
    return out;
  }
  static std::map<std::string, std::string> as_string_map(const Json& v, const std::string& path) {
    if (!v.is_object()) throw SchemaError(path, "expected object of strings");
    std::map<std::string, std::string> out;
    for (auto it = v.begin(); it != v.end(); ++it) {
      out[it.key()] = as_string(it.value(), path + "/" + it.key());
    }
    return out;
  }

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

OperationKind op_from(const std::string& s, const std::string& path) {
  auto op = parse_operation(s);
  if (!op) throw SchemaError(path, "unknown operation '" + s + "'");
  return *op;
}

Origin origin_from(const std::string& s, const std::string& path) {
  if (s == "model") return Origin::Model;
  if (s == "user") return Origin::User;
  if (s == "seed") return Origin::Seed;
  throw SchemaError(path, "unknown origin '" + s + "'");
}

Json optional_branch(const std::optional<BranchCondition>& b) {
  if (!b) return nullptr;
  return {{"guardLayer", b->guard_layer}, {"equalsLabel", b->equals_label}};
}

std::optional<BranchCondition> branch_from(const Json* j, const std::string& path) {
  if (j == nullptr || j->is_null()) return std::nullopt;
  Reader r(*j, path);
  BranchCondition b{r.str("guardLayer"), r.str("equalsLabel")};
  r.finish();
  return b;
}

std::vector<FewShotExample> few_shot_from(const Json& arr, const std::string& path) {
  std::vector<FewShotExample> out;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    out.push_back(Reader::as_string_map(arr[i], path + "/" + std::to_string(i)));
  }
  return out;
}

AggregationScope scope_from(const std::string& s, const std::string& path) {
  if (s == "perLineage") return AggregationScope::PerLineage;
  if (s == "global") return AggregationScope::Global;
  throw SchemaError(path, "scope must be 'perLineage' or 'global'");
}

FinishReason finish_from(const std::string& s, const std::string& path) {
  if (s == "stop") return FinishReason::Stop;
  if (s == "length") return FinishReason::Length;
  if (s == "error") return FinishReason::Error;
  throw SchemaError(path, "unknown finish reason '" + s + "'");
}

Json few_shot_json(const std::vector<FewShotExample>& fs) {
  Json a = Json::array();
  for (const auto& ex : fs) a.push_back(Json(ex));
  return a;
}

}  // namespace

// ---------------------------------------------------------------------------
// Chain
// ---------------------------------------------------------------------------

Json to_json(const DataLayer& layer) {
  Json j = {{"id", layer.id},
            {"name", layer.name},
            {"colorTag", layer.color_tag},
            {"cardinality", to_string(layer.cardinality)}};
  if (layer.is_root) j["root"] = true;
  return j;
}

Json to_json(const Step& step) {
  Json j = {{"id", step.id},
            {"op", to_string(step.op)},
            {"inputs", step.inputs},
            {"output", step.output},
            {"temperature", step.temperature}};
  if (!step.task_description.empty()) j["taskDescription"] = step.task_description;
  if (!step.prefixes.empty()) j["prefixes"] = step.prefixes;
  if (!step.few_shot.empty()) j["fewShot"] = few_shot_json(step.few_shot);
  if (step.branch) j["branch"] = optional_branch(step.branch);
  if (step.scope) j["scope"] = to_string(*step.scope);
  return j;
}

Json chain_body_to_json(const Chain& chain) {
  Json layers = Json::array();
  for (const auto& [id, l] : chain.layers) layers.push_back(to_json(l));
  Json steps = Json::array();
  for (const auto& [id, s] : chain.steps) steps.push_back(to_json(s));
  return {{"id", chain.id}, {"name", chain.name}, {"layers", layers}, {"steps", steps}};
}

DataLayer layer_from_json(const Json& j, const std::string& path) {
  Reader r(j, path);
  DataLayer l;
  l.id = r.str("id");
  l.name = r.str("name");
  l.color_tag = static_cast<int>(r.integer_or("colorTag", 0));
  const auto card = r.str_or("cardinality", "single");
  if (card == "single") l.cardinality = Cardinality::Single;
  else if (card == "list") l.cardinality = Cardinality::List;
  else throw SchemaError(r.at("cardinality"), "must be 'single' or 'list'");
  l.is_root = r.boolean_or("root", false);
  r.finish();
  return l;
}

Step step_from_json(const Json& j, const std::string& path) {
  Reader r(j, path);
  Step s;
  s.id = r.str("id");
  s.op = op_from(r.str("op"), r.at("op"));
  s.inputs = r.strings("inputs", true);
  s.output = r.str("output");
  s.task_description = r.str_or("taskDescription", "");
  s.prefixes = r.string_map("prefixes");
  s.few_shot = few_shot_from(r.array("fewShot", false), r.at("fewShot"));
  s.temperature = r.number_opt("temperature").value_or(defaults_for(s.op).temperature);
  s.branch = branch_from(r.raw("branch"), r.at("branch"));
  if (const Json* sc = r.raw("scope"); sc != nullptr && !sc->is_null()) {
    s.scope = scope_from(Reader::as_string(*sc, r.at("scope")), r.at("scope"));
  }
  r.finish();
  return s;
}

Chain chain_from_json(const Json& j, const std::string& path,
                      std::initializer_list<std::string_view> extra) {
  Reader r(j, path, extra);
  Chain c;
  c.id = r.str("id");
  c.name = r.str_or("name", c.id);
  const auto& layers = r.array("layers");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto p = r.at("layers") + "/" + std::to_string(i);
    auto l = layer_from_json(layers[i], p);
    if (c.layers.count(l.id)) throw SchemaError(p + "/id", "duplicate layer id '" + l.id + "'");
    c.layers.emplace(l.id, std::move(l));
  }
  const auto& steps = r.array("steps", false);
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const auto p = r.at("steps") + "/" + std::to_string(i);
    auto s = step_from_json(steps[i], p);
    if (c.steps.count(s.id)) throw SchemaError(p + "/id", "duplicate step id '" + s.id + "'");
    c.steps.emplace(s.id, std::move(s));
  }
  r.finish();
  for (const auto& [sid, s] : c.steps) {
    auto it = c.layers.find(s.output);
    if (it != c.layers.end() && !it->second.producer) it->second.producer = sid;
  }
  return c;
}

// ---------------------------------------------------------------------------
// State
// ---------------------------------------------------------------------------

Json to_json(const DataEntry& e) {
  return {{"id", e.id},         {"layer", e.layer},   {"text", e.text},
          {"lineage", e.lineage}, {"frozen", e.frozen}, {"stale", e.stale},
          {"orphaned", e.orphaned}, {"origin", to_string(e.origin)}};
}

DataEntry entry_from_json(const Json& j, const std::string& path) {
  Reader r(j, path);
  DataEntry e;
  e.id = r.str("id");
  e.layer = r.str("layer");
  e.text = r.str("text");
  e.lineage = r.strings("lineage");
  e.frozen = r.boolean_or("frozen", false);
  e.stale = r.boolean_or("stale", false);
  e.orphaned = r.boolean_or("orphaned", false);
  e.origin = origin_from(r.str_or("origin", "model"), r.at("origin"));
  r.finish();
  return e;
}

Json to_json(const ChainState& s) {
  Json entries = Json::object();
  for (const auto& [layer, list] : s.entries) {
    Json a = Json::array();
    for (const auto& e : list) a.push_back(to_json(e));
    entries[layer] = a;
  }
  Json history = Json::array();
  for (const auto& r : s.history) history.push_back(to_json(r));
  return {{"chainId", s.chain_id},
          {"entries", entries},
          {"history", history},
          {"nextEntrySeq", s.next_entry_seq},
          {"deferredStale", s.deferred_stale}};
}

ChainState state_from_json(const Json& j) {
  Reader r(j, "");
  ChainState s;
  s.chain_id = r.str("chainId");
  const Json& entries = r.need("entries");
  if (!entries.is_object()) throw SchemaError("/entries", "expected object");
  for (auto it = entries.begin(); it != entries.end(); ++it) {
    const auto p = "/entries/" + it.key();
    if (!it.value().is_array()) throw SchemaError(p, "expected array");
    auto& list = s.entries[it.key()];
    for (std::size_t i = 0; i < it.value().size(); ++i) {
      list.push_back(entry_from_json(it.value()[i], p + "/" + std::to_string(i)));
    }
  }
  const auto& history = r.array("history", false);
  for (std::size_t i = 0; i < history.size(); ++i) {
    s.history.push_back(record_from_json(history[i], "/history/" + std::to_string(i)));
  }
  s.next_entry_seq = static_cast<std::uint64_t>(r.integer_or("nextEntrySeq", 1));
  for (auto& id : r.strings("deferredStale")) s.deferred_stale.insert(std::move(id));
  r.finish();
  return s;
}

// ---------------------------------------------------------------------------
// Runs
// ---------------------------------------------------------------------------

Json to_json(const PromptRequest& r) {
  return {{"prompt", r.prompt},
          {"temperature", r.temperature},
          {"maxTokens", r.max_tokens},
          {"stop", r.stop_sequences}};
}

PromptRequest request_from_json(const Json& j, const std::string& path) {
  Reader r(j, path);
  PromptRequest q;
  q.prompt = r.str("prompt");
  q.temperature = r.number_opt("temperature").value_or(0.0);
  q.max_tokens = static_cast<int>(r.integer_or("maxTokens", kDefaultMaxTokens));
  q.stop_sequences = r.strings("stop");
  r.finish();
  return q;
}

Json to_json(const RawCompletion& c) {
  return {{"text", c.text}, {"finishReason", to_string(c.finish_reason)}};
}

Json to_json(const LineageGroup& g) {
  Json ids = Json::array();
  for (const auto& e : g.entries) ids.push_back(e.id);
  return {{"entries", ids}, {"anchors", g.anchors}, {"global", g.global}};
}

Json to_json(const BlockPlan& p) {
  Json entries = Json::array();
  for (const auto& e : p.group.entries) entries.push_back(to_json(e));
  return {{"step", p.step_id},
          {"block", p.index},
          {"status", to_string(p.status)},
          {"group", entries},
          {"anchors", p.group.anchors},
          {"global", p.group.global},
          {"outputs", p.outputs},
          {"preview", to_json(p.preview)}};
}

Json to_json(const RunRecord& r) {
  Json group = Json::array();
  for (const auto& e : r.plan.group.entries) group.push_back(e.id);
  return {{"timestamp", r.timestamp_ms},
          {"step", r.plan.step_id},
          {"block", r.plan.index},
          {"status", to_string(r.status)},
          {"group", group},
          {"request", to_json(r.request)},
          {"completion", r.completion ? to_json(*r.completion) : Json(nullptr)},
          {"parsed", r.parsed},
          {"replaced", r.replaced_entry_ids},
          {"created", r.created_entry_ids},
          {"error", r.error},
          {"warnings", r.warnings}};
}

RunRecord record_from_json(const Json& j, const std::string& path) {
  // Transcript lines carry seq and chainId next to the record fields.
  Reader r(j, path, {"seq", "chainId"});
  RunRecord rec;
  rec.timestamp_ms = r.integer_or("timestamp", 0);
  rec.plan.step_id = r.str("step");
  rec.plan.index = static_cast<std::size_t>(r.integer("block"));
  const auto status = r.str("status");
  auto st = parse_block_status(status);
  if (!st) throw SchemaError(r.at("status"), "unknown status '" + status + "'");
  rec.status = *st;
  rec.plan.status = *st;
  for (auto& id : r.strings("group")) {
    DataEntry e;
    e.id = std::move(id);
    rec.plan.group.entries.push_back(std::move(e));
  }
  rec.request = request_from_json(r.need("request"), r.at("request"));
  rec.plan.preview = rec.request;
  if (const Json* c = r.raw("completion"); c != nullptr && !c->is_null()) {
    Reader cr(*c, r.at("completion"));
    RawCompletion comp{cr.str("text"), finish_from(cr.str_or("finishReason", "stop"),
                                                   cr.at("finishReason"))};
    cr.finish();
    rec.completion = comp;
  }
  rec.parsed = r.strings("parsed");
  rec.replaced_entry_ids = r.strings("replaced");
  rec.created_entry_ids = r.strings("created");
  rec.error = r.str_or("error", "");
  rec.warnings = r.strings("warnings");
  r.finish();
  return rec;
}

Json to_json(const Violation& v) {
  return {{"code", to_string(v.code)}, {"subjects", v.subjects}, {"message", v.message}};
}

Json to_json(const ValidationReport& report) {
  Json a = Json::array();
  for (const auto& v : report) a.push_back(to_json(v));
  return a;
}

// ---------------------------------------------------------------------------
// Structural edits
// ---------------------------------------------------------------------------

Json to_json(const StructuralEdit& e) {
  Json j = std::visit(
      [](const auto& x) -> Json {
        using E = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<E, edit::AddStep>) {
          return {{"step", to_json(x.step)}, {"outputLayer", to_json(x.output_layer)}};
        } else if constexpr (std::is_same_v<E, edit::RemoveStep>) {
          return {{"stepId", x.step_id}};
        } else if constexpr (std::is_same_v<E, edit::AddLayer>) {
          return {{"layer", to_json(x.layer)}};
        } else if constexpr (std::is_same_v<E, edit::RemoveLayer>) {
          return {{"layerId", x.layer_id}};
        } else if constexpr (std::is_same_v<E, edit::RenameLayer>) {
          return {{"layerId", x.layer_id}, {"name", x.name}};
        } else if constexpr (std::is_same_v<E, edit::Rewire>) {
          Json r = {{"stepId", x.step_id}, {"inputs", x.inputs}};
          if (x.prefixes) r["prefixes"] = *x.prefixes;
          if (x.few_shot) r["fewShot"] = few_shot_json(*x.few_shot);
          return r;
        } else if constexpr (std::is_same_v<E, edit::SetTemperature>) {
          return {{"stepId", x.step_id}, {"temperature", x.temperature}};
        } else if constexpr (std::is_same_v<E, edit::SetTaskDescription>) {
          return {{"stepId", x.step_id}, {"text", x.text}};
        } else if constexpr (std::is_same_v<E, edit::SetBranch>) {
          return {{"stepId", x.step_id}, {"branch", optional_branch(x.branch)}};
        } else {
          Json r = {{"stepId", x.step_id}, {"layerId", x.layer_id}};
          r["prefix"] = x.prefix ? Json(*x.prefix) : Json(nullptr);
          return r;
        }
      },
      e);
  j["kind"] = edit_kind(e);
  return j;
}

StructuralEdit edit_from_json(const Json& j, const std::string& path) {
  Reader r(j, path);
  const auto kind = r.str("kind");
  StructuralEdit out;
  if (kind == "AddStep") {
    edit::AddStep e{step_from_json(r.need("step"), r.at("step")),
                    layer_from_json(r.need("outputLayer"), r.at("outputLayer"))};
    out = std::move(e);
  } else if (kind == "RemoveStep") {
    out = edit::RemoveStep{r.str("stepId")};
  } else if (kind == "AddLayer") {
    out = edit::AddLayer{layer_from_json(r.need("layer"), r.at("layer"))};
  } else if (kind == "RemoveLayer") {
    out = edit::RemoveLayer{r.str("layerId")};
  } else if (kind == "RenameLayer") {
    out = edit::RenameLayer{r.str("layerId"), r.str("name")};
  } else if (kind == "Rewire") {
    edit::Rewire e;
    e.step_id = r.str("stepId");
    e.inputs = r.strings("inputs", true);
    if (const Json* p = r.raw("prefixes")) e.prefixes = Reader::as_string_map(*p, r.at("prefixes"));
    if (const Json* f = r.raw("fewShot")) {
      if (!f->is_array()) throw SchemaError(r.at("fewShot"), "expected array");
      e.few_shot = few_shot_from(*f, r.at("fewShot"));
    }
    out = std::move(e);
  } else if (kind == "SetTemperature") {
    auto id = r.str("stepId");
    auto t = r.number_opt("temperature");
    if (!t) throw SchemaError(r.at("temperature"), "missing required field");
    out = edit::SetTemperature{std::move(id), *t};
  } else if (kind == "SetTaskDescription") {
    out = edit::SetTaskDescription{r.str("stepId"), r.str("text")};
  } else if (kind == "SetBranch") {
    auto id = r.str("stepId");
    out = edit::SetBranch{std::move(id), branch_from(r.raw("branch"), r.at("branch"))};
  } else if (kind == "SetPrefix") {
    edit::SetPrefix e;
    e.step_id = r.str("stepId");
    e.layer_id = r.str("layerId");
    if (const Json* p = r.raw("prefix"); p != nullptr && !p->is_null()) {
      e.prefix = Reader::as_string(*p, r.at("prefix"));
    }
    out = std::move(e);
  } else {
    throw SchemaError(r.at("kind"), "unknown edit kind '" + kind + "'");
  }
  r.finish();
  return out;
}

}  // namespace promptloom
