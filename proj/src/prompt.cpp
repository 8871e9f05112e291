#include "promptloom/prompt.hpp"

#include <algorithm>
#include <cctype>

namespace promptloom {

std::string_view to_string(ParseType t) noexcept {
  switch (t) {
    case ParseType::SingleText: return "SingleText";
    case ParseType::NumberedList: return "NumberedList";
    case ParseType::LabeledFields: return "LabeledFields";
  }
  return "?";
}

const OperationDefaults& defaults_for(OperationKind op) {
  static const std::map<OperationKind, OperationDefaults> table = {
      {OperationKind::Classification, {0.0, {"classify"}, ParseType::LabeledFields}},
      {OperationKind::FactualQuery, {0.0, {"answer"}, ParseType::SingleText}},
      {OperationKind::Generation, {0.7, {"write"}, ParseType::SingleText}},
      {OperationKind::Ideation, {0.7, {"a list of"}, ParseType::NumberedList}},
      {OperationKind::InformationExtraction, {0.0, {"extract"}, ParseType::SingleText}},
      {OperationKind::Rewriting, {0.3, {"rewrite"}, ParseType::SingleText}},
      {OperationKind::SplitPoints, {0.0, {"split", "a list of"}, ParseType::NumberedList}},
      {OperationKind::ComposePoints, {0.3, {"compose"}, ParseType::SingleText}},
  };
  return table.at(op);
}

namespace {

std::string join_names(const std::vector<std::string>& names) {
  if (names.size() == 1) return names[0];
  std::string out;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (i > 0) out += (i + 1 == names.size()) ? (names.size() > 2 ? ", and " : " and ") : ", ";
    out += names[i];
  }
  return out;
}

std::string lowercase(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::string pluralize(const std::string& noun) {
  if (noun.empty() || noun.back() == 's') return noun;
  if (noun.size() >= 2 && noun.back() == 'y' &&
      std::string("aeiou").find(noun[noun.size() - 2]) == std::string::npos) {
    return noun.substr(0, noun.size() - 1) + "ies";
  }
  return noun + "s";
}

// Body of the description after "Given <inputs>, ".
std::string pattern_body(OperationKind op, const std::string& out, const std::string& items) {
  switch (op) {
    case OperationKind::Classification: return "classify " + out + ".";
    case OperationKind::FactualQuery: return "answer with " + out + ".";
    case OperationKind::Generation: return "write " + out + ".";
    case OperationKind::Ideation: return "the following is a list of " + items + ".";
    case OperationKind::InformationExtraction: return "extract " + out + ".";
    case OperationKind::Rewriting: return "rewrite it as " + out + ".";
    case OperationKind::SplitPoints: return "split it into a list of " + items + ".";
    case OperationKind::ComposePoints: return "compose them into one " + out + ".";
  }
  return out;
}

std::string capitalize(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

bool blank(const std::string& s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

}  // namespace

PromptTemplate instantiate(const Chain& chain, const Step& step) {
  PromptTemplate t;
  t.op = step.op;
  t.op_keywords = defaults_for(step.op).keywords;
  t.inputs = step.inputs;
  t.output = step.output;

  auto name_of = [&](const LayerId& id) -> const std::string& {
    const auto& l = chain.layer(id);
    if (l.name.empty()) throw MissingLayerName("layer '" + id + "' has an empty name");
    return l.name;
  };

  std::vector<std::string> input_names;
  for (const auto& id : step.inputs) {
    input_names.push_back(name_of(id));
    auto it = step.prefixes.find(id);
    t.prefixes[id] = (it != step.prefixes.end() && !it->second.empty()) ? it->second : name_of(id);
  }
  const std::string& out_name = name_of(step.output);
  auto out_it = step.prefixes.find(step.output);
  const bool explicit_out = out_it != step.prefixes.end() && !out_it->second.empty();
  t.prefixes[step.output] = explicit_out ? out_it->second : out_name;

  if (!step.task_description.empty()) {
    t.task_description = step.task_description;
  } else {
    const std::string items = explicit_out ? pluralize(lowercase(out_it->second)) : out_name;
    const std::string body = pattern_body(step.op, out_name, items);
    t.task_description =
        input_names.empty() ? capitalize(body) : "Given " + join_names(input_names) + ", " + body;
  }
  return t;
}

PromptRequest render(const PromptTemplate& tmpl, const Step& step,
                     const std::string& instruction_block, const LineageGroup& group) {
  if (!step.inputs.empty() && group.empty()) {
    throw EmptyGroup("step '" + step.id + "' has no input entries to render");
  }
  auto prefix = [&](const LayerId& id) -> const std::string& { return tmpl.prefixes.at(id); };
  const std::string& out_prefix = prefix(tmpl.output);

  std::string p;
  const std::string& head = instruction_block.empty() ? tmpl.task_description : instruction_block;
  if (!head.empty()) p += head + "\n";

  for (const auto& example : step.few_shot) {
    if (std::all_of(example.begin(), example.end(),
                    [](const auto& kv) { return blank(kv.second); })) {
      continue;  // unfilled placeholder slot
    }
    for (const auto& id : tmpl.inputs) {
      if (auto it = example.find(id); it != example.end()) p += prefix(id) + ": " + it->second + "\n";
    }
    if (auto it = example.find(tmpl.output); it != example.end()) {
      p += out_prefix + ": " + it->second + "\n";
    }
    p += tmpl.example_separator + "\n";
  }

  auto wired = [&](const DataEntry& e) {
    return std::find(tmpl.inputs.begin(), tmpl.inputs.end(), e.layer) != tmpl.inputs.end();
  };

  if (tmpl.op == OperationKind::ComposePoints) {
    std::size_t item = 0;
    const DataEntry* head_entry = nullptr;
    for (const auto& e : group.entries) {
      if (!wired(e)) continue;
      const bool nested =
          head_entry != nullptr &&
          std::find(e.lineage.begin(), e.lineage.end(), head_entry->id) != e.lineage.end();
      if (nested) {
        p += prefix(e.layer) + ": " + e.text + "\n";
      } else {
        head_entry = &e;
        p += std::to_string(++item) + ". " + prefix(e.layer) + ": " + e.text + "\n";
      }
    }
  } else {
    for (const auto& id : tmpl.inputs) {
      for (const auto& e : group.entries) {
        if (e.layer == id) p += prefix(id) + ": " + e.text + "\n";
      }
    }
  }
  p += out_prefix + ":";

  PromptRequest r;
  r.prompt = std::move(p);
  r.temperature = step.temperature;
  r.max_tokens = kDefaultMaxTokens;
  const std::string& first = tmpl.inputs.empty() ? out_prefix : prefix(tmpl.inputs.front());
  r.stop_sequences = {tmpl.example_separator, "\n" + first + ":", "\n\n"};
  return r;
}

std::string render_numbered_list(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i > 0) out += "\n";
    out += std::to_string(i + 1) + ". " + items[i];
  }
  return out;
}

}  // namespace promptloom
