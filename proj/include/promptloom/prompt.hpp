#pragma once

// Prompt templates per primitive operation and the renderer that turns a
// step plus one lineage group into the exact request sent to a model.

#include <map>
#include <string>
#include <vector>

#include "promptloom/chain.hpp"
#include "promptloom/lineage.hpp"

namespace promptloom {

enum class ParseType { SingleText, NumberedList, LabeledFields };

std::string_view to_string(ParseType t) noexcept;

struct OperationDefaults {
  double temperature;
  std::vector<std::string> keywords;
  ParseType parse_type;
};

// Total over OperationKind. Temperatures other than Ideation (0.7) and
// Classification (0.0) are engine constants.
const OperationDefaults& defaults_for(OperationKind op);

inline constexpr int kDefaultMaxTokens = 256;
inline constexpr std::string_view kExampleSeparator = "###";

struct PromptTemplate {
  OperationKind op;
  std::vector<std::string> op_keywords;
  std::string task_description;
  std::string example_separator{kExampleSeparator};
  // layer id -> prefix text, rendered as "<prefix>: value"
  std::map<LayerId, std::string> prefixes;
  std::vector<LayerId> inputs;
  LayerId output;
};

struct PromptRequest {
  std::string prompt;
  double temperature = 0.0;
  int max_tokens = kDefaultMaxTokens;
  std::vector<std::string> stop_sequences;

  friend bool operator==(const PromptRequest&, const PromptRequest&) = default;
};

// Fills the operation's description pattern with the step's layer names
// unless the step has an explicit description. Throws MissingLayerName.
PromptTemplate instantiate(const Chain& chain, const Step& step);

// Layout:
//   <instruction block>
//   [<example field lines>\n###\n]...
//   <Prefix>: <value> ...          (ComposePoints: enumerated block)
//   <Output prefix>:
// Throws EmptyGroup when the step has inputs but the group is empty.
PromptRequest render(const PromptTemplate& tmpl, const Step& step,
                     const std::string& instruction_block, const LineageGroup& group);

// "1. a\n2. b" -- the inverse of parse_numbered_list for plain items.
std::string render_numbered_list(const std::vector<std::string>& items);

}  // namespace promptloom
