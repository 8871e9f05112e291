#include <array>
#include <utility>

#include "promptloom/library.hpp"

namespace promptloom {

namespace {

constexpr std::string_view kPeerReview = R"({
  "formatVersion": 1,
  "id": "peer_review",
  "name": "Peer review rewriting",
  "layers": [
    {"id": "feedback", "name": "initial feedback for Alex", "colorTag": 0, "cardinality": "single", "root": true},
    {"id": "problems", "name": "Alex's presentation problem", "colorTag": 1, "cardinality": "list"},
    {"id": "suggestions", "name": "Short suggestions for improvement", "colorTag": 2, "cardinality": "list"},
    {"id": "paragraph", "name": "friendly paragraph", "colorTag": 3, "cardinality": "single"}
  ],
  "steps": [
    {
      "id": "split",
      "op": "SplitPoints",
      "inputs": ["feedback"],
      "output": "problems",
      "prefixes": {"feedback": "Feedback", "problems": "Problem"}
    },
    {
      "id": "ideation",
      "op": "Ideation",
      "inputs": ["problems"],
      "output": "suggestions",
      "prefixes": {"problems": "Problem", "suggestions": "Suggestion"},
      "fewShot": [
        {"problems": "mumbles when presenting", "suggestions": "enunciate each syllable"}
      ]
    },
    {
      "id": "compose",
      "op": "ComposePoints",
      "inputs": ["problems", "suggestions"],
      "output": "paragraph",
      "taskDescription": "Write one friendly paragraph that covers all the presentation problems and suggestions",
      "prefixes": {"problems": "Problem", "suggestions": "Suggestion", "paragraph": "Friendly paragraph"}
    }
  ],
  "seeds": [
    {"layer": "feedback", "text": "Alex could improve his presentation skills. He has too much text on his slides. His presentation meanders from topic to topic without a clear structure. He also does not engage with his audience when he presents."}
  ]
})";

constexpr std::string_view kFlashcards = R"({
  "formatVersion": 1,
  "id": "flashcards",
  "name": "Personalized flashcards",
  "layers": [
    {"id": "city", "name": "the city to visit", "colorTag": 0, "cardinality": "single", "root": true},
    {"id": "types", "name": "types of interactions", "colorTag": 1, "cardinality": "list"},
    {"id": "english", "name": "English examples", "colorTag": 2, "cardinality": "list"},
    {"id": "french", "name": "French", "colorTag": 3, "cardinality": "single"}
  ],
  "steps": [
    {
      "id": "interactions",
      "op": "Ideation",
      "inputs": ["city"],
      "output": "types",
      "prefixes": {"city": "City"}
    },
    {
      "id": "english",
      "op": "Ideation",
      "inputs": ["types"],
      "output": "english",
      "taskDescription": "Given a type of interaction while traveling, the following is a list of useful English sentences.",
      "prefixes": {"english": "English"}
    },
    {
      "id": "translate",
      "op": "Rewriting",
      "inputs": ["english"],
      "output": "french",
      "taskDescription": "Translate the English sentence into French.",
      "prefixes": {"english": "English", "french": "French"},
      "fewShot": [
        {"english": "I do not speak French.", "french": "Je ne parle pas français."},
        {"english": "Where is a good restaurant?", "french": "Où est un bon restaurant?"}
      ]
    }
  ],
  "seeds": [
    {"layer": "city", "text": "Paris"}
  ]
})";

constexpr std::string_view kMetaphor = R"({
  "formatVersion": 1,
  "id": "metaphor",
  "name": "Metaphor creation",
  "layers": [
    {"id": "concept", "name": "the concept", "colorTag": 0, "cardinality": "single", "root": true},
    {"id": "traits", "name": "unique traits", "colorTag": 1, "cardinality": "list"},
    {"id": "metaphor", "name": "metaphor", "colorTag": 2, "cardinality": "single"}
  ],
  "steps": [
    {
      "id": "ideate",
      "op": "Ideation",
      "inputs": ["concept"],
      "output": "traits",
      "prefixes": {"concept": "Concept", "traits": "Trait"}
    },
    {
      "id": "generate",
      "op": "Generation",
      "inputs": ["concept", "traits"],
      "output": "metaphor",
      "taskDescription": "Write a metaphor for the concept that reflects the trait.",
      "prefixes": {"concept": "Concept", "traits": "Trait", "metaphor": "Metaphor"},
      "fewShot": [
        {"concept": "gratitude", "metaphor": "gratitude is like a stream in that it's a force that can carry you along."},
        {"concept": "loss", "metaphor": "loss is like a wing in that it's something you never wanted to lose, and it can take you away."}
      ]
    }
  ],
  "seeds": [
    {"layer": "concept", "text": "crowdsourcing"}
  ]
})";

constexpr std::string_view kVegaliteLint = R"({
  "formatVersion": 1,
  "id": "vegalite_lint",
  "name": "Visualization spec linting",
  "layers": [
    {"id": "spec", "name": "json format VegaLite spec", "colorTag": 0, "cardinality": "single", "root": true},
    {"id": "description", "name": "natural language description", "colorTag": 1, "cardinality": "single"},
    {"id": "rules", "name": "related visualization rules", "colorTag": 2, "cardinality": "single"},
    {"id": "validity", "name": "validity reasons", "colorTag": 3, "cardinality": "single"},
    {"id": "fixed", "name": "the fixed VegaLite spec", "colorTag": 4, "cardinality": "single"}
  ],
  "steps": [
    {
      "id": "describe",
      "op": "Rewriting",
      "inputs": ["spec"],
      "output": "description",
      "taskDescription": "Describe the VegaLite spec in natural language, one encoding per sentence.",
      "prefixes": {"spec": "VegaLite spec", "description": "Description"}
    },
    {
      "id": "extract_rules",
      "op": "InformationExtraction",
      "inputs": ["description"],
      "output": "rules",
      "taskDescription": "Extract the visualization design rules that apply to the described chart.",
      "prefixes": {"description": "Description", "rules": "Rules"}
    },
    {
      "id": "validate",
      "op": "Classification",
      "inputs": ["description", "rules"],
      "output": "validity",
      "taskDescription": "Classify the description as valid or invalid under the rules, naming the concrete error and fix.",
      "prefixes": {"description": "Description", "rules": "Rules", "validity": "Validity"}
    },
    {
      "id": "fix",
      "op": "Rewriting",
      "inputs": ["spec", "validity"],
      "output": "fixed",
      "taskDescription": "Rewrite the VegaLite spec so that it applies the suggested fix.",
      "prefixes": {"spec": "VegaLite spec", "validity": "Validity", "fixed": "Fixed spec"},
      "fewShot": [
        {"spec": "", "validity": "", "fixed": ""},
        {"spec": "", "validity": "", "fixed": ""},
        {"spec": "", "validity": "", "fixed": ""},
        {"spec": "", "validity": "", "fixed": ""},
        {"spec": "", "validity": "", "fixed": ""}
      ]
    }
  ],
  "seeds": [
    {"layer": "spec", "text": "{\"mark\": \"circle\", \"encoding\": {\"x\": {\"field\": \"Horsepower\", \"type\": \"quantitative\"}, \"y\": {\"field\": \"Miles_per_Gallon\", \"type\": \"quantitative\"}, \"size\": {\"field\": \"Origin\", \"type\": \"nominal\"}}}"}
  ]
})";

constexpr std::string_view kTextEntry = R"({
  "formatVersion": 1,
  "id": "text_entry",
  "name": "Assisted text entry",
  "layers": [
    {"id": "sentence", "name": "given sentence", "colorTag": 0, "cardinality": "single", "root": true},
    {"id": "has_shorthand", "name": "contains a shorthand or not", "colorTag": 1, "cardinality": "single"},
    {"id": "expanded", "name": "expanded sentence", "colorTag": 2, "cardinality": "single"},
    {"id": "completed", "name": "full sentence", "colorTag": 3, "cardinality": "single"}
  ],
  "steps": [
    {
      "id": "classify",
      "op": "Classification",
      "inputs": ["sentence"],
      "output": "has_shorthand",
      "taskDescription": "Classify whether the sentence contains a shorthand. Answer shorthand or phrase.",
      "prefixes": {"sentence": "Sentence", "has_shorthand": "Type"}
    },
    {
      "id": "expand",
      "op": "Rewriting",
      "inputs": ["sentence"],
      "output": "expanded",
      "taskDescription": "Expand the shorthand in the sentence into full words.",
      "prefixes": {"sentence": "Sentence", "expanded": "Expanded sentence"},
      "branch": {"guardLayer": "has_shorthand", "equalsLabel": "shorthand"}
    },
    {
      "id": "complete",
      "op": "Generation",
      "inputs": ["sentence"],
      "output": "completed",
      "taskDescription": "Complete the sentence.",
      "prefixes": {"sentence": "Sentence", "completed": "Full sentence"},
      "branch": {"guardLayer": "has_shorthand", "equalsLabel": "phrase"}
    }
  ],
  "seeds": [
    {"layer": "sentence", "text": "LTSG"}
  ]
})";

constexpr std::array<std::pair<std::string_view, std::string_view>, 5> kBuiltins = {{
    {"peer_review", kPeerReview},
    {"flashcards", kFlashcards},
    {"metaphor", kMetaphor},
    {"vegalite_lint", kVegaliteLint},
    {"text_entry", kTextEntry},
}};

}  // namespace

std::vector<std::string> builtin_names() {
  std::vector<std::string> out;
  for (const auto& [name, doc] : kBuiltins) out.emplace_back(name);
  return out;
}

std::string_view builtin_document(std::string_view name) {
  for (const auto& [n, doc] : kBuiltins) {
    if (n == name) return doc;
  }
  throw UnknownBuiltin(std::string(name));
}

ChainSpec builtin(std::string_view name) { return load_spec(builtin_document(name)); }

}  // namespace promptloom
