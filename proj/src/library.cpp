#include "promptloom/library.hpp"

#include <fstream>
#include <sstream>

#include "promptloom/serialize.hpp"

namespace promptloom {

namespace {

std::string describe(const ValidationReport& report) {
  std::string out = std::to_string(report.size()) + " violation(s)";
  for (const auto& v : report) out += "; " + std::string(to_string(v.code)) + ": " + v.message;
  return out;
}

// nlohmann reports a 1-based byte count; map it to line/column.
std::pair<std::size_t, std::size_t> position_of(std::string_view text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  const std::size_t end = std::min(byte > 0 ? byte - 1 : 0, text.size());
  for (std::size_t i = 0; i < end; ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

}  // namespace

ValidationError::ValidationError(ValidationReport report)
    : Error("invalid chain: " + describe(report)), report_(std::move(report)) {}

ChainSpec load_spec(std::string_view text) {
  Json doc;
  try {
    doc = Json::parse(text.begin(), text.end());
  } catch (const Json::parse_error& e) {
    auto [line, col] = position_of(text, e.byte);
    throw SpecParseError(line, col, e.what());
  }
  if (!doc.is_object()) throw SchemaError("/", "spec must be a JSON object");
  auto version = doc.find("formatVersion");
  if (version == doc.end()) throw SchemaError("/formatVersion", "missing required field");
  if (!version->is_number_integer() || version->get<std::int64_t>() != kFormatVersion) {
    throw SchemaError("/formatVersion", "unsupported format version " + version->dump() +
                                            ", expected " + std::to_string(kFormatVersion));
  }

  ChainSpec spec;
  spec.chain = chain_from_json(doc, "", {"formatVersion", "seeds"});
  if (auto seeds = doc.find("seeds"); seeds != doc.end()) {
    if (!seeds->is_array()) throw SchemaError("/seeds", "expected array");
    for (std::size_t i = 0; i < seeds->size(); ++i) {
      const auto path = "/seeds/" + std::to_string(i);
      const auto& s = (*seeds)[i];
      if (!s.is_object()) throw SchemaError(path, "expected object");
      for (auto it = s.begin(); it != s.end(); ++it) {
        if (it.key() != "layer" && it.key() != "text") {
          throw SchemaError(path + "/" + it.key(), "unknown field");
        }
        if (!it.value().is_string()) throw SchemaError(path + "/" + it.key(), "expected string");
      }
      if (!s.contains("layer")) throw SchemaError(path + "/layer", "missing required field");
      if (!s.contains("text")) throw SchemaError(path + "/text", "missing required field");
      Seed seed{s["layer"].get<std::string>(), s["text"].get<std::string>()};
      const auto* layer = spec.chain.find_layer(seed.layer);
      if (layer == nullptr) throw SchemaError(path + "/layer", "unknown layer '" + seed.layer + "'");
      if (!layer->is_root) throw SchemaError(path + "/layer", "seeds must target a root layer");
      spec.seeds.push_back(std::move(seed));
    }
  }

  auto report = validate_chain(spec.chain);
  if (!report.empty()) throw ValidationError(std::move(report));
  return spec;
}

ChainSpec load_spec_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open spec file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return load_spec(ss.str());
}

std::string save_spec(const ChainSpec& spec) {
  Json doc = {{"formatVersion", kFormatVersion}};
  doc.update(chain_body_to_json(spec.chain));
  Json seeds = Json::array();
  for (const auto& s : spec.seeds) seeds.push_back({{"layer", s.layer}, {"text", s.text}});
  doc["seeds"] = seeds;
  return doc.dump(2) + "\n";
}

ChainState seeded_state(const ChainSpec& spec) {
  auto state = make_state(spec.chain);
  for (const auto& s : spec.seeds) seed_entry(state, spec.chain, s.layer, s.text);
  return state;
}

}  // namespace promptloom
