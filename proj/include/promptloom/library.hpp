#pragma once

// Chain spec documents (JSON, formatVersion 1) and the built-in chains.

#include <string>
#include <string_view>
#include <vector>

#include "promptloom/chain.hpp"
#include "promptloom/executor.hpp"

namespace promptloom {

inline constexpr int kFormatVersion = 1;

class ValidationError : public Error {
 public:
  explicit ValidationError(ValidationReport report);
  const ValidationReport& report() const noexcept { return report_; }

 private:
  ValidationReport report_;
};

struct Seed {
  LayerId layer;
  std::string text;

  friend bool operator==(const Seed&, const Seed&) = default;
};

struct ChainSpec {
  Chain chain;
  std::vector<Seed> seeds;

  friend bool operator==(const ChainSpec&, const ChainSpec&) = default;
};

// Throws SpecParseError (line/column), SchemaError (JSON pointer) or
// ValidationError.
ChainSpec load_spec(std::string_view text);
ChainSpec load_spec_file(const std::string& path);
std::string save_spec(const ChainSpec& spec);

// Fresh state holding the chain's seeds.
ChainState seeded_state(const ChainSpec& spec);

std::vector<std::string> builtin_names();
// Throws UnknownBuiltin.
ChainSpec builtin(std::string_view name);
// The raw spec document of a builtin.
std::string_view builtin_document(std::string_view name);

}  // namespace promptloom
