#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "promptloom/prompt.hpp"

namespace promptloom {

enum class FinishReason { Stop, Length, Error };

std::string_view to_string(FinishReason r) noexcept;

struct RawCompletion {
  std::string text;
  FinishReason finish_reason = FinishReason::Stop;

  friend bool operator==(const RawCompletion&, const RawCompletion&) = default;
};

struct ParsedOutput {
  std::vector<std::string> values;
  ParseType parse_type = ParseType::SingleText;
  std::vector<std::string> warnings;
};

// Prefix of `raw` before the earliest occurrence of any stop sequence.
std::string strip_stops(std::string_view raw, const std::vector<std::string>& stops);

// One item per non-blank line; a leading "<digits>.", "<digits>)" or "- "
// enumerator is removed. Items that are empty after that are dropped with a
// warning.
ParsedOutput parse_numbered_list(std::string_view raw);

// Throws EmptyOutput when a single-valued parse yields nothing.
ParsedOutput parse_output(const RawCompletion& raw, ParseType type,
                          const std::vector<std::string>& stops);

// Normalized form used when comparing a classification against a branch label.
std::string guard_key(std::string_view label);

}  // namespace promptloom
