#include "promptloom/parser.hpp"

#include <algorithm>
#include <cctype>

#include "promptloom/errors.hpp"

namespace promptloom {

std::string_view to_string(FinishReason r) noexcept {
  switch (r) {
    case FinishReason::Stop: return "stop";
    case FinishReason::Length: return "length";
    case FinishReason::Error: return "error";
  }
  return "?";
}

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

// Length of a leading enumerator ("12.", "3)", "-") including the whitespace
// after it, or 0 when the line has none.
std::size_t enumerator_length(std::string_view line) {
  std::size_t i = 0;
  while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
  if (i > 0 && i < line.size() && (line[i] == '.' || line[i] == ')')) {
    ++i;
  } else if (i == 0 && !line.empty() && line[0] == '-') {
    i = 1;
  } else {
    return 0;
  }
  if (i < line.size() && !is_space(line[i])) return 0;
  while (i < line.size() && is_space(line[i])) ++i;
  return i;
}

}  // namespace

std::string strip_stops(std::string_view raw, const std::vector<std::string>& stops) {
  std::size_t cut = raw.size();
  for (const auto& stop : stops) {
    if (stop.empty()) continue;
    auto pos = raw.find(stop);
    if (pos != std::string_view::npos) cut = std::min(cut, pos);
  }
  return std::string(raw.substr(0, cut));
}

ParsedOutput parse_numbered_list(std::string_view raw) {
  ParsedOutput out;
  out.parse_type = ParseType::NumberedList;
  std::size_t line_no = 0;
  while (!raw.empty()) {
    ++line_no;
    auto nl = raw.find('\n');
    std::string_view line = trim(raw.substr(0, nl));
    raw = nl == std::string_view::npos ? std::string_view{} : raw.substr(nl + 1);
    if (line.empty()) continue;
    std::string_view item = trim(line.substr(enumerator_length(line)));
    if (item.empty()) {
      out.warnings.push_back("line " + std::to_string(line_no) + ": empty list item dropped");
      continue;
    }
    out.values.emplace_back(item);
  }
  return out;
}

ParsedOutput parse_output(const RawCompletion& raw, ParseType type,
                          const std::vector<std::string>& stops) {
  const std::string text = strip_stops(raw.text, stops);
  ParsedOutput out;
  switch (type) {
    case ParseType::NumberedList:
      out = parse_numbered_list(text);
      break;
    case ParseType::SingleText: {
      auto v = trim(text);
      if (v.empty()) throw EmptyOutput("completion is empty after trimming");
      out.values.emplace_back(v);
      break;
    }
    case ParseType::LabeledFields: {
      std::string_view rest = text;
      std::string_view label;
      while (!rest.empty() && label.empty()) {
        auto nl = rest.find('\n');
        label = trim(rest.substr(0, nl));
        rest = nl == std::string_view::npos ? std::string_view{} : rest.substr(nl + 1);
      }
      if (label.empty()) throw EmptyOutput("completion carries no label");
      out.values.emplace_back(label);
      break;
    }
  }
  out.parse_type = type;
  if (raw.finish_reason == FinishReason::Length) {
    out.warnings.push_back("completion was truncated at the token limit");
  }
  return out;
}

std::string guard_key(std::string_view label) {
  std::string out(trim(label));
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

}  // namespace promptloom
