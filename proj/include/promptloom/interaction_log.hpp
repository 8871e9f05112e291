#pragma once

// Reconstructs what the model generated and what the person edited between
// runs of a single-textbox session, and classifies each inter-run interval.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

namespace promptloom {

enum class EventKind { Run, TemperatureChange, Snapshot };

struct EditEvent {
  std::int64_t timestamp = 0;
  EventKind kind = EventKind::Run;
  std::string text_before;  // Run: text when run was pressed
  std::string text_after;   // Run: text after the model's output arrived
  std::optional<double> temperature;

  friend bool operator==(const EditEvent&, const EditEvent&) = default;
};

enum class EditCategory { Run, Undo, Format, CreateContent, CurateContent, ChangeTemperature };

std::string_view to_string(EditCategory c) noexcept;  // "RUN", "CREATE_CONTENT", ...
std::optional<EditCategory> parse_category(std::string_view s) noexcept;

// ---------------------------------------------------------------------------
// Tokens
// ---------------------------------------------------------------------------

enum class TokenKind { Word, Space, Newline, Punct, Enumerator };

struct Token {
  TokenKind kind;
  std::string text;
  std::size_t offset;  // byte offset in the source text

  friend bool operator==(const Token& a, const Token& b) {
    return a.kind == b.kind && a.text == b.text;
  }
};

// Words, runs of spaces/tabs, single newlines, single punctuation bytes, and
// list enumerators ("3.", "2)", "-") at the start of a line.
std::vector<Token> tokenize(std::string_view text);

// Whitespace, enumerators, punctuation and stopwords.
bool is_trivial(const Token& t);
bool is_stopword(std::string_view word);  // case-insensitive

// 2 * LCS / (|a| + |b|) over tokens; 1 when both are empty.
double similarity(std::string_view a, std::string_view b);

// Byte ranges [begin, end) of `after` that are not aligned to `before`, i.e.
// the text the model added during a run.
using SpanSet = std::vector<std::pair<std::size_t, std::size_t>>;
SpanSet model_spans(std::string_view before, std::string_view after);

// ---------------------------------------------------------------------------
// Classification
// ---------------------------------------------------------------------------

// Category of the edits made between the end of one run (`prev_after`) and
// the start of the next (`next_before`). `prev_before` is the text the
// previous run started from. Identical texts yield Format.
EditCategory diff_interval(std::string_view prev_after, std::string_view next_before,
                           const SpanSet& model_span, std::string_view prev_before);

struct Interval {
  std::size_t from_event;  // index into the event list
  std::size_t to_event;
  EditCategory category;

  friend bool operator==(const Interval&, const Interval&) = default;
};

// One entry per run-to-run interval, plus a Change_Temperature entry for each
// temperature event (reported before the interval it falls in). Intervals
// with no textual change are Run. Snapshots are ignored.
// Throws NonMonotonicTimestamps.
std::vector<Interval> classify_session(const std::vector<EditEvent>& events);

struct SessionStats {
  std::size_t total_runs = 0;
  std::size_t run_intervals = 0;
  double consecutive_run_ratio = 0.0;  // (RUN + FORMAT) / run intervals
  std::map<EditCategory, double> edit_shares;  // UNDO, CREATE, CURATE
  std::map<EditCategory, std::size_t> counts;
  bool no_edits = true;
};

SessionStats stats(const std::vector<Interval>& classified, std::size_t total_runs);
SessionStats session_stats(const std::vector<EditEvent>& events);

// ---------------------------------------------------------------------------
// Encoding
// ---------------------------------------------------------------------------

// {"timestamp", "kind": "run"|"temperature"|"snapshot", "before", "after",
//  "temperature"}. Throws SchemaError.
EditEvent event_from_json(const nlohmann::json& j, const std::string& path = "");
nlohmann::json to_json(const EditEvent& e);
nlohmann::json to_json(const SessionStats& s);
nlohmann::json to_json(const std::vector<Interval>& intervals);

// JSON-lines event log. Throws IoError, SchemaError (with the line number).
std::vector<EditEvent> load_event_log(const std::string& path);

}  // namespace promptloom
