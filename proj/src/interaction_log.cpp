#include "promptloom/interaction_log.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>

#include "promptloom/errors.hpp"

namespace promptloom {

std::string_view to_string(EditCategory c) noexcept {
  switch (c) {
    case EditCategory::Run: return "RUN";
    case EditCategory::Undo: return "UNDO";
    case EditCategory::Format: return "FORMAT";
    case EditCategory::CreateContent: return "CREATE_CONTENT";
    case EditCategory::CurateContent: return "CURATE_CONTENT";
    case EditCategory::ChangeTemperature: return "CHANGE_TEMPERATURE";
  }
  return "?";
}

std::optional<EditCategory> parse_category(std::string_view s) noexcept {
  for (auto c : {EditCategory::Run, EditCategory::Undo, EditCategory::Format,
                 EditCategory::CreateContent, EditCategory::CurateContent,
                 EditCategory::ChangeTemperature}) {
    if (to_string(c) == s) return c;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Tokens
// ---------------------------------------------------------------------------

namespace {

// English stopwords as distributed with NLTK, with the negations removed so
// that inserting or deleting "not" counts as a content change. The lone "y"
// is dropped too; a one-letter list item is content.
const std::set<std::string, std::less<>>& stopwords() {
  static const std::set<std::string, std::less<>> words = {
      "i",       "me",        "my",       "myself",  "we",       "our",     "ours",
      "ourselves", "you",     "you're",   "you've",  "you'll",   "you'd",   "your",
      "yours",   "yourself",  "yourselves", "he",    "him",      "his",     "himself",
      "she",     "she's",     "her",      "hers",    "herself",  "it",      "it's",
      "its",     "itself",    "they",     "them",    "their",    "theirs",  "themselves",
      "what",    "which",     "who",      "whom",    "this",     "that",    "that'll",
      "these",   "those",     "am",       "is",      "are",      "was",     "were",
      "be",      "been",      "being",    "have",    "has",      "had",     "having",
      "do",      "does",      "did",      "doing",   "a",        "an",      "the",
      "and",     "but",       "if",       "or",      "because",  "as",      "until",
      "while",   "of",        "at",       "by",      "for",      "with",    "about",
      "against", "between",   "into",     "through", "during",   "before",  "after",
      "above",   "below",     "to",       "from",    "up",       "down",    "in",
      "out",     "on",        "off",      "over",    "under",    "again",   "further",
      "then",    "once",      "here",     "there",   "when",     "where",   "why",
      "how",     "all",       "any",      "both",    "each",     "few",     "more",
      "most",    "other",     "some",     "such",    "only",     "own",     "same",
      "so",      "than",      "too",      "very",    "s",        "t",       "can",
      "will",    "just",      "should",   "should've", "now",    "d",       "ll",
      "m",       "o",         "re",       "ve",      "ma",
  };
  return words;
}

bool word_byte(unsigned char c) { return std::isalnum(c) != 0 || c >= 0x80; }

}  // namespace

bool is_stopword(std::string_view word) {
  std::string lower(word);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return stopwords().count(lower) > 0;
}

bool is_trivial(const Token& t) {
  switch (t.kind) {
    case TokenKind::Space:
    case TokenKind::Newline:
    case TokenKind::Punct:
    case TokenKind::Enumerator:
      return true;
    case TokenKind::Word:
      return is_stopword(t.text);
  }
  return false;
}

std::vector<Token> tokenize(std::string_view s) {
  std::vector<Token> out;
  bool line_start = true;
  std::size_t i = 0;
  auto emit = [&](TokenKind k, std::size_t begin, std::size_t end) {
    out.push_back(Token{k, std::string(s.substr(begin, end - begin)), begin});
  };
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    if (c == '\n') {
      emit(TokenKind::Newline, i, i + 1);
      ++i;
      line_start = true;
      continue;
    }
    if (c == ' ' || c == '\t' || c == '\r') {
      std::size_t j = i;
      while (j < s.size() && (s[j] == ' ' || s[j] == '\t' || s[j] == '\r')) ++j;
      emit(TokenKind::Space, i, j);
      i = j;
      continue;
    }
    if (line_start) {
      line_start = false;
      std::size_t j = i;
      while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) ++j;
      std::size_t end = 0;
      if (j > i && j < s.size() && (s[j] == '.' || s[j] == ')')) {
        end = j + 1;
      } else if (j == i && c == '-') {
        end = i + 1;
      }
      if (end > 0 && (end == s.size() || s[end] == ' ' || s[end] == '\t' || s[end] == '\n')) {
        emit(TokenKind::Enumerator, i, end);
        i = end;
        continue;
      }
    }
    if (word_byte(c)) {
      std::size_t j = i;
      while (j < s.size()) {
        const auto d = static_cast<unsigned char>(s[j]);
        if (word_byte(d)) {
          ++j;
        } else if (d == '\'' && j + 1 < s.size() &&
                   word_byte(static_cast<unsigned char>(s[j + 1]))) {
          j += 2;
        } else {
          break;
        }
      }
      emit(TokenKind::Word, i, j);
      i = j;
      continue;
    }
    emit(TokenKind::Punct, i, i + 1);
    ++i;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Alignment
// ---------------------------------------------------------------------------

namespace {

struct Alignment {
  std::vector<bool> kept_a;
  std::vector<bool> kept_b;
  std::size_t lcs = 0;
};

Alignment align(const std::vector<Token>& a, const std::vector<Token>& b) {
  Alignment al;
  al.kept_a.assign(a.size(), false);
  al.kept_b.assign(b.size(), false);

  std::size_t pre = 0;
  while (pre < a.size() && pre < b.size() && a[pre] == b[pre]) {
    al.kept_a[pre] = al.kept_b[pre] = true;
    ++pre;
  }
  std::size_t suf = 0;
  while (suf < a.size() - pre && suf < b.size() - pre &&
         a[a.size() - 1 - suf] == b[b.size() - 1 - suf]) {
    al.kept_a[a.size() - 1 - suf] = al.kept_b[b.size() - 1 - suf] = true;
    ++suf;
  }
  al.lcs = pre + suf;

  const std::size_t n = a.size() - pre - suf;
  const std::size_t m = b.size() - pre - suf;
  if (n == 0 || m == 0) return al;

  // dp[i][j] = LCS of a[pre+i..] and b[pre+j..]
  std::vector<std::uint32_t> dp((n + 1) * (m + 1), 0);
  auto at = [&](std::size_t i, std::size_t j) -> std::uint32_t& { return dp[i * (m + 1) + j]; };
  for (std::size_t i = n; i-- > 0;) {
    for (std::size_t j = m; j-- > 0;) {
      at(i, j) = a[pre + i] == b[pre + j] ? at(i + 1, j + 1) + 1
                                          : std::max(at(i + 1, j), at(i, j + 1));
    }
  }
  al.lcs += at(0, 0);
  std::size_t i = 0, j = 0;
  while (i < n && j < m) {
    if (a[pre + i] == b[pre + j]) {
      al.kept_a[pre + i] = al.kept_b[pre + j] = true;
      ++i;
      ++j;
    } else if (at(i + 1, j) >= at(i, j + 1)) {
      ++i;
    } else {
      ++j;
    }
  }
  return al;
}

double ratio(std::size_t lcs, std::size_t a, std::size_t b) {
  if (a + b == 0) return 1.0;
  return 2.0 * static_cast<double>(lcs) / static_cast<double>(a + b);
}

}  // namespace

double similarity(std::string_view a, std::string_view b) {
  const auto ta = tokenize(a);
  const auto tb = tokenize(b);
  return ratio(align(ta, tb).lcs, ta.size(), tb.size());
}

SpanSet model_spans(std::string_view before, std::string_view after) {
  const auto ta = tokenize(before);
  const auto tb = tokenize(after);
  const auto al = align(ta, tb);
  SpanSet spans;
  for (std::size_t k = 0; k < tb.size(); ++k) {
    if (al.kept_b[k]) continue;
    const std::size_t begin = tb[k].offset;
    const std::size_t end = begin + tb[k].text.size();
    if (!spans.empty() && spans.back().second == begin) {
      spans.back().second = end;
    } else {
      spans.emplace_back(begin, end);
    }
  }
  return spans;
}

// ---------------------------------------------------------------------------
// Classification
// ---------------------------------------------------------------------------

EditCategory diff_interval(std::string_view prev_after, std::string_view next_before,
                           const SpanSet& model_span, std::string_view prev_before) {
  if (prev_after == next_before) return EditCategory::Format;
  const auto a = tokenize(prev_after);
  const auto b = tokenize(next_before);
  const auto al = align(a, b);

  bool deleted = false;
  bool deleted_model = false;
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (al.kept_a[k] || is_trivial(a[k])) continue;
    deleted = true;
    const std::size_t begin = a[k].offset;
    const std::size_t end = begin + a[k].text.size();
    for (const auto& [sb, se] : model_span) {
      if (begin < se && sb < end) deleted_model = true;
    }
  }
  bool inserted = false;
  for (std::size_t k = 0; k < b.size(); ++k) {
    if (!al.kept_b[k] && !is_trivial(b[k])) inserted = true;
  }

  if (!deleted && !inserted) return EditCategory::Format;
  if (!deleted) return EditCategory::CreateContent;
  if (!inserted && deleted_model &&
      similarity(next_before, prev_before) > similarity(prev_after, prev_before)) {
    return EditCategory::Undo;
  }
  return EditCategory::CurateContent;
}

std::vector<Interval> classify_session(const std::vector<EditEvent>& events) {
  for (std::size_t i = 1; i < events.size(); ++i) {
    if (events[i].timestamp < events[i - 1].timestamp) throw NonMonotonicTimestamps(i);
  }
  std::vector<Interval> out;
  std::optional<std::size_t> last_run;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& e = events[i];
    switch (e.kind) {
      case EventKind::Snapshot:
        break;
      case EventKind::TemperatureChange:
        out.push_back({i, i, EditCategory::ChangeTemperature});
        break;
      case EventKind::Run:
        if (last_run) {
          const auto& prev = events[*last_run];
          EditCategory cat = EditCategory::Run;
          if (prev.text_after != e.text_before) {
            cat = diff_interval(prev.text_after, e.text_before,
                                model_spans(prev.text_before, prev.text_after), prev.text_before);
          }
          out.push_back({*last_run, i, cat});
        }
        last_run = i;
        break;
    }
  }
  return out;
}

SessionStats stats(const std::vector<Interval>& classified, std::size_t total_runs) {
  SessionStats s;
  s.total_runs = total_runs;
  for (const auto& iv : classified) {
    ++s.counts[iv.category];
    if (iv.category != EditCategory::ChangeTemperature) ++s.run_intervals;
  }
  auto count = [&](EditCategory c) -> std::size_t {
    auto it = s.counts.find(c);
    return it == s.counts.end() ? 0 : it->second;
  };
  if (s.run_intervals > 0) {
    s.consecutive_run_ratio = static_cast<double>(count(EditCategory::Run) + count(EditCategory::Format)) /
                              static_cast<double>(s.run_intervals);
  }
  const EditCategory edits[] = {EditCategory::CurateContent, EditCategory::CreateContent,
                                EditCategory::Undo};
  std::size_t total_edits = 0;
  for (auto c : edits) total_edits += count(c);
  s.no_edits = total_edits == 0;
  for (auto c : edits) {
    s.edit_shares[c] =
        total_edits == 0 ? 0.0 : static_cast<double>(count(c)) / static_cast<double>(total_edits);
  }
  return s;
}

SessionStats session_stats(const std::vector<EditEvent>& events) {
  const auto runs = static_cast<std::size_t>(std::count_if(
      events.begin(), events.end(), [](const EditEvent& e) { return e.kind == EventKind::Run; }));
  return stats(classify_session(events), runs);
}

// ---------------------------------------------------------------------------
// Encoding
// ---------------------------------------------------------------------------

EditEvent event_from_json(const nlohmann::json& j, const std::string& path) {
  if (!j.is_object()) throw SchemaError(path.empty() ? "/" : path, "event must be an object");
  static const std::set<std::string> allowed = {"timestamp", "kind", "before", "after", "marker",
                                                "temperature"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!allowed.count(it.key())) throw SchemaError(path + "/" + it.key(), "unknown field");
  }
  EditEvent e;
  auto ts = j.find("timestamp");
  if (ts == j.end() || !ts->is_number_integer()) {
    throw SchemaError(path + "/timestamp", "expected integer timestamp");
  }
  e.timestamp = ts->get<std::int64_t>();
  auto kind = j.find("kind");
  if (kind == j.end() || !kind->is_string()) throw SchemaError(path + "/kind", "expected string");
  const auto k = kind->get<std::string>();
  if (k == "run") e.kind = EventKind::Run;
  else if (k == "temperature") e.kind = EventKind::TemperatureChange;
  else if (k == "snapshot") e.kind = EventKind::Snapshot;
  else throw SchemaError(path + "/kind", "unknown event kind '" + k + "'");
  for (const char* key : {"before", "after"}) {
    auto it = j.find(key);
    if (it == j.end()) continue;
    if (!it->is_string()) throw SchemaError(path + "/" + key, "expected string");
    (std::string_view(key) == "before" ? e.text_before : e.text_after) = it->get<std::string>();
  }
  if (e.kind == EventKind::Run && (!j.contains("before") || !j.contains("after"))) {
    throw SchemaError(path, "run events carry both 'before' and 'after'");
  }
  if (auto t = j.find("temperature"); t != j.end() && !t->is_null()) {
    if (!t->is_number()) throw SchemaError(path + "/temperature", "expected number");
    e.temperature = t->get<double>();
    if (*e.temperature < 0.0 || *e.temperature > 1.0) {
      throw SchemaError(path + "/temperature", "must lie in [0, 1]");
    }
  }
  if (e.kind == EventKind::TemperatureChange && !e.temperature) {
    throw SchemaError(path + "/temperature", "temperature events carry a temperature");
  }
  return e;
}

nlohmann::json to_json(const EditEvent& e) {
  nlohmann::json j = {{"timestamp", e.timestamp}};
  switch (e.kind) {
    case EventKind::Run:
      j["kind"] = "run";
      j["before"] = e.text_before;
      j["after"] = e.text_after;
      break;
    case EventKind::TemperatureChange:
      j["kind"] = "temperature";
      j["marker"] = to_string(EditCategory::ChangeTemperature);
      break;
    case EventKind::Snapshot:
      j["kind"] = "snapshot";
      j["after"] = e.text_after;
      break;
  }
  if (e.temperature) j["temperature"] = *e.temperature;
  return j;
}

nlohmann::json to_json(const SessionStats& s) {
  nlohmann::json shares = nlohmann::json::object();
  for (const auto& [c, v] : s.edit_shares) shares[std::string(to_string(c))] = v;
  nlohmann::json counts = nlohmann::json::object();
  for (const auto& [c, v] : s.counts) counts[std::string(to_string(c))] = v;
  return {{"totalRuns", s.total_runs},
          {"runIntervals", s.run_intervals},
          {"consecutiveRunRatio", s.consecutive_run_ratio},
          {"editShares", shares},
          {"counts", counts},
          {"noEdits", s.no_edits}};
}

nlohmann::json to_json(const std::vector<Interval>& intervals) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& iv : intervals) {
    a.push_back({{"from", iv.from_event}, {"to", iv.to_event}, {"category", to_string(iv.category)}});
  }
  return a;
}

std::vector<EditEvent> load_event_log(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open event log '" + path + "'");
  std::vector<EditEvent> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) throw SchemaError("line " + std::to_string(n), "not valid JSON");
    out.push_back(event_from_json(j, "line " + std::to_string(n)));
  }
  return out;
}

}  // namespace promptloom
