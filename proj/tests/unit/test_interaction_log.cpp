#include <doctest.h>

#include <fstream>
#include <random>

#include "../common/test_support.hpp"
#include "promptloom/interaction_log.hpp"

using namespace promptloom;
using nlohmann::json;

namespace {

std::vector<EditEvent> events_of(const json& j) {
  std::vector<EditEvent> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(event_from_json(j[i], "/" + std::to_string(i)));
  return out;
}

std::vector<std::string> names_of(const std::vector<Interval>& iv) {
  std::vector<std::string> out;
  for (const auto& i : iv) out.emplace_back(to_string(i.category));
  return out;
}

EditEvent run(std::int64_t t, std::string before, std::string after) {
  EditEvent e;
  e.timestamp = t;
  e.kind = EventKind::Run;
  e.text_before = std::move(before);
  e.text_after = std::move(after);
  return e;
}

std::string join_lines(const std::vector<std::string>& lines) {
  std::string s;
  for (std::size_t i = 0; i < lines.size(); ++i) s += (i ? "\n" : "") + lines[i];
  return s;
}

json corpus() { return json::parse(testsupport::read_file(testsupport::data_path("edit_corpus.json"))); }

}  // namespace

TEST_CASE("category names") {
  for (auto c : {EditCategory::Run, EditCategory::Undo, EditCategory::Format, EditCategory::CreateContent,
                 EditCategory::CurateContent, EditCategory::ChangeTemperature}) {
    CHECK(parse_category(to_string(c)) == c);
  }
  CHECK(to_string(EditCategory::CreateContent) == "CREATE_CONTENT");
}

TEST_CASE("tokens and stopwords") {
  const auto t = tokenize("Tips:\n1. use the  outline");
  std::vector<TokenKind> kinds;
  for (const auto& k : t) kinds.push_back(k.kind);
  CHECK(kinds == std::vector<TokenKind>{TokenKind::Word, TokenKind::Punct, TokenKind::Newline,
                                        TokenKind::Enumerator, TokenKind::Space, TokenKind::Word,
                                        TokenKind::Space, TokenKind::Word, TokenKind::Space, TokenKind::Word});
  CHECK(is_stopword("The"));
  CHECK_FALSE(is_stopword("not"));
  CHECK_FALSE(is_stopword("outline"));
  CHECK(is_trivial(Token{TokenKind::Word, "and", 0}));
  CHECK_FALSE(is_trivial(Token{TokenKind::Word, "slides", 0}));
  CHECK(similarity("", "") == 1.0);
  CHECK(similarity("a b", "a b") == 1.0);
  CHECK(similarity("a", "b") == 0.0);
}

TEST_CASE("model spans cover exactly the appended text") {
  const std::string before = "A\n1. x";
  const std::string after = "A\n1. x\n2. y";
  const auto spans = model_spans(before, after);
  REQUIRE_FALSE(spans.empty());
  std::string added;
  for (const auto& [b, e] : spans) added += after.substr(b, e - b);
  CHECK(added.find("y") != std::string::npos);
  CHECK(added.find("x") == std::string::npos);
}

TEST_CASE("diff_interval examples") {
  const std::string prev_before = "A\n1. x";
  const std::string prev_after = "A\n1. x\n2. y";
  const auto spans = model_spans(prev_before, prev_after);
  CHECK(diff_interval(prev_after, prev_after, spans, prev_before) == EditCategory::Format);
  CHECK(diff_interval(prev_after, prev_before, spans, prev_before) == EditCategory::Undo);
  CHECK(diff_interval(prev_after, prev_after + "\n3. speak slowly", spans, prev_before) ==
        EditCategory::CreateContent);
  CHECK(diff_interval("A\n1. x\n2. read outlines", "A\n1. x\n2. emphasize main points",
                      model_spans(prev_before, "A\n1. x\n2. read outlines"), prev_before) ==
        EditCategory::CurateContent);
}

TEST_CASE("hand-labeled corpus") {
  const auto c = corpus();
  REQUIRE(c["cases"].size() == 30);
  std::size_t agree = 0;
  for (const auto& k : c["cases"]) {
    CAPTURE(k["name"].get<std::string>());
    const auto got = names_of(classify_session(events_of(k["events"])));
    const auto want = k["expected"].get<std::vector<std::string>>();
    CHECK(got == want);
    agree += got == want;
  }
  CHECK(agree == 30);
}

TEST_CASE("twelve-event session") {
  const auto s = corpus()["session"];
  const auto events = events_of(s["events"]);
  CHECK(events.size() == 12);
  const auto iv = classify_session(events);
  CHECK(names_of(iv) == s["expected"].get<std::vector<std::string>>());
  // Intervals connect consecutive runs.
  for (const auto& i : iv) {
    if (i.category == EditCategory::ChangeTemperature) {
      CHECK(events[i.to_event].kind == EventKind::TemperatureChange);
    } else {
      CHECK(i.from_event < i.to_event);
      CHECK(events[i.from_event].kind == EventKind::Run);
      CHECK(events[i.to_event].kind == EventKind::Run);
    }
  }
}

TEST_CASE("session passthrough") {
  EditEvent temp;
  temp.timestamp = 2;
  temp.kind = EventKind::TemperatureChange;
  temp.temperature = 0.9;
  const auto iv = classify_session({run(1, "a", "a b"), temp, run(3, "a b", "a b c")});
  CHECK(names_of(iv) == std::vector<std::string>{"CHANGE_TEMPERATURE", "RUN"});
  CHECK_THROWS_AS(classify_session({run(5, "a", "b"), run(4, "b", "c")}), NonMonotonicTimestamps);
  CHECK(classify_session({}).empty());
  CHECK(classify_session({run(1, "", "x")}).empty());
}

TEST_CASE("stats examples") {
  using C = EditCategory;
  const std::vector<Interval> three{{0, 1, C::Run}, {1, 2, C::Format}, {2, 3, C::CurateContent}};
  const auto s = stats(three, 4);
  CHECK(s.total_runs == 4);
  CHECK(s.consecutive_run_ratio == doctest::Approx(2.0 / 3.0));
  CHECK(s.edit_shares.at(C::CurateContent) == 1.0);
  CHECK_FALSE(s.no_edits);

  const auto none = stats({{0, 1, C::Run}, {1, 2, C::Run}}, 3);
  CHECK(none.no_edits);
  for (const auto& [_, v] : none.edit_shares) CHECK(v == 0.0);
  CHECK(none.consecutive_run_ratio == 1.0);

  const auto empty = stats({}, 0);
  CHECK(empty.consecutive_run_ratio == 0.0);
  CHECK(empty.no_edits);

  const auto same = session_stats({run(1, "a", "a b"), run(2, "a b", "a b c")});
  CHECK(same.consecutive_run_ratio == 1.0);
  CHECK(same.total_runs == 2);
}

TEST_CASE("stats equal a counting oracle on random category multisets") {
  using C = EditCategory;
  const C all[] = {C::Run, C::Undo, C::Format, C::CreateContent, C::CurateContent, C::ChangeTemperature};
  std::mt19937_64 rng(33);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<Interval> iv;
    std::map<C, std::size_t> n;
    const auto len = rng() % 25;
    for (std::size_t i = 0; i < len; ++i) {
      const C c = all[rng() % 6];
      iv.push_back({i, i + 1, c});
      ++n[c];
    }
    const auto s = stats(iv, len + 1);
    const std::size_t runs = len - n[C::ChangeTemperature];
    const std::size_t edits = n[C::Undo] + n[C::CreateContent] + n[C::CurateContent];
    CHECK(s.run_intervals == runs);
    CHECK(s.consecutive_run_ratio == (runs ? double(n[C::Run] + n[C::Format]) / double(runs) : 0.0));
    CHECK(s.no_edits == (edits == 0));
    double sum = 0;
    for (auto c : {C::Undo, C::CreateContent, C::CurateContent}) {
      CHECK(s.edit_shares.at(c) == (edits ? double(n[c]) / double(edits) : 0.0));
      sum += s.edit_shares.at(c);
    }
    if (edits) CHECK(sum == doctest::Approx(1.0));
    CHECK(s.consecutive_run_ratio >= 0.0);
    CHECK(s.consecutive_run_ratio <= 1.0);
  }
}

TEST_CASE("deleting more model text never turns an undo into curation") {
  std::mt19937_64 rng(44);
  const std::vector<std::string> words{"slow", "down", "smile", "pause", "breathe", "outline", "practice",
                                       "gesture", "summarize", "project", "voice", "eye"};
  auto phrase = [&] {
    std::string s;
    for (int k = 0; k < 2 + static_cast<int>(rng() % 3); ++k) s += (k ? " " : "") + words[rng() % words.size()];
    return s;
  };
  std::size_t undos = 0;
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<std::string> base{"Tips for Alex:"};
    for (int i = 0, m = 1 + static_cast<int>(rng() % 3); i < m; ++i)
      base.push_back(std::to_string(i + 1) + ". " + phrase());
    std::vector<std::string> model;
    for (int i = 0, m = 2 + static_cast<int>(rng() % 4); i < m; ++i)
      model.push_back(std::to_string(base.size() + static_cast<std::size_t>(i)) + ". " + phrase());

    auto all = base;
    all.insert(all.end(), model.begin(), model.end());
    const std::string before = join_lines(base);
    const std::string after = join_lines(all);
    const auto spans = model_spans(before, after);

    // Delete a growing set of model lines in random order.
    std::vector<std::size_t> order(model.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::set<std::size_t> gone;
    bool seen_undo = false;
    for (auto idx : order) {
      gone.insert(idx);
      auto kept = base;
      for (std::size_t i = 0; i < model.size(); ++i) {
        if (!gone.count(i)) kept.push_back(model[i]);
      }
      const auto cat = diff_interval(after, join_lines(kept), spans, before);
      if (seen_undo) CHECK(cat != EditCategory::CurateContent);
      if (cat == EditCategory::Undo) {
        seen_undo = true;
        ++undos;
      }
    }
    CHECK(seen_undo);  // removing every model line restores the prior text
  }
  CHECK(undos >= 300);
}

TEST_CASE("event encoding") {
  const auto e = run(7, "a", "a b");
  CHECK(event_from_json(to_json(e)) == e);
  EditEvent t;
  t.timestamp = 8;
  t.kind = EventKind::TemperatureChange;
  t.temperature = 0.4;
  CHECK(to_json(t)["marker"] == "CHANGE_TEMPERATURE");
  CHECK(event_from_json(to_json(t)) == t);
  CHECK_THROWS_AS(event_from_json(json{{"timestamp", 1}, {"kind", "jump"}}), SchemaError);
  CHECK_THROWS_AS(event_from_json(json{{"timestamp", 1}, {"kind", "run"}, {"before", "a"}, {"after", "b"}, {"x", 1}}),
                  SchemaError);
  CHECK_THROWS_AS(event_from_json(json{{"timestamp", "1"}, {"kind", "run"}}), SchemaError);
}

TEST_CASE("event log files") {
  const auto path = testsupport::temp_path("events.jsonl");
  {
    std::ofstream f(path);
    f << to_json(run(1, "a", "a b")).dump() << "\n\n" << to_json(run(2, "a b", "a b c")).dump() << "\n";
  }
  const auto events = load_event_log(path);
  CHECK(events.size() == 2);
  {
    std::ofstream f(path, std::ios::app);
    f << "{broken\n";
  }
  try {
    load_event_log(path);
    FAIL("expected SchemaError");
  } catch (const SchemaError& e) {
    CHECK(std::string(e.what()).find("4") != std::string::npos);
  }
  std::remove(path.c_str());
  CHECK_THROWS_AS(load_event_log(path), IoError);
}
