#include <doctest.h>

#include "../common/test_support.hpp"
#include "promptloom/executor.hpp"

using namespace promptloom;
using testsupport::contains_rule;
using testsupport::mock_from_fixture;

namespace {

RunOptions sequential() {
  RunOptions o;
  o.policy = ExecutionPolicy::Sequential;
  o.clock = testsupport::fixed_clock;
  return o;
}

struct Review {
  ChainSpec spec = builtin("peer_review");
  const Chain& chain = spec.chain;
  ChainState state = seeded_state(spec);
  std::shared_ptr<MockBackend> mock = mock_from_fixture("review_rules.json");

  void run_all() { run_chain(chain, state, *mock, RunMode::Full, sequential()); }
  const DataEntry& find_text(const LayerId& layer, const std::string& text) {
    for (const auto& e : state.entries.at(layer)) {
      if (e.text == text) return e;
    }
    FAIL("no entry '" << text << "' in " << layer);
    throw std::logic_error("unreachable");
  }
};

std::size_t count_step(const ChainState& s, const StepId& id, std::size_t from = 0) {
  std::size_t n = 0;
  for (std::size_t i = from; i < s.history.size(); ++i) n += s.history[i].plan.step_id == id;
  return n;
}

}  // namespace

TEST_CASE("block status names") {
  for (auto s : {BlockStatus::Pending, BlockStatus::SkippedFrozen, BlockStatus::SkippedBranch,
                 BlockStatus::Running, BlockStatus::Done, BlockStatus::Failed}) {
    CHECK(parse_block_status(to_string(s)) == s);
  }
}

TEST_CASE("seeding") {
  Review r;
  CHECK(r.state.entries.at("feedback").size() == 1);
  CHECK(r.state.entries.at("feedback")[0].origin == Origin::Seed);
  CHECK_THROWS(seed_entry(r.state, r.chain, "problems", "x"));
  CHECK_THROWS_AS(add_entry(r.state, r.chain, "problems", "x", {"ghost"}), UnknownEntry);
}

TEST_CASE("split creates one entry per problem") {
  Review r;
  const auto run = run_step(r.chain, r.state, "split", *r.mock, sequential());
  CHECK(run.executed == 1);
  REQUIRE(r.state.entries.at("problems").size() == 3);
  CHECK(r.state.entries.at("problems")[0].text == "Too much text on slides");
  CHECK(r.state.entries.at("problems")[2].text == "Does not engage with audience");
  for (const auto& e : r.state.entries.at("problems")) {
    CHECK(e.lineage == std::vector<EntryId>{r.state.entries.at("feedback")[0].id});
    CHECK(e.origin == Origin::Model);
  }
}

TEST_CASE("ideation over three problems plans three pending blocks") {
  Review r;
  run_step(r.chain, r.state, "split", *r.mock, sequential());
  const auto plans = plan_step(r.chain, r.state, "ideation");
  REQUIRE(plans.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(plans[i].status == BlockStatus::Pending);
    CHECK(plans[i].index == i);
  }
}

TEST_CASE("missing upstream") {
  Review r;
  CHECK_THROWS_AS(plan_step(r.chain, r.state, "ideation"), MissingUpstream);
  CHECK_THROWS_AS(plan_step(r.chain, r.state, "nope"), UnknownStep);
  ChainState empty = make_state(r.chain);
  CHECK_THROWS_AS(plan_step(r.chain, empty, "split"), MissingUpstream);
  const auto run = run_chain(r.chain, empty, *r.mock, RunMode::Full, sequential());
  CHECK(run.blocked.size() == 3);
  CHECK(run.executed() == 0);
}

TEST_CASE("full review run") {
  Review r;
  r.run_all();
  CHECK(r.state.history.size() == 5);
  CHECK(r.state.entries.at("suggestions").size() == 6);
  REQUIRE(r.state.entries.at("paragraph").size() == 1);
  CHECK(r.mock->calls() == 5);
  for (const auto& rec : r.state.history) {
    CHECK(rec.status == BlockStatus::Done);
    CHECK(rec.request == rec.plan.preview);
  }
}

TEST_CASE("frozen outputs skip their block") {
  Review r;
  r.run_all();
  const auto& problem = r.state.entries.at("problems")[0];
  std::vector<EntryId> outs;
  for (const auto& e : r.state.entries.at("suggestions")) {
    if (e.lineage.back() == problem.id) outs.push_back(e.id);
  }
  REQUIRE(outs.size() == 2);
  // Add two user suggestions so the block holds four outputs.
  auto lineage = problem.path();
  outs.push_back(add_entry(r.state, r.chain, "suggestions", "user one", lineage));
  outs.push_back(add_entry(r.state, r.chain, "suggestions", "user two", lineage));
  for (const auto& id : outs) edit_entry(r.state, id, entry_edit::Freeze{});

  const auto plans = plan_step(r.chain, r.state, "ideation");
  CHECK(plans[0].status == BlockStatus::SkippedFrozen);
  CHECK(plans[0].outputs.size() == 4);
  CHECK(plans[1].status == BlockStatus::Pending);

  // User-origin outputs are retained unless overwrite is requested.
  edit_entry(r.state, outs[0], entry_edit::Unfreeze{});
  edit_entry(r.state, outs[1], entry_edit::Unfreeze{});
  CHECK(plan_step(r.chain, r.state, "ideation")[0].status == BlockStatus::Pending);
}

TEST_CASE("all blocks skipped leaves the state unchanged") {
  Review r;
  r.run_all();
  for (const auto& e : r.state.entries.at("paragraph")) edit_entry(r.state, e.id, entry_edit::Freeze{});
  const auto before = to_json(r.state);
  const auto run = run_step(r.chain, r.state, "compose", *r.mock, sequential());
  CHECK(run.executed == 0);
  CHECK(run.plans[0].status == BlockStatus::SkippedFrozen);
  CHECK(to_json(r.state) == before);
}

TEST_CASE("rerun with identical output reproduces the content") {
  Review r;
  r.run_all();
  const auto before = testsupport::content_signature(r.state);
  run_step(r.chain, r.state, "compose", *r.mock, sequential());
  CHECK(testsupport::content_signature(r.state) == before);
  CHECK(r.state.entries.at("paragraph").size() == 1);
}

TEST_CASE("edited problem text reaches compose") {
  Review r;
  r.run_all();
  const auto id = r.state.entries.at("problems")[1].id;
  CHECK(edit_entry(r.state, id, entry_edit::SetText{"Slides lack a clear outline"}));
  CHECK(r.state.find(id)->origin == Origin::User);
  const auto plans = plan_step(r.chain, r.state, "compose");
  const auto& rec = run_block(r.chain, r.state, plans[0], *r.mock, sequential());
  CHECK(rec.request.prompt.find("Problem: Slides lack a clear outline") != std::string::npos);
}

TEST_CASE("editing a suggestion stales the paragraph") {
  Review r;
  r.run_all();
  const auto& s = r.find_text("suggestions", "Open with an outline");
  const auto sid = s.id;
  edit_entry(r.state, sid, entry_edit::SetText{"emphasize main points"});
  CHECK(r.state.entries.at("paragraph")[0].stale);
  CHECK_FALSE(r.state.find(sid)->stale);
  CHECK_THROWS_AS(edit_entry(r.state, r.state.entries.at("paragraph")[0].id, entry_edit::Freeze{}), FreezeStale);

  // StaleOnly reruns only the compose block.
  const auto before = r.state.history.size();
  const auto run = run_chain(r.chain, r.state, *r.mock, RunMode::StaleOnly, sequential());
  CHECK(run.executed() == 1);
  CHECK(count_step(r.state, "compose", before) == 1);
  CHECK_FALSE(r.state.entries.at("paragraph")[0].stale);
  CHECK(r.state.history.back().request.prompt.find("Suggestion: emphasize main points") != std::string::npos);
}

TEST_CASE("unfreeze then freeze is an involution") {
  Review r;
  r.run_all();
  const auto id = r.state.entries.at("problems")[0].id;
  edit_entry(r.state, id, entry_edit::Freeze{});
  const auto before = to_json(r.state);
  CHECK(edit_entry(r.state, id, entry_edit::Unfreeze{}));
  CHECK(edit_entry(r.state, id, entry_edit::Freeze{}));
  CHECK(to_json(r.state) == before);
  CHECK_FALSE(edit_entry(r.state, id, entry_edit::Freeze{}));
}

TEST_CASE("deleting a problem stales and orphans its suggestions") {
  Review r;
  r.run_all();
  const auto victim = r.state.entries.at("problems")[1].id;
  std::set<EntryId> expected;  // lineage scan
  for (const auto& [_, list] : r.state.entries) {
    for (const auto& e : list) {
      if (std::find(e.lineage.begin(), e.lineage.end(), victim) != e.lineage.end()) expected.insert(e.id);
    }
  }
  CHECK(expected.size() == 3);  // two suggestions and the paragraph
  auto desc = descendants_of(r.state, victim);
  CHECK(std::set<EntryId>(desc.begin(), desc.end()) == expected);
  CHECK(edit_entry(r.state, victim, entry_edit::Delete{}));
  CHECK(r.state.find(victim) == nullptr);
  for (const auto& id : expected) {
    CHECK(r.state.find(id)->stale);
    CHECK(r.state.find(id)->orphaned);
  }
  CHECK(r.state.live("suggestions").size() == 4);
  CHECK_THROWS_AS(edit_entry(r.state, victim, entry_edit::Delete{}), UnknownEntry);

  // The next compose run drops orphans and covers the two remaining problems.
  run_chain(r.chain, r.state, *r.mock, RunMode::StaleOnly, sequential());
  const auto prompt = r.state.history.back().request.prompt;
  CHECK(prompt.find("No clear structure") == std::string::npos);
  CHECK(prompt.find("2. Problem: Does not engage with audience") != std::string::npos);
}

TEST_CASE("frozen descendants stay fresh until unfrozen") {
  Review r;
  r.run_all();
  const auto para = r.state.entries.at("paragraph")[0].id;
  edit_entry(r.state, para, entry_edit::Freeze{});
  edit_entry(r.state, r.state.entries.at("problems")[0].id, entry_edit::SetText{"changed"});
  CHECK_FALSE(r.state.find(para)->stale);
  edit_entry(r.state, para, entry_edit::Unfreeze{});
  CHECK(r.state.find(para)->stale);
}

TEST_CASE("flashcard english ideation runs once per interaction type") {
  auto spec = builtin("flashcards");
  ChainState st = seeded_state(spec);
  auto mock = mock_from_fixture("flashcards_rules.json");
  run_step(spec.chain, st, "interactions", *mock, sequential());
  REQUIRE(st.entries.at("types").size() == 2);
  const auto run = run_step(spec.chain, st, "english", *mock, sequential());
  CHECK(run.executed == 2);
  CHECK(st.entries.at("english").size() == 2 * 2);
}

TEST_CASE("stale-only reruns exactly the edited lineage") {
  auto spec = builtin("flashcards");
  ChainState st = seeded_state(spec);
  auto mock = mock_from_fixture("flashcards_rules.json");
  run_chain(spec.chain, st, *mock, RunMode::Full, sequential());
  REQUIRE(st.entries.at("french").size() == 4);

  const auto fresh = run_chain(spec.chain, st, *mock, RunMode::StaleOnly, sequential());
  CHECK(fresh.executed() == 0);

  const auto type_id = st.entries.at("types")[0].id;
  edit_entry(st, type_id, entry_edit::SetText{"Ordering food"});  // same text: no-op
  CHECK(run_chain(spec.chain, st, *mock, RunMode::StaleOnly, sequential()).executed() == 0);

  // Reachability oracle: blocks whose group holds a descendant of the edit.
  edit_entry(st, type_id, entry_edit::SetText{"Asking for directions"});
  std::map<StepId, std::size_t> expected;
  for (const auto& sid : {"english", "translate"}) {
    for (const auto& p : plan_step(spec.chain, st, sid)) {
      bool reach = false;
      for (const auto& e : p.group.entries) {
        reach |= e.id == type_id ||
                 std::find(e.lineage.begin(), e.lineage.end(), type_id) != e.lineage.end();
      }
      expected[sid] += reach;
    }
  }
  CHECK(expected["english"] == 1);
  CHECK(expected["translate"] == 2);
  const auto before = st.history.size();
  const auto run = run_chain(spec.chain, st, *mock, RunMode::StaleOnly, sequential());
  CHECK(run.executed() == 3);
  CHECK(count_step(st, "english", before) == expected["english"]);
  CHECK(count_step(st, "translate", before) == expected["translate"]);
  CHECK(count_step(st, "interactions", before) == 0);
  for (const auto& [_, list] : st.entries) {
    for (const auto& e : list) CHECK_FALSE(e.stale);
  }
}

TEST_CASE("text entry routes by classifier label") {
  for (const auto& [input, label, runs, skipped] :
       std::vector<std::tuple<std::string, std::string, std::string, std::string>>{
           {"LTSG", "shorthand", "expand", "complete"}, {"Let's go", "phrase", "complete", "expand"}}) {
    auto spec = builtin("text_entry");
    spec.seeds = {{"sentence", input}};
    ChainState st = seeded_state(spec);
    auto mock = mock_from_fixture("text_entry_rules.json");
    const auto run = run_chain(spec.chain, st, *mock, RunMode::Full, sequential());
    CAPTURE(input);
    CHECK(st.entries.at("has_shorthand")[0].text == label);
    CHECK(count_step(st, runs) == 1);
    CHECK(count_step(st, skipped) == 0);
    for (const auto& sr : run.steps) {
      if (sr.step_id == skipped) CHECK(sr.plans[0].status == BlockStatus::SkippedBranch);
    }
  }
}

TEST_CASE("failed blocks are recorded and rerun later") {
  Review r;
  auto partial = std::make_shared<MockBackend>(load_mock_rules(testsupport::fixture_path("review_rules.json")));
  run_step(r.chain, r.state, "split", *partial, sequential());
  MockBackend failing;
  failing.register_rule(contains_rule("Problem: No clear structure\nSuggestion:", "1. outline"));
  const auto run = run_step(r.chain, r.state, "ideation", failing, sequential());
  CHECK(run.executed == 3);
  CHECK(run.failed == 2);
  std::size_t failed = 0;
  for (const auto& rec : r.state.history) {
    if (rec.status == BlockStatus::Failed) {
      ++failed;
      CHECK_FALSE(rec.error.empty());
      CHECK(rec.created_entry_ids.empty());
    }
  }
  CHECK(failed == 2);
  CHECK(r.state.entries.at("suggestions").size() == 1);

  // StaleOnly picks up the two blocks that never produced output.
  const auto again = run_step(r.chain, r.state, "ideation", *partial,
                              [] { auto o = sequential(); o.mode = RunMode::StaleOnly; return o; }());
  CHECK(again.executed == 2);
  CHECK(again.failed == 0);
  CHECK(r.state.entries.at("suggestions").size() == 5);
}

TEST_CASE("run_block requires a pending plan") {
  Review r;
  r.run_all();
  auto plans = plan_step(r.chain, r.state, "compose");
  plans[0].status = BlockStatus::Done;
  CHECK_THROWS(run_block(r.chain, r.state, plans[0], *r.mock));
}

TEST_CASE("only_block limits a step run") {
  Review r;
  run_step(r.chain, r.state, "split", *r.mock, sequential());
  auto o = sequential();
  o.only_block = 1;
  const auto run = run_step(r.chain, r.state, "ideation", *r.mock, o);
  CHECK(run.executed == 1);
  CHECK(r.state.history.back().plan.index == 1);
}

TEST_CASE("parallel and sequential runs give identical states on every builtin") {
  for (const auto& name : builtin_names()) {
    CAPTURE(name);
    const auto spec = builtin(name);
    ChainState a = seeded_state(spec);
    ChainState b = seeded_state(spec);
    auto mock_a = mock_from_fixture(testsupport::rules_for(name));
    auto mock_b = mock_from_fixture(testsupport::rules_for(name));
    auto seq = sequential();
    auto par = sequential();
    par.policy = ExecutionPolicy::Parallel;
    par.max_threads = 8;
    run_chain(spec.chain, a, *mock_a, RunMode::Full, seq);
    run_chain(spec.chain, b, *mock_b, RunMode::Full, par);
    CHECK(to_json(a).dump() == to_json(b).dump());
  }
}

TEST_CASE("backend calls are bounded by the planned blocks") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 40; ++trial) {
    const Chain c = testsupport::random_chain(rng, 1 + static_cast<int>(rng() % 15));
    auto mock = testsupport::universal_mock();
    ChainState st = make_state(c);
    seed_entry(st, c, "l0", "seed");
    const auto run = run_chain(c, st, *mock, RunMode::Full, sequential());
    std::size_t planned = 0;
    for (const auto& sr : run.steps) planned += sr.plans.size();
    CHECK(mock->calls() <= planned);
    CHECK(mock->calls() == run.executed());
    for (const auto& rec : st.history) CHECK(rec.request == rec.plan.preview);
  }
}

TEST_CASE("staleness matches lineage reachability on random edit sequences") {
  std::size_t checks = 0;
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    const auto r = testsupport::stale_trial(seed, 12, 25);
    checks += r.checks;
    for (const auto& f : r.failures) FAIL_CHECK(f);
  }
  CHECK(checks > 1000);
}

TEST_CASE("reconcile drops removed layers and flags orphans") {
  Review r;
  r.run_all();
  Chain c = apply_edit(r.chain, edit::RemoveStep{"compose"});
  reconcile(c, r.state);
  CHECK(r.state.entries.count("paragraph") == 0);
  CHECK(r.state.entries.at("suggestions").size() == 6);
}
