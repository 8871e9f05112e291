#include <doctest.h>

#include "../common/test_support.hpp"
#include "promptloom/library.hpp"
#include "promptloom/serialize.hpp"

using namespace promptloom;

namespace {

std::vector<OperationKind> ops_in_order(const Chain& c) {
  std::vector<OperationKind> out;
  for (const auto& id : topological_order(c)) out.push_back(c.step(id).op);
  return out;
}

}  // namespace

TEST_CASE("builtin structures") {
  CHECK(builtin_names() ==
        std::vector<std::string>{"peer_review", "flashcards", "metaphor", "vegalite_lint", "text_entry"});
  CHECK_THROWS_AS(builtin("nope"), UnknownBuiltin);

  using enum OperationKind;
  CHECK(ops_in_order(builtin("peer_review").chain) == std::vector{SplitPoints, Ideation, ComposePoints});
  CHECK(ops_in_order(builtin("flashcards").chain) == std::vector{Ideation, Ideation, Rewriting});
  CHECK(ops_in_order(builtin("metaphor").chain) == std::vector{Ideation, Generation});
  CHECK(ops_in_order(builtin("vegalite_lint").chain) ==
        std::vector{Rewriting, InformationExtraction, Classification, Rewriting});

  const Chain te = builtin("text_entry").chain;
  std::vector<StepId> branched;
  for (const auto& [id, s] : te.steps) {
    if (s.branch) {
      branched.push_back(id);
      CHECK(s.branch->guard_layer == "has_shorthand");
      CHECK(te.step(*te.layer("has_shorthand").producer).op == Classification);
    }
  }
  CHECK(branched.size() == 2);
  CHECK(te.step("expand").op == Rewriting);
  CHECK(te.step("complete").op == Generation);

  const auto pr = builtin("peer_review");
  REQUIRE(pr.seeds.size() == 1);
  CHECK(pr.seeds[0].text.find("Alex") != std::string::npos);
  const auto fc = builtin("flashcards");
  REQUIRE(fc.seeds.size() == 1);
  CHECK(fc.seeds[0].text == "Paris");
}

TEST_CASE("every builtin validates and reaches a terminal state under its scripted mock") {
  for (const auto& name : builtin_names()) {
    CAPTURE(name);
    const auto spec = builtin(name);
    CHECK(validate_chain(spec.chain).empty());
    ChainState st = seeded_state(spec);
    RunOptions o;
    o.policy = ExecutionPolicy::Sequential;
    const auto run =
        run_chain(spec.chain, st, *testsupport::mock_from_fixture(testsupport::rules_for(name)), RunMode::Full, o);
    CHECK(run.failed() == 0);
    CHECK(run.blocked.empty());
    std::set<StepId> skipped;
    for (const auto& sr : run.steps) {
      for (const auto& p : sr.plans) {
        CHECK(p.status != BlockStatus::Pending);
        if (p.status == BlockStatus::SkippedBranch) skipped.insert(sr.step_id);
      }
    }
    for (const auto& leaf : spec.chain.leaf_layers()) {
      const auto& producer = spec.chain.layer(leaf).producer;
      if (producer && skipped.count(*producer)) continue;  // branch not taken
      CHECK_MESSAGE(!st.entries.at(leaf).empty(), leaf);
    }
  }
}

TEST_CASE("save and reload is idempotent") {
  for (const auto& name : builtin_names()) {
    CAPTURE(name);
    const auto first = load_spec(builtin_document(name));
    CHECK(first == builtin(name));
    const auto saved = save_spec(first);
    const auto second = load_spec(saved);
    CHECK(second == first);
    CHECK(save_spec(second) == saved);
  }
}

TEST_CASE("format version gate") {
  auto j = Json::parse(builtin_document("metaphor"));
  j["formatVersion"] = 999;
  try {
    load_spec(j.dump());
    FAIL("expected SchemaError");
  } catch (const SchemaError& e) {
    CHECK(e.field() == "/formatVersion");
  }
  j.erase("formatVersion");
  CHECK_THROWS_AS(load_spec(j.dump()), SchemaError);
}

TEST_CASE("parse errors carry a position") {
  try {
    load_spec("{\n  \"formatVersion\": 1,\n  \"id\": }");
    FAIL("expected SpecParseError");
  } catch (const SpecParseError& e) {
    CHECK(e.line() == 3);
    CHECK(e.column() > 1);
  }
}

TEST_CASE("unknown fields are rejected") {
  auto j = Json::parse(builtin_document("peer_review"));
  j["steps"][0]["colour"] = "red";
  try {
    load_spec(j.dump());
    FAIL("expected SchemaError");
  } catch (const SchemaError& e) {
    CHECK(e.field() == "/steps/0/colour");
  }
}

TEST_CASE("seeds must target root layers") {
  auto j = Json::parse(builtin_document("peer_review"));
  j["seeds"].push_back({{"layer", "problems"}, {"text", "x"}});
  CHECK_THROWS_AS(load_spec(j.dump()), SchemaError);
}

TEST_CASE("invalid chains raise ValidationError with the report") {
  auto j = Json::parse(builtin_document("peer_review"));
  j["steps"][1]["temperature"] = -1.0;
  try {
    load_spec(j.dump());
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    REQUIRE(e.report().size() == 1);
    CHECK(e.report()[0].code == ViolationCode::TemperatureOutOfRange);
  }
}

TEST_CASE("every truncation of a builtin document fails cleanly") {
  for (const auto& name : builtin_names()) {
    const std::string doc(builtin_document(name));
    std::size_t parse = 0;
    for (std::size_t n = 0; n < doc.size(); ++n) {
      if (doc.find_first_not_of(" \n\t\r", n) == std::string::npos) break;  // only trailing space left
      try {
        load_spec(doc.substr(0, n));
        FAIL_CHECK(name << " prefix " << n << " loaded");
      } catch (const SpecParseError&) {
        ++parse;
      } catch (const ValidationError&) {
      } catch (const std::exception& e) {
        FAIL_CHECK(name << " prefix " << n << ": " << e.what());
      }
    }
    CHECK(parse > 0);
  }
}

TEST_CASE("spec files on disk") {
  const auto path = testsupport::temp_path("spec.json");
  {
    std::ofstream f(path);
    f << save_spec(builtin("flashcards"));
  }
  CHECK(load_spec_file(path) == builtin("flashcards"));
  std::remove(path.c_str());
  CHECK_THROWS_AS(load_spec_file(path), IoError);
}
