#pragma once

// Shared fixtures and generators for the unit and acceptance suites.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <unistd.h>

#include "promptloom/backend.hpp"
#include "promptloom/executor.hpp"
#include "promptloom/library.hpp"
#include "promptloom/serialize.hpp"
#include "promptloom/service.hpp"

namespace testsupport {

using namespace promptloom;

inline std::string data_path(const std::string& name) {
  return std::string(PROMPTLOOM_TEST_DATA) + "/" + name;
}
inline std::string fixture_path(const std::string& name) {
  return std::string(PROMPTLOOM_FIXTURES) + "/" + name;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string temp_path(const std::string& stem) {
  static std::atomic<int> counter{0};
  return "/tmp/promptloom_test_" + std::to_string(::getpid()) + "_" +
         std::to_string(counter++) + "_" + stem;
}

inline std::shared_ptr<MockBackend> mock_from_fixture(const std::string& name) {
  return std::make_shared<MockBackend>(load_mock_rules(fixture_path(name)));
}

inline MockRule contains_rule(std::string needle, std::string completion, int priority = 0) {
  MockRule r;
  r.matcher = ContainsSubstring{std::move(needle)};
  r.completion = std::move(completion);
  r.priority = priority;
  return r;
}

inline MockRule regex_rule(std::string pattern, std::string completion, int priority = 0) {
  MockRule r;
  r.matcher = RegexMatch{std::move(pattern)};
  r.completion = std::move(completion);
  r.priority = priority;
  return r;
}

inline std::int64_t fixed_clock() { return 1700000000000; }

// Rules fixture file for each builtin.
inline std::string rules_for(const std::string& builtin_name) {
  static const std::map<std::string, std::string> files = {
      {"peer_review", "review_rules.json"},   {"flashcards", "flashcards_rules.json"},
      {"metaphor", "metaphor_rules.json"},    {"vegalite_lint", "vegalite_rules.json"},
      {"text_entry", "text_entry_rules.json"},
  };
  return files.at(builtin_name);
}

// Every live entry as (layer, text, lineage texts), independent of ids.
inline std::multiset<std::string> content_signature(const ChainState& s) {
  std::map<EntryId, std::string> text;
  for (const auto& [layer, list] : s.entries) {
    for (const auto& e : list) text[e.id] = e.text;
  }
  std::multiset<std::string> out;
  for (const auto& [layer, list] : s.entries) {
    for (const auto& e : list) {
      std::string sig = layer + "|" + e.text + "|";
      for (const auto& a : e.lineage) sig += text.count(a) ? text[a] + ">" : "?>";
      sig += e.stale ? "S" : "-";
      sig += e.frozen ? "F" : "-";
      out.insert(sig);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Random chains
// ---------------------------------------------------------------------------

// Valid chain with `steps` steps over a single root layer "l0". Each step
// reads one or two earlier layers; OneToMany steps are only placed while the
// estimated entry count stays small.
inline Chain random_chain(std::mt19937_64& rng, int steps) {
  Chain c;
  c.id = "random";
  c.name = "random chain";
  DataLayer root;
  root.id = "l0";
  root.name = "layer zero";
  root.is_root = true;
  c.layers.emplace(root.id, root);

  std::map<LayerId, int> estimate{{"l0", 1}};
  std::vector<LayerId> order{"l0"};
  for (int i = 1; i <= steps; ++i) {
    Step s;
    char id[16];
    std::snprintf(id, sizeof id, "s%02d", i);
    s.id = id;
    const LayerId out = "l" + std::to_string(i);

    std::uniform_int_distribution<std::size_t> pick(0, order.size() - 1);
    std::set<LayerId> inputs{order[pick(rng)]};
    if (order.size() > 1 && rng() % 3 == 0) inputs.insert(order[pick(rng)]);
    s.inputs.assign(inputs.begin(), inputs.end());

    int est = 0;
    bool any_list = false;
    for (const auto& in : s.inputs) {
      est = std::max(est, estimate[in]);
      any_list |= c.layers.at(in).cardinality == Cardinality::List;
    }
    const auto roll = rng() % 4;
    if (roll == 0 && est * 2 <= 12) {
      s.op = rng() % 2 ? OperationKind::Ideation : OperationKind::SplitPoints;
    } else if (roll == 1 && any_list) {
      s.op = OperationKind::ComposePoints;
    } else {
      static const OperationKind single[] = {OperationKind::Rewriting, OperationKind::Generation,
                                             OperationKind::InformationExtraction,
                                             OperationKind::FactualQuery};
      s.op = single[rng() % 4];
    }
    s.output = out;
    s.temperature = defaults_for(s.op).temperature;

    DataLayer l;
    l.id = out;
    l.name = "layer " + std::to_string(i);
    l.producer = s.id;
    l.cardinality = mapping_of(s.op) == Mapping::OneToMany ? Cardinality::List : Cardinality::Single;
    c.layers.emplace(out, l);
    c.steps.emplace(s.id, s);

    int produced = s.effective_scope() == AggregationScope::Global ? 1 : est;
    if (mapping_of(s.op) == Mapping::OneToMany) produced *= 2;
    estimate[out] = produced;
    order.push_back(out);
  }
  return c;
}

// Two-item numbered list for every prompt; single-valued layers keep the
// whole text.
inline std::shared_ptr<MockBackend> universal_mock() {
  auto m = std::make_shared<MockBackend>();
  m->register_rule(contains_rule("", " 1. alpha\n2. beta"));
  return m;
}

// ---------------------------------------------------------------------------
// Staleness oracle
// ---------------------------------------------------------------------------

// Tracks, outside the engine, when each entry appeared and when each entry
// last changed (text edit or removal). An unfrozen entry should be stale iff
// one of its lineage ancestors changed after the entry's own last version.
class StaleOracle {
 public:
  // Call after every operation with the resulting state.
  void observe(const ChainState& s) {
    ++now_;
    std::set<EntryId> present;
    for (const auto& [_, list] : s.entries) {
      for (const auto& e : list) {
        present.insert(e.id);
        if (!version_.count(e.id)) version_[e.id] = now_;
      }
    }
    for (const auto& id : alive_) {
      if (!present.count(id)) changed_[id] = now_;
    }
    alive_ = std::move(present);
    for (const auto& id : pending_text_) {
      version_[id] = now_;
      changed_[id] = now_;
    }
    pending_text_.clear();
  }
  // Call before observe() for a SetText that changed the text.
  void text_changed(const EntryId& id) { pending_text_.push_back(id); }

  bool expect_stale(const DataEntry& e) const {
    if (e.frozen) return false;
    const auto v = version_.at(e.id);
    for (const auto& a : e.lineage) {
      auto it = changed_.find(a);
      if (it != changed_.end() && it->second > v) return true;
    }
    return false;
  }

  // Ids whose stale flag disagrees with the oracle.
  std::vector<EntryId> mismatches(const ChainState& s) const {
    std::vector<EntryId> bad;
    for (const auto& [_, list] : s.entries) {
      for (const auto& e : list) {
        if (e.stale != expect_stale(e)) bad.push_back(e.id);
      }
    }
    return bad;
  }

 private:
  std::uint64_t now_ = 0;
  std::set<EntryId> alive_;
  std::map<EntryId, std::uint64_t> version_;
  std::map<EntryId, std::uint64_t> changed_;
  std::vector<EntryId> pending_text_;
};

struct StaleTrialResult {
  std::size_t operations = 0;
  std::size_t checks = 0;
  std::vector<std::string> failures;
};

// Builds a random chain, runs it, then applies `edits` random operations
// (text edits, deletes, freeze toggles, step reruns, stale-only chain runs),
// comparing every entry against the oracle after each one. Frozen entries must
// also stay bit-identical while frozen.
inline StaleTrialResult stale_trial(std::uint64_t seed, int max_steps, int edits) {
  std::mt19937_64 rng(seed);
  StaleTrialResult out;
  const Chain c = random_chain(rng, 1 + static_cast<int>(rng() % max_steps));
  auto mock = universal_mock();
  ChainState st = make_state(c);
  seed_entry(st, c, "l0", "seed");
  StaleOracle oracle;
  oracle.observe(st);

  RunOptions opts;
  opts.policy = ExecutionPolicy::Sequential;
  run_chain(c, st, *mock, RunMode::Full, opts);
  oracle.observe(st);

  std::map<EntryId, DataEntry> frozen_copy;
  std::vector<StepId> steps;
  for (const auto& [id, _] : c.steps) steps.push_back(id);
  int text_counter = 0;

  auto all_entries = [&] {
    std::vector<EntryId> ids;
    for (const auto& [_, list] : st.entries) {
      for (const auto& e : list) ids.push_back(e.id);
    }
    return ids;
  };

  for (int i = 0; i < edits; ++i) {
    const auto ids = all_entries();
    const auto op = rng() % 7;
    std::string what;
    if (op <= 3 && !ids.empty()) {
      const EntryId id = ids[rng() % ids.size()];
      if (op == 0) {
        what = "SetText " + id;
        if (edit_entry(st, id, entry_edit::SetText{"edited " + std::to_string(++text_counter)})) {
          oracle.text_changed(id);
          if (frozen_copy.count(id)) frozen_copy[id] = *st.find(id);
        }
      } else if (op == 1) {
        what = "Delete " + id;
        frozen_copy.erase(id);
        edit_entry(st, id, entry_edit::Delete{});
      } else if (op == 2) {
        what = "Freeze " + id;
        try {
          edit_entry(st, id, entry_edit::Freeze{});
          frozen_copy[id] = *st.find(id);
        } catch (const FreezeStale&) {
        }
      } else {
        what = "Unfreeze " + id;
        edit_entry(st, id, entry_edit::Unfreeze{});
        frozen_copy.erase(id);
      }
    } else if (op <= 5) {
      const StepId sid = steps[rng() % steps.size()];
      what = "run_step " + sid;
      try {
        run_step(c, st, sid, *mock, opts);
      } catch (const MissingUpstream&) {
      }
    } else {
      what = "run_chain(StaleOnly)";
      run_chain(c, st, *mock, RunMode::StaleOnly, opts);
    }
    oracle.observe(st);
    ++out.operations;

    for (const auto& bad : oracle.mismatches(st)) {
      out.failures.push_back("seed " + std::to_string(seed) + " after '" + what + "': entry " + bad +
                             " stale=" + (st.find(bad)->stale ? "true" : "false"));
    }
    for (const auto& [id, copy] : frozen_copy) {
      // The orphan marker tracks ancestor existence, not the entry itself.
      const DataEntry* now = st.find(id);
      DataEntry expected = copy;
      if (now != nullptr) expected.orphaned = now->orphaned;
      if (now == nullptr || !(*now == expected)) {
        out.failures.push_back("seed " + std::to_string(seed) + ": frozen entry " + id + " changed after '" +
                               what + "'");
      }
    }
    out.checks += st.entry_count();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Service
// ---------------------------------------------------------------------------

struct Reply {
  int status = 0;
  nlohmann::json body;
};

inline Reply call(Service& svc, std::string_view method, std::string_view path,
                  const nlohmann::json& body = nullptr,
                  const std::multimap<std::string, std::string>& query = {}) {
  const auto r = svc.handle(method, path, query, body.is_null() ? "" : body.dump());
  return {r.status, r.body};
}

inline std::string open_session(Service& svc, const std::string& chain) {
  return call(svc, "POST", "/api/sessions", {{"chainId", chain}}).body.at("id").get<std::string>();
}

struct RaceResult {
  std::vector<int> statuses;  // per writer
  bool replay_matches = false;
  std::string detail;
};

// Two writers PATCH /structure with the same base version. The loser then
// retries on the new version. The final chain must equal the serial replay
// winner-then-loser on the original chain.
inline RaceResult structure_race(Service& svc, const std::string& session) {
  using nlohmann::json;
  RaceResult out;
  const auto before = call(svc, "GET", "/api/sessions/" + session).body;
  const auto base = before.at("version").get<std::uint64_t>();
  const Chain initial = chain_from_json(before.at("chain"));
  const StructuralEdit edits[2] = {
      edit::SetTemperature{"ideation", 0.5},
      edit::SetTaskDescription{"compose", "Write the suggestions as one kind paragraph."},
  };
  Reply replies[2];
  std::atomic<int> ready{0};
  auto writer = [&](int k) {
    ++ready;
    while (ready.load() < 2) std::this_thread::yield();
    replies[k] = call(svc, "PATCH", "/api/sessions/" + session + "/structure",
                      {{"baseVersion", base}, {"edit", to_json(edits[k])}});
  };
  std::thread a(writer, 0);
  std::thread b(writer, 1);
  a.join();
  b.join();
  out.statuses = {replies[0].status, replies[1].status};

  int winner = replies[0].status == 200 ? 0 : 1;
  const int loser = 1 - winner;
  if (replies[winner].status != 200 || replies[loser].status != 409) {
    out.detail = "statuses " + std::to_string(replies[0].status) + "/" + std::to_string(replies[1].status);
    return out;
  }
  if (replies[winner].body.at("version") != base + 1 ||
      replies[loser].body.value("currentVersion", std::uint64_t{0}) != base + 1) {
    out.detail = "version numbers";
    return out;
  }
  const auto retry = call(svc, "PATCH", "/api/sessions/" + session + "/structure",
                          {{"baseVersion", base + 1}, {"edit", to_json(edits[loser])}});
  if (retry.status != 200) {
    out.detail = "retry status " + std::to_string(retry.status);
    return out;
  }
  const Chain expected = apply_edit(apply_edit(initial, edits[winner]), edits[loser]);
  const auto after = call(svc, "GET", "/api/sessions/" + session).body;
  out.replay_matches = chain_from_json(after.at("chain")) == expected && after.at("version") == base + 2;
  if (!out.replay_matches) out.detail = "final chain differs from the serial replay";
  return out;
}

}  // namespace testsupport
