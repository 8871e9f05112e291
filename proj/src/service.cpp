#include "promptloom/service.hpp"

#include <atomic>
#include <chrono>
#include <random>

#include <httplib.h>

#include "promptloom/interaction_log.hpp"
#include "promptloom/serialize.hpp"
#include "promptloom/transcript.hpp"

namespace promptloom {

namespace {

using nlohmann::json;

std::string random_id() {
  static std::mutex mu;
  static std::mt19937_64 rng{std::random_device{}() ^
                             static_cast<std::uint64_t>(
                                 std::chrono::steady_clock::now().time_since_epoch().count())};
  std::lock_guard lock(mu);
  char buf[33];
  std::snprintf(buf, sizeof buf, "%016llx%016llx", static_cast<unsigned long long>(rng()),
                static_cast<unsigned long long>(rng()));
  return buf;
}

std::vector<std::string> split_path(std::string_view path) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < path.size()) {
    while (i < path.size() && path[i] == '/') ++i;
    std::size_t j = i;
    while (j < path.size() && path[j] != '/') ++j;
    if (j > i) out.emplace_back(path.substr(i, j - i));
    i = j;
  }
  return out;
}

HttpResponse error(int status, const std::string& message, json extra = json::object()) {
  extra["error"] = message;
  return {status, extra};
}

struct HttpFailure {
  int status;
  std::string message;
  json extra = json::object();
};

json parse_body(std::string_view body) {
  auto j = json::parse(body.begin(), body.end(), nullptr, false);
  if (j.is_discarded()) throw HttpFailure{422, "request body is not valid JSON"};
  if (!j.is_object()) throw HttpFailure{422, "request body must be a JSON object"};
  return j;
}

std::uint64_t base_version(const json& body) {
  auto it = body.find("baseVersion");
  if (it == body.end() || !it->is_number_unsigned()) {
    throw HttpFailure{422, "baseVersion (non-negative integer) is required"};
  }
  return it->get<std::uint64_t>();
}

std::optional<std::string> query_value(const std::multimap<std::string, std::string>& q,
                                       const std::string& key) {
  auto it = q.find(key);
  if (it == q.end()) return std::nullopt;
  return it->second;
}

std::int64_t wall_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

struct Snapshot {
  std::uint64_t version = 0;
  Chain chain;
  ChainState state;
};

struct RunStatus {
  std::string id;
  std::string step;  // empty for a whole-chain run
  std::string mode;
  std::string state = "queued";  // queued, running, done, failed
  std::map<std::pair<StepId, std::size_t>, BlockStatus> blocks;
  std::size_t executed = 0;
  std::size_t failed = 0;
  std::string error;
  std::optional<std::uint64_t> version;

  json to_json() const {
    json b = json::array();
    for (const auto& [key, st] : blocks) {
      b.push_back({{"step", key.first}, {"block", key.second}, {"status", to_string(st)}});
    }
    json j = {{"runId", id},     {"step", step},         {"mode", mode},
              {"state", state},  {"blocks", b},          {"executed", executed},
              {"failed", failed}, {"error", error}};
    j["version"] = version ? json(*version) : json(nullptr);
    return j;
  }
};

int rank(BlockStatus s) {
  switch (s) {
    case BlockStatus::Pending: return 0;
    case BlockStatus::Running: return 1;
    default: return 2;
  }
}

struct Session {
  std::string id;
  std::string chain_id;
  std::int64_t created_at = 0;

  std::mutex writer;  // serializes every mutation
  mutable std::mutex snap_mu;
  std::shared_ptr<const Snapshot> snap;

  std::mutex events_mu;
  std::vector<EditEvent> events;
  std::vector<json> raw_events;

  std::mutex runs_mu;
  std::map<std::string, RunStatus> runs;

  std::shared_ptr<const Snapshot> current() const {
    std::lock_guard lock(snap_mu);
    return snap;
  }
  void publish(std::shared_ptr<const Snapshot> s) {
    std::lock_guard lock(snap_mu);
    snap = std::move(s);
  }
};

}  // namespace

struct Service::Impl {
  std::shared_ptr<const Backend> backend;
  ServiceOptions options;

  std::mutex chains_mu;
  std::map<std::string, ChainSpec> chains;

  std::mutex sessions_mu;
  std::map<std::string, std::shared_ptr<Session>> sessions;

  std::mutex threads_mu;
  std::vector<std::thread> threads;

  std::mutex transcript_mu;
  httplib::Server server;

  std::int64_t now() const { return options.clock ? options.clock() : wall_ms(); }

  std::shared_ptr<Session> session(const std::string& id) {
    std::lock_guard lock(sessions_mu);
    auto it = sessions.find(id);
    if (it == sessions.end()) throw HttpFailure{404, "unknown session '" + id + "'"};
    return it->second;
  }

  json session_json(const Session& s, const Snapshot& snap) const {
    json entries = json::object();
    for (const auto& [layer, list] : snap.state.entries) {
      json a = json::array();
      for (const auto& e : list) a.push_back(promptloom::to_json(e));
      entries[layer] = a;
    }
    return {{"id", s.id},
            {"chainId", s.chain_id},
            {"createdAt", s.created_at},
            {"version", snap.version},
            {"chain", chain_body_to_json(snap.chain)},
            {"entries", entries},
            {"runCount", snap.state.history.size()}};
  }

  void check_version(const Snapshot& snap, const json& body) {
    const auto base = base_version(body);
    if (base != snap.version) {
      throw HttpFailure{409, "version conflict",
                        {{"currentVersion", snap.version}, {"baseVersion", base}}};
    }
  }

  // -------------------------------------------------------------------------
  // Chains
  // -------------------------------------------------------------------------

  HttpResponse list_chains() {
    std::lock_guard lock(chains_mu);
    json a = json::array();
    for (const auto& [id, spec] : chains) {
      json steps = json::array();
      for (const auto& sid : topological_order(spec.chain)) steps.push_back(sid);
      a.push_back({{"id", id}, {"name", spec.chain.name}, {"steps", steps}});
    }
    return {200, {{"chains", a}}};
  }

  HttpResponse get_chain(const std::string& id) {
    std::lock_guard lock(chains_mu);
    auto it = chains.find(id);
    if (it == chains.end()) throw HttpFailure{404, "unknown chain '" + id + "'"};
    return {200, json::parse(save_spec(it->second))};
  }

  HttpResponse create_chain(std::string_view body) {
    ChainSpec spec;
    try {
      spec = load_spec(body);
    } catch (const ValidationError& e) {
      throw HttpFailure{422, e.what(), {{"report", promptloom::to_json(e.report())}}};
    } catch (const SpecParseError& e) {
      throw HttpFailure{422, e.what(), {{"line", e.line()}, {"column", e.column()}}};
    } catch (const SchemaError& e) {
      throw HttpFailure{422, e.what(), {{"field", e.field()}}};
    }
    std::lock_guard lock(chains_mu);
    if (chains.count(spec.chain.id)) {
      throw HttpFailure{409, "chain '" + spec.chain.id + "' already exists"};
    }
    const auto id = spec.chain.id;
    chains.emplace(id, std::move(spec));
    return {201, {{"id", id}}};
  }

  // -------------------------------------------------------------------------
  // Sessions
  // -------------------------------------------------------------------------

  HttpResponse create_session(std::string_view raw) {
    const auto body = parse_body(raw);
    auto cid = body.find("chainId");
    if (cid == body.end() || !cid->is_string()) throw HttpFailure{422, "chainId is required"};
    ChainSpec spec;
    {
      std::lock_guard lock(chains_mu);
      auto it = chains.find(cid->get<std::string>());
      if (it == chains.end()) throw HttpFailure{404, "unknown chain '" + cid->get<std::string>() + "'"};
      spec = it->second;
    }
    if (auto seeds = body.find("seeds"); seeds != body.end()) {
      if (!seeds->is_object()) throw HttpFailure{422, "seeds must map layer ids to text"};
      std::vector<Seed> override_seeds;
      for (auto it = seeds->begin(); it != seeds->end(); ++it) {
        const auto* layer = spec.chain.find_layer(it.key());
        if (layer == nullptr || !layer->is_root || !it.value().is_string()) {
          throw HttpFailure{422, "seed '" + it.key() + "' must name a root layer and carry text"};
        }
        override_seeds.push_back({it.key(), it.value().get<std::string>()});
      }
      for (const auto& s : spec.seeds) {
        if (!seeds->contains(s.layer)) override_seeds.push_back(s);
      }
      spec.seeds = std::move(override_seeds);
    }
    auto s = std::make_shared<Session>();
    s->id = random_id();
    s->chain_id = spec.chain.id;
    s->created_at = now();
    auto snap = std::make_shared<Snapshot>();
    snap->version = 1;
    snap->chain = spec.chain;
    snap->state = seeded_state(spec);
    s->publish(std::move(snap));
    {
      std::lock_guard lock(sessions_mu);
      sessions.emplace(s->id, s);
    }
    return {201, session_json(*s, *s->current())};
  }

  HttpResponse get_session(const std::string& id) {
    auto s = session(id);
    return {200, session_json(*s, *s->current())};
  }

  HttpResponse patch_entry(const std::string& sid, const std::string& eid, std::string_view raw) {
    const auto body = parse_body(raw);
    auto s = session(sid);
    std::lock_guard w(s->writer);
    auto cur = s->current();
    check_version(*cur, body);

    auto next = std::make_shared<Snapshot>(*cur);
    if (next->state.find(eid) == nullptr) throw HttpFailure{404, "unknown entry '" + eid + "'"};
    bool changed = false;
    try {
      if (auto t = body.find("text"); t != body.end()) {
        if (!t->is_string()) throw HttpFailure{422, "text must be a string"};
        changed |= edit_entry(next->state, eid, entry_edit::SetText{t->get<std::string>()});
      }
      if (auto f = body.find("frozen"); f != body.end()) {
        if (!f->is_boolean()) throw HttpFailure{422, "frozen must be a boolean"};
        changed |= f->get<bool>() ? edit_entry(next->state, eid, entry_edit::Freeze{})
                                  : edit_entry(next->state, eid, entry_edit::Unfreeze{});
      }
      if (auto d = body.find("delete"); d != body.end() && d->is_boolean() && d->get<bool>()) {
        changed |= edit_entry(next->state, eid, entry_edit::Delete{});
      }
    } catch (const FreezeStale& e) {
      throw HttpFailure{422, e.what()};
    }
    next->version = cur->version + 1;
    const DataEntry* e = next->state.find(eid);
    json out = {{"version", next->version}, {"changed", changed}};
    out["entry"] = e ? promptloom::to_json(*e) : json(nullptr);
    s->publish(std::move(next));
    return {200, out};
  }

  HttpResponse add_entry(const std::string& sid, std::string_view raw) {
    const auto body = parse_body(raw);
    auto s = session(sid);
    std::lock_guard w(s->writer);
    auto cur = s->current();
    check_version(*cur, body);
    auto layer = body.find("layer");
    auto text = body.find("text");
    if (layer == body.end() || !layer->is_string() || text == body.end() || !text->is_string()) {
      throw HttpFailure{422, "layer and text are required strings"};
    }
    std::vector<EntryId> lineage;
    if (auto l = body.find("lineage"); l != body.end()) {
      if (!l->is_array()) throw HttpFailure{422, "lineage must be an array of entry ids"};
      for (const auto& id : *l) {
        if (!id.is_string()) throw HttpFailure{422, "lineage must be an array of entry ids"};
        lineage.push_back(id.get<std::string>());
      }
    }
    auto next = std::make_shared<Snapshot>(*cur);
    if (next->chain.find_layer(layer->get<std::string>()) == nullptr) {
      throw HttpFailure{404, "unknown layer '" + layer->get<std::string>() + "'"};
    }
    EntryId id;
    try {
      id = promptloom::add_entry(next->state, next->chain, layer->get<std::string>(),
                                 text->get<std::string>(), lineage);
    } catch (const UnknownEntry& e) {
      throw HttpFailure{422, e.what()};
    }
    next->version = cur->version + 1;
    json out = {{"version", next->version}, {"entry", promptloom::to_json(*next->state.find(id))}};
    s->publish(std::move(next));
    return {201, out};
  }

  HttpResponse patch_structure(const std::string& sid, std::string_view raw) {
    const auto body = parse_body(raw);
    auto s = session(sid);
    std::lock_guard w(s->writer);
    auto cur = s->current();
    check_version(*cur, body);
    auto e = body.find("edit");
    if (e == body.end()) throw HttpFailure{422, "edit is required"};
    StructuralEdit edit;
    try {
      edit = edit_from_json(*e, "/edit");
    } catch (const SchemaError& err) {
      throw HttpFailure{422, err.what(), {{"field", err.field()}}};
    }
    auto next = std::make_shared<Snapshot>(*cur);
    try {
      next->chain = apply_edit(cur->chain, edit);
    } catch (const EditRejected& err) {
      throw HttpFailure{422, err.what(),
                        {{"reason", err.reason()}, {"report", promptloom::to_json(err.report())}}};
    }
    reconcile(next->chain, next->state);
    next->version = cur->version + 1;
    json out = {{"version", next->version}, {"chain", chain_body_to_json(next->chain)}};
    s->publish(std::move(next));
    return {200, out};
  }

  HttpResponse preview(const std::string& sid, const std::string& step_id,
                       const std::multimap<std::string, std::string>& query) {
    auto s = session(sid);
    auto snap = s->current();
    if (snap->chain.find_step(step_id) == nullptr) throw HttpFailure{404, "unknown step '" + step_id + "'"};
    std::vector<BlockPlan> plans;
    try {
      plans = plan_step(snap->chain, snap->state, step_id);
    } catch (const MissingUpstream& e) {
      throw HttpFailure{422, e.what()};
    }
    json blocks = json::array();
    auto block = query_value(query, "block");
    for (const auto& p : plans) {
      if (block && *block != "all" && *block != std::to_string(p.index)) continue;
      blocks.push_back(promptloom::to_json(p));
    }
    if (block && *block != "all" && blocks.empty()) {
      throw HttpFailure{404, "step '" + step_id + "' has no block " + *block};
    }
    return {200, {{"version", snap->version}, {"step", step_id}, {"blocks", blocks}}};
  }

  // -------------------------------------------------------------------------
  // Runs
  // -------------------------------------------------------------------------

  HttpResponse start_run(const std::string& sid, const std::optional<std::string>& step_id,
                         const std::multimap<std::string, std::string>& query) {
    auto s = session(sid);
    auto snap = s->current();
    const auto mode_s = query_value(query, "mode").value_or(step_id ? "full" : "stale");
    if (mode_s != "full" && mode_s != "stale") throw HttpFailure{422, "mode must be full or stale"};
    const RunMode mode = mode_s == "full" ? RunMode::Full : RunMode::StaleOnly;

    std::optional<std::size_t> only;
    if (step_id) {
      if (snap->chain.find_step(*step_id) == nullptr) {
        throw HttpFailure{404, "unknown step '" + *step_id + "'"};
      }
      std::vector<BlockPlan> plans;
      try {
        plans = plan_step(snap->chain, snap->state, *step_id);
      } catch (const MissingUpstream& e) {
        throw HttpFailure{422, e.what()};
      }
      const auto block = query_value(query, "block").value_or("all");
      if (block != "all") {
        std::size_t n = 0;
        try {
          std::size_t used = 0;
          n = std::stoul(block, &used);
          if (used != block.size()) throw std::invalid_argument(block);
        } catch (const std::exception&) {
          throw HttpFailure{422, "block must be an index or 'all'"};
        }
        if (n >= plans.size()) throw HttpFailure{404, "step has no block " + block};
        only = n;
      }
    }

    RunStatus st;
    st.id = random_id();
    st.step = step_id.value_or("");
    st.mode = mode_s;
    const auto run_id = st.id;
    {
      std::lock_guard lock(s->runs_mu);
      s->runs.emplace(run_id, std::move(st));
    }

    std::lock_guard lock(threads_mu);
    threads.emplace_back([this, s, run_id, step_id, mode, only] { execute_run(s, run_id, step_id, mode, only); });
    return {202, {{"runId", run_id}, {"version", snap->version}}};
  }

  void execute_run(const std::shared_ptr<Session>& s, const std::string& run_id,
                   const std::optional<std::string>& step_id, RunMode mode,
                   std::optional<std::size_t> only) {
    auto update = [&](auto&& fn) {
      std::lock_guard lock(s->runs_mu);
      fn(s->runs.at(run_id));
    };
    std::lock_guard w(s->writer);
    update([](RunStatus& r) { r.state = "running"; });
    auto cur = s->current();
    auto next = std::make_shared<Snapshot>(*cur);
    const std::size_t history_before = next->state.history.size();

    RunOptions opts;
    opts.policy = options.policy;
    opts.max_threads = options.max_threads;
    opts.clock = options.clock;
    opts.mode = mode;
    opts.only_block = only;
    opts.observer = [&](const BlockPlan& p, BlockStatus status) {
      update([&](RunStatus& r) {
        auto key = std::make_pair(p.step_id, p.index);
        auto it = r.blocks.find(key);
        if (it == r.blocks.end()) {
          r.blocks.emplace(key, status);
        } else if (rank(status) > rank(it->second)) {
          it->second = status;
        }
      });
    };

    std::string failure;
    std::size_t executed = 0, failed = 0;
    try {
      if (step_id) {
        auto run = run_step(next->chain, next->state, *step_id, *backend, opts);
        for (const auto& p : run.plans) opts.observer(p, p.status);
        executed = run.executed;
        failed = run.failed;
      } else {
        auto run = run_chain(next->chain, next->state, *backend, mode, opts);
        for (const auto& sr : run.steps) {
          for (const auto& p : sr.plans) opts.observer(p, p.status);
        }
        executed = run.executed();
        failed = run.failed();
        for (const auto& [sid, why] : run.blocked) failure += (failure.empty() ? "" : "; ") + why;
      }
    } catch (const std::exception& e) {
      failure = e.what();
    }

    if (!options.transcript_path.empty()) {
      std::lock_guard t(transcript_mu);
      for (std::size_t i = history_before; i < next->state.history.size(); ++i) {
        try {
          append_transcript(options.transcript_path, s->id, next->state.history[i]);
        } catch (const IoError& e) {
          failure += (failure.empty() ? "" : "; ") + std::string(e.what());
        }
      }
    }

    next->version = cur->version + 1;
    const auto version = next->version;
    s->publish(std::move(next));
    update([&](RunStatus& r) {
      r.executed = executed;
      r.failed = failed;
      r.error = failure;
      r.version = version;
      r.state = (failed > 0 || (!failure.empty() && executed == 0 && step_id)) ? "failed" : "done";
    });
  }

  HttpResponse get_run(const std::string& sid, const std::string& rid) {
    auto s = session(sid);
    std::lock_guard lock(s->runs_mu);
    auto it = s->runs.find(rid);
    if (it == s->runs.end()) throw HttpFailure{404, "unknown run '" + rid + "'"};
    return {200, it->second.to_json()};
  }

  // -------------------------------------------------------------------------
  // Events
  // -------------------------------------------------------------------------

  HttpResponse post_event(const std::string& sid, std::string_view raw) {
    const auto body = parse_body(raw);
    auto s = session(sid);
    EditEvent e;
    try {
      e = event_from_json(body);
    } catch (const SchemaError& err) {
      throw HttpFailure{422, err.what(), {{"field", err.field()}}};
    }
    std::lock_guard lock(s->events_mu);
    if (!s->events.empty() && e.timestamp < s->events.back().timestamp) {
      throw HttpFailure{422, "event timestamp precedes the previous event"};
    }
    s->events.push_back(e);
    json stored = body;
    if (e.kind == EventKind::TemperatureChange) {
      stored["marker"] = to_string(EditCategory::ChangeTemperature);
    }
    s->raw_events.push_back(std::move(stored));
    return {200, {{"ack", true}, {"index", s->events.size() - 1}, {"count", s->events.size()}}};
  }

  HttpResponse get_events(const std::string& sid) {
    auto s = session(sid);
    std::lock_guard lock(s->events_mu);
    return {200, {{"events", s->raw_events}, {"count", s->raw_events.size()}}};
  }

  HttpResponse get_stats(const std::string& sid) {
    auto s = session(sid);
    std::vector<EditEvent> events;
    {
      std::lock_guard lock(s->events_mu);
      events = s->events;
    }
    auto classified = classify_session(events);
    const auto runs = static_cast<std::size_t>(std::count_if(
        events.begin(), events.end(), [](const EditEvent& e) { return e.kind == EventKind::Run; }));
    json out = promptloom::to_json(stats(classified, runs));
    out["intervals"] = promptloom::to_json(classified);
    return {200, out};
  }

  // -------------------------------------------------------------------------
  // Routing
  // -------------------------------------------------------------------------

  HttpResponse route(std::string_view method, std::string_view path,
                     const std::multimap<std::string, std::string>& query, std::string_view body) {
    const auto p = split_path(path);
    const auto n = p.size();
    auto is = [&](std::string_view m) { return method == m; };
    auto bad_method = [&] { return error(405, "method not allowed"); };

    if (n < 2 || p[0] != "api") return error(404, "no such endpoint");

    if (p[1] == "chains") {
      if (n == 2) {
        if (is("GET")) return list_chains();
        if (is("POST")) return create_chain(body);
        return bad_method();
      }
      if (n == 3) return is("GET") ? get_chain(p[2]) : bad_method();
      return error(404, "no such endpoint");
    }

    if (p[1] != "sessions") return error(404, "no such endpoint");
    if (n == 2) return is("POST") ? create_session(body) : bad_method();
    const auto& sid = p[2];
    if (n == 3) return is("GET") ? get_session(sid) : bad_method();

    const auto& what = p[3];
    if (what == "entries") {
      if (n == 4) return is("POST") ? add_entry(sid, body) : bad_method();
      if (n == 5) return is("PATCH") ? patch_entry(sid, p[4], body) : bad_method();
    } else if (what == "structure" && n == 4) {
      return is("PATCH") ? patch_structure(sid, body) : bad_method();
    } else if (what == "run" && n == 4) {
      return is("POST") ? start_run(sid, std::nullopt, query) : bad_method();
    } else if (what == "steps" && n == 6) {
      if (p[5] == "run") return is("POST") ? start_run(sid, p[4], query) : bad_method();
      if (p[5] == "preview") return is("GET") ? preview(sid, p[4], query) : bad_method();
    } else if (what == "runs" && n == 5) {
      return is("GET") ? get_run(sid, p[4]) : bad_method();
    } else if (what == "events" && n == 4) {
      if (is("POST")) return post_event(sid, body);
      if (is("GET")) return get_events(sid);
      return bad_method();
    } else if (what == "stats" && n == 4) {
      return is("GET") ? get_stats(sid) : bad_method();
    }
    return error(404, "no such endpoint");
  }
};

Service::Service(std::shared_ptr<const Backend> backend, ServiceOptions options)
    : impl_(std::make_unique<Impl>()) {
  impl_->backend = std::move(backend);
  impl_->options = std::move(options);
  for (const auto& name : builtin_names()) impl_->chains.emplace(name, builtin(name));

  auto handler = [this](const httplib::Request& req, httplib::Response& res) {
    std::multimap<std::string, std::string> q(req.params.begin(), req.params.end());
    auto r = handle(req.method, req.path, q, req.body);
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  impl_->server.Get(".*", handler);
  impl_->server.Post(".*", handler);
  impl_->server.Patch(".*", handler);
  impl_->server.Put(".*", handler);
  impl_->server.Delete(".*", handler);
}

Service::~Service() {
  stop();
  wait_idle();
}

HttpResponse Service::handle(std::string_view method, std::string_view path,
                             const std::multimap<std::string, std::string>& query,
                             std::string_view body) {
  try {
    return impl_->route(method, path, query, body);
  } catch (const HttpFailure& f) {
    return error(f.status, f.message, f.extra);
  } catch (const UnknownEntry& e) {
    return error(404, e.what());
  } catch (const UnknownStep& e) {
    return error(404, e.what());
  } catch (const NonMonotonicTimestamps& e) {
    return error(422, e.what());
  } catch (const std::exception& e) {
    return error(500, e.what());
  }
}

void Service::wait_idle() {
  for (;;) {
    std::vector<std::thread> batch;
    {
      std::lock_guard lock(impl_->threads_mu);
      batch.swap(impl_->threads);
    }
    if (batch.empty()) return;
    for (auto& t : batch) t.join();
  }
}

bool Service::listen(const std::string& host, int port) { return impl_->server.listen(host, port); }

int Service::bind_any(const std::string& host) { return impl_->server.bind_to_any_port(host); }

void Service::serve() { impl_->server.listen_after_bind(); }

void Service::stop() {
  if (impl_->server.is_running()) impl_->server.stop();
}

}  // namespace promptloom
