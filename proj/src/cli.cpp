#include "promptloom/cli.hpp"

#include <algorithm>
#include <chrono>
#include <csignal>
#include <fstream>
#include <optional>
#include <set>

#include <CLI11.hpp>

#include "promptloom/backend.hpp"
#include "promptloom/interaction_log.hpp"
#include "promptloom/library.hpp"
#include "promptloom/serialize.hpp"
#include "promptloom/service.hpp"
#include "promptloom/transcript.hpp"

namespace promptloom {

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SourceFlags {
  std::string builtin;
  std::string spec;
  std::vector<std::string> seeds;
};

struct BackendFlags {
  std::string kind = "mock";
  std::string rules;
  std::string base_url;
};

void add_source(CLI::App* cmd, SourceFlags& f) {
  auto* b = cmd->add_option("--builtin", f.builtin, "Builtin chain name");
  auto* s = cmd->add_option("--spec", f.spec, "Chain spec file (JSON)");
  b->excludes(s);
  cmd->add_option("--seed", f.seeds, "Override a root layer: layer=value (repeatable)");
}

void add_backend(CLI::App* cmd, BackendFlags& f) {
  cmd->add_option("--backend", f.kind, "Completion backend")
      ->check(CLI::IsMember({"mock", "http"}));
  cmd->add_option("--rules", f.rules, "Mock rule file (JSON)");
  cmd->add_option("--base-url", f.base_url, "Completion API base URL (http backend)");
}

ChainSpec load_source(const SourceFlags& f) {
  if (f.builtin.empty() && f.spec.empty()) throw UsageError("one of --builtin or --spec is required");
  ChainSpec spec = f.builtin.empty() ? load_spec_file(f.spec) : builtin(f.builtin);
  for (const auto& kv : f.seeds) {
    auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("--seed expects layer=value, got '" + kv + "'");
    const std::string layer = kv.substr(0, eq);
    const auto* l = spec.chain.find_layer(layer);
    if (l == nullptr || !l->is_root) throw Error("--seed layer '" + layer + "' is not a root layer");
    auto it = std::find_if(spec.seeds.begin(), spec.seeds.end(),
                           [&](const Seed& s) { return s.layer == layer; });
    if (it == spec.seeds.end()) {
      spec.seeds.push_back({layer, kv.substr(eq + 1)});
    } else {
      it->text = kv.substr(eq + 1);
    }
  }
  return spec;
}

std::unique_ptr<Backend> make_backend(const BackendFlags& f) {
  if (f.kind == "http") {
    BackendConfig cfg;
    cfg.kind = BackendConfig::Kind::Http;
    cfg.base_url = f.base_url;
    return from_config(cfg);
  }
  auto mock = std::make_unique<MockBackend>();
  if (!f.rules.empty()) {
    for (auto& r : load_mock_rules(f.rules)) mock->register_rule(std::move(r));
  }
  return mock;
}

Json layer_entries(const ChainState& state, const LayerId& layer) {
  Json a = Json::array();
  for (const auto& e : state.live(layer)) {
    a.push_back({{"id", e.id}, {"text", e.text}, {"lineage", e.lineage}});
  }
  return a;
}

void print_report(const ValidationReport& report, std::ostream& out) {
  for (const auto& v : report) {
    out << to_string(v.code) << ": " << v.message;
    if (!v.subjects.empty()) {
      out << " [";
      for (std::size_t i = 0; i < v.subjects.size(); ++i) out << (i ? ", " : "") << v.subjects[i];
      out << "]";
    }
    out << "\n";
  }
}

// Steps whose outputs `target` depends on, in execution order.
std::vector<StepId> upstream_of(const Chain& chain, const StepId& target) {
  std::set<StepId> needed;
  std::vector<StepId> work{target};
  while (!work.empty()) {
    const Step& s = chain.step(work.back());
    work.pop_back();
    auto layers = s.inputs;
    if (s.branch) layers.push_back(s.branch->guard_layer);
    for (const auto& l : layers) {
      const auto& producer = chain.layer(l).producer;
      if (producer && needed.insert(*producer).second) work.push_back(*producer);
    }
  }
  std::vector<StepId> out;
  for (const auto& id : topological_order(chain)) {
    if (needed.count(id)) out.push_back(id);
  }
  return out;
}

int cmd_validate(const SourceFlags& f, std::ostream& out) {
  try {
    load_source(f);
  } catch (const ValidationError& e) {
    print_report(e.report(), out);
    return 1;
  }
  out << "OK\n";
  return 0;
}

int cmd_run(const SourceFlags& sf, const BackendFlags& bf, const std::string& out_path,
            bool sequential, int threads, std::ostream& out, std::ostream& err) {
  const ChainSpec spec = load_source(sf);
  auto backend = make_backend(bf);
  ChainState state = seeded_state(spec);

  RunOptions opts;
  opts.policy = sequential ? ExecutionPolicy::Sequential : ExecutionPolicy::Parallel;
  opts.max_threads = threads;
  ChainRun run;
  std::string fatal;
  try {
    run = run_chain(spec.chain, state, *backend, RunMode::Full, opts);
  } catch (const Error& e) {
    fatal = e.what();
  }

  if (!out_path.empty()) {
    // Each invocation writes a fresh transcript.
    std::ofstream(out_path, std::ios::trunc);
    for (const auto& rec : state.history) append_transcript(out_path, spec.chain.id, rec);
  }

  for (const auto& rec : state.history) {
    if (rec.status == BlockStatus::Failed) {
      err << "block " << rec.plan.step_id << "#" << rec.plan.index << " failed: " << rec.error << "\n";
    }
    for (const auto& w : rec.warnings) {
      err << "block " << rec.plan.step_id << "#" << rec.plan.index << ": " << w << "\n";
    }
  }
  for (const auto& [sid, why] : run.blocked) err << "step " << sid << " blocked: " << why << "\n";
  if (!fatal.empty()) err << "error: " << fatal << "\n";

  Json leaves = Json::object();
  for (const auto& l : spec.chain.leaf_layers()) leaves[l] = layer_entries(state, l);
  Json j = {{"chain", spec.chain.id},
            {"leaves", leaves},
            {"executed", run.executed()},
            {"failed", run.failed()}};
  out << j.dump(2) << "\n";
  return (fatal.empty() && run.failed() == 0 && run.blocked.empty()) ? 0 : 1;
}

int cmd_render(const SourceFlags& sf, const BackendFlags& bf,
               const std::string& step_id, std::size_t block, bool as_json, std::ostream& out) {
  const ChainSpec spec = load_source(sf);
  const Chain& chain = spec.chain;
  if (chain.find_step(step_id) == nullptr) throw UnknownStep(step_id);
  ChainState state = seeded_state(spec);

  // With a backend, upstream steps really run; otherwise their outputs are
  // stood in by "{layer name}" placeholders.
  const bool execute = !bf.rules.empty() || bf.kind == "http";
  std::unique_ptr<Backend> backend;
  if (execute) backend = make_backend(bf);
  RunOptions opts;
  opts.policy = ExecutionPolicy::Sequential;
  for (const auto& sid : upstream_of(chain, step_id)) {
    const Step& s = chain.step(sid);
    if (execute) {
      run_step(chain, state, sid, *backend, opts);
      continue;
    }
    if (!state.live(s.output).empty()) continue;
    std::vector<EntryId> lineage;
    if (!s.inputs.empty()) {
      auto in = state.live(s.inputs.front());
      if (!in.empty()) lineage = in.front().path();
    }
    add_entry(state, chain, s.output, "{" + chain.layer(s.output).name + "}", lineage);
  }

  const auto plans = plan_step(chain, state, step_id);
  if (block >= plans.size()) {
    throw Error("step '" + step_id + "' has " + std::to_string(plans.size()) + " block(s); no block " +
                std::to_string(block));
  }
  const auto& req = plans[block].preview;
  if (as_json) {
    out << to_json(req).dump(2) << "\n";
  } else {
    out << req.prompt << "\n";
  }
  return 0;
}

int cmd_analyze(const std::string& path, bool intervals, std::ostream& out) {
  const auto events = load_event_log(path);
  auto classified = classify_session(events);
  const auto runs = static_cast<std::size_t>(std::count_if(
      events.begin(), events.end(), [](const EditEvent& e) { return e.kind == EventKind::Run; }));
  Json j = to_json(stats(classified, runs));
  if (intervals) j["intervals"] = to_json(classified);
  out << j.dump(2) << "\n";
  return 0;
}

Service* g_service = nullptr;

void on_signal(int) {
  if (g_service) g_service->stop();
}

int cmd_serve(const BackendFlags& bf, const std::string& host, int port,
              const std::string& transcript, bool sequential, int threads, std::ostream& out,
              std::ostream& err) {
  std::shared_ptr<const Backend> backend = make_backend(bf);
  ServiceOptions opts;
  opts.policy = sequential ? ExecutionPolicy::Sequential : ExecutionPolicy::Parallel;
  opts.max_threads = threads;
  opts.transcript_path = transcript;
  Service service(backend, opts);
  g_service = &service;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  out << "listening on http://" << host << ":" << port << "\n" << std::flush;
  const bool ok = service.listen(host, port);
  g_service = nullptr;
  if (!ok) {
    err << "error: cannot listen on " << host << ":" << port << "\n";
    return 1;
  }
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"promptloom: build, run and inspect LLM prompt chains", "promptloom"};
  app.require_subcommand(1);

  SourceFlags src;
  BackendFlags be;
  std::string out_path, step_id, log_path, transcript, host = "127.0.0.1";
  std::size_t block = 0;
  int port = 8080, threads = 0;
  bool sequential = false, as_json = false, intervals = false;

  auto* validate = app.add_subcommand("validate", "Check a chain spec and print its violations");
  add_source(validate, src);

  auto* run = app.add_subcommand("run", "Execute every step of a chain");
  add_source(run, src);
  add_backend(run, be);
  run->add_option("--out", out_path, "Transcript file (JSON lines)");
  run->add_flag("--sequential", sequential, "Run blocks one at a time");
  run->add_option("--threads", threads, "Worker threads per step (0: OpenMP default)")->check(CLI::Range(0, 256));

  auto* render = app.add_subcommand("render", "Print the prompt of one block without running it");
  add_source(render, src);
  add_backend(render, be);
  render->add_option("--step", step_id, "Step id")->required();
  render->add_option("--block", block, "Block index")->default_val(0);
  render->add_flag("--json", as_json, "Print the whole request as JSON");

  auto* serve = app.add_subcommand("serve", "Serve the HTTP API");
  add_backend(serve, be);
  serve->add_option("--port", port, "TCP port")->default_val(8080)->check(CLI::Range(0, 65535));
  serve->add_option("--host", host, "Bind address")->default_val("127.0.0.1");
  serve->add_option("--transcript", transcript, "Append run records to this file");
  serve->add_flag("--sequential", sequential, "Run blocks one at a time");
  serve->add_option("--threads", threads, "Worker threads per step (0: OpenMP default)")->check(CLI::Range(0, 256));

  auto* analyze = app.add_subcommand("analyze-log", "Classify an interaction log and print statistics");
  analyze->add_option("log", log_path, "Event log (JSON lines)")->required();
  analyze->add_flag("--intervals", intervals, "Include per-interval categories");

  auto* list = app.add_subcommand("builtin-list", "List builtin chains");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (validate->parsed()) return cmd_validate(src, out);
    if (run->parsed()) return cmd_run(src, be, out_path, sequential, threads, out, err);
    if (render->parsed()) return cmd_render(src, be, step_id, block, as_json, out);
    if (serve->parsed()) return cmd_serve(be, host, port, transcript, sequential, threads, out, err);
    if (analyze->parsed()) return cmd_analyze(log_path, intervals, out);
    if (list->parsed()) {
      for (const auto& n : builtin_names()) out << n << "\n";
      return 0;
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    print_report(e.report(), err);
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace promptloom
