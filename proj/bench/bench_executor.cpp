// Sequential vs parallel block execution over the flashcards chain with a
// mock that sleeps before answering, so the numbers reflect request overlap.

#include <benchmark/benchmark.h>

#include <chrono>
#include <memory>
#include <string>
#include <thread>

#include "promptloom/backend.hpp"
#include "promptloom/executor.hpp"
#include "promptloom/library.hpp"

using namespace promptloom;

namespace {

class SlowBackend final : public Backend {
 public:
  SlowBackend(std::shared_ptr<Backend> inner, std::chrono::microseconds delay)
      : inner_(std::move(inner)), delay_(delay) {}
  RawCompletion complete(const PromptRequest& r) const override {
    std::this_thread::sleep_for(delay_);
    return inner_->complete(r);
  }

 private:
  std::shared_ptr<Backend> inner_;
  std::chrono::microseconds delay_;
};

// width types, each with width English sentences: width^2 translate blocks.
std::shared_ptr<MockBackend> fan_out_mock(int width) {
  auto m = std::make_shared<MockBackend>();
  std::string types;
  for (int i = 0; i < width; ++i) {
    types += std::to_string(i + 1) + ". kind" + std::to_string(i) + "\n";
    std::string sentences;
    for (int j = 0; j < width; ++j) sentences += std::to_string(j + 1) + ". sentence " + std::to_string(j) + "\n";
    m->register_rule({ContainsSubstring{"types of interactions: kind" + std::to_string(i) + "\nEnglish:"}, sentences});
  }
  m->register_rule({ContainsSubstring{"list of types of interactions"}, types});
  m->register_rule({RegexMatch{"French:$"}, " Bonjour !", 10});
  return m;
}

void run_flashcards(benchmark::State& state, ExecutionPolicy policy, int threads) {
  const int width = static_cast<int>(state.range(0));
  const auto delay = std::chrono::microseconds(state.range(1));
  const auto spec = builtin("flashcards");
  SlowBackend backend(fan_out_mock(width), delay);
  RunOptions o;
  o.policy = policy;
  o.max_threads = threads;
  o.clock = [] { return std::int64_t{0}; };
  std::size_t blocks = 0;
  for (auto _ : state) {
    ChainState st = seeded_state(spec);
    const auto r = run_chain(spec.chain, st, backend, RunMode::Full, o);
    blocks += r.executed();
    benchmark::DoNotOptimize(st);
  }
  state.counters["blocks/s"] = benchmark::Counter(static_cast<double>(blocks), benchmark::Counter::kIsRate);
}

void BM_Sequential(benchmark::State& s) { run_flashcards(s, ExecutionPolicy::Sequential, 0); }
// Requests wait on the backend, so threads pay off beyond the core count.
void BM_Parallel(benchmark::State& s) { run_flashcards(s, ExecutionPolicy::Parallel, 8); }

// Args: fan-out width, backend latency in microseconds.
#define PROMPTLOOM_ARGS ->Args({2, 0})->Args({4, 0})->Args({4, 2000})->Args({8, 2000})->UseRealTime()
BENCHMARK(BM_Sequential) PROMPTLOOM_ARGS;
BENCHMARK(BM_Parallel) PROMPTLOOM_ARGS;

}  // namespace

BENCHMARK_MAIN();
