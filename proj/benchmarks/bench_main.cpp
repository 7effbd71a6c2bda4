#include <benchmark/benchmark.h>

#include <random>
#include <string>
#include <vector>

#include "policyprobe/budget.hpp"
#include "policyprobe/corpus.hpp"
#include "policyprobe/evaluation.hpp"
#include "policyprobe/parsing.hpp"
#include "policyprobe/prompting.hpp"
#include "policyprobe/rate_limiter.hpp"
#include "policyprobe/rng.hpp"
#include "policyprobe/sha256.hpp"

using namespace policyprobe;

namespace {

LabelTaxonomy taxonomy_of(std::size_t count) {
    std::vector<TaxonomyLabel> labels;
    for (std::size_t i = 0; i < count; ++i) {
        const std::string n = std::to_string(i);
        labels.push_back({"l" + n, "Label " + n,
                          "Information of kind " + n + " collected from the user."});
    }
    return LabelTaxonomy(std::move(labels));
}

PolicyDocument synthetic_policy(std::size_t paragraphs, std::size_t chars_per_paragraph) {
    std::vector<std::string> texts;
    texts.reserve(paragraphs);
    for (std::size_t i = 0; i < paragraphs; ++i) {
        std::string text;
        while (text.size() < chars_per_paragraph)
            text += "This service collects information to operate its features. ";
        text.resize(chars_per_paragraph);
        texts.push_back(std::move(text));
    }
    return make_policy_document_from_paragraphs("bench", "bench", std::move(texts));
}

void score_random(benchmark::State& state) {
    const auto policies = static_cast<std::size_t>(state.range(0));
    const auto labels = static_cast<std::size_t>(state.range(1));
    const LabelTaxonomy taxonomy = taxonomy_of(labels);

    std::mt19937_64 rng(1);
    AnnotationSet truth;
    std::map<std::string, PracticeVector> predictions;
    for (std::size_t p = 0; p < policies; ++p) {
        const std::string id = "p" + std::to_string(p);
        PracticeVector vector;
        for (const auto& label : taxonomy.labels()) {
            if (bounded_uint(rng, 2) == 0) truth.set_policy_level(id, label.label_id, true);
            vector.answers[label.label_id] = static_cast<Answer>(bounded_uint(rng, 3));
        }
        predictions[id] = std::move(vector);
    }

    for (auto _ : state) {
        benchmark::DoNotOptimize(score(predictions, truth, taxonomy));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<long>(policies * labels));
}
BENCHMARK(score_random)->Args({8, 10})->Args({64, 18})->Args({256, 20});

void chunk_large_policy(benchmark::State& state) {
    const PolicyDocument policy =
        synthetic_policy(static_cast<std::size_t>(state.range(0)), 2000);
    const TokenCounter counter = TokenCounter::heuristic();
    const ChunkBudget budget{4096, 350, 512};

    for (auto _ : state) {
        benchmark::DoNotOptimize(chunk_policy(policy, budget, counter));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(chunk_large_policy)->Arg(16)->Arg(128)->Arg(512);

void parse_constrained_output(benchmark::State& state) {
    const LabelTaxonomy taxonomy = taxonomy_of(static_cast<std::size_t>(state.range(0)));
    PracticeVector vector;
    std::mt19937_64 rng(2);
    for (const auto& label : taxonomy.labels())
        vector.answers[label.label_id] = bounded_uint(rng, 2) == 0 ? Answer::yes : Answer::no;
    const std::string response =
        "Some preamble the model added.\n" + render_practice_vector(vector, taxonomy) +
        "\nA trailing remark.";

    for (auto _ : state) {
        benchmark::DoNotOptimize(parse_practice_vector(response, taxonomy));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(parse_constrained_output)->Arg(10)->Arg(50);

void build_final_prompt(benchmark::State& state) {
    const LabelTaxonomy taxonomy = taxonomy_of(10);
    const PolicyDocument policy = synthetic_policy(12, 1500);
    PromptVariant variant = final_variant();
    variant.shots = 0;

    for (auto _ : state) {
        benchmark::DoNotOptimize(
            build_prompt(policy.full_text, taxonomy, variant, {}, {"bench", std::nullopt, {}}));
    }
}
BENCHMARK(build_final_prompt);

void limiter_acquire(benchmark::State& state) {
    auto clock = std::make_shared<SimulatedClock>();
    RateLimiter limiter(1'000'000'000, clock);
    std::mt19937_64 rng(3);

    for (auto _ : state) {
        limiter.acquire(1 + static_cast<long long>(bounded_uint(rng, 5000)));
        clock->advance(std::chrono::milliseconds(10));
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(limiter_acquire);

void content_hash(benchmark::State& state) {
    const std::string body(static_cast<std::size_t>(state.range(0)), 'x');
    for (auto _ : state) {
        benchmark::DoNotOptimize(sha256_hex(body));
    }
    state.SetBytesProcessed(state.iterations() * state.range(0));
}
BENCHMARK(content_hash)->Arg(1024)->Arg(65536);

}  // namespace

BENCHMARK_MAIN();
