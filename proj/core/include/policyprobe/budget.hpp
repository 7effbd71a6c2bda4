#pragma once

#include <functional>
#include <string_view>
#include <vector>

#include "policyprobe/corpus.hpp"

namespace policyprobe {

// Deterministic token counting. The default heuristic, ceil(bytes /
// chars_per_token), keeps the core free of tokenizer dependencies; an exact
// provider tokenizer can be plugged in without touching callers.
class TokenCounter {
public:
    using CountFn = std::function<long long(std::string_view)>;

    static TokenCounter heuristic(double chars_per_token = 4.0);
    static TokenCounter plugin(CountFn count_fn);

    long long count(std::string_view text) const;

    bool is_heuristic() const { return !plugin_; }
    double chars_per_token() const { return chars_per_token_; }

private:
    TokenCounter() = default;

    double chars_per_token_ = 4.0;
    CountFn plugin_;
};

// Token budget for one request: chunk text + prompt overhead + reserved
// response space must fit the model's context window.
struct ChunkBudget {
    long long context_limit = 0;
    long long prompt_overhead = 0;     // tokens of the prompt surrounding the text
    long long response_reserve = 512;  // output allowance; the constrained output is
                                       // short but must never be truncated

    long long per_chunk_budget() const {
        return context_limit - prompt_overhead - response_reserve;
    }
};

struct PolicyChunk {
    std::size_t first_paragraph = 0;
    std::size_t last_paragraph = 0;  // inclusive
    std::string text;                // paragraphs joined with kParagraphDelimiter

    bool operator==(const PolicyChunk&) const = default;
};

// Greedy packing of consecutive paragraphs: each chunk takes as many
// paragraphs as fit the per-chunk budget. Chunks cover all paragraphs exactly
// once, in order. Throws BudgetError on a non-positive budget or when a
// single paragraph exceeds it (reporting the paragraph index).
std::vector<PolicyChunk> chunk_policy(const PolicyDocument& policy, const ChunkBudget& budget,
                                      const TokenCounter& counter);

}  // namespace policyprobe
