#include "policyprobe/budget.hpp"

#include <cmath>
#include <utility>

#include "policyprobe/errors.hpp"

namespace policyprobe {

TokenCounter TokenCounter::heuristic(double chars_per_token) {
    if (!(chars_per_token > 0.0)) throw BudgetError("chars_per_token must be positive");
    TokenCounter counter;
    counter.chars_per_token_ = chars_per_token;
    return counter;
}

TokenCounter TokenCounter::plugin(CountFn count_fn) {
    if (!count_fn) throw BudgetError("token counter plugin must be callable");
    TokenCounter counter;
    counter.plugin_ = std::move(count_fn);
    return counter;
}

long long TokenCounter::count(std::string_view text) const {
    if (text.empty()) return 0;
    if (plugin_) return plugin_(text);
    return static_cast<long long>(
        std::ceil(static_cast<double>(text.size()) / chars_per_token_));
}

std::vector<PolicyChunk> chunk_policy(const PolicyDocument& policy, const ChunkBudget& budget,
                                      const TokenCounter& counter) {
    const long long chunk_budget = budget.per_chunk_budget();
    if (chunk_budget <= 0)
        throw BudgetError("non-positive chunk budget: context " + std::to_string(budget.context_limit) +
                          " - overhead " + std::to_string(budget.prompt_overhead) + " - reserve " +
                          std::to_string(budget.response_reserve));

    std::vector<PolicyChunk> chunks;
    PolicyChunk current;
    bool open = false;

    for (const auto& paragraph : policy.paragraphs) {
        if (counter.count(paragraph.text) > chunk_budget)
            throw BudgetError("paragraph " + std::to_string(paragraph.index) + " of policy '" +
                              policy.policy_id + "' exceeds the chunk budget of " +
                              std::to_string(chunk_budget) + " tokens");

        if (open) {
            std::string candidate = current.text;
            candidate += kParagraphDelimiter;
            candidate += paragraph.text;
            if (counter.count(candidate) <= chunk_budget) {
                current.text = std::move(candidate);
                current.last_paragraph = paragraph.index;
                continue;
            }
            chunks.push_back(std::move(current));
        }
        current = PolicyChunk{paragraph.index, paragraph.index, paragraph.text};
        open = true;
    }
    if (open) chunks.push_back(std::move(current));
    return chunks;
}

}  // namespace policyprobe
