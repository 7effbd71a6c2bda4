#include "policyprobe/finetune.hpp"

#include <fstream>

#include "json.hpp"

#include "policyprobe/errors.hpp"
#include "policyprobe/parsing.hpp"

namespace policyprobe {

using nlohmann::json;

std::string FineTuneExport::jsonl() const {
    std::string out;
    for (const auto& example : examples) {
        json messages = json::array();
        if (example.system) messages.push_back({{"role", "system"}, {"content", *example.system}});
        messages.push_back({{"role", "user"}, {"content", example.user}});
        messages.push_back({{"role", "assistant"}, {"content", example.assistant}});
        out += json{{"messages", std::move(messages)}}.dump();
        out += '\n';
    }
    return out;
}

PromptVariant finetune_training_variant(const PromptVariant& variant) {
    PromptVariant training = variant;
    training.shots = 0;
    training.message_split = MessageSplit::single;
    training.segmentation = Segmentation::whole_policy;
    training.pruning = false;
    return training;
}

FineTuneExport export_finetune(const std::vector<PolicyDocument>& policies,
                               const AnnotationSet& annotations, const LabelTaxonomy& taxonomy,
                               const ChunkBudget& budget, const TokenCounter& counter,
                               const PromptVariant& variant, const PromptTemplates& templates) {
    if (!annotations.has_segment_annotations())
        throw Error("fine-tune export needs segment-level annotations");
    if (taxonomy.empty()) throw Error("fine-tune export needs a taxonomy");

    const PromptVariant training_variant = finetune_training_variant(variant);

    FineTuneExport result;
    for (const auto& policy : policies) {
        for (const auto& chunk : chunk_policy(policy, budget, counter)) {
            // chunk truth = OR of its paragraphs' segment annotations
            PracticeVector truth;
            for (const auto& label : taxonomy.labels()) {
                bool disclosed = false;
                for (std::size_t p = chunk.first_paragraph; p <= chunk.last_paragraph; ++p) {
                    if (annotations.segment_truth(policy.policy_id, p, label.label_id)) {
                        disclosed = true;
                        break;
                    }
                }
                truth.answers[label.label_id] = disclosed ? Answer::yes : Answer::no;
            }

            const PromptPlan plan =
                build_prompt(chunk.text, taxonomy, training_variant, {},
                             {policy.policy_id, std::nullopt, {}}, templates);

            FineTuneExample example;
            for (const auto& message : plan.messages) {
                if (message.role == Role::system)
                    example.system = message.content;
                else
                    example.user = message.content;
            }
            example.assistant = render_practice_vector(truth, taxonomy);
            example.policy_id = policy.policy_id;
            example.first_paragraph = chunk.first_paragraph;
            example.last_paragraph = chunk.last_paragraph;

            if (counter.count(example.user) + budget.response_reserve > budget.context_limit)
                throw BudgetError("fine-tune example for policy '" + policy.policy_id +
                                  "' exceeds the context limit");
            result.examples.push_back(std::move(example));
        }
    }
    return result;
}

void write_finetune_file(const std::filesystem::path& file, const FineTuneExport& data) {
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write training file " + file.string());
    out << data.jsonl();
}

}  // namespace policyprobe
