#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "policyprobe/budget.hpp"
#include "policyprobe/corpus.hpp"
#include "policyprobe/prompting.hpp"

namespace policyprobe {

// One chat-format training example: the analysis prompt around a chunk, and
// the chunk's ground-truth practice vector in the output grammar.
struct FineTuneExample {
    std::optional<std::string> system;
    std::string user;
    std::string assistant;
    std::string policy_id;
    std::size_t first_paragraph = 0;
    std::size_t last_paragraph = 0;
};

struct FineTuneExport {
    std::vector<FineTuneExample> examples;

    // one {"messages": [...]} object per line, UTF-8, LF-terminated
    std::string jsonl() const;
};

// The analysis variant collapsed for training: a single user message, no
// shots, no pruning (training examples carry their own answers).
PromptVariant finetune_training_variant(const PromptVariant& variant);

// Emits one example per chunk of every policy. The assistant target is the
// OR of the chunk's paragraph-level annotations rendered in output grammar,
// so it always re-parses to the source truth. The prompt reuses the analysis
// template via finetune_training_variant. Requires segment-level annotations.
FineTuneExport export_finetune(const std::vector<PolicyDocument>& policies,
                               const AnnotationSet& annotations, const LabelTaxonomy& taxonomy,
                               const ChunkBudget& budget, const TokenCounter& counter,
                               const PromptVariant& variant,
                               const PromptTemplates& templates = PromptTemplates::defaults());

void write_finetune_file(const std::filesystem::path& file, const FineTuneExport& data);

}  // namespace policyprobe
