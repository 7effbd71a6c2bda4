#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "policyprobe/corpus.hpp"

namespace policyprobe {

enum class DataBoundary { none, sentence, sentence_with_quotes };
enum class DataPlacement { top, bottom };
enum class TaskStyle { enumerated, augmented_with_definitions };
enum class MessageSplit { single, data_then_task };
enum class Segmentation { whole_policy, per_paragraph, per_label, per_paragraph_and_label };

std::string_view to_string(DataBoundary value);
std::string_view to_string(DataPlacement value);
std::string_view to_string(TaskStyle value);
std::string_view to_string(MessageSplit value);
std::string_view to_string(Segmentation value);

DataBoundary data_boundary_from_string(std::string_view name);
DataPlacement data_placement_from_string(std::string_view name);
TaskStyle task_style_from_string(std::string_view name);
MessageSplit message_split_from_string(std::string_view name);
Segmentation segmentation_from_string(std::string_view name);

// One point in the prompt-design space. Presets cover the catalog's named
// configurations; split testing walks this space by patching fields.
struct PromptVariant {
    DataBoundary data_boundary = DataBoundary::none;
    DataPlacement data_placement = DataPlacement::top;
    TaskStyle task_style = TaskStyle::enumerated;
    MessageSplit message_split = MessageSplit::single;
    bool pruning = false;
    Segmentation segmentation = Segmentation::whole_policy;
    int shots = 0;  // 0..3
    std::optional<std::string> system_instruction;

    bool operator==(const PromptVariant&) const = default;
};

PromptVariant baseline_variant();
PromptVariant final_variant();
// The final design adapted to Llama-class chat models: no few-shot block and
// one (paragraph, label) pair per request.
PromptVariant llama_variant();
// Presets by name: "baseline", "final", "llama".
std::optional<PromptVariant> variant_preset(std::string_view name);

// Partial edit of a PromptVariant; `base_preset` (when set) resets to that
// preset before the field overrides apply.
struct VariantPatch {
    std::optional<std::string> base_preset;
    std::optional<DataBoundary> data_boundary;
    std::optional<DataPlacement> data_placement;
    std::optional<TaskStyle> task_style;
    std::optional<MessageSplit> message_split;
    std::optional<bool> pruning;
    std::optional<Segmentation> segmentation;
    std::optional<int> shots;
    std::optional<std::string> system_instruction;

    PromptVariant apply(const PromptVariant& incumbent) const;
};

struct FewShotExample {
    std::string paragraph;
    std::vector<std::pair<std::string, bool>> expected;  // (label_id, disclosed)
    // provenance, so shots are never drawn from the policy under analysis
    std::string source_policy_id;
    std::size_t source_paragraph_index = 0;
};

enum class Role { system, user, assistant_example };

std::string_view to_string(Role role);

struct Message {
    Role role = Role::user;
    std::string content;

    bool operator==(const Message&) const = default;
};

struct PlanTarget {
    std::string policy_id;
    std::optional<std::size_t> paragraph_index;
    std::vector<std::string> queried_label_ids;

    bool operator==(const PlanTarget&) const = default;
};

struct PromptPlan {
    std::vector<Message> messages;  // at least one user message
    PlanTarget target;

    bool operator==(const PromptPlan&) const = default;
};

// Prompt wording lives in editable templates so experiments can vary it
// without code changes. Placeholders use {{name}} syntax; unknown template
// names fall back to the built-in defaults.
class PromptTemplates {
public:
    static const PromptTemplates& defaults();
    // Overrides individual templates from <name>.txt files in a directory.
    static PromptTemplates load_directory(const std::filesystem::path& directory);

    const std::string& get(const std::string& name) const;
    void set(const std::string& name, std::string text);
    std::vector<std::string> names() const;

    std::string render(const std::string& name,
                       const std::map<std::string, std::string>& values) const;

private:
    std::map<std::string, std::string> templates_;
};

// Assembles the role-tagged message sequence for one (policy-or-chunk,
// queried-labels) request under the given variant. `shots` length must equal
// variant.shots; shot expected outputs must cover every queried label.
PromptPlan build_prompt(std::string_view policy_or_chunk_text, const LabelTaxonomy& queried,
                        const PromptVariant& variant, std::span<const FewShotExample> shots,
                        PlanTarget target,
                        const PromptTemplates& templates = PromptTemplates::defaults());

// Preliminary pass that asks for the indices of paragraphs mentioning
// collection or sharing of personal data, one index per line.
PromptPlan build_pruning_prompt(const PolicyDocument& policy,
                                const PromptTemplates& templates = PromptTemplates::defaults());

// Parses a pruning response into the sorted set of in-range paragraph
// indices; junk lines and out-of-range indices are ignored.
std::vector<std::size_t> parse_pruning_response(std::string_view response_text,
                                                std::size_t paragraph_count);

// Document containing only the kept paragraphs (re-indexed from 0).
PolicyDocument apply_pruning(const PolicyDocument& policy, const std::vector<std::size_t>& kept);

// Seeded sample of k annotated paragraphs to serve as worked examples.
// Only paragraphs with at least one positive segment label qualify; an
// all-negative example would teach nothing but the format. Pass the
// experimental split's policies only. `exclude_policy_id` guards against
// drawing a shot from the policy currently under analysis.
std::vector<FewShotExample> select_shots(const AnnotationSet& annotations,
                                         const std::vector<PolicyDocument>& policies,
                                         const LabelTaxonomy& taxonomy, int k, std::uint64_t seed,
                                         std::string_view exclude_policy_id = {});

}  // namespace policyprobe
