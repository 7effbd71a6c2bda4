#include "policyprobe/prompting.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "policyprobe/errors.hpp"
#include "policyprobe/rng.hpp"

namespace policyprobe {

namespace {

template <typename Enum>
[[noreturn]] void throw_unknown(std::string_view kind, std::string_view name) {
    throw ConfigError("unknown " + std::string(kind) + " '" + std::string(name) + "'");
}

}  // namespace

std::string_view to_string(DataBoundary value) {
    switch (value) {
        case DataBoundary::none: return "none";
        case DataBoundary::sentence: return "sentence";
        case DataBoundary::sentence_with_quotes: return "sentence_with_quotes";
    }
    return "none";
}

std::string_view to_string(DataPlacement value) {
    return value == DataPlacement::top ? "top" : "bottom";
}

std::string_view to_string(TaskStyle value) {
    return value == TaskStyle::enumerated ? "enumerated" : "augmented_with_definitions";
}

std::string_view to_string(MessageSplit value) {
    return value == MessageSplit::single ? "single" : "data_then_task";
}

std::string_view to_string(Segmentation value) {
    switch (value) {
        case Segmentation::whole_policy: return "whole_policy";
        case Segmentation::per_paragraph: return "per_paragraph";
        case Segmentation::per_label: return "per_label";
        case Segmentation::per_paragraph_and_label: return "per_paragraph_and_label";
    }
    return "whole_policy";
}

std::string_view to_string(Role role) {
    switch (role) {
        case Role::system: return "system";
        case Role::user: return "user";
        case Role::assistant_example: return "assistant";
    }
    return "user";
}

DataBoundary data_boundary_from_string(std::string_view name) {
    if (name == "none") return DataBoundary::none;
    if (name == "sentence") return DataBoundary::sentence;
    if (name == "sentence_with_quotes") return DataBoundary::sentence_with_quotes;
    throw_unknown<DataBoundary>("data_boundary", name);
}

DataPlacement data_placement_from_string(std::string_view name) {
    if (name == "top") return DataPlacement::top;
    if (name == "bottom") return DataPlacement::bottom;
    throw_unknown<DataPlacement>("data_placement", name);
}

TaskStyle task_style_from_string(std::string_view name) {
    if (name == "enumerated") return TaskStyle::enumerated;
    if (name == "augmented_with_definitions") return TaskStyle::augmented_with_definitions;
    throw_unknown<TaskStyle>("task_style", name);
}

MessageSplit message_split_from_string(std::string_view name) {
    if (name == "single") return MessageSplit::single;
    if (name == "data_then_task") return MessageSplit::data_then_task;
    throw_unknown<MessageSplit>("message_split", name);
}

Segmentation segmentation_from_string(std::string_view name) {
    if (name == "whole_policy") return Segmentation::whole_policy;
    if (name == "per_paragraph") return Segmentation::per_paragraph;
    if (name == "per_label") return Segmentation::per_label;
    if (name == "per_paragraph_and_label") return Segmentation::per_paragraph_and_label;
    throw_unknown<Segmentation>("segmentation", name);
}

PromptVariant baseline_variant() {
    return PromptVariant{};
}

PromptVariant final_variant() {
    PromptVariant variant;
    variant.data_boundary = DataBoundary::sentence_with_quotes;
    variant.data_placement = DataPlacement::top;
    variant.task_style = TaskStyle::augmented_with_definitions;
    variant.message_split = MessageSplit::data_then_task;
    variant.pruning = false;
    variant.segmentation = Segmentation::whole_policy;
    variant.shots = 2;
    return variant;
}

PromptVariant llama_variant() {
    PromptVariant variant = final_variant();
    variant.shots = 0;
    variant.segmentation = Segmentation::per_paragraph_and_label;
    return variant;
}

std::optional<PromptVariant> variant_preset(std::string_view name) {
    if (name == "baseline") return baseline_variant();
    if (name == "final") return final_variant();
    if (name == "llama") return llama_variant();
    return std::nullopt;
}

PromptVariant VariantPatch::apply(const PromptVariant& incumbent) const {
    PromptVariant variant = incumbent;
    if (base_preset) {
        const auto preset = variant_preset(*base_preset);
        if (!preset) throw ConfigError("unknown variant preset '" + *base_preset + "'");
        variant = *preset;
    }
    if (data_boundary) variant.data_boundary = *data_boundary;
    if (data_placement) variant.data_placement = *data_placement;
    if (task_style) variant.task_style = *task_style;
    if (message_split) variant.message_split = *message_split;
    if (pruning) variant.pruning = *pruning;
    if (segmentation) variant.segmentation = *segmentation;
    if (shots) variant.shots = *shots;
    if (system_instruction) {
        if (system_instruction->empty())
            variant.system_instruction.reset();
        else
            variant.system_instruction = *system_instruction;
    }
    return variant;
}

namespace {

std::map<std::string, std::string> default_templates() {
    return {
        {"data_none", "{{policy}}"},
        {"data_sentence", "The following text is a privacy policy.\n\n{{policy}}"},
        {"data_quoted",
         "The following text, enclosed in double quotes, is a privacy policy.\n\n\"{{policy}}\""},
        {"task_enumerated",
         "Determine whether the privacy policy declares the collection or sharing of each of the "
         "following types of personal data:\n{{labels}}"},
        {"task_augmented",
         "Determine whether the privacy policy declares the collection or sharing of each of the "
         "following types of personal data. Apply the definition given for each data type:\n"
         "{{definitions}}"},
        {"output_instruction",
         "Respond with exactly one line per data type, in the format \"Data: Answer\", where "
         "Answer is either Yes or No:\n{{format_lines}}"},
        {"shots_header",
         "Here are examples of privacy policy paragraphs and the expected output:"},
        {"shot", "Example {{shot_number}}:\nParagraph: \"{{shot_input}}\"\nOutput:\n{{shot_output}}"},
        {"closing", "Now provide the output for the privacy policy."},
        {"pruning",
         "The following is a privacy policy, split into paragraphs numbered from 0. Identify the "
         "paragraphs that mention the collection or sharing of personal data. Respond with the "
         "indices of those paragraphs, one index per line, and nothing else.\n\n"
         "{{indexed_paragraphs}}"},
    };
}

}  // namespace

const PromptTemplates& PromptTemplates::defaults() {
    static const PromptTemplates instance = [] {
        PromptTemplates templates;
        templates.templates_ = default_templates();
        return templates;
    }();
    return instance;
}

PromptTemplates PromptTemplates::load_directory(const std::filesystem::path& directory) {
    PromptTemplates templates = defaults();
    if (!std::filesystem::is_directory(directory))
        throw ConfigError("template directory does not exist: " + directory.string());
    for (auto& [name, text] : templates.templates_) {
        const auto file = directory / (name + ".txt");
        if (!std::filesystem::exists(file)) continue;
        std::ifstream in(file, std::ios::binary);
        if (!in) throw ConfigError("cannot read template " + file.string());
        std::ostringstream buffer;
        buffer << in.rdbuf();
        text = buffer.str();
        // editors add a trailing newline; the templates are joined with blank
        // lines anyway, so strip it
        while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
    }
    return templates;
}

const std::string& PromptTemplates::get(const std::string& name) const {
    const auto it = templates_.find(name);
    if (it == templates_.end()) {
        const auto& fallback = defaults().templates_;
        const auto fit = fallback.find(name);
        if (fit == fallback.end()) throw ConfigError("unknown prompt template '" + name + "'");
        return fit->second;
    }
    return it->second;
}

void PromptTemplates::set(const std::string& name, std::string text) {
    templates_[name] = std::move(text);
}

std::vector<std::string> PromptTemplates::names() const {
    std::vector<std::string> out;
    for (const auto& [name, text] : templates_) out.push_back(name);
    return out;
}

std::string PromptTemplates::render(const std::string& name,
                                    const std::map<std::string, std::string>& values) const {
    std::string out = get(name);
    for (const auto& [key, value] : values) {
        const std::string placeholder = "{{" + key + "}}";
        std::size_t pos = 0;
        while ((pos = out.find(placeholder, pos)) != std::string::npos) {
            out.replace(pos, placeholder.size(), value);
            pos += value.size();
        }
    }
    return out;
}

namespace {

std::string data_template_name(DataBoundary boundary) {
    switch (boundary) {
        case DataBoundary::none: return "data_none";
        case DataBoundary::sentence: return "data_sentence";
        case DataBoundary::sentence_with_quotes: return "data_quoted";
    }
    return "data_none";
}

std::string join_blocks(const std::vector<std::string>& blocks) {
    std::string out;
    for (const auto& block : blocks) {
        if (block.empty()) continue;
        if (!out.empty()) out += "\n\n";
        out += block;
    }
    return out;
}

std::string render_shot_output(const FewShotExample& shot, const LabelTaxonomy& queried) {
    std::map<std::string, bool> expected(shot.expected.begin(), shot.expected.end());
    for (const auto& [label_id, disclosed] : expected) {
        if (!queried.contains(label_id))
            throw PromptError("shot example references label '" + label_id +
                              "' absent from the queried taxonomy");
    }
    std::string out;
    for (const auto& label : queried.labels()) {
        const auto it = expected.find(label.label_id);
        if (it == expected.end())
            throw PromptError("shot example lacks an answer for label '" + label.label_id + "'");
        if (!out.empty()) out.push_back('\n');
        out += label.display_name;
        out += ": ";
        out += it->second ? "Yes" : "No";
    }
    return out;
}

}  // namespace

PromptPlan build_prompt(std::string_view policy_or_chunk_text, const LabelTaxonomy& queried,
                        const PromptVariant& variant, std::span<const FewShotExample> shots,
                        PlanTarget target, const PromptTemplates& templates) {
    if (queried.empty()) throw PromptError("cannot build a prompt over an empty taxonomy");
    if (policy_or_chunk_text.empty()) throw PromptError("policy text is empty");
    if (variant.shots < 0 || variant.shots > 3)
        throw PromptError("shots must be between 0 and 3, got " + std::to_string(variant.shots));
    if (static_cast<int>(shots.size()) != variant.shots)
        throw PromptError("variant requests " + std::to_string(variant.shots) + " shots, got " +
                          std::to_string(shots.size()));
    if ((variant.segmentation == Segmentation::per_label ||
         variant.segmentation == Segmentation::per_paragraph_and_label) &&
        queried.size() != 1)
        throw PromptError("label-segmented variants take exactly one label per plan");

    std::string labels;
    std::string definitions;
    std::string format_lines;
    for (const auto& label : queried.labels()) {
        if (!labels.empty()) labels.push_back('\n');
        labels += "- " + label.display_name;
        if (!definitions.empty()) definitions.push_back('\n');
        definitions += "- " + label.display_name + ": " + label.definition;
        if (!format_lines.empty()) format_lines.push_back('\n');
        format_lines += label.display_name + ": <Yes|No>";
    }

    const std::string data_block = templates.render(
        data_template_name(variant.data_boundary), {{"policy", std::string(policy_or_chunk_text)}});
    const std::string task_block =
        variant.task_style == TaskStyle::enumerated
            ? templates.render("task_enumerated", {{"labels", labels}})
            : templates.render("task_augmented", {{"definitions", definitions}});
    const std::string output_block =
        templates.render("output_instruction", {{"format_lines", format_lines}});

    std::string shots_block;
    if (!shots.empty()) {
        std::vector<std::string> blocks{templates.get("shots_header")};
        for (std::size_t i = 0; i < shots.size(); ++i) {
            blocks.push_back(templates.render(
                "shot", {{"shot_number", std::to_string(i + 1)},
                         {"shot_input", shots[i].paragraph},
                         {"shot_output", render_shot_output(shots[i], queried)}}));
        }
        shots_block = join_blocks(blocks);
    }

    const bool want_closing = variant.message_split == MessageSplit::data_then_task || !shots.empty();
    const std::string closing_block = want_closing ? templates.get("closing") : std::string{};

    PromptPlan plan;
    if (variant.system_instruction && !variant.system_instruction->empty())
        plan.messages.push_back({Role::system, *variant.system_instruction});

    if (variant.message_split == MessageSplit::data_then_task) {
        // policy text appears only in the first user message
        plan.messages.push_back({Role::user, data_block});
        plan.messages.push_back(
            {Role::user, join_blocks({task_block, output_block, shots_block, closing_block})});
    } else if (variant.data_placement == DataPlacement::top) {
        plan.messages.push_back(
            {Role::user, join_blocks({data_block, task_block, output_block, shots_block, closing_block})});
    } else {
        // bottom placement: the policy is the last content block of its message
        plan.messages.push_back(
            {Role::user, join_blocks({task_block, output_block, shots_block, closing_block, data_block})});
    }

    target.queried_label_ids = queried.label_ids();
    plan.target = std::move(target);
    return plan;
}

PromptPlan build_pruning_prompt(const PolicyDocument& policy, const PromptTemplates& templates) {
    if (policy.paragraphs.empty())
        throw PromptError("pruning prompt needs at least one paragraph in policy '" +
                          policy.policy_id + "'");

    std::string indexed;
    for (const auto& paragraph : policy.paragraphs) {
        if (!indexed.empty()) indexed += "\n\n";
        indexed += std::to_string(paragraph.index) + ": " + paragraph.text;
    }

    PromptPlan plan;
    plan.messages.push_back(
        {Role::user, templates.render("pruning", {{"indexed_paragraphs", indexed}})});
    plan.target.policy_id = policy.policy_id;
    return plan;
}

std::vector<std::size_t> parse_pruning_response(std::string_view response_text,
                                                std::size_t paragraph_count) {
    std::set<std::size_t> kept;
    std::size_t pos = 0;
    while (pos <= response_text.size()) {
        const std::size_t nl = response_text.find('\n', pos);
        std::string_view line = response_text.substr(
            pos, (nl == std::string_view::npos ? response_text.size() : nl) - pos);
        pos = (nl == std::string_view::npos) ? response_text.size() + 1 : nl + 1;

        while (!line.empty() && (line.front() == ' ' || line.front() == '\t' || line.front() == '\r'))
            line.remove_prefix(1);
        while (!line.empty() && (line.back() == ' ' || line.back() == '\t' || line.back() == '\r'))
            line.remove_suffix(1);
        if (line.empty() || line.find_first_not_of("0123456789") != std::string_view::npos) continue;

        const std::size_t index = std::stoull(std::string(line));
        if (index < paragraph_count) kept.insert(index);
    }
    return {kept.begin(), kept.end()};
}

PolicyDocument apply_pruning(const PolicyDocument& policy, const std::vector<std::size_t>& kept) {
    std::vector<std::string> texts;
    for (const std::size_t index : kept) {
        if (index >= policy.paragraphs.size())
            throw PromptError("pruning kept out-of-range paragraph " + std::to_string(index));
        texts.push_back(policy.paragraphs[index].text);
    }
    return make_policy_document_from_paragraphs(policy.policy_id, policy.source_name,
                                                std::move(texts));
}

std::vector<FewShotExample> select_shots(const AnnotationSet& annotations,
                                         const std::vector<PolicyDocument>& policies,
                                         const LabelTaxonomy& taxonomy, int k, std::uint64_t seed,
                                         std::string_view exclude_policy_id) {
    if (k < 0 || k > 3) throw PromptError("shot count must be between 0 and 3");
    if (k == 0) return {};
    if (taxonomy.empty()) throw PromptError("cannot select shots over an empty taxonomy");

    // candidate paragraphs: at least one positive segment annotation
    std::vector<std::pair<std::string, std::size_t>> candidates;
    for (const auto& policy : policies) {
        if (policy.policy_id == exclude_policy_id) continue;
        for (const auto& paragraph : policy.paragraphs) {
            bool positive = false;
            for (const auto& label : taxonomy.labels()) {
                if (annotations.segment_truth(policy.policy_id, paragraph.index, label.label_id)) {
                    positive = true;
                    break;
                }
            }
            if (positive) candidates.emplace_back(policy.policy_id, paragraph.index);
        }
    }
    std::sort(candidates.begin(), candidates.end());

    if (candidates.size() < static_cast<std::size_t>(k))
        throw PromptError("insufficient annotated paragraphs for " + std::to_string(k) +
                          " shots: only " + std::to_string(candidates.size()) + " available");

    std::mt19937_64 rng(seed);
    deterministic_shuffle(candidates, rng);

    std::vector<FewShotExample> shots;
    for (int i = 0; i < k; ++i) {
        const auto& [policy_id, paragraph_index] = candidates[static_cast<std::size_t>(i)];
        const PolicyDocument* policy = nullptr;
        for (const auto& candidate : policies) {
            if (candidate.policy_id == policy_id) {
                policy = &candidate;
                break;
            }
        }
        FewShotExample shot;
        shot.paragraph = policy->paragraphs[paragraph_index].text;
        shot.source_policy_id = policy_id;
        shot.source_paragraph_index = paragraph_index;
        for (const auto& label : taxonomy.labels()) {
            shot.expected.emplace_back(
                label.label_id, annotations.segment_truth(policy_id, paragraph_index, label.label_id));
        }
        shots.push_back(std::move(shot));
    }
    return shots;
}

}  // namespace policyprobe
