#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "policyprobe/budget.hpp"
#include "policyprobe/corpus.hpp"
#include "policyprobe/parsing.hpp"
#include "policyprobe/prompting.hpp"
#include "policyprobe/provider.hpp"

namespace policyprobe {

struct ConfusionCounts {
    long long tp = 0;
    long long fp = 0;
    long long fn = 0;
    long long tn = 0;

    long long total() const { return tp + fp + fn + tn; }

    bool operator==(const ConfusionCounts&) const = default;
};

struct LabelMetrics {
    ConfusionCounts counts;
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    bool undefined_precision = false;
    bool undefined_recall = false;
    bool undefined_f1 = false;
};

// Micro-averaged confusion counts over all (policy, label) pairs, plus a
// per-label breakdown and macro averages. Zero-denominator metrics are 0
// with the corresponding undefined flag set.
struct MetricsReport {
    ConfusionCounts counts;
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    bool undefined_precision = false;
    bool undefined_recall = false;
    bool undefined_f1 = false;

    // fraction of (policy, label) pairs the model actually answered;
    // unanswered pairs score as negative predictions but are surfaced here
    double coverage = 0.0;

    std::map<std::string, LabelMetrics> per_label;
    double macro_precision = 0.0;
    double macro_recall = 0.0;
    double macro_f1 = 0.0;
};

// Derives accuracy/precision/recall/F1 from raw counts (shared by the
// aggregate and per-label paths).
LabelMetrics metrics_from_counts(const ConfusionCounts& counts);

// Scores predictions against ground truth. Absent truth entries count as
// negative; unanswered predictions count as `no` and reduce coverage.
MetricsReport score(const std::map<std::string, PracticeVector>& predictions,
                    const AnnotationSet& truth, const LabelTaxonomy& taxonomy);

struct RunRecord {
    std::string run_id;
    PromptVariant variant;
    std::string profile_id;
    ModelParameters params;
    std::map<std::string, PracticeVector> predictions;      // policy_id -> vector
    std::map<std::string, std::vector<std::string>> exchanges;  // policy_id -> cache hashes
    std::map<std::string, double> timing_ms;                 // wall-clock per policy
    std::map<std::string, std::string> failures;             // policy_id -> error

    std::vector<std::string> exchange_hashes() const;
};

void save_run_record(const std::filesystem::path& file, const RunRecord& record);
RunRecord load_run_record(const std::filesystem::path& file);
void save_metrics(const std::filesystem::path& file, const MetricsReport& report);
std::string metrics_to_json(const MetricsReport& report);

struct PipelineContext {
    std::shared_ptr<ChatClient> client;
    PromptTemplates templates = PromptTemplates::defaults();
    long long response_reserve = 512;
    // Shots for a given policy under analysis; must never return a shot drawn
    // from that policy. Required when variant.shots > 0.
    std::function<std::vector<FewShotExample>(const std::string& exclude_policy_id, int count)>
        shot_provider;
    int concurrency = 1;
    // cooperative cancellation; checked between policies
    std::function<bool()> cancelled;
};

// Prompt tokens of a plan built around an empty policy text: the P in the
// budget inequality chunk + P + reserve <= context_limit.
long long estimate_prompt_overhead(const LabelTaxonomy& taxonomy, const PromptVariant& variant,
                                   std::span<const FewShotExample> shots,
                                   const TokenCounter& counter,
                                   const PromptTemplates& templates = PromptTemplates::defaults());

// Expands one policy into the plans its variant's segmentation demands:
// whole-policy chunks, per-paragraph, per-label, or both.
std::vector<PromptPlan> expand_plans(const PolicyDocument& policy, const LabelTaxonomy& taxonomy,
                                     const PromptVariant& variant,
                                     std::span<const FewShotExample> shots,
                                     const ChunkBudget& budget, const TokenCounter& counter,
                                     const PromptTemplates& templates = PromptTemplates::defaults());

// End-to-end run: optional pruning pass, chunking, dispatch under the rate
// limiter, parse, reduce. Provider errors are recorded per policy without
// aborting the run.
RunRecord run_pipeline(const std::vector<PolicyDocument>& policies, const LabelTaxonomy& taxonomy,
                       const PromptVariant& variant, const ModelProfile& profile,
                       const ModelParameters& params, const PipelineContext& context,
                       std::string run_id = "run");

struct Technique {
    std::string name;
    VariantPatch patch;
    // overrides the adopt-on-strict-F1-improvement rule (the catalog keeps
    // one technique out on cost grounds despite a marginal F1 gain)
    std::optional<bool> adopt_override;
};

struct SplitTestRow {
    std::string technique;
    PromptVariant variant;
    MetricsReport metrics;
    double delta_accuracy = 0.0;  // vs the incumbent at evaluation time
    double delta_precision = 0.0;
    double delta_recall = 0.0;
    double delta_f1 = 0.0;
    bool adopted = false;
};

// Incremental split test: each technique patches the current incumbent, is
// scored against it, and is adopted on strict F1 improvement (or per its
// override). Later techniques always benchmark against the last adopted
// configuration.
struct SplitTestResult {
    std::vector<SplitTestRow> rows;
    PromptVariant final_variant;

    // columns: technique, accuracy, precision, recall, f1
    std::string csv() const;
};

SplitTestResult split_test(const std::vector<PolicyDocument>& policies, const AnnotationSet& truth,
                           const LabelTaxonomy& taxonomy, const std::vector<Technique>& techniques,
                           const ModelProfile& profile, const ModelParameters& params,
                           const PipelineContext& context);

}  // namespace policyprobe
