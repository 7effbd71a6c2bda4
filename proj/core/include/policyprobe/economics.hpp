#pragma once

#include <optional>
#include <string>
#include <vector>

#include "policyprobe/money.hpp"
#include "policyprobe/provider.hpp"

namespace policyprobe {

// Fixed cost of building an annotated corpus by hand.
struct AnnotationCostModel {
    int annotators_per_policy = 0;
    double hours_per_policy = 0.0;
    Money hourly_rate;
    long long policy_count = 0;
};

// Marginal LLM cost of analyzing one policy.
struct LlmCostModel {
    long long tokens_in_per_policy = 0;
    long long tokens_out_per_policy = 0;
    Money price_in_per_1k;
    Money price_out_per_1k;
};

// annotators x hours x rate x policies
Money annotation_cost(const AnnotationCostModel& model);

// tokens_in/1000 x price_in + tokens_out/1000 x price_out
Money llm_cost_per_policy(const LlmCostModel& model);

struct BreakEven {
    bool infinite = false;   // zero LLM cost never breaks even
    long long policies = 0;  // ceil(annotation_cost / llm_cost_per_policy)
};

BreakEven break_even(const AnnotationCostModel& annotation, const LlmCostModel& llm);

// floor(tokens_per_minute / tokens_per_policy); throws when a single policy
// exceeds the per-minute capacity.
long long throughput_policies_per_minute(long long tokens_per_minute, long long tokens_per_policy);
long long throughput_policies_per_minute(const ModelProfile& profile, long long tokens_per_policy);

struct CostCurveModel {
    std::string name;
    Money cost_per_policy;
    long long policies_per_minute = 0;
};

// Piecewise-linear plot data: cumulative cost and wall-clock minutes per
// model over a policy-count range, plus an optional fixed-annotation-cost
// reference line whose intersection with a model's cost line is its
// break-even point.
struct CurveTable {
    std::vector<std::string> model_names;
    std::optional<Money> fixed_annotation_cost;

    struct Row {
        long long n_policies = 0;
        std::vector<Money> cumulative_cost;  // one per model
        std::vector<double> wall_minutes;    // one per model
    };
    std::vector<Row> rows;

    std::string cost_csv() const;
    std::string time_csv() const;
};

CurveTable emit_curves(const std::vector<CostCurveModel>& models, long long first_count,
                       long long last_count, long long step = 1,
                       std::optional<Money> fixed_annotation_cost = std::nullopt);

}  // namespace policyprobe
