#include "policyprobe/economics.hpp"

#include <cmath>
#include <sstream>

#include "policyprobe/errors.hpp"

namespace policyprobe {

Money annotation_cost(const AnnotationCostModel& model) {
    if (model.annotators_per_policy < 0 || model.hours_per_policy < 0.0 ||
        model.policy_count < 0 || model.hourly_rate.micro() < 0)
        throw Error("annotation cost model fields must be non-negative");
    const double total = static_cast<double>(model.annotators_per_policy) *
                         model.hours_per_policy * static_cast<double>(model.policy_count);
    return model.hourly_rate.scaled(total);
}

Money llm_cost_per_policy(const LlmCostModel& model) {
    if (model.tokens_in_per_policy < 0 || model.tokens_out_per_policy < 0 ||
        model.price_in_per_1k.micro() < 0 || model.price_out_per_1k.micro() < 0)
        throw Error("LLM cost model fields must be non-negative");
    // integer micro-units, rounded half up at the per-1k division
    const auto per_1k = [](long long tokens, Money price) {
        const __int128 numerator = static_cast<__int128>(tokens) * price.micro();
        return Money::from_micro(static_cast<std::int64_t>((numerator + 500) / 1000));
    };
    return per_1k(model.tokens_in_per_policy, model.price_in_per_1k) +
           per_1k(model.tokens_out_per_policy, model.price_out_per_1k);
}

BreakEven break_even(const AnnotationCostModel& annotation, const LlmCostModel& llm) {
    const Money fixed = annotation_cost(annotation);
    const Money per_policy = llm_cost_per_policy(llm);
    if (fixed.micro() <= 0) return {false, 0};
    if (per_policy.micro() <= 0) return {true, 0};
    const auto policies = (static_cast<__int128>(fixed.micro()) + per_policy.micro() - 1) /
                          per_policy.micro();
    return {false, static_cast<long long>(policies)};
}

long long throughput_policies_per_minute(long long tokens_per_minute, long long tokens_per_policy) {
    if (tokens_per_policy <= 0) throw Error("tokens_per_policy must be positive");
    if (tokens_per_minute <= 0) throw Error("tokens_per_minute must be positive");
    if (tokens_per_policy > tokens_per_minute)
        throw Error("a policy of " + std::to_string(tokens_per_policy) +
                    " tokens exceeds the per-minute capacity of " +
                    std::to_string(tokens_per_minute));
    return tokens_per_minute / tokens_per_policy;
}

long long throughput_policies_per_minute(const ModelProfile& profile, long long tokens_per_policy) {
    return throughput_policies_per_minute(profile.tokens_per_minute, tokens_per_policy);
}

CurveTable emit_curves(const std::vector<CostCurveModel>& models, long long first_count,
                       long long last_count, long long step,
                       std::optional<Money> fixed_annotation_cost) {
    if (models.empty()) throw Error("emit_curves needs at least one model");
    if (step <= 0) throw Error("step must be positive");
    if (last_count < first_count) throw Error("empty policy-count range");

    CurveTable table;
    table.fixed_annotation_cost = fixed_annotation_cost;
    for (const auto& model : models) table.model_names.push_back(model.name);

    for (long long n = first_count; n <= last_count; n += step) {
        CurveTable::Row row;
        row.n_policies = n;
        for (const auto& model : models) {
            row.cumulative_cost.push_back(model.cost_per_policy.scaled(n));
            row.wall_minutes.push_back(model.policies_per_minute > 0
                                           ? static_cast<double>(n) /
                                                 static_cast<double>(model.policies_per_minute)
                                           : 0.0);
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

std::string CurveTable::cost_csv() const {
    std::ostringstream out;
    out << "n_policies";
    for (const auto& name : model_names) out << ',' << name;
    if (fixed_annotation_cost) out << ",annotation_fixed";
    out << '\n';
    for (const auto& row : rows) {
        out << row.n_policies;
        for (const auto& cost : row.cumulative_cost) out << ',' << cost.decimal_string();
        if (fixed_annotation_cost) out << ',' << fixed_annotation_cost->decimal_string();
        out << '\n';
    }
    return out.str();
}

std::string CurveTable::time_csv() const {
    std::ostringstream out;
    out << "n_policies";
    for (const auto& name : model_names) out << ',' << name;
    out << '\n';
    out.setf(std::ios::fixed);
    out.precision(4);
    for (const auto& row : rows) {
        out << row.n_policies;
        for (const double minutes : row.wall_minutes) out << ',' << minutes;
        out << '\n';
    }
    return out.str();
}

}  // namespace policyprobe
