#include "policyprobe/audit.hpp"

#include <algorithm>
#include <sstream>

#include "policyprobe/errors.hpp"
#include "policyprobe/sha256.hpp"

namespace policyprobe {

namespace {

// canonical form for modal comparison: answers only, never raw text or
// extraneous noise
std::string canonical(const PracticeVector& vector) {
    std::string out;
    for (const auto& [label_id, answer] : vector.answers) {
        out += label_id;
        out += '=';
        out += to_string(answer);
        out += ';';
    }
    return out;
}

std::chrono::milliseconds slot_offset(const ScheduleSlot& slot) {
    int hours = 0;
    int minutes = 0;
    if (!slot.time_of_day.empty()) {
        const auto colon = slot.time_of_day.find(':');
        try {
            hours = std::stoi(slot.time_of_day.substr(0, colon));
            if (colon != std::string::npos) minutes = std::stoi(slot.time_of_day.substr(colon + 1));
        } catch (const std::exception&) {
            throw ConfigError("bad slot time '" + slot.time_of_day + "', expected HH:MM");
        }
    }
    return std::chrono::hours(24) * slot.day + std::chrono::hours(hours) +
           std::chrono::minutes(minutes);
}

}  // namespace

std::string ConsistencyReport::per_slot_csv() const {
    std::ostringstream out;
    out << "day,time_of_day,total,discrepancies,consistency\n";
    for (const auto& slot : per_slot) {
        const double slot_consistency =
            slot.total > 0
                ? 1.0 - static_cast<double>(slot.discrepancies) / static_cast<double>(slot.total)
                : 1.0;
        out << slot.day << ',' << slot.time_of_day << ',' << slot.total << ','
            << slot.discrepancies << ',' << slot_consistency << '\n';
    }
    return out.str();
}

ConsistencyReport audit_consistency(const ConsistencySchedule& schedule,
                                    const std::vector<PolicyDocument>& corpus,
                                    const LabelTaxonomy& taxonomy, const PromptVariant& variant,
                                    const ModelProfile& profile, const ModelParameters& params,
                                    const PipelineContext& context, const AuditOptions& options) {
    if (!context.client) throw Error("audit_consistency: no chat client configured");
    if (schedule.slots.empty()) throw Error("audit_consistency: empty slot list");
    if (schedule.repeats_per_slot < 1) throw Error("audit_consistency: repeats_per_slot must be >= 1");
    if (!options.no_wait && !options.clock)
        throw Error("audit_consistency: scheduled execution needs a clock");

    ChatClient& client = *context.client;

    // fixed plans per policy, identical across all slots and repeats
    struct PolicyPlans {
        const PolicyDocument* policy = nullptr;
        std::vector<PromptPlan> plans;
    };
    std::vector<PolicyPlans> targets;
    for (const auto& policy_id : schedule.policy_ids) {
        const PolicyDocument* policy = nullptr;
        for (const auto& candidate : corpus) {
            if (candidate.policy_id == policy_id) {
                policy = &candidate;
                break;
            }
        }
        if (policy == nullptr) throw Error("audit schedule references unknown policy '" + policy_id + "'");

        std::vector<FewShotExample> shots;
        if (variant.shots > 0) {
            if (!context.shot_provider)
                throw PromptError("variant requests shots but the audit has no shot provider");
            shots = context.shot_provider(policy_id, variant.shots);
        }
        const ChunkBudget budget{
            profile.context_limit,
            estimate_prompt_overhead(taxonomy, variant, shots, client.counter(), context.templates),
            context.response_reserve};
        targets.push_back({policy, expand_plans(*policy, taxonomy, variant, shots, budget,
                                                client.counter(), context.templates)});
    }

    // responses[(policy index, plan index)] -> canonical parsed vectors with
    // their slot of origin
    struct Observation {
        std::size_t slot = 0;
        std::string canonical_vector;
    };
    std::map<std::pair<std::size_t, std::size_t>, std::vector<Observation>> observations;

    ConsistencyReport report;
    report.per_slot.reserve(schedule.slots.size());
    for (const auto& slot : schedule.slots)
        report.per_slot.push_back({slot.day, slot.time_of_day, 0, 0});

    const auto audit_start = options.no_wait ? Clock::TimePoint{} : options.clock->now();

    for (std::size_t slot_index = 0; slot_index < schedule.slots.size(); ++slot_index) {
        if (!options.no_wait)
            options.clock->sleep_until(audit_start + slot_offset(schedule.slots[slot_index]));

        for (int repeat = 0; repeat < schedule.repeats_per_slot; ++repeat) {
            for (std::size_t t = 0; t < targets.size(); ++t) {
                for (std::size_t p = 0; p < targets[t].plans.size(); ++p) {
                    const PromptPlan& plan = targets[t].plans[p];
                    try {
                        // fresh responses required
                        const ChatExchange exchange =
                            client.send_chat(plan, profile, params, /*bypass_cache=*/true);
                        const auto queried = taxonomy.subset(plan.target.queried_label_ids);
                        const auto vector = parse_practice_vector(exchange.response_text, queried);
                        observations[{t, p}].push_back({slot_index, canonical(vector)});
                    } catch (const ProviderError&) {
                        ++report.provider_failures;
                    }
                }
            }
        }
    }

    std::map<std::size_t, std::string> modal_concat;  // policy index -> joined modal vectors
    for (const auto& [key, observed] : observations) {
        // modal response; ties break to the lexicographically smallest
        std::map<std::string, long long> frequency;
        for (const auto& observation : observed) ++frequency[observation.canonical_vector];
        std::string modal;
        long long best = -1;
        for (const auto& [vector, count] : frequency) {
            if (count > best) {
                best = count;
                modal = vector;
            }
        }

        for (const auto& observation : observed) {
            ++report.total;
            ++report.per_slot[observation.slot].total;
            if (observation.canonical_vector != modal) {
                ++report.discrepancies;
                ++report.per_slot[observation.slot].discrepancies;
            }
        }
        modal_concat[key.first] += modal + "|";
    }

    for (const auto& [policy_index, joined] : modal_concat)
        report.modal_response_hash[targets[policy_index].policy->policy_id] = sha256_hex(joined);

    report.consistency =
        report.total > 0
            ? 1.0 - static_cast<double>(report.discrepancies) / static_cast<double>(report.total)
            : 1.0;
    return report;
}

}  // namespace policyprobe
