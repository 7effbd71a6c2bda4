#pragma once

#include <map>
#include <string>
#include <vector>

#include "policyprobe/evaluation.hpp"

namespace policyprobe {

struct ScheduleSlot {
    int day = 0;               // day index, 0-based
    std::string time_of_day;   // "HH:MM", 24h
};

// Repeated-identical-query schedule: total requests per plan equal
// |policies| x |slots| x repeats_per_slot.
struct ConsistencySchedule {
    int repeats_per_slot = 1;
    std::vector<ScheduleSlot> slots;
    std::vector<std::string> policy_ids;

    std::size_t total_requests_per_plan() const {
        return policy_ids.size() * slots.size() * static_cast<std::size_t>(repeats_per_slot);
    }
};

struct ConsistencyReport {
    long long total = 0;          // successful responses compared
    long long discrepancies = 0;  // parsed vector differs from the modal one
    long long provider_failures = 0;  // counted separately, not as discrepancies
    double consistency = 1.0;         // 1 - discrepancies/total

    std::map<std::string, std::string> modal_response_hash;  // per policy

    struct SlotStats {
        int day = 0;
        std::string time_of_day;
        long long total = 0;
        long long discrepancies = 0;
    };
    std::vector<SlotStats> per_slot;

    // columns: day, time_of_day, total, discrepancies, consistency
    std::string per_slot_csv() const;
};

struct AuditOptions {
    // Back-to-back execution; when false, the clock sleeps to each slot's
    // (day, time) offset. Clock spread probes provider behavior, not code.
    bool no_wait = true;
    std::shared_ptr<Clock> clock;  // required when no_wait is false
};

// Sends the schedule's identical requests with the cache bypassed, parses
// every response, and measures agreement with the modal (most frequent)
// parsed vector per (policy, plan). Formatting-only variance is not a
// discrepancy: comparison happens at the parsed-vector level.
ConsistencyReport audit_consistency(const ConsistencySchedule& schedule,
                                    const std::vector<PolicyDocument>& corpus,
                                    const LabelTaxonomy& taxonomy, const PromptVariant& variant,
                                    const ModelProfile& profile, const ModelParameters& params,
                                    const PipelineContext& context, const AuditOptions& options = {});

}  // namespace policyprobe
