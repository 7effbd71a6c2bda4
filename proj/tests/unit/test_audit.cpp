#include "doctest.h"

#include <random>

#include "helpers.hpp"
#include "policyprobe/audit.hpp"
#include "policyprobe/errors.hpp"
#include "policyprobe/rng.hpp"

using namespace policyprobe;

namespace {

CorpusBundle audit_corpus(std::size_t policies) {
    CorpusBundle bundle;
    bundle.taxonomy = testutil::email_phone_taxonomy();
    for (std::size_t p = 0; p < policies; ++p) {
        bundle.policies.push_back(make_policy_document(
            "p" + std::to_string(p), "audit",
            "Policy " + std::to_string(p) + " explains its data practices."));
    }
    return bundle;
}

ConsistencySchedule schedule_for(const CorpusBundle& bundle, int days,
                                 const std::vector<std::string>& times, int repeats) {
    ConsistencySchedule schedule;
    schedule.repeats_per_slot = repeats;
    for (int day = 0; day < days; ++day)
        for (const auto& time : times) schedule.slots.push_back({day, time});
    for (const auto& policy : bundle.policies) schedule.policy_ids.push_back(policy.policy_id);
    return schedule;
}

PipelineContext context_for(const testutil::ClientRig& rig) {
    PipelineContext context;
    context.client = rig.client;
    return context;
}

}  // namespace

TEST_CASE("audit: identical responses give consistency 1.0") {
    const CorpusBundle bundle = audit_corpus(2);
    auto rig = testutil::make_rig();
    rig.transport->set_default_text("Email: Yes\nPhone: No");

    const auto schedule = schedule_for(bundle, 1, {"09:00", "12:00"}, 3);
    const ConsistencyReport report =
        audit_consistency(schedule, bundle.policies, bundle.taxonomy, baseline_variant(),
                          testutil::test_profile(), ModelParameters{}, context_for(rig));

    CHECK(report.total == 12);  // 2 policies x 2 slots x 3 repeats
    CHECK(report.discrepancies == 0);
    CHECK(report.consistency == 1.0);
    CHECK(report.provider_failures == 0);
    CHECK(report.modal_response_hash.size() == 2);
    // cache must be bypassed: every request reached the transport
    CHECK(rig.transport->request_count() == 12);
}

TEST_CASE("audit: formatting variance is not a discrepancy") {
    const CorpusBundle bundle = audit_corpus(1);
    auto rig = testutil::make_rig();
    rig.transport->push_text("Email: Yes\nPhone: No");
    rig.transport->push_text("  EMAIL :  yes\n\tphone:  NO.");
    rig.transport->push_text("email: YES\nPhone: no\n");

    const auto schedule = schedule_for(bundle, 1, {"09:00"}, 3);
    const ConsistencyReport report =
        audit_consistency(schedule, bundle.policies, bundle.taxonomy, baseline_variant(),
                          testutil::test_profile(), ModelParameters{}, context_for(rig));
    CHECK(report.total == 3);
    CHECK(report.discrepancies == 0);
    CHECK(report.consistency == 1.0);
}

TEST_CASE("audit: semantic changes are discrepancies against the modal answer") {
    const CorpusBundle bundle = audit_corpus(1);
    auto rig = testutil::make_rig();
    rig.transport->push_text("Email: Yes\nPhone: No");
    rig.transport->push_text("Email: No\nPhone: No");  // the odd one out
    rig.transport->push_text("Email: Yes\nPhone: No");

    const auto schedule = schedule_for(bundle, 1, {"09:00"}, 3);
    const ConsistencyReport report =
        audit_consistency(schedule, bundle.policies, bundle.taxonomy, baseline_variant(),
                          testutil::test_profile(), ModelParameters{}, context_for(rig));
    CHECK(report.total == 3);
    CHECK(report.discrepancies == 1);
    CHECK(report.consistency == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("audit: provider failures counted separately, not as discrepancies") {
    const CorpusBundle bundle = audit_corpus(1);
    auto rig = testutil::make_rig();
    rig.transport->push_text("Email: Yes\nPhone: No");
    ScriptedTransport::Entry broken;
    broken.status = 400;  // non-retryable, consumes exactly one entry
    rig.transport->push(broken);
    rig.transport->push_text("Email: Yes\nPhone: No");

    const auto schedule = schedule_for(bundle, 1, {"09:00"}, 3);
    const ConsistencyReport report =
        audit_consistency(schedule, bundle.policies, bundle.taxonomy, baseline_variant(),
                          testutil::test_profile(), ModelParameters{}, context_for(rig));
    CHECK(report.total == 2);
    CHECK(report.discrepancies == 0);
    CHECK(report.provider_failures == 1);
    CHECK(report.consistency == 1.0);
}

TEST_CASE("audit: 495 responses with 52 planted discrepancies give 0.895") {
    // 33 policies x (3 days x 5 times) x 1 repeat = 495 responses
    const CorpusBundle bundle = audit_corpus(33);
    const auto schedule =
        schedule_for(bundle, 3, {"09:00", "12:00", "15:00", "18:00", "21:00"}, 1);
    REQUIRE(schedule.total_requests_per_plan() == 495);

    // plant 52 variant answers: 7 policies get 7 each, one policy gets 3,
    // modal answers stay in the majority everywhere (15 responses per policy)
    std::map<std::pair<std::size_t, std::size_t>, bool> variant_cell;  // (slot, policy)
    std::size_t planted = 0;
    for (std::size_t policy = 0; policy < 8 && planted < 52; ++policy) {
        const std::size_t quota = policy < 7 ? 7 : 3;
        for (std::size_t slot = 0; slot < quota; ++slot) {
            variant_cell[{slot, policy}] = true;
            ++planted;
        }
    }
    REQUIRE(planted == 52);

    auto rig = testutil::make_rig();
    // audit iterates slots, then repeats, then policies
    for (std::size_t slot = 0; slot < 15; ++slot) {
        for (std::size_t policy = 0; policy < 33; ++policy) {
            const bool variant = variant_cell.count({slot, policy}) > 0;
            rig.transport->push_text(variant ? "Email: No\nPhone: Yes" : "Email: Yes\nPhone: No");
        }
    }

    const ConsistencyReport report =
        audit_consistency(schedule, bundle.policies, bundle.taxonomy, baseline_variant(),
                          testutil::test_profile(), ModelParameters{}, context_for(rig));
    CHECK(report.total == 495);
    CHECK(report.discrepancies == 52);
    CHECK(report.consistency == doctest::Approx(1.0 - 52.0 / 495.0));
    // rounds to the headline three-decimal figure
    CHECK(report.consistency == doctest::Approx(0.895).epsilon(0.001));

    // per-slot counts line up with the planted grid
    long long slot_total = 0;
    long long slot_discrepancies = 0;
    for (const auto& slot : report.per_slot) {
        slot_total += slot.total;
        slot_discrepancies += slot.discrepancies;
    }
    CHECK(slot_total == 495);
    CHECK(slot_discrepancies == 52);
}

TEST_CASE("audit: per-slot CSV shape") {
    ConsistencyReport report;
    report.per_slot.push_back({0, "09:00", 10, 1});
    report.per_slot.push_back({1, "12:00", 10, 0});
    const std::string csv = report.per_slot_csv();
    CHECK(csv.find("day,time_of_day,total,discrepancies,consistency\n") == 0);
    CHECK(csv.find("0,09:00,10,1,0.9") != std::string::npos);
    CHECK(csv.find("1,12:00,10,0,1") != std::string::npos);
}

TEST_CASE("audit: scheduled waits advance the clock to each slot offset") {
    const CorpusBundle bundle = audit_corpus(1);
    auto rig = testutil::make_rig();
    rig.transport->set_default_text("Email: Yes\nPhone: No");

    const auto schedule = schedule_for(bundle, 2, {"09:00", "21:00"}, 1);
    AuditOptions options;
    options.no_wait = false;
    options.clock = rig.clock;

    const auto start = rig.clock->now();
    audit_consistency(schedule, bundle.policies, bundle.taxonomy, baseline_variant(),
                      testutil::test_profile(), ModelParameters{}, context_for(rig), options);
    // last slot: day 1 at 21:00 -> 45 hours after the audit began
    CHECK(rig.clock->now() - start >= std::chrono::hours(45));
}

TEST_CASE("audit: schedule validation") {
    const CorpusBundle bundle = audit_corpus(1);
    auto rig = testutil::make_rig();
    const PipelineContext context = context_for(rig);

    ConsistencySchedule empty_slots;
    empty_slots.policy_ids.push_back("p0");
    CHECK_THROWS_AS(audit_consistency(empty_slots, bundle.policies, bundle.taxonomy,
                                      baseline_variant(), testutil::test_profile(),
                                      ModelParameters{}, context),
                    Error);

    ConsistencySchedule unknown = schedule_for(bundle, 1, {"09:00"}, 1);
    unknown.policy_ids.push_back("ghost");
    CHECK_THROWS_AS(audit_consistency(unknown, bundle.policies, bundle.taxonomy,
                                      baseline_variant(), testutil::test_profile(),
                                      ModelParameters{}, context),
                    Error);
}

TEST_CASE("audit: Bernoulli mock lands inside the binomial interval") {
    const CorpusBundle bundle = audit_corpus(1);
    auto rig = testutil::make_rig();

    std::mt19937_64 rng(4242);
    long long modal_emitted = 0;
    const int trials = 500;
    for (int i = 0; i < trials; ++i) {
        const bool modal = unit_real(rng) < 0.9;
        modal_emitted += modal ? 1 : 0;
        rig.transport->push_text(modal ? "Email: Yes\nPhone: No" : "Email: No\nPhone: No");
    }
    REQUIRE(modal_emitted > trials / 2);  // the intended modal answer is modal

    ConsistencySchedule schedule = schedule_for(bundle, 1, {"09:00"}, trials);
    const ConsistencyReport report =
        audit_consistency(schedule, bundle.policies, bundle.taxonomy, baseline_variant(),
                          testutil::test_profile(), ModelParameters{}, context_for(rig));
    CHECK(report.total == trials);
    CHECK(report.consistency ==
          doctest::Approx(static_cast<double>(modal_emitted) / trials));
    CHECK(report.consistency > 0.85);
    CHECK(report.consistency < 0.95);
}
