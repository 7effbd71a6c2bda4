#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "policyprobe/budget.hpp"
#include "policyprobe/clock.hpp"
#include "policyprobe/corpus.hpp"
#include "policyprobe/provider.hpp"
#include "policyprobe/transport.hpp"

namespace testutil {

inline std::filesystem::path fixtures() {
    return std::filesystem::path(POLICYPROBE_FIXTURES_DIR);
}

// fresh scratch directory per test name
inline std::filesystem::path temp_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("policyprobe-test-" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline policyprobe::LabelTaxonomy email_phone_taxonomy() {
    return policyprobe::LabelTaxonomy({
        {"email", "Email", "An address used for electronic mail."},
        {"phone", "Phone", "A telephone number."},
    });
}

inline policyprobe::LabelTaxonomy numbered_taxonomy(std::size_t count) {
    std::vector<policyprobe::TaxonomyLabel> labels;
    for (std::size_t i = 0; i < count; ++i) {
        const std::string n = std::to_string(i);
        labels.push_back({"l" + n, "Label " + n, "Definition of label " + n + "."});
    }
    return policyprobe::LabelTaxonomy(std::move(labels));
}

inline policyprobe::ModelProfile test_profile(long long context_limit = 128000,
                                              long long tokens_per_minute = 0) {
    policyprobe::ModelProfile profile;
    profile.profile_id = "test";
    profile.endpoint_url = "http://provider.test";
    profile.model_name = "test-model";
    profile.context_limit = context_limit;
    profile.tokens_per_minute = tokens_per_minute;
    return profile;
}

struct ClientRig {
    std::shared_ptr<policyprobe::ScriptedTransport> transport;
    std::shared_ptr<policyprobe::SimulatedClock> clock;
    std::shared_ptr<policyprobe::ResponseCache> cache;  // may be null
    std::shared_ptr<policyprobe::ChatClient> client;
};

inline ClientRig make_rig(std::shared_ptr<policyprobe::ResponseCache> cache = nullptr,
                          std::shared_ptr<policyprobe::RateLimiter> limiter = nullptr) {
    ClientRig rig;
    rig.transport = std::make_shared<policyprobe::ScriptedTransport>();
    rig.clock = std::make_shared<policyprobe::SimulatedClock>();
    rig.cache = cache;
    rig.client = std::make_shared<policyprobe::ChatClient>(
        rig.transport, rig.clock, policyprobe::TokenCounter::heuristic(), std::move(limiter),
        std::move(cache));
    return rig;
}

}  // namespace testutil
