#include "doctest.h"

#include <random>

#include "json.hpp"

#include "helpers.hpp"
#include "policyprobe/errors.hpp"
#include "policyprobe/evaluation.hpp"
#include "policyprobe/rng.hpp"

using namespace policyprobe;
using nlohmann::json;

namespace {

PracticeVector vector_of(const LabelTaxonomy& taxonomy, const std::vector<Answer>& states) {
    PracticeVector vector;
    for (std::size_t i = 0; i < taxonomy.size(); ++i)
        vector.answers[taxonomy.labels()[i].label_id] = states[i];
    return vector;
}

// independent confusion counter: a straight loop over (policy, label) pairs
ConfusionCounts brute_force_counts(const std::map<std::string, PracticeVector>& predictions,
                                   const AnnotationSet& truth, const LabelTaxonomy& taxonomy) {
    ConfusionCounts counts;
    for (const auto& [policy_id, vector] : predictions) {
        for (const auto& label : taxonomy.labels()) {
            bool predicted = false;
            if (const auto it = vector.answers.find(label.label_id); it != vector.answers.end())
                predicted = it->second == Answer::yes;
            const bool actual = truth.policy_truth(policy_id, label.label_id);
            if (predicted && actual)
                ++counts.tp;
            else if (predicted)
                ++counts.fp;
            else if (actual)
                ++counts.fn;
            else
                ++counts.tn;
        }
    }
    return counts;
}

}  // namespace

TEST_CASE("score: perfect predictions yield all ones") {
    const LabelTaxonomy taxonomy = testutil::email_phone_taxonomy();
    AnnotationSet truth;
    truth.set_policy_level("p1", "email", true);

    std::map<std::string, PracticeVector> predictions;
    predictions["p1"] = vector_of(taxonomy, {Answer::yes, Answer::no});

    const MetricsReport report = score(predictions, truth, taxonomy);
    CHECK(report.accuracy == 1.0);
    CHECK(report.precision == 1.0);
    CHECK(report.recall == 1.0);
    CHECK(report.f1 == 1.0);
    CHECK(report.coverage == 1.0);
}

TEST_CASE("score: hand-enumerated confusion counts") {
    // 10 (policy,label) pairs, 6 true positives in truth, predictor scores
    // TP=5 FP=2 FN=1 TN=2
    const LabelTaxonomy taxonomy = testutil::numbered_taxonomy(1);
    AnnotationSet truth;
    std::map<std::string, PracticeVector> predictions;
    int next = 0;
    const auto add = [&](bool actual, bool predicted, int count) {
        for (int i = 0; i < count; ++i) {
            const std::string id = "p" + std::to_string(next++);
            if (actual) truth.set_policy_level(id, "l0", true);
            predictions[id] = vector_of(taxonomy, {predicted ? Answer::yes : Answer::no});
        }
    };
    add(true, true, 5);   // TP
    add(false, true, 2);  // FP
    add(true, false, 1);  // FN
    add(false, false, 2); // TN

    const MetricsReport report = score(predictions, truth, taxonomy);
    CHECK(report.counts == ConfusionCounts{5, 2, 1, 2});
    CHECK(report.accuracy == doctest::Approx(0.700));
    CHECK(report.precision == doctest::Approx(5.0 / 7.0));
    CHECK(report.recall == doctest::Approx(5.0 / 6.0));
    CHECK(report.f1 == doctest::Approx(2.0 * (5.0 / 7.0) * (5.0 / 6.0) / (5.0 / 7.0 + 5.0 / 6.0)));
    CHECK(report.f1 == doctest::Approx(0.769).epsilon(0.001));
}

TEST_CASE("score: empty prediction set is an error") {
    CHECK_THROWS_AS(score({}, AnnotationSet{}, testutil::email_phone_taxonomy()), Error);
}

TEST_CASE("score: zero-denominator metrics are flagged and zero") {
    const LabelTaxonomy taxonomy = testutil::email_phone_taxonomy();
    AnnotationSet truth;  // no positives anywhere
    std::map<std::string, PracticeVector> predictions;
    predictions["p1"] = vector_of(taxonomy, {Answer::no, Answer::no});

    const MetricsReport report = score(predictions, truth, taxonomy);
    CHECK(report.accuracy == 1.0);
    CHECK(report.precision == 0.0);
    CHECK(report.recall == 0.0);
    CHECK(report.f1 == 0.0);
    CHECK(report.undefined_precision);
    CHECK(report.undefined_recall);
    CHECK(report.undefined_f1);
}

TEST_CASE("score: unanswered counts as no but reduces coverage") {
    const LabelTaxonomy taxonomy = testutil::email_phone_taxonomy();
    AnnotationSet truth;
    truth.set_policy_level("p1", "email", true);

    std::map<std::string, PracticeVector> predictions;
    predictions["p1"] = vector_of(taxonomy, {Answer::unanswered, Answer::no});

    const MetricsReport report = score(predictions, truth, taxonomy);
    CHECK(report.counts.fn == 1);  // unanswered scored as a miss
    CHECK(report.coverage == doctest::Approx(0.5));
}

TEST_CASE("score: per-label breakdown and macro averages") {
    const LabelTaxonomy taxonomy = testutil::email_phone_taxonomy();
    AnnotationSet truth;
    truth.set_policy_level("p1", "email", true);
    truth.set_policy_level("p2", "phone", true);

    std::map<std::string, PracticeVector> predictions;
    predictions["p1"] = vector_of(taxonomy, {Answer::yes, Answer::no});   // email right
    predictions["p2"] = vector_of(taxonomy, {Answer::no, Answer::no});    // phone missed

    const MetricsReport report = score(predictions, truth, taxonomy);
    CHECK(report.per_label.at("email").recall == 1.0);
    CHECK(report.per_label.at("phone").recall == 0.0);
    CHECK(report.macro_recall == doctest::Approx(0.5));
}

TEST_CASE("score equals the brute-force counter on random instances") {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t policies = 1 + bounded_uint(rng, 8);
        const std::size_t labels = 1 + bounded_uint(rng, 10);
        const LabelTaxonomy taxonomy = testutil::numbered_taxonomy(labels);

        AnnotationSet truth;
        std::map<std::string, PracticeVector> predictions;
        for (std::size_t p = 0; p < policies; ++p) {
            const std::string id = "p" + std::to_string(p);
            PracticeVector vector;
            for (const auto& label : taxonomy.labels()) {
                if (bounded_uint(rng, 2) == 0) truth.set_policy_level(id, label.label_id, true);
                vector.answers[label.label_id] = static_cast<Answer>(bounded_uint(rng, 3));
            }
            predictions[id] = std::move(vector);
        }

        const MetricsReport report = score(predictions, truth, taxonomy);
        const ConfusionCounts expected = brute_force_counts(predictions, truth, taxonomy);
        CHECK(report.counts == expected);

        const double total = static_cast<double>(expected.total());
        CHECK(report.accuracy ==
              doctest::Approx(static_cast<double>(expected.tp + expected.tn) / total));
        if (!report.undefined_f1) {
            CHECK(report.f1 == doctest::Approx(2.0 * report.precision * report.recall /
                                               (report.precision + report.recall)));
        }
    }
}

namespace {

CorpusBundle tiny_corpus(std::size_t policies, std::size_t labels,
                         std::size_t paragraphs_per_policy = 1) {
    CorpusBundle bundle;
    bundle.taxonomy = testutil::numbered_taxonomy(labels);
    for (std::size_t p = 0; p < policies; ++p) {
        std::string raw;
        for (std::size_t i = 0; i < paragraphs_per_policy; ++i)
            raw += "Marker" + std::to_string(p) + " paragraph " + std::to_string(i) +
                   " talks about data practices.\n\n";
        bundle.policies.push_back(
            make_policy_document("p" + std::to_string(p), "tiny", raw));
    }
    return bundle;
}

PipelineContext context_for(const testutil::ClientRig& rig) {
    PipelineContext context;
    context.client = rig.client;
    return context;
}

}  // namespace

TEST_CASE("run_pipeline: scripted answers flow through to predictions") {
    const CorpusBundle bundle = tiny_corpus(1, 2);
    auto rig = testutil::make_rig();
    rig.transport->set_default_text("Label 0: Yes\nLabel 1: No");

    const RunRecord record =
        run_pipeline(bundle.policies, bundle.taxonomy, baseline_variant(),
                     testutil::test_profile(), ModelParameters{}, context_for(rig), "t");

    REQUIRE(record.predictions.count("p0") == 1);
    CHECK(record.predictions.at("p0").answers.at("l0") == Answer::yes);
    CHECK(record.predictions.at("p0").answers.at("l1") == Answer::no);
    CHECK(record.failures.empty());
    CHECK(record.exchanges.at("p0").size() == 1);
    CHECK(record.timing_ms.count("p0") == 1);
}

TEST_CASE("run_pipeline: per-label segmentation dispatches policies x labels plans") {
    const CorpusBundle bundle = tiny_corpus(3, 4);
    auto rig = testutil::make_rig();
    rig.transport->set_default_text("Label 0: Yes\nLabel 1: No\nLabel 2: Yes\nLabel 3: No");

    PromptVariant variant = baseline_variant();
    variant.segmentation = Segmentation::per_label;

    const RunRecord record =
        run_pipeline(bundle.policies, bundle.taxonomy, variant, testutil::test_profile(),
                     ModelParameters{}, context_for(rig), "t");

    CHECK(rig.transport->request_count() == 12);  // 3 policies x 4 labels
    CHECK(record.predictions.size() == 3);
    // single-label answers extracted from the full scripted text
    CHECK(record.predictions.at("p1").answers.at("l2") == Answer::yes);
    CHECK(record.predictions.at("p1").answers.at("l3") == Answer::no);
}

TEST_CASE("run_pipeline: pruning pass drops unselected paragraphs") {
    CorpusBundle bundle = tiny_corpus(1, 1, 4);
    auto rig = testutil::make_rig();
    // first request is the pruning pass, then the analysis of the pruned text
    rig.transport->push_text("0\n3");
    rig.transport->set_default_text("Label 0: Yes");

    PromptVariant variant = baseline_variant();
    variant.pruning = true;

    const RunRecord record =
        run_pipeline(bundle.policies, bundle.taxonomy, variant, testutil::test_profile(),
                     ModelParameters{}, context_for(rig), "t");

    REQUIRE(rig.transport->request_count() == 2);
    const std::string& analysis_request = rig.transport->requests()[1];
    CHECK(analysis_request.find("paragraph 0") != std::string::npos);
    CHECK(analysis_request.find("paragraph 3") != std::string::npos);
    CHECK(analysis_request.find("paragraph 1") == std::string::npos);
    CHECK(analysis_request.find("paragraph 2") == std::string::npos);
    CHECK(record.predictions.at("p0").answers.at("l0") == Answer::yes);
    CHECK(record.exchanges.at("p0").size() == 2);  // pruning + analysis
}

TEST_CASE("run_pipeline: pruning away every paragraph leaves the vector unanswered") {
    CorpusBundle bundle = tiny_corpus(1, 2, 2);
    auto rig = testutil::make_rig();
    rig.transport->push_text("no relevant paragraphs here");

    PromptVariant variant = baseline_variant();
    variant.pruning = true;

    const RunRecord record =
        run_pipeline(bundle.policies, bundle.taxonomy, variant, testutil::test_profile(),
                     ModelParameters{}, context_for(rig), "t");
    CHECK(record.predictions.at("p0").answers.at("l0") == Answer::unanswered);
    CHECK(record.predictions.at("p0").answers.at("l1") == Answer::unanswered);
}

TEST_CASE("run_pipeline: provider failure marks the policy failed, run continues") {
    const CorpusBundle bundle = tiny_corpus(3, 1);
    auto rig = testutil::make_rig();
    // policy p1's request fails hard (4xx is not retryable)
    rig.transport->add_rule({"Marker0"}, [] {
        ScriptedTransport::Entry entry;
        entry.text = "Label 0: Yes";
        return entry;
    }());
    rig.transport->add_rule({"Marker1"}, [] {
        ScriptedTransport::Entry entry;
        entry.status = 400;
        return entry;
    }());
    rig.transport->add_rule({"Marker2"}, [] {
        ScriptedTransport::Entry entry;
        entry.text = "Label 0: No";
        return entry;
    }());

    const RunRecord record =
        run_pipeline(bundle.policies, bundle.taxonomy, baseline_variant(),
                     testutil::test_profile(), ModelParameters{}, context_for(rig), "t");
    CHECK(record.predictions.size() == 2);
    REQUIRE(record.failures.size() == 1);
    CHECK(record.failures.count("p1") == 1);
}

TEST_CASE("run_pipeline: shot provider is consulted and leakage rejected") {
    const CorpusBundle bundle = tiny_corpus(1, 2);
    auto rig = testutil::make_rig();
    rig.transport->set_default_text("Label 0: Yes\nLabel 1: No");

    PromptVariant variant = final_variant();  // two shots
    PipelineContext context = context_for(rig);

    SUBCASE("missing provider is a failure") {
        const RunRecord record =
            run_pipeline(bundle.policies, bundle.taxonomy, variant, testutil::test_profile(),
                         ModelParameters{}, context, "t");
        CHECK(record.failures.size() == 1);
    }

    SUBCASE("shots flow into the prompt") {
        context.shot_provider = [&](const std::string&, int count) {
            std::vector<FewShotExample> shots;
            for (int i = 0; i < count; ++i) {
                FewShotExample shot;
                shot.paragraph = "Worked example paragraph " + std::to_string(i) + ".";
                shot.source_policy_id = "external";
                for (const auto& label : bundle.taxonomy.labels())
                    shot.expected.emplace_back(label.label_id, i == 0);
                shots.push_back(std::move(shot));
            }
            return shots;
        };
        const RunRecord record =
            run_pipeline(bundle.policies, bundle.taxonomy, variant, testutil::test_profile(),
                         ModelParameters{}, context, "t");
        CHECK(record.failures.empty());
        CHECK(rig.transport->requests()[0].find("Worked example paragraph 0.") !=
              std::string::npos);
    }

    SUBCASE("a shot from the policy under analysis is rejected") {
        context.shot_provider = [&](const std::string&, int count) {
            std::vector<FewShotExample> shots;
            for (int i = 0; i < count; ++i) {
                FewShotExample shot;
                shot.paragraph = "leaky";
                shot.source_policy_id = "p0";  // same policy
                for (const auto& label : bundle.taxonomy.labels())
                    shot.expected.emplace_back(label.label_id, false);
                shots.push_back(std::move(shot));
            }
            return shots;
        };
        const RunRecord record =
            run_pipeline(bundle.policies, bundle.taxonomy, variant, testutil::test_profile(),
                         ModelParameters{}, context, "t");
        REQUIRE(record.failures.size() == 1);
        CHECK(record.failures.at("p0").find("shot drawn from the policy") != std::string::npos);
    }
}

TEST_CASE("run_pipeline: concurrent dispatch produces the same record") {
    const CorpusBundle bundle = tiny_corpus(6, 2);
    auto sequential_rig = testutil::make_rig();
    sequential_rig.transport->set_default_text("Label 0: Yes\nLabel 1: No");
    auto concurrent_rig = testutil::make_rig();
    concurrent_rig.transport->set_default_text("Label 0: Yes\nLabel 1: No");

    PipelineContext sequential = context_for(sequential_rig);
    PipelineContext concurrent = context_for(concurrent_rig);
    concurrent.concurrency = 4;

    const RunRecord a =
        run_pipeline(bundle.policies, bundle.taxonomy, baseline_variant(),
                     testutil::test_profile(), ModelParameters{}, sequential, "t");
    const RunRecord b =
        run_pipeline(bundle.policies, bundle.taxonomy, baseline_variant(),
                     testutil::test_profile(), ModelParameters{}, concurrent, "t");
    CHECK(a.predictions == b.predictions);
    CHECK(a.exchanges == b.exchanges);
}

TEST_CASE("run record JSON round trip") {
    const CorpusBundle bundle = tiny_corpus(2, 2);
    auto rig = testutil::make_rig();
    rig.transport->set_default_text("Label 0: Yes\nLabel 1: No\nstray line");

    RunRecord record =
        run_pipeline(bundle.policies, bundle.taxonomy, final_variant(), testutil::test_profile(),
                     ModelParameters{}, context_for(rig), "roundtrip");
    // final variant needs shots; expect failures recorded instead
    record = run_pipeline(bundle.policies, bundle.taxonomy, baseline_variant(),
                          testutil::test_profile(), ModelParameters{}, context_for(rig),
                          "roundtrip");

    const auto dir = testutil::temp_dir("run-record");
    save_run_record(dir / "record.json", record);
    const RunRecord loaded = load_run_record(dir / "record.json");
    CHECK(loaded.run_id == record.run_id);
    CHECK(loaded.predictions == record.predictions);
    CHECK(loaded.exchanges == record.exchanges);
    CHECK(loaded.variant == record.variant);
    CHECK(loaded.params == record.params);
}

TEST_CASE("estimate_prompt_overhead counts the wrapper, not the policy") {
    const LabelTaxonomy taxonomy = testutil::email_phone_taxonomy();
    const TokenCounter counter = TokenCounter::heuristic();
    const long long overhead =
        estimate_prompt_overhead(taxonomy, baseline_variant(), {}, counter);
    CHECK(overhead > 0);

    // a longer policy does not change the overhead estimate
    const long long again =
        estimate_prompt_overhead(taxonomy, baseline_variant(), {}, counter);
    CHECK(overhead == again);
}

TEST_CASE("split_test: adoption on strict F1 improvement with incremental baselines") {
    const CorpusBundle bundle = tiny_corpus(1, 2);
    AnnotationSet truth;
    truth.set_policy_level("p0", "l0", true);
    truth.set_policy_level("p0", "l1", true);

    auto rig = testutil::make_rig();
    // baseline prompt answers one label; boundary-sentence prompts answer both
    rig.transport->add_rule({"The following text is a privacy policy."}, [] {
        ScriptedTransport::Entry entry;
        entry.text = "Label 0: Yes\nLabel 1: Yes";
        return entry;
    }());
    rig.transport->set_default_text("Label 0: Yes\nLabel 1: No");

    std::vector<Technique> techniques(4);
    techniques[0].name = "A (baseline)";
    techniques[1].name = "B (boundary)";
    techniques[1].patch.data_boundary = DataBoundary::sentence;
    techniques[2].name = "C (no change)";
    techniques[3].name = "D (bottom, override adopt)";
    techniques[3].patch.data_placement = DataPlacement::bottom;
    techniques[3].adopt_override = false;

    const SplitTestResult result =
        split_test(bundle.policies, truth, bundle.taxonomy, techniques, testutil::test_profile(),
                   ModelParameters{}, context_for(rig));

    REQUIRE(result.rows.size() == 4);
    CHECK(result.rows[0].adopted);  // first incumbent
    CHECK(result.rows[0].metrics.f1 == doctest::Approx(2.0 / 3.0));

    CHECK(result.rows[1].adopted);
    CHECK(result.rows[1].metrics.f1 == doctest::Approx(1.0));
    CHECK(result.rows[1].delta_f1 == doctest::Approx(1.0 - 2.0 / 3.0));

    // C equals the incumbent B: delta 0, not adopted
    CHECK_FALSE(result.rows[2].adopted);
    CHECK(result.rows[2].delta_f1 == doctest::Approx(0.0));

    // D scores the same but carries a manual override
    CHECK_FALSE(result.rows[3].adopted);

    // final incumbent is B's variant
    CHECK(result.final_variant.data_boundary == DataBoundary::sentence);
    CHECK(result.final_variant.data_placement == DataPlacement::top);
}

TEST_CASE("split_test: a technique that fails on every policy aborts") {
    const CorpusBundle bundle = tiny_corpus(1, 1);
    auto rig = testutil::make_rig();
    ScriptedTransport::Entry broken;
    broken.status = 400;
    rig.transport->push(broken);

    std::vector<Technique> techniques(1);
    techniques[0].name = "broken";
    CHECK_THROWS_AS(split_test(bundle.policies, AnnotationSet{}, bundle.taxonomy, techniques,
                               testutil::test_profile(), ModelParameters{}, context_for(rig)),
                    Error);
}

TEST_CASE("split test CSV has the comparison-table columns") {
    SplitTestResult result;
    SplitTestRow row;
    row.technique = "Baseline prompt";
    row.metrics.accuracy = 0.793;
    row.metrics.precision = 0.785;
    row.metrics.recall = 0.922;
    row.metrics.f1 = 0.848;
    result.rows.push_back(row);

    CHECK(result.csv() ==
          "technique,accuracy,precision,recall,f1\nBaseline prompt,0.793,0.785,0.922,0.848\n");
}

TEST_CASE("metrics JSON is stable and parseable") {
    const LabelTaxonomy taxonomy = testutil::email_phone_taxonomy();
    AnnotationSet truth;
    truth.set_policy_level("p1", "email", true);
    std::map<std::string, PracticeVector> predictions;
    predictions["p1"] = vector_of(taxonomy, {Answer::yes, Answer::no});

    const MetricsReport report = score(predictions, truth, taxonomy);
    const std::string first = metrics_to_json(report);
    const std::string second = metrics_to_json(score(predictions, truth, taxonomy));
    CHECK(first == second);

    const json doc = json::parse(first);
    CHECK(doc.at("f1").get<double>() == 1.0);
    CHECK(doc.at("counts").at("tp").get<long long>() == 1);
    CHECK(doc.at("per_label").contains("email"));
    CHECK(doc.at("macro").contains("precision"));
}
