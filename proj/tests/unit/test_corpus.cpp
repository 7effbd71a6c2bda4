#include "doctest.h"

#include <fstream>
#include <random>
#include <sstream>

#include "helpers.hpp"
#include "policyprobe/corpus.hpp"
#include "policyprobe/errors.hpp"
#include "policyprobe/rng.hpp"

using namespace policyprobe;

TEST_CASE("segment_paragraphs: empty input yields empty list") {
    CHECK(segment_paragraphs("").empty());
    CHECK(segment_paragraphs("\n\n\n").empty());
    CHECK(segment_paragraphs("   \n \t \n  ").empty());
}

TEST_CASE("segment_paragraphs: blank-line rule") {
    const auto paragraphs = segment_paragraphs("A\n\nB");
    REQUIRE(paragraphs.size() == 2);
    CHECK(paragraphs[0].index == 0);
    CHECK(paragraphs[0].text == "A");
    CHECK(paragraphs[1].index == 1);
    CHECK(paragraphs[1].text == "B");
}

TEST_CASE("segment_paragraphs: CRLF normalization and whitespace-only blank lines") {
    const auto paragraphs = segment_paragraphs("first line\r\nsecond line\r\n \t \r\nnext block\r");
    REQUIRE(paragraphs.size() == 2);
    CHECK(paragraphs[0].text == "first line\nsecond line");
    CHECK(paragraphs[1].text == "next block");
}

TEST_CASE("segment_paragraphs: multi-blank-line runs collapse") {
    const auto paragraphs = segment_paragraphs("a\n\n\n\nb\n\n\nc");
    REQUIRE(paragraphs.size() == 3);
    CHECK(paragraphs[2].text == "c");
}

TEST_CASE("policy document reconstruction invariant") {
    const std::string raw = "Intro text.\r\n\r\nWe collect emails.\n   \nWe use cookies.\n";
    const PolicyDocument doc = make_policy_document("p", "src", raw);

    std::string joined;
    for (std::size_t i = 0; i < doc.paragraphs.size(); ++i) {
        if (i > 0) joined += kParagraphDelimiter;
        joined += doc.paragraphs[i].text;
        CHECK(doc.paragraphs[i].index == i);
    }
    CHECK(joined == doc.full_text);
}

TEST_CASE("12-block fixture matches an independent blank-line scan") {
    // independent oracle: count runs of non-blank lines
    std::string fixture;
    for (int i = 0; i < 12; ++i) {
        fixture += "Block " + std::to_string(i) + " sentence one.\nBlock " + std::to_string(i) +
                   " sentence two.";
        fixture += (i % 3 == 0) ? "\n\n" : "\n\n\n";
    }

    std::size_t oracle_blocks = 0;
    bool in_block = false;
    std::istringstream lines(fixture);
    std::string line;
    while (std::getline(lines, line)) {
        const bool blank = line.find_first_not_of(" \t") == std::string::npos;
        if (!blank && !in_block) ++oracle_blocks;
        in_block = !blank;
    }
    CHECK(oracle_blocks == 12);

    CHECK(segment_paragraphs(fixture).size() == oracle_blocks);
}

TEST_CASE("load_corpus: empty directory yields empty bundle") {
    const auto dir = testutil::temp_dir("empty-corpus");
    const CorpusBundle bundle = load_corpus(dir);
    CHECK(bundle.policies.empty());
    CHECK(bundle.annotations.empty());
    CHECK(bundle.taxonomy.empty());
}

TEST_CASE("load_corpus: missing path and unknown format") {
    CHECK_THROWS_AS(load_corpus("/nonexistent/corpus"), CorpusError);
    CHECK_THROWS_AS(load_corpus(testutil::fixtures() / "golden_corpus", "mystery-format"),
                    CorpusError);
}

TEST_CASE("corpus round-trip: load, save, load identical") {
    const CorpusBundle bundle = load_corpus(testutil::fixtures() / "golden_corpus");
    CHECK(bundle.policies.size() == 8);
    CHECK(bundle.taxonomy.size() == 10);
    CHECK(bundle.annotations.has_segment_annotations());

    const auto dir = testutil::temp_dir("roundtrip-corpus");
    save_corpus(dir, bundle);
    const CorpusBundle reloaded = load_corpus(dir);
    CHECK(reloaded == bundle);
}

TEST_CASE("one-policy corpus with two annotations") {
    const auto dir = testutil::temp_dir("one-policy");
    CorpusBundle bundle;
    bundle.policies.push_back(make_policy_document("p1", "test", "We collect emails."));
    bundle.taxonomy = testutil::email_phone_taxonomy();
    bundle.annotations.set_policy_level("p1", "email", true);
    bundle.annotations.set_policy_level("p1", "phone", false);
    save_corpus(dir, bundle);

    const CorpusBundle loaded = load_corpus(dir);
    CHECK(loaded.policies.size() == 1);
    CHECK(loaded.annotations.size() == 2);
    CHECK(loaded.annotations.policy_truth("p1", "email"));
    CHECK_FALSE(loaded.annotations.policy_truth("p1", "phone"));
}

TEST_CASE("schema violations report the offending record") {
    const auto dir = testutil::temp_dir("bad-corpus");

    SUBCASE("corpus record missing policy_id") {
        std::ofstream(dir / "corpus.json") << R"([{"source_name": "x", "paragraphs": ["a"]}])";
        try {
            load_corpus(dir);
            FAIL("expected CorpusError");
        } catch (const CorpusError& e) {
            CHECK(std::string(e.what()).find("record 0") != std::string::npos);
        }
    }

    SUBCASE("annotation references unknown label") {
        std::ofstream(dir / "corpus.json")
            << R"([{"policy_id": "p1", "source_name": "x", "paragraphs": ["a"]}])";
        std::ofstream(dir / "taxonomy.json")
            << R"([{"label_id": "email", "display_name": "Email", "definition": "mail"}])";
        std::ofstream(dir / "annotations.json")
            << R"([{"policy_id": "p1", "label_id": "bogus", "disclosed": true}])";
        CHECK_THROWS_WITH_AS(load_corpus(dir), "annotation references unknown label_id 'bogus'",
                             CorpusError);
    }

    SUBCASE("annotation references unknown policy") {
        std::ofstream(dir / "corpus.json")
            << R"([{"policy_id": "p1", "source_name": "x", "paragraphs": ["a"]}])";
        std::ofstream(dir / "taxonomy.json")
            << R"([{"label_id": "email", "display_name": "Email", "definition": "mail"}])";
        std::ofstream(dir / "annotations.json")
            << R"([{"policy_id": "p9", "label_id": "email", "disclosed": true}])";
        CHECK_THROWS_AS(load_corpus(dir), CorpusError);
    }

    SUBCASE("segment annotation beyond paragraph count") {
        std::ofstream(dir / "corpus.json")
            << R"([{"policy_id": "p1", "source_name": "x", "paragraphs": ["a"]}])";
        std::ofstream(dir / "taxonomy.json")
            << R"([{"label_id": "email", "display_name": "Email", "definition": "mail"}])";
        std::ofstream(dir / "annotations.json")
            << R"([{"policy_id": "p1", "paragraph_index": 5, "label_id": "email", "disclosed": true}])";
        CHECK_THROWS_AS(load_corpus(dir), CorpusError);
    }

    SUBCASE("duplicate taxonomy label") {
        std::ofstream(dir / "taxonomy.json")
            << R"([{"label_id": "email", "display_name": "Email", "definition": "mail"},
                   {"label_id": "email", "display_name": "Email 2", "definition": "mail again"}])";
        CHECK_THROWS_AS(load_corpus(dir), CorpusError);
    }
}

TEST_CASE("custom corpus adapters can be registered") {
    register_corpus_format("single-file-test", [](const std::filesystem::path& path) {
        CorpusBundle bundle;
        std::ifstream in(path);
        std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        bundle.policies.push_back(make_policy_document("only", path.filename().string(), text));
        return bundle;
    });

    const auto formats = registered_corpus_formats();
    CHECK(std::find(formats.begin(), formats.end(), "single-file-test") != formats.end());

    const auto dir = testutil::temp_dir("adapter");
    std::ofstream(dir / "policy.txt") << "First.\n\nSecond.";
    const CorpusBundle bundle = load_corpus(dir / "policy.txt", "single-file-test");
    REQUIRE(bundle.policies.size() == 1);
    CHECK(bundle.policies[0].paragraphs.size() == 2);
}

namespace {

// n synthetic policies; label l is positive for policies whose index is a
// multiple of (l + 2), which yields uneven label frequencies
CorpusBundle synthetic_bundle(std::size_t policy_count, std::size_t label_count) {
    CorpusBundle bundle;
    bundle.taxonomy = testutil::numbered_taxonomy(label_count);
    for (std::size_t i = 0; i < policy_count; ++i) {
        const std::string id = (i < 10 ? "p0" : "p") + std::to_string(i);
        bundle.policies.push_back(make_policy_document(id, "synthetic", "Policy body " + id + "."));
        for (std::size_t l = 0; l < label_count; ++l) {
            if (i % (l + 2) == 0)
                bundle.annotations.set_policy_level(id, "l" + std::to_string(l), true);
        }
    }
    return bundle;
}

}  // namespace

TEST_CASE("stratified_split: two identical policies, ratio 0.5") {
    CorpusBundle bundle;
    bundle.policies.push_back(make_policy_document("a", "s", "Same text."));
    bundle.policies.push_back(make_policy_document("b", "s", "Same text."));
    bundle.annotations.set_policy_level("a", "email", true);
    bundle.annotations.set_policy_level("b", "email", true);

    const SplitResult split = stratified_split(bundle.policies, bundle.annotations, 0.5, 1);
    CHECK(split.experimental.size() == 1);
    CHECK(split.control.size() == 1);
}

TEST_CASE("stratified_split: coverage, disjointness, determinism") {
    const CorpusBundle bundle = synthetic_bundle(20, 5);
    const SplitResult split = stratified_split(bundle.policies, bundle.annotations, 0.5, 42);

    std::set<std::string> all;
    for (const auto& policy : bundle.policies) all.insert(policy.policy_id);
    std::set<std::string> joined = split.experimental;
    joined.insert(split.control.begin(), split.control.end());
    CHECK(joined == all);
    for (const auto& id : split.experimental) CHECK(split.control.count(id) == 0);

    // same seed, same split
    CHECK(stratified_split(bundle.policies, bundle.annotations, 0.5, 42) == split);
}

TEST_CASE("stratified_split: 64 policies at ratio 33/64 gives 33 and 31") {
    const CorpusBundle bundle = synthetic_bundle(64, 6);
    const SplitResult split = stratified_split(bundle.policies, bundle.annotations, 33.0 / 64.0, 9);
    CHECK(split.experimental.size() == 33);
    CHECK(split.control.size() == 31);
}

TEST_CASE("stratified_split: errors") {
    CorpusBundle bundle;
    bundle.policies.push_back(make_policy_document("only", "s", "text"));
    CHECK_THROWS_AS(stratified_split(bundle.policies, bundle.annotations, 0.5, 1), CorpusError);

    const CorpusBundle two = synthetic_bundle(2, 1);
    CHECK_THROWS_AS(stratified_split(two.policies, two.annotations, 0.0, 1), CorpusError);
    CHECK_THROWS_AS(stratified_split(two.policies, two.annotations, 1.0, 1), CorpusError);
}

TEST_CASE("stratified_split: greedy imbalance near brute-force optimum") {
    // oracle: best imbalance over many random balanced assignments
    const CorpusBundle bundle = synthetic_bundle(20, 6);
    std::vector<std::string> ids;
    for (const auto& policy : bundle.policies) ids.push_back(policy.policy_id);

    std::mt19937_64 rng(7);
    double best = 1e18;
    for (int trial = 0; trial < 4000; ++trial) {
        deterministic_shuffle(ids, rng);
        SplitResult candidate;
        for (std::size_t i = 0; i < ids.size(); ++i)
            (i < ids.size() / 2 ? candidate.experimental : candidate.control).insert(ids[i]);
        best = std::min(best, split_label_imbalance(bundle.policies, bundle.annotations, candidate));
    }

    const SplitResult greedy = stratified_split(bundle.policies, bundle.annotations, 0.5, 11);
    const double achieved = split_label_imbalance(bundle.policies, bundle.annotations, greedy);
    CHECK(achieved <= best + 2.0);
}

TEST_CASE("mean positive annotations per policy") {
    CorpusBundle bundle = synthetic_bundle(4, 3);
    // positives: p00 has l0,l1,l2; p02 has l0; p03 has l1 -> 5 over 4 policies
    std::set<std::string> everyone;
    for (const auto& policy : bundle.policies) everyone.insert(policy.policy_id);
    CHECK(mean_positive_annotations_per_policy(bundle.policies, bundle.annotations, everyone) ==
          doctest::Approx(5.0 / 4.0));
    CHECK(mean_positive_annotations_per_policy(bundle.policies, bundle.annotations, {}) == 0.0);
}

TEST_CASE("annotation set: policy truth falls back to segment OR") {
    AnnotationSet annotations;
    annotations.set_segment_level("p", 0, "email", false);
    annotations.set_segment_level("p", 2, "email", true);
    CHECK(annotations.policy_truth("p", "email"));
    CHECK_FALSE(annotations.policy_truth("p", "phone"));

    // explicit policy-level entry wins
    annotations.set_policy_level("p", "email", false);
    CHECK_FALSE(annotations.policy_truth("p", "email"));
}

TEST_CASE("taxonomy subset preserves order and validates ids") {
    const LabelTaxonomy taxonomy = testutil::numbered_taxonomy(4);
    const LabelTaxonomy subset = taxonomy.subset({"l2", "l0"});
    REQUIRE(subset.size() == 2);
    CHECK(subset.labels()[0].label_id == "l0");
    CHECK(subset.labels()[1].label_id == "l2");
    CHECK_THROWS_AS(taxonomy.subset({"zz"}), CorpusError);
}
