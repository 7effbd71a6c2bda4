#include "doctest.h"

#include <fstream>
#include <sstream>

#include "json.hpp"

#include "helpers.hpp"
#include "policyprobe/cli.hpp"
#include "policyprobe/corpus.hpp"
#include "policyprobe/evaluation.hpp"
#include "policyprobe/parsing.hpp"

using namespace policyprobe;
using nlohmann::json;

namespace {

struct CliResult {
    int exit_code = 0;
    std::string out;
    std::string err;
};

CliResult run_cli(std::vector<std::string> args,
                  std::shared_ptr<HttpTransport> transport = nullptr) {
    std::ostringstream out;
    std::ostringstream err;
    cli::CliDeps deps;
    deps.transport_override = std::move(transport);
    deps.out = &out;
    deps.err = &err;
    const int code = cli::run(args, deps);
    return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    REQUIRE(in);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

std::string golden_corpus() { return (testutil::fixtures() / "golden_corpus").string(); }

}  // namespace

TEST_CASE("estimate: throughput line matches the documented shape") {
    const CliResult result =
        run_cli({"estimate", "--tpm", "300000", "--tokens-per-policy", "6652"});
    CHECK(result.exit_code == 0);
    CHECK(result.out == "45 policies/min\n");
}

TEST_CASE("estimate: costs and break-even from explicit prices") {
    const CliResult result = run_cli({"estimate", "--tokens-per-policy", "6652", "--tokens-out",
                                      "600", "--price-in", "0.01", "--price-out", "0.03",
                                      "--hourly-rate", "10", "--annotators", "3",
                                      "--hours-per-policy", "1.8667", "--policy-count", "100"});
    CHECK(result.exit_code == 0);
    CHECK(result.out.find("llm cost/policy: $0.08452") != std::string::npos);
    CHECK(result.out.find("annotation cost: $5,600.10") != std::string::npos);
    CHECK(result.out.find("break-even:") != std::string::npos);
}

TEST_CASE("estimate: curve CSVs are written") {
    const auto dir = testutil::temp_dir("curves");
    const CliResult result =
        run_cli({"estimate", "--tokens-per-policy", "1000", "--tokens-out", "0", "--price-in",
                 "0.01", "--tpm", "300000", "--curves", "1:5", "--curves-dir", dir.string()});
    CHECK(result.exit_code == 0);
    const std::string cost_csv = slurp(dir / "cost_curves.csv");
    CHECK(cost_csv.find("n_policies,model,annotation_fixed\n") == 0);
    CHECK(slurp(dir / "time_curves.csv").find("n_policies,model\n") == 0);
}

TEST_CASE("usage errors exit 2, domain errors exit 1") {
    CHECK(run_cli({"frobnicate"}).exit_code == 2);
    CHECK(run_cli({}).exit_code == 2);
    CHECK(run_cli({"evaluate", "--run", "/nonexistent", "--truth", "/nonexistent"}).exit_code == 1);
    CHECK(run_cli({"estimate"}).exit_code == 1);  // nothing to estimate
    CHECK(run_cli({"--help"}).exit_code == 0);
}

TEST_CASE("ingest copies a corpus into canonical form") {
    const auto dir = testutil::temp_dir("cli-ingest");
    const CliResult result = run_cli(
        {"ingest", "--input", golden_corpus(), "--output", (dir / "out").string()});
    CHECK(result.exit_code == 0);
    CHECK(result.out.find("ingested 8 policies") != std::string::npos);
    CHECK(load_corpus(dir / "out") == load_corpus(golden_corpus()));
}

TEST_CASE("split writes a coverage-complete split file") {
    const auto dir = testutil::temp_dir("cli-split");
    const auto split_file = dir / "split.json";
    const CliResult result = run_cli({"split", "--corpus", golden_corpus(), "--ratio", "0.5",
                                      "--seed", "3", "--output", split_file.string()});
    CHECK(result.exit_code == 0);

    const json doc = json::parse(slurp(split_file));
    std::set<std::string> all;
    for (const auto& id : doc.at("experimental")) all.insert(id.get<std::string>());
    for (const auto& id : doc.at("control")) all.insert(id.get<std::string>());
    CHECK(all.size() == 8);
    CHECK(doc.at("experimental").size() == 4);
    CHECK(result.out.find("experimental: 4 policies") != std::string::npos);
}

TEST_CASE("analyze + evaluate on the scripted mock, never touching the network") {
    const auto dir = testutil::temp_dir("cli-analyze");
    const CliResult analyze = run_cli(
        {"analyze", "--corpus", golden_corpus(), "--variant", "golden", "--config",
         (testutil::fixtures() / "golden_config.toml").string(), "--mock",
         (testutil::fixtures() / "golden_mock.json").string(), "--run-dir", dir.string(),
         "--run-id", "r1"});
    REQUIRE(analyze.exit_code == 0);
    CHECK(analyze.out.find("analyzed 8/8 policies") != std::string::npos);

    const RunRecord record = load_run_record(dir / "r1" / "record.json");
    CHECK(record.predictions.size() == 8);
    CHECK(record.failures.empty());
    // the DashRide mock answers only 4 of 10 labels
    CHECK(record.predictions.at("p3").count(Answer::unanswered) == 6);

    const CliResult evaluate = run_cli(
        {"evaluate", "--run", (dir / "r1").string(), "--truth",
         (testutil::fixtures() / "golden_corpus" / "annotations.json").string()});
    REQUIRE(evaluate.exit_code == 0);
    // accuracy 71/80: the nearest double is a hair under 0.8875
    CHECK(evaluate.out.find("accuracy = 0.887") != std::string::npos);
    CHECK(evaluate.out.find("precision = 0.900") != std::string::npos);
    CHECK(evaluate.out.find("recall = 0.818") != std::string::npos);
    CHECK(evaluate.out.find("f1 = 0.857") != std::string::npos);
    CHECK(std::filesystem::exists(dir / "r1" / "metrics.json"));
    CHECK(std::filesystem::exists(dir / "r1" / "cache.bin"));
    CHECK(std::filesystem::exists(dir / "r1" / "config.json"));
}

TEST_CASE("analyze --mock uses the scripted transport: zero live traffic") {
    // inject a transport and verify analyze talks only to it
    auto transport = std::make_shared<ScriptedTransport>();
    transport->set_default_text("Email address: No");

    const auto dir = testutil::temp_dir("cli-injected");
    const CliResult result = run_cli({"analyze", "--corpus", golden_corpus(), "--variant",
                                      "baseline", "--policies", "p0", "--run-dir", dir.string(),
                                      "--run-id", "r1"},
                                     transport);
    CHECK(result.exit_code == 0);
    CHECK(transport->request_count() == 1);
}

TEST_CASE("evaluate on a perfect mock run reports f1 = 1.000") {
    // a mock whose answers equal the ground truth for p0
    auto transport = std::make_shared<ScriptedTransport>();
    transport->set_default_text(
        "Email address: Yes\nPhone number: Yes\nLocation data: Yes\nCookies: No\n"
        "Device identifiers: No\nIP address: No\nContact list: No\nBrowsing history: No\n"
        "Payment information: No\nHealth data: Yes");

    const auto dir = testutil::temp_dir("cli-perfect");
    REQUIRE(run_cli({"analyze", "--corpus", golden_corpus(), "--variant", "baseline",
                     "--policies", "p0", "--run-dir", dir.string(), "--run-id", "r1"},
                    transport)
                .exit_code == 0);

    const CliResult evaluate = run_cli(
        {"evaluate", "--run", (dir / "r1").string(), "--truth",
         (testutil::fixtures() / "golden_corpus" / "annotations.json").string()});
    CHECK(evaluate.exit_code == 0);
    CHECK(evaluate.out.find("f1 = 1.000") != std::string::npos);
}

TEST_CASE("abtest reproduces the golden comparison table") {
    const auto dir = testutil::temp_dir("cli-abtest");
    const CliResult result = run_cli(
        {"abtest", "--config", (testutil::fixtures() / "abtest.toml").string(), "--corpus",
         (testutil::fixtures() / "abtest_corpus").string(), "--mock",
         (testutil::fixtures() / "abtest_mock.json").string(), "--policies", "pa,pb", "--run-dir",
         dir.string(), "--output", (dir / "abtest.csv").string()});
    REQUIRE(result.exit_code == 0);

    CHECK(slurp(dir / "abtest.csv") == slurp(testutil::fixtures() / "abtest_golden.csv"));
}

TEST_CASE("audit subcommand produces a report and per-slot CSV") {
    auto transport = std::make_shared<ScriptedTransport>();
    transport->set_default_text("Email address: Yes");

    const auto dir = testutil::temp_dir("cli-audit");
    const CliResult result = run_cli(
        {"audit", "--corpus", golden_corpus(), "--variant", "baseline", "--policies", "p0",
         "--repeats", "2", "--days", "1", "--times", "09:00,12:00", "--no-wait", "--output",
         (dir / "report.json").string(), "--csv", (dir / "slots.csv").string()},
        transport);
    REQUIRE(result.exit_code == 0);
    CHECK(result.out.find("consistency = 1.0000") != std::string::npos);

    const json report = json::parse(slurp(dir / "report.json"));
    CHECK(report.at("total").get<long long>() == 4);
    CHECK(report.at("consistency").get<double>() == 1.0);
    CHECK(slurp(dir / "slots.csv").find("day,time_of_day") == 0);
}

TEST_CASE("export-finetune writes one JSONL line per chunk") {
    const auto dir = testutil::temp_dir("cli-finetune");
    const auto output = dir / "train.jsonl";
    const CliResult result =
        run_cli({"export-finetune", "--corpus", golden_corpus(), "--context-limit", "4096",
                 "--variant", "final", "--output", output.string()});
    REQUIRE(result.exit_code == 0);

    const std::string jsonl = slurp(output);
    const auto lines = std::count(jsonl.begin(), jsonl.end(), '\n');
    CHECK(lines >= 8);  // at least one chunk per policy
    CHECK(result.out.find(std::to_string(lines) + " training examples") != std::string::npos);

    // spot-check the first line parses and ends with an assistant target
    const json first = json::parse(jsonl.substr(0, jsonl.find('\n')));
    CHECK(first.at("messages").back().at("role") == "assistant");
}
