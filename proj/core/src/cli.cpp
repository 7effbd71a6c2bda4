#include "policyprobe/cli.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "policyprobe/audit.hpp"
#include "policyprobe/config.hpp"
#include "policyprobe/corpus.hpp"
#include "policyprobe/economics.hpp"
#include "policyprobe/errors.hpp"
#include "policyprobe/evaluation.hpp"
#include "policyprobe/finetune.hpp"
#include "policyprobe/parsing.hpp"
#include "policyprobe/prompting.hpp"
#include "policyprobe/provider.hpp"

namespace policyprobe::cli {

using nlohmann::json;

namespace {

std::atomic<bool> g_interrupted{false};

void handle_interrupt(int) { g_interrupted.store(true); }

struct InterruptGuard {
    InterruptGuard() {
        g_interrupted.store(false);
        previous = std::signal(SIGINT, handle_interrupt);
    }
    ~InterruptGuard() { std::signal(SIGINT, previous); }
    void (*previous)(int) = SIG_DFL;
};

std::vector<std::string> split_csv_flag(const std::string& value) {
    std::vector<std::string> out;
    std::string current;
    for (const char c : value) {
        if (c == ',') {
            if (!current.empty()) out.push_back(current);
            current.clear();
        } else {
            current.push_back(c);
        }
    }
    if (!current.empty()) out.push_back(current);
    return out;
}

std::string default_run_id() {
    const auto now = std::chrono::system_clock::now().time_since_epoch();
    return "run-" +
           std::to_string(std::chrono::duration_cast<std::chrono::milliseconds>(now).count());
}

json variant_json(const PromptVariant& variant) {
    json doc = {
        {"data_boundary", std::string(to_string(variant.data_boundary))},
        {"data_placement", std::string(to_string(variant.data_placement))},
        {"task_style", std::string(to_string(variant.task_style))},
        {"message_split", std::string(to_string(variant.message_split))},
        {"pruning", variant.pruning},
        {"segmentation", std::string(to_string(variant.segmentation))},
        {"shots", variant.shots},
    };
    if (variant.system_instruction) doc["system_instruction"] = *variant.system_instruction;
    return doc;
}

json params_json(const ModelParameters& params) {
    json doc = {
        {"temperature", params.temperature},
        {"top_p", params.top_p},
        {"max_output_tokens", params.max_output_tokens},
    };
    if (params.seed) doc["seed"] = *params.seed;
    return doc;
}

void write_text_file(const std::filesystem::path& file, std::string_view text) {
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + file.string());
    out << text;
}

std::string metric_line(const std::string& name, double value) {
    char buffer[64];
    std::snprintf(buffer, sizeof(buffer), "%s = %.3f", name.c_str(), value);
    return buffer;
}

// Fallback profile for offline runs against the scripted transport.
ModelProfile mock_profile() {
    ModelProfile profile;
    profile.profile_id = "mock";
    profile.endpoint_url = "http://mock.invalid";
    profile.model_name = "mock-model";
    profile.context_limit = 128000;
    profile.tokens_per_minute = 1000000;
    return profile;
}

struct CommonRunFlags {
    std::string corpus_dir;
    std::string policies_csv;
    std::string split_file;
    std::string subset = "experimental";
    std::string variant_name = "final";
    std::string profile_id;
    std::string config_file;
    std::string mock_file;
    std::string templates_dir;
    std::uint64_t shots_seed = 1337;
    double chars_per_token = 4.0;
    long long response_reserve = 512;
    int concurrency = 1;

    // inline variant overrides on top of the preset
    int shots_override = -1;
    std::string segmentation_override;
    std::string boundary_override;
    std::string pruning_override;  // "on" | "off"
};

void add_common_run_flags(CLI::App* cmd, CommonRunFlags& flags, bool corpus_required = true) {
    auto* corpus = cmd->add_option("--corpus", flags.corpus_dir, "Canonical corpus directory");
    if (corpus_required) corpus->required();
    cmd->add_option("--policies", flags.policies_csv, "Comma-separated policy ids (default: all)");
    cmd->add_option("--split", flags.split_file, "split.json produced by the split subcommand");
    cmd->add_option("--subset", flags.subset, "Which side of --split to use")
        ->check(CLI::IsMember({"experimental", "control"}));
    cmd->add_option("--variant", flags.variant_name,
                    "Variant preset or [variants.<name>] from the config");
    cmd->add_option("--profile", flags.profile_id, "Model profile id from the config");
    cmd->add_option("--config", flags.config_file, "TOML-style configuration file");
    cmd->add_option("--mock", flags.mock_file, "Scripted mock transport (JSON); disables networking");
    cmd->add_option("--templates", flags.templates_dir, "Directory of prompt template overrides");
    cmd->add_option("--shots-seed", flags.shots_seed, "Seed for few-shot example selection");
    cmd->add_option("--chars-per-token", flags.chars_per_token, "Heuristic token counter ratio");
    cmd->add_option("--response-reserve", flags.response_reserve,
                    "Tokens reserved for the model response");
    cmd->add_option("--concurrency", flags.concurrency, "Concurrent policies in flight");
}

struct RunSetup {
    CorpusBundle bundle;
    std::vector<PolicyDocument> selection;
    std::set<std::string> experimental;  // shot pool when a split file is given
    Config config;
    PromptVariant variant;
    ModelProfile profile;
    ModelParameters params;
    PromptTemplates templates = PromptTemplates::defaults();
    std::shared_ptr<HttpTransport> transport;
    std::shared_ptr<Clock> clock;
    std::shared_ptr<RateLimiter> limiter;
    std::shared_ptr<ResponseCache> cache;
    std::shared_ptr<ChatClient> client;
};

std::set<std::string> read_split_side(const std::filesystem::path& file, const std::string& side) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw Error("cannot read split file " + file.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw Error(file.string() + ": " + e.what());
    }
    std::set<std::string> ids;
    for (const auto& id : doc.at(side)) ids.insert(id.get<std::string>());
    return ids;
}

RunSetup prepare_run(const CommonRunFlags& flags, const CliDeps& deps,
                     const std::filesystem::path& cache_file = {}) {
    RunSetup setup;
    setup.bundle = load_corpus(flags.corpus_dir);
    if (setup.bundle.taxonomy.empty())
        throw Error("corpus has no taxonomy.json; the task needs practice labels");

    std::set<std::string> wanted;
    if (!flags.policies_csv.empty()) {
        for (const auto& id : split_csv_flag(flags.policies_csv)) wanted.insert(id);
    } else if (!flags.split_file.empty()) {
        wanted = read_split_side(flags.split_file, flags.subset);
    }
    if (!flags.split_file.empty())
        setup.experimental = read_split_side(flags.split_file, "experimental");

    for (const auto& policy : setup.bundle.policies) {
        if (wanted.empty() || wanted.count(policy.policy_id) > 0)
            setup.selection.push_back(policy);
    }
    for (const auto& id : wanted) {
        if (setup.bundle.find_policy(id) == nullptr)
            throw Error("selection references unknown policy '" + id + "'");
    }
    if (setup.selection.empty()) throw Error("no policies selected");

    setup.config = flags.config_file.empty() ? Config::parse_string("")
                                             : Config::load_file(flags.config_file);
    setup.variant = variant_from_config(setup.config, flags.variant_name);
    if (flags.shots_override >= 0) setup.variant.shots = flags.shots_override;
    if (!flags.segmentation_override.empty())
        setup.variant.segmentation = segmentation_from_string(flags.segmentation_override);
    if (!flags.boundary_override.empty())
        setup.variant.data_boundary = data_boundary_from_string(flags.boundary_override);
    if (!flags.pruning_override.empty()) {
        if (flags.pruning_override != "on" && flags.pruning_override != "off")
            throw ConfigError("--pruning expects on or off");
        setup.variant.pruning = flags.pruning_override == "on";
    }

    if (!flags.profile_id.empty()) {
        if (setup.config.has_section("profiles." + flags.profile_id))
            setup.profile = profile_from_config(setup.config, flags.profile_id);
        else if (flags.profile_id == "mock")
            setup.profile = mock_profile();
        else
            throw ConfigError("unknown profile '" + flags.profile_id + "'");
    } else if (!flags.mock_file.empty() || deps.transport_override) {
        setup.profile = mock_profile();
    } else {
        throw ConfigError("--profile is required for live endpoints");
    }

    setup.params = params_from_config(setup.config);
    if (!flags.templates_dir.empty())
        setup.templates = PromptTemplates::load_directory(flags.templates_dir);

    // --mock (or an injected transport) never opens a network connection
    if (deps.transport_override)
        setup.transport = deps.transport_override;
    else if (!flags.mock_file.empty())
        setup.transport = ScriptedTransport::from_json_file(flags.mock_file);
    else
        setup.transport = make_http_transport();

    setup.clock = std::make_shared<SystemClock>();
    if (setup.profile.tokens_per_minute > 0)
        setup.limiter = std::make_shared<RateLimiter>(setup.profile.tokens_per_minute, setup.clock);
    if (!cache_file.empty()) setup.cache = std::make_shared<ResponseCache>(cache_file);

    setup.client = std::make_shared<ChatClient>(
        setup.transport, setup.clock,
        TokenCounter::heuristic(flags.chars_per_token), setup.limiter, setup.cache);
    return setup;
}

PipelineContext make_context(const RunSetup& setup, const CommonRunFlags& flags) {
    PipelineContext context;
    context.client = setup.client;
    context.templates = setup.templates;
    context.response_reserve = flags.response_reserve;
    context.concurrency = flags.concurrency;
    context.cancelled = [] { return g_interrupted.load(); };

    const bool has_segments = setup.bundle.annotations.has_segment_annotations();
    if (setup.variant.shots > 0 && !has_segments)
        throw Error("variant '" + flags.variant_name +
                    "' needs few-shot examples, but the corpus has no segment-level annotations");

    if (has_segments) {
        // shot pool: the experimental split when one is given, else the corpus
        std::vector<PolicyDocument> pool;
        for (const auto& policy : setup.bundle.policies) {
            if (setup.experimental.empty() || setup.experimental.count(policy.policy_id) > 0)
                pool.push_back(policy);
        }
        const auto annotations = setup.bundle.annotations;
        const auto taxonomy = setup.bundle.taxonomy;
        const std::uint64_t seed = flags.shots_seed;
        context.shot_provider = [annotations, pool, taxonomy, seed](const std::string& exclude,
                                                                    int count) {
            return select_shots(annotations, pool, taxonomy, count, seed, exclude);
        };
    }
    return context;
}

int cmd_ingest(const std::string& input, const std::string& format, const std::string& output,
               std::ostream& out) {
    const CorpusBundle bundle = load_corpus(input, format);
    save_corpus(output, bundle);
    out << "ingested " << bundle.policies.size() << " policies, "
        << bundle.annotations.size() << " annotations, " << bundle.taxonomy.size()
        << " labels into " << output << "\n";
    return 0;
}

int cmd_split(const std::string& corpus_dir, double ratio, std::uint64_t seed,
              const std::string& output, std::ostream& out) {
    const CorpusBundle bundle = load_corpus(corpus_dir);
    const SplitResult split = stratified_split(bundle.policies, bundle.annotations, ratio, seed);

    const json doc = {
        {"experimental", std::vector<std::string>(split.experimental.begin(),
                                                  split.experimental.end())},
        {"control", std::vector<std::string>(split.control.begin(), split.control.end())},
        {"ratio", ratio},
        {"seed", seed},
    };
    write_text_file(output, doc.dump(2) + "\n");

    out << "experimental: " << split.experimental.size() << " policies, mean annotations "
        << mean_positive_annotations_per_policy(bundle.policies, bundle.annotations,
                                                split.experimental)
        << "\n";
    out << "control: " << split.control.size() << " policies, mean annotations "
        << mean_positive_annotations_per_policy(bundle.policies, bundle.annotations, split.control)
        << "\n";
    out << "label imbalance (rms): "
        << split_label_imbalance(bundle.policies, bundle.annotations, split) << "\n";
    out << "wrote " << output << "\n";
    return 0;
}

int cmd_analyze(const CommonRunFlags& flags, const std::string& run_root, std::string run_id,
                const CliDeps& deps, std::ostream& out) {
    if (run_id.empty()) run_id = default_run_id();
    const std::filesystem::path run_dir = std::filesystem::path(run_root) / run_id;
    std::filesystem::create_directories(run_dir);

    RunSetup setup = prepare_run(flags, deps, run_dir / "cache.bin");
    const PipelineContext context = make_context(setup, flags);

    const json config_echo = {
        {"run_id", run_id},
        {"corpus", flags.corpus_dir},
        {"variant_name", flags.variant_name},
        {"variant", variant_json(setup.variant)},
        {"profile_id", setup.profile.profile_id},
        {"params", params_json(setup.params)},
        {"policies", [&] {
             std::vector<std::string> ids;
             for (const auto& policy : setup.selection) ids.push_back(policy.policy_id);
             return ids;
         }()},
        {"shots_seed", flags.shots_seed},
        {"response_reserve", flags.response_reserve},
        {"pruning", setup.variant.pruning},
    };
    write_text_file(run_dir / "config.json", config_echo.dump(2) + "\n");

    InterruptGuard guard;
    RunRecord record = run_pipeline(setup.selection, setup.bundle.taxonomy, setup.variant,
                                    setup.profile, setup.params, context, run_id);
    save_run_record(run_dir / "record.json", record);

    out << "analyzed " << record.predictions.size() << "/" << setup.selection.size()
        << " policies (" << record.failures.size() << " failed)\n";
    out << "run record: " << (run_dir / "record.json").string() << "\n";
    if (!record.failures.empty()) {
        for (const auto& [policy_id, message] : record.failures)
            std::cerr << "failed " << policy_id << ": " << message << "\n";
    }
    return record.predictions.empty() ? 1 : 0;
}

int cmd_evaluate(const std::string& run, const std::string& truth_file,
                 const std::string& taxonomy_file, std::string output, std::ostream& out) {
    std::filesystem::path record_file = run;
    if (std::filesystem::is_directory(record_file)) record_file /= "record.json";
    const RunRecord record = load_run_record(record_file);

    const AnnotationSet truth = load_annotations_file(truth_file);
    std::filesystem::path taxonomy_path = taxonomy_file;
    if (taxonomy_path.empty())
        taxonomy_path = std::filesystem::path(truth_file).parent_path() / "taxonomy.json";
    const LabelTaxonomy taxonomy = load_taxonomy_file(taxonomy_path);

    const MetricsReport report = score(record.predictions, truth, taxonomy);

    if (output.empty())
        output = (record_file.parent_path() / "metrics.json").string();
    write_text_file(output, metrics_to_json(report));

    out << metric_line("accuracy", report.accuracy) << "\n"
        << metric_line("precision", report.precision) << "\n"
        << metric_line("recall", report.recall) << "\n"
        << metric_line("f1", report.f1) << "\n"
        << metric_line("coverage", report.coverage) << "\n";
    out << "metrics: " << output << "\n";
    return 0;
}

int cmd_abtest(const CommonRunFlags& flags_in, const std::string& run_root, std::string output,
               const CliDeps& deps, std::ostream& out) {
    CommonRunFlags flags = flags_in;
    if (flags.config_file.empty()) throw ConfigError("abtest needs --config");
    const Config config = Config::load_file(flags.config_file);

    if (flags.corpus_dir.empty())
        flags.corpus_dir = config.get_string_or("abtest", "corpus", "");
    if (flags.corpus_dir.empty()) throw ConfigError("abtest needs --corpus or [abtest] corpus");
    if (flags.profile_id.empty())
        flags.profile_id = config.get_string_or("abtest", "profile", "");
    if (flags.variant_name.empty()) flags.variant_name = "baseline";

    const std::vector<Technique> techniques = techniques_from_config(config);
    if (techniques.empty()) throw ConfigError("no [technique.*] sections in " + flags.config_file);

    const std::filesystem::path run_dir = std::filesystem::path(run_root) / "abtest";
    std::filesystem::create_directories(run_dir);

    RunSetup setup = prepare_run(flags, deps, run_dir / "cache.bin");
    const PipelineContext context = make_context(setup, flags);

    InterruptGuard guard;
    const SplitTestResult result =
        split_test(setup.selection, setup.bundle.annotations, setup.bundle.taxonomy, techniques,
                   setup.profile, setup.params, context);

    if (output.empty()) output = (run_dir / "abtest.csv").string();
    write_text_file(output, result.csv());

    for (const auto& row : result.rows) {
        out << (row.adopted ? "adopted " : "        ") << row.technique << "  f1="
            << metric_line("", row.metrics.f1).substr(3) << "\n";
    }
    out << "comparison table: " << output << "\n";
    return 0;
}

int cmd_audit(const CommonRunFlags& flags, int repeats, int days, const std::string& times_csv,
              bool no_wait, const std::string& output, const std::string& csv_output,
              const CliDeps& deps, std::ostream& out) {
    RunSetup setup = prepare_run(flags, deps);
    const PipelineContext context = make_context(setup, flags);

    ConsistencySchedule schedule;
    schedule.repeats_per_slot = repeats;
    for (int day = 0; day < days; ++day) {
        for (const auto& time : split_csv_flag(times_csv)) schedule.slots.push_back({day, time});
    }
    for (const auto& policy : setup.selection) schedule.policy_ids.push_back(policy.policy_id);

    AuditOptions options;
    options.no_wait = no_wait;
    options.clock = setup.clock;

    InterruptGuard guard;
    const ConsistencyReport report =
        audit_consistency(schedule, setup.bundle.policies, setup.bundle.taxonomy, setup.variant,
                          setup.profile, setup.params, context, options);

    const json doc = {
        {"total", report.total},
        {"discrepancies", report.discrepancies},
        {"provider_failures", report.provider_failures},
        {"consistency", report.consistency},
        {"modal_response_hash", report.modal_response_hash},
    };
    if (!output.empty()) write_text_file(output, doc.dump(2) + "\n");
    if (!csv_output.empty()) write_text_file(csv_output, report.per_slot_csv());

    char buffer[64];
    std::snprintf(buffer, sizeof(buffer), "%.4f", report.consistency);
    out << "consistency = " << buffer << " (" << report.discrepancies << " discrepancies / "
        << report.total << " responses, " << report.provider_failures << " failures)\n";
    return 0;
}

int cmd_estimate(const std::string& config_file, const std::string& profile_id, long long tpm,
                 long long tokens_per_policy, long long tokens_out, const std::string& price_in,
                 const std::string& price_out, int annotators, double hours_per_policy,
                 const std::string& hourly_rate, long long policy_count,
                 const std::string& curves_range, const std::string& curves_dir,
                 std::ostream& out) {
    const Config config =
        config_file.empty() ? Config::parse_string("") : Config::load_file(config_file);

    std::optional<ModelProfile> profile;
    if (!profile_id.empty()) profile = profile_from_config(config, profile_id);

    AnnotationCostModel annotation = annotation_model_from_config(config);
    if (annotators > 0) annotation.annotators_per_policy = annotators;
    if (hours_per_policy > 0) annotation.hours_per_policy = hours_per_policy;
    if (!hourly_rate.empty()) annotation.hourly_rate = Money::parse(hourly_rate);
    if (policy_count > 0) annotation.policy_count = policy_count;

    LlmCostModel llm = llm_model_from_config(config, profile ? &*profile : nullptr);
    if (tokens_per_policy > 0) llm.tokens_in_per_policy = tokens_per_policy;
    if (tokens_out >= 0) llm.tokens_out_per_policy = tokens_out;
    if (!price_in.empty()) llm.price_in_per_1k = Money::parse(price_in);
    if (!price_out.empty()) llm.price_out_per_1k = Money::parse(price_out);

    if (tpm <= 0 && profile) tpm = profile->tokens_per_minute;

    bool printed = false;
    if (tpm > 0 && tokens_per_policy > 0) {
        out << throughput_policies_per_minute(tpm, tokens_per_policy) << " policies/min\n";
        printed = true;
    }

    const bool has_prices = llm.price_in_per_1k.micro() > 0 || llm.price_out_per_1k.micro() > 0;
    if (has_prices) {
        const Money per_policy = llm_cost_per_policy(llm);
        out << "llm cost/policy: " << per_policy.display() << "\n";
        out << "annotation cost: " << annotation_cost(annotation).display() << "\n";
        const BreakEven be = break_even(annotation, llm);
        if (be.infinite)
            out << "break-even: never (zero LLM cost)\n";
        else
            out << "break-even: " << be.policies << " policies\n";
        printed = true;
    }

    if (!curves_range.empty()) {
        long long first = 0;
        long long last = 0;
        long long step = 1;
        const auto colon1 = curves_range.find(':');
        if (colon1 == std::string::npos)
            throw ConfigError("--curves expects FIRST:LAST[:STEP]");
        first = std::stoll(curves_range.substr(0, colon1));
        const auto colon2 = curves_range.find(':', colon1 + 1);
        if (colon2 == std::string::npos) {
            last = std::stoll(curves_range.substr(colon1 + 1));
        } else {
            last = std::stoll(curves_range.substr(colon1 + 1, colon2 - colon1 - 1));
            step = std::stoll(curves_range.substr(colon2 + 1));
        }

        std::vector<CostCurveModel> models;
        std::vector<std::string> profile_ids =
            profile ? std::vector<std::string>{profile->profile_id} : profiles_in_config(config);
        for (const auto& id : profile_ids) {
            const ModelProfile p = profile_from_config(config, id);
            LlmCostModel model_llm = llm;
            model_llm.price_in_per_1k = p.price_in_per_1k;
            model_llm.price_out_per_1k = p.price_out_per_1k;
            const long long per_policy_tokens =
                model_llm.tokens_in_per_policy + model_llm.tokens_out_per_policy;
            models.push_back({id, llm_cost_per_policy(model_llm),
                              throughput_policies_per_minute(p.tokens_per_minute,
                                                             per_policy_tokens)});
        }
        if (models.empty() && has_prices) {
            const long long per_policy_tokens = llm.tokens_in_per_policy + llm.tokens_out_per_policy;
            models.push_back({"model", llm_cost_per_policy(llm),
                              tpm > 0 ? throughput_policies_per_minute(tpm, per_policy_tokens) : 0});
        }
        if (models.empty()) throw ConfigError("--curves needs profiles or prices");

        const CurveTable table =
            emit_curves(models, first, last, step, annotation_cost(annotation));
        const std::filesystem::path dir = curves_dir.empty() ? "." : curves_dir;
        std::filesystem::create_directories(dir);
        write_text_file(dir / "cost_curves.csv", table.cost_csv());
        write_text_file(dir / "time_curves.csv", table.time_csv());
        out << "wrote " << (dir / "cost_curves.csv").string() << " and "
            << (dir / "time_curves.csv").string() << "\n";
        printed = true;
    }

    if (!printed)
        throw ConfigError("nothing to estimate: pass --tpm/--tokens-per-policy, prices, or --curves");
    return 0;
}

int cmd_export_finetune(const CommonRunFlags& flags, long long context_limit,
                        const std::string& output, std::ostream& out) {
    const CorpusBundle bundle = load_corpus(flags.corpus_dir);
    if (bundle.taxonomy.empty()) throw Error("corpus has no taxonomy.json");

    std::set<std::string> wanted;
    if (!flags.policies_csv.empty()) {
        for (const auto& id : split_csv_flag(flags.policies_csv)) wanted.insert(id);
    } else if (!flags.split_file.empty()) {
        wanted = read_split_side(flags.split_file, flags.subset);
    }
    std::vector<PolicyDocument> selection;
    for (const auto& policy : bundle.policies) {
        if (wanted.empty() || wanted.count(policy.policy_id) > 0) selection.push_back(policy);
    }
    if (selection.empty()) throw Error("no policies selected");

    const Config config = flags.config_file.empty() ? Config::parse_string("")
                                                    : Config::load_file(flags.config_file);
    const PromptVariant variant = variant_from_config(config, flags.variant_name);
    PromptTemplates templates = PromptTemplates::defaults();
    if (!flags.templates_dir.empty())
        templates = PromptTemplates::load_directory(flags.templates_dir);

    if (context_limit <= 0 && !flags.profile_id.empty())
        context_limit = profile_from_config(config, flags.profile_id).context_limit;
    if (context_limit <= 0) throw ConfigError("export-finetune needs --context-limit or --profile");

    const TokenCounter counter = TokenCounter::heuristic(flags.chars_per_token);
    const PromptVariant training = finetune_training_variant(variant);
    const ChunkBudget budget{
        context_limit,
        estimate_prompt_overhead(bundle.taxonomy, training, {}, counter, templates),
        flags.response_reserve};

    const FineTuneExport data = export_finetune(selection, bundle.annotations, bundle.taxonomy,
                                                budget, counter, variant, templates);
    write_finetune_file(output, data);
    out << data.examples.size() << " training examples -> " << output << "\n";
    return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, const CliDeps& deps) {
    std::ostream& out = deps.out != nullptr ? *deps.out : std::cout;
    std::ostream& err = deps.err != nullptr ? *deps.err : std::cerr;

    CLI::App app{"privacy-policy practice extraction and evaluation pipeline", "policy-probe"};
    app.require_subcommand(1);

    // ingest
    std::string ingest_input;
    std::string ingest_format = "canonical";
    std::string ingest_output;
    auto* ingest = app.add_subcommand("ingest", "Convert a corpus into the canonical schema");
    ingest->add_option("--input", ingest_input, "Corpus path")->required();
    ingest->add_option("--format", ingest_format, "Registered corpus format");
    ingest->add_option("--output", ingest_output, "Output directory")->required();

    // split
    std::string split_corpus;
    double split_ratio = 0.5;
    std::uint64_t split_seed = 7;
    std::string split_output = "split.json";
    auto* split = app.add_subcommand("split", "Stratified experimental/control split");
    split->add_option("--corpus", split_corpus, "Canonical corpus directory")->required();
    split->add_option("--ratio", split_ratio, "Experimental fraction (0,1)");
    split->add_option("--seed", split_seed, "Deterministic seed");
    split->add_option("--output", split_output, "Split JSON output path");

    // analyze
    CommonRunFlags analyze_flags;
    std::string analyze_run_root = "runs";
    std::string analyze_run_id;
    auto* analyze = app.add_subcommand("analyze", "Extract practices from policies");
    add_common_run_flags(analyze, analyze_flags);
    analyze->add_option("--run-dir", analyze_run_root, "Directory for run outputs");
    analyze->add_option("--run-id", analyze_run_id, "Run id (default: timestamp)");
    analyze->add_option("--shots", analyze_flags.shots_override,
                        "Override the variant's shot count (0-3)");
    analyze->add_option("--segmentation", analyze_flags.segmentation_override,
                        "Override the variant's segmentation")
        ->check(CLI::IsMember(
            {"whole_policy", "per_paragraph", "per_label", "per_paragraph_and_label"}));
    analyze->add_option("--data-boundary", analyze_flags.boundary_override,
                        "Override the variant's data boundary")
        ->check(CLI::IsMember({"none", "sentence", "sentence_with_quotes"}));
    analyze->add_option("--pruning", analyze_flags.pruning_override,
                        "Override the variant's pruning pass (on|off)")
        ->check(CLI::IsMember({"on", "off"}));

    // evaluate
    std::string evaluate_run;
    std::string evaluate_truth;
    std::string evaluate_taxonomy;
    std::string evaluate_output;
    auto* evaluate = app.add_subcommand("evaluate", "Score a run against ground truth");
    evaluate->add_option("--run", evaluate_run, "Run directory or record.json")->required();
    evaluate->add_option("--truth", evaluate_truth, "annotations.json ground truth")->required();
    evaluate->add_option("--taxonomy", evaluate_taxonomy,
                         "taxonomy.json (default: next to --truth)");
    evaluate->add_option("--output", evaluate_output, "metrics.json output path");

    // abtest
    CommonRunFlags abtest_flags;
    abtest_flags.variant_name.clear();
    std::string abtest_run_root = "runs";
    std::string abtest_output;
    auto* abtest = app.add_subcommand("abtest", "Incremental split test over prompt techniques");
    add_common_run_flags(abtest, abtest_flags, /*corpus_required=*/false);
    abtest->add_option("--run-dir", abtest_run_root, "Directory for run outputs");
    abtest->add_option("--output", abtest_output, "Comparison CSV output path");

    // audit
    CommonRunFlags audit_flags;
    int audit_repeats = 1;
    int audit_days = 1;
    std::string audit_times = "09:00";
    bool audit_no_wait = false;
    std::string audit_output;
    std::string audit_csv;
    auto* audit = app.add_subcommand("audit", "Measure response consistency over a schedule");
    add_common_run_flags(audit, audit_flags);
    audit->add_option("--repeats", audit_repeats, "Repeats per slot");
    audit->add_option("--days", audit_days, "Number of days in the schedule");
    audit->add_option("--times", audit_times, "Comma-separated times of day (HH:MM)");
    audit->add_flag("--no-wait", audit_no_wait, "Run slots back-to-back without waiting");
    audit->add_option("--output", audit_output, "Consistency report JSON path");
    audit->add_option("--csv", audit_csv, "Per-slot consistency CSV path");

    // estimate
    std::string estimate_config;
    std::string estimate_profile;
    long long estimate_tpm = 0;
    long long estimate_tokens_per_policy = 0;
    long long estimate_tokens_out = -1;
    std::string estimate_price_in;
    std::string estimate_price_out;
    int estimate_annotators = 0;
    double estimate_hours = 0.0;
    std::string estimate_rate;
    long long estimate_policy_count = 0;
    std::string estimate_curves;
    std::string estimate_curves_dir;
    auto* estimate = app.add_subcommand("estimate", "Cost, throughput and break-even models");
    estimate->add_option("--config", estimate_config, "TOML-style configuration file");
    estimate->add_option("--profile", estimate_profile, "Model profile id from the config");
    estimate->add_option("--tpm", estimate_tpm, "Tokens-per-minute rate limit");
    estimate->add_option("--tokens-per-policy", estimate_tokens_per_policy,
                         "Tokens needed to process one policy");
    estimate->add_option("--tokens-out", estimate_tokens_out, "Output tokens per policy");
    estimate->add_option("--price-in", estimate_price_in, "Price per 1k input tokens");
    estimate->add_option("--price-out", estimate_price_out, "Price per 1k output tokens");
    estimate->add_option("--annotators", estimate_annotators, "Annotators per policy");
    estimate->add_option("--hours-per-policy", estimate_hours, "Annotation hours per policy");
    estimate->add_option("--hourly-rate", estimate_rate, "Annotator hourly rate");
    estimate->add_option("--policy-count", estimate_policy_count, "Annotated corpus size");
    estimate->add_option("--curves", estimate_curves, "Emit plot CSVs over FIRST:LAST[:STEP]");
    estimate->add_option("--curves-dir", estimate_curves_dir, "Directory for curve CSVs");

    // export-finetune
    CommonRunFlags finetune_flags;
    long long finetune_context_limit = 0;
    std::string finetune_output;
    auto* finetune = app.add_subcommand("export-finetune",
                                        "Emit a chat-format fine-tuning training file");
    add_common_run_flags(finetune, finetune_flags);
    finetune->add_option("--context-limit", finetune_context_limit, "Model context limit (tokens)");
    finetune->add_option("--output", finetune_output, "Training JSONL path")->required();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    try {
        if (ingest->parsed()) return cmd_ingest(ingest_input, ingest_format, ingest_output, out);
        if (split->parsed())
            return cmd_split(split_corpus, split_ratio, split_seed, split_output, out);
        if (analyze->parsed())
            return cmd_analyze(analyze_flags, analyze_run_root, analyze_run_id, deps, out);
        if (evaluate->parsed())
            return cmd_evaluate(evaluate_run, evaluate_truth, evaluate_taxonomy, evaluate_output,
                                out);
        if (abtest->parsed())
            return cmd_abtest(abtest_flags, abtest_run_root, abtest_output, deps, out);
        if (audit->parsed())
            return cmd_audit(audit_flags, audit_repeats, audit_days, audit_times, audit_no_wait,
                             audit_output, audit_csv, deps, out);
        if (estimate->parsed())
            return cmd_estimate(estimate_config, estimate_profile, estimate_tpm,
                                estimate_tokens_per_policy, estimate_tokens_out, estimate_price_in,
                                estimate_price_out, estimate_annotators, estimate_hours,
                                estimate_rate, estimate_policy_count, estimate_curves,
                                estimate_curves_dir, out);
        if (finetune->parsed())
            return cmd_export_finetune(finetune_flags, finetune_context_limit, finetune_output,
                                       out);
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "unexpected error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

}  // namespace policyprobe::cli
