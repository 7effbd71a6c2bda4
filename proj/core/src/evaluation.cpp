#include "policyprobe/evaluation.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "json.hpp"

#include "policyprobe/errors.hpp"

namespace policyprobe {

using nlohmann::json;

LabelMetrics metrics_from_counts(const ConfusionCounts& counts) {
    LabelMetrics m;
    m.counts = counts;
    const double total = static_cast<double>(counts.total());
    if (total > 0) m.accuracy = static_cast<double>(counts.tp + counts.tn) / total;

    if (counts.tp + counts.fp > 0)
        m.precision = static_cast<double>(counts.tp) / static_cast<double>(counts.tp + counts.fp);
    else
        m.undefined_precision = true;

    if (counts.tp + counts.fn > 0)
        m.recall = static_cast<double>(counts.tp) / static_cast<double>(counts.tp + counts.fn);
    else
        m.undefined_recall = true;

    if (!m.undefined_precision && !m.undefined_recall && m.precision + m.recall > 0.0)
        m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
    else
        m.undefined_f1 = true;
    return m;
}

MetricsReport score(const std::map<std::string, PracticeVector>& predictions,
                    const AnnotationSet& truth, const LabelTaxonomy& taxonomy) {
    if (predictions.empty()) throw Error("score: empty prediction set");
    if (taxonomy.empty()) throw Error("score: empty taxonomy");

    std::map<std::string, ConfusionCounts> per_label_counts;
    long long answered = 0;
    long long total_pairs = 0;

    for (const auto& [policy_id, vector] : predictions) {
        for (const auto& label : taxonomy.labels()) {
            Answer state = Answer::unanswered;
            if (const auto it = vector.answers.find(label.label_id); it != vector.answers.end())
                state = it->second;
            const bool predicted_yes = state == Answer::yes;
            const bool truth_yes = truth.policy_truth(policy_id, label.label_id);

            auto& counts = per_label_counts[label.label_id];
            if (predicted_yes && truth_yes)
                ++counts.tp;
            else if (predicted_yes)
                ++counts.fp;
            else if (truth_yes)
                ++counts.fn;
            else
                ++counts.tn;

            ++total_pairs;
            if (state != Answer::unanswered) ++answered;
        }
    }

    MetricsReport report;
    double macro_precision = 0.0;
    double macro_recall = 0.0;
    double macro_f1 = 0.0;
    for (const auto& label : taxonomy.labels()) {
        const LabelMetrics metrics = metrics_from_counts(per_label_counts[label.label_id]);
        report.counts.tp += metrics.counts.tp;
        report.counts.fp += metrics.counts.fp;
        report.counts.fn += metrics.counts.fn;
        report.counts.tn += metrics.counts.tn;
        macro_precision += metrics.precision;
        macro_recall += metrics.recall;
        macro_f1 += metrics.f1;
        report.per_label.emplace(label.label_id, metrics);
    }

    const LabelMetrics aggregate = metrics_from_counts(report.counts);
    report.accuracy = aggregate.accuracy;
    report.precision = aggregate.precision;
    report.recall = aggregate.recall;
    report.f1 = aggregate.f1;
    report.undefined_precision = aggregate.undefined_precision;
    report.undefined_recall = aggregate.undefined_recall;
    report.undefined_f1 = aggregate.undefined_f1;
    report.coverage =
        total_pairs > 0 ? static_cast<double>(answered) / static_cast<double>(total_pairs) : 0.0;

    const auto label_count = static_cast<double>(taxonomy.size());
    report.macro_precision = macro_precision / label_count;
    report.macro_recall = macro_recall / label_count;
    report.macro_f1 = macro_f1 / label_count;
    return report;
}

namespace {

json variant_to_json(const PromptVariant& variant) {
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

PromptVariant variant_from_json(const json& doc) {
    PromptVariant variant;
    variant.data_boundary = data_boundary_from_string(doc.at("data_boundary").get<std::string>());
    variant.data_placement =
        data_placement_from_string(doc.at("data_placement").get<std::string>());
    variant.task_style = task_style_from_string(doc.at("task_style").get<std::string>());
    variant.message_split = message_split_from_string(doc.at("message_split").get<std::string>());
    variant.pruning = doc.at("pruning").get<bool>();
    variant.segmentation = segmentation_from_string(doc.at("segmentation").get<std::string>());
    variant.shots = doc.at("shots").get<int>();
    if (doc.contains("system_instruction"))
        variant.system_instruction = doc.at("system_instruction").get<std::string>();
    return variant;
}

json params_to_json(const ModelParameters& params) {
    json doc = {
        {"temperature", params.temperature},
        {"top_p", params.top_p},
        {"max_output_tokens", params.max_output_tokens},
    };
    if (params.seed) doc["seed"] = *params.seed;
    return doc;
}

ModelParameters params_from_json(const json& doc) {
    ModelParameters params;
    params.temperature = doc.at("temperature").get<double>();
    params.top_p = doc.at("top_p").get<double>();
    params.max_output_tokens = doc.at("max_output_tokens").get<long long>();
    if (doc.contains("seed"))
        params.seed = doc.at("seed").get<long long>();
    else
        params.seed.reset();
    return params;
}

Answer answer_from_string(std::string_view name) {
    if (name == "yes") return Answer::yes;
    if (name == "no") return Answer::no;
    if (name == "unanswered") return Answer::unanswered;
    throw Error("unknown answer state '" + std::string(name) + "'");
}

json vector_to_json(const PracticeVector& vector) {
    json answers = json::object();
    for (const auto& [label_id, state] : vector.answers)
        answers[label_id] = std::string(to_string(state));
    return {{"answers", std::move(answers)}, {"extraneous_lines", vector.extraneous_lines}};
}

PracticeVector vector_from_json(const json& doc) {
    PracticeVector vector;
    for (const auto& [label_id, state] : doc.at("answers").items())
        vector.answers[label_id] = answer_from_string(state.get<std::string>());
    if (doc.contains("extraneous_lines"))
        vector.extraneous_lines = doc.at("extraneous_lines").get<std::vector<std::string>>();
    return vector;
}

std::string format_metric(double value) {
    char buffer[32];
    std::snprintf(buffer, sizeof(buffer), "%.3f", value);
    return buffer;
}

}  // namespace

std::vector<std::string> RunRecord::exchange_hashes() const {
    std::vector<std::string> hashes;
    for (const auto& [policy_id, policy_hashes] : exchanges)
        hashes.insert(hashes.end(), policy_hashes.begin(), policy_hashes.end());
    return hashes;
}

void save_run_record(const std::filesystem::path& file, const RunRecord& record) {
    json predictions = json::object();
    for (const auto& [policy_id, vector] : record.predictions)
        predictions[policy_id] = vector_to_json(vector);

    const json doc = {
        {"run_id", record.run_id},
        {"profile_id", record.profile_id},
        {"variant", variant_to_json(record.variant)},
        {"params", params_to_json(record.params)},
        {"predictions", std::move(predictions)},
        {"exchanges", record.exchanges},
        {"timing_ms", record.timing_ms},
        {"failures", record.failures},
    };
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write run record " + file.string());
    out << doc.dump(2) << '\n';
}

RunRecord load_run_record(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw Error("cannot read run record " + file.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw Error(file.string() + ": " + e.what());
    }

    RunRecord record;
    record.run_id = doc.at("run_id").get<std::string>();
    record.profile_id = doc.at("profile_id").get<std::string>();
    record.variant = variant_from_json(doc.at("variant"));
    record.params = params_from_json(doc.at("params"));
    for (const auto& [policy_id, vector] : doc.at("predictions").items())
        record.predictions[policy_id] = vector_from_json(vector);
    if (doc.contains("exchanges"))
        record.exchanges =
            doc.at("exchanges").get<std::map<std::string, std::vector<std::string>>>();
    if (doc.contains("timing_ms"))
        record.timing_ms = doc.at("timing_ms").get<std::map<std::string, double>>();
    if (doc.contains("failures"))
        record.failures = doc.at("failures").get<std::map<std::string, std::string>>();
    return record;
}

std::string metrics_to_json(const MetricsReport& report) {
    const auto counts_json = [](const ConfusionCounts& counts) {
        return json{{"tp", counts.tp}, {"fp", counts.fp}, {"fn", counts.fn}, {"tn", counts.tn}};
    };
    const auto undefined_json = [](bool precision, bool recall, bool f1) {
        return json{{"precision", precision}, {"recall", recall}, {"f1", f1}};
    };

    json per_label = json::object();
    for (const auto& [label_id, metrics] : report.per_label) {
        per_label[label_id] = {
            {"counts", counts_json(metrics.counts)},
            {"accuracy", metrics.accuracy},
            {"precision", metrics.precision},
            {"recall", metrics.recall},
            {"f1", metrics.f1},
            {"undefined",
             undefined_json(metrics.undefined_precision, metrics.undefined_recall,
                            metrics.undefined_f1)},
        };
    }

    const json doc = {
        {"counts", counts_json(report.counts)},
        {"accuracy", report.accuracy},
        {"precision", report.precision},
        {"recall", report.recall},
        {"f1", report.f1},
        {"coverage", report.coverage},
        {"undefined",
         undefined_json(report.undefined_precision, report.undefined_recall, report.undefined_f1)},
        {"macro",
         {{"precision", report.macro_precision},
          {"recall", report.macro_recall},
          {"f1", report.macro_f1}}},
        {"per_label", std::move(per_label)},
    };
    return doc.dump(2) + "\n";
}

void save_metrics(const std::filesystem::path& file, const MetricsReport& report) {
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write metrics " + file.string());
    out << metrics_to_json(report);
}

namespace {

std::vector<FewShotExample> shots_for_slice(std::span<const FewShotExample> shots,
                                            const LabelTaxonomy& slice);

long long plan_tokens(const PromptPlan& plan, const TokenCounter& counter) {
    long long total = 0;
    for (const auto& message : plan.messages) total += counter.count(message.content);
    return total;
}

}  // namespace

long long estimate_prompt_overhead(const LabelTaxonomy& taxonomy, const PromptVariant& variant,
                                   std::span<const FewShotExample> shots,
                                   const TokenCounter& counter, const PromptTemplates& templates) {
    // probe plans around a single-byte policy text; label-segmented variants
    // carry one label per plan, so take the widest label's wrapper
    const bool label_segmented = variant.segmentation == Segmentation::per_label ||
                                 variant.segmentation == Segmentation::per_paragraph_and_label;
    if (!label_segmented)
        return plan_tokens(build_prompt("\x01", taxonomy, variant, shots, {}, templates), counter);

    long long widest = 0;
    for (const auto& label : taxonomy.labels()) {
        const LabelTaxonomy slice = taxonomy.subset({label.label_id});
        const auto slice_shots = shots_for_slice(shots, slice);
        widest = std::max(
            widest,
            plan_tokens(build_prompt("\x01", slice, variant, slice_shots, {}, templates), counter));
    }
    return widest;
}

namespace {

std::vector<FewShotExample> shots_for_slice(std::span<const FewShotExample> shots,
                                            const LabelTaxonomy& slice) {
    std::vector<FewShotExample> out(shots.begin(), shots.end());
    for (auto& shot : out) {
        std::erase_if(shot.expected,
                      [&](const auto& pair) { return !slice.contains(pair.first); });
    }
    return out;
}

}  // namespace

std::vector<PromptPlan> expand_plans(const PolicyDocument& policy, const LabelTaxonomy& taxonomy,
                                     const PromptVariant& variant,
                                     std::span<const FewShotExample> shots,
                                     const ChunkBudget& budget, const TokenCounter& counter,
                                     const PromptTemplates& templates) {
    const bool label_segmented = variant.segmentation == Segmentation::per_label ||
                                 variant.segmentation == Segmentation::per_paragraph_and_label;
    const bool paragraph_segmented = variant.segmentation == Segmentation::per_paragraph ||
                                     variant.segmentation == Segmentation::per_paragraph_and_label;

    std::vector<LabelTaxonomy> slices;
    if (label_segmented) {
        for (const auto& label : taxonomy.labels()) slices.push_back(taxonomy.subset({label.label_id}));
    } else {
        slices.push_back(taxonomy);
    }

    // plans are emitted data-unit-major: all label slices of one unit are
    // consecutive (run_pipeline relies on this to reassemble unit vectors)
    std::vector<PromptPlan> plans;
    const auto emit = [&](std::string_view text, std::optional<std::size_t> paragraph_index) {
        for (const auto& slice : slices) {
            PlanTarget target{policy.policy_id, paragraph_index, {}};
            const auto slice_shots = shots_for_slice(shots, slice);
            plans.push_back(build_prompt(text, slice, variant, slice_shots, std::move(target),
                                         templates));
        }
    };

    if (paragraph_segmented) {
        for (const auto& paragraph : policy.paragraphs) {
            if (counter.count(paragraph.text) > budget.per_chunk_budget())
                throw BudgetError("paragraph " + std::to_string(paragraph.index) + " of policy '" +
                                  policy.policy_id + "' exceeds the chunk budget of " +
                                  std::to_string(budget.per_chunk_budget()) + " tokens");
            emit(paragraph.text, paragraph.index);
        }
    } else {
        for (const auto& chunk : chunk_policy(policy, budget, counter)) {
            emit(chunk.text, std::nullopt);
        }
    }
    return plans;
}

namespace {

struct PolicyOutcome {
    PracticeVector vector;
    std::vector<std::string> hashes;
    double ms = 0.0;
};

PolicyOutcome process_policy(const PolicyDocument& input, const LabelTaxonomy& taxonomy,
                             const PromptVariant& variant, const ModelProfile& profile,
                             const ModelParameters& params, const PipelineContext& context) {
    const auto started = std::chrono::steady_clock::now();
    PolicyOutcome outcome;
    ChatClient& client = *context.client;

    PolicyDocument doc = input;
    if (variant.pruning && !doc.paragraphs.empty()) {
        const PromptPlan pruning_plan = build_pruning_prompt(doc, context.templates);
        const ChatExchange exchange = client.send_chat(pruning_plan, profile, params);
        outcome.hashes.push_back(exchange.content_hash);
        const auto kept = parse_pruning_response(exchange.response_text, doc.paragraphs.size());
        doc = apply_pruning(doc, kept);
    }

    std::vector<FewShotExample> shots;
    if (variant.shots > 0) {
        if (!context.shot_provider)
            throw PromptError("variant requests " + std::to_string(variant.shots) +
                              " shots but the pipeline has no shot provider");
        shots = context.shot_provider(input.policy_id, variant.shots);
        for (const auto& shot : shots) {
            if (shot.source_policy_id == input.policy_id)
                throw PromptError("shot drawn from the policy under analysis ('" +
                                  input.policy_id + "')");
        }
    }

    const ChunkBudget budget{
        profile.context_limit,
        estimate_prompt_overhead(taxonomy, variant, shots, client.counter(), context.templates),
        context.response_reserve};

    const auto plans =
        expand_plans(doc, taxonomy, variant, shots, budget, client.counter(), context.templates);

    const std::size_t slices = (variant.segmentation == Segmentation::per_label ||
                                variant.segmentation == Segmentation::per_paragraph_and_label)
                                   ? taxonomy.size()
                                   : 1;

    std::vector<PracticeVector> unit_vectors;
    std::vector<PracticeVector> slice_vectors;
    for (std::size_t i = 0; i < plans.size(); ++i) {
        const PromptPlan& plan = plans[i];
        const ChatExchange exchange = client.send_chat(plan, profile, params);
        outcome.hashes.push_back(exchange.content_hash);

        const LabelTaxonomy queried = taxonomy.subset(plan.target.queried_label_ids);
        slice_vectors.push_back(parse_practice_vector(exchange.response_text, queried));
        if (slice_vectors.size() == slices) {
            unit_vectors.push_back(combine_disjoint(slice_vectors));
            slice_vectors.clear();
        }
    }

    if (unit_vectors.empty()) {
        // nothing to analyze (e.g. pruning removed every paragraph): report
        // every label unanswered
        for (const auto& label : taxonomy.labels())
            outcome.vector.answers[label.label_id] = Answer::unanswered;
    } else {
        outcome.vector = reduce_to_policy(unit_vectors);
    }

    outcome.ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                           started)
                     .count();
    return outcome;
}

}  // namespace

RunRecord run_pipeline(const std::vector<PolicyDocument>& policies, const LabelTaxonomy& taxonomy,
                       const PromptVariant& variant, const ModelProfile& profile,
                       const ModelParameters& params, const PipelineContext& context,
                       std::string run_id) {
    if (!context.client) throw Error("run_pipeline: no chat client configured");
    if (taxonomy.empty()) throw Error("run_pipeline: empty taxonomy");

    RunRecord record;
    record.run_id = std::move(run_id);
    record.variant = variant;
    record.profile_id = profile.profile_id;
    record.params = params;

    std::mutex record_mutex;
    std::atomic<std::size_t> next{0};

    const auto worker = [&] {
        for (;;) {
            if (context.cancelled && context.cancelled()) return;
            const std::size_t i = next.fetch_add(1);
            if (i >= policies.size()) return;
            const PolicyDocument& policy = policies[i];
            try {
                PolicyOutcome outcome =
                    process_policy(policy, taxonomy, variant, profile, params, context);
                std::lock_guard lock(record_mutex);
                record.predictions[policy.policy_id] = std::move(outcome.vector);
                record.exchanges[policy.policy_id] = std::move(outcome.hashes);
                record.timing_ms[policy.policy_id] = outcome.ms;
            } catch (const std::exception& e) {
                std::lock_guard lock(record_mutex);
                record.failures[policy.policy_id] = e.what();
            }
        }
    };

    const int workers = std::max(1, context.concurrency);
    if (workers == 1 || policies.size() <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int i = 0; i < workers; ++i) pool.emplace_back(worker);
        for (auto& thread : pool) thread.join();
    }
    return record;
}

namespace {

std::string csv_field(const std::string& value) {
    if (value.find_first_of(",\"\n") == std::string::npos) return value;
    std::string quoted = "\"";
    for (const char c : value) {
        if (c == '"') quoted += "\"\"";
        else quoted.push_back(c);
    }
    quoted += "\"";
    return quoted;
}

}  // namespace

std::string SplitTestResult::csv() const {
    std::string out = "technique,accuracy,precision,recall,f1\n";
    for (const auto& row : rows) {
        out += csv_field(row.technique);
        out += ',' + format_metric(row.metrics.accuracy);
        out += ',' + format_metric(row.metrics.precision);
        out += ',' + format_metric(row.metrics.recall);
        out += ',' + format_metric(row.metrics.f1);
        out += '\n';
    }
    return out;
}

SplitTestResult split_test(const std::vector<PolicyDocument>& policies, const AnnotationSet& truth,
                           const LabelTaxonomy& taxonomy, const std::vector<Technique>& techniques,
                           const ModelProfile& profile, const ModelParameters& params,
                           const PipelineContext& context) {
    if (techniques.empty()) throw Error("split_test: empty technique sequence");

    SplitTestResult result;
    PromptVariant incumbent_variant;  // the baseline default until something is adopted
    std::optional<MetricsReport> incumbent_metrics;

    for (std::size_t i = 0; i < techniques.size(); ++i) {
        const Technique& technique = techniques[i];
        const PromptVariant candidate = technique.patch.apply(incumbent_variant);

        const RunRecord record = run_pipeline(policies, taxonomy, candidate, profile, params,
                                              context, "abtest-" + std::to_string(i));
        if (record.predictions.empty())
            throw Error("technique '" + technique.name + "' failed for every policy" +
                        (record.failures.empty()
                             ? std::string{}
                             : ": " + record.failures.begin()->second));

        SplitTestRow row;
        row.technique = technique.name;
        row.variant = candidate;
        row.metrics = score(record.predictions, truth, taxonomy);
        if (incumbent_metrics) {
            row.delta_accuracy = row.metrics.accuracy - incumbent_metrics->accuracy;
            row.delta_precision = row.metrics.precision - incumbent_metrics->precision;
            row.delta_recall = row.metrics.recall - incumbent_metrics->recall;
            row.delta_f1 = row.metrics.f1 - incumbent_metrics->f1;
        }

        const bool improves = !incumbent_metrics || row.metrics.f1 > incumbent_metrics->f1;
        row.adopted = technique.adopt_override.value_or(improves);
        if (row.adopted) {
            incumbent_variant = candidate;
            incumbent_metrics = row.metrics;
        }
        result.rows.push_back(std::move(row));
    }

    result.final_variant = incumbent_variant;
    return result;
}

}  // namespace policyprobe
