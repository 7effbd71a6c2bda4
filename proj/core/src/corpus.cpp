#include "policyprobe/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <mutex>
#include <sstream>

#include "json.hpp"

#include "policyprobe/errors.hpp"
#include "policyprobe/rng.hpp"

namespace policyprobe {

using nlohmann::json;

namespace {

constexpr std::string_view kWhitespace = " \t\r\n\v\f";

std::string trim(std::string_view s) {
    const auto begin = s.find_first_not_of(kWhitespace);
    if (begin == std::string_view::npos) return {};
    const auto end = s.find_last_not_of(kWhitespace);
    return std::string(s.substr(begin, end - begin + 1));
}

std::string normalize_line_endings(std::string_view raw) {
    std::string out;
    out.reserve(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        const char c = raw[i];
        if (c == '\r') {
            if (i + 1 < raw.size() && raw[i + 1] == '\n') ++i;
            out.push_back('\n');
        } else {
            out.push_back(c);
        }
    }
    return out;
}

bool is_blank_line(std::string_view line) {
    return line.find_first_not_of(" \t\v\f") == std::string_view::npos;
}

std::string join_paragraph_texts(const std::vector<Paragraph>& paragraphs) {
    std::string out;
    for (std::size_t i = 0; i < paragraphs.size(); ++i) {
        if (i > 0) out += kParagraphDelimiter;
        out += paragraphs[i].text;
    }
    return out;
}

json read_json_file(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw CorpusError("cannot read " + file.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw CorpusError(file.string() + ": " + e.what());
    }
}

void write_json_file(const std::filesystem::path& file, const json& value) {
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw CorpusError("cannot write " + file.string());
    out << value.dump(2) << '\n';
}

CorpusBundle load_canonical(const std::filesystem::path& dir) {
    if (!std::filesystem::exists(dir)) throw CorpusError("corpus path does not exist: " + dir.string());
    if (!std::filesystem::is_directory(dir)) throw CorpusError("not a corpus directory: " + dir.string());

    CorpusBundle bundle;

    const auto corpus_file = dir / "corpus.json";
    if (std::filesystem::exists(corpus_file)) {
        const json doc = read_json_file(corpus_file);
        if (!doc.is_array()) throw CorpusError(corpus_file.string() + ": expected a top-level array");
        for (std::size_t i = 0; i < doc.size(); ++i) {
            const json& rec = doc[i];
            try {
                auto policy = make_policy_document_from_paragraphs(
                    rec.at("policy_id").get<std::string>(),
                    rec.value("source_name", std::string{}),
                    rec.at("paragraphs").get<std::vector<std::string>>());
                if (bundle.find_policy(policy.policy_id) != nullptr) {
                    throw CorpusError("duplicate policy_id '" + policy.policy_id + "'");
                }
                bundle.policies.push_back(std::move(policy));
            } catch (const json::exception& e) {
                throw CorpusError(corpus_file.string() + " record " + std::to_string(i) + ": " + e.what());
            } catch (const CorpusError& e) {
                throw CorpusError(corpus_file.string() + " record " + std::to_string(i) + ": " + e.what());
            }
        }
    }

    const auto taxonomy_file = dir / "taxonomy.json";
    if (std::filesystem::exists(taxonomy_file)) bundle.taxonomy = load_taxonomy_file(taxonomy_file);

    const auto annotations_file = dir / "annotations.json";
    if (std::filesystem::exists(annotations_file))
        bundle.annotations = load_annotations_file(annotations_file);

    validate_annotations(bundle);
    return bundle;
}

std::mutex& registry_mutex() {
    static std::mutex m;
    return m;
}

std::map<std::string, CorpusAdapter>& adapter_registry() {
    static std::map<std::string, CorpusAdapter> registry{{"canonical", load_canonical}};
    return registry;
}

}  // namespace

LabelTaxonomy::LabelTaxonomy(std::vector<TaxonomyLabel> labels) : labels_(std::move(labels)) {
    std::set<std::string> seen;
    for (const auto& label : labels_) {
        if (label.label_id.empty()) throw CorpusError("taxonomy label with empty label_id");
        if (label.display_name.empty())
            throw CorpusError("taxonomy label '" + label.label_id + "' has an empty display_name");
        if (trim(label.definition).empty())
            throw CorpusError("taxonomy label '" + label.label_id + "' has an empty definition");
        if (!seen.insert(label.label_id).second)
            throw CorpusError("duplicate taxonomy label_id '" + label.label_id + "'");
    }
}

const TaxonomyLabel* LabelTaxonomy::find(std::string_view label_id) const {
    for (const auto& label : labels_) {
        if (label.label_id == label_id) return &label;
    }
    return nullptr;
}

std::vector<std::string> LabelTaxonomy::label_ids() const {
    std::vector<std::string> ids;
    ids.reserve(labels_.size());
    for (const auto& label : labels_) ids.push_back(label.label_id);
    return ids;
}

LabelTaxonomy LabelTaxonomy::subset(const std::vector<std::string>& ids) const {
    const std::set<std::string> wanted(ids.begin(), ids.end());
    for (const auto& id : wanted) {
        if (!contains(id)) throw CorpusError("unknown taxonomy label_id '" + id + "'");
    }
    std::vector<TaxonomyLabel> picked;
    for (const auto& label : labels_) {
        if (wanted.count(label.label_id) > 0) picked.push_back(label);
    }
    return LabelTaxonomy(std::move(picked));
}

void AnnotationSet::set_policy_level(const std::string& policy_id, const std::string& label_id,
                                     bool disclosed) {
    policy_entries_[{policy_id, label_id}] = disclosed;
}

void AnnotationSet::set_segment_level(const std::string& policy_id, std::size_t paragraph_index,
                                      const std::string& label_id, bool disclosed) {
    segment_entries_[{policy_id, paragraph_index, label_id}] = disclosed;
}

std::optional<bool> AnnotationSet::policy_level(const std::string& policy_id,
                                                const std::string& label_id) const {
    const auto it = policy_entries_.find({policy_id, label_id});
    if (it == policy_entries_.end()) return std::nullopt;
    return it->second;
}

std::optional<bool> AnnotationSet::segment_level(const std::string& policy_id,
                                                 std::size_t paragraph_index,
                                                 const std::string& label_id) const {
    const auto it = segment_entries_.find({policy_id, paragraph_index, label_id});
    if (it == segment_entries_.end()) return std::nullopt;
    return it->second;
}

bool AnnotationSet::policy_truth(const std::string& policy_id, const std::string& label_id) const {
    if (const auto flag = policy_level(policy_id, label_id)) return *flag;
    // scan this policy's segment entries for the label
    const auto begin = segment_entries_.lower_bound({policy_id, 0, std::string{}});
    for (auto it = begin; it != segment_entries_.end() && std::get<0>(it->first) == policy_id; ++it) {
        if (std::get<2>(it->first) == label_id && it->second) return true;
    }
    return false;
}

bool AnnotationSet::segment_truth(const std::string& policy_id, std::size_t paragraph_index,
                                  const std::string& label_id) const {
    return segment_level(policy_id, paragraph_index, label_id).value_or(false);
}

const PolicyDocument* CorpusBundle::find_policy(std::string_view policy_id) const {
    for (const auto& policy : policies) {
        if (policy.policy_id == policy_id) return &policy;
    }
    return nullptr;
}

std::vector<Paragraph> segment_paragraphs(std::string_view raw_text) {
    const std::string text = normalize_line_endings(raw_text);
    std::vector<Paragraph> paragraphs;
    std::string current;

    const auto flush = [&] {
        std::string trimmed = trim(current);
        current.clear();
        if (!trimmed.empty()) paragraphs.push_back({paragraphs.size(), std::move(trimmed)});
    };

    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t nl = text.find('\n', pos);
        const std::string_view line{text.data() + pos,
                                    (nl == std::string::npos ? text.size() : nl) - pos};
        if (is_blank_line(line)) {
            flush();
        } else {
            if (!current.empty()) current.push_back('\n');
            current.append(line);
        }
        if (nl == std::string::npos) break;
        pos = nl + 1;
    }
    flush();
    return paragraphs;
}

PolicyDocument make_policy_document(std::string policy_id, std::string source_name,
                                    std::string_view raw_text) {
    PolicyDocument doc;
    doc.policy_id = std::move(policy_id);
    doc.source_name = std::move(source_name);
    doc.paragraphs = segment_paragraphs(raw_text);
    doc.full_text = join_paragraph_texts(doc.paragraphs);
    return doc;
}

PolicyDocument make_policy_document_from_paragraphs(std::string policy_id, std::string source_name,
                                                    std::vector<std::string> paragraph_texts) {
    // Re-segments through the same path as raw text so stored paragraphs that
    // themselves contain blank lines cannot break the reconstruction invariant.
    std::string raw;
    for (std::size_t i = 0; i < paragraph_texts.size(); ++i) {
        if (i > 0) raw += kParagraphDelimiter;
        raw += paragraph_texts[i];
    }
    return make_policy_document(std::move(policy_id), std::move(source_name), raw);
}

void register_corpus_format(const std::string& format, CorpusAdapter adapter) {
    std::lock_guard lock(registry_mutex());
    adapter_registry()[format] = std::move(adapter);
}

std::vector<std::string> registered_corpus_formats() {
    std::lock_guard lock(registry_mutex());
    std::vector<std::string> formats;
    for (const auto& [name, adapter] : adapter_registry()) formats.push_back(name);
    return formats;
}

CorpusBundle load_corpus(const std::filesystem::path& path, const std::string& format) {
    CorpusAdapter adapter;
    {
        std::lock_guard lock(registry_mutex());
        const auto it = adapter_registry().find(format);
        if (it == adapter_registry().end())
            throw CorpusError("unknown corpus format '" + format + "'");
        adapter = it->second;
    }
    return adapter(path);
}

void save_corpus(const std::filesystem::path& directory, const CorpusBundle& bundle) {
    std::filesystem::create_directories(directory);

    json corpus = json::array();
    for (const auto& policy : bundle.policies) {
        json paragraphs = json::array();
        for (const auto& paragraph : policy.paragraphs) paragraphs.push_back(paragraph.text);
        corpus.push_back({{"policy_id", policy.policy_id},
                          {"source_name", policy.source_name},
                          {"paragraphs", std::move(paragraphs)}});
    }
    write_json_file(directory / "corpus.json", corpus);

    json taxonomy = json::array();
    for (const auto& label : bundle.taxonomy.labels()) {
        taxonomy.push_back({{"label_id", label.label_id},
                            {"display_name", label.display_name},
                            {"definition", label.definition}});
    }
    write_json_file(directory / "taxonomy.json", taxonomy);

    json annotations = json::array();
    for (const auto& [key, disclosed] : bundle.annotations.policy_entries()) {
        annotations.push_back(
            {{"policy_id", key.first}, {"label_id", key.second}, {"disclosed", disclosed}});
    }
    for (const auto& [key, disclosed] : bundle.annotations.segment_entries()) {
        annotations.push_back({{"policy_id", std::get<0>(key)},
                               {"paragraph_index", std::get<1>(key)},
                               {"label_id", std::get<2>(key)},
                               {"disclosed", disclosed}});
    }
    write_json_file(directory / "annotations.json", annotations);
}

AnnotationSet load_annotations_file(const std::filesystem::path& file) {
    AnnotationSet annotations;
    const json doc = read_json_file(file);
    if (!doc.is_array()) throw CorpusError(file.string() + ": expected a top-level array");
    for (std::size_t i = 0; i < doc.size(); ++i) {
        const json& rec = doc[i];
        try {
            const auto policy_id = rec.at("policy_id").get<std::string>();
            const auto label_id = rec.at("label_id").get<std::string>();
            const bool disclosed = rec.at("disclosed").get<bool>();
            if (rec.contains("paragraph_index")) {
                annotations.set_segment_level(policy_id, rec.at("paragraph_index").get<std::size_t>(),
                                              label_id, disclosed);
            } else {
                annotations.set_policy_level(policy_id, label_id, disclosed);
            }
        } catch (const json::exception& e) {
            throw CorpusError(file.string() + " record " + std::to_string(i) + ": " + e.what());
        }
    }
    return annotations;
}

LabelTaxonomy load_taxonomy_file(const std::filesystem::path& file) {
    const json doc = read_json_file(file);
    if (!doc.is_array()) throw CorpusError(file.string() + ": expected a top-level array");
    std::vector<TaxonomyLabel> labels;
    for (std::size_t i = 0; i < doc.size(); ++i) {
        const json& rec = doc[i];
        try {
            labels.push_back({rec.at("label_id").get<std::string>(),
                              rec.at("display_name").get<std::string>(),
                              rec.at("definition").get<std::string>()});
        } catch (const json::exception& e) {
            throw CorpusError(file.string() + " record " + std::to_string(i) + ": " + e.what());
        }
    }
    try {
        return LabelTaxonomy(std::move(labels));
    } catch (const CorpusError& e) {
        throw CorpusError(file.string() + ": " + e.what());
    }
}

void validate_annotations(const CorpusBundle& bundle) {
    std::set<std::string> policy_ids;
    for (const auto& policy : bundle.policies) policy_ids.insert(policy.policy_id);

    const auto check = [&](const std::string& policy_id, const std::string& label_id) {
        if (policy_ids.count(policy_id) == 0)
            throw CorpusError("annotation references unknown policy_id '" + policy_id + "'");
        if (!bundle.taxonomy.contains(label_id))
            throw CorpusError("annotation references unknown label_id '" + label_id + "'");
    };

    for (const auto& [key, disclosed] : bundle.annotations.policy_entries()) {
        (void)disclosed;
        check(key.first, key.second);
    }
    for (const auto& [key, disclosed] : bundle.annotations.segment_entries()) {
        (void)disclosed;
        check(std::get<0>(key), std::get<2>(key));
        const PolicyDocument* policy = bundle.find_policy(std::get<0>(key));
        if (policy != nullptr && std::get<1>(key) >= policy->paragraphs.size()) {
            throw CorpusError("annotation for policy '" + std::get<0>(key) +
                              "' references paragraph " + std::to_string(std::get<1>(key)) +
                              " beyond its " + std::to_string(policy->paragraphs.size()) +
                              " paragraphs");
        }
    }
}

namespace {

// Labels that occur positively anywhere in the annotations, with their
// positive policies, iterated in deterministic (sorted) order.
std::map<std::string, std::vector<std::string>> positive_policies_by_label(
    const std::vector<PolicyDocument>& corpus, const AnnotationSet& annotations) {
    std::set<std::string> label_ids;
    for (const auto& [key, disclosed] : annotations.policy_entries()) label_ids.insert(key.second);
    for (const auto& [key, disclosed] : annotations.segment_entries())
        label_ids.insert(std::get<2>(key));

    std::map<std::string, std::vector<std::string>> positives;
    for (const auto& label_id : label_ids) {
        std::vector<std::string> policies;
        for (const auto& policy : corpus) {
            if (annotations.policy_truth(policy.policy_id, label_id))
                policies.push_back(policy.policy_id);
        }
        std::sort(policies.begin(), policies.end());
        if (!policies.empty()) positives[label_id] = std::move(policies);
    }
    return positives;
}

}  // namespace

SplitResult stratified_split(const std::vector<PolicyDocument>& corpus,
                             const AnnotationSet& annotations, double ratio, std::uint64_t seed) {
    if (corpus.size() < 2) throw CorpusError("stratified split needs at least 2 policies");
    if (!(ratio > 0.0 && ratio < 1.0)) throw CorpusError("split ratio must be in (0, 1)");

    const std::size_t total = corpus.size();
    auto target_experimental =
        static_cast<std::size_t>(std::llround(ratio * static_cast<double>(total)));
    target_experimental = std::clamp<std::size_t>(target_experimental, 1, total - 1);
    const std::size_t target_control = total - target_experimental;

    std::mt19937_64 rng(seed);
    SplitResult split;
    std::set<std::string> assigned;
    std::map<std::string, std::size_t> experimental_count;  // per-label positives
    std::map<std::string, std::size_t> control_count;

    auto positives = positive_policies_by_label(corpus, annotations);

    // rarest labels first; ties broken by label_id for determinism
    std::vector<std::pair<std::string, std::vector<std::string>>> label_order(positives.begin(),
                                                                              positives.end());
    std::stable_sort(label_order.begin(), label_order.end(),
                     [](const auto& a, const auto& b) { return a.second.size() < b.second.size(); });

    const auto place = [&](const std::string& policy_id, bool to_experimental) {
        (to_experimental ? split.experimental : split.control).insert(policy_id);
        assigned.insert(policy_id);
    };

    for (auto& [label_id, policies] : label_order) {
        deterministic_shuffle(policies, rng);
        for (const auto& policy_id : policies) {
            if (assigned.count(policy_id) > 0) {
                // already placed by a rarer label; just count it here
                if (split.experimental.count(policy_id) > 0)
                    ++experimental_count[label_id];
                else
                    ++control_count[label_id];
                continue;
            }
            const bool experimental_full = split.experimental.size() >= target_experimental;
            const bool control_full = split.control.size() >= target_control;
            bool to_experimental;
            if (experimental_full) {
                to_experimental = false;
            } else if (control_full) {
                to_experimental = true;
            } else {
                // proportional fill for this label
                const double fill_exp = (static_cast<double>(experimental_count[label_id]) + 1.0) /
                                        static_cast<double>(target_experimental);
                const double fill_ctrl = (static_cast<double>(control_count[label_id]) + 1.0) /
                                         static_cast<double>(target_control);
                if (fill_exp < fill_ctrl)
                    to_experimental = true;
                else if (fill_ctrl < fill_exp)
                    to_experimental = false;
                else
                    to_experimental = (rng() & 1u) == 0;
            }
            place(policy_id, to_experimental);
            ++(to_experimental ? experimental_count : control_count)[label_id];
        }
    }

    // policies with no positive labels: fill to the size targets
    std::vector<std::string> leftovers;
    for (const auto& policy : corpus) {
        if (assigned.count(policy.policy_id) == 0) leftovers.push_back(policy.policy_id);
    }
    std::sort(leftovers.begin(), leftovers.end());
    deterministic_shuffle(leftovers, rng);
    for (const auto& policy_id : leftovers) {
        if (split.experimental.size() < target_experimental)
            place(policy_id, true);
        else
            place(policy_id, false);
    }

    return split;
}

double split_label_imbalance(const std::vector<PolicyDocument>& corpus,
                             const AnnotationSet& annotations, const SplitResult& split) {
    const auto positives = positive_policies_by_label(corpus, annotations);
    if (positives.empty()) return 0.0;
    double sum_sq = 0.0;
    for (const auto& [label_id, policies] : positives) {
        long long diff = 0;
        for (const auto& policy_id : policies) {
            if (split.experimental.count(policy_id) > 0)
                ++diff;
            else if (split.control.count(policy_id) > 0)
                --diff;
        }
        sum_sq += static_cast<double>(diff) * static_cast<double>(diff);
    }
    return std::sqrt(sum_sq / static_cast<double>(positives.size()));
}

double mean_positive_annotations_per_policy(const std::vector<PolicyDocument>& corpus,
                                            const AnnotationSet& annotations,
                                            const std::set<std::string>& subset) {
    if (subset.empty()) return 0.0;
    const auto positives = positive_policies_by_label(corpus, annotations);
    std::size_t total = 0;
    for (const auto& [label_id, policies] : positives) {
        for (const auto& policy_id : policies) total += subset.count(policy_id);
    }
    return static_cast<double>(total) / static_cast<double>(subset.size());
}

}  // namespace policyprobe
