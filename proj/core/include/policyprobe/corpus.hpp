#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

namespace policyprobe {

// Paragraphs are the segmentation unit for prompts, chunking and
// segment-level annotations. Joining paragraph texts with this delimiter
// reconstructs PolicyDocument::full_text exactly.
inline constexpr std::string_view kParagraphDelimiter = "\n\n";

struct Paragraph {
    std::size_t index = 0;
    std::string text;  // non-empty after whitespace trimming

    bool operator==(const Paragraph&) const = default;
};

struct PolicyDocument {
    std::string policy_id;
    std::string source_name;
    std::string full_text;
    std::vector<Paragraph> paragraphs;  // indices contiguous from 0

    bool operator==(const PolicyDocument&) const = default;
};

struct TaxonomyLabel {
    std::string label_id;
    std::string display_name;  // what the model is asked about and echoes back
    std::string definition;    // annotation definition, feeds the augmented task text

    bool operator==(const TaxonomyLabel&) const = default;
};

// Ordered set of practice labels. Order matters: prompts enumerate labels in
// taxonomy order and parsers report them in the same order.
class LabelTaxonomy {
public:
    LabelTaxonomy() = default;
    explicit LabelTaxonomy(std::vector<TaxonomyLabel> labels);

    const std::vector<TaxonomyLabel>& labels() const { return labels_; }
    bool empty() const { return labels_.empty(); }
    std::size_t size() const { return labels_.size(); }

    const TaxonomyLabel* find(std::string_view label_id) const;
    bool contains(std::string_view label_id) const { return find(label_id) != nullptr; }
    std::vector<std::string> label_ids() const;

    // Sub-taxonomy preserving this taxonomy's order; unknown ids throw.
    LabelTaxonomy subset(const std::vector<std::string>& ids) const;

    bool operator==(const LabelTaxonomy&) const = default;

private:
    std::vector<TaxonomyLabel> labels_;
};

// Ground-truth disclosed-flags. Policy-level entries record whether a policy
// discloses a practice anywhere; segment-level entries (optional, corpora
// permitting) record it per paragraph.
class AnnotationSet {
public:
    using PolicyKey = std::pair<std::string, std::string>;                  // (policy, label)
    using SegmentKey = std::tuple<std::string, std::size_t, std::string>;   // (policy, paragraph, label)

    void set_policy_level(const std::string& policy_id, const std::string& label_id, bool disclosed);
    void set_segment_level(const std::string& policy_id, std::size_t paragraph_index,
                           const std::string& label_id, bool disclosed);

    std::optional<bool> policy_level(const std::string& policy_id, const std::string& label_id) const;
    std::optional<bool> segment_level(const std::string& policy_id, std::size_t paragraph_index,
                                      const std::string& label_id) const;

    // Effective truth: explicit policy-level flag, else OR over the policy's
    // segment entries, else false (annotation corpora record only disclosures).
    bool policy_truth(const std::string& policy_id, const std::string& label_id) const;
    bool segment_truth(const std::string& policy_id, std::size_t paragraph_index,
                       const std::string& label_id) const;

    bool has_segment_annotations() const { return !segment_entries_.empty(); }
    bool empty() const { return policy_entries_.empty() && segment_entries_.empty(); }
    std::size_t size() const { return policy_entries_.size() + segment_entries_.size(); }

    const std::map<PolicyKey, bool>& policy_entries() const { return policy_entries_; }
    const std::map<SegmentKey, bool>& segment_entries() const { return segment_entries_; }

    bool operator==(const AnnotationSet&) const = default;

private:
    std::map<PolicyKey, bool> policy_entries_;
    std::map<SegmentKey, bool> segment_entries_;
};

struct CorpusBundle {
    std::vector<PolicyDocument> policies;
    AnnotationSet annotations;
    LabelTaxonomy taxonomy;

    const PolicyDocument* find_policy(std::string_view policy_id) const;

    bool operator==(const CorpusBundle&) const = default;
};

// Line endings are normalized to LF, then text splits on runs of one or more
// blank lines (lines that are empty after trimming). Empty input yields an
// empty list.
std::vector<Paragraph> segment_paragraphs(std::string_view raw_text);

// Builds a document whose full_text is the canonical join of its segmented
// paragraphs, so the reconstruction invariant holds by construction.
PolicyDocument make_policy_document(std::string policy_id, std::string source_name,
                                    std::string_view raw_text);
PolicyDocument make_policy_document_from_paragraphs(std::string policy_id, std::string source_name,
                                                    std::vector<std::string> paragraph_texts);

// Corpus format adapters. "canonical" reads/writes the directory layout
// {corpus.json, annotations.json, taxonomy.json}; further adapters can be
// registered to translate foreign corpora into the canonical schema.
using CorpusAdapter = std::function<CorpusBundle(const std::filesystem::path&)>;
void register_corpus_format(const std::string& format, CorpusAdapter adapter);
std::vector<std::string> registered_corpus_formats();

CorpusBundle load_corpus(const std::filesystem::path& path, const std::string& format = "canonical");
void save_corpus(const std::filesystem::path& directory, const CorpusBundle& bundle);

// Standalone loaders for evaluation against a bare annotations/taxonomy file.
AnnotationSet load_annotations_file(const std::filesystem::path& file);
LabelTaxonomy load_taxonomy_file(const std::filesystem::path& file);

// Cross-checks every annotation reference against corpus and taxonomy.
void validate_annotations(const CorpusBundle& bundle);

struct SplitResult {
    std::set<std::string> experimental;
    std::set<std::string> control;

    bool operator==(const SplitResult&) const = default;
};

// Greedy stratified split: positives of rare labels are placed first, each to
// the subset with the lower proportional fill for that label, with seeded
// tie-breaking. Deterministic for a fixed (corpus, ratio, seed) across
// platforms. Subset sizes land within 1 of ratio * corpus size.
SplitResult stratified_split(const std::vector<PolicyDocument>& corpus,
                             const AnnotationSet& annotations, double ratio, std::uint64_t seed);

// RMS over labels of the per-label positive-count difference between the two
// subsets; the quantity the greedy assignment tries to keep small.
double split_label_imbalance(const std::vector<PolicyDocument>& corpus,
                             const AnnotationSet& annotations, const SplitResult& split);

// Mean number of positive (policy, label) annotations per policy in `subset`.
double mean_positive_annotations_per_policy(const std::vector<PolicyDocument>& corpus,
                                            const AnnotationSet& annotations,
                                            const std::set<std::string>& subset);

}  // namespace policyprobe
