#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "policyprobe/corpus.hpp"

namespace policyprobe {

// Tri-state judgment for one practice label. `unanswered` marks labels the
// model never addressed; it is reported as coverage, and scored as `no`.
enum class Answer { yes, no, unanswered };

std::string_view to_string(Answer answer);

struct PracticeVector {
    // exactly the queried labels, keyed by label_id
    std::map<std::string, Answer> answers;
    // non-empty output lines that matched no queried label (including surplus
    // duplicate answers for an already-answered label)
    std::vector<std::string> extraneous_lines;

    std::size_t count(Answer answer) const;
    double answered_fraction() const;

    bool operator==(const PracticeVector&) const = default;
};

// Total, line-oriented parse of constrained model output. A line answers a
// label when its prefix (case-insensitive, whitespace-collapsed) equals the
// label's display_name followed by ':'. Values {yes,true} map to yes;
// {no,false,"not mentioned"} map to no. The first answer per label wins;
// every queried label ends with a state.
PracticeVector parse_practice_vector(std::string_view response_text, const LabelTaxonomy& queried);

// Inverse of the parser: one "<display name>: <Yes|No>" line per answered
// label in taxonomy order. Unanswered labels render no line, so they parse
// back as unanswered.
std::string render_practice_vector(const PracticeVector& vector, const LabelTaxonomy& queried);

// yes dominates no dominates unanswered
Answer dominant_answer(Answer a, Answer b);

// Reduces chunk-level vectors to policy level: a practice counts as disclosed
// when any chunk says yes. All vectors must share the same label set.
PracticeVector reduce_to_policy(const std::vector<PracticeVector>& chunk_vectors);

// Union of vectors over pairwise-disjoint label sets, e.g. assembling one
// chunk's vector out of single-label plans.
PracticeVector combine_disjoint(const std::vector<PracticeVector>& parts);

}  // namespace policyprobe
