#include "policyprobe/parsing.hpp"

#include <algorithm>
#include <cctype>

#include "policyprobe/errors.hpp"

namespace policyprobe {

namespace {

std::string normalize(std::string_view text) {
    // lowercase, trim, collapse whitespace runs to single spaces
    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    for (const char c : text) {
        if (std::isspace(static_cast<unsigned char>(c)) != 0) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    return out;
}

// Given a normalized line, returns the normalized value part if the line
// answers `name` ("<name> : <value>"), or nullopt.
std::optional<std::string> match_label_line(const std::string& line, const std::string& name) {
    if (line.size() <= name.size() || line.compare(0, name.size(), name) != 0) return std::nullopt;
    std::size_t pos = name.size();
    while (pos < line.size() && line[pos] == ' ') ++pos;
    if (pos >= line.size() || line[pos] != ':') return std::nullopt;
    ++pos;
    while (pos < line.size() && line[pos] == ' ') ++pos;
    std::string value = line.substr(pos);
    while (!value.empty() && (value.back() == '.' || value.back() == ' ')) value.pop_back();
    return value;
}

std::optional<Answer> value_to_answer(const std::string& value) {
    if (value == "yes" || value == "true") return Answer::yes;
    if (value == "no" || value == "false" || value == "not mentioned") return Answer::no;
    return std::nullopt;
}

}  // namespace

std::string_view to_string(Answer answer) {
    switch (answer) {
        case Answer::yes: return "yes";
        case Answer::no: return "no";
        case Answer::unanswered: return "unanswered";
    }
    return "unanswered";
}

std::size_t PracticeVector::count(Answer answer) const {
    std::size_t n = 0;
    for (const auto& [label_id, state] : answers) {
        if (state == answer) ++n;
    }
    return n;
}

double PracticeVector::answered_fraction() const {
    if (answers.empty()) return 0.0;
    return static_cast<double>(answers.size() - count(Answer::unanswered)) /
           static_cast<double>(answers.size());
}

PracticeVector parse_practice_vector(std::string_view response_text, const LabelTaxonomy& queried) {
    if (queried.empty()) throw Error("parse_practice_vector: no queried labels");

    PracticeVector result;
    for (const auto& label : queried.labels()) result.answers[label.label_id] = Answer::unanswered;

    std::vector<std::pair<std::string, std::string>> names;  // (normalized display, label_id)
    names.reserve(queried.size());
    for (const auto& label : queried.labels())
        names.emplace_back(normalize(label.display_name), label.label_id);

    std::size_t pos = 0;
    while (pos <= response_text.size()) {
        const std::size_t nl = response_text.find('\n', pos);
        const std::string_view raw_line = response_text.substr(
            pos, (nl == std::string_view::npos ? response_text.size() : nl) - pos);
        pos = (nl == std::string_view::npos) ? response_text.size() + 1 : nl + 1;

        const std::string line = normalize(raw_line);
        if (line.empty()) continue;

        bool consumed = false;
        for (const auto& [name, label_id] : names) {
            const auto value = match_label_line(line, name);
            if (!value) continue;
            const auto answer = value_to_answer(*value);
            if (answer && result.answers[label_id] == Answer::unanswered) {
                result.answers[label_id] = *answer;
                consumed = true;
            }
            break;  // the line addressed this label, parseable or not
        }
        if (!consumed) result.extraneous_lines.emplace_back(raw_line);
    }
    return result;
}

std::string render_practice_vector(const PracticeVector& vector, const LabelTaxonomy& queried) {
    std::string out;
    for (const auto& label : queried.labels()) {
        const auto it = vector.answers.find(label.label_id);
        if (it == vector.answers.end())
            throw Error("render_practice_vector: vector lacks label '" + label.label_id + "'");
        if (it->second == Answer::unanswered) continue;
        if (!out.empty()) out.push_back('\n');
        out += label.display_name;
        out += ": ";
        out += (it->second == Answer::yes) ? "Yes" : "No";
    }
    return out;
}

Answer dominant_answer(Answer a, Answer b) {
    if (a == Answer::yes || b == Answer::yes) return Answer::yes;
    if (a == Answer::no || b == Answer::no) return Answer::no;
    return Answer::unanswered;
}

PracticeVector reduce_to_policy(const std::vector<PracticeVector>& chunk_vectors) {
    if (chunk_vectors.empty()) return {};

    PracticeVector result = chunk_vectors.front();
    for (std::size_t i = 1; i < chunk_vectors.size(); ++i) {
        const PracticeVector& vector = chunk_vectors[i];
        if (vector.answers.size() != result.answers.size())
            throw Error("reduce_to_policy: mismatched label sets");
        for (auto& [label_id, answer] : result.answers) {
            const auto it = vector.answers.find(label_id);
            if (it == vector.answers.end())
                throw Error("reduce_to_policy: mismatched label sets");
            answer = dominant_answer(answer, it->second);
        }
        result.extraneous_lines.insert(result.extraneous_lines.end(),
                                       vector.extraneous_lines.begin(),
                                       vector.extraneous_lines.end());
    }
    return result;
}

PracticeVector combine_disjoint(const std::vector<PracticeVector>& parts) {
    PracticeVector result;
    for (const auto& part : parts) {
        for (const auto& [label_id, answer] : part.answers) {
            if (!result.answers.emplace(label_id, answer).second)
                throw Error("combine_disjoint: duplicate label '" + label_id + "'");
        }
        result.extraneous_lines.insert(result.extraneous_lines.end(),
                                       part.extraneous_lines.begin(),
                                       part.extraneous_lines.end());
    }
    return result;
}

}  // namespace policyprobe
