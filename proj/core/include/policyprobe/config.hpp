#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "policyprobe/economics.hpp"
#include "policyprobe/evaluation.hpp"
#include "policyprobe/prompting.hpp"
#include "policyprobe/provider.hpp"

namespace policyprobe {

// TOML-style key/value configuration: [section] headers, key = value lines,
// # comments. Values are strings, integers, floats or booleans. Enough for
// profiles, parameters, variant presets and technique sequences; CLI flags
// override file values.
class Config {
public:
    struct Value {
        enum class Kind { string, integer, floating, boolean };
        Kind kind = Kind::string;
        std::string text;
        long long integer = 0;
        double floating = 0.0;
        bool boolean = false;
    };

    static Config parse_string(std::string_view text, std::string origin = "<config>");
    static Config load_file(const std::filesystem::path& file);

    bool has_section(const std::string& section) const;
    bool has(const std::string& section, const std::string& key) const;
    std::vector<std::string> sections() const;
    // sections under a dotted prefix, e.g. prefix "profiles" lists
    // "profiles.gpt-4-turbo" -> "gpt-4-turbo"
    std::vector<std::string> subsections(const std::string& prefix) const;
    std::vector<std::string> keys(const std::string& section) const;

    std::string get_string(const std::string& section, const std::string& key) const;
    long long get_int(const std::string& section, const std::string& key) const;
    double get_double(const std::string& section, const std::string& key) const;
    bool get_bool(const std::string& section, const std::string& key) const;

    std::string get_string_or(const std::string& section, const std::string& key,
                              std::string fallback) const;
    long long get_int_or(const std::string& section, const std::string& key,
                         long long fallback) const;
    double get_double_or(const std::string& section, const std::string& key,
                         double fallback) const;
    bool get_bool_or(const std::string& section, const std::string& key, bool fallback) const;

private:
    const Value* find(const std::string& section, const std::string& key) const;
    const Value& require(const std::string& section, const std::string& key) const;

    std::string origin_;
    std::map<std::string, std::map<std::string, Value>> sections_;
};

// [profiles.<id>] endpoint_url / model_name / context_limit /
// tokens_per_minute / price_in / price_out / supports_seed
ModelProfile profile_from_config(const Config& config, const std::string& profile_id);
std::vector<std::string> profiles_in_config(const Config& config);

// [params] temperature / top_p / seed / use_seed / max_output_tokens,
// starting from the deterministic defaults
ModelParameters params_from_config(const Config& config);

// Variant fields of a section as a patch: base / data_boundary /
// data_placement / task_style / message_split / pruning / segmentation /
// shots / system_instruction
VariantPatch variant_patch_from_section(const Config& config, const std::string& section);

// [variants.<name>] resolved against its base preset (default: baseline);
// built-in presets win when no such section exists.
PromptVariant variant_from_config(const Config& config, const std::string& name);

// ordered [technique.<nn>] sections with name / variant fields / adopt
std::vector<Technique> techniques_from_config(const Config& config);

// [economics] annotators_per_policy / hours_per_policy / hourly_rate /
// policy_count / tokens_in_per_policy / tokens_out_per_policy; prices come
// from a profile or explicit price_in/price_out keys
AnnotationCostModel annotation_model_from_config(const Config& config);
LlmCostModel llm_model_from_config(const Config& config, const ModelProfile* profile = nullptr);

}  // namespace policyprobe
