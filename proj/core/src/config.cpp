#include "policyprobe/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "policyprobe/errors.hpp"

namespace policyprobe {

namespace {

std::string_view trim_view(std::string_view s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string_view::npos) return {};
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

bool valid_name(std::string_view name) {
    if (name.empty()) return false;
    return std::all_of(name.begin(), name.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_' || c == '-' || c == '.';
    });
}

Config::Value parse_value(std::string_view raw, const std::string& origin, std::size_t line_no) {
    Config::Value value;
    if (raw.empty()) throw ConfigError(origin + ":" + std::to_string(line_no) + ": missing value");

    if (raw.front() == '"') {
        std::string text;
        bool closed = false;
        for (std::size_t i = 1; i < raw.size(); ++i) {
            const char c = raw[i];
            if (c == '\\' && i + 1 < raw.size()) {
                const char next = raw[++i];
                switch (next) {
                    case 'n': text.push_back('\n'); break;
                    case 't': text.push_back('\t'); break;
                    case '"': text.push_back('"'); break;
                    case '\\': text.push_back('\\'); break;
                    default:
                        throw ConfigError(origin + ":" + std::to_string(line_no) +
                                          ": unsupported escape \\" + std::string(1, next));
                }
                continue;
            }
            if (c == '"') {
                closed = true;
                const auto rest = trim_view(raw.substr(i + 1));
                if (!rest.empty() && rest.front() != '#')
                    throw ConfigError(origin + ":" + std::to_string(line_no) +
                                      ": trailing characters after string value");
                break;
            }
            text.push_back(c);
        }
        if (!closed)
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": unterminated string");
        value.kind = Config::Value::Kind::string;
        value.text = std::move(text);
        return value;
    }

    // bare value: strip a trailing comment
    std::string_view bare = raw;
    if (const auto hash = bare.find('#'); hash != std::string_view::npos)
        bare = trim_view(bare.substr(0, hash));
    const std::string token(bare);

    if (token == "true" || token == "false") {
        value.kind = Config::Value::Kind::boolean;
        value.boolean = token == "true";
        value.text = token;
        return value;
    }

    try {
        std::size_t used = 0;
        if (token.find_first_of(".eE") == std::string::npos) {
            const long long integer = std::stoll(token, &used);
            if (used == token.size()) {
                value.kind = Config::Value::Kind::integer;
                value.integer = integer;
                value.floating = static_cast<double>(integer);
                value.text = token;
                return value;
            }
        }
        const double floating = std::stod(token, &used);
        if (used == token.size()) {
            value.kind = Config::Value::Kind::floating;
            value.floating = floating;
            value.text = token;
            return value;
        }
    } catch (const std::exception&) {
        // fall through to the error below
    }
    throw ConfigError(origin + ":" + std::to_string(line_no) + ": cannot parse value '" + token +
                      "' (strings must be quoted)");
}

}  // namespace

Config Config::parse_string(std::string_view text, std::string origin) {
    Config config;
    config.origin_ = std::move(origin);

    std::string current_section;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        std::string_view line =
            text.substr(pos, (nl == std::string_view::npos ? text.size() : nl) - pos);
        pos = (nl == std::string_view::npos) ? text.size() + 1 : nl + 1;
        ++line_no;

        line = trim_view(line);
        if (line.empty() || line.front() == '#') continue;

        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError(config.origin_ + ":" + std::to_string(line_no) +
                                  ": malformed section header");
            const auto name = trim_view(line.substr(1, line.size() - 2));
            if (!valid_name(name))
                throw ConfigError(config.origin_ + ":" + std::to_string(line_no) +
                                  ": bad section name '" + std::string(name) + "'");
            current_section = std::string(name);
            config.sections_[current_section];  // a section may stay empty
            continue;
        }

        const auto equals = line.find('=');
        if (equals == std::string_view::npos)
            throw ConfigError(config.origin_ + ":" + std::to_string(line_no) +
                              ": expected key = value");
        const auto key = trim_view(line.substr(0, equals));
        if (!valid_name(key))
            throw ConfigError(config.origin_ + ":" + std::to_string(line_no) + ": bad key '" +
                              std::string(key) + "'");
        const auto value = parse_value(trim_view(line.substr(equals + 1)), config.origin_, line_no);
        config.sections_[current_section][std::string(key)] = value;
    }
    return config;
}

Config Config::load_file(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file " + file.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_string(buffer.str(), file.string());
}

bool Config::has_section(const std::string& section) const {
    return sections_.count(section) > 0;
}

bool Config::has(const std::string& section, const std::string& key) const {
    return find(section, key) != nullptr;
}

std::vector<std::string> Config::sections() const {
    std::vector<std::string> names;
    for (const auto& [name, values] : sections_) names.push_back(name);
    return names;
}

std::vector<std::string> Config::subsections(const std::string& prefix) const {
    const std::string dotted = prefix + ".";
    std::vector<std::string> names;
    for (const auto& [name, values] : sections_) {
        if (name.rfind(dotted, 0) == 0) names.push_back(name.substr(dotted.size()));
    }
    return names;
}

std::vector<std::string> Config::keys(const std::string& section) const {
    std::vector<std::string> names;
    const auto it = sections_.find(section);
    if (it == sections_.end()) return names;
    for (const auto& [key, value] : it->second) names.push_back(key);
    return names;
}

const Config::Value* Config::find(const std::string& section, const std::string& key) const {
    const auto sit = sections_.find(section);
    if (sit == sections_.end()) return nullptr;
    const auto kit = sit->second.find(key);
    if (kit == sit->second.end()) return nullptr;
    return &kit->second;
}

const Config::Value& Config::require(const std::string& section, const std::string& key) const {
    const Value* value = find(section, key);
    if (value == nullptr)
        throw ConfigError(origin_ + ": missing [" + section + "] " + key);
    return *value;
}

std::string Config::get_string(const std::string& section, const std::string& key) const {
    return require(section, key).text;
}

long long Config::get_int(const std::string& section, const std::string& key) const {
    const Value& value = require(section, key);
    if (value.kind != Value::Kind::integer)
        throw ConfigError(origin_ + ": [" + section + "] " + key + " must be an integer");
    return value.integer;
}

double Config::get_double(const std::string& section, const std::string& key) const {
    const Value& value = require(section, key);
    if (value.kind != Value::Kind::integer && value.kind != Value::Kind::floating)
        throw ConfigError(origin_ + ": [" + section + "] " + key + " must be numeric");
    return value.floating;
}

bool Config::get_bool(const std::string& section, const std::string& key) const {
    const Value& value = require(section, key);
    if (value.kind != Value::Kind::boolean)
        throw ConfigError(origin_ + ": [" + section + "] " + key + " must be true or false");
    return value.boolean;
}

std::string Config::get_string_or(const std::string& section, const std::string& key,
                                  std::string fallback) const {
    const Value* value = find(section, key);
    return value != nullptr ? value->text : std::move(fallback);
}

long long Config::get_int_or(const std::string& section, const std::string& key,
                             long long fallback) const {
    return find(section, key) != nullptr ? get_int(section, key) : fallback;
}

double Config::get_double_or(const std::string& section, const std::string& key,
                             double fallback) const {
    return find(section, key) != nullptr ? get_double(section, key) : fallback;
}

bool Config::get_bool_or(const std::string& section, const std::string& key, bool fallback) const {
    return find(section, key) != nullptr ? get_bool(section, key) : fallback;
}

ModelProfile profile_from_config(const Config& config, const std::string& profile_id) {
    const std::string section = "profiles." + profile_id;
    if (!config.has_section(section)) throw ConfigError("no [" + section + "] in config");

    ModelProfile profile;
    profile.profile_id = profile_id;
    profile.endpoint_url = config.get_string(section, "endpoint_url");
    profile.model_name = config.get_string(section, "model_name");
    profile.context_limit = config.get_int(section, "context_limit");
    profile.tokens_per_minute = config.get_int(section, "tokens_per_minute");
    profile.price_in_per_1k = Money::parse(config.get_string_or(section, "price_in", "0"));
    profile.price_out_per_1k = Money::parse(config.get_string_or(section, "price_out", "0"));
    profile.supports_seed = config.get_bool_or(section, "supports_seed", true);
    if (profile.context_limit <= 0)
        throw ConfigError("[" + section + "] context_limit must be positive");
    return profile;
}

std::vector<std::string> profiles_in_config(const Config& config) {
    return config.subsections("profiles");
}

ModelParameters params_from_config(const Config& config) {
    ModelParameters params;  // deterministic defaults
    params.temperature = config.get_double_or("params", "temperature", params.temperature);
    params.top_p = config.get_double_or("params", "top_p", params.top_p);
    params.max_output_tokens =
        config.get_int_or("params", "max_output_tokens", params.max_output_tokens);
    if (config.has("params", "seed")) params.seed = config.get_int("params", "seed");
    if (!config.get_bool_or("params", "use_seed", true)) params.seed.reset();
    return params;
}

VariantPatch variant_patch_from_section(const Config& config, const std::string& section) {
    VariantPatch patch;
    if (config.has(section, "base")) patch.base_preset = config.get_string(section, "base");
    if (config.has(section, "data_boundary"))
        patch.data_boundary = data_boundary_from_string(config.get_string(section, "data_boundary"));
    if (config.has(section, "data_placement"))
        patch.data_placement =
            data_placement_from_string(config.get_string(section, "data_placement"));
    if (config.has(section, "task_style"))
        patch.task_style = task_style_from_string(config.get_string(section, "task_style"));
    if (config.has(section, "message_split"))
        patch.message_split = message_split_from_string(config.get_string(section, "message_split"));
    if (config.has(section, "pruning")) patch.pruning = config.get_bool(section, "pruning");
    if (config.has(section, "segmentation"))
        patch.segmentation = segmentation_from_string(config.get_string(section, "segmentation"));
    if (config.has(section, "shots"))
        patch.shots = static_cast<int>(config.get_int(section, "shots"));
    if (config.has(section, "system_instruction"))
        patch.system_instruction = config.get_string(section, "system_instruction");
    return patch;
}

PromptVariant variant_from_config(const Config& config, const std::string& name) {
    const std::string section = "variants." + name;
    if (config.has_section(section)) {
        VariantPatch patch = variant_patch_from_section(config, section);
        if (!patch.base_preset) patch.base_preset = "baseline";
        return patch.apply(PromptVariant{});
    }
    if (const auto preset = variant_preset(name)) return *preset;
    throw ConfigError("unknown variant '" + name + "' (no preset, no [" + section + "])");
}

std::vector<Technique> techniques_from_config(const Config& config) {
    std::vector<std::string> order = config.subsections("technique");
    std::sort(order.begin(), order.end());

    std::vector<Technique> techniques;
    for (const auto& suffix : order) {
        const std::string section = "technique." + suffix;
        Technique technique;
        technique.name = config.get_string_or(section, "name", suffix);
        technique.patch = variant_patch_from_section(config, section);
        if (config.has(section, "adopt")) technique.adopt_override = config.get_bool(section, "adopt");
        techniques.push_back(std::move(technique));
    }
    return techniques;
}

AnnotationCostModel annotation_model_from_config(const Config& config) {
    AnnotationCostModel model;
    model.annotators_per_policy =
        static_cast<int>(config.get_int_or("economics", "annotators_per_policy", 3));
    model.hours_per_policy = config.get_double_or("economics", "hours_per_policy", 1.8667);
    model.hourly_rate = Money::parse(config.get_string_or("economics", "hourly_rate", "10"));
    model.policy_count = config.get_int_or("economics", "policy_count", 100);
    return model;
}

LlmCostModel llm_model_from_config(const Config& config, const ModelProfile* profile) {
    LlmCostModel model;
    model.tokens_in_per_policy = config.get_int_or("economics", "tokens_in_per_policy", 6652);
    model.tokens_out_per_policy = config.get_int_or("economics", "tokens_out_per_policy", 600);
    if (profile != nullptr) {
        model.price_in_per_1k = profile->price_in_per_1k;
        model.price_out_per_1k = profile->price_out_per_1k;
    }
    if (config.has("economics", "price_in"))
        model.price_in_per_1k = Money::parse(config.get_string("economics", "price_in"));
    if (config.has("economics", "price_out"))
        model.price_out_per_1k = Money::parse(config.get_string("economics", "price_out"));
    return model;
}

}  // namespace policyprobe
