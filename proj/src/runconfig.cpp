#include "good/runconfig.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "good/errors.hpp"

namespace good {

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    if (trim(s).empty()) {
        return out;
    }
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        out.push_back(trim(item));
    }
    return out;
}

double parse_double(const std::string& s) {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) {
        throw std::invalid_argument("trailing characters");
    }
    return v;
}

std::uint64_t parse_unsigned(const std::string& s) {
    if (s.empty() || s[0] == '-' || s[0] == '+') {
        throw std::invalid_argument("not a non-negative integer");
    }
    std::size_t used = 0;
    const unsigned long long v = std::stoull(s, &used);
    if (used != s.size()) {
        throw std::invalid_argument("trailing characters");
    }
    return v;
}

// Converts `text` into the JSON type of `like`, which is the default value of
// the same key.
nlohmann::json typed_value(const nlohmann::json& like, const std::string& text) {
    if (like.is_boolean()) {
        if (text == "true") {
            return true;
        }
        if (text == "false") {
            return false;
        }
        throw std::invalid_argument("expected true or false");
    }
    if (like.is_number_unsigned() || like.is_number_integer()) {
        return parse_unsigned(text);
    }
    if (like.is_number_float()) {
        return parse_double(text);
    }
    if (like.is_string()) {
        return text;
    }
    if (like.is_array()) {
        nlohmann::json arr = nlohmann::json::array();
        const bool integral = !like.empty() ? !like.front().is_number_float() : true;
        for (const std::string& item : split_list(text)) {
            arr.push_back(integral ? nlohmann::json(parse_unsigned(item)) : nlohmann::json(parse_double(item)));
        }
        return arr;
    }
    throw std::invalid_argument("unsupported value");
}

std::string render(const nlohmann::json& v) {
    if (v.is_string()) {
        return v.get<std::string>();
    }
    if (v.is_array()) {
        std::string out;
        for (std::size_t i = 0; i < v.size(); ++i) {
            out += (i ? "," : "") + render(v[i]);
        }
        return out;
    }
    if (v.is_number_float()) {
        char buf[32];
        const auto res = std::to_chars(buf, buf + sizeof buf, v.get<double>());
        return std::string(buf, res.ptr);
    }
    return v.dump();
}

std::string render_suite(const std::vector<Member>& suite) {
    std::string out;
    for (std::size_t i = 0; i < suite.size(); ++i) {
        out += (i ? "," : "") + to_string(suite[i]);
    }
    return out;
}

std::string render_seeds(const std::vector<std::uint64_t>& seeds) {
    std::string out;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        out += (i ? "," : "") + std::to_string(seeds[i]);
    }
    return out;
}

// Training keys whose defaults are an empty list need an explicit element type.
bool is_integer_list(const std::string& key) {
    return key == "widths";
}

} // namespace

void RunConfig::validate() const {
    try {
        synth.validate();
    } catch (const ArgumentError& e) {
        throw ConfigError(e.what());
    }
    validate_experiment();
}

void RunConfig::validate_experiment() const {
    train.validate();
    if (suite.empty()) {
        throw ConfigError("suite must name at least one member");
    }
    if (seeds.empty()) {
        throw ConfigError("seeds must list at least one seed");
    }
}

RunConfig parse_run_config(const std::string& text, const std::string& origin) {
    RunConfig cfg;
    nlohmann::json synth = to_json(cfg.synth);
    nlohmann::json train = to_json(cfg.train);
    std::set<std::string> seen;

    std::istringstream in(text);
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        const std::string where = origin + ":" + std::to_string(number);
        const auto hash = line.find('#');
        if (hash != std::string::npos) {
            line.erase(hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(where + ": expected 'key = value'");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (!seen.insert(key).second) {
            throw ConfigError(where + ": key '" + key + "' given twice");
        }
        try {
            if (key == "suite") {
                cfg.suite.clear();
                for (const std::string& m : split_list(value)) {
                    cfg.suite.push_back(parse_member(m));
                }
            } else if (key == "seeds") {
                cfg.seeds.clear();
                for (const std::string& s : split_list(value)) {
                    cfg.seeds.push_back(parse_unsigned(s));
                }
            } else if (key == "coefficients") {
                cfg.coefficients = value;
            } else if (key == "seed") {
                synth["seed"] = parse_unsigned(value);
                train["seed"] = synth["seed"];
            } else if (synth.contains(key)) {
                synth[key] = typed_value(synth[key], value);
            } else if (train.contains(key)) {
                const nlohmann::json like =
                    is_integer_list(key) ? nlohmann::json::array({std::size_t{0}}) : train[key];
                train[key] = typed_value(like, value);
            } else {
                throw ConfigError(where + ": unknown key '" + key + "'");
            }
        } catch (const ConfigError& e) {
            const std::string msg = e.what();
            throw ConfigError(msg.rfind(where, 0) == 0 ? msg : where + ": " + key + ": " + msg);
        } catch (const std::exception& e) {
            throw ConfigError(where + ": bad value '" + value + "' for " + key + " (" + e.what() + ")");
        }
    }
    try {
        cfg.synth = synth_config_from_json(synth);
        cfg.train = train_config_from_json(train);
    } catch (const Error& e) {
        throw ConfigError(origin + ": " + e.what());
    }
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot read config " + path.string());
    }
    std::ostringstream text;
    text << in.rdbuf();
    return parse_run_config(text.str(), path.string());
}

std::string format_run_config(const RunConfig& cfg) {
    std::ostringstream os;
    os << "# effective configuration\n\nseed = " << cfg.train.seed << "\n\n# data generation\n";
    const nlohmann::json synth = to_json(cfg.synth);
    for (const auto& [key, value] : synth.items()) {
        if (key != "seed") {
            os << key << " = " << render(value) << '\n';
        }
    }
    os << "\n# training\n";
    const nlohmann::json train = to_json(cfg.train);
    for (const auto& [key, value] : train.items()) {
        if (key != "seed") {
            os << key << " = " << render(value) << '\n';
        }
    }
    os << "\n# experiments\n";
    os << "suite = " << render_suite(cfg.suite) << '\n';
    os << "seeds = " << render_seeds(cfg.seeds) << '\n';
    os << "coefficients = " << cfg.coefficients << '\n';
    return os.str();
}

void save_run_config(const RunConfig& cfg, const std::filesystem::path& path) {
    std::ofstream out(path);
    out << format_run_config(cfg);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
}

} // namespace good
