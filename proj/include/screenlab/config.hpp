// Run configuration: flat "key = value" files with [section] headers (keys
// flatten to section.key). Unknown keys are rejected up front so a typo can
// never silently change a run.
#pragma once

#include <cctype>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "screenlab/dist.hpp"

namespace screenlab {

struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

inline const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys = {
        "dist.kind", "dist.lo", "dist.hi", "dist.mu", "dist.sigma", "dist.a", "dist.b",
        "problem.n", "problem.alpha", "problem.alpha_min", "problem.alpha_max",
        "problem.alpha_count", "problem.alpha_grid",
        "oracle.grid_points", "oracle.refine_rounds",
        "improve.epsilon", "improve.epsilon_frac",
        "sim.n_paths", "sim.seed", "sim.deviation_nodes", "sim.theta_grid", "sim.per_path_csv",
        "run.threads",
    };
    return keys;
}

}  // namespace detail

class RunConfig {
  public:
    static RunConfig parse(const std::string& text) {
        RunConfig cfg;
        std::istringstream in(text);
        std::string line, section;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line = line.substr(0, hash);
            line = detail::trim(line);
            if (line.empty()) continue;
            if (line.front() == '[') {
                if (line.back() != ']')
                    throw ConfigError("config line " + std::to_string(lineno) +
                                      ": unterminated section header");
                section = detail::trim(line.substr(1, line.size() - 2));
                continue;
            }
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw ConfigError("config line " + std::to_string(lineno) +
                                  ": expected key = value");
            std::string key = detail::trim(line.substr(0, eq));
            const std::string value = detail::trim(line.substr(eq + 1));
            if (key.find('.') == std::string::npos && !section.empty())
                key = section + "." + key;
            if (!detail::known_keys().count(key))
                throw ConfigError("config line " + std::to_string(lineno) + ": unknown key \"" +
                                  key + "\"");
            if (cfg.values_.count(key))
                throw ConfigError("config line " + std::to_string(lineno) + ": duplicate key \"" +
                                  key + "\"");
            cfg.values_[key] = value;
        }
        return cfg;
    }

    bool has(const std::string& key) const { return values_.count(key) != 0; }

    std::string get_string(const std::string& key) const {
        const auto it = values_.find(key);
        if (it == values_.end()) throw ConfigError("config: missing required key \"" + key + "\"");
        return it->second;
    }

    double get_double(const std::string& key) const { return to_double(key, get_string(key)); }
    double get_double(const std::string& key, double fallback) const {
        return has(key) ? get_double(key) : fallback;
    }
    std::int64_t get_int(const std::string& key) const {
        const std::string s = get_string(key);
        std::size_t pos = 0;
        std::int64_t v = 0;
        try {
            v = std::stoll(s, &pos);
        } catch (...) {
            throw ConfigError("config: key \"" + key + "\" is not an integer: " + s);
        }
        if (pos != s.size())
            throw ConfigError("config: key \"" + key + "\" is not an integer: " + s);
        return v;
    }
    std::int64_t get_int(const std::string& key, std::int64_t fallback) const {
        return has(key) ? get_int(key) : fallback;
    }
    bool get_bool(const std::string& key, bool fallback) const {
        if (!has(key)) return fallback;
        const std::string s = get_string(key);
        if (s == "true" || s == "1" || s == "yes") return true;
        if (s == "false" || s == "0" || s == "no") return false;
        throw ConfigError("config: key \"" + key + "\" is not a boolean: " + s);
    }

    CostDistribution dist() const {
        const std::string kind = get_string("dist.kind");
        const double lo = get_double("dist.lo");
        const double hi = get_double("dist.hi");
        if (kind == "uniform") return make_uniform(lo, hi);
        if (kind == "truncnorm")
            return make_truncated_normal(get_double("dist.mu"), get_double("dist.sigma"), lo, hi);
        if (kind == "scaledbeta")
            return make_scaled_beta(get_double("dist.a"), get_double("dist.b"), lo, hi);
        throw ConfigError("config: dist.kind must be uniform, truncnorm, or scaledbeta");
    }

    int periods() const {
        const std::int64_t n = get_int("problem.n");
        if (n < 1) throw ConfigError("config: problem.n must be >= 1");
        return static_cast<int>(n);
    }

    std::vector<double> alpha_grid() const {
        std::vector<double> grid;
        if (has("problem.alpha_grid")) {
            std::istringstream ss(get_string("problem.alpha_grid"));
            std::string tok;
            while (std::getline(ss, tok, ',')) grid.push_back(to_double("problem.alpha_grid", detail::trim(tok)));
        } else if (has("problem.alpha_min")) {
            const double a0 = get_double("problem.alpha_min");
            const double a1 = get_double("problem.alpha_max");
            const auto count = get_int("problem.alpha_count", 50);
            if (count < 2 || a1 < a0) throw ConfigError("config: bad alpha range");
            for (std::int64_t k = 0; k < count; ++k)
                grid.push_back(a0 + (a1 - a0) * static_cast<double>(k) /
                                        static_cast<double>(count - 1));
        } else {
            throw ConfigError("config: sweep needs problem.alpha_grid or problem.alpha_min/max");
        }
        return grid;
    }

  private:
    static double to_double(const std::string& key, const std::string& s) {
        std::size_t pos = 0;
        double v = 0.0;
        try {
            v = std::stod(s, &pos);
        } catch (...) {
            throw ConfigError("config: key \"" + key + "\" is not a number: " + s);
        }
        if (pos != s.size())
            throw ConfigError("config: key \"" + key + "\" is not a number: " + s);
        return v;
    }

    std::map<std::string, std::string> values_;
};

}  // namespace screenlab
