#ifndef PHI2_CONFIG_HPP
#define PHI2_CONFIG_HPP

#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>

namespace phi2 {

// Minimal structured key-value config: "[section]" headers, "key = value"
// entries, '#' comments.  A TOML subset sufficient for flat sections.
class Config {
public:
    static Config parse(std::istream& is) {
        Config cfg;
        std::string line, section;
        std::ostringstream canonical;
        while (std::getline(is, line)) {
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            line = trim(line);
            if (line.empty()) continue;
            if (line.front() == '[') {
                if (line.back() != ']') throw std::runtime_error("config: malformed section: " + line);
                section = trim(line.substr(1, line.size() - 2));
                continue;
            }
            const auto eq = line.find('=');
            if (eq == std::string::npos) throw std::runtime_error("config: expected key = value: " + line);
            std::string key = trim(line.substr(0, eq));
            std::string value = trim(line.substr(eq + 1));
            if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
                value = value.substr(1, value.size() - 2);
            cfg.values_[section + "." + key] = value;
        }
        for (const auto& [k, v] : cfg.values_) canonical << k << '=' << v << '\n';
        cfg.canonical_ = canonical.str();
        return cfg;
    }

    static Config parse_file(const std::string& path) {
        std::ifstream is(path);
        if (!is) throw std::runtime_error("config: cannot open " + path);
        return parse(is);
    }

    static Config parse_string(const std::string& text) {
        std::istringstream is(text);
        return parse(is);
    }

    bool has(const std::string& key) const { return values_.count(key) > 0; }

    std::string get_string(const std::string& key) const {
        const auto it = values_.find(key);
        if (it == values_.end()) throw std::runtime_error("config: missing key " + key);
        return it->second;
    }

    std::string get_string(const std::string& key, const std::string& fallback) const {
        const auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }

    double get_double(const std::string& key) const { return to_double(key, get_string(key)); }
    double get_double(const std::string& key, double fallback) const {
        return has(key) ? get_double(key) : fallback;
    }

    long get_int(const std::string& key) const {
        const std::string v = get_string(key);
        std::size_t pos = 0;
        long out;
        try {
            out = std::stol(v, &pos);
        } catch (const std::exception&) {
            throw std::runtime_error("config: key " + key + " is not an integer: " + v);
        }
        if (pos != v.size()) throw std::runtime_error("config: key " + key + " is not an integer: " + v);
        return out;
    }
    long get_int(const std::string& key, long fallback) const {
        return has(key) ? get_int(key) : fallback;
    }

    bool get_bool(const std::string& key) const {
        const std::string v = get_string(key);
        if (v == "true" || v == "1" || v == "yes") return true;
        if (v == "false" || v == "0" || v == "no") return false;
        throw std::runtime_error("config: key " + key + " is not a boolean: " + v);
    }
    bool get_bool(const std::string& key, bool fallback) const {
        return has(key) ? get_bool(key) : fallback;
    }

    // override from the command line, "section.key=value"
    void set(const std::string& key, const std::string& value) {
        values_[key] = value;
        std::ostringstream canonical;
        for (const auto& [k, v] : values_) canonical << k << '=' << v << '\n';
        canonical_ = canonical.str();
    }

    const std::string& canonical_text() const { return canonical_; }

private:
    static std::string trim(const std::string& s) {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return "";
        const auto e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
    }

    double to_double(const std::string& key, const std::string& v) const {
        std::size_t pos = 0;
        double out;
        try {
            out = std::stod(v, &pos);
        } catch (const std::exception&) {
            throw std::runtime_error("config: key " + key + " is not a number: " + v);
        }
        if (pos != v.size()) throw std::runtime_error("config: key " + key + " is not a number: " + v);
        return out;
    }

    std::map<std::string, std::string> values_;
    std::string canonical_;
};

} // namespace phi2

#endif
