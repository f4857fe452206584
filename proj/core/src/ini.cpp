#include "bevloop/common/ini.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "bevloop/common/error.hpp"

namespace bevloop {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

}  // namespace

Config Config::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_string(ss.str());
}

Config Config::parse_string(const std::string& text) {
    Config cfg;
    std::istringstream in(text);
    std::string line;
    std::string section;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[') {
            if (t.back() != ']') throw ParseError("unterminated section header", lineno);
            section = trim(t.substr(1, t.size() - 2));
            cfg.sections_[section];
            continue;
        }
        size_t eq = t.find('=');
        if (eq == std::string::npos) throw ParseError("expected key = value", lineno);
        std::string key = trim(t.substr(0, eq));
        std::string value = trim(t.substr(eq + 1));
        if (key.empty()) throw ParseError("empty key", lineno);
        cfg.sections_[section][key] = value;
    }
    return cfg;
}

bool Config::has(const std::string& section, const std::string& key) const {
    auto s = sections_.find(section);
    return s != sections_.end() && s->second.count(key) > 0;
}

std::string Config::get(const std::string& section, const std::string& key) const {
    auto s = sections_.find(section);
    if (s == sections_.end() || !s->second.count(key))
        throw InvalidArgument("missing config key [" + section + "] " + key);
    return s->second.at(key);
}

std::string Config::get_or(const std::string& section, const std::string& key,
                           const std::string& fallback) const {
    return has(section, key) ? get(section, key) : fallback;
}

long Config::get_int(const std::string& section, const std::string& key) const {
    const std::string v = get(section, key);
    char* end = nullptr;
    long r = std::strtol(v.c_str(), &end, 10);
    if (end == v.c_str() || *end != '\0')
        throw InvalidArgument("config key [" + section + "] " + key + " is not an integer: " + v);
    return r;
}

long Config::get_int_or(const std::string& section, const std::string& key, long fallback) const {
    return has(section, key) ? get_int(section, key) : fallback;
}

double Config::get_real(const std::string& section, const std::string& key) const {
    const std::string v = get(section, key);
    char* end = nullptr;
    double r = std::strtod(v.c_str(), &end);
    if (end == v.c_str() || *end != '\0')
        throw InvalidArgument("config key [" + section + "] " + key + " is not a number: " + v);
    return r;
}

double Config::get_real_or(const std::string& section, const std::string& key,
                           double fallback) const {
    return has(section, key) ? get_real(section, key) : fallback;
}

bool Config::get_bool_or(const std::string& section, const std::string& key,
                         bool fallback) const {
    if (!has(section, key)) return fallback;
    const std::string v = get(section, key);
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw InvalidArgument("config key [" + section + "] " + key + " is not a bool: " + v);
}

std::vector<std::pair<std::string, double>> Config::get_weighted_list(
    const std::string& section, const std::string& key) const {
    const std::string v = get(section, key);
    std::vector<std::pair<std::string, double>> out;
    std::istringstream in(v);
    std::string item;
    while (std::getline(in, item, ',')) {
        size_t colon = item.find(':');
        if (colon == std::string::npos)
            throw InvalidArgument("weighted list entry missing ':': " + item);
        std::string name = item.substr(0, colon);
        name.erase(0, name.find_first_not_of(" \t"));
        name.erase(name.find_last_not_of(" \t") + 1);
        out.emplace_back(name, std::strtod(item.c_str() + colon + 1, nullptr));
    }
    return out;
}

std::vector<double> Config::get_real_list_or(const std::string& section, const std::string& key,
                                             const std::vector<double>& fallback) const {
    if (!has(section, key)) return fallback;
    const std::string v = get(section, key);
    std::vector<double> out;
    std::istringstream in(v);
    std::string item;
    while (std::getline(in, item, ',')) out.push_back(std::strtod(item.c_str(), nullptr));
    return out;
}

}  // namespace bevloop
