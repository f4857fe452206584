#pragma once

#include <map>
#include <string>
#include <vector>

namespace bevloop {

// Minimal INI-style config: [section] headers, key = value lines, '#' or ';'
// comments. Values keep their raw text; typed getters parse on demand.
class Config {
  public:
    static Config parse_file(const std::string& path);
    static Config parse_string(const std::string& text);

    bool has(const std::string& section, const std::string& key) const;

    std::string get(const std::string& section, const std::string& key) const;
    std::string get_or(const std::string& section, const std::string& key,
                       const std::string& fallback) const;

    long get_int(const std::string& section, const std::string& key) const;
    long get_int_or(const std::string& section, const std::string& key, long fallback) const;

    double get_real(const std::string& section, const std::string& key) const;
    double get_real_or(const std::string& section, const std::string& key,
                       double fallback) const;

    bool get_bool_or(const std::string& section, const std::string& key, bool fallback) const;

    // "a:0.5,b:0.25,c:0.25" -> ordered (name, value) pairs.
    std::vector<std::pair<std::string, double>> get_weighted_list(
        const std::string& section, const std::string& key) const;

    // "1.0,2.0,7.0" -> values.
    std::vector<double> get_real_list_or(const std::string& section, const std::string& key,
                                         const std::vector<double>& fallback) const;

    const std::map<std::string, std::map<std::string, std::string>>& sections() const {
        return sections_;
    }

    void set(const std::string& section, const std::string& key, const std::string& value) {
        sections_[section][key] = value;
    }

  private:
    std::map<std::string, std::map<std::string, std::string>> sections_;
};

}  // namespace bevloop
