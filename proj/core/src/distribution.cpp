#include "bevloop/loop/distribution.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "bevloop/common/error.hpp"

namespace bevloop::loop {

std::vector<std::string> build_support(const std::vector<std::vector<std::string>>& keyword_sets,
                                       size_t cap) {
    std::map<std::string, size_t> freq;
    for (const auto& set : keyword_sets)
        for (const std::string& k : set) ++freq[k];
    std::vector<std::pair<std::string, size_t>> items(freq.begin(), freq.end());
    std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    if (items.size() > cap) items.resize(cap);
    std::vector<std::string> support;
    support.reserve(items.size());
    for (const auto& [k, n] : items) support.push_back(k);
    std::sort(support.begin(), support.end());
    return support;
}

KeywordDistribution distribution_on(const std::vector<std::vector<std::string>>& keyword_sets,
                                    const std::vector<std::string>& support) {
    KeywordDistribution out;
    out.support = support;
    out.p.assign(support.size(), 0.0);
    double total = 0.0;
    for (const auto& set : keyword_sets)
        for (const std::string& k : set) {
            const auto it = std::lower_bound(support.begin(), support.end(), k);
            if (it != support.end() && *it == k) {
                out.p[static_cast<size_t>(it - support.begin())] += 1.0;
                total += 1.0;
            }
        }
    if (total > 0.0)
        for (double& v : out.p) v /= total;
    return out;
}

double hellinger(const KeywordDistribution& a, const KeywordDistribution& b) {
    if (a.support != b.support)
        throw InvalidArgument("keyword distributions live on different supports");
    double sum = 0.0;
    for (size_t i = 0; i < a.p.size(); ++i) {
        const double d = std::sqrt(a.p[i]) - std::sqrt(b.p[i]);
        sum += d * d;
    }
    return std::sqrt(sum) / std::sqrt(2.0);
}

}  // namespace bevloop::loop
