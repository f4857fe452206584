#pragma once

#include <string>
#include <vector>

namespace bevloop::loop {

inline constexpr size_t kSupportCap = 100;

// Keyword histogram over a fixed support, normalized to a probability
// vector. The support is frozen on the reference iteration so later
// distributions stay comparable.
struct KeywordDistribution {
    std::vector<std::string> support;  // sorted
    std::vector<double> p;             // aligned with support
    bool empty() const { return support.empty(); }
};

// Most frequent keywords across the sets, capped; ties broken
// lexicographically. Result is sorted.
std::vector<std::string> build_support(const std::vector<std::vector<std::string>>& keyword_sets,
                                       size_t cap = kSupportCap);

// Histogram of the sets restricted to the support. All-zero counts yield a
// zero vector (the caller decides how to treat an empty iteration).
KeywordDistribution distribution_on(const std::vector<std::vector<std::string>>& keyword_sets,
                                    const std::vector<std::string>& support);

// sqrt(sum (sqrt p - sqrt q)^2) / sqrt 2, in [0, 1].
double hellinger(const KeywordDistribution& a, const KeywordDistribution& b);

}  // namespace bevloop::loop
