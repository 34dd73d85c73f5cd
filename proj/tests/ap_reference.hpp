#pragma once

// Independent AP@K oracle: recomputes the precision at every relevant hit by
// rescanning the prefix, rather than carrying a running hit counter.

#include <algorithm>
#include <unordered_set>
#include <vector>

#include "lre/types.hpp"

namespace test {

inline double naive_ap(const std::vector<lre::ImageId>& ranked,
                       const std::unordered_set<lre::ImageId>& relevant, int cutoff) {
    if (relevant.empty()) return 0.0;
    double total = 0.0;
    for (int i = 0; i < static_cast<int>(ranked.size()) && i < cutoff; ++i) {
        if (relevant.count(ranked[i]) == 0) continue;
        int hits_upto = 0;
        for (int j = 0; j <= i; ++j) {
            if (relevant.count(ranked[j]) != 0) ++hits_upto;
        }
        total += static_cast<double>(hits_upto) / (i + 1);
    }
    const int denom = std::min<int>(static_cast<int>(relevant.size()), cutoff);
    return total / denom;
}

} // namespace test
