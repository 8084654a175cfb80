#pragma once

#include <vector>

namespace igdtm {

/// Fraction of unordered element pairs on which two labelings agree (both
/// together or both apart). Uses contingency-table counts, O(n + |A||B|).
/// Throws Error on a length mismatch or fewer than two elements.
double rand_index(const std::vector<int>& a, const std::vector<int>& b);

}  // namespace igdtm
