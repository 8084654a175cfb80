#pragma once

#include <vector>

namespace igdtm::test {

/// O(n^2) reference: agreements over all unordered pairs.
inline double rand_index_by_pairs(const std::vector<int>& a, const std::vector<int>& b) {
  const std::size_t n = a.size();
  long agree = 0, total = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      agree += (a[i] == a[j]) == (b[i] == b[j]);
      ++total;
    }
  return static_cast<double>(agree) / static_cast<double>(total);
}

}  // namespace igdtm::test
