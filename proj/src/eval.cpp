#include "igdtm/eval.hpp"

#include <unordered_map>

#include "igdtm/error.hpp"

namespace igdtm {

namespace {

// Dense relabeling to 0..k-1 in order of first appearance.
std::vector<int> compact(const std::vector<int>& labels, int& k) {
  std::unordered_map<int, int> ids;
  std::vector<int> out;
  out.reserve(labels.size());
  for (int l : labels) {
    if (l < 0) throw Error("rand_index: labels must be nonnegative");
    auto [it, inserted] = ids.emplace(l, static_cast<int>(ids.size()));
    out.push_back(it->second);
  }
  k = static_cast<int>(ids.size());
  return out;
}

}  // namespace

double rand_index(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) throw Error("rand_index: partitions have different lengths");
  if (a.size() < 2) throw Error("rand_index: need at least two elements");
  int ka = 0, kb = 0;
  const std::vector<int> ca = compact(a, ka), cb = compact(b, kb);
  std::vector<long long> table(static_cast<std::size_t>(ka) * static_cast<std::size_t>(kb), 0);
  std::vector<long long> rows(static_cast<std::size_t>(ka), 0), cols(static_cast<std::size_t>(kb), 0);
  for (std::size_t i = 0; i < ca.size(); ++i) {
    ++table[static_cast<std::size_t>(ca[i]) * static_cast<std::size_t>(kb) + static_cast<std::size_t>(cb[i])];
    ++rows[static_cast<std::size_t>(ca[i])];
    ++cols[static_cast<std::size_t>(cb[i])];
  }
  // Integer pair counts keep the result exact up to the final division.
  auto choose2 = [](long long n) { return n * (n - 1) / 2; };
  long long both = 0, in_a = 0, in_b = 0;
  for (long long c : table) both += choose2(c);
  for (long long c : rows) in_a += choose2(c);
  for (long long c : cols) in_b += choose2(c);
  const long long total = choose2(static_cast<long long>(a.size()));
  const long long agree = total + 2 * both - in_a - in_b;
  return static_cast<double>(agree) / static_cast<double>(total);
}

}  // namespace igdtm
