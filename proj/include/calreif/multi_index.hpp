#pragma once

#include <cstdint>
#include <vector>

#include "calreif/errors.hpp"

namespace calreif {

std::uint64_t binomial(int n, int k);

// Strictly increasing tuple of coordinate indices, 1-based.
class MultiIndex {
 public:
  MultiIndex() = default;
  explicit MultiIndex(std::vector<int> indices);

  int degree() const { return static_cast<int>(idx_.size()); }
  int operator[](int i) const { return idx_[static_cast<std::size_t>(i)]; }
  const std::vector<int>& indices() const { return idx_; }
  int max_index() const { return idx_.empty() ? 0 : idx_.back(); }

  bool operator==(const MultiIndex& o) const { return idx_ == o.idx_; }
  bool operator<(const MultiIndex& o) const { return idx_ < o.idx_; }

  // Lexicographic position among the C(n,k) increasing k-tuples over 1..n.
  std::uint64_t rank(int n) const;
  static MultiIndex from_rank(int n, int k, std::uint64_t rank);

  // All increasing k-tuples over 1..n in lexicographic order.
  static std::vector<MultiIndex> enumerate(int n, int k);

 private:
  std::vector<int> idx_;
};

// Sorts indices ascending in place and returns the permutation sign,
// or 0 if any index repeats.
int sort_with_parity(std::vector<int>& indices);

}  // namespace calreif
