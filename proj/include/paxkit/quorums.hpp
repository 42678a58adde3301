#pragma once

#include <set>
#include <vector>

#include "paxkit/core.hpp"

namespace paxkit {

using AcceptorSet = std::set<int>;

// r x w grid of acceptors. Acceptor ids are row-major: id = row * cols + col.
// Every row is a read quorum; every column is a write quorum.
class GridQuorumSystem {
 public:
  GridQuorumSystem(int rows, int cols) : rows_(rows), cols_(cols) {}

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int size() const { return rows_ * cols_; }

  int id(int row, int col) const { return row * cols_ + col; }

  std::vector<int> row_members(int row) const {
    std::vector<int> m;
    m.reserve(cols_);
    for (int c = 0; c < cols_; ++c) m.push_back(id(row, c));
    return m;
  }

  std::vector<int> column_members(int col) const {
    std::vector<int> m;
    m.reserve(rows_);
    for (int r = 0; r < rows_; ++r) m.push_back(id(r, col));
    return m;
  }

  std::vector<AcceptorSet> read_quorums() const {
    std::vector<AcceptorSet> qs;
    for (int r = 0; r < rows_; ++r) {
      auto m = row_members(r);
      qs.emplace_back(m.begin(), m.end());
    }
    return qs;
  }

  std::vector<AcceptorSet> write_quorums() const {
    std::vector<AcceptorSet> qs;
    for (int c = 0; c < cols_; ++c) {
      auto m = column_members(c);
      qs.emplace_back(m.begin(), m.end());
    }
    return qs;
  }

  // True iff s contains every member of at least one column. Supersets count:
  // a thrifty retry that widened the contacted set still certifies chosenness.
  bool is_write_quorum(const AcceptorSet& s) const {
    for (int c = 0; c < cols_; ++c) {
      bool full = true;
      for (int r = 0; r < rows_; ++r) {
        if (!s.count(id(r, c))) {
          full = false;
          break;
        }
      }
      if (full) return true;
    }
    return false;
  }

 private:
  int rows_;
  int cols_;
};

// 2f+1 acceptors; read quorums = write quorums = all subsets of size f+1.
class MajorityQuorumSystem {
 public:
  explicit MajorityQuorumSystem(int f) : f_(f) {}

  int f() const { return f_; }
  int size() const { return 2 * f_ + 1; }
  int quorum_size() const { return f_ + 1; }

  bool is_quorum(const AcceptorSet& s) const {
    return static_cast<int>(s.size()) >= quorum_size();
  }

 private:
  int f_;
};

}  // namespace paxkit
