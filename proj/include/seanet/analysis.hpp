// Copyright 2026 The seanet Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Structure of a symbol set: cosine distances, average-linkage (UPGMA)
// dendrograms, cophenetic distances and correlation, a shuffle null for the
// correlation, and the dendrogram-induced semantic network.

#ifndef SEANET_ANALYSIS_HPP_
#define SEANET_ANALYSIS_HPP_

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "seanet/common.hpp"
#include "seanet/csv.hpp"

namespace seanet {

struct DistanceMatrix {
  Matrix values;

  Index size() const { return values.rows(); }
  double operator()(Index i, Index j) const { return values(i, j); }

  void validate() const {
    if (values.rows() != values.cols()) throw DimensionError("distance matrix is not square");
    for (Index i = 0; i < size(); ++i) {
      if (values(i, i) != 0.0) {
        throw ValidationError("distance matrix diagonal is nonzero at " + std::to_string(i));
      }
      for (Index j = 0; j < size(); ++j) {
        const double v = values(i, j);
        if (!std::isfinite(v) || v < 0.0) {
          throw ValidationError("distance (" + std::to_string(i) + "," + std::to_string(j) +
                                ") is negative or non-finite");
        }
        if (std::abs(v - values(j, i)) > 1e-12) {
          throw ValidationError("distance matrix is not symmetric at (" + std::to_string(i) +
                                "," + std::to_string(j) + ")");
        }
      }
    }
  }
};

// d_ij = 1 - <s_i, s_j> / (|s_i| |s_j|), clamped at 0 against rounding.
inline DistanceMatrix cosine_distance_matrix(std::span<const Vector> symbols) {
  const Index n = static_cast<Index>(symbols.size());
  std::vector<double> norms(symbols.size());
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    if (symbols[i].size() != symbols.front().size()) {
      throw DimensionError("vector " + std::to_string(i) + " has a different length");
    }
    norms[i] = symbols[i].norm();
    if (!(norms[i] > 0.0)) {
      throw ValidationError("vector " + std::to_string(i) + " has zero norm");
    }
  }
  DistanceMatrix d{Matrix::Zero(n, n)};
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      const auto si = static_cast<std::size_t>(i), sj = static_cast<std::size_t>(j);
      const double cos = symbols[si].dot(symbols[sj]) / (norms[si] * norms[sj]);
      const double v = std::max(0.0, 1.0 - cos);
      d.values(i, j) = v;
      d.values(j, i) = v;
    }
  }
  return d;
}

// Leaves are nodes 0..n-1; the k-th merge creates node n + k.
struct Merge {
  Index left = 0;   // smaller node id
  Index right = 0;
  double height = 0.0;
  Index size = 0;   // leaves under the new node
};

struct Dendrogram {
  Index leaves = 0;
  std::vector<Merge> merges;

  Index root() const { return leaves + static_cast<Index>(merges.size()) - 1; }

  double node_height(Index node) const {
    return node < leaves ? 0.0 : merges[static_cast<std::size_t>(node - leaves)].height;
  }

  // Leaves under `node`, ascending.
  std::vector<Index> leaves_under(Index node) const {
    std::vector<Index> out;
    std::vector<Index> stack{node};
    while (!stack.empty()) {
      const Index x = stack.back();
      stack.pop_back();
      if (x < leaves) {
        out.push_back(x);
      } else {
        const auto& m = merges[static_cast<std::size_t>(x - leaves)];
        stack.push_back(m.left);
        stack.push_back(m.right);
      }
    }
    std::sort(out.begin(), out.end());
    return out;
  }
};

// Average-linkage agglomeration. At each step the closest pair of active
// clusters merges at their distance; the merged cluster's distance to any
// other is the size-weighted mean of its parts'. Ties go to the
// lexicographically smallest (node id, node id) pair.
inline Dendrogram upgma(const DistanceMatrix& d) {
  d.validate();
  const Index n = d.size();
  if (n < 2) throw ValidationError("UPGMA needs at least 2 leaves");
  const Index total = 2 * n - 1;
  Matrix dist = Matrix::Zero(total, total);
  dist.topLeftCorner(n, n) = d.values;
  std::vector<Index> active(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) active[static_cast<std::size_t>(i)] = i;
  std::vector<Index> size(static_cast<std::size_t>(total), 1);
  Dendrogram dend;
  dend.leaves = n;
  for (Index step = 0; step < n - 1; ++step) {
    // `active` stays sorted, so scanning a < b in order yields the
    // lexicographic tie-break.
    double best = std::numeric_limits<double>::infinity();
    std::size_t ba = 0, bb = 0;
    for (std::size_t a = 0; a < active.size(); ++a) {
      for (std::size_t b = a + 1; b < active.size(); ++b) {
        const double v = dist(active[a], active[b]);
        if (v < best) {
          best = v;
          ba = a;
          bb = b;
        }
      }
    }
    const Index x = active[ba], y = active[bb];
    const Index node = n + step;
    const auto sx = static_cast<double>(size[static_cast<std::size_t>(x)]);
    const auto sy = static_cast<double>(size[static_cast<std::size_t>(y)]);
    size[static_cast<std::size_t>(node)] = size[static_cast<std::size_t>(x)] +
                                           size[static_cast<std::size_t>(y)];
    for (auto k : active) {
      if (k == x || k == y) continue;
      const double v = (sx * dist(x, k) + sy * dist(y, k)) / (sx + sy);
      dist(node, k) = v;
      dist(k, node) = v;
    }
    dend.merges.push_back({x, y, best, size[static_cast<std::size_t>(node)]});
    active.erase(active.begin() + static_cast<std::ptrdiff_t>(bb));
    active.erase(active.begin() + static_cast<std::ptrdiff_t>(ba));
    active.push_back(node);
  }
  return dend;
}

// t_ij = height of the merge where leaves i and j first join.
inline DistanceMatrix cophenetic_distances(const Dendrogram& dend) {
  const Index n = dend.leaves;
  DistanceMatrix t{Matrix::Zero(n, n)};
  for (std::size_t k = 0; k < dend.merges.size(); ++k) {
    const auto& m = dend.merges[k];
    const auto left = dend.leaves_under(m.left);
    const auto right = dend.leaves_under(m.right);
    for (auto i : left) {
      for (auto j : right) {
        t.values(i, j) = m.height;
        t.values(j, i) = m.height;
      }
    }
  }
  return t;
}

// Pearson correlation between the upper triangles (i < j) of t and d.
inline double cophenetic_correlation(const DistanceMatrix& t, const DistanceMatrix& d) {
  const Index n = t.size();
  if (d.size() != n || t.values.cols() != n || d.values.cols() != n) {
    throw DimensionError("cophenetic_correlation: matrix sizes differ");
  }
  if (n < 3) throw ValidationError("cophenetic_correlation needs n >= 3");
  const double m = static_cast<double>(n * (n - 1) / 2);
  double mt = 0.0, md = 0.0;
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      mt += t(i, j);
      md += d(i, j);
    }
  }
  mt /= m;
  md /= m;
  double cross = 0.0, vt = 0.0, vd = 0.0;
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      const double a = d(i, j) - md;
      const double b = t(i, j) - mt;
      cross += a * b;
      vd += a * a;
      vt += b * b;
    }
  }
  if (!(vt > 0.0) || !(vd > 0.0)) {
    throw ValidationError("cophenetic_correlation undefined: zero variance");
  }
  return cross / std::sqrt(vd * vt);
}

// Cosine distances -> UPGMA -> cophenetic distances.
inline DistanceMatrix symbol_cophenetic(std::span<const Vector> symbols) {
  return cophenetic_distances(upgma(cosine_distance_matrix(symbols)));
}

struct ShuffleTest {
  double observed = 0.0;
  std::vector<double> null_distribution;

  // Fraction of null values >= observed.
  double p_value() const {
    std::size_t ge = 0;
    for (double v : null_distribution) ge += v >= observed;
    return static_cast<double>(ge) / static_cast<double>(null_distribution.size());
  }

  double null_quantile(double q) const {
    std::vector<double> s = null_distribution;
    std::sort(s.begin(), s.end());
    const double pos = q * static_cast<double>(s.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(s.size() - 1, lo + 1);
    return s[lo] + (pos - static_cast<double>(lo)) * (s[hi] - s[lo]);
  }
};

// Observed correlation of the symbols' dendrogram with `reference`, and a
// null from `trials` reclusterings after permuting the elements of each
// symbol independently.
inline ShuffleTest shuffle_significance(std::span<const Vector> symbols,
                                        const DistanceMatrix& reference, std::size_t trials,
                                        Rng& rng) {
  if (trials < 1) throw ValidationError("shuffle test needs >= 1 trial");
  ShuffleTest out;
  out.observed = cophenetic_correlation(symbol_cophenetic(symbols), reference);
  out.null_distribution.reserve(trials);
  std::vector<Vector> shuffled(symbols.begin(), symbols.end());
  for (std::size_t t = 0; t < trials; ++t) {
    for (auto& s : shuffled) std::shuffle(s.data(), s.data() + s.size(), rng);
    out.null_distribution.push_back(
        cophenetic_correlation(symbol_cophenetic(shuffled), reference));
  }
  return out;
}

struct Edge {
  Index a = 0;  // a < b
  Index b = 0;
  double distance = 0.0;

  friend bool operator<(const Edge& x, const Edge& y) {
    return std::pair(x.a, x.b) < std::pair(y.a, y.b);
  }
};

using SemanticEdgeList = std::vector<Edge>;

// One edge per merge, joining the closest pair of leaves across the merged
// branches (ties: smallest (i, j)). Returned sorted and deduplicated.
inline SemanticEdgeList semantic_network(const Dendrogram& dend, const DistanceMatrix& d) {
  if (d.size() != dend.leaves) {
    throw DimensionError("distance matrix and dendrogram cover different leaf counts");
  }
  std::set<Edge> edges;
  for (const auto& m : dend.merges) {
    const auto left = dend.leaves_under(m.left);
    const auto right = dend.leaves_under(m.right);
    Edge best{0, 0, std::numeric_limits<double>::infinity()};
    for (auto i : left) {
      for (auto j : right) {
        Edge e{std::min(i, j), std::max(i, j), d(i, j)};
        if (e.distance < best.distance ||
            (e.distance == best.distance && std::pair(e.a, e.b) < std::pair(best.a, best.b))) {
          best = e;
        }
      }
    }
    edges.insert(best);
  }
  return {edges.begin(), edges.end()};
}

// Newick with branch lengths = parent height - child height.
inline std::string to_newick(const Dendrogram& dend, std::span<const std::string> names = {}) {
  std::function<std::string(Index)> rec = [&](Index node) -> std::string {
    if (node < dend.leaves) {
      return names.empty() ? std::to_string(node) : names[static_cast<std::size_t>(node)];
    }
    const auto& m = dend.merges[static_cast<std::size_t>(node - dend.leaves)];
    return "(" + rec(m.left) + ":" + format_double(m.height - dend.node_height(m.left)) + "," +
           rec(m.right) + ":" + format_double(m.height - dend.node_height(m.right)) + ")";
  };
  if (dend.merges.empty()) return rec(0) + ";";
  return rec(dend.root()) + ";";
}

inline CsvTable matrix_csv(const DistanceMatrix& d, std::span<const std::string> names) {
  std::vector<std::string> header{"label"};
  for (Index i = 0; i < d.size(); ++i) header.push_back(names[static_cast<std::size_t>(i)]);
  CsvTable t(std::move(header));
  for (Index i = 0; i < d.size(); ++i) {
    CsvTable::Row row;
    row << names[static_cast<std::size_t>(i)];
    for (Index j = 0; j < d.size(); ++j) row << d(i, j);
    t.add(row);
  }
  return t;
}

inline CsvTable edges_csv(const SemanticEdgeList& edges, std::span<const std::string> names) {
  CsvTable t({"source", "target", "distance"});
  for (const auto& e : edges) {
    CsvTable::Row row;
    row << names[static_cast<std::size_t>(e.a)] << names[static_cast<std::size_t>(e.b)]
        << e.distance;
    t.add(row);
  }
  return t;
}

}  // namespace seanet

#endif  // SEANET_ANALYSIS_HPP_
