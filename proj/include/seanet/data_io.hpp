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

// Feature datasets, the SEAF container, synthetic worlds and word vectors.

#ifndef SEANET_DATA_IO_HPP_
#define SEANET_DATA_IO_HPP_

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "seanet/binary_io.hpp"
#include "seanet/common.hpp"
#include "seanet/csv.hpp"
#include "seanet/gated_net.hpp"

namespace seanet {

enum class Partition : std::uint8_t { kTrain = 0, kTest = 1 };

struct FeatureDataset {
  Matrix features;  // F x n, one sample per column
  std::vector<ClassId> labels;
  std::vector<Partition> partition;
  std::uint32_t class_count = 0;
  std::map<ClassId, std::string> class_names;  // optional, not serialized

  Index size() const { return features.cols(); }
  Index dim() const { return features.rows(); }

  void validate() const {
    const auto n = static_cast<std::size_t>(size());
    if (labels.size() != n || partition.size() != n) {
      throw DimensionError("labels/partition length != sample count");
    }
    if (class_count == 0) throw ValidationError("dataset declares zero classes");
    std::vector<int> seen(2 * class_count, 0);
    for (std::size_t i = 0; i < n; ++i) {
      if (labels[i] >= class_count) {
        throw ValidationError("sample " + std::to_string(i) + " has label " +
                              std::to_string(labels[i]) + " outside [0, " +
                              std::to_string(class_count) + ")");
      }
      seen[2 * labels[i] + (partition[i] == Partition::kTest ? 1 : 0)] = 1;
    }
    for (std::uint32_t c = 0; c < class_count; ++c) {
      if (!seen[2 * c] || !seen[2 * c + 1]) {
        throw ValidationError("class " + std::to_string(c) +
                              " is empty in the train or test partition");
      }
    }
    if (!features.allFinite()) throw NumericError("dataset features are not finite");
  }

  friend bool operator==(const FeatureDataset& a, const FeatureDataset& b) {
    return a.class_count == b.class_count && a.labels == b.labels &&
           a.partition == b.partition && a.features.rows() == b.features.rows() &&
           a.features.cols() == b.features.cols() && a.features == b.features;
  }
};

// A row subset of a dataset. The dataset must outlive the view.
class DatasetView {
 public:
  explicit DatasetView(const FeatureDataset& data) : data_(&data) {
    rows_.resize(static_cast<std::size_t>(data.size()));
    for (std::size_t i = 0; i < rows_.size(); ++i) rows_[i] = static_cast<Index>(i);
  }
  DatasetView(const FeatureDataset& data, std::vector<Index> rows)
      : data_(&data), rows_(std::move(rows)) {}

  const FeatureDataset& source() const { return *data_; }
  std::span<const Index> rows() const { return rows_; }
  std::size_t size() const { return rows_.size(); }

  std::vector<Index> rows_in(Partition p) const {
    std::vector<Index> out;
    for (auto r : rows_) {
      if (data_->partition[static_cast<std::size_t>(r)] == p) out.push_back(r);
    }
    return out;
  }

  // Sorted distinct labels present in the view.
  std::vector<ClassId> classes() const {
    std::set<ClassId> s;
    for (auto r : rows_) s.insert(data_->labels[static_cast<std::size_t>(r)]);
    return {s.begin(), s.end()};
  }

  ClassId label(Index row) const { return data_->labels[static_cast<std::size_t>(row)]; }
  auto feature(Index row) const { return data_->features.col(row); }

 private:
  const FeatureDataset* data_;
  std::vector<Index> rows_;
};

struct Split {
  DatasetView learned;  // every class except the holdout
  DatasetView novel;    // the holdout class only
};

inline Split split(const FeatureDataset& data, ClassId holdout) {
  std::vector<Index> learned, novel;
  for (Index i = 0; i < data.size(); ++i) {
    (data.labels[static_cast<std::size_t>(i)] == holdout ? novel : learned).push_back(i);
  }
  if (novel.empty()) {
    throw ValidationError("holdout class " + std::to_string(holdout) + " not in dataset");
  }
  return {DatasetView(data, std::move(learned)), DatasetView(data, std::move(novel))};
}

// --- Synthetic worlds --------------------------------------------------------

struct SyntheticSpec {
  std::uint32_t classes = 10;
  Index dim = 32;
  std::uint32_t train_per_class = 200;
  std::uint32_t test_per_class = 100;
  double spread = 0.3;
  std::uint64_t seed = 0;
  // 0 = flat (class means uniform in [-1,1]^F). Otherwise classes are split
  // into this many contiguous groups; each group gets a center uniform in
  // [-1,1]^F and each class mean is center + sub_offset * U[-1,1]^F.
  std::uint32_t superclasses = 0;
  double sub_offset = 0.5;

  void validate() const {
    if (classes < 2) throw ValidationError("synthetic world needs >= 2 classes");
    if (dim < 2) throw ValidationError("synthetic world needs dim >= 2");
    if (train_per_class == 0 || test_per_class == 0) {
      throw ValidationError("synthetic world needs samples in both partitions");
    }
    if (spread < 0 || sub_offset < 0) throw ValidationError("spreads must be >= 0");
    if (superclasses > classes) throw ValidationError("more superclasses than classes");
  }
};

inline std::uint32_t superclass_of(const SyntheticSpec& spec, ClassId c) {
  if (spec.superclasses == 0) return c;
  return static_cast<std::uint32_t>(static_cast<std::uint64_t>(c) * spec.superclasses /
                                    spec.classes);
}

// Means are drawn first from the seeded stream, so they are reproducible
// independently of the samples.
inline Matrix synthetic_class_means(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  Matrix means(spec.dim, spec.classes);
  if (spec.superclasses == 0) {
    for (std::uint32_t c = 0; c < spec.classes; ++c) {
      means.col(c) = uniform_vector(rng, spec.dim, -1.0, 1.0);
    }
  } else {
    Matrix centers(spec.dim, spec.superclasses);
    for (std::uint32_t s = 0; s < spec.superclasses; ++s) {
      centers.col(s) = uniform_vector(rng, spec.dim, -1.0, 1.0);
    }
    for (std::uint32_t c = 0; c < spec.classes; ++c) {
      means.col(c) = centers.col(superclass_of(spec, c)) +
                     spec.sub_offset * uniform_vector(rng, spec.dim, -1.0, 1.0);
    }
  }
  return means;
}

inline FeatureDataset generate_synthetic(const SyntheticSpec& spec) {
  const Matrix means = synthetic_class_means(spec);
  Rng rng(derive_seed(spec.seed, 1));
  const Index per_class = spec.train_per_class + spec.test_per_class;
  FeatureDataset data;
  data.class_count = spec.classes;
  data.features.resize(spec.dim, per_class * spec.classes);
  Index col = 0;
  for (std::uint32_t c = 0; c < spec.classes; ++c) {
    data.class_names[c] = "class_" + std::to_string(c);
    for (Index i = 0; i < per_class; ++i, ++col) {
      for (Index d = 0; d < spec.dim; ++d) {
        data.features(d, col) = means(d, c) + spec.spread * standard_normal(rng);
      }
      data.labels.push_back(c);
      data.partition.push_back(i < spec.train_per_class ? Partition::kTrain
                                                        : Partition::kTest);
    }
  }
  data.validate();
  return data;
}

// Mean training feature vector per class (F x C).
inline Matrix class_feature_means(const FeatureDataset& data) {
  Matrix sums = Matrix::Zero(data.dim(), data.class_count);
  std::vector<double> counts(data.class_count, 0.0);
  for (Index i = 0; i < data.size(); ++i) {
    if (data.partition[static_cast<std::size_t>(i)] != Partition::kTrain) continue;
    const auto c = data.labels[static_cast<std::size_t>(i)];
    sums.col(c) += data.features.col(i);
    counts[c] += 1.0;
  }
  for (std::uint32_t c = 0; c < data.class_count; ++c) {
    if (counts[c] > 0) sums.col(c) /= counts[c];
  }
  return sums;
}

// --- SEAF container ----------------------------------------------------------
//
//   "SEAF", u32 version (=1), u32 n, u32 F, u32 C,
//   u8 partition[n] (0 train, 1 test), f64 features[n][F] (row-major),
//   u32 labels[n], u32 CRC32 of all preceding bytes.

inline constexpr std::uint32_t kSeafVersion = 1;

inline std::vector<std::uint8_t> encode_features(const FeatureDataset& data) {
  data.validate();
  ByteWriter w;
  w.bytes("SEAF");
  w.u32(kSeafVersion);
  w.u32(static_cast<std::uint32_t>(data.size()));
  w.u32(static_cast<std::uint32_t>(data.dim()));
  w.u32(data.class_count);
  for (auto p : data.partition) w.u8(static_cast<std::uint8_t>(p));
  for (Index i = 0; i < data.size(); ++i) {
    for (Index d = 0; d < data.dim(); ++d) w.f64(data.features(d, i));
  }
  for (auto l : data.labels) w.u32(l);
  w.crc_trailer();
  return w.buffer();
}

inline FeatureDataset decode_features(std::vector<std::uint8_t> bytes) {
  ByteReader r(std::move(bytes));
  r.expect_magic("SEAF");
  const auto version = r.u32("version");
  if (version != kSeafVersion) {
    throw FormatError("unsupported SEAF version " + std::to_string(version), 4);
  }
  const std::uint64_t n = r.u32("sample count");
  const std::uint64_t f = r.u32("feature dim");
  const auto c = r.u32("class count");
  if (f == 0) throw FormatError("zero feature dimension", 12);
  if (c == 0) throw FormatError("zero class count", 16);
  const std::uint64_t expected = n + 8 * n * f + 4 * n + 4;
  if (r.remaining() != expected) {
    throw FormatError("payload is " + std::to_string(r.remaining()) + " bytes, header implies " +
                          std::to_string(expected),
                      r.offset());
  }
  r.verify_crc_trailer();
  FeatureDataset data;
  data.class_count = c;
  data.partition.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    const auto at = r.offset();
    const auto p = r.u8("partition flag");
    if (p > 1) throw FormatError("partition flag must be 0 or 1", at);
    data.partition.push_back(static_cast<Partition>(p));
  }
  data.features.resize(static_cast<Index>(f), static_cast<Index>(n));
  for (std::uint64_t i = 0; i < n; ++i) {
    for (std::uint64_t d = 0; d < f; ++d) {
      const auto at = r.offset();
      const double v = r.f64("feature");
      if (!std::isfinite(v)) throw FormatError("non-finite feature value", at);
      data.features(static_cast<Index>(d), static_cast<Index>(i)) = v;
    }
  }
  data.labels.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    const auto at = r.offset();
    const auto l = r.u32("label");
    if (l >= c) {
      throw FormatError("label " + std::to_string(l) + " outside [0, " + std::to_string(c) + ")",
                        at);
    }
    data.labels.push_back(l);
  }
  r.expect_end(4, "labels");
  try {
    data.validate();
  } catch (const ValidationError& e) {
    throw FormatError(e.what(), 0);
  }
  for (std::uint32_t k = 0; k < c; ++k) data.class_names[k] = "class_" + std::to_string(k);
  return data;
}

inline void save_features(const FeatureDataset& data, const std::filesystem::path& path) {
  const auto bytes = encode_features(data);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed: " + path.string());
}

inline FeatureDataset load_features(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());
  return decode_features(std::move(data));
}

// --- Word vectors ------------------------------------------------------------

struct WordVectorTable {
  Index dim = 0;
  std::map<std::string, Vector> entries;

  const Vector& at(const std::string& name) const {
    auto it = entries.find(name);
    if (it == entries.end()) throw ValidationError("word \"" + name + "\" not in table");
    return it->second;
  }
};

namespace detail {

inline bool parse_double(std::string_view s, double& out) {
  // from_chars for double is available in libstdc++ 11.
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end && std::isfinite(out);
}

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

}  // namespace detail

// Text format: one entry per line, token then whitespace-separated reals.
// An optional fastText-style "<count> <dim>" header on line 1 is skipped.
// Every line is validated; the returned table holds only `names`.
inline WordVectorTable parse_word_vectors(std::istream& in, std::span<const std::string> names) {
  const std::set<std::string> wanted(names.begin(), names.end());
  std::set<std::string> seen;
  WordVectorTable table;
  std::string line;
  std::uint64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto fields = detail::split_ws(line);
    if (fields.empty()) continue;
    if (line_no == 1 && fields.size() == 2) {
      std::uint64_t a = 0, b = 0;
      auto r1 = std::from_chars(fields[0].data(), fields[0].data() + fields[0].size(), a);
      auto r2 = std::from_chars(fields[1].data(), fields[1].data() + fields[1].size(), b);
      if (r1.ec == std::errc() && r1.ptr == fields[0].data() + fields[0].size() &&
          r2.ec == std::errc() && r2.ptr == fields[1].data() + fields[1].size()) {
        continue;
      }
    }
    if (fields.size() < 2) throw FormatError("entry has no vector values", line_no);
    const Index d = static_cast<Index>(fields.size() - 1);
    if (table.dim == 0) {
      table.dim = d;
    } else if (d != table.dim) {
      throw FormatError("vector length " + std::to_string(d) + " != " +
                            std::to_string(table.dim),
                        line_no);
    }
    std::string token(fields[0]);
    if (!seen.insert(token).second) {
      throw FormatError("duplicate token \"" + token + "\"", line_no);
    }
    Vector v(d);
    for (Index i = 0; i < d; ++i) {
      if (!detail::parse_double(fields[static_cast<std::size_t>(i + 1)], v[i])) {
        throw FormatError("malformed number \"" +
                              std::string(fields[static_cast<std::size_t>(i + 1)]) + "\"",
                          line_no);
      }
    }
    if (wanted.count(token)) table.entries.emplace(std::move(token), std::move(v));
  }
  std::string missing;
  for (const auto& n : wanted) {
    if (!table.entries.count(n)) missing += (missing.empty() ? "" : ", ") + n;
  }
  if (!missing.empty()) throw ValidationError("word vectors missing for: " + missing);
  return table;
}

inline WordVectorTable load_word_vectors(const std::filesystem::path& path,
                                         std::span<const std::string> names) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return parse_word_vectors(in, names);
}

inline void save_word_vectors(const WordVectorTable& table, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  for (const auto& [name, v] : table.entries) {
    out << name;
    for (Index i = 0; i < v.size(); ++i) out << ' ' << format_double(v[i]);
    out << '\n';
  }
}

struct PcaFit {
  Vector mean;
  Matrix components;        // target_dim x source_dim, orthonormal rows
  Vector explained;         // variance along each kept component
  double total_variance = 0.0;

  double captured_fraction() const {
    return total_variance > 0 ? explained.sum() / total_variance : 1.0;
  }
};

// Principal components of the rows of `x` (one observation per row).
// Component signs are fixed so the largest-magnitude loading is positive.
inline PcaFit fit_pca(const Matrix& x, Index target_dim) {
  if (target_dim <= 0 || target_dim > x.cols()) {
    throw ValidationError("PCA target dim " + std::to_string(target_dim) +
                          " outside [1, " + std::to_string(x.cols()) + "]");
  }
  PcaFit fit;
  fit.mean = x.colwise().mean().transpose();
  const Matrix centered = x.rowwise() - fit.mean.transpose();
  Eigen::JacobiSVD<Matrix> svd(centered, Eigen::ComputeFullV);
  const Vector sv = svd.singularValues();
  const double denom = x.rows() > 1 ? static_cast<double>(x.rows() - 1) : 1.0;
  fit.total_variance = centered.squaredNorm() / denom;
  fit.components = svd.matrixV().leftCols(target_dim).transpose();
  fit.explained = Vector::Zero(target_dim);
  for (Index k = 0; k < target_dim; ++k) {
    if (k < sv.size()) fit.explained[k] = sv[k] * sv[k] / denom;
    Index arg = 0;
    fit.components.row(k).cwiseAbs().maxCoeff(&arg);
    if (fit.components(k, arg) < 0) fit.components.row(k) *= -1.0;
  }
  return fit;
}

// PCA fit on the selected names only, project to `target_dim`, scale by
// `amplify`. names[i] becomes class id i.
inline SymbolBank reduce_word_vectors(const WordVectorTable& table,
                                      std::span<const std::string> names, Index target_dim,
                                      double amplify) {
  std::string missing;
  for (const auto& n : names) {
    if (!table.entries.count(n)) missing += (missing.empty() ? "" : ", ") + n;
  }
  if (!missing.empty()) throw ValidationError("word vectors missing for: " + missing);
  if (target_dim > table.dim) {
    throw ValidationError("target dim " + std::to_string(target_dim) + " > source dim " +
                          std::to_string(table.dim));
  }
  if (static_cast<Index>(names.size()) < target_dim) {
    throw ValidationError("need at least target_dim names for a well-posed projection");
  }
  Matrix x(static_cast<Index>(names.size()), table.dim);
  for (std::size_t i = 0; i < names.size(); ++i) {
    x.row(static_cast<Index>(i)) = table.at(names[i]).transpose();
  }
  const PcaFit fit = fit_pca(x, target_dim);
  SymbolBank bank(target_dim);
  for (std::size_t i = 0; i < names.size(); ++i) {
    Vector centered = x.row(static_cast<Index>(i)).transpose() - fit.mean;
    bank.set(static_cast<ClassId>(i), amplify * (fit.components * centered));
  }
  return bank;
}

// Stand-in "word vectors": a fixed random linear embedding of class feature
// means into `dim` dimensions plus isotropic noise. Named class_<id>.
inline WordVectorTable make_standin_word_vectors(const Matrix& class_means, Index dim,
                                                 double noise, std::uint64_t seed) {
  Rng rng(seed);
  Matrix embed(dim, class_means.rows());
  const double scale = 1.0 / std::sqrt(static_cast<double>(class_means.rows()));
  for (Index c = 0; c < embed.cols(); ++c) {
    for (Index r = 0; r < dim; ++r) embed(r, c) = scale * standard_normal(rng);
  }
  WordVectorTable table;
  table.dim = dim;
  for (Index c = 0; c < class_means.cols(); ++c) {
    Vector v = embed * class_means.col(c);
    for (Index r = 0; r < dim; ++r) v[r] += noise * standard_normal(rng);
    table.entries.emplace("class_" + std::to_string(c), std::move(v));
  }
  return table;
}

}  // namespace seanet

#endif  // SEANET_DATA_IO_HPP_
