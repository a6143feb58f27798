#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "vflsim/errors.hpp"
#include "vflsim/rng.hpp"

namespace vflsim::data {

struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> values;  // row-major

  double at(int r, int c) const {
    return values[static_cast<std::size_t>(r) * cols + c];
  }
  std::span<const double> row(int r) const {
    return {values.data() + static_cast<std::size_t>(r) * cols,
            static_cast<std::size_t>(cols)};
  }
};

struct LabeledData {
  Matrix features;
  std::vector<int> labels;
  int num_classes = 0;
};

struct FeatureRange {
  int begin = 0;
  int end = 0;  // half-open
};

/// A client's read-only view of its own feature slice. Carries no labels,
/// so client-side code cannot reach them by construction.
class ShardView {
 public:
  ShardView() = default;
  ShardView(const double* data, int rows, int cols)
      : data_(data), rows_(rows), cols_(cols) {}
  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::span<const double> row(int r) const {
    return {data_ + static_cast<std::size_t>(r) * cols_,
            static_cast<std::size_t>(cols_)};
  }

 private:
  const double* data_ = nullptr;
  int rows_ = 0;
  int cols_ = 0;
};

/// Vertically partitioned dataset: client m holds a feature slice of every
/// sample, the server holds all labels. Immutable after construction; the
/// sample ordering is shared by all parties.
class VerticalDataset {
 public:
  /// Contiguous split into M slices of size floor(D/M), the first D mod M
  /// clients taking one extra feature. An optional feature permutation is
  /// applied before slicing (seeded shuffle for robustness runs).
  static VerticalDataset split_features(const LabeledData& data, int num_clients,
                                        Rng* shuffle_rng = nullptr) {
    const int d = data.features.cols;
    const int n = data.features.rows;
    if (num_clients < 1) throw config_error("split_features: M must be >= 1");
    if (d < num_clients)
      throw config_error("split_features: feature count " + std::to_string(d) +
                         " < clients " + std::to_string(num_clients));
    if (static_cast<int>(data.labels.size()) != n)
      throw config_error("split_features: labels/rows mismatch");

    VerticalDataset v;
    v.n_ = n;
    v.num_clients_ = num_clients;
    v.num_classes_ = data.num_classes;
    v.labels_ = data.labels;
    v.feature_order_.resize(d);
    std::iota(v.feature_order_.begin(), v.feature_order_.end(), 0);
    if (shuffle_rng) {
      for (int i = d - 1; i > 0; --i) {
        int j = static_cast<int>(shuffle_rng->uniform_index(i + 1));
        std::swap(v.feature_order_[i], v.feature_order_[j]);
      }
    }

    const int base = d / num_clients;
    const int extra = d % num_clients;
    int cursor = 0;
    for (int m = 0; m < num_clients; ++m) {
      const int width = base + (m < extra ? 1 : 0);
      v.split_spec_.push_back({cursor, cursor + width});
      Matrix shard;
      shard.rows = n;
      shard.cols = width;
      shard.values.resize(static_cast<std::size_t>(n) * width);
      for (int r = 0; r < n; ++r)
        for (int c = 0; c < width; ++c)
          shard.values[static_cast<std::size_t>(r) * width + c] =
              data.features.at(r, v.feature_order_[cursor + c]);
      v.shards_.push_back(std::move(shard));
      cursor += width;
    }
    return v;
  }

  int num_samples() const { return n_; }
  int num_clients() const { return num_clients_; }
  int num_classes() const { return num_classes_; }
  const std::vector<FeatureRange>& split_spec() const { return split_spec_; }
  const std::vector<int>& feature_order() const { return feature_order_; }

  ShardView shard(int client) const {
    const Matrix& s = shards_.at(client);
    return ShardView(s.values.data(), s.rows, s.cols);
  }
  int shard_width(int client) const { return shards_.at(client).cols; }

  /// Server-side only: labels never flow into ShardViews.
  const std::vector<int>& labels() const { return labels_; }

  /// Stitches all shards back together in split order (undoing any feature
  /// permutation). Used by tests to check the split is lossless.
  Matrix reassemble() const {
    int d = 0;
    for (const auto& r : split_spec_) d += r.end - r.begin;
    Matrix out;
    out.rows = n_;
    out.cols = d;
    out.values.resize(static_cast<std::size_t>(n_) * d);
    for (int m = 0; m < num_clients_; ++m) {
      const auto& range = split_spec_[m];
      const Matrix& s = shards_[m];
      for (int r = 0; r < n_; ++r)
        for (int c = 0; c < s.cols; ++c)
          out.values[static_cast<std::size_t>(r) * d +
                     feature_order_[range.begin + c]] =
              s.values[static_cast<std::size_t>(r) * s.cols + c];
    }
    return out;
  }

 private:
  int n_ = 0;
  int num_clients_ = 0;
  int num_classes_ = 0;
  std::vector<Matrix> shards_;
  std::vector<int> labels_;
  std::vector<FeatureRange> split_spec_;
  std::vector<int> feature_order_;
};

/// C Gaussian blobs with unit covariance; blob means sit at
/// separation * (random unit vector per class, drawn once). A class
/// direction is redrawn (up to 64 times, keeping the most spread draw)
/// while it sits within 60 degrees of an earlier one, so `separation`
/// actually controls class distance instead of direction luck. Classes are
/// balanced up to rounding and samples are emitted class-interleaved.
inline LabeledData make_synthetic(int n, int d, int num_classes,
                                  double separation, Rng& rng) {
  if (n < 1 || d < 1 || num_classes < 1)
    throw config_error("make_synthetic: n, D, C must be >= 1");
  std::vector<std::vector<double>> means(num_classes);
  std::vector<double> candidate(d);
  for (int cls = 0; cls < num_classes; ++cls) {
    std::vector<double> best;
    double best_worst_dot = 2.0;
    for (int attempt = 0; attempt < 64; ++attempt) {
      rng.fill_gaussian(candidate);
      double norm2 = 0.0;
      for (double v : candidate) norm2 += v * v;
      if (norm2 == 0.0) continue;
      double inv = 1.0 / std::sqrt(norm2);
      for (auto& v : candidate) v *= inv;
      double worst_dot = -1.0;
      for (int prev = 0; prev < cls; ++prev) {
        double dot = 0.0;
        for (int k = 0; k < d; ++k) dot += candidate[k] * means[prev][k];
        worst_dot = std::max(worst_dot, dot);
      }
      if (worst_dot < best_worst_dot) {
        best_worst_dot = worst_dot;
        best = candidate;
      }
      if (best_worst_dot <= 0.5) break;
    }
    for (auto& v : best) v *= separation;
    means[cls] = std::move(best);
  }
  LabeledData out;
  out.num_classes = num_classes;
  out.features.rows = n;
  out.features.cols = d;
  out.features.values.resize(static_cast<std::size_t>(n) * d);
  out.labels.resize(n);
  std::vector<double> noise(d);
  for (int i = 0; i < n; ++i) {
    const int y = i % num_classes;
    out.labels[i] = y;
    rng.fill_gaussian(noise);
    for (int c = 0; c < d; ++c)
      out.features.values[static_cast<std::size_t>(i) * d + c] =
          means[y][c] + noise[c];
  }
  return out;
}

/// Blob dataset quantized to the pixel convention: integer features in
/// [0, 255] around a mid-gray mean, class means offset by the blob
/// directions. Written as CSV this exercises the loader's 255-scaling path.
inline LabeledData make_pixel_synthetic(int n, int d, int num_classes,
                                        double separation, Rng& rng) {
  auto out = make_synthetic(n, d, num_classes, separation, rng);
  for (auto& v : out.features.values) {
    double px = std::round(128.0 + 32.0 * v);
    v = std::min(255.0, std::max(0.0, px));
  }
  return out;
}

/// CSV rows: label,f_0,...,f_{D-1}. When the maximum feature value is
/// exactly 255 the features are scaled to [0,1] (pixel convention).
inline LabeledData load_csv_dataset(const std::string& path, bool has_header) {
  std::ifstream in(path);
  if (!in) throw config_error("load_csv_dataset: cannot open " + path);
  LabeledData out;
  std::string line;
  int row_number = 0;
  int cols = -1;
  double max_feature = 0.0;
  while (std::getline(in, line)) {
    ++row_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (row_number == 1 && has_header) continue;
    if (line.empty()) continue;

    std::vector<double> fields;
    std::size_t start = 0;
    while (true) {
      std::size_t comma = line.find(',', start);
      std::string tok = line.substr(
          start, comma == std::string::npos ? std::string::npos : comma - start);
      try {
        std::size_t used = 0;
        double v = std::stod(tok, &used);
        while (used < tok.size() && std::isspace(static_cast<unsigned char>(tok[used])))
          ++used;
        if (used != tok.size()) throw std::invalid_argument(tok);
        fields.push_back(v);
      } catch (const std::exception&) {
        throw config_error("load_csv_dataset: bad value '" + tok + "' at row " +
                           std::to_string(row_number));
      }
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (fields.size() < 2)
      throw config_error("load_csv_dataset: row " + std::to_string(row_number) +
                         " has fewer than 2 columns");
    if (cols == -1) {
      cols = static_cast<int>(fields.size());
    } else if (static_cast<int>(fields.size()) != cols) {
      throw config_error("load_csv_dataset: row " + std::to_string(row_number) +
                         " has " + std::to_string(fields.size()) +
                         " columns, expected " + std::to_string(cols));
    }
    double label = fields[0];
    if (label != std::floor(label) || label < 0)
      throw config_error("load_csv_dataset: non-integer label at row " +
                         std::to_string(row_number));
    out.labels.push_back(static_cast<int>(label));
    for (std::size_t c = 1; c < fields.size(); ++c) {
      out.features.values.push_back(fields[c]);
      max_feature = std::max(max_feature, fields[c]);
    }
  }
  if (out.labels.empty()) throw config_error("load_csv_dataset: empty file");
  out.features.rows = static_cast<int>(out.labels.size());
  out.features.cols = cols - 1;
  if (max_feature == 255.0)
    for (auto& v : out.features.values) v /= 255.0;
  out.num_classes = 1 + *std::max_element(out.labels.begin(), out.labels.end());
  return out;
}

inline void save_csv_dataset(const std::string& path, const LabeledData& data) {
  std::ofstream outf(path);
  if (!outf) throw config_error("save_csv_dataset: cannot write " + path);
  outf.precision(17);
  for (int r = 0; r < data.features.rows; ++r) {
    outf << data.labels[r];
    for (int c = 0; c < data.features.cols; ++c) {
      double v = data.features.at(r, c);
      if (v == std::floor(v))
        outf << ',' << static_cast<long long>(v);
      else
        outf << ',' << v;
    }
    outf << '\n';
  }
}

}  // namespace vflsim::data
