#pragma once

#include <optional>
#include <string>
#include <vector>

#include "flattab/tensor.hpp"

namespace flattab {

// A named tabular dataset: real feature matrix plus integer class labels
// re-encoded to 0..n_classes-1. Immutable after load and safe to share.
struct DatasetTable {
  std::string name;
  Tensor features;  // [n_rows, n_cols]
  std::vector<int> labels;
  int n_classes = 0;

  std::size_t rows() const { return features.rank() == 2 ? features.rows() : 0; }
  std::size_t cols() const { return features.rank() == 2 ? features.cols() : 0; }
  std::vector<std::size_t> class_counts() const;
};

enum class HasHeader { no, yes, detect };

// Comma-separated, UTF-8, decimal-point reals. label_col selects the label
// column (negative means last). Labels are re-encoded to contiguous ids by
// first appearance; any non-numeric or non-finite feature cell is an error
// naming its position.
DatasetTable load_csv(const std::string& path, int label_col = -1,
                      HasHeader header = HasHeader::detect);

void write_csv(const DatasetTable& d, const std::string& path);

// Most frequent class becomes label 1, everything else 0. Frequency ties
// break toward the smaller encoded label.
DatasetTable binarize_one_vs_all(const DatasetTable& d);

// Multi-class reduction for the k-logit variant: the k-1 most frequent
// classes keep their own ids (in frequency order, ties toward the smaller
// label), the rest merge into class k-1. Requires n_classes >= k.
DatasetTable reduce_to_k_classes(const DatasetTable& d, int k);

// Per-column standardization over the stacked meta+target rows, with the
// population (divide-by-N) standard deviation. Columns whose stacked values
// are all identical become all zeros.
void standardize_joint(Tensor& meta_x, Tensor& target_x);

}  // namespace flattab
