#include "flattab/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace flattab {

std::vector<std::size_t> DatasetTable::class_counts() const {
  std::vector<std::size_t> counts(static_cast<std::size_t>(n_classes), 0);
  for (int y : labels) counts[static_cast<std::size_t>(y)]++;
  return counts;
}

namespace {

bool parse_double(std::string_view cell, double& out) {
  // Trim surrounding spaces / CR.
  while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t')) cell.remove_prefix(1);
  while (!cell.empty() &&
         (cell.back() == ' ' || cell.back() == '\t' || cell.back() == '\r'))
    cell.remove_suffix(1);
  if (cell.empty()) return false;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ',') {
      cells.emplace_back(line.substr(start, i - start));
      start = i + 1;
    }
  }
  return cells;
}

}  // namespace

DatasetTable load_csv(const std::string& path, int label_col, HasHeader header) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_csv: cannot open '" + path + "'");

  std::vector<std::vector<std::string>> rows;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (first && line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF &&
        static_cast<unsigned char>(line[1]) == 0xBB && static_cast<unsigned char>(line[2]) == 0xBF)
      line.erase(0, 3);
    first = false;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    rows.push_back(split_line(line));
  }
  if (rows.empty()) throw std::runtime_error("load_csv: '" + path + "' is empty");

  bool has_header = header == HasHeader::yes;
  if (header == HasHeader::detect) {
    double tmp;
    for (const std::string& cell : rows[0])
      if (!parse_double(cell, tmp)) {
        has_header = true;
        break;
      }
  }
  const std::size_t data_start = has_header ? 1 : 0;
  if (rows.size() <= data_start)
    throw std::runtime_error("load_csv: '" + path + "' has a header but no data rows");

  const std::size_t n_cells = rows[data_start].size();
  if (n_cells < 3)
    throw std::runtime_error("load_csv: '" + path + "' needs at least 2 feature columns plus a label column");
  const std::size_t label_idx =
      label_col < 0 ? n_cells - 1 : static_cast<std::size_t>(label_col);
  if (label_idx >= n_cells)
    throw std::runtime_error("load_csv: label column " + std::to_string(label_col) +
                             " out of range for " + std::to_string(n_cells) + " columns");

  const std::size_t n_rows = rows.size() - data_start;
  const std::size_t n_cols = n_cells - 1;
  DatasetTable d;
  {
    std::size_t slash = path.find_last_of('/');
    std::string base = slash == std::string::npos ? path : path.substr(slash + 1);
    std::size_t dot = base.find_last_of('.');
    d.name = dot == std::string::npos ? base : base.substr(0, dot);
  }
  d.features = Tensor({n_rows, n_cols});
  d.labels.resize(n_rows);

  std::vector<double> seen_labels;
  for (std::size_t r = 0; r < n_rows; ++r) {
    const auto& cells = rows[r + data_start];
    if (cells.size() != n_cells)
      throw std::runtime_error("load_csv: row " + std::to_string(r + data_start + 1) + " of '" +
                               path + "' has " + std::to_string(cells.size()) +
                               " cells, expected " + std::to_string(n_cells));
    std::size_t fc = 0;
    for (std::size_t c = 0; c < n_cells; ++c) {
      double value;
      if (!parse_double(cells[c], value) || !std::isfinite(value))
        throw std::runtime_error("load_csv: non-numeric cell '" + cells[c] + "' at row " +
                                 std::to_string(r + data_start + 1) + ", column " +
                                 std::to_string(c + 1) + " of '" + path + "'");
      if (c == label_idx) {
        auto it = std::find(seen_labels.begin(), seen_labels.end(), value);
        if (it == seen_labels.end()) {
          seen_labels.push_back(value);
          d.labels[r] = static_cast<int>(seen_labels.size()) - 1;
        } else {
          d.labels[r] = static_cast<int>(it - seen_labels.begin());
        }
      } else {
        d.features.at(r, fc++) = value;
      }
    }
  }
  d.n_classes = static_cast<int>(seen_labels.size());
  return d;
}

void write_csv(const DatasetTable& d, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_csv: cannot open '" + path + "' for writing");
  out.precision(17);
  for (std::size_t r = 0; r < d.rows(); ++r) {
    for (std::size_t c = 0; c < d.cols(); ++c) out << d.features.at(r, c) << ',';
    out << d.labels[r] << '\n';
  }
  if (!out) throw std::runtime_error("write_csv: failed writing '" + path + "'");
}

DatasetTable binarize_one_vs_all(const DatasetTable& d) {
  if (d.n_classes < 2)
    throw std::invalid_argument("binarize_one_vs_all: dataset '" + d.name +
                                "' has fewer than 2 classes");
  const auto counts = d.class_counts();
  int top = 0;
  for (int c = 1; c < d.n_classes; ++c)
    if (counts[static_cast<std::size_t>(c)] > counts[static_cast<std::size_t>(top)]) top = c;
  DatasetTable out = d;
  for (std::size_t i = 0; i < out.labels.size(); ++i)
    out.labels[i] = out.labels[i] == top ? 1 : 0;
  out.n_classes = 2;
  return out;
}

DatasetTable reduce_to_k_classes(const DatasetTable& d, int k) {
  if (k < 2) throw std::invalid_argument("reduce_to_k_classes: k must be at least 2");
  if (d.n_classes < k)
    throw std::invalid_argument("reduce_to_k_classes: dataset '" + d.name + "' has " +
                                std::to_string(d.n_classes) + " classes, needs at least " +
                                std::to_string(k));
  const auto counts = d.class_counts();
  std::vector<int> order(static_cast<std::size_t>(d.n_classes));
  for (int c = 0; c < d.n_classes; ++c) order[static_cast<std::size_t>(c)] = c;
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return counts[static_cast<std::size_t>(a)] > counts[static_cast<std::size_t>(b)];
  });
  std::vector<int> remap(static_cast<std::size_t>(d.n_classes), k - 1);
  for (int r = 0; r < k - 1; ++r) remap[static_cast<std::size_t>(order[static_cast<std::size_t>(r)])] = r;
  DatasetTable out = d;
  for (std::size_t i = 0; i < out.labels.size(); ++i)
    out.labels[i] = remap[static_cast<std::size_t>(out.labels[i])];
  out.n_classes = k;
  return out;
}

void standardize_joint(Tensor& meta_x, Tensor& target_x) {
  if (meta_x.rank() != 2 || target_x.rank() != 2 || meta_x.cols() != target_x.cols())
    throw std::invalid_argument("standardize_joint: column mismatch between " +
                                meta_x.shape_str() + " and " + target_x.shape_str());
  const std::size_t cols = meta_x.cols();
  const std::size_t nm = meta_x.rows(), nt = target_x.rows();
  if (nm + nt == 0) return;
  const double n = static_cast<double>(nm + nt);
  for (std::size_t c = 0; c < cols; ++c) {
    double lo = nm > 0 ? meta_x.at(0, c) : target_x.at(0, c);
    double hi = lo, total = 0.0;
    for (std::size_t r = 0; r < nm; ++r) {
      const double v = meta_x.at(r, c);
      total += v;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    for (std::size_t r = 0; r < nt; ++r) {
      const double v = target_x.at(r, c);
      total += v;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (lo == hi) {
      // Constant column.
      for (std::size_t r = 0; r < nm; ++r) meta_x.at(r, c) = 0.0;
      for (std::size_t r = 0; r < nt; ++r) target_x.at(r, c) = 0.0;
      continue;
    }
    const double mean = total / n;
    double var = 0.0;
    for (std::size_t r = 0; r < nm; ++r) {
      const double dv = meta_x.at(r, c) - mean;
      var += dv * dv;
    }
    for (std::size_t r = 0; r < nt; ++r) {
      const double dv = target_x.at(r, c) - mean;
      var += dv * dv;
    }
    var /= n;
    const double inv = 1.0 / std::sqrt(var);
    for (std::size_t r = 0; r < nm; ++r) meta_x.at(r, c) = (meta_x.at(r, c) - mean) * inv;
    for (std::size_t r = 0; r < nt; ++r) target_x.at(r, c) = (target_x.at(r, c) - mean) * inv;
  }
}

}  // namespace flattab
