#include "nsca/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

namespace nsca {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  // splitmix64 finalizer over the combined words
  std::uint64_t z = a * 0x9E3779B97F4A7C15ULL + b + 0x632BE59BD9B4E019ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> cells;
  std::string_view rest(line);
  while (true) {
    auto pos = rest.find(',');
    cells.push_back(trim(rest.substr(0, pos)));
    if (pos == std::string_view::npos) break;
    rest.remove_prefix(pos + 1);
  }
  return cells;
}

}  // namespace

std::vector<int> LabeledDataset::class_sizes() const {
  std::vector<int> sizes(static_cast<std::size_t>(class_count), 0);
  for (int l : labels) ++sizes[static_cast<std::size_t>(l)];
  return sizes;
}

void LabeledDataset::validate() const {
  if (class_count < 2) throw DataError("dataset: need at least 2 classes");
  if (static_cast<Eigen::Index>(labels.size()) != inputs.rows())
    throw DataError("dataset: label count does not match row count");
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] < 0 || labels[i] >= class_count)
      throw DataError("dataset: label out of range at row " + std::to_string(i));
  for (int c : class_sizes())
    if (c == 0) throw DataError("dataset: some class has no samples");
  require_finite(inputs, "dataset inputs");
}

LabeledDataset make_gaussian_mixture(int class_count, int per_class_count, int dim,
                                     double separation, std::uint64_t seed) {
  if (class_count < 2) throw DataError("make_gaussian_mixture: class_count must be >= 2");
  if (dim < 2) throw DataError("make_gaussian_mixture: dim must be >= 2");
  if (per_class_count < 1) throw DataError("make_gaussian_mixture: per_class_count must be >= 1");
  if (!(separation > 0)) throw DataError("make_gaussian_mixture: separation must be > 0");

  Matrix means = Matrix::Zero(class_count, dim);
  for (int k = 0; k < class_count; ++k) {
    const double theta = 2 * kPi * k / class_count;
    means(k, 0) = separation * std::cos(theta);
    means(k, 1) = separation * std::sin(theta);
    if (dim > 2) means(k, 2 + k % (dim - 2)) = 0.75 * separation;
  }

  std::mt19937_64 rng(mix_seed(seed, 0x6d6978ULL));
  std::normal_distribution<double> normal(0.0, 1.0);
  LabeledDataset out;
  out.class_count = class_count;
  out.inputs.resize(static_cast<Eigen::Index>(class_count) * per_class_count, dim);
  out.labels.reserve(static_cast<std::size_t>(out.inputs.rows()));
  Eigen::Index row = 0;
  for (int k = 0; k < class_count; ++k) {
    for (int n = 0; n < per_class_count; ++n, ++row) {
      for (int c = 0; c < dim; ++c) out.inputs(row, c) = means(k, c) + normal(rng);
      out.labels.push_back(k);
    }
  }
  return out;
}

LabeledDataset apply_shift(const LabeledDataset& dataset, const ShiftSpec& spec) {
  if (dataset.dim() < 2) throw DataError("apply_shift: need at least 2 input dims");
  if (!(spec.feature_noise_std >= 0)) throw DataError("apply_shift: noise std must be >= 0");
  if (!spec.translation.empty() &&
      static_cast<Eigen::Index>(spec.translation.size()) != dataset.dim())
    throw DataError("apply_shift: translation length must equal input dim");
  if (!spec.class_imbalance_ratios.empty() &&
      static_cast<int>(spec.class_imbalance_ratios.size()) != dataset.class_count)
    throw DataError("apply_shift: need one imbalance ratio per class");
  for (double r : spec.class_imbalance_ratios)
    if (!(r > 0)) throw DataError("apply_shift: imbalance ratios must be > 0");

  Matrix x = dataset.inputs;
  if (spec.rotation_angle != 0.0) {
    const double c = std::cos(spec.rotation_angle), s = std::sin(spec.rotation_angle);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const double a = x(i, 0), b = x(i, 1);
      x(i, 0) = c * a - s * b;
      x(i, 1) = s * a + c * b;
    }
  }
  if (!spec.translation.empty())
    x.rowwise() += Eigen::Map<const RowVec<double>>(spec.translation.data(), x.cols());
  if (spec.feature_noise_std > 0) {
    std::mt19937_64 rng(mix_seed(spec.seed, 0x6e6f697365ULL));
    std::normal_distribution<double> normal(0.0, spec.feature_noise_std);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] += normal(rng);
  }

  std::vector<Eigen::Index> keep;
  if (spec.class_imbalance_ratios.empty()) {
    keep.resize(static_cast<std::size_t>(x.rows()));
    std::iota(keep.begin(), keep.end(), Eigen::Index{0});
  } else {
    std::mt19937_64 rng(mix_seed(spec.seed, 0x696d62ULL));
    for (int k = 0; k < dataset.class_count; ++k) {
      std::vector<Eigen::Index> members;
      for (std::size_t i = 0; i < dataset.labels.size(); ++i)
        if (dataset.labels[i] == k) members.push_back(static_cast<Eigen::Index>(i));
      const double ratio = spec.class_imbalance_ratios[static_cast<std::size_t>(k)];
      const auto n = static_cast<std::ptrdiff_t>(members.size());
      const auto target = std::max<std::ptrdiff_t>(1, std::llround(ratio * static_cast<double>(n)));
      if (target <= n) {
        std::shuffle(members.begin(), members.end(), rng);
        members.resize(static_cast<std::size_t>(target));
      } else {
        std::uniform_int_distribution<std::ptrdiff_t> pick(0, n - 1);
        for (std::ptrdiff_t extra = n; extra < target; ++extra)
          members.push_back(members[static_cast<std::size_t>(pick(rng))]);
      }
      keep.insert(keep.end(), members.begin(), members.end());
    }
    std::stable_sort(keep.begin(), keep.end());
  }

  LabeledDataset out;
  out.class_count = dataset.class_count;
  out.label_names = dataset.label_names;
  out.inputs.resize(static_cast<Eigen::Index>(keep.size()), x.cols());
  out.labels.reserve(keep.size());
  for (std::size_t r = 0; r < keep.size(); ++r) {
    out.inputs.row(static_cast<Eigen::Index>(r)) = x.row(keep[r]);
    out.labels.push_back(dataset.labels[static_cast<std::size_t>(keep[r])]);
  }
  return out;
}

LabeledDataset load_csv(const std::filesystem::path& path, const std::string& label_column) {
  std::ifstream in(path);
  if (!in) throw DataError("load_csv: cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || trim(line).empty())
    throw DataError("load_csv: " + path.string() + " is empty");
  const auto header = split_row(line);
  const auto label_it = std::find(header.begin(), header.end(), label_column);
  if (label_it == header.end())
    throw DataError("load_csv: missing label column '" + label_column + "' in " + path.string());
  const auto label_col = static_cast<std::size_t>(label_it - header.begin());

  std::vector<std::vector<double>> rows;
  std::vector<std::string> raw_labels;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_row(line);
    if (cells.size() != header.size())
      throw DataError("load_csv: row " + std::to_string(line_no) + " has " +
                      std::to_string(cells.size()) + " cells, expected " +
                      std::to_string(header.size()));
    std::vector<double> values;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c == label_col) continue;
      double v = 0;
      const auto& cell = cells[c];
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc{} || ptr != cell.data() + cell.size() || cell.empty() ||
          !std::isfinite(v))
        throw DataError("load_csv: bad numeric cell at row " + std::to_string(line_no) +
                        ", column '" + header[c] + "': '" + cell + "'");
      values.push_back(v);
    }
    rows.push_back(std::move(values));
    raw_labels.push_back(cells[label_col]);
  }
  if (rows.empty()) throw DataError("load_csv: " + path.string() + " has no data rows");

  LabeledDataset out;
  std::map<std::string, int> index;
  out.inputs.resize(static_cast<Eigen::Index>(rows.size()),
                    static_cast<Eigen::Index>(header.size() - 1));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c)
      out.inputs(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    auto [it, inserted] = index.try_emplace(raw_labels[r], static_cast<int>(index.size()));
    if (inserted) out.label_names.push_back(raw_labels[r]);
    out.labels.push_back(it->second);
  }
  out.class_count = static_cast<int>(index.size());
  return out;
}

void save_csv(const LabeledDataset& dataset, const std::filesystem::path& path,
              const std::string& label_column) {
  std::ofstream out(path);
  if (!out) throw DataError("save_csv: cannot open " + path.string());
  for (Eigen::Index c = 0; c < dataset.dim(); ++c) out << 'x' << c << ',';
  out << label_column << '\n';
  out.precision(17);
  for (Eigen::Index r = 0; r < dataset.size(); ++r) {
    for (Eigen::Index c = 0; c < dataset.dim(); ++c) out << dataset.inputs(r, c) << ',';
    const int l = dataset.labels[static_cast<std::size_t>(r)];
    if (!dataset.label_names.empty())
      out << dataset.label_names[static_cast<std::size_t>(l)] << '\n';
    else
      out << l << '\n';
  }
}

std::vector<Batch> batches(const Matrix& inputs, Eigen::Index batch_size, std::uint64_t seed,
                           std::uint64_t epoch) {
  if (batch_size < 2) throw DataError("batches: batch_size must be >= 2");
  std::vector<Eigen::Index> order(static_cast<std::size_t>(inputs.rows()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::mt19937_64 rng(mix_seed(seed, epoch));
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<Batch> out;
  for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(batch_size));
    if (end - start < 2) break;
    Batch b;
    b.indices.assign(order.begin() + static_cast<std::ptrdiff_t>(start),
                     order.begin() + static_cast<std::ptrdiff_t>(end));
    b.inputs = inputs(b.indices, Eigen::all);
    out.push_back(std::move(b));
  }
  return out;
}

std::pair<LabeledDataset, LabeledDataset> stratified_split(const LabeledDataset& dataset,
                                                           double validation_fraction,
                                                           std::uint64_t seed) {
  std::mt19937_64 rng(mix_seed(seed, 0x73706c6974ULL));
  std::vector<Eigen::Index> train, val;
  for (int k = 0; k < dataset.class_count; ++k) {
    std::vector<Eigen::Index> members;
    for (std::size_t i = 0; i < dataset.labels.size(); ++i)
      if (dataset.labels[i] == k) members.push_back(static_cast<Eigen::Index>(i));
    std::shuffle(members.begin(), members.end(), rng);
    const auto n_val = static_cast<std::size_t>(
        std::floor(validation_fraction * static_cast<double>(members.size())));
    val.insert(val.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_val));
    train.insert(train.end(), members.begin() + static_cast<std::ptrdiff_t>(n_val), members.end());
  }
  std::sort(train.begin(), train.end());
  std::sort(val.begin(), val.end());
  auto take = [&](const std::vector<Eigen::Index>& idx) {
    LabeledDataset d;
    d.class_count = dataset.class_count;
    d.label_names = dataset.label_names;
    d.inputs = dataset.inputs(idx, Eigen::all);
    for (auto i : idx) d.labels.push_back(dataset.labels[static_cast<std::size_t>(i)]);
    return d;
  };
  return {take(train), take(val)};
}

}  // namespace nsca
