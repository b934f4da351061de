#include "mondrian/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "mondrian/rng.hpp"

namespace mondrian {

namespace {

[[noreturn]] void parse_error(const std::string& path, std::size_t line,
                              const std::string& what) {
  throw std::runtime_error(path + ":" + std::to_string(line) + ": " + what);
}

double parse_double(const std::string& token, const std::string& path,
                    std::size_t line) {
  std::size_t pos = 0;
  double value;
  try {
    value = std::stod(token, &pos);
  } catch (const std::exception&) {
    parse_error(path, line, "cannot parse number '" + token + "'");
  }
  if (pos != token.size())
    parse_error(path, line, "trailing characters in '" + token + "'");
  if (!std::isfinite(value))
    parse_error(path, line, "non-finite value '" + token + "'");
  return value;
}

long long parse_label(const std::string& token, const std::string& path,
                      std::size_t line) {
  const double value = parse_double(token, path, line);
  const long long rounded = std::llround(value);
  if (std::abs(value - static_cast<double>(rounded)) > 1e-9)
    parse_error(path, line, "label '" + token + "' is not an integer");
  return rounded;
}

bool is_blank(const std::string& s) {
  return s.find_first_not_of(" \t\r") == std::string::npos;
}

RawDataset load_csv(std::ifstream& in, const std::string& path, bool skip_header) {
  RawDataset raw;
  std::string line;
  std::size_t line_no = 0;
  if (skip_header && std::getline(in, line)) ++line_no;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (is_blank(line)) continue;
    std::stringstream row(line);
    std::string token;
    if (!std::getline(row, token, ','))
      parse_error(path, line_no, "missing label column");
    raw.raw_labels.push_back(parse_label(token, path, line_no));
    std::uint32_t count = 0;
    while (std::getline(row, token, ',')) {
      raw.features.push_back(parse_double(token, path, line_no));
      ++count;
    }
    if (count == 0) parse_error(path, line_no, "row has no features");
    if (raw.num_rows == 0)
      raw.num_features = count;
    else if (count != raw.num_features)
      parse_error(path, line_no, "inconsistent column count");
    ++raw.num_rows;
  }
  return raw;
}

RawDataset load_libsvm(std::ifstream& in, const std::string& path) {
  struct SparseRow {
    long long label;
    std::vector<std::pair<std::uint32_t, double>> entries;  // 0-based indices
  };
  std::vector<SparseRow> rows;
  std::uint32_t max_dim = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (is_blank(line)) continue;
    std::stringstream row(line);
    std::string token;
    if (!(row >> token)) parse_error(path, line_no, "missing label");
    SparseRow parsed;
    parsed.label = parse_label(token, path, line_no);
    while (row >> token) {
      const std::size_t colon = token.find(':');
      if (colon == std::string::npos)
        parse_error(path, line_no, "expected index:value, got '" + token + "'");
      const double index_value =
          parse_double(token.substr(0, colon), path, line_no);
      const long long index = std::llround(index_value);
      if (index < 1) parse_error(path, line_no, "feature indices start at 1");
      const double value = parse_double(token.substr(colon + 1), path, line_no);
      parsed.entries.emplace_back(static_cast<std::uint32_t>(index - 1), value);
      max_dim = std::max(max_dim, static_cast<std::uint32_t>(index));
    }
    rows.push_back(std::move(parsed));
  }

  RawDataset raw;
  raw.num_rows = rows.size();
  raw.num_features = max_dim;
  raw.features.assign(raw.num_rows * max_dim, 0.0);
  raw.raw_labels.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    raw.raw_labels.push_back(rows[i].label);
    for (const auto& [d, v] : rows[i].entries) raw.features[i * max_dim + d] = v;
  }
  return raw;
}

}  // namespace

std::uint32_t LabelRemap::encode(long long raw) const {
  const auto it = std::lower_bound(originals.begin(), originals.end(), raw);
  if (it == originals.end() || *it != raw)
    throw std::invalid_argument("LabelRemap: unknown label " + std::to_string(raw));
  return static_cast<std::uint32_t>(it - originals.begin());
}

RawDataset load_raw(const std::string& path, DataFormat format, bool skip_header) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path + ": cannot open file");
  RawDataset raw = format == DataFormat::kCsv ? load_csv(in, path, skip_header)
                                              : load_libsvm(in, path);
  if (raw.num_rows == 0) throw std::runtime_error(path + ": no data rows");
  return raw;
}

void pad_features(RawDataset& raw, std::uint32_t num_features) {
  if (num_features < raw.num_features)
    throw std::invalid_argument("pad_features: cannot shrink dimension");
  if (num_features == raw.num_features) return;
  std::vector<double> wide(raw.num_rows * num_features, 0.0);
  for (std::size_t i = 0; i < raw.num_rows; ++i)
    std::copy_n(raw.features.begin() + i * raw.num_features, raw.num_features,
                wide.begin() + i * num_features);
  raw.features = std::move(wide);
  raw.num_features = num_features;
}

LabelRemap build_label_remap(std::span<const RawDataset* const> datasets) {
  std::set<long long> seen;
  for (const RawDataset* raw : datasets)
    seen.insert(raw->raw_labels.begin(), raw->raw_labels.end());
  LabelRemap remap;
  remap.originals.assign(seen.begin(), seen.end());
  return remap;
}

Dataset encode_labels(const RawDataset& raw, const LabelRemap& remap) {
  Dataset data;
  data.num_rows = raw.num_rows;
  data.num_features = raw.num_features;
  data.num_classes = remap.num_classes();
  data.features = raw.features;
  data.labels.reserve(raw.num_rows);
  for (const long long label : raw.raw_labels)
    data.labels.push_back(remap.encode(label));
  return data;
}

std::pair<Dataset, LabelRemap> load_dataset(const std::string& path,
                                            DataFormat format, bool skip_header) {
  const RawDataset raw = load_raw(path, format, skip_header);
  const RawDataset* ptr = &raw;
  LabelRemap remap = build_label_remap({&ptr, 1});
  return {encode_labels(raw, remap), std::move(remap)};
}

ScalingParams fit_scaling(const Dataset& train) {
  ScalingParams scaling;
  scaling.min.assign(train.num_features, 0.0);
  scaling.range.assign(train.num_features, 0.0);
  if (train.num_rows == 0) return scaling;
  std::vector<double> max(train.num_features);
  for (std::uint32_t d = 0; d < train.num_features; ++d)
    scaling.min[d] = max[d] = train.features[d];
  for (std::size_t i = 1; i < train.num_rows; ++i) {
    const auto row = train.row(i);
    for (std::uint32_t d = 0; d < train.num_features; ++d) {
      scaling.min[d] = std::min(scaling.min[d], row[d]);
      max[d] = std::max(max[d], row[d]);
    }
  }
  for (std::uint32_t d = 0; d < train.num_features; ++d)
    scaling.range[d] = max[d] - scaling.min[d];
  return scaling;
}

Dataset apply_scaling(const ScalingParams& scaling, Dataset data) {
  if (scaling.min.size() != data.num_features)
    throw std::invalid_argument("apply_scaling: dimension mismatch");
  for (std::size_t i = 0; i < data.num_rows; ++i) {
    double* row = data.features.data() + i * data.num_features;
    for (std::uint32_t d = 0; d < data.num_features; ++d)
      row[d] = scaling.range[d] == 0.0 ? 0.0
                                       : (row[d] - scaling.min[d]) / scaling.range[d];
  }
  return data;
}

MiniBatches make_minibatches(std::size_t num_rows, std::size_t num_batches,
                             std::uint64_t shuffle_seed, bool shuffle) {
  if (num_batches == 0 || num_batches > num_rows)
    throw std::invalid_argument(
        "make_minibatches: need 1 <= num_batches <= num_rows");
  MiniBatches out;
  out.order.resize(num_rows);
  for (std::size_t i = 0; i < num_rows; ++i)
    out.order[i] = static_cast<std::uint32_t>(i);
  if (shuffle) {
    RngStream rng(shuffle_seed, 0);
    for (std::size_t i = num_rows - 1; i > 0; --i) {
      const std::size_t j =
          static_cast<std::size_t>(rng.next_uniform() * static_cast<double>(i + 1));
      std::swap(out.order[i], out.order[j]);
    }
  }
  const std::size_t base = num_rows / num_batches;
  const std::size_t extra = num_rows % num_batches;  // first `extra` get +1
  std::uint32_t begin = 0;
  for (std::size_t b = 0; b < num_batches; ++b) {
    const std::uint32_t size = static_cast<std::uint32_t>(base + (b < extra ? 1 : 0));
    out.ranges.emplace_back(begin, begin + size);
    begin += size;
  }
  return out;
}

}  // namespace mondrian
