#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace mondrian {

enum class DataFormat { kCsv, kLibsvm };

/// Rows exactly as parsed from disk: features unscaled, labels still in the
/// file's own alphabet.
struct RawDataset {
  std::size_t num_rows = 0;
  std::uint32_t num_features = 0;
  std::vector<double> features;  // row-major
  std::vector<long long> raw_labels;

  std::span<const double> row(std::size_t i) const {
    return {features.data() + i * num_features, num_features};
  }
};

/// Dense class encoding: sorted original labels, index = encoded class.
struct LabelRemap {
  std::vector<long long> originals;

  std::uint32_t num_classes() const {
    return static_cast<std::uint32_t>(originals.size());
  }
  std::uint32_t encode(long long raw) const;
  long long decode(std::uint32_t k) const { return originals[k]; }
};

struct Dataset {
  std::size_t num_rows = 0;
  std::uint32_t num_features = 0;
  std::uint32_t num_classes = 0;
  std::vector<double> features;  // row-major
  std::vector<std::uint32_t> labels;

  std::span<const double> row(std::size_t i) const {
    return {features.data() + i * num_features, num_features};
  }
};

/// Parses a CSV (label in the first column, comma separated, no header by
/// default) or LIBSVM file. Parse problems report the line number; rows must
/// be finite and non-empty.
RawDataset load_raw(const std::string& path, DataFormat format,
                    bool skip_header = false);

/// Widens a LIBSVM-parsed dataset to a common dimension (absent trailing
/// indices are zero).
void pad_features(RawDataset& raw, std::uint32_t num_features);

LabelRemap build_label_remap(std::span<const RawDataset* const> datasets);

Dataset encode_labels(const RawDataset& raw, const LabelRemap& remap);

/// One-file convenience: load, build a remap from this file alone, encode.
std::pair<Dataset, LabelRemap> load_dataset(const std::string& path,
                                            DataFormat format,
                                            bool skip_header = false);

/// Per-feature (min, range) learned on the training split.
struct ScalingParams {
  std::vector<double> min;
  std::vector<double> range;
};

ScalingParams fit_scaling(const Dataset& train);

/// x' = (x - min) / range per feature; a zero range maps the feature to 0.
/// Values outside the training range are NOT clipped and may leave [0, 1].
Dataset apply_scaling(const ScalingParams& scaling, Dataset data);

/// Seeded shuffle followed by contiguous near-equal slices (sizes differ by
/// at most one). order holds the shuffled row indices; ranges index into it.
struct MiniBatches {
  std::vector<std::uint32_t> order;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> ranges;  // [begin, end)
};

MiniBatches make_minibatches(std::size_t num_rows, std::size_t num_batches,
                             std::uint64_t shuffle_seed, bool shuffle = true);

}  // namespace mondrian
