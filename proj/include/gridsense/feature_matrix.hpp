#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace gridsense {

/// Operational state of a segment; also the class index used by learners.
enum class SegmentClass : int { Nor = 0, Pre = 1, Post = 2 };

inline constexpr int kSegmentClassCount = 3;

std::string_view to_string(SegmentClass c);
/// Throws PreconditionError on anything other than Nor/Pre/Post.
SegmentClass parse_segment_class(std::string_view name);

/// Row-major labeled feature table. Labels are class indices (for segment
/// data: SegmentClass values). Synthetic rows are those produced by SMOTE.
class FeatureMatrix {
public:
    FeatureMatrix() = default;
    explicit FeatureMatrix(std::vector<std::string> columns);

    void add_row(std::span<const double> values, int label, std::string id = {}, bool synthetic = false);

    std::size_t rows() const { return labels_.size(); }
    std::size_t cols() const { return columns_.size(); }
    bool empty() const { return rows() == 0; }

    double at(std::size_t r, std::size_t c) const { return values_[r * cols() + c]; }
    double& at(std::size_t r, std::size_t c) { return values_[r * cols() + c]; }
    std::span<const double> row(std::size_t r) const { return {values_.data() + r * cols(), cols()}; }

    const std::vector<std::string>& columns() const { return columns_; }
    const std::vector<int>& labels() const { return labels_; }
    std::vector<int>& labels() { return labels_; }
    const std::vector<std::string>& ids() const { return ids_; }
    bool synthetic(std::size_t r) const { return synthetic_[r] != 0; }
    std::size_t synthetic_count() const;

    /// max label + 1 (0 for an empty matrix).
    int class_count() const;
    std::vector<std::size_t> class_counts() const;
    /// Number of distinct labels present.
    int classes_present() const;

    /// Column index by name; throws PreconditionError when absent.
    std::size_t column_index(std::string_view name) const;

    FeatureMatrix select_rows(std::span<const std::size_t> rows) const;
    FeatureMatrix select_columns(std::span<const std::size_t> cols) const;
    FeatureMatrix select_columns(const std::vector<std::string>& names) const;

    /// Throws PreconditionError on any non-finite value.
    void require_finite() const;

private:
    std::vector<std::string> columns_;
    std::vector<double> values_;
    std::vector<int> labels_;
    std::vector<std::string> ids_;
    std::vector<char> synthetic_;
};

/// Feature matrix CSV: `segment_id,label,<feature columns...>`, label in
/// {Nor,Pre,Post}. Values are written with 17 significant digits.
void write_feature_csv(std::ostream& out, const FeatureMatrix& m);
FeatureMatrix read_feature_csv(std::istream& in);

}  // namespace gridsense
