#include "gridsense/feature_matrix.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <set>

#include "gridsense/common.hpp"

namespace gridsense {

std::string_view to_string(SegmentClass c) {
    switch (c) {
        case SegmentClass::Nor: return "Nor";
        case SegmentClass::Pre: return "Pre";
        case SegmentClass::Post: return "Post";
    }
    return "?";
}

SegmentClass parse_segment_class(std::string_view name) {
    if (name == "Nor") return SegmentClass::Nor;
    if (name == "Pre") return SegmentClass::Pre;
    if (name == "Post") return SegmentClass::Post;
    throw PreconditionError("unknown class label '" + std::string(name) + "'");
}

FeatureMatrix::FeatureMatrix(std::vector<std::string> columns) : columns_(std::move(columns)) {}

void FeatureMatrix::add_row(std::span<const double> values, int label, std::string id, bool synthetic) {
    if (values.size() != cols()) {
        throw PreconditionError("add_row: expected " + std::to_string(cols()) + " values, got " +
                                std::to_string(values.size()));
    }
    if (label < 0) throw PreconditionError("add_row: negative label");
    values_.insert(values_.end(), values.begin(), values.end());
    labels_.push_back(label);
    ids_.push_back(std::move(id));
    synthetic_.push_back(synthetic ? 1 : 0);
}

std::size_t FeatureMatrix::synthetic_count() const {
    return static_cast<std::size_t>(std::count(synthetic_.begin(), synthetic_.end(), 1));
}

int FeatureMatrix::class_count() const {
    if (labels_.empty()) return 0;
    return *std::max_element(labels_.begin(), labels_.end()) + 1;
}

std::vector<std::size_t> FeatureMatrix::class_counts() const {
    std::vector<std::size_t> counts(static_cast<std::size_t>(class_count()), 0);
    for (int l : labels_) ++counts[static_cast<std::size_t>(l)];
    return counts;
}

int FeatureMatrix::classes_present() const {
    const auto counts = class_counts();
    return static_cast<int>(std::count_if(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; }));
}

std::size_t FeatureMatrix::column_index(std::string_view name) const {
    const auto it = std::find(columns_.begin(), columns_.end(), name);
    if (it == columns_.end()) throw PreconditionError("unknown feature column '" + std::string(name) + "'");
    return static_cast<std::size_t>(it - columns_.begin());
}

FeatureMatrix FeatureMatrix::select_rows(std::span<const std::size_t> rows) const {
    FeatureMatrix out(columns_);
    out.values_.reserve(rows.size() * cols());
    for (std::size_t r : rows) {
        if (r >= this->rows()) throw PreconditionError("select_rows: row index out of range");
        out.add_row(row(r), labels_[r], ids_[r], synthetic_[r] != 0);
    }
    return out;
}

FeatureMatrix FeatureMatrix::select_columns(std::span<const std::size_t> cols) const {
    std::vector<std::string> names;
    names.reserve(cols.size());
    for (std::size_t c : cols) {
        if (c >= this->cols()) throw PreconditionError("select_columns: column index out of range");
        names.push_back(columns_[c]);
    }
    FeatureMatrix out(std::move(names));
    out.values_.reserve(rows() * cols.size());
    for (std::size_t r = 0; r < rows(); ++r) {
        for (std::size_t c : cols) out.values_.push_back(at(r, c));
    }
    out.labels_ = labels_;
    out.ids_ = ids_;
    out.synthetic_ = synthetic_;
    return out;
}

FeatureMatrix FeatureMatrix::select_columns(const std::vector<std::string>& names) const {
    std::vector<std::size_t> idx;
    idx.reserve(names.size());
    for (const auto& n : names) idx.push_back(column_index(n));
    return select_columns(idx);
}

void FeatureMatrix::require_finite() const {
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (!std::isfinite(values_[i])) {
            const std::size_t r = i / cols();
            const std::size_t c = i % cols();
            throw PreconditionError("non-finite value at row " + std::to_string(r) + ", column '" + columns_[c] + "'");
        }
    }
}

void write_feature_csv(std::ostream& out, const FeatureMatrix& m) {
    out << "segment_id,label";
    for (const auto& c : m.columns()) out << ',' << c;
    out << '\n';
    char buf[32];
    for (std::size_t r = 0; r < m.rows(); ++r) {
        const int label = m.labels()[r];
        out << m.ids()[r] << ',';
        if (label < kSegmentClassCount) {
            out << to_string(static_cast<SegmentClass>(label));
        } else {
            out << label;
        }
        for (double v : m.row(r)) {
            std::snprintf(buf, sizeof buf, "%.17g", v);
            out << ',' << buf;
        }
        out << '\n';
    }
}

namespace {

std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
}

}  // namespace

FeatureMatrix read_feature_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw SchemaError("feature CSV is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = split_commas(line);
    if (header.size() < 2 || header[0] != "segment_id" || header[1] != "label") {
        throw SchemaError("feature CSV header must start with segment_id,label");
    }
    std::vector<std::string> columns(header.begin() + 2, header.end());
    std::set<std::string> unique(columns.begin(), columns.end());
    if (unique.size() != columns.size()) throw SchemaError("feature CSV has duplicate column names");
    FeatureMatrix m(std::move(columns));
    std::vector<double> values(m.cols());
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_commas(line);
        if (fields.size() != m.cols() + 2) {
            throw IngestError("feature CSV line " + std::to_string(line_no) + ": expected " +
                              std::to_string(m.cols() + 2) + " fields");
        }
        int label = 0;
        try {
            label = static_cast<int>(parse_segment_class(fields[1]));
        } catch (const PreconditionError&) {
            auto [p, ec] = std::from_chars(fields[1].data(), fields[1].data() + fields[1].size(), label);
            if (ec != std::errc{} || p != fields[1].data() + fields[1].size() || label < 0) {
                throw IngestError("feature CSV line " + std::to_string(line_no) + ": bad label '" +
                                  std::string(fields[1]) + "'");
            }
        }
        for (std::size_t c = 0; c < m.cols(); ++c) {
            const auto f = fields[c + 2];
            auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), values[c]);
            if (ec != std::errc{} || p != f.data() + f.size() || !std::isfinite(values[c])) {
                throw IngestError("feature CSV line " + std::to_string(line_no) + ": bad value in column '" +
                                  m.columns()[c] + "'");
            }
        }
        m.add_row(values, label, std::string(fields[0]));
    }
    return m;
}

}  // namespace gridsense
