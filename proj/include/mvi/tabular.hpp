#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mvi {

enum class ColumnKind { Numeric, Categorical };

struct ColumnSchema {
    std::string name;
    ColumnKind kind = ColumnKind::Numeric;
    bool is_target = false;

    bool operator==(const ColumnSchema&) const = default;
};

using Schema = std::vector<ColumnSchema>;

/// Throws InvalidSpec unless exactly one column is a categorical target.
void validate_schema(const Schema& schema);

/// Missing cells are stored as quiet NaN.
inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();
inline bool is_missing(double v) { return std::isnan(v); }

/// Row-major N x K table. Categorical cells hold integral codes stored as doubles.
class Dataset {
public:
    Dataset() = default;
    Dataset(Schema schema, std::size_t rows);
    Dataset(Schema schema, std::vector<double> cells);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return schema_.size(); }
    const Schema& schema() const { return schema_; }
    const ColumnSchema& column(std::size_t c) const { return schema_.at(c); }
    bool is_categorical(std::size_t c) const { return schema_[c].kind == ColumnKind::Categorical; }

    double at(std::size_t r, std::size_t c) const { return cells_[r * cols() + c]; }
    double& at(std::size_t r, std::size_t c) { return cells_[r * cols() + c]; }
    std::span<const double> row(std::size_t r) const { return {cells_.data() + r * cols(), cols()}; }
    std::span<double> row(std::size_t r) { return {cells_.data() + r * cols(), cols()}; }
    const std::vector<double>& cells() const { return cells_; }

    std::vector<double> column_values(std::size_t c) const;
    std::size_t target_index() const;
    std::optional<std::size_t> find_column(std::string_view name) const;
    /// Non-target column indices in schema order.
    std::vector<std::size_t> feature_columns() const;

    Dataset select_rows(std::span<const std::size_t> indices) const;
    bool has_missing() const;
    std::size_t missing_count() const;
    /// Largest observed code + 1 (0 for an all-missing column).
    std::size_t category_count(std::size_t c) const;

private:
    Schema schema_;
    std::size_t rows_ = 0;
    std::vector<double> cells_;
};

/// Bitwise comparison, NaN == NaN.
bool identical(const Dataset& a, const Dataset& b);

class MissingMask {
public:
    MissingMask() = default;
    MissingMask(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), bits_(rows * cols, 0) {}

    /// Mask of the NaN cells of `ds`.
    static MissingMask from_dataset(const Dataset& ds);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool at(std::size_t r, std::size_t c) const { return bits_[r * cols_ + c] != 0; }
    void set(std::size_t r, std::size_t c, bool missing = true) { bits_[r * cols_ + c] = missing ? 1 : 0; }

    bool row_incomplete(std::size_t r) const;
    std::size_t count() const;
    std::size_t column_count(std::size_t c) const;
    std::size_t incomplete_rows() const;
    bool empty() const { return rows_ == 0 || cols_ == 0; }

    bool operator==(const MissingMask&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<std::uint8_t> bits_;
};

/// Categorical label tables; code i decodes to labels[col][i].
struct EncodingMap {
    std::map<std::size_t, std::vector<std::string>> labels;

    std::optional<std::size_t> code(std::size_t col, std::string_view label) const;
    const std::string& label(std::size_t col, std::size_t code) const;
    /// Returns the code for `label`, appending it when unseen.
    std::size_t encode(std::size_t col, std::string_view label);
};

struct ValueRange {
    double min = 0.0;
    double max = 0.0;
};

struct NormParams {
    std::map<std::size_t, ValueRange> columns;
};

struct SplitFractions {
    double train = 0.80;
    double test = 0.15;
    double validation = 0.05;
};

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
    std::vector<std::size_t> validation;
};

struct LoadedTable {
    Dataset data;
    EncodingMap encoding;
};

/// Reads a complete CSV against an explicit schema.
LoadedTable load_csv(const std::string& path, const Schema& schema);
/// Reads a complete CSV, inferring kinds: a column is categorical iff a cell fails
/// numeric parsing. The target column is always categorical.
LoadedTable load_csv(const std::string& path, std::string_view target);

struct CsvReadOptions {
    std::optional<Schema> schema;
    std::string target = "class";
    bool allow_missing = false;
    /// Codes for labels already seen (e.g. the original file's encoding).
    EncodingMap encoding;
};

LoadedTable read_csv(std::istream& in, const CsvReadOptions& options);

/// Missing cells are written as empty fields.
void write_csv(std::ostream& out, const Dataset& ds, const EncodingMap& encoding);
void write_csv(const std::string& path, const Dataset& ds, const EncodingMap& encoding);

void write_mask_csv(std::ostream& out, const MissingMask& mask, const Schema& schema);
MissingMask read_mask_csv(std::istream& in, const Schema& schema);

/// Shortest round-trip decimal representation.
std::string format_double(double v);

struct Normalized {
    Dataset data;
    NormParams params;
};

/// Min-max scaling of numeric columns; fits on observed cells when `params` is empty.
Normalized normalize(const Dataset& ds, const std::optional<NormParams>& params = std::nullopt);
NormParams fit_norm_params(const Dataset& ds);
Dataset denormalize(const Dataset& ds, const NormParams& params);

SplitIndices split_dataset(std::size_t n, const SplitFractions& fractions, std::uint64_t seed);
inline SplitIndices split_dataset(const Dataset& ds, const SplitFractions& fractions, std::uint64_t seed) {
    return split_dataset(ds.rows(), fractions, seed);
}

}  // namespace mvi
