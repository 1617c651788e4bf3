#include "mvi/tabular.hpp"

#include "mvi/error.hpp"
#include "mvi/rng.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cstring>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace mvi {

std::string_view to_string(Errc code) {
    switch (code) {
    case Errc::MissingHeader: return "MissingHeader";
    case Errc::UnparsableCell: return "UnparsableCell";
    case Errc::EmptyCell: return "EmptyCell";
    case Errc::FractionSumInvalid: return "FractionSumInvalid";
    case Errc::MissingParams: return "MissingParams";
    case Errc::InvalidSpec: return "InvalidSpec";
    case Errc::InvalidRate: return "InvalidRate";
    case Errc::TooFewColumns: return "TooFewColumns";
    case Errc::IncompleteInput: return "IncompleteInput";
    case Errc::AllMissingColumn: return "AllMissingColumn";
    case Errc::NoCompleteRows: return "NoCompleteRows";
    case Errc::NoDonors: return "NoDonors";
    case Errc::SingularSystem: return "SingularSystem";
    case Errc::EmptyCompleteSet: return "EmptyCompleteSet";
    case Errc::BudgetTooSmall: return "BudgetTooSmall";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::UntrainedModel: return "UntrainedModel";
    case Errc::ConstantColumn: return "ConstantColumn";
    case Errc::EmptySelection: return "EmptySelection";
    case Errc::ParseError: return "ParseError";
    case Errc::UnknownKey: return "UnknownKey";
    case Errc::InvalidValue: return "InvalidValue";
    case Errc::DataSourceUnavailable: return "DataSourceUnavailable";
    case Errc::IoError: return "IoError";
    case Errc::NominalColumn: return "NominalColumn";
    case Errc::UnknownSortColumn: return "UnknownSortColumn";
    case Errc::NonNumericColumn: return "NonNumericColumn";
    }
    return "Unknown";
}

void validate_schema(const Schema& schema) {
    std::size_t targets = 0;
    for (const auto& col : schema) {
        if (!col.is_target) continue;
        ++targets;
        if (col.kind != ColumnKind::Categorical)
            throw Error(Errc::InvalidSpec, "target column '" + col.name + "' must be categorical");
    }
    if (targets != 1)
        throw Error(Errc::InvalidSpec, "schema needs exactly one target column, found " + std::to_string(targets));
}

// ---------------------------------------------------------------------------
// Dataset

Dataset::Dataset(Schema schema, std::size_t rows)
    : schema_(std::move(schema)), rows_(rows), cells_(rows * schema_.size(), 0.0) {}

Dataset::Dataset(Schema schema, std::vector<double> cells) : schema_(std::move(schema)), cells_(std::move(cells)) {
    if (schema_.empty()) {
        if (!cells_.empty()) throw Error(Errc::ShapeMismatch, "cells without columns");
        return;
    }
    if (cells_.size() % schema_.size() != 0)
        throw Error(Errc::ShapeMismatch, "cell count is not a multiple of the column count");
    rows_ = cells_.size() / schema_.size();
}

std::vector<double> Dataset::column_values(std::size_t c) const {
    std::vector<double> out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) out[r] = at(r, c);
    return out;
}

std::size_t Dataset::target_index() const {
    for (std::size_t c = 0; c < schema_.size(); ++c)
        if (schema_[c].is_target) return c;
    throw Error(Errc::InvalidSpec, "dataset has no target column");
}

std::optional<std::size_t> Dataset::find_column(std::string_view name) const {
    for (std::size_t c = 0; c < schema_.size(); ++c)
        if (schema_[c].name == name) return c;
    return std::nullopt;
}

std::vector<std::size_t> Dataset::feature_columns() const {
    std::vector<std::size_t> out;
    for (std::size_t c = 0; c < schema_.size(); ++c)
        if (!schema_[c].is_target) out.push_back(c);
    return out;
}

Dataset Dataset::select_rows(std::span<const std::size_t> indices) const {
    Dataset out(schema_, indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        auto src = row(indices[i]);
        std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
}

bool Dataset::has_missing() const {
    return std::any_of(cells_.begin(), cells_.end(), [](double v) { return is_missing(v); });
}

std::size_t Dataset::missing_count() const {
    return static_cast<std::size_t>(std::count_if(cells_.begin(), cells_.end(), [](double v) { return is_missing(v); }));
}

std::size_t Dataset::category_count(std::size_t c) const {
    std::size_t n = 0;
    for (std::size_t r = 0; r < rows_; ++r) {
        double v = at(r, c);
        if (!is_missing(v)) n = std::max(n, static_cast<std::size_t>(v) + 1);
    }
    return n;
}

bool identical(const Dataset& a, const Dataset& b) {
    if (a.schema() != b.schema() || a.rows() != b.rows()) return false;
    const auto& x = a.cells();
    const auto& y = b.cells();
    return x.empty() || std::memcmp(x.data(), y.data(), x.size() * sizeof(double)) == 0;
}

// ---------------------------------------------------------------------------
// MissingMask

MissingMask MissingMask::from_dataset(const Dataset& ds) {
    MissingMask mask(ds.rows(), ds.cols());
    for (std::size_t r = 0; r < ds.rows(); ++r)
        for (std::size_t c = 0; c < ds.cols(); ++c)
            if (is_missing(ds.at(r, c))) mask.set(r, c);
    return mask;
}

bool MissingMask::row_incomplete(std::size_t r) const {
    auto first = bits_.begin() + static_cast<std::ptrdiff_t>(r * cols_);
    return std::any_of(first, first + static_cast<std::ptrdiff_t>(cols_), [](std::uint8_t b) { return b != 0; });
}

std::size_t MissingMask::count() const {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

std::size_t MissingMask::column_count(std::size_t c) const {
    std::size_t n = 0;
    for (std::size_t r = 0; r < rows_; ++r) n += at(r, c) ? 1 : 0;
    return n;
}

std::size_t MissingMask::incomplete_rows() const {
    std::size_t n = 0;
    for (std::size_t r = 0; r < rows_; ++r) n += row_incomplete(r) ? 1 : 0;
    return n;
}

// ---------------------------------------------------------------------------
// EncodingMap

std::optional<std::size_t> EncodingMap::code(std::size_t col, std::string_view label) const {
    auto it = labels.find(col);
    if (it == labels.end()) return std::nullopt;
    auto pos = std::find(it->second.begin(), it->second.end(), label);
    if (pos == it->second.end()) return std::nullopt;
    return static_cast<std::size_t>(pos - it->second.begin());
}

const std::string& EncodingMap::label(std::size_t col, std::size_t code) const {
    auto it = labels.find(col);
    if (it == labels.end() || code >= it->second.size())
        throw Error(Errc::InvalidValue, "no label for code " + std::to_string(code) + " in column " + std::to_string(col));
    return it->second[code];
}

std::size_t EncodingMap::encode(std::size_t col, std::string_view label) {
    if (auto existing = code(col, label)) return *existing;
    auto& list = labels[col];
    list.emplace_back(label);
    return list.size() - 1;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char ch = line[i];
        if (quoted) {
            if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                field.push_back('"');
                ++i;
            } else if (ch == '"') {
                quoted = false;
            } else {
                field.push_back(ch);
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else {
            field.push_back(ch);
        }
    }
    fields.push_back(std::move(field));
    return fields;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::optional<double> parse_number(std::string_view s) {
    s = trim(s);
    if (s.empty()) return std::nullopt;
    if (s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

std::string quote_if_needed(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out.push_back('"');
        out.push_back(ch);
    }
    out.push_back('"');
    return out;
}

std::string cell_position(std::size_t row, std::size_t col) {
    return "(row " + std::to_string(row) + ", col " + std::to_string(col) + ")";
}

bool read_line(std::istream& in, std::string& line) {
    if (!std::getline(in, line)) return false;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
}

}  // namespace

std::string format_double(double v) {
    if (is_missing(v)) return "";
    std::array<char, 64> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    if (ec != std::errc()) throw Error(Errc::IoError, "cannot format value");
    return std::string(buf.data(), ptr);
}

LoadedTable read_csv(std::istream& in, const CsvReadOptions& options) {
    std::string line;
    if (!read_line(in, line) || trim(line).empty()) throw Error(Errc::MissingHeader, "empty input");
    std::vector<std::string> header = split_csv_line(line);
    for (auto& h : header) h = std::string(trim(h));

    if (options.schema) {
        const Schema& schema = *options.schema;
        bool matches = header.size() == schema.size();
        for (std::size_t c = 0; matches && c < schema.size(); ++c) matches = header[c] == schema[c].name;
        if (!matches) throw Error(Errc::MissingHeader, "header row does not match the schema column names");
    }

    std::vector<std::vector<std::string>> raw;
    while (read_line(in, line)) {
        if (trim(line).empty()) continue;
        auto fields = split_csv_line(line);
        if (fields.size() != header.size())
            throw Error(Errc::ShapeMismatch, "row " + std::to_string(raw.size()) + " has " +
                                                 std::to_string(fields.size()) + " fields, expected " +
                                                 std::to_string(header.size()));
        raw.push_back(std::move(fields));
    }

    Schema schema;
    if (options.schema) {
        schema = *options.schema;
    } else {
        for (std::size_t c = 0; c < header.size(); ++c) {
            ColumnSchema col{header[c], ColumnKind::Numeric, header[c] == options.target};
            bool categorical = col.is_target;
            for (std::size_t r = 0; !categorical && r < raw.size(); ++r) {
                auto cell = trim(raw[r][c]);
                if (!cell.empty() && !parse_number(cell)) categorical = true;
            }
            if (categorical) col.kind = ColumnKind::Categorical;
            schema.push_back(std::move(col));
        }
    }
    validate_schema(schema);

    LoadedTable out{Dataset(schema, raw.size()), options.encoding};
    for (std::size_t c = 0; c < schema.size(); ++c)
        if (schema[c].kind == ColumnKind::Categorical) out.encoding.labels[c];

    for (std::size_t r = 0; r < raw.size(); ++r) {
        for (std::size_t c = 0; c < schema.size(); ++c) {
            auto cell = trim(raw[r][c]);
            if (cell.empty()) {
                if (!options.allow_missing || schema[c].is_target)
                    throw Error(Errc::EmptyCell, "empty cell at " + cell_position(r, c));
                out.data.at(r, c) = kMissing;
                continue;
            }
            if (schema[c].kind == ColumnKind::Categorical) {
                out.data.at(r, c) = static_cast<double>(out.encoding.encode(c, cell));
            } else {
                auto v = parse_number(cell);
                if (!v) throw Error(Errc::UnparsableCell, "cannot parse '" + std::string(cell) + "' at " + cell_position(r, c));
                out.data.at(r, c) = *v;
            }
        }
    }
    return out;
}

LoadedTable load_csv(const std::string& path, const Schema& schema) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::IoError, "cannot open " + path);
    CsvReadOptions options;
    options.schema = schema;
    return read_csv(in, options);
}

LoadedTable load_csv(const std::string& path, std::string_view target) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::IoError, "cannot open " + path);
    CsvReadOptions options;
    options.target = std::string(target);
    return read_csv(in, options);
}

void write_csv(std::ostream& out, const Dataset& ds, const EncodingMap& encoding) {
    for (std::size_t c = 0; c < ds.cols(); ++c) out << (c ? "," : "") << quote_if_needed(ds.column(c).name);
    out << '\n';
    for (std::size_t r = 0; r < ds.rows(); ++r) {
        for (std::size_t c = 0; c < ds.cols(); ++c) {
            if (c) out << ',';
            double v = ds.at(r, c);
            if (is_missing(v)) continue;
            if (ds.is_categorical(c) && encoding.labels.count(c))
                out << quote_if_needed(encoding.label(c, static_cast<std::size_t>(v)));
            else
                out << format_double(v);
        }
        out << '\n';
    }
}

void write_csv(const std::string& path, const Dataset& ds, const EncodingMap& encoding) {
    std::ofstream out(path);
    if (!out) throw Error(Errc::IoError, "cannot write " + path);
    write_csv(out, ds, encoding);
}

void write_mask_csv(std::ostream& out, const MissingMask& mask, const Schema& schema) {
    if (schema.size() != mask.cols()) throw Error(Errc::ShapeMismatch, "mask/schema column count differs");
    for (std::size_t c = 0; c < schema.size(); ++c) out << (c ? "," : "") << quote_if_needed(schema[c].name);
    out << '\n';
    for (std::size_t r = 0; r < mask.rows(); ++r) {
        for (std::size_t c = 0; c < mask.cols(); ++c) out << (c ? "," : "") << (mask.at(r, c) ? '1' : '0');
        out << '\n';
    }
}

MissingMask read_mask_csv(std::istream& in, const Schema& schema) {
    std::string line;
    if (!read_line(in, line)) throw Error(Errc::MissingHeader, "empty mask file");
    auto header = split_csv_line(line);
    if (header.size() != schema.size()) throw Error(Errc::MissingHeader, "mask header does not match data");
    for (std::size_t c = 0; c < schema.size(); ++c)
        if (trim(header[c]) != schema[c].name) throw Error(Errc::MissingHeader, "mask header does not match data");
    std::vector<std::vector<std::string>> raw;
    while (read_line(in, line))
        if (!trim(line).empty()) raw.push_back(split_csv_line(line));
    MissingMask mask(raw.size(), schema.size());
    for (std::size_t r = 0; r < raw.size(); ++r) {
        if (raw[r].size() != schema.size()) throw Error(Errc::ShapeMismatch, "mask row " + std::to_string(r));
        for (std::size_t c = 0; c < schema.size(); ++c) {
            auto cell = trim(raw[r][c]);
            if (cell == "1") mask.set(r, c);
            else if (cell != "0") throw Error(Errc::UnparsableCell, "mask cell at " + cell_position(r, c));
        }
    }
    return mask;
}

// ---------------------------------------------------------------------------
// Normalization

NormParams fit_norm_params(const Dataset& ds) {
    NormParams params;
    for (std::size_t c = 0; c < ds.cols(); ++c) {
        if (ds.is_categorical(c)) continue;
        bool seen = false;
        ValueRange range;
        for (std::size_t r = 0; r < ds.rows(); ++r) {
            double v = ds.at(r, c);
            if (is_missing(v)) continue;
            if (!seen) {
                range = {v, v};
                seen = true;
            } else {
                range.min = std::min(range.min, v);
                range.max = std::max(range.max, v);
            }
        }
        params.columns[c] = range;
    }
    return params;
}

Normalized normalize(const Dataset& ds, const std::optional<NormParams>& params) {
    Normalized out{ds, params ? *params : fit_norm_params(ds)};
    for (std::size_t c = 0; c < ds.cols(); ++c) {
        if (ds.is_categorical(c)) continue;
        auto it = out.params.columns.find(c);
        if (it == out.params.columns.end()) throw Error(Errc::MissingParams, "column " + ds.column(c).name);
        const ValueRange range = it->second;
        const double span = range.max - range.min;
        for (std::size_t r = 0; r < ds.rows(); ++r) {
            double& v = out.data.at(r, c);
            if (is_missing(v)) continue;
            v = span > 0.0 ? (v - range.min) / span : 0.0;
        }
    }
    return out;
}

Dataset denormalize(const Dataset& ds, const NormParams& params) {
    Dataset out = ds;
    for (std::size_t c = 0; c < ds.cols(); ++c) {
        if (ds.is_categorical(c)) continue;
        auto it = params.columns.find(c);
        if (it == params.columns.end()) throw Error(Errc::MissingParams, "column " + ds.column(c).name);
        const ValueRange range = it->second;
        for (std::size_t r = 0; r < ds.rows(); ++r) {
            double& v = out.at(r, c);
            if (!is_missing(v)) v = range.min + v * (range.max - range.min);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Splitting

SplitIndices split_dataset(std::size_t n, const SplitFractions& fractions, std::uint64_t seed) {
    const std::array<double, 3> f{fractions.train, fractions.test, fractions.validation};
    if (std::any_of(f.begin(), f.end(), [](double x) { return !(x > 0.0); }) ||
        std::abs(f[0] + f[1] + f[2] - 1.0) > 1e-9)
        throw Error(Errc::FractionSumInvalid, "split fractions must be positive and sum to 1");

    // Largest-remainder apportionment; ties go to the earlier part.
    std::array<std::size_t, 3> sizes{};
    std::array<double, 3> remainder{};
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < 3; ++i) {
        double exact = f[i] * static_cast<double>(n);
        sizes[i] = static_cast<std::size_t>(std::floor(exact + 1e-9));
        remainder[i] = exact - static_cast<double>(sizes[i]);
        assigned += sizes[i];
    }
    std::array<std::size_t, 3> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
    for (std::size_t i = 0; assigned < n; ++i, ++assigned) ++sizes[order[i % 3]];

    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng(seed);
    std::shuffle(perm.begin(), perm.end(), rng);

    SplitIndices out;
    auto first = perm.begin();
    out.train.assign(first, first + static_cast<std::ptrdiff_t>(sizes[0]));
    first += static_cast<std::ptrdiff_t>(sizes[0]);
    out.test.assign(first, first + static_cast<std::ptrdiff_t>(sizes[1]));
    first += static_cast<std::ptrdiff_t>(sizes[1]);
    out.validation.assign(first, perm.end());
    return out;
}

}  // namespace mvi
