#pragma once

#include "mvi/tabular.hpp"

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace mvi {

enum class PlotKind { Aggregation, Matrix, ParallelBox };

std::string_view to_string(PlotKind k);
PlotKind parse_plot_kind(std::string_view s);

struct PlotSpec {
    PlotKind kind = PlotKind::Aggregation;
    std::optional<std::string> sort_by;  ///< Matrix: defaults to the first plotted column
    bool sort_descending = true;         ///< Matrix: largest values in the top rows
    std::string highlight_color = "#d62728";
    bool black_and_white = false;        ///< missing drawn in the darkest gray instead
    int width = 800;
    int height = 500;
    /// Categorical columns whose codes are ordered; all other categorical columns are nominal.
    std::set<std::string> ordinal_columns;
    /// Matrix: columns to draw (default: numeric and ordinal columns).
    std::vector<std::string> columns;
};

struct Signature {
    std::vector<bool> missing;  ///< one flag per column
    std::size_t count = 0;
    double frequency = 0.0;
};

struct AggregationData {
    std::vector<double> column_rates;  ///< missing cells / rows, per column
    std::vector<Signature> signatures;  ///< most frequent first, ties in lexicographic order
};

AggregationData aggregation_data(const Dataset& ds, const MissingMask& mask);

/// Five-number summary with quartiles by linear interpolation at position p (n - 1) and
/// whiskers at the most extreme values within 1.5 IQR of the box.
struct BoxStats {
    std::size_t n = 0;
    double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0;
    double whisker_low = 0.0, whisker_high = 0.0;
    std::vector<double> outliers;
};

BoxStats box_stats(std::vector<double> values);
double quantile_linear(const std::vector<double>& sorted, double p);

struct BoxGroup {
    std::string label;  ///< "all", "<col> missing", "<col> observed"
    std::optional<std::size_t> split_column;
    bool split_missing = false;
    std::vector<double> values;
    BoxStats stats;  ///< meaningful when values is non-empty
};

/// Observed values of `column`: overall, then per other incomplete column split by that
/// column's missing/observed status. Empty subgroups are kept with no values.
std::vector<BoxGroup> parallel_box_groups(const Dataset& ds, const MissingMask& mask, std::string_view column,
                                          const PlotSpec& spec = {});

/// Plotted column indices for the matrix plot; throws NominalColumn.
std::vector<std::size_t> matrix_columns(const Dataset& ds, const PlotSpec& spec);
/// Row order of the matrix plot (top row first); throws UnknownSortColumn.
std::vector<std::size_t> matrix_row_order(const Dataset& ds, const PlotSpec& spec);

std::string aggregation_plot(const Dataset& ds, const MissingMask& mask, const PlotSpec& spec = {});
std::string matrix_plot(const Dataset& ds, const MissingMask& mask, const PlotSpec& spec = {});
std::string parallel_boxplot(const Dataset& ds, const MissingMask& mask, std::string_view column, const PlotSpec& spec = {});

/// Dispatch on spec.kind; `column` is used by ParallelBox.
std::string render_plot(const Dataset& ds, const MissingMask& mask, const PlotSpec& spec, std::string_view column = {});

}  // namespace mvi
