#pragma once

#include "mvi/tabular.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mvi {

struct SelectedCell {
    std::size_t row = 0;
    double original = 0.0;
    double imputed = 0.0;
};

/// Cells that were masked and then imputed, keyed by column.
struct CellSelection {
    std::map<std::size_t, std::vector<SelectedCell>> columns;

    std::size_t size() const;
    const std::vector<SelectedCell>& cells(std::size_t column) const;
};

CellSelection select_imputed_cells(const Dataset& original, const Dataset& imputed, const MissingMask& mask);

double rmse(const CellSelection& sel, std::size_t column);

/// RMSE over the selected cells divided by max - min of the column in `original_full`.
double nrmse2(const CellSelection& sel, const Dataset& original_full, std::size_t column);

/// Share of selected cells whose imputed code equals the original code.
double categorical_accuracy(const CellSelection& sel, std::size_t column);

/// Unweighted mean of per-class F1 over all `classes` classes; a class with zero
/// precision + recall contributes 0.
double f1_macro(const std::vector<std::size_t>& truth, const std::vector<std::size_t>& predicted, std::size_t classes);

struct ColumnMetric {
    std::size_t column = 0;
    std::string name;
    std::size_t cells = 0;
    std::optional<double> nrmse2;  ///< numeric columns
    std::optional<double> acc;     ///< categorical columns
};

struct MetricReport {
    std::vector<ColumnMetric> columns;  ///< columns with at least one imputed cell
    std::optional<double> mean_nrmse2;
    std::optional<double> mean_acc;
    std::vector<std::string> warnings;
};

/// Scores every masked cell. Constant original columns are skipped with a warning.
MetricReport evaluate_imputation(const Dataset& original, const Dataset& imputed, const MissingMask& mask);

}  // namespace mvi
