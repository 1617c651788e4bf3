#pragma once

#include "mvi/ampute.hpp"
#include "mvi/mlp.hpp"
#include "mvi/tabular.hpp"

#include <cstdint>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

namespace mvi {

struct ImputationMethod {
    enum class Kind { Mean, Median, Knn, Mice, MultipleMlp, Zerofill, Delete };

    Kind kind = Kind::Mean;
    std::size_t k = 5;                       ///< Knn
    std::size_t max_iter = 10;               ///< Mice
    double tol = 1e-3;                       ///< Mice, normalized units
    std::vector<std::size_t> hidden_layers;  ///< MultipleMlp

    static ImputationMethod of(Kind kind) {
        ImputationMethod m;
        m.kind = kind;
        return m;
    }
    static ImputationMethod mean() { return of(Kind::Mean); }
    static ImputationMethod median() { return of(Kind::Median); }
    static ImputationMethod knn(std::size_t k) {
        auto m = of(Kind::Knn);
        m.k = k;
        return m;
    }
    static ImputationMethod mice(std::size_t max_iter = 10, double tol = 1e-3) {
        auto m = of(Kind::Mice);
        m.max_iter = max_iter;
        m.tol = tol;
        return m;
    }
    static ImputationMethod multiple_mlp(std::vector<std::size_t> hidden) {
        auto m = of(Kind::MultipleMlp);
        m.hidden_layers = std::move(hidden);
        return m;
    }
    static ImputationMethod zerofill() { return of(Kind::Zerofill); }
    static ImputationMethod remove() { return of(Kind::Delete); }

    /// mean | median | knn:5 | mice | multiplemlp:64-32 | zerofill | delete
    std::string name() const;
    bool operator==(const ImputationMethod&) const = default;
};

/// Parses the names produced by ImputationMethod::name(); "knn" alone means k = 5.
ImputationMethod parse_method(std::string_view text);
void validate(const ImputationMethod& method);

struct ImputeOptions {
    /// The target is never amputed; when set it also feeds KNN distances, MICE and MLP inputs.
    bool use_target_in_imputation = false;
    TrainParams mlp_params{};
    std::uint64_t seed = 0;
};

struct ImputationOutcome {
    Dataset data;
    std::vector<std::size_t> kept_rows;
    ImputationMethod method;
    double fit_seconds = 0.0;
    std::size_t iterations = 0;  ///< MICE sweeps
    std::vector<std::string> warnings;
};

/// Wraps a dataset whose NaN cells are missing.
AmputedDataset as_amputed(const Dataset& data_with_missing);

enum class SimpleStrategy { Mean, Median, Zerofill };

/// Column mean / lower median over observed cells, mode (lowest code on ties) for
/// categorical columns, or literal 0.
ImputationOutcome impute_simple(const AmputedDataset& amp, SimpleStrategy strategy);

ImputationOutcome delete_incomplete(const AmputedDataset& amp);

/// Donors are complete rows; distance is Euclidean over the incomplete row's observed
/// numeric columns in min-max space. Ties at the k-th distance go to the lowest row index.
ImputationOutcome impute_knn(const AmputedDataset& amp, std::size_t k, const ImputeOptions& options = {});

/// Chained equations with ridge least squares (lambda = 1e-6) and mean/mode start values.
/// Columns are visited by ascending missing count; stops once the largest change of an
/// imputed cell (min-max units) is below `tol` or after `max_iter` sweeps.
ImputationOutcome impute_mice(const AmputedDataset& amp, std::size_t max_iter, double tol,
                              const ImputeOptions& options = {});

/// One MLP per missingness signature, trained on the complete rows.
ImputationOutcome impute_mlp(const AmputedDataset& amp, const std::vector<std::size_t>& hidden_layers,
                             const TrainParams& params, const ImputeOptions& options = {});

ImputationOutcome impute(const AmputedDataset& amp, const ImputationMethod& method, const ImputeOptions& options = {});

/// Lower median of a non-empty value list.
double lower_median(std::vector<double> values);
/// Most frequent code, lowest code on ties.
double mode_code(const std::vector<double>& codes);

}  // namespace mvi
