#include "mvi/metrics.hpp"

#include "mvi/error.hpp"
#include "mvi/results.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace mvi {

std::size_t CellSelection::size() const {
    std::size_t n = 0;
    for (const auto& [c, cells] : columns) n += cells.size();
    return n;
}

const std::vector<SelectedCell>& CellSelection::cells(std::size_t column) const {
    static const std::vector<SelectedCell> none;
    auto it = columns.find(column);
    return it == columns.end() ? none : it->second;
}

CellSelection select_imputed_cells(const Dataset& original, const Dataset& imputed, const MissingMask& mask) {
    if (original.rows() != imputed.rows() || original.cols() != imputed.cols() || mask.rows() != original.rows() ||
        mask.cols() != original.cols())
        throw Error(Errc::ShapeMismatch, "original, imputed and mask shapes differ");
    CellSelection sel;
    for (std::size_t r = 0; r < original.rows(); ++r)
        for (std::size_t c = 0; c < original.cols(); ++c)
            if (mask.at(r, c)) sel.columns[c].push_back({r, original.at(r, c), imputed.at(r, c)});
    return sel;
}

double rmse(const CellSelection& sel, std::size_t column) {
    const auto& cells = sel.cells(column);
    if (cells.empty()) throw Error(Errc::EmptySelection, "no imputed cells in column " + std::to_string(column));
    double sum = 0.0;
    for (const auto& cell : cells) sum += (cell.imputed - cell.original) * (cell.imputed - cell.original);
    return std::sqrt(sum / static_cast<double>(cells.size()));
}

double nrmse2(const CellSelection& sel, const Dataset& original_full, std::size_t column) {
    if (column >= original_full.cols()) throw Error(Errc::ShapeMismatch, "column out of range");
    if (original_full.is_categorical(column))
        throw Error(Errc::NonNumericColumn, "column '" + original_full.column(column).name + "' is categorical");
    const auto values = original_full.column_values(column);
    if (values.empty()) throw Error(Errc::EmptyInput, "original data is empty");
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    if (!(*hi > *lo)) throw Error(Errc::ConstantColumn, "column '" + original_full.column(column).name + "' is constant");
    return rmse(sel, column) / (*hi - *lo);
}

double categorical_accuracy(const CellSelection& sel, std::size_t column) {
    const auto& cells = sel.cells(column);
    if (cells.empty()) throw Error(Errc::EmptySelection, "no imputed cells in column " + std::to_string(column));
    std::size_t hits = 0;
    for (const auto& cell : cells) hits += cell.imputed == cell.original ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(cells.size());
}

double f1_macro(const std::vector<std::size_t>& truth, const std::vector<std::size_t>& predicted, std::size_t classes) {
    if (truth.empty()) throw Error(Errc::EmptyInput, "no labels");
    if (truth.size() != predicted.size()) throw Error(Errc::ShapeMismatch, "label vectors differ in length");
    if (classes == 0) throw Error(Errc::InvalidValue, "class count must be >= 1");
    std::vector<double> tp(classes, 0.0), fp(classes, 0.0), fn(classes, 0.0);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] >= classes || predicted[i] >= classes) throw Error(Errc::InvalidValue, "label outside 0..J-1");
        if (truth[i] == predicted[i]) {
            tp[truth[i]] += 1.0;
        } else {
            fp[predicted[i]] += 1.0;
            fn[truth[i]] += 1.0;
        }
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < classes; ++j) {
        const double precision = tp[j] + fp[j] > 0.0 ? tp[j] / (tp[j] + fp[j]) : 0.0;
        const double recall = tp[j] + fn[j] > 0.0 ? tp[j] / (tp[j] + fn[j]) : 0.0;
        if (precision + recall > 0.0) sum += 2.0 * precision * recall / (precision + recall);
    }
    return sum / static_cast<double>(classes);
}

MetricReport evaluate_imputation(const Dataset& original, const Dataset& imputed, const MissingMask& mask) {
    const auto sel = select_imputed_cells(original, imputed, mask);
    MetricReport report;
    double nsum = 0.0, asum = 0.0;
    std::size_t ncount = 0, acount = 0;
    for (const auto& [c, cells] : sel.columns) {
        ColumnMetric m{c, original.column(c).name, cells.size(), std::nullopt, std::nullopt};
        if (original.is_categorical(c)) {
            m.acc = categorical_accuracy(sel, c);
            asum += *m.acc;
            ++acount;
        } else {
            try {
                m.nrmse2 = nrmse2(sel, original, c);
                nsum += *m.nrmse2;
                ++ncount;
            } catch (const Error& e) {
                if (e.code() != Errc::ConstantColumn) throw;
                report.warnings.push_back("NRMSE2 undefined for constant column '" + m.name + "'");
            }
        }
        report.columns.push_back(std::move(m));
    }
    if (ncount) report.mean_nrmse2 = nsum / static_cast<double>(ncount);
    if (acount) report.mean_acc = asum / static_cast<double>(acount);
    return report;
}

std::string_view to_string(Factor f) {
    switch (f) {
    case Factor::Pattern: return "pattern";
    case Factor::Rate: return "rate";
    case Factor::Mechanism: return "mechanism";
    case Factor::Method: return "method";
    case Factor::Strategy: return "strategy";
    case Factor::StdDev: return "std_dev";
    case Factor::Seed: return "seed";
    case Factor::Model: return "model";
    }
    return "?";
}

std::string_view to_string(Metric m) {
    switch (m) {
    case Metric::Nrmse2: return "nrmse2";
    case Metric::Acc: return "acc";
    case Metric::F1: return "f1_macro";
    }
    return "?";
}

std::string factor_value(const CaseResult& r, Factor f) {
    const auto& sc = r.study_case;
    switch (f) {
    case Factor::Pattern: return sc.amputation ? std::string(to_string(sc.amputation->pattern)) : "none";
    case Factor::Rate: return sc.amputation ? format_double(sc.amputation->rate) : "0";
    case Factor::Mechanism: return sc.amputation ? std::string(to_string(sc.amputation->mechanism)) : "none";
    case Factor::Method: return sc.method_label();
    case Factor::Strategy: return std::string(to_string(sc.strategy));
    case Factor::StdDev: return format_double(sc.std_dev);
    case Factor::Seed: return std::to_string(sc.study_seed);
    case Factor::Model: return sc.model.label();
    }
    return "?";
}

std::optional<double> metric_value(const CaseResult& r, Metric m) {
    if (!r.error.empty()) return std::nullopt;
    switch (m) {
    case Metric::Nrmse2: return r.imputation ? r.imputation->mean_nrmse2 : std::nullopt;
    case Metric::Acc: return r.imputation ? r.imputation->mean_acc : std::nullopt;
    case Metric::F1: return r.f1_macro;
    }
    return std::nullopt;
}

std::vector<FactorSummary> aggregate_by_factor(const std::vector<CaseResult>& results, Factor key, Metric metric) {
    if (results.empty()) throw Error(Errc::EmptyInput, "no results to aggregate");
    std::vector<FactorSummary> out;
    std::map<std::string, std::size_t> slot;
    for (const auto& r : results) {
        auto v = metric_value(r, metric);
        if (!v) continue;
        auto name = factor_value(r, key);
        auto [it, inserted] = slot.try_emplace(name, out.size());
        if (inserted) out.push_back({key, name, 0.0, 0});
        auto& s = out[it->second];
        s.mean_metric += *v;
        ++s.n_cases;
    }
    for (auto& s : out) s.mean_metric /= static_cast<double>(s.n_cases);
    return out;
}

}  // namespace mvi
