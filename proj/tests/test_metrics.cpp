#include <doctest.h>

#include "mvi/error.hpp"
#include "mvi/metrics.hpp"
#include "mvi/results.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

using namespace mvi;

namespace {

Errc code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an mvi::Error");
    return Errc::InvalidValue;
}

Schema xyc() {
    return {{"x", ColumnKind::Numeric, false}, {"c", ColumnKind::Categorical, false}, {"class", ColumnKind::Categorical, true}};
}

// Per-class F1 straight from the definition, no confusion matrix.
double f1_oracle(const std::vector<std::size_t>& t, const std::vector<std::size_t>& p, std::size_t classes) {
    double total = 0.0;
    for (std::size_t j = 0; j < classes; ++j) {
        double tp = 0, fp = 0, fn = 0;
        for (std::size_t i = 0; i < t.size(); ++i) {
            if (p[i] == j && t[i] == j) tp += 1;
            if (p[i] == j && t[i] != j) fp += 1;
            if (p[i] != j && t[i] == j) fn += 1;
        }
        double precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
        double recall = tp + fn > 0 ? tp / (tp + fn) : 0.0;
        total += precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
    }
    return total / static_cast<double>(classes);
}

CaseResult result(double rate, MissingPattern p, std::optional<double> nrmse) {
    CaseResult r;
    AmputationSpec a;
    a.rate = rate;
    a.pattern = p;
    r.study_case.amputation = a;
    r.study_case.method = ImputationMethod::mean();
    if (nrmse) {
        MetricReport m;
        m.mean_nrmse2 = nrmse;
        r.imputation = m;
    }
    return r;
}

}  // namespace

TEST_CASE("nrmse2 examples") {
    Dataset original(xyc(), std::vector<double>{0, 0, 0, 10, 0, 0, 20, 0, 0});
    Dataset imputed = original;
    imputed.at(1, 0) = 12;
    MissingMask mask(3, 3);
    mask.set(1, 0);
    auto sel = select_imputed_cells(original, imputed, mask);
    CHECK(rmse(sel, 0) == doctest::Approx(2.0));
    CHECK(nrmse2(sel, original, 0) == doctest::Approx(0.1));

    imputed.at(1, 0) = 25;
    sel = select_imputed_cells(original, imputed, mask);
    CHECK(nrmse2(sel, original, 0) == doctest::Approx(0.75));

    imputed.at(1, 0) = 10;
    sel = select_imputed_cells(original, imputed, mask);
    CHECK(nrmse2(sel, original, 0) == 0.0);
}

TEST_CASE("nrmse2 errors") {
    Dataset constant(xyc(), std::vector<double>{5, 0, 0, 5, 1, 0});
    Dataset imputed = constant;
    imputed.at(0, 0) = 6;
    MissingMask mask(2, 3);
    mask.set(0, 0);
    auto sel = select_imputed_cells(constant, imputed, mask);
    CHECK(code_of([&] { nrmse2(sel, constant, 0); }) == Errc::ConstantColumn);
    CHECK(code_of([&] { nrmse2(sel, constant, 1); }) == Errc::NonNumericColumn);
    Dataset varied(xyc(), std::vector<double>{5, 0, 0, 7, 1, 0});
    CHECK(code_of([&] { nrmse2(CellSelection{}, varied, 0); }) == Errc::EmptySelection);
    CHECK(code_of([&] { categorical_accuracy(CellSelection{}, 1); }) == Errc::EmptySelection);
}

TEST_CASE("cell selection") {
    Dataset original(xyc(), std::vector<double>{1, 0, 0, 2, 1, 1, 3, 2, 0, 4, 0, 1});
    MissingMask empty(4, 3);
    CHECK(select_imputed_cells(original, original, empty).size() == 0);
    MissingMask mask(4, 3);
    mask.set(0, 0);
    mask.set(1, 0);
    mask.set(1, 1);
    mask.set(2, 1);
    mask.set(3, 1);
    auto sel = select_imputed_cells(original, original, mask);
    CHECK(sel.size() == 5);
    CHECK(sel.cells(0).size() == 2);
    CHECK(sel.cells(2).empty());
    CHECK(code_of([&] { select_imputed_cells(original, original, MissingMask(3, 3)); }) == Errc::ShapeMismatch);
}

TEST_CASE("accuracy counts matching codes") {
    Dataset original(xyc(), std::vector<double>{1, 0, 0, 2, 1, 0, 3, 2, 0, 4, 1, 0});
    Dataset imputed = original;
    imputed.at(2, 1) = 1;
    MissingMask mask(4, 3);
    for (std::size_t r = 0; r < 4; ++r) mask.set(r, 1);
    CHECK(categorical_accuracy(select_imputed_cells(original, original, mask), 1) == 1.0);
    CHECK(categorical_accuracy(select_imputed_cells(original, imputed, mask), 1) == 0.75);
}

TEST_CASE("mode imputation accuracy approaches the majority share") {
    const std::size_t n = 5000;
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(0, 1);
    Dataset original(xyc(), n);
    for (std::size_t r = 0; r < n; ++r) {
        const double draw = u(rng);
        original.at(r, 0) = draw;
        original.at(r, 1) = draw < 0.6 ? 0 : (draw < 0.8 ? 1 : 2);
        original.at(r, 2) = 0;
    }
    MissingMask mask(n, 3);
    Dataset imputed = original;
    for (std::size_t r = 0; r < n; ++r)
        if (u(rng) < 0.3) {
            mask.set(r, 1);
            imputed.at(r, 1) = 0;  // the mode of the observed cells
        }
    CHECK(std::abs(categorical_accuracy(select_imputed_cells(original, imputed, mask), 1) - 0.6) <= 0.05);
}

TEST_CASE("f1 macro examples") {
    CHECK(f1_macro({0, 1, 2, 1}, {0, 1, 2, 1}, 3) == 1.0);
    CHECK(f1_macro({0, 0, 1, 1}, {1, 1, 0, 0}, 2) == 0.0);
    CHECK(f1_macro({0, 0, 1, 1}, {0, 1, 1, 1}, 2) == doctest::Approx(0.7333333333333333));
    // A class absent from both lists still divides the mean.
    CHECK(f1_macro({0, 0}, {0, 0}, 2) == doctest::Approx(0.5));
    CHECK(code_of([] { f1_macro({}, {}, 2); }) == Errc::EmptyInput);
}

TEST_CASE("small instances agree with direct formulas") {
    std::mt19937_64 rng(123);
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t n = 1 + rng() % 8;
        const std::size_t classes = 2 + rng() % 3;
        std::vector<std::size_t> t(n), p(n);
        for (std::size_t i = 0; i < n; ++i) {
            t[i] = rng() % classes;
            p[i] = rng() % classes;
        }
        CHECK(f1_macro(t, p, classes) == f1_oracle(t, p, classes));

        Dataset original(xyc(), n + 1);
        Dataset imputed(xyc(), n + 1);
        MissingMask mask(n + 1, 3);
        original.at(n, 0) = -50.0;  // fixes the range to include a value outside the selection
        imputed.at(n, 0) = -50.0;
        double sq = 0.0, hits = 0.0, lo = -50.0, hi = -50.0;
        std::size_t selected = 0;
        for (std::size_t i = 0; i < n; ++i) {
            original.at(i, 0) = static_cast<double>(rng() % 100);
            imputed.at(i, 0) = static_cast<double>(rng() % 100);
            original.at(i, 1) = static_cast<double>(t[i]);
            imputed.at(i, 1) = static_cast<double>(p[i]);
            lo = std::min(lo, original.at(i, 0));
            hi = std::max(hi, original.at(i, 0));
            mask.set(i, 0);
            mask.set(i, 1);
            const double d = original.at(i, 0) - imputed.at(i, 0);
            sq += d * d;
            hits += t[i] == p[i] ? 1.0 : 0.0;
            ++selected;
        }
        auto sel = select_imputed_cells(original, imputed, mask);
        CHECK(nrmse2(sel, original, 0) == std::sqrt(sq / static_cast<double>(selected)) / (hi - lo));
        CHECK(categorical_accuracy(sel, 1) == hits / static_cast<double>(selected));
    }
}

TEST_CASE("f1 is invariant under relabeling and bounded") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t classes = 2 + rng() % 5, n = 1 + rng() % 40;
        std::vector<std::size_t> t(n), p(n), perm(classes);
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        std::shuffle(perm.begin(), perm.end(), rng);
        for (std::size_t i = 0; i < n; ++i) {
            t[i] = rng() % classes;
            p[i] = rng() % 3 ? t[i] : rng() % classes;
        }
        std::vector<std::size_t> tp(n), pp(n);
        for (std::size_t i = 0; i < n; ++i) {
            tp[i] = perm[t[i]];
            pp[i] = perm[p[i]];
        }
        const double f = f1_macro(t, p, classes);
        CHECK(f == doctest::Approx(f1_macro(tp, pp, classes)).epsilon(1e-12));
        CHECK(f >= 0.0);
        CHECK(f <= 1.0);
    }
}

TEST_CASE("nrmse2 is unchanged by affine maps") {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> z;
    const std::size_t n = 50;
    Dataset original(xyc(), n), imputed(xyc(), n);
    MissingMask mask(n, 3);
    for (std::size_t r = 0; r < n; ++r) {
        original.at(r, 0) = z(rng);
        imputed.at(r, 0) = r % 3 ? original.at(r, 0) : z(rng);
        if (r % 3 == 0) mask.set(r, 0);
    }
    const double base = nrmse2(select_imputed_cells(original, imputed, mask), original, 0);
    CHECK(base > 0.0);
    for (auto [a, b] : {std::pair{2.0, 3.0}, {0.01, -40.0}, {1e3, 1e4}}) {
        Dataset o2 = original, i2 = imputed;
        for (std::size_t r = 0; r < n; ++r) {
            o2.at(r, 0) = a * original.at(r, 0) + b;
            i2.at(r, 0) = a * imputed.at(r, 0) + b;
        }
        CHECK(std::abs(nrmse2(select_imputed_cells(o2, i2, mask), o2, 0) - base) <= 1e-9);
    }
}

TEST_CASE("evaluation report") {
    Schema s{{"x", ColumnKind::Numeric, false},
             {"k", ColumnKind::Numeric, false},
             {"c", ColumnKind::Categorical, false},
             {"class", ColumnKind::Categorical, true}};
    Dataset original(s, std::vector<double>{0, 5, 0, 0, 10, 5, 1, 1, 20, 5, 1, 0});
    Dataset imputed = original;
    imputed.at(1, 0) = 12;
    imputed.at(1, 1) = 6;
    imputed.at(2, 2) = 0;
    MissingMask mask(3, 4);
    mask.set(1, 0);
    mask.set(1, 1);
    mask.set(2, 2);
    auto report = evaluate_imputation(original, imputed, mask);
    REQUIRE(report.columns.size() == 3);
    CHECK(report.columns[0].nrmse2 == doctest::Approx(0.1));
    CHECK_FALSE(report.columns[1].nrmse2.has_value());  // column k is constant
    CHECK(report.columns[2].acc == 0.0);
    CHECK(report.mean_nrmse2 == doctest::Approx(0.1));
    CHECK(report.mean_acc == 0.0);
    CHECK(report.warnings.size() == 1);
}

TEST_CASE("aggregation by factor") {
    CHECK(code_of([] { aggregate_by_factor({}, Factor::Rate); }) == Errc::EmptyInput);

    auto one = aggregate_by_factor({result(0.5, MissingPattern::General, 0.2)}, Factor::Rate);
    REQUIRE(one.size() == 1);
    CHECK(one[0].mean_metric == 0.2);
    CHECK(one[0].n_cases == 1);

    auto two = aggregate_by_factor(
        {result(0.5, MissingPattern::General, 0.2), result(0.5, MissingPattern::Monotone, 0.4), result(0.1, MissingPattern::General, std::nullopt)},
        Factor::Rate);
    REQUIRE(two.size() == 1);
    CHECK(two[0].value == "0.5");
    CHECK(two[0].mean_metric == doctest::Approx(0.3));

    std::vector<CaseResult> grid;
    for (const auto& spec : build_study_matrix(kDefaultRates, 0)) {
        auto r = result(spec.rate, spec.pattern, spec.rate);
        r.study_case.amputation = spec;
        grid.push_back(r);
    }
    auto by_rate = aggregate_by_factor(grid, Factor::Rate);
    REQUIRE(by_rate.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(by_rate[i].n_cases == 12);
        CHECK(by_rate[i].mean_metric == doctest::Approx(kDefaultRates[i]));
    }
    CHECK(aggregate_by_factor(grid, Factor::Pattern).size() == 4);
    CHECK(aggregate_by_factor(grid, Factor::Mechanism).size() == 3);
}
