#include <doctest.h>

#include "mvi/error.hpp"
#include "mvi/synth.hpp"
#include "mvi/viz.hpp"

#include <algorithm>
#include <map>
#include <random>
#include <regex>

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

std::size_t occurrences(const std::string& text, const std::string& needle) {
    std::size_t n = 0;
    for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
    return n;
}

// age, weight, salary, color (nominal), class
Dataset people(std::size_t n, std::uint64_t seed) {
    Schema s{{"age", ColumnKind::Numeric, false},
             {"weight", ColumnKind::Numeric, false},
             {"salary", ColumnKind::Numeric, false},
             {"color", ColumnKind::Categorical, false},
             {"class", ColumnKind::Categorical, true}};
    Dataset ds(s, n);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0, 100);
    for (std::size_t r = 0; r < n; ++r) {
        ds.at(r, 0) = u(rng);
        ds.at(r, 1) = u(rng);
        ds.at(r, 2) = u(rng);
        ds.at(r, 3) = static_cast<double>(rng() % 3);
        ds.at(r, 4) = static_cast<double>(r % 4);
    }
    return ds;
}

// Rows 0,3,6,.. lose age and weight; rows of class 3 that are not already incomplete lose salary.
MissingMask joint_and_salary(const Dataset& ds) {
    MissingMask m(ds.rows(), ds.cols());
    for (std::size_t r = 0; r < ds.rows(); ++r) {
        if (r % 3 == 0) {
            m.set(r, 0);
            m.set(r, 1);
        } else if (ds.at(r, 4) == 3.0) {
            m.set(r, 2);
        }
    }
    return m;
}

double quantile_oracle(std::vector<double> v, double p) {
    std::sort(v.begin(), v.end());
    const double h = (static_cast<double>(v.size()) - 1.0) * p;
    const double below = std::floor(h);
    const auto i = static_cast<std::size_t>(below);
    if (i + 1 >= v.size()) return v.back();
    return v[i] + (h - below) * (v[i + 1] - v[i]);
}

}  // namespace

TEST_CASE("plot kind names") {
    CHECK(parse_plot_kind("matrix") == PlotKind::Matrix);
    CHECK(to_string(PlotKind::ParallelBox) == "parallelbox");
    CHECK(code_of([] { parse_plot_kind("scatter"); }) == Errc::InvalidValue);
}

TEST_CASE("aggregation of an empty mask") {
    auto ds = people(20, 1);
    MissingMask none(20, 5);
    auto agg = aggregation_data(ds, none);
    REQUIRE(agg.signatures.size() == 1);
    CHECK(agg.signatures[0].frequency == 1.0);
    for (double r : agg.column_rates) CHECK(r == 0.0);
    const auto svg = aggregation_plot(ds, none);
    CHECK(occurrences(svg, "<g class=\"signature\"") == 1);
    CHECK(code_of([&] { aggregation_plot(ds, MissingMask(19, 5)); }) == Errc::ShapeMismatch);
}

TEST_CASE("aggregation bar equals the column rate") {
    auto ds = people(10, 2);
    MissingMask m(10, 5);
    for (std::size_t r : {1u, 4u, 7u}) m.set(r, 2);
    auto agg = aggregation_data(ds, m);
    CHECK(agg.column_rates[2] == doctest::Approx(0.3));
    CHECK(aggregation_plot(ds, m).find("data-column=\"salary\" data-rate=\"0.3\"") != std::string::npos);
}

TEST_CASE("joint and single missingness give three signatures") {
    auto ds = people(120, 3);
    auto mask = joint_and_salary(ds);
    auto agg = aggregation_data(ds, mask);
    REQUIRE(agg.signatures.size() == 3);
    double total = 0.0;
    for (const auto& s : agg.signatures) total += s.frequency;
    CHECK(std::abs(total - 1.0) <= 1e-9);
    for (std::size_t i = 1; i < agg.signatures.size(); ++i) CHECK(agg.signatures[i].count <= agg.signatures[i - 1].count);
    CHECK(agg.signatures[0].missing == std::vector<bool>(5, false));
    CHECK(agg.signatures[1].missing == std::vector<bool>{true, true, false, false, false});
    CHECK(agg.signatures[2].missing == std::vector<bool>{false, false, true, false, false});
    CHECK(occurrences(aggregation_plot(ds, mask), "<g class=\"signature\"") == 3);
}

TEST_CASE("matrix plot cells") {
    auto ds = people(30, 4);
    auto mask = joint_and_salary(ds);
    PlotSpec spec;
    spec.kind = PlotKind::Matrix;
    spec.ordinal_columns = {"class"};
    const auto cols = matrix_columns(ds, spec);
    CHECK(cols == std::vector<std::size_t>{0, 1, 2, 4});
    const auto svg = matrix_plot(ds, mask, spec);
    CHECK(occurrences(svg, "<rect class=\"cell") == 30 * cols.size());
    std::size_t masked = 0;
    for (std::size_t c : cols) masked += mask.column_count(c);
    CHECK(occurrences(svg, "<rect class=\"cell missing\"") == masked);
    CHECK(occurrences(svg, "fill=\"#d62728\"") == masked);
    for (std::size_t r = 0; r < 30; ++r)
        for (std::size_t c : cols)
            if (mask.at(r, c))
                CHECK(svg.find("class=\"cell missing\" data-row=\"" + std::to_string(r) + "\" data-col=\"" +
                               std::to_string(c) + "\"") != std::string::npos);

    MissingMask none(30, 5);
    CHECK(occurrences(matrix_plot(ds, none, spec), "#d62728") == 0);

    spec.black_and_white = true;
    const auto bw = matrix_plot(ds, mask, spec);
    CHECK(occurrences(bw, "#d62728") == 0);
    CHECK(occurrences(bw, "fill=\"#141414\"") == masked);
}

TEST_CASE("sorting only permutes rows") {
    auto ds = people(40, 5);
    auto mask = joint_and_salary(ds);
    PlotSpec spec;
    spec.ordinal_columns = {"class"};
    auto colors = [](const std::string& svg) {
        std::map<std::string, std::size_t> hist;
        std::regex fill("class=\"cell[^\"]*\"[^>]*fill=\"(#[0-9a-f]{6})\"");
        for (auto it = std::sregex_iterator(svg.begin(), svg.end(), fill); it != std::sregex_iterator(); ++it)
            ++hist[(*it)[1]];
        return hist;
    };
    const auto base = colors(matrix_plot(ds, mask, spec));
    for (const char* key : {"age", "salary", "class"}) {
        spec.sort_by = key;
        CHECK(colors(matrix_plot(ds, mask, spec)) == base);
        const auto order = matrix_row_order(ds, spec);
        const std::size_t c = *ds.find_column(key);
        for (std::size_t i = 1; i < order.size(); ++i) CHECK(ds.at(order[i - 1], c) >= ds.at(order[i], c));
    }
    spec.sort_descending = false;
    spec.sort_by = "age";
    const auto asc = matrix_row_order(ds, spec);
    for (std::size_t i = 1; i < asc.size(); ++i) CHECK(ds.at(asc[i - 1], 0) <= ds.at(asc[i], 0));
}

TEST_CASE("sorting by the driver concentrates the missing salaries") {
    auto ds = people(200, 6);
    auto mask = joint_and_salary(ds);
    PlotSpec spec;
    spec.sort_by = "class";
    spec.ordinal_columns = {"class"};
    const auto order = matrix_row_order(ds, spec);
    std::size_t top = 0, total = mask.column_count(2);
    for (std::size_t i = 0; i < order.size() / 2; ++i) top += mask.at(order[i], 2) ? 1 : 0;
    CHECK(top == total);
}

TEST_CASE("matrix plot errors") {
    auto ds = people(10, 7);
    MissingMask m(10, 5);
    PlotSpec spec;
    spec.columns = {"color"};
    CHECK(code_of([&] { matrix_plot(ds, m, spec); }) == Errc::NominalColumn);
    spec.columns = {};
    spec.sort_by = "height";
    CHECK(code_of([&] { matrix_plot(ds, m, spec); }) == Errc::UnknownSortColumn);
}

TEST_CASE("box statistics") {
    auto one = box_stats({4.0});
    CHECK(one.n == 1);
    for (double v : {one.min, one.q1, one.median, one.q3, one.max, one.whisker_low, one.whisker_high}) CHECK(v == 4.0);

    auto b = box_stats({1, 2, 3, 4, 100});
    CHECK(b.q1 == 2.0);
    CHECK(b.median == 3.0);
    CHECK(b.q3 == 4.0);
    CHECK(b.whisker_low == 1.0);
    CHECK(b.whisker_high == 4.0);
    CHECK(b.outliers == std::vector<double>{100.0});

    auto even = box_stats({1, 2, 3, 4});
    CHECK(even.q1 == 1.75);
    CHECK(even.median == 2.5);
    CHECK(even.q3 == 3.25);

    std::mt19937_64 rng(8);
    std::normal_distribution<double> z(0, 3);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> v(1 + rng() % 30);
        for (auto& x : v) x = std::round(z(rng) * 4.0) / 4.0;
        auto s = box_stats(v);
        CHECK(s.q1 == quantile_oracle(v, 0.25));
        CHECK(s.median == quantile_oracle(v, 0.5));
        CHECK(s.q3 == quantile_oracle(v, 0.75));
        CHECK(s.min == *std::min_element(v.begin(), v.end()));
        CHECK(s.max == *std::max_element(v.begin(), v.end()));
        const double iqr = s.q3 - s.q1;
        double lo = s.q1, hi = s.q3;
        std::size_t outside = 0;
        for (double x : v) {
            if (x < s.q1 - 1.5 * iqr || x > s.q3 + 1.5 * iqr) {
                ++outside;
            } else {
                lo = std::min(lo, x);
                hi = std::max(hi, x);
            }
        }
        CHECK(s.whisker_low == lo);
        CHECK(s.whisker_high == hi);
        CHECK(s.outliers.size() == outside);
    }
}

TEST_CASE("parallel boxplot groups") {
    auto ds = people(60, 9);
    MissingMask none(60, 5);
    auto only = parallel_box_groups(ds, none, "age");
    REQUIRE(only.size() == 1);
    CHECK(only[0].label == "all");
    CHECK(only[0].stats.n == 60);
    CHECK(occurrences(parallel_boxplot(ds, none, "age"), "<g class=\"box\"") == 1);

    auto mask = joint_and_salary(ds);
    PlotSpec spec;
    spec.ordinal_columns = {"class"};
    auto groups = parallel_box_groups(ds, mask, "class", spec);
    REQUIRE(groups.size() == 7);
    CHECK(groups[5].label == "salary missing");
    CHECK(groups[6].label == "salary observed");
    CHECK(groups[5].stats.median > groups[6].stats.median);

    CHECK(code_of([&] { parallel_box_groups(ds, mask, "color"); }) == Errc::NonNumericColumn);
    CHECK(code_of([&] { parallel_box_groups(ds, mask, "class"); }) == Errc::NonNumericColumn);
    CHECK(code_of([&] { parallel_box_groups(ds, mask, "height"); }) == Errc::InvalidValue);
}

TEST_CASE("render dispatch") {
    auto ds = people(15, 10);
    auto mask = joint_and_salary(ds);
    PlotSpec spec;
    spec.kind = PlotKind::ParallelBox;
    CHECK(render_plot(ds, mask, spec, "salary").find("data-kind=\"parallelbox\"") != std::string::npos);
    spec.kind = PlotKind::Aggregation;
    CHECK(render_plot(ds, mask, spec) == aggregation_plot(ds, mask, spec));
}
