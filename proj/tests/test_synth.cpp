#include <doctest.h>

#include "mvi/error.hpp"
#include "mvi/synth.hpp"

#include <cmath>
#include <map>
#include <set>

using namespace mvi;

TEST_CASE("two-feature blobs with five clusters") {
    BlobSpec spec{200, 2, 5, 1.0, {}, 4};
    auto ds = generate_blobs(spec);
    CHECK(ds.rows() == 200);
    CHECK(ds.cols() == 3);
    CHECK(ds.column(2).name == "class");
    CHECK(ds.column(2).is_target);
    std::set<double> codes;
    for (std::size_t r = 0; r < ds.rows(); ++r) codes.insert(ds.at(r, 2));
    CHECK(codes == std::set<double>{0, 1, 2, 3, 4});
}

TEST_CASE("generation is deterministic per seed") {
    BlobSpec spec{300, 4, 3, 0.7, {}, 21};
    CHECK(identical(generate_blobs(spec), generate_blobs(spec)));
    BlobSpec other = spec;
    other.seed = 22;
    CHECK_FALSE(identical(generate_blobs(spec), generate_blobs(other)));
}

TEST_CASE("invalid specs") {
    auto bad = [](BlobSpec s) {
        try {
            generate_blobs(s);
        } catch (const Error& e) {
            return e.code() == Errc::InvalidSpec;
        }
        return false;
    };
    CHECK(bad({100, 2, 0, 1.0, {}, 0}));
    CHECK(bad({100, 2, 3, 0.0, {}, 0}));
    CHECK(bad({100, 2, 3, -1.0, {}, 0}));
    CHECK(bad({100, 2, 3, 1.0, {{5.0, 5.0}, {0.0, 1.0}}, 0}));
}

TEST_CASE("tiny dispersion collapses rows onto their centers") {
    const double sd = 1e-6;
    auto g = generate_blobs_with_centers({500, 3, 4, sd, {}, 8});
    for (std::size_t r = 0; r < g.data.rows(); ++r) {
        auto k = static_cast<std::size_t>(g.data.at(r, 3));
        for (std::size_t c = 0; c < 3; ++c) CHECK(std::abs(g.data.at(r, c) - g.centers[k * 3 + c]) <= 6.0 * sd);
    }
}

TEST_CASE("cluster means converge to their centers") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const std::size_t k = 4, per = 600;
        const double sd = 1.5;
        auto g = generate_blobs_with_centers({k * per, 3, k, sd, {}, seed});
        std::vector<double> sum(k * 3, 0.0);
        std::vector<std::size_t> count(k, 0);
        for (std::size_t r = 0; r < g.data.rows(); ++r) {
            auto cl = static_cast<std::size_t>(g.data.at(r, 3));
            ++count[cl];
            for (std::size_t c = 0; c < 3; ++c) sum[cl * 3 + c] += g.data.at(r, c);
        }
        for (std::size_t cl = 0; cl < k; ++cl) {
            CHECK(count[cl] == per);
            for (std::size_t c = 0; c < 3; ++c)
                CHECK(std::abs(sum[cl * 3 + c] / static_cast<double>(per) - g.centers[cl * 3 + c]) <=
                      5.0 * sd / std::sqrt(static_cast<double>(per)));
        }
    }
}

TEST_CASE("classes are balanced within one row") {
    auto ds = generate_blobs({1003, 2, 5, 1.0, {}, 0});
    std::map<double, std::size_t> counts;
    for (std::size_t r = 0; r < ds.rows(); ++r) ++counts[ds.at(r, 2)];
    std::size_t lo = ds.rows(), hi = 0;
    for (auto& [c, n] : counts) {
        lo = std::min(lo, n);
        hi = std::max(hi, n);
    }
    CHECK(hi - lo <= 1);
}

TEST_CASE("within-cluster variance grows with std_dev") {
    double previous = -1.0;
    for (double sd : {0.25, 0.5, 1.0, 2.0, 4.0}) {
        auto g = generate_blobs_with_centers({1000, 2, 5, sd, {}, 13});
        double ss = 0.0;
        for (std::size_t r = 0; r < g.data.rows(); ++r) {
            auto cl = static_cast<std::size_t>(g.data.at(r, 2));
            for (std::size_t c = 0; c < 2; ++c) {
                double d = g.data.at(r, c) - g.centers[cl * 2 + c];
                ss += d * d;
            }
        }
        CHECK(ss > previous);
        previous = ss;
    }
}

TEST_CASE("centers respect value ranges") {
    BlobSpec spec{100, 2, 6, 0.5, {{0.0, 1.0}, {100.0, 200.0}}, 3};
    auto g = generate_blobs_with_centers(spec);
    for (std::size_t k = 0; k < 6; ++k) {
        CHECK(g.centers[k * 2] >= 0.0);
        CHECK(g.centers[k * 2] <= 1.0);
        CHECK(g.centers[k * 2 + 1] >= 100.0);
        CHECK(g.centers[k * 2 + 1] <= 200.0);
    }
}

TEST_CASE("person preset columns") {
    auto g = generate_person_pseudo(400, 5, 1.0, 2);
    std::vector<std::string> names;
    for (const auto& c : g.data.schema()) names.push_back(c.name);
    CHECK(names == std::vector<std::string>{"id", "age", "weight", "salary", "shoesize", "gender", "class"});
    CHECK(g.data.column(5).kind == ColumnKind::Categorical);
    CHECK_FALSE(g.data.column(5).is_target);
    CHECK(g.data.column(6).is_target);
    CHECK_FALSE(g.data.has_missing());
    for (std::size_t r = 0; r < g.data.rows(); ++r) {
        CHECK(g.data.at(r, 1) == std::round(g.data.at(r, 1)));
        CHECK(g.data.at(r, 5) >= 0.0);
        CHECK(g.data.at(r, 5) <= 1.0);
    }
}
