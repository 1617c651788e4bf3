#include <doctest.h>

#include "mvi/error.hpp"
#include "mvi/metrics.hpp"
#include "mvi/mlp.hpp"
#include "mvi/som.hpp"
#include "mvi/synth.hpp"

#include <cmath>
#include <numeric>
#include <random>
#include <set>

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

Matrix uniform(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = u(rng);
    return m;
}

// Max relative difference between the analytic gradient and central differences.
double gradient_error(const MlpModel& model, const Matrix& x, const Matrix& y) {
    const Vector analytic = flatten_gradient(mlp_gradient(model, x, y));
    const Vector theta = flatten_parameters(model);
    const double eps = 1e-4;
    MlpModel probe = model;
    double worst = 0.0;
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
        Vector t = theta;
        t[i] += eps;
        assign_parameters(probe, t);
        const double up = mlp_loss(probe, x, y);
        t[i] -= 2 * eps;
        assign_parameters(probe, t);
        const double down = mlp_loss(probe, x, y);
        const double numeric = (up - down) / (2 * eps);
        const double scale = std::max({std::abs(numeric), std::abs(analytic[i]), 1e-6});
        worst = std::max(worst, std::abs(numeric - analytic[i]) / scale);
    }
    return worst;
}

// Exact floor(sqrt(5 sqrt(n))): the largest L with L^4 <= 25 n.
std::size_t edge_oracle(std::size_t n) {
    std::size_t l = 0;
    const unsigned __int128 limit = static_cast<unsigned __int128>(25) * n;
    while (static_cast<unsigned __int128>(l + 1) * (l + 1) * (l + 1) * (l + 1) <= limit) ++l;
    return l;
}

}  // namespace

TEST_CASE("topology enumeration for 6 inputs and 5 classes") {
    auto topos = enumerate_mlp_topologies(6, 5);
    REQUIRE(topos.size() == 9);
    std::set<std::size_t> depths;
    for (const auto& t : topos) depths.insert(t.hidden.size());
    CHECK(depths == std::set<std::size_t>{2, 3, 4});
    for (const auto& t : topos) {
        if (t.hidden.size() == 2 && t.budget_class == SizeClass::Medium) {
            CHECK(t.hidden[0] + t.hidden[1] == 11);
            CHECK(t.hidden[0] >= t.hidden[1]);
        }
    }
    CHECK(hidden_budget(SizeClass::Minimum, 6, 5) == 6);
    CHECK(hidden_budget(SizeClass::Medium, 6, 5) == 11);
    CHECK(hidden_budget(SizeClass::Maximum, 6, 5) == 17);
}

TEST_CASE("total layer semantics drop two layers") {
    auto topos = enumerate_mlp_topologies(6, 5, LayerCountSemantics::Total);
    std::set<std::size_t> depths;
    for (const auto& t : topos) depths.insert(t.hidden.size());
    CHECK(depths == std::set<std::size_t>{0, 1, 2});
}

TEST_CASE("budget too small") {
    CHECK(code_of([] { taper_layers(2, 4); }) == Errc::BudgetTooSmall);
    CHECK(code_of([] { enumerate_mlp_topologies(2, 2); }) == Errc::BudgetTooSmall);
}

TEST_CASE("topology invariants over a range of sizes") {
    for (std::size_t in = 4; in <= 64; ++in) {
        for (std::size_t out = 2; out <= 32; out += 3) {
            for (const auto& t : enumerate_mlp_topologies(in, out)) {
                const std::size_t budget = hidden_budget(t.budget_class, in, out);
                CHECK(std::accumulate(t.hidden.begin(), t.hidden.end(), std::size_t{0}) == budget);
                for (std::size_t i = 0; i < t.hidden.size(); ++i) {
                    CHECK(t.hidden[i] >= 1);
                    if (i > 0) CHECK(t.hidden[i] <= t.hidden[i - 1]);
                }
            }
        }
    }
    for (std::size_t budget = 1; budget <= 200; ++budget)
        for (std::size_t depth = 1; depth <= std::min<std::size_t>(budget, 6); ++depth) {
            auto layers = taper_layers(budget, depth);
            CHECK(layers.size() == depth);
            CHECK(std::accumulate(layers.begin(), layers.end(), std::size_t{0}) == budget);
        }
}

TEST_CASE("analytic gradients match finite differences") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 12; ++trial) {
        MlpTopology t;
        t.input_size = 2 + rng() % 5;
        t.output_size = 1 + rng() % 4;
        const std::size_t depth = 1 + rng() % 3;
        for (std::size_t d = 0; d < depth; ++d) t.hidden.push_back(2 + rng() % 6);
        const Task task = trial % 2 ? Task::Classification : Task::Regression;
        if (task == Task::Classification && t.output_size < 2) t.output_size = 2;
        const Matrix x = uniform(5, t.input_size, rng());
        Matrix y;
        if (task == Task::Classification) {
            std::vector<std::size_t> labels(5);
            for (auto& l : labels) l = rng() % t.output_size;
            y = one_hot(labels, t.output_size);
        } else {
            y = uniform(5, t.output_size, rng());
        }
        auto model = init_mlp(t, task, rng());
        CAPTURE(t.label());
        CHECK(gradient_error(model, x, y) < 1e-3);
    }
}

TEST_CASE("xor is learned") {
    Matrix x(4, 2);
    x << 0, 0, 0, 1, 1, 0, 1, 1;
    const std::vector<std::size_t> labels{0, 1, 1, 0};
    MlpTopology t{2, {8, 4}, 2, SizeClass::Medium};
    TrainParams p;
    p.epochs = 2000;
    p.batch_size = 4;
    p.learning_rate = 0.1;
    p.seed = 3;
    auto model = train_mlp(t, Task::Classification, x, one_hot(labels, 2), p);
    CHECK(predict_classes(model, x) == labels);
}

TEST_CASE("zero learning rate leaves the weights unchanged") {
    const Matrix x = uniform(20, 3, 1);
    const Matrix y = uniform(20, 1, 2);
    MlpTopology t{3, {4, 2}, 1, SizeClass::Medium};
    TrainParams p;
    p.epochs = 5;
    p.learning_rate = 0.0;
    p.seed = 8;
    auto trained = train_mlp(t, Task::Regression, x, y, p);
    auto initial = init_mlp(t, Task::Regression, 8, x);
    CHECK(flatten_parameters(trained) == flatten_parameters(initial));
}

TEST_CASE("training is deterministic and reduces the loss") {
    const Matrix x = uniform(200, 3, 4);
    Matrix y(200, 1);
    for (Eigen::Index r = 0; r < 200; ++r) y(r, 0) = x(r, 0) * 0.5 + x(r, 1) * x(r, 2);
    MlpTopology t{3, {8, 4}, 1, SizeClass::Medium};
    TrainParams p;
    p.epochs = 50;
    p.seed = 12;
    auto a = train_mlp(t, Task::Regression, x, y, p);
    auto b = train_mlp(t, Task::Regression, x, y, p);
    CHECK(flatten_parameters(a) == flatten_parameters(b));
    CHECK(a.loss_history.size() == 50);
    CHECK(a.loss_history.back() < a.loss_history.front());
    CHECK(mlp_loss(a, x, y) < mlp_loss(init_mlp(t, Task::Regression, 12, x), x, y));
}

TEST_CASE("early stopping keeps the best validation weights") {
    const Matrix x = uniform(100, 2, 5);
    Matrix y(100, 1);
    for (Eigen::Index r = 0; r < 100; ++r) y(r, 0) = x(r, 0) + x(r, 1);
    MlpTopology t{2, {6, 3}, 1, SizeClass::Medium};
    TrainParams p;
    p.epochs = 300;
    p.seed = 1;
    ValidationSet v{uniform(20, 2, 6), Matrix::Zero(20, 1), 5};
    for (Eigen::Index r = 0; r < 20; ++r) v.y(r, 0) = v.x(r, 0) + v.x(r, 1);
    auto model = train_mlp(t, Task::Regression, x, y, p, v);
    CHECK(model.loss_history.size() <= 300);
    CHECK(mlp_loss(model, v.x, v.y) <= mlp_loss(init_mlp(t, Task::Regression, 1, x), v.x, v.y));
}

TEST_CASE("prediction basics") {
    MlpTopology t{3, {4}, 2, SizeClass::Medium};
    auto zero = init_mlp(t, Task::Regression, 0);
    assign_parameters(zero, Vector::Zero(flatten_parameters(zero).size()));
    const Matrix x = uniform(6, 3, 7);
    CHECK(predict_mlp(zero, x).isZero());

    auto model = init_mlp(t, Task::Classification, 4);
    const Matrix batch = predict_mlp(model, x);
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const Matrix single = predict_mlp(model, x.row(r));
        CHECK((single.row(0) - batch.row(r)).cwiseAbs().maxCoeff() <= 1e-12);
        CHECK(std::abs(batch.row(r).sum() - 1.0) <= 1e-9);
    }
    CHECK(code_of([&] { predict_mlp(model, uniform(2, 4, 0)); }) == Errc::ShapeMismatch);
    CHECK(code_of([&] { train_mlp(t, Task::Regression, x, Matrix::Zero(5, 2), TrainParams{}); }) == Errc::ShapeMismatch);
}

TEST_CASE("checkpoint round trip") {
    MlpTopology t{3, {5, 2}, 4, SizeClass::Maximum};
    auto model = init_mlp(t, Task::Classification, 17);
    auto back = load_mlp_json(save_mlp_json(model));
    CHECK(back.topology == model.topology);
    CHECK(back.task == model.task);
    CHECK(flatten_parameters(back) == flatten_parameters(model));
    CHECK(code_of([] { load_mlp_json("{\"format\": 7}"); }) == Errc::ParseError);
    CHECK(code_of([] { load_mlp_json("not json"); }) == Errc::ParseError);
}

TEST_CASE("som edge lengths") {
    CHECK(som_dimensions(10000, SizeClass::Medium) == 22);
    CHECK(som_dimensions(10000, SizeClass::Minimum) == 5);
    CHECK(som_dimensions(10000, SizeClass::Maximum) == 88);
    CHECK(som_dimensions(1, SizeClass::Medium) == 2);
    CHECK(som_dimensions(1, SizeClass::Minimum) == 1);
    for (double e = 0.0; e <= 7.0; e += 0.05) {
        const auto n = static_cast<std::size_t>(std::llround(std::pow(10.0, e)));
        for (std::size_t m : {n - (n > 1 ? 1 : 0), n, n + 1}) CHECK(som_base_edge(m) == edge_oracle(m));
    }
}

TEST_CASE("a single node converges to the mean") {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> z(0.5, 0.1);
    Matrix x(400, 3);
    for (Eigen::Index r = 0; r < x.rows(); ++r)
        for (Eigen::Index c = 0; c < 3; ++c) x(r, c) = z(rng);
    TrainParams p{50, 1, 0.5, 0};
    auto som = train_som({3, 1, SizeClass::Minimum}, x, p);
    const Vector mean = x.colwise().mean();
    CHECK((som.codebook.row(0).transpose() - mean).cwiseAbs().maxCoeff() <= 1e-2);
}

TEST_CASE("som quantization error falls and training is deterministic") {
    auto ds = generate_blobs({500, 3, 4, 0.5, {{0, 1}, {0, 1}, {0, 1}}, 3});
    Matrix x(500, 3);
    for (std::size_t r = 0; r < 500; ++r)
        for (std::size_t c = 0; c < 3; ++c) x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = ds.at(r, c);
    TrainParams p{10, 1, 0.5, 4};
    auto a = train_som({3, 4, SizeClass::Medium}, x, p);
    auto b = train_som({3, 4, SizeClass::Medium}, x, p);
    CHECK(a.codebook == b.codebook);
    CHECK(a.quantization_errors.back() <= a.quantization_errors.front());
    CHECK(code_of([&] { train_som({3, 4, SizeClass::Medium}, Matrix(0, 3), p); }) == Errc::EmptyInput);
}

TEST_CASE("two clusters use two nodes") {
    Matrix x(200, 2);
    std::mt19937_64 rng(1);
    std::normal_distribution<double> z(0.0, 0.02);
    for (Eigen::Index r = 0; r < 200; ++r) {
        const double base = r % 2 ? 0.9 : 0.1;
        x(r, 0) = base + z(rng);
        x(r, 1) = base + z(rng);
    }
    auto som = train_som({2, 2, SizeClass::Medium}, x, TrainParams{20, 1, 0.5, 0});
    std::set<std::size_t> used;
    for (Eigen::Index r = 0; r < x.rows(); ++r) used.insert(best_matching_unit(som, x.row(r).transpose()));
    CHECK(used.size() >= 2);
}

TEST_CASE("som classification") {
    Matrix x(6, 2);
    x << 0.1, 0.1, 0.12, 0.1, 0.9, 0.9, 0.88, 0.9, 0.1, 0.9, 0.12, 0.9;
    const std::vector<std::size_t> labels{0, 0, 1, 1, 2, 2};
    auto som = train_som({2, 3, SizeClass::Medium}, x, TrainParams{30, 1, 0.5, 2});
    SomModel untrained;
    CHECK(code_of([&] { som_predict(untrained, x); }) == Errc::UntrainedModel);
    auto pred = som_classify(som, x, labels, x);
    for (std::size_t i = 0; i < 6; ++i) {
        label_som(som, x, labels);
        CHECK(pred[i] == som_predict(som, x.row(static_cast<Eigen::Index>(i)))[0]);
    }
    auto single = som_classify(som, x, std::vector<std::size_t>(6, 4), uniform(10, 2, 3));
    for (auto l : single) CHECK(l == 4);
}

TEST_CASE("som separates well separated blobs") {
    const std::size_t n = 1000;
    auto ds = generate_blobs({n, 4, 5, 0.3, {}, 9});
    auto norm = normalize(ds);
    Matrix x(n, 4);
    std::vector<std::size_t> labels(n);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < 4; ++c)
            x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = norm.data.at(r, c);
        labels[r] = static_cast<std::size_t>(ds.at(r, 4));
    }
    const std::size_t edge = som_dimensions(n, SizeClass::Medium);
    auto som = train_som({4, edge, SizeClass::Medium}, x, TrainParams{10, 1, 0.5, 1});
    auto pred = som_classify(som, x, labels, x);
    CHECK(f1_macro(labels, pred, 5) >= 0.9);
}
