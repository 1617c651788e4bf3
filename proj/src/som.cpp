#include "mvi/som.hpp"

#include "mvi/error.hpp"
#include "mvi/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>

namespace mvi {

std::size_t som_base_edge(std::size_t n) {
    if (n == 0) throw Error(Errc::InvalidValue, "som_dimensions needs n >= 1");
    // L is the largest integer with L^4 <= 25 n; fix up the floating estimate exactly.
    auto fits = [n](std::size_t l) {
        const unsigned __int128 p = static_cast<unsigned __int128>(l) * l * l * l;
        return p <= static_cast<unsigned __int128>(n) * 25u;
    };
    auto l = static_cast<std::size_t>(std::floor(std::sqrt(5.0 * std::sqrt(static_cast<double>(n)))));
    while (l > 0 && !fits(l)) --l;
    while (fits(l + 1)) ++l;
    return l;
}

std::size_t som_dimensions(std::size_t n, SizeClass size_class) {
    const std::size_t l = som_base_edge(n);
    switch (size_class) {
    case SizeClass::Minimum: return std::max<std::size_t>(1, l / 4);
    case SizeClass::Medium: return l;
    case SizeClass::Maximum: return 4 * l;
    }
    return l;
}

std::size_t best_matching_unit(const SomModel& model, const Eigen::Ref<const Vector>& sample) {
    Eigen::Index best = 0;
    (model.codebook.rowwise() - sample.transpose()).rowwise().squaredNorm().minCoeff(&best);
    return static_cast<std::size_t>(best);
}

double quantization_error(const SomModel& model, const Matrix& x) {
    if (x.rows() == 0) return 0.0;
    double sum = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        Vector s = x.row(i).transpose();
        sum += (model.codebook.row(static_cast<Eigen::Index>(best_matching_unit(model, s))).transpose() - s).norm();
    }
    return sum / static_cast<double>(x.rows());
}

SomModel train_som(const SomTopology& topology, const Matrix& x, const TrainParams& params) {
    if (x.rows() == 0) throw Error(Errc::EmptyInput, "SOM training data is empty");
    if (topology.edge_length == 0) throw Error(Errc::InvalidValue, "edge length must be >= 1");
    if (static_cast<std::size_t>(x.cols()) != topology.input_dim)
        throw Error(Errc::ShapeMismatch, "SOM input dimension mismatch");
    validate(params);

    const auto edge = static_cast<long>(topology.edge_length);
    const auto nodes = static_cast<Eigen::Index>(edge * edge);
    SomModel model;
    model.topology = topology;
    model.codebook.resize(nodes, x.cols());

    Rng rng(derive_seed(params.seed, {0x50e}));
    std::uniform_int_distribution<Eigen::Index> pick(0, x.rows() - 1);
    for (Eigen::Index k = 0; k < nodes; ++k) model.codebook.row(k) = x.row(pick(rng));

    const auto n = static_cast<std::size_t>(x.rows());
    const double total_steps = static_cast<double>(params.epochs * n);
    const double radius0 = std::max(1.0, static_cast<double>(edge) / 2.0);
    const double lr0 = params.learning_rate;
    std::vector<Eigen::Index> order(n);
    std::iota(order.begin(), order.end(), Eigen::Index{0});

    std::size_t step = 0;
    for (std::size_t epoch = 0; epoch < params.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (Eigen::Index idx : order) {
            const double t = total_steps > 1 ? static_cast<double>(step) / (total_steps - 1.0) : 1.0;
            const double radius = radius0 + (1.0 - radius0) * t;
            const double lr = lr0 + (0.01 - lr0) * t;
            const Vector sample = x.row(idx).transpose();
            const auto bmu = static_cast<long>(best_matching_unit(model, sample));
            const long br = bmu / edge, bc = bmu % edge;
            const long reach = static_cast<long>(std::ceil(3.0 * radius));
            const double inv2r2 = 1.0 / (2.0 * radius * radius);
            for (long r = std::max(0L, br - reach); r <= std::min(edge - 1, br + reach); ++r) {
                for (long c = std::max(0L, bc - reach); c <= std::min(edge - 1, bc + reach); ++c) {
                    const double d2 = static_cast<double>((r - br) * (r - br) + (c - bc) * (c - bc));
                    const double h = std::exp(-d2 * inv2r2);
                    auto row = model.codebook.row(r * edge + c);
                    row += lr * h * (sample.transpose() - row);
                }
            }
            ++step;
        }
        model.quantization_errors.push_back(quantization_error(model, x));
    }
    model.trained = true;
    return model;
}

void label_som(SomModel& model, const Matrix& x, const std::vector<std::size_t>& labels) {
    if (!model.trained) throw Error(Errc::UntrainedModel, "SOM is not trained");
    if (labels.size() != static_cast<std::size_t>(x.rows())) throw Error(Errc::ShapeMismatch, "one label per row expected");
    if (labels.empty()) throw Error(Errc::EmptyInput, "no labeled rows");

    const auto nodes = static_cast<std::size_t>(model.codebook.rows());
    std::vector<std::map<std::size_t, std::size_t>> votes(nodes);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        Vector s = x.row(i).transpose();
        ++votes[best_matching_unit(model, s)][labels[static_cast<std::size_t>(i)]];
    }
    model.node_labels.assign(nodes, -1);
    for (std::size_t k = 0; k < nodes; ++k) {
        std::size_t best_count = 0;
        for (const auto& [label, count] : votes[k])  // ascending label order: first maximum wins ties
            if (count > best_count) {
                best_count = count;
                model.node_labels[k] = static_cast<int>(label);
            }
    }
    const auto edge = static_cast<long>(model.topology.edge_length);
    std::vector<int> filled = model.node_labels;
    for (std::size_t k = 0; k < nodes; ++k) {
        if (model.node_labels[k] >= 0) continue;
        long best_d2 = std::numeric_limits<long>::max();
        const long r = static_cast<long>(k) / edge, c = static_cast<long>(k) % edge;
        for (std::size_t other = 0; other < nodes; ++other) {
            if (model.node_labels[other] < 0) continue;
            const long orow = static_cast<long>(other) / edge, ocol = static_cast<long>(other) % edge;
            const long d2 = (orow - r) * (orow - r) + (ocol - c) * (ocol - c);
            if (d2 < best_d2) {
                best_d2 = d2;
                filled[k] = model.node_labels[other];
            }
        }
    }
    model.node_labels = std::move(filled);
}

std::vector<std::size_t> som_predict(const SomModel& model, const Matrix& x) {
    if (!model.trained || model.node_labels.empty()) throw Error(Errc::UntrainedModel, "SOM is not trained and labeled");
    if (static_cast<std::size_t>(x.cols()) != model.topology.input_dim) throw Error(Errc::ShapeMismatch, "SOM input dimension mismatch");
    std::vector<std::size_t> out(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        Vector s = x.row(i).transpose();
        out[static_cast<std::size_t>(i)] = static_cast<std::size_t>(model.node_labels[best_matching_unit(model, s)]);
    }
    return out;
}

std::vector<std::size_t> som_classify(SomModel& model, const Matrix& x_labeled, const std::vector<std::size_t>& labels,
                                      const Matrix& x_query) {
    label_som(model, x_labeled, labels);
    return som_predict(model, x_query);
}

}  // namespace mvi
