#include "mvi/mlp.hpp"

#include "mvi/error.hpp"
#include "mvi/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace mvi {

std::string_view to_string(SizeClass s) {
    switch (s) {
    case SizeClass::Minimum: return "min";
    case SizeClass::Medium: return "med";
    case SizeClass::Maximum: return "max";
    }
    return "?";
}

SizeClass parse_size_class(std::string_view s) {
    if (s == "min" || s == "minimum") return SizeClass::Minimum;
    if (s == "med" || s == "medium") return SizeClass::Medium;
    if (s == "max" || s == "maximum") return SizeClass::Maximum;
    throw Error(Errc::InvalidValue, "unknown size class '" + std::string(s) + "'");
}

std::string MlpTopology::label() const {
    std::string out = std::to_string(input_size);
    for (auto h : hidden) out += "-" + std::to_string(h);
    return out + "-" + std::to_string(output_size);
}

std::size_t hidden_budget(SizeClass budget, std::size_t input_size, std::size_t output_size) {
    switch (budget) {
    case SizeClass::Minimum: return input_size;
    case SizeClass::Medium: return input_size + output_size;
    case SizeClass::Maximum: return 2 * input_size + output_size;
    }
    return input_size;
}

std::vector<std::size_t> taper_layers(std::size_t budget, std::size_t depth) {
    if (depth == 0) return {};
    if (budget < depth)
        throw Error(Errc::BudgetTooSmall, "budget " + std::to_string(budget) + " cannot fill " + std::to_string(depth) + " layers");

    double total_share = 0.0;
    std::vector<double> share(depth);
    for (std::size_t i = 0; i < depth; ++i) total_share += share[i] = std::ldexp(1.0, static_cast<int>(depth - 1 - i));

    std::vector<std::size_t> sizes(depth);
    std::vector<double> remainder(depth);
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < depth; ++i) {
        double exact = static_cast<double>(budget) * share[i] / total_share;
        sizes[i] = static_cast<std::size_t>(std::floor(exact + 1e-9));
        remainder[i] = exact - static_cast<double>(sizes[i]);
        assigned += sizes[i];
    }
    std::vector<std::size_t> order(depth);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
    for (std::size_t i = 0; assigned < budget; ++i, ++assigned) ++sizes[order[i % depth]];

    std::sort(sizes.begin(), sizes.end(), std::greater<>());
    // Every layer needs a neuron; borrow from the widest layer.
    for (std::size_t i = depth; i-- > 0;) {
        while (sizes[i] == 0) {
            ++sizes[i];
            --sizes[0];
            std::sort(sizes.begin(), sizes.end(), std::greater<>());
        }
    }
    return sizes;
}

std::vector<MlpTopology> enumerate_mlp_topologies(std::size_t input_size, std::size_t output_size,
                                                  LayerCountSemantics semantics) {
    if (input_size == 0 || output_size == 0) throw Error(Errc::InvalidValue, "layer sizes must be >= 1");
    std::vector<MlpTopology> out;
    for (std::size_t layers : {2u, 3u, 4u}) {
        const std::size_t depth = semantics == LayerCountSemantics::Hidden ? layers : layers - 2;
        for (SizeClass budget : kAllSizeClasses) {
            MlpTopology t;
            t.input_size = input_size;
            t.output_size = output_size;
            t.budget_class = budget;
            t.hidden = taper_layers(hidden_budget(budget, input_size, output_size), depth);
            out.push_back(std::move(t));
        }
    }
    return out;
}

void validate(const TrainParams& params) {
    if (params.epochs == 0 || params.batch_size == 0 || !(params.learning_rate >= 0.0))
        throw Error(Errc::InvalidValue, "training parameters must be positive");
}

// ---------------------------------------------------------------------------

namespace {

void check_topology(const MlpTopology& t) {
    if (t.input_size == 0 || t.output_size == 0) throw Error(Errc::InvalidValue, "layer sizes must be >= 1");
    for (auto h : t.hidden)
        if (h == 0) throw Error(Errc::InvalidValue, "hidden layers need at least one neuron");
}

void softmax_rows(Matrix& z) {
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        double m = z.row(i).maxCoeff();
        z.row(i) = (z.row(i).array() - m).exp();
        z.row(i) /= z.row(i).sum();
    }
}

// Activations of every layer; acts[0] is the input.
std::vector<Matrix> forward(const MlpModel& model, const Matrix& x) {
    std::vector<Matrix> acts;
    acts.reserve(model.layers.size() + 1);
    acts.push_back(x);
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        const auto& layer = model.layers[l];
        Matrix z = acts.back() * layer.weights.transpose();
        z.rowwise() += layer.bias.transpose();
        if (l + 1 < model.layers.size()) z = z.cwiseMax(0.0);
        else if (model.task == Task::Classification) softmax_rows(z);
        acts.push_back(std::move(z));
    }
    return acts;
}

double loss_from_output(Task task, const Matrix& out, const Matrix& y) {
    const double n = static_cast<double>(out.rows());
    if (task == Task::Regression) return 0.5 * (out - y).squaredNorm() / n;
    double sum = 0.0;
    for (Eigen::Index i = 0; i < out.rows(); ++i)
        for (Eigen::Index j = 0; j < out.cols(); ++j)
            if (y(i, j) != 0.0) sum -= y(i, j) * std::log(std::max(out(i, j), 1e-300));
    return sum / n;
}

void check_shapes(const MlpModel& model, const Matrix& x, const Matrix* y) {
    if (static_cast<std::size_t>(x.cols()) != model.topology.input_size)
        throw Error(Errc::ShapeMismatch, "input has " + std::to_string(x.cols()) + " columns, model expects " +
                                             std::to_string(model.topology.input_size));
    if (y && (y->rows() != x.rows() || static_cast<std::size_t>(y->cols()) != model.topology.output_size))
        throw Error(Errc::ShapeMismatch, "target matrix shape does not match inputs/outputs");
}

}  // namespace

MlpModel init_mlp(const MlpTopology& topology, Task task, std::uint64_t seed) {
    check_topology(topology);
    MlpModel model;
    model.topology = topology;
    model.task = task;
    Rng rng(derive_seed(seed, {0x1a17}));
    std::vector<std::size_t> sizes{topology.input_size};
    sizes.insert(sizes.end(), topology.hidden.begin(), topology.hidden.end());
    sizes.push_back(topology.output_size);
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        const auto fan_in = static_cast<Eigen::Index>(sizes[l]);
        const auto fan_out = static_cast<Eigen::Index>(sizes[l + 1]);
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
        std::uniform_real_distribution<double> init(-limit, limit);
        DenseLayer layer{Matrix(fan_out, fan_in), Vector::Constant(fan_out, l + 2 < sizes.size() ? 0.01 : 0.0)};
        for (Eigen::Index i = 0; i < fan_out; ++i)
            for (Eigen::Index j = 0; j < fan_in; ++j) layer.weights(i, j) = init(rng);
        model.layers.push_back(std::move(layer));
    }
    return model;
}

MlpModel init_mlp(const MlpTopology& topology, Task task, std::uint64_t seed, const Matrix& x) {
    MlpModel model = init_mlp(topology, task, seed);
    check_shapes(model, x, nullptr);
    if (x.rows() == 0) return model;
    Matrix a = x;
    for (std::size_t l = 0; l + 1 < model.layers.size(); ++l) {
        auto& layer = model.layers[l];
        Matrix z = a * layer.weights.transpose();
        for (Eigen::Index j = 0; j < z.cols(); ++j) {
            std::vector<double> col(z.col(j).data(), z.col(j).data() + z.rows());
            auto mid = col.begin() + static_cast<std::ptrdiff_t>(col.size() / 2);
            std::nth_element(col.begin(), mid, col.end());
            layer.bias(j) = -*mid;
        }
        z.rowwise() += layer.bias.transpose();
        a = z.cwiseMax(0.0);
    }
    return model;
}

MlpGradient mlp_gradient(const MlpModel& model, const Matrix& x, const Matrix& y) {
    check_shapes(model, x, &y);
    const auto acts = forward(model, x);
    MlpGradient grad;
    grad.loss = loss_from_output(model.task, acts.back(), y);
    grad.layers.resize(model.layers.size());

    // Both heads give (output - y) / n at the pre-activation of the last layer.
    Matrix delta = (acts.back() - y) / static_cast<double>(x.rows());
    for (std::size_t l = model.layers.size(); l-- > 0;) {
        grad.layers[l].weights = delta.transpose() * acts[l];
        grad.layers[l].bias = delta.colwise().sum().transpose();
        if (l > 0) {
            Matrix back = delta * model.layers[l].weights;
            delta = back.cwiseProduct((acts[l].array() > 0.0).cast<double>().matrix());
        }
    }
    return grad;
}

double mlp_loss(const MlpModel& model, const Matrix& x, const Matrix& y) {
    check_shapes(model, x, &y);
    return loss_from_output(model.task, forward(model, x).back(), y);
}

namespace {

// A hidden layer with no active unit on any training row blocks every gradient below it
// and never recovers.
bool collapsed(const MlpModel& model, const Matrix& x) {
    const auto acts = forward(model, x);
    for (std::size_t l = 1; l + 1 < acts.size(); ++l)
        if ((acts[l].array() > 0.0).count() == 0) return true;
    return false;
}

}  // namespace

MlpModel train_mlp(const MlpTopology& topology, Task task, const Matrix& x, const Matrix& y, const TrainParams& params,
                   const std::optional<ValidationSet>& validation) {
    validate(params);
    check_shapes(init_mlp(topology, task, params.seed), x, &y);
    if (x.rows() == 0) throw Error(Errc::EmptyInput, "no training rows");
    if (validation) check_shapes(init_mlp(topology, task, params.seed), validation->x, &validation->y);

    const auto n = static_cast<std::size_t>(x.rows());
    std::vector<Eigen::Index> order(n);
    Matrix bx, by;

    MlpModel model;
    for (std::size_t attempt = 0; attempt <= kMaxRestarts; ++attempt) {
        const std::uint64_t seed = attempt == 0 ? params.seed : derive_seed(params.seed, {attempt});
        model = init_mlp(topology, task, seed, x);
        model.restarts = attempt;
        std::iota(order.begin(), order.end(), Eigen::Index{0});
        Rng rng(derive_seed(seed, {0x5eed}));

        MlpModel best = model;
        double best_val = std::numeric_limits<double>::infinity();
        std::size_t since_best = 0;
        bool dead = false;
        for (std::size_t epoch = 0; epoch < params.epochs; ++epoch) {
            std::shuffle(order.begin(), order.end(), rng);
            for (std::size_t start = 0; start < n; start += params.batch_size) {
                const std::size_t stop = std::min(n, start + params.batch_size);
                const auto rows = static_cast<Eigen::Index>(stop - start);
                bx.resize(rows, x.cols());
                by.resize(rows, y.cols());
                for (Eigen::Index i = 0; i < rows; ++i) {
                    bx.row(i) = x.row(order[start + static_cast<std::size_t>(i)]);
                    by.row(i) = y.row(order[start + static_cast<std::size_t>(i)]);
                }
                const MlpGradient g = mlp_gradient(model, bx, by);
                for (std::size_t l = 0; l < model.layers.size(); ++l) {
                    model.layers[l].weights -= params.learning_rate * g.layers[l].weights;
                    model.layers[l].bias -= params.learning_rate * g.layers[l].bias;
                }
            }
            model.loss_history.push_back(mlp_loss(model, x, y));
            if (attempt < kMaxRestarts && collapsed(model, x)) {
                dead = true;
                break;
            }
            if (validation) {
                double val = mlp_loss(model, validation->x, validation->y);
                if (val < best_val) {
                    best_val = val;
                    best = model;
                    since_best = 0;
                } else if (++since_best >= validation->patience) {
                    break;
                }
            }
        }
        if (dead) continue;
        if (validation) {
            best.loss_history = model.loss_history;
            model = std::move(best);
        }
        break;
    }
    model.final_loss = mlp_loss(model, x, y);
    return model;
}

Matrix predict_mlp(const MlpModel& model, const Matrix& x) {
    if (model.layers.empty()) throw Error(Errc::UntrainedModel, "model has no layers");
    check_shapes(model, x, nullptr);
    return forward(model, x).back();
}

std::vector<std::size_t> predict_classes(const MlpModel& model, const Matrix& x) {
    const Matrix scores = predict_mlp(model, x);
    std::vector<std::size_t> out(static_cast<std::size_t>(scores.rows()));
    for (Eigen::Index i = 0; i < scores.rows(); ++i) {
        Eigen::Index best = 0;
        scores.row(i).maxCoeff(&best);
        out[static_cast<std::size_t>(i)] = static_cast<std::size_t>(best);
    }
    return out;
}

Vector flatten_parameters(const MlpModel& model) {
    Eigen::Index total = 0;
    for (const auto& l : model.layers) total += l.weights.size() + l.bias.size();
    Vector flat(total);
    Eigen::Index pos = 0;
    for (const auto& l : model.layers) {
        flat.segment(pos, l.weights.size()) = l.weights.reshaped();
        pos += l.weights.size();
        flat.segment(pos, l.bias.size()) = l.bias;
        pos += l.bias.size();
    }
    return flat;
}

void assign_parameters(MlpModel& model, const Vector& flat) {
    Eigen::Index pos = 0;
    for (auto& l : model.layers) {
        l.weights.reshaped() = flat.segment(pos, l.weights.size());
        pos += l.weights.size();
        l.bias = flat.segment(pos, l.bias.size());
        pos += l.bias.size();
    }
    if (pos != flat.size()) throw Error(Errc::ShapeMismatch, "parameter vector length");
}

Vector flatten_gradient(const MlpGradient& grad) {
    MlpModel shell;
    shell.layers = grad.layers;
    return flatten_parameters(shell);
}

Matrix one_hot(const std::vector<std::size_t>& labels, std::size_t classes) {
    Matrix out = Matrix::Zero(static_cast<Eigen::Index>(labels.size()), static_cast<Eigen::Index>(classes));
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] >= classes) throw Error(Errc::InvalidValue, "label out of range");
        out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(labels[i])) = 1.0;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {
constexpr int kCheckpointVersion = 1;
}

std::string save_mlp_json(const MlpModel& model) {
    nlohmann::json j;
    j["format"] = "mvi-mlp";
    j["version"] = kCheckpointVersion;
    j["input_size"] = model.topology.input_size;
    j["hidden"] = model.topology.hidden;
    j["output_size"] = model.topology.output_size;
    j["budget_class"] = std::string(to_string(model.topology.budget_class));
    j["task"] = model.task == Task::Regression ? "regression" : "classification";
    j["final_loss"] = model.final_loss;
    for (const auto& l : model.layers) {
        nlohmann::json layer;
        layer["rows"] = l.weights.rows();
        layer["cols"] = l.weights.cols();
        layer["weights"] = std::vector<double>(l.weights.reshaped().begin(), l.weights.reshaped().end());
        layer["bias"] = std::vector<double>(l.bias.begin(), l.bias.end());
        j["layers"].push_back(std::move(layer));
    }
    return j.dump();
}

MlpModel load_mlp_json(const std::string& text) {
    MlpModel model;
    try {
        const auto j = nlohmann::json::parse(text);
        if (!j.is_object() || !j.contains("format") || j["format"] != "mvi-mlp" || j.value("version", 0) != kCheckpointVersion)
            throw Error(Errc::ParseError, "not a version 1 MLP checkpoint");
        model.topology.input_size = j.at("input_size").get<std::size_t>();
        model.topology.hidden = j.at("hidden").get<std::vector<std::size_t>>();
        model.topology.output_size = j.at("output_size").get<std::size_t>();
        model.topology.budget_class = parse_size_class(j.at("budget_class").get<std::string>());
        model.task = j.at("task").get<std::string>() == "regression" ? Task::Regression : Task::Classification;
        model.final_loss = j.value("final_loss", 0.0);
        for (const auto& layer : j.at("layers")) {
            DenseLayer l;
            auto w = layer.at("weights").get<std::vector<double>>();
            auto b = layer.at("bias").get<std::vector<double>>();
            l.weights = Eigen::Map<const Matrix>(w.data(), layer.at("rows").get<Eigen::Index>(), layer.at("cols").get<Eigen::Index>());
            l.bias = Eigen::Map<const Vector>(b.data(), static_cast<Eigen::Index>(b.size()));
            model.layers.push_back(std::move(l));
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::ParseError, e.what());
    }
    check_topology(model.topology);
    return model;
}

}  // namespace mvi
