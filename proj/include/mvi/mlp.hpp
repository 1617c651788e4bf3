#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mvi {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Minimum / Medium / Maximum variants shared by the MLP budgets and SOM sizes.
enum class SizeClass { Minimum, Medium, Maximum };
inline constexpr SizeClass kAllSizeClasses[] = {SizeClass::Minimum, SizeClass::Medium, SizeClass::Maximum};

std::string_view to_string(SizeClass s);
SizeClass parse_size_class(std::string_view s);

enum class Task { Regression, Classification };

/// Whether "two, three and four layers" counts hidden layers only or all layers.
enum class LayerCountSemantics { Hidden, Total };

struct MlpTopology {
    std::size_t input_size = 0;
    std::vector<std::size_t> hidden;
    std::size_t output_size = 0;
    SizeClass budget_class = SizeClass::Medium;

    /// e.g. "6-7-4-5"
    std::string label() const;
    bool operator==(const MlpTopology&) const = default;
};

/// Neuron budget over the hidden layers: input, input + output, or 2 * input + output.
std::size_t hidden_budget(SizeClass budget, std::size_t input_size, std::size_t output_size);

/// Splits `budget` over `depth` layers along a ratio-2 geometric taper. The result sums
/// to `budget` exactly, is non-increasing and every entry is >= 1.
std::vector<std::size_t> taper_layers(std::size_t budget, std::size_t depth);

/// Three depths x three budgets. Depths are {2, 3, 4} hidden layers, or {0, 1, 2}
/// hidden layers when layer counts include the input and output layer.
std::vector<MlpTopology> enumerate_mlp_topologies(std::size_t input_size, std::size_t output_size,
                                                  LayerCountSemantics semantics = LayerCountSemantics::Hidden);

struct TrainParams {
    std::size_t epochs = 200;
    std::size_t batch_size = 32;
    double learning_rate = 0.05;
    std::uint64_t seed = 0;
};

void validate(const TrainParams& params);

struct DenseLayer {
    Matrix weights;  ///< out x in
    Vector bias;
};

struct MlpModel {
    MlpTopology topology;
    Task task = Task::Regression;
    std::vector<DenseLayer> layers;
    std::vector<double> loss_history;  ///< training loss after each epoch
    double final_loss = 0.0;
    std::size_t restarts = 0;  ///< re-initializations after a hidden layer died
};

/// Restarts allowed when a whole hidden layer stops firing on the training rows.
inline constexpr std::size_t kMaxRestarts = 12;

/// He-uniform weights, zero output bias, small positive hidden bias.
MlpModel init_mlp(const MlpTopology& topology, Task task, std::uint64_t seed);
/// As above, then each hidden bias is set to minus the median of its pre-activation over
/// `x`, so every hidden unit starts active on half of the rows. train_mlp starts here.
MlpModel init_mlp(const MlpTopology& topology, Task task, std::uint64_t seed, const Matrix& x);

struct ValidationSet {
    Matrix x;
    Matrix y;
    std::size_t patience = 10;
};

/// Mini-batch SGD on half mean squared error (regression) or mean cross-entropy
/// (classification, `y` one-hot). Samples are rows. With a validation set, the
/// weights with the lowest validation loss are kept and training stops after
/// `patience` epochs without improvement. When every unit of a hidden layer is inactive on
/// all training rows after an epoch, training restarts from a re-derived seed.
MlpModel train_mlp(const MlpTopology& topology, Task task, const Matrix& x, const Matrix& y, const TrainParams& params,
                   const std::optional<ValidationSet>& validation = std::nullopt);

/// Regression outputs, or softmax class probabilities for classification.
Matrix predict_mlp(const MlpModel& model, const Matrix& x);
std::vector<std::size_t> predict_classes(const MlpModel& model, const Matrix& x);

double mlp_loss(const MlpModel& model, const Matrix& x, const Matrix& y);

struct MlpGradient {
    double loss = 0.0;
    std::vector<DenseLayer> layers;
};

MlpGradient mlp_gradient(const MlpModel& model, const Matrix& x, const Matrix& y);

/// All weights then biases, layer by layer.
Vector flatten_parameters(const MlpModel& model);
void assign_parameters(MlpModel& model, const Vector& flat);
Vector flatten_gradient(const MlpGradient& grad);

Matrix one_hot(const std::vector<std::size_t>& labels, std::size_t classes);

/// Versioned JSON checkpoint.
std::string save_mlp_json(const MlpModel& model);
MlpModel load_mlp_json(const std::string& text);

}  // namespace mvi
