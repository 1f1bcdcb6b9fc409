#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "flcleaner/dataset.hpp"

namespace flcleaner {

// Minimal dense/conv classifier engine with explicit backpropagation, plain
// mini-batch SGD and hooks that capture pre-nonlinearity layer outputs
// ("activation maps"). Everything is a pure function of its inputs; fixed
// seeds give bit-identical trajectories.

enum class LayerKind { Dense, Conv2d, Relu, MaxPool2, Flatten, Softmax };

struct LayerDesc {
    LayerKind kind;
    int in = 0, out = 0;                  // Dense
    int in_ch = 0, out_ch = 0, k = 0;     // Conv2d (square kernel, stride 1, valid)

    static LayerDesc dense(int in, int out) { return {LayerKind::Dense, in, out, 0, 0, 0}; }
    static LayerDesc conv2d(int in_ch, int out_ch, int k) {
        return {LayerKind::Conv2d, 0, 0, in_ch, out_ch, k};
    }
    static LayerDesc relu() { return {LayerKind::Relu}; }
    static LayerDesc maxpool2() { return {LayerKind::MaxPool2}; }
    static LayerDesc flatten() { return {LayerKind::Flatten}; }
    static LayerDesc softmax() { return {LayerKind::Softmax}; }
};

struct ModelSpec {
    std::vector<LayerDesc> layers;
    Shape3 input_shape{1, 28, 28};
    std::uint64_t seed = 0;
};

/// 784-hidden-10 dense classifier, the default desk-scale model.
ModelSpec mlp_spec(int input_size, int hidden, int classes, std::uint64_t seed);
/// conv(1->8,3) relu pool conv(8->16,3) relu pool flatten dense softmax.
ModelSpec cnn_spec(Shape3 input_shape, int classes, std::uint64_t seed);

/// Throws ShapeError (naming the offending layer pair) unless consecutive
/// layer shapes compose and the model ends in exactly one softmax.
/// Returns the output shape of every layer.
std::vector<Shape3> layer_shapes(const ModelSpec& spec);

/// Number of classes produced by the terminal softmax.
int num_classes(const ModelSpec& spec);

/// Total trainable parameter count (weights + biases).
std::size_t param_count(const ModelSpec& spec);

// Flat, ordered vector of all trainable parameters: layer-major, and within a
// layer the weight tensor in row-major order followed by the bias vector.
struct WeightVector {
    std::vector<double> values;

    std::size_t size() const { return values.size(); }
    double* data() { return values.data(); }
    const double* data() const { return values.data(); }
    bool operator==(const WeightVector& other) const = default;
};

/// Deterministic scaled-uniform init: U(-a, a) with a = sqrt(6/(fan_in+fan_out))
/// per parameterized layer; biases start at zero.
WeightVector init_model(const ModelSpec& spec);

// Selects which parameterized layers (dense/conv, in model order) contribute
// to captured activation maps. Empty mask = capture everything.
using LayerMask = std::vector<bool>;

LayerMask full_layer_mask(const ModelSpec& spec);
/// Captured map length per sample for a given mask.
int activation_dim(const ModelSpec& spec, const LayerMask& mask);

struct ActivationMap {
    std::vector<double> values;  // concatenated pre-nonlinearity outputs
    int sample_index = 0;        // index into the batch that produced it
};

struct ForwardResult {
    std::vector<double> probs;          // batch_size x num_classes, row-major
    std::vector<ActivationMap> maps;    // one per sample when capture requested
    int batch_size = 0;
    int classes = 0;

    const double* sample_probs(int i) const { return probs.data() + static_cast<std::size_t>(i) * classes; }
};

/// Forward pass over dataset rows selected by `indices`. If `capture` is
/// non-null, also returns one ActivationMap per sample.
ForwardResult forward(const WeightVector& weights, const ModelSpec& spec,
                      const Dataset& data, const std::vector<int>& indices,
                      const LayerMask* capture = nullptr);

/// Mean cross-entropy over the view and its gradient w.r.t. all weights.
/// Used for gradient checks and for magnitude-based update masking.
std::pair<double, std::vector<double>> loss_and_gradient(const WeightVector& weights,
                                                         const ModelSpec& spec,
                                                         const DataView& view);

/// `epochs` passes of mini-batch SGD on cross-entropy, consuming the view in
/// its stored order. Where grad_mask is 0 the weight component is returned
/// unchanged. grad_mask may be null (train everything).
WeightVector train_local(const WeightVector& weights, const ModelSpec& spec,
                         const DataView& view, int epochs, double lr, int batch_size,
                         const std::vector<std::uint8_t>* grad_mask = nullptr);

/// Fraction of view samples whose argmax class matches the label.
/// Ties break toward the lowest class index.
double evaluate(const WeightVector& weights, const ModelSpec& spec, const DataView& view);

} // namespace flcleaner
