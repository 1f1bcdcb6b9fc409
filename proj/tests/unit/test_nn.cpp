#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstring>

#include "flcleaner/errors.hpp"
#include "flcleaner/nn.hpp"
#include "flcleaner/serialize.hpp"
#include "helpers.hpp"

using namespace flcleaner;

TEST_CASE("init_model is deterministic per seed and seeds differ") {
    const ModelSpec spec = mlp_spec(784, 128, 10, 42);
    const WeightVector a = init_model(spec);
    const WeightVector b = init_model(spec);
    CHECK(a == b);

    ModelSpec other = spec;
    other.seed = 43;
    const WeightVector c = init_model(other);
    bool any_diff = false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a.values[i] != c.values[i]) { any_diff = true; break; }
    CHECK(any_diff);
}

TEST_CASE("parameter counting") {
    ModelSpec spec;
    spec.input_shape = {1, 1, 784};
    spec.layers = {LayerDesc::dense(784, 10), LayerDesc::softmax()};
    CHECK(param_count(spec) == 7850);
    CHECK(num_classes(spec) == 10);
}

TEST_CASE("shape composition failure names the offending pair") {
    ModelSpec spec;
    spec.input_shape = {1, 1, 100};
    spec.layers = {LayerDesc::dense(100, 50), LayerDesc::dense(40, 10), LayerDesc::softmax()};
    CHECK_THROWS_WITH_AS(layer_shapes(spec),
                         doctest::Contains("layer 1 (dense)"),
                         ShapeError);

    ModelSpec no_softmax;
    no_softmax.input_shape = {1, 1, 10};
    no_softmax.layers = {LayerDesc::dense(10, 4)};
    CHECK_THROWS_AS(layer_shapes(no_softmax), ShapeError);
}

TEST_CASE("all-zero weights give a uniform softmax") {
    const ModelSpec spec = mlp_spec(16, 8, 10, 7);
    WeightVector w;
    w.values.assign(param_count(spec), 0.0);
    const Dataset ds = testutil::random_dataset(4, 16, 10, 3);
    const std::vector<int> all{0, 1, 2, 3};
    const ForwardResult res = forward(w, spec, ds, all);
    for (int i = 0; i < res.batch_size; ++i)
        for (int c = 0; c < 10; ++c)
            CHECK(res.sample_probs(i)[c] == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("softmax output is a probability simplex point") {
    const ModelSpec spec = mlp_spec(12, 6, 4, 11);
    const WeightVector w = init_model(spec);
    const Dataset ds = testutil::random_dataset(32, 12, 4, 5);
    const ForwardResult res = forward(w, spec, ds, full_view(ds).indices);
    for (int i = 0; i < res.batch_size; ++i) {
        double sum = 0.0;
        for (int c = 0; c < 4; ++c) {
            CHECK(res.sample_probs(i)[c] >= 0.0);
            sum += res.sample_probs(i)[c];
        }
        CHECK(std::fabs(sum - 1.0) < 1e-9);
    }
}

TEST_CASE("activation capture dimensions") {
    ModelSpec spec;
    spec.input_shape = {1, 1, 784};
    spec.layers = {LayerDesc::dense(784, 100), LayerDesc::relu(), LayerDesc::dense(100, 10),
                   LayerDesc::softmax()};
    spec.seed = 1;
    CHECK(activation_dim(spec, full_layer_mask(spec)) == 110);

    const WeightVector w = init_model(spec);
    const Dataset ds = testutil::random_dataset(3, 784, 10, 9);
    const LayerMask mask = full_layer_mask(spec);
    const ForwardResult res = forward(w, spec, ds, {0, 1, 2}, &mask);
    REQUIRE(res.maps.size() == 3);
    CHECK(res.maps[0].values.size() == 110);
    CHECK(res.maps[2].sample_index == 2);

    // Empty mask: maps exist but carry nothing, probabilities unchanged.
    const LayerMask none(mask.size(), false);
    const ForwardResult res2 = forward(w, spec, ds, {0, 1, 2}, &none);
    REQUIRE(res2.maps.size() == 3);
    CHECK(res2.maps[0].values.empty());
    for (std::size_t i = 0; i < res.probs.size(); ++i) CHECK(res.probs[i] == res2.probs[i]);
}

TEST_CASE("captured values are pre-nonlinearity") {
    // One dense layer into relu: captured values may be negative even though
    // the relu output is not.
    ModelSpec spec;
    spec.input_shape = {1, 1, 6};
    spec.layers = {LayerDesc::dense(6, 8), LayerDesc::relu(), LayerDesc::dense(8, 3),
                   LayerDesc::softmax()};
    spec.seed = 21;
    const WeightVector w = init_model(spec);
    const Dataset ds = testutil::random_dataset(16, 6, 3, 2);
    const LayerMask mask{true, false};
    const ForwardResult res = forward(w, spec, ds, full_view(ds).indices, &mask);
    bool saw_negative = false;
    for (const auto& am : res.maps) {
        CHECK(am.values.size() == 8);
        for (double v : am.values) saw_negative |= v < 0.0;
    }
    CHECK(saw_negative);
}

TEST_CASE("gradient matches central finite differences") {
    // Dense+relu MLP: 5 random weights x several instances, 3 samples each.
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
        const ModelSpec spec = mlp_spec(10, 7, 4, seed);
        const WeightVector w = init_model(spec);
        const Dataset ds = testutil::random_dataset(3, 10, 4, seed + 100);
        const DataView view = full_view(ds);
        const auto [loss, grad] = loss_and_gradient(w, spec, view);
        CHECK(std::isfinite(loss));
        Prng rng(seed);
        for (int k = 0; k < 5; ++k) {
            const auto idx = static_cast<std::size_t>(rng.uniform_int(w.size()));
            const double fd = testutil::fd_gradient(w, spec, view, idx);
            CHECK(testutil::rel_err(grad[idx], fd) < 1e-4);
        }
    }
}

TEST_CASE("gradient check covers conv, pool and flatten layers") {
    ModelSpec spec;
    spec.input_shape = {1, 8, 8};
    spec.layers = {LayerDesc::conv2d(1, 3, 3), LayerDesc::relu(), LayerDesc::maxpool2(),
                   LayerDesc::flatten(), LayerDesc::dense(3 * 3 * 3, 4), LayerDesc::softmax()};
    spec.seed = 77;
    const WeightVector w = init_model(spec);
    const Dataset ds = testutil::random_image_dataset(3, 8, 8, 4, 13);
    const DataView view = full_view(ds);
    const auto grad = loss_and_gradient(w, spec, view).second;
    Prng rng(99);
    for (int k = 0; k < 10; ++k) {
        const auto idx = static_cast<std::size_t>(rng.uniform_int(w.size()));
        const double fd = testutil::fd_gradient(w, spec, view, idx);
        CHECK(testutil::rel_err(grad[idx], fd) < 1e-4);
    }
}

TEST_CASE("one SGD step on a hand-computable model") {
    // dense(1,2)+softmax, x=1, label 0, w=[0.5,-0.5], b=0, lr=1.
    // p0 = sigmoid(1), dw = (p - onehot) * x.
    ModelSpec spec;
    spec.input_shape = {1, 1, 1};
    spec.layers = {LayerDesc::dense(1, 2), LayerDesc::softmax()};
    spec.seed = 0;
    WeightVector w;
    w.values = {0.5, -0.5, 0.0, 0.0};  // w0, w1, b0, b1

    Dataset ds;
    ds.shape = {1, 1, 1};
    ds.num_classes = 2;
    ds.pixels = {1.0};
    ds.labels = {0};

    const WeightVector out = train_local(w, spec, full_view(ds), 1, 1.0, 1);
    const double p0 = 1.0 / (1.0 + std::exp(-1.0));
    CHECK(out.values[0] == doctest::Approx(0.5 + (1.0 - p0)).epsilon(1e-12));
    CHECK(out.values[1] == doctest::Approx(-0.5 - (1.0 - p0)).epsilon(1e-12));
    CHECK(out.values[2] == doctest::Approx(1.0 - p0).epsilon(1e-12));
    CHECK(out.values[3] == doctest::Approx(-(1.0 - p0)).epsilon(1e-12));
}

TEST_CASE("fully masked update returns the weights unchanged") {
    const ModelSpec spec = mlp_spec(8, 5, 3, 5);
    const WeightVector w = init_model(spec);
    const Dataset ds = testutil::random_dataset(10, 8, 3, 6);
    const std::vector<std::uint8_t> mask(param_count(spec), 0);
    const WeightVector out = train_local(w, spec, full_view(ds), 3, 0.1, 4, &mask);
    CHECK(out == w);
}

TEST_CASE("masked coordinates never change, unmasked ones train") {
    const ModelSpec spec = mlp_spec(8, 5, 3, 5);
    const WeightVector w = init_model(spec);
    const Dataset ds = testutil::random_dataset(12, 8, 3, 8);
    std::vector<std::uint8_t> mask(param_count(spec), 1);
    Prng rng(17);
    for (auto& m : mask) m = rng.uniform01() < 0.5 ? 0 : 1;
    const WeightVector out = train_local(w, spec, full_view(ds), 2, 0.1, 4, &mask);
    bool trained_moved = false;
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (!mask[i])
            CHECK(out.values[i] == w.values[i]);
        else
            trained_moved |= out.values[i] != w.values[i];
    }
    CHECK(trained_moved);
}

TEST_CASE("training is bit-deterministic") {
    const ModelSpec spec = mlp_spec(8, 6, 4, 15);
    const WeightVector w = init_model(spec);
    const Dataset ds = testutil::random_dataset(20, 8, 4, 16);
    const WeightVector a = train_local(w, spec, full_view(ds), 2, 0.05, 8);
    const WeightVector b = train_local(w, spec, full_view(ds), 2, 0.05, 8);
    CHECK(a == b);
}

TEST_CASE("train_local rejects an empty dataset") {
    const ModelSpec spec = mlp_spec(8, 6, 4, 15);
    const WeightVector w = init_model(spec);
    const Dataset ds = testutil::random_dataset(4, 8, 4, 16);
    DataView empty{&ds, {}};
    CHECK_THROWS_AS(train_local(w, spec, empty, 1, 0.1, 4), Error);
}

TEST_CASE("evaluate: accuracy arithmetic and tie-breaking") {
    const ModelSpec spec = mlp_spec(6, 4, 10, 1);
    WeightVector zero;
    zero.values.assign(param_count(spec), 0.0);

    // Balanced 10-class set: uniform model predicts class 0 everywhere.
    Dataset balanced = testutil::random_dataset(100, 6, 10, 2);
    for (int i = 0; i < 100; ++i) balanced.labels[static_cast<std::size_t>(i)] = i % 10;
    CHECK(evaluate(zero, spec, full_view(balanced)) == doctest::Approx(0.1));

    // Single correctly-classified sample.
    Dataset one = testutil::random_dataset(1, 6, 10, 3);
    one.labels[0] = 0;
    CHECK(evaluate(zero, spec, full_view(one)) == doctest::Approx(1.0));

    // 3 of 4 correct.
    Dataset four = testutil::random_dataset(4, 6, 10, 4);
    four.labels = {0, 0, 0, 5};
    CHECK(evaluate(zero, spec, full_view(four)) == doctest::Approx(0.75));
}

TEST_CASE("cnn spec composes and trains a step") {
    const ModelSpec spec = cnn_spec({1, 28, 28}, 10, 3);
    const auto shapes = layer_shapes(spec);
    CHECK(shapes.back().size() == 10);
    const WeightVector w = init_model(spec);
    const Dataset ds = testutil::random_image_dataset(4, 28, 28, 10, 90);
    const WeightVector out = train_local(w, spec, full_view(ds), 1, 0.05, 2);
    CHECK(out.size() == w.size());
    CHECK(evaluate(out, spec, full_view(ds)) >= 0.0);
}

TEST_CASE("weight vector serialization round-trips bit-exactly") {
    Prng rng(33);
    std::vector<double> values(257);
    for (auto& v : values) v = rng.gaussian() * 1e3;
    values[0] = 0.0;
    values[1] = -0.0;
    const std::string path = "wv_roundtrip.bin";
    save_f64_vector(path, values);
    const auto back = load_f64_vector(path);
    REQUIRE(back.size() == values.size());
    for (std::size_t i = 0; i < values.size(); ++i)
        CHECK(std::memcmp(&back[i], &values[i], sizeof(double)) == 0);
    std::remove(path.c_str());
}
