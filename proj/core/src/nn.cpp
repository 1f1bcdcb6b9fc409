#include "flcleaner/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "flcleaner/errors.hpp"
#include "flcleaner/rng.hpp"

namespace flcleaner {

namespace {

const char* kind_name(LayerKind k) {
    switch (k) {
        case LayerKind::Dense: return "dense";
        case LayerKind::Conv2d: return "conv2d";
        case LayerKind::Relu: return "relu";
        case LayerKind::MaxPool2: return "maxpool2";
        case LayerKind::Flatten: return "flatten";
        case LayerKind::Softmax: return "softmax";
    }
    return "?";
}

struct LayerPlan {
    LayerDesc desc;
    Shape3 in_shape, out_shape;
    std::size_t w_off = 0, w_cnt = 0, b_off = 0, b_cnt = 0;
    int param_index = -1;  // position among parameterized layers, -1 otherwise
};

struct Plan {
    std::vector<LayerPlan> layers;
    Shape3 input;
    int classes = 0;
    std::size_t params = 0;
    int n_param_layers = 0;
};

Plan build_plan(const ModelSpec& spec) {
    if (spec.layers.empty()) throw ShapeError("model has no layers");
    Plan plan;
    plan.input = spec.input_shape;
    Shape3 cur = spec.input_shape;
    if (cur.size() <= 0) throw ShapeError("input shape has nonpositive size");
    std::size_t offset = 0;
    int softmax_count = 0;
    for (std::size_t li = 0; li < spec.layers.size(); ++li) {
        LayerPlan lp;
        lp.desc = spec.layers[li];
        lp.in_shape = cur;
        const auto pair_msg = [&](const std::string& why) {
            return "layer " + std::to_string(li > 0 ? li - 1 : 0) + " -> layer " +
                   std::to_string(li) + " (" + kind_name(lp.desc.kind) + "): " + why;
        };
        switch (lp.desc.kind) {
            case LayerKind::Dense:
                if (cur.size() != lp.desc.in)
                    throw ShapeError(pair_msg("dense expects " + std::to_string(lp.desc.in) +
                                              " inputs, got " + std::to_string(cur.size())));
                if (lp.desc.out <= 0) throw ShapeError(pair_msg("dense output must be positive"));
                lp.out_shape = {1, 1, lp.desc.out};
                lp.param_index = plan.n_param_layers++;
                lp.w_off = offset;
                lp.w_cnt = static_cast<std::size_t>(lp.desc.in) * lp.desc.out;
                lp.b_off = offset + lp.w_cnt;
                lp.b_cnt = static_cast<std::size_t>(lp.desc.out);
                offset += lp.w_cnt + lp.b_cnt;
                break;
            case LayerKind::Conv2d: {
                if (cur.c != lp.desc.in_ch)
                    throw ShapeError(pair_msg("conv2d expects " + std::to_string(lp.desc.in_ch) +
                                              " channels, got " + std::to_string(cur.c)));
                if (lp.desc.k <= 0 || cur.h < lp.desc.k || cur.w < lp.desc.k)
                    throw ShapeError(pair_msg("kernel " + std::to_string(lp.desc.k) +
                                              " does not fit " + std::to_string(cur.h) + "x" +
                                              std::to_string(cur.w)));
                lp.out_shape = {lp.desc.out_ch, cur.h - lp.desc.k + 1, cur.w - lp.desc.k + 1};
                lp.param_index = plan.n_param_layers++;
                lp.w_off = offset;
                lp.w_cnt = static_cast<std::size_t>(lp.desc.out_ch) * lp.desc.in_ch * lp.desc.k * lp.desc.k;
                lp.b_off = offset + lp.w_cnt;
                lp.b_cnt = static_cast<std::size_t>(lp.desc.out_ch);
                offset += lp.w_cnt + lp.b_cnt;
                break;
            }
            case LayerKind::Relu:
            case LayerKind::Softmax:
                lp.out_shape = cur;
                if (lp.desc.kind == LayerKind::Softmax) ++softmax_count;
                break;
            case LayerKind::MaxPool2:
                if (cur.h < 2 || cur.w < 2)
                    throw ShapeError(pair_msg("maxpool2 needs h,w >= 2, got " +
                                              std::to_string(cur.h) + "x" + std::to_string(cur.w)));
                lp.out_shape = {cur.c, cur.h / 2, cur.w / 2};
                break;
            case LayerKind::Flatten:
                lp.out_shape = {1, 1, cur.size()};
                break;
        }
        cur = lp.out_shape;
        plan.layers.push_back(lp);
    }
    if (softmax_count != 1 || plan.layers.back().desc.kind != LayerKind::Softmax)
        throw ShapeError("classification model needs exactly one terminal softmax");
    plan.classes = cur.size();
    plan.params = offset;
    return plan;
}

// Per-batch forward/backward buffers. acts[0] is the input; acts[l+1] the
// output of layer l. MaxPool keeps the winning input offset per output cell.
struct Workspace {
    std::vector<std::vector<double>> acts;
    std::vector<std::vector<int>> pool_arg;
    std::vector<double> grad_a, grad_b;  // ping-pong activation gradients

    void resize(const Plan& plan, int batch) {
        acts.assign(plan.layers.size() + 1, {});
        pool_arg.assign(plan.layers.size(), {});
        acts[0].resize(static_cast<std::size_t>(batch) * plan.input.size());
        std::size_t max_sz = acts[0].size();
        for (std::size_t l = 0; l < plan.layers.size(); ++l) {
            const std::size_t sz = static_cast<std::size_t>(batch) * plan.layers[l].out_shape.size();
            acts[l + 1].resize(sz);
            max_sz = std::max(max_sz, sz);
            if (plan.layers[l].desc.kind == LayerKind::MaxPool2) pool_arg[l].resize(sz);
        }
        grad_a.resize(max_sz);
        grad_b.resize(max_sz);
    }
};

void forward_batch(const Plan& plan, const double* weights, Workspace& ws, int batch) {
    for (std::size_t l = 0; l < plan.layers.size(); ++l) {
        const LayerPlan& lp = plan.layers[l];
        const std::vector<double>& in = ws.acts[l];
        std::vector<double>& out = ws.acts[l + 1];
        const int in_sz = lp.in_shape.size();
        const int out_sz = lp.out_shape.size();
        switch (lp.desc.kind) {
            case LayerKind::Dense: {
                const double* W = weights + lp.w_off;
                const double* bias = weights + lp.b_off;
                for (int b = 0; b < batch; ++b) {
                    const double* x = in.data() + static_cast<std::size_t>(b) * in_sz;
                    double* z = out.data() + static_cast<std::size_t>(b) * out_sz;
                    for (int o = 0; o < out_sz; ++o) {
                        const double* row = W + static_cast<std::size_t>(o) * in_sz;
                        double acc = bias[o];
                        for (int i = 0; i < in_sz; ++i) acc += row[i] * x[i];
                        z[o] = acc;
                    }
                }
                break;
            }
            case LayerKind::Conv2d: {
                const double* K = weights + lp.w_off;
                const double* bias = weights + lp.b_off;
                const int ih = lp.in_shape.h, iw = lp.in_shape.w, ic = lp.in_shape.c;
                const int oh = lp.out_shape.h, ow = lp.out_shape.w, oc = lp.out_shape.c;
                const int k = lp.desc.k;
                for (int b = 0; b < batch; ++b) {
                    const double* x = in.data() + static_cast<std::size_t>(b) * in_sz;
                    double* z = out.data() + static_cast<std::size_t>(b) * out_sz;
                    for (int o = 0; o < oc; ++o) {
                        for (int y = 0; y < oh; ++y)
                            for (int xx = 0; xx < ow; ++xx) {
                                double acc = bias[o];
                                for (int c = 0; c < ic; ++c) {
                                    const double* xc = x + static_cast<std::size_t>(c) * ih * iw;
                                    const double* kc = K + ((static_cast<std::size_t>(o) * ic + c) * k) * k;
                                    for (int i = 0; i < k; ++i) {
                                        const double* xr = xc + static_cast<std::size_t>(y + i) * iw + xx;
                                        const double* kr = kc + static_cast<std::size_t>(i) * k;
                                        for (int j = 0; j < k; ++j) acc += kr[j] * xr[j];
                                    }
                                }
                                z[(static_cast<std::size_t>(o) * oh + y) * ow + xx] = acc;
                            }
                    }
                }
                break;
            }
            case LayerKind::Relu:
                for (std::size_t i = 0; i < static_cast<std::size_t>(batch) * out_sz; ++i)
                    out[i] = in[i] > 0.0 ? in[i] : 0.0;
                break;
            case LayerKind::MaxPool2: {
                const int ih = lp.in_shape.h, iw = lp.in_shape.w, c_n = lp.in_shape.c;
                const int oh = lp.out_shape.h, ow = lp.out_shape.w;
                std::vector<int>& arg = ws.pool_arg[l];
                for (int b = 0; b < batch; ++b) {
                    const double* x = in.data() + static_cast<std::size_t>(b) * in_sz;
                    double* z = out.data() + static_cast<std::size_t>(b) * out_sz;
                    int* am = arg.data() + static_cast<std::size_t>(b) * out_sz;
                    for (int c = 0; c < c_n; ++c)
                        for (int y = 0; y < oh; ++y)
                            for (int xx = 0; xx < ow; ++xx) {
                                int best = (c * ih + 2 * y) * iw + 2 * xx;
                                double bv = x[best];
                                const int cands[3] = {best + 1, best + iw, best + iw + 1};
                                for (int cc : cands)
                                    if (x[cc] > bv) { bv = x[cc]; best = cc; }
                                z[(c * oh + y) * ow + xx] = bv;
                                am[(c * oh + y) * ow + xx] = best;
                            }
                }
                break;
            }
            case LayerKind::Flatten:
                std::copy(in.begin(), in.begin() + static_cast<std::size_t>(batch) * out_sz, out.begin());
                break;
            case LayerKind::Softmax:
                for (int b = 0; b < batch; ++b) {
                    const double* z = in.data() + static_cast<std::size_t>(b) * out_sz;
                    double* p = out.data() + static_cast<std::size_t>(b) * out_sz;
                    double mx = z[0];
                    for (int i = 1; i < out_sz; ++i) mx = std::max(mx, z[i]);
                    double sum = 0.0;
                    for (int i = 0; i < out_sz; ++i) {
                        p[i] = std::exp(z[i] - mx);
                        sum += p[i];
                    }
                    for (int i = 0; i < out_sz; ++i) p[i] /= sum;
                }
                break;
        }
    }
}

// Backward pass for cross-entropy against the terminal softmax; accumulates
// d(mean CE)/d(weights) * batch into grad (caller divides by sample count).
void backward_batch(const Plan& plan, const double* weights, Workspace& ws, int batch,
                    const int* labels, double* grad) {
    const int classes = plan.classes;
    // Fused softmax+CE seed: dz = p - onehot, per sample.
    double* g = ws.grad_a.data();
    {
        const std::vector<double>& probs = ws.acts.back();
        for (int b = 0; b < batch; ++b) {
            const double* p = probs.data() + static_cast<std::size_t>(b) * classes;
            double* row = g + static_cast<std::size_t>(b) * classes;
            for (int i = 0; i < classes; ++i) row[i] = p[i];
            row[labels[b]] -= 1.0;
        }
    }
    double* g_next = ws.grad_b.data();
    for (std::size_t li = plan.layers.size(); li-- > 0;) {
        const LayerPlan& lp = plan.layers[li];
        if (lp.desc.kind == LayerKind::Softmax) continue;  // handled by the seed
        const std::vector<double>& in = ws.acts[li];
        const int in_sz = lp.in_shape.size();
        const int out_sz = lp.out_shape.size();
        switch (lp.desc.kind) {
            case LayerKind::Dense: {
                const double* W = weights + lp.w_off;
                double* dW = grad + lp.w_off;
                double* db = grad + lp.b_off;
                std::fill(g_next, g_next + static_cast<std::size_t>(batch) * in_sz, 0.0);
                for (int b = 0; b < batch; ++b) {
                    const double* x = in.data() + static_cast<std::size_t>(b) * in_sz;
                    const double* dz = g + static_cast<std::size_t>(b) * out_sz;
                    double* dx = g_next + static_cast<std::size_t>(b) * in_sz;
                    for (int o = 0; o < out_sz; ++o) {
                        const double d = dz[o];
                        if (d == 0.0) continue;
                        double* dWr = dW + static_cast<std::size_t>(o) * in_sz;
                        const double* Wr = W + static_cast<std::size_t>(o) * in_sz;
                        for (int i = 0; i < in_sz; ++i) {
                            dWr[i] += d * x[i];
                            dx[i] += Wr[i] * d;
                        }
                        db[o] += d;
                    }
                }
                std::swap(g, g_next);
                break;
            }
            case LayerKind::Conv2d: {
                const double* K = weights + lp.w_off;
                double* dK = grad + lp.w_off;
                double* db = grad + lp.b_off;
                const int ih = lp.in_shape.h, iw = lp.in_shape.w, ic = lp.in_shape.c;
                const int oh = lp.out_shape.h, ow = lp.out_shape.w, oc = lp.out_shape.c;
                const int k = lp.desc.k;
                std::fill(g_next, g_next + static_cast<std::size_t>(batch) * in_sz, 0.0);
                for (int b = 0; b < batch; ++b) {
                    const double* x = in.data() + static_cast<std::size_t>(b) * in_sz;
                    const double* dz = g + static_cast<std::size_t>(b) * out_sz;
                    double* dx = g_next + static_cast<std::size_t>(b) * in_sz;
                    for (int o = 0; o < oc; ++o)
                        for (int y = 0; y < oh; ++y)
                            for (int xx = 0; xx < ow; ++xx) {
                                const double d = dz[(static_cast<std::size_t>(o) * oh + y) * ow + xx];
                                if (d == 0.0) continue;
                                db[o] += d;
                                for (int c = 0; c < ic; ++c) {
                                    const double* xc = x + static_cast<std::size_t>(c) * ih * iw;
                                    double* dxc = dx + static_cast<std::size_t>(c) * ih * iw;
                                    const std::size_t base = (static_cast<std::size_t>(o) * ic + c) * k * k;
                                    for (int i = 0; i < k; ++i)
                                        for (int j = 0; j < k; ++j) {
                                            const std::size_t xoff =
                                                static_cast<std::size_t>(y + i) * iw + (xx + j);
                                            dK[base + static_cast<std::size_t>(i) * k + j] += d * xc[xoff];
                                            dxc[xoff] += K[base + static_cast<std::size_t>(i) * k + j] * d;
                                        }
                                }
                            }
                }
                std::swap(g, g_next);
                break;
            }
            case LayerKind::Relu:
                for (std::size_t i = 0; i < static_cast<std::size_t>(batch) * out_sz; ++i)
                    g[i] = in[i] > 0.0 ? g[i] : 0.0;
                break;
            case LayerKind::MaxPool2: {
                const std::vector<int>& arg = ws.pool_arg[li];
                std::fill(g_next, g_next + static_cast<std::size_t>(batch) * in_sz, 0.0);
                for (int b = 0; b < batch; ++b) {
                    const double* dz = g + static_cast<std::size_t>(b) * out_sz;
                    double* dx = g_next + static_cast<std::size_t>(b) * in_sz;
                    const int* am = arg.data() + static_cast<std::size_t>(b) * out_sz;
                    for (int i = 0; i < out_sz; ++i) dx[am[i]] += dz[i];
                }
                std::swap(g, g_next);
                break;
            }
            case LayerKind::Flatten:
                break;  // gradient passes through unchanged
            case LayerKind::Softmax:
                break;
        }
    }
}

void load_inputs(const Plan& plan, Workspace& ws, const Dataset& data,
                 const std::vector<int>& indices, std::size_t first, int batch) {
    const std::size_t in_sz = static_cast<std::size_t>(plan.input.size());
    for (int b = 0; b < batch; ++b) {
        const double* src = data.sample(static_cast<std::size_t>(indices[first + b]));
        std::copy(src, src + in_sz, ws.acts[0].begin() + static_cast<std::size_t>(b) * in_sz);
    }
}

void capture_maps(const Plan& plan, const Workspace& ws, int batch, const LayerMask& mask,
                  int am_dim, std::vector<ActivationMap>& out, int first_sample_index) {
    for (int b = 0; b < batch; ++b) {
        ActivationMap am;
        am.sample_index = first_sample_index + b;
        am.values.reserve(static_cast<std::size_t>(am_dim));
        for (std::size_t l = 0; l < plan.layers.size(); ++l) {
            const LayerPlan& lp = plan.layers[l];
            if (lp.param_index < 0 || !mask[static_cast<std::size_t>(lp.param_index)]) continue;
            const int sz = lp.out_shape.size();
            const double* z = ws.acts[l + 1].data() + static_cast<std::size_t>(b) * sz;
            am.values.insert(am.values.end(), z, z + sz);
        }
        out.push_back(std::move(am));
    }
}

constexpr int kEvalChunk = 256;

} // namespace

ModelSpec mlp_spec(int input_size, int hidden, int classes, std::uint64_t seed) {
    ModelSpec spec;
    spec.input_shape = {1, 1, input_size};
    spec.layers = {LayerDesc::dense(input_size, hidden), LayerDesc::relu(),
                   LayerDesc::dense(hidden, classes), LayerDesc::softmax()};
    spec.seed = seed;
    return spec;
}

ModelSpec cnn_spec(Shape3 input_shape, int classes, std::uint64_t seed) {
    ModelSpec spec;
    spec.input_shape = input_shape;
    const int h1 = (input_shape.h - 2) / 2, w1 = (input_shape.w - 2) / 2;
    const int h2 = (h1 - 2) / 2, w2 = (w1 - 2) / 2;
    spec.layers = {LayerDesc::conv2d(input_shape.c, 8, 3), LayerDesc::relu(), LayerDesc::maxpool2(),
                   LayerDesc::conv2d(8, 16, 3),            LayerDesc::relu(), LayerDesc::maxpool2(),
                   LayerDesc::flatten(), LayerDesc::dense(16 * h2 * w2, classes),
                   LayerDesc::softmax()};
    spec.seed = seed;
    return spec;
}

std::vector<Shape3> layer_shapes(const ModelSpec& spec) {
    const Plan plan = build_plan(spec);
    std::vector<Shape3> shapes;
    shapes.reserve(plan.layers.size());
    for (const auto& lp : plan.layers) shapes.push_back(lp.out_shape);
    return shapes;
}

int num_classes(const ModelSpec& spec) { return build_plan(spec).classes; }

std::size_t param_count(const ModelSpec& spec) { return build_plan(spec).params; }

WeightVector init_model(const ModelSpec& spec) {
    const Plan plan = build_plan(spec);
    WeightVector w;
    w.values.assign(plan.params, 0.0);
    Prng rng(spec.seed);
    for (const auto& lp : plan.layers) {
        if (lp.param_index < 0) continue;
        int fan_in, fan_out;
        if (lp.desc.kind == LayerKind::Dense) {
            fan_in = lp.desc.in;
            fan_out = lp.desc.out;
        } else {
            fan_in = lp.desc.in_ch * lp.desc.k * lp.desc.k;
            fan_out = lp.desc.out_ch * lp.desc.k * lp.desc.k;
        }
        const double a = std::sqrt(6.0 / (fan_in + fan_out));
        for (std::size_t i = 0; i < lp.w_cnt; ++i)
            w.values[lp.w_off + i] = (2.0 * rng.uniform01() - 1.0) * a;
        // biases stay zero
    }
    return w;
}

LayerMask full_layer_mask(const ModelSpec& spec) {
    return LayerMask(static_cast<std::size_t>(build_plan(spec).n_param_layers), true);
}

int activation_dim(const ModelSpec& spec, const LayerMask& mask) {
    const Plan plan = build_plan(spec);
    if (mask.size() != static_cast<std::size_t>(plan.n_param_layers))
        throw ShapeError("layer mask length " + std::to_string(mask.size()) + " != " +
                         std::to_string(plan.n_param_layers) + " parameterized layers");
    int dim = 0;
    for (const auto& lp : plan.layers)
        if (lp.param_index >= 0 && mask[static_cast<std::size_t>(lp.param_index)])
            dim += lp.out_shape.size();
    return dim;
}

ForwardResult forward(const WeightVector& weights, const ModelSpec& spec, const Dataset& data,
                      const std::vector<int>& indices, const LayerMask* capture) {
    const Plan plan = build_plan(spec);
    if (weights.size() != plan.params)
        throw ShapeError("weight vector length " + std::to_string(weights.size()) +
                         " != parameter count " + std::to_string(plan.params));
    if (data.shape.size() != plan.input.size())
        throw ShapeError("batch sample size " + std::to_string(data.shape.size()) +
                         " != model input size " + std::to_string(plan.input.size()));
    int am_dim = 0;
    if (capture) am_dim = activation_dim(spec, *capture);

    ForwardResult res;
    res.batch_size = static_cast<int>(indices.size());
    res.classes = plan.classes;
    res.probs.resize(indices.size() * static_cast<std::size_t>(plan.classes));
    if (capture) res.maps.reserve(indices.size());

    Workspace ws;
    std::size_t done = 0;
    while (done < indices.size()) {
        const int batch = static_cast<int>(std::min<std::size_t>(kEvalChunk, indices.size() - done));
        ws.resize(plan, batch);
        load_inputs(plan, ws, data, indices, done, batch);
        forward_batch(plan, weights.data(), ws, batch);
        std::copy(ws.acts.back().begin(),
                  ws.acts.back().begin() + static_cast<std::size_t>(batch) * plan.classes,
                  res.probs.begin() + done * static_cast<std::size_t>(plan.classes));
        if (capture) capture_maps(plan, ws, batch, *capture, am_dim, res.maps, static_cast<int>(done));
        done += static_cast<std::size_t>(batch);
    }
    return res;
}

std::pair<double, std::vector<double>> loss_and_gradient(const WeightVector& weights,
                                                         const ModelSpec& spec,
                                                         const DataView& view) {
    const Plan plan = build_plan(spec);
    if (view.size() == 0) throw Error("loss_and_gradient: empty dataset");
    if (weights.size() != plan.params) throw ShapeError("weight vector length mismatch");
    std::vector<double> grad(plan.params, 0.0);
    double loss_sum = 0.0;
    Workspace ws;
    std::vector<int> labels(kEvalChunk);
    std::size_t done = 0;
    while (done < view.size()) {
        const int batch = static_cast<int>(std::min<std::size_t>(kEvalChunk, view.size() - done));
        ws.resize(plan, batch);
        load_inputs(plan, ws, *view.data, view.indices, done, batch);
        for (int b = 0; b < batch; ++b) labels[static_cast<std::size_t>(b)] = view.label(done + b);
        forward_batch(plan, weights.data(), ws, batch);
        const std::vector<double>& probs = ws.acts.back();
        for (int b = 0; b < batch; ++b) {
            const double p = probs[static_cast<std::size_t>(b) * plan.classes + labels[b]];
            loss_sum += -std::log(std::max(p, 1e-300));
        }
        backward_batch(plan, weights.data(), ws, batch, labels.data(), grad.data());
        done += static_cast<std::size_t>(batch);
    }
    const double inv = 1.0 / static_cast<double>(view.size());
    for (auto& g : grad) g *= inv;
    return {loss_sum * inv, std::move(grad)};
}

WeightVector train_local(const WeightVector& weights, const ModelSpec& spec, const DataView& view,
                         int epochs, double lr, int batch_size,
                         const std::vector<std::uint8_t>* grad_mask) {
    const Plan plan = build_plan(spec);
    if (view.size() == 0) throw Error("train_local: empty dataset");
    if (lr <= 0.0) throw Error("train_local: learning rate must be positive");
    if (batch_size < 1) throw Error("train_local: batch size must be >= 1");
    if (weights.size() != plan.params) throw ShapeError("weight vector length mismatch");
    if (grad_mask && grad_mask->size() != plan.params)
        throw ShapeError("grad mask length " + std::to_string(grad_mask->size()) +
                         " != parameter count " + std::to_string(plan.params));

    WeightVector w = weights;
    std::vector<double> grad(plan.params);
    Workspace ws;
    std::vector<int> labels(static_cast<std::size_t>(batch_size));
    for (int e = 0; e < epochs; ++e) {
        std::size_t done = 0;
        while (done < view.size()) {
            const int batch =
                static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(batch_size),
                                                       view.size() - done));
            ws.resize(plan, batch);
            load_inputs(plan, ws, *view.data, view.indices, done, batch);
            for (int b = 0; b < batch; ++b) labels[static_cast<std::size_t>(b)] = view.label(done + b);
            forward_batch(plan, w.data(), ws, batch);
            std::fill(grad.begin(), grad.end(), 0.0);
            backward_batch(plan, w.data(), ws, batch, labels.data(), grad.data());
            const double step = lr / static_cast<double>(batch);
            if (grad_mask) {
                for (std::size_t i = 0; i < plan.params; ++i)
                    if ((*grad_mask)[i]) w.values[i] -= step * grad[i];
            } else {
                for (std::size_t i = 0; i < plan.params; ++i) w.values[i] -= step * grad[i];
            }
            done += static_cast<std::size_t>(batch);
        }
    }
    return w;
}

double evaluate(const WeightVector& weights, const ModelSpec& spec, const DataView& view) {
    if (view.size() == 0) throw Error("evaluate: empty dataset");
    const ForwardResult res = forward(weights, spec, *view.data, view.indices);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < view.size(); ++i) {
        const double* p = res.sample_probs(static_cast<int>(i));
        int best = 0;
        for (int c = 1; c < res.classes; ++c)
            if (p[c] > p[best]) best = c;  // ties keep the lowest class index
        if (best == view.label(i)) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(view.size());
}

} // namespace flcleaner
