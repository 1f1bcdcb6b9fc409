#include "flcleaner/cvae.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "flcleaner/errors.hpp"
#include "flcleaner/geomed.hpp"
#include "flcleaner/rng.hpp"
#include "flcleaner/serialize.hpp"

namespace flcleaner {

namespace {

double stable_sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// y = W (rows x cols) * x + b
void matvec(const std::vector<double>& W, const std::vector<double>& b, const double* x,
            int rows, int cols, double* y) {
    for (int r = 0; r < rows; ++r) {
        const double* row = W.data() + static_cast<std::size_t>(r) * cols;
        double acc = b[static_cast<std::size_t>(r)];
        for (int c = 0; c < cols; ++c) acc += row[c] * x[c];
        y[r] = acc;
    }
}

void xavier_fill(std::vector<double>& W, int rows, int cols, Prng& rng) {
    const double a = std::sqrt(6.0 / (rows + cols));
    W.resize(static_cast<std::size_t>(rows) * cols);
    for (auto& v : W) v = (2.0 * rng.uniform01() - 1.0) * a;
}

// Forward activations kept for the backward pass.
struct Trace {
    std::vector<double> u;        // [x ; onehot]
    std::vector<double> h_pre, h; // encoder hidden
    std::vector<double> mu, logvar;
    std::vector<double> z;
    std::vector<double> v;        // [z ; onehot]
    std::vector<double> g_pre, g; // decoder hidden
    std::vector<double> xhat;
};

void run_forward(const CvaeState& s, const std::vector<double>& x, int label,
                 const double* noise, Trace& t) {
    const int D = s.input_dim, L = s.latent_dim, K = s.num_classes, H = kCvaeHidden;
    if (static_cast<int>(x.size()) != D)
        throw ShapeError("cvae input dim " + std::to_string(x.size()) + " != " + std::to_string(D));
    if (label < 0 || label >= K) throw Error("cvae label out of range");

    t.u.assign(static_cast<std::size_t>(D + K), 0.0);
    std::copy(x.begin(), x.end(), t.u.begin());
    t.u[static_cast<std::size_t>(D + label)] = 1.0;

    t.h_pre.resize(static_cast<std::size_t>(H));
    matvec(s.enc_w1, s.enc_b1, t.u.data(), H, D + K, t.h_pre.data());
    t.h.resize(static_cast<std::size_t>(H));
    for (int i = 0; i < H; ++i) t.h[i] = t.h_pre[i] > 0.0 ? t.h_pre[i] : 0.0;

    std::vector<double> out(static_cast<std::size_t>(2 * L));
    matvec(s.enc_w2, s.enc_b2, t.h.data(), 2 * L, H, out.data());
    t.mu.assign(out.begin(), out.begin() + L);
    t.logvar.assign(out.begin() + L, out.end());

    t.z.resize(static_cast<std::size_t>(L));
    for (int l = 0; l < L; ++l) {
        const double sigma = std::exp(0.5 * t.logvar[l]);
        t.z[l] = t.mu[l] + (noise ? sigma * noise[l] : 0.0);
    }

    t.v.assign(static_cast<std::size_t>(L + K), 0.0);
    std::copy(t.z.begin(), t.z.end(), t.v.begin());
    t.v[static_cast<std::size_t>(L + label)] = 1.0;

    t.g_pre.resize(static_cast<std::size_t>(H));
    matvec(s.dec_w1, s.dec_b1, t.v.data(), H, L + K, t.g_pre.data());
    t.g.resize(static_cast<std::size_t>(H));
    for (int i = 0; i < H; ++i) t.g[i] = t.g_pre[i] > 0.0 ? t.g_pre[i] : 0.0;

    t.xhat.resize(static_cast<std::size_t>(D));
    std::vector<double> o(static_cast<std::size_t>(D));
    matvec(s.dec_w2, s.dec_b2, t.g.data(), D, H, o.data());
    for (int i = 0; i < D; ++i) t.xhat[i] = stable_sigmoid(o[i]);
}

CvaeLoss loss_from_trace(const CvaeState& s, const std::vector<double>& x, const Trace& t) {
    const int D = s.input_dim, L = s.latent_dim;
    CvaeLoss loss;
    for (int i = 0; i < D; ++i) {
        const double d = t.xhat[i] - x[i];
        loss.mse += d * d;
    }
    loss.mse /= D;
    for (int l = 0; l < L; ++l) {
        const double var = std::exp(t.logvar[l]);
        loss.kl += 0.5 * (var + t.mu[l] * t.mu[l] - 1.0 - t.logvar[l]);
    }
    loss.total = loss.mse + s.beta * loss.kl;
    if (!std::isfinite(loss.total))
        throw NumericError("cvae loss diverged (mse=" + std::to_string(loss.mse) +
                           ", kl=" + std::to_string(loss.kl) + ")");
    return loss;
}

struct GradBuffers {
    std::vector<double> enc_w1, enc_b1, enc_w2, enc_b2;
    std::vector<double> dec_w1, dec_b1, dec_w2, dec_b2;

    void resize_like(const CvaeState& s) {
        enc_w1.assign(s.enc_w1.size(), 0.0);
        enc_b1.assign(s.enc_b1.size(), 0.0);
        enc_w2.assign(s.enc_w2.size(), 0.0);
        enc_b2.assign(s.enc_b2.size(), 0.0);
        dec_w1.assign(s.dec_w1.size(), 0.0);
        dec_b1.assign(s.dec_b1.size(), 0.0);
        dec_w2.assign(s.dec_w2.size(), 0.0);
        dec_b2.assign(s.dec_b2.size(), 0.0);
    }
};

// Accumulate d(total)/d(params) for one sample into `grads`.
void run_backward(const CvaeState& s, const std::vector<double>& x, const double* noise,
                  const Trace& t, GradBuffers& grads) {
    const int D = s.input_dim, L = s.latent_dim, K = s.num_classes, H = kCvaeHidden;
    const double beta = s.beta;

    // Reconstruction head.
    std::vector<double> d_o(static_cast<std::size_t>(D));
    for (int i = 0; i < D; ++i) {
        const double d_xhat = 2.0 * (t.xhat[i] - x[i]) / D;
        d_o[i] = d_xhat * t.xhat[i] * (1.0 - t.xhat[i]);
    }
    std::vector<double> d_g(static_cast<std::size_t>(H), 0.0);
    for (int i = 0; i < D; ++i) {
        const double d = d_o[static_cast<std::size_t>(i)];
        double* gw = grads.dec_w2.data() + static_cast<std::size_t>(i) * H;
        const double* w = s.dec_w2.data() + static_cast<std::size_t>(i) * H;
        for (int j = 0; j < H; ++j) {
            gw[j] += d * t.g[j];
            d_g[j] += w[j] * d;
        }
        grads.dec_b2[static_cast<std::size_t>(i)] += d;
    }
    std::vector<double> d_v(static_cast<std::size_t>(L + K), 0.0);
    for (int j = 0; j < H; ++j) {
        if (t.g_pre[j] <= 0.0) continue;
        const double d = d_g[static_cast<std::size_t>(j)];
        double* gw = grads.dec_w1.data() + static_cast<std::size_t>(j) * (L + K);
        const double* w = s.dec_w1.data() + static_cast<std::size_t>(j) * (L + K);
        for (int m = 0; m < L + K; ++m) {
            gw[m] += d * t.v[m];
            d_v[m] += w[m] * d;
        }
        grads.dec_b1[static_cast<std::size_t>(j)] += d;
    }

    // Reparameterized latent + KL terms.
    std::vector<double> d_out(static_cast<std::size_t>(2 * L));
    for (int l = 0; l < L; ++l) {
        const double dz = d_v[static_cast<std::size_t>(l)];
        d_out[static_cast<std::size_t>(l)] = dz + beta * t.mu[l];
        const double sigma = std::exp(0.5 * t.logvar[l]);
        const double n = noise ? noise[l] : 0.0;
        d_out[static_cast<std::size_t>(L + l)] =
            dz * 0.5 * sigma * n + beta * 0.5 * (std::exp(t.logvar[l]) - 1.0);
    }

    std::vector<double> d_h(static_cast<std::size_t>(H), 0.0);
    for (int i = 0; i < 2 * L; ++i) {
        const double d = d_out[static_cast<std::size_t>(i)];
        double* gw = grads.enc_w2.data() + static_cast<std::size_t>(i) * H;
        const double* w = s.enc_w2.data() + static_cast<std::size_t>(i) * H;
        for (int j = 0; j < H; ++j) {
            gw[j] += d * t.h[j];
            d_h[j] += w[j] * d;
        }
        grads.enc_b2[static_cast<std::size_t>(i)] += d;
    }
    for (int j = 0; j < H; ++j) {
        if (t.h_pre[j] <= 0.0) continue;
        const double d = d_h[static_cast<std::size_t>(j)];
        double* gw = grads.enc_w1.data() + static_cast<std::size_t>(j) * (D + K);
        for (int m = 0; m < D + K; ++m) gw[m] += d * t.u[m];
        grads.enc_b1[static_cast<std::size_t>(j)] += d;
    }
}

void append(std::vector<double>& dst, const std::vector<double>& src) {
    dst.insert(dst.end(), src.begin(), src.end());
}

std::size_t take(const std::vector<double>& flat, std::size_t pos, std::vector<double>& dst) {
    std::copy(flat.begin() + static_cast<std::ptrdiff_t>(pos),
              flat.begin() + static_cast<std::ptrdiff_t>(pos + dst.size()), dst.begin());
    return pos + dst.size();
}

} // namespace

double beta_at_epoch(const BetaSchedule& schedule, int epoch) {
    if (epoch < 1) return schedule.initial;
    if (schedule.step_epoch <= 0) return schedule.initial;
    return schedule.initial + schedule.increment * ((epoch - 1) / schedule.step_epoch);
}

std::vector<double> CvaeState::flatten() const {
    std::vector<double> flat;
    flat.reserve(enc_w1.size() + enc_b1.size() + enc_w2.size() + enc_b2.size() + dec_w1.size() +
                 dec_b1.size() + dec_w2.size() + dec_b2.size());
    append(flat, enc_w1);
    append(flat, enc_b1);
    append(flat, enc_w2);
    append(flat, enc_b2);
    append(flat, dec_w1);
    append(flat, dec_b1);
    append(flat, dec_w2);
    append(flat, dec_b2);
    return flat;
}

void CvaeState::unflatten(const std::vector<double>& flat) {
    std::size_t pos = 0;
    pos = take(flat, pos, enc_w1);
    pos = take(flat, pos, enc_b1);
    pos = take(flat, pos, enc_w2);
    pos = take(flat, pos, enc_b2);
    pos = take(flat, pos, dec_w1);
    pos = take(flat, pos, dec_b1);
    pos = take(flat, pos, dec_w2);
    pos = take(flat, pos, dec_b2);
    if (pos != flat.size()) throw Error("cvae checkpoint length mismatch");
}

CvaeState init_cvae(int input_dim, int latent_dim, int num_classes, std::uint64_t seed) {
    if (input_dim < 1 || latent_dim < 1 || num_classes < 1)
        throw Error("cvae dims must be positive");
    CvaeState s;
    s.input_dim = input_dim;
    s.latent_dim = latent_dim;
    s.num_classes = num_classes;
    s.seed = seed;
    const int H = kCvaeHidden;
    Prng rng(derive_seed(seed, 0x63766165ULL));
    xavier_fill(s.enc_w1, H, input_dim + num_classes, rng);
    s.enc_b1.assign(static_cast<std::size_t>(H), 0.0);
    xavier_fill(s.enc_w2, 2 * latent_dim, H, rng);
    s.enc_b2.assign(static_cast<std::size_t>(2 * latent_dim), 0.0);
    xavier_fill(s.dec_w1, H, latent_dim + num_classes, rng);
    s.dec_b1.assign(static_cast<std::size_t>(H), 0.0);
    xavier_fill(s.dec_w2, input_dim, H, rng);
    s.dec_b2.assign(static_cast<std::size_t>(input_dim), 0.0);
    return s;
}

CvaeTrainingSet build_training_set(const WeightVector& global_init, const ModelSpec& spec,
                                   const TriggerSet& trigger, int warmup_epochs,
                                   int harvest_epochs, double lr, int batch_size,
                                   const LayerMask& mask, std::uint64_t seed) {
    if (trigger.size() == 0) throw Error("build_training_set: empty trigger set");
    if (harvest_epochs < 1) throw Error("build_training_set: need at least one harvest epoch");

    CvaeTrainingSet ts;
    ts.dim = activation_dim(spec, mask);
    ts.num_classes = trigger.data.num_classes;
    ts.nams.reserve(trigger.size() * static_cast<std::size_t>(harvest_epochs));

    WeightVector sim = global_init;  // the server's simulated copy of the model
    std::vector<int> order(trigger.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::vector<int> natural = order;

    const auto one_epoch = [&](int epoch_id) {
        Prng rng(derive_seed(seed, 0x65706f63ULL, static_cast<std::uint64_t>(epoch_id)));
        rng.shuffle(order);
        DataView view{&trigger.data, order};
        sim = train_local(sim, spec, view, 1, lr, batch_size);
    };

    int epoch_id = 0;
    for (int e = 0; e < warmup_epochs; ++e) one_epoch(epoch_id++);
    for (int h = 0; h < harvest_epochs; ++h) {
        one_epoch(epoch_id++);
        const ForwardResult res = forward(sim, spec, trigger.data, natural, &mask);
        // GeoMed across this epoch's per-sample maps, then sigma(map - geomed).
        std::vector<std::span<const double>> pts;
        pts.reserve(res.maps.size());
        for (const auto& am : res.maps) pts.emplace_back(am.values.data(), am.values.size());
        const GeomedResult gm = geometric_median(pts);
        for (std::size_t i = 0; i < res.maps.size(); ++i) {
            std::vector<double> nam(static_cast<std::size_t>(ts.dim));
            for (int d = 0; d < ts.dim; ++d)
                nam[static_cast<std::size_t>(d)] =
                    stable_sigmoid(res.maps[i].values[static_cast<std::size_t>(d)] - gm.point[static_cast<std::size_t>(d)]);
            ts.nams.push_back(std::move(nam));
            ts.labels.push_back(trigger.data.labels[i]);
            ts.harvest_epoch.push_back(h);
        }
    }
    return ts;
}

CvaeLoss cvae_loss(const std::vector<double>& x, int label, const CvaeState& state,
                   const std::vector<double>& noise) {
    if (static_cast<int>(noise.size()) != state.latent_dim)
        throw ShapeError("noise dim != latent dim");
    Trace t;
    run_forward(state, x, label, noise.data(), t);
    return loss_from_trace(state, x, t);
}

std::pair<CvaeLoss, std::vector<double>> cvae_loss_and_gradient(const std::vector<double>& x,
                                                                int label,
                                                                const CvaeState& state,
                                                                const std::vector<double>& noise) {
    if (static_cast<int>(noise.size()) != state.latent_dim)
        throw ShapeError("noise dim != latent dim");
    Trace t;
    run_forward(state, x, label, noise.data(), t);
    const CvaeLoss loss = loss_from_trace(state, x, t);
    GradBuffers grads;
    grads.resize_like(state);
    run_backward(state, x, noise.data(), t, grads);
    std::vector<double> flat;
    append(flat, grads.enc_w1);
    append(flat, grads.enc_b1);
    append(flat, grads.enc_w2);
    append(flat, grads.enc_b2);
    append(flat, grads.dec_w1);
    append(flat, grads.dec_b1);
    append(flat, grads.dec_w2);
    append(flat, grads.dec_b2);
    return {loss, std::move(flat)};
}

CvaeState train_cvae(const CvaeTrainingSet& ts, int epochs, const BetaSchedule& schedule,
                     double lr, int batch_size, int latent_dim, std::uint64_t seed) {
    if (ts.nams.empty()) throw Error("train_cvae: empty training set");
    if (batch_size < 1) throw Error("train_cvae: batch size must be >= 1");
    CvaeState state = init_cvae(ts.dim, latent_dim, ts.num_classes, seed);

    std::vector<int> order(ts.nams.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::vector<double> noise(static_cast<std::size_t>(latent_dim));
    Trace t;
    GradBuffers grads;

    for (int epoch = 1; epoch <= epochs; ++epoch) {
        state.beta = beta_at_epoch(schedule, epoch);
        Prng shuffle_rng(derive_seed(seed, 0x73687566ULL, static_cast<std::uint64_t>(epoch)));
        shuffle_rng.shuffle(order);
        Prng noise_rng(derive_seed(seed, 0x6e6f6973ULL, static_cast<std::uint64_t>(epoch)));

        std::size_t done = 0;
        while (done < order.size()) {
            const std::size_t batch = std::min<std::size_t>(static_cast<std::size_t>(batch_size),
                                                            order.size() - done);
            grads.resize_like(state);
            for (std::size_t b = 0; b < batch; ++b) {
                const auto idx = static_cast<std::size_t>(order[done + b]);
                for (auto& n : noise) n = noise_rng.gaussian();
                run_forward(state, ts.nams[idx], ts.labels[idx], noise.data(), t);
                loss_from_trace(state, ts.nams[idx], t);  // divergence check
                run_backward(state, ts.nams[idx], noise.data(), t, grads);
            }
            const double step = lr / static_cast<double>(batch);
            const auto apply = [&](std::vector<double>& w, const std::vector<double>& g) {
                for (std::size_t i = 0; i < w.size(); ++i) w[i] -= step * g[i];
            };
            apply(state.enc_w1, grads.enc_w1);
            apply(state.enc_b1, grads.enc_b1);
            apply(state.enc_w2, grads.enc_w2);
            apply(state.enc_b2, grads.enc_b2);
            apply(state.dec_w1, grads.dec_w1);
            apply(state.dec_b1, grads.dec_b1);
            apply(state.dec_w2, grads.dec_w2);
            apply(state.dec_b2, grads.dec_b2);
            done += batch;
        }
    }
    return state;
}

double reconstruction_error(const CvaeState& state, const std::vector<double>& nam, int label) {
    Trace t;
    run_forward(state, nam, label, nullptr, t);  // z = mu
    double mse = 0.0;
    for (std::size_t i = 0; i < nam.size(); ++i) {
        const double d = t.xhat[i] - nam[i];
        mse += d * d;
    }
    return mse / static_cast<double>(nam.size());
}

std::vector<double> cvae_reconstruct(const CvaeState& state, const std::vector<double>& nam,
                                     int label) {
    Trace t;
    run_forward(state, nam, label, nullptr, t);
    return t.xhat;
}

void save_cvae(const CvaeState& state, const std::string& path) {
    nlohmann::json header;
    header["input_dim"] = state.input_dim;
    header["latent_dim"] = state.latent_dim;
    header["num_classes"] = state.num_classes;
    header["beta"] = state.beta;
    header["seed"] = state.seed;
    const std::string htext = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cvae checkpoint: cannot open " + path);
    const std::uint64_t hlen = htext.size();
    unsigned char lenbuf[8];
    for (int i = 0; i < 8; ++i) lenbuf[i] = static_cast<unsigned char>((hlen >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(lenbuf), 8);
    out.write(htext.data(), static_cast<std::streamsize>(htext.size()));
    write_f64_vector(out, state.flatten());
}

CvaeState load_cvae(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cvae checkpoint: cannot open " + path);
    unsigned char lenbuf[8];
    in.read(reinterpret_cast<char*>(lenbuf), 8);
    if (!in) throw Error("cvae checkpoint: truncated header length");
    std::uint64_t hlen = 0;
    for (int i = 0; i < 8; ++i) hlen |= static_cast<std::uint64_t>(lenbuf[i]) << (8 * i);
    std::string htext(hlen, '\0');
    in.read(htext.data(), static_cast<std::streamsize>(hlen));
    if (!in) throw Error("cvae checkpoint: truncated header");
    const auto header = nlohmann::json::parse(htext);

    CvaeState s = init_cvae(header.at("input_dim").get<int>(), header.at("latent_dim").get<int>(),
                            header.at("num_classes").get<int>(), header.at("seed").get<std::uint64_t>());
    s.beta = header.at("beta").get<double>();
    s.unflatten(read_f64_vector(in));
    return s;
}

} // namespace flcleaner
