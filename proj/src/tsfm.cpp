#include "tidecast/tsfm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include <boost/math/special_functions/digamma.hpp>

#include "tidecast/error.hpp"
#include "tidecast/kernels.hpp"
#include "tidecast/rng.hpp"

namespace tidecast::tsfm {

namespace {

constexpr double kLnEps = 1e-5;
constexpr double kSigmaFloor = 1e-6;

double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

double gelu_grad(double x) {
    const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
    const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
    return cdf + x * pdf;
}

std::size_t freq_index(FreqClass cls) { return static_cast<std::size_t>(cls); }

std::string layer_name(int l, const std::string& rest) { return "layer" + std::to_string(l) + "." + rest; }
std::string expert_name(int l, int e, const std::string& rest) {
    return layer_name(l, "expert" + std::to_string(e) + "." + rest);
}

enum class Init { zeros, ones, fan_in, embed, head_w, head_b };

struct Slot {
    std::string name;
    std::vector<std::size_t> shape;
    Init init;
};

std::vector<Slot> layout(const ModelConfig& c) {
    const auto d = static_cast<std::size_t>(c.d_model);
    const auto f = static_cast<std::size_t>(c.d_ff);
    std::vector<Slot> s;
    for (int p : c.patch_lengths) {
        const auto pp = static_cast<std::size_t>(p);
        s.push_back({"patch" + std::to_string(p) + ".W", {d, pp}, Init::fan_in});
        s.push_back({"patch" + std::to_string(p) + ".b", {d}, Init::zeros});
    }
    s.push_back({"calendar.W", {d, kCalendarDims}, Init::fan_in});
    s.push_back({"calendar.b", {d}, Init::zeros});
    s.push_back({"freq.E", {kFreqClasses, d}, Init::embed});
    if (c.positional_embedding) s.push_back({"pos.E", {static_cast<std::size_t>(c.context_patches), d}, Init::embed});
    for (int l = 0; l < c.n_layers; ++l) {
        s.push_back({layer_name(l, "ln1.g"), {d}, Init::ones});
        s.push_back({layer_name(l, "ln1.b"), {d}, Init::zeros});
        for (const char* w : {"attn.Wq", "attn.Wk", "attn.Wv", "attn.Wo"}) s.push_back({layer_name(l, w), {d, d}, Init::fan_in});
        s.push_back({layer_name(l, "ln2.g"), {d}, Init::ones});
        s.push_back({layer_name(l, "ln2.b"), {d}, Init::zeros});
        s.push_back({layer_name(l, "gate.W"), {static_cast<std::size_t>(c.n_experts), d}, Init::fan_in});
        for (int e = 0; e < c.n_experts; ++e) {
            s.push_back({expert_name(l, e, "W1"), {f, d}, Init::fan_in});
            s.push_back({expert_name(l, e, "b1"), {f}, Init::zeros});
            s.push_back({expert_name(l, e, "W2"), {d, f}, Init::fan_in});
            s.push_back({expert_name(l, e, "b2"), {d}, Init::zeros});
        }
    }
    s.push_back({"lnf.g", {d}, Init::ones});
    s.push_back({"lnf.b", {d}, Init::zeros});
    for (int p : c.patch_lengths) {
        const auto pp = static_cast<std::size_t>(p);
        s.push_back({"head" + std::to_string(p) + ".W", {3 * pp, d}, Init::head_w});
        s.push_back({"head" + std::to_string(p) + ".b", {3 * pp}, Init::head_b});
    }
    return s;
}

std::size_t count(const std::vector<std::size_t>& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

template <class M>
auto arr(M& m, const std::string& name) -> decltype(m.at(name).values.data()) {
    auto it = m.find(name);
    if (it == m.end()) throw DataError("missing array '" + name + "'");
    return it->second.values.data();
}

template <class D>
struct LayerP {
    D* ln1g;
    D* ln1b;
    D* wq;
    D* wk;
    D* wv;
    D* wo;
    D* ln2g;
    D* ln2b;
    D* gate;
    std::vector<D*> w1, b1, w2, b2;
};

template <class D>
struct ModelP {
    D* patch_w;
    D* patch_b;
    D* head_w;
    D* head_b;
    D* cal_w;
    D* cal_b;
    D* freq_e;
    D* pos_e = nullptr;
    std::vector<LayerP<D>> layers;
    D* lnf_g;
    D* lnf_b;
};

template <class D, class M>
ModelP<D> view(M& a, const ModelConfig& c, int patch_len) {
    ModelP<D> v;
    const std::string p = std::to_string(patch_len);
    v.patch_w = arr(a, "patch" + p + ".W");
    v.patch_b = arr(a, "patch" + p + ".b");
    v.head_w = arr(a, "head" + p + ".W");
    v.head_b = arr(a, "head" + p + ".b");
    v.cal_w = arr(a, "calendar.W");
    v.cal_b = arr(a, "calendar.b");
    v.freq_e = arr(a, "freq.E");
    if (c.positional_embedding) v.pos_e = arr(a, "pos.E");
    for (int l = 0; l < c.n_layers; ++l) {
        LayerP<D> L;
        L.ln1g = arr(a, layer_name(l, "ln1.g"));
        L.ln1b = arr(a, layer_name(l, "ln1.b"));
        L.wq = arr(a, layer_name(l, "attn.Wq"));
        L.wk = arr(a, layer_name(l, "attn.Wk"));
        L.wv = arr(a, layer_name(l, "attn.Wv"));
        L.wo = arr(a, layer_name(l, "attn.Wo"));
        L.ln2g = arr(a, layer_name(l, "ln2.g"));
        L.ln2b = arr(a, layer_name(l, "ln2.b"));
        L.gate = arr(a, layer_name(l, "gate.W"));
        for (int e = 0; e < c.n_experts; ++e) {
            L.w1.push_back(arr(a, expert_name(l, e, "W1")));
            L.b1.push_back(arr(a, expert_name(l, e, "b1")));
            L.w2.push_back(arr(a, expert_name(l, e, "W2")));
            L.b2.push_back(arr(a, expert_name(l, e, "b2")));
        }
        v.layers.push_back(std::move(L));
    }
    v.lnf_g = arr(a, "lnf.g");
    v.lnf_b = arr(a, "lnf.b");
    return v;
}

// y = W x (+ b), W is out x in row-major.
void linear(const double* w, const double* b, std::size_t out, std::size_t in, const double* x, double* y) {
    kernels::matvec({w, out * in}, out, in, {x, in}, {y, out});
    if (b)
        for (std::size_t o = 0; o < out; ++o) y[o] += b[o];
}

// dW += dy x^T; dx += W^T dy.
void linear_back(const double* w, std::size_t out, std::size_t in, const double* x, const double* dy, double* dw,
                 double* dx) {
    for (std::size_t o = 0; o < out; ++o) {
        if (dy[o] == 0.0) continue;
        kernels::axpy(dy[o], {x, in}, {dw + o * in, in});
        if (dx) kernels::axpy(dy[o], {w + o * in, in}, {dx, in});
    }
}

void layer_norm(const double* x, const double* g, const double* b, std::size_t d, double* out, double* xhat,
                double& rstd) {
    double mean = 0.0;
    for (std::size_t i = 0; i < d; ++i) mean += x[i];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t i = 0; i < d; ++i) var += (x[i] - mean) * (x[i] - mean);
    var /= static_cast<double>(d);
    rstd = 1.0 / std::sqrt(var + kLnEps);
    for (std::size_t i = 0; i < d; ++i) {
        xhat[i] = (x[i] - mean) * rstd;
        out[i] = g[i] * xhat[i] + b[i];
    }
}

void layer_norm_back(const double* dout, const double* g, const double* xhat, double rstd, std::size_t d, double* dg,
                     double* db, double* dx) {
    double m1 = 0.0, m2 = 0.0;
    std::vector<double> dxh(d);
    for (std::size_t i = 0; i < d; ++i) {
        dg[i] += dout[i] * xhat[i];
        db[i] += dout[i];
        dxh[i] = dout[i] * g[i];
        m1 += dxh[i];
        m2 += dxh[i] * xhat[i];
    }
    m1 /= static_cast<double>(d);
    m2 /= static_cast<double>(d);
    for (std::size_t i = 0; i < d; ++i) dx[i] += rstd * (dxh[i] - m1 - xhat[i] * m2);
}

struct LayerCache {
    std::vector<double> x_in, a, a_hat, a_rstd, q, k, v, p, o, x1, b, b_hat, b_rstd, g, r, pre, hid, y;
    std::vector<int> sel;
};

struct Cache {
    std::size_t n = 0;
    std::size_t patch = 0;
    std::size_t fidx = 0;
    std::vector<double> inp, cal;
    std::vector<std::uint8_t> observed;
    std::vector<LayerCache> layers;
    std::vector<double> xl, h, h_hat, h_rstd, raw;
};

bool allowed(const Cache& c, std::size_t i, std::size_t j) { return j <= i && (c.observed[j] || j == i); }

void check_finite(const std::vector<double>& v, const std::string& where) {
    for (double x : v)
        if (!std::isfinite(x)) throw NumericError("non-finite activation in " + where);
}

void run_forward(const ModelP<const double>& P, const ModelConfig& cfg, std::span<const PatchToken> tokens,
                 const Frequency& freq, Cache& c) {
    const auto d = static_cast<std::size_t>(cfg.d_model);
    const auto H = static_cast<std::size_t>(cfg.n_heads);
    const std::size_t dh = d / H;
    const auto E = static_cast<std::size_t>(cfg.n_experts);
    const auto K = static_cast<std::size_t>(cfg.top_k);
    const auto F = static_cast<std::size_t>(cfg.d_ff);
    const std::size_t n = tokens.size();
    if (n == 0) throw UsageError("forward: no tokens");
    if (cfg.positional_embedding && n > static_cast<std::size_t>(cfg.context_patches))
        throw UsageError("forward: more tokens than positions");
    const auto pl = static_cast<std::size_t>(tokens[0].patch_len);
    c.n = n;
    c.patch = pl;
    c.fidx = freq_index(freq.cls);
    c.inp.assign(n * pl, 0.0);
    c.cal.assign(n * kCalendarDims, 0.0);
    c.observed.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& t = tokens[i];
        if (static_cast<std::size_t>(t.patch_len) != pl || t.values.size() != pl || t.mask.size() != pl)
            throw UsageError("forward: inconsistent token shapes");
        for (std::size_t j = 0; j < pl; ++j) c.inp[i * pl + j] = t.mask[j] ? t.values[j] : 0.0;
        const auto enc = encode_calendar(t.calendar);
        std::copy(enc.begin(), enc.end(), c.cal.begin() + static_cast<std::ptrdiff_t>(i * kCalendarDims));
        c.observed[i] = t.observed() ? 1 : 0;
    }

    std::vector<double> x(n * d), tmp(d);
    for (std::size_t i = 0; i < n; ++i) {
        double* xi = &x[i * d];
        linear(P.patch_w, P.patch_b, d, pl, &c.inp[i * pl], xi);
        linear(P.cal_w, P.cal_b, d, kCalendarDims, &c.cal[i * kCalendarDims], tmp.data());
        for (std::size_t k = 0; k < d; ++k) xi[k] += tmp[k] + P.freq_e[c.fidx * d + k];
        if (P.pos_e)
            for (std::size_t k = 0; k < d; ++k) xi[k] += P.pos_e[i * d + k];
    }
    check_finite(x, "embedding");

    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
    c.layers.assign(static_cast<std::size_t>(cfg.n_layers), {});
    for (int l = 0; l < cfg.n_layers; ++l) {
        const auto& L = P.layers[static_cast<std::size_t>(l)];
        auto& lc = c.layers[static_cast<std::size_t>(l)];
        lc.x_in = x;
        lc.a.assign(n * d, 0.0);
        lc.a_hat.assign(n * d, 0.0);
        lc.a_rstd.assign(n, 0.0);
        lc.q.assign(n * d, 0.0);
        lc.k.assign(n * d, 0.0);
        lc.v.assign(n * d, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            layer_norm(&x[i * d], L.ln1g, L.ln1b, d, &lc.a[i * d], &lc.a_hat[i * d], lc.a_rstd[i]);
            linear(L.wq, nullptr, d, d, &lc.a[i * d], &lc.q[i * d]);
            linear(L.wk, nullptr, d, d, &lc.a[i * d], &lc.k[i * d]);
            linear(L.wv, nullptr, d, d, &lc.a[i * d], &lc.v[i * d]);
        }
        lc.p.assign(H * n * n, 0.0);
        lc.o.assign(n * d, 0.0);
        for (std::size_t h = 0; h < H; ++h) {
            for (std::size_t i = 0; i < n; ++i) {
                double* pr = &lc.p[(h * n + i) * n];
                double mx = -std::numeric_limits<double>::infinity();
                for (std::size_t j = 0; j < n; ++j) {
                    if (!allowed(c, i, j)) continue;
                    pr[j] = kernels::dot({&lc.q[i * d + h * dh], dh}, {&lc.k[j * d + h * dh], dh}) * inv_sqrt;
                    mx = std::max(mx, pr[j]);
                }
                double sum = 0.0;
                for (std::size_t j = 0; j < n; ++j) {
                    if (!allowed(c, i, j)) continue;
                    pr[j] = std::exp(pr[j] - mx);
                    sum += pr[j];
                }
                for (std::size_t j = 0; j < n; ++j) {
                    if (!allowed(c, i, j)) continue;
                    pr[j] /= sum;
                    kernels::axpy(pr[j], {&lc.v[j * d + h * dh], dh}, {&lc.o[i * d + h * dh], dh});
                }
            }
        }
        lc.x1 = x;
        for (std::size_t i = 0; i < n; ++i) {
            linear(L.wo, nullptr, d, d, &lc.o[i * d], tmp.data());
            for (std::size_t k = 0; k < d; ++k) lc.x1[i * d + k] += tmp[k];
        }

        lc.b.assign(n * d, 0.0);
        lc.b_hat.assign(n * d, 0.0);
        lc.b_rstd.assign(n, 0.0);
        lc.g.assign(n * E, 0.0);
        lc.sel.assign(n * K, 0);
        lc.r.assign(n * K, 0.0);
        lc.pre.assign(n * K * F, 0.0);
        lc.hid.assign(n * K * F, 0.0);
        lc.y.assign(n * K * d, 0.0);
        x = lc.x1;
        std::vector<int> order(E);
        for (std::size_t i = 0; i < n; ++i) {
            layer_norm(&lc.x1[i * d], L.ln2g, L.ln2b, d, &lc.b[i * d], &lc.b_hat[i * d], lc.b_rstd[i]);
            double* gi = &lc.g[i * E];
            linear(L.gate, nullptr, E, d, &lc.b[i * d], gi);
            const double mx = *std::max_element(gi, gi + E);
            double sum = 0.0;
            for (std::size_t e = 0; e < E; ++e) {
                gi[e] = std::exp(gi[e] - mx);
                sum += gi[e];
            }
            for (std::size_t e = 0; e < E; ++e) gi[e] /= sum;
            std::iota(order.begin(), order.end(), 0);
            std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return gi[a] > gi[b]; });
            double sel_sum = 0.0;
            for (std::size_t s = 0; s < K; ++s) sel_sum += gi[order[s]];
            for (std::size_t s = 0; s < K; ++s) {
                const auto e = static_cast<std::size_t>(order[s]);
                const std::size_t slot = i * K + s;
                lc.sel[slot] = order[s];
                lc.r[slot] = gi[e] / sel_sum;
                double* pre = &lc.pre[slot * F];
                double* hid = &lc.hid[slot * F];
                double* y = &lc.y[slot * d];
                linear(L.w1[e], L.b1[e], F, d, &lc.b[i * d], pre);
                for (std::size_t f = 0; f < F; ++f) hid[f] = gelu(pre[f]);
                linear(L.w2[e], L.b2[e], d, F, hid, y);
                kernels::axpy(lc.r[slot], {y, d}, {&x[i * d], d});
            }
        }
        check_finite(x, "layer " + std::to_string(l));
    }

    c.xl = x;
    c.h.assign(n * d, 0.0);
    c.h_hat.assign(n * d, 0.0);
    c.h_rstd.assign(n, 0.0);
    c.raw.assign(n * 3 * pl, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        layer_norm(&x[i * d], P.lnf_g, P.lnf_b, d, &c.h[i * d], &c.h_hat[i * d], c.h_rstd[i]);
        linear(P.head_w, P.head_b, 3 * pl, d, &c.h[i * d], &c.raw[i * 3 * pl]);
    }
    check_finite(c.raw, "output head");
}

StudentT constrain(const double* raw) {
    return {2.0 + softplus(raw[0]), raw[1], softplus(raw[2]) + kSigmaFloor};
}

void run_backward(const ModelP<const double>& P, ModelP<double>& G, const ModelConfig& cfg, const Cache& c,
                  const std::vector<double>& draw) {
    const auto d = static_cast<std::size_t>(cfg.d_model);
    const auto H = static_cast<std::size_t>(cfg.n_heads);
    const std::size_t dh = d / H;
    const auto E = static_cast<std::size_t>(cfg.n_experts);
    const auto K = static_cast<std::size_t>(cfg.top_k);
    const auto F = static_cast<std::size_t>(cfg.d_ff);
    const std::size_t n = c.n;
    const std::size_t pl = c.patch;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

    std::vector<double> dh_(n * d, 0.0), dx(n * d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double* dy = &draw[i * 3 * pl];
        linear_back(P.head_w, 3 * pl, d, &c.h[i * d], dy, G.head_w, &dh_[i * d]);
        for (std::size_t o = 0; o < 3 * pl; ++o) G.head_b[o] += dy[o];
        layer_norm_back(&dh_[i * d], P.lnf_g, &c.h_hat[i * d], c.h_rstd[i], d, G.lnf_g, G.lnf_b, &dx[i * d]);
    }

    std::vector<double> dhid(F), dpre(F), dy(d), dlogit(E), dg(E);
    for (int l = cfg.n_layers - 1; l >= 0; --l) {
        const auto& L = P.layers[static_cast<std::size_t>(l)];
        auto& GL = G.layers[static_cast<std::size_t>(l)];
        const auto& lc = c.layers[static_cast<std::size_t>(l)];

        // Mixture of experts: x2 = x1 + sum_s r_s * FFN_s(LN2(x1)).
        std::vector<double> dx1 = dx, db(n * d, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double* dout = &dx[i * d];
            const double* gi = &lc.g[i * E];
            std::fill(dg.begin(), dg.end(), 0.0);
            double sel_sum = 0.0;
            for (std::size_t s = 0; s < K; ++s) sel_sum += gi[static_cast<std::size_t>(lc.sel[i * K + s])];
            double rdr = 0.0;
            std::vector<double> dr(K);
            for (std::size_t s = 0; s < K; ++s) {
                const std::size_t slot = i * K + s;
                const auto e = static_cast<std::size_t>(lc.sel[slot]);
                const double* y = &lc.y[slot * d];
                dr[s] = kernels::dot({dout, d}, {y, d});
                rdr += lc.r[slot] * dr[s];
                for (std::size_t k = 0; k < d; ++k) dy[k] = lc.r[slot] * dout[k];
                std::fill(dhid.begin(), dhid.end(), 0.0);
                linear_back(L.w2[e], d, F, &lc.hid[slot * F], dy.data(), GL.w2[e], dhid.data());
                for (std::size_t k = 0; k < d; ++k) GL.b2[e][k] += dy[k];
                for (std::size_t f = 0; f < F; ++f) dpre[f] = dhid[f] * gelu_grad(lc.pre[slot * F + f]);
                linear_back(L.w1[e], F, d, &lc.b[i * d], dpre.data(), GL.w1[e], &db[i * d]);
                for (std::size_t f = 0; f < F; ++f) GL.b1[e][f] += dpre[f];
            }
            for (std::size_t s = 0; s < K; ++s) {
                const auto e = static_cast<std::size_t>(lc.sel[i * K + s]);
                dg[e] = (dr[s] - rdr) / sel_sum;
            }
            double gdg = 0.0;
            for (std::size_t e = 0; e < E; ++e) gdg += gi[e] * dg[e];
            for (std::size_t e = 0; e < E; ++e) dlogit[e] = gi[e] * (dg[e] - gdg);
            linear_back(L.gate, E, d, &lc.b[i * d], dlogit.data(), GL.gate, &db[i * d]);
            layer_norm_back(&db[i * d], L.ln2g, &lc.b_hat[i * d], lc.b_rstd[i], d, GL.ln2g, GL.ln2b, &dx1[i * d]);
        }

        // Attention: x1 = x + Wo * attn(LN1(x)).
        std::vector<double> dxin = dx1, dob(n * d, 0.0), dq(n * d, 0.0), dk(n * d, 0.0), dv(n * d, 0.0),
                            da(n * d, 0.0);
        for (std::size_t i = 0; i < n; ++i) linear_back(L.wo, d, d, &lc.o[i * d], &dx1[i * d], GL.wo, &dob[i * d]);
        std::vector<double> dp(n);
        for (std::size_t h = 0; h < H; ++h) {
            for (std::size_t i = 0; i < n; ++i) {
                const double* pr = &lc.p[(h * n + i) * n];
                const double* doi = &dob[i * d + h * dh];
                double acc = 0.0;
                for (std::size_t j = 0; j < n; ++j) {
                    dp[j] = 0.0;
                    if (!allowed(c, i, j)) continue;
                    dp[j] = kernels::dot({doi, dh}, {&lc.v[j * d + h * dh], dh});
                    acc += pr[j] * dp[j];
                    kernels::axpy(pr[j], {doi, dh}, {&dv[j * d + h * dh], dh});
                }
                for (std::size_t j = 0; j < n; ++j) {
                    if (!allowed(c, i, j)) continue;
                    const double ds = pr[j] * (dp[j] - acc) * inv_sqrt;
                    kernels::axpy(ds, {&lc.k[j * d + h * dh], dh}, {&dq[i * d + h * dh], dh});
                    kernels::axpy(ds, {&lc.q[i * d + h * dh], dh}, {&dk[j * d + h * dh], dh});
                }
            }
        }
        for (std::size_t i = 0; i < n; ++i) {
            linear_back(L.wq, d, d, &lc.a[i * d], &dq[i * d], GL.wq, &da[i * d]);
            linear_back(L.wk, d, d, &lc.a[i * d], &dk[i * d], GL.wk, &da[i * d]);
            linear_back(L.wv, d, d, &lc.a[i * d], &dv[i * d], GL.wv, &da[i * d]);
            layer_norm_back(&da[i * d], L.ln1g, &lc.a_hat[i * d], lc.a_rstd[i], d, GL.ln1g, GL.ln1b, &dxin[i * d]);
        }
        dx = std::move(dxin);
    }

    for (std::size_t i = 0; i < n; ++i) {
        const double* dxi = &dx[i * d];
        linear_back(P.patch_w, d, pl, &c.inp[i * pl], dxi, G.patch_w, nullptr);
        linear_back(P.cal_w, d, kCalendarDims, &c.cal[i * kCalendarDims], dxi, G.cal_w, nullptr);
        for (std::size_t k = 0; k < d; ++k) {
            G.patch_b[k] += dxi[k];
            G.cal_b[k] += dxi[k];
            G.freq_e[c.fidx * d + k] += dxi[k];
            if (G.pos_e) G.pos_e[i * d + k] += dxi[k];
        }
    }
}

int token_patch_len(std::span<const PatchToken> tokens) {
    if (tokens.empty()) throw UsageError("forward: no tokens");
    return tokens[0].patch_len;
}

void check_patch_len(const ModelConfig& c, int p) {
    if (std::find(c.patch_lengths.begin(), c.patch_lengths.end(), p) == c.patch_lengths.end())
        throw UsageError("model has no patch length " + std::to_string(p));
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

void ModelConfig::validate() const {
    if (n_layers < 1) throw UsageError("config: n_layers must be >= 1");
    if (d_model < 1 || n_heads < 1 || d_model % n_heads != 0)
        throw UsageError("config: d_model must be a positive multiple of n_heads");
    if (n_experts < 1 || top_k < 1 || top_k > n_experts) throw UsageError("config: need 1 <= top_k <= n_experts");
    if (d_ff < 1) throw UsageError("config: d_ff must be >= 1");
    if (patch_lengths.empty()) throw UsageError("config: patch_lengths must not be empty");
    for (std::size_t i = 0; i < patch_lengths.size(); ++i) {
        if (patch_lengths[i] < 1) throw UsageError("config: patch lengths must be positive");
        for (std::size_t j = 0; j < i; ++j)
            if (patch_lengths[i] == patch_lengths[j]) throw UsageError("config: duplicate patch length");
    }
    for (const auto& [cls, p] : patch_for_freq) check_patch_len(*this, p);
    if (context_patches < 1) throw UsageError("config: context_patches must be >= 1");
    if (!(learning_rate >= 0.0)) throw UsageError("config: learning_rate must be >= 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw UsageError("config: betas must lie in [0, 1)");
    if (!(epsilon > 0.0)) throw UsageError("config: epsilon must be > 0");
}

nlohmann::json ModelConfig::to_json() const {
    nlohmann::json pf = nlohmann::json::object();
    for (const auto& [cls, p] : patch_for_freq) pf[std::string(tidecast::to_string(cls))] = p;
    return {{"n_layers", n_layers},
            {"d_model", d_model},
            {"n_heads", n_heads},
            {"n_experts", n_experts},
            {"top_k", top_k},
            {"d_ff", d_ff},
            {"patch_lengths", patch_lengths},
            {"context_patches", context_patches},
            {"positional_embedding", positional_embedding},
            {"learning_rate", learning_rate},
            {"beta1", beta1},
            {"beta2", beta2},
            {"epsilon", epsilon},
            {"seed", seed},
            {"patch_for_freq", pf}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw UsageError("model config must be a JSON object");
    ModelConfig c;
    try {
        for (const auto& [key, val] : j.items()) {
            if (key == "n_layers") c.n_layers = val.get<int>();
            else if (key == "d_model") c.d_model = val.get<int>();
            else if (key == "n_heads") c.n_heads = val.get<int>();
            else if (key == "n_experts") c.n_experts = val.get<int>();
            else if (key == "top_k") c.top_k = val.get<int>();
            else if (key == "d_ff") c.d_ff = val.get<int>();
            else if (key == "patch_lengths") c.patch_lengths = val.get<std::vector<int>>();
            else if (key == "context_patches") c.context_patches = val.get<int>();
            else if (key == "positional_embedding") c.positional_embedding = val.get<bool>();
            else if (key == "learning_rate") c.learning_rate = val.get<double>();
            else if (key == "beta1") c.beta1 = val.get<double>();
            else if (key == "beta2") c.beta2 = val.get<double>();
            else if (key == "epsilon") c.epsilon = val.get<double>();
            else if (key == "seed") c.seed = val.get<std::uint64_t>();
            else if (key == "patch_for_freq") {
                for (const auto& [cls, p] : val.items()) c.patch_for_freq[parse_freq_class(cls)] = p.get<int>();
            } else
                throw UsageError("model config: unknown key '" + key + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw UsageError(std::string("model config: ") + e.what());
    } catch (const DataError& e) {
        throw UsageError(std::string("model config: ") + e.what());
    }
    c.validate();
    return c;
}

int patch_length_for(const ModelConfig& config, const Frequency& freq) {
    auto it = config.patch_for_freq.find(freq.cls);
    if (it != config.patch_for_freq.end()) return it->second;
    const auto [lo, hi] = std::minmax_element(config.patch_lengths.begin(), config.patch_lengths.end());
    return (freq.cls == FreqClass::minute || freq.cls == FreqClass::hour) ? *hi : *lo;
}

// ---------------------------------------------------------------------------
// Parameters

Params init_params(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    Params p;
    p.config = config;
    p.config.seed = seed;
    Rng rng = make_rng(derive_seed(seed, "tsfm.init"));
    std::normal_distribution<double> normal(0.0, 1.0);
    for (const auto& slot : layout(config)) {
        Array a;
        a.shape = slot.shape;
        a.values.assign(count(slot.shape), 0.0);
        switch (slot.init) {
            case Init::zeros: break;
            case Init::ones: std::fill(a.values.begin(), a.values.end(), 1.0); break;
            case Init::fan_in: {
                const double sd = 1.0 / std::sqrt(static_cast<double>(slot.shape[1]));
                for (double& v : a.values) v = sd * normal(rng);
                break;
            }
            case Init::embed:
                for (double& v : a.values) v = 0.1 * normal(rng);
                break;
            case Init::head_w: {
                const double sd = 0.1 / std::sqrt(static_cast<double>(slot.shape[1]));
                for (double& v : a.values) v = sd * normal(rng);
                break;
            }
            case Init::head_b:
                // nu starts near 5 and sigma near 1.
                for (std::size_t j = 0; j < a.values.size(); j += 3) {
                    a.values[j] = std::log(std::expm1(3.0));
                    a.values[j + 2] = std::log(std::expm1(1.0));
                }
                break;
        }
        p.arrays.emplace(slot.name, std::move(a));
    }
    return p;
}

void validate(const Params& params) {
    params.config.validate();
    const auto slots = layout(params.config);
    for (const auto& slot : slots) {
        auto it = params.arrays.find(slot.name);
        if (it == params.arrays.end()) throw DataError("missing array '" + slot.name + "'");
        if (it->second.shape != slot.shape) throw DataError("array '" + slot.name + "' has the wrong shape");
        if (it->second.values.size() != count(slot.shape))
            throw DataError("array '" + slot.name + "' has the wrong number of values");
        for (double v : it->second.values)
            if (!std::isfinite(v)) throw DataError("array '" + slot.name + "' has non-finite values");
    }
    if (params.arrays.size() != slots.size()) {
        for (const auto& [name, a] : params.arrays) {
            const bool known = std::any_of(slots.begin(), slots.end(), [&](const Slot& s) { return s.name == name; });
            if (!known) throw DataError("unexpected array '" + name + "'");
        }
    }
}

Arrays zeros_like(const Arrays& arrays) {
    Arrays out;
    for (const auto& [name, a] : arrays) out.emplace(name, Array{a.shape, std::vector<double>(a.values.size(), 0.0)});
    return out;
}

// ---------------------------------------------------------------------------
// Tokens

bool PatchToken::observed() const {
    return std::any_of(mask.begin(), mask.end(), [](std::uint8_t m) { return m != 0; });
}

std::array<double, kCalendarDims> encode_calendar(const CalendarFeatures& c) {
    constexpr double tau = 2.0 * std::numbers::pi;
    const double dow = tau * c.day_of_week / 7.0;
    const double dom = tau * (c.day_of_month - 1) / 31.0;
    const double mon = tau * (c.month - 1) / 12.0;
    const double cyc = tau * c.fraction_of_cycle;
    return {std::sin(dow), std::cos(dow), std::sin(dom), std::cos(dom),
            std::sin(mon), std::cos(mon), std::sin(cyc), std::cos(cyc)};
}

Tokenized tokenize_prefix(const TimeSeries& series, std::size_t end, int patch_len, int context_patches) {
    if (patch_len < 1 || context_patches < 1) throw UsageError("tokenize: patch length and context must be >= 1");
    if (end < 1 || end > series.size()) throw UsageError("tokenize: need at least one observation");
    const auto pl = static_cast<std::size_t>(patch_len);
    const auto nc = static_cast<std::size_t>(context_patches);
    const std::size_t len = std::min(end, pl * nc);
    const std::size_t first = end - len;
    const auto window = series.values().subspan(first, len);
    Tokenized out;
    out.stats = norm_stats(window);
    const std::vector<double> z = normalize(window, out.stats);
    const std::size_t pad = pl * nc - len;
    out.tokens.resize(nc);
    for (std::size_t t = 0; t < nc; ++t) {
        PatchToken& tok = out.tokens[t];
        tok.patch_len = patch_len;
        tok.values.assign(pl, 0.0);
        tok.mask.assign(pl, 0);
        for (std::size_t j = 0; j < pl; ++j) {
            const std::size_t slot = t * pl + j;
            if (slot < pad) continue;
            tok.values[j] = z[slot - pad];
            tok.mask[j] = 1;
        }
        const auto last = static_cast<std::int64_t>(first) - static_cast<std::int64_t>(pad) +
                          static_cast<std::int64_t>((t + 1) * pl) - 1;
        tok.calendar = calendar_features_at(advance(series.start(), series.freq(), last), series.freq());
    }
    return out;
}

Tokenized tokenize(const TimeSeries& series, int patch_len, int context_patches) {
    return tokenize_prefix(series, series.size(), patch_len, context_patches);
}

// ---------------------------------------------------------------------------
// Forward

ForwardOutput forward(const Params& params, std::span<const PatchToken> tokens, const Frequency& freq) {
    const int pl = token_patch_len(tokens);
    check_patch_len(params.config, pl);
    const auto P = view<const double>(params.arrays, params.config, pl);
    Cache c;
    run_forward(P, params.config, tokens, freq, c);
    ForwardOutput out;
    const auto d = static_cast<std::size_t>(params.config.d_model);
    const auto p = static_cast<std::size_t>(pl);
    for (std::size_t i = 0; i < c.n; ++i) {
        std::vector<StudentT> row(p);
        for (std::size_t j = 0; j < p; ++j) row[j] = constrain(&c.raw[i * 3 * p + 3 * j]);
        out.dist.push_back(std::move(row));
        out.hidden.emplace_back(c.h.begin() + static_cast<std::ptrdiff_t>(i * d),
                                c.h.begin() + static_cast<std::ptrdiff_t>((i + 1) * d));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Likelihood

double student_t_nll(double y, const StudentT& d) {
    if (!(d.sigma > 0.0)) throw NumericError("student-t: sigma must be > 0");
    if (!(d.nu > 0.0)) throw NumericError("student-t: nu must be > 0");
    const double z = (y - d.mu) / d.sigma;
    return -std::lgamma(0.5 * (d.nu + 1.0)) + std::lgamma(0.5 * d.nu) + 0.5 * std::log(d.nu * std::numbers::pi) +
           std::log(d.sigma) + 0.5 * (d.nu + 1.0) * std::log1p(z * z / d.nu);
}

StudentTGrad student_t_nll_grad(double y, const StudentT& d) {
    if (!(d.sigma > 0.0)) throw NumericError("student-t: sigma must be > 0");
    using boost::math::digamma;
    const double z = (y - d.mu) / d.sigma;
    const double z2 = z * z;
    const double nu = d.nu;
    StudentTGrad g;
    g.mu = -(nu + 1.0) * z / (d.sigma * (nu + z2));
    g.sigma = 1.0 / d.sigma - (nu + 1.0) * z2 / (d.sigma * (nu + z2));
    g.nu = 0.5 * (digamma(0.5 * nu) - digamma(0.5 * (nu + 1.0))) + 0.5 / nu + 0.5 * std::log1p(z2 / nu) -
           (nu + 1.0) * z2 / (2.0 * nu * (nu + z2));
    return g;
}

double nll_loss(std::span<const StudentT> pred, std::span<const double> target, std::span<const std::uint8_t> mask) {
    if (pred.size() != target.size() || pred.size() != mask.size()) throw UsageError("nll_loss: shape mismatch");
    double total = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (!mask[i]) continue;
        total += student_t_nll(target[i], pred[i]);
        ++n;
    }
    return n > 0 ? total / static_cast<double>(n) : 0.0;
}

namespace {

double sample_weight_total(std::span<const TrainSample> batch) {
    double total = 0.0;
    for (const auto& s : batch) {
        std::size_t n = 0;
        for (auto m : s.target_mask) n += m ? 1 : 0;
        total += s.weight * static_cast<double>(n);
    }
    return total;
}

double run_batch(const Params& params, std::span<const TrainSample> batch, Arrays* grad) {
    const ModelConfig& cfg = params.config;
    const double wtotal = sample_weight_total(batch);
    if (!(wtotal > 0.0)) throw UsageError("batch has no scored targets");
    if (grad)
        for (auto& [name, a] : *grad) std::fill(a.values.begin(), a.values.end(), 0.0);
    double loss = 0.0;
    Cache c;
    for (const auto& s : batch) {
        const int pl = token_patch_len(s.tokens);
        check_patch_len(cfg, pl);
        const auto P = view<const double>(params.arrays, cfg, pl);
        run_forward(P, cfg, s.tokens, s.freq, c);
        const auto p = static_cast<std::size_t>(pl);
        if (s.targets.size() != c.n * p || s.target_mask.size() != c.n * p)
            throw UsageError("batch: target shape does not match tokens");
        std::vector<double> draw(c.raw.size(), 0.0);
        const double scale = s.weight / wtotal;
        for (std::size_t i = 0; i < c.n; ++i) {
            for (std::size_t j = 0; j < p; ++j) {
                const std::size_t t = i * p + j;
                if (!s.target_mask[t]) continue;
                const double* raw = &c.raw[i * 3 * p + 3 * j];
                const StudentT dist = constrain(raw);
                loss += scale * student_t_nll(s.targets[t], dist);
                if (grad) {
                    const StudentTGrad g = student_t_nll_grad(s.targets[t], dist);
                    double* dr = &draw[i * 3 * p + 3 * j];
                    dr[0] = scale * g.nu * sigmoid(raw[0]);
                    dr[1] = scale * g.mu;
                    dr[2] = scale * g.sigma * sigmoid(raw[2]);
                }
            }
        }
        if (grad) {
            auto G = view<double>(*grad, cfg, pl);
            run_backward(P, G, cfg, c, draw);
        }
    }
    return loss;
}

}  // namespace

double batch_loss(const Params& params, std::span<const TrainSample> batch) { return run_batch(params, batch, nullptr); }

double batch_loss_grad(const Params& params, std::span<const TrainSample> batch, Arrays& grad) {
    return run_batch(params, batch, &grad);
}

// ---------------------------------------------------------------------------
// Inference

ForecastOutput forecast(const Params& params, const TimeSeries& series, std::size_t horizon) {
    if (horizon == 0) throw UsageError("forecast: horizon must be >= 1");
    const ModelConfig& cfg = params.config;
    const int pl = patch_length_for(cfg, series.freq());
    check_patch_len(cfg, pl);
    ForecastOutput out;
    std::vector<double> values(series.values().begin(), series.values().end());
    std::vector<double> sigma_norm;
    while (out.point.size() < horizon) {
        const TimeSeries ext = series.derive(series.id(), values);
        const Tokenized tk = tokenize(ext, pl, cfg.context_patches);
        const ForwardOutput fo = forward(params, tk.tokens, series.freq());
        ++out.forward_passes;
        for (const StudentT& d : fo.dist.back()) {
            if (out.point.size() == horizon) break;
            const double mu = d.mu * tk.stats.std + tk.stats.mean;
            out.dist.push_back({d.nu, mu, d.sigma * tk.stats.std});
            out.point.push_back(mu);
            sigma_norm.push_back(d.sigma);
            values.push_back(mu);
        }
    }
    double mean_sigma = 0.0;
    for (double s : sigma_norm) mean_sigma += s;
    mean_sigma /= static_cast<double>(sigma_norm.size());
    out.confidence = 1.0 / (1.0 + mean_sigma);
    for (double v : out.point)
        if (!std::isfinite(v)) throw NumericError("forecast: non-finite output");
    return out;
}

std::vector<double> embed_series(const Params& params, const TimeSeries& series) {
    const int pl = patch_length_for(params.config, series.freq());
    const Tokenized tk = tokenize(series, pl, params.config.context_patches);
    const ForwardOutput fo = forward(params, tk.tokens, series.freq());
    const auto d = static_cast<std::size_t>(params.config.d_model);
    std::vector<double> out(d, 0.0);
    std::size_t n = 0;
    for (std::size_t i = 0; i < tk.tokens.size(); ++i) {
        if (!tk.tokens[i].observed()) continue;
        for (std::size_t k = 0; k < d; ++k) out[k] += fo.hidden[i][k];
        ++n;
    }
    for (double& v : out) v /= static_cast<double>(n);
    return out;
}

// ---------------------------------------------------------------------------
// Serialization

nlohmann::json to_json(const Params& params) {
    nlohmann::json arrays = nlohmann::json::object();
    for (const auto& [name, a] : params.arrays) arrays[name] = {{"shape", a.shape}, {"values", a.values}};
    return {{"format_version", kFormatVersion}, {"config", params.config.to_json()}, {"arrays", arrays}};
}

Params params_from_json(const nlohmann::json& j) {
    Params p;
    try {
        const int version = j.at("format_version").get<int>();
        if (version != kFormatVersion)
            throw DataError("model format version " + std::to_string(version) + " is not supported (expected " +
                            std::to_string(kFormatVersion) + ")");
        try {
            p.config = ModelConfig::from_json(j.at("config"));
        } catch (const UsageError& e) {
            throw DataError(e.what());
        }
        for (const auto& [name, a] : j.at("arrays").items()) {
            Array arr;
            arr.shape = a.at("shape").get<std::vector<std::size_t>>();
            arr.values = a.at("values").get<std::vector<double>>();
            p.arrays.emplace(name, std::move(arr));
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("model file: ") + e.what());
    }
    validate(p);
    return p;
}

void save(const Params& params, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    out << to_json(params).dump() << '\n';
    if (!out) throw DataError("failed writing '" + path.string() + "'");
}

Params load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read model file '" + path.string() + "'");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("model file '" + path.string() + "': " + e.what());
    }
    return params_from_json(j);
}

// ---------------------------------------------------------------------------
// Forecaster wrapper

TimeSeries TsfmForecaster::wrap(std::span<const double> history) const {
    return TimeSeries("history", freq_, parse_timestamp("2020-01-01"), std::vector<double>(history.begin(), history.end()));
}

std::vector<double> TsfmForecaster::predict(std::span<const double> history, std::size_t horizon) const {
    return predict_series(wrap(history), horizon);
}

double TsfmForecaster::confidence(std::span<const double> history, std::size_t horizon) const {
    return confidence_series(wrap(history), horizon);
}

std::vector<double> TsfmForecaster::predict_series(const TimeSeries& history, std::size_t horizon) const {
    if (horizon == 0) return {};
    return forecast(*params_, history, horizon).point;
}

double TsfmForecaster::confidence_series(const TimeSeries& history, std::size_t horizon) const {
    return forecast(*params_, history, std::max<std::size_t>(horizon, 1)).confidence;
}

std::optional<std::vector<StudentT>> TsfmForecaster::predict_distribution(std::span<const double> history,
                                                                          std::size_t horizon) const {
    if (horizon == 0) return std::vector<StudentT>{};
    return forecast(*params_, wrap(history), horizon).dist;
}

nlohmann::json TsfmForecaster::describe() const {
    nlohmann::json j = {{"kind", kind()}};
    if (!path_.empty()) j["model"] = path_;
    return j;
}

}  // namespace tidecast::tsfm
