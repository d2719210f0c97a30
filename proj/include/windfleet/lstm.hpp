#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "windfleet/common.hpp"

namespace windfleet {

// ---------------------------------------------------------------------------
// Hybrid LSTM-MLP regressor. The LSTM encodes the L-step input sequence; the
// final hidden state goes through a two-layer MLP (tanh in between) to an
// H-dimensional prediction. Double precision throughout.
// ---------------------------------------------------------------------------

struct ModelParams {
    int input_dim = 0, hidden_dim = 0, mlp_dim = 0, horizon = 0;

    // gate order: input, forget, output, candidate
    Eigen::MatrixXd w_i, w_f, w_o, w_g;  // hidden x input
    Eigen::MatrixXd u_i, u_f, u_o, u_g;  // hidden x hidden
    Eigen::VectorXd b_i, b_f, b_o, b_g;  // hidden

    Eigen::MatrixXd v1;  // mlp x hidden
    Eigen::VectorXd c1;  // mlp
    Eigen::MatrixXd v2;  // horizon x mlp
    Eigen::VectorXd c2;  // horizon

    struct TensorView {
        const char* name;
        double* data;
        std::ptrdiff_t size;
    };

    std::vector<TensorView> tensors() {
        return {{"w_i", w_i.data(), w_i.size()}, {"w_f", w_f.data(), w_f.size()},
                {"w_o", w_o.data(), w_o.size()}, {"w_g", w_g.data(), w_g.size()},
                {"u_i", u_i.data(), u_i.size()}, {"u_f", u_f.data(), u_f.size()},
                {"u_o", u_o.data(), u_o.size()}, {"u_g", u_g.data(), u_g.size()},
                {"b_i", b_i.data(), b_i.size()}, {"b_f", b_f.data(), b_f.size()},
                {"b_o", b_o.data(), b_o.size()}, {"b_g", b_g.data(), b_g.size()},
                {"v1", v1.data(), v1.size()},    {"c1", c1.data(), c1.size()},
                {"v2", v2.data(), v2.size()},    {"c2", c2.data(), c2.size()}};
    }

    std::vector<TensorView> tensors() const {
        return const_cast<ModelParams*>(this)->tensors();
    }

    std::ptrdiff_t parameter_count() const {
        std::ptrdiff_t n = 0;
        for (const auto& t : tensors()) n += t.size;
        return n;
    }
};

inline ModelParams zeros_like(const ModelParams& p) {
    ModelParams g = p;
    for (auto& t : g.tensors()) std::fill(t.data, t.data + t.size, 0.0);
    return g;
}

inline ModelParams init_params(int input_dim, int hidden_dim, int mlp_dim, int horizon, Rng& rng) {
    ModelParams p;
    p.input_dim = input_dim;
    p.hidden_dim = hidden_dim;
    p.mlp_dim = mlp_dim;
    p.horizon = horizon;

    auto glorot = [&](Eigen::MatrixXd& m, int rows, int cols) {
        const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
        std::uniform_real_distribution<double> uni(-a, a);
        m.resize(rows, cols);
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = uni(rng);
    };
    glorot(p.w_i, hidden_dim, input_dim);
    glorot(p.w_f, hidden_dim, input_dim);
    glorot(p.w_o, hidden_dim, input_dim);
    glorot(p.w_g, hidden_dim, input_dim);
    glorot(p.u_i, hidden_dim, hidden_dim);
    glorot(p.u_f, hidden_dim, hidden_dim);
    glorot(p.u_o, hidden_dim, hidden_dim);
    glorot(p.u_g, hidden_dim, hidden_dim);
    p.b_i = Eigen::VectorXd::Zero(hidden_dim);
    p.b_f = Eigen::VectorXd::Ones(hidden_dim);  // standard forget-gate bias
    p.b_o = Eigen::VectorXd::Zero(hidden_dim);
    p.b_g = Eigen::VectorXd::Zero(hidden_dim);
    glorot(p.v1, mlp_dim, hidden_dim);
    p.c1 = Eigen::VectorXd::Zero(mlp_dim);
    glorot(p.v2, horizon, mlp_dim);
    p.c2 = Eigen::VectorXd::Zero(horizon);
    return p;
}

namespace detail {
inline Eigen::MatrixXd sigmoid(const Eigen::MatrixXd& z) {
    return (1.0 / (1.0 + (-z.array()).exp())).matrix();
}
}  // namespace detail

struct LstmCache {
    std::vector<Eigen::MatrixXd> x;                 // per step, batch x input
    std::vector<Eigen::MatrixXd> gi, gf, go, gg;    // gate activations
    std::vector<Eigen::MatrixXd> c, tc;             // cell state, tanh(cell)
    std::vector<Eigen::MatrixXd> h_prev;            // hidden entering each step
    Eigen::MatrixXd h_last;                         // batch x hidden
    Eigen::MatrixXd m1;                             // batch x mlp (tanh output)
};

// x_steps: L matrices of shape batch x input_dim. Returns batch x horizon.
inline Eigen::MatrixXd lstm_mlp_forward(const ModelParams& p,
                                        const std::vector<Eigen::MatrixXd>& x_steps,
                                        LstmCache* cache = nullptr) {
    if (x_steps.empty()) throw DimensionMismatch("empty input sequence");
    const Eigen::Index batch = x_steps.front().rows();
    for (const auto& x : x_steps)
        if (x.cols() != p.input_dim || x.rows() != batch)
            throw DimensionMismatch("step input shape mismatch");

    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(batch, p.hidden_dim);
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(batch, p.hidden_dim);
    if (cache) {
        const auto L = x_steps.size();
        cache->x = x_steps;
        cache->gi.resize(L); cache->gf.resize(L); cache->go.resize(L); cache->gg.resize(L);
        cache->c.resize(L); cache->tc.resize(L); cache->h_prev.resize(L);
    }

    for (std::size_t t = 0; t < x_steps.size(); ++t) {
        const auto& x = x_steps[t];
        Eigen::MatrixXd zi = x * p.w_i.transpose() + h * p.u_i.transpose();
        Eigen::MatrixXd zf = x * p.w_f.transpose() + h * p.u_f.transpose();
        Eigen::MatrixXd zo = x * p.w_o.transpose() + h * p.u_o.transpose();
        Eigen::MatrixXd zg = x * p.w_g.transpose() + h * p.u_g.transpose();
        zi.rowwise() += p.b_i.transpose();
        zf.rowwise() += p.b_f.transpose();
        zo.rowwise() += p.b_o.transpose();
        zg.rowwise() += p.b_g.transpose();

        const Eigen::MatrixXd gi = detail::sigmoid(zi);
        const Eigen::MatrixXd gf = detail::sigmoid(zf);
        const Eigen::MatrixXd go = detail::sigmoid(zo);
        const Eigen::MatrixXd gg = zg.array().tanh().matrix();

        if (cache) cache->h_prev[t] = h;
        c = gf.cwiseProduct(c) + gi.cwiseProduct(gg);
        const Eigen::MatrixXd tc = c.array().tanh().matrix();
        h = go.cwiseProduct(tc);

        if (cache) {
            cache->gi[t] = gi; cache->gf[t] = gf; cache->go[t] = go; cache->gg[t] = gg;
            cache->c[t] = c; cache->tc[t] = tc;
        }
    }

    Eigen::MatrixXd z1 = h * p.v1.transpose();
    z1.rowwise() += p.c1.transpose();
    const Eigen::MatrixXd m1 = z1.array().tanh().matrix();
    Eigen::MatrixXd y = m1 * p.v2.transpose();
    y.rowwise() += p.c2.transpose();

    if (cache) {
        cache->h_last = h;
        cache->m1 = m1;
    }
    return y;
}

// Backpropagation through time from dL/dy. Returns gradients shaped like p.
inline ModelParams lstm_mlp_backward(const ModelParams& p, const LstmCache& cache,
                                     const Eigen::MatrixXd& dy) {
    ModelParams g = zeros_like(p);
    const auto L = cache.x.size();
    const Eigen::Index batch = dy.rows();

    g.v2 = dy.transpose() * cache.m1;
    g.c2 = dy.colwise().sum().transpose();
    Eigen::MatrixXd dm1 = dy * p.v2;
    Eigen::MatrixXd dz1 = dm1.cwiseProduct(
        (1.0 - cache.m1.array().square()).matrix());
    g.v1 = dz1.transpose() * cache.h_last;
    g.c1 = dz1.colwise().sum().transpose();

    Eigen::MatrixXd dh = dz1 * p.v1;
    Eigen::MatrixXd dc = Eigen::MatrixXd::Zero(batch, p.hidden_dim);

    for (std::size_t ti = L; ti-- > 0;) {
        const auto& gi = cache.gi[ti];
        const auto& gf = cache.gf[ti];
        const auto& go = cache.go[ti];
        const auto& gg = cache.gg[ti];
        const auto& tc = cache.tc[ti];
        const Eigen::MatrixXd c_prev =
            (ti > 0) ? cache.c[ti - 1] : Eigen::MatrixXd::Zero(batch, p.hidden_dim);

        const Eigen::MatrixXd dgo = dh.cwiseProduct(tc);
        const Eigen::MatrixXd dzo =
            dgo.cwiseProduct(go.cwiseProduct((1.0 - go.array()).matrix()));
        dc += dh.cwiseProduct(go).cwiseProduct((1.0 - tc.array().square()).matrix());

        const Eigen::MatrixXd dgf = dc.cwiseProduct(c_prev);
        const Eigen::MatrixXd dzf =
            dgf.cwiseProduct(gf.cwiseProduct((1.0 - gf.array()).matrix()));
        const Eigen::MatrixXd dgi = dc.cwiseProduct(gg);
        const Eigen::MatrixXd dzi =
            dgi.cwiseProduct(gi.cwiseProduct((1.0 - gi.array()).matrix()));
        const Eigen::MatrixXd dgg = dc.cwiseProduct(gi);
        const Eigen::MatrixXd dzg = dgg.cwiseProduct((1.0 - gg.array().square()).matrix());

        g.w_i += dzi.transpose() * cache.x[ti];
        g.w_f += dzf.transpose() * cache.x[ti];
        g.w_o += dzo.transpose() * cache.x[ti];
        g.w_g += dzg.transpose() * cache.x[ti];
        g.u_i += dzi.transpose() * cache.h_prev[ti];
        g.u_f += dzf.transpose() * cache.h_prev[ti];
        g.u_o += dzo.transpose() * cache.h_prev[ti];
        g.u_g += dzg.transpose() * cache.h_prev[ti];
        g.b_i += dzi.colwise().sum().transpose();
        g.b_f += dzf.colwise().sum().transpose();
        g.b_o += dzo.colwise().sum().transpose();
        g.b_g += dzg.colwise().sum().transpose();

        dh = dzi * p.u_i + dzf * p.u_f + dzo * p.u_o + dzg * p.u_g;
        dc = dc.cwiseProduct(gf);
    }
    return g;
}

}  // namespace windfleet
