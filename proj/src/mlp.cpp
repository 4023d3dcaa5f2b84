#include "fisherlat/mlp.hpp"

#include <cmath>
#include <stdexcept>

#include "json.hpp"

#include "fisherlat/parallel.hpp"
#include "fisherlat/rng.hpp"

namespace fisherlat {

Activation activation_from_string(const std::string& s) {
    if (s == "relu") return Activation::relu;
    if (s == "softplus") return Activation::softplus;
    throw std::invalid_argument("unknown activation: " + s);
}

std::string to_string(Activation a) { return a == Activation::relu ? "relu" : "softplus"; }

namespace {
// softplus and sigmoid share one exp(-|z|) evaluation
inline double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::fabs(z))); }
inline double sigmoid(double z) {
    const double e = std::exp(-std::fabs(z));
    return z >= 0.0 ? 1.0 / (1.0 + e) : e / (1.0 + e);
}

inline double act_value(Activation a, double z) {
    return a == Activation::relu ? (z > 0.0 ? z : 0.0) : softplus(z);
}
inline double act_deriv(Activation a, double z) {
    return a == Activation::relu ? (z > 0.0 ? 1.0 : 0.0) : sigmoid(z);
}
inline double act_deriv2(Activation a, double z) {
    if (a == Activation::relu) return 0.0;
    const double s = sigmoid(z);
    return s * (1.0 - s);
}

struct Scratch {
    std::vector<std::vector<double>> pre;  // pre-activations per non-input layer
    std::vector<std::vector<double>> act;  // activations per layer (act[0] = input)
};
}  // namespace

Mlp::Mlp(std::vector<int> layer_sizes, Activation act, std::uint64_t seed)
    : layers_(std::move(layer_sizes)), act_(act) {
    if (layers_.size() < 2) throw std::invalid_argument("Mlp: need at least input and output layer");
    for (int n : layers_)
        if (n < 1) throw std::invalid_argument("Mlp: layer sizes must be positive");
    std::size_t total = 0;
    for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
        w_offset_.push_back(total);
        total += static_cast<std::size_t>(layers_[l + 1]) * layers_[l];
        b_offset_.push_back(total);
        total += static_cast<std::size_t>(layers_[l + 1]);
    }
    params_.assign(total, 0.0);
    norm_mid_.assign(static_cast<std::size_t>(layers_.front()), 0.0);
    norm_half_.assign(static_cast<std::size_t>(layers_.front()), 1.0);
    Rng rng(seed);
    for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
        const double scale = std::sqrt(2.0 / layers_[l]);
        double* w = &params_[w_offset_[l]];
        for (int i = 0; i < layers_[l + 1] * layers_[l]; ++i) w[i] = scale * rng.normal();
    }
}

void Mlp::set_input_normalization(const std::vector<double>& mins, const std::vector<double>& maxs) {
    if (mins.size() != norm_mid_.size() || maxs.size() != norm_mid_.size())
        throw std::invalid_argument("Mlp: normalization dimension mismatch");
    for (std::size_t k = 0; k < mins.size(); ++k) {
        norm_mid_[k] = 0.5 * (mins[k] + maxs[k]);
        norm_half_[k] = 0.5 * (maxs[k] - mins[k]);
        if (!(norm_half_[k] > 0.0)) norm_half_[k] = 1.0;  // degenerate range stays unscaled
    }
}

void Mlp::normalize_input(const double* t, double* u) const {
    for (std::size_t k = 0; k < norm_mid_.size(); ++k) u[k] = (t[k] - norm_mid_[k]) / norm_half_[k];
}

struct MlpKernels {
    static void forward(const Mlp& net, const double* u, Scratch& s) {
        const auto& L = net.layers_;
        s.act.resize(L.size());
        s.pre.resize(L.size() - 1);
        s.act[0].assign(u, u + L[0]);
        for (std::size_t l = 0; l + 1 < L.size(); ++l) {
            const double* W = &net.params_[net.w_offset_[l]];
            const double* b = &net.params_[net.b_offset_[l]];
            const int nin = L[l];
            const int nout = L[l + 1];
            s.pre[l].assign(static_cast<std::size_t>(nout), 0.0);
            s.act[l + 1].assign(static_cast<std::size_t>(nout), 0.0);
            const bool last = (l + 2 == L.size());
            for (int i = 0; i < nout; ++i) {
                double z = b[i];
                const double* wi = W + static_cast<std::size_t>(i) * nin;
                for (int j = 0; j < nin; ++j) z += wi[j] * s.act[l][static_cast<std::size_t>(j)];
                s.pre[l][static_cast<std::size_t>(i)] = z;
                s.act[l + 1][static_cast<std::size_t>(i)] = last ? z : act_value(net.act_, z);
            }
        }
    }

    // accumulates d(sum_k adj_k out_k)/dparams into grad (same layout as params)
    static void backward(const Mlp& net, const Scratch& s, const double* adj, double* grad) {
        const auto& L = net.layers_;
        const int nlayers = static_cast<int>(L.size());
        std::vector<double> delta(s.act.back().size());
        for (std::size_t k = 0; k < delta.size(); ++k) delta[k] = adj[k];
        for (int l = nlayers - 2; l >= 0; --l) {
            const std::size_t ul = static_cast<std::size_t>(l);
            const double* W = &net.params_[net.w_offset_[ul]];
            double* gW = grad + net.w_offset_[ul];
            double* gb = grad + net.b_offset_[ul];
            const int nin = L[ul];
            const int nout = L[ul + 1];
            const auto& a = s.act[ul];
            for (int i = 0; i < nout; ++i) {
                const double d = delta[static_cast<std::size_t>(i)];
                gb[i] += d;
                double* gwi = gW + static_cast<std::size_t>(i) * nin;
                for (int j = 0; j < nin; ++j) gwi[j] += d * a[static_cast<std::size_t>(j)];
            }
            if (l == 0) break;
            std::vector<double> prev(static_cast<std::size_t>(nin), 0.0);
            for (int j = 0; j < nin; ++j) {
                double acc = 0.0;
                for (int i = 0; i < nout; ++i)
                    acc += delta[static_cast<std::size_t>(i)] * W[static_cast<std::size_t>(i) * nin + j];
                prev[static_cast<std::size_t>(j)] = acc * act_deriv(net.act_, s.pre[ul - 1][static_cast<std::size_t>(j)]);
            }
            delta.swap(prev);
        }
    }
};

void Mlp::value_batch(const double* pts, int batch, double* out) const {
    const int nout = output_dim();
    const int nin = input_dim();
#pragma omp parallel
    {
        Scratch s;
        std::vector<double> u(static_cast<std::size_t>(nin));
#pragma omp for schedule(static)
        for (int b = 0; b < batch; ++b) {
            normalize_input(pts + static_cast<std::size_t>(b) * nin, u.data());
            MlpKernels::forward(*this, u.data(), s);
            for (int k = 0; k < nout; ++k)
                out[static_cast<std::size_t>(b) * nout + k] =
                    output_scale * s.act.back()[static_cast<std::size_t>(k)];
        }
    }
}

void Mlp::value_batch(const Point2* pts, int batch, double* out) const {
    if (input_dim() != 2) throw std::logic_error("Mlp: Point2 batch requires 2-d input");
    value_batch(reinterpret_cast<const double*>(pts), batch, out);
}

double Mlp::value(Point2 t) const {
    if (output_dim() != 1) throw std::logic_error("Mlp::value: scalar output expected");
    double out;
    value_batch(&t, 1, &out);
    return out;
}

void Mlp::value_grad(Point2 t, double& v, double& gx, double& gy) const {
    double grad[2], hess[3];
    value_hess(t, v, grad, hess);
    gx = grad[0];
    gy = grad[1];
}

// Forward-mode propagation of value, d/du and d2/du2 through the layers,
// then chain rule through the input normalization.
void Mlp::value_hess(Point2 t, double& v, double grad[2], double hess[3]) const {
    if (output_dim() != 1 || input_dim() != 2)
        throw std::logic_error("Mlp::value_hess: 2-d input, scalar output expected");
    const double tr[2] = {t.x, t.y};
    double u[2];
    normalize_input(tr, u);

    std::vector<double> a(u, u + 2);
    std::vector<double> J = {1.0, 0.0, 0.0, 1.0};  // da/du, per unit: (d/dux, d/duy)
    std::vector<double> H(2 * 3, 0.0);             // d2a/du2 per unit: (xx, xy, yy)

    const int nlayers = static_cast<int>(layers_.size());
    for (int l = 0; l + 1 < nlayers; ++l) {
        const std::size_t ul = static_cast<std::size_t>(l);
        const double* W = &params_[w_offset_[ul]];
        const double* b = &params_[b_offset_[ul]];
        const int nin = layers_[ul];
        const int nout = layers_[ul + 1];
        std::vector<double> na(static_cast<std::size_t>(nout), 0.0);
        std::vector<double> nJ(static_cast<std::size_t>(nout) * 2, 0.0);
        std::vector<double> nH(static_cast<std::size_t>(nout) * 3, 0.0);
        const bool last = (l + 2 == nlayers);
        for (int i = 0; i < nout; ++i) {
            const double* wi = W + static_cast<std::size_t>(i) * nin;
            double zi = b[i];
            double jx = 0.0, jy = 0.0, hxx = 0.0, hxy = 0.0, hyy = 0.0;
            for (int j = 0; j < nin; ++j) {
                const double w = wi[j];
                const std::size_t uj = static_cast<std::size_t>(j);
                zi += w * a[uj];
                jx += w * J[uj * 2 + 0];
                jy += w * J[uj * 2 + 1];
                hxx += w * H[uj * 3 + 0];
                hxy += w * H[uj * 3 + 1];
                hyy += w * H[uj * 3 + 2];
            }
            const std::size_t ui = static_cast<std::size_t>(i);
            if (last) {
                na[ui] = zi;
                nJ[ui * 2 + 0] = jx;
                nJ[ui * 2 + 1] = jy;
                nH[ui * 3 + 0] = hxx;
                nH[ui * 3 + 1] = hxy;
                nH[ui * 3 + 2] = hyy;
            } else {
                const double d1 = act_deriv(act_, zi);
                const double d2 = act_deriv2(act_, zi);
                na[ui] = act_value(act_, zi);
                nJ[ui * 2 + 0] = d1 * jx;
                nJ[ui * 2 + 1] = d1 * jy;
                nH[ui * 3 + 0] = d2 * jx * jx + d1 * hxx;
                nH[ui * 3 + 1] = d2 * jx * jy + d1 * hxy;
                nH[ui * 3 + 2] = d2 * jy * jy + d1 * hyy;
            }
        }
        a.swap(na);
        J.swap(nJ);
        H.swap(nH);
    }
    const double sx = 1.0 / norm_half_[0];
    const double sy = 1.0 / norm_half_[1];
    v = output_scale * a[0];
    grad[0] = output_scale * J[0] * sx;
    grad[1] = output_scale * J[1] * sy;
    hess[0] = output_scale * H[0] * sx * sx;
    hess[1] = output_scale * H[1] * sx * sy;
    hess[2] = output_scale * H[2] * sy * sy;
}

std::vector<double> Mlp::param_gradient(const double* pts, int batch, const double* adj) const {
    const int nout = output_dim();
    const int nin = input_dim();
    std::vector<double> grad;
    chunked_accumulate(static_cast<std::size_t>(batch), params_.size(), grad,
                       [&](std::size_t b, double* buf) {
                           Scratch s;
                           std::vector<double> u(static_cast<std::size_t>(nin));
                           normalize_input(pts + b * static_cast<std::size_t>(nin), u.data());
                           MlpKernels::forward(*this, u.data(), s);
                           std::vector<double> a(static_cast<std::size_t>(nout));
                           for (int k = 0; k < nout; ++k)
                               a[static_cast<std::size_t>(k)] =
                                   output_scale * adj[b * static_cast<std::size_t>(nout) + k];
                           MlpKernels::backward(*this, s, a.data(), buf);
                       });
    return grad;
}

std::vector<double> Mlp::param_gradient(const Point2* pts, int batch, const double* adj) const {
    if (input_dim() != 2) throw std::logic_error("Mlp: Point2 batch requires 2-d input");
    return param_gradient(reinterpret_cast<const double*>(pts), batch, adj);
}

std::string Mlp::to_json() const {
    nlohmann::json j;
    j["layers"] = layers_;
    j["activation"] = to_string(act_);
    j["output_scale"] = output_scale;
    std::vector<double> mins, maxs;
    for (std::size_t k = 0; k < norm_mid_.size(); ++k) {
        mins.push_back(norm_mid_[k] - norm_half_[k]);
        maxs.push_back(norm_mid_[k] + norm_half_[k]);
    }
    j["norm_min"] = mins;
    j["norm_max"] = maxs;
    j["weights"] = params_;
    return j.dump() + "\n";
}

Mlp Mlp::from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    Mlp net(j.at("layers").get<std::vector<int>>(),
            activation_from_string(j.at("activation").get<std::string>()), 0);
    const auto w = j.at("weights").get<std::vector<double>>();
    if (w.size() != net.params_.size())
        throw std::runtime_error("Mlp::from_json: weight count mismatch");
    net.params_ = w;
    net.output_scale = j.at("output_scale").get<double>();
    net.set_input_normalization(j.at("norm_min").get<std::vector<double>>(),
                                j.at("norm_max").get<std::vector<double>>());
    return net;
}

MlpBatch::MlpBatch(const Mlp& net) : net_(&net) {
    const auto& L = net.layers_;
    for (int n : L) {
        act_off_.push_back(act_stride_);
        act_stride_ += static_cast<std::size_t>(n);
    }
    for (std::size_t l = 1; l + 1 < L.size(); ++l) {
        dphi_off_.push_back(dphi_stride_);
        dphi_stride_ += static_cast<std::size_t>(L[l]);
    }
    if (dphi_off_.empty()) dphi_off_.push_back(0);
}

void MlpBatch::forward(const Point2* pts, int batch, double* out) {
    const Mlp& net = *net_;
    if (net.input_dim() != 2 || net.output_dim() != 1)
        throw std::logic_error("MlpBatch: 2-d input, scalar output expected");
    const auto& L = net.layers_;
    batch_ = batch;
    act_.resize(static_cast<std::size_t>(batch) * act_stride_);
    dphi_.resize(static_cast<std::size_t>(batch) * std::max<std::size_t>(dphi_stride_, 1));

    // transposed weight copy: the accumulation z[i] += wt[j*nout + i] * a[j]
    // runs over independent accumulators, which vectorizes without changing
    // any per-unit result
    std::size_t wtotal = 0;
    for (std::size_t l = 0; l + 1 < L.size(); ++l) wtotal += static_cast<std::size_t>(L[l]) * L[l + 1];
    wt_.resize(wtotal);
    {
        std::size_t off = 0;
        for (std::size_t l = 0; l + 1 < L.size(); ++l) {
            const double* W = &net.params_[net.w_offset_[l]];
            const int nin = L[l], nout = L[l + 1];
            for (int i = 0; i < nout; ++i)
                for (int j = 0; j < nin; ++j)
                    wt_[off + static_cast<std::size_t>(j) * nout + i] = W[static_cast<std::size_t>(i) * nin + j];
            off += static_cast<std::size_t>(nin) * nout;
        }
    }

#pragma omp parallel for schedule(static)
    for (int b = 0; b < batch; ++b) {
        double* a = &act_[static_cast<std::size_t>(b) * act_stride_];
        double* dp = &dphi_[static_cast<std::size_t>(b) * std::max<std::size_t>(dphi_stride_, 1)];
        const double raw[2] = {pts[b].x, pts[b].y};
        net.normalize_input(raw, a);
        std::size_t woff = 0;
        for (std::size_t l = 0; l + 1 < L.size(); ++l) {
            const double* bias = &net.params_[net.b_offset_[l]];
            const double* prev = a + act_off_[l];
            double* next = a + act_off_[l + 1];
            const int nin = L[l];
            const int nout = L[l + 1];
            const bool last = (l + 2 == L.size());
            for (int i = 0; i < nout; ++i) next[i] = bias[i];
            for (int j = 0; j < nin; ++j) {
                const double aj = prev[j];
                const double* col = wt_.data() + woff + static_cast<std::size_t>(j) * nout;
                for (int i = 0; i < nout; ++i) next[i] += col[i] * aj;
            }
            woff += static_cast<std::size_t>(nin) * nout;
            if (last) break;
            if (net.act_ == Activation::relu) {
                for (int i = 0; i < nout; ++i) {
                    const double z = next[i];
                    next[i] = z > 0.0 ? z : 0.0;
                    dp[dphi_off_[l] + static_cast<std::size_t>(i)] = z > 0.0 ? 1.0 : 0.0;
                }
            } else {
                for (int i = 0; i < nout; ++i) {
                    const double z = next[i];
                    const double e = std::exp(-std::fabs(z));
                    next[i] = std::max(z, 0.0) + std::log1p(e);
                    dp[dphi_off_[l] + static_cast<std::size_t>(i)] =
                        z >= 0.0 ? 1.0 / (1.0 + e) : e / (1.0 + e);
                }
            }
        }
        out[b] = net.output_scale * a[act_off_.back()];
    }
}

std::vector<double> MlpBatch::backward(const double* adj) const {
    const Mlp& net = *net_;
    const auto& L = net.layers_;
    const int nlayers = static_cast<int>(L.size());
    int widest = 0;
    for (int n : L) widest = std::max(widest, n);
    std::vector<double> grad;
    chunked_accumulate(
        static_cast<std::size_t>(batch_), net.params_.size(), grad,
        [&](std::size_t b, double* buf) {
            const double* a = &act_[b * act_stride_];
            const double* dp = &dphi_[b * std::max<std::size_t>(dphi_stride_, 1)];
            std::vector<double> delta(static_cast<std::size_t>(widest), 0.0);
            std::vector<double> prev_delta(static_cast<std::size_t>(widest), 0.0);
            delta[0] = net.output_scale * adj[b];
            for (int l = nlayers - 2; l >= 0; --l) {
                const std::size_t ul = static_cast<std::size_t>(l);
                const double* W = &net.params_[net.w_offset_[ul]];
                double* gW = buf + net.w_offset_[ul];
                double* gb = buf + net.b_offset_[ul];
                const int nin = L[ul];
                const int nout = L[ul + 1];
                const double* al = a + act_off_[ul];
                for (int i = 0; i < nout; ++i) {
                    const double d = delta[static_cast<std::size_t>(i)];
                    gb[i] += d;
                    double* gwi = gW + static_cast<std::size_t>(i) * nin;
                    for (int j = 0; j < nin; ++j) gwi[j] += d * al[j];
                }
                if (l == 0) break;
                // same i-ascending accumulation per j, vectorizable axpy form
                for (int j = 0; j < nin; ++j) prev_delta[static_cast<std::size_t>(j)] = 0.0;
                for (int i = 0; i < nout; ++i) {
                    const double d = delta[static_cast<std::size_t>(i)];
                    const double* wi = W + static_cast<std::size_t>(i) * nin;
                    for (int j = 0; j < nin; ++j) prev_delta[static_cast<std::size_t>(j)] += d * wi[j];
                }
                for (int j = 0; j < nin; ++j)
                    prev_delta[static_cast<std::size_t>(j)] *= dp[dphi_off_[ul - 1] + static_cast<std::size_t>(j)];
                std::swap(delta, prev_delta);
            }
        });
    return grad;
}

void Adam::step(std::vector<double>& params, const std::vector<double>& grad) {
    if (m.size() != params.size()) {
        m.assign(params.size(), 0.0);
        v.assign(params.size(), 0.0);
        step_count = 0;
    }
    ++step_count;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_count));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_count));
    for (std::size_t i = 0; i < params.size(); ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
        params[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
    }
}

}  // namespace fisherlat
