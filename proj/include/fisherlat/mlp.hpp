#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fisherlat/grid.hpp"

namespace fisherlat {

enum class Activation { relu, softplus };
Activation activation_from_string(const std::string& s);
std::string to_string(Activation a);

// Fully connected network with hand-written forward, reverse-mode parameter
// gradients and forward-mode input derivatives. Inputs are mapped affinely to
// [-1,1]^d from the stored bounds; outputs are multiplied by output_scale so
// the raw network can stay O(1) even when the learned potential is not.
class Mlp {
public:
    Mlp() = default;
    // layer_sizes = {in, hidden..., out}
    Mlp(std::vector<int> layer_sizes, Activation act, std::uint64_t seed);

    int input_dim() const { return layers_.front(); }
    int output_dim() const { return layers_.back(); }
    const std::vector<int>& layer_sizes() const { return layers_; }
    Activation activation() const { return act_; }

    void set_input_normalization(const std::vector<double>& mins, const std::vector<double>& maxs);
    // 2-d convenience used by the potential models
    void set_input_normalization(double t1_min, double t1_max, double t2_min, double t2_max) {
        set_input_normalization({t1_min, t2_min}, {t1_max, t2_max});
    }

    double output_scale = 1.0;

    std::vector<double>& params() { return params_; }
    const std::vector<double>& params() const { return params_; }
    int n_params() const { return static_cast<int>(params_.size()); }

    // batched values; pts is batch x input_dim row-major, out batch x output_dim
    void value_batch(const double* pts, int batch, double* out) const;
    void value_batch(const Point2* pts, int batch, double* out) const;
    double value(Point2 t) const;

    // 2-d scalar models: value, input gradient, input Hessian (xx, xy, yy).
    // Exact for softplus; for relu the second derivative is identically zero
    // between kinks, so only the finite-difference route is meaningful there.
    void value_grad(Point2 t, double& v, double& gx, double& gy) const;
    void value_hess(Point2 t, double& v, double grad[2], double hess[3]) const;

    // gradient of sum_b sum_k adj[b*out+k] * out_k(pts[b]) w.r.t. the flat
    // parameter vector; deterministic for any thread count
    std::vector<double> param_gradient(const double* pts, int batch, const double* adj) const;
    std::vector<double> param_gradient(const Point2* pts, int batch, const double* adj) const;

    std::string to_json() const;
    static Mlp from_json(const std::string& text);

    // the affine input map is part of the model contract (stored in the
    // checkpoint), so reference implementations may apply it directly
    void normalize_input(const double* t, double* u) const;

    friend class MlpBatch;

private:
    friend struct MlpKernels;
    std::vector<int> layers_;
    Activation act_ = Activation::softplus;
    std::vector<double> params_;         // per layer: W row-major, then b
    std::vector<std::size_t> w_offset_;  // offsets of W_l in params_
    std::vector<std::size_t> b_offset_;
    std::vector<double> norm_mid_;
    std::vector<double> norm_half_;
};

// Training-loop evaluation cache: one forward pass stores activations and the
// activation derivatives, so the backward pass reuses them instead of
// recomputing the network (the transcendental calls dominate the step cost).
// Arithmetic per sample is identical to value_batch / param_gradient.
class MlpBatch {
public:
    explicit MlpBatch(const Mlp& net);

    // values for `batch` 2-d points; fills the cache for backward()
    void forward(const Point2* pts, int batch, double* out);
    // gradient of sum_b adj[b] * out(pts[b]) from the cached forward pass
    std::vector<double> backward(const double* adj) const;

private:
    const Mlp* net_;
    int batch_ = 0;
    std::vector<std::size_t> act_off_, dphi_off_;
    std::size_t act_stride_ = 0, dphi_stride_ = 0;
    std::vector<double> act_;   // batch x act_stride (input + all activations)
    std::vector<double> dphi_;  // batch x dphi_stride (phi'(z) per hidden unit)
    std::vector<double> wt_;    // per-layer transposed weights, rebuilt each forward
};

// Adam optimizer over a flat parameter vector.
struct Adam {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::vector<double> m, v;
    long long step_count = 0;

    void step(std::vector<double>& params, const std::vector<double>& grad);
};

}  // namespace fisherlat
