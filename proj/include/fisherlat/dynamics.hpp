#pragma once

#include <vector>

namespace fisherlat {

// Variance-preserving SDE dX = -(beta/2) X dt + sqrt(beta) dW with a bimodal
// target: modes at +-1 with weight 1/2 and standard deviation sigma each.
struct VpMixtureSpec {
    double sigma = 0.5;
    double beta = 1.0;
};

// Parameters of the noised density p_t: mode center mu(t) = e^{-beta t / 2}
// and variance sigma1^2(t) = e^{-beta t} sigma^2 + (1 - e^{-beta t}).
void noised_density_params(const VpMixtureSpec& spec, double t, double& mu, double& sigma1_sq);

// d/dx log p_t(x). Written with tanh, which is the log-sum-exp reduction of
// the two mode terms, so it is stable for any x:
//   score = -x/s2 + (mu/s2) tanh(mu x / s2),  s2 = sigma1^2(t).
double score(const VpMixtureSpec& spec, double x, double t);

// test hook: the single-mode (pure Gaussian) score -(x - mu)/sigma1^2
double score_single_mode(double x, double mu, double sigma1_sq);

// log p_t(x), used by the normalization and finite-difference checks
double log_density(const VpMixtureSpec& spec, double x, double t);

// Reverse-time probability-flow velocity v(x, t) = (beta/2) x + (beta/2) score.
double reverse_velocity(const VpMixtureSpec& spec, double x, double t);

// Closed-form Lyapunov exponent of the reverse ODE at x = 0:
//   lambda(t) = (beta/2) (1 + (e^{-beta t} - sigma1^2) / sigma1^4),
// which reduces to (beta/2)(1 + (1 - sigma^2)/sigma^4) at t = 0.
double lyapunov_closed(const VpMixtureSpec& spec, double t);

// central difference (v(delta) - v(-delta)) / (2 delta) at x = 0
double lyapunov_numeric(const VpMixtureSpec& spec, double t, double delta = 1e-5);

struct TrajectoryResult {
    double rate = 0.0;       // ln(|dx(t0)| / (2 delta)) / (t1 - t0)
    bool completed = false;  // false when a trajectory left the window
    double t_reached = 0.0;
    std::vector<double> s;   // diffusion times of the stored trajectory
    std::vector<double> x_plus;
    std::vector<double> x_minus;
};

// Integrates two reverse trajectories started at x0 +- delta from diffusion
// time t1 down to t0 with fixed-step RK4 and reports the divergence rate.
TrajectoryResult trajectory_divergence(const VpMixtureSpec& spec, double x0, double delta,
                                       double t1, double t0, int steps, double window = 50.0);

}  // namespace fisherlat
