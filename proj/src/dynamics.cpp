#include "fisherlat/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fisherlat {

void noised_density_params(const VpMixtureSpec& spec, double t, double& mu, double& sigma1_sq) {
    if (!(spec.sigma > 0.0) || !(spec.beta > 0.0))
        throw std::invalid_argument("VpMixtureSpec: sigma and beta must be positive");
    if (t < 0.0) throw std::invalid_argument("noised_density_params: t must be >= 0");
    const double decay = std::exp(-spec.beta * t);
    mu = std::exp(-0.5 * spec.beta * t);
    sigma1_sq = decay * spec.sigma * spec.sigma + (1.0 - decay);
}

double score(const VpMixtureSpec& spec, double x, double t) {
    double mu, s2;
    noised_density_params(spec, t, mu, s2);
    return -x / s2 + (mu / s2) * std::tanh(mu * x / s2);
}

double score_single_mode(double x, double mu, double sigma1_sq) {
    return -(x - mu) / sigma1_sq;
}

double log_density(const VpMixtureSpec& spec, double x, double t) {
    double mu, s2;
    noised_density_params(spec, t, mu, s2);
    // log p = -(x^2 + mu^2)/(2 s2) + log(2 cosh(mu x / s2)) - log(2 sqrt(2 pi s2))
    const double a = mu * x / s2;
    const double log2cosh = std::fabs(a) + std::log1p(std::exp(-2.0 * std::fabs(a)));
    return -(x * x + mu * mu) / (2.0 * s2) + log2cosh -
           std::log(2.0 * std::sqrt(2.0 * 3.14159265358979323846 * s2));
}

double reverse_velocity(const VpMixtureSpec& spec, double x, double t) {
    return 0.5 * spec.beta * x + 0.5 * spec.beta * score(spec, x, t);
}

double lyapunov_closed(const VpMixtureSpec& spec, double t) {
    double mu, s2;
    noised_density_params(spec, t, mu, s2);
    const double decay = std::exp(-spec.beta * t);  // = mu^2
    return 0.5 * spec.beta * (1.0 + (decay - s2) / (s2 * s2));
}

double lyapunov_numeric(const VpMixtureSpec& spec, double t, double delta) {
    if (!(delta > 0.0)) throw std::invalid_argument("lyapunov_numeric: delta must be positive");
    return (reverse_velocity(spec, delta, t) - reverse_velocity(spec, -delta, t)) / (2.0 * delta);
}

TrajectoryResult trajectory_divergence(const VpMixtureSpec& spec, double x0, double delta,
                                       double t1, double t0, int steps, double window) {
    if (!(t1 > t0) || t0 < 0.0)
        throw std::invalid_argument("trajectory_divergence: need t1 > t0 >= 0");
    if (steps < 1) throw std::invalid_argument("trajectory_divergence: steps must be >= 1");

    TrajectoryResult r;
    r.s.reserve(static_cast<std::size_t>(steps) + 1);
    r.x_plus.reserve(static_cast<std::size_t>(steps) + 1);
    r.x_minus.reserve(static_cast<std::size_t>(steps) + 1);

    // reverse time s runs forward while diffusion time t = t1 - s decreases
    const double ds = (t1 - t0) / steps;
    double xp = x0 + delta;
    double xm = x0 - delta;
    double t = t1;
    r.s.push_back(t);
    r.x_plus.push_back(xp);
    r.x_minus.push_back(xm);
    // the last RK4 stage can land an ulp below t0 = 0; clamp
    auto f = [&](double x, double tt) { return reverse_velocity(spec, x, std::max(tt, 0.0)); };
    r.completed = true;
    for (int k = 0; k < steps; ++k) {
        auto rk4 = [&](double x) {
            const double k1 = f(x, t);
            const double k2 = f(x + 0.5 * ds * k1, t - 0.5 * ds);
            const double k3 = f(x + 0.5 * ds * k2, t - 0.5 * ds);
            const double k4 = f(x + ds * k3, t - ds);
            return x + ds / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        };
        xp = rk4(xp);
        xm = rk4(xm);
        t = t1 - (k + 1) * ds;
        r.s.push_back(t);
        r.x_plus.push_back(xp);
        r.x_minus.push_back(xm);
        if (std::fabs(xp) > window || std::fabs(xm) > window) {
            r.completed = false;
            break;
        }
    }
    r.t_reached = t;
    const double spread = std::fabs(xp - xm);
    r.rate = std::log(spread / (2.0 * delta)) / (t1 - r.t_reached);
    return r;
}

}  // namespace fisherlat
