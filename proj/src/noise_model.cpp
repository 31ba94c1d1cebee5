#include "snls/noise_model.hpp"

#include <cmath>
#include <stdexcept>

#include "snls/spectral.hpp"

namespace snls {

NoiseProfile make_bump_profile(const TorusGrid& grid, const double* center, double radius,
                               cplx amplitude, bool conservative) {
    grid.validate();
    if (!(radius > 0.0)) throw std::domain_error("make_bump_profile: radius must be positive");
    if (!(radius < 0.5 * grid.L - 2.0 * grid.h()))
        throw std::domain_error("make_bump_profile: radius does not fit the box (need < L/2 - 2h)");
    if (conservative && amplitude.real() != 0.0)
        throw std::invalid_argument(
            "make_bump_profile: conservative profile needs a purely imaginary amplitude");

    NoiseProfile p;
    p.phi = ComplexField(grid);
    p.conservative = conservative;
    const double r2max = radius * radius;
    // closed-form gradient, used for the flatness certificate and to size the
    // spectral-differentiation error:
    //   d/dx_a [A exp(-r^2/(R^2-r^2))] = phi * (-2 R^2 dx_a / (R^2-r^2)^2)
    std::vector<std::vector<cplx>> exact_grad(grid.dim,
                                              std::vector<cplx>(grid.size(), cplx(0.0, 0.0)));
    double shell_max = 0.0, global_max = 0.0;
    const double shell_edge = 0.9 * 0.5 * grid.L;  // outer 10% in the sup-norm sense
    int idx[3];
    for (std::size_t flat = 0; flat < grid.size(); ++flat) {
        grid.axis_indices(flat, idx);
        double r2 = 0.0, x2 = 0.0, xmax = 0.0;
        double dx[3] = {0.0, 0.0, 0.0};
        for (int a = 0; a < grid.dim; ++a) {
            // minimal-image offset: the support fits in half the box, so the
            // nearest periodic copy is unambiguous
            dx[a] = grid.coordinate(idx[a]) - center[a];
            dx[a] -= grid.L * std::round(dx[a] / grid.L);
            r2 += dx[a] * dx[a];
            const double x = grid.coordinate(idx[a]);
            x2 += x * x;
            xmax = std::max(xmax, std::abs(x));
        }
        if (r2 < r2max) {
            const cplx v = amplitude * std::exp(-r2 / (r2max - r2));
            p.phi.values[flat] = v;
            const double shape = -2.0 * r2max / ((r2max - r2) * (r2max - r2));
            double g2 = 0.0;
            for (int a = 0; a < grid.dim; ++a) {
                exact_grad[a][flat] = v * (shape * dx[a]);
                g2 += std::norm(exact_grad[a][flat]);
            }
            const double flatness = x2 * std::sqrt(g2);
            global_max = std::max(global_max, flatness);
            if (xmax >= shell_edge) shell_max = std::max(shell_max, flatness);
        }
    }
    p.decay_ratio = global_max > 0.0 ? shell_max / global_max : 0.0;
    if (p.decay_ratio > 1e-8)
        throw std::domain_error(
            "make_bump_profile: support reaches the outer shell; move the center inward or "
            "shrink the radius");

    p.grad = spectral_gradient(p.phi);
    p.lap = spectral_laplacian(p.phi);
    for (int a = 0; a < grid.dim; ++a) {
        for (std::size_t flat = 0; flat < grid.size(); ++flat) {
            p.gradient_ringing = std::max(
                p.gradient_ringing, std::abs(p.grad[a].values[flat] - exact_grad[a][flat]));
        }
    }
    return p;
}

void NoiseModel::validate() const {
    mesh.validate();
    if (profiles.empty()) throw std::domain_error("NoiseModel: need at least one channel");
    if (g.size() != profiles.size())
        throw std::invalid_argument("NoiseModel: amplitude table does not match channel count");
    const TorusGrid& gr = profiles[0].phi.grid;
    for (const NoiseProfile& p : profiles) {
        require_same_grid(p.phi.grid, gr, "NoiseModel");
        if ((int)p.grad.size() != gr.dim)
            throw std::invalid_argument("NoiseModel: profile is missing precomputed gradients");
        if (p.decay_ratio > 1e-8)
            throw std::domain_error("NoiseModel: profile violates the flatness certificate");
    }
    for (const std::vector<double>& gk : g) {
        if (gk.size() != (std::size_t)mesh.steps + 1)
            throw std::invalid_argument(
                "NoiseModel: amplitude samples do not match mesh (need steps+1 values)");
    }
}

std::vector<double> NoiseModel::mu_at(int j) const {
    const TorusGrid& gr = grid();
    std::vector<double> mu(gr.size(), 0.0);
    for (int k = 0; k < channels(); ++k) {
        const double gk = g_at(k, j);
        const double w = 0.5 * gk * gk;
        const ComplexField& phi = profiles[k].phi;
        for (std::size_t i = 0; i < phi.size(); ++i) mu[i] += w * std::norm(phi.values[i]);
    }
    return mu;
}

ComplexField NoiseModel::mu_hat_at(int j) const {
    ComplexField out(grid());
    if (conservative) return out;  // Re phi == 0 exactly, so every term vanishes
    for (int k = 0; k < channels(); ++k) {
        const double gk = g_at(k, j);
        const double w = gk * gk;
        const ComplexField& phi = profiles[k].phi;
        for (std::size_t i = 0; i < phi.size(); ++i) {
            out.values[i] += w * phi.values[i].real() * phi.values[i];
        }
    }
    return out;
}

NoiseModel make_noise_model(const TimeMesh& mesh, std::vector<NoiseProfile> profiles,
                            std::vector<std::vector<double>> amplitudes) {
    NoiseModel m;
    m.mesh = mesh;
    m.profiles = std::move(profiles);
    m.g = std::move(amplitudes);
    m.validate();
    m.conservative = true;
    for (const NoiseProfile& p : m.profiles) {
        if (!p.conservative) m.conservative = false;
        // the flag must agree with the stored data, conservative or not
        double remax = 0.0;
        for (const cplx& v : p.phi.values) remax = std::max(remax, std::abs(v.real()));
        if (p.conservative && remax != 0.0)
            throw std::invalid_argument("NoiseModel: conservative profile has a real part");
    }
    return m;
}

NoiseModel coarsen_noise_model(const NoiseModel& model, int factor) {
    model.validate();
    if (factor < 1) throw std::domain_error("coarsen_noise_model: factor must be >= 1");
    if (model.mesh.steps % factor != 0)
        throw std::domain_error("coarsen_noise_model: factor must divide the step count");
    if (factor == 1) return model;

    NoiseModel out;
    out.mesh = TimeMesh{model.mesh.t0, model.mesh.dt * factor, model.mesh.steps / factor};
    out.profiles = model.profiles;
    out.conservative = model.conservative;
    out.g.resize(model.g.size());
    for (std::size_t k = 0; k < model.g.size(); ++k) {
        out.g[k].resize((std::size_t)out.mesh.steps + 1);
        for (int j = 0; j <= out.mesh.steps; ++j) {
            out.g[k][j] = model.g[k][(std::size_t)j * factor];
        }
    }
    return out;
}

}  // namespace snls
