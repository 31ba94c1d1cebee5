#include "snls/rescaling.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "snls/spectral.hpp"

namespace snls {

namespace {

void check_compatible(const NoiseModel& noise, const BrownianDriver& driver, const char* where) {
    noise.validate();
    driver.validate();
    if (!(noise.mesh == driver.mesh))
        throw std::invalid_argument(std::string(where) + ": noise and driver meshes differ");
    if (noise.channels() != driver.channels)
        throw std::invalid_argument(std::string(where) + ": channel counts differ");
}

// phi_next = phi + direction * (sum_k phi_k g_k(t_j) dbeta_k(j))
//                - direction * dt/2 * (mu_hat(t_j) + mu_hat(t_{j+1}))
// accumulated into `step` (a scratch field) and applied to `phi`.
void accumulate_cell(const NoiseModel& noise, const BrownianDriver& driver, int j,
                     double direction, ComplexField& phi) {
    const int N = noise.channels();
    for (int k = 0; k < N; ++k) {
        const double w = direction * noise.g_at(k, j) * driver.increment(j, k);
        if (w == 0.0) continue;
        const ComplexField& pk = noise.profiles[k].phi;
        for (std::size_t i = 0; i < phi.size(); ++i) phi.values[i] += w * pk.values[i];
    }
    if (!noise.conservative) {
        const ComplexField lo = noise.mu_hat_at(j);
        const ComplexField hi = noise.mu_hat_at(j + 1);
        const double half_dt = 0.5 * direction * driver.mesh.dt;
        for (std::size_t i = 0; i < phi.size(); ++i) {
            phi.values[i] -= half_dt * (lo.values[i] + hi.values[i]);
        }
    }
}

}  // namespace

PhasePath forward_phase(const NoiseModel& noise, const BrownianDriver& driver, int sigma_index) {
    check_compatible(noise, driver, "forward_phase");
    if (sigma_index < 0 || sigma_index > driver.mesh.steps)
        throw std::invalid_argument("forward_phase: sigma index outside the mesh");

    PhasePath p;
    p.mesh = driver.mesh;
    p.kind = PhaseKind::forward;
    p.origin_index = sigma_index;
    ComplexField phi(noise.grid());  // zero at the origin
    p.phase.times.push_back(driver.mesh.time(sigma_index));
    p.phase.fields.push_back(phi);
    for (int j = sigma_index; j < driver.mesh.steps; ++j) {
        accumulate_cell(noise, driver, j, +1.0, phi);
        p.phase.times.push_back(driver.mesh.time(j + 1));
        p.phase.fields.push_back(phi);
    }
    return p;
}

PhasePath scattering_phase(const NoiseModel& noise, const BrownianDriver& driver,
                           double horizon) {
    check_compatible(noise, driver, "scattering_phase");
    const TimeMesh& mesh = driver.mesh;
    const long long h = std::llround((horizon - mesh.t0) / mesh.dt);
    if (h < 1 || h > mesh.steps || std::abs(mesh.time((int)h) - horizon) > 1e-9 * mesh.dt)
        throw std::domain_error("scattering_phase: horizon does not lie on the mesh");
    const int hidx = (int)h;
    for (int k = 0; k < noise.channels(); ++k) {
        for (int j = hidx + 1; j <= mesh.steps; ++j) {
            if (noise.g_at(k, j) != 0.0)
                throw std::domain_error(
                    "scattering_phase: amplitude is nonzero beyond the horizon; the tail "
                    "truncation would bias the phase");
        }
    }

    PhasePath p;
    p.mesh = mesh;
    p.kind = PhaseKind::scattering;
    p.origin_index = hidx;
    p.phase.times.resize(hidx + 1);
    p.phase.fields.assign(hidx + 1, ComplexField(noise.grid()));
    p.phase.times[hidx] = mesh.time(hidx);
    ComplexField phi(noise.grid());  // zero at the horizon
    for (int j = hidx - 1; j >= 0; --j) {
        // going backward, the cell [t_j, t_{j+1}] enters with the opposite sign
        accumulate_cell(noise, driver, j, -1.0, phi);
        p.phase.times[j] = mesh.time(j);
        p.phase.fields[j] = phi;
    }
    return p;
}

void coeffs_at(const ComplexField& phi, std::vector<ComplexField>& b_out, ComplexField& c_out) {
    std::vector<ComplexField> grad = spectral_gradient(phi);
    c_out = spectral_laplacian(phi);
    for (const ComplexField& ga : grad) {
        for (std::size_t i = 0; i < c_out.size(); ++i) {
            c_out.values[i] += ga.values[i] * ga.values[i];
        }
    }
    b_out = std::move(grad);
    for (ComplexField& ba : b_out) {
        for (cplx& v : ba.values) v *= 2.0;
    }
}

LowerOrderCoeffs coeffs_from_phase(const PhasePath& phase) {
    phase.phase.validate();
    if (phase.phase.empty()) throw std::domain_error("coeffs_from_phase: empty phase path");
    LowerOrderCoeffs out;
    out.times = phase.phase.times;
    out.b.resize(phase.phase.size());
    out.c.reserve(phase.phase.size());
    for (std::size_t j = 0; j < phase.phase.size(); ++j) {
        if (!all_finite(phase.phase.fields[j]))
            throw std::invalid_argument("coeffs_from_phase: phase field is not finite");
        ComplexField c(phase.phase.fields[j].grid);
        coeffs_at(phase.phase.fields[j], out.b[j], c);
        out.c.push_back(std::move(c));
    }
    return out;
}

ComplexField gauge(const ComplexField& f, const ComplexField& phase, int direction) {
    require_same_grid(f.grid, phase.grid, "gauge");
    if (direction != 1 && direction != -1)
        throw std::invalid_argument("gauge: direction must be +1 or -1");
    double max_re = 0.0;
    for (const cplx& v : phase.values) max_re = std::max(max_re, std::abs(v.real()));
    if (max_re > 700.0)
        throw std::overflow_error("gauge: exponential overflow, max |Re phase| = " +
                                  std::to_string(max_re));
    ComplexField out(f.grid);
    const double dir = direction;
    for (std::size_t i = 0; i < f.size(); ++i) {
        out.values[i] = std::exp(dir * phase.values[i]) * f.values[i];
    }
    return out;
}

}  // namespace snls
