#include "snls/observables.hpp"

#include <cmath>
#include <stdexcept>

#include "snls/kernels.hpp"
#include "snls/norms.hpp"
#include "snls/spectral.hpp"

namespace snls {

namespace {

double cell_volume(const TorusGrid& g) {
    double v = 1.0;
    for (int a = 0; a < g.dim; ++a) v *= g.h();
    return v;
}

// sum_i (|f_i|^2)^{(alpha+1)/2} with the same exponent specializations as the
// nonlinear substep
double potential_sum(const std::vector<cplx>& v, double alpha) {
    const double he = 0.5 * (alpha + 1.0);
    double acc = 0.0;
    if (alpha == 5.0) {
        for (const cplx& z : v) {
            const double a2 = std::norm(z);
            acc += a2 * a2 * a2;
        }
    } else if (alpha == 3.0) {
        for (const cplx& z : v) {
            const double a2 = std::norm(z);
            acc += a2 * a2;
        }
    } else {
        for (const cplx& z : v) acc += std::pow(std::norm(z), he);
    }
    return acc;
}

void check_residual_inputs(const Trajectory& traj, const NoiseModel& noise,
                           const BrownianDriver& driver, const char* where) {
    if (traj.config.store_stride != 1)
        throw std::domain_error(std::string(where) + ": needs a stride-1 trajectory");
    if (traj.truncated)
        throw std::domain_error(std::string(where) + ": trajectory was truncated (" +
                                traj.stop_reason + ")");
    noise.validate();
    driver.validate();
    if (!(noise.mesh == driver.mesh))
        throw std::invalid_argument(std::string(where) +
                                    ": noise tables and driver use different meshes");
    if (driver.channels != noise.channels())
        throw std::invalid_argument(std::string(where) + ": channel count mismatch");
    if (std::abs(traj.config.dt - driver.mesh.dt) > 1e-12 * driver.mesh.dt)
        throw std::invalid_argument(std::string(where) +
                                    ": trajectory and driver use different step sizes");
    if (traj.series.size() != static_cast<std::size_t>(driver.mesh.steps) + 1)
        throw std::invalid_argument(std::string(where) +
                                    ": trajectory does not cover the driver mesh");
    if (traj.mass_record.size() != traj.series.size())
        throw std::invalid_argument(std::string(where) + ": mass record is incomplete");
    require_same_grid(traj.series.grid(), noise.grid(), where);
}

}  // namespace

double mass(const ComplexField& f) {
    return cell_volume(f.grid) * kern::abs2_sum(f.values.data(), f.values.size());
}

double hamiltonian(const ComplexField& f, int lambda, double alpha) {
    const TorusGrid& g = f.grid;
    const double hd = cell_volume(g);
    // |grad f|_2^2 by Parseval: h^d / n^d * sum |xi|^2 |f_hat|^2
    const ComplexField spec = to_spectrum(f);
    double grad2 = 0.0;
    for_each_mode(g, [&](std::size_t i, const double*, double k2) {
        grad2 += k2 * std::norm(spec.values[i]);
    });
    grad2 *= hd / static_cast<double>(g.size());
    const double pot = hd * potential_sum(f.values, alpha);
    return 0.5 * grad2 - (static_cast<double>(lambda) / (alpha + 1.0)) * pot;
}

ItoResidualReport ito_mass_residual(const Trajectory& traj, const NoiseModel& noise,
                                    const BrownianDriver& driver) {
    check_residual_inputs(traj, noise, driver, "ito_mass_residual");
    const int steps = driver.mesh.steps;
    const int nch = noise.channels();
    const double hd = cell_volume(noise.grid());
    const std::size_t n = noise.grid().size();

    // Re phi_k as plain weight arrays for the weighted quadrature
    std::vector<std::vector<double>> re_phi(nch);
    for (int k = 0; k < nch; ++k) {
        re_phi[k].resize(n);
        for (std::size_t i = 0; i < n; ++i)
            re_phi[k][i] = noise.profiles[k].phi.values[i].real();
    }

    ItoResidualReport report;
    report.dt = traj.config.dt;
    report.times = traj.series.times;
    report.residual.resize(traj.series.size());
    double stochastic = 0.0;  // 2 sum_k sum_{j<J} (int Re G_k |X|^2)(t_j) dbeta_k(j)
    report.residual[0] = 0.0;
    for (int j = 0; j < steps; ++j) {
        if (!noise.conservative) {
            const ComplexField& x = traj.series.fields[j];
            for (int k = 0; k < nch; ++k) {
                const double gk = noise.g_at(k, j);
                if (gk == 0.0) continue;
                const double integral =
                    gk * hd * kern::weighted_abs2_sum(re_phi[k].data(), x.values.data(), n);
                stochastic += 2.0 * integral * driver.increment(j, k);
            }
        }
        report.residual[j + 1] =
            traj.mass_record[j + 1] - traj.mass_record[0] - stochastic;
    }
    return report;
}

ItoResidualReport ito_energy_residual(const Trajectory& traj, const NoiseModel& noise,
                                      const BrownianDriver& driver, int lambda, double alpha) {
    check_residual_inputs(traj, noise, driver, "ito_energy_residual");
    const TorusGrid& grid = noise.grid();
    const int steps = driver.mesh.steps;
    const int nch = noise.channels();
    const int d = grid.dim;
    const double hd = cell_volume(grid);
    const double dt = driver.mesh.dt;
    const std::size_t n = grid.size();

    // per-channel spatial data reused at every time: Re phi_k and, per axis,
    // Re(conj(phi_k) d_a phi_k) -- the product-rule ingredient of grad mu
    std::vector<std::vector<double>> re_phi(nch);
    std::vector<std::vector<std::vector<double>>> re_phi_dphi(nch);
    for (int k = 0; k < nch; ++k) {
        const NoiseProfile& p = noise.profiles[k];
        re_phi[k].resize(n);
        for (std::size_t i = 0; i < n; ++i) re_phi[k][i] = p.phi.values[i].real();
        re_phi_dphi[k].resize(d);
        for (int a = 0; a < d; ++a) {
            re_phi_dphi[k][a].resize(n);
            for (std::size_t i = 0; i < n; ++i)
                re_phi_dphi[k][a][i] =
                    (std::conj(p.phi.values[i]) * p.grad[a].values[i]).real();
        }
    }

    // f1 = Re int grad conj(X) . grad(mu X),  f2_k = int |grad(G_k X)|^2,
    // f3_k = int (Re G_k)^2 |X|^{alpha+1},    f4_k = Re int grad conj(X) . grad(G_k X),
    // f5_k = int Re G_k |X|^{alpha+1};  products expanded with the profile
    // gradients, X differentiated spectrally
    struct SnapshotData {
        double f1 = 0.0;
        std::vector<double> f2, f3, f4, f5;
    };
    auto evaluate = [&](int j) {
        const ComplexField& x = traj.series.fields[j];
        const std::vector<ComplexField> gx = spectral_gradient(x);
        const std::vector<double> mu = noise.mu_at(j);

        std::vector<double> pot(n);
        if (alpha == 5.0) {
            for (std::size_t i = 0; i < n; ++i) {
                const double a2 = std::norm(x.values[i]);
                pot[i] = a2 * a2 * a2;
            }
        } else {
            const double he = 0.5 * (alpha + 1.0);
            for (std::size_t i = 0; i < n; ++i) pot[i] = std::pow(std::norm(x.values[i]), he);
        }

        SnapshotData s;
        s.f2.assign(nch, 0.0);
        s.f3.assign(nch, 0.0);
        s.f4.assign(nch, 0.0);
        s.f5.assign(nch, 0.0);

        for (int a = 0; a < d; ++a) {
            // mu-part: int mu |d_a X|^2 + int (d_a mu) Re(conj(d_a X) X)
            s.f1 += kern::weighted_abs2_sum(mu.data(), gx[a].values.data(), n);
            double cross = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                double damu = 0.0;
                for (int k = 0; k < nch; ++k) {
                    const double gk = noise.g_at(k, j);
                    damu += gk * gk * re_phi_dphi[k][a][i];
                }
                cross += damu * (std::conj(gx[a].values[i]) * x.values[i]).real();
            }
            s.f1 += cross;
        }
        s.f1 *= hd;

        for (int k = 0; k < nch; ++k) {
            const double gk = noise.g_at(k, j);
            if (gk == 0.0) continue;
            const NoiseProfile& p = noise.profiles[k];
            double sum2 = 0.0, sum4 = 0.0;
            for (int a = 0; a < d; ++a) {
                const std::vector<cplx>& dphi = p.grad[a].values;
                const std::vector<cplx>& dx = gx[a].values;
                for (std::size_t i = 0; i < n; ++i) {
                    const cplx dgx = dphi[i] * x.values[i] + p.phi.values[i] * dx[i];
                    sum2 += std::norm(dgx);
                    sum4 += (std::conj(dx[i]) * dgx).real();
                }
            }
            s.f2[k] = gk * gk * hd * sum2;
            s.f4[k] = gk * hd * sum4;
            if (!p.conservative) {
                double sum3 = 0.0, sum5 = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    sum3 += re_phi[k][i] * re_phi[k][i] * pot[i];
                    sum5 += re_phi[k][i] * pot[i];
                }
                s.f3[k] = gk * gk * hd * sum3;
                s.f5[k] = gk * hd * sum5;
            }
        }
        return s;
    };

    ItoResidualReport report;
    report.dt = traj.config.dt;
    report.extended_regime = !(d >= 3 && d <= 6);
    report.times = traj.series.times;
    report.residual.resize(traj.series.size());
    report.terms.resize(traj.series.size());

    const double h0 = hamiltonian(traj.series.fields[0], lambda, alpha);
    double t1 = 0.0, t2 = 0.0, t3 = 0.0, t4 = 0.0, t5 = 0.0;
    SnapshotData cur = evaluate(0);
    report.terms[0] = {h0, 0.0, 0.0, 0.0, 0.0, 0.0};
    report.residual[0] = h0 - h0;  // exactly zero by construction

    for (int j = 0; j < steps; ++j) {
        // martingale terms: left-point Ito sums
        for (int k = 0; k < nch; ++k) {
            const double db = driver.increment(j, k);
            t4 += cur.f4[k] * db;
            t5 += -static_cast<double>(lambda) * cur.f5[k] * db;
        }
        SnapshotData next = evaluate(j + 1);
        // drift terms: trapezoid in s
        t1 += -0.5 * dt * (cur.f1 + next.f1);
        for (int k = 0; k < nch; ++k) {
            t2 += 0.25 * dt * (cur.f2[k] + next.f2[k]);
            t3 += -static_cast<double>(lambda) * (alpha - 1.0) * 0.25 * dt *
                  (cur.f3[k] + next.f3[k]);
        }
        cur = std::move(next);
        const double hj = hamiltonian(traj.series.fields[j + 1], lambda, alpha);
        report.terms[j + 1] = {h0, t1, t2, t3, t4, t5};
        report.residual[j + 1] = hj - (h0 + t1 + t2 + t3 + t4 + t5);
    }
    return report;
}

std::vector<NormProfileEntry> norm_profile(const Trajectory& traj) {
    const SpaceTimeSeries& s = traj.series;
    if (s.empty()) throw std::domain_error("norm_profile: empty trajectory");
    s.validate();
    const int d = s.grid().dim;
    const double q2 = 2.0 + 4.0 / d;

    std::vector<NormProfileEntry> table;
    table.push_back({"v", v_norm(s)});
    table.push_back({"strichartz_inf_2", mixed_spacetime_norm(s, kInf, 2.0)});
    table.push_back({"strichartz_diag", mixed_spacetime_norm(s, q2, q2)});
    table.push_back({"smoothing_half", local_smoothing_norm(s, 0.5, -1.0)});
    table.push_back({"smoothing_three_half", local_smoothing_norm(s, 1.5, -1.0)});
    if (d >= 3) {
        // the energy-scattering and exotic families have d >= 3 exponent tables
        table.push_back({"w", w_norm(s)});
        table.push_back({"w1", w1_norm(s)});
        table.push_back({"x0", exotic_norm(s, ExoticKind::X0)});
        table.push_back({"xx", exotic_norm(s, ExoticKind::XX)});
        table.push_back({"yy", exotic_norm(s, ExoticKind::YY)});
    }
    return table;
}

double fit_log2_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("fit_log2_slope: need matching sizes >= 2");
    const std::size_t n = x.size();
    double sx = 0.0, sy = 0.0;
    std::vector<double> lx(n), ly(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0))
            throw std::domain_error("fit_log2_slope: data must be strictly positive");
        lx[i] = std::log2(x[i]);
        ly[i] = std::log2(y[i]);
        sx += lx[i];
        sy += ly[i];
    }
    const double mx = sx / n, my = sy / n;
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        num += (lx[i] - mx) * (ly[i] - my);
        den += (lx[i] - mx) * (lx[i] - mx);
    }
    if (den == 0.0) throw std::domain_error("fit_log2_slope: degenerate abscissa");
    return num / den;
}

}  // namespace snls
