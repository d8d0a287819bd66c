#pragma once

#include <cmath>
#include <stdexcept>

#include "qbm/fock.hpp"
#include "qbm/model.hpp"
#include "qbm/normal_modes.hpp"

namespace qbm {

struct EquilibriumVariances {
    double q2 = 0.0;
    double p2 = 0.0;
    double inverse_temperature = 0.0;
};

/// System-block variances of the coupled thermal state, summed over normal
/// modes (no covariance matrix is materialized).
inline EquilibriumVariances equilibrium_variances(
    const QuadraticModel& model, const Temperature& temp,
    const NormalModes* precomputed = nullptr) {
    NormalModes local;
    const NormalModes* nm = precomputed;
    if (nm == nullptr) {
        local = solve_normal_modes(model.arrowhead());
        nm = &local;
    }
    const double ism0 = nm->inv_sqrt_mass[0];
    double q2 = 0.0, p2 = 0.0;
    for (Eigen::Index i = 0; i < nm->omega.size(); ++i) {
        const double w = nm->omega[i];
        const double c = thermal_coth(w, temp);
        const double e2 = nm->vectors(0, i) * nm->vectors(0, i);
        q2 += e2 * ism0 * ism0 * 0.5 * c / w;
        p2 += e2 / (ism0 * ism0) * 0.5 * c * w;
    }
    return {q2, p2, temp.beta};
}

/// Continuum Matsubara representation of the Drude-damped equilibrium
/// variances; the independent oracle against which the discrete-mode route is
/// checked.  Sums over nu_n = 2 pi n / beta with gamma_hat(nu) =
/// gamma*Omega/(nu + Omega); tails fall as nu^-2 and are removed by two
/// Richardson levels.
inline EquilibriumVariances matsubara_variances(double mass, double omega0,
                                                const SpectralDensitySpec& tb,
                                                double beta) {
    if (tb.kind != BathKind::OhmicDrude)
        throw std::invalid_argument("matsubara_variances: Drude bath expected");
    if (!(beta > 0.0) || std::isinf(beta))
        throw std::invalid_argument("matsubara_variances: finite beta required");
    const double gamma = tb.coupling_strength;
    const double cut = tb.cutoff;
    const double w02 = omega0 * omega0;

    auto partial = [&](long n_terms, double& sq, double& sp) {
        sq = 0.0;
        sp = 0.0;
        for (long n = n_terms; n >= 1; --n) {  // ascending magnitude summation
            const double nu = 2.0 * M_PI * n / beta;
            const double nug = nu * gamma * cut / (nu + cut);
            const double den = w02 + nu * nu + nug;
            sq += 1.0 / den;
            sp += (w02 + nug) / den;
        }
    };

    const long base = 65536;
    double sq1, sp1, sq2, sp2, sq4, sp4;
    partial(base, sq1, sp1);
    partial(2 * base, sq2, sp2);
    partial(4 * base, sq4, sp4);
    // tails ~ c/N + d/N^2: two Richardson levels
    const double rq1 = 2.0 * sq2 - sq1, rq2 = 2.0 * sq4 - sq2;
    const double rp1 = 2.0 * sp2 - sp1, rp2 = 2.0 * sp4 - sp2;
    const double sq = (4.0 * rq2 - rq1) / 3.0;
    const double sp = (4.0 * rp2 - rp1) / 3.0;

    EquilibriumVariances out;
    out.inverse_temperature = beta;
    out.q2 = (1.0 / (mass * beta)) * (1.0 / w02 + 2.0 * sq);
    out.p2 = (mass / beta) * (1.0 + 2.0 * sp);
    return out;
}

/// Fictitious oscillator whose canonical state reproduces the exact reduced
/// equilibrium state:  w_eff = (2/hbar beta) arccoth((2/hbar) sqrt(<p^2><q^2>)),
/// m_eff = sqrt(<p^2>/<q^2>)/w_eff.
struct EffectiveOscillator {
    double m_eff = 1.0;
    double omega_eff = 1.0;
    double partition_norm = 1.0;  // Z_beta
    double inverse_temperature = 1.0;
};

inline EffectiveOscillator effective_parameters(const EquilibriumVariances& v) {
    if (!(v.q2 > 0.0) || !(v.p2 > 0.0))
        throw std::domain_error("effective_parameters: variances must be > 0");
    if (std::isinf(v.inverse_temperature))
        throw std::domain_error("effective_parameters: finite beta required");
    const double x = 2.0 * std::sqrt(v.q2 * v.p2);
    if (!(x > 1.0))
        throw std::domain_error(
            "effective_parameters: arccoth domain violation (pure state)");
    const double arccoth = 0.5 * std::log((x + 1.0) / (x - 1.0));
    EffectiveOscillator eff;
    eff.inverse_temperature = v.inverse_temperature;
    eff.omega_eff = 2.0 / v.inverse_temperature * arccoth;
    eff.m_eff = std::sqrt(v.p2 / v.q2) / eff.omega_eff;
    eff.partition_norm =
        1.0 / (2.0 * std::sinh(0.5 * v.inverse_temperature * eff.omega_eff));
    return eff;
}

/// rho_beta = Z^-1 sum_k exp(-beta E_k) |k_eff><k_eff| expressed in the bare
/// Fock basis through the exact harmonic basis change (a one-mode squeeze
/// with zeta = 1/2 log(m_eff w_eff / m w0)).
inline FockDensityMatrix stationary_density_matrix(const EffectiveOscillator& eff,
                                                   const FockBasis& basis,
                                                   double leakage_tol = 1e-3) {
    const double bare = basis.oscillator.mass * basis.oscillator.frequency;
    const double dressed = eff.m_eff * eff.omega_eff;
    const double zeta = 0.5 * std::log(dressed / bare);
    const double x = std::exp(-eff.inverse_temperature * eff.omega_eff);

    int kmax = 0;
    if (x > 0.0)
        kmax = std::min(4000, static_cast<int>(std::ceil(-42.0 / std::log(x))));
    const Eigen::MatrixXd m = squeeze_matrix(zeta, basis.n_max + kmax, kmax);

    FockDensityMatrix out;
    const int dim = basis.dim();
    out.elements = Eigen::MatrixXcd::Zero(dim, dim);
    double pk = 1.0 - x;
    for (int k = 0; k <= kmax; ++k) {
        for (int n = 0; n < dim; ++n)
            for (int mm = 0; mm < dim; ++mm)
                out.elements(n, mm) += pk * m(n, k) * m(mm, k);
        pk *= x;
    }
    if (out.leakage() > leakage_tol)
        throw std::runtime_error(
            "stationary_density_matrix: truncation leakage " +
            std::to_string(out.leakage()) + " exceeds tolerance");
    return out;
}

}  // namespace qbm
