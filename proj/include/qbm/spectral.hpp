#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "qbm/constants.hpp"

namespace qbm {

enum class BathKind { OhmicDrude, Blackbody };
enum class CouplingType { Position, Momentum };
enum class NodeRule { Linear, Logarithmic };

/// Parametrized bath influence J(omega).
///
/// OhmicDrude:  J(w) = m * gamma * w * Omega^2 / (Omega^2 + w^2)
/// Blackbody:   J(w) = M * tau  * w^3 * Omega^2 / (Omega^2 + w^2)
///
/// For the blackbody kind `system_mass_ref` is the renormalized mass M and
/// the cutoff must satisfy the causality bound Omega <= 1/tau.
struct SpectralDensitySpec {
    BathKind kind = BathKind::OhmicDrude;
    double coupling_strength = 0.0;  // gamma (rate) or tau_bb (time)
    double cutoff = 0.0;             // Omega
    double system_mass_ref = 1.0;    // m (OhmicDrude) or M (Blackbody)

    static SpectralDensitySpec ohmic_drude(double gamma, double cutoff,
                                           double mass = 1.0) {
        if (!(gamma >= 0.0) || !std::isfinite(gamma))
            throw std::invalid_argument("ohmic_drude: gamma must be >= 0");
        if (!(cutoff > 0.0) || !std::isfinite(cutoff))
            throw std::invalid_argument("ohmic_drude: cutoff must be > 0");
        if (!(mass > 0.0))
            throw std::invalid_argument("ohmic_drude: mass must be > 0");
        return {BathKind::OhmicDrude, gamma, cutoff, mass};
    }

    static SpectralDensitySpec blackbody(double tau_bb, double cutoff,
                                         double renormalized_mass = 1.0) {
        if (!(tau_bb >= 0.0) || !std::isfinite(tau_bb))
            throw std::invalid_argument("blackbody: tau_bb must be >= 0");
        if (!(cutoff > 0.0) || !std::isfinite(cutoff))
            throw std::invalid_argument("blackbody: cutoff must be > 0");
        if (!(renormalized_mass > 0.0))
            throw std::invalid_argument("blackbody: mass must be > 0");
        if (tau_bb > 0.0 && cutoff > 1.0 / tau_bb)
            throw std::invalid_argument(
                "blackbody: cutoff exceeds the causality bound 1/tau_bb");
        return {BathKind::Blackbody, tau_bb, cutoff, renormalized_mass};
    }
};

inline double evaluate_spectral_density(const SpectralDensitySpec& spec,
                                        double omega) {
    if (!(omega >= 0.0))
        throw std::domain_error("evaluate_spectral_density: omega must be >= 0");
    const double lorentz =
        spec.cutoff * spec.cutoff / (spec.cutoff * spec.cutoff + omega * omega);
    switch (spec.kind) {
        case BathKind::OhmicDrude:
            return spec.system_mass_ref * spec.coupling_strength * omega * lorentz;
        case BathKind::Blackbody:
            return spec.system_mass_ref * spec.coupling_strength * omega * omega *
                   omega * lorentz;
    }
    return 0.0;
}

/// Memory friction kernel gamma(t) per unit system mass.  The blackbody
/// kernel has a Dirac component; its weight is carried symbolically and is
/// never sampled onto a time grid.
struct DampingKernel {
    double smooth = 0.0;        // value of the regular part at the queried t
    double delta_weight = 0.0;  // coefficient of delta(t), zero for OhmicDrude
};

inline DampingKernel damping_kernel(const SpectralDensitySpec& spec, double t) {
    if (!std::isfinite(t)) throw std::domain_error("damping_kernel: t not finite");
    const double g = spec.coupling_strength;
    const double w = spec.cutoff;
    const double decay = std::exp(-w * std::abs(t));
    switch (spec.kind) {
        case BathKind::OhmicDrude:
            return {g * w * decay, 0.0};
        case BathKind::Blackbody:
            return {-g * w * w * w * decay, 2.0 * g * w * w};
    }
    return {};
}

/// Total kernel weight  integral of gamma(t) dt over the whole line:
/// 2*gamma for OhmicDrude, exactly zero for Blackbody.
inline double kernel_static_weight(const SpectralDensitySpec& spec) {
    switch (spec.kind) {
        case BathKind::OhmicDrude:
            return 2.0 * spec.coupling_strength;
        case BathKind::Blackbody:
            // The delta weight 2*tau*Omega^2 cancels the integral of the
            // smooth part exactly: no static friction.
            return 0.0;
    }
    return 0.0;
}

/// Resonant (constant-kernel) damping estimate for a blackbody bath,
/// gamma_bb = omega0^2 * tau_bb, valid when the cutoff sits far above the
/// oscillator frequency.
inline double blackbody_damping_estimate(double omega0, double tau_bb) {
    return omega0 * omega0 * tau_bb;
}

/// hbar / (kB T), in seconds for T in kelvin.
inline double thermal_correlation_time(double temperature_kelvin) {
    if (!(temperature_kelvin > 0.0))
        throw std::domain_error("thermal_correlation_time: T must be > 0");
    return constants::hbar_si / (constants::k_boltzmann_si * temperature_kelvin);
}

/// One discretized bath degree of freedom.  Position-coupled modes carry the
/// Caldeira-Leggett coefficient c_j; momentum-coupled modes (blackbody) carry
/// the effective coefficient m_k * omega_k.
struct BathMode {
    double mass = 1.0;
    double frequency = 0.0;
    double coupling = 0.0;
    CouplingType coupling_type = CouplingType::Position;
};

struct DiscretizationScheme {
    NodeRule node_rule = NodeRule::Linear;
    std::size_t mode_count = 0;
    double frequency_ceiling = 0.0;  // omega_max

    static DiscretizationScheme linear(std::size_t n, double omega_max) {
        return make(NodeRule::Linear, n, omega_max);
    }
    static DiscretizationScheme logarithmic(std::size_t n, double omega_max) {
        return make(NodeRule::Logarithmic, n, omega_max);
    }
    static DiscretizationScheme make(NodeRule rule, std::size_t n,
                                     double omega_max) {
        if (n < 1)
            throw std::invalid_argument("DiscretizationScheme: mode_count >= 1");
        if (!(omega_max > 0.0) || !std::isfinite(omega_max))
            throw std::invalid_argument(
                "DiscretizationScheme: frequency_ceiling must be > 0");
        return {rule, n, omega_max};
    }
    /// Default ceiling used by the run configuration when omega_max is omitted.
    static double default_ceiling(const SpectralDensitySpec& spec) {
        return 10.0 * spec.cutoff;
    }
};

/// Midpoint-rule inversion of J(omega) into a finite mode set.
///
/// Position coupling:  c_j^2 = (2/pi) m_j w_j J(w_j) dw_j   with m_j = m.
/// Momentum coupling:  m_k   = (2/pi) J(w_k) dw_k / w_k^3.
///
/// The logarithmic rule needs a frequency floor; it is derived from the spec
/// so that the resolved band always brackets both the cutoff and the system
/// scale (Drude: omega_max*1e-4, blackbody: cutoff*1e-10).
inline std::vector<BathMode> discretize_bath(const SpectralDensitySpec& spec,
                                             const DiscretizationScheme& scheme) {
    if (scheme.mode_count < 1)
        throw std::invalid_argument("discretize_bath: empty scheme");
    if (!(scheme.frequency_ceiling > spec.cutoff))
        throw std::invalid_argument(
            "discretize_bath: frequency_ceiling must exceed the cutoff");

    const std::size_t n = scheme.mode_count;
    std::vector<double> nodes(n), widths(n);
    if (scheme.node_rule == NodeRule::Linear) {
        const double dw = scheme.frequency_ceiling / static_cast<double>(n);
        for (std::size_t j = 0; j < n; ++j) {
            nodes[j] = (static_cast<double>(j) + 0.5) * dw;
            widths[j] = dw;
        }
    } else {
        const double hi = scheme.frequency_ceiling;
        const double lo = spec.kind == BathKind::OhmicDrude ? hi * 1e-4
                                                            : hi * 1e-10;
        const double ratio = std::pow(hi / lo, 1.0 / static_cast<double>(n));
        double left = lo;
        for (std::size_t j = 0; j < n; ++j) {
            const double right = (j + 1 == n) ? hi : left * ratio;
            nodes[j] = std::sqrt(left * right);
            widths[j] = right - left;
            left = right;
        }
    }

    std::vector<BathMode> modes(n);
    constexpr double two_over_pi = 2.0 / 3.14159265358979323846;
    for (std::size_t j = 0; j < n; ++j) {
        const double w = nodes[j];
        const double jw = evaluate_spectral_density(spec, w);
        if (!std::isfinite(jw))
            throw std::invalid_argument("discretize_bath: non-finite J(omega)");
        BathMode& mode = modes[j];
        mode.frequency = w;
        if (spec.kind == BathKind::OhmicDrude) {
            mode.mass = spec.system_mass_ref;
            mode.coupling = std::sqrt(two_over_pi * mode.mass * w * jw * widths[j]);
            mode.coupling_type = CouplingType::Position;
        } else {
            mode.mass = two_over_pi * jw * widths[j] / (w * w * w);
            mode.coupling = mode.mass * w;
            mode.coupling_type = CouplingType::Momentum;
        }
    }
    return modes;
}

}  // namespace qbm
