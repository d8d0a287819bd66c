#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "qbm/normal_modes.hpp"
#include "qbm/spectral.hpp"

namespace qbm {

struct SystemOscillator {
    double mass = 1.0;
    double frequency = 1.0;
    std::optional<double> charge_renormalized_mass;  // M, blackbody only

    double stiffness() const { return mass * frequency * frequency; }

    static SystemOscillator make(double mass, double frequency) {
        if (!(mass > 0.0) || !(frequency > 0.0))
            throw std::invalid_argument(
                "SystemOscillator: mass and frequency must be positive");
        return {mass, frequency, std::nullopt};
    }
};

/// Solves M = m + M tau Omega for the renormalized mass, M = m/(1 - tau*Omega).
/// Valid strictly below the causality bound.
inline double blackbody_renormalized_mass(double bare_mass,
                                          const SpectralDensitySpec& bb) {
    if (bb.kind != BathKind::Blackbody)
        throw std::invalid_argument("renormalized mass: bath is not blackbody");
    const double x = bb.coupling_strength * bb.cutoff;
    if (!(x < 1.0))
        throw std::domain_error(
            "renormalized mass diverges at the causality bound");
    return bare_mass / (1.0 - x);
}

/// Inverse temperature in natural units (hbar*omega0/kB T); beta = +inf means
/// the T -> 0 limit, accepted as a flag with coth -> 1.
struct Temperature {
    double beta = 1.0;
    static Temperature from_beta(double beta) {
        if (!(beta > 0.0))
            throw std::invalid_argument("Temperature: beta must be > 0");
        return {beta};
    }
    static Temperature zero() {
        return {std::numeric_limits<double>::infinity()};
    }
    bool is_zero_t() const { return std::isinf(beta); }
};

/// 2 sigma / hbar = coth(beta w / 2) occupation factor (hbar = 1).
inline double thermal_coth(double omega, const Temperature& temp) {
    if (temp.is_zero_t()) return 1.0;
    const double x = 0.5 * temp.beta * omega;
    if (x > 20.0) return 1.0;
    return 1.0 / std::tanh(x);
}

struct ModelLayout {
    struct Block {
        std::string label;
        std::size_t offset = 0;  // first mode index
        std::size_t count = 0;   // number of modes
    };
    std::vector<Block> blocks;  // blocks[0] is always the system (count 1)

    std::size_t total_modes() const {
        std::size_t n = 0;
        for (const auto& b : blocks) n += b.count;
        return n;
    }
    const Block* find(const std::string& label) const {
        for (const auto& b : blocks)
            if (b.label == label) return &b;
        return nullptr;
    }
    bool has_system() const {
        return !blocks.empty() && blocks[0].label == "system";
    }
};

struct BathAttachment {
    std::string label;
    SpectralDensitySpec spec;
    std::vector<BathMode> modes;
};

/// Full quadratic Hamiltonian H = 1/2 z^T A z over z = (q_S, q_1.., p_S, p_1..).
/// The structured form (system + labeled mode lists) is the primary
/// representation; the dense coefficient matrix is materialized on demand.
class QuadraticModel {
  public:
    SystemOscillator system;
    std::vector<BathAttachment> baths;
    ModelLayout layout;

    std::size_t mode_count() const { return layout.total_modes(); }
    std::size_t phase_dim() const { return 2 * mode_count(); }

    bool has_momentum_bath() const {
        for (const auto& b : baths)
            if (!b.modes.empty() &&
                b.modes.front().coupling_type == CouplingType::Momentum)
                return true;
        return false;
    }

    /// Counter-term arrowhead data in the frame where every bath couples
    /// through positions.  Momentum-coupled (blackbody) modes enter through
    /// the exact per-mode canonical rotation (q,p) -> (p/(m w), -m w q),
    /// under which d_k = 1; single-mode thermal states are invariant under it.
    ArrowheadData arrowhead() const {
        ArrowheadData data;
        data.system_mass = system.mass;
        data.system_stiffness = system.stiffness();
        const std::size_t n = mode_count() - 1;
        data.mode_mass.reserve(n);
        data.mode_freq.reserve(n);
        data.mode_disp.reserve(n);
        for (const auto& bath : baths) {
            for (const auto& m : bath.modes) {
                data.mode_mass.push_back(m.mass);
                data.mode_freq.push_back(m.frequency);
                if (m.coupling_type == CouplingType::Position)
                    data.mode_disp.push_back(
                        m.coupling / (m.mass * m.frequency * m.frequency));
                else
                    // (p_k + m w q)^2/(2m) rotates to (m w^2/2)(Q + q)^2,
                    // i.e. a position-coupled mode displaced by -q.
                    data.mode_disp.push_back(-1.0);
            }
        }
        return data;
    }

    /// True for mode index i (0 = system) when that coordinate pair is stored
    /// rotated relative to the physical (momentum-coupled) frame.
    std::vector<bool> rotated_modes() const {
        std::vector<bool> rot(mode_count(), false);
        std::size_t idx = 1;
        for (const auto& bath : baths)
            for (const auto& m : bath.modes)
                rot[idx++] = m.coupling_type == CouplingType::Momentum;
        return rot;
    }

    /// m*w factors for the rotation above (unused entries are zero).
    Eigen::VectorXd rotation_scales() const {
        Eigen::VectorXd s = Eigen::VectorXd::Zero(
            static_cast<Eigen::Index>(mode_count()));
        std::size_t idx = 1;
        for (const auto& bath : baths)
            for (const auto& m : bath.modes) {
                if (m.coupling_type == CouplingType::Momentum)
                    s[static_cast<Eigen::Index>(idx)] = m.mass * m.frequency;
                ++idx;
            }
        return s;
    }

    /// Dense symmetric coefficient matrix in the physical frame,
    /// q-block first, then p-block.  O(n^2) memory; intended for tests and
    /// small models.
    Eigen::MatrixXd coefficient_matrix() const {
        const auto n = static_cast<Eigen::Index>(mode_count());
        Eigen::MatrixXd a = Eigen::MatrixXd::Zero(2 * n, 2 * n);
        a(0, 0) = system.stiffness();
        a(n, n) = 1.0 / system.mass;
        Eigen::Index idx = 1;
        for (const auto& bath : baths) {
            for (const auto& m : bath.modes) {
                const double mw2 = m.mass * m.frequency * m.frequency;
                if (m.coupling_type == CouplingType::Position) {
                    // (m w^2/2)(q_j - c q / (m w^2))^2 + p_j^2/(2 m)
                    a(idx, idx) = mw2;
                    a(0, idx) = a(idx, 0) = -m.coupling;
                    a(0, 0) += m.coupling * m.coupling / mw2;
                    a(n + idx, n + idx) = 1.0 / m.mass;
                } else {
                    // (p_k + m w q)^2/(2 m) + (m w^2/2) q_k^2
                    a(idx, idx) = mw2;
                    a(n + idx, n + idx) = 1.0 / m.mass;
                    a(0, n + idx) = a(n + idx, 0) = m.frequency;
                    a(0, 0) += m.mass * m.frequency * m.frequency;
                }
                ++idx;
            }
        }
        return a;
    }
};

inline QuadraticModel assemble(
    const SystemOscillator& system,
    std::vector<BathAttachment> baths = {}) {
    if (!(system.mass > 0.0) || !(system.frequency > 0.0))
        throw std::invalid_argument("assemble: invalid system oscillator");

    std::set<std::string> labels{"system"};
    std::size_t momentum_baths = 0;
    for (const auto& bath : baths) {
        if (bath.modes.empty())
            throw std::invalid_argument("assemble: bath '" + bath.label +
                                        "' has no modes");
        if (!labels.insert(bath.label).second)
            throw std::invalid_argument("assemble: duplicate bath label '" +
                                        bath.label + "'");
        const CouplingType type = bath.modes.front().coupling_type;
        for (const auto& m : bath.modes) {
            if (m.coupling_type != type)
                throw std::invalid_argument(
                    "assemble: mixed coupling types within bath '" +
                    bath.label + "'");
            if (!(m.mass > 0.0) || !(m.frequency > 0.0) ||
                !std::isfinite(m.coupling))
                throw std::invalid_argument("assemble: invalid bath mode in '" +
                                            bath.label + "'");
        }
        if (type == CouplingType::Momentum) ++momentum_baths;
    }
    if (momentum_baths > 1)
        throw std::invalid_argument(
            "assemble: at most one momentum-coupled bath is supported");

    QuadraticModel model;
    model.system = system;
    model.baths = std::move(baths);
    model.layout.blocks.push_back({"system", 0, 1});
    std::size_t offset = 1;
    for (const auto& bath : model.baths) {
        model.layout.blocks.push_back({bath.label, offset, bath.modes.size()});
        offset += bath.modes.size();
    }
    return model;
}

/// Gaussian state over a mode set: mean vector and symmetrized covariance,
/// ordered (all q, all p).
struct GaussianState {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
    ModelLayout layout;

    std::size_t mode_count() const { return layout.total_modes(); }

    /// Smallest eigenvalue of cov + (i hbar/2) Omega_sympl; physical states
    /// are >= 0 up to roundoff.
    double uncertainty_margin() const {
        const auto n = static_cast<Eigen::Index>(mode_count());
        Eigen::MatrixXcd h = cov.cast<std::complex<double>>();
        const std::complex<double> ih2(0.0, 0.5);
        for (Eigen::Index i = 0; i < n; ++i) {
            h(i, n + i) += ih2;
            h(n + i, i) -= ih2;
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h,
                                                           Eigen::EigenvaluesOnly);
        return es.eigenvalues().minCoeff();
    }

    /// det-based purity (hbar/2)^n / sqrt(det cov).
    double purity() const {
        Eigen::MatrixXd scaled = 2.0 * cov;
        return 1.0 / std::sqrt(scaled.determinant());
    }
};

/// Exact thermal (or ground, beta = inf) state of a coupled quadratic model.
/// Built in the normal-mode frame, each mode at variance coth(beta w/2)/(2 w)
/// in mass-weighted coordinates, transformed back; momentum-coupled blocks are
/// rotated back to the physical frame.
inline GaussianState thermal_state(const QuadraticModel& model,
                                   const Temperature& temp,
                                   const NormalModes* precomputed = nullptr) {
    NormalModes local;
    const NormalModes* nm = precomputed;
    if (nm == nullptr) {
        local = solve_normal_modes(model.arrowhead());
        nm = &local;
    }
    const auto n = static_cast<Eigen::Index>(model.mode_count());

    Eigen::VectorXd vq(n), vp(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double w = nm->omega[i];
        const double c = thermal_coth(w, temp);
        vq[i] = 0.5 * c / w;
        vp[i] = 0.5 * c * w;
    }

    // Sigma_qq = (D E) diag(vq) (D E)^T, Sigma_pp = (D^-1 E) diag(vp) (..)^T.
    Eigen::MatrixXd de = nm->inv_sqrt_mass.asDiagonal() * nm->vectors;
    Eigen::MatrixXd dinv_e =
        nm->inv_sqrt_mass.cwiseInverse().asDiagonal() * nm->vectors;

    GaussianState state;
    state.layout = model.layout;
    state.mean = Eigen::VectorXd::Zero(2 * n);
    state.cov = Eigen::MatrixXd::Zero(2 * n, 2 * n);
    state.cov.topLeftCorner(n, n) =
        de * vq.asDiagonal() * de.transpose();
    state.cov.bottomRightCorner(n, n) =
        dinv_e * vp.asDiagonal() * dinv_e.transpose();

    // Undo the internal rotation of momentum-coupled modes:
    // q = -P/(m w), p = m w Q.
    const auto rotated = model.rotated_modes();
    const Eigen::VectorXd scales = model.rotation_scales();
    bool any = false;
    for (bool r : rotated) any = any || r;
    if (any) {
        Eigen::MatrixXd u = Eigen::MatrixXd::Zero(2 * n, 2 * n);
        for (Eigen::Index i = 0; i < n; ++i) {
            if (rotated[static_cast<std::size_t>(i)]) {
                const double mw = scales[i];
                u(i, n + i) = -1.0 / mw;
                u(n + i, i) = mw;
            } else {
                u(i, i) = 1.0;
                u(n + i, n + i) = 1.0;
            }
        }
        state.cov = (u * state.cov * u.transpose()).eval();
        state.mean = (u * state.mean).eval();
    }
    return state;
}

/// Tensor product of two Gaussian states on disjoint mode sets.
inline GaussianState compose_product(const GaussianState& a,
                                     const GaussianState& b) {
    for (const auto& block : b.layout.blocks) {
        if (a.layout.find(block.label) != nullptr)
            throw std::invalid_argument(
                "compose_product: overlapping layout tag '" + block.label +
                "'");
    }
    const auto na = static_cast<Eigen::Index>(a.mode_count());
    const auto nb = static_cast<Eigen::Index>(b.mode_count());
    const auto n = na + nb;

    GaussianState out;
    out.layout = a.layout;
    for (const auto& block : b.layout.blocks) {
        ModelLayout::Block shifted = block;
        shifted.offset += static_cast<std::size_t>(na);
        out.layout.blocks.push_back(shifted);
    }
    out.mean = Eigen::VectorXd::Zero(2 * n);
    out.mean.segment(0, na) = a.mean.segment(0, na);
    out.mean.segment(na, nb) = b.mean.segment(0, nb);
    out.mean.segment(n, na) = a.mean.segment(na, na);
    out.mean.segment(n + na, nb) = b.mean.segment(nb, nb);

    out.cov = Eigen::MatrixXd::Zero(2 * n, 2 * n);
    // q-q, q-p, p-p blocks of each factor, placed with the global
    // (all q, all p) ordering.
    out.cov.block(0, 0, na, na) = a.cov.block(0, 0, na, na);
    out.cov.block(0, n, na, na) = a.cov.block(0, na, na, na);
    out.cov.block(n, 0, na, na) = a.cov.block(na, 0, na, na);
    out.cov.block(n, n, na, na) = a.cov.block(na, na, na, na);
    out.cov.block(na, na, nb, nb) = b.cov.block(0, 0, nb, nb);
    out.cov.block(na, n + na, nb, nb) = b.cov.block(0, nb, nb, nb);
    out.cov.block(n + na, na, nb, nb) = b.cov.block(nb, 0, nb, nb);
    out.cov.block(n + na, n + na, nb, nb) = b.cov.block(nb, nb, nb, nb);
    return out;
}

}  // namespace qbm
