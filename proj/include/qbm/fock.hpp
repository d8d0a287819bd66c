#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "qbm/dynamics.hpp"
#include "qbm/model.hpp"

namespace qbm {

using Complex = std::complex<double>;

/// Energy eigenbasis {|n>} of the system oscillator, truncated at n_max.
struct FockBasis {
    int n_max = 2;
    SystemOscillator oscillator;

    static FockBasis make(int n_max, const SystemOscillator& osc) {
        if (n_max < 2)
            throw std::invalid_argument("FockBasis: n_max must be >= 2");
        return {n_max, osc};
    }
    int dim() const { return n_max + 1; }
    /// E_n = hbar w0 (n + 1/2)
    double energy(int n) const {
        return oscillator.frequency * (n + 0.5);
    }
    /// Scaling q -> sqrt(m w) q, p -> p/sqrt(m w) to dimensionless quadratures.
    double scale() const {
        return std::sqrt(oscillator.mass * oscillator.frequency);
    }
};

namespace fockdetail {

/// Gauss-Hermite rule for weight exp(-x^2): nodes from the Golub-Welsch
/// Jacobi matrix, weights recomputed in the scaled form w * e^{x^2} through
/// the envelope-carrying orthonormal Hermite recursion.  Eigenvector-derived
/// weights only have absolute accuracy, which is fatal once node values meet
/// large integrand envelopes; the scaled weights are O(1) with full relative
/// accuracy.
inline void gauss_hermite_scaled(int order, Eigen::VectorXd& nodes,
                                 Eigen::VectorXd& scaled_weights) {
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(order, order);
    for (int k = 1; k < order; ++k) {
        const double b = std::sqrt(0.5 * k);
        jac(k, k - 1) = b;
        jac(k - 1, k) = b;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jac,
                                                      Eigen::EigenvaluesOnly);
    nodes = es.eigenvalues();
    scaled_weights.resize(order);
    constexpr double pi_quarter = 0.75112554446494248286;  // pi^{-1/4}
    for (int i = 0; i < order; ++i) {
        // htilde_k(x) = H_k(x) e^{-x^2/2} / sqrt(2^k k! sqrt(pi)); then
        // w e^{x^2} = 1 / (order * htilde_{order-1}^2).
        const double x = nodes[i];
        double hm = 0.0;
        double h = pi_quarter * std::exp(-0.5 * x * x);
        for (int k = 0; k < order - 1; ++k) {
            const double hp = x * std::sqrt(2.0 / (k + 1.0)) * h -
                              std::sqrt(k / (k + 1.0)) * hm;
            hm = h;
            h = hp;
        }
        scaled_weights[i] = 1.0 / (order * h * h);
    }
}

/// Quadrature for integrals of the form  F(xi) = P(xi) exp(-1/2 xi^T W xi)
/// over R^2, evaluated as sum_g coeff_g * F(xi_g) with the FULL integrand
/// (its own Gaussian included).  Exact for P up to per-axis degree
/// 2*order - 1 after rotation to the principal axes of W, and numerically
/// benign: every factor at a node is bounded.
struct GaussianQuad2D {
    std::vector<Eigen::Vector2d> nodes;
    std::vector<double> coeff;

    GaussianQuad2D(const Eigen::Matrix2d& w, int order) {
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(w);
        if (es.eigenvalues().minCoeff() <= 0.0)
            throw std::invalid_argument("GaussianQuad2D: W not positive definite");
        Eigen::VectorXd x, sw;
        gauss_hermite_scaled(order, x, sw);
        const Eigen::Matrix2d rot = es.eigenvectors();
        const Eigen::Vector2d inv_sqrt =
            es.eigenvalues().cwiseSqrt().cwiseInverse();
        const double det_factor =
            2.0 / std::sqrt(es.eigenvalues()(0) * es.eigenvalues()(1));
        nodes.reserve(static_cast<std::size_t>(order) * order);
        coeff.reserve(nodes.capacity());
        const double sqrt2 = std::sqrt(2.0);
        for (int i = 0; i < order; ++i) {
            for (int j = 0; j < order; ++j) {
                Eigen::Vector2d y(sqrt2 * x[i] * inv_sqrt[0],
                                  sqrt2 * x[j] * inv_sqrt[1]);
                nodes.push_back(rot * y);
                coeff.push_back(det_factor * sw[i] * sw[j]);
            }
        }
    }
};

/// Displacement matrix <a|D(beta)|b> with its Gaussian envelope included:
/// every entry is bounded by 1.  Stable two-term recursion
/// <a|D|b> = (beta <a-1|D|b> + sqrt(b) <a-1|D|b-1>)/sqrt(a).
inline void displacement_matrix(Complex beta, int dim, Eigen::MatrixXcd& out) {
    out.resize(dim, dim);
    const Complex mcb = -std::conj(beta);
    out(0, 0) = std::exp(-0.5 * std::norm(beta));
    for (int b = 1; b < dim; ++b)
        out(0, b) = out(0, b - 1) * mcb / std::sqrt(static_cast<double>(b));
    for (int a = 1; a < dim; ++a) {
        out(a, 0) = beta * out(a - 1, 0) / std::sqrt(static_cast<double>(a));
        for (int b = 1; b < dim; ++b) {
            out(a, b) = (beta * out(a - 1, b) +
                         std::sqrt(static_cast<double>(b)) * out(a - 1, b - 1)) /
                        std::sqrt(static_cast<double>(a));
        }
    }
}

inline Complex alpha_of(const Eigen::Vector2d& xi) {
    constexpr double inv_sqrt2 = 0.70710678118654752440;
    return Complex(-xi[1] * inv_sqrt2, xi[0] * inv_sqrt2);
}

}  // namespace fockdetail

/// Fock-basis density matrix <n|rho|m>.
struct FockDensityMatrix {
    Eigen::MatrixXcd elements;

    int n_max() const { return static_cast<int>(elements.rows()) - 1; }
    double trace() const { return elements.trace().real(); }
    double leakage() const { return 1.0 - trace(); }
    double hermiticity_defect() const {
        return (elements - elements.adjoint()).cwiseAbs().maxCoeff();
    }
    double min_eigenvalue() const {
        Eigen::MatrixXcd h = 0.5 * (elements + elements.adjoint());
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h,
                                                           Eigen::EigenvaluesOnly);
        return es.eigenvalues().minCoeff();
    }
    Eigen::VectorXd populations() const { return elements.diagonal().real(); }

    /// Floors round-off negative eigenvalues at zero.  Returns the magnitude
    /// clipped; eigenvalues below -floor_tol are a hard error.
    double clip_small_negatives(double floor_tol = 1e-8) {
        Eigen::MatrixXcd h = 0.5 * (elements + elements.adjoint());
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h);
        Eigen::VectorXd ev = es.eigenvalues();
        const double worst = ev.minCoeff();
        if (worst < -floor_tol)
            throw std::runtime_error(
                "FockDensityMatrix: eigenvalue below the roundoff floor: " +
                std::to_string(worst));
        if (worst >= 0.0) return 0.0;
        double clipped = 0.0;
        for (Eigen::Index i = 0; i < ev.size(); ++i) {
            if (ev[i] < 0.0) {
                clipped -= ev[i];
                ev[i] = 0.0;
            }
        }
        elements = es.eigenvectors() * ev.asDiagonal() *
                   es.eigenvectors().adjoint();
        return clipped;
    }
};

/// Exact Fock matrix elements of a one-mode Gaussian state by quadrature of
/// its characteristic function against the Fock projection kernel.
inline FockDensityMatrix gaussian_to_fock(const GaussianState& system_state,
                                          const FockBasis& basis,
                                          int order = 0) {
    if (system_state.cov.rows() != 2)
        throw std::invalid_argument("gaussian_to_fock: system block expected");
    const double s = basis.scale();
    Eigen::Matrix2d t = Eigen::Matrix2d::Zero();
    t(0, 0) = s;
    t(1, 1) = 1.0 / s;
    const Eigen::Matrix2d cov = t * system_state.cov * t;
    const Eigen::Vector2d mean = t * system_state.mean;
    if (cov.determinant() < 0.25 * (1.0 - 1e-10) ||
        cov(0, 0) <= 0.0 || cov(1, 1) <= 0.0)
        throw std::invalid_argument("gaussian_to_fock: unphysical covariance");

    const int dim = basis.dim();
    if (order <= 0) order = 2 * basis.n_max + 10 + static_cast<int>(mean.norm() * 4);
    const Eigen::Matrix2d w = cov + 0.5 * Eigen::Matrix2d::Identity();
    fockdetail::GaussianQuad2D quad(w, order);

    Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(dim, dim);
    Eigen::MatrixXcd dp;
    const bool displaced = mean.norm() > 0.0;
    constexpr double inv_two_pi = 0.15915494309189533577;
    for (std::size_t g = 0; g < quad.nodes.size(); ++g) {
        const Eigen::Vector2d& xi = quad.nodes[g];
        fockdetail::displacement_matrix(fockdetail::alpha_of(xi), dim, dp);
        const double gauss = std::exp(-0.5 * xi.dot(cov * xi));
        Complex c(quad.coeff[g] * inv_two_pi * gauss, 0.0);
        if (displaced) {
            const double phase = mean.dot(xi);
            c *= Complex(std::cos(phase), std::sin(phase));
        }
        acc += c * dp.conjugate();
    }
    return FockDensityMatrix{std::move(acc)};
}

/// Independent route: Williamson decomposition into a rotated, squeezed
/// thermal state, then squeeze-operator matrix elements by recursion.
/// Zero-mean states only.
inline Eigen::MatrixXd squeeze_matrix(double zeta, int rows, int cols);

inline FockDensityMatrix gaussian_to_fock_recursion(
    const GaussianState& system_state, const FockBasis& basis) {
    if (system_state.cov.rows() != 2)
        throw std::invalid_argument("recursion route: system block expected");
    if (system_state.mean.norm() > 0.0)
        throw std::invalid_argument("recursion route: zero-mean states only");
    const double s = basis.scale();
    Eigen::Matrix2d t = Eigen::Matrix2d::Zero();
    t(0, 0) = s;
    t(1, 1) = 1.0 / s;
    const Eigen::Matrix2d cov = t * system_state.cov * t;

    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(cov);
    const double lam_min = es.eigenvalues()(0);
    const double lam_max = es.eigenvalues()(1);
    if (lam_min <= 0.0)
        throw std::invalid_argument("recursion route: covariance not PD");
    const double nu = std::sqrt(lam_min * lam_max);
    const double r = 0.25 * std::log(lam_max / lam_min);
    const Eigen::Vector2d major = es.eigenvectors().col(1);
    const double theta = std::atan2(major[1], major[0]);

    const double nbar = std::max(0.0, nu - 0.5);
    const double x = nbar / (nbar + 1.0);
    int kmax = 0;
    if (x > 0.0)
        kmax = std::min(4000, static_cast<int>(std::ceil(-42.0 / std::log(x))));

    const int dim = basis.dim();
    const Eigen::MatrixXd m = squeeze_matrix(-r, basis.n_max + kmax, kmax);

    FockDensityMatrix out;
    out.elements = Eigen::MatrixXcd::Zero(dim, dim);
    double pk = 1.0 - x;
    if (x == 0.0) pk = 1.0;
    for (int k = 0; k <= kmax; ++k) {
        for (int n = 0; n < dim; ++n)
            for (int mm = 0; mm < dim; ++mm)
                out.elements(n, mm) += pk * m(n, k) * m(mm, k);
        pk *= x;
    }
    // Fock convention carries e^{-i theta (n-m)} for the rotation R(-theta).
    for (int n = 0; n < dim; ++n)
        for (int mm = 0; mm < dim; ++mm) {
            const double ph = -theta * (n - mm);
            out.elements(n, mm) *= Complex(std::cos(ph), std::sin(ph));
        }
    return out;
}

/// <a|S(zeta)|b> for S = exp[(zeta/2)(a^2 - a^+2)], real, zero for odd a-b.
/// Column recursion sqrt(b+1) M[n][b+1] = cosh sqrt(n) M[n-1][b]
///                                       + sinh sqrt(n+1) M[n+1][b].
inline Eigen::MatrixXd squeeze_matrix(double zeta, int rows, int cols) {
    const int rdim = rows + cols + 2;
    const double ch = std::cosh(zeta);
    const double sh = std::sinh(zeta);
    const double th = std::tanh(zeta);
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(rdim, cols + 1);
    m(0, 0) = 1.0 / std::sqrt(ch);
    for (int n = 2; n < rdim; n += 2)
        m(n, 0) = -th * std::sqrt((n - 1.0) / n) * m(n - 2, 0);
    for (int b = 0; b < cols; ++b) {
        const double inv = 1.0 / std::sqrt(b + 1.0);
        const int top = rdim - b - 2;
        for (int n = 0; n <= top; ++n) {
            double v = sh * std::sqrt(n + 1.0) * m(n + 1, b);
            if (n > 0) v += ch * std::sqrt(static_cast<double>(n)) * m(n - 1, b);
            m(n, b + 1) = v * inv;
        }
    }
    return m.topRows(rows + 1);
}

/// Complex 4-index influence tensor J_{nm;nu mu} at a fixed time.
struct PropagatorTensor {
    int n_max = 0;
    double time_stamp = 0.0;
    std::vector<Complex> entries;  // ((n*K + m)*K + nu)*K + mu

    int dim() const { return n_max + 1; }
    std::size_t index(int n, int m, int nu, int mu) const {
        const std::size_t k = static_cast<std::size_t>(dim());
        return ((static_cast<std::size_t>(n) * k + m) * k + nu) * k + mu;
    }
    Complex at(int n, int m, int nu, int mu) const {
        return entries[index(n, m, nu, mu)];
    }
    double hermiticity_defect() const {
        double worst = 0.0;
        const int k = dim();
        for (int n = 0; n < k; ++n)
            for (int m = 0; m < k; ++m)
                for (int nu = 0; nu < k; ++nu)
                    for (int mu = 0; mu < k; ++mu)
                        worst = std::max(
                            worst, std::abs(at(n, m, nu, mu) -
                                            std::conj(at(m, n, mu, nu))));
        return worst;
    }
    /// T(nu, mu) = sum_n J_{nn;nu mu}; equals delta for a trace-preserving
    /// channel within truncation leakage.
    Eigen::MatrixXcd trace_matrix() const {
        const int k = dim();
        Eigen::MatrixXcd t = Eigen::MatrixXcd::Zero(k, k);
        for (int nu = 0; nu < k; ++nu)
            for (int mu = 0; mu < k; ++mu) {
                Complex s(0.0, 0.0);
                for (int n = 0; n < k; ++n) s += at(n, n, nu, mu);
                t(nu, mu) = s;
            }
        return t;
    }
};

namespace fockdetail {

/// Shared per-node data for tensor quadrature under a given channel.
struct TensorNodes {
    std::vector<Eigen::Vector2d> xi;
    std::vector<Complex> alpha_in;   // -alpha(Lambda^T xi), input-side kernel
    std::vector<Complex> alpha_out;  // alpha(xi), output-side kernel
    std::vector<double> coeff;       // includes 1/(2 pi)

    TensorNodes(const GaussianChannel& ch, const FockBasis& basis, int order) {
        const double s = basis.scale();
        Eigen::Matrix2d t = Eigen::Matrix2d::Zero();
        t(0, 0) = s;
        t(1, 1) = 1.0 / s;
        Eigen::Matrix2d tinv = Eigen::Matrix2d::Zero();
        tinv(0, 0) = 1.0 / s;
        tinv(1, 1) = s;
        const Eigen::Matrix2d lam = t * ch.drift * tinv;
        const Eigen::Matrix2d noise = t * ch.noise * t;
        const Eigen::Matrix2d w =
            noise + 0.5 * (Eigen::Matrix2d::Identity() + lam * lam.transpose());
        GaussianQuad2D quad(w, order);
        const std::size_t g = quad.nodes.size();
        xi.resize(g);
        alpha_in.resize(g);
        alpha_out.resize(g);
        coeff.resize(g);
        constexpr double inv_two_pi = 0.15915494309189533577;
        for (std::size_t i = 0; i < g; ++i) {
            xi[i] = quad.nodes[i];
            const Eigen::Vector2d xi_in = lam.transpose() * quad.nodes[i];
            alpha_in[i] = -alpha_of(xi_in);
            alpha_out[i] = alpha_of(quad.nodes[i]);
            const double gauss =
                std::exp(-0.5 * quad.nodes[i].dot(noise * quad.nodes[i]));
            coeff[i] = quad.coeff[i] * inv_two_pi * gauss;
        }
    }
};

}  // namespace fockdetail

/// One output row J_{nm; nu mu} over all (nu, mu) for fixed (n, m).
/// Row set computed in a single node sweep.
inline std::vector<Eigen::MatrixXcd> tensor_rows(
    const GaussianChannel& channel, const FockBasis& basis,
    const std::vector<std::pair<int, int>>& rows, int order) {
    const int dim = basis.dim();
    fockdetail::TensorNodes nodes(channel, basis, order);
    std::vector<Eigen::MatrixXcd> out(
        rows.size(), Eigen::MatrixXcd::Zero(dim, dim));
    Eigen::MatrixXcd a, b;
    for (std::size_t g = 0; g < nodes.coeff.size(); ++g) {
        fockdetail::displacement_matrix(nodes.alpha_in[g], dim, a);
        fockdetail::displacement_matrix(nodes.alpha_out[g], dim, b);
        for (std::size_t r = 0; r < rows.size(); ++r) {
            const Complex factor =
                nodes.coeff[g] * b(rows[r].second, rows[r].first);
            out[r] += factor * a;
        }
    }
    return out;
}

/// Full 4-index tensor.
inline PropagatorTensor propagator_tensor_fixed_order(
    const GaussianChannel& channel, const FockBasis& basis, int order) {
    const int dim = basis.dim();
    const int k2 = dim * dim;
    fockdetail::TensorNodes nodes(channel, basis, order);

    Eigen::MatrixXcd jflat = Eigen::MatrixXcd::Zero(k2, k2);
    const std::size_t total = nodes.coeff.size();
    const std::size_t chunk = 256;
    Eigen::MatrixXcd amat(chunk, k2), bmat(chunk, k2);
    Eigen::MatrixXcd a, b;
    for (std::size_t begin = 0; begin < total; begin += chunk) {
        const std::size_t end = std::min(total, begin + chunk);
        const auto rows = static_cast<Eigen::Index>(end - begin);
        for (std::size_t g = begin; g < end; ++g) {
            fockdetail::displacement_matrix(nodes.alpha_in[g], dim, a);
            fockdetail::displacement_matrix(nodes.alpha_out[g], dim, b);
            const auto r = static_cast<Eigen::Index>(g - begin);
            for (int nu = 0; nu < dim; ++nu)
                for (int mu = 0; mu < dim; ++mu)
                    amat(r, nu * dim + mu) = nodes.coeff[g] * a(nu, mu);
            for (int n = 0; n < dim; ++n)
                for (int m = 0; m < dim; ++m)
                    bmat(r, n * dim + m) = b(m, n);
        }
        jflat.noalias() +=
            bmat.topRows(rows).transpose() * amat.topRows(rows);
    }

    PropagatorTensor tensor;
    tensor.n_max = basis.n_max;
    tensor.time_stamp = channel.time;
    tensor.entries.assign(static_cast<std::size_t>(k2) * k2, Complex(0, 0));
    for (int n = 0; n < dim; ++n)
        for (int m = 0; m < dim; ++m)
            for (int nu = 0; nu < dim; ++nu)
                for (int mu = 0; mu < dim; ++mu)
                    tensor.entries[tensor.index(n, m, nu, mu)] =
                        jflat(n * dim + m, nu * dim + mu);
    return tensor;
}

struct QuadratureReport {
    int order = 0;
    double doubling_delta = 0.0;
};

/// Quadrature order for a channel/basis pair, chosen by doubling until the
/// probe rows change by less than `tol`.  Throws on non-convergence with the
/// achieved estimate.  Pass the rows that will actually be evaluated: corner
/// entries with all four indices large cancel more strongly and would force
/// orders the low-index physics never needs.
inline int calibrate_tensor_order(
    const GaussianChannel& channel, const FockBasis& basis, double tol = 1e-9,
    QuadratureReport* report = nullptr,
    std::vector<std::pair<int, int>> probe = {}) {
    if (probe.empty())
        probe = {{0, 0}, {basis.n_max, basis.n_max}, {0, basis.n_max}};
    int order = 2 * basis.n_max + 8;
    auto prev = tensor_rows(channel, basis, probe, order);
    for (; order <= 384; order *= 2) {
        auto next = tensor_rows(channel, basis, probe, 2 * order);
        double delta = 0.0;
        for (std::size_t r = 0; r < probe.size(); ++r)
            delta = std::max(delta,
                             (next[r] - prev[r]).cwiseAbs().maxCoeff());
        if (delta < tol) {
            if (report != nullptr) {
                report->order = order;
                report->doubling_delta = delta;
            }
            return order;  // the doubled rule confirmed this order
        }
        prev = std::move(next);
    }
    throw std::runtime_error(
        "propagator_tensor: quadrature did not converge to the requested "
        "tolerance");
}

inline PropagatorTensor propagator_tensor(const GaussianChannel& channel,
                                          const FockBasis& basis,
                                          int order = 0,
                                          QuadratureReport* report = nullptr) {
    if (order <= 0) order = calibrate_tensor_order(channel, basis, 1e-9, report);
    return propagator_tensor_fixed_order(channel, basis, order);
}

/// Contraction <n|rho(t)|m> = sum_{nu mu} J_{nm;nu mu} <nu|rho0|mu>.
inline FockDensityMatrix evolve_density_matrix(const FockDensityMatrix& rho0,
                                               const PropagatorTensor& tensor) {
    const int dim = tensor.dim();
    if (rho0.elements.rows() != dim)
        throw std::invalid_argument("evolve_density_matrix: dimension mismatch");
    FockDensityMatrix out;
    out.elements = Eigen::MatrixXcd::Zero(dim, dim);
    for (int n = 0; n < dim; ++n)
        for (int m = 0; m < dim; ++m) {
            Complex s(0.0, 0.0);
            for (int nu = 0; nu < dim; ++nu)
                for (int mu = 0; mu < dim; ++mu)
                    s += tensor.at(n, m, nu, mu) * rho0.elements(nu, mu);
            out.elements(n, m) = s;
        }
    return out;
}

/// Same contraction with every nu != mu term dropped (secular approximation).
inline FockDensityMatrix secular_evolve(const FockDensityMatrix& rho0,
                                        const PropagatorTensor& tensor) {
    const int dim = tensor.dim();
    if (rho0.elements.rows() != dim)
        throw std::invalid_argument("secular_evolve: dimension mismatch");
    FockDensityMatrix out;
    out.elements = Eigen::MatrixXcd::Zero(dim, dim);
    for (int n = 0; n < dim; ++n)
        for (int m = 0; m < dim; ++m) {
            Complex s(0.0, 0.0);
            for (int nu = 0; nu < dim; ++nu)
                s += tensor.at(n, m, nu, nu) * rho0.elements(nu, nu);
            out.elements(n, m) = s;
        }
    return out;
}

}  // namespace qbm
