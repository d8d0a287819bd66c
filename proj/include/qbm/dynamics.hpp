#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <cstddef>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "qbm/model.hpp"
#include "qbm/normal_modes.hpp"

namespace qbm {

/// Reduced system map for factorized initial conditions: means transform by
/// the drift matrix, covariances by drift*C*drift^T + noise.
struct GaussianChannel {
    Eigen::Matrix2d drift = Eigen::Matrix2d::Identity();
    Eigen::Matrix2d noise = Eigen::Matrix2d::Zero();
    double time = 0.0;

    /// Smallest eigenvalue of noise + (i hbar/2)(Omega - drift Omega drift^T);
    /// complete positivity requires >= 0 up to roundoff.
    double cp_margin() const {
        Eigen::Matrix2d omega;
        omega << 0.0, 1.0, -1.0, 0.0;
        Eigen::Matrix2d defect = omega - drift * omega * drift.transpose();
        Eigen::Matrix2cd h = noise.cast<std::complex<double>>();
        h += std::complex<double>(0.0, 0.5) * defect.cast<std::complex<double>>();
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix2cd> es(h,
                                                           Eigen::EigenvaluesOnly);
        return es.eigenvalues().minCoeff();
    }
};

/// Initial second moments for the reduced propagation engine, specified in
/// the physical frame: an optional dense 2x2 system seed, per-mode thermal
/// diagonals, and optional factored blocks  Sigma_qq = Fq Fq^T (used for
/// correlated system+bath equilibrium starts).
class InitialCovariance {
  public:
    void set_system_block(const Eigen::Matrix2d& c0) {
        system_block_ = c0;
        has_system_ = true;
    }
    void add_mode_diagonal(std::size_t first_mode, Eigen::VectorXd sq,
                           Eigen::VectorXd sp) {
        if (sq.size() != sp.size())
            throw std::invalid_argument("InitialCovariance: size mismatch");
        diag_.push_back({first_mode, std::move(sq), std::move(sp)});
    }
    /// Block covers coordinates [first_mode, first_mode + fq.rows()).
    void add_factored_block(std::size_t first_mode, Eigen::MatrixXd fq,
                            Eigen::MatrixXd fp) {
        if (fq.rows() != fp.rows())
            throw std::invalid_argument("InitialCovariance: factor mismatch");
        factors_.push_back({first_mode, std::move(fq), std::move(fp)});
    }

    struct Diag {
        std::size_t first = 0;
        Eigen::VectorXd sq, sp;
    };
    struct Factor {
        std::size_t first = 0;
        Eigen::MatrixXd fq, fp;
    };
    bool has_system() const { return has_system_; }
    const Eigen::Matrix2d& system_block() const { return system_block_; }
    const std::vector<Diag>& diagonals() const { return diag_; }
    const std::vector<Factor>& factors() const { return factors_; }

  private:
    bool has_system_ = false;
    Eigen::Matrix2d system_block_ = Eigen::Matrix2d::Zero();
    std::vector<Diag> diag_;
    std::vector<Factor> factors_;
};

struct SystemTrajectoryPoint {
    double time = 0.0;
    Eigen::Vector2d mean = Eigen::Vector2d::Zero();
    Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
};

/// Exact propagator exp(t * Omega_sympl * A).  Counter-term models use the
/// secular normal-mode decomposition (one O(n^2) factorization, O(n^2) work
/// per requested time); arbitrary coefficient matrices fall back to a dense
/// eigendecomposition of the generator.
class SymplecticPropagator {
  public:
    explicit SymplecticPropagator(const QuadraticModel& model)
        : layout_(model.layout) {
        modes_ = solve_normal_modes(model.arrowhead());
        rotated_ = model.rotated_modes();
        rotation_scales_ = model.rotation_scales();
        any_rotation_ = false;
        for (bool r : rotated_) any_rotation_ = any_rotation_ || r;
        arrowhead_path_ = true;
        build_system_rows();
    }

    static SymplecticPropagator from_dense(const Eigen::MatrixXd& a) {
        SymplecticPropagator p;
        const Eigen::Index dim = a.rows();
        if (a.cols() != dim || dim % 2 != 0)
            throw std::invalid_argument("from_dense: square even-dim matrix");
        if (!a.isApprox(a.transpose(), 1e-12))
            throw std::invalid_argument("from_dense: matrix must be symmetric");
        const Eigen::Index n = dim / 2;
        Eigen::MatrixXd gen(dim, dim);
        gen.topRows(n) = a.bottomRows(n);
        gen.bottomRows(n) = -a.topRows(n);
        Eigen::EigenSolver<Eigen::MatrixXd> es(gen);
        if (es.info() != Eigen::Success)
            throw std::runtime_error("from_dense: eigendecomposition failed");
        p.dense_vals_ = es.eigenvalues();
        p.dense_vecs_ = es.eigenvectors();
        p.dense_vecs_inv_ = p.dense_vecs_.inverse();
        p.dense_n_ = n;
        p.arrowhead_path_ = false;
        return p;
    }

    std::size_t mode_count() const {
        return arrowhead_path_ ? modes_.size()
                               : static_cast<std::size_t>(dense_n_);
    }
    const NormalModes& normal_modes() const { return modes_; }
    const ModelLayout& layout() const { return layout_; }

    /// Full S(t); O(n^2) memory and O(n^3) flops, intended for moderate sizes.
    Eigen::MatrixXd matrix_at(double t) const {
        if (!std::isfinite(t))
            throw std::invalid_argument("matrix_at: non-finite time");
        if (!arrowhead_path_) {
            Eigen::VectorXcd ph =
                (dense_vals_.array() * std::complex<double>(t, 0.0)).exp();
            Eigen::MatrixXcd s = dense_vecs_ * ph.asDiagonal() * dense_vecs_inv_;
            return s.real();
        }
        const auto n = static_cast<Eigen::Index>(modes_.size());
        Eigen::ArrayXd wt = modes_.omega.array() * t;
        Eigen::VectorXd cosv = wt.cos();
        Eigen::VectorXd sinv = wt.sin();
        Eigen::VectorXd sin_over_w = (sinv.array() / modes_.omega.array());
        Eigen::VectorXd w_sin = (sinv.array() * modes_.omega.array());

        Eigen::MatrixXd de = modes_.inv_sqrt_mass.asDiagonal() * modes_.vectors;
        Eigen::MatrixXd ie =
            modes_.inv_sqrt_mass.cwiseInverse().asDiagonal() * modes_.vectors;

        Eigen::MatrixXd s(2 * n, 2 * n);
        s.topLeftCorner(n, n) = de * cosv.asDiagonal() * ie.transpose();
        s.topRightCorner(n, n) = de * sin_over_w.asDiagonal() * de.transpose();
        s.bottomLeftCorner(n, n) = -ie * w_sin.asDiagonal() * ie.transpose();
        s.bottomRightCorner(n, n) = ie * cosv.asDiagonal() * de.transpose();
        if (!any_rotation_) return s;
        // S acts in the rotated frame; conjugate back: S_phys = U^-1 S U.
        return rotation_matrix(true) * s * rotation_matrix(false);
    }

    GaussianState evolve(const GaussianState& state, double t) const {
        if (state.mean.size() != static_cast<Eigen::Index>(2 * mode_count()))
            throw std::invalid_argument("evolve: dimension mismatch");
        Eigen::MatrixXd s = matrix_at(t);
        GaussianState out;
        out.layout = state.layout;
        out.mean = s * state.mean;
        out.cov = s * state.cov * s.transpose();
        return out;
    }

    /// System 2x2 block of S(t); O(n) per call.
    Eigen::Matrix2d system_drift(double t) const {
        require_fast_path("system_drift");
        const Eigen::ArrayXd wt = modes_.omega.array() * t;
        const Eigen::ArrayXd c = wt.cos();
        const Eigen::ArrayXd s = wt.sin();
        const Eigen::ArrayXd a2 = sys_row_.array().square();
        const double inv_ms = ism0_ * ism0_;  // 1/m_s
        Eigen::Matrix2d lam;
        lam(0, 0) = (a2 * c).sum();
        lam(0, 1) = (a2 * s / modes_.omega.array()).sum() * inv_ms;
        lam(1, 0) = -(a2 * s * modes_.omega.array()).sum() / inv_ms;
        lam(1, 1) = (a2 * c).sum();
        return lam;
    }

    /// Second-moment trajectories of the reduced system.  `init` is given in
    /// the physical frame; factored blocks and the system seed must not touch
    /// rotated (momentum-coupled) coordinates.
    std::vector<SystemTrajectoryPoint> system_trajectory(
        const InitialCovariance& init, const Eigen::VectorXd& mean0,
        const std::vector<double>& ts, int threads = 1) const {
        require_fast_path("system_trajectory");
        const auto n = static_cast<Eigen::Index>(modes_.size());
        Prepared prep = prepare(init);

        Eigen::VectorXd mean_x = Eigen::VectorXd::Zero(n);
        Eigen::VectorXd mean_y = Eigen::VectorXd::Zero(n);
        const bool with_mean = mean0.size() > 0;
        if (with_mean) {
            if (mean0.size() != 2 * n)
                throw std::invalid_argument("system_trajectory: bad mean size");
            Eigen::VectorXd mq = mean0.head(n);
            Eigen::VectorXd mp = mean0.tail(n);
            rotate_in_place(mq, mp);
            mean_x = modes_.vectors.transpose() *
                     (modes_.inv_sqrt_mass.cwiseInverse().asDiagonal() * mq);
            mean_y = modes_.vectors.transpose() *
                     (modes_.inv_sqrt_mass.asDiagonal() * mp);
        }

        std::vector<SystemTrajectoryPoint> out(ts.size());
        auto work = [&](std::size_t begin, std::size_t end) {
            Eigen::VectorXd u1(n), u2(n), u3(n), u4(n);
            Eigen::VectorXd cq(n), cp(n), dq(n), dp(n), yq(n), yp(n), zq(n),
                zp(n);
            for (std::size_t k = begin; k < end; ++k) {
                const double t = ts[k];
                const Eigen::ArrayXd wt = modes_.omega.array() * t;
                const Eigen::ArrayXd cosv = wt.cos();
                const Eigen::ArrayXd sinv = wt.sin();
                // q_S(t) = u1.(E^T D^-1 q0) + u2.(E^T D p0)
                // p_S(t) = -u3.(E^T D^-1 q0) + u4.(E^T D p0)
                u1 = ism0_ * sys_row_.array() * cosv;
                u2 = ism0_ * sys_row_.array() * sinv / modes_.omega.array();
                u3 = sys_row_.array() * sinv * modes_.omega.array() / ism0_;
                u4 = sys_row_.array() * cosv / ism0_;
                // coefficient vectors of q_S(t), p_S(t) over (q0, p0)
                cq = modes_.inv_sqrt_mass.cwiseInverse().asDiagonal() *
                     (modes_.vectors * u1);
                cp = modes_.inv_sqrt_mass.asDiagonal() * (modes_.vectors * u2);
                dq = -(modes_.inv_sqrt_mass.cwiseInverse().asDiagonal() *
                       (modes_.vectors * u3));
                dp = modes_.inv_sqrt_mass.asDiagonal() * (modes_.vectors * u4);

                apply_prepared(prep, cq, cp, yq, yp);
                apply_prepared(prep, dq, dp, zq, zp);

                SystemTrajectoryPoint& pt = out[k];
                pt.time = t;
                pt.cov(0, 0) = cq.dot(yq) + cp.dot(yp);
                pt.cov(0, 1) = dq.dot(yq) + dp.dot(yp);
                pt.cov(1, 0) = pt.cov(0, 1);
                pt.cov(1, 1) = dq.dot(zq) + dp.dot(zp);
                if (with_mean) {
                    pt.mean[0] = (u1.array() * mean_x.array()).sum() +
                                 (u2.array() * mean_y.array()).sum();
                    pt.mean[1] = -(u3.array() * mean_x.array()).sum() +
                                 (u4.array() * mean_y.array()).sum();
                }
            }
        };
        run_chunks(ts.size(), threads, work);
        return out;
    }

    /// Channels at the given times for factorized starts: the noise matrix is
    /// the reduced covariance grown from bath-only initial moments.
    std::vector<GaussianChannel> channels(const InitialCovariance& bath_init,
                                          const std::vector<double>& ts,
                                          int threads = 1) const {
        if (bath_init.has_system())
            throw std::invalid_argument(
                "channels: bath-only initial covariance expected");
        auto traj =
            system_trajectory(bath_init, Eigen::VectorXd(), ts, threads);
        std::vector<GaussianChannel> out(ts.size());
        for (std::size_t k = 0; k < ts.size(); ++k) {
            out[k].time = ts[k];
            out[k].drift = system_drift(ts[k]);
            out[k].noise = traj[k].cov;
        }
        return out;
    }

  private:
    SymplecticPropagator() = default;

    struct Prepared {
        Eigen::VectorXd sq, sp;  // rotated-frame per-coordinate diagonals
        bool has_system = false;
        Eigen::Matrix2d c0 = Eigen::Matrix2d::Zero();
        std::vector<InitialCovariance::Factor> factors;
    };

    void build_system_rows() {
        sys_row_ = modes_.vectors.row(0).transpose();
        ism0_ = modes_.inv_sqrt_mass[0];  // 1/sqrt(m_s)
    }

    void require_fast_path(const char* what) const {
        if (!arrowhead_path_)
            throw std::logic_error(std::string(what) +
                                   ": available on model-built propagators only");
    }

    Eigen::MatrixXd rotation_matrix(bool inverse) const {
        const auto n = static_cast<Eigen::Index>(modes_.size());
        Eigen::MatrixXd u = Eigen::MatrixXd::Zero(2 * n, 2 * n);
        for (Eigen::Index i = 0; i < n; ++i) {
            if (rotated_[static_cast<std::size_t>(i)]) {
                const double mw = rotation_scales_[i];
                // forward: Q = p/(m w), P = -m w q
                u(i, n + i) = inverse ? -1.0 / mw : 1.0 / mw;
                u(n + i, i) = inverse ? mw : -mw;
            } else {
                u(i, i) = 1.0;
                u(n + i, n + i) = 1.0;
            }
        }
        return u;
    }

    void rotate_in_place(Eigen::VectorXd& q, Eigen::VectorXd& p) const {
        if (!any_rotation_) return;
        for (Eigen::Index i = 0; i < q.size(); ++i) {
            if (!rotated_[static_cast<std::size_t>(i)]) continue;
            const double mw = rotation_scales_[i];
            const double qi = q[i], pi = p[i];
            q[i] = pi / mw;
            p[i] = -mw * qi;
        }
    }

    Prepared prepare(const InitialCovariance& init) const {
        const auto n = static_cast<Eigen::Index>(modes_.size());
        Prepared prep;
        prep.sq = Eigen::VectorXd::Zero(n);
        prep.sp = Eigen::VectorXd::Zero(n);
        for (const auto& d : init.diagonals()) {
            for (Eigen::Index k = 0; k < d.sq.size(); ++k) {
                const auto idx = static_cast<Eigen::Index>(d.first) + k;
                if (idx >= n)
                    throw std::invalid_argument("InitialCovariance out of range");
                double sq = d.sq[k], sp = d.sp[k];
                if (rotated_[static_cast<std::size_t>(idx)]) {
                    const double mw = rotation_scales_[idx];
                    const double rq = sp / (mw * mw);
                    const double rp = sq * (mw * mw);
                    sq = rq;
                    sp = rp;
                }
                prep.sq[idx] += sq;
                prep.sp[idx] += sp;
            }
        }
        if (init.has_system()) {
            prep.has_system = true;
            prep.c0 = init.system_block();
        }
        for (const auto& f : init.factors()) {
            for (Eigen::Index k = 0; k < f.fq.rows(); ++k) {
                const auto idx = static_cast<Eigen::Index>(f.first) + k;
                if (idx >= n || rotated_[static_cast<std::size_t>(idx)])
                    throw std::invalid_argument(
                        "InitialCovariance: factored block on rotated mode");
            }
            prep.factors.push_back(f);
        }
        return prep;
    }

    void apply_prepared(const Prepared& prep, const Eigen::VectorXd& xq,
                        const Eigen::VectorXd& xp, Eigen::VectorXd& yq,
                        Eigen::VectorXd& yp) const {
        yq = prep.sq.cwiseProduct(xq);
        yp = prep.sp.cwiseProduct(xp);
        if (prep.has_system) {
            yq[0] += prep.c0(0, 0) * xq[0] + prep.c0(0, 1) * xp[0];
            yp[0] += prep.c0(1, 0) * xq[0] + prep.c0(1, 1) * xp[0];
        }
        for (const auto& f : prep.factors) {
            const auto first = static_cast<Eigen::Index>(f.first);
            const auto len = f.fq.rows();
            yq.segment(first, len).noalias() +=
                f.fq * (f.fq.transpose() * xq.segment(first, len));
            yp.segment(first, len).noalias() +=
                f.fp * (f.fp.transpose() * xp.segment(first, len));
        }
    }

    template <typename Fn>
    static void run_chunks(std::size_t count, int threads, Fn&& fn) {
        const int nt = std::max(1, threads);
        if (nt == 1 || count < 2) {
            fn(0, count);
            return;
        }
        std::vector<std::thread> pool;
        const std::size_t chunk = (count + nt - 1) / nt;
        for (int i = 0; i < nt; ++i) {
            const std::size_t b = std::min(count, i * chunk);
            const std::size_t e = std::min(count, b + chunk);
            if (b >= e) break;
            pool.emplace_back(fn, b, e);
        }
        for (auto& th : pool) th.join();
    }

    // fast path
    bool arrowhead_path_ = false;
    NormalModes modes_;
    ModelLayout layout_;
    std::vector<bool> rotated_;
    Eigen::VectorXd rotation_scales_;
    bool any_rotation_ = false;
    Eigen::VectorXd sys_row_;
    double ism0_ = 1.0;

    // dense path
    Eigen::Index dense_n_ = 0;
    Eigen::VectorXcd dense_vals_;
    Eigen::MatrixXcd dense_vecs_;
    Eigen::MatrixXcd dense_vecs_inv_;
};

/// Exact partial trace onto the system block.
inline GaussianState reduce_to_system(const GaussianState& state) {
    if (!state.layout.has_system())
        throw std::invalid_argument("reduce_to_system: no system block");
    const auto n = static_cast<Eigen::Index>(state.mode_count());
    GaussianState out;
    out.layout.blocks.push_back({"system", 0, 1});
    out.mean.resize(2);
    out.mean << state.mean[0], state.mean[n];
    out.cov.resize(2, 2);
    out.cov << state.cov(0, 0), state.cov(0, n), state.cov(n, 0),
        state.cov(n, n);
    return out;
}

/// Per-mode uncoupled thermal diagonals for the labeled bath of a model.
inline void add_bath_thermal(InitialCovariance& init, const QuadraticModel& model,
                             const std::string& label, const Temperature& temp) {
    const ModelLayout::Block* block = model.layout.find(label);
    if (block == nullptr)
        throw std::invalid_argument("add_bath_thermal: unknown bath '" + label +
                                    "'");
    const BathAttachment* bath = nullptr;
    for (const auto& b : model.baths)
        if (b.label == label) bath = &b;
    const auto count = static_cast<Eigen::Index>(block->count);
    Eigen::VectorXd sq(count), sp(count);
    for (Eigen::Index k = 0; k < count; ++k) {
        const BathMode& m = bath->modes[static_cast<std::size_t>(k)];
        const double c = thermal_coth(m.frequency, temp);
        sq[k] = 0.5 * c / (m.mass * m.frequency);
        sp[k] = 0.5 * c * m.mass * m.frequency;
    }
    init.add_mode_diagonal(block->offset, std::move(sq), std::move(sp));
}

/// Channel of the reduced dynamics at time t for a factorized start with all
/// baths thermal at the given temperatures.
inline GaussianChannel extract_channel(
    const SymplecticPropagator& prop, const QuadraticModel& model,
    const std::map<std::string, Temperature>& bath_temps, double t) {
    InitialCovariance init;
    for (const auto& [label, temp] : bath_temps)
        add_bath_thermal(init, model, label, temp);
    return prop.channels(init, {t}).front();
}

}  // namespace qbm
