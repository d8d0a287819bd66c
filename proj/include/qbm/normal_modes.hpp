#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace qbm {

/// Mass-weighted normal modes of a quadratic Hamiltonian whose potential has
/// the counter-term (arrowhead) structure
///
///   V(q, x) = k0 q^2 / 2 + sum_j (m_j w_j^2 / 2) (x_j - d_j q)^2.
///
/// The mass-weighted stiffness matrix is a symmetric arrowhead whose
/// eigenvalues are the roots of the secular function
///
///   f(l) = k0 - l * [ m_s + sum_j g_j / (w_j^2 - l) ],   g_j = m_j w_j^2 d_j^2,
///
/// one root below the lowest pole and one between consecutive poles.  Solving
/// f per interval with the root anchored to its nearest pole keeps every
/// eigenvalue accurate relative to its own magnitude, which a dense solver
/// cannot do here: blackbody counter-terms make the assembled matrix graded
/// over ~19 decades while the physical system mode sits at omega0^2.
struct ArrowheadData {
    double system_mass = 1.0;
    double system_stiffness = 1.0;
    std::vector<double> mode_mass;
    std::vector<double> mode_freq;
    std::vector<double> mode_disp;  // d_j; position-coupled: c_j/(m_j w_j^2)
};

struct NormalModes {
    Eigen::VectorXd omega;          // normal-mode frequencies, ascending
    Eigen::MatrixXd vectors;        // columns: orthonormal mass-weighted modes
    Eigen::VectorXd inv_sqrt_mass;  // D_ii = 1/sqrt(m_i), coordinate order
    std::size_t size() const { return static_cast<std::size_t>(omega.size()); }
};

class SecularSolver {
  public:
    explicit SecularSolver(const ArrowheadData& data) : data_(data) {
        const std::size_t n = data.mode_mass.size();
        if (data.mode_freq.size() != n || data.mode_disp.size() != n)
            throw std::invalid_argument("SecularSolver: inconsistent mode arrays");
        if (!(data.system_mass > 0.0) || !(data.system_stiffness > 0.0))
            throw std::invalid_argument(
                "SecularSolver: system mass and stiffness must be positive");
        for (std::size_t j = 0; j < n; ++j) {
            if (!(data.mode_mass[j] > 0.0) || !(data.mode_freq[j] > 0.0) ||
                !std::isfinite(data.mode_disp[j]))
                throw std::invalid_argument("SecularSolver: invalid bath mode");
        }
        build_groups();
    }

    NormalModes solve() const {
        const std::size_t n_modes = data_.mode_mass.size();
        const std::size_t dim = n_modes + 1;
        NormalModes out;
        out.inv_sqrt_mass.resize(dim);
        out.inv_sqrt_mass[0] = 1.0 / std::sqrt(data_.system_mass);
        for (std::size_t j = 0; j < n_modes; ++j)
            out.inv_sqrt_mass[j + 1] = 1.0 / std::sqrt(data_.mode_mass[j]);

        std::vector<double> eigenvalues;
        std::vector<Eigen::VectorXd> columns;
        eigenvalues.reserve(dim);
        columns.reserve(dim);

        // Coupled (bright) roots from the secular equation.
        const std::size_t n_poles = poles_.size();
        for (std::size_t r = 0; r <= n_poles; ++r) {
            Root root = solve_interval(r);
            Eigen::VectorXd col = Eigen::VectorXd::Zero(dim);
            col[0] = 1.0;
            for (std::size_t p = 0; p < n_poles; ++p) {
                const PoleEntry& pe = poles_[p];
                const double den = denom(pe.pole, root, p);
                for (std::size_t k = 0; k < pe.members.size(); ++k) {
                    col[pe.members[k] + 1] = pe.border[k] / den;
                }
            }
            const double nrm = col.stableNorm();
            col /= nrm;
            eigenvalues.push_back(root.lambda());
            columns.push_back(std::move(col));
        }

        // Dark modes: exact eigenpairs inside degenerate or uncoupled groups.
        for (const auto& grp : dark_groups_) {
            for (const auto& vec : grp.basis) {
                Eigen::VectorXd col = Eigen::VectorXd::Zero(dim);
                for (std::size_t k = 0; k < grp.members.size(); ++k)
                    col[grp.members[k] + 1] = vec[k];
                eigenvalues.push_back(grp.pole);
                columns.push_back(std::move(col));
            }
        }

        if (eigenvalues.size() != dim)
            throw std::logic_error("SecularSolver: eigenpair count mismatch");

        std::vector<std::size_t> order(dim);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return eigenvalues[a] < eigenvalues[b];
        });

        out.omega.resize(dim);
        out.vectors.resize(dim, dim);
        for (std::size_t i = 0; i < dim; ++i) {
            const double lam = eigenvalues[order[i]];
            if (!(lam > 0.0))
                throw std::runtime_error(
                    "SecularSolver: non-positive normal-mode eigenvalue");
            out.omega[i] = std::sqrt(lam);
            out.vectors.col(static_cast<Eigen::Index>(i)) = columns[order[i]];
        }
        return out;
    }

  private:
    struct PoleEntry {
        double pole = 0.0;
        double weight = 0.0;  // merged g
        std::vector<std::size_t> members;
        std::vector<double> border;  // signed per-member border entries
    };
    struct DarkGroup {
        double pole = 0.0;
        std::vector<std::size_t> members;
        std::vector<Eigen::VectorXd> basis;  // orthonormal, dim = members.size()
    };
    struct Root {
        std::ptrdiff_t anchor = -1;  // pole index; -1 means plain lambda
        double base = 0.0;           // pole value (or 0 for plain)
        double delta = 0.0;          // signed offset from base
        double lambda() const { return base + delta; }
    };

    const ArrowheadData& data_;
    std::vector<PoleEntry> poles_;      // coupled groups, ascending pole
    std::vector<DarkGroup> dark_groups_;

    void build_groups() {
        const std::size_t n = data_.mode_mass.size();
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return data_.mode_freq[a] < data_.mode_freq[b];
        });

        std::size_t i = 0;
        while (i < n) {
            const double w = data_.mode_freq[order[i]];
            std::size_t j = i;
            while (j < n && data_.mode_freq[order[j]] == w) ++j;

            PoleEntry entry;
            entry.pole = w * w;
            for (std::size_t k = i; k < j; ++k) {
                const std::size_t m = order[k];
                const double kappa = data_.mode_mass[m] * w * w;
                const double g =
                    kappa * data_.mode_disp[m] * data_.mode_disp[m];
                const double border = kappa * data_.mode_disp[m] /
                                      std::sqrt(data_.system_mass *
                                                data_.mode_mass[m]);
                entry.weight += g;
                entry.members.push_back(m);
                entry.border.push_back(border);
            }

            const std::size_t k = entry.members.size();
            if (entry.weight > 0.0) {
                if (k > 1) append_dark(entry, k - 1);
                poles_.push_back(std::move(entry));
            } else {
                DarkGroup grp;
                grp.pole = entry.pole;
                grp.members = entry.members;
                for (std::size_t c = 0; c < k; ++c) {
                    Eigen::VectorXd e = Eigen::VectorXd::Zero(
                        static_cast<Eigen::Index>(k));
                    e[static_cast<Eigen::Index>(c)] = 1.0;
                    grp.basis.push_back(std::move(e));
                }
                dark_groups_.push_back(std::move(grp));
            }
            i = j;
        }
    }

    // Orthonormal complement of the bright direction within a degenerate group.
    void append_dark(const PoleEntry& entry, std::size_t count) {
        const std::size_t k = entry.members.size();
        Eigen::VectorXd u(static_cast<Eigen::Index>(k));
        for (std::size_t c = 0; c < k; ++c)
            u[static_cast<Eigen::Index>(c)] = entry.border[c];
        u.normalize();
        Eigen::VectorXd p = -u;
        p[0] += 1.0;  // e1 - u
        DarkGroup grp;
        grp.pole = entry.pole;
        grp.members = entry.members;
        const double pp = p.squaredNorm();
        for (std::size_t c = 1; c <= count; ++c) {
            Eigen::VectorXd h = Eigen::VectorXd::Zero(
                static_cast<Eigen::Index>(k));
            h[static_cast<Eigen::Index>(c)] = 1.0;
            if (pp > 0.0) h -= (2.0 * p[static_cast<Eigen::Index>(c)] / pp) * p;
            grp.basis.push_back(std::move(h));
        }
        dark_groups_.push_back(std::move(grp));
    }

    double denom(double pole, const Root& root, std::size_t pole_index) const {
        if (root.anchor == static_cast<std::ptrdiff_t>(pole_index))
            return -root.delta;
        return (pole - root.base) - root.delta;
    }

    // f(lambda) = k0 - lambda * (m_s + sum g/(pole - lambda)), with the anchored
    // pole's denominator carried exactly as -delta.
    double f_of(const Root& r) const {
        const double lambda = r.lambda();
        double s = 0.0;
        for (std::size_t p = 0; p < poles_.size(); ++p)
            s += poles_[p].weight / denom(poles_[p].pole, r, p);
        return data_.system_stiffness - lambda * (data_.system_mass + s);
    }

    double fprime_of(const Root& r) const {
        double s = 0.0;
        for (std::size_t p = 0; p < poles_.size(); ++p) {
            const double den = denom(poles_[p].pole, r, p);
            s += poles_[p].weight * poles_[p].pole / (den * den);
        }
        return -(data_.system_mass + s);
    }

    // Root r of the secular equation in interval r: (P_{r-1}, P_r) with
    // P_{-1} = 0 and P_n = +inf.  Monotone-decreasing f => safeguarded Newton.
    Root solve_interval(std::size_t r) const {
        const std::size_t n_poles = poles_.size();
        Root root;
        double lo, hi;  // bracket in lambda
        if (r == 0) {
            lo = 0.0;
            hi = poles_.empty() ? upper_bound_estimate() : poles_[0].pole;
        } else if (r < n_poles) {
            lo = poles_[r - 1].pole;
            hi = poles_[r].pole;
        } else {
            lo = poles_[n_poles - 1].pole;
            hi = expand_upper(lo);
        }

        // Choose the anchor by the sign of f at the midpoint.
        const double mid = 0.5 * (lo + hi);
        Root probe;
        probe.anchor = -1;
        probe.base = 0.0;
        probe.delta = mid;
        const bool upper_half = f_of(probe) > 0.0;

        if (r == n_poles) {
            root.anchor = n_poles == 0 ? -1 : static_cast<std::ptrdiff_t>(n_poles - 1);
            root.base = n_poles == 0 ? 0.0 : poles_[n_poles - 1].pole;
        } else if (r == 0 && !upper_half) {
            root.anchor = -1;  // plain lambda near the origin
            root.base = 0.0;
        } else if (upper_half) {
            root.anchor = static_cast<std::ptrdiff_t>(r);
            root.base = poles_[r].pole;  // approach from below: delta < 0
        } else {
            root.anchor = static_cast<std::ptrdiff_t>(r - 1);
            root.base = poles_[r - 1].pole;  // approach from above: delta > 0
        }

        double dlo = lo - root.base;
        double dhi = hi - root.base;
        root.delta = 0.5 * (dlo + dhi);

        // Pole-hugging roots can sit at |delta| many orders below the pole
        // spacing, so convergence must be measured against the offset itself,
        // never against the pole magnitude.
        for (int it = 0; it < 400; ++it) {
            const double fv = f_of(root);
            if (fv > 0.0)
                dlo = root.delta;  // root lies above (f decreasing)
            else if (fv < 0.0)
                dhi = root.delta;
            else
                break;
            const double fp = fprime_of(root);
            double next = root.delta - fv / fp;
            if (!(next > dlo) || !(next < dhi) || !std::isfinite(next))
                next = 0.5 * (dlo + dhi);
            root.delta = next;
            const double width = dhi - dlo;
            if (width <= 4.0 * std::numeric_limits<double>::epsilon() *
                                 std::abs(root.delta) +
                             1e-290)
                break;
        }
        return root;
    }

    double upper_bound_estimate() const {
        double sum_g = 0.0, beta2 = 0.0, dmax = 0.0;
        for (const auto& p : poles_) {
            sum_g += p.weight;
            beta2 += p.weight * p.pole / data_.system_mass;
            dmax = std::max(dmax, p.pole);
        }
        const double b0 =
            (data_.system_stiffness + sum_g) / data_.system_mass;
        return std::max(b0, dmax) + std::sqrt(beta2) + 1.0;
    }

    double expand_upper(double lo) const {
        double hi = 2.0 * lo + upper_bound_estimate();
        Root probe;
        probe.anchor = -1;
        probe.base = 0.0;
        for (int i = 0; i < 200; ++i) {
            probe.delta = hi;
            if (f_of(probe) < 0.0) return hi;
            hi *= 4.0;
        }
        throw std::runtime_error("SecularSolver: failed to bracket top root");
    }
};

inline NormalModes solve_normal_modes(const ArrowheadData& data) {
    return SecularSolver(data).solve();
}

}  // namespace qbm
