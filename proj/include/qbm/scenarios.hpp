#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "qbm/dynamics.hpp"
#include "qbm/equilibrium.hpp"
#include "qbm/fock.hpp"
#include "qbm/model.hpp"
#include "qbm/spectral.hpp"

namespace qbm {

enum class InitialSystem { Ground, EffectiveEquilibrium, CanonicalBare };

struct BathSetup {
    std::string label;
    SpectralDensitySpec spec;
    DiscretizationScheme scheme;
    Temperature temperature;
};

struct ScenarioPreset {
    std::string label;
    SystemOscillator system;  // observed oscillator; natural units in configs
    BathSetup tb;
    std::optional<BathSetup> second;
    InitialSystem initial_system = InitialSystem::Ground;
    std::vector<double> time_grid;
    int n_max = 20;
    int report_n_max = 8;  // truncation of the contraction-built variants
    int threads = 2;

    void validate() const {
        if (time_grid.empty() || time_grid.front() != 0.0)
            throw std::invalid_argument("preset '" + label +
                                        "': time grid must start at 0");
        for (std::size_t i = 1; i < time_grid.size(); ++i)
            if (!(time_grid[i] > time_grid[i - 1]))
                throw std::invalid_argument(
                    "preset '" + label + "': time grid must increase strictly");
        if (n_max < 2) throw std::invalid_argument("preset: n_max >= 2");
    }
};

struct ScenarioDiagnostics {
    std::size_t tb_mode_count = 0;
    std::size_t second_mode_count = 0;
    int quadrature_order = 0;
    double max_leakage = 0.0;
    double max_hermiticity_defect = 0.0;
    double min_cp_margin = 0.0;
    double min_uncertainty_margin = 0.0;
    double clipped_weight = 0.0;
    double turn_on_jump = 0.0;           // blackbody runs
    double max_population_drift = 0.0;   // max_t |p0(t) - p0(0)| of exact run
    double identity_defect_t0 = 0.0;     // |J(0) - delta delta|
    std::vector<std::string> notes;
};

struct ScenarioResult {
    std::vector<double> time;
    std::vector<FockDensityMatrix> exact;
    std::vector<FockDensityMatrix> secular;
    std::vector<FockDensityMatrix> canonical;
    std::map<std::string, std::vector<Complex>> slices;
    ScenarioDiagnostics diagnostics;
};

/// {0} + log-spaced early points + linear tail; transients near t=0 live on
/// scales far below the relaxation window.
inline std::vector<double> make_time_grid(double log_from, double log_to,
                                          std::size_t n_log, double linear_to,
                                          std::size_t n_linear) {
    std::vector<double> ts{0.0};
    if (n_log > 0 && log_from > 0.0 && log_to > log_from) {
        const double ratio = std::pow(log_to / log_from,
                                      1.0 / static_cast<double>(n_log - 1));
        double t = log_from;
        for (std::size_t i = 0; i < n_log; ++i) {
            ts.push_back(t);
            t *= ratio;
        }
    }
    const double start = ts.back();
    for (std::size_t i = 1; i <= n_linear; ++i)
        ts.push_back(start + (linear_to - start) * static_cast<double>(i) /
                                 static_cast<double>(n_linear));
    return ts;
}

namespace scendetail {

/// System seed covariance for the bare oscillator ground state.
inline Eigen::Matrix2d ground_covariance(const SystemOscillator& osc) {
    Eigen::Matrix2d c = Eigen::Matrix2d::Zero();
    c(0, 0) = 0.5 / (osc.mass * osc.frequency);
    c(1, 1) = 0.5 * osc.mass * osc.frequency;
    return c;
}

inline FockDensityMatrix canonical_bare(const FockBasis& basis, double beta) {
    FockDensityMatrix out;
    out.elements = Eigen::MatrixXcd::Zero(basis.dim(), basis.dim());
    const double x = std::exp(-beta * basis.oscillator.frequency);
    double pk = 1.0 - x;
    for (int n = 0; n < basis.dim(); ++n) {
        out.elements(n, n) = pk;
        pk *= x;
    }
    return out;
}

inline GaussianState system_state_from_cov(const Eigen::Matrix2d& cov) {
    GaussianState s;
    s.layout.blocks.push_back({"system", 0, 1});
    s.mean = Eigen::VectorXd::Zero(2);
    s.cov = cov;
    return s;
}

/// Factored (S+TB) equilibrium covariance for correlated starts:
/// Sigma_qq = Fq Fq^T over the first 1+N coordinates (no q-p correlations).
struct CorrelatedStart {
    Eigen::MatrixXd fq, fp;
    EquilibriumVariances variances;
};

inline CorrelatedStart correlated_equilibrium(const QuadraticModel& step1,
                                              const Temperature& temp) {
    const NormalModes nm = solve_normal_modes(step1.arrowhead());
    const auto n = static_cast<Eigen::Index>(nm.size());
    Eigen::VectorXd sq(n), sp(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double c = thermal_coth(nm.omega[i], temp);
        sq[i] = std::sqrt(0.5 * c / nm.omega[i]);
        sp[i] = std::sqrt(0.5 * c * nm.omega[i]);
    }
    CorrelatedStart out;
    out.fq = nm.inv_sqrt_mass.asDiagonal() * nm.vectors * sq.asDiagonal();
    out.fp = nm.inv_sqrt_mass.cwiseInverse().asDiagonal() * nm.vectors *
             sp.asDiagonal();
    out.variances = equilibrium_variances(step1, temp, &nm);
    return out;
}

struct SliceRequest {
    std::vector<std::pair<int, int>> rows;        // (n, m) output pairs
    std::vector<std::pair<int, int>> inputs;      // (nu, mu) recorded per row
};

}  // namespace scendetail

class ScenarioRunner {
  public:
    explicit ScenarioRunner(const ScenarioPreset& preset) : preset_(preset) {
        preset_.validate();
    }

    ScenarioResult run_thermalization() {
        if (preset_.second.has_value())
            throw std::invalid_argument(
                "run_thermalization: no second bath allowed");
        if (preset_.initial_system != InitialSystem::Ground)
            throw std::invalid_argument(
                "run_thermalization: Ground initial state required");

        auto tb_modes = discretize_bath(preset_.tb.spec, preset_.tb.scheme);
        QuadraticModel model = assemble(
            preset_.system, {{preset_.tb.label, preset_.tb.spec, tb_modes}});
        SymplecticPropagator prop(model);
        const FockBasis basis = FockBasis::make(preset_.n_max, preset_.system);

        ScenarioResult res;
        res.time = preset_.time_grid;
        res.diagnostics.tb_mode_count = tb_modes.size();

        // Exact reduced states from the factorized ground x thermal start.
        InitialCovariance init;
        init.set_system_block(scendetail::ground_covariance(preset_.system));
        add_bath_thermal(init, model, preset_.tb.label,
                         preset_.tb.temperature);
        auto traj = prop.system_trajectory(init, Eigen::VectorXd(), res.time,
                                           preset_.threads);
        fill_exact_states(res, basis, traj);

        // Channel tensor slices J_{nn;00}, J_{02;00}, J_{13;00}.
        InitialCovariance bath_only;
        add_bath_thermal(bath_only, model, preset_.tb.label,
                         preset_.tb.temperature);
        auto channels = prop.channels(bath_only, res.time, preset_.threads);
        record_cp(res, channels);

        const std::vector<std::pair<int, int>> rows = {
            {0, 0}, {1, 1}, {2, 2}, {3, 3}, {0, 2}, {1, 3}};
        const int order = calibrate_for(channels, basis, rows);
        res.diagnostics.quadrature_order = order;
        std::vector<std::string> keys;
        for (const auto& r : rows)
            keys.push_back("J_" + std::to_string(r.first) +
                           std::to_string(r.second) + "_00");
        for (const auto& key : keys)
            res.slices[key] = std::vector<Complex>(res.time.size());
        for (std::size_t k = 0; k < res.time.size(); ++k) {
            auto mats = tensor_rows(channels[k], basis, rows, order);
            for (std::size_t r = 0; r < rows.size(); ++r)
                res.slices[keys[r]][k] = mats[r](0, 0);
        }
        res.diagnostics.identity_defect_t0 = identity_defect(
            channels.front(),
            FockBasis::make(preset_.report_n_max, preset_.system), order);
        return res;
    }

    ScenarioResult run_second_bath() {
        if (!preset_.second.has_value() ||
            preset_.second->spec.kind != BathKind::OhmicDrude)
            throw std::invalid_argument(
                "run_second_bath: Ohmic-Drude second bath required");
        return second_step(false);
    }

    ScenarioResult run_blackbody() {
        if (!preset_.second.has_value() ||
            preset_.second->spec.kind != BathKind::Blackbody)
            throw std::invalid_argument(
                "run_blackbody: blackbody second bath required");
        return second_step(true);
    }

  private:
    ScenarioPreset preset_;
    double res_mass_dressing_ = 0.0;

    static void accumulate_state_checks(ScenarioResult& res,
                                        const FockDensityMatrix& rho) {
        res.diagnostics.max_leakage =
            std::max(res.diagnostics.max_leakage, rho.leakage());
        res.diagnostics.max_hermiticity_defect = std::max(
            res.diagnostics.max_hermiticity_defect, rho.hermiticity_defect());
    }

    void fill_exact_states(ScenarioResult& res, const FockBasis& basis,
                           const std::vector<SystemTrajectoryPoint>& traj) {
        const int order = 2 * basis.n_max + 10;
        res.exact.reserve(traj.size());
        double min_margin = 1e300;
        for (const auto& pt : traj) {
            GaussianState sys = scendetail::system_state_from_cov(pt.cov);
            sys.mean = pt.mean;
            min_margin = std::min(min_margin, sys.uncertainty_margin());
            FockDensityMatrix rho = gaussian_to_fock(sys, basis, order);
            accumulate_state_checks(res, rho);
            res.diagnostics.clipped_weight += rho.clip_small_negatives();
            res.exact.push_back(std::move(rho));
        }
        res.diagnostics.min_uncertainty_margin = min_margin;
        double drift = 0.0;
        const double p0 = res.exact.front().elements(0, 0).real();
        for (const auto& rho : res.exact)
            drift = std::max(drift, std::abs(rho.elements(0, 0).real() - p0));
        res.diagnostics.max_population_drift = drift;
    }

    void record_cp(ScenarioResult& res,
                   const std::vector<GaussianChannel>& channels) {
        double worst = 1e300;
        for (const auto& ch : channels) worst = std::min(worst, ch.cp_margin());
        res.diagnostics.min_cp_margin = worst;
    }

    int calibrate_for(const std::vector<GaussianChannel>& channels,
                      const FockBasis& basis,
                      std::vector<std::pair<int, int>> rows) {
        // Noise widths grow toward equilibrium; calibrate on the widest few.
        int order = 0;
        const std::size_t n = channels.size();
        for (std::size_t k : {n / 2, n - 1})
            order = std::max(order, calibrate_tensor_order(channels[k], basis,
                                                           1e-9, nullptr, rows));
        return order;
    }

    double identity_defect(const GaussianChannel& ch0, const FockBasis& basis,
                           int order) {
        PropagatorTensor t0 = propagator_tensor_fixed_order(ch0, basis, order);
        double worst = 0.0;
        const int dim = basis.dim();
        for (int n = 0; n < dim; ++n)
            for (int m = 0; m < dim; ++m)
                for (int nu = 0; nu < dim; ++nu)
                    for (int mu = 0; mu < dim; ++mu) {
                        const double expect =
                            (n == nu && m == mu) ? 1.0 : 0.0;
                        worst = std::max(
                            worst, std::abs(t0.at(n, m, nu, mu) - expect));
                    }
        return worst;
    }

    ScenarioResult second_step(bool blackbody) {
        if (preset_.initial_system != InitialSystem::EffectiveEquilibrium)
            throw std::invalid_argument(
                "second-step runs start from the equilibrated (S+TB) state");
        const BathSetup& sec = *preset_.second;

        auto tb_modes = discretize_bath(preset_.tb.spec, preset_.tb.scheme);
        auto sec_modes = discretize_bath(sec.spec, sec.scheme);

        // Step-1 equilibrium of the observed system + TB.
        QuadraticModel step1 = assemble(
            preset_.system, {{preset_.tb.label, preset_.tb.spec, tb_modes}});
        auto corr = scendetail::correlated_equilibrium(step1,
                                                       preset_.tb.temperature);

        // Step-2 model, with the field bath entering through the literal
        // momentum-coupled squares.  Their counter-terms dress the mass by
        // sum(m_k); close to the causality bound that dressing is order one
        // and the turn-on itself produces the visible jump.
        SystemOscillator sys2 = preset_.system;
        if (blackbody) {
            const double x = sec.spec.coupling_strength * sec.spec.cutoff;
            if (x < 1.0)
                sys2.charge_renormalized_mass =
                    blackbody_renormalized_mass(preset_.system.mass, sec.spec);
            double mass_sum = 0.0;
            for (const auto& m : sec_modes) mass_sum += m.mass;
            res_mass_dressing_ = mass_sum;
        }
        QuadraticModel step2 =
            assemble(sys2, {{preset_.tb.label, preset_.tb.spec, tb_modes},
                            {sec.label, sec.spec, sec_modes}});
        SymplecticPropagator prop(step2);
        const FockBasis basis = FockBasis::make(preset_.n_max, preset_.system);

        ScenarioResult res;
        res.time = preset_.time_grid;
        res.diagnostics.tb_mode_count = tb_modes.size();
        res.diagnostics.second_mode_count = sec_modes.size();

        // Exact run: correlated (S+TB) equilibrium (x) second-bath thermal.
        InitialCovariance init;
        init.add_factored_block(0, corr.fq, corr.fp);
        add_bath_thermal(init, step2, sec.label, sec.temperature);
        auto traj = prop.system_trajectory(init, Eigen::VectorXd(), res.time,
                                           preset_.threads);
        fill_exact_states(res, basis, traj);

        // Factorized-start channel for the comparison curves.
        InitialCovariance bath_only;
        add_bath_thermal(bath_only, step2, preset_.tb.label,
                         preset_.tb.temperature);
        add_bath_thermal(bath_only, step2, sec.label, sec.temperature);
        auto channels = prop.channels(bath_only, res.time, preset_.threads);
        record_cp(res, channels);

        // rho_beta from the step-1 equilibrium and the bare canonical state.
        const FockBasis report_basis =
            FockBasis::make(preset_.report_n_max, preset_.system);
        EffectiveOscillator eff = effective_parameters(corr.variances);
        FockDensityMatrix rho_beta =
            stationary_density_matrix(eff, report_basis);
        FockDensityMatrix rho_can = scendetail::canonical_bare(
            report_basis, preset_.tb.temperature.beta);

        const std::vector<std::pair<int, int>> rows = {
            {0, 0}, {1, 1}, {2, 2}, {0, 2}, {1, 3}};
        const int order =
            std::max(calibrate_for(channels, basis, rows),
                     calibrate_for(channels, report_basis, {}));
        res.diagnostics.quadrature_order = order;

        res.secular.resize(res.time.size());
        res.canonical.resize(res.time.size());
        for (std::size_t k = 0; k < res.time.size(); ++k) {
            PropagatorTensor tensor =
                propagator_tensor_fixed_order(channels[k], report_basis, order);
            res.secular[k] = secular_evolve(rho_beta, tensor);
            res.canonical[k] = evolve_density_matrix(rho_can, tensor);
        }

        // Influence-tensor slices in the full basis.
        const std::vector<std::pair<int, int>> inputs = {
            {0, 0}, {1, 1}, {2, 2}, {0, 2}, {1, 3}, {0, 1}};
        for (const auto& r : rows)
            for (const auto& in : inputs) {
                const std::string key = slice_key(r, in);
                res.slices[key] = std::vector<Complex>(res.time.size());
            }
        for (std::size_t k = 0; k < res.time.size(); ++k) {
            auto mats = tensor_rows(channels[k], basis, rows, order);
            for (std::size_t r = 0; r < rows.size(); ++r)
                for (const auto& in : inputs)
                    res.slices[slice_key(rows[r], in)][k] =
                        mats[r](in.first, in.second);
        }
        res.diagnostics.identity_defect_t0 =
            identity_defect(channels.front(), report_basis, order);

        if (blackbody) {
            // Field-attributable turn-on jump of J_00;00 over the transient
            // window: the thermal-bath-only channel is subtracted so the
            // ordinary TB relaxation does not masquerade as a jump.
            const double window = 20.0 / sec.spec.cutoff;
            std::vector<double> early{0.0};
            for (std::size_t k = 1; k < res.time.size(); ++k)
                if (res.time[k] <= window) early.push_back(res.time[k]);
            SymplecticPropagator prop1(step1);
            InitialCovariance tb_therm;
            add_bath_thermal(tb_therm, step1, preset_.tb.label,
                             preset_.tb.temperature);
            auto ref_channels = prop1.channels(tb_therm, early, preset_.threads);
            double jump = 0.0;
            const auto& j00 = res.slices.at("J_00_00");
            for (std::size_t k = 1; k < early.size(); ++k) {
                auto ref_rows = tensor_rows(ref_channels[k], basis, {{0, 0}},
                                            res.diagnostics.quadrature_order);
                jump = std::max(jump, std::abs(j00[k] - ref_rows[0](0, 0)));
            }
            res.diagnostics.turn_on_jump = jump;
            res.diagnostics.notes.push_back(
                "field mass dressing sum(m_k) = " +
                std::to_string(res_mass_dressing_));
        }
        return res;
    }

    static std::string slice_key(const std::pair<int, int>& row,
                                 const std::pair<int, int>& in) {
        return "J_" + std::to_string(row.first) + std::to_string(row.second) +
               "_" + std::to_string(in.first) + std::to_string(in.second);
    }
};

inline ScenarioResult run_thermalization(const ScenarioPreset& preset) {
    return ScenarioRunner(preset).run_thermalization();
}
inline ScenarioResult run_second_bath(const ScenarioPreset& preset) {
    return ScenarioRunner(preset).run_second_bath();
}
inline ScenarioResult run_blackbody(const ScenarioPreset& preset) {
    return ScenarioRunner(preset).run_blackbody();
}

}  // namespace qbm
