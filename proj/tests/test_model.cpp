#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "qbm/dynamics.hpp"
#include "qbm/model.hpp"
#include "qbm/spectral.hpp"

using namespace qbm;

namespace {

BathAttachment make_tb(const std::string& label, double gamma, double cutoff,
                       std::size_t n, NodeRule rule = NodeRule::Logarithmic,
                       double mass = 1.0) {
    auto spec = SpectralDensitySpec::ohmic_drude(gamma, cutoff, mass);
    auto modes = discretize_bath(
        spec, DiscretizationScheme::make(rule, n, 10.0 * cutoff));
    return {label, spec, modes};
}

BathAttachment make_bb(const std::string& label, double tau, double cutoff,
                       std::size_t n, double mass = 1.0) {
    // Linear nodes: these tests materialize full covariances, and deep
    // logarithmic IR nodes carry classically divergent variances.
    auto spec = SpectralDensitySpec::blackbody(tau, cutoff, mass);
    auto modes = discretize_bath(
        spec, DiscretizationScheme::linear(n, 10.0 * cutoff));
    return {label, spec, modes};
}

}  // namespace

TEST_CASE("assemble with no baths gives the free-oscillator blocks") {
    auto model = assemble(SystemOscillator::make(1.4, 2.0));
    auto a = model.coefficient_matrix();
    REQUIRE(a.rows() == 2);
    CHECK_THAT(a(0, 0), Catch::Matchers::WithinRel(1.4 * 4.0, 1e-15));
    CHECK_THAT(a(1, 1), Catch::Matchers::WithinRel(1.0 / 1.4, 1e-15));
    CHECK(a(0, 1) == 0.0);
}

TEST_CASE("position counter-term: eliminating the bath leaves the bare potential") {
    auto model = assemble(SystemOscillator::make(1.0, 1.0),
                          {make_tb("TB", 0.3, 5.0, 24)});
    const auto n = static_cast<Eigen::Index>(model.mode_count());
    Eigen::MatrixXd v = model.coefficient_matrix().topLeftCorner(n, n);
    // Schur complement onto the system coordinate.
    const double schur =
        v(0, 0) -
        (v.block(0, 1, 1, n - 1) * v.block(1, 1, n - 1, n - 1).inverse() *
         v.block(1, 0, n - 1, 1))(0, 0);
    CHECK_THAT(schur, Catch::Matchers::WithinRel(1.0, 1e-10));
}

TEST_CASE("momentum counter-term: eliminating field momenta leaves the bare potential") {
    auto model = assemble(SystemOscillator::make(1.0, 1.0),
                          {make_bb("BB", 1e-3, 100.0, 16)});
    const auto n = static_cast<Eigen::Index>(model.mode_count());
    Eigen::MatrixXd a = model.coefficient_matrix();
    // Coordinates (q_S, p_1..p_N): minimize over the p_k at fixed q_S.
    Eigen::MatrixXd blk(n, n);
    blk(0, 0) = a(0, 0);
    for (Eigen::Index k = 1; k < n; ++k) {
        blk(0, k) = blk(k, 0) = a(0, n + k);
        for (Eigen::Index l = 1; l < n; ++l) blk(k, l) = a(n + k, n + l);
        blk(k, k) = a(n + k, n + k);
    }
    const double schur =
        blk(0, 0) -
        (blk.block(0, 1, 1, n - 1) * blk.block(1, 1, n - 1, n - 1).inverse() *
         blk.block(1, 0, n - 1, 1))(0, 0);
    CHECK_THAT(schur, Catch::Matchers::WithinRel(1.0, 1e-10));
}

TEST_CASE("assemble validation") {
    auto sys = SystemOscillator::make(1.0, 1.0);
    auto tb = make_tb("TB", 0.1, 20.0, 8);
    CHECK_THROWS_AS(assemble(sys, {tb, tb}), std::invalid_argument);
    BathAttachment empty{"E", tb.spec, {}};
    CHECK_THROWS_AS(assemble(sys, {empty}), std::invalid_argument);

    auto mixed = tb;
    mixed.modes[2].coupling_type = CouplingType::Momentum;
    CHECK_THROWS_AS(assemble(sys, {mixed}), std::invalid_argument);

    auto bb1 = make_bb("BB1", 1e-3, 50.0, 6);
    auto bb2 = make_bb("BB2", 1e-3, 60.0, 6);
    CHECK_THROWS_AS(assemble(sys, {bb1, bb2}), std::invalid_argument);
    CHECK_NOTHROW(assemble(sys, {tb, bb1}));
}

TEST_CASE("bath order permutation leaves the spectrum invariant") {
    auto sys = SystemOscillator::make(1.0, 1.0);
    auto a = make_tb("A", 0.1, 10.0, 14);
    auto b = make_tb("B", 0.25, 30.0, 11);
    auto m1 = assemble(sys, {a, b});
    auto m2 = assemble(sys, {b, a});
    Eigen::VectorXd s1 =
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m1.coefficient_matrix())
            .eigenvalues();
    Eigen::VectorXd s2 =
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m2.coefficient_matrix())
            .eigenvalues();
    CHECK((s1 - s2).cwiseAbs().maxCoeff() < 1e-10 * s1.cwiseAbs().maxCoeff());
}

TEST_CASE("uncoupled thermal state: ground and equipartition limits") {
    auto model = assemble(SystemOscillator::make(1.3, 0.9));
    auto ground = thermal_state(model, Temperature::zero());
    CHECK_THAT(ground.cov(0, 0),
               Catch::Matchers::WithinRel(0.5 / (1.3 * 0.9), 1e-14));
    CHECK_THAT(ground.cov(1, 1),
               Catch::Matchers::WithinRel(0.5 * 1.3 * 0.9, 1e-14));

    auto hot = thermal_state(model, Temperature::from_beta(0.01));
    CHECK_THAT(hot.cov(0, 0),
               Catch::Matchers::WithinRel(100.0 / (1.3 * 0.81), 1e-4));
}

TEST_CASE("coupled thermal state variances converge under mode doubling") {
    auto sys = SystemOscillator::make(1.0, 1.0);
    const double beta = 8.2724;
    double q2[2], p2[2];
    int idx = 0;
    for (std::size_t n : {2000u, 4000u}) {
        auto model = assemble(sys, {make_tb("TB", 0.1, 20.0, n)});
        SymplecticPropagator prop(model);
        const auto& nm = prop.normal_modes();
        double q = 0.0, p = 0.0;
        for (Eigen::Index i = 0; i < nm.omega.size(); ++i) {
            const double c = thermal_coth(nm.omega[i],
                                          Temperature::from_beta(beta));
            const double e2 = nm.vectors(0, i) * nm.vectors(0, i);
            q += e2 * 0.5 * c / nm.omega[i];
            p += e2 * 0.5 * c * nm.omega[i];
        }
        q2[idx] = q;
        p2[idx] = p;
        ++idx;
    }
    CHECK(std::abs(q2[1] - q2[0]) / q2[0] < 1e-4);
    CHECK(std::abs(p2[1] - p2[0]) / p2[0] < 1e-4);
}

TEST_CASE("thermal states satisfy the uncertainty invariant") {
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> u(0.2, 1.5);
    for (int trial = 0; trial < 4; ++trial) {
        auto model = assemble(
            SystemOscillator::make(u(rng), u(rng)),
            {make_tb("TB", 0.3 * u(rng), 10.0 * u(rng), 30)});
        auto state = thermal_state(
            model, trial % 2 == 0 ? Temperature::from_beta(2.0 * u(rng))
                                  : Temperature::zero());
        CHECK(state.uncertainty_margin() > -1e-10);
    }
}

TEST_CASE("blackbody-coupled thermal state is physical in the original frame") {
    auto model = assemble(SystemOscillator::make(1.0, 1.0),
                          {make_bb("BB", 2e-2, 25.0, 40)});
    auto state = thermal_state(model, Temperature::from_beta(1.5));
    CHECK(state.uncertainty_margin() > -1e-10);
    // and stays stationary under the evolution (frame handling consistency)
    SymplecticPropagator prop(model);
    auto evolved = prop.evolve(state, 0.83);
    CHECK((evolved.cov - state.cov).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("compose_product builds block covariances and multiplies purity") {
    auto ma = assemble(SystemOscillator::make(1.0, 1.0),
                       {make_tb("TB", 0.2, 8.0, 10)});
    auto tb2 = make_tb("TB2", 0.1, 12.0, 7);

    auto sa = thermal_state(ma, Temperature::from_beta(2.0));

    GaussianState sb;
    sb.layout.blocks.push_back({"TB2", 0, tb2.modes.size()});
    const auto nb = static_cast<Eigen::Index>(tb2.modes.size());
    sb.mean = Eigen::VectorXd::Zero(2 * nb);
    sb.cov = Eigen::MatrixXd::Zero(2 * nb, 2 * nb);
    for (Eigen::Index k = 0; k < nb; ++k) {
        const auto& m = tb2.modes[static_cast<std::size_t>(k)];
        const double c = thermal_coth(m.frequency, Temperature::from_beta(3.0));
        sb.cov(k, k) = 0.5 * c / (m.mass * m.frequency);
        sb.cov(nb + k, nb + k) = 0.5 * c * m.mass * m.frequency;
    }

    auto prod = compose_product(sa, sb);
    REQUIRE(prod.mode_count() == sa.mode_count() + tb2.modes.size());
    CHECK_THAT(prod.purity(),
               Catch::Matchers::WithinRel(sa.purity() * sb.purity(), 1e-10));

    const auto na = static_cast<Eigen::Index>(sa.mode_count());
    const auto n = static_cast<Eigen::Index>(prod.mode_count());
    CHECK((prod.cov.block(0, 0, na, na) - sa.cov.block(0, 0, na, na))
              .cwiseAbs()
              .maxCoeff() == 0.0);
    CHECK((prod.cov.block(0, n, na, na) - sa.cov.block(0, na, na, na))
              .cwiseAbs()
              .maxCoeff() == 0.0);

    CHECK_THROWS_AS(compose_product(prod, sb), std::invalid_argument);
}

TEST_CASE("thermal state commutes with its own dynamics") {
    auto model = assemble(SystemOscillator::make(1.0, 1.0),
                          {make_tb("TB", 0.25, 15.0, 60)});
    auto state = thermal_state(model, Temperature::from_beta(4.0));
    SymplecticPropagator prop(model);
    for (double t : {0.37, 2.9, 17.0}) {
        auto evolved = prop.evolve(state, t);
        const double scale = state.cov.cwiseAbs().maxCoeff();
        CHECK((evolved.cov - state.cov).cwiseAbs().maxCoeff() <
              1e-10 * scale * 10.0);
    }
}

TEST_CASE("renormalized mass solves the implicit relation") {
    auto bb = SpectralDensitySpec::blackbody(1e-3, 500.0, 1.0);
    const double m = blackbody_renormalized_mass(1.0, bb);
    CHECK_THAT(m, Catch::Matchers::WithinRel(1.0 / (1.0 - 0.5), 1e-14));
    CHECK_THAT(m, Catch::Matchers::WithinRel(1.0 + m * 1e-3 * 500.0, 1e-12));
    auto at_bound = SpectralDensitySpec::blackbody(1e-3, 1000.0, 1.0);
    CHECK_THROWS_AS(blackbody_renormalized_mass(1.0, at_bound),
                    std::domain_error);
}
