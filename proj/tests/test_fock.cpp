#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "qbm/fock.hpp"
#include "qbm/model.hpp"

using namespace qbm;

namespace {

GaussianState system_state(const Eigen::Matrix2d& cov,
                           const Eigen::Vector2d& mean = Eigen::Vector2d::Zero()) {
    GaussianState s;
    s.layout.blocks.push_back({"system", 0, 1});
    s.mean = mean;
    s.cov = cov;
    return s;
}

Eigen::Matrix2d random_physical_cov(std::mt19937& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double nu = 0.5 + 2.5 * u(rng);
    const double r = -0.7 + 1.4 * u(rng);
    const double th = M_PI * u(rng);
    Eigen::Matrix2d rot;
    rot << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
    Eigen::Matrix2d d = Eigen::Matrix2d::Zero();
    d(0, 0) = nu * std::exp(2.0 * r);
    d(1, 1) = nu * std::exp(-2.0 * r);
    return rot * d * rot.transpose();
}

GaussianChannel random_cp_channel(std::mt19937& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double s = 0.15 + 0.8 * u(rng);
    const double a = -0.4 + 0.8 * u(rng);
    const double t1 = 2.0 * M_PI * u(rng), t2 = 2.0 * M_PI * u(rng);
    auto rot = [](double t) {
        Eigen::Matrix2d r;
        r << std::cos(t), std::sin(t), -std::sin(t), std::cos(t);
        return r;
    };
    GaussianChannel ch;
    Eigen::Matrix2d d = Eigen::Matrix2d::Zero();
    d(0, 0) = std::exp(a);
    d(1, 1) = std::exp(-a);
    ch.drift = s * rot(t1) * d * rot(t2);
    const double det = ch.drift.determinant();
    Eigen::Matrix2d w;
    const double b = u(rng), c = u(rng), e = u(rng);
    w << 0.4 * b, 0.2 * c, 0.2 * c, 0.4 * e;
    ch.noise = 0.5 * std::abs(1.0 - det) * Eigen::Matrix2d::Identity() +
               w * w.transpose() + 1e-6 * Eigen::Matrix2d::Identity();
    return ch;
}

}  // namespace

TEST_CASE("fock basis validation and energies") {
    auto osc = SystemOscillator::make(1.0, 2.0);
    CHECK_THROWS_AS(FockBasis::make(1, osc), std::invalid_argument);
    auto basis = FockBasis::make(4, osc);
    CHECK_THAT(basis.energy(3), Catch::Matchers::WithinRel(2.0 * 3.5, 1e-15));
}

TEST_CASE("ground state maps to diag(1, 0, ...)") {
    auto basis = FockBasis::make(8, SystemOscillator::make(1.0, 1.0));
    auto rho = gaussian_to_fock(
        system_state(0.5 * Eigen::Matrix2d::Identity()), basis);
    CHECK_THAT(rho.elements(0, 0).real(),
               Catch::Matchers::WithinAbs(1.0, 1e-12));
    for (int n = 1; n <= 8; ++n)
        CHECK(std::abs(rho.elements(n, n)) < 1e-12);
    CHECK(std::abs(rho.leakage()) < 1e-12);
}

TEST_CASE("scaled bases: the oscillator's own ground state is pure") {
    auto osc = SystemOscillator::make(2.3, 0.7);
    auto basis = FockBasis::make(6, osc);
    Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
    cov(0, 0) = 0.5 / (osc.mass * osc.frequency);
    cov(1, 1) = 0.5 * osc.mass * osc.frequency;
    auto rho = gaussian_to_fock(system_state(cov), basis);
    CHECK_THAT(rho.elements(0, 0).real(),
               Catch::Matchers::WithinAbs(1.0, 1e-12));
}

TEST_CASE("thermal occupation follows the Boltzmann ladder") {
    // Oracle: direct Boltzmann sum over oscillator levels.
    const double beta = 0.9;
    const double nbar = 1.0 / (std::exp(beta) - 1.0);
    auto basis = FockBasis::make(16, SystemOscillator::make(1.0, 1.0));
    auto rho = gaussian_to_fock(
        system_state((nbar + 0.5) * Eigen::Matrix2d::Identity()), basis);
    const double x = std::exp(-beta);
    double pk = 1.0 - x;
    for (int n = 0; n <= 16; ++n) {
        CHECK_THAT(rho.elements(n, n).real(),
                   Catch::Matchers::WithinAbs(pk, 1e-10));
        pk *= x;
    }
    for (int n = 0; n <= 16; ++n)
        for (int m = 0; m <= 16; ++m)
            if (n != m) CHECK(std::abs(rho.elements(n, m)) < 1e-12);
}

TEST_CASE("zero-mean Gaussian states have no odd coherences") {
    std::mt19937 rng(5);
    auto basis = FockBasis::make(9, SystemOscillator::make(1.0, 1.0));
    for (int trial = 0; trial < 25; ++trial) {
        auto rho = gaussian_to_fock(system_state(random_physical_cov(rng)),
                                    basis);
        for (int n = 0; n <= 9; ++n)
            for (int m = 0; m <= 9; ++m)
                if ((n - m) % 2 != 0)
                    CHECK(std::abs(rho.elements(n, m)) < 1e-10);
    }
}

TEST_CASE("quadrature and recursion routes agree on random covariances") {
    std::mt19937 rng(23);
    auto basis = FockBasis::make(10, SystemOscillator::make(1.0, 1.0));
    for (int trial = 0; trial < 100; ++trial) {
        auto state = system_state(random_physical_cov(rng));
        auto a = gaussian_to_fock(state, basis);
        auto b = gaussian_to_fock_recursion(state, basis);
        CHECK((a.elements - b.elements).cwiseAbs().maxCoeff() < 1e-8);
    }
}

TEST_CASE("unphysical covariance is rejected") {
    auto basis = FockBasis::make(4, SystemOscillator::make(1.0, 1.0));
    Eigen::Matrix2d bad = 0.2 * Eigen::Matrix2d::Identity();
    CHECK_THROWS_AS(gaussian_to_fock(system_state(bad), basis),
                    std::invalid_argument);
}

TEST_CASE("identity channel gives the delta-delta tensor") {
    auto basis = FockBasis::make(6, SystemOscillator::make(1.0, 1.0));
    auto t0 = propagator_tensor(GaussianChannel{}, basis);
    double worst = 0.0;
    for (int n = 0; n <= 6; ++n)
        for (int m = 0; m <= 6; ++m)
            for (int nu = 0; nu <= 6; ++nu)
                for (int mu = 0; mu <= 6; ++mu) {
                    const double expect = (n == nu && m == mu) ? 1.0 : 0.0;
                    worst = std::max(worst,
                                     std::abs(t0.at(n, m, nu, mu) - expect));
                }
    CHECK(worst < 1e-10);
}

TEST_CASE("zero-coupling channel carries the free phases") {
    auto basis = FockBasis::make(6, SystemOscillator::make(1.0, 1.0));
    for (double t : {0.37, 2.0, 11.4}) {
        GaussianChannel rot;
        rot.drift << std::cos(t), std::sin(t), -std::sin(t), std::cos(t);
        rot.time = t;
        auto jt = propagator_tensor(rot, basis);
        double worst = 0.0;
        for (int n = 0; n <= 6; ++n)
            for (int m = 0; m <= 6; ++m)
                for (int nu = 0; nu <= 6; ++nu)
                    for (int mu = 0; mu <= 6; ++mu) {
                        const Complex expect =
                            (n == nu && m == mu)
                                ? std::exp(Complex(0.0, -(m - n) * t))
                                : Complex(0.0, 0.0);
                        worst = std::max(
                            worst, std::abs(jt.at(n, m, nu, mu) - expect));
                    }
        CHECK(worst < 1e-8);
    }
}

TEST_CASE("random channels: hermiticity pairing and trace preservation") {
    std::mt19937 rng(41);
    auto basis = FockBasis::make(12, SystemOscillator::make(1.0, 1.0));
    for (int trial = 0; trial < 100; ++trial) {
        auto ch = random_cp_channel(rng);
        REQUIRE(ch.cp_margin() > -1e-12);
        auto rows = tensor_rows(ch, basis, {{0, 0}, {1, 1}, {0, 2}, {2, 3}},
                                40);
        // pairing J_{nm;nu mu} = conj(J_{mn;mu nu}) on the (0,2)/(2,0) pair
        auto conj_rows = tensor_rows(ch, basis, {{2, 0}}, 40);
        double worst = 0.0;
        for (int nu = 0; nu <= 12; ++nu)
            for (int mu = 0; mu <= 12; ++mu)
                worst = std::max(worst,
                                 std::abs(rows[2](nu, mu) -
                                          std::conj(conj_rows[0](mu, nu))));
        CHECK(worst < 1e-8);
    }
}

TEST_CASE("trace preservation within truncation leakage") {
    std::mt19937 rng(97);
    auto basis = FockBasis::make(18, SystemOscillator::make(1.0, 1.0));
    for (int trial = 0; trial < 10; ++trial) {
        auto ch = random_cp_channel(rng);
        auto tensor = propagator_tensor(ch, basis, 52);
        auto tr = tensor.trace_matrix();
        // inputs well inside the truncation: leakage above n_max is
        // negligible for them and the column sums recover the delta
        for (int nu = 0; nu <= 3; ++nu)
            for (int mu = 0; mu <= 3; ++mu) {
                const double expect = nu == mu ? 1.0 : 0.0;
                CHECK(std::abs(tr(nu, mu) - expect) < 1e-6);
            }
    }
}

TEST_CASE("contraction matches the direct Gaussian route") {
    auto basis = FockBasis::make(12, SystemOscillator::make(1.0, 1.0));
    const double t = 0.83;
    GaussianChannel ch;
    ch.drift << 0.6 * std::cos(t), 0.5 * std::sin(t), -0.55 * std::sin(t),
        0.62 * std::cos(t);
    ch.noise << 0.41, 0.05, 0.05, 0.37;
    REQUIRE(ch.cp_margin() > -1e-12);

    Eigen::Matrix2d c0;
    c0 << 0.8, 0.1, 0.1, 0.7;
    auto rho0 = gaussian_to_fock(system_state(c0), basis);
    REQUIRE(rho0.leakage() < 1e-8);

    auto tensor = propagator_tensor(ch, basis);
    auto via_tensor = evolve_density_matrix(rho0, tensor);

    Eigen::Matrix2d c1 = ch.drift * c0 * ch.drift.transpose() + ch.noise;
    auto direct = gaussian_to_fock(system_state(c1), basis);
    CHECK((via_tensor.elements - direct.elements).cwiseAbs().maxCoeff() <
          1e-6);
}

TEST_CASE("secular contraction: diagonal inputs and coherence-only inputs") {
    auto basis = FockBasis::make(8, SystemOscillator::make(1.0, 1.0));
    GaussianChannel ch;
    ch.drift << 0.7, 0.1, -0.12, 0.68;
    ch.noise << 0.3, 0.02, 0.02, 0.28;
    auto tensor = propagator_tensor(ch, basis);

    FockDensityMatrix diag;
    diag.elements = Eigen::MatrixXcd::Zero(9, 9);
    diag.elements(0, 0) = 0.3;
    diag.elements(1, 1) = 0.45;
    diag.elements(2, 2) = 0.25;
    auto full = evolve_density_matrix(diag, tensor);
    auto sec = secular_evolve(diag, tensor);
    CHECK((full.elements - sec.elements).cwiseAbs().maxCoeff() < 1e-14);

    FockDensityMatrix coh;
    coh.elements = Eigen::MatrixXcd::Zero(9, 9);
    coh.elements(0, 2) = 0.2;
    coh.elements(2, 0) = 0.2;
    auto full_c = evolve_density_matrix(coh, tensor);
    auto sec_c = secular_evolve(coh, tensor);
    CHECK(sec_c.elements.cwiseAbs().maxCoeff() < 1e-14);
    CHECK(full_c.elements.diagonal().cwiseAbs().maxCoeff() > 1e-3);
}

TEST_CASE("dimension mismatches are rejected") {
    auto basis = FockBasis::make(5, SystemOscillator::make(1.0, 1.0));
    auto tensor = propagator_tensor(GaussianChannel{}, basis);
    FockDensityMatrix wrong;
    wrong.elements = Eigen::MatrixXcd::Zero(4, 4);
    CHECK_THROWS_AS(evolve_density_matrix(wrong, tensor),
                    std::invalid_argument);
    CHECK_THROWS_AS(secular_evolve(wrong, tensor), std::invalid_argument);
}

TEST_CASE("doubling the quadrature order is a no-op at convergence") {
    auto basis = FockBasis::make(10, SystemOscillator::make(1.0, 1.0));
    std::mt19937 rng(7);
    auto ch = random_cp_channel(rng);
    QuadratureReport report;
    auto tensor = propagator_tensor(ch, basis, 0, &report);
    CHECK(report.doubling_delta < 1e-9);
    auto doubled = propagator_tensor_fixed_order(ch, basis, 2 * report.order);
    double worst = 0.0;
    for (std::size_t i = 0; i < tensor.entries.size(); ++i)
        worst = std::max(worst,
                         std::abs(tensor.entries[i] - doubled.entries[i]));
    CHECK(worst < 1e-9);
}

TEST_CASE("eigenvalue clipping floors roundoff negatives only") {
    FockDensityMatrix rho;
    rho.elements = Eigen::MatrixXcd::Zero(3, 3);
    rho.elements(0, 0) = 1.0 + 5e-10;
    rho.elements(1, 1) = -5e-10;
    CHECK(rho.clip_small_negatives() > 0.0);
    CHECK(rho.min_eigenvalue() > -1e-15);

    FockDensityMatrix bad;
    bad.elements = Eigen::MatrixXcd::Zero(3, 3);
    bad.elements(0, 0) = 1.1;
    bad.elements(1, 1) = -0.1;
    CHECK_THROWS_AS(bad.clip_small_negatives(), std::runtime_error);
}
