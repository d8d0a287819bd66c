#pragma once

namespace qbm {

// SI values (2019 redefinition; hbar rounded to CODATA).
namespace constants {
inline constexpr double hbar_si = 1.054571817e-34;      // J s
inline constexpr double k_boltzmann_si = 1.380649e-23;  // J/K, exact
}  // namespace constants

// Internally everything runs in natural units hbar = m = omega0 = 1.
// A UnitSystem records the SI scale of the system oscillator so that
// reports can quote conversion factors.
struct UnitSystem {
    double omega0_si = 0.0;  // rad/s; 0 means "dimensionless run"

    double time_si(double t_natural) const {
        return omega0_si > 0.0 ? t_natural / omega0_si : t_natural;
    }
    double beta_from_temperature_si(double temperature_kelvin) const {
        // Returns hbar*omega0/(kB T), the dimensionless inverse temperature.
        return constants::hbar_si * omega0_si /
               (constants::k_boltzmann_si * temperature_kelvin);
    }
};

}  // namespace qbm
