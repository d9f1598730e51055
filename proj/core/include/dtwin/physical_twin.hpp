#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dtwin/dynamics.hpp"

namespace dtwin {

/// Nominal Rayleigh coefficients used for both the bar and the lumped chain.
inline constexpr RayleighDamping kNominalDamping{1.0e3, 3.0e-7};

/// Prismatic fixed-free bar vibrating axially.
struct BarProperties {
  double density = 7850.0;         // kg/m^3
  double elastic_modulus = 2.1e11;  // Pa
  double area = 4.0e-4;            // m^2
  double length = 1.0;             // m
  std::size_t element_count = 40;
  RayleighDamping damping = kNominalDamping;

  void validate() const;
  [[nodiscard]] double wave_speed() const;
};

struct MeasurementNoise {
  double sigma = 0.0;  // m
  std::uint64_t seed = 0;
};

/// Clean response plus noisy magnitudes; noisy(i, d) is frequency point i at
/// 0-based dof d.
struct NoisyFrf {
  FrfResult clean;
  Eigen::MatrixXd noisy_magnitude;
};

inline constexpr double kMagnitudeFloor = 1.0e-12;

/// Two-node linear elements with consistent mass; the clamped node at x = 0
/// is removed, so the result has element_count free dofs (dof 1 next to the
/// clamp, dof element_count at the free end).
SystemMatrices assemble_bar(const BarProperties& props);

/// |u| plus independent N(0, sigma) per frequency point and dof, floored at
/// kMagnitudeFloor. Draw order: frequency-major, dof-minor. sigma = 0 returns
/// the clean magnitudes unchanged.
Eigen::MatrixXd add_magnitude_noise(const FrfResult& frf, const MeasurementNoise& noise);

NoisyFrf measure_frf(const BarProperties& props, const HarmonicLoad& load,
                     std::span<const double> frequencies_hz, const MeasurementNoise& noise);

}  // namespace dtwin
