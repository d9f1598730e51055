#pragma once

// Linear structural dynamics kernel shared by the physical twin and the
// lumped computational model: modal analysis, Rayleigh damping and harmonic
// frequency-response solves.

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace dtwin {

using ComplexVector = Eigen::VectorXcd;

/// Mass and stiffness of a discrete linear system with n degrees of freedom.
/// Construction validates shape and symmetry; positive definiteness of the
/// mass is checked where it matters (modal analysis).
class SystemMatrices {
 public:
  SystemMatrices(Eigen::MatrixXd mass, Eigen::MatrixXd stiffness);

  [[nodiscard]] std::size_t dof_count() const { return static_cast<std::size_t>(mass_.rows()); }
  [[nodiscard]] const Eigen::MatrixXd& mass() const { return mass_; }
  [[nodiscard]] const Eigen::MatrixXd& stiffness() const { return stiffness_; }

 private:
  Eigen::MatrixXd mass_;
  Eigen::MatrixXd stiffness_;
};

/// C = alpha0 * M + beta0 * K.
struct RayleighDamping {
  double alpha0 = 0.0;  // 1/s
  double beta0 = 0.0;   // s

  void validate() const;
  [[nodiscard]] Eigen::MatrixXd matrix(const SystemMatrices& sys) const;
  /// zeta(omega) = alpha0 / (2 omega) + beta0 * omega / 2
  [[nodiscard]] double ratio_at(double omega) const;
};

struct ModalData {
  std::vector<double> natural_frequencies_hz;  // ascending
  std::vector<double> damping_ratios;
  /// Mass-normalised mode shapes, one column per mode.
  Eigen::MatrixXd mode_shapes;
  std::vector<double> eigenvalues;  // omega^2
};

/// Point harmonic force. dof_index is 1-based.
struct HarmonicLoad {
  std::size_t dof_index = 1;
  double magnitude = 1.0;  // N

  void validate(std::size_t dof_count) const;
};

struct FrfResult {
  std::vector<double> frequencies_hz;
  std::vector<ComplexVector> response;  // one displacement vector per frequency (m)

  /// |u| at a 1-based dof for every frequency point.
  [[nodiscard]] std::vector<double> magnitude(std::size_t dof_index) const;
};

ModalData modal_analysis(const SystemMatrices& sys, const RayleighDamping& damping);

/// Solves (K - w^2 M + j w C) u = f at a single frequency.
ComplexVector harmonic_response(const SystemMatrices& sys, const RayleighDamping& damping,
                                const HarmonicLoad& load, double frequency_hz);

/// Direct dense solve at every frequency point.
FrfResult frf_solve(const SystemMatrices& sys, const RayleighDamping& damping,
                    const HarmonicLoad& load, std::span<const double> frequencies_hz);

/// Same contract as frf_solve, computed by summation over mass-normalised
/// modes. Valid for proportional damping only; kept as a cross-check.
FrfResult frf_modal_superposition(const SystemMatrices& sys, const RayleighDamping& damping,
                                  const HarmonicLoad& load,
                                  std::span<const double> frequencies_hz);

/// n evenly spaced points from fmin to fmax inclusive.
std::vector<double> linear_grid(double fmin, double fmax, std::size_t n);

}  // namespace dtwin
