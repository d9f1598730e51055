#include "dtwin/dynamics.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "dtwin/error.hpp"

namespace dtwin {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kSingularRcond = 1.0e-14;

bool is_symmetric(const Eigen::MatrixXd& a) {
  const double scale = a.cwiseAbs().maxCoeff();
  return (a - a.transpose()).cwiseAbs().maxCoeff() <= 1.0e-12 * scale;
}

[[noreturn]] void throw_singular(double frequency_hz) {
  std::ostringstream ss;
  ss << "singular at frequency " << frequency_hz << " Hz";
  throw NumericalError(ss.str());
}

Eigen::VectorXd load_vector(const HarmonicLoad& load, std::size_t n) {
  load.validate(n);
  Eigen::VectorXd f = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  f(static_cast<Eigen::Index>(load.dof_index - 1)) = load.magnitude;
  return f;
}

}  // namespace

SystemMatrices::SystemMatrices(Eigen::MatrixXd mass, Eigen::MatrixXd stiffness)
    : mass_(std::move(mass)), stiffness_(std::move(stiffness)) {
  if (mass_.rows() == 0 || mass_.rows() != mass_.cols() || stiffness_.rows() != mass_.rows() ||
      stiffness_.cols() != mass_.cols()) {
    throw InvalidInput("system matrices must be square and of equal size");
  }
  if (!mass_.allFinite() || !stiffness_.allFinite()) {
    throw InvalidInput("system matrices contain non-finite entries");
  }
  if (!is_symmetric(mass_)) throw InvalidInput("invalid mass matrix: not symmetric");
  if (!is_symmetric(stiffness_)) throw InvalidInput("stiffness matrix is not symmetric");
}

void RayleighDamping::validate() const {
  if (!(alpha0 >= 0.0) || !(beta0 >= 0.0) || !std::isfinite(alpha0) || !std::isfinite(beta0)) {
    throw InvalidInput("Rayleigh coefficients must be finite and non-negative");
  }
}

Eigen::MatrixXd RayleighDamping::matrix(const SystemMatrices& sys) const {
  return alpha0 * sys.mass() + beta0 * sys.stiffness();
}

double RayleighDamping::ratio_at(double omega) const {
  return alpha0 / (2.0 * omega) + beta0 * omega / 2.0;
}

void HarmonicLoad::validate(std::size_t dof_count) const {
  if (dof_index < 1 || dof_index > dof_count) {
    throw InvalidInput("load dof " + std::to_string(dof_index) + " outside 1.." +
                       std::to_string(dof_count));
  }
  if (!(magnitude > 0.0) || !std::isfinite(magnitude)) {
    throw InvalidInput("load magnitude must be positive");
  }
}

std::vector<double> FrfResult::magnitude(std::size_t dof_index) const {
  std::vector<double> out;
  out.reserve(response.size());
  for (const auto& u : response) {
    if (dof_index < 1 || dof_index > static_cast<std::size_t>(u.size())) {
      throw InvalidInput("dof index out of range");
    }
    out.push_back(std::abs(u(static_cast<Eigen::Index>(dof_index - 1))));
  }
  return out;
}

ModalData modal_analysis(const SystemMatrices& sys, const RayleighDamping& damping) {
  damping.validate();
  Eigen::LLT<Eigen::MatrixXd> mass_chol(sys.mass());
  if (mass_chol.info() != Eigen::Success) throw InvalidInput("invalid mass matrix");

  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> solver(
      sys.stiffness(), sys.mass(), Eigen::ComputeEigenvectors | Eigen::Ax_lBx);
  if (solver.info() != Eigen::Success) throw NumericalError("modal analysis failed");

  ModalData out;
  const auto& lambda = solver.eigenvalues();  // ascending
  out.mode_shapes = solver.eigenvectors();     // mass-normalised
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    if (!(lambda(i) > 0.0)) {
      throw NumericalError("modal analysis failed: non-positive eigenvalue (unrestrained system)");
    }
    const double omega = std::sqrt(lambda(i));
    out.eigenvalues.push_back(lambda(i));
    out.natural_frequencies_hz.push_back(omega / kTwoPi);
    out.damping_ratios.push_back(damping.ratio_at(omega));
  }
  return out;
}

ComplexVector harmonic_response(const SystemMatrices& sys, const RayleighDamping& damping,
                                const HarmonicLoad& load, double frequency_hz) {
  if (!(frequency_hz >= 0.0) || !std::isfinite(frequency_hz)) {
    throw InvalidInput("frequencies must be finite and non-negative");
  }
  damping.validate();
  const auto n = sys.dof_count();
  const Eigen::VectorXcd f = load_vector(load, n).cast<std::complex<double>>();
  const double omega = kTwoPi * frequency_hz;

  Eigen::MatrixXcd dynamic_stiffness(n, n);
  dynamic_stiffness.real() = sys.stiffness() - omega * omega * sys.mass();
  dynamic_stiffness.imag() = omega * damping.matrix(sys);

  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(dynamic_stiffness);
  const double rcond = lu.rcond();
  if (!(rcond >= kSingularRcond)) throw_singular(frequency_hz);
  return lu.solve(f);
}

FrfResult frf_solve(const SystemMatrices& sys, const RayleighDamping& damping,
                    const HarmonicLoad& load, std::span<const double> frequencies_hz) {
  FrfResult out;
  out.frequencies_hz.assign(frequencies_hz.begin(), frequencies_hz.end());
  out.response.reserve(frequencies_hz.size());
  for (double f : frequencies_hz) out.response.push_back(harmonic_response(sys, damping, load, f));
  return out;
}

FrfResult frf_modal_superposition(const SystemMatrices& sys, const RayleighDamping& damping,
                                  const HarmonicLoad& load,
                                  std::span<const double> frequencies_hz) {
  const ModalData modes = modal_analysis(sys, damping);
  const Eigen::VectorXd f = load_vector(load, sys.dof_count());
  const Eigen::VectorXd modal_force = modes.mode_shapes.transpose() * f;

  FrfResult out;
  out.frequencies_hz.assign(frequencies_hz.begin(), frequencies_hz.end());
  out.response.reserve(frequencies_hz.size());
  for (double fhz : frequencies_hz) {
    if (!(fhz >= 0.0) || !std::isfinite(fhz)) {
      throw InvalidInput("frequencies must be finite and non-negative");
    }
    const double omega = kTwoPi * fhz;
    ComplexVector u = ComplexVector::Zero(static_cast<Eigen::Index>(sys.dof_count()));
    for (std::size_t r = 0; r < modes.eigenvalues.size(); ++r) {
      const double lambda = modes.eigenvalues[r];
      // 2 zeta_r omega_r = alpha0 + beta0 omega_r^2
      const std::complex<double> denom(lambda - omega * omega,
                                        omega * (damping.alpha0 + damping.beta0 * lambda));
      if (std::abs(denom) <= kSingularRcond * lambda) throw_singular(fhz);
      const auto r_idx = static_cast<Eigen::Index>(r);
      u += (modal_force(r_idx) / denom) * modes.mode_shapes.col(r_idx).cast<std::complex<double>>();
    }
    out.response.push_back(std::move(u));
  }
  return out;
}

std::vector<double> linear_grid(double fmin, double fmax, std::size_t n) {
  if (n < 2 || !(fmin < fmax)) throw InvalidInput("grid needs fmin < fmax and at least 2 points");
  std::vector<double> out(n);
  const double step = (fmax - fmin) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) out[i] = fmin + step * static_cast<double>(i);
  out.back() = fmax;
  return out;
}

}  // namespace dtwin
