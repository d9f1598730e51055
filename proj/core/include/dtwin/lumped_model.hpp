#pragma once

// Six-dof spring-mass chain (fixed at spring 1, free after mass 6) with
// single-spring damage and parametric uncertainty.

#include <array>
#include <optional>
#include <string>
#include <string_view>

#include "dtwin/dynamics.hpp"
#include "dtwin/physical_twin.hpp"
#include "dtwin/random.hpp"

namespace dtwin {

inline constexpr std::size_t kLumpedDofs = 6;
/// Springs 1..5 can be damaged; spring 6 is never damaged.
inline constexpr std::size_t kDamageableSprings = 5;

struct LumpedParameters {
  double mass = 0.3925;      // kg
  double stiffness = 4.914e8;  // N/m
  RayleighDamping damping = kNominalDamping;

  void validate() const;
};

/// Damage class. "healthy" has no spring and zero severity; "d<i>" damages
/// spring i by severity in (0, 1).
class DamageScenario {
 public:
  static DamageScenario healthy();
  static DamageScenario damaged(std::size_t spring_index, double severity);
  /// Parses "healthy" or "d1".."d5" with the given severity.
  static DamageScenario from_label(std::string_view label, double severity);

  [[nodiscard]] const std::string& label() const { return label_; }
  [[nodiscard]] std::optional<std::size_t> spring_index() const { return spring_; }
  [[nodiscard]] double severity() const { return severity_; }
  [[nodiscard]] bool is_healthy() const { return !spring_.has_value(); }
  /// 0 for healthy, spring index otherwise. Used to key random substreams.
  [[nodiscard]] std::size_t class_key() const { return spring_.value_or(0); }

  bool operator==(const DamageScenario&) const = default;

 private:
  DamageScenario(std::string label, std::optional<std::size_t> spring, double severity);

  std::string label_;
  std::optional<std::size_t> spring_;
  double severity_ = 0.0;
};

using SpringStiffnesses = std::array<double, kLumpedDofs>;

/// Nominal physical quantities behind the lumped parameters; only ratios to
/// these nominals enter the stochastic model.
struct UncertaintyConfig {
  double bound_fraction = 0.05;
  double area = 4.0e-4;
  double elastic_modulus = 2.1e11;
  double density = 7850.0;
  double length = 1.0;

  void validate() const;
};

/// k_i = (1 - d) * base_k at the damaged spring. Severity >= 1 throws.
SpringStiffnesses apply_damage(const DamageScenario& scenario, double base_k);

/// Same as apply_damage with an explicit (possibly fluctuated) severity.
SpringStiffnesses apply_damage(const DamageScenario& scenario, double base_k, double severity);

/// K(i,i) = k_i + k_{i+1} (k_7 = 0), K(i,i+1) = -k_{i+1}; M = m I.
SystemMatrices build_lumped(const LumpedParameters& params, const SpringStiffnesses& springs);

/// Draws A, E, rho, L independently from U(nominal (1 - e), nominal (1 + e)),
/// in that order, and scales m by rho A L and k by E A / L relative to the
/// nominals. Damping is left unchanged.
LumpedParameters realize_stochastic(const LumpedParameters& params, const UncertaintyConfig& uc,
                                    RandomStream& stream);

}  // namespace dtwin
