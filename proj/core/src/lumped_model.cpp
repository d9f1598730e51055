#include "dtwin/lumped_model.hpp"

#include <cmath>
#include <string>

#include "dtwin/error.hpp"

namespace dtwin {

void LumpedParameters::validate() const {
  if (!(mass > 0.0) || !std::isfinite(mass)) throw InvalidInput("lumped mass must be positive");
  if (!(stiffness > 0.0) || !std::isfinite(stiffness)) {
    throw InvalidInput("lumped stiffness must be positive");
  }
  damping.validate();
}

DamageScenario::DamageScenario(std::string label, std::optional<std::size_t> spring,
                               double severity)
    : label_(std::move(label)), spring_(spring), severity_(severity) {}

DamageScenario DamageScenario::healthy() { return DamageScenario("healthy", std::nullopt, 0.0); }

DamageScenario DamageScenario::damaged(std::size_t spring_index, double severity) {
  if (spring_index < 1 || spring_index > kDamageableSprings) {
    throw InvalidInput("damaged spring must be in 1.." + std::to_string(kDamageableSprings));
  }
  if (!std::isfinite(severity) || !(severity > 0.0)) {
    throw InvalidInput("damage severity must be positive for a damaged scenario");
  }
  if (severity >= 1.0) throw InvalidInput("total damage not representable");
  return DamageScenario("d" + std::to_string(spring_index), spring_index, severity);
}

DamageScenario DamageScenario::from_label(std::string_view label, double severity) {
  if (label == "healthy") return healthy();
  if (label.size() == 2 && label[0] == 'd' && label[1] >= '1' && label[1] <= '9') {
    return damaged(static_cast<std::size_t>(label[1] - '0'), severity);
  }
  throw InvalidInput("unknown scenario label '" + std::string(label) + "'");
}

void UncertaintyConfig::validate() const {
  if (!(bound_fraction >= 0.0) || !(bound_fraction < 1.0)) {
    throw InvalidInput("uncertainty bound fraction must be in [0, 1)");
  }
  for (double v : {area, elastic_modulus, density, length}) {
    if (!(v > 0.0) || !std::isfinite(v)) throw InvalidInput("nominal bar values must be positive");
  }
}

SpringStiffnesses apply_damage(const DamageScenario& scenario, double base_k) {
  return apply_damage(scenario, base_k, scenario.severity());
}

SpringStiffnesses apply_damage(const DamageScenario& scenario, double base_k, double severity) {
  if (!(base_k > 0.0)) throw InvalidInput("base stiffness must be positive");
  SpringStiffnesses k;
  k.fill(base_k);
  if (scenario.is_healthy()) return k;
  if (!(severity >= 0.0)) throw InvalidInput("damage severity must be non-negative");
  if (severity >= 1.0) throw InvalidInput("total damage not representable");
  k[*scenario.spring_index() - 1] = (1.0 - severity) * base_k;
  return k;
}

SystemMatrices build_lumped(const LumpedParameters& params, const SpringStiffnesses& springs) {
  params.validate();
  constexpr auto n = static_cast<Eigen::Index>(kLumpedDofs);
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double ki = springs[static_cast<std::size_t>(i)];
    if (!(ki > 0.0)) throw InvalidInput("spring stiffnesses must be positive");
    // spring i+1 (1-based) joins mass i-1 and mass i; spring 1 is grounded
    k(i, i) += ki;
    if (i > 0) {
      k(i - 1, i - 1) += ki;
      k(i - 1, i) -= ki;
      k(i, i - 1) -= ki;
    }
  }
  return SystemMatrices(params.mass * Eigen::MatrixXd::Identity(n, n), k);
}

LumpedParameters realize_stochastic(const LumpedParameters& params, const UncertaintyConfig& uc,
                                    RandomStream& stream) {
  uc.validate();
  const double lo = 1.0 - uc.bound_fraction;
  const double hi = 1.0 + uc.bound_fraction;
  const double area = stream.uniform(lo * uc.area, hi * uc.area) / uc.area;
  const double modulus =
      stream.uniform(lo * uc.elastic_modulus, hi * uc.elastic_modulus) / uc.elastic_modulus;
  const double density = stream.uniform(lo * uc.density, hi * uc.density) / uc.density;
  const double length = stream.uniform(lo * uc.length, hi * uc.length) / uc.length;

  LumpedParameters out = params;
  out.mass = params.mass * (density * area * length);
  out.stiffness = params.stiffness * (modulus * area / length);
  return out;
}

}  // namespace dtwin
