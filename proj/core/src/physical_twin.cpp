#include "dtwin/physical_twin.hpp"

#include <algorithm>
#include <cmath>

#include "dtwin/error.hpp"
#include "dtwin/random.hpp"

namespace dtwin {
namespace {
constexpr std::uint64_t kMeasurementDomain = 0x6d65617375726500ULL;
}

void BarProperties::validate() const {
  for (double v : {density, elastic_modulus, area, length}) {
    if (!(v > 0.0) || !std::isfinite(v)) throw InvalidInput("bar properties must be positive");
  }
  if (element_count < 1) throw InvalidInput("bar needs at least one element");
  damping.validate();
}

double BarProperties::wave_speed() const { return std::sqrt(elastic_modulus / density); }

SystemMatrices assemble_bar(const BarProperties& props) {
  props.validate();
  const auto ne = static_cast<Eigen::Index>(props.element_count);
  const double le = props.length / static_cast<double>(props.element_count);
  const double me = props.density * props.area * le;
  const double ke = props.elastic_modulus * props.area / le;

  Eigen::Matrix2d m_el;
  m_el << 1.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 3.0;
  m_el *= me;
  Eigen::Matrix2d k_el;
  k_el << 1.0, -1.0, -1.0, 1.0;
  k_el *= ke;

  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(ne + 1, ne + 1);
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(ne + 1, ne + 1);
  for (Eigen::Index e = 0; e < ne; ++e) {
    m.block<2, 2>(e, e) += m_el;
    k.block<2, 2>(e, e) += k_el;
  }
  // node 0 is clamped
  return SystemMatrices(m.bottomRightCorner(ne, ne), k.bottomRightCorner(ne, ne));
}

Eigen::MatrixXd add_magnitude_noise(const FrfResult& frf, const MeasurementNoise& noise) {
  if (!(noise.sigma >= 0.0) || !std::isfinite(noise.sigma)) {
    throw InvalidInput("noise sigma must be non-negative");
  }
  const auto rows = static_cast<Eigen::Index>(frf.response.size());
  const Eigen::Index cols = rows == 0 ? 0 : frf.response.front().size();
  Eigen::MatrixXd out(rows, cols);
  RandomStream stream(derive_seed(noise.seed, kMeasurementDomain));
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index d = 0; d < cols; ++d) {
      const double clean = std::abs(frf.response[static_cast<std::size_t>(i)](d));
      out(i, d) = noise.sigma == 0.0
                      ? clean
                      : std::max(clean + stream.normal(0.0, noise.sigma), kMagnitudeFloor);
    }
  }
  return out;
}

NoisyFrf measure_frf(const BarProperties& props, const HarmonicLoad& load,
                     std::span<const double> frequencies_hz, const MeasurementNoise& noise) {
  const SystemMatrices sys = assemble_bar(props);
  NoisyFrf out{frf_solve(sys, props.damping, load, frequencies_hz), {}};
  out.noisy_magnitude = add_magnitude_noise(out.clean, noise);
  return out;
}

}  // namespace dtwin
