#include "entrolevel/interface_calculus.hpp"

#include <string>

namespace entrolevel {

void InterfaceModel::validate() const {
  if (!(eps > 0.0) || !std::isfinite(eps)) throw std::invalid_argument("interface width must be positive");
  if (!(eps_norm >= 0.0)) throw std::invalid_argument("norm regulariser must be non-negative");
  if (!(rho1 > 0.0) || !(rho2 > 0.0)) throw std::invalid_argument("densities must be positive");
  // Zero viscosity is admitted for inviscid benchmarks.
  if (!(mu1 >= 0.0) || !(mu2 >= 0.0)) throw std::invalid_argument("viscosities must be non-negative");
}

void DimensionlessGroups::validate() const {
  if (!(reynolds > 0.0)) throw std::invalid_argument("Reynolds number must be positive");
  if (!(weber > 0.0)) throw std::invalid_argument("Weber number must be positive");
  if (!(inv_froude_sq >= 0.0) || !std::isfinite(inv_froude_sq))
    throw std::invalid_argument("inverse squared Froude number must be finite and non-negative");
}

DimensionlessGroups DimensionlessGroups::from_physical(double sigma, double gravity) {
  if (sigma < 0.0) throw std::invalid_argument("surface tension must be non-negative");
  if (gravity < 0.0) throw std::invalid_argument("gravity must be non-negative");
  DimensionlessGroups g;
  g.reynolds = 1.0;
  g.weber = sigma > 0.0 ? 1.0 / sigma : std::numeric_limits<double>::infinity();
  g.inv_froude_sq = gravity;
  return g;
}

}  // namespace entrolevel
