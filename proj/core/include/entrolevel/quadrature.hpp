#pragma once

#include <vector>

namespace entrolevel {

struct QuadratureRule1D {
  std::vector<double> points;   // on [-1, 1]
  std::vector<double> weights;  // sum to 2
};

// n-point Gauss-Legendre rule, exact for degree 2n-1.
QuadratureRule1D gauss_legendre(int n);

}  // namespace entrolevel
