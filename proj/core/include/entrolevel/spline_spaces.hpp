#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "entrolevel/quadrature.hpp"

namespace entrolevel {

struct GeometryError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-decreasing knot sequence of a univariate B-spline basis.
struct KnotVector {
  int degree = 0;
  std::vector<double> knots;

  // Open knot vector with n uniform elements on [lo, hi].
  static KnotVector open_uniform(int degree, int n_elements, double lo = -1.0, double hi = 1.0);

  // throws std::invalid_argument on unsorted knots or excessive multiplicity
  void validate() const;
  int n_basis() const { return static_cast<int>(knots.size()) - degree - 1; }
};

class BSplineBasis1D {
 public:
  explicit BSplineBasis1D(KnotVector kv);

  int degree() const { return kv_.degree; }
  int size() const { return kv_.n_basis(); }
  int n_elements() const { return static_cast<int>(span_.size()); }
  double element_lo(int e) const { return kv_.knots[span_[e]]; }
  double element_hi(int e) const { return kv_.knots[span_[e] + 1]; }
  // Active functions on element e are first_active(e) .. first_active(e) + degree.
  int first_active(int e) const { return span_[e] - kv_.degree; }
  int find_element(double xi) const;
  const KnotVector& knots() const { return kv_; }

  // out[k * (p + 1) + a] = k-th derivative of active function a, k <= n_der.
  void eval(int e, double xi, int n_der, double* out) const;

 private:
  KnotVector kv_;
  std::vector<int> span_;
};

// Tensor product of univariate bases; direction 0 varies fastest.
class TensorSpace {
 public:
  TensorSpace() = default;
  explicit TensorSpace(std::vector<BSplineBasis1D> dirs);

  int dim() const { return static_cast<int>(dirs_.size()); }
  const BSplineBasis1D& dir(int d) const { return dirs_[d]; }
  int count(int d) const { return dirs_[d].size(); }
  int size() const { return size_; }
  int n_local() const { return n_local_; }
  int degree(int d) const { return dirs_[d].degree(); }
  int flat(const std::array<int, 3>& idx) const;
  std::array<int, 3> multi(int flat) const;

 private:
  std::vector<BSplineBasis1D> dirs_;
  int size_ = 0;
  int n_local_ = 0;
};

enum class SpaceId { velocity_x = 0, velocity_y = 1, velocity_z = 2, pressure = 3, levelset = 4, aux = 5 };

inline SpaceId velocity_space(int k) { return static_cast<SpaceId>(k); }

// Axis-aligned physical box.
struct Box {
  std::array<double, 3> lo{0.0, 0.0, 0.0};
  std::array<double, 3> hi{1.0, 1.0, 1.0};
  bool operator==(const Box&) const = default;
};

// Values and physical derivatives of the active functions at one point.
struct BasisEval {
  int dim = 0;
  std::vector<int> global;     // global function index within the space
  std::vector<double> value;   // n
  std::vector<double> grad;    // n * dim
  std::vector<double> hess;    // n * dim * dim
  int size() const { return static_cast<int>(global.size()); }
};

struct ElementMetrics {
  int dim = 0;
  std::array<double, 9> jacobian{};       // physical over parametric, row major
  std::array<double, 9> metric{};         // J^-T J^-1 on the patch
  std::array<double, 9> element_metric{}; // same for the element reference cell
  double det_jacobian = 0.0;
  double h_param = 0.0;  // parametric diagonal
  double h = 0.0;        // physical diagonal
};

// Patch of spline spaces on a box with open uniform knots.
// Velocity component k is cubic in direction k, all other spaces quadratic.
class SplineSystem {
 public:
  SplineSystem(int dim, std::array<int, 3> n_elements, Box box, int quad_points = 0);

  int dim() const { return dim_; }
  const Box& box() const { return box_; }
  int n_elements() const { return n_elem_total_; }
  int n_elements(int d) const { return n_elem_[d]; }
  std::array<int, 3> element_multi(int e) const;
  int element_flat(const std::array<int, 3>& m) const;

  const TensorSpace& space(SpaceId id) const;
  const TensorSpace& scalar_space() const { return scalar_; }
  const TensorSpace& velocity(int k) const { return vel_[k]; }

  // throws std::out_of_range
  void check_element(int e) const;
  ElementMetrics mesh_metrics(int e) const;
  BasisEval eval_basis(SpaceId id, int e, const std::array<double, 3>& xi) const;

  std::array<double, 3> to_physical(const std::array<double, 3>& xi) const;
  std::array<double, 3> to_parametric(const std::array<double, 3>& x) const;
  double scale(int d) const { return 0.5 * (box_.hi[d] - box_.lo[d]); }
  double min_element_diagonal() const;

  int quad_points() const { return nq_; }
  const QuadratureRule1D& quad_rule() const { return rule_; }
  // Parametric coordinates of a reference point in element e along direction d.
  double element_point(int e_d, int d, double ref) const;

 private:
  int dim_;
  std::array<int, 3> n_elem_{1, 1, 1};
  int n_elem_total_ = 1;
  Box box_;
  TensorSpace scalar_;
  std::array<TensorSpace, 3> vel_;
  int nq_;
  QuadratureRule1D rule_;
};

// Physical-space integration over every element with given points per direction.
struct ElementQuadrature {
  std::vector<std::array<double, 3>> xi;  // parametric points
  std::vector<double> weight;             // physical weights
};
ElementQuadrature element_quadrature(const SplineSystem& sys, int e, int points_per_dir);

// L2 projection of a scalar function of physical coordinates onto a space.
Eigen::VectorXd project_l2(const SplineSystem& sys, SpaceId id,
                           const std::function<double(const std::array<double, 3>&)>& fn, int points_per_dir = 0);

// Spline field evaluation from coefficients on a space.
struct FieldValue {
  double value = 0.0;
  std::array<double, 3> grad{};
  std::array<double, 9> hess{};
};
FieldValue eval_field(const SplineSystem& sys, SpaceId id, const double* coeffs, int e,
                      const std::array<double, 3>& xi);

enum class FaceCondition { natural, no_penetration, periodic };

// Face order: x-, x+, y-, y+, z-, z+.
struct BoundarySpec {
  std::array<FaceCondition, 6> faces{FaceCondition::natural, FaceCondition::natural, FaceCondition::natural,
                                     FaceCondition::natural, FaceCondition::natural, FaceCondition::natural};
  static BoundarySpec no_penetration(int dim);
};

enum class Block { velocity = 0, pressure = 1, levelset = 2, aux = 3 };

// Global coefficient ordering: velocity components, pressure, level set, auxiliary.
struct DofLayout {
  int dim = 0;
  std::array<int, 3> mesh{1, 1, 1};
  std::vector<int> offset;  // dim + 4 entries, last is the total
  std::vector<int> constrained;
  std::vector<int> reduced;  // global -> reduced index, -1 when constrained
  int n_free = 0;
  bool mean_pressure_constraint = false;
  std::vector<double> pressure_weights;  // integral of each pressure function

  int n_total() const { return offset.back(); }
  int n_reduced() const { return n_free + (mean_pressure_constraint ? 1 : 0); }
  int multiplier_index() const { return n_free; }
  // Block slot: 0..dim-1 velocity components, then pressure, level set, aux.
  int slot(Block b, int comp = 0) const { return b == Block::velocity ? comp : dim + static_cast<int>(b) - 1; }
  int begin(Block b, int comp = 0) const { return offset[slot(b, comp)]; }
  int size(Block b, int comp = 0) const { return offset[slot(b, comp) + 1] - offset[slot(b, comp)]; }
  std::uint64_t hash() const;
};

// throws std::invalid_argument for unsupported face conditions
DofLayout build_dof_layout(const SplineSystem& sys, const BoundarySpec& bc);

}  // namespace entrolevel
