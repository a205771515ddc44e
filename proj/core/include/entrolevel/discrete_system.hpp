#pragma once

#include <array>
#include <memory>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "entrolevel/interface_calculus.hpp"
#include "entrolevel/spline_spaces.hpp"

namespace entrolevel {

enum class Scheme { entropy_stable, standard_midpoint };

struct SchemeParams {
  double dt = 1e-3;
  DimensionlessGroups groups;
  Scheme scheme = Scheme::entropy_stable;
  double dc_constant = 0.0;
  double dc_eps = 1e-8;
  bool supg = true;
};

// Coefficients of (u, p, phi, v) in DofLayout order at one time level.
struct State {
  Eigen::VectorXd coeffs;
  double t = 0.0;
  long step = 0;

  double* block(const DofLayout& L, Block b, int comp = 0) { return coeffs.data() + L.begin(b, comp); }
  const double* block(const DofLayout& L, Block b, int comp = 0) const { return coeffs.data() + L.begin(b, comp); }
};

State zero_state(const DofLayout& L);

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;

// SUPG time scale from the midpoint velocity and element metric.
double tau_supg(const std::array<double, 3>& u_mid, const ElementMetrics& m, double dt);

// Residual and Jacobian of one time step in the reduced unknowns:
// free coefficients followed by the pressure multiplier when present.
class Assembler {
 public:
  Assembler(const SplineSystem& sys, const DofLayout& layout, const InterfaceModel& model);
  ~Assembler();
  Assembler(const Assembler&) = delete;
  Assembler& operator=(const Assembler&) = delete;

  const SplineSystem& system() const { return sys_; }
  const DofLayout& layout() const { return layout_; }
  const InterfaceModel& model() const { return model_; }
  int n_reduced() const { return layout_.n_reduced(); }

  Eigen::VectorXd residual(const State& prev, const State& next, double multiplier, const SchemeParams& prm) const;
  // Fills J (fixed pattern) and optionally the residual in one sweep.
  void jacobian(const State& prev, const State& next, double multiplier, const SchemeParams& prm, SparseMatrix& J,
                Eigen::VectorXd* residual = nullptr) const;
  const SparseMatrix& pattern() const { return pattern_; }

  double theta_dc(int e, const State& prev, const State& next, const SchemeParams& prm) const;

  // Reduced vector <-> full coefficients; constrained entries are zero.
  Eigen::VectorXd reduce(const Eigen::VectorXd& full) const;
  void add_reduced(State& s, double& multiplier, const Eigen::VectorXd& delta, double scale) const;

  // Auxiliary variable consistent with a given (u, phi) at one time level.
  Eigen::VectorXd consistent_aux(const State& s, const SchemeParams& prm) const;

  // Global coefficient indices of the local functions of an element.
  const std::vector<int>& element_dofs(int e) const { return elem_dofs_[e]; }

 private:
  struct Impl;
  const SplineSystem& sys_;
  DofLayout layout_;
  InterfaceModel model_;
  SparseMatrix pattern_;
  std::vector<std::vector<int>> elem_dofs_;
  std::vector<std::vector<int>> elem_scatter_; // CSC value positions per element, row-major
  std::vector<int> mult_row_pos_;              // position of (multiplier, p_i)
  std::vector<int> mult_col_pos_;              // position of (p_i, multiplier)
  std::unique_ptr<Impl> impl_;

  void build_pattern();
  template <int D, bool WithJac>
  void assemble(const State& prev, const State& next, double multiplier, const SchemeParams& prm,
                Eigen::VectorXd* r, SparseMatrix* J) const;
};

// Both sides of the alternative surface-tension identity for a level set phi
// and a vector test field w: lhs = (delta_G kappa nu, w),
// rhs = (delta_G P_T, grad w) + (eps_n^2 delta' nu, w).
struct AltIdentity {
  double lhs = 0.0;
  double rhs = 0.0;
  double defect() const { return std::abs(lhs - rhs); }
};
AltIdentity surface_tension_alt_identity_check(const SplineSystem& sys, const Eigen::VectorXd& phi,
                                               const std::array<Eigen::VectorXd, 3>& w, double eps, double eps_norm,
                                               int quad_points = 0);

int assembly_threads();

}  // namespace entrolevel
