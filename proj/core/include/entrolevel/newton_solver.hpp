#pragma once

#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "entrolevel/discrete_system.hpp"

namespace entrolevel {

struct SingularMatrixError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Sparse LU with the symbolic analysis reused while the pattern is fixed.
// Every solve is checked against the stored matrix and refined once when its
// relative residual exceeds 1e-12; a factorization whose
// residual stays above 1e-6 after one refinement is replaced by the Eigen
// SparseLU backend for the rest of the process.
class LinearSolver {
 public:
  LinearSolver();
  ~LinearSolver();
  LinearSolver(LinearSolver&&) noexcept;
  LinearSolver& operator=(LinearSolver&&) noexcept;

  // throws SingularMatrixError naming the offending column when known
  void factorize(const SparseMatrix& A);
  Eigen::VectorXd solve(const Eigen::VectorXd& b);
  bool factorized() const;
  // compiled primary backend
  static const char* backend();
  // backend of the current factorization
  const char* active_backend() const;
  int factorizations() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// One-shot solve of A x = b.
Eigen::VectorXd linear_solve(const SparseMatrix& A, const Eigen::VectorXd& b);

struct NewtonConfig {
  double rel_tol = 1e-8;
  double abs_tol = 1e-11;
  int max_iter = 20;
  bool line_search = true;
  int max_cuts = 8;
  double cut_factor = 0.5;
  // Keep the previous factorization while it contracts the residual by at least
  // reuse_contraction per update; otherwise refactor at the current iterate.
  bool reuse_jacobian = false;
  double reuse_contraction = 0.25;
  bool operator==(const NewtonConfig&) const = default;
};

struct BlockNorms {
  double velocity = 0.0;
  double pressure = 0.0;
  double levelset = 0.0;
  double aux = 0.0;
  double multiplier = 0.0;
};

struct SolveReport {
  int iterations = 0;
  bool converged = false;
  double initial_norm = 0.0;
  double final_norm = 0.0;
  BlockNorms final_blocks;
  std::vector<double> residual_history;  // norm after each iterate, starting with the guess
  std::vector<double> step_history;      // norm of each accepted update
  int line_search_cuts = 0;
  int line_search_activations = 0;
  int factorizations = 0;
  int rejected_reuse = 0;
  double multiplier = 0.0;
  std::string message;
};

BlockNorms block_norms(const Assembler& as, const Eigen::VectorXd& r);

// Solves the step residual for `next`, starting from its current contents.
SolveReport solve_step(const Assembler& as, const State& prev, State& next, double& multiplier,
                       const SchemeParams& prm, const NewtonConfig& cfg, LinearSolver& lin);

}  // namespace entrolevel
