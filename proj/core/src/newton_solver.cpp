#include "entrolevel/newton_solver.hpp"

#include <atomic>
#include <cmath>
#include <iostream>
#include <limits>
#include <sstream>

#include <Eigen/SparseLU>
#ifdef ENTROLEVEL_HAVE_UMFPACK
#include <Eigen/UmfPackSupport>
#endif

namespace entrolevel {

namespace {

[[noreturn]] void report_singular(const SparseMatrix& A, const std::string& what) {
  Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu;
  lu.compute(A);
  std::ostringstream os;
  os << "singular matrix (" << what << ")";
  if (lu.info() != Eigen::Success) os << ": " << lu.lastErrorMessage();
  throw SingularMatrixError(os.str());
}

}  // namespace

namespace {

using FallbackLU = Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>>;

std::atomic<bool> g_primary_untrusted{false};

void warn_once(const std::string& msg) {
  static std::atomic<bool> warned{false};
  if (!warned.exchange(true)) std::cerr << "warning: " << msg << "\n";
}

}  // namespace

struct LinearSolver::Impl {
#ifdef ENTROLEVEL_HAVE_UMFPACK
  Eigen::UmfPackLU<SparseMatrix> primary;
  bool analyzed = false;
  Eigen::Index rows = -1;
  Eigen::Index nnz = -1;
#endif
  std::unique_ptr<FallbackLU> fallback;
  bool use_fallback = false;
  bool ready = false;
  int count = 0;
  SparseMatrix A;

  void factor_fallback() {
    fallback = std::make_unique<FallbackLU>();
    fallback->compute(A);
    if (fallback->info() != Eigen::Success) {
      ready = false;
      report_singular(A, "factorization failed");
    }
    use_fallback = true;
  }

  Eigen::VectorXd apply(const Eigen::VectorXd& b) const {
#ifdef ENTROLEVEL_HAVE_UMFPACK
    if (!use_fallback) return primary.solve(b);
#endif
    return fallback->solve(b);
  }
};

LinearSolver::LinearSolver() : impl_(std::make_unique<Impl>()) {}
LinearSolver::~LinearSolver() = default;
LinearSolver::LinearSolver(LinearSolver&&) noexcept = default;
LinearSolver& LinearSolver::operator=(LinearSolver&&) noexcept = default;

const char* LinearSolver::backend() {
#ifdef ENTROLEVEL_HAVE_UMFPACK
  return "umfpack";
#else
  return "eigen-sparselu";
#endif
}

const char* LinearSolver::active_backend() const { return impl_->use_fallback ? "eigen-sparselu" : backend(); }
bool LinearSolver::factorized() const { return impl_->ready; }
int LinearSolver::factorizations() const { return impl_->count; }

void LinearSolver::factorize(const SparseMatrix& A) {
  if (A.rows() != A.cols()) throw std::invalid_argument("matrix must be square");
  Impl& im = *impl_;
  im.ready = false;
  im.A = A;
  ++im.count;
#ifdef ENTROLEVEL_HAVE_UMFPACK
  if (!g_primary_untrusted) {
    if (!im.analyzed || im.rows != A.rows() || im.nnz != A.nonZeros()) {
      im.primary.analyzePattern(im.A);
      im.analyzed = true;
      im.rows = A.rows();
      im.nnz = A.nonZeros();
    }
    im.primary.factorize(im.A);
    if (im.primary.info() == Eigen::Success) {
      im.use_fallback = false;
      im.ready = true;
      return;
    }
    im.analyzed = false;
  }
#endif
  // A singular report from the primary backend is confirmed independently.
  im.factor_fallback();
  im.ready = true;
#ifdef ENTROLEVEL_HAVE_UMFPACK
  if (!g_primary_untrusted) {
    g_primary_untrusted = true;
    warn_once("umfpack reported a singular matrix that SparseLU factors; using SparseLU from now on");
  }
#endif
}

Eigen::VectorXd LinearSolver::solve(const Eigen::VectorXd& b) {
  Impl& im = *impl_;
  if (!im.ready) throw std::logic_error("solve without a factorization");
  constexpr double kRefineTol = 1e-12;
  constexpr double kResidualTol = 1e-6;
  const double bn = b.norm();
  if (bn == 0.0) return Eigen::VectorXd::Zero(b.size());
  Eigen::VectorXd x = im.apply(b);
  auto rel = [&](const Eigen::VectorXd& y) {
    if (!y.allFinite()) return std::numeric_limits<double>::infinity();
    return (im.A * y - b).norm() / bn;
  };
  double res = rel(x);
  if (res > kRefineTol && std::isfinite(res)) {
    x += im.apply(b - im.A * x);
    res = rel(x);
  }
  if (res > kResidualTol && !im.use_fallback) {
    g_primary_untrusted = true;
    std::ostringstream os;
    os << "direct solve residual " << res << " from " << backend() << "; switching to SparseLU";
    warn_once(os.str());
    im.factor_fallback();
    x = im.apply(b);
    res = rel(x);
  }
  if (!std::isfinite(res)) throw SingularMatrixError("singular matrix: solve produced non-finite values");
  return x;
}

Eigen::VectorXd linear_solve(const SparseMatrix& A, const Eigen::VectorXd& b) {
  LinearSolver s;
  s.factorize(A);
  return s.solve(b);
}

BlockNorms block_norms(const Assembler& as, const Eigen::VectorXd& r) {
  const DofLayout& L = as.layout();
  BlockNorms n;
  double sq[4] = {0, 0, 0, 0};
  for (int g = 0; g < L.n_total(); ++g) {
    const int k = L.reduced[g];
    if (k < 0) continue;
    int b;
    if (g < L.begin(Block::pressure))
      b = 0;
    else if (g < L.begin(Block::levelset))
      b = 1;
    else if (g < L.begin(Block::aux))
      b = 2;
    else
      b = 3;
    sq[b] += r[k] * r[k];
  }
  n.velocity = std::sqrt(sq[0]);
  n.pressure = std::sqrt(sq[1]);
  n.levelset = std::sqrt(sq[2]);
  n.aux = std::sqrt(sq[3]);
  if (L.mean_pressure_constraint) n.multiplier = std::abs(r[L.multiplier_index()]);
  return n;
}

SolveReport solve_step(const Assembler& as, const State& prev, State& next, double& multiplier,
                       const SchemeParams& prm, const NewtonConfig& cfg, LinearSolver& lin) {
  SolveReport rep;
  SparseMatrix J;
  Eigen::VectorXd r;
  bool fresh = false;  // factorization belongs to the current iterate
  auto refactor = [&](bool with_residual) {
    as.jacobian(prev, next, multiplier, prm, J, with_residual ? &r : nullptr);
    lin.factorize(J);
    ++rep.factorizations;
    fresh = true;
  };
  if (cfg.reuse_jacobian && lin.factorized()) {
    r = as.residual(prev, next, multiplier, prm);
  } else {
    refactor(true);
  }
  double rn = r.norm();
  rep.initial_norm = rn;
  rep.residual_history.push_back(rn);
  const double target = std::max(cfg.rel_tol * rn, cfg.abs_tol);
  for (int it = 0;;) {
    if (!std::isfinite(rn)) {
      rep.message = "non-finite residual";
      break;
    }
    if (rn <= target) {
      rep.converged = true;
      break;
    }
    if (it >= cfg.max_iter) {
      rep.message = "iteration limit reached";
      break;
    }
    const Eigen::VectorXd delta = lin.solve(-r);
    double alpha = 1.0;
    State trial = next;
    double mtrial = multiplier;
    as.add_reduced(trial, mtrial, delta, alpha);
    Eigen::VectorXd rt = as.residual(prev, trial, mtrial, prm);
    double tn = rt.norm();
    if (!fresh && !(tn <= cfg.reuse_contraction * rn)) {
      ++rep.rejected_reuse;
      refactor(false);
      continue;
    }
    if (cfg.line_search && fresh) {
      int cuts = 0;
      while (!(tn <= (1.0 - 1e-4 * alpha) * rn) && cuts < cfg.max_cuts) {
        alpha *= cfg.cut_factor;
        trial = next;
        mtrial = multiplier;
        as.add_reduced(trial, mtrial, delta, alpha);
        rt = as.residual(prev, trial, mtrial, prm);
        tn = rt.norm();
        ++cuts;
      }
      if (cuts > 0) {
        ++rep.line_search_activations;
        rep.line_search_cuts += cuts;
      }
    }
    next = std::move(trial);
    multiplier = mtrial;
    r = std::move(rt);
    rn = tn;
    rep.step_history.push_back(alpha * delta.norm());
    rep.residual_history.push_back(rn);
    rep.iterations = ++it;
    fresh = false;
    if (!cfg.reuse_jacobian && rn > target && it < cfg.max_iter && std::isfinite(rn)) refactor(false);
  }
  rep.final_norm = rn;
  rep.final_blocks = block_norms(as, r);
  rep.multiplier = multiplier;
  return rep;
}

}  // namespace entrolevel
