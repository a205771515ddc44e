#include "entrolevel/spline_spaces.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

namespace entrolevel {

namespace {
constexpr int kMaxDegree = 8;
}

KnotVector KnotVector::open_uniform(int degree, int n_elements, double lo, double hi) {
  if (degree < 0) throw std::invalid_argument("degree must be non-negative");
  if (n_elements < 1) throw std::invalid_argument("need at least one element");
  if (!(hi > lo)) throw std::invalid_argument("knot interval must be non-empty");
  KnotVector kv;
  kv.degree = degree;
  for (int i = 0; i <= degree; ++i) kv.knots.push_back(lo);
  for (int i = 1; i < n_elements; ++i) kv.knots.push_back(lo + (hi - lo) * i / n_elements);
  for (int i = 0; i <= degree; ++i) kv.knots.push_back(hi);
  return kv;
}

void KnotVector::validate() const {
  if (degree < 0 || degree > kMaxDegree) throw std::invalid_argument("unsupported spline degree");
  if (static_cast<int>(knots.size()) < 2 * (degree + 1)) throw std::invalid_argument("too few knots for degree");
  for (std::size_t i = 1; i < knots.size(); ++i)
    if (knots[i] < knots[i - 1]) throw std::invalid_argument("knots must be non-decreasing");
  if (!(knots.back() > knots.front())) throw std::invalid_argument("knot vector spans an empty interval");
  // Interior multiplicity above the degree breaks continuity.
  std::size_t i = 0;
  while (i < knots.size()) {
    std::size_t j = i;
    while (j < knots.size() && knots[j] == knots[i]) ++j;
    const int mult = static_cast<int>(j - i);
    const bool end = (i == 0) || (j == knots.size());
    if (mult > degree + 1 || (!end && mult > degree))
      throw std::invalid_argument("knot multiplicity exceeds degree");
    i = j;
  }
}

BSplineBasis1D::BSplineBasis1D(KnotVector kv) : kv_(std::move(kv)) {
  kv_.validate();
  const int p = kv_.degree;
  for (int i = p; i < kv_.n_basis(); ++i)
    if (kv_.knots[i] < kv_.knots[i + 1]) span_.push_back(i);
}

int BSplineBasis1D::find_element(double xi) const {
  const int n = n_elements();
  if (xi <= element_lo(0)) return 0;
  if (xi >= element_hi(n - 1)) return n - 1;
  int lo = 0, hi = n - 1;
  while (lo < hi) {
    const int mid = (lo + hi + 1) / 2;
    if (element_lo(mid) <= xi)
      lo = mid;
    else
      hi = mid - 1;
  }
  return lo;
}

void BSplineBasis1D::eval(int e, double u, int n_der, double* out) const {
  const int p = kv_.degree;
  const int i = span_[e];
  const auto& U = kv_.knots;
  const int n = std::min(n_der, p);
  double ndu[kMaxDegree + 1][kMaxDegree + 1];
  double left[kMaxDegree + 1], right[kMaxDegree + 1];
  double a[2][kMaxDegree + 1];
  ndu[0][0] = 1.0;
  for (int j = 1; j <= p; ++j) {
    left[j] = u - U[i + 1 - j];
    right[j] = U[i + j] - u;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      ndu[j][r] = right[r + 1] + left[j - r];
      const double temp = ndu[r][j - 1] / ndu[j][r];
      ndu[r][j] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    ndu[j][j] = saved;
  }
  for (int k = 0; k <= n_der; ++k)
    for (int j = 0; j <= p; ++j) out[k * (p + 1) + j] = 0.0;
  for (int j = 0; j <= p; ++j) out[j] = ndu[j][p];
  for (int r = 0; r <= p; ++r) {
    int s1 = 0, s2 = 1;
    a[0][0] = 1.0;
    for (int k = 1; k <= n; ++k) {
      double d = 0.0;
      const int rk = r - k, pk = p - k;
      if (r >= k) {
        a[s2][0] = a[s1][0] / ndu[pk + 1][rk];
        d = a[s2][0] * ndu[rk][pk];
      }
      const int j1 = rk >= -1 ? 1 : -rk;
      const int j2 = (r - 1 <= pk) ? k - 1 : p - r;
      for (int j = j1; j <= j2; ++j) {
        a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][rk + j];
        d += a[s2][j] * ndu[rk + j][pk];
      }
      if (r <= pk) {
        a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
        d += a[s2][k] * ndu[r][pk];
      }
      out[k * (p + 1) + r] = d;
      std::swap(s1, s2);
    }
  }
  double f = p;
  for (int k = 1; k <= n; ++k) {
    for (int j = 0; j <= p; ++j) out[k * (p + 1) + j] *= f;
    f *= (p - k);
  }
}

TensorSpace::TensorSpace(std::vector<BSplineBasis1D> dirs) : dirs_(std::move(dirs)) {
  size_ = 1;
  n_local_ = 1;
  for (const auto& b : dirs_) {
    size_ *= b.size();
    n_local_ *= b.degree() + 1;
  }
}

int TensorSpace::flat(const std::array<int, 3>& idx) const {
  int f = 0, stride = 1;
  for (int d = 0; d < dim(); ++d) {
    f += idx[d] * stride;
    stride *= dirs_[d].size();
  }
  return f;
}

std::array<int, 3> TensorSpace::multi(int f) const {
  std::array<int, 3> m{0, 0, 0};
  for (int d = 0; d < dim(); ++d) {
    m[d] = f % dirs_[d].size();
    f /= dirs_[d].size();
  }
  return m;
}

SplineSystem::SplineSystem(int dim, std::array<int, 3> n_elements, Box box, int quad_points)
    : dim_(dim), box_(box) {
  if (dim != 2 && dim != 3) throw std::invalid_argument("dimension must be 2 or 3");
  n_elem_total_ = 1;
  for (int d = 0; d < dim; ++d) {
    if (n_elements[d] < 1) throw std::invalid_argument("element count must be positive");
    if (!(box.hi[d] > box.lo[d]) || !std::isfinite(box.hi[d] - box.lo[d]))
      throw GeometryError("singular geometry map: box extent must be positive");
    n_elem_[d] = n_elements[d];
    n_elem_total_ *= n_elements[d];
  }
  std::vector<BSplineBasis1D> sdirs;
  for (int d = 0; d < dim; ++d) sdirs.emplace_back(KnotVector::open_uniform(2, n_elem_[d]));
  scalar_ = TensorSpace(sdirs);
  for (int k = 0; k < dim; ++k) {
    std::vector<BSplineBasis1D> vdirs;
    for (int d = 0; d < dim; ++d) vdirs.emplace_back(KnotVector::open_uniform(d == k ? 3 : 2, n_elem_[d]));
    vel_[k] = TensorSpace(vdirs);
  }
  nq_ = quad_points > 0 ? quad_points : 4;
  rule_ = gauss_legendre(nq_);
}

std::array<int, 3> SplineSystem::element_multi(int e) const {
  check_element(e);
  std::array<int, 3> m{0, 0, 0};
  for (int d = 0; d < dim_; ++d) {
    m[d] = e % n_elem_[d];
    e /= n_elem_[d];
  }
  return m;
}

int SplineSystem::element_flat(const std::array<int, 3>& m) const {
  int f = 0, stride = 1;
  for (int d = 0; d < dim_; ++d) {
    if (m[d] < 0 || m[d] >= n_elem_[d]) throw std::out_of_range("element index out of range");
    f += m[d] * stride;
    stride *= n_elem_[d];
  }
  return f;
}

const TensorSpace& SplineSystem::space(SpaceId id) const {
  const int k = static_cast<int>(id);
  if (k < 3) {
    if (k >= dim_) throw std::out_of_range("velocity component out of range");
    return vel_[k];
  }
  return scalar_;
}

void SplineSystem::check_element(int e) const {
  if (e < 0 || e >= n_elem_total_) throw std::out_of_range("element id out of range");
}

double SplineSystem::element_point(int e_d, int d, double ref) const {
  const auto& b = scalar_.dir(d);
  const double lo = b.element_lo(e_d), hi = b.element_hi(e_d);
  return lo + 0.5 * (ref + 1.0) * (hi - lo);
}

ElementMetrics SplineSystem::mesh_metrics(int e) const {
  const auto m = element_multi(e);
  ElementMetrics out;
  out.dim = dim_;
  out.det_jacobian = 1.0;
  double hq2 = 0.0, frob2 = 0.0;
  for (int d = 0; d < dim_; ++d) {
    const double s = scale(d);
    const double dxi = scalar_.dir(d).element_hi(m[d]) - scalar_.dir(d).element_lo(m[d]);
    out.jacobian[d * dim_ + d] = s;
    out.metric[d * dim_ + d] = 1.0 / (s * s);
    const double w = dxi * s;
    out.element_metric[d * dim_ + d] = 4.0 / (w * w);
    out.det_jacobian *= s;
    hq2 += dxi * dxi;
    frob2 += s * s;
  }
  out.h_param = std::sqrt(hq2);
  out.h = std::sqrt(hq2 / dim_ * frob2);
  return out;
}

double SplineSystem::min_element_diagonal() const {
  // Uniform knots: every element has the same shape.
  return mesh_metrics(0).h;
}

std::array<double, 3> SplineSystem::to_physical(const std::array<double, 3>& xi) const {
  std::array<double, 3> x{0.0, 0.0, 0.0};
  for (int d = 0; d < dim_; ++d) x[d] = box_.lo[d] + (xi[d] + 1.0) * scale(d);
  return x;
}

std::array<double, 3> SplineSystem::to_parametric(const std::array<double, 3>& x) const {
  std::array<double, 3> xi{0.0, 0.0, 0.0};
  for (int d = 0; d < dim_; ++d) xi[d] = (x[d] - box_.lo[d]) / scale(d) - 1.0;
  return xi;
}

BasisEval SplineSystem::eval_basis(SpaceId id, int e, const std::array<double, 3>& xi) const {
  const auto m = element_multi(e);
  const TensorSpace& sp = space(id);
  const int D = dim_;
  double tab[3][3 * (kMaxDegree + 1)];
  int np[3] = {1, 1, 1};
  for (int d = 0; d < D; ++d) {
    sp.dir(d).eval(m[d], xi[d], 2, tab[d]);
    np[d] = sp.degree(d) + 1;
    const double inv = 1.0 / scale(d);
    for (int a = 0; a < np[d]; ++a) {
      tab[d][np[d] + a] *= inv;
      tab[d][2 * np[d] + a] *= inv * inv;
    }
  }
  BasisEval out;
  out.dim = D;
  const int n = sp.n_local();
  out.global.resize(n);
  out.value.resize(n);
  out.grad.resize(n * D);
  out.hess.resize(n * D * D);
  int l = 0;
  for (int a2 = 0; a2 < (D == 3 ? np[2] : 1); ++a2)
    for (int a1 = 0; a1 < np[1]; ++a1)
      for (int a0 = 0; a0 < np[0]; ++a0, ++l) {
        const int a[3] = {a0, a1, a2};
        std::array<int, 3> g{0, 0, 0};
        for (int d = 0; d < D; ++d) g[d] = sp.dir(d).first_active(m[d]) + a[d];
        out.global[l] = sp.flat(g);
        // der[d][k]: k-th derivative factor along d
        double val = 1.0;
        for (int d = 0; d < D; ++d) val *= tab[d][a[d]];
        out.value[l] = val;
        for (int i = 0; i < D; ++i) {
          double gi = 1.0;
          for (int d = 0; d < D; ++d) gi *= tab[d][(d == i ? np[d] : 0) + a[d]];
          out.grad[l * D + i] = gi;
          for (int j = 0; j < D; ++j) {
            double hij = 1.0;
            for (int d = 0; d < D; ++d) {
              const int k = (d == i) + (d == j);
              hij *= tab[d][k * np[d] + a[d]];
            }
            out.hess[(l * D + i) * D + j] = hij;
          }
        }
      }
  return out;
}

ElementQuadrature element_quadrature(const SplineSystem& sys, int e, int nq) {
  const auto m = sys.element_multi(e);
  const QuadratureRule1D rule = nq == sys.quad_points() ? sys.quad_rule() : gauss_legendre(nq);
  const int D = sys.dim();
  double jac[3] = {1.0, 1.0, 1.0};
  for (int d = 0; d < D; ++d) {
    const auto& b = sys.scalar_space().dir(d);
    jac[d] = 0.5 * (b.element_hi(m[d]) - b.element_lo(m[d])) * sys.scale(d);
  }
  ElementQuadrature q;
  const int n2 = D == 3 ? nq : 1;
  for (int k = 0; k < n2; ++k)
    for (int j = 0; j < nq; ++j)
      for (int i = 0; i < nq; ++i) {
        const int idx[3] = {i, j, k};
        std::array<double, 3> xi{0.0, 0.0, 0.0};
        double w = 1.0;
        for (int d = 0; d < D; ++d) {
          xi[d] = sys.element_point(m[d], d, rule.points[idx[d]]);
          w *= rule.weights[idx[d]] * jac[d];
        }
        q.xi.push_back(xi);
        q.weight.push_back(w);
      }
  return q;
}

Eigen::VectorXd project_l2(const SplineSystem& sys, SpaceId id,
                           const std::function<double(const std::array<double, 3>&)>& fn, int nq) {
  if (nq <= 0) nq = sys.quad_points();
  const TensorSpace& sp = sys.space(id);
  const int n = sp.size();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(sys.n_elements()) * sp.n_local() * sp.n_local());
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  std::vector<double> mloc(sp.n_local() * sp.n_local());
  for (int e = 0; e < sys.n_elements(); ++e) {
    const auto q = element_quadrature(sys, e, nq);
    std::fill(mloc.begin(), mloc.end(), 0.0);
    std::vector<int> glob;
    for (std::size_t k = 0; k < q.xi.size(); ++k) {
      const BasisEval b = sys.eval_basis(id, e, q.xi[k]);
      if (glob.empty()) glob = b.global;
      const double f = fn(sys.to_physical(q.xi[k]));
      const int nl = b.size();
      for (int i = 0; i < nl; ++i) {
        rhs[b.global[i]] += q.weight[k] * f * b.value[i];
        for (int j = 0; j < nl; ++j) mloc[i * nl + j] += q.weight[k] * b.value[i] * b.value[j];
      }
    }
    const int nl = static_cast<int>(glob.size());
    for (int i = 0; i < nl; ++i)
      for (int j = 0; j < nl; ++j) trip.emplace_back(glob[i], glob[j], mloc[i * nl + j]);
  }
  Eigen::SparseMatrix<double> M(n, n);
  M.setFromTriplets(trip.begin(), trip.end());
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> chol(M);
  if (chol.info() != Eigen::Success) throw std::runtime_error("mass matrix factorisation failed");
  return chol.solve(rhs);
}

FieldValue eval_field(const SplineSystem& sys, SpaceId id, const double* c, int e, const std::array<double, 3>& xi) {
  const BasisEval b = sys.eval_basis(id, e, xi);
  const int D = sys.dim();
  FieldValue f;
  for (int l = 0; l < b.size(); ++l) {
    const double a = c[b.global[l]];
    f.value += a * b.value[l];
    for (int i = 0; i < D; ++i) {
      f.grad[i] += a * b.grad[l * D + i];
      for (int j = 0; j < D; ++j) f.hess[i * D + j] += a * b.hess[(l * D + i) * D + j];
    }
  }
  return f;
}

BoundarySpec BoundarySpec::no_penetration(int dim) {
  BoundarySpec bc;
  for (int f = 0; f < 2 * dim; ++f) bc.faces[f] = FaceCondition::no_penetration;
  return bc;
}

std::uint64_t DofLayout::hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](std::int64_t v) {
    for (int b = 0; b < 8; ++b) {
      h ^= static_cast<std::uint64_t>((v >> (8 * b)) & 0xff);
      h *= 1099511628211ULL;
    }
  };
  mix(dim);
  for (int d = 0; d < 3; ++d) mix(mesh[d]);
  for (int o : offset) mix(o);
  for (int c : constrained) mix(c);
  mix(mean_pressure_constraint ? 1 : 0);
  return h;
}

DofLayout build_dof_layout(const SplineSystem& sys, const BoundarySpec& bc) {
  const int D = sys.dim();
  DofLayout L;
  L.dim = D;
  for (int d = 0; d < D; ++d) L.mesh[d] = sys.n_elements(d);
  L.offset.assign(D + 4, 0);
  for (int k = 0; k < D; ++k) L.offset[k + 1] = L.offset[k] + sys.velocity(k).size();
  for (int b = 0; b < 3; ++b) L.offset[D + b + 1] = L.offset[D + b] + sys.scalar_space().size();

  bool all_closed = true;
  for (int f = 0; f < 2 * D; ++f) {
    if (bc.faces[f] == FaceCondition::periodic) throw std::invalid_argument("unsupported boundary condition: periodic");
    if (bc.faces[f] != FaceCondition::no_penetration) all_closed = false;
  }
  std::vector<char> is_con(L.n_total(), 0);
  for (int k = 0; k < D; ++k) {
    const TensorSpace& sp = sys.velocity(k);
    const bool lo = bc.faces[2 * k] == FaceCondition::no_penetration;
    const bool hi = bc.faces[2 * k + 1] == FaceCondition::no_penetration;
    for (int i = 0; i < sp.size(); ++i) {
      const int ik = sp.multi(i)[k];
      if ((lo && ik == 0) || (hi && ik == sp.count(k) - 1)) is_con[L.offset[k] + i] = 1;
    }
  }
  L.reduced.assign(L.n_total(), -1);
  for (int g = 0; g < L.n_total(); ++g) {
    if (is_con[g])
      L.constrained.push_back(g);
    else
      L.reduced[g] = L.n_free++;
  }
  L.mean_pressure_constraint = all_closed;
  L.pressure_weights.assign(sys.scalar_space().size(), 0.0);
  for (int e = 0; e < sys.n_elements(); ++e) {
    const auto q = element_quadrature(sys, e, sys.quad_points());
    for (std::size_t k = 0; k < q.xi.size(); ++k) {
      const BasisEval b = sys.eval_basis(SpaceId::pressure, e, q.xi[k]);
      for (int l = 0; l < b.size(); ++l) L.pressure_weights[b.global[l]] += q.weight[k] * b.value[l];
    }
  }
  return L;
}

}  // namespace entrolevel
