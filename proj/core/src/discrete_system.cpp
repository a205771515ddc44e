#include "entrolevel/discrete_system.hpp"

#include <algorithm>
#include <cstdlib>
#include <functional>
#include <thread>

#include <Eigen/SparseCholesky>

namespace entrolevel {

namespace {

constexpr int pow3(int k) { return k == 0 ? 1 : 3 * pow3(k - 1); }

// Local function counts and block offsets of one element.
template <int D>
struct Sz {
  static constexpr int NV = 4 * pow3(D - 1);
  static constexpr int NS = pow3(D);
  static constexpr int N = D * NV + 3 * NS;
  static constexpr int OP = D * NV;
  static constexpr int OF = OP + NS;
  static constexpr int OV = OF + NS;
  static constexpr int slot_of(int a) { return a < OP ? a / NV : D + (a - OP) / NS; }
};

template <int D>
struct QpData {
  double w = 0.0;
  double y = 0.0;
  std::array<double, Sz<D>::N> val;
  std::array<std::array<double, D>, Sz<D>::N> grad;
  std::array<std::array<double, D * D>, Sz<D>::N> hess;
};

template <class S, int D>
struct Fields {
  std::array<S, D> u;
  std::array<std::array<S, D>, D> gu;                 // gu[i][j] = d_j u_i
  std::array<std::array<std::array<S, D>, D>, D> hu;  // hu[i][j][k] = d_j d_k u_i
  S p;
  std::array<S, D> gp;
  S phi;
  std::array<S, D> gphi;
  std::array<std::array<S, D>, D> hphi;
  S v;
  std::array<S, D> gv;
};

inline void acc(double& o, double c, double b, int) { o += c * b; }
template <int N>
inline void acc(Dual<N>& o, double c, double b, int i) {
  o.v += c * b;
  o.d[i] += b;
}

template <class S>
inline void zero(S& x) {
  x = S(0.0);
}
template <class S, std::size_t M>
inline void zero(std::array<S, M>& a) {
  for (auto& x : a) zero(x);
}

template <class S, int D>
void eval_fields(const QpData<D>& q, const double* c, bool hess_u, bool hess_phi, Fields<S, D>& f) {
  using Z = Sz<D>;
  zero(f.u);
  zero(f.gu);
  if (hess_u) zero(f.hu);
  zero(f.p);
  zero(f.gp);
  zero(f.phi);
  zero(f.gphi);
  if (hess_phi) zero(f.hphi);
  zero(f.v);
  zero(f.gv);
  for (int k = 0; k < D; ++k) {
    for (int a = 0; a < Z::NV; ++a) {
      const int i = k * Z::NV + a;
      const double ca = c[i];
      acc(f.u[k], ca, q.val[i], i);
      for (int j = 0; j < D; ++j) acc(f.gu[k][j], ca, q.grad[i][j], i);
      if (hess_u)
        for (int j = 0; j < D; ++j)
          for (int l = 0; l < D; ++l) acc(f.hu[k][j][l], ca, q.hess[i][j * D + l], i);
    }
  }
  for (int a = 0; a < Z::NS; ++a) {
    const int ip = Z::OP + a, iphi = Z::OF + a, iv = Z::OV + a;
    acc(f.p, c[ip], q.val[ip], ip);
    acc(f.phi, c[iphi], q.val[iphi], iphi);
    acc(f.v, c[iv], q.val[iv], iv);
    for (int j = 0; j < D; ++j) {
      acc(f.gp[j], c[ip], q.grad[ip][j], ip);
      acc(f.gphi[j], c[iphi], q.grad[iphi][j], iphi);
      acc(f.gv[j], c[iv], q.grad[iv][j], iv);
    }
    if (hess_phi)
      for (int j = 0; j < D; ++j)
        for (int l = 0; l < D; ++l) acc(f.hphi[j][l], c[iphi], q.hess[iphi][j * D + l], iphi);
  }
}

template <class S, int D>
struct Mid {
  std::array<S, D> u;
  std::array<std::array<S, D>, D> gu;
  std::array<std::array<std::array<S, D>, D>, D> hu;
  S phi;
  std::array<S, D> gphi;
  std::array<std::array<S, D>, D> hphi;
};

template <class S, int D>
void midpoint(const Fields<double, D>& a, const Fields<S, D>& b, bool hess_u, bool hess_phi, Mid<S, D>& m) {
  for (int i = 0; i < D; ++i) {
    m.u[i] = 0.5 * (b.u[i] + a.u[i]);
    m.gphi[i] = 0.5 * (b.gphi[i] + a.gphi[i]);
    for (int j = 0; j < D; ++j) {
      m.gu[i][j] = 0.5 * (b.gu[i][j] + a.gu[i][j]);
      if (hess_phi) m.hphi[i][j] = 0.5 * (b.hphi[i][j] + a.hphi[i][j]);
      if (hess_u)
        for (int k = 0; k < D; ++k) m.hu[i][j][k] = 0.5 * (b.hu[i][j][k] + a.hu[i][j][k]);
    }
  }
  m.phi = 0.5 * (b.phi + a.phi);
}

struct ElementCtx {
  std::array<double, 3> gk{};  // diagonal element metric
  double h = 0.0;
};

template <class S, int D>
S tau_point(const std::array<S, D>& um, const ElementCtx& ec, double dt) {
  using std::sqrt;
  S s((2.0 / dt) * (2.0 / dt));
  for (int i = 0; i < D; ++i) s += ec.gk[i] * um[i] * um[i];
  return 1.0 / sqrt(s);
}

// Strong momentum residual at the midpoint with the CSF surface force.
template <class S, int D>
std::array<S, D> strong_momentum(const Fields<double, D>& fn, const Fields<S, D>& f1, const Mid<S, D>& m,
                                 const InterfaceModel& mod, const SchemeParams& prm) {
  const double dt = prm.dt;
  const double two_re = 2.0 * prm.groups.inv_re();
  const double we = prm.groups.inv_we();
  const double fr = prm.groups.inv_froude_sq;
  const S rho_m = density(m.phi, mod);
  const S drho_m = density_prime(m.phi, mod);
  const S mu_m = viscosity(m.phi, mod);
  const S dmu_m = mod.mu_jump() * heaviside_deriv(m.phi, mod.eps, 1);
  const double rho_n = density(fn.phi, mod);
  const S rho_1 = density(f1.phi, mod);
  S st(0.0);
  if (we > 0.0) {
    const auto nc = normal_curvature<S, D>(m.gphi, m.hphi, mod.eps_norm);
    st = we * dirac(m.phi, mod.eps) * nc.curvature;
  }
  std::array<S, D> R;
  for (int k = 0; k < D; ++k) {
    S r = (rho_1 * f1.u[k] - rho_n * fn.u[k]) * (1.0 / dt);
    for (int j = 0; j < D; ++j) {
      r += drho_m * m.gphi[j] * m.u[k] * m.u[j];
      r += rho_m * (m.gu[k][j] * m.u[j] + m.u[k] * m.gu[j][j]);
      const S ekj = 0.5 * (m.gu[k][j] + m.gu[j][k]);
      r -= two_re * (dmu_m * m.gphi[j] * ekj + mu_m * 0.5 * (m.hu[k][j][j] + m.hu[j][k][j]));
    }
    r += f1.gp[k];
    if (we > 0.0) r += st * m.gphi[k];
    if (k == D - 1) r += fr * rho_m;
    R[k] = r;
  }
  return R;
}

template <class S, int D>
struct Fluxes {
  std::array<S, D> f0;
  std::array<std::array<S, D>, D> F1;
  S g0;
  S s0;
  std::array<S, D> s1;
  S z0;
  std::array<S, D> z1;
};

template <class S, int D>
void point_fluxes(const Fields<double, D>& fn, const Fields<S, D>& f1, const Mid<S, D>& m, const S& theta,
                  bool with_dc, double y, const ElementCtx& ec, const InterfaceModel& mod, const SchemeParams& prm,
                  Fluxes<S, D>& out) {
  const double dt = prm.dt;
  const double inv_dt = 1.0 / dt;
  const double two_re = 2.0 * prm.groups.inv_re();
  const double we = prm.groups.inv_we();
  const double fr = prm.groups.inv_froude_sq;
  const bool entropy = prm.scheme == Scheme::entropy_stable;

  const S rho_m = density(m.phi, mod);
  const S mu_m = viscosity(m.phi, mod);
  const double rho_n = density(fn.phi, mod);
  const S rho_1 = density(f1.phi, mod);

  S r_i = (f1.phi - fn.phi) * inv_dt;
  for (int j = 0; j < D; ++j) r_i += m.u[j] * m.gphi[j];
  const S tau = prm.supg ? tau_point<S, D>(m.u, ec, dt) : S(0.0);
  const S tau_ri = tau * r_i;

  // interface force as a multiple of grad phi_mid
  S force(0.0);
  if (entropy) {
    S ke(0.0);
    for (int j = 0; j < D; ++j) ke += m.u[j] * m.u[j];
    force = -f1.v - rho_prime_mom(m.phi, mod) * (0.5 * ke - fr * y);
  } else if (we > 0.0) {
    const auto nc = normal_curvature<S, D>(m.gphi, m.hphi, mod.eps_norm);
    force = we * nc.curvature * dirac(m.phi, mod.eps);
  }

  for (int k = 0; k < D; ++k) {
    S f = (rho_1 * f1.u[k] - rho_n * fn.u[k]) * inv_dt;
    f += force * m.gphi[k];
    if (k == D - 1) f += fr * rho_m;
    if (entropy && prm.supg) f -= tau_ri * f1.gv[k];
    out.f0[k] = f;
    for (int j = 0; j < D; ++j) {
      S F = -rho_m * m.u[k] * m.u[j];
      if (k == j) F -= f1.p;
      F += two_re * mu_m * 0.5 * (m.gu[k][j] + m.gu[j][k]);
      if (with_dc) F += theta * m.gu[k][j];
      out.F1[k][j] = F;
    }
  }
  S div(0.0);
  for (int j = 0; j < D; ++j) div += m.gu[j][j];
  out.g0 = div;
  out.s0 = r_i;
  for (int j = 0; j < D; ++j) out.s1[j] = prm.supg ? tau_ri * m.u[j] : S(0.0);

  if (entropy) {
    S ud(0.0);
    for (int j = 0; j < D; ++j) ud += f1.u[j] * fn.u[j];
    const double nn = reg_norm(fn.gphi, mod.eps_norm);
    const S n1 = reg_norm(f1.gphi, mod.eps_norm);
    const S navg = 0.5 * (n1 + nn);
    S z = f1.v + rho_prime_aux(fn.phi, f1.phi, mod) * (0.5 * ud - fr * y);
    if (we > 0.0) z -= we * dirac_prime_aux(fn.phi, f1.phi, mod.eps) * navg;
    out.z0 = z;
    if (we > 0.0) {
      const S davg = 0.5 * (dirac(f1.phi, mod.eps) + dirac(fn.phi, mod.eps));
      const S c = -we * davg / navg;
      for (int j = 0; j < D; ++j) out.z1[j] = c * m.gphi[j];
    } else {
      for (int j = 0; j < D; ++j) out.z1[j] = S(0.0);
    }
  }
}

int env_threads() {
  if (const char* s = std::getenv("ENTROLEVEL_THREADS")) {
    const int n = std::atoi(s);
    if (n > 0) return n;
  }
  const unsigned hc = std::thread::hardware_concurrency();
  return hc > 0 ? static_cast<int>(hc) : 1;
}

void parallel_for(int n, int threads, const std::function<void(int, int)>& fn) {
  threads = std::max(1, std::min(threads, n));
  if (threads == 1) {
    for (int i = 0; i < n; ++i) fn(i, 0);
    return;
  }
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t)
    pool.emplace_back([&, t] {
      for (int i = t; i < n; i += threads) fn(i, t);
    });
  for (auto& th : pool) th.join();
}

}  // namespace

int assembly_threads() {
  static const int n = env_threads();
  return n;
}

State zero_state(const DofLayout& L) {
  State s;
  s.coeffs = Eigen::VectorXd::Zero(L.n_total());
  return s;
}

double tau_supg(const std::array<double, 3>& u, const ElementMetrics& m, double dt) {
  double s = (2.0 / dt) * (2.0 / dt);
  for (int i = 0; i < m.dim; ++i)
    for (int j = 0; j < m.dim; ++j) s += u[i] * m.element_metric[i * m.dim + j] * u[j];
  return 1.0 / std::sqrt(s);
}

struct Assembler::Impl {
  // tab[((kind * 3 + d) * ne_max + e_d) * nq + q] holds 3 rows of 4 values:
  // derivative order 0..2 of the active functions, physical scaling applied.
  std::vector<std::array<double, 12>> tab;
  int ne_max = 1;
  int nq = 4;
  std::vector<std::vector<int>> colors;
  std::vector<int> aux_diag_pos;
  mutable std::unique_ptr<Eigen::SimplicialLDLT<SparseMatrix>> mass;

  const std::array<double, 12>& t(int kind, int d, int e, int q) const {
    return tab[((kind * 3 + d) * ne_max + e) * nq + q];
  }
};

Assembler::Assembler(const SplineSystem& sys, const DofLayout& layout, const InterfaceModel& model)
    : sys_(sys), layout_(layout), model_(model), impl_(std::make_unique<Impl>()) {
  model_.validate();
  const int D = sys.dim();
  Impl& im = *impl_;
  im.nq = sys.quad_points();
  for (int d = 0; d < D; ++d) im.ne_max = std::max(im.ne_max, sys.n_elements(d));
  im.tab.assign(2 * 3 * im.ne_max * im.nq, {});
  const auto& rule = sys.quad_rule();
  for (int kind = 0; kind < 2; ++kind)
    for (int d = 0; d < D; ++d) {
      BSplineBasis1D b(KnotVector::open_uniform(kind == 0 ? 2 : 3, sys.n_elements(d)));
      const int np = b.degree() + 1;
      const double inv = 1.0 / sys.scale(d);
      for (int e = 0; e < sys.n_elements(d); ++e)
        for (int q = 0; q < im.nq; ++q) {
          double out[12];
          b.eval(e, sys.element_point(e, d, rule.points[q]), 2, out);
          auto& dst = im.tab[((kind * 3 + d) * im.ne_max + e) * im.nq + q];
          dst.fill(0.0);
          for (int a = 0; a < np; ++a) {
            dst[a] = out[a];
            dst[4 + a] = out[np + a] * inv;
            dst[8 + a] = out[2 * np + a] * inv * inv;
          }
        }
    }
  // Element local functions in kernel order.
  elem_dofs_.resize(sys.n_elements());
  for (int e = 0; e < sys.n_elements(); ++e) {
    const auto em = sys.element_multi(e);
    auto& dofs = elem_dofs_[e];
    for (int slot = 0; slot < D + 3; ++slot) {
      const TensorSpace& sp = slot < D ? sys.velocity(slot) : sys.scalar_space();
      int np[3] = {1, 1, 1};
      for (int d = 0; d < D; ++d) np[d] = sp.degree(d) + 1;
      for (int a2 = 0; a2 < np[2]; ++a2)
        for (int a1 = 0; a1 < np[1]; ++a1)
          for (int a0 = 0; a0 < np[0]; ++a0) {
            std::array<int, 3> g{0, 0, 0};
            const int a[3] = {a0, a1, a2};
            for (int d = 0; d < D; ++d) g[d] = sp.dir(d).first_active(em[d]) + a[d];
            dofs.push_back(layout_.offset[slot] + sp.flat(g));
          }
    }
  }
  // Colouring by element index modulo 4 keeps same-colour supports disjoint.
  const int ncol = D == 3 ? 64 : 16;
  im.colors.assign(ncol, {});
  for (int e = 0; e < sys.n_elements(); ++e) {
    const auto em = sys.element_multi(e);
    const int c = (em[0] % 4) + 4 * (em[1] % 4) + (D == 3 ? 16 * (em[2] % 4) : 0);
    im.colors[c].push_back(e);
  }
  build_pattern();
}

Assembler::~Assembler() = default;

void Assembler::build_pattern() {
  const int D = sys_.dim();
  const int nslot = D + 3;
  auto space_of = [&](int slot) -> const TensorSpace& { return slot < D ? sys_.velocity(slot) : sys_.scalar_space(); };
  auto coupled = [&](int rs, int cs) {
    if (rs < D) return true;
    if (cs < D) return true;
    if (rs == D) return false;
    if (rs == D + 1) return cs == D + 1;
    return cs == D + 1 || cs == D + 2;
  };
  std::vector<Eigen::Triplet<double, int>> trip;
  for (int cs = 0; cs < nslot; ++cs) {
    const TensorSpace& B = space_of(cs);
    for (int j = 0; j < B.size(); ++j) {
      const int rc = layout_.reduced[layout_.offset[cs] + j];
      if (rc < 0) continue;
      const auto jm = B.multi(j);
      int elo[3] = {0, 0, 0}, ehi[3] = {0, 0, 0};
      for (int d = 0; d < D; ++d) {
        elo[d] = std::max(0, jm[d] - B.degree(d));
        ehi[d] = std::min(sys_.n_elements(d) - 1, jm[d]);
      }
      for (int rs = 0; rs < nslot; ++rs) {
        if (!coupled(rs, cs)) continue;
        const TensorSpace& A = space_of(rs);
        int ilo[3] = {0, 0, 0}, ihi[3] = {0, 0, 0};
        for (int d = 0; d < D; ++d) {
          ilo[d] = elo[d];
          ihi[d] = ehi[d] + A.degree(d);
        }
        for (int i2 = ilo[2]; i2 <= ihi[2]; ++i2)
          for (int i1 = ilo[1]; i1 <= ihi[1]; ++i1)
            for (int i0 = ilo[0]; i0 <= ihi[0]; ++i0) {
              const int rr = layout_.reduced[layout_.offset[rs] + A.flat({i0, i1, i2})];
              if (rr >= 0) trip.emplace_back(rr, rc, 0.0);
            }
      }
    }
  }
  const int np = layout_.size(Block::pressure);
  const int p0 = layout_.begin(Block::pressure);
  if (layout_.mean_pressure_constraint) {
    const int m = layout_.multiplier_index();
    for (int i = 0; i < np; ++i) {
      const int r = layout_.reduced[p0 + i];
      trip.emplace_back(m, r, 0.0);
      trip.emplace_back(r, m, 0.0);
    }
  }
  const int n = layout_.n_reduced();
  pattern_.resize(n, n);
  pattern_.setFromTriplets(trip.begin(), trip.end());
  pattern_.makeCompressed();
  trip.clear();
  trip.shrink_to_fit();

  const int* outer = pattern_.outerIndexPtr();
  const int* inner = pattern_.innerIndexPtr();
  auto find = [&](int row, int col) -> int {
    const int* b = inner + outer[col];
    const int* e = inner + outer[col + 1];
    const int* it = std::lower_bound(b, e, row);
    if (it == e || *it != row) return -1;
    return static_cast<int>(it - inner);
  };
  // slot of each local function depends only on its position
  elem_scatter_.resize(sys_.n_elements());
  for (int e = 0; e < sys_.n_elements(); ++e) {
    const auto& dofs = elem_dofs_[e];
    const int nl = static_cast<int>(dofs.size());
    std::vector<int> slot(nl);
    for (int a = 0; a < nl; ++a) {
      int s = 0;
      while (dofs[a] >= layout_.offset[s + 1]) ++s;
      slot[a] = s;
    }
    auto& sc = elem_scatter_[e];
    sc.assign(static_cast<std::size_t>(nl) * nl, -1);
    for (int a = 0; a < nl; ++a) {
      const int ra = layout_.reduced[dofs[a]];
      if (ra < 0) continue;
      for (int b = 0; b < nl; ++b) {
        const int rb = layout_.reduced[dofs[b]];
        if (rb < 0 || !coupled(slot[a], slot[b])) continue;
        sc[static_cast<std::size_t>(a) * nl + b] = find(ra, rb);
      }
    }
  }
  if (layout_.mean_pressure_constraint) {
    const int m = layout_.multiplier_index();
    mult_row_pos_.resize(np);
    mult_col_pos_.resize(np);
    for (int i = 0; i < np; ++i) {
      const int r = layout_.reduced[p0 + i];
      mult_row_pos_[i] = find(m, r);
      mult_col_pos_[i] = find(r, m);
    }
  }
  const int nv = layout_.size(Block::aux);
  const int v0 = layout_.begin(Block::aux);
  impl_->aux_diag_pos.resize(nv);
  for (int i = 0; i < nv; ++i) {
    const int r = layout_.reduced[v0 + i];
    impl_->aux_diag_pos[i] = find(r, r);
  }
}

namespace {

template <int D>
void build_qp(const Assembler& as, int e,
              const std::function<const std::array<double, 12>&(int, int, int, int)>& tab, int nq,
              std::vector<QpData<D>>& qps) {
  const SplineSystem& sys = as.system();
  const auto em = sys.element_multi(e);
  const auto& rule = sys.quad_rule();
  double jac[3] = {1.0, 1.0, 1.0};
  for (int d = 0; d < D; ++d) {
    const auto& b = sys.scalar_space().dir(d);
    jac[d] = 0.5 * (b.element_hi(em[d]) - b.element_lo(em[d])) * sys.scale(d);
  }
  const int nqt = D == 3 ? nq * nq * nq : nq * nq;
  qps.resize(nqt);
  for (int qi = 0; qi < nqt; ++qi) {
    const int qd[3] = {qi % nq, (qi / nq) % nq, D == 3 ? qi / (nq * nq) : 0};
    QpData<D>& Q = qps[qi];
    Q.w = 1.0;
    for (int d = 0; d < D; ++d) Q.w *= rule.weights[qd[d]] * jac[d];
    const double xi_v = sys.element_point(em[D - 1], D - 1, rule.points[qd[D - 1]]);
    Q.y = sys.box().lo[D - 1] + (xi_v + 1.0) * sys.scale(D - 1);
    int l = 0;
    for (int slot = 0; slot < D + 3; ++slot) {
      const double* t1[3];
      int np[3] = {1, 1, 1};
      for (int d = 0; d < D; ++d) {
        const int kind = (slot < D && slot == d) ? 1 : 0;
        t1[d] = tab(kind, d, em[d], qd[d]).data();
        np[d] = kind == 1 ? 4 : 3;
      }
      for (int a2 = 0; a2 < (D == 3 ? np[2] : 1); ++a2)
        for (int a1 = 0; a1 < np[1]; ++a1)
          for (int a0 = 0; a0 < np[0]; ++a0, ++l) {
            const int a[3] = {a0, a1, a2};
            double v = 1.0;
            for (int d = 0; d < D; ++d) v *= t1[d][a[d]];
            Q.val[l] = v;
            for (int i = 0; i < D; ++i) {
              double g = 1.0;
              for (int d = 0; d < D; ++d) g *= t1[d][(d == i ? 4 : 0) + a[d]];
              Q.grad[l][i] = g;
              for (int j = i; j < D; ++j) {
                double h = 1.0;
                for (int d = 0; d < D; ++d) h *= t1[d][4 * ((d == i) + (d == j)) + a[d]];
                Q.hess[l][i * D + j] = h;
                Q.hess[l][j * D + i] = h;
              }
            }
          }
    }
  }
}

template <class S, int D>
S element_theta(const std::vector<QpData<D>>& qps, const double* cn, const double* c1, const ElementCtx& ec,
                const InterfaceModel& mod, const SchemeParams& prm) {
  using std::sqrt;
  Fields<double, D> fn;
  Fields<S, D> f1;
  Mid<S, D> m;
  S sr(0.0), sg(0.0);
  double sw = 0.0;
  for (const auto& q : qps) {
    eval_fields<double, D>(q, cn, true, true, fn);
    eval_fields<S, D>(q, c1, true, true, f1);
    midpoint<S, D>(fn, f1, true, true, m);
    const auto R = strong_momentum<S, D>(fn, f1, m, mod, prm);
    for (int k = 0; k < D; ++k) {
      sr += (q.w * R[k]) * R[k];
      for (int j = 0; j < D; ++j) sg += (q.w * m.gu[k][j]) * m.gu[k][j];
    }
    sw += q.w;
  }
  const double e2 = prm.dc_eps * prm.dc_eps;
  return prm.dc_constant * ec.h * sqrt(sr / sw + e2) / sqrt(sg / sw + e2);
}

}  // namespace

template <int D, bool WithJac>
void Assembler::assemble(const State& prev, const State& next, double multiplier, const SchemeParams& prm,
                         Eigen::VectorXd* r, SparseMatrix* J) const {
  using Z = Sz<D>;
  using S = std::conditional_t<WithJac, Dual<Z::N>, double>;
  constexpr int N = Z::N;
  const Impl& im = *impl_;
  const bool entropy = prm.scheme == Scheme::entropy_stable;
  const bool with_dc = prm.dc_constant > 0.0;
  const bool hess_phi = with_dc || (!entropy && prm.groups.inv_we() > 0.0);
  const bool hess_u = with_dc;
  auto tab = [&im](int kind, int d, int e, int q) -> const std::array<double, 12>& { return im.t(kind, d, e, q); };

  const int threads = assembly_threads();
  struct Scratch {
    std::vector<QpData<D>> qps;
    std::vector<S> res;
    Fields<double, D> fn;
    Fields<S, D> f1;
    Mid<S, D> m;
    Fluxes<S, D> fx;
  };
  std::vector<std::unique_ptr<Scratch>> scratch(threads);
  for (auto& s : scratch) {
    s = std::make_unique<Scratch>();
    s->res.resize(N);
  }
  double* Jv = J ? J->valuePtr() : nullptr;

  auto work = [&](int e, int tid) {
    Scratch& sc = *scratch[tid];
    build_qp<D>(*this, e, tab, im.nq, sc.qps);
    const auto& dofs = elem_dofs_[e];
    std::array<double, N> cn, c1;
    for (int a = 0; a < N; ++a) {
      cn[a] = prev.coeffs[dofs[a]];
      c1[a] = next.coeffs[dofs[a]];
    }
    const ElementMetrics em = sys_.mesh_metrics(e);
    ElementCtx ec;
    ec.h = em.h;
    for (int d = 0; d < D; ++d) ec.gk[d] = em.element_metric[d * D + d];
    S theta(0.0);
    if (with_dc) theta = element_theta<S, D>(sc.qps, cn.data(), c1.data(), ec, model_, prm);
    for (auto& x : sc.res) x = S(0.0);
    for (const auto& q : sc.qps) {
      eval_fields<double, D>(q, cn.data(), hess_u, hess_phi, sc.fn);
      eval_fields<S, D>(q, c1.data(), hess_u, hess_phi, sc.f1);
      midpoint<S, D>(sc.fn, sc.f1, hess_u, hess_phi, sc.m);
      point_fluxes<S, D>(sc.fn, sc.f1, sc.m, theta, with_dc, q.y, ec, model_, prm, sc.fx);
      auto& fx = sc.fx;
      for (int k = 0; k < D; ++k) {
        fx.f0[k] *= q.w;
        for (int j = 0; j < D; ++j) fx.F1[k][j] *= q.w;
      }
      fx.g0 *= q.w;
      fx.s0 *= q.w;
      for (int j = 0; j < D; ++j) fx.s1[j] *= q.w;
      if (entropy) {
        fx.z0 *= q.w;
        for (int j = 0; j < D; ++j) fx.z1[j] *= q.w;
      }
      for (int k = 0; k < D; ++k)
        for (int a = k * Z::NV; a < (k + 1) * Z::NV; ++a) {
          fma_into(sc.res[a], q.val[a], fx.f0[k]);
          for (int j = 0; j < D; ++j) fma_into(sc.res[a], q.grad[a][j], fx.F1[k][j]);
        }
      for (int a = Z::OP; a < Z::OF; ++a) fma_into(sc.res[a], q.val[a], fx.g0);
      for (int a = Z::OF; a < Z::OV; ++a) {
        fma_into(sc.res[a], q.val[a], fx.s0);
        for (int j = 0; j < D; ++j) fma_into(sc.res[a], q.grad[a][j], fx.s1[j]);
      }
      if (entropy)
        for (int a = Z::OV; a < N; ++a) {
          fma_into(sc.res[a], q.val[a], fx.z0);
          for (int j = 0; j < D; ++j) fma_into(sc.res[a], q.grad[a][j], fx.z1[j]);
        }
    }
    const int a_end = entropy ? N : Z::OV;
    for (int a = 0; a < a_end; ++a) {
      const int ra = layout_.reduced[dofs[a]];
      if (ra < 0) continue;
      if (r) (*r)[ra] += value_of(sc.res[a]);
      if constexpr (WithJac) {
        const int* pos = elem_scatter_[e].data() + static_cast<std::size_t>(a) * N;
        for (int b = 0; b < N; ++b)
          if (pos[b] >= 0) Jv[pos[b]] += sc.res[a].d[b];
      }
    }
  };

  for (const auto& color : im.colors) {
    if (color.empty()) continue;
    parallel_for(static_cast<int>(color.size()), threads,
                 [&](int i, int tid) { work(color[i], tid); });
  }

  // Pressure multiplier and constant rows.
  const int p0 = layout_.begin(Block::pressure);
  const int np = layout_.size(Block::pressure);
  if (layout_.mean_pressure_constraint) {
    double mean = 0.0;
    for (int i = 0; i < np; ++i) {
      const double w = layout_.pressure_weights[i];
      mean += w * next.coeffs[p0 + i];
      if (r) (*r)[layout_.reduced[p0 + i]] += multiplier * w;
      if (J) {
        Jv[mult_row_pos_[i]] += w;
        Jv[mult_col_pos_[i]] += w;
      }
    }
    if (r) (*r)[layout_.multiplier_index()] += mean;
  }
  if (!entropy) {
    const int v0 = layout_.begin(Block::aux);
    const int nv = layout_.size(Block::aux);
    for (int i = 0; i < nv; ++i) {
      if (r) (*r)[layout_.reduced[v0 + i]] += next.coeffs[v0 + i];
      if (J) Jv[impl_->aux_diag_pos[i]] += 1.0;
    }
  }
}

Eigen::VectorXd Assembler::residual(const State& prev, const State& next, double multiplier,
                                    const SchemeParams& prm) const {
  Eigen::VectorXd r = Eigen::VectorXd::Zero(n_reduced());
  if (sys_.dim() == 2)
    assemble<2, false>(prev, next, multiplier, prm, &r, nullptr);
  else
    assemble<3, false>(prev, next, multiplier, prm, &r, nullptr);
  return r;
}

void Assembler::jacobian(const State& prev, const State& next, double multiplier, const SchemeParams& prm,
                         SparseMatrix& J, Eigen::VectorXd* r) const {
  if (J.nonZeros() != pattern_.nonZeros() || J.rows() != pattern_.rows()) J = pattern_;
  std::fill(J.valuePtr(), J.valuePtr() + J.nonZeros(), 0.0);
  if (r) *r = Eigen::VectorXd::Zero(n_reduced());
  if (sys_.dim() == 2)
    assemble<2, true>(prev, next, multiplier, prm, r, &J);
  else
    assemble<3, true>(prev, next, multiplier, prm, r, &J);
}

double Assembler::theta_dc(int e, const State& prev, const State& next, const SchemeParams& prm) const {
  sys_.check_element(e);
  if (!(prm.dc_constant > 0.0)) return 0.0;
  const Impl& im = *impl_;
  auto tab = [&im](int kind, int d, int el, int q) -> const std::array<double, 12>& { return im.t(kind, d, el, q); };
  const ElementMetrics em = sys_.mesh_metrics(e);
  ElementCtx ec;
  ec.h = em.h;
  for (int d = 0; d < sys_.dim(); ++d) ec.gk[d] = em.element_metric[d * sys_.dim() + d];
  const auto& dofs = elem_dofs_[e];
  std::vector<double> cn(dofs.size()), c1(dofs.size());
  for (std::size_t a = 0; a < dofs.size(); ++a) {
    cn[a] = prev.coeffs[dofs[a]];
    c1[a] = next.coeffs[dofs[a]];
  }
  if (sys_.dim() == 2) {
    std::vector<QpData<2>> qps;
    build_qp<2>(*this, e, tab, im.nq, qps);
    return element_theta<double, 2>(qps, cn.data(), c1.data(), ec, model_, prm);
  }
  std::vector<QpData<3>> qps;
  build_qp<3>(*this, e, tab, im.nq, qps);
  return element_theta<double, 3>(qps, cn.data(), c1.data(), ec, model_, prm);
}

Eigen::VectorXd Assembler::reduce(const Eigen::VectorXd& full) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n_reduced());
  for (int g = 0; g < layout_.n_total(); ++g)
    if (layout_.reduced[g] >= 0) out[layout_.reduced[g]] = full[g];
  return out;
}

void Assembler::add_reduced(State& s, double& multiplier, const Eigen::VectorXd& delta, double scale) const {
  for (int g = 0; g < layout_.n_total(); ++g)
    if (layout_.reduced[g] >= 0) s.coeffs[g] += scale * delta[layout_.reduced[g]];
  if (layout_.mean_pressure_constraint) multiplier += scale * delta[layout_.multiplier_index()];
}

Eigen::VectorXd Assembler::consistent_aux(const State& s, const SchemeParams& prm) const {
  const int v0 = layout_.begin(Block::aux);
  const int nv = layout_.size(Block::aux);
  SchemeParams p = prm;
  p.scheme = Scheme::entropy_stable;
  p.dc_constant = 0.0;
  State z = s;
  z.coeffs.segment(v0, nv).setZero();
  const Eigen::VectorXd r = residual(z, z, 0.0, p);
  Eigen::VectorXd rv(nv);
  for (int i = 0; i < nv; ++i) rv[i] = r[layout_.reduced[v0 + i]];
  if (!impl_->mass) {
    const TensorSpace& sp = sys_.scalar_space();
    std::vector<Eigen::Triplet<double, int>> trip;
    for (int e = 0; e < sys_.n_elements(); ++e) {
      const auto q = element_quadrature(sys_, e, sys_.quad_points());
      for (std::size_t k = 0; k < q.xi.size(); ++k) {
        const BasisEval b = sys_.eval_basis(SpaceId::aux, e, q.xi[k]);
        for (int i = 0; i < b.size(); ++i)
          for (int j = 0; j < b.size(); ++j)
            trip.emplace_back(b.global[i], b.global[j], q.weight[k] * b.value[i] * b.value[j]);
      }
    }
    SparseMatrix M(sp.size(), sp.size());
    M.setFromTriplets(trip.begin(), trip.end());
    impl_->mass = std::make_unique<Eigen::SimplicialLDLT<SparseMatrix>>(M);
  }
  return -impl_->mass->solve(rv);
}

AltIdentity surface_tension_alt_identity_check(const SplineSystem& sys, const Eigen::VectorXd& phi,
                                               const std::array<Eigen::VectorXd, 3>& w, double eps, double eps_norm,
                                               int nq) {
  if (nq <= 0) nq = sys.quad_points();
  const int D = sys.dim();
  AltIdentity out;
  for (int e = 0; e < sys.n_elements(); ++e) {
    const auto q = element_quadrature(sys, e, nq);
    for (std::size_t k = 0; k < q.xi.size(); ++k) {
      const FieldValue f = eval_field(sys, SpaceId::levelset, phi.data(), e, q.xi[k]);
      std::array<double, 3> g{0, 0, 0};
      std::array<std::array<double, 3>, 3> H{};
      for (int i = 0; i < D; ++i) {
        g[i] = f.grad[i];
        for (int j = 0; j < D; ++j) H[i][j] = f.hess[i * D + j];
      }
      FieldValue wf[3];
      for (int c = 0; c < D; ++c) wf[c] = eval_field(sys, velocity_space(c), w[c].data(), e, q.xi[k]);
      double nrm2 = eps_norm * eps_norm;
      for (int i = 0; i < D; ++i) nrm2 += g[i] * g[i];
      const double nrm = std::sqrt(nrm2);
      double nu[3] = {0, 0, 0};
      for (int i = 0; i < D; ++i) nu[i] = g[i] / nrm;
      double lap = 0.0, nhn = 0.0;
      for (int i = 0; i < D; ++i) {
        lap += H[i][i];
        for (int j = 0; j < D; ++j) nhn += nu[i] * H[i][j] * nu[j];
      }
      const double kappa = (lap - nhn) / nrm;
      const double dg = dirac(f.value, eps) * nrm;
      const double dp = dirac(f.value, eps, 1);
      double nuw = 0.0, ptgw = 0.0;
      for (int i = 0; i < D; ++i) {
        nuw += nu[i] * wf[i].value;
        for (int j = 0; j < D; ++j) ptgw += ((i == j ? 1.0 : 0.0) - nu[i] * nu[j]) * wf[i].grad[j];
      }
      out.lhs += q.weight[k] * dg * kappa * nuw;
      out.rhs += q.weight[k] * (dg * ptgw + eps_norm * eps_norm * dp * nuw);
    }
  }
  return out;
}

}  // namespace entrolevel
