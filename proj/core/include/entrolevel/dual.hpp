#pragma once

#include <array>
#include <cmath>

namespace entrolevel {

// Forward-mode dual number carrying N directional derivatives.
template <int N>
struct Dual {
  double v = 0.0;
  std::array<double, N> d;

  Dual() { d.fill(0.0); }
  Dual(double value) : v(value) { d.fill(0.0); }  // NOLINT implicit on purpose

  Dual& operator+=(const Dual& o) {
    v += o.v;
    for (int i = 0; i < N; ++i) d[i] += o.d[i];
    return *this;
  }
  Dual& operator-=(const Dual& o) {
    v -= o.v;
    for (int i = 0; i < N; ++i) d[i] -= o.d[i];
    return *this;
  }
  Dual& operator*=(const Dual& o) {
    for (int i = 0; i < N; ++i) d[i] = d[i] * o.v + v * o.d[i];
    v *= o.v;
    return *this;
  }
  Dual& operator/=(const Dual& o) {
    const double inv = 1.0 / o.v;
    const double q = v * inv;
    for (int i = 0; i < N; ++i) d[i] = (d[i] - q * o.d[i]) * inv;
    v = q;
    return *this;
  }
  Dual& operator+=(double s) {
    v += s;
    return *this;
  }
  Dual& operator-=(double s) {
    v -= s;
    return *this;
  }
  Dual& operator*=(double s) {
    v *= s;
    for (int i = 0; i < N; ++i) d[i] *= s;
    return *this;
  }
  Dual& operator/=(double s) { return *this *= (1.0 / s); }

  // this += a * b without a temporary
  void fma(const Dual& a, const Dual& b) {
    for (int i = 0; i < N; ++i) d[i] += a.d[i] * b.v + a.v * b.d[i];
    v += a.v * b.v;
  }
  void fma(double a, const Dual& b) {
    for (int i = 0; i < N; ++i) d[i] += a * b.d[i];
    v += a * b.v;
  }
};

template <int N>
Dual<N> operator-(Dual<N> a) {
  a.v = -a.v;
  for (int i = 0; i < N; ++i) a.d[i] = -a.d[i];
  return a;
}
template <int N>
Dual<N> operator+(Dual<N> a, const Dual<N>& b) { return a += b; }
template <int N>
Dual<N> operator-(Dual<N> a, const Dual<N>& b) { return a -= b; }
template <int N>
Dual<N> operator*(Dual<N> a, const Dual<N>& b) { return a *= b; }
template <int N>
Dual<N> operator/(Dual<N> a, const Dual<N>& b) { return a /= b; }
template <int N>
Dual<N> operator+(Dual<N> a, double s) { return a += s; }
template <int N>
Dual<N> operator+(double s, Dual<N> a) { return a += s; }
template <int N>
Dual<N> operator-(Dual<N> a, double s) { return a -= s; }
template <int N>
Dual<N> operator-(double s, const Dual<N>& a) { return -a + s; }
template <int N>
Dual<N> operator*(Dual<N> a, double s) { return a *= s; }
template <int N>
Dual<N> operator*(double s, Dual<N> a) { return a *= s; }
template <int N>
Dual<N> operator/(Dual<N> a, double s) { return a /= s; }
template <int N>
Dual<N> operator/(double s, const Dual<N>& a) {
  Dual<N> r(s);
  return r /= a;
}

template <int N>
Dual<N> sqrt(const Dual<N>& a) {
  Dual<N> r;
  r.v = std::sqrt(a.v);
  const double f = 0.5 / r.v;
  for (int i = 0; i < N; ++i) r.d[i] = f * a.d[i];
  return r;
}

inline double value_of(double x) { return x; }
template <int N>
double value_of(const Dual<N>& x) { return x.v; }

inline void fma_into(double& acc, double a, double b) { acc += a * b; }
template <int N>
void fma_into(Dual<N>& acc, double a, const Dual<N>& b) { acc.fma(a, b); }
template <int N>
void fma_into(Dual<N>& acc, const Dual<N>& a, const Dual<N>& b) { acc.fma(a, b); }

}  // namespace entrolevel
