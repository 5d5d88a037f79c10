#pragma once

#include <cmath>
#include <type_traits>

#include "dlrs/tape.hpp"

namespace dlrs::ad {

/// Truncated second-order Taylor number: value, first and second derivative
/// with respect to one seeded scalar input.
///
/// `T` is `double` for plain evaluation or `Var` to record the whole
/// second-order propagation on a tape (used to differentiate input
/// derivatives with respect to parameters).
template <typename T>
struct Dual2 {
  T value;
  T d1;
  T d2;

  static Dual2 seed(T x, T one, T zero) { return Dual2{x, one, zero}; }
};

namespace detail {

// h(f) with h', h'' evaluated at f.value.
template <typename T, typename D0, typename D1, typename D2>
Dual2<T> chain(const Dual2<T>& f, D0 h, D1 dh, D2 d2h) {
  return Dual2<T>{h, dh * f.d1, d2h * (f.d1 * f.d1) + dh * f.d2};
}

}  // namespace detail

template <typename T>
Dual2<T> operator+(const Dual2<T>& f, const Dual2<T>& g) {
  return {f.value + g.value, f.d1 + g.d1, f.d2 + g.d2};
}

template <typename T>
Dual2<T> operator-(const Dual2<T>& f, const Dual2<T>& g) {
  return {f.value - g.value, f.d1 - g.d1, f.d2 - g.d2};
}

template <typename T>
Dual2<T> operator-(const Dual2<T>& f) {
  return {-f.value, -f.d1, -f.d2};
}

template <typename T>
Dual2<T> operator*(const Dual2<T>& f, const Dual2<T>& g) {
  return {f.value * g.value, f.d1 * g.value + f.value * g.d1,
          f.d2 * g.value + 2.0 * (f.d1 * g.d1) + f.value * g.d2};
}

template <typename T>
Dual2<T> operator/(const Dual2<T>& f, const Dual2<T>& g) {
  const T q = f.value / g.value;
  const T dq = (f.d1 - q * g.d1) / g.value;
  const T d2q = (f.d2 - 2.0 * (dq * g.d1) - q * g.d2) / g.value;
  return {q, dq, d2q};
}

template <typename T>
Dual2<T> operator+(const Dual2<T>& f, double c) {
  return {f.value + c, f.d1, f.d2};
}
template <typename T>
Dual2<T> operator+(double c, const Dual2<T>& f) {
  return f + c;
}
template <typename T>
Dual2<T> operator-(const Dual2<T>& f, double c) {
  return {f.value - c, f.d1, f.d2};
}
template <typename T>
Dual2<T> operator-(double c, const Dual2<T>& f) {
  return {c - f.value, -f.d1, -f.d2};
}
template <typename T>
Dual2<T> operator*(const Dual2<T>& f, double c) {
  return {f.value * c, f.d1 * c, f.d2 * c};
}
template <typename T>
Dual2<T> operator*(double c, const Dual2<T>& f) {
  return f * c;
}
template <typename T>
Dual2<T> operator/(const Dual2<T>& f, double c) {
  return {f.value / c, f.d1 / c, f.d2 / c};
}

template <typename T>
Dual2<T> sin(const Dual2<T>& f) {
  using std::cos;
  using std::sin;
  const T s = sin(f.value);
  const T c = cos(f.value);
  return detail::chain(f, s, c, -s);
}

template <typename T>
Dual2<T> cos(const Dual2<T>& f) {
  using std::cos;
  using std::sin;
  const T s = sin(f.value);
  const T c = cos(f.value);
  return detail::chain(f, c, -s, -c);
}

template <typename T>
Dual2<T> tanh(const Dual2<T>& f) {
  using std::tanh;
  const T t = tanh(f.value);
  const T dt = 1.0 - t * t;
  return detail::chain(f, t, dt, -2.0 * (t * dt));
}

template <typename T>
Dual2<T> exp(const Dual2<T>& f) {
  using std::exp;
  const T e = exp(f.value);
  return detail::chain(f, e, e, e);
}

template <typename T>
Dual2<T> log(const Dual2<T>& f) {
  using std::log;
  const T inv = 1.0 / f.value;
  return detail::chain(f, log(f.value), inv, -(inv * inv));
}

template <typename T>
Dual2<T> pow(const Dual2<T>& f, double p) {
  using std::pow;
  return detail::chain(f, pow(f.value, p), p * pow(f.value, p - 1.0),
                       p * (p - 1.0) * pow(f.value, p - 2.0));
}

// Mixed Dual2<T> op T, where T is itself a differentiable scalar (a tape
// parameter entering a dual-valued expression).
template <typename T>
  requires(!std::is_same_v<T, double>)
Dual2<T> operator*(const Dual2<T>& f, const T& c) {
  return {f.value * c, f.d1 * c, f.d2 * c};
}
template <typename T>
  requires(!std::is_same_v<T, double>)
Dual2<T> operator+(const Dual2<T>& f, const T& c) {
  return {f.value + c, f.d1, f.d2};
}

template <typename T>
double primal(const Dual2<T>& f) {
  return primal(f.value);
}

}  // namespace dlrs::ad
