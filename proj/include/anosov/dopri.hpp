#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>

namespace anosov {

/// Continuous extension of one accepted Dormand-Prince step (4th order).
template <std::size_t N>
struct DenseStep {
  using State = std::array<double, N>;
  double t0 = 0.0;
  double h = 0.0;
  std::array<State, 5> r{};

  State at(double t) const {
    const double s = (t - t0) / h, s1 = 1.0 - s;
    State y;
    for (std::size_t i = 0; i < N; ++i) {
      y[i] = r[0][i] + s * (r[1][i] + s1 * (r[2][i] + s * (r[3][i] + s1 * r[4][i])));
    }
    return y;
  }
};

/// Embedded Runge-Kutta 5(4) pair of Dormand and Prince with FSAL.
template <std::size_t N>
class DormandPrince54 {
 public:
  using State = std::array<double, N>;

  struct Trial {
    State y;
    State k_end;  // f(y): first stage of the next step
    double error = 0.0;  // scaled RMS error estimate, accept when <= 1
  };

  DormandPrince54(double rtol, double atol) : rtol_(rtol), atol_(atol) {}

  /// One trial step of size h from (t, y) with k1 = f(y). Stages are kept so
  /// that `dense` can be called after an accepted trial.
  template <class Rhs>
  Trial step(Rhs&& f, const State& y, const State& k1, double h) {
    static constexpr double a21 = 1.0 / 5.0;
    static constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
    static constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
    static constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0,
                            a53 = 64448.0 / 6561.0, a54 = -212.0 / 729.0;
    static constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0,
                            a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0;
    static constexpr double b1 = 35.0 / 384.0, b3 = 500.0 / 1113.0, b4 = 125.0 / 192.0,
                            b5 = -2187.0 / 6784.0, b6 = 11.0 / 84.0;
    static constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                            e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;

    y0_ = y;
    k_[0] = k1;
    State tmp;
    for (std::size_t i = 0; i < N; ++i) tmp[i] = y[i] + h * a21 * k1[i];
    k_[1] = f(tmp);
    for (std::size_t i = 0; i < N; ++i) tmp[i] = y[i] + h * (a31 * k1[i] + a32 * k_[1][i]);
    k_[2] = f(tmp);
    for (std::size_t i = 0; i < N; ++i) tmp[i] = y[i] + h * (a41 * k1[i] + a42 * k_[1][i] + a43 * k_[2][i]);
    k_[3] = f(tmp);
    for (std::size_t i = 0; i < N; ++i)
      tmp[i] = y[i] + h * (a51 * k1[i] + a52 * k_[1][i] + a53 * k_[2][i] + a54 * k_[3][i]);
    k_[4] = f(tmp);
    for (std::size_t i = 0; i < N; ++i)
      tmp[i] = y[i] + h * (a61 * k1[i] + a62 * k_[1][i] + a63 * k_[2][i] + a64 * k_[3][i] + a65 * k_[4][i]);
    k_[5] = f(tmp);
    Trial out;
    for (std::size_t i = 0; i < N; ++i)
      out.y[i] = y[i] + h * (b1 * k1[i] + b3 * k_[2][i] + b4 * k_[3][i] + b5 * k_[4][i] + b6 * k_[5][i]);
    k_[6] = f(out.y);
    out.k_end = k_[6];

    double acc = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      const double e = h * (e1 * k1[i] + e3 * k_[2][i] + e4 * k_[3][i] + e5 * k_[4][i] + e6 * k_[5][i] +
                            e7 * k_[6][i]);
      const double sc = atol_ + rtol_ * std::max(std::fabs(y[i]), std::fabs(out.y[i]));
      acc += (e / sc) * (e / sc);
    }
    out.error = std::sqrt(acc / static_cast<double>(N));
    y1_ = out.y;
    h_ = h;
    return out;
  }

  /// Dense output for the most recent trial step starting at time t0.
  DenseStep<N> dense(double t0) const {
    static constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                            d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                            d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;
    DenseStep<N> d;
    d.t0 = t0;
    d.h = h_;
    for (std::size_t i = 0; i < N; ++i) {
      const double ydiff = y1_[i] - y0_[i];
      const double bspl = h_ * k_[0][i] - ydiff;
      d.r[0][i] = y0_[i];
      d.r[1][i] = ydiff;
      d.r[2][i] = bspl;
      d.r[3][i] = ydiff - h_ * k_[6][i] - bspl;
      d.r[4][i] = h_ * (d1 * k_[0][i] + d3 * k_[2][i] + d4 * k_[3][i] + d5 * k_[4][i] + d6 * k_[5][i] +
                        d7 * k_[6][i]);
    }
    return d;
  }

  /// Standard step-size update factor for a given scaled error.
  static double step_factor(double error) {
    if (error == 0.0) return 5.0;
    return std::clamp(0.9 * std::pow(error, -0.2), 0.2, 5.0);
  }

  double rtol() const { return rtol_; }
  double atol() const { return atol_; }

 private:
  double rtol_;
  double atol_;
  State y0_{}, y1_{};
  std::array<State, 7> k_{};
  double h_ = 0.0;
};

}  // namespace anosov
