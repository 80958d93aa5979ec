#pragma once

// Plain-loop reference implementation of the multi-measure filter and its
// integrated likelihood, kept independent of the library code paths.

#include <cmath>
#include <limits>
#include <vector>

namespace tailrisk::oracle {

struct Params {
  double omega, beta, tau1, tau2;
  std::vector<double> gamma, xi, phi, d1, d2;
  double nu0, nu1;
  std::vector<double> psi;
};

// Flat layout: omega, beta, tau1, tau2, gamma[K], xi[K], phi[K], d1[K], d2[K], nu0, nu1, psi[K].
inline Params unpack(const std::vector<double>& v, int K) {
  Params p;
  std::size_t i = 0;
  p.omega = v[i++];
  p.beta = v[i++];
  p.tau1 = v[i++];
  p.tau2 = v[i++];
  for (auto* block : {&p.gamma, &p.xi, &p.phi, &p.d1, &p.d2}) {
    for (int j = 0; j < K; ++j) block->push_back(v[i++]);
  }
  p.nu0 = v[i++];
  p.nu1 = v[i++];
  for (int j = 0; j < K; ++j) p.psi.push_back(v[i++]);
  return p;
}

inline double det(const std::vector<std::vector<double>>& a) {
  const std::size_t k = a.size();
  if (k == 1) return a[0][0];
  if (k == 2) return a[0][0] * a[1][1] - a[0][1] * a[1][0];
  return a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) -
         a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
         a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
}

struct Result {
  double al = 0.0;
  double meas = 0.0;
  double total = -std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> u;  // T rows of K residuals
};

// Uncentered leverage; x holds T rows of K volatility-scale measures.
inline Result integrated(const std::vector<double>& theta, int K, double alpha,
                         const std::vector<double>& r, const std::vector<std::vector<double>>& x,
                         double q0, double w0) {
  const Params p = unpack(theta, K);
  const std::size_t T = r.size();
  Result out;
  double lq_prev = std::log(-q0);
  double w_prev = w0;
  double eps_prev = 0.0;
  std::vector<double> u_prev(K, 0.0);
  double al = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    double lq = p.omega + p.beta * lq_prev + p.tau1 * eps_prev + p.tau2 * eps_prev * eps_prev;
    double w = p.nu0 + p.nu1 * w_prev;
    for (int j = 0; j < K; ++j) {
      lq += p.gamma[j] * u_prev[j];
      w += p.psi[j] * std::fabs(u_prev[j]);
    }
    const double q = -std::exp(lq);
    const double es = q - w;
    const double eps = r[t] / q;
    std::vector<double> u(K);
    for (int j = 0; j < K; ++j) {
      u[j] = std::log(x[t][j]) - p.xi[j] - p.phi[j] * lq - p.d1[j] * eps - p.d2[j] * eps * eps;
    }
    const double hit = r[t] <= q ? 1.0 : 0.0;
    al += std::log((alpha - 1.0) / es) + (r[t] - q) * (alpha - hit) / (alpha * es);
    out.u.push_back(u);
    lq_prev = lq;
    w_prev = w;
    eps_prev = eps;
    u_prev = u;
  }
  std::vector<std::vector<double>> S(K, std::vector<double>(K, 0.0));
  for (int a = 0; a < K; ++a) {
    for (int b = 0; b < K; ++b) {
      for (std::size_t t = 0; t < T; ++t) S[a][b] += out.u[t][a] * out.u[t][b];
      S[a][b] /= static_cast<double>(T) - K - 1;
    }
  }
  out.al = al;
  out.meas = -0.5 * (static_cast<double>(T) - K - 1) * std::log(det(S));
  out.total = out.al + out.meas;
  return out;
}

}  // namespace tailrisk::oracle
