#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "bsq/error.hpp"

namespace bsq {

struct GmresResult {
  int iterations = 0;
  double residual = 0.0;  // ||b - A x|| / ||b||
  bool converged = false;
};

/// Restarted GMRES with right preconditioning, over the real vector space
/// spanned by the field type F (F needs copy, axpy, operator*=).
///
///   apply(x) -> A x,  precondition(x) -> M^-1 x,  dot(a, b) -> real inner product.
///
/// Convergence is declared on the true residual ||b - A x|| <= tol ||b||,
/// recomputed at every restart and before returning. Throws SolverError
/// when max_iter Arnoldi steps do not reach the tolerance.
template <class F, class Apply, class Precondition, class Dot>
GmresResult gmres(Apply&& apply, Precondition&& precondition, Dot&& dot, const F& b, F& x, double tol,
                  int max_iter, int restart) {
  GmresResult res;
  const double bnorm = std::sqrt(dot(b, b));
  if (bnorm == 0.0) {
    x *= 0.0;
    res.converged = true;
    return res;
  }
  if (restart < 1) restart = 1;

  auto true_residual = [&](F& r) {
    r = b;
    r.axpy(-1.0, apply(x));
    return std::sqrt(dot(r, r));
  };

  F r = b;
  double beta = true_residual(r);
  res.residual = beta / bnorm;
  if (res.residual <= tol) {
    res.converged = true;
    return res;
  }

  std::vector<F> v;
  std::vector<std::vector<double>> hcol;
  std::vector<double> cs, sn, g;
  while (res.iterations < max_iter) {
    v.clear();
    hcol.clear();
    cs.clear();
    sn.clear();
    g.assign(1, beta);
    r *= 1.0 / beta;
    v.push_back(r);

    int k = 0;
    for (; k < restart && res.iterations < max_iter; ++k) {
      ++res.iterations;
      F w = apply(precondition(v[k]));
      std::vector<double> h(k + 2, 0.0);
      // modified Gram-Schmidt with one reorthogonalization pass
      for (int pass = 0; pass < 2; ++pass) {
        for (int i = 0; i <= k; ++i) {
          const double c = dot(v[i], w);
          h[i] += c;
          w.axpy(-c, v[i]);
        }
      }
      h[k + 1] = std::sqrt(dot(w, w));
      for (int i = 0; i < k; ++i) {
        const double t = cs[i] * h[i] + sn[i] * h[i + 1];
        h[i + 1] = -sn[i] * h[i] + cs[i] * h[i + 1];
        h[i] = t;
      }
      const double denom = std::hypot(h[k], h[k + 1]);
      const double c = denom == 0.0 ? 1.0 : h[k] / denom;
      const double s = denom == 0.0 ? 0.0 : h[k + 1] / denom;
      const double hk1 = h[k + 1];
      h[k] = denom;
      h[k + 1] = 0.0;
      cs.push_back(c);
      sn.push_back(s);
      g.push_back(-s * g[k]);
      g[k] *= c;
      hcol.push_back(std::move(h));
      if (std::abs(g[k + 1]) <= tol * bnorm || hk1 == 0.0) {
        ++k;
        break;
      }
      w *= 1.0 / hk1;
      v.push_back(std::move(w));
    }

    // back substitution for the Krylov coefficients
    std::vector<double> y(k, 0.0);
    for (int i = k - 1; i >= 0; --i) {
      double s = g[i];
      for (int j = i + 1; j < k; ++j) s -= hcol[j][i] * y[j];
      y[i] = s / hcol[i][i];
    }
    F z = v[0];
    z *= y.empty() ? 0.0 : y[0];
    for (int i = 1; i < k; ++i) z.axpy(y[i], v[i]);
    x.axpy(1.0, precondition(z));

    beta = true_residual(r);
    res.residual = beta / bnorm;
    if (res.residual <= tol) {
      res.converged = true;
      return res;
    }
  }
  throw SolverError("gmres: no convergence within " + std::to_string(max_iter) + " iterations", res.iterations,
                    res.residual);
}

}  // namespace bsq
