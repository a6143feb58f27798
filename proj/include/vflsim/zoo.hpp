#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "vflsim/errors.hpp"
#include "vflsim/rng.hpp"

namespace vflsim::zoo {

enum class DirectionKind { kUnitSphere, kStandardGaussian };

/// Dimension factor of the two-point estimator: d for uniform directions on
/// the unit sphere, 1 for standard Gaussian directions.
inline double phi(int d, DirectionKind kind) {
  if (d < 1) throw config_error("phi: d must be >= 1");
  return kind == DirectionKind::kUnitSphere ? static_cast<double>(d) : 1.0;
}

/// Random direction of length d. Sphere directions are a normalized Gaussian
/// draw. Consumes exactly 2*ceil(d/2) generator draws either way.
inline std::vector<double> sample_direction(int d, DirectionKind kind,
                                            Rng& rng) {
  if (d < 1) throw config_error("sample_direction: d must be >= 1");
  std::vector<double> u(d);
  rng.fill_gaussian(u);
  if (kind == DirectionKind::kUnitSphere) {
    double norm2 = 0.0;
    for (double v : u) norm2 += v * v;
    if (norm2 == 0.0) {
      // Probability-zero Gaussian draw; fall back to a coordinate axis.
      u[0] = 1.0;
      norm2 = 1.0;
    }
    double norm = std::sqrt(norm2);
    for (auto& v : u) v /= norm;
  }
  return u;
}

/// The direction a client keeps between query and reply. Never serialized:
/// wire messages carry embeddings and losses only.
struct Perturbation {
  std::vector<double> u;
  double mu = 0.0;
  std::int64_t sample_id = -1;
  int client_id = -1;
};

/// (phi(d)/mu) * (h_hat - h) * u, assembled from the two returned losses.
inline std::vector<double> two_point_estimate(double h_hat, double h,
                                              const Perturbation& pert,
                                              DirectionKind kind) {
  if (!(pert.mu > 0.0)) throw usage_error("two_point_estimate: mu must be > 0");
  if (!std::isfinite(h_hat) || !std::isfinite(h))
    throw numeric_error("two_point_estimate: non-finite loss for sample " +
                        std::to_string(pert.sample_id) + ", client " +
                        std::to_string(pert.client_id));
  const int d = static_cast<int>(pert.u.size());
  const double scale = phi(d, kind) / pert.mu * (h_hat - h);
  std::vector<double> g(pert.u.size());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = scale * pert.u[i];
  return g;
}

using ScalarField = std::function<double(std::span<const double>)>;

/// Parameter-space form: evaluates f at w + mu*u and w, then differences.
inline std::vector<double> estimate_gradient_direct(const ScalarField& f,
                                                    std::span<const double> w,
                                                    const Perturbation& pert,
                                                    DirectionKind kind) {
  if (pert.u.size() != w.size())
    throw usage_error("estimate_gradient_direct: direction/param size mismatch");
  std::vector<double> shifted(w.begin(), w.end());
  for (std::size_t i = 0; i < shifted.size(); ++i)
    shifted[i] += pert.mu * pert.u[i];
  return two_point_estimate(f(shifted), f(w), pert, kind);
}

}  // namespace vflsim::zoo
