// Independent oracles used by the tests. These deliberately do not share code
// with the library paths they check.

#ifndef DEEPSPACE_TESTS_ORACLES_HPP
#define DEEPSPACE_TESTS_ORACLES_HPP

#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "deepspace/eval.hpp"
#include "deepspace/nn.hpp"

namespace deepspace::testing {

/// Structural bounds every evaluation must satisfy: whole <= coarse exactly,
/// and the Frechet lower bound whole >= coarse + fine - 1.
inline ::testing::AssertionResult metric_bounds_hold(const Metrics& m) {
  if (m.whole_acc > m.coarse_acc) {
    return ::testing::AssertionFailure()
           << "whole_acc " << m.whole_acc << " > coarse_acc " << m.coarse_acc;
  }
  if (m.whole_acc + 1e-12 < m.coarse_acc + m.fine_acc - 1.0) {
    return ::testing::AssertionFailure()
           << "whole_acc " << m.whole_acc << " below Frechet bound "
           << m.coarse_acc + m.fine_acc - 1.0;
  }
  return ::testing::AssertionSuccess();
}

/// Haversine great-circle distance: a different spherical formula than the
/// production law-of-cosines path.
inline double haversine_km(const GeoPoint& a, const GeoPoint& b,
                           double radius_km = 6371.0) {
  const double rad = 3.14159265358979323846 / 180.0;
  const double lat_a = a.latitude * rad;
  const double lat_b = b.latitude * rad;
  const double dlat = (b.latitude - a.latitude) * rad;
  const double dlon = (b.longitude - a.longitude) * rad;
  const double s = std::sin(dlat / 2) * std::sin(dlat / 2) +
                   std::cos(lat_a) * std::cos(lat_b) * std::sin(dlon / 2) *
                       std::sin(dlon / 2);
  return 2.0 * radius_km * std::asin(std::sqrt(s));
}

/// Central finite differences of a scalar functional with respect to every
/// entry of a tensor; returns the max relative error against the analytic
/// gradient.
inline double fd_max_relative_error(Tensor& x, const Tensor& analytic,
                                    const std::function<double()>& loss,
                                    double epsilon) {
  double worst = 0.0;
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    const double saved = x.data[i];
    x.data[i] = saved + epsilon;
    const double hi = loss();
    x.data[i] = saved - epsilon;
    const double lo = loss();
    x.data[i] = saved;
    const double numeric = (hi - lo) / (2.0 * epsilon);
    const double denom =
        std::max({std::fabs(analytic.data[i]), std::fabs(numeric), 1e-8});
    worst = std::max(worst, std::fabs(analytic.data[i] - numeric) / denom);
  }
  return worst;
}

/// Weighted sum of tensor entries: the scalar functional the layer-level
/// gradient checks differentiate.
inline double weighted_sum(const Tensor& t, const Tensor& weights) {
  double acc = 0.0;
  for (std::size_t i = 0; i < t.data.size(); ++i) {
    acc += t.data[i] * weights.data[i];
  }
  return acc;
}

/// 3-sigma binomial band around probability p over n draws.
inline double binomial_3sigma(double p, std::size_t n) {
  return 3.0 * std::sqrt(p * (1.0 - p) / static_cast<double>(n));
}

}  // namespace deepspace::testing

#endif  // DEEPSPACE_TESTS_ORACLES_HPP
