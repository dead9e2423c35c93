#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "mlw/errors.hpp"

namespace mlw {

/// A bivariate series stored column-wise. For observables the columns are
/// (y, x); for the latent system they are (u1, u2).
struct Series2 {
  std::vector<double> c1;
  std::vector<double> c2;

  Series2() = default;
  Series2(std::vector<double> a, std::vector<double> b) : c1(std::move(a)), c2(std::move(b)) {
    if (c1.size() != c2.size()) throw InvalidInput("Series2: columns differ in length");
  }

  std::size_t size() const { return c1.size(); }

  bool all_finite() const {
    for (double v : c1) {
      if (!std::isfinite(v)) return false;
    }
    for (double v : c2) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  Series2 scaled(double c) const {
    Series2 out = *this;
    for (double& v : out.c1) v *= c;
    for (double& v : out.c2) v *= c;
    return out;
  }

  Series2 shifted(double a1, double a2) const {
    Series2 out = *this;
    for (double& v : out.c1) v += a1;
    for (double& v : out.c2) v += a2;
    return out;
  }

  friend bool operator==(const Series2&, const Series2&) = default;
};

}  // namespace mlw
