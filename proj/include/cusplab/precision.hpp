#pragma once

// Extended-precision scalar for orbits of the diagonal flow, where rounding
// errors in the contracting direction grow like exp(nu t). 100 decimal digits
// keep a rational lattice exact to depth ~200 at nu = 2.

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <boost/multiprecision/eigen.hpp>

#include "cusplab/lattice_space.hpp"

namespace cusplab {

using HighPrecision =
    boost::multiprecision::number<boost::multiprecision::cpp_bin_float<100>, boost::multiprecision::et_off>;

/// Converts the representative entrywise (no re-reduction).
template <typename To, typename From>
LatticePoint<To> lattice_cast(const LatticePoint<From>& x) {
  return LatticePoint<To>(GroupElement<To>::from_trusted(x.basis().template cast<To>()), x.reduced());
}

template <typename To, typename From>
OneParamSubgroup<To> subgroup_cast(const OneParamSubgroup<From>& sub) {
  return OneParamSubgroup<To>(
      LieAlgebraElement<To>(sub.generator().matrix().template cast<To>(), sub.generator().kind()));
}

}  // namespace cusplab
