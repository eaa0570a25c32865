#pragma once

namespace pmpthermo {

/// Principal branch W0 of the Lambert function: w * exp(w) = x, x >= -1/e.
/// Halley iteration from a log-based asymptotic seed (series near the branch
/// point). Throws DomainError for x < -1/e.
double lambert_w0(double x);

}  // namespace pmpthermo
