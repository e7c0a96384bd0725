#pragma once

namespace patchdrift {

enum class Method {
  mc_logS,
  mc_moments,
  quadrature,
  asymptote,
  limit,
};

inline const char* method_name(Method m) {
  switch (m) {
    case Method::mc_logS: return "mc_logS";
    case Method::mc_moments: return "mc_moments";
    case Method::quadrature: return "quadrature";
    case Method::asymptote: return "asymptote";
    case Method::limit: return "limit";
  }
  return "unknown";
}

// A stochastic growth rate with its provenance. Analytic methods carry a
// zero standard error and no averaging segments.
struct GrowthEstimate {
  double chi = 0.0;
  double std_error = 0.0;
  Method method = Method::limit;
  int segments = 0;
};

}  // namespace patchdrift
