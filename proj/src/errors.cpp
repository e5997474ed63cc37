#include "fga/errors.hpp"

namespace fga {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidInput: return "invalid input";
    case ErrorKind::kCutoff: return "cutoff error";
    case ErrorKind::kNumeric: return "numeric error";
    case ErrorKind::kGauge: return "gauge failure";
    case ErrorKind::kConsistency: return "consistency error";
    case ErrorKind::kResolution: return "resolution error";
    case ErrorKind::kQuadratureRisk: return "quadrature risk";
    case ErrorKind::kInvalidPlan: return "invalid plan";
    case ErrorKind::kGridMismatch: return "grid mismatch";
    case ErrorKind::kInvariantViolation: return "invariant violation";
    case ErrorKind::kBandIsolation: return "band isolation failure";
    case ErrorKind::kConfig: return "configuration error";
    case ErrorKind::kResource: return "resource refusal";
  }
  return "error";
}

}  // namespace fga

#include "fga/common.hpp"

#include <cstdio>

namespace fga {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace fga
