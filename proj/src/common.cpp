#include "surfns/common.hpp"

namespace surfns {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::argument: return "argument";
    case ErrorKind::structural: return "structural";
    case ErrorKind::degenerate_element: return "degenerate_element";
    case ErrorKind::singular_mass: return "singular_mass";
    case ErrorKind::solver_setup: return "solver_setup";
    case ErrorKind::iterative_failure: return "iterative_failure";
    case ErrorKind::singular_matrix: return "singular_matrix";
    case ErrorKind::size_cap: return "size_cap";
    case ErrorKind::usage: return "usage";
    case ErrorKind::parse: return "parse";
    case ErrorKind::validation: return "validation";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

}  // namespace surfns
