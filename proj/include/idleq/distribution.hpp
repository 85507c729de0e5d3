#pragma once

#include <ostream>
#include <vector>

#include "idleq/detail/format.hpp"
#include "idleq/state_space.hpp"

namespace idleq {

enum class SolutionSource { NumericSolve, ClosedForm, Simulation };

inline const char* to_string(SolutionSource s) {
  switch (s) {
    case SolutionSource::NumericSolve: return "numeric";
    case SolutionSource::ClosedForm: return "closed_form";
    case SolutionSource::Simulation: return "simulation";
  }
  return "?";
}

/// A stationary distribution over a finite StateSpace, tagged with its
/// provenance. `residual` is the max |(pi Q)_i| certificate for numeric
/// solves; `std_errors` carries per-entry batch-means standard errors for
/// simulation estimates (empty otherwise).
struct StationaryDistribution {
  std::vector<double> probs;
  SolutionSource source = SolutionSource::ClosedForm;
  double residual = 0.0;
  std::vector<double> std_errors;
};

/// Header: state,probability. State labels are quoted ("(1,2)" contains
/// commas).
inline void write_distribution_csv(std::ostream& out, const StateSpace& space,
                                   const std::vector<double>& probs) {
  out << "state,probability\n";
  for (int i = 0; i < space.size(); ++i)
    out << '"' << space.state(i).label() << "\"," << detail::fmt(probs.at(static_cast<std::size_t>(i)))
        << '\n';
}

}  // namespace idleq
