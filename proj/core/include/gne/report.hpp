#pragma once

#include <string>

#include "gne/solver.hpp"

namespace gne::report {

// human-readable report (status, point, delta/kappa, per-loop trace)
std::string to_text(const model::Gnep& g, const solver::SolveOutcome& out);
std::string to_text(const model::Gnep& g, const solver::EnumerationOutcome& out);
std::string to_text(const model::Gnep& g, const solver::GneSolver::PointCheck& out,
                    const Eigen::VectorXd& point);

// structured (json) report with the same content
std::string to_json(const model::Gnep& g, const solver::SolveOutcome& out);
std::string to_json(const model::Gnep& g, const solver::EnumerationOutcome& out);
std::string to_json(const model::Gnep& g, const solver::GneSolver::PointCheck& out,
                    const Eigen::VectorXd& point);

}  // namespace gne::report
