#include "gne/report.hpp"

#include <json.hpp>
#include <sstream>

namespace gne::report {

using nlohmann::json;

namespace {

std::string point_str(const Eigen::VectorXd& v) {
  std::ostringstream os;
  os << "(";
  for (int i = 0; i < v.size(); ++i) os << (i ? ", " : "") << poly::format_double(v[i]);
  os << ")";
  return os.str();
}

json point_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

void trace_text(std::ostream& os, const model::Gnep& g, const solver::LoopTrace& t) {
  os << "loop " << t.k << ":";
  if (t.u.size()) os << " u = " << point_str(t.u);
  os << " (master order " << t.master_order << ", sdp iters " << t.master_sdp_iterations
     << ")\n";
  for (const auto& pc : t.checks) {
    os << "  player " << (pc.player + 1) << ": ";
    if (pc.known)
      os << "delta = " << poly::format_double(pc.delta);
    else
      os << "delta unknown";
    if (pc.has_v) os << ", v = " << point_str(pc.v);
    if (pc.order) os << " [order " << pc.order << ", sdp iters " << pc.sdp_iterations << "]";
    if (!pc.note.empty()) os << " -- " << pc.note;
    os << "\n";
  }
  if (!t.active.empty()) {
    os << "  improving players:";
    for (int i : t.active) os << " " << (i + 1);
    os << "\n";
  }
  for (const auto& c : t.cuts) {
    os << "  cut for player " << (c.player + 1) << " via "
       << extend::to_string(c.provenance) << " extension: " << c.extension_text << "\n";
    os << "    " << c.cut.str(&g.layout) << " >= 0\n";
  }
  if (!t.note.empty()) os << "  note: " << t.note << "\n";
}

json trace_json(const model::Gnep& g, const solver::LoopTrace& t) {
  json j;
  j["loop"] = t.k;
  if (t.u.size()) j["u"] = point_json(t.u);
  j["master_order"] = t.master_order;
  j["master_sdp_iterations"] = t.master_sdp_iterations;
  j["checks"] = json::array();
  for (const auto& pc : t.checks) {
    json c;
    c["player"] = pc.player + 1;
    if (pc.known) c["delta"] = pc.delta;
    if (pc.has_v) c["v"] = point_json(pc.v);
    c["order"] = pc.order;
    c["sdp_iterations"] = pc.sdp_iterations;
    if (!pc.note.empty()) c["note"] = pc.note;
    j["checks"].push_back(c);
  }
  json act = json::array();
  for (int i : t.active) act.push_back(i + 1);
  j["improving_players"] = act;
  j["cuts"] = json::array();
  for (const auto& c : t.cuts) {
    json cc;
    cc["player"] = c.player + 1;
    cc["extension"] = c.extension_text;
    cc["provenance"] = extend::to_string(c.provenance);
    cc["cut"] = c.cut.str(&g.layout);
    j["cuts"].push_back(cc);
  }
  if (!t.note.empty()) j["note"] = t.note;
  return j;
}

}  // namespace

std::string to_text(const model::Gnep& g, const solver::SolveOutcome& out) {
  std::ostringstream os;
  os << "status: " << solver::to_string(out.status) << "\n";
  if (out.point.size()) os << "point: " << point_str(out.point) << "\n";
  if (out.status == solver::SolveStatus::GneFound) {
    os << "delta: " << poly::format_double(out.delta) << "\n";
    os << "kappa: " << poly::format_double(out.kappa) << "\n";
  }
  os << "loops: " << out.loops << "\n";
  for (const auto& a : out.boundary_atoms) os << "closure atom: " << point_str(a) << "\n";
  if (!out.note.empty()) os << "note: " << out.note << "\n";
  for (const auto& t : out.trace) trace_text(os, g, t);
  return os.str();
}

std::string to_text(const model::Gnep& g, const solver::EnumerationOutcome& out) {
  std::ostringstream os;
  os << "equilibria found: " << out.gnes.size() << "\n";
  for (std::size_t i = 0; i < out.gnes.size(); ++i) {
    os << "gne " << (i + 1) << ": " << point_str(out.gnes[i].point)
       << "  delta = " << poly::format_double(out.gnes[i].delta) << "\n";
  }
  os << "exhausted: " << (out.exhausted ? "yes" : "no") << "\n";
  if (!out.note.empty()) os << "note: " << out.note << "\n";
  for (const auto& t : out.trace) trace_text(os, g, t);
  return os.str();
}

std::string to_text(const model::Gnep& g, const solver::GneSolver::PointCheck& out,
                    const Eigen::VectorXd& point) {
  std::ostringstream os;
  os << "point: " << point_str(point) << "\n";
  os << "delta: " << poly::format_double(out.delta) << "\n";
  os << "kappa: " << poly::format_double(out.kappa) << "\n";
  os << "strict constraints: " << (out.strict_ok ? "satisfied" : "violated") << "\n";
  os << "equilibrium: " << (out.is_gne ? "yes" : "no") << "\n";
  for (const auto& pc : out.checks) {
    os << "  player " << (pc.player + 1) << ": ";
    if (pc.known)
      os << "delta = " << poly::format_double(pc.delta);
    else
      os << "delta unknown";
    if (pc.has_v) os << ", v = " << point_str(pc.v);
    os << "\n";
  }
  (void)g;
  return os.str();
}

std::string to_json(const model::Gnep& g, const solver::SolveOutcome& out) {
  json j;
  j["status"] = solver::to_string(out.status);
  if (out.point.size()) j["point"] = point_json(out.point);
  j["delta"] = out.delta;
  j["kappa"] = out.kappa;
  j["loops"] = out.loops;
  if (!out.boundary_atoms.empty()) {
    j["closure_atoms"] = json::array();
    for (const auto& a : out.boundary_atoms) j["closure_atoms"].push_back(point_json(a));
  }
  if (!out.note.empty()) j["note"] = out.note;
  j["trace"] = json::array();
  for (const auto& t : out.trace) j["trace"].push_back(trace_json(g, t));
  return j.dump(2);
}

std::string to_json(const model::Gnep& g, const solver::EnumerationOutcome& out) {
  json j;
  j["equilibria"] = json::array();
  for (const auto& s : out.gnes) {
    json e;
    e["point"] = point_json(s.point);
    e["delta"] = s.delta;
    e["kappa"] = s.kappa;
    j["equilibria"].push_back(e);
  }
  j["exhausted"] = out.exhausted;
  if (!out.note.empty()) j["note"] = out.note;
  j["trace"] = json::array();
  for (const auto& t : out.trace) j["trace"].push_back(trace_json(g, t));
  return j.dump(2);
}

std::string to_json(const model::Gnep& g, const solver::GneSolver::PointCheck& out,
                    const Eigen::VectorXd& point) {
  json j;
  j["point"] = point_json(point);
  j["delta"] = out.delta;
  j["kappa"] = out.kappa;
  j["strict_ok"] = out.strict_ok;
  j["is_gne"] = out.is_gne;
  j["checks"] = json::array();
  for (const auto& pc : out.checks) {
    json c;
    c["player"] = pc.player + 1;
    if (pc.known) c["delta"] = pc.delta;
    if (pc.has_v) c["v"] = point_json(pc.v);
    j["checks"].push_back(c);
  }
  (void)g;
  return j.dump(2);
}

}  // namespace gne::report
