#include "ptplaq/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "ptplaq/bifurcation.hpp"
#include "ptplaq/errors.hpp"
#include "ptplaq/stationary.hpp"
#include "ptplaq/symmetry.hpp"

namespace ptplaq::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// Formatting and output

std::string num(double x) {
  if (std::isnan(x)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

class Csv {
 public:
  explicit Csv(std::vector<std::string> header) : columns_(header.size()) { row(header); }

  void row(const std::vector<std::string>& fields) {
    if (fields.size() != columns_) throw ConsistencyError("csv row width does not match its header");
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) body_ << ',';
      body_ << csv_field(fields[i]);
    }
    body_ << '\n';
  }
  std::string str() const { return body_.str(); }

 private:
  std::size_t columns_;
  std::ostringstream body_;
};

// Write-temp-then-rename so readers never see a half-written file.
void write_atomic(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + tmp.string() + " for writing");
    out << content;
    if (!out) throw Error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::size_t thread_cap() {
  std::size_t cap = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("PTPLAQ_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v > 0) cap = static_cast<std::size_t>(v);
  }
  return cap;
}

// Runs fn(0..n-1) on at most thread_cap() threads; the first exception (by
// index) is rethrown after all workers finish.
template <typename Fn>
void parallel_for(std::size_t n, Fn fn) {
  const std::size_t workers = std::min(n, thread_cap());
  std::vector<std::exception_ptr> errors(n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < n; i += workers) {
          try {
            fn(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::vector<double> gamma_grid(const GammaRange& r) {
  std::vector<double> out;
  for (std::size_t i = 0;; ++i) {
    const double g = r.lo + static_cast<double>(i) * r.step;
    if (g > r.hi + 1e-9 * r.step) break;
    out.push_back(g);
  }
  return out;
}

std::string gamma_tag(double g) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "g%.3f", g);
  return buf;
}

// ---------------------------------------------------------------------------
// Schema validation

std::size_t line_at(const std::string& text, std::size_t pos) {
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + std::min(pos, text.size()), '\n'));
}

// Line of the deepest key on `path` that appears in the text.
std::size_t line_of(const std::string& text, const std::vector<std::string>& path) {
  std::size_t pos = 0;
  bool any = false;
  for (const auto& key : path) {
    const auto found = text.find("\"" + key + "\"", pos);
    if (found == std::string::npos) break;
    pos = found;
    any = true;
  }
  return any ? line_at(text, pos) : 1;
}

class Validator {
 public:
  explicit Validator(const std::string& text) : text_(text) {}

  [[noreturn]] void fail(const std::vector<std::string>& path, const std::string& msg) const {
    std::string where;
    for (const auto& p : path) where += (where.empty() ? "" : ".") + p;
    throw SchemaError("line " + std::to_string(line_of(text_, path)) + ": " + (where.empty() ? "" : where + ": ") + msg,
                      line_of(text_, path));
  }

  const json& object(const json& parent, const std::vector<std::string>& path) const {
    const json& j = parent.at(path.back());
    if (!j.is_object()) fail(path, "must be an object");
    return j;
  }

  double number(const json& parent, const std::vector<std::string>& path) const {
    if (!parent.contains(path.back())) fail(path, "missing required field");
    const json& j = parent.at(path.back());
    if (!j.is_number()) fail(path, "must be a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) fail(path, "must be finite");
    return v;
  }

  std::uint64_t integer(const json& parent, const std::vector<std::string>& path) const {
    const json& j = parent.at(path.back());
    if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<long long>() >= 0))
      fail(path, "must be a nonnegative integer");
    return j.get<std::uint64_t>();
  }

  std::string string(const json& parent, const std::vector<std::string>& path) const {
    if (!parent.contains(path.back())) fail(path, "missing required field");
    const json& j = parent.at(path.back());
    if (!j.is_string()) fail(path, "must be a string");
    return j.get<std::string>();
  }

  void only_keys(const json& obj, const std::vector<std::string>& path, const std::set<std::string>& allowed) const {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      if (!allowed.count(it.key())) {
        auto p = path;
        p.push_back(it.key());
        fail(p, "unknown field");
      }
    }
  }

 private:
  const std::string& text_;
};

bool needs_energy(const std::string& command) {
  return command == "branches" || command == "continue" || command == "stability" || command == "evolve";
}

// ---------------------------------------------------------------------------
// Shared helpers for the commands

std::vector<std::string> site_columns(const PlaquetteConfig& cfg, const std::string& prefix,
                                      const std::string& suffix) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < cfg.sites(); ++i) out.push_back(prefix + std::string(1, site_name(i)) + suffix);
  return out;
}

std::string energy_name(const PlaquetteConfig& cfg) { return cfg.kind == PlaquetteKind::D_pm0pm ? "G" : "E"; }

std::vector<std::string> branch_header(const PlaquetteConfig& cfg) {
  std::vector<std::string> h{"gamma"};
  for (const auto& c : site_columns(cfg, "", "")) h.push_back(c);
  for (const auto& c : site_columns(cfg, "phi_", "")) h.push_back(c);
  for (const char* c : {"", "residual_norm", "max_re_lambda", "n_real_pairs", "n_imag_pairs", "n_quartets"})
    h.push_back(*c ? c : energy_name(cfg));
  return h;
}

std::vector<std::string> branch_row(double gamma, const MadelungState& m, double residual,
                                    const StabilitySpectrum& s) {
  std::vector<std::string> r{num(gamma)};
  for (double a : m.amplitudes) r.push_back(num(a));
  for (double p : m.phases) r.push_back(num(p));
  r.push_back(num(m.E));
  r.push_back(num(residual));
  r.push_back(num(s.max_growth_rate));
  r.push_back(std::to_string(s.n_real_pairs));
  r.push_back(std::to_string(s.n_imag_pairs));
  r.push_back(std::to_string(s.n_quartets));
  return r;
}

std::string plane_csv(const StabilitySpectrum& s) {
  Csv csv({"re_lambda", "im_lambda"});
  for (const auto& l : s.lambdas) csv.row({num(l.real()), num(l.imag())});
  return csv.str();
}

// Marker names of the cross branches follow the root order at the point
// where they were enumerated.
std::string cross_symbol(std::size_t index, std::size_t count) {
  static const char* five[] = {"blue circles", "red crosses", "black squares", "green stars", "magenta diamonds"};
  static const char* three[] = {"blue circles", "red crosses", "magenta diamonds"};
  if (count == 5 && index < 5) return five[index];
  if (count == 3 && index < 3) return three[index];
  return "";
}

std::string symbol_for(const BranchLabel& label, std::size_t family_size) {
  if (label.name == BranchName::d_branch) return cross_symbol(label.index, family_size);
  return std::string(figure_symbol(label));
}

std::size_t family_size(const std::vector<AnalyticBranch>& all, const BranchLabel& label) {
  return static_cast<std::size_t>(std::count_if(all.begin(), all.end(), [&](const AnalyticBranch& b) {
    return b.label.name == label.name && b.label.kind == label.kind;
  }));
}

double energy_of(const ExperimentConfig& c) {
  if (!c.e_or_g) throw PreconditionError("command needs E (or G)");
  return *c.e_or_g;
}

// Stationary state for a named branch at the config's gamma, polished by
// Newton so that it is stationary to working precision.
StateVector branch_state(const PlaquetteConfig& cfg, const BranchLabel& label, double E) {
  const auto closed = closed_form_state(cfg, label, E);
  if (!closed)
    throw PreconditionError("branch " + branch_id(label) + " does not exist at gamma=" + num(cfg.gamma));
  const StateVector u = closed->to_state();
  if (vector_norm(u) == 0.0) return u;
  return newton_refine(cfg, E, u).state;
}

struct Outputs {
  fs::path dir;
  std::vector<fs::path> files;
  json extra = json::object();

  void write(const std::string& name, const std::string& content) {
    write_atomic(dir / name, content);
    files.push_back(dir / name);
  }
};

// ---------------------------------------------------------------------------
// Commands

void cmd_spectrum(const ExperimentConfig& c, Outputs& out) {
  Csv csv({"gamma", "index", "re_numeric", "im_numeric", "re_analytic", "im_analytic", "abs_error"});
  double worst = 0.0;
  double worst_off_ep = 0.0;
  for (double g : gamma_grid(*c.gamma_range)) {
    const PlaquetteConfig cfg = c.plaquette.with_gamma(g);
    const Spectrum numeric = eig_complex(build_linear_hamiltonian(cfg));
    Spectrum analytic = linear_spectrum_analytic(cfg);
    bool at_ep = false;
    try {
      at_ep = classify_pt_phase(cfg).regime == PtRegime::exceptional_point;
    } catch (const Error&) {
    }
    // Greedy nearest matching; the analytic list is consumed.
    for (std::size_t i = 0; i < numeric.size(); ++i) {
      auto best = std::min_element(analytic.begin(), analytic.end(), [&](cplx a, cplx b) {
        return std::abs(a - numeric[i]) < std::abs(b - numeric[i]);
      });
      const cplx a = *best;
      analytic.erase(best);
      const double err = std::abs(a - numeric[i]);
      worst = std::max(worst, err);
      if (!at_ep) worst_off_ep = std::max(worst_off_ep, err);
      csv.row({num(g), std::to_string(i), num(numeric[i].real()), num(numeric[i].imag()), num(a.real()),
               num(a.imag()), num(err)});
    }
  }
  out.write("spectrum.csv", csv.str());
  out.extra["max_discrepancy"] = worst;
  out.extra["max_discrepancy_off_exceptional_points"] = worst_off_ep;
}

json symmetry_json(const PlaquetteConfig& cfg) {
  const ComplexMatrix h = build_linear_hamiltonian(cfg);
  json report;
  report["gamma"] = cfg.gamma;
  json ops = json::array();
  for (const auto& p : parity_candidates(cfg)) {
    std::vector<std::size_t> perm;
    for (std::size_t i = 0; i < p.matrix.rows(); ++i)
      for (std::size_t j = 0; j < p.matrix.cols(); ++j)
        if (p.matrix(i, j) != cplx{}) perm.push_back(j);
    ops.push_back({{"name", parity_name(p.label)},
                   {"permutation", perm},
                   {"pseudo_hermitian", check_pseudo_hermiticity(h, p)}});
  }
  report["parity_operators"] = ops;
  const PtPhaseReport phase = classify_pt_phase(cfg);
  report["regime"] = regime_name(phase.regime);
  report["ep_order"] = phase.ep_order ? json(*phase.ep_order) : json(nullptr);
  report["real_eigenvalue_count"] = phase.real_eigenvalue_count;
  json eig = json::array();
  for (const auto& z : eig_complex(h)) eig.push_back({z.real(), z.imag()});
  report["eigenvalues"] = eig;
  return report;
}

void cmd_symmetry_report(const ExperimentConfig& c, Outputs& out) {
  json report;
  report["plaquette"] = c.plaquette;
  report["at_gamma"] = symmetry_json(c.plaquette);
  if (c.gamma_range) {
    json sweep = json::array();
    for (double g : gamma_grid(*c.gamma_range)) sweep.push_back(symmetry_json(c.plaquette.with_gamma(g)));
    report["sweep"] = sweep;
  }
  out.write("symmetry_report.json", report.dump(2) + "\n");
}

void cmd_branches(const ExperimentConfig& c, Outputs& out) {
  const double E = energy_of(c);
  const auto all = analytic_branches(c.plaquette, E);
  std::vector<std::string> header{"branch", "symbol", "root_choice"};
  for (const auto& h : branch_header(c.plaquette)) header.push_back(h);
  Csv csv(header);
  for (const auto& b : all) {
    if (c.branch && branch_id(b.label) != *c.branch) continue;
    const StateVector u = b.state.to_state();
    const StabilitySpectrum s = stability_of(c.plaquette, E, u);
    std::vector<std::string> row{branch_id(b.label), symbol_for(b.label, family_size(all, b.label)), b.root_choice};
    for (auto& f : branch_row(c.plaquette.gamma, b.state, residual_norm(c.plaquette, E, u), s)) row.push_back(f);
    csv.row(row);
  }
  out.write("branches.csv", csv.str());
}

std::vector<BranchLabel> requested_labels(const ExperimentConfig& c, double gamma, double E) {
  if (c.branch) return {parse_branch_label(c.plaquette.kind, *c.branch)};
  std::vector<BranchLabel> labels;
  for (const auto& b : analytic_branches(c.plaquette.with_gamma(gamma), E)) {
    if (b.label.name == BranchName::case1b) continue;  // isolated points only
    if (b.label.name == BranchName::case2 && b.label.index > 0) continue;  // mirror image of index 0
    labels.push_back(b.label);
  }
  return labels;
}

struct ContinuationJob {
  BranchLabel label;
  double start = 0.0;
  std::string symbol;
};

void run_continuations(const ExperimentConfig& c, const std::vector<ContinuationJob>& jobs, Outputs& out) {
  const double E = energy_of(c);
  std::vector<BranchCurve> curves(jobs.size());
  std::vector<std::vector<BifurcationEvent>> events(jobs.size());
  parallel_for(jobs.size(), [&](std::size_t i) {
    curves[i] = continue_branch(c.plaquette, jobs[i].label, E, jobs[i].start, c.gamma_range->hi, c.gamma_range->step);
    events[i] = detect_bifurcations(curves[i]);
  });

  json summary = json::array();
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const std::string id = branch_id(jobs[i].label);
    Csv csv(branch_header(c.plaquette));
    for (const auto& s : curves[i].samples) csv.row(branch_row(s.gamma, s.madelung, s.residual, s.spectrum));
    out.write("branch_" + id + ".csv", csv.str());

    Csv ev({"gamma", "kind", "description"});
    json ev_json = json::array();
    for (const auto& e : events[i]) {
      ev.row({num(e.gamma), std::string(event_name(e.kind)), e.description});
      ev_json.push_back({{"gamma", e.gamma}, {"kind", event_name(e.kind)}, {"description", e.description}});
    }
    out.write("events_" + id + ".csv", ev.str());

    json entry{{"branch", id}, {"symbol", jobs[i].symbol}, {"gamma_start", jobs[i].start},
               {"samples", curves[i].samples.size()}, {"events", ev_json}};
    if (curves[i].termination) {
      const auto& t = *curves[i].termination;
      entry["termination"] = {{"gamma", t.gamma}, {"bracket", {t.gamma_lo, t.gamma_hi}}, {"reason", t.reason}};
    } else {
      entry["termination"] = nullptr;
    }
    summary.push_back(entry);
  }
  out.extra["branches"] = summary;
}

// Continuation jobs for every branch in the window; each branch starts at
// the first grid point where its closed form exists.
std::vector<ContinuationJob> continuation_jobs(const ExperimentConfig& c) {
  const double E = energy_of(c);
  const auto grid = gamma_grid(*c.gamma_range);
  std::vector<ContinuationJob> jobs;
  auto have = [&](const BranchLabel& l) {
    return std::any_of(jobs.begin(), jobs.end(), [&](const ContinuationJob& j) { return j.label == l; });
  };
  for (double g : grid) {
    const PlaquetteConfig cfg = c.plaquette.with_gamma(g);
    const auto all = analytic_branches(cfg, E);
    for (const auto& label : requested_labels(c, g, E)) {
      if (have(label) || !closed_form_state(cfg, label, E)) continue;
      // Indexed families are enumerated once, at the window start, so that
      // their indices keep a fixed meaning.
      if ((label.name == BranchName::d_branch || label.name == BranchName::case1ab) && g != grid.front() &&
          std::any_of(jobs.begin(), jobs.end(), [&](const ContinuationJob& j) { return j.label.name == label.name; }))
        continue;
      jobs.push_back({label, g, symbol_for(label, family_size(all, label))});
    }
    if (c.branch && !jobs.empty()) break;
  }
  if (c.branch && jobs.empty())
    throw PreconditionError("branch " + *c.branch + " does not exist anywhere in the gamma window");
  return jobs;
}

void cmd_continue(const ExperimentConfig& c, Outputs& out) { run_continuations(c, continuation_jobs(c), out); }

void write_planes(const ExperimentConfig& c, double gamma, Outputs& out, json& summary) {
  const double E = energy_of(c);
  const PlaquetteConfig cfg = c.plaquette.with_gamma(gamma);
  const auto all = analytic_branches(cfg, E);
  std::vector<BranchLabel> labels;
  if (c.branch) {
    labels.push_back(parse_branch_label(cfg.kind, *c.branch));
  } else {
    for (const auto& b : all)
      if (!(b.label.name == BranchName::case2 && b.label.index > 0)) labels.push_back(b.label);
  }
  for (const auto& label : labels) {
    const StateVector u = branch_state(cfg, label, E);
    const StabilitySpectrum s = stability_of(cfg, E, u);
    const std::string name = "plane_" + branch_id(label) + "_" + gamma_tag(gamma) + ".csv";
    out.write(name, plane_csv(s));
    summary.push_back({{"branch", branch_id(label)},
                       {"symbol", symbol_for(label, family_size(all, label))},
                       {"gamma", gamma},
                       {"file", name},
                       {"stable", s.stable()},
                       {"n_real_pairs", s.n_real_pairs},
                       {"n_imag_pairs", s.n_imag_pairs},
                       {"n_quartets", s.n_quartets},
                       {"n_zero", s.n_zero},
                       {"max_re_lambda", s.max_growth_rate}});
  }
}

void cmd_stability(const ExperimentConfig& c, Outputs& out) {
  json summary = json::array();
  write_planes(c, c.plaquette.gamma, out, summary);
  out.write("stability.json", summary.dump(2) + "\n");
}

PerturbationSpec default_perturbation(const PlaquetteConfig& cfg, double E, const StateVector& u) {
  // Unstable states are kicked along their most unstable mode; stable ones
  // get a seeded random kick, since their leading "mode" is neutral.
  PerturbationSpec p;
  p.delta = 1e-3;
  const StabilitySpectrum s = stability_of(cfg, E, u);
  p.mode = s.stable() ? PerturbationMode::random : PerturbationMode::eigenmode;
  return p;
}

void write_trajectory(const ExperimentConfig& c, const BranchLabel& label, Outputs& out, json& summary) {
  const double E = energy_of(c);
  const PlaquetteConfig& cfg = c.plaquette;
  const StateVector u0 = branch_state(cfg, label, E);
  PerturbationSpec spec = c.perturbation ? *c.perturbation : default_perturbation(cfg, E, u0);
  if (c.seed) spec.seed = *c.seed;
  const StateVector start = perturb(cfg, E, u0, spec);
  Trajectory traj = integrate(cfg, start, c.integration.t_end, c.integration.dt, c.integration.stride);
  const auto parities = parity_candidates(cfg);
  if (!parities.empty()) diagnostics(traj, cfg, parities.front());

  std::vector<std::string> header{"t"};
  for (const auto& h : site_columns(cfg, "|u_", "|^2")) header.push_back(h);
  for (const char* h : {"total_power", "re_ptip", "im_ptip", "power_balance_residual", "pt_balance_residual"})
    header.push_back(h);
  Csv csv(header);
  for (std::size_t s = 0; s < traj.states.size(); ++s) {
    std::vector<std::string> row{num(traj.times[s])};
    double total = 0.0;
    for (const auto& z : traj.states[s]) {
      row.push_back(num(std::norm(z)));
      total += std::norm(z);
    }
    row.push_back(num(total));
    if (traj.diagnostics.empty()) {
      for (int k = 0; k < 4; ++k) row.push_back("nan");
    } else {
      const Diagnostics& d = traj.diagnostics[s];
      row.push_back(num(d.pt_inner_product.real()));
      row.push_back(num(d.pt_inner_product.imag()));
      row.push_back(num(d.power_balance_residual));
      row.push_back(num(d.pt_balance_residual));
    }
    csv.row(row);
  }
  const std::string name = "trajectory_" + branch_id(label) + "_" + gamma_tag(cfg.gamma) + ".csv";
  out.write(name, csv.str());

  static const char* mode_names[] = {"uniform", "random", "eigenmode"};
  summary.push_back({{"branch", branch_id(label)},
                     {"file", name},
                     {"perturbation",
                      {{"delta", spec.delta},
                       {"mode", mode_names[static_cast<int>(spec.mode)]},
                       {"index", spec.index},
                       {"seed", spec.seed}}},
                     {"parity", parities.empty() ? json(nullptr) : json(parity_name(parities.front().label))},
                     {"blew_up", traj.blew_up},
                     {"t_final", traj.times.back()},
                     {"plot_hint", "log-y"}});
}

void cmd_evolve(const ExperimentConfig& c, Outputs& out) {
  json summary = json::array();
  write_trajectory(c, parse_branch_label(c.plaquette.kind, *c.branch), out, summary);
  out.extra["trajectories"] = summary;
}

// ---------------------------------------------------------------------------
// Figures

struct FigurePlan {
  std::string kind;  // branches | planes | evolution
  PlaquetteKind plaquette;
  double E;
  GammaRange window;
  std::vector<double> gammas;
};

FigurePlan figure_plan(const std::string& fig) {
  using K = PlaquetteKind;
  static const std::map<std::string, FigurePlan> plans = {
      {"fig2", {"branches", K::A_0p0m, 2.0, {0.0, 2.2, 0.01}, {}}},
      {"fig3", {"planes", K::A_0p0m, 2.0, {}, {0.5, 1.2, 1.6, 1.9}}},
      {"fig4", {"evolution", K::A_0p0m, 2.0, {}, {1.9}}},
      {"fig5", {"branches", K::B_pmpm, 2.0, {0.0, 2.2, 0.01}, {}}},
      {"fig6", {"planes", K::B_pmpm, 2.0, {}, {1.0, 1.8}}},
      {"fig7", {"evolution", K::B_pmpm, 2.0, {}, {1.0}}},
      {"fig8", {"branches", K::C_ppmm, 2.0, {0.0, 1.2, 0.01}, {}}},
      {"fig9", {"evolution", K::C_ppmm, 2.0, {}, {0.5}}},
      {"fig10", {"branches", K::D_pm0pm, 15.0, {0.1, 1.2, 0.01}, {}}},
      {"fig11", {"planes", K::D_pm0pm, 15.0, {}, {0.1, 0.95}}},
      {"fig12", {"evolution", K::D_pm0pm, 15.0, {}, {0.1}}},
  };
  const auto it = plans.find(fig);
  if (it == plans.end()) throw SchemaError("unknown figure '" + fig + "' (expected fig2 .. fig12)", 1);
  return it->second;
}

std::string plot_script(const std::string& fig, const FigurePlan& plan) {
  std::ostringstream py;
  py << "# Regenerates " << fig << " from the CSV files in this directory.\n"
     << "import glob, json, os\n"
     << "import matplotlib\n"
     << "matplotlib.use('Agg')\n"
     << "import matplotlib.pyplot as plt\n"
     << "import pandas as pd\n\n"
     << "here = os.path.dirname(os.path.abspath(__file__))\n"
     << "manifest = json.load(open(os.path.join(here, 'manifest.json')))\n";
  if (plan.kind == "branches") {
    py << "fig, ax = plt.subplots(2, 2, figsize=(10, 8))\n"
       << "for entry in manifest['branches']:\n"
       << "    df = pd.read_csv(os.path.join(here, 'branch_' + entry['branch'] + '.csv'))\n"
       << "    label = entry['symbol'] or entry['branch']\n"
       << "    sites = [c for c in df.columns if len(c) == 1 and c not in ('E', 'G')]\n"
       << "    for s in sites:\n"
       << "        ax[0, 0].plot(df['gamma'], df[s] ** 2, '.', ms=2, label=label if s == sites[0] else None)\n"
       << "    phases = [c for c in df.columns if c.startswith('phi_')]\n"
       << "    for a, b in zip(phases, phases[1:]):\n"
       << "        ax[0, 1].plot(df['gamma'], df[b] - df[a], '.', ms=2)\n"
       << "    ax[1, 0].plot(df['gamma'], df['max_re_lambda'], '.', ms=2)\n"
       << "    ax[1, 1].plot(df['gamma'], df['n_imag_pairs'], '.', ms=2)\n"
       << "ax[0, 0].set_ylabel('|u_n|^2'); ax[0, 1].set_ylabel('phase differences')\n"
       << "ax[1, 0].set_ylabel('max Re lambda'); ax[1, 1].set_ylabel('imaginary pairs')\n"
       << "for a in ax.flat: a.set_xlabel('gamma')\n"
       << "ax[0, 0].legend()\n";
  } else if (plan.kind == "planes") {
    py << "planes = manifest['planes']\n"
       << "gammas = sorted({p['gamma'] for p in planes})\n"
       << "fig, ax = plt.subplots(1, len(gammas), figsize=(5 * len(gammas), 4), squeeze=False)\n"
       << "for i, g in enumerate(gammas):\n"
       << "    for p in planes:\n"
       << "        if p['gamma'] != g: continue\n"
       << "        df = pd.read_csv(os.path.join(here, p['file']))\n"
       << "        ax[0, i].plot(df['re_lambda'], df['im_lambda'], 'o', label=p['symbol'] or p['branch'])\n"
       << "    ax[0, i].set_title('gamma = %g' % g)\n"
       << "    ax[0, i].set_xlabel('Re lambda'); ax[0, i].set_ylabel('Im lambda')\n"
       << "    ax[0, i].legend()\n";
  } else {
    py << "runs = manifest['trajectories']\n"
       << "fig, ax = plt.subplots(1, len(runs), figsize=(5 * len(runs), 4), squeeze=False)\n"
       << "for i, r in enumerate(runs):\n"
       << "    df = pd.read_csv(os.path.join(here, r['file']))\n"
       << "    for c in [c for c in df.columns if c.startswith('|u_')]:\n"
       << "        ax[0, i].semilogy(df['t'], df[c], label=c)\n"
       << "    ax[0, i].set_title(r['branch']); ax[0, i].set_xlabel('t')\n"
       << "    ax[0, i].legend()\n";
  }
  py << "fig.tight_layout()\n"
     << "fig.savefig(os.path.join(here, '" << fig << ".png'), dpi=150)\n";
  return py.str();
}

void cmd_reproduce_figure(const ExperimentConfig& c, Outputs& out) {
  const std::string fig = *c.figure;
  const FigurePlan plan = figure_plan(fig);
  ExperimentConfig sub = c;
  sub.plaquette = {plan.plaquette, 1.0, 0.0};
  sub.e_or_g = plan.E;
  sub.branch.reset();
  out.extra["figure"] = fig;
  if (plan.kind == "branches") {
    sub.gamma_range = plan.window;
    run_continuations(sub, continuation_jobs(sub), out);
  } else if (plan.kind == "planes") {
    json summary = json::array();
    for (double g : plan.gammas) write_planes(sub, g, out, summary);
    out.extra["planes"] = summary;
  } else {
    json summary = json::array();
    for (double g : plan.gammas) {
      sub.plaquette.gamma = g;
      std::vector<BranchLabel> labels;
      for (const auto& b : analytic_branches(sub.plaquette, plan.E)) {
        if (b.label.name == BranchName::case1b) continue;
        if (b.label.name == BranchName::case2 && b.label.index > 0) continue;  // mirror of index 0
        labels.push_back(b.label);
      }
      for (const auto& label : labels) write_trajectory(sub, label, out, summary);
    }
    out.extra["trajectories"] = summary;
  }
  out.write("plot_" + fig + ".py", plot_script(fig, plan));
}

}  // namespace

// ---------------------------------------------------------------------------

ExperimentConfig parse_config(const std::string& text, const std::string& command) {
  if (std::find(kCommands.begin(), kCommands.end(), command) == kCommands.end())
    throw SchemaError("unknown command '" + command + "'", 1);

  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    const std::size_t line = line_at(text, e.byte > 0 ? e.byte - 1 : 0);
    throw SchemaError("line " + std::to_string(line) + ": malformed JSON: " + e.what(), line);
  }
  Validator v(text);
  if (!root.is_object()) v.fail({}, "config must be a JSON object");
  v.only_keys(root, {}, {"command", "plaquette", "E", "G", "gamma_range", "branch", "perturbation", "integration",
                         "figure", "seed"});

  ExperimentConfig c;
  c.command = command;
  c.echo = root;
  if (root.contains("command") && v.string(root, {"command"}) != command)
    v.fail({"command"}, "does not match the command line ('" + command + "')");

  if (command == "reproduce-figure") {
    c.figure = v.string(root, {"figure"});
    try {
      figure_plan(*c.figure);
    } catch (const SchemaError& e) {
      v.fail({"figure"}, e.what());
    }
    if (root.contains("seed")) c.seed = v.integer(root, {"seed"});
    if (root.contains("integration")) {
      const json& in = v.object(root, {"integration"});
      if (in.contains("t_end")) c.integration.t_end = v.number(in, {"integration", "t_end"});
    }
    return c;
  }

  if (!root.contains("plaquette")) v.fail({"plaquette"}, "missing required field");
  const json& pq = v.object(root, {"plaquette"});
  v.only_keys(pq, {"plaquette"}, {"kind", "k", "gamma"});
  const std::string kind = v.string(pq, {"plaquette", "kind"});
  try {
    c.plaquette.kind = kind_from_code(kind);
  } catch (const Error&) {
    v.fail({"plaquette", "kind"}, "must be one of \"A\", \"B\", \"C\", \"D\"");
  }
  c.plaquette.k = v.number(pq, {"plaquette", "k"});
  c.plaquette.gamma = pq.contains("gamma") ? v.number(pq, {"plaquette", "gamma"}) : 0.0;

  if (root.contains("E") && root.contains("G")) v.fail({"G"}, "give either E or G, not both");
  if (root.contains("E")) c.e_or_g = v.number(root, {"E"});
  if (root.contains("G")) c.e_or_g = v.number(root, {"G"});
  if (needs_energy(command) && !c.e_or_g) v.fail({"E"}, "missing required field (E, or G for the cross)");

  if (root.contains("gamma_range")) {
    const json& gr = v.object(root, {"gamma_range"});
    v.only_keys(gr, {"gamma_range"}, {"lo", "hi", "step"});
    GammaRange r;
    r.lo = v.number(gr, {"gamma_range", "lo"});
    r.hi = v.number(gr, {"gamma_range", "hi"});
    r.step = v.number(gr, {"gamma_range", "step"});
    if (r.lo > r.hi) v.fail({"gamma_range", "hi"}, "must be >= lo");
    if (!(r.step > 0.0)) v.fail({"gamma_range", "step"}, "must be positive");
    if ((r.hi - r.lo) / r.step > 1e6) v.fail({"gamma_range", "step"}, "more than 1e6 samples");
    c.gamma_range = r;
  } else if (command == "spectrum" || command == "continue") {
    v.fail({"gamma_range"}, "missing required field");
  }

  if (root.contains("branch")) {
    c.branch = v.string(root, {"branch"});
    try {
      parse_branch_label(c.plaquette.kind, *c.branch);
    } catch (const Error& e) {
      v.fail({"branch"}, e.what());
    }
  } else if (command == "evolve") {
    v.fail({"branch"}, "missing required field");
  }

  if (root.contains("perturbation")) {
    const json& p = v.object(root, {"perturbation"});
    v.only_keys(p, {"perturbation"}, {"delta", "mode", "index", "seed"});
    PerturbationSpec spec;
    spec.delta = v.number(p, {"perturbation", "delta"});
    if (!(spec.delta > 0.0)) v.fail({"perturbation", "delta"}, "must be positive");
    const std::string mode = v.string(p, {"perturbation", "mode"});
    if (mode == "uniform") {
      spec.mode = PerturbationMode::uniform;
    } else if (mode == "random") {
      spec.mode = PerturbationMode::random;
    } else if (mode == "eigenmode") {
      spec.mode = PerturbationMode::eigenmode;
    } else {
      v.fail({"perturbation", "mode"}, "must be uniform, random or eigenmode");
    }
    if (p.contains("index")) spec.index = v.integer(p, {"perturbation", "index"});
    if (p.contains("seed")) spec.seed = v.integer(p, {"perturbation", "seed"});
    c.perturbation = spec;
  }

  if (root.contains("integration")) {
    const json& in = v.object(root, {"integration"});
    v.only_keys(in, {"integration"}, {"t_end", "dt", "stride"});
    if (in.contains("t_end")) c.integration.t_end = v.number(in, {"integration", "t_end"});
    if (in.contains("dt")) c.integration.dt = v.number(in, {"integration", "dt"});
    if (in.contains("stride")) c.integration.stride = v.integer(in, {"integration", "stride"});
    if (!(c.integration.t_end > 0.0)) v.fail({"integration", "t_end"}, "must be positive");
    if (!(c.integration.dt > 0.0)) v.fail({"integration", "dt"}, "must be positive");
    if (c.integration.stride == 0) v.fail({"integration", "stride"}, "must be at least 1");
  }
  if (root.contains("seed")) c.seed = v.integer(root, {"seed"});
  if (root.contains("figure")) v.fail({"figure"}, "only valid for reproduce-figure");
  return c;
}

ExperimentConfig figure_preset(const std::string& figure) {
  return parse_config(json{{"figure", figure}}.dump(), "reproduce-figure");
}

std::vector<fs::path> run(const ExperimentConfig& config, std::ostream& log) {
  const auto t0 = std::chrono::steady_clock::now();
  fs::create_directories(config.output_dir);
  Outputs out;
  out.dir = config.output_dir;

  const std::string& cmd = config.command;
  if (cmd == "spectrum") {
    cmd_spectrum(config, out);
  } else if (cmd == "symmetry-report") {
    cmd_symmetry_report(config, out);
  } else if (cmd == "branches") {
    cmd_branches(config, out);
  } else if (cmd == "continue") {
    cmd_continue(config, out);
  } else if (cmd == "stability") {
    cmd_stability(config, out);
  } else if (cmd == "evolve") {
    cmd_evolve(config, out);
  } else if (cmd == "reproduce-figure") {
    cmd_reproduce_figure(config, out);
  } else {
    throw SchemaError("unknown command '" + cmd + "'", 1);
  }

  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  json manifest;
  manifest["tool"] = "ptplaq";
  manifest["version"] = kVersion;
  manifest["command"] = cmd;
  manifest["inputs"] = config.echo;
  manifest["seed"] = config.seed ? json(*config.seed) : json(nullptr);
  json files = json::array();
  for (const auto& f : out.files) files.push_back(f.filename().string());
  manifest["outputs"] = files;
  for (auto it = out.extra.begin(); it != out.extra.end(); ++it) manifest[it.key()] = it.value();
  manifest["wall_time_s"] = wall;
  manifest["timestamp"] = utc_timestamp();
  out.write("manifest.json", manifest.dump(2) + "\n");
  for (const auto& f : out.files) log << f.string() << "\n";
  return out.files;
}

int main_entry(int argc, char** argv) {
  CLI::App app{"ptplaq: PT-symmetric nonlinear plaquette laboratory"};
  app.set_version_flag("--version", kVersion);
  std::string command;
  std::string figure;
  std::string config_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  app.add_option("command", command, "spectrum | symmetry-report | branches | continue | stability | evolve | "
                                     "reproduce-figure")
      ->required();
  app.add_option("figure", figure, "figure id for reproduce-figure (fig2 .. fig12)");
  app.add_option("--config", config_path, "experiment config (JSON)");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--seed", seed, "seed for random perturbations");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  ExperimentConfig config;
  try {
    std::string text;
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw SchemaError("cannot read config file " + config_path, 0);
      std::ostringstream buf;
      buf << in.rdbuf();
      text = buf.str();
    } else if (command == "reproduce-figure" && !figure.empty()) {
      text = json{{"figure", figure}}.dump();
    } else {
      throw SchemaError("--config is required for " + command, 0);
    }
    if (command == "reproduce-figure" && !figure.empty()) {
      json j = json::parse(text, nullptr, false);
      if (j.is_object() && !j.contains("figure")) {
        j["figure"] = figure;
        text = j.dump(2);
      }
    }
    config = parse_config(text, command);
    config.output_dir = out_dir;
    if (seed) config.seed = seed;
  } catch (const SchemaError& e) {
    std::cerr << "ptplaq: config error: " << (config_path.empty() ? "" : config_path + ": ") << e.what() << "\n";
    return 2;
  }

  try {
    run(config, std::cout);
  } catch (const SchemaError& e) {
    std::cerr << "ptplaq: config error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "ptplaq: error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "ptplaq: error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}

}  // namespace ptplaq::cli
