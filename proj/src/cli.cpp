#include "qms/cli.hpp"

#include "qms/capacity.hpp"
#include "qms/criteria.hpp"
#include "qms/dirichlet.hpp"
#include "qms/errors.hpp"
#include "qms/kernel.hpp"
#include "qms/parallel.hpp"
#include "qms/solver.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <random>
#include <sstream>

#ifndef QMS_VERSION
#define QMS_VERSION "0.0.0"
#endif

namespace qms::cli {

using json = nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
  throw InputError("scenario: " + path + ": " + msg);
}

json num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

std::string fmt(double v) { return num(v).dump(); }

const json& require(const json& j, const std::string& path, const char* key) {
  if (!j.is_object() || !j.contains(key)) fail(path, std::string("missing field '") + key + "'");
  return j.at(key);
}

double number(const json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  return j.get<double>();
}

double number_or(const json& j, const std::string& path, const char* key, double def) {
  if (!j.is_object() || !j.contains(key)) return def;
  return number(j.at(key), path + "." + key);
}

std::string string_or(const json& j, const std::string& path, const char* key, const std::string& def) {
  if (!j.is_object() || !j.contains(key)) return def;
  if (!j.at(key).is_string()) fail(path + "." + key, "expected a string");
  return j.at(key).get<std::string>();
}

bool bool_or(const json& j, const std::string& path, const char* key, bool def) {
  if (!j.is_object() || !j.contains(key)) return def;
  if (!j.at(key).is_boolean()) fail(path + "." + key, "expected true or false");
  return j.at(key).get<bool>();
}

std::size_t count_or(const json& j, const std::string& path, const char* key, std::size_t def) {
  if (!j.is_object() || !j.contains(key)) return def;
  if (!j.at(key).is_number_unsigned()) fail(path + "." + key, "expected a nonnegative integer");
  return j.at(key).get<std::size_t>();
}

const json& section(const json& root, const char* key) {
  static const json empty = json::object();
  if (!root.contains(key)) return empty;
  if (!root.at(key).is_object()) fail(key, "expected an object");
  return root.at(key);
}

std::vector<double> coords_of(const json& j, const std::string& path) {
  if (!j.is_array()) fail(path, "expected an array of numbers");
  std::vector<double> c;
  for (std::size_t i = 0; i < j.size(); ++i) c.push_back(number(j[i], path + "[" + std::to_string(i) + "]"));
  return c;
}

std::vector<Point> generate_points(const json& g, std::uint64_t seed) {
  const std::string type = string_or(g, "space.generator", "type", "");
  std::vector<Point> pts;
  if (type == "uniform_grid") {
    const std::size_t dim = count_or(g, "space.generator", "dim", 3);
    const std::size_t side = count_or(g, "space.generator", "side", 8);
    const double h = number_or(g, "space.generator", "spacing", 1.0);
    if (dim == 0 || side == 0 || !(h > 0.0)) fail("space.generator", "dim, side and spacing must be positive");
    std::size_t total = 1;
    for (std::size_t d = 0; d < dim; ++d) total *= side;
    for (std::size_t k = 0; k < total; ++k) {
      Point p;
      p.id = "g" + std::to_string(k);
      std::size_t r = k;
      for (std::size_t d = 0; d < dim; ++d) {
        p.coords.push_back(h * static_cast<double>(r % side));
        r /= side;
      }
      pts.push_back(std::move(p));
    }
  } else if (type == "interval_midpoints") {
    const std::size_t cells = count_or(g, "space.generator", "cells", 64);
    if (cells == 0) fail("space.generator.cells", "must be positive");
    for (std::size_t i = 0; i < cells; ++i) {
      pts.push_back(Point{"x" + std::to_string(i), {(i + 0.5) / static_cast<double>(cells)}, std::nullopt});
    }
  } else if (type == "random_cube") {
    const std::size_t n = count_or(g, "space.generator", "n", 16);
    const std::size_t dim = count_or(g, "space.generator", "dim", 3);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
      Point p;
      p.id = "r" + std::to_string(i);
      for (std::size_t d = 0; d < dim; ++d) p.coords.push_back(u(rng));
      pts.push_back(std::move(p));
    }
  } else {
    fail("space.generator.type", "unknown generator '" + type + "'");
  }
  return pts;
}

std::vector<Point> load_points(const json& root, std::uint64_t seed) {
  const json& sp = require(root, "", "space");
  if (sp.contains("generator")) return generate_points(sp.at("generator"), seed);
  const json& arr = require(sp, "space", "points");
  if (!arr.is_array() || arr.empty()) fail("space.points", "expected a nonempty array");
  std::vector<Point> pts;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string path = "space.points[" + std::to_string(i) + "]";
    const json& e = arr[i];
    Point p;
    if (e.is_string()) {
      p.id = e.get<std::string>();
    } else if (e.is_object()) {
      p.id = string_or(e, path, "id", "");
      if (e.contains("coords")) p.coords = coords_of(e.at("coords"), path + ".coords");
      if (e.contains("delta")) p.boundary_distance = number(e.at("delta"), path + ".delta");
    } else {
      fail(path, "expected an id or an object");
    }
    if (p.id.empty()) fail(path, "point id must be nonempty");
    pts.push_back(std::move(p));
  }
  return pts;
}

SpaceOptions space_options(const json& root, std::uint64_t seed) {
  SpaceOptions o;
  o.seed = seed;
  const json& k = section(root, "kappa");
  if (k.contains("declared")) o.declared_kappa = number(k.at("declared"), "kappa.declared");
  const std::string mode = string_or(k, "kappa", "mode", "exact");
  if (mode == "sampled") o.mode = KappaMode::sampled;
  else if (mode != "exact") fail("kappa.mode", "expected 'exact' or 'sampled'");
  o.samples = count_or(k, "kappa", "samples", o.samples);
  return o;
}

std::optional<double> self_distance(const json& k) {
  if (!k.contains("selfDistance")) return std::nullopt;
  return number(k.at("selfDistance"), "kernel.selfDistance");
}

KernelModel load_kernel(const json& root, std::uint64_t seed) {
  auto pts = load_points(root, seed);
  const SpaceOptions so = space_options(root, seed);
  const json& k = section(root, "kernel");
  const std::string family = string_or(k, "kernel", "family", "custom");
  const int dim = static_cast<int>(number_or(k, "kernel", "dim", 3));
  if (family == "custom") {
    const json& r = require(root, "", "rho");
    const std::size_t n = pts.size();
    if (!r.is_array() || r.size() != n * (n + 1) / 2) {
      fail("rho", "expected the upper triangle with diagonal: " + std::to_string(n * (n + 1) / 2) + " numbers");
    }
    const auto upper = coords_of(r, "rho");
    return KernelModel(QuasiMetricSpace::from_upper_triangle(std::move(pts), upper, so), KernelFamily::custom,
                       "custom");
  }
  KernelSpec spec;
  if (family == "riesz") spec = RieszParams{dim, number_or(k, "kernel", "alpha", 2.0), self_distance(k)};
  else if (family == "poisson") spec = PoissonParams{static_cast<int>(number_or(k, "kernel", "dim", 1)), self_distance(k)};
  else if (family == "modelC11") spec = ModelC11Params{dim, self_distance(k)};
  else if (family == "green1d") spec = Green1dParams{};
  else if (family == "naim1d") spec = Naim1dParams{};
  else fail("kernel.family", "unknown family '" + family + "'");
  return make_kernel(spec, std::move(pts), so);
}

AtomicMeasure load_measure(const json& root, const QuasiMetricSpace& space, const std::string& name) {
  const json& ms = section(root, "measures");
  if (!ms.contains(name)) fail("measures", "no measure named '" + name + "'");
  const json& m = ms.at(name);
  const std::string path = "measures." + name;
  if (m.is_object() && m.contains("uniform")) {
    const double w = number(m.at("uniform"), path + ".uniform");
    if (!(w >= 0.0)) fail(path + ".uniform", "weight must be nonnegative");
    return AtomicMeasure::uniform(space.size(), w);
  }
  if (!m.is_array()) fail(path, "expected an array of {id, weight} or {\"uniform\": w}");
  std::vector<std::pair<std::string, double>> entries;
  for (std::size_t i = 0; i < m.size(); ++i) {
    const std::string ep = path + "[" + std::to_string(i) + "]";
    const std::string id = string_or(m[i], ep, "id", "");
    if (!space.contains(id)) fail(ep + ".id", "unknown point '" + id + "'");
    entries.emplace_back(id, number(require(m[i], ep, "weight"), ep + ".weight"));
  }
  return AtomicMeasure::from_ids(space, entries);
}

Field load_field(const json& root, const KernelModel& kernel, const std::string& name) {
  const json& fs = section(root, "fields");
  if (!fs.contains(name)) fail("fields", "no field named '" + name + "'");
  const json& f = fs.at(name);
  const std::string path = "fields." + name;
  const auto& space = kernel.space();
  if (f.is_object() && f.contains("constant")) return Field(space.size(), number(f.at("constant"), path + ".constant"));
  if (f.is_object() && f.contains("potential")) {
    if (!f.at("potential").is_string()) fail(path + ".potential", "expected a measure name");
    Field v = potential(kernel, load_measure(root, space, f.at("potential").get<std::string>()));
    const double s = number_or(f, path, "scale", 1.0);
    for (double& x : v) x *= s;
    return v;
  }
  if (!f.is_array()) fail(path, "expected an array of {id, value}, {\"constant\": c} or {\"potential\": name}");
  Field v(space.size(), 0.0);
  for (std::size_t i = 0; i < f.size(); ++i) {
    const std::string ep = path + "[" + std::to_string(i) + "]";
    const std::string id = string_or(f[i], ep, "id", "");
    if (!space.contains(id)) fail(ep + ".id", "unknown point '" + id + "'");
    v[space.index_of(id)] = number(require(f[i], ep, "value"), ep + ".value");
  }
  return v;
}

double load_q(const json& root) {
  if (root.contains("q")) {
    const double q = number(root.at("q"), "q");
    if (!(q > 1.0)) fail("q", "must exceed 1");
    return q;
  }
  if (root.contains("p")) {
    const double p = number(root.at("p"), "p");
    if (!(p > 1.0)) fail("p", "must exceed 1");
    return p / (p - 1.0);
  }
  return 2.0;
}

json field_by_id(const QuasiMetricSpace& space, const Field& f) {
  json o = json::object();
  for (std::size_t i = 0; i < f.size(); ++i) o[space.id(i)] = num(f[i]);
  return o;
}

json sparse_by_id(const QuasiMetricSpace& space, const Field& f) {
  json o = json::object();
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (f[i] != 0.0) o[space.id(i)] = num(f[i]);
  }
  return o;
}

json solve_json(const QuasiMetricSpace& space, const SolveReport& r) {
  return json{{"status", std::string(status_name(r.status))},
              {"iterations", r.iterations},
              {"residual", num(r.residual)},
              {"certificates", r.certificates},
              {"monotone", r.monotone},
              {"divergenceReason", r.divergence_reason},
              {"u", field_by_id(space, r.u)}};
}

json witness_json(const QuasiMetricSpace& space, const Witness& w) {
  return json{{"value", num(w.value)}, {"x", space.id(w.x)}, {"a", num(w.a)}};
}

SolveOptions solve_options(const json& s, const std::string& path) {
  SolveOptions o;
  o.tol = number_or(s, path, "tol", o.tol);
  o.max_iter = count_or(s, path, "maxIter", o.max_iter);
  if (s.contains("blowup")) o.blowup = number(s.at("blowup"), path + ".blowup");
  return o;
}

struct Output {
  json result = json::object();
  std::vector<std::string> csv_header;
  std::vector<std::vector<std::string>> csv_rows;
  int exit_code = kExitOk;
};

Output cmd_check_kernel(const json& root, std::uint64_t seed) {
  Output out;
  out.csv_header = {"kind", "x", "y", "z", "ratio"};
  try {
    const KernelModel k = load_kernel(root, seed);
    const auto& sp = k.space();
    const auto& scan = sp.kappa_scan();
    out.result["n"] = sp.size();
    out.result["family"] = std::string(family_name(k.family()));
    out.result["description"] = k.description();
    out.result["kappa"] = json{{"scanned", num(scan.value)},
                               {"used", num(sp.kappa())},
                               {"declared", sp.kappa_declared()},
                               {"lowerBoundOnly", scan.lower_bound_only},
                               {"triples", scan.triples},
                               {"witness", {sp.id(scan.witness[0]), sp.id(scan.witness[1]), sp.id(scan.witness[2])}}};
    out.csv_rows.push_back({"kappa", sp.id(scan.witness[0]), sp.id(scan.witness[1]), sp.id(scan.witness[2]),
                            fmt(scan.value)});
    if (sp.size() <= 256) {
      const auto ones = AtomicMeasure::uniform(sp.size(), 1.0);
      const auto h = harnack_check(k, ones);
      out.result["harnack"] = json{{"worstRatio", num(h.worst_ratio)}, {"x", sp.id(h.x)}, {"a", num(h.a)},
                                   {"checked", h.checked}};
    }
  } catch (const QuasiMetricViolation& v) {
    out.result["violation"] = json{{"ratio", num(v.ratio())},
                                   {"witnessIndex", {v.witness()[0], v.witness()[1], v.witness()[2]}},
                                   {"message", v.what()}};
    out.csv_rows.push_back({"violation", std::to_string(v.witness()[0]), std::to_string(v.witness()[1]),
                            std::to_string(v.witness()[2]), fmt(v.ratio())});
    out.exit_code = kExitCertifiedFailure;
  }
  return out;
}

Output cmd_solve(const json& root, std::uint64_t seed) {
  Output out;
  const KernelModel k = load_kernel(root, seed);
  const auto& sp = k.space();
  const json& s = section(root, "solve");
  const double q = load_q(root);
  const AtomicMeasure sigma = load_measure(root, sp, string_or(s, "solve", "sigma", "sigma"));
  const Field f = load_field(root, k, string_or(s, "solve", "f", "f"));
  const SolveOptions so = solve_options(s, "solve");
  const std::string method = string_or(s, "solve", "method", "picard");
  SolveReport r;
  try {
    if (method == "picard") r = picard_solve(k, sigma, q, f, so);
    else if (method == "small") r = guaranteed_solve_small(k, sigma, q, f, so);
    else if (method == "iterated") r = guaranteed_solve_iterated(k, sigma, q, f, so);
    else fail("solve.method", "expected 'picard', 'small' or 'iterated'");
  } catch (const HypothesisNotMet& e) {
    out.result["hypothesisNotMet"] = json{{"worstRatio", num(e.worst_ratio())}, {"message", e.what()}};
    out.exit_code = kExitCertifiedFailure;
    return out;
  }
  out.result["q"] = q;
  out.result["method"] = method;
  out.result["solve"] = solve_json(sp, r);
  out.csv_header = {"id", "f", "u"};
  for (std::size_t i = 0; i < sp.size(); ++i) out.csv_rows.push_back({sp.id(i), fmt(f[i]), fmt(r.u.empty() ? 0.0 : r.u[i])});
  return out;
}

Output cmd_znorm(const json& root, std::uint64_t seed) {
  Output out;
  const KernelModel k = load_kernel(root, seed);
  const auto& sp = k.space();
  const json& s = section(root, "znorm");
  const double q = load_q(root);
  const AtomicMeasure sigma = load_measure(root, sp, string_or(s, "znorm", "sigma", "sigma"));
  const Field f = load_field(root, k, string_or(s, "znorm", "f", "f"));
  const auto b = znorm(k, sigma, q, f, number_or(s, "znorm", "tol", 1e-6), solve_options(s, "znorm"));
  out.result["q"] = q;
  out.result["znorm"] = json{{"lower", num(b.lower)},
                             {"upper", num(b.upper)},
                             {"method", std::string(method_name(b.method))},
                             {"localNorm", num(b.local_norm)},
                             {"iteratedLimit", num(b.iterated_limit)},
                             {"iteratedSteps", b.iterated_steps},
                             {"solves", b.solves},
                             {"indeterminate", b.indeterminate}};
  if (bool_or(s, "znorm", "zprime", false)) {
    const auto z = zprime_norm(k, sigma, q, f);
    out.result["zprime"] = json{{"raw", num(z.raw)},
                                {"scaledUp", num(z.scaled_up)},
                                {"scaledDown", num(z.scaled_down)},
                                {"supportAlongG", num(z.support_along_g)},
                                {"converged", z.converged},
                                {"iterations", z.iterations},
                                {"stationarity", num(z.stationarity)},
                                {"note", z.note}};
  }
  out.csv_header = {"quantity", "value"};
  out.csv_rows = {{"lower", fmt(b.lower)}, {"upper", fmt(b.upper)}, {"iterated_limit", fmt(b.iterated_limit)}};
  return out;
}

Output cmd_criteria(const json& root, std::uint64_t seed) {
  Output out;
  const KernelModel k = load_kernel(root, seed);
  const auto& sp = k.space();
  const json& s = section(root, "criteria");
  const double q = load_q(root);
  const AtomicMeasure sigma = load_measure(root, sp, string_or(s, "criteria", "sigma", "sigma"));
  const AtomicMeasure omega = load_measure(root, sp, string_or(s, "criteria", "omega", "omega"));
  VerdictOptions vo;
  vo.epsilon = number_or(s, "criteria", "epsilon", 1.0);
  vo.structural = bool_or(s, "criteria", "structural", true);
  vo.threshold = bool_or(s, "criteria", "threshold", true);
  vo.threshold_tol = number_or(s, "criteria", "thresholdTol", vo.threshold_tol);
  vo.structural_opts.delta = number_or(s, "criteria", "delta", 0.5);
  vo.solve = solve_options(s, "criteria");
  const CriteriaReport r = verdict(k, sigma, q, omega, vo);
  json st = json::object();
  for (const auto& [name, c] : r.structural) {
    st[name] = json{{"constant", num(c.constant)}, {"x", sp.id(c.witness.x)}, {"a", num(c.witness.a)},
                    {"context", c.context}, {"vacuous", c.vacuous}};
  }
  out.result = json{{"q", q},
                    {"p", r.p},
                    {"epsilon", r.epsilon},
                    {"verdict", std::string(verdict_name(r.verdict))},
                    {"smallConstant", ConjugatePair::from_q(q).small_constant()},
                    {"smallConstantCertified", r.small_constant_certified},
                    {"boundsVerified", r.bounds_verified},
                    {"constantsFinite", r.constants_finite},
                    {"structural", st},
                    {"thresholdLower", num(r.threshold_lower)},
                    {"thresholdUpper", num(r.threshold_upper)},
                    {"notes", r.notes}};
  if (r.verdict != Verdict::vacuous) {
    out.result["pointwiseC"] = witness_json(sp, r.pointwise);
    out.result["infinitesimalC"] = witness_json(sp, r.infinitesimal);
    out.result["testingC"] = witness_json(sp, r.testing);
    out.result["weightedC"] = json{{"value", num(r.weighted.value)}, {"exact", r.weighted.exact},
                                      {"upper", num(r.weighted.upper)}, {"witness", r.weighted.witness}};
    out.result["solve"] = solve_json(sp, r.solve);
  }
  out.csv_header = {"constant", "value", "x", "a"};
  if (r.verdict != Verdict::vacuous) {
    out.csv_rows.push_back({"pointwise", fmt(r.pointwise.value), sp.id(r.pointwise.x), fmt(r.pointwise.a)});
    out.csv_rows.push_back({"infinitesimal", fmt(r.infinitesimal.value), sp.id(r.infinitesimal.x), fmt(r.infinitesimal.a)});
    out.csv_rows.push_back({"testing", fmt(r.testing.value), sp.id(r.testing.x), fmt(r.testing.a)});
    out.csv_rows.push_back({"weighted_norm", fmt(r.weighted.value), "", ""});
  }
  for (const auto& [name, c] : r.structural) {
    out.csv_rows.push_back({name, fmt(c.constant), sp.id(c.witness.x), fmt(c.witness.a)});
  }
  return out;
}

json capacity_json(const QuasiMetricSpace& sp, const CapacityResult& c) {
  return json{{"value", num(c.value)},     {"dualBound", num(c.dual_bound)}, {"kktResidual", num(c.kkt_residual)},
              {"gStar", sparse_by_id(sp, c.g_star)}, {"iterations", c.iterations}, {"feasible", c.feasible},
              {"converged", c.converged},  {"note", c.note}};
}

Output cmd_capacity(const json& root, std::uint64_t seed) {
  Output out;
  const KernelModel k = load_kernel(root, seed);
  const auto& sp = k.space();
  const json& s = section(root, "capacity");
  const double p = number_or(s, "capacity", "p", ConjugatePair::from_q(load_q(root)).p());
  if (!(p > 1.0)) fail("capacity.p", "must exceed 1");
  const AtomicMeasure sigma = load_measure(root, sp, string_or(s, "capacity", "sigma", "sigma"));
  CapacityOptions co;
  const std::string mode = string_or(s, "capacity", "mode", "everywhere");
  if (mode == "sigma_ae") co.mode = CapacityMode::sigma_ae;
  else if (mode != "everywhere") fail("capacity.mode", "expected 'everywhere' or 'sigma_ae'");
  out.csv_header = {"set", "value", "dual_bound", "kkt_residual"};

  json sets = json::array();
  if (s.contains("sets")) {
    const json& arr = s.at("sets");
    if (!arr.is_array()) fail("capacity.sets", "expected an array of id arrays");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string path = "capacity.sets[" + std::to_string(i) + "]";
      if (!arr[i].is_array() || arr[i].empty()) fail(path, "expected a nonempty array of ids");
      std::vector<PointIndex> e;
      std::string label;
      for (const auto& id : arr[i]) {
        if (!id.is_string() || !sp.contains(id.get<std::string>())) fail(path, "unknown point " + id.dump());
        e.push_back(sp.index_of(id.get<std::string>()));
        label += (label.empty() ? "" : " ") + id.get<std::string>();
      }
      const auto c = capacity(k, sigma, p, e, co);
      json cj = capacity_json(sp, c);
      cj["set"] = arr[i];
      sets.push_back(cj);
      out.csv_rows.push_back({label, fmt(c.value), fmt(c.dual_bound), fmt(c.kkt_residual)});
    }
  }
  out.result["sets"] = sets;

  if (s.contains("balls")) {
    const json& arr = s.at("balls");
    if (!arr.is_array()) fail("capacity.balls", "expected an array of {x, a}");
    std::vector<std::pair<PointIndex, double>> samples;
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string path = "capacity.balls[" + std::to_string(i) + "]";
      const std::string id = string_or(arr[i], path, "x", "");
      if (!sp.contains(id)) fail(path + ".x", "unknown point '" + id + "'");
      samples.emplace_back(sp.index_of(id), number(require(arr[i], path, "a"), path + ".a"));
    }
    json balls = json::array();
    for (const auto& r : capacity_ball_bounds_check(k, sigma, p, samples)) {
      json b{{"x", sp.id(r.x)}, {"a", num(r.a)}, {"atoms", r.atoms}, {"skipped", r.skipped}};
      if (!r.skipped) {
        const auto up = capacity_ball_upper(k, sigma, p, r.x, r.a);
        b.update(json{{"cap", num(r.cap)}, {"N", num(r.N)}, {"ratio", num(r.ratio)}, {"bound", num(r.bound)},
                      {"feasibleUpper", num(up.feasible_value)}, {"upperOk", r.upper_ok}, {"gap", num(r.gap)}});
      }
      balls.push_back(b);
    }
    out.result["balls"] = balls;
  }

  if (s.contains("omega")) {
    FamilyOptions fo;
    const std::string fam = string_or(s, "capacity", "family", "balls+atoms");
    if (fam == "balls") fo.family = SetFamily::balls;
    else if (fam == "atoms") fo.family = SetFamily::atoms;
    else if (fam == "balls+atoms") fo.family = SetFamily::balls_atoms;
    else if (fam == "unions") fo.family = SetFamily::unions;
    else fail("capacity.family", "expected balls, atoms, balls+atoms or unions");
    fo.max_sets = count_or(s, "capacity", "maxSets", fo.max_sets);
    fo.union_size = count_or(s, "capacity", "unionSize", fo.union_size);
    fo.seed = seed;
    fo.capacity = co;
    const AtomicMeasure omega = load_measure(root, sp, string_or(s, "capacity", "omega", "omega"));
    const auto cc = capacity_condition_constant(k, sigma, p, omega, fo);
    json wit = json::array();
    for (PointIndex x : cc.witness) wit.push_back(sp.id(x));
    out.result["condition"] = json{{"value", num(cc.value)},       {"family", fam},
                                   {"sets", cc.sets},              {"sampled", cc.sampled},
                                   {"witness", wit},               {"witnessCap", num(cc.witness_cap)},
                                   {"witnessMass", num(cc.witness_mass)}, {"lowerBoundOnly", true}};
  }
  if (bool_or(s, "capacity", "ballLower", false)) {
    const auto l = ball_lower_check(k, sigma, ConjugatePair::from_p(p).q());
    out.result["ballLower"] = json{{"skipped", l.skipped}, {"vacuous", l.vacuous}, {"worst", num(l.worst)},
                               {"x", sp.id(l.x)},      {"a", num(l.a)},       {"conditionConstant", num(l.condition_constant)},
                               {"tailDiverges", l.tail_diverges}, {"note", l.note}};
  }
  out.result["p"] = p;
  return out;
}

DensitySpec load_density(const json& j, const std::string& path) {
  if (j.is_number()) return ConstantDensity{j.get<double>()};
  if (!j.is_object()) fail(path, "expected a density spec");
  if (j.contains("constant")) return ConstantDensity{number(j.at("constant"), path + ".constant")};
  if (j.contains("power")) {
    const json& pw = j.at("power");
    return PowerDensity{number_or(pw, path + ".power", "c", 1.0), number_or(pw, path + ".power", "a", 0.0),
                        number_or(pw, path + ".power", "b", 0.0)};
  }
  if (j.contains("atoms")) {
    const json& arr = j.at("atoms");
    if (!arr.is_array()) fail(path + ".atoms", "expected an array of {x, weight}");
    PointMasses pm;
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string ep = path + ".atoms[" + std::to_string(i) + "]";
      pm.atoms.emplace_back(number(require(arr[i], ep, "x"), ep + ".x"),
                            number(require(arr[i], ep, "weight"), ep + ".weight"));
    }
    return pm;
  }
  fail(path, "expected one of constant, power, atoms");
}

IntervalSpec load_interval(const json& root) {
  const json& d = require(root, "", "dirichlet");
  IntervalSpec spec;
  if (d.contains("grid")) {
    const json& g = d.at("grid");
    spec.grid.cells = count_or(g, "dirichlet.grid", "cells", spec.grid.cells);
    spec.grid.grading = number_or(g, "dirichlet.grid", "grading", spec.grid.grading);
  }
  if (d.contains("sigma")) spec.sigma = load_density(d.at("sigma"), "dirichlet.sigma");
  if (d.contains("omega")) spec.omega = load_density(d.at("omega"), "dirichlet.omega");
  spec.q = number_or(d, "dirichlet", "q", load_q(root));
  spec.epsilon = number_or(d, "dirichlet", "epsilon", 1.0);
  return spec;
}

Output cmd_dirichlet(const json& root, std::uint64_t) {
  Output out;
  const IntervalSpec spec = load_interval(root);
  const json& d = root.at("dirichlet");
  const SolveOptions so = solve_options(d, "dirichlet");
  const auto pr = make_interval_problem(spec);
  const auto r = solve_bvp_1d(pr, so);
  out.result = json{{"cells", pr.nodes.size()},
                    {"q", pr.q},
                    {"epsilon", pr.epsilon},
                    {"direct", std::string(status_name(r.direct.status))},
                    {"directIterations", r.direct.iterations},
                    {"naim", std::string(status_name(r.naim.status))},
                    {"naimIterations", r.naim.iterations},
                    {"transformGap", num(r.transform_gap)},
                    {"fdResidual", num(r.fd_residual)},
                    {"greenBand", json::array({num(r.green_band_lower), num(r.green_band_upper)})},
                    {"inconsistent", r.inconsistent},
                    {"greenPotentialInfinite", pr.green_potential_infinite},
                    {"notes", pr.notes}};
  if (r.pointwise_computed) {
    out.result["pointwiseGreen"] = num(r.pointwise_green);
    out.result["pointwiseNaim"] = num(r.pointwise_naim);
  }
  if (bool_or(d, "dirichlet", "richardson", false)) out.result["richardsonGap"] = num(richardson_gap(spec, so));
  out.csv_header = {"x", "u", "u_naim"};
  for (std::size_t i = 0; i < pr.nodes.size(); ++i) {
    out.csv_rows.push_back({fmt(pr.nodes[i]), fmt(r.u.empty() ? 0.0 : r.u[i]), fmt(r.u_naim.empty() ? 0.0 : r.u_naim[i])});
  }
  if (r.inconsistent) out.exit_code = kExitCertifiedFailure;
  return out;
}

Output cmd_battery(const json& root, std::uint64_t) {
  Output out;
  const IntervalSpec spec = load_interval(root);
  const json& b = section(root, "battery");
  BatteryOptions bo;
  bo.max_sets = count_or(b, "battery", "maxSets", bo.max_sets);
  bo.max_interval = count_or(b, "battery", "maxInterval", bo.max_interval);
  bo.threshold_tol = number_or(b, "battery", "thresholdTol", bo.threshold_tol);
  bo.solve = solve_options(b, "battery");
  const auto pr = make_interval_problem(spec);
  const auto r = interval_battery(pr, bo);
  out.result = json{{"cells", pr.nodes.size()},
                    {"q", pr.q},
                    {"pointwise", num(r.pointwise)},
                    {"capacityCondition", json{{"value", num(r.capacity.value)},
                                               {"sets", r.capacity.sets},
                                               {"witnessCap", num(r.capacity.witness_cap)},
                                               {"witnessMass", num(r.capacity.witness_mass)},
                                               {"lowerBoundOnly", true}}},
                    {"testing", num(r.testing)},
                    {"thresholdLower", num(r.threshold_lower)},
                    {"thresholdUpper", num(r.threshold_upper)},
                    {"greenPotentialInfinite", r.green_potential_infinite},
                    {"crossFlag", r.cross_flag},
                    {"notes", r.notes}};
  out.csv_header = {"quantity", "value"};
  out.csv_rows = {{"pointwise", fmt(r.pointwise)},
                  {"capacity_condition", fmt(r.capacity.value)},
                  {"testing", fmt(r.testing)},
                  {"threshold_lower", fmt(r.threshold_lower)},
                  {"threshold_upper", fmt(r.threshold_upper)}};
  return out;
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string o = "\"";
  for (char c : s) {
    if (c == '"') o += '"';
    o += c;
  }
  return o + "\"";
}

std::string line_col(const std::string& bytes, std::size_t pos) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < std::min(pos, bytes.size()); ++i) {
    if (bytes[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

}  // namespace

const std::vector<std::string>& commands() {
  static const std::vector<std::string> c{"check-kernel", "solve", "znorm", "criteria",
                                          "capacity", "dirichlet1d", "battery"};
  return c;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string library_version() { return QMS_VERSION; }

int run(const RunOptions& opts, std::ostream& log) {
  try {
    if (std::find(commands().begin(), commands().end(), opts.command) == commands().end()) {
      throw InputError("unknown command '" + opts.command + "'");
    }
    std::ifstream in(opts.scenario, std::ios::binary);
    if (!in) throw InputError("cannot read scenario file " + opts.scenario.string());
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string bytes = buf.str();
    json root;
    try {
      root = json::parse(bytes);
    } catch (const json::parse_error& e) {
      throw InputError("scenario: malformed JSON at " + line_col(bytes, e.byte) + ": " + e.what());
    }
    if (!root.is_object()) throw InputError("scenario: top level must be an object");

    std::uint64_t seed = 1;
    if (root.contains("seed")) {
      if (!root.at("seed").is_number_unsigned()) fail("seed", "expected a nonnegative integer");
      seed = root.at("seed").get<std::uint64_t>();
    }
    if (opts.seed) seed = *opts.seed;
    std::size_t threads = 0;
    if (opts.threads) {
      threads = *opts.threads;
    } else if (const char* env = std::getenv("QMS_THREADS")) {
      try {
        threads = static_cast<std::size_t>(std::stoul(env));
      } catch (const std::exception&) {
        throw InputError("QMS_THREADS must be a nonnegative integer");
      }
    }
    set_thread_count(threads);

    Output out;
    const std::string& c = opts.command;
    if (c == "check-kernel") out = cmd_check_kernel(root, seed);
    else if (c == "solve") out = cmd_solve(root, seed);
    else if (c == "znorm") out = cmd_znorm(root, seed);
    else if (c == "criteria") out = cmd_criteria(root, seed);
    else if (c == "capacity") out = cmd_capacity(root, seed);
    else if (c == "dirichlet1d") out = cmd_dirichlet(root, seed);
    else out = cmd_battery(root, seed);

    std::ostringstream hash;
    hash << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(bytes);
    json report{{"schemaVersion", 1},
                {"command", c},
                {"version", library_version()},
                {"scenarioHash", hash.str()},
                {"seed", seed},
                {"exitCode", out.exit_code},
                {"result", out.result}};

    std::filesystem::create_directories(opts.out);
    std::ofstream rj(opts.out / "report.json", std::ios::binary);
    rj << report.dump(2) << "\n";
    std::ofstream cs(opts.out / "witnesses.csv", std::ios::binary);
    for (std::size_t i = 0; i < out.csv_header.size(); ++i) cs << (i ? "," : "") << out.csv_header[i];
    cs << "\n";
    for (const auto& row : out.csv_rows) {
      for (std::size_t i = 0; i < row.size(); ++i) cs << (i ? "," : "") << csv_escape(row[i]);
      cs << "\n";
    }
    if (!rj || !cs) throw InputError("cannot write reports to " + opts.out.string());
    return out.exit_code;
  } catch (const InputError& e) {
    log << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const QuasiMetricViolation& e) {
    log << "quasi-metric violation: " << e.what() << "\n";
    return kExitCertifiedFailure;
  } catch (const std::filesystem::filesystem_error& e) {
    log << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const json::exception& e) {
    log << "error: scenario: " << e.what() << "\n";
    return kExitInput;
  }
}

}  // namespace qms::cli
