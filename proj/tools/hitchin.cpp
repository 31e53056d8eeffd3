// Batch front end. One command per process; every run writes manifest.json
// next to its outputs. Exit codes: 0 ok, 2 config, 3 budget, 4 insufficient
// data, 5 numerical.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <thread>

#include "hitchin/hitchin.hpp"

using json = nlohmann::json;
using namespace hitchin;
namespace fs = std::filesystem;

namespace {

constexpr int kConfigVersion = 1;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// strict schema

void allowOnly(const json& obj, const std::set<std::string>& keys, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!keys.count(it.key())) throw ConfigError("unknown key '" + it.key() + "' in " + where);
}

double number(const json& obj, const std::string& key, const std::string& where, std::optional<double> dflt = {}) {
  if (!obj.contains(key)) {
    if (dflt) return *dflt;
    throw ConfigError("missing '" + key + "' in " + where);
  }
  if (!obj[key].is_number()) throw ConfigError("'" + key + "' in " + where + " must be a number");
  return obj[key].get<double>();
}

long long integer(const json& obj, const std::string& key, const std::string& where, long long dflt) {
  if (!obj.contains(key)) return dflt;
  if (!obj[key].is_number_integer()) throw ConfigError("'" + key + "' in " + where + " must be an integer");
  return obj[key].get<long long>();
}

std::vector<double> numbers(const json& obj, const std::string& key, const std::string& where,
                            std::vector<double> dflt) {
  if (!obj.contains(key)) return dflt;
  const json& a = obj[key];
  if (!a.is_array()) throw ConfigError("'" + key + "' in " + where + " must be an array");
  std::vector<double> out;
  for (const auto& x : a) {
    if (!x.is_number()) throw ConfigError("'" + key + "' in " + where + " must hold numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

std::string text(const json& obj, const std::string& key, const std::string& where, std::optional<std::string> dflt) {
  if (!obj.contains(key)) {
    if (dflt) return *dflt;
    throw ConfigError("missing '" + key + "' in " + where);
  }
  if (!obj[key].is_string()) throw ConfigError("'" + key + "' in " + where + " must be a string");
  return obj[key].get<std::string>();
}

json section(const json& cfg, const std::string& key) { return cfg.contains(key) ? cfg[key] : json::object(); }

// Fills defaults and validates; the result is what the manifest echoes.
json resolveConfig(const json& raw) {
  allowOnly(raw,
            {"version", "group", "representation", "functional", "T", "classT", "elementCap", "wallClock", "out",
             "seed", "threads", "limitset", "hausdorff", "positivity", "double", "audit"},
            "config");
  if (!raw.contains("version")) throw ConfigError("missing 'version'");
  if (!raw["version"].is_number_integer() || raw["version"].get<int>() != kConfigVersion)
    throw ConfigError("unsupported config version (expected " + std::to_string(kConfigVersion) + ")");
  json r;
  r["version"] = kConfigVersion;

  if (!raw.contains("group")) throw ConfigError("missing 'group'");
  const json& g = raw["group"];
  allowOnly(g, {"builtin", "params", "file"}, "group");
  if (g.contains("builtin") == g.contains("file")) throw ConfigError("group needs exactly one of 'builtin', 'file'");
  if (g.contains("builtin")) {
    r["group"] = {{"builtin", text(g, "builtin", "group", {})}, {"params", numbers(g, "params", "group", {})}};
  } else {
    if (g.contains("params")) throw ConfigError("'params' only applies to builtin groups");
    r["group"] = {{"file", text(g, "file", "group", {})}};
  }

  if (raw.contains("representation")) {
    const json& rep = raw["representation"];
    if (rep.is_string()) {
      r["representation"] = {{"chain", rep.get<std::string>()}};
    } else {
      allowOnly(rep, {"chain", "file"}, "representation");
      if (rep.contains("chain") == rep.contains("file"))
        throw ConfigError("representation needs exactly one of 'chain', 'file'");
      r["representation"] = rep.contains("chain") ? json{{"chain", text(rep, "chain", "representation", {})}}
                                                  : json{{"file", text(rep, "file", "representation", {})}};
    }
  } else {
    r["representation"] = {{"chain", "irreducible:3"}};
  }

  if (raw.contains("functional")) r["functional"] = numbers(raw, "functional", "config", {});
  r["T"] = number(raw, "T", "config");
  if (!(r["T"].get<double>() > 0)) throw ConfigError("T must be positive");
  r["classT"] = number(raw, "classT", "config", r["T"].get<double>());
  r["elementCap"] = integer(raw, "elementCap", "config", 20'000'000);
  if (r["elementCap"].get<long long>() < 1) throw ConfigError("elementCap must be positive");
  r["wallClock"] = number(raw, "wallClock", "config", 0.0);
  r["out"] = text(raw, "out", "config", std::string("out"));
  r["seed"] = integer(raw, "seed", "config", 1);
  r["threads"] = integer(raw, "threads", "config", 1);
  if (r["threads"].get<long long>() < 1) throw ConfigError("threads must be positive");

  json ls = section(raw, "limitset");
  allowOnly(ls, {"mode", "chart"}, "limitset");
  std::string mode = text(ls, "mode", "limitset", std::string("cartan"));
  if (mode != "cartan" && mode != "eigen") throw ConfigError("limitset.mode must be 'cartan' or 'eigen'");
  r["limitset"] = {{"mode", mode}};
  if (ls.contains("chart")) r["limitset"]["chart"] = numbers(ls, "chart", "limitset", {});

  json hd = section(raw, "hausdorff");
  allowOnly(hd, {"scales", "shadowRadius", "shadowT", "coverMargin", "tree"}, "hausdorff");
  auto scales = numbers(hd, "scales", "hausdorff", {1e-4, 1e-2});
  if (scales.size() != 2 || !(scales[0] > 0) || !(scales[0] < scales[1]))
    throw ConfigError("hausdorff.scales must be [min, max] with 0 < min < max");
  r["hausdorff"] = {{"scales", scales},
                    {"shadowRadius", number(hd, "shadowRadius", "hausdorff", 1.0)},
                    {"shadowT", number(hd, "shadowT", "hausdorff", r["T"].get<double>())},
                    {"coverMargin", number(hd, "coverMargin", "hausdorff", 6.0)}};
  if (hd.contains("tree")) {
    const json& t = hd["tree"];
    allowOnly(t, {"delta", "depth", "frostman"}, "hausdorff.tree");
    auto fr = numbers(t, "frostman", "hausdorff.tree", {1e-4, 1e-2});
    if (fr.size() != 2 || !(fr[0] > 0) || !(fr[0] < fr[1]))
      throw ConfigError("hausdorff.tree.frostman must be [min, max]");
    r["hausdorff"]["tree"] = {{"delta", number(t, "delta", "hausdorff.tree", {})},
                              {"depth", integer(t, "depth", "hausdorff.tree", 4)},
                              {"frostman", fr}};
  }

  json po = section(raw, "positivity");
  allowOnly(po, {"samples", "tupleSize", "T", "minSeparation"}, "positivity");
  r["positivity"] = {{"samples", integer(po, "samples", "positivity", 100)},
                     {"minSeparation", number(po, "minSeparation", "positivity", 0.25)},
                     {"tupleSize", integer(po, "tupleSize", "positivity", 3)},
                     {"T", number(po, "T", "positivity", 6.0)}};
  if (r["positivity"]["tupleSize"].get<long long>() < 3) throw ConfigError("positivity.tupleSize must be >= 3");

  json db = section(raw, "double");
  allowOnly(db, {"boundary", "words", "triples", "T", "minSeparation"}, "double");
  std::vector<std::string> boundary{"a"};
  if (db.contains("boundary")) {
    if (!db["boundary"].is_array() || db["boundary"].empty()) throw ConfigError("double.boundary must be a word list");
    boundary.clear();
    for (const auto& w : db["boundary"]) {
      if (!w.is_string()) throw ConfigError("double.boundary must hold strings");
      boundary.push_back(w.get<std::string>());
    }
  }
  r["double"] = {{"boundary", boundary},
                 {"words", integer(db, "words", "double", 500)},
                 {"triples", integer(db, "triples", "double", 100)},
                 {"minSeparation", number(db, "minSeparation", "double", 0.25)},
                 {"T", number(db, "T", "double", 6.0)}};

  json au = section(raw, "audit");
  allowOnly(au, {"samples", "radius", "epsilon"}, "audit");
  r["audit"] = {{"samples", integer(au, "samples", "audit", 20000)},
                {"radius", number(au, "radius", "audit", 8.0)},
                {"epsilon", number(au, "epsilon", "audit", 0.5)}};
  return r;
}

// ---------------------------------------------------------------------------
// building blocks from the resolved config

std::string inputBytes;  // contents of referenced files, for the input hash

json readJsonFile(const std::string& path, const std::string& what) {
  std::string s;
  try {
    s = io::readFile(path);
  } catch (const Error&) {
    throw ConfigError("cannot read " + what + " file '" + path + "'");
  }
  inputBytes += s;
  try {
    return json::parse(s);
  } catch (const json::parse_error& e) {
    throw ConfigError(what + " file: " + e.what());
  }
}

GeneratorSystem buildGroup(const json& cfg) {
  const json& g = cfg["group"];
  try {
    if (g.contains("builtin")) return builtinGroup(g["builtin"].get<std::string>(), g["params"].get<std::vector<double>>());
    json f = readJsonFile(g["file"].get<std::string>(), "group");
    allowOnly(f, {"name", "generators", "names", "structure", "basepoint"}, "group file");
    std::vector<Moebius> gens;
    if (!f.contains("generators") || !f["generators"].is_array()) throw ConfigError("group file needs 'generators'");
    for (const auto& m : f["generators"]) {
      std::vector<double> e = m.get<std::vector<double>>();
      if (e.size() != 4) throw ConfigError("generators are [a, b, c, d]");
      gens.push_back(makeMoebius(e[0], e[1], e[2], e[3]));
    }
    std::string st = text(f, "structure", "group file", std::string("free"));
    if (st != "free" && st != "generic") throw ConfigError("structure must be 'free' or 'generic'");
    std::vector<std::string> names;
    if (f.contains("names")) names = f["names"].get<std::vector<std::string>>();
    GeneratorSystem G = makeSystem(text(f, "name", "group file", std::string("custom")), gens,
                                   st == "free" ? Structure::Free : Structure::Generic, names);
    if (f.contains("basepoint")) {
      if (st == "free") throw ConfigError("free systems are certified at i");
      auto b = f["basepoint"].get<std::vector<double>>();
      if (b.size() != 2 || !(b[1] > 0)) throw ConfigError("basepoint is [x, y] with y > 0");
      G.basepoint = {b[0], b[1]};
    }
    return G;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("group: ") + e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::InvalidInput || e.kind() == ErrorKind::NotDiscreteCertificate)
      throw ConfigError(std::string("group: ") + e.what());
    throw;
  }
}

Representation buildRepresentation(const GeneratorSystem& G, const json& cfg) {
  const json& r = cfg["representation"];
  try {
    if (r.contains("chain")) return representationFromChain(G, r["chain"].get<std::string>());
    json f = readJsonFile(r["file"].get<std::string>(), "representation");
    allowOnly(f, {"images"}, "representation file");
    std::vector<ProjectiveMatrix> imgs;
    for (const auto& m : f.at("images")) {
      auto rows = m.get<std::vector<std::vector<double>>>();
      Mat M(rows.size(), rows.size());
      for (size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != rows.size()) throw ConfigError("images must be square");
        for (size_t j = 0; j < rows.size(); ++j) M(i, j) = rows[i][j];
      }
      imgs.push_back(ProjectiveMatrix(M));
    }
    return Representation::fromImages(G, imgs, "images:" + r["file"].get<std::string>());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("representation: ") + e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::InvalidInput || e.kind() == ErrorKind::InvalidMatrix)
      throw ConfigError(std::string("representation: ") + e.what());
    throw;
  }
}

RootFunctional buildFunctional(const json& cfg, int d) {
  if (!cfg.contains("functional")) return RootFunctional::root(1, d);
  auto c = cfg["functional"].get<std::vector<double>>();
  if (static_cast<int>(c.size()) != d - 1)
    throw ConfigError("functional needs " + std::to_string(d - 1) + " coefficients for dimension " + std::to_string(d));
  return RootFunctional(Eigen::Map<const Vec>(c.data(), static_cast<Eigen::Index>(c.size())));
}

Letters parseWord(const GeneratorSystem& G, const std::string& s) {
  Letters w;
  for (char ch : s) {
    bool found = false;
    for (int i = 0; i < G.rank(); ++i) {
      const std::string& n = G.names[i];
      if (n.size() != 1) continue;
      if (ch == n[0]) w.push_back(static_cast<Letter>(2 * i)), found = true;
      else if (ch == std::toupper(static_cast<unsigned char>(n[0]))) w.push_back(static_cast<Letter>(2 * i + 1)), found = true;
      if (found) break;
    }
    if (!found) throw ConfigError(std::string("unknown letter '") + ch + "' in word '" + s + "'");
  }
  return reduceWord(w);
}

json estimateJson(const ExponentEstimate& e) {
  return {{"value", e.value},         {"halfWidth", e.halfWidth}, {"windowMin", e.windowMin},
          {"windowMax", e.windowMax}, {"method", e.method},       {"intercept", e.intercept}};
}

// ---------------------------------------------------------------------------
// run context: outputs are held in memory and written together with the
// manifest, so a failed run still leaves a consistent (flagged) directory

struct Run {
  std::string command;
  json config;
  fs::path out;
  BallOptions ball;
  int threads = 1;
  std::uint64_t seed = 1;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double wallClock = 0.0;
  std::vector<std::pair<std::string, std::string>> files;

  void add(const std::string& name, std::string content) { files.emplace_back(name, std::move(content)); }
  void checkpoint(const char* stage) const {
    if (wallClock <= 0) return;
    double el = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (el > wallClock) fail(ErrorKind::BudgetExceeded, std::string("wall-clock cap reached after ") + stage);
  }
};

template <class F>
void parallelFor(std::size_t n, int threads, F&& f) {
  if (threads <= 1 || n < 1000) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errs(threads);
  for (int t = 0; t < threads; ++t)
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = t; i < n; i += threads) f(i);
      } catch (...) {
        errs[t] = std::current_exception();
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errs)
    if (e) std::rethrow_exception(e);
}

std::string jsonText(const json& j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// commands

void cmdSpectrum(Run& run, const Representation& rho) {
  const GeneratorSystem& G = rho.domain();
  const int d = rho.dim();
  const double T = run.config["T"].get<double>();
  RootFunctional phi = buildFunctional(run.config, d);
  std::vector<GroupElement> elems;
  bool partial = false;
  try {
    BallOptions o = run.ball;
    visitBall(G, G.basepoint, T, [&](const Letters& w, const Moebius& m, double dist) {
      elems.push_back({w, canonical(m), dist});
    }, o);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::BudgetExceeded) throw;
    partial = true;
  }
  std::sort(elems.begin(), elems.end(), [](const GroupElement& a, const GroupElement& b) { return shortlexLess(a.word, b.word); });
  std::vector<CartanVector> kap(elems.size()), nu(elems.size());
  parallelFor(elems.size(), run.threads, [&](std::size_t i) {
    ProjectiveMatrix g = rho.evaluate(elems[i].word, elems[i].matrix);
    kap[i] = cartanProjection(g);
    nu[i] = jordanProjection(g);
  });
  std::vector<std::string> header{"word", "displacement"};
  for (int i = 1; i <= d; ++i) header.push_back("kappa_" + std::to_string(i));
  for (int i = 1; i <= d; ++i) header.push_back("nu_" + std::to_string(i));
  for (int k = 1; k < d; ++k) header.push_back("alpha_" + std::to_string(k));
  for (int k = 1; k < d; ++k) header.push_back("omega_" + std::to_string(k));
  io::Csv csv(header);
  std::vector<double> prof;
  for (std::size_t i = 0; i < elems.size(); ++i) {
    std::vector<std::string> row{elems[i].word.empty() ? "e" : wordToString(G, elems[i].word), io::num(elems[i].displacement)};
    for (int j = 0; j < d; ++j) row.push_back(io::num(kap[i][j]));
    for (int j = 0; j < d; ++j) row.push_back(io::num(nu[i][j]));
    for (int k = 1; k < d; ++k) row.push_back(io::num(simpleRoot(k, kap[i])));
    for (int k = 1; k < d; ++k) row.push_back(io::num(fundamentalWeight(k, kap[i])));
    csv.row(row);
    prof.push_back(evaluate(phi, kap[i]));
  }
  std::sort(prof.begin(), prof.end());
  io::Csv pc({"value", "count"});
  for (std::size_t i = 0; i < prof.size(); ++i) pc.row(std::vector<double>{prof[i], static_cast<double>(i + 1)});
  run.add("spectrum.csv", csv.str());
  run.add("profile.csv", pc.str());
  run.add("spectrum.json", jsonText({{"elements", elems.size()},
                                     {"dimension", d},
                                     {"functional", functionalName(phi)},
                                     {"partial", partial}}));
  if (partial) fail(ErrorKind::BudgetExceeded, "ball exceeds element cap; outputs truncated");
}

void cmdExponent(Run& run, const Representation& rho) {
  const int d = rho.dim();
  RootFunctional phi = buildFunctional(run.config, d);
  const double T = run.config["T"].get<double>();
  CartanCloud orbit = orbitCloud(rho, T, run.ball);
  run.checkpoint("orbit enumeration");
  CountingProfile p = profileFrom(orbit, phi);
  ExponentEstimate delta = criticalExponentEstimate(p);

  io::Csv csv({"t", "logN", "fit"});
  for (auto [t, y] : delta.fitPoints) csv.row(std::vector<double>{t, y, delta.intercept + delta.value * t});
  run.add("counting.csv", csv.str());
  run.add("counting.svg", io::svgLineFit(delta.fitPoints, delta.value, delta.intercept, delta.windowMin,
                                         delta.windowMax, "log N(t) for " + functionalName(phi) + ", " + orbit.group,
                                         "t", "log N"));
  json rep = {{"functional", functionalName(phi)},
              {"group", orbit.group},
              {"representation", orbit.representation},
              {"profile", {{"count", p.values.size()}, {"cutoff", p.cutoff}, {"heuristicCutoff", p.heuristicCutoff}}},
              {"criticalExponent", estimateJson(delta)},
              {"seriesGrowth", estimateJson(seriesGrowthEstimate(p))}};
  try {
    rep["symmetricSpace"] = estimateJson(symmetricSpaceExponent(orbit));
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::InsufficientWindow) throw;
    rep["symmetricSpace"] = {{"unavailable", e.what()}};
  }
  run.add("exponent.json", jsonText(rep));
  run.checkpoint("orbit fit");
  CartanCloud classes = classCloud(rho, run.config["classT"].get<double>(), run.ball);
  CountingProfile cp = profileFrom(classes, phi);
  ExponentEstimate h = entropyEstimate(cp);
  rep["entropy"] = estimateJson(h);
  rep["classProfile"] = {{"count", cp.values.size()}, {"cutoff", cp.cutoff}, {"heuristicCutoff", cp.heuristicCutoff}};
  run.files.back().second = jsonText(rep);
}

void cmdRigidity(Run& run, const Representation& rho) {
  RootFunctional phi = buildFunctional(run.config, rho.dim());
  CartanCloud classes = classCloud(rho, run.config["classT"].get<double>(), run.ball);
  run.checkpoint("class enumeration");
  RigidityReport r = rigidityReport(classes, phi);
  json per = json::array();
  for (const auto& e : r.perRoot) per.push_back(std::isnan(e.value) ? json{{"unavailable", e.method}} : estimateJson(e));
  run.add("rigidity.json", jsonText({{"functional", functionalName(phi)},
                                     {"group", classes.group},
                                     {"representation", classes.representation},
                                     {"classes", classes.vectors.size()},
                                     {"entropy", estimateJson(r.entropy)},
                                     {"bound", r.bound},
                                     {"margin", r.margin},
                                     {"equalityFlagged", r.equalityFlagged},
                                     {"perRoot", per}}));
  std::vector<double> vals;
  for (const auto& v : classes.vectors) vals.push_back(evaluate(phi, v));
  std::sort(vals.begin(), vals.end());
  io::Csv csv({"value", "count"});
  for (std::size_t i = 0; i < vals.size(); ++i) csv.row(std::vector<double>{vals[i], static_cast<double>(i + 1)});
  run.add("class_profile.csv", csv.str());
}

// Affine chart {f . u = 1}; plotted along the next two principal directions.
std::vector<std::pair<double, double>> chartProjection(const std::vector<Vec>& pts, const std::optional<Vec>& chart) {
  const Eigen::Index d = pts.empty() ? 0 : pts[0].size();
  std::vector<std::pair<double, double>> out;
  if (d < 2) return out;
  Mat M = Mat::Zero(d, d);
  for (const auto& u : pts) M += u * u.transpose();
  Eigen::SelfAdjointEigenSolver<Mat> es(M);
  Vec f = chart ? chart->normalized() : Vec(es.eigenvectors().col(d - 1));
  Mat basis(d, 2);
  int got = 0;
  for (Eigen::Index c = d - 1; c >= 0 && got < 2; --c) {
    Vec v = es.eigenvectors().col(c);
    v -= f.dot(v) * f;
    for (int j = 0; j < got; ++j) v -= basis.col(j).dot(v) * basis.col(j);
    if (v.norm() < 1e-8) continue;
    basis.col(got++) = v.normalized();
  }
  if (got < 2) return out;
  for (const auto& u : pts) {
    double s = f.dot(u);
    if (std::abs(s) < 1e-3) continue;  // near the line at infinity of the chart
    Vec x = u / s;
    out.push_back({basis.col(0).dot(x), basis.col(1).dot(x)});
  }
  return out;
}

void cmdLimitset(Run& run, const Representation& rho) {
  const json& ls = run.config["limitset"];
  LimitMode mode = ls["mode"] == "eigen" ? LimitMode::Eigen : LimitMode::Cartan;
  LimitSetSample s = sampleLimitSet(rho, run.config["T"].get<double>(), mode, run.ball);
  const int d = rho.dim();
  std::vector<Vec> pts = s.points;
  for (auto& u : pts) {
    Eigen::Index k;
    u.cwiseAbs().maxCoeff(&k);
    if (u[k] < 0) u = -u;
  }
  std::vector<std::string> header{"word", "base_angle"};
  for (int i = 1; i <= d; ++i) header.push_back("u_" + std::to_string(i));
  io::Csv csv(header);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    std::vector<std::string> row{wordToString(rho.domain(), s.words[i]), io::num(s.baseAngles[i])};
    for (int j = 0; j < d; ++j) row.push_back(io::num(pts[i][j]));
    csv.row(row);
  }
  std::optional<Vec> chart;
  if (ls.contains("chart")) {
    auto c = ls["chart"].get<std::vector<double>>();
    if (static_cast<int>(c.size()) != d) throw ConfigError("limitset.chart needs one coefficient per coordinate");
    chart = Eigen::Map<const Vec>(c.data(), d);
    if (!(chart->norm() > 0)) throw ConfigError("limitset.chart must be non-zero");
  }
  auto proj = chartProjection(pts, chart);
  io::Csv pc({"x", "y"});
  for (auto [x, y] : proj) pc.row(std::vector<double>{x, y});
  run.add("limitset.csv", csv.str());
  run.add("limitset_chart.csv", pc.str());
  run.add("limitset.svg", io::svgScatter(proj, "limit set sample (" + std::string(mode == LimitMode::Eigen ? "eigen" : "cartan") +
                                                   "), " + rho.domain().name));
  run.add("limitset.json", jsonText({{"points", pts.size()}, {"plotted", proj.size()}, {"dimension", d}}));
}

json treeJson(const ShadowTree& t, const GeneratorSystem& G) {
  json nodes = json::array();
  for (const auto& n : t.nodes) {
    json c = {{"nestingMargin", n.certificate.nestingMargin}, {"siblingGap", n.certificate.siblingGap},
              {"maxDistance", n.certificate.maxDistance},     {"massRatio", n.certificate.massRatio},
              {"annuli", n.certificate.annuli}};
    nodes.push_back({{"word", n.word.empty() ? std::string("e") : wordToString(G, n.word)},
                     {"depth", n.depth},
                     {"parent", n.parent},
                     {"children", n.children},
                     {"c", n.c},
                     {"annulus", n.annulus},
                     {"mass", n.mass},
                     {"point", {n.point.x, n.point.y}},
                     {"certificate", n.children.empty() ? json(nullptr) : c}});
  }
  return {{"delta", t.delta}, {"r0", t.r0},     {"D0", t.D0},
          {"depth", t.depth}, {"complete", t.complete}, {"diagnostic", t.diagnostic}, {"nodes", nodes}};
}

void cmdHausdorff(Run& run, const Representation& rho) {
  const json& h = run.config["hausdorff"];
  const double T = run.config["T"].get<double>();
  ConvexDomain omega = ConvexDomain::kleinBall(2);
  Vec b0(3);
  b0 << 0, 0, 1;
  LimitSetSample s = sampleLimitSet(rho, T, LimitMode::Cartan, run.ball);
  ScaleRange range{h["scales"][0].get<double>(), h["scales"][1].get<double>()};
  ExponentEstimate box = boxCountingDimension(s, range);
  io::Csv bc({"log_inv_eps", "logN"});
  for (auto [x, y] : box.fitPoints) bc.row(std::vector<double>{x, y});
  run.add("boxcount.csv", bc.str());
  run.add("boxcount.svg", io::svgLineFit(box.fitPoints, box.value, box.intercept, box.fitPoints.front().first,
                                         box.fitPoints.back().first, "box counting, " + rho.domain().name,
                                         "log 1/eps", "log N"));
  json rep = {{"samplePoints", s.points.size()}, {"boxCounting", estimateJson(box)}};
  run.add("hausdorff.json", jsonText(rep));
  run.checkpoint("box counting");
  ShadowCoverResult sc = shadowCoverExponent(rho, omega, b0, h["shadowRadius"].get<double>(),
                                             h["shadowT"].get<double>(), run.ball, h["coverMargin"].get<double>());
  rep["shadowCover"] = {{"estimate", estimateJson(sc.estimate)},
                        {"maxDiameterRatio", sc.maxDiameterRatio},
                        {"levelRatios", sc.levelRatios},
                        {"coverSize", sc.coverSize},
                        {"levels", sc.levels}};
  run.files.back().second = jsonText(rep);
  run.checkpoint("shadow cover");
  if (!h.contains("tree")) return;
  const json& tc = h["tree"];
  TreeOptions topt;
  topt.ball = run.ball;
  ShadowTree tree = buildShadowTree(rho, omega, b0, tc["delta"].get<double>(), tc["depth"].get<int>(), topt);
  run.add("tree.json", jsonText(treeJson(tree, rho.domain())));
  rep["tree"] = {{"complete", tree.complete}, {"nodes", tree.nodes.size()}, {"diagnostic", tree.diagnostic}};
  if (tree.complete) {
    FrostmanReport fr = treeMeasureFrostman(tree, tc["frostman"][0].get<double>(), tc["frostman"][1].get<double>());
    rep["tree"]["frostman"] = {{"maxRatio", fr.maxRatio},       {"overall", fr.overall},
                               {"firstDecade", fr.firstDecade}, {"secondDecade", fr.secondDecade},
                               {"totalMass", fr.totalMass},     {"leaves", fr.leaves}};
    io::Csv fc({"scale", "max_ratio"});
    for (std::size_t i = 0; i < fr.scales.size(); ++i) fc.row(std::vector<double>{fr.scales[i], fr.maxRatio[i]});
    run.add("frostman.csv", fc.str());
  }
  for (auto& f : run.files)
    if (f.first == "hausdorff.json") f.second = jsonText(rep);
  requireComplete(tree);
}

// Attracting points of hyperbolic ball elements with their flags, in
// cyclic order on the circle.
struct CurvePoint {
  double angle;
  Letters word;
  Flag flag;
};

std::vector<CurvePoint> flagCurve(const Representation& rho, double T, const BallOptions& opt) {
  const GeneratorSystem& G = rho.domain();
  std::vector<CurvePoint> pts;
  for (const auto& e : enumerateBall(G, G.basepoint, T, opt)) {
    if (e.word.empty() || classify(e.matrix) != ElementType::Hyperbolic) continue;
    double ang = wrapAngle(boundaryAngle(fixedPoints(e.matrix).first, G.basepoint));
    bool dup = false;
    for (const auto& p : pts)
      if (circleDistance(p.angle, ang) < 1e-9) dup = true;
    if (dup) continue;
    try {
      pts.push_back({ang, e.word, attractingFlag(rho, e.word)});
    } catch (const Error& err) {
      if (err.kind() != ErrorKind::DegenerateGap) throw;
    }
  }
  std::sort(pts.begin(), pts.end(), [](const CurvePoint& a, const CurvePoint& b) { return a.angle < b.angle; });
  return pts;
}

// k distinct curve points in cyclic order, pairwise at least minSep apart
// on the circle (close points make the minors vanish to high order).
std::vector<std::size_t> sampleCyclicTuple(const std::vector<CurvePoint>& curve, int k, double minSep,
                                           std::mt19937_64& rng) {
  const std::size_t n = curve.size();
  std::vector<std::size_t> idx(n);
  for (int attempt = 0; attempt < 100000; ++attempt) {
    std::iota(idx.begin(), idx.end(), 0);
    for (int i = 0; i < k; ++i) {
      std::uniform_int_distribution<std::size_t> u(i, n - 1);
      std::swap(idx[i], idx[u(rng)]);
    }
    std::vector<std::size_t> t(idx.begin(), idx.begin() + k);
    std::sort(t.begin(), t.end());
    bool ok = true;
    for (int i = 0; i < k && ok; ++i)
      if (circleDistance(curve[t[i]].angle, curve[t[(i + 1) % k]].angle) < minSep) ok = false;
    if (ok) return t;
  }
  fail(ErrorKind::InsufficientWindow, "no separated tuple found on the sampled curve");
}

void cmdPositivity(Run& run, const Representation& rho) {
  const json& pc = run.config["positivity"];
  const int k = pc["tupleSize"].get<int>();
  auto curve = flagCurve(rho, pc["T"].get<double>(), run.ball);
  if (static_cast<int>(curve.size()) < k) fail(ErrorKind::InsufficientWindow, "too few attracting points on the curve");
  std::mt19937_64 rng(run.seed);
  io::Csv csv({"sample", "words", "min_minor", "positive", "rotation_invariant", "reversal_invariant"});
  int positive = 0, rotOk = 0, revOk = 0;
  double worst = kInf;
  const int n = pc["samples"].get<int>();
  for (int s = 0; s < n; ++s) {
    auto idx = sampleCyclicTuple(curve, k, pc["minSeparation"].get<double>(), rng);
    std::vector<Flag> fl;
    std::string words;
    for (auto i : idx) {
      fl.push_back(curve[i].flag);
      if (!words.empty()) words += ' ';
      words += wordToString(rho.domain(), curve[i].word);
    }
    double mm = 0;
    bool ok = checkTupleViaTriples(fl, 1e-10, &mm);
    std::vector<Flag> rot(fl.begin() + 1, fl.end());
    rot.push_back(fl.front());
    std::vector<Flag> rev(fl.rbegin(), fl.rend());
    bool r1 = checkTupleViaTriples(rot) == ok, r2 = checkTupleViaTriples(rev) == ok;
    positive += ok;
    rotOk += r1;
    revOk += r2;
    worst = std::min(worst, mm);
    csv.row(std::vector<std::string>{std::to_string(s), words, io::num(mm), ok ? "1" : "0", r1 ? "1" : "0", r2 ? "1" : "0"});
  }
  run.add("positivity.csv", csv.str());
  run.add("positivity.json", jsonText({{"samples", n},
                                       {"tupleSize", k},
                                       {"curvePoints", curve.size()},
                                       {"positive", positive},
                                       {"allPositive", positive == n},
                                       {"minMinor", worst},
                                       {"rotationInvariant", rotOk == n},
                                       {"reversalInvariant", revOk == n}}));
}

double projectiveIdentityDefect(const ProjectiveMatrix& m) {
  Mat e = m.entries();
  double c = e.trace() / static_cast<double>(e.rows());
  if (c == 0) return kInf;
  return (e / c - Mat::Identity(e.rows(), e.cols())).cwiseAbs().maxCoeff();
}

void cmdDouble(Run& run, const Representation& rho) {
  const json& dc = run.config["double"];
  const GeneratorSystem& G = rho.domain();
  std::vector<Letters> boundary;
  for (const auto& s : dc["boundary"]) boundary.push_back(parseWord(G, s.get<std::string>()));
  DoubledRepresentation D = doubleRepresentation(rho, boundary);
  double refl = 0;
  for (const auto& R : D.reflections) refl = std::max(refl, projectiveIdentityDefect(R * R));

  // restriction to Gamma: doubled product against the original (lifted) image
  auto ball = enumerateBall(G, G.basepoint, dc["T"].get<double>(), run.ball);
  std::mt19937_64 rng(run.seed);
  std::uniform_int_distribution<std::size_t> pick(0, ball.size() - 1);
  const int nWords = dc["words"].get<int>();
  double agree = 0;
  for (int i = 0; i < nWords; ++i) {
    const auto& e = ball[pick(rng)];
    Mat a = D.rep.evaluate(e.word).normalized(), b = rho.evaluate(e.word, e.matrix).normalized();
    agree = std::max(agree, (a - b).cwiseAbs().maxCoeff() / b.cwiseAbs().maxCoeff());
  }
  run.checkpoint("restriction check");

  auto curve = flagCurve(D.rep, dc["T"].get<double>(), run.ball);
  if (curve.size() < 3) fail(ErrorKind::InsufficientWindow, "too few attracting points for the doubled group");
  io::Csv csv({"sample", "words", "min_minor", "positive"});
  const int nTriples = dc["triples"].get<int>();
  int positive = 0;
  double worst = kInf;
  for (int s = 0; s < nTriples; ++s) {
    auto idx = sampleCyclicTuple(curve, 3, dc["minSeparation"].get<double>(), rng);
    PositivityReport r = positiveTripleReport(curve[idx[0]].flag, curve[idx[1]].flag, curve[idx[2]].flag);
    bool ok = r.verdict == Positivity::Positive;
    positive += ok;
    worst = std::min(worst, r.minMinor);
    std::string words;
    for (auto i : idx) words += (words.empty() ? "" : " ") + wordToString(D.rep.domain(), curve[i].word);
    csv.row(std::vector<std::string>{std::to_string(s), words, io::num(r.minMinor), ok ? "1" : "0"});
  }
  bool pass = refl <= 1e-9 && agree <= 1e-12 && positive == nTriples;
  run.add("double_triples.csv", csv.str());
  run.add("double.json", jsonText({{"reflectionSquareDefect", refl},
                                   {"restrictionMaxRelError", agree},
                                   {"wordsChecked", nWords},
                                   {"triples", nTriples},
                                   {"positiveTriples", positive},
                                   {"minMinor", worst},
                                   {"doubledGenerators", D.rep.domain().rank()},
                                   {"passes", pass}}));
}

void cmdAudit(Run& run, const Representation& rho) {
  const json& ac = run.config["audit"];
  ConvexDomain omega = ConvexDomain::kleinBall(2);
  Vec b0(3);
  b0 << 0, 0, 1;
  AuditOptions o;
  o.radius = ac["radius"].get<double>();
  o.seed = run.seed;
  o.ball = run.ball;
  AdditivityAudit a = coarseAdditivityAudit(rho, omega, b0, ac["epsilon"].get<double>(), ac["samples"].get<int>(), o);
  run.add("audit.json", jsonText({{"pairsDrawn", a.pairsDrawn},
                                  {"pairsSeparated", a.pairsSeparated},
                                  {"omegaMaxDefect", a.omegaMaxDefect},
                                  {"alphaMinDefect", a.minDefect},
                                  {"alphaMaxDefect", a.maxDefect},
                                  {"batchMinA", a.batchMinA},
                                  {"batchMinB", a.batchMinB},
                                  {"stableWithin0.2", a.stable(0.2)}}));
}

int exitCodeFor(ErrorKind k) {
  switch (k) {
    case ErrorKind::BudgetExceeded: return 3;
    case ErrorKind::InsufficientWindow:
    case ErrorKind::InsufficientScales:
    case ErrorKind::EmptyCover:
    case ErrorKind::NoChildrenFound:
    case ErrorKind::IncompleteTree: return 4;
    case ErrorKind::InvalidInput:
    case ErrorKind::InvalidIndex:
    case ErrorKind::Unsupported:
    case ErrorKind::NotDiscreteCertificate: return 2;
    default: return 5;
  }
}

const char* statusName(int code) {
  switch (code) {
    case 0: return "ok";
    case 2: return "config-error";
    case 3: return "budget-exceeded";
    case 4: return "insufficient-data";
    default: return "numerical-failure";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cartan spectra, critical exponents and limit sets of surface group representations"};
  app.require_subcommand(1, 1);
  std::string configPath, outDir;
  std::optional<int> threads;
  std::optional<long long> seed;
  const std::vector<std::pair<std::string, std::string>> commands{
      {"spectrum", "CSV of kappa, nu, alpha_k, omega_k over the ball"},
      {"exponent", "critical exponent, entropy and log N(t) plot"},
      {"rigidity", "entropy against 1/(c_1+...+c_{d-1})"},
      {"limitset", "limit set sample as CSV and SVG"},
      {"hausdorff", "box counting, shadow cover, shadow tree"},
      {"positivity", "triple positivity along the flag curve"},
      {"double", "doubling across boundary words"},
      {"audit", "coarse additivity audit"}};
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", configPath, "JSON config")->required();
    sub->add_option("--out", outDir, "output directory");
    sub->add_option("--threads", threads, "worker threads");
    sub->add_option("--seed", seed, "random seed");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  Run run;
  run.command = command;
  json raw;
  try {
    std::string text;
    try {
      text = io::readFile(configPath);
    } catch (const Error&) {
      throw ConfigError("cannot read config '" + configPath + "'");
    }
    try {
      raw = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ConfigError(std::string("malformed JSON: ") + e.what());
    }
    run.config = resolveConfig(raw);
    if (!outDir.empty()) run.config["out"] = outDir;
    if (threads) {
      if (*threads < 1) throw ConfigError("--threads must be positive");
      run.config["threads"] = *threads;
    }
    if (seed) run.config["seed"] = *seed;
    for (const char* var : {"TOOL_BUDGET_CAP", "HITCHIN_BUDGET_CAP"}) {
      if (const char* v = std::getenv(var)) {
        char* end = nullptr;
        long long cap = std::strtoll(v, &end, 10);
        if (!*v || *end || cap < 1) throw ConfigError(std::string(var) + " must be a positive integer");
        run.config["elementCap"] = cap;
        break;
      }
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }
  run.out = run.config["out"].get<std::string>();
  run.threads = run.config["threads"].get<int>();
  run.seed = run.config["seed"].get<std::uint64_t>();
  run.wallClock = run.config["wallClock"].get<double>();
  run.ball.elementCap = static_cast<std::size_t>(run.config["elementCap"].get<long long>());
  run.ball.threads = run.threads;

  int code = 0;
  std::string message;
  try {
    GeneratorSystem G = buildGroup(run.config);
    Representation rho = buildRepresentation(G, run.config);
    if (command == "spectrum") cmdSpectrum(run, rho);
    else if (command == "exponent") cmdExponent(run, rho);
    else if (command == "rigidity") cmdRigidity(run, rho);
    else if (command == "limitset") cmdLimitset(run, rho);
    else if (command == "hausdorff") cmdHausdorff(run, rho);
    else if (command == "positivity") cmdPositivity(run, rho);
    else if (command == "double") cmdDouble(run, rho);
    else if (command == "audit") cmdAudit(run, rho);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    code = exitCodeFor(e.kind());
    message = e.what();
    if (code == 2) {
      std::cerr << "config error: " << message << "\n";
      return 2;
    }
  } catch (const std::exception& e) {
    code = 5;
    message = e.what();
  }

  try {
    fs::create_directories(run.out);
    json manifest;
    manifest["tool"] = "hitchin";
    manifest["command"] = command;
    manifest["config"] = run.config;
    manifest["inputHash"] = io::hex64(io::fnv1a(inputBytes, io::fnv1a(run.config.dump())));
    manifest["status"] = statusName(code);
    manifest["exitCode"] = code;
    manifest["partial"] = code != 0;
    if (!message.empty()) manifest["message"] = message;
    json outs = json::object();
    for (const auto& [name, content] : run.files) {
      io::writeFile((run.out / name).string(), content);
      outs[name] = io::hex64(io::fnv1a(content));
    }
    manifest["outputs"] = outs;
    io::writeFile((run.out / "manifest.json").string(), jsonText(manifest));
  } catch (const std::exception& e) {
    std::cerr << "cannot write outputs: " << e.what() << "\n";
    return 5;
  }
  if (code != 0) std::cerr << statusName(code) << ": " << message << "\n";
  return code;
}
