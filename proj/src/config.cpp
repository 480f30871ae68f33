#include "codesign/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace codesign::harness {

namespace {

struct KindName {
  ExperimentKind kind;
  const char* name;
};

constexpr KindName kKinds[] = {
    {ExperimentKind::Iswap, "iswap"},     {ExperimentKind::IswapRobust, "iswap-robust"},
    {ExperimentKind::CphaseChip, "cphase-chip"}, {ExperimentKind::Scan, "scan"},
    {ExperimentKind::Bench, "bench"},     {ExperimentKind::Gradcheck, "gradcheck"},
    {ExperimentKind::Demo, "demo"},
};

}  // namespace

std::string_view kind_name(ExperimentKind kind) {
  for (const auto& k : kKinds) {
    if (k.kind == kind) return k.name;
  }
  return "unknown";
}

ExperimentKind parse_kind(std::string_view name) {
  for (const auto& k : kKinds) {
    if (name == k.name) return k.kind;
  }
  throw ValidationError("unknown experiment kind '" + std::string(name) + "'");
}

ConfigError::ConfigError(const std::string& source, const std::string& where, const std::string& message)
    : ValidationError(source + (where.empty() ? "" : ": " + where) + ": " + message) {}

ExperimentKind ExperimentConfig::objective_kind() const {
  switch (kind) {
    case ExperimentKind::Gradcheck: return gradcheck_objective;
    case ExperimentKind::Scan: return ExperimentKind::Iswap;
    default: return kind;
  }
}

std::vector<double> ExperimentConfig::scan_deltas() const {
  std::vector<double> d;
  if (scan_points == 1) return {scan_min};
  for (int i = 0; i < scan_points; ++i) d.push_back(scan_min + (scan_max - scan_min) * i / (scan_points - 1));
  return d;
}

namespace {

// ---------------------------------------------------------------------------
// Field table shared by the parsers and the JSON echo.

struct Field {
  std::string section;  ///< empty for top-level keys
  std::string key;
  std::function<void(const std::string&)> set;
  std::function<Json()> get;
};

double to_double(const std::string& s) {
  double v = 0.0;
  const char* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v)) throw ValidationError("expected a number, got '" + s + "'");
  return v;
}

template <typename Int>
Int to_integer(const std::string& s) {
  Int v = 0;
  const char* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ValidationError("expected an integer, got '" + s + "'");
  return v;
}

std::string trim(std::string s) {
  const auto blank = [](unsigned char c) { return std::isspace(c) != 0; };
  s.erase(s.begin(), std::find_if_not(s.begin(), s.end(), blank));
  s.erase(std::find_if_not(s.rbegin(), s.rend(), blank).base(), s.end());
  return s;
}

class FieldTable {
 public:
  void real(const std::string& section, const std::string& key, double& x) {
    add(section, key, [&x](const std::string& s) { x = to_double(s); }, [&x] { return Json(x); });
  }
  template <typename Int>
  void integer(const std::string& section, const std::string& key, Int& x) {
    add(section, key, [&x](const std::string& s) { x = to_integer<Int>(s); }, [&x] { return Json(x); });
  }
  void add(const std::string& section, const std::string& key, std::function<void(const std::string&)> set,
           std::function<Json()> get) {
    fields_.push_back({section, key, std::move(set), std::move(get)});
  }

  const Field* find(const std::string& section, const std::string& key) const {
    for (const auto& f : fields_) {
      if (f.section == section && f.key == key) return &f;
    }
    return nullptr;
  }
  bool has_section(const std::string& section) const {
    return std::any_of(fields_.begin(), fields_.end(), [&](const Field& f) { return f.section == section; });
  }
  const std::vector<Field>& fields() const { return fields_; }

 private:
  std::vector<Field> fields_;
};

FieldTable fields_of(ExperimentConfig& c) {
  FieldTable t;
  t.add("", "kind", [&c](const std::string& s) { c.kind = parse_kind(s); },
        [&c] { return Json(std::string(kind_name(c.kind))); });
  t.integer("", "seed", c.seed);

  auto& q1 = c.iswap.q1;
  auto& q2 = c.iswap.q2;
  t.real("device", "e_c1", q1.e_c);
  t.real("device", "e_j1", q1.e_j);
  t.real("device", "e_l1", q1.e_l);
  t.real("device", "e_c2", q2.e_c);
  t.real("device", "e_j2", q2.e_j);
  t.real("device", "e_l2", q2.e_l);
  t.real("device", "j_c", c.iswap.j_c);
  t.real("control", "t_ramp", c.iswap.control.t_ramp);
  t.real("control", "t_plateau", c.iswap.control.t_plateau);
  t.real("control", "phi_p", c.iswap.control.phi_p);

  auto& chip = c.chip;
  t.real("chip", "e_c_h", chip.high.e_c);
  t.real("chip", "e_j_h", chip.high.e_j);
  t.real("chip", "e_c_m", chip.mid.e_c);
  t.real("chip", "e_j_m", chip.mid.e_j);
  t.real("chip", "e_c_l", chip.low.e_c);
  t.real("chip", "e_j_l", chip.low.e_j);
  t.add(
      "chip", "coupling_law",
      [&chip](const std::string& s) {
        using K = spectral::CouplingLaw::Kind;
        K k;
        if (s == "fixed") {
          k = K::Fixed;
        } else if (s == "capacitive") {
          k = K::Capacitive;
        } else {
          throw ValidationError("expected 'fixed' or 'capacitive', got '" + s + "'");
        }
        chip.hm.kind = k;
        chip.ml.kind = k;
      },
      [&chip] { return Json(chip.hm.kind == spectral::CouplingLaw::Kind::Fixed ? "fixed" : "capacitive"); });
  t.real("chip", "hm_coupling", chip.hm.value);
  t.real("chip", "ml_coupling", chip.ml.value);
  t.real("chip", "calibrate_hm_idle", c.calibrate_hm_idle);
  t.real("chip", "calibrate_ml_idle", c.calibrate_ml_idle);
  t.integer("chip", "levels", chip.levels);
  t.integer("chip", "charge_cutoff", chip.charge_cutoff);

  auto& o = c.optimizer;
  t.real("optimizer", "r_init", o.r_init);
  t.real("optimizer", "decay_halflife_steps", o.decay_halflife_steps);
  t.real("optimizer", "b1", o.b1);
  t.real("optimizer", "b2", o.b2);
  t.real("optimizer", "eps", o.eps);
  t.integer("optimizer", "steps", o.steps);
  t.integer("optimizer", "snapshot_every", o.snapshot_every);

  auto& s = c.iswap_settings;
  auto& search = c.cphase_settings.search;
  t.real("solver", "dt", s.solver.dt);
  t.real("solver", "unitarity_check_tol", s.solver.unitarity_check_tol);
  t.integer("solver", "checkpoint_interval", s.solver.checkpoint_interval);
  t.integer("solver", "levels", s.levels);
  t.integer("solver", "n_basis", s.grid.n_basis);
  t.real("solver", "phi_min", s.grid.phi_min);
  t.real("solver", "phi_max", s.grid.phi_max);
  t.real("solver", "threshold", search.threshold);
  t.real("solver", "search_step", search.step);
  t.real("solver", "search_tolerance", search.tolerance);

  auto& ki = s.constants;
  auto& kc = c.cphase_settings.constants;
  t.real("constants", "delta", ki.delta);
  t.real("constants", "c_fdiff", ki.c_fdiff);
  t.real("constants", "c_fm1", ki.c_fm1);
  t.real("constants", "c_fm2", ki.c_fm2);
  t.real("constants", "tan_delta_c", ki.physical.tan_delta_c);
  t.real("constants", "temperature", ki.physical.temperature);
  t.real("constants", "c_f", ki.physical.c_f);
  t.real("constants", "c_zz1", kc.c_zz1);
  t.real("constants", "c_zz2", kc.c_zz2);
  t.real("constants", "c_tm", kc.c_tm);
  t.real("constants", "c_ah1", kc.c_ah1);
  t.real("constants", "c_ah2", kc.c_ah2);
  t.real("constants", "c_fdiff1", kc.c_fdiff1);
  t.real("constants", "c_fdiff2", kc.c_fdiff2);
  t.real("constants", "c_scale", kc.c_scale);
  t.add(
      "constants", "gate_term",
      [&kc](const std::string& v) {
        if (v == "reciprocal") {
          kc.gate_form = objectives::GateTermForm::Reciprocal;
        } else if (v == "literal") {
          kc.gate_form = objectives::GateTermForm::Literal;
        } else {
          throw ValidationError("expected 'reciprocal' or 'literal', got '" + v + "'");
        }
      },
      [&kc] { return Json(kc.gate_form == objectives::GateTermForm::Reciprocal ? "reciprocal" : "literal"); });

  t.real("robust", "delta_phi_p", c.robust_delta_phi_p);

  t.real("scan", "delta_min", c.scan_min);
  t.real("scan", "delta_max", c.scan_max);
  t.integer("scan", "points", c.scan_points);

  t.add("gradcheck", "objective", [&c](const std::string& v) { c.gradcheck_objective = parse_kind(v); },
        [&c] { return Json(std::string(kind_name(c.gradcheck_objective))); });
  t.real("gradcheck", "rel_tol", c.gradcheck_rel_tol);
  t.real("gradcheck", "abs_floor", c.gradcheck_abs_floor);
  t.real("gradcheck", "rel_step", c.gradcheck_rel_step);

  t.add(
      "bench", "chains",
      [&c](const std::string& v) {
        std::string list = v;
        std::replace(list.begin(), list.end(), '[', ' ');
        std::replace(list.begin(), list.end(), ']', ' ');
        c.bench_chains.clear();
        std::stringstream ss(list);
        std::string item;
        while (std::getline(ss, item, ',')) {
          item = trim(item);
          if (!item.empty()) c.bench_chains.push_back(to_integer<int>(item));
        }
      },
      [&c] { return Json(c.bench_chains); });
  t.integer("bench", "levels", c.bench.levels);
  t.real("bench", "e_c", c.bench.site.e_c);
  t.real("bench", "e_j", c.bench.site.e_j);
  t.real("bench", "e_l", c.bench.site.e_l);
  t.real("bench", "j_c", c.bench.j_c);
  t.integer("bench", "repeats", c.bench.repeats);
  t.integer("bench", "warmup", c.bench.warmup);

  t.add("demo", "x0", [&c](const std::string& v) { c.demo_x0 = to_double(v); c.demo_start_given = true; },
        [&c] { return Json(c.demo_x0); });
  t.add("demo", "y0", [&c](const std::string& v) { c.demo_y0 = to_double(v); c.demo_start_given = true; },
        [&c] { return Json(c.demo_y0); });
  t.integer("demo", "sweeps", c.demo_sweeps);
  t.integer("demo", "max_evaluations", c.demo_max_evaluations);
  t.real("demo", "target", c.demo_target);
  return t;
}

std::vector<std::string> relevant_sections(const ExperimentConfig& c) {
  switch (c.kind) {
    case ExperimentKind::Iswap: return {"device", "control", "solver", "constants", "optimizer"};
    case ExperimentKind::IswapRobust: return {"device", "control", "solver", "constants", "optimizer", "robust"};
    case ExperimentKind::CphaseChip: return {"chip", "solver", "constants", "optimizer"};
    case ExperimentKind::Scan: return {"device", "control", "solver", "constants", "scan"};
    case ExperimentKind::Bench: return {"bench", "solver"};
    case ExperimentKind::Demo: return {"demo"};
    case ExperimentKind::Gradcheck:
      switch (c.gradcheck_objective) {
        case ExperimentKind::CphaseChip: return {"chip", "solver", "constants", "gradcheck"};
        case ExperimentKind::IswapRobust: return {"device", "control", "solver", "constants", "robust", "gradcheck"};
        default: return {"device", "control", "solver", "constants", "gradcheck"};
      }
  }
  return {};
}

struct RawEntry {
  std::string section;
  std::string key;
  std::string value;
};

ExperimentConfig build(const std::vector<RawEntry>& entries, const std::string& source) {
  ExperimentConfig c;
  const FieldTable table = fields_of(c);
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& e : entries) {
    const std::string where = e.section.empty() ? e.key : "[" + e.section + "] " + e.key;
    if (!e.section.empty() && !table.has_section(e.section)) {
      throw ConfigError(source, "[" + e.section + "]", "unknown section");
    }
    const Field* f = table.find(e.section, e.key);
    if (f == nullptr) throw ConfigError(source, where, "unknown key");
    if (!seen.insert({e.section, e.key}).second) throw ConfigError(source, where, "duplicate key");
    try {
      f->set(trim(e.value));
    } catch (const std::exception& ex) {
      throw ConfigError(source, where, ex.what());
    }
  }
  if (!seen.count({"", "kind"})) throw ConfigError(source, "kind", "missing required key");

  auto require = [&](const std::string& section, std::initializer_list<const char*> keys) {
    for (const char* k : keys) {
      if (!seen.count({section, k})) throw ConfigError(source, "[" + section + "] " + k, "missing required key");
    }
  };
  const auto sections = relevant_sections(c);
  auto relevant = [&](const char* s) { return std::find(sections.begin(), sections.end(), s) != sections.end(); };
  if (relevant("device")) require("device", {"e_c1", "e_j1", "e_l1", "e_c2", "e_j2", "e_l2", "j_c"});
  if (relevant("control")) require("control", {"t_ramp", "t_plateau", "phi_p"});
  if (relevant("chip")) {
    require("chip", {"e_c_h", "e_j_h", "e_c_m", "e_j_m", "e_c_l", "e_j_l"});
    if (!seen.count({"chip", "hm_coupling"}) && !seen.count({"chip", "calibrate_hm_idle"})) {
      throw ConfigError(source, "[chip] hm_coupling", "missing; give hm_coupling or calibrate_hm_idle");
    }
    if (!seen.count({"chip", "ml_coupling"}) && !seen.count({"chip", "calibrate_ml_idle"})) {
      throw ConfigError(source, "[chip] ml_coupling", "missing; give ml_coupling or calibrate_ml_idle");
    }
  }
  try {
    c.validate();
  } catch (const std::exception& ex) {
    throw ConfigError(source, "", ex.what());
  }
  return c;
}

}  // namespace

void ExperimentConfig::validate() const {
  const auto sections = relevant_sections(*this);
  auto relevant = [&](const char* s) { return std::find(sections.begin(), sections.end(), s) != sections.end(); };
  if (kind == ExperimentKind::Gradcheck &&
      (gradcheck_objective == ExperimentKind::Scan || gradcheck_objective == ExperimentKind::Bench ||
       gradcheck_objective == ExperimentKind::Gradcheck || gradcheck_objective == ExperimentKind::Demo)) {
    throw ValidationError("gradcheck: objective must be iswap, iswap-robust or cphase-chip");
  }
  if (relevant("device")) {
    iswap.q1.validate();
    iswap.q2.validate();
    if (!(iswap.j_c >= 0.0)) throw ValidationError("device: j_c must not be negative");
  }
  if (relevant("control")) iswap.control.validate();
  if (relevant("solver")) {
    iswap_settings.grid.validate();
    if (!(iswap_settings.solver.dt > 0.0)) throw ValidationError("solver: dt must be positive");
    if (!(iswap_settings.solver.unitarity_check_tol > 0.0)) {
      throw ValidationError("solver: unitarity_check_tol must be positive");
    }
    if (iswap_settings.solver.checkpoint_interval < 1) {
      throw ValidationError("solver: checkpoint_interval must be positive");
    }
    if (iswap_settings.levels < 2) throw ValidationError("solver: levels must be at least 2");
    const auto& s = cphase_settings.search;
    if (!(s.threshold > 0.0 && s.threshold < 1.0)) throw ValidationError("solver: threshold must lie in (0, 1)");
    if (!(s.step > 0.0) || !(s.tolerance > 0.0)) {
      throw ValidationError("solver: search_step and search_tolerance must be positive");
    }
  }
  if (relevant("constants")) {
    objectives::PenaltyConstants k{iswap_settings.constants, cphase_settings.constants};
    k.validate();
  }
  if (relevant("chip")) {
    chip.high.validate();
    chip.mid.validate();
    chip.low.validate();
    if (chip.levels < 3) throw ValidationError("chip: levels must be at least 3");
    if (chip.charge_cutoff < 2) throw ValidationError("chip: charge_cutoff must be at least 2");
    if (calibrate_hm_idle < 0.0 || calibrate_ml_idle < 0.0) {
      throw ValidationError("chip: calibration targets must not be negative");
    }
    if (calibrate_hm_idle == 0.0 && !(chip.hm.value > 0.0)) throw ValidationError("chip: hm_coupling must be positive");
    if (calibrate_ml_idle == 0.0 && !(chip.ml.value > 0.0)) throw ValidationError("chip: ml_coupling must be positive");
  }
  if (relevant("optimizer")) optimizer.validate();
  if (relevant("robust") && !(robust_delta_phi_p > 0.0)) throw ValidationError("robust: delta_phi_p must be positive");
  if (relevant("scan")) {
    if (scan_points < 1) throw ValidationError("scan: points must be positive");
    if (!(scan_min <= scan_max)) throw ValidationError("scan: delta_min must not exceed delta_max");
  }
  if (relevant("gradcheck")) {
    if (!(gradcheck_rel_tol > 0.0) || !(gradcheck_abs_floor >= 0.0) || !(gradcheck_rel_step > 0.0)) {
      throw ValidationError("gradcheck: tolerances and step must be positive");
    }
  }
  if (relevant("bench")) {
    if (bench_chains.empty()) throw ValidationError("bench: chains must not be empty");
    for (int n : bench_chains) {
      ChainConfig b = bench;
      b.n_fm = n;
      b.grid = iswap_settings.grid;
      b.validate();
    }
  }
  if (relevant("demo")) {
    if (demo_sweeps < 1 || demo_max_evaluations < 2) throw ValidationError("demo: budgets must be positive");
    if (!(demo_target > 0.0)) throw ValidationError("demo: target must be positive");
  }
}

ExperimentConfig parse_ini(const std::string& text, const std::string& source) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(source, "line " + std::to_string(e.line()), e.message());
  }
  std::vector<RawEntry> entries;
  for (const auto& [name, node] : tree) {
    if (node.empty()) {
      entries.push_back({"", name, node.data()});
      continue;
    }
    for (const auto& [key, leaf] : node) entries.push_back({name, key, leaf.data()});
  }
  return build(entries, source);
}

ExperimentConfig parse_json(const std::string& text, const std::string& source) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ConfigError(source, "byte " + std::to_string(e.byte), "invalid JSON");
  }
  if (doc.is_object() && doc.contains("config") && doc["config"].is_object()) doc = doc["config"];
  if (!doc.is_object()) throw ConfigError(source, "", "expected a JSON object");

  auto scalar = [&](const Json& v, const std::string& where) -> std::string {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number()) return v.dump();
    if (v.is_array()) {
      std::string out;
      for (const auto& item : v) {
        if (!item.is_number_integer()) throw ConfigError(source, where, "expected a list of integers");
        out += (out.empty() ? "" : ",") + item.dump();
      }
      return out;
    }
    throw ConfigError(source, where, "expected a number or a string");
  };
  std::vector<RawEntry> entries;
  for (const auto& [name, node] : doc.items()) {
    if (node.is_object()) {
      for (const auto& [key, leaf] : node.items()) entries.push_back({name, key, scalar(leaf, "[" + name + "] " + key)});
    } else {
      entries.push_back({"", name, scalar(node, name)});
    }
  }
  return build(entries, source);
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string(), "", "cannot open file");
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  const auto first = text.find_first_not_of(" \t\r\n");
  const bool json = path.extension() == ".json" || (first != std::string::npos && text[first] == '{');
  return json ? parse_json(text, path.string()) : parse_ini(text, path.string());
}

Json to_json(const ExperimentConfig& cfg) {
  ExperimentConfig copy = cfg;
  const FieldTable table = fields_of(copy);
  Json j = Json::object();
  const auto sections = relevant_sections(cfg);
  for (const auto& f : table.fields()) {
    if (f.section.empty()) j[f.key] = f.get();
  }
  for (const auto& s : sections) {
    Json obj = Json::object();
    for (const auto& f : table.fields()) {
      if (f.section != s) continue;
      if (s == "demo" && (f.key == "x0" || f.key == "y0") && !cfg.demo_start_given) continue;
      obj[f.key] = f.get();
    }
    j[s] = obj;
  }
  return j;
}

}  // namespace codesign::harness
