#include "fga/errors.hpp"
#include "fga/harness.hpp"

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace fga {

namespace pt = boost::property_tree;

namespace {

std::string trimmed(std::string s) {
  boost::algorithm::trim(s);
  return s;
}

double to_number(const std::string& s, const std::string& key) {
  const std::string t = trimmed(s);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(t, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (t.empty() || used != t.size()) fail(ErrorKind::kConfig, key + ": '" + s + "' is not a number");
  return v;
}

int to_int(const std::string& s, const std::string& key) {
  const double v = to_number(s, key);
  if (v != std::round(v) || std::abs(v) > 1e9) fail(ErrorKind::kConfig, key + ": '" + s + "' is not an integer");
  return static_cast<int>(v);
}

bool to_bool(const std::string& s, const std::string& key) {
  const std::string t = boost::algorithm::to_lower_copy(trimmed(s));
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  fail(ErrorKind::kConfig, key + ": '" + s + "' is not a boolean");
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> parts;
  const std::string t = trimmed(s);
  if (t.empty()) return parts;
  boost::algorithm::split(parts, t, boost::is_any_of(","));
  for (auto& p : parts) p = trimmed(p);
  return parts;
}

std::vector<double> to_numbers(const std::string& s, const std::string& key) {
  std::vector<double> out;
  for (const auto& p : split_list(s)) out.push_back(to_number(p, key));
  return out;
}

std::vector<int> to_ints(const std::string& s, const std::string& key) {
  std::vector<int> out;
  for (const auto& p : split_list(s)) out.push_back(to_int(p, key));
  return out;
}

template <class T, class F>
std::string join(const std::vector<T>& v, F&& f) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + f(v[i]);
  return s;
}

std::string numbers(const std::vector<double>& v) { return join(v, format_double); }
std::string ints(const std::vector<int>& v) {
  return join(v, [](int i) { return std::to_string(i); });
}

struct Field {
  const char* section;
  const char* key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
};

#define FGA_DOUBLE(sec, name, member)                                                \
  Field {                                                                            \
    sec, name, [](const RunConfig& c) { return format_double(c.member); },           \
        [](RunConfig& c, const std::string& v, const std::string& k) { c.member = to_number(v, k); } \
  }
#define FGA_INT(sec, name, member)                                                   \
  Field {                                                                            \
    sec, name, [](const RunConfig& c) { return std::to_string(c.member); },          \
        [](RunConfig& c, const std::string& v, const std::string& k) { c.member = to_int(v, k); } \
  }
#define FGA_STRING(sec, name, member)                                                \
  Field {                                                                            \
    sec, name, [](const RunConfig& c) { return c.member; },                          \
        [](RunConfig& c, const std::string& v, const std::string&) { c.member = trimmed(v); } \
  }
#define FGA_NUMBERS(sec, name, member)                                               \
  Field {                                                                            \
    sec, name, [](const RunConfig& c) { return numbers(c.member); },                 \
        [](RunConfig& c, const std::string& v, const std::string& k) { c.member = to_numbers(v, k); } \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> f{
      FGA_INT("potential", "dim", dim),
      FGA_STRING("potential", "V", lattice),
      FGA_STRING("potential", "U", external),
      FGA_NUMBERS("numerics", "eps", eps),
      FGA_INT("numerics", "M", nodes),
      FGA_INT("numerics", "K", cutoff),
      FGA_INT("numerics", "n_bands", n_bands),
      FGA_DOUBLE("numerics", "c_g", c_g),
      FGA_DOUBLE("numerics", "r_c", r_c),
      FGA_DOUBLE("numerics", "dt", dt),
      FGA_DOUBLE("numerics", "length", length),
      FGA_INT("numerics", "points_per_cell", points_per_cell),
      FGA_DOUBLE("numerics", "seed_threshold", seed_threshold),
      FGA_DOUBLE("numerics", "reference_dt_divisor", reference_dt_divisor),
      Field{"numerics", "track_a1", [](const RunConfig& c) { return std::string(c.track_a1 ? "true" : "false"); },
            [](RunConfig& c, const std::string& v, const std::string& k) { c.track_a1 = to_bool(v, k); }},
      FGA_STRING("initial", "type", initial_type),
      FGA_NUMBERS("initial", "q0", q0),
      FGA_NUMBERS("initial", "p0", p0),
      FGA_DOUBLE("initial", "width", width),
      FGA_INT("initial", "band", packet_band),
      FGA_STRING("initial", "file", initial_file),
      FGA_STRING("run", "mode", mode),
      FGA_DOUBLE("run", "T", T),
      FGA_NUMBERS("run", "checkpoints", checkpoints),
      FGA_STRING("run", "out", out),
      Field{"run", "bands", [](const RunConfig& c) { return ints(c.bands); },
            [](RunConfig& c, const std::string& v, const std::string& k) { c.bands = to_ints(v, k); }},
      FGA_DOUBLE("tolerances", "t0_consistency", t0_consistency),
      FGA_DOUBLE("tolerances", "symplecticity", sympl_tolerance),
      FGA_DOUBLE("tolerances", "sigma_floor", sigma_floor),
      FGA_DOUBLE("tolerances", "gap_factor", gap_factor),
      FGA_DOUBLE("tolerances", "order", order_threshold),
      FGA_DOUBLE("tolerances", "error_floor", error_floor),
      FGA_DOUBLE("tolerances", "memory_limit_mb", memory_limit_mb),
  };
  return f;
}

#undef FGA_DOUBLE
#undef FGA_INT
#undef FGA_STRING
#undef FGA_NUMBERS

const Field* find_field(const std::string& section, const std::string& key) {
  for (const Field& f : fields())
    if (section == f.section && key == f.key) return &f;
  return nullptr;
}

// Applies every key of an INI tree to cfg; unknown keys are errors.
void apply_tree(RunConfig& cfg, const pt::ptree& tree, const std::string& prefix = "") {
  for (const auto& [section, body] : tree) {
    std::string name = section;
    if (!prefix.empty()) {
      if (name.rfind(prefix, 0) != 0) continue;
      name = name.substr(prefix.size());
    }
    for (const auto& [key, value] : body) {
      const Field* f = find_field(name, key);
      if (f == nullptr) fail(ErrorKind::kConfig, "unknown key " + name + "." + key);
      f->set(cfg, value.data(), name + "." + key);
    }
  }
}

std::string config_sections(const RunConfig& cfg, const std::string& prefix) {
  std::ostringstream os;
  std::string current;
  for (const Field& f : fields()) {
    if (current != f.section) {
      if (!current.empty()) os << '\n';
      current = f.section;
      os << '[' << prefix << current << "]\n";
    }
    os << f.key << " = " << f.get(cfg) << '\n';
  }
  return os.str();
}

bool power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

}  // namespace

PeriodicPotential parse_lattice_spec(const std::string& spec, int dim) {
  const std::string s = trimmed(spec);
  if (s.rfind("file(", 0) == 0) {
    const auto eq = s.find('=');
    const auto close = s.rfind(')');
    if (eq == std::string::npos || close == std::string::npos || close < eq) {
      fail(ErrorKind::kConfig, "malformed lattice spec '" + s + "'");
    }
    std::ifstream in(trimmed(s.substr(eq + 1, close - eq - 1)));
    if (!in) fail(ErrorKind::kConfig, "cannot open lattice potential file in '" + s + "'");
    PeriodicPotential v = PeriodicPotential::parse(in);
    if (v.dim() != dim) fail(ErrorKind::kConfig, "lattice potential file has the wrong dimension");
    return v;
  }
  std::map<IVec, cplx> coeffs;
  std::vector<std::string> terms;
  boost::algorithm::split(terms, s, boost::is_any_of("+"));
  for (std::string term : terms) {
    term = trimmed(term);
    if (term.empty() || term == "zero" || term == "0") continue;
    const auto open = term.find('(');
    const auto close = term.rfind(')');
    if (open == std::string::npos || close == std::string::npos || close < open) {
      fail(ErrorKind::kConfig, "malformed lattice term '" + term + "'");
    }
    const std::string name = trimmed(term.substr(0, open));
    std::map<std::string, std::string> args;
    for (const auto& item : split_list(term.substr(open + 1, close - open - 1))) {
      const auto eq = item.find('=');
      if (eq == std::string::npos) fail(ErrorKind::kConfig, "expected key=value in '" + term + "'");
      args[trimmed(item.substr(0, eq))] = trimmed(item.substr(eq + 1));
    }
    auto num = [&](const std::string& k, double dflt) {
      return args.count(k) ? to_number(args[k], term) : dflt;
    };
    if (name == "cos") {
      const int axis = static_cast<int>(num("axis", 0));
      if (axis < 0 || axis >= dim) fail(ErrorKind::kConfig, "cos axis out of range in '" + term + "'");
      IVec k{0, 0};
      k[axis] = 1;
      coeffs[k] += 0.5 * num("amp", 0.0);
      k[axis] = -1;
      coeffs[k] += 0.5 * num("amp", 0.0);
    } else if (name == "fourier") {
      IVec k{0, 0};
      std::vector<std::string> parts;
      boost::algorithm::split(parts, args.count("k") ? args["k"] : std::string("0"), boost::is_any_of(";"));
      if (static_cast<int>(parts.size()) != dim) fail(ErrorKind::kConfig, "fourier k needs " + std::to_string(dim) + " components");
      for (int a = 0; a < dim; ++a) k[a] = to_int(parts[a], term);
      coeffs[k] += cplx{num("re", 0.0), num("im", 0.0)};
    } else {
      fail(ErrorKind::kConfig, "unknown lattice term '" + name + "'");
    }
  }
  if (coeffs.empty()) return PeriodicPotential::zero(dim);
  return PeriodicPotential(dim, coeffs);
}

void RunConfig::validate() const {
  auto need = [](bool ok, const std::string& what) {
    if (!ok) fail(ErrorKind::kConfig, what);
  };
  need(dim == 1 || dim == 2, "potential.dim must be 1 or 2");
  PeriodicPotential v;
  ExternalPotential u;
  try {
    v = lattice_potential();
    u = external_potential();
  } catch (const Error& e) {
    fail(ErrorKind::kConfig, std::string("potential: ") + e.what());
  }
  need(v.is_hermitian(1e-12), "potential.V must be real-valued (Vhat_-k = conj Vhat_k)");
  need(!eps.empty(), "numerics.eps must list at least one value");
  for (double e : eps) {
    need(e > 0.0 && e <= 1.0, "numerics.eps values must lie in (0, 1]");
    need(length > 0.0, "numerics.length must be positive");
    const double cells = length / e;
    need(std::abs(cells - std::round(cells)) < 1e-9 * cells, "numerics.length / eps must be an integer for eps=" + format_double(e));
  }
  need(power_of_two(nodes) && nodes >= 8, "numerics.M must be a power of two >= 8");
  need(cutoff >= 1 && cutoff <= 256, "numerics.K must lie in [1, 256]");
  need(cutoff >= v.cutoff(), "numerics.K is below the lattice potential's Fourier cutoff");
  const int basis = dim == 1 ? 2 * cutoff + 1 : (2 * cutoff + 1) * (2 * cutoff + 1);
  need(n_bands >= 1 && n_bands < basis, "numerics.n_bands must lie in [1, basis size)");
  need(c_g > 0.0 && c_g <= 1.0, "numerics.c_g must lie in (0, 1]");
  need(r_c >= 1.0 && r_c <= 20.0, "numerics.r_c must lie in [1, 20]");
  need(dt > 0.0 && dt <= 0.1, "numerics.dt must lie in (0, 0.1]");
  need(points_per_cell >= 8 && points_per_cell <= 1024, "numerics.points_per_cell must lie in [8, 1024]");
  need(seed_threshold >= 0.0 && seed_threshold < 1.0, "numerics.seed_threshold must lie in [0, 1)");
  need(reference_dt_divisor >= 1.0, "numerics.reference_dt_divisor must be >= 1");
  need(initial_type == "gaussian-packet" || initial_type == "file", "initial.type must be gaussian-packet or file");
  if (initial_type == "gaussian-packet") {
    need(static_cast<int>(q0.size()) == dim && static_cast<int>(p0.size()) == dim, "initial.q0 and initial.p0 need dim components");
    need(width > 0.0, "initial.width must be positive");
    need(packet_band >= 1 && packet_band <= n_bands, "initial.band must lie in [1, n_bands]");
  } else {
    need(!initial_file.empty(), "initial.file is required for type=file");
  }
  static const std::set<std::string> modes{"bands", "decompose", "propagate", "reference", "convergence", "report"};
  need(modes.count(mode) == 1, "run.mode must name a command");
  need(std::isfinite(T) && T >= 0.0, "run.T must be finite and non-negative");
  for (std::size_t i = 0; i < checkpoints.size(); ++i) {
    need(checkpoints[i] >= 0.0 && checkpoints[i] <= T, "run.checkpoints must lie in [0, T]");
    need(i == 0 || checkpoints[i] > checkpoints[i - 1], "run.checkpoints must be strictly ascending");
  }
  need(!bands.empty(), "run.bands must name at least one band");
  std::set<int> seen;
  for (int b : bands) {
    need(b >= 1 && b <= n_bands, "run.bands entries must lie in [1, n_bands]");
    need(seen.insert(b).second, "run.bands has a duplicate entry");
  }
  need(t0_consistency > 0.0 && sympl_tolerance > 0.0 && error_floor > 0.0, "tolerances must be positive");
  need(sigma_floor >= 0.0, "tolerances.sigma_floor must be non-negative");
  need(gap_factor >= 0.0, "tolerances.gap_factor must be non-negative");
  need(order_threshold > 0.0, "tolerances.order must be positive");
  need(memory_limit_mb > 0.0, "tolerances.memory_limit_mb must be positive");
}

std::vector<double> RunConfig::checkpoint_times() const {
  if (!checkpoints.empty()) return checkpoints;
  if (T == 0.0) return {0.0};
  return {0.0, 0.5 * T, T};
}

FgaOptions RunConfig::fga_options() const {
  FgaOptions o;
  o.c_g = c_g;
  o.r_c = r_c;
  o.seed_threshold = seed_threshold;
  o.integrator.dt = dt;
  o.integrator.track_a1 = track_a1;
  o.integrator.sympl_tolerance = sympl_tolerance;
  o.integrator.sigma_floor = sigma_floor;
  o.isolation.factor = gap_factor;
  return o;
}

std::vector<int> RunConfig::band_indices() const {
  std::vector<int> out;
  for (int b : bands) out.push_back(b - 1);
  return out;
}

RunConfig RunConfig::parse(std::istream& in, const std::vector<std::string>& overrides) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    fail(ErrorKind::kConfig, std::string("malformed config: ") + e.what());
  }
  for (const std::string& o : overrides) {
    const auto eq = o.find('=');
    const auto dot = o.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
      fail(ErrorKind::kConfig, "override '" + o + "' must look like section.key=value");
    }
    tree.put(trimmed(o.substr(0, eq)), trimmed(o.substr(eq + 1)));
  }
  RunConfig cfg;
  apply_tree(cfg, tree);
  cfg.validate();
  return cfg;
}

RunConfig RunConfig::parse(const std::string& text, const std::vector<std::string>& overrides) {
  std::istringstream in(text);
  return parse(in, overrides);
}

RunConfig RunConfig::load(const std::string& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kConfig, "cannot open config file " + path);
  return parse(in, overrides);
}

std::string RunConfig::serialize() const { return config_sections(*this, ""); }

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig:
    case ErrorKind::kInvalidInput:
    case ErrorKind::kResolution:
    case ErrorKind::kQuadratureRisk:
    case ErrorKind::kGridMismatch:
    case ErrorKind::kCutoff:
      return kExitConfig;
    case ErrorKind::kResource:
      return kExitResource;
    default:
      return kExitNumeric;
  }
}

std::string RunReport::serialize() const {
  std::ostringstream os;
  os << "[report]\ncommand = " << command << "\nthreads = " << threads << "\n\n";
  os << config_sections(config, "config:") << '\n';
  auto block = [&](const char* name, const std::map<std::string, double>& m) {
    os << '[' << name << "]\n";
    for (const auto& [k, v] : m) os << k << " = " << format_double(v) << '\n';
    os << '\n';
  };
  block("monitors", monitors);
  block("errors", errors);
  block("timings", timings);
  os << "[notes]\n";
  for (const auto& [k, v] : notes) os << k << " = " << v << '\n';
  return os.str();
}

RunReport RunReport::parse(const std::string& text) {
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    fail(ErrorKind::kConfig, std::string("malformed report: ") + e.what());
  }
  RunReport r;
  r.config = RunConfig();
  apply_tree(r.config, tree, "config:");
  for (const auto& [section, body] : tree) {
    if (section == "report") {
      r.command = body.get<std::string>("command", "");
      r.threads = to_int(body.get<std::string>("threads", "1"), "report.threads");
    } else if (section == "monitors" || section == "errors" || section == "timings") {
      auto& m = section == "monitors" ? r.monitors : section == "errors" ? r.errors : r.timings;
      for (const auto& [k, v] : body) m[k] = to_number(v.data(), section + "." + k);
    } else if (section == "notes") {
      for (const auto& [k, v] : body) r.notes[k] = v.data();
    } else if (section.rfind("config:", 0) != 0) {
      fail(ErrorKind::kConfig, "unknown report section " + section);
    }
  }
  return r;
}

RunReport RunReport::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kConfig, "cannot open report " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

}  // namespace fga
