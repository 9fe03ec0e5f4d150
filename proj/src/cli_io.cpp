#include "surfns/cli_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string_view>

namespace surfns {

bool SolverConfig::operator==(const SolverConfig& o) const {
  const auto& a = options;
  const auto& b = o.options;
  return method == o.method && certificate_tol == o.certificate_tol &&
         quadrature_degree == o.quadrature_degree && a.tol == b.tol &&
         a.preconditioner == b.preconditioner && a.restart == b.restart &&
         a.max_iter == b.max_iter && a.experimental_rho_zero == b.experimental_rho_zero &&
         a.direct_size_cap == b.direct_size_cap && a.rank_check_cap == b.rank_check_cap;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

// ---------------------------------------------------------------------------
// Value codecs. A codec returns an error message, empty on success.

using Setter = std::function<std::string(RunConfig&, const std::string&)>;
using Getter = std::function<std::string(const RunConfig&)>;

struct Key {
  const char* section;
  const char* name;
  Setter set;
  Getter get;
};

std::optional<double> to_double(std::string_view s) {
  double v = 0.0;
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::optional<int> to_int(std::string_view s) {
  int v = 0;
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::vector<std::string> words(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',' || c == ' ' || c == '\t') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

Key real(const char* section, const char* name, std::function<double&(RunConfig&)> ref) {
  return {section, name,
          [ref](RunConfig& c, const std::string& v) -> std::string {
            const auto d = to_double(v);
            if (!d || !std::isfinite(*d)) return "expected a finite number, got '" + v + "'";
            ref(c) = *d;
            return {};
          },
          [ref](const RunConfig& c) { return format_double(ref(const_cast<RunConfig&>(c))); }};
}

Key integer(const char* section, const char* name, std::function<int&(RunConfig&)> ref) {
  return {section, name,
          [ref](RunConfig& c, const std::string& v) -> std::string {
            const auto i = to_int(v);
            if (!i) return "expected an integer, got '" + v + "'";
            ref(c) = *i;
            return {};
          },
          [ref](const RunConfig& c) { return std::to_string(ref(const_cast<RunConfig&>(c))); }};
}

Key boolean(const char* section, const char* name, std::function<bool&(RunConfig&)> ref) {
  return {section, name,
          [ref](RunConfig& c, const std::string& v) -> std::string {
            if (v == "true") ref(c) = true;
            else if (v == "false") ref(c) = false;
            else return "expected true or false, got '" + v + "'";
            return {};
          },
          [ref](const RunConfig& c) {
            return std::string(ref(const_cast<RunConfig&>(c)) ? "true" : "false");
          }};
}

template <class E>
Key choice(const char* section, const char* name, std::function<E&(RunConfig&)> ref,
           std::vector<std::pair<const char*, E>> names) {
  return {section, name,
          [ref, names](RunConfig& c, const std::string& v) -> std::string {
            std::string allowed;
            for (const auto& [n, e] : names) {
              if (v == n) {
                ref(c) = e;
                return {};
              }
              allowed += (allowed.empty() ? "" : ", ") + std::string(n);
            }
            return "expected one of " + allowed + ", got '" + v + "'";
          },
          [ref, names](const RunConfig& c) {
            const E e = ref(const_cast<RunConfig&>(c));
            for (const auto& [n, x] : names)
              if (x == e) return std::string(n);
            return std::string("?");
          }};
}

Key vec3(const char* section, const char* name, std::function<Vec3&(RunConfig&)> ref) {
  return {section, name,
          [ref](RunConfig& c, const std::string& v) -> std::string {
            if (v == "zero") {
              ref(c) = Vec3::Zero();
              return {};
            }
            const auto w = words(v);
            Vec3 out;
            if (w.size() != 3) return "expected 'zero' or three numbers, got '" + v + "'";
            for (int i = 0; i < 3; ++i) {
              const auto d = to_double(w[i]);
              if (!d || !std::isfinite(*d)) return "expected a finite number, got '" + w[i] + "'";
              out[i] = *d;
            }
            ref(c) = out;
            return {};
          },
          [ref](const RunConfig& c) {
            const Vec3& v = ref(const_cast<RunConfig&>(c));
            if (v.isZero(0.0)) return std::string("zero");
            return format_double(v.x()) + " " + format_double(v.y()) + " " + format_double(v.z());
          }};
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

Key text(const char* section, const char* name, std::function<std::string&(RunConfig&)> ref) {
  return {section, name,
          [ref](RunConfig& c, const std::string& v) -> std::string {
            ref(c) = v;
            return {};
          },
          [ref](const RunConfig& c) { return quote(ref(const_cast<RunConfig&>(c))); }};
}

Key formats() {
  return {"output", "formats",
          [](RunConfig& c, const std::string& v) -> std::string {
            auto& o = c.output;
            o.csv = o.vtk = o.state = false;
            const auto w = words(v);
            if (w.empty()) return "expected a list of csv, vtk, state or 'none'";
            for (const auto& f : w) {
              if (f == "csv") o.csv = true;
              else if (f == "vtk") o.vtk = true;
              else if (f == "state") o.state = true;
              else if (f == "none" && w.size() == 1) {}
              else return "unknown format '" + f + "' (csv, vtk, state or none)";
            }
            return {};
          },
          [](const RunConfig& c) {
            std::string s;
            auto add = [&](bool on, const char* n) {
              if (on) s += (s.empty() ? "" : ", ") + std::string(n);
            };
            add(c.output.csv, "csv");
            add(c.output.vtk, "vtk");
            add(c.output.state, "state");
            return s.empty() ? std::string("none") : s;
          }};
}

const std::vector<Key>& keys() {
  static const std::vector<Key> table = [] {
    std::vector<Key> k;
    k.push_back(choice<MeshKind>("mesh", "kind", [](RunConfig& c) -> MeshKind& { return c.mesh.kind; },
                                 {{"sphere", MeshKind::sphere},
                                  {"torus", MeshKind::torus},
                                  {"capsule", MeshKind::capsule}}));
    k.push_back(integer("mesh", "level", [](RunConfig& c) -> int& { return c.mesh.level; }));
    k.push_back(real("mesh", "radius", [](RunConfig& c) -> double& { return c.mesh.radius; }));
    k.push_back(real("mesh", "major_radius", [](RunConfig& c) -> double& { return c.mesh.major_radius; }));
    k.push_back(real("mesh", "minor_radius", [](RunConfig& c) -> double& { return c.mesh.minor_radius; }));
    k.push_back(real("mesh", "half_length", [](RunConfig& c) -> double& { return c.mesh.half_length; }));

    k.push_back(real("physics", "rho", [](RunConfig& c) -> double& { return c.physics.rho; }));
    k.push_back(real("physics", "mu", [](RunConfig& c) -> double& { return c.physics.mu; }));
    k.push_back(real("physics", "alpha", [](RunConfig& c) -> double& { return c.physics.alpha; }));
    k.push_back(integer("physics", "theta", [](RunConfig& c) -> int& { return c.physics.theta; }));
    k.push_back(vec3("physics", "gravity", [](RunConfig& c) -> Vec3& { return c.physics.gravity; }));

    k.push_back(real("time", "tau", [](RunConfig& c) -> double& { return c.time.tau; }));
    k.push_back(real("time", "final_time", [](RunConfig& c) -> double& { return c.time.final_time; }));

    k.push_back(choice<InitialVelocity>(
        "initial", "velocity", [](RunConfig& c) -> InitialVelocity& { return c.initial.velocity; },
        {{"zero", InitialVelocity::zero},
         {"constant", InitialVelocity::constant},
         {"killing_z", InitialVelocity::killing_z},
         {"radial", InitialVelocity::radial},
         {"step_x", InitialVelocity::step_x}}));
    k.push_back(vec3("initial", "value", [](RunConfig& c) -> Vec3& { return c.initial.value; }));
    k.push_back(real("initial", "scale", [](RunConfig& c) -> double& { return c.initial.scale; }));

    k.push_back(choice<SolveMethod>("solver", "method",
                                    [](RunConfig& c) -> SolveMethod& { return c.solver.method; },
                                    {{"schur", SolveMethod::schur_krylov},
                                     {"direct", SolveMethod::full_direct}}));
    k.push_back(real("solver", "tol", [](RunConfig& c) -> double& { return c.solver.options.tol; }));
    k.push_back(integer("solver", "restart", [](RunConfig& c) -> int& { return c.solver.options.restart; }));
    k.push_back(integer("solver", "max_iter", [](RunConfig& c) -> int& { return c.solver.options.max_iter; }));
    k.push_back(choice<PreconditionerKind>(
        "solver", "preconditioner",
        [](RunConfig& c) -> PreconditionerKind& { return c.solver.options.preconditioner; },
        {{"alpha_zero", PreconditionerKind::alpha_zero},
         {"lumped_bending", PreconditionerKind::lumped_bending}}));
    k.push_back(boolean("solver", "experimental_rho_zero",
                        [](RunConfig& c) -> bool& { return c.solver.options.experimental_rho_zero; }));
    k.push_back(integer("solver", "direct_size_cap",
                        [](RunConfig& c) -> int& { return c.solver.options.direct_size_cap; }));
    k.push_back(integer("solver", "rank_check_cap",
                        [](RunConfig& c) -> int& { return c.solver.options.rank_check_cap; }));
    k.push_back(real("solver", "certificate_tol", [](RunConfig& c) -> double& { return c.solver.certificate_tol; }));
    k.push_back(integer("solver", "quadrature_degree",
                        [](RunConfig& c) -> int& { return c.solver.quadrature_degree; }));

    k.push_back(boolean("manufactured", "enabled", [](RunConfig& c) -> bool& { return c.manufactured.enabled; }));
    k.push_back(text("manufactured", "profile", [](RunConfig& c) -> std::string& { return c.manufactured.profile; }));

    k.push_back(text("output", "directory", [](RunConfig& c) -> std::string& { return c.output.directory; }));
    k.push_back(integer("output", "stride", [](RunConfig& c) -> int& { return c.output.stride; }));
    k.push_back(formats());
    return k;
  }();
  return table;
}

const Key* find_key(const std::string& section, const std::string& name) {
  for (const auto& k : keys())
    if (section == k.section && name == k.name) return &k;
  return nullptr;
}

bool known_section(const std::string& s) {
  for (const auto& k : keys())
    if (s == k.section) return true;
  return false;
}

[[noreturn]] void parse_error(int line, std::size_t col, const std::string& what) {
  fail(ErrorKind::parse,
       "line " + std::to_string(line) + ", column " + std::to_string(col + 1) + ": " + what);
}

bool is_key_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
}

// Value text after '=': a quoted string or bare text up to a comment.
std::string read_value(const std::string& line, std::size_t pos, int lineno) {
  while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t')) ++pos;
  if (pos >= line.size() || line[pos] == '#' || line[pos] == ';')
    parse_error(lineno, pos, "missing value");
  std::string value;
  if (line[pos] == '"') {
    const std::size_t open = pos++;
    bool closed = false;
    for (; pos < line.size(); ++pos) {
      char c = line[pos];
      if (c == '\\' && pos + 1 < line.size()) {
        value += line[++pos];
      } else if (c == '"') {
        closed = true;
        ++pos;
        break;
      } else {
        value += c;
      }
    }
    if (!closed) parse_error(lineno, open, "unterminated string");
    while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t')) ++pos;
    if (pos < line.size() && line[pos] != '#' && line[pos] != ';')
      parse_error(lineno, pos, "unexpected text after string");
    return value;
  }
  std::size_t end = pos;
  while (end < line.size() && line[end] != '#' && line[end] != ';') ++end;
  value = line.substr(pos, end - pos);
  while (!value.empty() && (value.back() == ' ' || value.back() == '\t' || value.back() == '\r'))
    value.pop_back();
  return value;
}

[[noreturn]] void invalid(const std::string& key, const std::string& what) {
  fail(ErrorKind::validation, key + ": " + what);
}

}  // namespace

RunConfig parse_config(const std::string& input) {
  RunConfig config;
  std::istringstream in(input);
  std::string line, section;
  std::set<std::string> seen_keys, seen_sections;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::size_t pos = 0;
    while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t')) ++pos;
    if (pos == line.size() || line[pos] == '#' || line[pos] == ';') continue;

    if (line[pos] == '[') {
      const std::size_t close = line.find(']', pos);
      if (close == std::string::npos) parse_error(lineno, pos, "missing ']' in section header");
      section = line.substr(pos + 1, close - pos - 1);
      if (section.empty() || !std::all_of(section.begin(), section.end(), is_key_char))
        parse_error(lineno, pos + 1, "invalid section name '" + section + "'");
      std::size_t rest = close + 1;
      while (rest < line.size() && (line[rest] == ' ' || line[rest] == '\t')) ++rest;
      if (rest < line.size() && line[rest] != '#' && line[rest] != ';')
        parse_error(lineno, rest, "unexpected text after section header");
      if (!known_section(section))
        fail(ErrorKind::validation,
             "unknown section [" + section + "] (line " + std::to_string(lineno) + ")");
      if (!seen_sections.insert(section).second)
        fail(ErrorKind::validation,
             "duplicate section [" + section + "] (line " + std::to_string(lineno) + ")");
      continue;
    }

    const std::size_t key_start = pos;
    while (pos < line.size() && is_key_char(line[pos])) ++pos;
    if (pos == key_start) parse_error(lineno, pos, "expected a key or a section header");
    const std::string name = line.substr(key_start, pos - key_start);
    while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t')) ++pos;
    if (pos >= line.size() || line[pos] != '=') parse_error(lineno, pos, "expected '=' after key");
    if (section.empty()) parse_error(lineno, key_start, "key '" + name + "' outside any section");
    const std::size_t value_col = pos + 1;
    const std::string value = read_value(line, value_col, lineno);

    const std::string full = section + "." + name;
    const Key* key = find_key(section, name);
    if (!key)
      fail(ErrorKind::validation, "unknown key '" + full + "' (line " + std::to_string(lineno) + ")");
    if (!seen_keys.insert(full).second)
      fail(ErrorKind::validation, "duplicate key '" + full + "' (line " + std::to_string(lineno) + ")");
    std::size_t vcol = value_col;
    while (vcol < line.size() && (line[vcol] == ' ' || line[vcol] == '\t')) ++vcol;
    if (const std::string err = key->set(config, value); !err.empty())
      parse_error(lineno, vcol, full + ": " + err);
  }
  config.validate();
  return config;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::io, "cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const RunConfig& config) {
  std::string out;
  std::string section;
  for (const auto& k : keys()) {
    if (section != k.section) {
      if (!section.empty()) out += "\n";
      section = k.section;
      out += "[" + section + "]\n";
    }
    out += std::string(k.name) + " = " + k.get(config) + "\n";
  }
  return out;
}

void RunConfig::validate() const {
  if (mesh.level < 0 || mesh.level > 8) invalid("mesh.level", "must lie in [0, 8]");
  if (!(mesh.radius > 0.0)) invalid("mesh.radius", "must be positive");
  if (mesh.kind == MeshKind::torus) {
    if (!(mesh.minor_radius > 0.0)) invalid("mesh.minor_radius", "must be positive");
    if (!(mesh.major_radius > mesh.minor_radius))
      invalid("mesh.major_radius", "must exceed mesh.minor_radius");
  }
  if (mesh.kind == MeshKind::capsule && !(mesh.half_length > 0.0))
    invalid("mesh.half_length", "must be positive");

  if (!(physics.rho >= 0.0)) invalid("physics.rho", "must be non-negative");
  if (!(physics.mu >= 0.0)) invalid("physics.mu", "must be non-negative");
  if (!(physics.alpha >= 0.0)) invalid("physics.alpha", "must be non-negative");
  if (physics.theta != 0 && physics.theta != 1) invalid("physics.theta", "must be 0 or 1");
  if (physics.rho == 0.0 &&
      !(solver.method == SolveMethod::full_direct && solver.options.experimental_rho_zero))
    invalid("physics.rho",
            "rho = 0 needs solver.method = direct and solver.experimental_rho_zero = true");

  if (!(time.tau > 0.0)) invalid("time.tau", "must be positive");
  if (!(time.final_time > 0.0)) invalid("time.final_time", "must be positive");
  {
    SchemeParams p;
    p.tau = time.tau;
    p.final_time = time.final_time;
    try {
      (void)step_count(p);
    } catch (const Error&) {
      invalid("time.final_time", "must be an integer multiple of time.tau");
    }
  }

  if (!(initial.scale == initial.scale)) invalid("initial.scale", "must be a number");

  if (!(solver.options.tol > 0.0 && solver.options.tol < 1.0))
    invalid("solver.tol", "must lie in (0, 1)");
  if (solver.options.restart < 1) invalid("solver.restart", "must be at least 1");
  if (solver.options.max_iter < 1) invalid("solver.max_iter", "must be at least 1");
  if (solver.options.direct_size_cap < 1) invalid("solver.direct_size_cap", "must be at least 1");
  if (solver.options.rank_check_cap < 0) invalid("solver.rank_check_cap", "must be non-negative");
  if (!(solver.certificate_tol > 0.0)) invalid("solver.certificate_tol", "must be positive");
  if (solver.quadrature_degree < 4 || solver.quadrature_degree > kMaxQuadratureDegree)
    invalid("solver.quadrature_degree",
            "must lie in [4, " + std::to_string(kMaxQuadratureDegree) + "]");

  if (manufactured.enabled) {
    if (mesh.kind != MeshKind::sphere) invalid("manufactured.enabled", "needs mesh.kind = sphere");
    RadialProfile profile;
    try {
      profile = RadialProfile::parse(manufactured.profile);
      profile.validate(time.final_time);
    } catch (const Error& e) {
      invalid("manufactured.profile", e.what());
    }
    if (std::abs(profile.r(0.0) - mesh.radius) > 1e-12 * mesh.radius)
      invalid("mesh.radius", "must equal r(0) = " + format_double(profile.r(0.0)) +
                                 " of the manufactured profile");
    if (initial.velocity != InitialVelocity::zero)
      invalid("initial.velocity", "must be zero in manufactured mode (u0 = r'(0) nu is implied)");
  }

  if (output.stride < 1) invalid("output.stride", "must be at least 1");
  if (output.directory.empty()) invalid("output.directory", "must not be empty");
}

SurfaceMesh build_mesh(const MeshConfig& m) {
  switch (m.kind) {
    case MeshKind::sphere: return build_sphere(m.level, m.radius);
    case MeshKind::torus: return build_torus(m.level, m.major_radius, m.minor_radius);
    case MeshKind::capsule: return build_capsule(m.level, m.half_length, m.radius);
  }
  fail(ErrorKind::argument, "unknown mesh kind");
}

SchemeParams scheme_params(const RunConfig& c) {
  SchemeParams p;
  if (c.manufactured.enabled) {
    p = manufactured_params(RadialProfile::parse(c.manufactured.profile), c.time.final_time,
                            c.time.tau, c.physics.rho, c.physics.mu, c.physics.alpha,
                            c.physics.theta);
  } else {
    p.rho = c.physics.rho;
    p.mu = c.physics.mu;
    p.alpha = c.physics.alpha;
    p.theta = c.physics.theta;
    p.tau = c.time.tau;
    p.final_time = c.time.final_time;
  }
  if (!c.physics.gravity.isZero(0.0)) {
    const Vec3 g = c.physics.gravity;
    p.forcing = [g](const Vec3&, double) { return g; };
  }
  return p;
}

StepperOptions stepper_options(const RunConfig& c) {
  StepperOptions o;
  o.method = c.solver.method;
  o.solver = c.solver.options;
  o.certificate_tol = c.solver.certificate_tol;
  o.quadrature_degree = c.solver.quadrature_degree;
  return o;
}

std::function<Vec3(const Vec3&)> initial_velocity(const RunConfig& c) {
  if (c.manufactured.enabled) {
    const double dr0 = RadialProfile::parse(c.manufactured.profile).dr(0.0);
    return [dr0](const Vec3& z) { return Vec3(dr0 * z.normalized()); };
  }
  const double s = c.initial.scale;
  switch (c.initial.velocity) {
    case InitialVelocity::zero: return [](const Vec3&) { return Vec3::Zero().eval(); };
    case InitialVelocity::constant: {
      const Vec3 v = c.initial.value;
      return [v](const Vec3&) { return v; };
    }
    case InitialVelocity::killing_z:
      return [s](const Vec3& z) { return Vec3(s * Vec3::UnitZ().cross(z)); };
    case InitialVelocity::radial:
      return [s](const Vec3& z) { return Vec3(s * z.normalized()); };
    case InitialVelocity::step_x: {
      const Vec3 v = c.initial.value;
      return [v](const Vec3& z) { return z.x() >= 0.0 ? v : Vec3::Zero().eval(); };
    }
  }
  fail(ErrorKind::argument, "unknown initial velocity");
}

// ---------------------------------------------------------------------------
// VTK

namespace {

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void vectors(std::ostream& out, const char* name, const NodeField& f, int n) {
  out << "VECTORS " << name << " double\n";
  for (int k = 0; k < n; ++k)
    out << g17(f.coeffs[3 * k]) << ' ' << g17(f.coeffs[3 * k + 1]) << ' '
        << g17(f.coeffs[3 * k + 2]) << '\n';
}

}  // namespace

void write_vtk(const SimulationState& s, std::ostream& out) {
  const SurfaceMesh& mesh = s.mesh;
  require_attached(s.U, mesh, "U");
  require_attached(s.P, mesh, "P");
  require_attached(s.kappa, mesh, "kappa");
  require_attached(s.F, mesh, "F");
  const int n = mesh.num_nodes();
  const int nv = mesh.num_vertices();

  // Pressure is P1 on the corners; midnodes take the mean of their edge.
  std::vector<double> p(n, 0.0);
  std::vector<int> averaged(n, 0);
  for (int k = 0; k < nv; ++k) p[k] = s.P.coeffs[k];
  for (const auto& t : mesh.triangles()) {
    for (int i = 0; i < 3; ++i) {
      const int m = t[3 + i];
      p[m] = 0.5 * (s.P.coeffs[t[(i + 1) % 3]] + s.P.coeffs[t[(i + 2) % 3]]);
      averaged[m] = 1;
    }
  }

  out << "# vtk DataFile Version 3.0\n";
  out << "surfns step=" << s.step << " t=" << g17(s.time())
      << " pressure_midnodes=edge_averaged\n";
  out << "ASCII\nDATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << n << " double\n";
  for (const auto& x : mesh.nodes()) out << g17(x.x()) << ' ' << g17(x.y()) << ' ' << g17(x.z()) << '\n';
  const int j = mesh.num_triangles();
  out << "CELLS " << j << ' ' << 7 * j << '\n';
  // VTK_QUADRATIC_TRIANGLE wants the midnodes of edges (0,1), (1,2), (2,0).
  for (const auto& t : mesh.triangles())
    out << "6 " << t[0] << ' ' << t[1] << ' ' << t[2] << ' ' << t[5] << ' ' << t[3] << ' ' << t[4]
        << '\n';
  out << "CELL_TYPES " << j << '\n';
  for (int c = 0; c < j; ++c) out << "22\n";

  out << "POINT_DATA " << n << '\n';
  vectors(out, "U", s.U, n);
  out << "SCALARS P double 1\nLOOKUP_TABLE default\n";
  for (double v : p) out << g17(v) << '\n';
  out << "SCALARS P_averaged int 1\nLOOKUP_TABLE default\n";
  for (int a : averaged) out << a << '\n';
  vectors(out, "kappa", s.kappa, n);
  vectors(out, "F", s.F, n);
}

void write_vtk(const SimulationState& state, const std::filesystem::path& path) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorKind::io, "cannot write " + path.string());
  write_vtk(state, out);
  require(static_cast<bool>(out), ErrorKind::io, "write failed: " + path.string());
}

// ---------------------------------------------------------------------------
// Diagnostics CSV

void write_diagnostics_csv(const std::vector<Diagnostics>& history, std::ostream& out) {
  require(!history.empty(), ErrorKind::argument, "diagnostics history is empty");
  out << kDiagnosticsHeader << '\n';
  for (const auto& d : history) {
    out << d.step << ',' << format_double(d.t) << ',' << format_double(d.area) << ','
        << format_double(d.volume) << ',' << format_double(d.kinetic) << ','
        << format_double(d.bending) << ',' << format_double(d.total) << ','
        << format_double(d.div_residual) << ',' << d.solver_iters << ','
        << format_double(d.solver_seconds) << '\n';
  }
}

void write_diagnostics_csv(const std::vector<Diagnostics>& history,
                           const std::filesystem::path& path) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorKind::io, "cannot write " + path.string());
  write_diagnostics_csv(history, out);
  require(static_cast<bool>(out), ErrorKind::io, "write failed: " + path.string());
}

// ---------------------------------------------------------------------------
// JSON state

namespace {

using nlohmann::json;

json field_json(const NodeField& f) {
  return json{{"space", to_string(f.space)},
              {"coeffs", std::vector<double>(f.coeffs.data(), f.coeffs.data() + f.coeffs.size())}};
}

NodeField field_from(const json& j, const SurfaceMesh& mesh, SpaceTag expected, const char* name) {
  NodeField f;
  f.space = expected;
  require(j.at("space").get<std::string>() == to_string(expected), ErrorKind::parse,
          std::string("state field ") + name + " has the wrong space");
  const auto c = j.at("coeffs").get<std::vector<double>>();
  f.coeffs = Eigen::Map<const Vector>(c.data(), static_cast<Eigen::Index>(c.size()));
  require(f.matches(mesh), ErrorKind::parse,
          std::string("state field ") + name + " does not match the mesh");
  return f;
}

}  // namespace

std::string state_to_json(const SimulationState& s) {
  json j;
  j["format"] = "surfns-state";
  j["version"] = 1;
  j["step"] = s.step;
  j["tau"] = s.tau;
  j["level"] = s.mesh.level();
  j["num_vertices"] = s.mesh.num_vertices();
  j["num_nodes"] = s.mesh.num_nodes();
  json tris = json::array();
  for (const auto& t : s.mesh.triangles()) tris.push_back(t);
  j["triangles"] = std::move(tris);
  json nodes = json::array();
  for (const auto& x : s.mesh.nodes()) nodes.push_back({x.x(), x.y(), x.z()});
  j["nodes"] = std::move(nodes);
  j["U"] = field_json(s.U);
  j["P"] = field_json(s.P);
  j["kappa"] = field_json(s.kappa);
  j["F"] = field_json(s.F);
  json hist = json::array();
  for (const auto& d : s.history)
    hist.push_back({{"step", d.step},
                    {"t", d.t},
                    {"area", d.area},
                    {"volume", d.volume},
                    {"kinetic", d.kinetic},
                    {"bending", d.bending},
                    {"total", d.total},
                    {"div_residual", d.div_residual},
                    {"solver_iters", d.solver_iters},
                    {"solver_seconds", d.solver_seconds},
                    {"certificate", d.certificate}});
  j["history"] = std::move(hist);
  return j.dump();
}

SimulationState state_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    require(j.at("format") == "surfns-state" && j.at("version") == 1, ErrorKind::parse,
            "not a surfns state (format/version)");
    auto conn = std::make_shared<Connectivity>();
    conn->num_vertices = j.at("num_vertices").get<int>();
    conn->num_nodes = j.at("num_nodes").get<int>();
    conn->triangles = j.at("triangles").get<std::vector<std::array<int, 6>>>();
    for (const auto& t : conn->triangles)
      for (int i = 0; i < 6; ++i)
        require(t[i] >= 0 && t[i] < conn->num_nodes && (i >= 3 || t[i] < conn->num_vertices),
                ErrorKind::parse, "state triangle index out of range");
    std::vector<Vec3> nodes;
    for (const auto& x : j.at("nodes")) nodes.emplace_back(x.at(0), x.at(1), x.at(2));
    require(static_cast<int>(nodes.size()) == conn->num_nodes, ErrorKind::parse,
            "state node count does not match num_nodes");
    SimulationState s{.step = j.at("step").get<long>(),
                      .tau = j.at("tau").get<double>(),
                      .mesh = SurfaceMesh(std::move(conn), std::move(nodes), j.at("level").get<int>()),
                      .U = {},
                      .P = {},
                      .kappa = {},
                      .F = {},
                      .history = {}};
    s.U = field_from(j.at("U"), s.mesh, SpaceTag::p2_vector3, "U");
    s.P = field_from(j.at("P"), s.mesh, SpaceTag::p1_scalar, "P");
    s.kappa = field_from(j.at("kappa"), s.mesh, SpaceTag::p2_vector3, "kappa");
    s.F = field_from(j.at("F"), s.mesh, SpaceTag::p2_vector3, "F");
    for (const auto& h : j.at("history")) {
      Diagnostics d;
      d.step = h.at("step");
      d.t = h.at("t");
      d.area = h.at("area");
      d.volume = h.at("volume");
      d.kinetic = h.at("kinetic");
      d.bending = h.at("bending");
      d.total = h.at("total");
      d.div_residual = h.at("div_residual");
      d.solver_iters = h.at("solver_iters");
      d.solver_seconds = h.at("solver_seconds");
      d.certificate = h.at("certificate");
      s.history.push_back(d);
    }
    return s;
  } catch (const json::exception& e) {
    fail(ErrorKind::parse, std::string("invalid state JSON: ") + e.what());
  }
}

void save_state(const SimulationState& state, const std::filesystem::path& path) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorKind::io, "cannot write " + path.string());
  out << state_to_json(state) << '\n';
  require(static_cast<bool>(out), ErrorKind::io, "write failed: " + path.string());
}

SimulationState load_state(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::io, "cannot open state " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return state_from_json(ss.str());
}

// ---------------------------------------------------------------------------
// Driver

RunSummary run_simulation(const RunConfig& config, const std::filesystem::path& resume,
                          const TimeStepper::StepCallback& on_step) {
  config.validate();
  const SchemeParams params = scheme_params(config);
  TimeStepper stepper(params, stepper_options(config));
  const long total = step_count(params);

  SimulationState state = [&] {
    if (resume.empty()) return stepper.initialize(build_mesh(config.mesh), initial_velocity(config));
    SimulationState s = load_state(resume);
    require(s.tau == params.tau, ErrorKind::validation,
            "time.tau: differs from the resumed state's tau " + format_double(s.tau));
    require(s.step <= total, ErrorKind::validation,
            "time.final_time: the resumed state is already past it");
    return s;
  }();

  const std::filesystem::path dir(config.output.directory);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  require(!ec, ErrorKind::io, "cannot create " + dir.string() + ": " + ec.message());

  RunSummary summary;
  auto snapshot = [&](const SimulationState& s) {
    char name[48];
    std::snprintf(name, sizeof name, "snapshot_%06ld.vtk", s.step);
    write_vtk(s, dir / name);
    ++summary.snapshots;
  };
  auto finish = [&] {
    if (config.output.csv) write_diagnostics_csv(state.history, dir / "diagnostics.csv");
    if (config.output.state) save_state(state, dir / "state.json");
  };

  const long first = state.step;
  if (config.output.vtk && first == 0) snapshot(state);
  try {
    stepper.run(state, [&](const SimulationState& s) {
      if (s.step > first && config.output.vtk &&
          (s.step % config.output.stride == 0 || s.step == total))
        snapshot(s);
      if (on_step) on_step(s);
    });
  } catch (const Error&) {
    finish();  // keep what was computed
    throw;
  }
  finish();
  summary.steps = state.step;
  summary.final_time = state.time();
  if (!state.history.empty()) summary.last = state.history.back();
  return summary;
}

}  // namespace surfns
