// Runs the command-line tool as a subprocess.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "surfns/cli_io.hpp"

#include <sys/wait.h>

#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

using namespace surfns;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out, err;
};

struct TempDir {
  fs::path path;
  TempDir() {
    std::random_device rd;
    path = fs::temp_directory_path() / ("surfns_cli_" + std::to_string(rd()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Result cli(const std::string& args) {
  static TempDir scratch;
  const fs::path out = scratch.path / "stdout";
  const fs::path err = scratch.path / "stderr";
  const std::string cmd = std::string("'") + SURFNS_CLI + "' " + args + " > '" + out.string() +
                          "' 2> '" + err.string() + "'";
  const int status = std::system(cmd.c_str());
  Result r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

fs::path write_file(const fs::path& dir, const std::string& name, const std::string& text) {
  const fs::path p = dir / name;
  std::ofstream(p) << text;
  return p;
}

}  // namespace

TEST_CASE("verify passes on a fresh checkout") {
  const Result r = cli("verify");
  CHECK(r.code == 0);
  const auto out = lines(r.out);
  CHECK(out.size() >= 5);
  for (const auto& l : out) CHECK_MESSAGE(l.rfind("PASS ", 0) == 0, l);
}

TEST_CASE("usage errors exit with 2") {
  for (const char* args : {"", "bogus", "run", "verify --nope", "converge --levels x",
                           "converge --levels 2,1", "converge --levels 3"}) {
    const Result r = cli(args);
    CHECK_MESSAGE(r.code == 2, args);
    CHECK_MESSAGE(r.err.rfind("ERROR:", 0) == 0, r.err);
  }
  CHECK(cli("--help").code == 0);
  CHECK(cli("--version").code == 0);
}

TEST_CASE("config errors") {
  TempDir tmp;
  Result r = cli("run '" + write_file(tmp.path, "bad.ini", "[time]\ntau = 1e-3\ntau 2\n").string() + "'");
  CHECK(r.code == 2);
  CHECK(r.err.rfind("ERROR: parse: line 3, column 5", 0) == 0);

  r = cli("run '" + write_file(tmp.path, "invalid.ini", "[physics]\ntheta = 5\n").string() + "'");
  CHECK(r.code == 2);
  CHECK(r.err.rfind("ERROR: validation: physics.theta", 0) == 0);

  r = cli("run '" + (tmp.path / "missing.ini").string() + "'");
  CHECK(r.code == 1);
  CHECK(r.err.rfind("ERROR: io:", 0) == 0);
}

TEST_CASE("config prints the canonical form") {
  const Result r = cli("config");
  CHECK(r.code == 0);
  CHECK(parse_config(r.out) == RunConfig{});
  const Result k = cli(std::string("config '") + SURFNS_CONFIGS + "/killing_sphere.ini'");
  CHECK(k.code == 0);
  const RunConfig c = parse_config(k.out);
  CHECK(c.initial.velocity == InitialVelocity::killing_z);
  CHECK(c.time.final_time == 0.5);
}

TEST_CASE("shipped configs parse") {
  for (const auto& entry : fs::directory_iterator(SURFNS_CONFIGS)) {
    if (entry.path().extension() != ".ini") continue;
    CHECK_NOTHROW(load_config(entry.path()));
  }
}

TEST_CASE("run with the translating-sphere config translates exactly") {
  TempDir tmp;
  const Result r = cli(std::string("run -q '") + SURFNS_CONFIGS + "/translating_sphere.ini' -o '" +
                       tmp.path.string() + "'");
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(r.out.rfind("steps=100 ", 0) == 0);
  const RunConfig c = load_config(fs::path(SURFNS_CONFIGS) / "translating_sphere.ini");
  const SurfaceMesh start = build_mesh(c.mesh);
  const SimulationState end = load_state(tmp.path / "state.json");
  const Vec3 shift = c.time.final_time * c.initial.value;
  double dev = 0.0;
  for (int k = 0; k < start.num_nodes(); ++k)
    dev = std::max(dev, (end.mesh.node(k) - start.node(k) - shift).norm());
  CHECK(dev <= 1e-9);
  CHECK(lines(slurp(tmp.path / "diagnostics.csv")).size() == 102);
  CHECK(fs::exists(tmp.path / "snapshot_000100.vtk"));
}

TEST_CASE("run resumes from a state file") {
  TempDir tmp;
  const std::string base =
      "[mesh]\nlevel = 0\n[initial]\nvelocity = killing_z\n[output]\nformats = state\n";
  const fs::path half = write_file(tmp.path, "half.ini",
                                   base + "[time]\ntau = 0.01\nfinal_time = 0.02\n");
  const fs::path full = write_file(tmp.path, "full.ini",
                                   base + "[time]\ntau = 0.01\nfinal_time = 0.04\n");
  REQUIRE(cli("run -q '" + half.string() + "' -o '" + (tmp.path / "h").string() + "'").code == 0);
  REQUIRE(cli("run -q '" + full.string() + "' -o '" + (tmp.path / "r").string() + "' --resume '" +
              (tmp.path / "h" / "state.json").string() + "'")
              .code == 0);
  REQUIRE(cli("run -q '" + full.string() + "' -o '" + (tmp.path / "f").string() + "'").code == 0);
  const SimulationState a = load_state(tmp.path / "f" / "state.json");
  const SimulationState b = load_state(tmp.path / "r" / "state.json");
  CHECK(a.step == 4);
  CHECK(b.step == 4);
  CHECK(a.mesh.nodes() == b.mesh.nodes());
  CHECK(a.U.coeffs == b.U.coeffs);
}

TEST_CASE("numerical failure exits with 1") {
  TempDir tmp;
  const fs::path cfg = write_file(tmp.path, "fail.ini",
                                  "[mesh]\nlevel = 1\n[time]\ntau = 0.01\nfinal_time = 0.02\n"
                                  "[initial]\nvelocity = killing_z\n"
                                  "[solver]\nrestart = 1\nmax_iter = 1\n[output]\nformats = none\n");
  const Result r = cli("run -q '" + cfg.string() + "' -o '" + (tmp.path / "o").string() + "'");
  CHECK(r.code == 1);
  CHECK(r.err.rfind("ERROR: iterative_failure:", 0) == 0);
}

TEST_CASE("converge prints one CSV row per level") {
  TempDir tmp;
  const Result r = cli("converge --levels 0,1,2 --T 0.05 --tau-power 4");
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto rows = lines(r.out);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].rfind("level,J,h0,tau,err_surface,eoc_surface,", 0) == 0);
  CHECK(rows[1].rfind("0,8,", 0) == 0);
  CHECK(rows[2].rfind("1,32,", 0) == 0);
  CHECK(rows[3].rfind("2,128,", 0) == 0);
  for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i].ends_with(",\"ok\""));

  const fs::path csv = tmp.path / "table.csv";
  CHECK(cli("converge --levels 0,1 --T 0.05 --tau-power 4 --out '" + csv.string() + "'").code == 0);
  CHECK(lines(slurp(csv)).size() == 3);
}
