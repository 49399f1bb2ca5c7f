#include <doctest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "openrpf/errors.hpp"
#include "openrpf/harness.hpp"
#include "openrpf/scenarios.hpp"

using namespace openrpf;
namespace fs = std::filesystem;

namespace {

const char* const kMinimal = R"(
[base]
kind = finite-cycle
size = 1

[map.0]
family = doubling

[potential]
kind = constant-per-branch
values = 1/2

[discretization]
cells = 64
)";

std::string with(const std::string& extra) { return std::string(kMinimal) + extra; }

std::string validation_message(const std::string& text) {
  try {
    parse_config(text, "t.cfg");
  } catch (const ValidationError& e) {
    return e.what();
  }
  return "";
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::current_path() / "cli_harness_out" / name;
  fs::remove_all(p);
  return p;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(OPENRPF_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("numbers accept decimals and fractions") {
  CHECK(parse_number("0.25") == 0.25);
  CHECK(parse_number("1/4") == 0.25);
  CHECK(parse_number(" -3/2 ") == -1.5);
  CHECK(parse_number("1e-8") == 1e-8);
  for (const char* bad : {"", "1/0", "a", "1/", "2x", "1/2/3"}) CHECK_THROWS_AS(parse_number(bad), ValidationError);
}

TEST_CASE("config documents") {
  const ConfigDocument doc = ConfigDocument::parse("# top\n[b]\n y = 2 \n x=1 # trailing\n[a]\nz = 3\n", "d.cfg");
  CHECK(doc.sections() == std::vector<std::string>{"a", "b"});
  REQUIRE(doc.find("b", "y") != nullptr);
  CHECK(doc.find("b", "y")->value == "2");
  CHECK(doc.find("b", "y")->line == 3);
  CHECK(doc.find("b", "x")->value == "1");
  CHECK(doc.find("b", "w") == nullptr);
  CHECK(doc.section_line("a") == 5);
  // Canonical text ignores order, comments and spacing.
  const ConfigDocument same = ConfigDocument::parse("[a]\nz=3\n[b]\nx = 1\ny=2\n");
  CHECK(doc.canonical() == same.canonical());
  CHECK(fnv1a64(doc.canonical()) == fnv1a64(same.canonical()));
  CHECK(fnv1a64("a") != fnv1a64("b"));
}

TEST_CASE("config syntax errors name the line and field") {
  CHECK(validation_message("[base\nkind = x\n") == "t.cfg:1: section: missing ']'");
  CHECK(validation_message("key = 1\n") == "t.cfg:1: line: key outside any section");
  CHECK(validation_message("[a]\nnovalue\n") == "t.cfg:2: a: expected 'key = value'");
  CHECK(validation_message("[a]\nx=1\n[a]\n") == "t.cfg:3: a: section repeated");
  CHECK(validation_message(with("[solver]\ntolerance = 1e-9\ntolerance = 1e-8\n")).find("solver.tolerance: key repeated") !=
        std::string::npos);
  CHECK(validation_message(with("[solver]\ntolerence = 1\n")).find("solver.tolerence: unknown key") != std::string::npos);
  CHECK(validation_message(with("[bogus]\nx = 1\n")).find("bogus: unknown section") != std::string::npos);
}

TEST_CASE("config semantic errors") {
  CHECK(validation_message(with("[hole]\n0 = 0.5 0.25\n")).find("hole.0") != std::string::npos);
  CHECK(validation_message(with("[hole]\n3 = 0 0.5\n")).find("does not name a fiber") != std::string::npos);
  CHECK(validation_message(with("[outputs]\nformat = xml\n")).find("outputs.format") != std::string::npos);
  CHECK(validation_message(with("[check]\ncones = maybe\n")).find("check.cones") != std::string::npos);
  CHECK(validation_message(with("[discretization]\n")).find("section repeated") != std::string::npos);
  CHECK_THROWS_AS(load_config("/nonexistent/path.cfg"), ValidationError);
  const std::string noweight = R"(
[base]
kind = finite-cycle
size = 1
[map.0]
family = doubling
[potential]
kind = expr
expr = x - 0.25
)";
  CHECK_THROWS_AS(parse_config(noweight), ValidationError);
}

TEST_CASE("parsed configs") {
  const ExperimentConfig cfg = parse_config(with("[hole]\n0 = 0 1/4\n[solver]\ntolerance = 1e-11\n"));
  CHECK(cfg.system.base.size() == 1);
  CHECK(cfg.system.hole_at(FiberId{0}) == IntervalSet({{0.0, 0.25}}));
  CHECK(cfg.discretization.cells == 64);
  CHECK(cfg.solver.tolerance == 1e-11);
  CHECK(cfg.outputs.format == "csv");
  CHECK(cfg.check.cones);
  CHECK(cfg.hash == fnv1a64(cfg.canonical));
  CHECK(parse_config(with("")).hash != cfg.hash);
}

TEST_CASE("orbit windows accept window as the half-width") {
  const std::string base = R"(
[base]
kind = orbit-window
symbols = 2
seed = 3
%s
[map.0]
family = doubling
[map.1]
family = tripling
[potential]
kind = geometric-derivative
[discretization]
cells = 32
)";
  auto make = [&](const std::string& line) {
    std::string s = base;
    s.replace(s.find("%s"), 2, line);
    return s;
  };
  const ExperimentConfig a = parse_config(make("half_width = 5"));
  const ExperimentConfig b = parse_config(make("window = 5"));
  CHECK(a.system.base.size() == b.system.base.size());
  CHECK_THROWS_AS(parse_config(make("half_width = 5\nwindow = 5")), ValidationError);
  CHECK_THROWS_AS(parse_config(make("")), ValidationError);
}

TEST_CASE("built-in scenarios") {
  const auto& lib = scenario_library();
  CHECK(lib.size() == 7);
  for (const char* name : {"doubling_closed", "doubling_hole_half", "doubling_hole_q1", "gauss_closed", "gauss_hole",
                           "rand2_mixed", "orbit_window_random"})
    CHECK(has_scenario(name));
  CHECK_FALSE(has_scenario("nope"));
  CHECK_THROWS_AS(load_scenario("nope"), ValidationError);
  for (const auto& s : lib) {
    const ExperimentConfig cfg = load_scenario(s.name);
    CHECK(cfg.name == s.name);
    CHECK_NOTHROW(cfg.system.validate());
  }
  const ExperimentConfig r2 = load_scenario("rand2_mixed");
  CHECK(r2.system.base.size() == 2);
  CHECK(r2.system.hole_at(FiberId{0}).empty());
  CHECK(r2.system.hole_at(FiberId{1}) == IntervalSet({{2.0 / 3.0, 1.0}}));
}

TEST_CASE("subcommands") {
  CHECK(parse_subcommand("solve") == Subcommand::Solve);
  CHECK(parse_subcommand("escape") == Subcommand::Escape);
  CHECK(parse_subcommand("correlations") == Subcommand::Correlations);
  CHECK(parse_subcommand("cones") == Subcommand::Cones);
  CHECK(parse_subcommand("check") == Subcommand::Check);
  CHECK_FALSE(parse_subcommand("Solve").has_value());
}

TEST_CASE("exit codes follow the exception type") {
  std::string msg;
  auto code = [&](auto thrower) {
    try {
      thrower();
    } catch (...) {
      return exit_code_for_current_exception(msg);
    }
    return -1;
  };
  CHECK(code([] { throw ValidationError("x"); }) == exit_code::validation);
  CHECK(msg.find("validation") != std::string::npos);
  CHECK(code([] { throw WindowExceeded("x"); }) == exit_code::validation);
  CHECK(code([] { throw InvariantViolation("x"); }) == exit_code::invariant);
  CHECK(code([] { throw ConvergenceError("x", 0.5); }) == exit_code::convergence);
  CHECK(msg.find("0.5") != std::string::npos);
}

TEST_CASE("run: closed doubling solve") {
  const fs::path out = scratch("solve");
  RunOptions opt;
  opt.out_dir = out.string();
  opt.format = "json";
  opt.quiet = true;
  const ResultBundle b = run(load_scenario("doubling_closed"), Subcommand::Solve, opt);
  CHECK(b.exit_code == exit_code::success);
  const auto j = nlohmann::json::parse(b.summary_json);
  CHECK(j["scenario"] == "doubling_closed");
  CHECK(std::abs(j["solve"]["closed"]["fibers"][0]["lambda"].get<double>() - 1.0) < 1e-12);
  CHECK(fs::exists(out / "summary.json"));
  CHECK_FALSE(b.files.empty());
  for (const auto& f : b.files) CHECK(fs::exists(fs::path(f).is_absolute() ? fs::path(f) : out / f));
}

TEST_CASE("run: escape with hole [0,1/4)") {
  RunOptions opt;
  opt.out_dir = scratch("escape").string();
  opt.quiet = true;
  const ResultBundle b = run(load_scenario("doubling_hole_q1"), Subcommand::Escape, opt);
  const auto j = nlohmann::json::parse(b.summary_json);
  CHECK(std::abs(j["escape"]["fitted_rate"].get<double>() - 0.2119353555) < 1e-6);
  CHECK(j["escape"]["c_factors"][0]["c_ratio"].get<double>() == doctest::Approx(0.80901699437));
}

TEST_CASE("run: Gauss eigenvalue reports its truncation error") {
  RunOptions opt;
  opt.out_dir = scratch("gauss").string();
  opt.quiet = true;
  const ResultBundle b = run(load_scenario("gauss_closed"), Subcommand::Solve, opt);
  const auto j = nlohmann::json::parse(b.summary_json);
  const auto& f = j["solve"]["closed"]["fibers"][0];
  CHECK(f["lambda"].get<double>() <= 1.0);
  CHECK(f["lambda_error"].get<double>() == doctest::Approx(1.0 / 64.0));
}

TEST_CASE("runs are deterministic and seeds change sampled output") {
  RunOptions a;
  a.out_dir = scratch("det_a").string();
  a.quiet = true;
  RunOptions b = a;
  b.out_dir = scratch("det_b").string();
  const ExperimentConfig cfg = load_scenario("doubling_hole_q1");
  const ResultBundle ra = run(cfg, Subcommand::Cones, a);
  const ResultBundle rb = run(cfg, Subcommand::Cones, b);
  for (const auto& entry : fs::directory_iterator(*a.out_dir)) {
    const fs::path other = fs::path(*b.out_dir) / entry.path().filename();
    REQUIRE(fs::exists(other));
    if (entry.path().filename() == "summary.json" || entry.path().filename() == "timings.csv") continue;
    CHECK(read_file(entry.path()) == read_file(other));
  }
  CHECK(ra.config_hash == rb.config_hash);
}

TEST_CASE("the command-line tool maps failures to exit codes") {
  const fs::path out = scratch("tool");
  fs::create_directories(out);
  const std::string cfg = std::string(OPENRPF_CONFIG_DIR) + "/doubling_closed.cfg";
  CHECK(run_cli("solve --config " + cfg + " --out " + out.string()) == exit_code::success);
  CHECK(run_cli("solve --config " + (out / "missing.cfg").string()) == exit_code::validation);
  CHECK(run_cli("solve --config " + cfg + " --format xml") == exit_code::validation);
  CHECK(run_cli("frobnicate") == exit_code::validation);
  const fs::path bad = out / "bad.cfg";
  std::ofstream(bad) << "[base]\nkind = finite-cycle\nsize = 1\n[map.0]\nfamily = doubling\n[hole]\n0 = 0 1\n"
                        "[potential]\nkind = constant-per-branch\nvalues = 1/2\n[discretization]\ncells = 16\n";
  CHECK(run_cli("solve --config " + bad.string() + " --out " + out.string()) == exit_code::invariant);
  const fs::path slow = out / "slow.cfg";
  std::ofstream(slow) << "[base]\nkind = finite-cycle\nsize = 1\n[map.0]\nfamily = gauss 16\n"
                         "[potential]\nkind = geometric-derivative\n[discretization]\ncells = 256\n"
                         "[solver]\nmax_iterations = 2\ntolerance = 1e-15\n";
  CHECK(run_cli("solve --config " + slow.string() + " --out " + out.string()) == exit_code::convergence);
}
