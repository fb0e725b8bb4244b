#include <catch_amalgamated.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "nhq/cli/config.hpp"
#include "nhq/cli/runner.hpp"
#include "nhq/cli/table.hpp"

using namespace nhq;
using namespace nhq::cli;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;
namespace fs = std::filesystem;

namespace {

const char* kTwoLevel = R"(# minimal
[model]
name = twolevel
Gamma = 1

[run]
command = evolve-lindblad
t_start = 0
t_end = 5
n_points = 101
initial = e

[output]
observables = [rho_ee, rho_gg]
)";

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

fs::path scratch() {
  auto dir = fs::temp_directory_path() / ("nhq_test_cli_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  return dir;
}

struct Outcome {
  int status;
  std::string err;
};

Outcome run_cli(const std::string& args) {
  const auto errfile = scratch() / "stderr.txt";
  const std::string cmd = std::string(NHQ_CLI_PATH) + " " + args + " 2> " + errfile.string();
  const int raw = std::system(cmd.c_str());
  return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, slurp(errfile)};
}

double real_cell(const ResultTable& t, std::size_t row, const std::string& col) {
  for (std::size_t c = 0; c < t.column_count(); ++c)
    if (t.columns()[c] == col) return std::get<double>(t.cell(row, c));
  FAIL("missing column " << col);
  return 0.0;
}

std::string text_cell(const ResultTable& t, std::size_t row, const std::string& col) {
  for (std::size_t c = 0; c < t.column_count(); ++c)
    if (t.columns()[c] == col) return std::get<std::string>(t.cell(row, c));
  FAIL("missing column " << col);
  return {};
}

}  // namespace

TEST_CASE("parse_config accepts the documented grammar", "[cli]") {
  auto cfg = parse_config(kTwoLevel);
  CHECK(cfg.model == "twolevel");
  CHECK(cfg.model_params.at("Gamma").text == "1");
  CHECK(cfg.command == "evolve-lindblad");
  REQUIRE(cfg.grid);
  CHECK(cfg.grid->n_points == 101);
  auto pts = cfg.grid->points();
  CHECK(pts.front() == 0.0);
  CHECK(pts.back() == 5.0);
  CHECK(cfg.observables == std::vector<std::string>{"rho_ee", "rho_gg"});

  auto sweep = parse_config(
      "[model]\nname = gainloss\ng = 1\ngamma = 0\n[run]\ncommand = sweep\nparam = gamma\n"
      "lo = 0\nhi = 2\nn_points = 201\n");
  REQUIRE(sweep.sweep);
  CHECK(sweep.sweep->param == "gamma");
  CHECK(sweep.sweep->lo == 0.0);
  CHECK(sweep.sweep->hi == 2.0);
  CHECK(sweep.sweep->n_points == 201);

  auto nonrec = parse_config(
      "[model]\nname = nonreciprocal2\ng1 = [1, 0.5]\ng2 = \"-2\"  # quoted\n[run]\ncommand = spectrum\n");
  auto m = build_model(nonrec.model, nonrec.model_params);
  CHECK(m.op(0, 1) == cplx(1, 0.5));
  CHECK(m.op(1, 0) == cplx(-2, 0));
}

TEST_CASE("parse_config diagnostics", "[cli]") {
  auto message = [](const std::string& text) -> std::string {
    try {
      parse_config(text);
    } catch (const Error& e) {
      return e.name() + ": " + e.what();
    }
    return "accepted";
  };
  const std::string typo = message("[model]\nname = twolevel\nGamma = 1\ngamma_typo = 2\n[run]\ncommand = spectrum\n");
  CHECK_THAT(typo, ContainsSubstring("ValidationError"));
  CHECK_THAT(typo, ContainsSubstring("model.gamma_typo"));
  CHECK_THAT(typo, ContainsSubstring("line 4"));

  CHECK_THAT(message("[run]\ncommand = spectrum\nt_end 5\n"), ContainsSubstring("ParseError"));
  CHECK_THAT(message("name = x\n"), ContainsSubstring("ParseError"));
  CHECK_THAT(message("[model]\nname = gainloss\ng = [1, 2\n"), ContainsSubstring("ParseError"));
  CHECK_THAT(message("[model]\nname = twolevel\nGamma = 1\nGamma = 2\n"), ContainsSubstring("ParseError"));
  CHECK_THAT(message("[models]\n"), ContainsSubstring("ValidationError"));
  CHECK_THAT(message("[model]\nname = dimer\n[run]\ncommand = spectrum\n"), ContainsSubstring("unknown model"));
  CHECK_THAT(message("[model]\nname = twolevel\nGamma = 1\n[run]\ncommand = spectrum\nt_end = 3\n"),
             ContainsSubstring("run.t_end"));
  CHECK_THAT(message("[model]\nname = twolevel\nGamma = one\n[run]\ncommand = spectrum\n"),
             ContainsSubstring("model.Gamma"));
  CHECK_THAT(message("[model]\nname = twolevel\nGamma = 1\n[run]\ncommand = evolve-lindblad\nt_end = 1\nn_points = 1\n"),
             ContainsSubstring("run.n_points"));
  CHECK_THAT(message("[model]\nname = gainloss\ng = 1\ngamma = 1\n[run]\ncommand = evolve-lindblad\nt_end = 1\nn_points = 3\n"),
             ContainsSubstring("jump operators"));
  CHECK_THAT(message("[model]\nname = twolevel\nGamma = 1\n[run]\ncommand = evolve-nh\nt_end = 1\nn_points = 3\n"
                     "[output]\nobservables = [rho_xx]\n"),
             ContainsSubstring("rho_xx"));
  CHECK_THAT(message("[model]\nname = twolevel\nGamma = -1\n[run]\ncommand = spectrum\n"),
             ContainsSubstring("InvalidArgument"));
  CHECK_THAT(message("[model]\nname = gainloss\ng = 1\ngamma = 1\n[run]\ncommand = sweep\nparam = delta\nlo = 0\nhi = 1\nn_points = 5\n"),
             ContainsSubstring("run.param"));
  CHECK_THROWS_AS(parse_config(kTwoLevel, "spectrum"), ValidationError);
}

TEST_CASE("run dispatches to the library", "[cli]") {
  SECTION("spectrum of the unbroken dimer") {
    auto t = run(parse_config("[model]\nname = gainloss\ng = 1\ngamma = 0.5\n[run]\ncommand = spectrum\n"));
    REQUIRE(t.row_count() == 2);
    CHECK_THAT(real_cell(t, 0, "eigenvalue.re"), WithinAbs(-std::sqrt(0.75), 1e-12));
    CHECK_THAT(real_cell(t, 1, "eigenvalue.re"), WithinAbs(std::sqrt(0.75), 1e-12));
    CHECK_THAT(real_cell(t, 0, "eigenvalue.im"), WithinAbs(0.0, 1e-12));
    CHECK(text_cell(t, 0, "phase") == "unbroken");
  }
  SECTION("two-level decay time series") {
    auto t = run(parse_config(kTwoLevel));
    REQUIRE(t.row_count() == 101);
    CHECK(t.columns() == std::vector<std::string>{"t", "rho_ee", "rho_gg"});
    CHECK_THAT(real_cell(t, 0, "rho_ee"), WithinAbs(1.0, 1e-15));
    CHECK_THAT(real_cell(t, 100, "rho_gg"), WithinAbs(1 - std::exp(-5.0), 1e-12));
  }
  SECTION("phase sweep crosses from unbroken to broken at gamma = g") {
    auto t = run(parse_config(
        "[model]\nname = gainloss\ng = 1\ngamma = 0\n[run]\ncommand = sweep\nparam = gamma\n"
        "lo = 0\nhi = 2\nn_points = 201\n"));
    REQUIRE(t.row_count() == 201);
    for (std::size_t r = 0; r < 201; ++r) {
      const double gamma = real_cell(t, r, "gamma");
      const std::string phase = text_cell(t, r, "phase");
      if (gamma < 0.99) CHECK(phase == "unbroken");
      if (gamma > 1.01) CHECK(phase == "broken");
    }
  }
  SECTION("locate-ep on the passive dimer") {
    auto t = run(parse_config(slurp(fs::path(NHQ_EXAMPLES_DIR) / "passivept_locate_ep.cfg")));
    CHECK_THAT(real_cell(t, 0, "gamma2"), WithinAbs(2.0, 1e-6));
  }
  SECTION("complex observables split into re and im columns") {
    auto t = run(parse_config(slurp(fs::path(NHQ_EXAMPLES_DIR) / "gainloss_meanfield.cfg")));
    CHECK(t.columns() == std::vector<std::string>{"t", "alpha_0.re", "alpha_0.im", "alpha_1.re", "alpha_1.im", "norm_sq"});
  }
  SECTION("crossvalidate reports per-mode error") {
    auto t = run(parse_config(slurp(fs::path(NHQ_EXAMPLES_DIR) / "lossdimer_crossvalidate.cfg")));
    bool found = false;
    for (const auto& [key, value] : t.provenance) {
      if (key != "max_abs_error.alpha_0") continue;
      found = true;
      CHECK(std::stod(value) <= 1e-4);
    }
    CHECK(found);
  }
}

TEST_CASE("emit and parse_csv", "[cli]") {
  ResultTable t;
  t.note("config_digest", "fnv1a64:0123456789abcdef");
  t.add_real("x", {0.1, 1.0 / 3.0});
  t.add_real("y", {-2.5e-300, std::nextafter(1.0, 2.0)});
  const std::string csv = to_csv(t);
  CHECK(csv.find('\r') == std::string::npos);
  CHECK(csv.rfind("# config_digest: fnv1a64:0123456789abcdef\nx,y\n", 0) == 0);
  auto back = parse_csv(csv);
  REQUIRE(back.row_count() == 2);
  for (std::size_t r = 0; r < 2; ++r)
    for (std::size_t c = 0; c < 2; ++c) CHECK(std::get<double>(back.cell(r, c)) == std::get<double>(t.cell(r, c)));
  CHECK(back.provenance == t.provenance);

  ResultTable z;
  z.add_complex("alpha", {cplx(1, -2)});
  CHECK(z.columns() == std::vector<std::string>{"alpha.re", "alpha.im"});
  CHECK_THROWS_AS(z.add_real("short", {}), ShapeMismatch);

  auto j = nlohmann::json::parse(to_json(t));
  CHECK(j["columns"] == nlohmann::json::array({"x", "y"}));
  CHECK(j["rows"][1][0].get<double>() == 1.0 / 3.0);
  CHECK(j["provenance"]["config_digest"] == "fnv1a64:0123456789abcdef");

  CHECK_THROWS_AS(emit(t, "csv", "/nonexistent-dir/out.csv"), IoError);
}

TEST_CASE("config digest", "[cli]") {
  auto a = parse_config(kTwoLevel), b = parse_config(kTwoLevel);
  CHECK(config_digest(a) == config_digest(b));
  auto spaced = parse_config(std::string("\n\n") + kTwoLevel + "# trailing comment\n");
  CHECK(config_digest(a) == config_digest(spaced));
  auto other = parse_config(kTwoLevel, "", 7);
  CHECK(config_digest(a) != config_digest(other));
}

TEST_CASE("command-line tool", "[cli][process]") {
  const fs::path dir = scratch();
  const fs::path examples(NHQ_EXAMPLES_DIR);

  SECTION("every example config reruns byte-identically") {
    for (const auto& entry : fs::directory_iterator(examples)) {
      if (entry.path().extension() != ".cfg") continue;
      std::string command;
      std::istringstream in(slurp(entry.path()));
      for (std::string line; std::getline(in, line);)
        if (line.rfind("command = ", 0) == 0) command = line.substr(10);
      REQUIRE_FALSE(command.empty());
      for (const std::string fmt : {"csv", "json"}) {
        const auto a = dir / ("a." + fmt), b = dir / ("b." + fmt);
        const std::string base = command + " --config " + entry.path().string() + " --format " + fmt + " --out ";
        INFO(entry.path().filename().string() << " " << fmt);
        auto ra = run_cli(base + a.string());
        auto rb = run_cli(base + b.string());
        CHECK(ra.status == 0);
        CHECK(rb.status == 0);
        CHECK(ra.err.empty());
        CHECK(slurp(a) == slurp(b));
        CHECK_FALSE(slurp(a).empty());
      }
    }
  }
  SECTION("trajectory output does not depend on the thread count") {
    const auto cfg = (examples / "twolevel_trajectories.cfg").string();
    CHECK(run_cli("trajectories --config " + cfg + " --threads 1 --out " + (dir / "t1.csv").string()).status == 0);
    CHECK(run_cli("trajectories --config " + cfg + " --threads 3 --out " + (dir / "t3.csv").string()).status == 0);
    CHECK(slurp(dir / "t1.csv") == slurp(dir / "t3.csv"));
    CHECK(run_cli("trajectories --config " + cfg + " --seed 43 --out " + (dir / "t43.csv").string()).status == 0);
    CHECK(slurp(dir / "t1.csv") != slurp(dir / "t43.csv"));
    CHECK_THAT(slurp(dir / "t43.csv"), ContainsSubstring("# seed: 43\n"));
  }
  SECTION("exit codes") {
    const auto bad = dir / "typo.cfg";
    std::ofstream(bad) << "[model]\nname = twolevel\nGamma = 1\ngamma_typo = 3\n[run]\ncommand = spectrum\n";
    auto r1 = run_cli("spectrum --config " + bad.string());
    CHECK(r1.status == 1);
    CHECK_THAT(r1.err, ContainsSubstring("ValidationError"));
    CHECK_THAT(r1.err, ContainsSubstring("model.gamma_typo"));

    const auto leaky = dir / "leaky.cfg";
    std::ofstream(leaky) << "[model]\nname = gainloss\ng = 1\ngamma_gain = 0\ngamma_loss = 0.2\n"
                            "[run]\nt_end = 1\nn_points = 3\ncutoff = 2\nalpha_0 = 2\n";
    auto r2 = run_cli("crossvalidate --config " + leaky.string() + " --out " + (dir / "x.csv").string());
    CHECK(r2.status == 2);
    CHECK_THAT(r2.err, ContainsSubstring("TruncationDominates"));

    const auto grow = dir / "grow.cfg";
    std::ofstream(grow) << "[model]\nname = gainloss\ng = 0\ngamma = 10\n"
                           "[run]\nt_end = 100\nn_points = 2\ninitial = 0\n";
    auto r3 = run_cli("evolve-nh --config " + grow.string() + " --out " + (dir / "g.csv").string());
    CHECK(r3.status == 2);
    CHECK_THAT(r3.err, ContainsSubstring("Overflow"));

    CHECK(run_cli("spectrum --config " + (dir / "missing.cfg").string()).status == 2);
    CHECK(run_cli("spectrum").status == 1);
    CHECK(run_cli("--config " + bad.string()).status == 1);
    CHECK(run_cli("spectrum --config " + (examples / "gainloss_spectrum.cfg").string() + " --out /nonexistent-dir/x.csv").status == 2);
  }
  fs::remove_all(dir);
}
