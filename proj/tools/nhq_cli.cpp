// nhq: run a config file through one of the library commands.
//
//   nhq spectrum --config gainloss.cfg --out spectrum.csv
//
// Exit status: 0 success, 1 configuration error, 2 runtime failure.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "nhq/cli/config.hpp"
#include "nhq/cli/runner.hpp"
#include "nhq/cli/table.hpp"

namespace {

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw nhq::IoError("cannot read config '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::string infer_format(const std::string& flag, const std::string& from_config, const std::string& path) {
  if (!flag.empty()) return flag;
  if (!from_config.empty()) return from_config;
  if (path.size() >= 5 && path.substr(path.size() - 5) == ".json") return "json";
  return "csv";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Non-Hermitian and open quantum system toolkit"};
  app.set_version_flag("--version", std::string(NHQ_VERSION));
  app.require_subcommand(1);

  std::string config_path, out_path, format;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  app.add_option("--config", config_path, "Run configuration file")->required();
  app.add_option("--out", out_path, "Output file (default: output.path, else stdout)");
  app.add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  auto* seed_opt = app.add_option("--seed", seed, "Override run.seed");
  app.add_option("--threads", threads, "Worker threads for trajectory ensembles")->check(CLI::Range(1u, 256u));

  for (const auto& name : nhq::cli::command_names())
    app.add_subcommand(name)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    const auto cfg = nhq::cli::parse_config(
        read_file(config_path), command,
        seed_opt->count() ? std::optional<std::uint64_t>(seed) : std::nullopt);
    const std::string path = !out_path.empty() ? out_path : cfg.output_path;
    const auto table = nhq::cli::run(cfg, threads);
    nhq::cli::emit(table, infer_format(format, cfg.format, path), path);
  } catch (const nhq::IoError& e) {
    std::cerr << "nhq: " << e.name() << ": " << e.what() << "\n";
    return 2;
  } catch (const nhq::Error& e) {
    std::cerr << "nhq: " << e.name() << ": " << e.what() << "\n";
    return nhq::cli::exit_code(e);
  } catch (const std::exception& e) {
    std::cerr << "nhq: internal error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
