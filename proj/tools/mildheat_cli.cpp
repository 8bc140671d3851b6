#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mildheat/cli_io.hpp"

namespace {

struct CommandArgs {
  std::string config_path;
  std::vector<std::string> sets;
};

int execute(const std::string& command, const CommandArgs& args) {
  using namespace mildheat;
  std::string text;
  if (!args.config_path.empty()) {
    std::ifstream in(args.config_path);
    if (!in) {
      std::cerr << "[cli_io] cannot read config file '" << args.config_path << "'\n";
      return 2;
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    text = ss.str();
  }
  ConfigOverrides overrides;
  for (const auto& s : args.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) {
      std::cerr << "[cli_io] --set expects key=value, got '" << s << "'\n";
      return 2;
    }
    overrides.emplace_back(s.substr(0, eq), s.substr(eq + 1));
  }
  overrides.emplace_back("command", command);
  RunConfig cfg;
  try {
    cfg = parse_config(text, overrides);
  } catch (const ConfigError& e) {
    std::cerr << "[cli_io] " << e.what() << '\n';
    return 2;
  } catch (const DomainError& e) {
    std::cerr << "[cli_io] " << e.what() << '\n';
    return 2;
  }
  const auto res = run(cfg);
  (res.exit_code == 0 ? std::cout : std::cerr) << res.message << '\n';
  if (!res.directory.empty()) std::cout << "output: " << res.directory.string() << '\n';
  return res.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mildheat: mild solutions of a heat equation driven by Wiener and fractional noise"};
  app.require_subcommand(1);
  std::vector<std::pair<std::string, CommandArgs>> commands;
  commands.reserve(mildheat::known_commands().size());
  for (const auto& name : mildheat::known_commands()) {
    commands.emplace_back(name, CommandArgs{});
    auto* sub = app.add_subcommand(name);
    auto& args = commands.back().second;
    sub->add_option("--config", args.config_path, "key = value configuration file");
    sub->add_option("--set", args.sets, "override as key=value (repeatable)");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  for (const auto& [name, args] : commands)
    if (app.got_subcommand(name)) return execute(name, args);
  return 2;
}
