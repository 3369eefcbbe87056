#include "ejko/cli.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

int main(int argc, char** argv) {
    CLI::App app{"Entropic JKO experiments on the flat torus"};
    ejko::cli::Request request;
    std::string out;
    std::string level = "warn";
    app.add_option("command", request.command, "flow | pde | compare | sinkhorn | sweep")
        ->required()
        ->check(CLI::IsMember(ejko::cli::commands()));
    app.add_option("--config", request.config_path, "key = value configuration file")->required();
    app.add_option("--set", request.overrides, "override a config entry, key=value")->take_all();
    app.add_option("--out", out, "output directory (overrides output.dir)");
    app.add_option("--log-level", level, "trace | debug | info | warn | error")
        ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error"}));
    app.set_version_flag("--version", std::string(ejko::cli::kVersion));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : ejko::cli::kExitConfig;
    }
    spdlog::set_level(spdlog::level::from_str(level));
    if (!out.empty()) request.out_dir = out;
    return ejko::cli::run(request);
}
