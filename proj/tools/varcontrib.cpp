#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "varcontrib/varcontrib.hpp"

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw varcontrib::ValidationError("cannot read config file " + path);
    std::ostringstream text;
    text << in.rdbuf();
    return text.str();
}

struct Overrides {
    std::optional<std::size_t> runs;
    std::optional<std::size_t> scenarios;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> output;
};

varcontrib::RunConfig load(const std::string& path, const Overrides& overrides = {}) {
    varcontrib::RunConfig config = varcontrib::parse_config(read_file(path));
    if (overrides.runs) config.runs = *overrides.runs;
    if (overrides.scenarios) config.scenarios = *overrides.scenarios;
    if (overrides.seed) config.seed = *overrides.seed;
    if (overrides.output) config.output = *overrides.output;
    const varcontrib::ValidationReport report = varcontrib::validate_run(config);
    if (!report.empty()) {
        std::string message = "invalid overrides:";
        for (const auto& line : report) message += "\n  " + line;
        throw varcontrib::ValidationError(message);
    }
    return config;
}

int cmd_validate(const std::string& path) {
    const varcontrib::RunConfig config = load(path);
    const varcontrib::Portfolio portfolio = config.portfolio();
    std::cout << "ok: " << portfolio.size() << " assets, " << portfolio.factor_count() << " factors, loading "
              << config.loading << "\n";
    return 0;
}

int cmd_run(const std::string& path, const Overrides& overrides, bool quiet) {
    const varcontrib::RunConfig config = load(path, overrides);
    const varcontrib::Portfolio portfolio = config.portfolio();
    const varcontrib::ExperimentReport report =
        varcontrib::run_experiment(portfolio, config.settings(), config.runs, config.seed);
    const auto files = varcontrib::write_report(report, config, config.output);
    if (!quiet) {
        for (const auto& f : files) std::cout << config.output << '/' << f << '\n';
    }
    return 0;
}

int cmd_tables(const std::string& path) {
    const varcontrib::RunConfig config = load(path);
    varcontrib::write_analytic_tables(config.portfolio(), config.alpha, std::cout);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Kernel estimation of VaR contributions for credit portfolios"};
    app.require_subcommand(1);

    std::string validate_path;
    auto* validate = app.add_subcommand("validate", "Parse and validate a config");
    validate->add_option("config", validate_path, "Config file")->required();

    std::string run_path;
    Overrides overrides;
    bool quiet = false;
    auto* run = app.add_subcommand("run", "Run the simulation study and write the report tables");
    run->add_option("config", run_path, "Config file")->required();
    run->add_option("--runs", overrides.runs, "Override the number of runs");
    run->add_option("--scenarios", overrides.scenarios, "Override scenarios per run");
    run->add_option("--seed", overrides.seed, "Override the master seed");
    run->add_option("-o,--output", overrides.output, "Override the output directory");
    run->add_flag("-q,--quiet", quiet, "Do not list the files written");

    std::string tables_path;
    auto* tables = app.add_subcommand("tables", "Print stand-alone VaRs and analytic loss characteristics");
    tables->add_option("config", tables_path, "Config file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*validate) return cmd_validate(validate_path);
        if (*run) return cmd_run(run_path, overrides, quiet);
        if (*tables) return cmd_tables(tables_path);
    } catch (const varcontrib::ParseError& e) {
        std::cerr << "parse error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const varcontrib::ValidationError& e) {
        std::cerr << "validation error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return 0;
}
