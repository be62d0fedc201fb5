#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "varcontrib/config.hpp"
#include "varcontrib/report.hpp"

using namespace varcontrib;
namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

std::string bundled_text() { return read_file(fs::path(VARCONTRIB_DATA_DIR) / "benchmark.cfg"); }

int run_cli(const std::string& args) {
    const std::string command = std::string(VARCONTRIB_CLI) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(command.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

class TempDir {
public:
    TempDir() {
        path_ = fs::temp_directory_path() /
                ("varcontrib_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter_++));
        fs::create_directories(path_);
    }
    ~TempDir() { fs::remove_all(path_); }
    const fs::path& path() const { return path_; }

private:
    fs::path path_;
    static inline int counter_ = 0;
};

// The bundled config shrunk to a quick run.
std::string small_config(std::size_t runs) {
    RunConfig c = parse_config(bundled_text());
    c.runs = runs;
    c.scenarios = 5000;
    return format_config(c);
}

}  // namespace

TEST(ParseConfig, BundledConfigIsTheBenchmark) {
    const RunConfig c = parse_config(bundled_text());
    const Portfolio expected = benchmark_portfolio();
    EXPECT_EQ(c.alpha, 0.999);
    EXPECT_EQ(c.runs, 25u);
    EXPECT_EQ(c.scenarios, 50000u);
    EXPECT_EQ(c.seed, 20080101u);
    EXPECT_EQ(c.multipliers, (std::vector<double>{1.0, 0.5, 2.0}));
    EXPECT_EQ(c.loading, 0.18);
    EXPECT_TRUE(c.correlation == benchmark_correlation());
    ASSERT_EQ(c.assets.size(), expected.size());
    for (std::size_t i = 0; i < c.assets.size(); ++i) EXPECT_EQ(c.assets[i], expected.asset(i)) << "asset " << i + 1;
}

TEST(ParseConfig, FormatRoundTrips) {
    RunConfig c = parse_config(bundled_text());
    c.multipliers = {0.1 + 0.2, 1.0 / 3.0};
    c.loading = 0.1 * 3.0;
    c.standard = false;
    c.bandwidth_mode = BandwidthMode::analytic;
    c.output = "some/dir";
    const RunConfig back = parse_config(format_config(c));
    EXPECT_TRUE(back == c);
    EXPECT_EQ(format_config(back), format_config(c));
}

TEST(ParseConfig, MissingCorrelationRowNamesTheLine) {
    const std::string text =
        "[run]\nalpha = 0.999\n[factors]\ncount = 2\nloading = 0.18\n[correlation]\n1 0.5\n"
        "[assets]\n1 1 0.02 25 0.5 0.125\n";
    try {
        parse_config(text);
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 8u);
    }
}

TEST(ParseConfig, MissingCorrelationRowAtEndOfFile) {
    const std::string text = "[factors]\ncount = 2\n[assets]\n1 1 0.02 25 0.5 0.125\n[correlation]\n1 0.5\n";
    try {
        parse_config(text);
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 7u);
    }
}

TEST(ParseConfig, InvalidValuesAreValidationErrors) {
    std::string text = bundled_text();
    text.replace(text.find("alpha = 0.999"), 13, "alpha = 1.5");
    EXPECT_THROW(parse_config(text), ValidationError);

    std::string bad_asset = bundled_text();
    bad_asset.replace(bad_asset.find("1 1 0.02 25 0.5 0.125"), 21, "1 1 1.50 25 0.5 0.125");
    try {
        parse_config(bad_asset);
        FAIL() << "expected ValidationError";
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("invalid configuration"), std::string::npos);
    }
}

TEST(ParseConfig, StructuralErrors) {
    EXPECT_THROW(parse_config("alpha = 0.9\n"), ParseError);
    EXPECT_THROW(parse_config("[run]\nalpha 0.9\n"), ParseError);
    EXPECT_THROW(parse_config("[nonsense]\n"), ParseError);
    EXPECT_THROW(parse_config("[run]\nalpha = abc\n"), ParseError);
}

TEST(Cli, ValidateExitCodes) {
    TempDir dir;
    const fs::path good = dir.path() / "good.cfg";
    const fs::path bad = dir.path() / "bad.cfg";
    std::ofstream(good) << bundled_text();
    std::string text = bundled_text();
    text.replace(text.find("alpha = 0.999"), 13, "alpha = 1.5");
    std::ofstream(bad) << text;
    EXPECT_EQ(run_cli("validate " + good.string()), 0);
    EXPECT_EQ(run_cli("validate " + bad.string()), 1);
    EXPECT_EQ(run_cli("validate " + (dir.path() / "missing.cfg").string()), 1);
    EXPECT_EQ(run_cli("tables " + good.string()), 0);
}

TEST(Cli, RunWritesReproducibleReport) {
    TempDir dir;
    const fs::path cfg = dir.path() / "small.cfg";
    std::ofstream(cfg) << small_config(2);
    const fs::path out_a = dir.path() / "a";
    const fs::path out_b = dir.path() / "b";
    ASSERT_EQ(run_cli("run " + cfg.string() + " -q -o " + out_a.string()), 0);
    ASSERT_EQ(run_cli("run " + cfg.string() + " -q -o " + out_b.string()), 0);

    std::size_t tables = 0;
    for (const auto& entry : fs::directory_iterator(out_a)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("table", 0) == 0) ++tables;
        if (name != kManifestFile && name != kConfigFile) {
            EXPECT_EQ(read_file(entry.path()), read_file(out_b / name)) << name;
        }
    }
    EXPECT_EQ(tables, 11u);
    EXPECT_TRUE(fs::exists(out_a / kFigureFile));

    const auto manifest = nlohmann::json::parse(read_file(out_a / kManifestFile));
    EXPECT_EQ(manifest["runs"], 2);
    EXPECT_EQ(manifest["files"].size(), 13u);
    EXPECT_EQ(manifest["version"], kVersion);

    const std::string t02 = read_file(out_a / "table02_portfolio_var.csv");
    EXPECT_EQ(t02.substr(0, t02.find('\n')), "statistic,first_run,mean_of_runs,coef_of_variation");
}

TEST(Cli, SingleRunLeavesCoefficientEmpty) {
    TempDir dir;
    const fs::path cfg = dir.path() / "one.cfg";
    std::ofstream(cfg) << small_config(1);
    ASSERT_EQ(run_cli("run " + cfg.string() + " -q -o " + (dir.path() / "out").string()), 0);
    std::istringstream rows(read_file(dir.path() / "out" / "table02_portfolio_var.csv"));
    std::string line;
    std::getline(rows, line);
    while (std::getline(rows, line)) EXPECT_EQ(line.back(), ',') << line;
}

TEST(Cli, RejectsUnknownOption) {
    EXPECT_NE(run_cli("run --definitely-not-an-option"), 0);
}
