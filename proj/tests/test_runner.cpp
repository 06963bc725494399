#include <gtest/gtest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "decoh/runner.hpp"

using namespace decoh;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("decoh_test_" + name);
    fs::remove_all(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::string header_of(const fs::path& p) {
    std::ifstream in(p);
    for (std::string line; std::getline(in, line);)
        if (!line.empty() && line[0] != '#') return line;
    return {};
}

RunConfig small(const std::string& name) {
    RunConfig cfg;
    cfg.system.n_particles = 6;
    cfg.system.seed = 11;
    cfg.sampling = {.dt = 0.1, .t_max = 20, .t1 = 10, .t2 = 20, .window = {}};
    cfg.members = 4;
    cfg.samples = 5;
    cfg.oracle_times = 3;
    cfg.out = scratch(name).string();
    return cfg;
}

} // namespace

TEST(Runner, SimulateWritesTrajectoryWithProvenance) {
    auto cfg = small("simulate");
    cfg.per_particle = true;
    cfg.entropy = true;
    ASSERT_EQ(run("simulate", cfg, {}), exit_success);
    const auto file = fs::path(cfg.out) / "trajectory.csv";
    EXPECT_EQ(header_of(file), "t,xi,z_1,z_2,z_3,z_4,z_5,z_6,s_tot");
    const auto text = slurp(file);
    EXPECT_NE(text.find("# decoh 0.1.0"), std::string::npos);
    EXPECT_NE(text.find("# config_hash: " + format_hex64(config_hash(cfg))), std::string::npos);
    EXPECT_NE(text.find("# master_seed: 11"), std::string::npos);
    EXPECT_EQ(read_csv(file).size(), 201u);
    EXPECT_TRUE(fs::exists(fs::path(cfg.out) / "couplings.csv"));
    EXPECT_FALSE(fs::exists(fs::path(cfg.out) / "PARTIAL"));
}

TEST(Runner, EnsembleAndSweepFiles) {
    auto cfg = small("ensemble");
    ASSERT_EQ(run("ensemble", cfg, {}), exit_success);
    EXPECT_EQ(read_csv(fs::path(cfg.out) / "ensemble_runs.csv").size(), 4u);
    EXPECT_EQ(read_csv(fs::path(cfg.out) / "ensemble_stats.csv").size(), 1u);

    cfg = small("sweep");
    cfg.n_list = {4, 6, 8};
    cfg.rho_list = {0.5, 1, 2};
    ASSERT_EQ(run("sweep", cfg, {}), exit_success);
    // Cross design: three sizes at rho = 1 plus two new densities at N = 6.
    const auto rows = read_csv(fs::path(cfg.out) / "sweep.csv");
    EXPECT_EQ(rows.size(), 5u);
    const auto back = read_sweep(fs::path(cfg.out) / "sweep.csv");
    ASSERT_EQ(back.size(), 5u);
    EXPECT_EQ(back[2].cell.n_particles, 8u);
}

TEST(Runner, FitScalingFromExistingSweep) {
    auto cfg = small("fit_sweep");
    cfg.n_list = {4, 6, 8, 10};
    cfg.rho_list = {0.5, 1, 2};
    ASSERT_EQ(run("sweep", cfg, {}), exit_success);
    auto fit_cfg = small("fit_scaling");
    fit_cfg.input = (fs::path(cfg.out) / "sweep.csv").string();
    ASSERT_EQ(run("fit-scaling", fit_cfg, {}), exit_success);
    EXPECT_EQ(read_csv(fs::path(fit_cfg.out) / "scaling_fit.csv").size(), 1u);
    EXPECT_NE(slurp(fs::path(fit_cfg.out) / "scaling_fit.txt").find("reference"), std::string::npos);
}

TEST(Runner, FailedRunLeavesPartialMarker) {
    auto cfg = small("partial");
    cfg.n_list = {4, 6};
    std::ostringstream err;
    EXPECT_EQ(run("fit-scaling", cfg, {}, err), exit_validation);
    const auto marker = fs::path(cfg.out) / "PARTIAL";
    ASSERT_TRUE(fs::exists(marker));
    EXPECT_NE(slurp(marker).find("sweep.csv"), std::string::npos);
    EXPECT_NE(err.str().find("fit-scaling"), std::string::npos);
}

TEST(Runner, RecurrenceAndOracleCheck) {
    auto cfg = small("recurrence");
    cfg.n_list = {5, 10};
    ASSERT_EQ(run("recurrence", cfg, {}), exit_success);
    EXPECT_EQ(read_csv(fs::path(cfg.out) / "recurrence.csv").size(), 2u);
    EXPECT_EQ(read_csv(fs::path(cfg.out) / "recurrence_samples.csv").size(), 10u);

    cfg = small("oracle");
    cfg.system.n_particles = 8;
    ASSERT_EQ(run("oracle-check", cfg, {}), exit_success);
    EXPECT_EQ(slurp(fs::path(cfg.out) / "oracle_check.txt").rfind("PASS", 0), 0u);
    cfg.oracle_cap = 6;
    std::ostringstream err;
    EXPECT_EQ(run("oracle-check", cfg, {}, err), exit_validation);
}

TEST(Runner, UnknownCommandIsUsageError) {
    std::ostringstream err;
    EXPECT_EQ(run("plot", small("unknown"), {}, err), exit_usage);
}

TEST(Runner, CsvBodiesIndependentOfThreads) {
    for (const char* command : {"simulate", "ensemble", "recurrence", "oracle-check"}) {
        auto one = small(std::string("threads1_") + command);
        auto four = small(std::string("threads4_") + command);
        one.entropy = four.entropy = true;
        ASSERT_EQ(run(command, one, {.threads = 1}), exit_success);
        ASSERT_EQ(run(command, four, {.threads = 4}), exit_success);
        for (const auto& entry : fs::directory_iterator(one.out)) {
            if (entry.path().extension() != ".csv") continue;
            const auto other = fs::path(four.out) / entry.path().filename();
            EXPECT_EQ(csv_body(slurp(entry.path())), csv_body(slurp(other))) << command << ' ' << entry.path();
            EXPECT_FALSE(csv_body(slurp(other)).empty());
        }
    }
}

namespace {

int shell(const std::string& cmd) {
    const int status = std::system((cmd + " >/dev/null 2>&1").c_str());
    return WEXITSTATUS(status);
}

} // namespace

TEST(Cli, ExitCodes) {
    const std::string cli = DECOH_CLI_PATH;
    const auto dir = scratch("cli");
    EXPECT_EQ(shell(cli + " simulate --n 4 --quiet --out " + dir.string()), 0);
    EXPECT_TRUE(fs::exists(dir / "trajectory.csv"));
    EXPECT_EQ(shell(cli + " simulate --no-such-flag"), 1);
    EXPECT_EQ(shell(cli), 1);
    EXPECT_EQ(shell(cli + " simulate --d 7 --out " + dir.string()), 2);
    EXPECT_EQ(shell(cli + " simulate --config /nonexistent/file.conf"), 2);
    fs::create_directories(dir);
    std::ofstream(dir / "bad.conf") << "t1 = 90\nt2 = 80\n";
    EXPECT_EQ(shell(cli + " simulate --config " + (dir / "bad.conf").string()), 2);
    EXPECT_EQ(shell(cli + " oracle-check --n 8 --samples 2 --quiet --out " + dir.string()), 0);
}

TEST(Cli, ThreadCountDoesNotChangeOutput) {
    const std::string cli = DECOH_CLI_PATH;
    const auto a = scratch("cli_t1"), b = scratch("cli_t3");
    const std::string args = " ensemble --n 7 --u 5 --seed 5 --quiet";
    ASSERT_EQ(shell(cli + args + " --threads 1 --out " + a.string()), 0);
    ASSERT_EQ(shell(cli + args + " --threads 3 --out " + b.string()), 0);
    EXPECT_EQ(csv_body(slurp(a / "ensemble_runs.csv")), csv_body(slurp(b / "ensemble_runs.csv")));
    EXPECT_EQ(csv_body(slurp(a / "ensemble_stats.csv")), csv_body(slurp(b / "ensemble_stats.csv")));
}
