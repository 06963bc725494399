// Command-line front end: decoh <subcommand> [--config file] [overrides]

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "decoh/config.hpp"
#include "decoh/parallel.hpp"
#include "decoh/runner.hpp"

namespace {

struct Overrides {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::size_t> n;
    std::optional<double> rho;
    std::optional<int> d;
    std::optional<std::size_t> u;
    std::optional<std::size_t> samples;
    std::optional<double> tmax;
    std::optional<double> dt;
    std::optional<std::string> input;
    unsigned threads = 0;
    bool quiet = false;
};

void add_common(CLI::App& sub, Overrides& o) {
    sub.add_option("--config", o.config_path, "key = value configuration file");
    sub.add_option("--seed", o.seed, "master seed (u64)");
    sub.add_option("--out", o.out, "output directory");
    sub.add_option("--threads", o.threads, "worker threads (default: $DECOH_THREADS or all cores)");
    sub.add_option("--n", o.n, "particle count N");
    sub.add_option("--rho", o.rho, "density rho");
    sub.add_option("--d", o.d, "dimension D");
    sub.add_option("--u", o.u, "ensemble size U");
    sub.add_option("--samples", o.samples, "random configurations (recurrence, oracle-check)");
    sub.add_option("--tmax", o.tmax, "trajectory end time (gt)");
    sub.add_option("--dt", o.dt, "time step (gt)");
    sub.add_flag("--quiet", o.quiet, "suppress progress output");
}

decoh::RunConfig load(const Overrides& o) {
    decoh::RunConfig cfg;
    if (!o.config_path.empty()) {
        std::ifstream in(o.config_path);
        if (!in) throw decoh::ValidationError("cannot open config file " + o.config_path);
        std::ostringstream text;
        text << in.rdbuf();
        cfg = decoh::parse_config(text.str());
    }
    if (o.seed) cfg.system.seed = *o.seed;
    if (o.out) cfg.out = *o.out;
    if (o.n) cfg.system.n_particles = *o.n;
    if (o.rho) cfg.system.density = *o.rho;
    if (o.d) cfg.system.dimension = *o.d;
    if (o.u) cfg.members = *o.u;
    if (o.samples) cfg.samples = *o.samples;
    if (o.tmax) cfg.sampling.t_max = *o.tmax;
    if (o.dt) cfg.sampling.dt = *o.dt;
    if (o.input) cfg.input = *o.input;
    decoh::validate(cfg);
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Closed-system decoherence toolkit: zz-coupled spin-1/2 particles"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(decoh::toolkit_version));

    Overrides o;
    for (const auto name : decoh::subcommands()) {
        auto* sub = app.add_subcommand(std::string(name));
        add_common(*sub, o);
        if (name == "fit-scaling") sub->add_option("--input", o.input, "existing sweep.csv (else run the sweep)");
    }
    app.get_subcommand("simulate")->description("Xi(t) trajectory (optionally |z_l| and S_tot) of one system");
    app.get_subcommand("ensemble")->description("U-member decay fits and time averages for one cell");
    app.get_subcommand("sweep")->description("one ensemble row per parameter cell");
    app.get_subcommand("fit-scaling")->description("fit tau_d, <Xi> and sd<Xi> laws across a sweep");
    app.get_subcommand("recurrence")->description("Poincare recurrence-time statistics");
    app.get_subcommand("oracle-check")->description("closed form vs brute-force state vector");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? decoh::exit_success : decoh::exit_usage;
    }

    const auto* chosen = app.get_subcommands().front();
    decoh::RunConfig cfg;
    try {
        cfg = load(o);
    } catch (const decoh::Error& e) {
        std::cerr << chosen->get_name() << ": " << e.what() << '\n';
        return decoh::exit_validation;
    }
    decoh::RunOptions opt;
    opt.threads = o.threads ? o.threads : decoh::default_threads();
    opt.log = o.quiet ? nullptr : &std::cerr;
    return decoh::run(chosen->get_name(), cfg, opt);
}
