#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <omp.h>

#include <CLI11.hpp>

#include "infolimit/harness.hpp"

namespace {

using namespace infolimit;

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitConfig = 2;
constexpr int kExitUnstable = 3;

struct CommonFlags {
    std::size_t grid = 0;
    std::size_t horizon = 0;
    std::string out;
    bool emit_spectra = false;
    bool literal_di = false;
    int threads = 0;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--grid", f.grid, "frequency grid size (overrides the config)")->check(CLI::Range(16, 1 << 24));
    cmd->add_option("--horizon", f.horizon, "horizon n (overrides the config)")->check(CLI::PositiveNumber);
    cmd->add_option("--out", f.out, "output directory (beats INFOLIMIT_OUT_DIR and the config)");
    cmd->add_flag("--emit-spectra", f.emit_spectra, "also write S_Y, S_W and sensitivity spectra as CSV");
    cmd->add_option("--threads", f.threads, "OpenMP worker count (0: runtime default)")->check(CLI::NonNegativeNumber);
}

// --out, then INFOLIMIT_OUT_DIR, then the config value.
std::filesystem::path output_dir(const CommonFlags& f, const std::filesystem::path& configured) {
    if (!f.out.empty()) return f.out;
    if (const char* env = std::getenv("INFOLIMIT_OUT_DIR"); env && *env) return env;
    return configured;
}

void apply_common(Scenario& s, const CommonFlags& f) {
    if (f.grid) s.loop.grid_size = f.grid;
    if (f.horizon) s.loop.horizon = f.horizon;
    if (f.emit_spectra) s.emit_spectra = true;
    if (f.literal_di) s.literal_directed = true;
    s.output_dir = output_dir(f, s.output_dir);
}

std::string sanitize(std::string s) {
    for (char& c : s)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-') c = '_';
    return s;
}

std::vector<double> parse_values(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != item.size()) throw ConfigError("--values", "'" + item + "' is not a number");
        out.push_back(v);
    }
    return out;
}

void print_report(const Report& r) {
    std::printf("%-24s lhs_rate=%.9f rhs=%.9f slack=%+.3e %s\n", r.name.c_str(), r.lhs_rate, r.rhs, r.slack,
                to_string(r.verdict).c_str());
}

int run_command(const std::string& config, const CommonFlags& flags) {
    std::vector<Scenario> scenarios = load_config(config);
    std::vector<Verdict> verdicts;
    bool unstable = false;
    for (Scenario& s : scenarios) {
        apply_common(s, flags);
        try {
            const Report r = run_scenario(s);
            write_report(s, r);
            print_report(r);
            verdicts.push_back(r.verdict);
        } catch (const StabilityError& e) {
            std::fprintf(stderr, "%s: stability error: %s\n", s.name.c_str(), e.what());
            unstable = true;
        }
    }
    return unstable ? kExitUnstable : verdict_exit_code(verdicts);
}

int sweep_command(const std::string& config, const std::string& param, const std::vector<double>& values,
                  const CommonFlags& flags) {
    std::vector<Scenario> scenarios = load_config(config);
    std::vector<Verdict> verdicts;
    for (Scenario& s : scenarios) {
        apply_common(s, flags);
        const std::vector<SweepRow> rows = sweep(s, param, values);
        std::ostringstream os;
        write_sweep_csv(os, param, rows);
        write_file_atomic(s.output_dir / (s.name + "_sweep_" + sanitize(param) + ".csv"), os.str());
        for (const SweepRow& row : rows) {
            std::printf("%s=%-12g ", param.c_str(), row.value);
            print_report(row.report);
            verdicts.push_back(row.report.verdict);
        }
    }
    return verdict_exit_code(verdicts);
}

int suite_command(const SuiteOptions& options, const CommonFlags& flags) {
    const SuiteResult result = random_suite(options);
    const std::filesystem::path dir = output_dir(flags, "out");
    std::ostringstream csv;
    write_suite_csv(csv, result);
    write_file_atomic(dir / "suite.csv", csv.str());
    write_file_atomic(dir / "suite_summary.json", suite_summary_json(result));
    std::printf("evaluated=%zu skipped=%zu violations=%zu min_slack=%.3e max_chain=%.3e max_di=%.3e\n",
                result.evaluated, result.skipped, result.violations,
                result.min_slack ? *result.min_slack : 0.0, result.max_chain_residual,
                result.max_directed_residual);
    std::vector<Verdict> verdicts;
    for (const SuiteRow& r : result.rows)
        if (!r.skipped) verdicts.push_back(r.verdict);
    return verdict_exit_code(verdicts);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Information-rate limits of feedback loops with additive channel noise"};
    app.require_subcommand(1);

    CommonFlags flags;
    std::string config;

    CLI::App* run = app.add_subcommand("run", "run every scenario of a TOML config");
    run->add_option("config", config, "scenario config (TOML)")->required()->check(CLI::ExistingFile);
    add_common(run, flags);
    run->add_flag("--literal-di", flags.literal_di,
                  "also report directed information conditioned on the whole Z^n at the proof horizon");

    SuiteOptions suite_opts;
    suite_opts.horizon = 1000;
    CLI::App* suite = app.add_subcommand("suite", "randomized stable-loop inequality suite");
    suite->add_option("--count", suite_opts.count, "number of random loops");
    suite->add_option("--seed", suite_opts.seed, "suite seed");
    suite->add_option("--radius", suite_opts.radius_max, "closed-loop spectral radius cap")
        ->check(CLI::Range(0.05, 0.999));
    suite->add_option("--order-min", suite_opts.order_min, "smallest plant order")->check(CLI::PositiveNumber);
    suite->add_option("--order-max", suite_opts.order_max, "largest plant order")->check(CLI::PositiveNumber);
    suite->add_option("--proof-horizon", suite_opts.proof_horizon, "horizon of the identity checks")
        ->check(CLI::PositiveNumber);
    add_common(suite, flags);

    std::string param;
    std::string values_text;
    CLI::App* sweep_cmd = app.add_subcommand("sweep", "sweep one numeric parameter of every scenario");
    sweep_cmd->add_option("config", config, "scenario config (TOML)")->required()->check(CLI::ExistingFile);
    sweep_cmd->add_option("--param", param, "dotted parameter path, e.g. noise.v.variance")->required();
    sweep_cmd->add_option("--values", values_text, "comma-separated values (may be empty)")->required();
    add_common(sweep_cmd, flags);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    if (flags.threads > 0) omp_set_num_threads(flags.threads);

    try {
        if (*run) return run_command(config, flags);
        if (*sweep_cmd) return sweep_command(config, param, parse_values(values_text), flags);
        if (flags.grid) suite_opts.grid_size = flags.grid;
        if (flags.horizon) suite_opts.horizon = flags.horizon;
        if (suite_opts.order_min > suite_opts.order_max)
            throw ConfigError("--order-min", "exceeds --order-max");
        return suite_command(suite_opts, flags);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error [%s]: %s\n", e.field().c_str(), e.what());
        return kExitConfig;
    } catch (const StabilityError& e) {
        std::fprintf(stderr, "stability error: %s\n", e.what());
        return kExitUnstable;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitError;
    }
}
