#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "infolimit/gauss.hpp"
#include "infolimit/simulate.hpp"
#include "infolimit/spectral.hpp"

namespace infolimit {

enum class Verdict { holds, holds_with_equality, violated, inconclusive };

std::string to_string(Verdict v);

/// Verdict thresholds, in nats.
struct Tolerances {
    double verdict = 1e-6;   // exact engine: VIOLATED below -verdict
    double equality = 1e-3;  // |slack| <= equality: HOLDS_WITH_EQUALITY
    double mc_sigmas = 3.0;  // Monte Carlo: VIOLATED below -mc_sigmas * SE
};

Verdict exact_verdict(double slack, const Tolerances& tol);
Verdict montecarlo_verdict(double slack, double se, const Tolerances& tol);

struct MonteCarloSettings {
    std::size_t paths = 5000;
    std::uint64_t seed = 1;
    NoiseFamily v_family = NoiseFamily::gaussian;
    std::size_t n_sub = 20;
    bool dump_trace = false;
};

struct Scenario {
    std::string name;
    LoopSpec loop;
    bool exact = true;
    bool montecarlo = false;
    MonteCarloSettings mc;
    Tolerances tol;
    std::size_t proof_horizon = 100;
    std::filesystem::path output_dir = "out";
    bool emit_spectra = false;
    /// Also report directed information in the literal form that conditions
    /// every term on the whole Z^n, next to the causal form.
    bool literal_directed = false;
};

struct MonteCarloReport {
    PluginEstimates estimates;
    double slack = 0.0;  // rhs - estimated rate
    Verdict verdict = Verdict::inconclusive;
    /// Why the estimate is missing, when it is.
    std::string note;
    /// Kept only when the scenario asks for a trace dump.
    std::optional<Trace> trace;
};

struct Report {
    std::string name;
    std::size_t horizon = 0;
    std::size_t grid_size = 0;
    double spectral_radius = 0.0;

    bool exact = false;
    InfoSeries lhs_series;
    double lhs_rate = 0.0;
    double lhs_average = 0.0;
    double di_rate = 0.0;
    ProofResiduals proof;
    /// Cumulative causal and literal directed information at the proof
    /// horizon, when requested.
    std::optional<std::pair<double, double>> directed_forms;

    double rhs = 0.0;
    double slack = 0.0;
    Verdict verdict = Verdict::inconclusive;
    Tolerances tol;

    std::optional<MonteCarloReport> montecarlo;
    std::optional<RhsTerms> spectra;
};

/// Parses a TOML configuration: either a `[[scenario]]` array or a single
/// scenario at the top level. Throws ConfigError naming the offending field.
std::vector<Scenario> parse_config(const std::string& text, const std::string& source = "config");
std::vector<Scenario> load_config(const std::filesystem::path& file);

Report run_scenario(const Scenario& scenario);

std::string report_json(const Report& report);

/// Writes <name>.json and <name>_lhs.csv (plus spectra when requested) into
/// the scenario's output directory. Every file is written to a temporary name
/// and renamed into place.
void write_report(const Scenario& scenario, const Report& report);

void write_file_atomic(const std::filesystem::path& file, const std::string& contents);

/// Exit status of a finished run: 0 when every report holds, 4 if any is
/// violated, 5 if any is inconclusive.
int verdict_exit_code(const std::vector<Verdict>& verdicts);

// ---- randomized stress suite ----

struct SuiteOptions {
    std::size_t count = 100;
    std::uint64_t seed = 1;
    std::size_t order_min = 1;
    std::size_t order_max = 6;
    double radius_max = 0.9;
    std::size_t horizon = 1000;
    std::size_t proof_horizon = 100;
    std::size_t grid_size = kDefaultGrid;
    /// Every `colored_w_every`-th loop gets colored feedback noise (0: never).
    std::size_t colored_w_every = 5;
    /// Every `colored_v_every`-th loop gets colored output noise (0: never).
    std::size_t colored_v_every = 3;
    Tolerances tol;
};

/// Draws loop `index` of a suite: random stable plant of order in
/// [order_min, order_max] and a strictly proper controller with one or two
/// states, closed-loop spectral radius <= radius_max. nullopt when the
/// bounded retries run out.
std::optional<LoopSpec> random_loop(const SuiteOptions& options, std::size_t index);

struct SuiteRow {
    std::size_t index = 0;
    bool skipped = false;
    std::string note;
    std::size_t plant_order = 0;
    std::size_t controller_order = 0;
    bool colored_v = false;
    bool colored_w = false;
    double spectral_radius = 0.0;
    double lhs_rate = 0.0;
    double di_rate = 0.0;
    double rhs = 0.0;
    double slack = 0.0;
    ProofResiduals proof;
    Verdict verdict = Verdict::inconclusive;
};

struct SuiteResult {
    SuiteOptions options;
    std::vector<SuiteRow> rows;
    std::size_t evaluated = 0;
    std::size_t skipped = 0;
    std::size_t violations = 0;
    std::optional<double> min_slack;
    double max_chain_residual = 0.0;
    double max_directed_residual = 0.0;
};

SuiteResult random_suite(const SuiteOptions& options);

void write_suite_csv(std::ostream& os, const SuiteResult& result);
std::string suite_summary_json(const SuiteResult& result);

// ---- parameter sweeps ----

/// Sets a numeric LoopSpec field addressed by a dotted path such as
/// `noise.v.variance`, `horizon`, `plant.C[0][0]`. Throws ConfigError when
/// the path does not resolve to a numeric field.
void set_parameter(LoopSpec& spec, const std::string& path, double value);

struct SweepRow {
    double value = 0.0;
    Report report;
};

std::vector<SweepRow> sweep(const Scenario& scenario, const std::string& parameter,
                            const std::vector<double>& values);

/// Columns: value, horizon, lhs_rate, lhs_average, di_rate, rhs, slack,
/// rate_gap (|lhs_rate - rhs|), delta_lhs (change from previous row),
/// gap_monotone (rate_gap non-increasing so far), verdict.
void write_sweep_csv(std::ostream& os, const std::string& parameter,
                     const std::vector<SweepRow>& rows);

}  // namespace infolimit
