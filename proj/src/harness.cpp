#include "infolimit/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

namespace infolimit {

namespace {

using json = nlohmann::ordered_json;

json number_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

json estimate_json(const Estimate& e) {
    return json{{"value", number_or_null(e.value)}, {"se", number_or_null(e.se)}};
}

json proof_json(const ProofResiduals& p) {
    return json{{"horizon", p.horizon},
                {"chain_rule", number_or_null(p.chain_rule)},
                {"directed_identity", number_or_null(p.directed_identity)},
                {"monotone_slack", number_or_null(p.monotone_slack)},
                {"inversion", number_or_null(p.inversion)},
                {"conditioning_gap", number_or_null(p.conditioning_gap)}};
}

std::string spectrum_csv(const Spectrum& s) {
    std::ostringstream os;
    write_spectrum_csv(os, s);
    return os.str();
}

std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

}  // namespace

std::string to_string(Verdict v) {
    switch (v) {
        case Verdict::holds: return "HOLDS";
        case Verdict::holds_with_equality: return "HOLDS_WITH_EQUALITY";
        case Verdict::violated: return "VIOLATED";
        case Verdict::inconclusive: return "INCONCLUSIVE";
    }
    return "INCONCLUSIVE";
}

Verdict exact_verdict(double slack, const Tolerances& tol) {
    if (!std::isfinite(slack)) return Verdict::inconclusive;
    if (slack < -tol.verdict) return Verdict::violated;
    if (std::abs(slack) <= tol.equality) return Verdict::holds_with_equality;
    return Verdict::holds;
}

Verdict montecarlo_verdict(double slack, double se, const Tolerances& tol) {
    if (!std::isfinite(slack) || !std::isfinite(se)) return Verdict::inconclusive;
    if (slack < -tol.mc_sigmas * se) return Verdict::violated;
    if (se > std::abs(slack)) return Verdict::inconclusive;
    if (std::abs(slack) <= tol.equality) return Verdict::holds_with_equality;
    return Verdict::holds;
}

Report run_scenario(const Scenario& scenario) {
    const LoopSpec& spec = scenario.loop;
    spec.validate();

    Report r;
    r.name = scenario.name;
    r.horizon = spec.horizon;
    r.grid_size = spec.grid_size;
    r.tol = scenario.tol;
    r.exact = scenario.exact;

    std::optional<ExactAnalysis> analysis;
    ClosedLoop loop;
    if (scenario.exact) {
        analysis = analyze_exact(spec);
        loop = analysis->loop;
    } else {
        loop = close_loop(spec);
    }
    r.spectral_radius = loop.spectral_radius;

    RhsTerms terms = rhs_terms(loop, spec);
    r.rhs = terms.bound;

    if (analysis) {
        r.lhs_series = analysis->lhs;
        r.lhs_rate = analysis->lhs.rate();
        r.lhs_average = analysis->lhs.average();
        r.di_rate = analysis->directed.rate();
        const std::size_t m = std::min(spec.horizon, scenario.proof_horizon);
        r.proof = proof_identity_check(spec, m);
        if (scenario.literal_directed) {
            const JointCovariance joint = horizon_covariance(analysis->loop, m);
            r.directed_forms = {directed_information(joint, m, DirectedForm::causal),
                                directed_information(joint, m, DirectedForm::literal)};
        }
        r.slack = r.rhs - r.lhs_rate;
        r.verdict = exact_verdict(r.slack, scenario.tol);
    }

    if (scenario.montecarlo) {
        MonteCarloReport mc;
        Trace trace = simulate_paths(spec, scenario.mc.paths, scenario.mc.seed, scenario.mc.v_family,
                                     scenario.mc.n_sub);
        try {
            mc.estimates = plugin_info_estimates(trace, scenario.mc.n_sub);
            mc.slack = r.rhs - mc.estimates.lhs_increment.value;
            mc.verdict = montecarlo_verdict(mc.slack, mc.estimates.lhs_increment.se, scenario.tol);
        } catch (const InsufficientDataError& e) {
            mc.note = e.what();
        } catch (const SingularCovarianceError& e) {
            mc.note = e.what();
        }
        if (!mc.note.empty()) {
            mc.slack = std::numeric_limits<double>::quiet_NaN();
            mc.verdict = Verdict::inconclusive;
        }
        if (scenario.mc.dump_trace) mc.trace = std::move(trace);

        if (!scenario.exact) {
            r.lhs_rate = mc.estimates.lhs_increment.value;
            r.slack = mc.slack;
            r.verdict = mc.verdict;
        } else if (mc.verdict == Verdict::violated) {
            r.verdict = Verdict::violated;
        }
        r.montecarlo = std::move(mc);
    }

    if (scenario.emit_spectra) r.spectra = std::move(terms);
    return r;
}

std::string report_json(const Report& r) {
    json j;
    j["name"] = r.name;
    j["verdict"] = to_string(r.verdict);
    j["units"] = "nats";
    j["horizon"] = r.horizon;
    j["grid_size"] = r.grid_size;
    j["closed_loop_spectral_radius"] = number_or_null(r.spectral_radius);
    j["rhs"] = number_or_null(r.rhs);
    j["lhs_rate"] = number_or_null(r.lhs_rate);
    j["slack"] = number_or_null(r.slack);
    if (r.exact) {
        j["exact"] = json{{"lhs_rate", number_or_null(r.lhs_rate)},
                          {"lhs_average", number_or_null(r.lhs_average)},
                          {"lhs_cumulative", number_or_null(r.lhs_series.values.empty()
                                                                ? 0.0
                                                                : r.lhs_series.values.back())},
                          {"di_rate", number_or_null(r.di_rate)},
                          {"proof_residuals", proof_json(r.proof)}};
        if (r.directed_forms) {
            j["exact"]["directed_forms"] = json{{"horizon", r.proof.horizon},
                                                {"causal", number_or_null(r.directed_forms->first)},
                                                {"literal", number_or_null(r.directed_forms->second)}};
        }
    }
    if (r.montecarlo) {
        const MonteCarloReport& mc = *r.montecarlo;
        json m{{"paths", mc.estimates.paths},
               {"n_sub", mc.estimates.n_sub},
               {"jackknife_groups", mc.estimates.groups},
               {"lhs", estimate_json(mc.estimates.lhs)},
               {"lhs_increment", estimate_json(mc.estimates.lhs_increment)},
               {"directed", estimate_json(mc.estimates.directed)},
               {"directed_increment", estimate_json(mc.estimates.directed_increment)},
               {"slack", number_or_null(mc.slack)},
               {"verdict", to_string(mc.verdict)}};
        if (!mc.note.empty()) m["note"] = mc.note;
        j["montecarlo"] = std::move(m);
    }
    j["tolerances"] = json{{"verdict", r.tol.verdict},
                           {"equality", r.tol.equality},
                           {"mc_sigmas", r.tol.mc_sigmas},
                           {"pd_relative", kPdTolerance},
                           {"spectrum_floor", kSpectrumFloor},
                           {"stability_margin", kStabilityMargin}};
    return j.dump(2) + "\n";
}

void write_file_atomic(const std::filesystem::path& file, const std::string& contents) {
    if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
    std::filesystem::path tmp = file;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot open " + tmp.string() + " for writing");
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        out.flush();
        if (!out) throw Error("write to " + tmp.string() + " failed");
    }
    std::filesystem::rename(tmp, file);
}

void write_report(const Scenario& scenario, const Report& report) {
    const std::filesystem::path dir = scenario.output_dir;
    write_file_atomic(dir / (report.name + ".json"), report_json(report));
    if (report.exact) {
        std::ostringstream os;
        write_info_series_csv(os, report.lhs_series);
        write_file_atomic(dir / (report.name + "_lhs.csv"), os.str());
    }
    if (report.spectra) {
        write_file_atomic(dir / (report.name + "_S_Y.csv"), spectrum_csv(report.spectra->s_y));
        write_file_atomic(dir / (report.name + "_S_W.csv"), spectrum_csv(report.spectra->s_w));
        write_file_atomic(dir / (report.name + "_sensitivity.csv"),
                          spectrum_csv(report.spectra->sensitivity.spectrum()));
    }
    if (report.montecarlo && report.montecarlo->trace) {
        std::ostringstream bin(std::ios::binary);
        write_trace_binary(bin, *report.montecarlo->trace);
        write_file_atomic(dir / (report.name + "_trace.bin"), bin.str());
        std::ostringstream head;
        write_trace_csv_head(head, *report.montecarlo->trace);
        write_file_atomic(dir / (report.name + "_trace_head.csv"), head.str());
    }
}

int verdict_exit_code(const std::vector<Verdict>& verdicts) {
    if (std::find(verdicts.begin(), verdicts.end(), Verdict::violated) != verdicts.end()) return 4;
    if (std::find(verdicts.begin(), verdicts.end(), Verdict::inconclusive) != verdicts.end()) return 5;
    return 0;
}

std::vector<SweepRow> sweep(const Scenario& scenario, const std::string& parameter,
                            const std::vector<double>& values) {
    std::vector<SweepRow> rows;
    rows.reserve(values.size());
    for (double value : values) {
        Scenario s = scenario;
        set_parameter(s.loop, parameter, value);
        try {
            s.loop.validate();
        } catch (const StabilityError&) {
            throw;
        } catch (const Error& e) {
            throw ConfigError(parameter, e.what());
        }
        rows.push_back(SweepRow{value, run_scenario(s)});
    }
    return rows;
}

void write_sweep_csv(std::ostream& os, const std::string&, const std::vector<SweepRow>& rows) {
    os << "value,horizon,lhs_rate,lhs_average,di_rate,rhs,slack,rate_gap,delta_lhs,gap_monotone,verdict\n";
    bool monotone = true;
    double prev_gap = 0.0;
    double prev_lhs = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const Report& r = rows[i].report;
        const double gap = std::abs(r.lhs_rate - r.rhs);
        // Gaps at roundoff level count as zero so equality cases do not flicker.
        const double g = gap < 1e-12 ? 0.0 : gap;
        if (i > 0 && g > prev_gap) monotone = false;
        os << format_double(rows[i].value) << ',' << r.horizon << ',' << format_double(r.lhs_rate) << ','
           << format_double(r.lhs_average) << ',' << format_double(r.di_rate) << ','
           << format_double(r.rhs) << ',' << format_double(r.slack) << ',' << format_double(gap) << ','
           << (i == 0 ? std::string() : format_double(r.lhs_rate - prev_lhs)) << ','
           << (monotone ? "true" : "false") << ',' << to_string(r.verdict) << '\n';
        prev_gap = g;
        prev_lhs = r.lhs_rate;
    }
}

}  // namespace infolimit
