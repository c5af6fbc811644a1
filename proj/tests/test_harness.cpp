#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "fixtures.hpp"
#include "infolimit/harness.hpp"

using namespace infolimit;

namespace {

const char* kAr1 = R"(
name = "ar1"
horizon = 300
x0_covariance = [[1.0]]
plant = { A = [[0.0]], B = [[1.0]], C = [[1.0]], D = [[0.0]] }
controller = { D = [[-0.5]] }
noise.v = { variance = 1.0 }
noise.w = { variance = 1.0 }
)";

std::string config_error_field(const std::string& text) {
    try {
        parse_config(text);
    } catch (const ConfigError& e) {
        return e.field();
    }
    return "<no error>";
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Scenario zero_plant_scenario() {
    Scenario s;
    s.name = "zero_plant";
    s.loop = fixtures::zero_plant_loop(1.0, 30);
    return s;
}

}  // namespace

TEST_CASE("config parsing") {
    const auto scenarios = parse_config(kAr1);
    REQUIRE(scenarios.size() == 1);
    const Scenario& s = scenarios[0];
    CHECK(s.name == "ar1");
    CHECK(s.loop.horizon == 300);
    CHECK(s.loop.grid_size == kDefaultGrid);
    CHECK(s.exact);
    CHECK_FALSE(s.montecarlo);
    CHECK(s.loop.plant.states() == 1);
    CHECK(s.loop.controller.states() == 0);
    CHECK(s.loop.controller.d()(0, 0) == -0.5);

    const auto many = load_config(std::filesystem::path(TEST_DATA_DIR) / "small.toml");
    REQUIRE(many.size() == 2);
    CHECK(many[0].montecarlo);
    CHECK(many[0].mc.paths == 500);
    CHECK(many[0].mc.dump_trace);
    CHECK(many[1].loop.noise_w.shaping.has_value());
    CHECK(many[1].loop.noise_w.variance == 2.0);
    CHECK(many[1].proof_horizon == 40);
    CHECK(many[1].loop.controller.states() == 1);
}

TEST_CASE("config errors name the offending field") {
    CHECK(config_error_field("name = \"x\"\ncontroller = { D = 0.0 }\n") == ".plant");
    CHECK(config_error_field("[[scenario]]\nname = \"a\"\nplant = { A = [[1, 2], [3]], B = [[1],[1]], C = [[1, 1]] }\ncontroller = { D = 0.1 }\n") ==
          "scenario[0].plant.A[1]");
    CHECK(config_error_field("name = \"x\"\nplant = { A = [[0.5]], C = [[1.0]] }\ncontroller = { D = 0.1 }\n") ==
          ".plant.B");
    CHECK(config_error_field("name = \"x\"\nhorizon = -4\nplant = { D = 0.0 }\ncontroller = { D = 0.1 }\n") ==
          ".horizon");
    CHECK(config_error_field("name = \"x\"\nplant = { D = 0.0 }\ncontroller = { D = 0.1 }\nhorizn = 5\n") ==
          "horizn");
    CHECK(config_error_field(slurp(std::filesystem::path(TEST_DATA_DIR) / "bad_field.toml")) == "scenario[0]");
    CHECK(config_error_field("[[scenario]]\nname = \"a\"\nplant = { D = 0.0 }\ncontroller = { D = 0.1 }\n"
                             "[[scenario]]\nname = \"a\"\nplant = { D = 0.0 }\ncontroller = { D = 0.1 }\n") == "name");
    CHECK(config_error_field("name = \"x\"\nengines = [\"exact\", \"magic\"]\nplant = { D = 0.0 }\ncontroller = { D = 0.1 }\n") ==
          ".engines[1]");
    CHECK(config_error_field("name = \"x\"\nplant = { D = 1.0 }\ncontroller = { D = 1.0 }\n") == "");
    CHECK(config_error_field("name = = 3") == "");
    CHECK_THROWS_AS(load_config("/nonexistent/config.toml"), ConfigError);
}

TEST_CASE("verdict rules") {
    Tolerances tol;
    CHECK(exact_verdict(0.0, tol) == Verdict::holds_with_equality);
    CHECK(exact_verdict(0.5, tol) == Verdict::holds);
    CHECK(exact_verdict(-2e-6, tol) == Verdict::violated);
    CHECK(exact_verdict(-5e-7, tol) == Verdict::holds_with_equality);
    CHECK(exact_verdict(std::nan(""), tol) == Verdict::inconclusive);
    CHECK(montecarlo_verdict(-0.4, 0.1, tol) == Verdict::violated);
    CHECK(montecarlo_verdict(-0.05, 0.1, tol) == Verdict::inconclusive);
    CHECK(montecarlo_verdict(0.5, 0.1, tol) == Verdict::holds);
    CHECK(montecarlo_verdict(5e-4, 1e-4, tol) == Verdict::holds_with_equality);
    CHECK(verdict_exit_code({}) == 0);
    CHECK(verdict_exit_code({Verdict::holds, Verdict::holds_with_equality}) == 0);
    CHECK(verdict_exit_code({Verdict::holds, Verdict::inconclusive}) == 5);
    CHECK(verdict_exit_code({Verdict::inconclusive, Verdict::violated}) == 4);
    CHECK(to_string(Verdict::holds_with_equality) == "HOLDS_WITH_EQUALITY");
}

TEST_CASE("run_scenario on the spec loops") {
    const Report r = run_scenario(parse_config(kAr1)[0]);
    const double half_ln2 = 0.5 * std::log(2.0);
    CHECK(std::abs(r.lhs_rate - half_ln2) <= 1e-3);
    CHECK(std::abs(r.di_rate - half_ln2) <= 1e-3);
    CHECK(std::abs(r.rhs - half_ln2) <= 1e-10);
    CHECK(r.verdict == Verdict::holds_with_equality);
    CHECK(r.proof.worst_identity() <= 1e-8);
    CHECK(r.lhs_series.size() == 300);

    const Report z = run_scenario(zero_plant_scenario());
    CHECK(std::abs(z.rhs - half_ln2) <= 1e-12);
    CHECK(std::abs(z.slack) <= 1e-10);

    Scenario unstable = zero_plant_scenario();
    unstable.loop = fixtures::ar1_loop(1.2);
    CHECK_THROWS_AS(run_scenario(unstable), StabilityError);
}

TEST_CASE("literal directed information is reported on request") {
    Scenario s = parse_config(kAr1)[0];
    s.literal_directed = true;
    s.proof_horizon = 40;
    const Report r = run_scenario(s);
    REQUIRE(r.directed_forms);
    CHECK(r.directed_forms->first <= r.directed_forms->second + 1e-8);
    const auto j = nlohmann::json::parse(report_json(r));
    CHECK(j["exact"]["directed_forms"]["horizon"] == 40);
}

TEST_CASE("report JSON carries the audit trail") {
    Scenario s = zero_plant_scenario();
    s.emit_spectra = true;
    s.loop.grid_size = 64;
    const Report r = run_scenario(s);
    const auto j = nlohmann::json::parse(report_json(r));
    CHECK(j["verdict"] == "HOLDS_WITH_EQUALITY");
    CHECK(j["grid_size"] == 64);
    CHECK(j["horizon"] == 30);
    CHECK(j["tolerances"]["verdict"] == 1e-6);
    CHECK(j["tolerances"]["equality"] == 1e-3);
    CHECK(j["tolerances"]["pd_relative"] == 1e-12);
    CHECK(j["exact"]["proof_residuals"]["chain_rule"].get<double>() <= 1e-8);

    const auto dir = std::filesystem::temp_directory_path() / "infolimit_harness_test";
    std::filesystem::remove_all(dir);
    s.output_dir = dir;
    write_report(s, r);
    for (const char* f : {"zero_plant.json", "zero_plant_lhs.csv", "zero_plant_S_Y.csv", "zero_plant_S_W.csv",
                          "zero_plant_sensitivity.csv"})
        CHECK(std::filesystem::exists(dir / f));
    for (const auto& entry : std::filesystem::directory_iterator(dir))
        CHECK(entry.path().extension() != ".tmp");
    CHECK(slurp(dir / "zero_plant_lhs.csv").rfind("n,cumulative,increment\n1,", 0) == 0);
    CHECK(slurp(dir / "zero_plant_S_Y.csv").rfind("omega,value\n", 0) == 0);
    std::filesystem::remove_all(dir);
}

TEST_CASE("Monte Carlo engine and trace dump") {
    auto scenarios = load_config(std::filesystem::path(TEST_DATA_DIR) / "small.toml");
    const auto dir = std::filesystem::temp_directory_path() / "infolimit_mc_test";
    std::filesystem::remove_all(dir);
    Scenario& s = scenarios[0];
    s.output_dir = dir;
    const Report r = run_scenario(s);
    REQUIRE(r.montecarlo);
    CHECK(r.montecarlo->estimates.paths == 500);
    CHECK(r.montecarlo->verdict != Verdict::violated);
    write_report(s, r);
    CHECK(std::filesystem::exists(dir / "small_ar1_trace.bin"));
    CHECK(slurp(dir / "small_ar1_trace_head.csv").rfind("path,k,v,w,z,y,u\n", 0) == 0);
    std::ifstream in(dir / "small_ar1_trace.bin", std::ios::binary);
    const Trace t = read_trace_binary(in);
    CHECK(t.paths == 500);
    CHECK(t.horizon == 10);
    std::filesystem::remove_all(dir);

    // Too few paths: the estimate is missing, not fabricated.
    s.mc.paths = 100;
    s.mc.dump_trace = false;
    const Report thin = run_scenario(s);
    CHECK(thin.montecarlo->verdict == Verdict::inconclusive);
    CHECK_FALSE(thin.montecarlo->note.empty());
    CHECK(thin.verdict == Verdict::holds_with_equality);
}

TEST_CASE("set_parameter paths") {
    LoopSpec spec = fixtures::ar1_loop(0.5);
    set_parameter(spec, "noise.v.variance", 3.0);
    CHECK(spec.noise_v.variance == 3.0);
    set_parameter(spec, "horizon", 77);
    CHECK(spec.horizon == 77);
    set_parameter(spec, "controller.D[0][0]", -0.25);
    CHECK(spec.controller.d()(0, 0) == -0.25);
    set_parameter(spec, "x0_covariance[0][0]", 2.0);
    CHECK(spec.x0_covariance(0, 0) == 2.0);
    CHECK_THROWS_AS(set_parameter(spec, "plant.A[3][0]", 1.0), ConfigError);
    CHECK_THROWS_AS(set_parameter(spec, "plant.name", 1.0), ConfigError);
    CHECK_THROWS_AS(set_parameter(spec, "horizon", 2.5), ConfigError);
    CHECK_THROWS_AS(set_parameter(spec, "noise.w.shaping.A[0][0]", 0.5), ConfigError);
    CHECK_THROWS_AS(set_parameter(spec, "noise.v.variance[0]", 0.5), ConfigError);
}

TEST_CASE("sweep over the v variance reproduces the one-step closed form") {
    const std::vector<double> values{0.1, 1.0, 10.0};
    const auto rows = sweep(zero_plant_scenario(), "noise.v.variance", values);
    REQUIRE(rows.size() == 3);
    const double expected[] = {0.04766, 0.34657, 1.19895};
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(std::abs(rows[i].report.lhs_rate - 0.5 * std::log1p(values[i])) <= 1e-10);
        CHECK(std::abs(rows[i].report.lhs_rate - expected[i]) <= 1e-5);
    }
    std::ostringstream os;
    write_sweep_csv(os, "noise.v.variance", rows);
    const std::string csv = os.str();
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);

    std::ostringstream empty;
    write_sweep_csv(empty, "noise.v.variance", sweep(zero_plant_scenario(), "noise.v.variance", {}));
    CHECK(empty.str() == "value,horizon,lhs_rate,lhs_average,di_rate,rhs,slack,rate_gap,delta_lhs,gap_monotone,verdict\n");

    CHECK_THROWS_AS(sweep(zero_plant_scenario(), "plant.bogus", {1.0}), ConfigError);
    CHECK_THROWS_AS(sweep(zero_plant_scenario(), "noise.w.variance", {-1.0}), ConfigError);
}

TEST_CASE("horizon sweep converges monotonically") {
    Scenario s = parse_config(kAr1)[0];
    s.loop.noise_w.shaping = fixtures::shaping_filter(0.5, 0.2);
    const auto rows = sweep(s, "horizon", {10, 100, 1000});
    double previous = std::numeric_limits<double>::infinity();
    for (const SweepRow& row : rows) {
        const double gap = std::abs(row.report.lhs_rate - row.report.rhs);
        CHECK(gap <= previous);
        previous = gap;
    }
    std::ostringstream os;
    write_sweep_csv(os, "horizon", rows);
    CHECK(os.str().find("false") == std::string::npos);
}

TEST_CASE("random suite") {
    SuiteOptions none;
    none.count = 0;
    const SuiteResult empty = random_suite(none);
    CHECK(empty.rows.empty());
    CHECK(empty.evaluated == 0);
    CHECK_FALSE(empty.min_slack);
    const auto summary = nlohmann::json::parse(suite_summary_json(empty));
    CHECK(summary["verdict"] == "HOLDS");
    CHECK(summary["min_slack"].is_null());

    SuiteOptions opt;
    opt.count = 12;
    opt.horizon = 120;
    opt.proof_horizon = 40;
    opt.grid_size = 2048;
    const SuiteResult a = random_suite(opt);
    const SuiteResult b = random_suite(opt);
    std::ostringstream ca, cb;
    write_suite_csv(ca, a);
    write_suite_csv(cb, b);
    CHECK(ca.str() == cb.str());
    CHECK(suite_summary_json(a) == suite_summary_json(b));
    CHECK(a.evaluated + a.skipped == 12);
    CHECK(a.violations == 0);
    CHECK(a.max_chain_residual <= 1e-8);
    for (const SuiteRow& r : a.rows) {
        if (r.skipped) continue;
        CHECK(r.spectral_radius <= opt.radius_max);
        CHECK(r.plant_order <= opt.order_max);
        CHECK(r.controller_order >= 1);
        CHECK(r.plant_order >= opt.order_min);
        CHECK(r.colored_w == (r.index % 5 == 4));
    }
    for (std::size_t i = 0; i < 12; ++i) {
        const auto spec = random_loop(opt, i);
        if (spec) CHECK(spec->controller.d()(0, 0) == 0.0);
    }
}

TEST_CASE("atomic file writes replace the target") {
    const auto dir = std::filesystem::temp_directory_path() / "infolimit_atomic_test";
    std::filesystem::remove_all(dir);
    write_file_atomic(dir / "a" / "f.txt", "first");
    write_file_atomic(dir / "a" / "f.txt", "second");
    CHECK(slurp(dir / "a" / "f.txt") == "second");
    CHECK_FALSE(std::filesystem::exists(dir / "a" / "f.txt.tmp"));
    std::filesystem::remove_all(dir);
}
