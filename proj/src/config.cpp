#include <algorithm>
#include <cmath>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include <toml.hpp>

#include "infolimit/harness.hpp"

namespace infolimit {

namespace {

void check_keys(const toml::table& t, const std::string& field, std::initializer_list<const char*> known) {
    for (const auto& [key, node] : t) {
        const std::string k(key.str());
        if (std::none_of(known.begin(), known.end(), [&](const char* s) { return k == s; }))
            throw ConfigError(field.empty() ? k : field + "." + k, "unknown key");
    }
}

double number(const toml::node& node, const std::string& field) {
    if (auto v = node.value<double>(); v && node.is_number()) return *v;
    throw ConfigError(field, "expected a number");
}

std::size_t positive_integer(const toml::node& node, const std::string& field) {
    const auto v = node.value<std::int64_t>();
    if (!node.is_integer() || !v || *v <= 0) throw ConfigError(field, "expected a positive integer");
    return static_cast<std::size_t>(*v);
}

// Numbers, flat arrays (one row) and nested arrays (row-major) all parse;
// an empty array is the 0x0 matrix.
Matrix parse_matrix(const toml::node& node, const std::string& field) {
    if (node.is_number()) return Matrix::Constant(1, 1, number(node, field));
    const toml::array* arr = node.as_array();
    if (!arr) throw ConfigError(field, "expected a matrix (nested arrays, row-major)");
    if (arr->empty()) return Matrix(0, 0);
    if (!(*arr)[0].is_array()) {
        Matrix m(1, static_cast<Eigen::Index>(arr->size()));
        for (std::size_t j = 0; j < arr->size(); ++j)
            m(0, static_cast<Eigen::Index>(j)) = number((*arr)[j], field + "[" + std::to_string(j) + "]");
        return m;
    }
    const std::size_t rows = arr->size();
    const std::size_t cols = (*arr)[0].as_array()->size();
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t i = 0; i < rows; ++i) {
        const toml::array* row = (*arr)[i].as_array();
        const std::string rf = field + "[" + std::to_string(i) + "]";
        if (!row) throw ConfigError(rf, "expected a row array");
        if (row->size() != cols) throw ConfigError(rf, "ragged matrix rows");
        for (std::size_t j = 0; j < cols; ++j)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                number((*row)[j], rf + "[" + std::to_string(j) + "]");
    }
    return m;
}

StateSpace parse_system(const toml::table& t, const std::string& field) {
    check_keys(t, field, {"A", "B", "C", "D"});
    Matrix a = t.contains("A") ? parse_matrix(*t.get("A"), field + ".A") : Matrix(0, 0);
    const Eigen::Index n = a.rows();
    if (a.size() == 0) a.resize(0, 0);
    auto optional_matrix = [&](const char* key, Eigen::Index rows, Eigen::Index cols) {
        if (t.contains(key)) {
            Matrix m = parse_matrix(*t.get(key), field + "." + key);
            if (m.size() != 0 || rows * cols != 0) return m;
        } else if (rows * cols != 0) {
            throw ConfigError(field + "." + key, "required when the system has states");
        }
        return Matrix(rows, cols);
    };
    Matrix b = optional_matrix("B", n, 1);
    Matrix c = optional_matrix("C", 1, n);
    Matrix d = t.contains("D") ? parse_matrix(*t.get("D"), field + ".D") : Matrix::Zero(1, 1);
    try {
        return StateSpace(std::move(a), std::move(b), std::move(c), std::move(d));
    } catch (const Error& e) {
        throw ConfigError(field, e.what());
    }
}

const toml::table& sub_table(const toml::table& t, const char* key, const std::string& field) {
    const toml::table* s = t.get_as<toml::table>(key);
    if (!s) throw ConfigError(field + "." + key, "missing table");
    return *s;
}

NoiseSpec parse_noise(const toml::table& t, const std::string& field) {
    check_keys(t, field, {"variance", "shaping"});
    NoiseSpec ns;
    if (t.contains("variance")) ns.variance = number(*t.get("variance"), field + ".variance");
    if (const auto* s = t.get_as<toml::table>("shaping")) ns.shaping = parse_system(*s, field + ".shaping");
    return ns;
}

Scenario parse_scenario(const toml::table& t, const std::string& field) {
    check_keys(t, field,
               {"name", "engines", "horizon", "grid_size", "proof_horizon", "x0_covariance", "plant",
                "controller", "noise", "montecarlo", "tolerances", "output", "literal_directed"});
    Scenario s;
    if (const auto name = t["name"].value<std::string>(); name && !name->empty())
        s.name = *name;
    else
        throw ConfigError(field + ".name", "missing or empty scenario name");
    if (s.name.find_first_of("/\\") != std::string::npos)
        throw ConfigError(field + ".name", "scenario name must not contain path separators");

    if (t.contains("engines")) {
        const toml::array* e = t.get_as<toml::array>("engines");
        if (!e) throw ConfigError(field + ".engines", "expected an array of engine names");
        s.exact = s.montecarlo = false;
        for (std::size_t i = 0; i < e->size(); ++i) {
            const auto name = (*e)[i].value<std::string>();
            const std::string ef = field + ".engines[" + std::to_string(i) + "]";
            if (name == "exact")
                s.exact = true;
            else if (name == "montecarlo")
                s.montecarlo = true;
            else
                throw ConfigError(ef, "unknown engine (expected exact or montecarlo)");
        }
        if (!s.exact && !s.montecarlo) throw ConfigError(field + ".engines", "no engine selected");
    }

    LoopSpec& loop = s.loop;
    if (t.contains("horizon")) loop.horizon = positive_integer(*t.get("horizon"), field + ".horizon");
    if (t.contains("grid_size")) loop.grid_size = positive_integer(*t.get("grid_size"), field + ".grid_size");
    if (t.contains("proof_horizon"))
        s.proof_horizon = positive_integer(*t.get("proof_horizon"), field + ".proof_horizon");
    loop.plant = parse_system(sub_table(t, "plant", field), field + ".plant");
    loop.controller = parse_system(sub_table(t, "controller", field), field + ".controller");
    if (t.contains("x0_covariance"))
        loop.x0_covariance = parse_matrix(*t.get("x0_covariance"), field + ".x0_covariance");

    if (const auto* noise = t.get_as<toml::table>("noise")) {
        check_keys(*noise, field + ".noise", {"v", "w"});
        if (const auto* v = noise->get_as<toml::table>("v")) loop.noise_v = parse_noise(*v, field + ".noise.v");
        if (const auto* w = noise->get_as<toml::table>("w")) loop.noise_w = parse_noise(*w, field + ".noise.w");
    }

    if (const auto* mc = t.get_as<toml::table>("montecarlo")) {
        const std::string mf = field + ".montecarlo";
        check_keys(*mc, mf, {"paths", "seed", "v_family", "n_sub", "dump_trace"});
        if (mc->contains("paths")) s.mc.paths = positive_integer(*mc->get("paths"), mf + ".paths");
        if (mc->contains("n_sub")) s.mc.n_sub = positive_integer(*mc->get("n_sub"), mf + ".n_sub");
        if (mc->contains("seed")) {
            const auto seed = (*mc)["seed"].value<std::int64_t>();
            if (!seed || *seed < 0) throw ConfigError(mf + ".seed", "expected a nonnegative integer");
            s.mc.seed = static_cast<std::uint64_t>(*seed);
        }
        if (const auto fam = (*mc)["v_family"].value<std::string>()) {
            try {
                s.mc.v_family = parse_noise_family(*fam);
            } catch (const ConfigError& e) {
                throw ConfigError(mf + ".v_family", e.what());
            }
        }
        if (const auto dump = (*mc)["dump_trace"].value<bool>()) s.mc.dump_trace = *dump;
    }
    if (s.montecarlo && s.mc.n_sub > loop.horizon)
        throw ConfigError(field + ".montecarlo.n_sub", "exceeds the horizon");

    if (const auto* tol = t.get_as<toml::table>("tolerances")) {
        const std::string tf = field + ".tolerances";
        check_keys(*tol, tf, {"verdict", "equality", "mc_sigmas"});
        if (tol->contains("verdict")) s.tol.verdict = number(*tol->get("verdict"), tf + ".verdict");
        if (tol->contains("equality")) s.tol.equality = number(*tol->get("equality"), tf + ".equality");
        if (tol->contains("mc_sigmas")) s.tol.mc_sigmas = number(*tol->get("mc_sigmas"), tf + ".mc_sigmas");
    }
    if (t.contains("literal_directed")) {
        const auto flag = t["literal_directed"].value<bool>();
        if (!flag || !t.get("literal_directed")->is_boolean())
            throw ConfigError(field + ".literal_directed", "expected a boolean");
        s.literal_directed = *flag;
    }
    if (const auto* out = t.get_as<toml::table>("output")) {
        check_keys(*out, field + ".output", {"dir", "emit_spectra"});
        if (const auto dir = (*out)["dir"].value<std::string>()) s.output_dir = *dir;
        if (const auto emit = (*out)["emit_spectra"].value<bool>()) s.emit_spectra = *emit;
    }

    try {
        loop.validate();
    } catch (const StabilityError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(field, e.what());
    }
    return s;
}

// "plant.C[0][1]" -> ("plant.C", {0, 1})
std::pair<std::string, std::vector<std::size_t>> split_indices(const std::string& path) {
    static const std::regex re(R"(^([A-Za-z0-9_.]+)((\[[0-9]+\])*)$)");
    std::smatch m;
    if (!std::regex_match(path, m, re)) throw ConfigError(path, "malformed parameter path");
    std::vector<std::size_t> idx;
    const std::string tail = m[2];
    static const std::regex num(R"(\[([0-9]+)\])");
    for (auto it = std::sregex_iterator(tail.begin(), tail.end(), num); it != std::sregex_iterator(); ++it)
        idx.push_back(static_cast<std::size_t>(std::stoul((*it)[1])));
    return {m[1], idx};
}

}  // namespace

std::vector<Scenario> parse_config(const std::string& text, const std::string& source) {
    toml::table root;
    try {
        root = toml::parse(text, source);
    } catch (const toml::parse_error& e) {
        std::ostringstream os;
        os << e.description() << " (line " << e.source().begin.line << ")";
        throw ConfigError("", os.str());
    }
    std::vector<Scenario> out;
    if (const toml::array* arr = root.get_as<toml::array>("scenario")) {
        check_keys(root, "", {"scenario"});
        for (std::size_t i = 0; i < arr->size(); ++i) {
            const std::string f = "scenario[" + std::to_string(i) + "]";
            const toml::table* t = (*arr)[i].as_table();
            if (!t) throw ConfigError(f, "expected a table");
            out.push_back(parse_scenario(*t, f));
        }
    } else {
        out.push_back(parse_scenario(root, ""));
    }
    std::set<std::string> names;
    for (const Scenario& s : out)
        if (!names.insert(s.name).second) throw ConfigError("name", "duplicate scenario name '" + s.name + "'");
    return out;
}

std::vector<Scenario> load_config(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ConfigError("", "cannot read config file " + file.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), file.string());
}

void set_parameter(LoopSpec& spec, const std::string& path, double value) {
    const auto [base, idx] = split_indices(path);
    if (!std::isfinite(value)) throw ConfigError(path, "value must be finite");

    auto as_count = [&](double v) {
        if (v < 1 || v != std::floor(v)) throw ConfigError(path, "expected a positive integer value");
        return static_cast<std::size_t>(v);
    };
    auto set_entry = [&](Matrix m) {
        if (idx.size() != 2) throw ConfigError(path, "matrix entries need two indices, e.g. [0][0]");
        if (idx[0] >= static_cast<std::size_t>(m.rows()) || idx[1] >= static_cast<std::size_t>(m.cols()))
            throw ConfigError(path, "index out of range");
        m(static_cast<Eigen::Index>(idx[0]), static_cast<Eigen::Index>(idx[1])) = value;
        return m;
    };
    auto set_system = [&](StateSpace& sys, char which) {
        Matrix a = sys.a(), b = sys.b(), c = sys.c(), d = sys.d();
        switch (which) {
            case 'A': a = set_entry(a); break;
            case 'B': b = set_entry(b); break;
            case 'C': c = set_entry(c); break;
            default: d = set_entry(d); break;
        }
        sys = StateSpace(a, b, c, d);
    };
    auto scalar_only = [&] {
        if (!idx.empty()) throw ConfigError(path, "scalar field takes no index");
    };

    if (base == "horizon") {
        scalar_only();
        spec.horizon = as_count(value);
    } else if (base == "grid_size") {
        scalar_only();
        spec.grid_size = as_count(value);
    } else if (base == "noise.v.variance" || base == "noise.w.variance") {
        scalar_only();
        (base[6] == 'v' ? spec.noise_v : spec.noise_w).variance = value;
    } else if (base == "x0_covariance") {
        if (spec.x0_covariance.size() == 0)
            spec.x0_covariance = Matrix::Zero(spec.plant.states(), spec.plant.states());
        spec.x0_covariance = set_entry(spec.x0_covariance);
    } else if (std::regex_match(base, std::regex(R"(^(plant|controller)\.[ABCD]$)"))) {
        set_system(base[0] == 'p' ? spec.plant : spec.controller, base.back());
    } else if (std::regex_match(base, std::regex(R"(^noise\.[vw]\.shaping\.[ABCD]$)"))) {
        auto& ns = base[6] == 'v' ? spec.noise_v : spec.noise_w;
        if (!ns.shaping) throw ConfigError(path, "noise has no shaping filter");
        set_system(*ns.shaping, base.back());
    } else {
        throw ConfigError(path, "does not resolve to a numeric field of the loop");
    }
}

}  // namespace infolimit
