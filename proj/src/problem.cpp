#include "affest/problem.hpp"

#include <cmath>
#include <sstream>
#include <utility>

#include "json_util.hpp"

namespace affest {

namespace {

using nlohmann::json;
using detail::fail;
using detail::need;
using detail::need_int;
using detail::need_matrix;
using detail::need_number;
using detail::need_string;
using detail::need_vector;
using detail::to_array;
using detail::to_rows;

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

FeasibleSet set_from_json(const json& j, const std::string& path) {
    const std::string kind = need_string(j, "kind", path);
    FeasibleSet set;
    if (kind == "box") {
        set = Box{need_vector(j, "lower", path), need_vector(j, "upper", path)};
    } else if (kind == "simplex") {
        Simplex s;
        s.dim = need_int(j, "dim", path);
        s.floor = j.contains("floor") ? need_number(j, "floor", path) : 0.0;
        s.total = j.contains("total") ? need_number(j, "total", path) : 1.0;
        set = s;
    } else if (kind == "polytope") {
        const json& v = need(j, "vertices", path);
        const std::string pv = path + ".vertices";
        if (!v.is_array() || v.empty()) fail(pv, "expected a non-empty array of vertices");
        Polytope p;
        for (std::size_t i = 0; i < v.size(); ++i) {
            const std::string pi = pv + "[" + std::to_string(i) + "]";
            if (!v[i].is_array() || v[i].empty()) fail(pi, "expected a non-empty array of numbers");
            Vector vert(v[i].size());
            for (std::size_t c = 0; c < v[i].size(); ++c) {
                if (!v[i][c].is_number())
                    fail(pi + "[" + std::to_string(c) + "]", "expected a number");
                vert[static_cast<int>(c)] = v[i][c].get<double>();
            }
            p.vertices.push_back(std::move(vert));
        }
        set = p;
    } else {
        fail(path + ".kind",
             "unknown feasible set kind '" + kind + "' (expected box, simplex or polytope)");
    }
    try {
        check_valid(set);
    } catch (const std::invalid_argument& e) {
        fail(path, e.what());
    }
    return set;
}

json set_to_json(const FeasibleSet& set) {
    return std::visit(
        overloaded{
            [](const Box& b) {
                return json{{"kind", "box"}, {"lower", to_array(b.lower)}, {"upper", to_array(b.upper)}};
            },
            [](const Simplex& s) {
                return json{{"kind", "simplex"}, {"dim", s.dim}, {"floor", s.floor}, {"total", s.total}};
            },
            [](const Polytope& p) {
                json verts = json::array();
                for (const auto& v : p.vertices) verts.push_back(to_array(v));
                return json{{"kind", "polytope"}, {"vertices", std::move(verts)}};
            }},
        set);
}

SolverConfig solver_from_json(const json& j, const std::string& path) {
    SolverConfig cfg;
    if (!j.is_object()) fail(path, "expected an object");
    const auto num = [&](const char* key, double fallback) {
        return j.contains(key) ? need_number(j, key, path) : fallback;
    };
    cfg.tol_inner = num("tol_inner", cfg.tol_inner);
    cfg.tol_alpha = num("tol_alpha", cfg.tol_alpha);
    cfg.alpha_min = num("alpha_min", cfg.alpha_min);
    cfg.alpha_max = num("alpha_max", cfg.alpha_max);
    if (j.contains("max_iter_inner")) cfg.max_iter_inner = need_int(j, "max_iter_inner", path);
    cfg.interior_margin = num("interior_margin", cfg.interior_margin);
    if (j.contains("seed")) {
        const json& s = *j.find("seed");
        if (!s.is_number_integer()) fail(path + ".seed", "expected an integer");
        cfg.seed = s.get<std::uint64_t>();
    }
    if (!(cfg.tol_inner > 0.0)) fail(path + ".tol_inner", "must be > 0");
    if (!(cfg.tol_alpha > 0.0)) fail(path + ".tol_alpha", "must be > 0");
    if (!(cfg.alpha_min > 0.0)) fail(path + ".alpha_min", "must be > 0");
    if (!(cfg.alpha_max > cfg.alpha_min)) fail(path + ".alpha_max", "must exceed alpha_min");
    if (cfg.max_iter_inner < 1) fail(path + ".max_iter_inner", "must be >= 1");
    if (!(cfg.interior_margin >= 0.0)) fail(path + ".interior_margin", "must be >= 0");
    return cfg;
}

json solver_to_json(const SolverConfig& cfg) {
    return json{{"tol_inner", cfg.tol_inner},
                {"tol_alpha", cfg.tol_alpha},
                {"alpha_min", cfg.alpha_min},
                {"alpha_max", cfg.alpha_max},
                {"max_iter_inner", cfg.max_iter_inner},
                {"interior_margin", cfg.interior_margin},
                {"seed", cfg.seed}};
}

std::string format_vertex(const Vector& v) {
    std::ostringstream os;
    os << "(";
    for (int i = 0; i < v.size(); ++i) os << (i ? ", " : "") << v[i];
    os << ")";
    return os.str();
}

}  // namespace

Family family_from_json(const json& j, const std::string& path) {
    const std::string kind = need_string(j, "kind", path);
    Family fam;
    if (kind == "discrete") {
        fam = Discrete{need_int(j, "n_outcomes", path)};
    } else if (kind == "poisson") {
        fam = PoissonVec{need_int(j, "dim", path)};
    } else if (kind == "gaussian") {
        const int dim = need_int(j, "dim", path);
        fam = GaussianVec{dim, need_vector(j, "sigmas", path)};
    } else {
        fail(path + ".kind",
             "unknown family kind '" + kind + "' (expected discrete, poisson or gaussian)");
    }
    try {
        check_family(fam);
    } catch (const std::invalid_argument& e) {
        fail(path, e.what());
    }
    return fam;
}

json family_to_json(const Family& fam) {
    return std::visit(
        overloaded{
            [](const Discrete& d) { return json{{"kind", "discrete"}, {"n_outcomes", d.n_outcomes}}; },
            [](const PoissonVec& p) { return json{{"kind", "poisson"}, {"dim", p.dim}}; },
            [](const GaussianVec& g) {
                return json{{"kind", "gaussian"}, {"dim", g.dim}, {"sigmas", to_array(g.sigmas)}};
            }},
        fam);
}

ProblemSpec problem_from_json(const json& doc, const ParseOptions& opts) {
    const std::string root = "$";
    const json& version = need(doc, "version", root);
    if (!version.is_number_integer() || version.get<int>() != 1)
        fail(root + ".version", "unsupported document version (expected 1)");

    ProblemSpec spec;
    spec.feasible_set = set_from_json(need(doc, "feasible_set", root), root + ".feasible_set");
    spec.g = need_vector(doc, "g", root);
    const int n = spec.dim();
    if (static_cast<int>(spec.g.size()) != n)
        fail(root + ".g", "dimension " + std::to_string(spec.g.size()) +
                              " does not match the feasible set dimension " + std::to_string(n));

    const json& channels = need(doc, "channels", root);
    if (!channels.is_array() || channels.empty())
        fail(root + ".channels", "expected a non-empty array");
    for (std::size_t l = 0; l < channels.size(); ++l) {
        const std::string pc = root + ".channels[" + std::to_string(l) + "]";
        ChannelModel ch;
        ch.family = family_from_json(need(channels[l], "family", pc), pc + ".family");
        ch.map_matrix = need_matrix(channels[l], "map_matrix", pc);
        ch.map_offset = need_vector(channels[l], "map_offset", pc);
        ch.repetitions = need_int(channels[l], "repetitions", pc);
        const int m = param_dim(ch.family);
        if (ch.map_matrix.rows() != m)
            fail(pc + ".map_matrix", "has " + std::to_string(ch.map_matrix.rows()) +
                                         " rows, expected the family parameter dimension " +
                                         std::to_string(m));
        if (ch.map_matrix.cols() != n)
            fail(pc + ".map_matrix", "has " + std::to_string(ch.map_matrix.cols()) +
                                         " columns, expected the state dimension " + std::to_string(n));
        if (static_cast<int>(ch.map_offset.size()) != m)
            fail(pc + ".map_offset", "has dimension " + std::to_string(ch.map_offset.size()) +
                                         ", expected " + std::to_string(m));
        if (ch.repetitions < 1) fail(pc + ".repetitions", "must be >= 1");
        spec.channels.push_back(std::move(ch));
    }

    const double epsilon = need_number(doc, "epsilon", root);
    const double delta = need_number(doc, "delta", root);
    set_epsilon(spec, epsilon, opts.allow_large_epsilon);
    set_delta(spec, delta);

    if (doc.contains("solver")) spec.solver = solver_from_json(*doc.find("solver"), root + ".solver");
    return spec;
}

ProblemSpec parse_problem(const std::string& text, const ParseOptions& opts) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw SpecError(std::string("invalid JSON: ") + e.what());
    }
    return problem_from_json(doc, opts);
}

json problem_to_json(const ProblemSpec& spec) {
    json channels = json::array();
    for (const auto& ch : spec.channels) {
        channels.push_back(json{{"family", family_to_json(ch.family)},
                                {"map_matrix", to_rows(ch.map_matrix)},
                                {"map_offset", to_array(ch.map_offset)},
                                {"repetitions", ch.repetitions}});
    }
    return json{{"version", 1},
                {"g", to_array(spec.g)},
                {"feasible_set", set_to_json(spec.feasible_set)},
                {"channels", std::move(channels)},
                {"epsilon", spec.epsilon},
                {"delta", spec.delta},
                {"solver", solver_to_json(spec.solver)}};
}

void set_epsilon(ProblemSpec& spec, double epsilon, bool allow_large_epsilon) {
    const double hi = allow_large_epsilon ? 1.0 : 0.25;
    if (!(epsilon > 0.0) || !(epsilon < hi)) {
        std::ostringstream os;
        os << "$.epsilon: epsilon out of range (0, " << hi << ")";
        if (!allow_large_epsilon && epsilon > 0.0 && epsilon < 1.0)
            os << "; the relaxed range (0, 1) must be enabled explicitly";
        throw SpecError(os.str());
    }
    spec.epsilon = epsilon;
}

void set_delta(ProblemSpec& spec, double delta) {
    if (!(delta > 0.0) || !std::isfinite(delta)) throw SpecError("$.delta: must be a positive number");
    spec.delta = delta;
}

std::vector<std::string> validate_problem(const ProblemSpec& spec) {
    std::vector<std::string> violations;
    const double margin = spec.solver.interior_margin;
    for (std::size_t l = 0; l < spec.channels.size(); ++l) {
        const ChannelModel& ch = spec.channels[l];
        const int m = param_dim(ch.family);
        const bool positive_domain = std::holds_alternative<Discrete>(ch.family) ||
                                     std::holds_alternative<PoissonVec>(ch.family);
        if (positive_domain) {
            for (int j = 0; j < m; ++j) {
                // Exact range of the j-th mapped coordinate over the set, via
                // the support function; the minimizing vertex is the witness.
                const Vector row = ch.map_matrix.row(j).transpose();
                const Vector witness = lmo(spec.feasible_set, (-row).eval());
                const double lo = row.dot(witness) + ch.map_offset[j];
                if (lo < margin) {
                    std::ostringstream os;
                    os << "channel " << l << " (" << family_name(ch.family)
                       << "): parameter coordinate " << j << " reaches " << lo << " at vertex "
                       << format_vertex(witness) << ", below the interior margin " << margin;
                    violations.push_back(os.str());
                }
            }
        }
        if (std::holds_alternative<Discrete>(ch.family)) {
            // The mapped vector must be a probability vector everywhere on the
            // set: the extremes of 1^T (M x + b) must both equal 1.
            const Vector ones_row = ch.map_matrix.colwise().sum().transpose();
            const double offset_sum = ch.map_offset.sum();
            const double hi = support(spec.feasible_set, ones_row) + offset_sum;
            const double lo = -support(spec.feasible_set, (-ones_row).eval()) + offset_sum;
            if (std::abs(hi - 1.0) > 1e-9 || std::abs(lo - 1.0) > 1e-9) {
                std::ostringstream os;
                os << "channel " << l << " (discrete): mapped probabilities sum to values in ["
                   << lo << ", " << hi << "] over the feasible set, expected identically 1";
                violations.push_back(os.str());
            }
        }
    }
    return violations;
}

}  // namespace affest
