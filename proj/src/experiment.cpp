#include "sdg/experiment.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <memory>
#include <sstream>
#include <utility>

#include "sdg/errors.hpp"
#include "sdg/mc.hpp"
#include "sdg/numfmt.hpp"
#include "sdg/perron.hpp"
#include "sdg/presets.hpp"
#include "sdg/stopping.hpp"

namespace sdg {
namespace {

using ojson = nlohmann::ordered_json;

constexpr const char* kToolVersion = "0.1.0";

// ---- path-carrying field access ---------------------------------------------

[[noreturn]] void bad(const std::string& path, const std::string& what) {
    throw ConfigError(path + ": " + what);
}

std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
}

std::string elem(const std::string& path, std::size_t i) {
    return path + "[" + std::to_string(i) + "]";
}

const ojson* find(const ojson& obj, const char* key) {
    auto it = obj.find(key);
    return it == obj.end() ? nullptr : &it.value();
}

const ojson& require(const ojson& obj, const std::string& path, const char* key) {
    const ojson* p = find(obj, key);
    if (!p) bad(join(path, key), "missing required field");
    return *p;
}

// Strict schema: every key must be known, so typos fail loudly instead of
// silently falling back to defaults.
void check_keys(const ojson& obj, const std::string& path,
                std::initializer_list<const char*> allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (const char* k : allowed)
            if (it.key() == k) {
                known = true;
                break;
            }
        if (!known) bad(join(path, it.key()), "unknown field");
    }
}

const ojson& as_object(const ojson& j, const std::string& path) {
    if (!j.is_object()) bad(path, std::string("expected an object, got ") + j.type_name());
    return j;
}

const ojson& as_array(const ojson& j, const std::string& path) {
    if (!j.is_array()) bad(path, std::string("expected an array, got ") + j.type_name());
    return j;
}

double as_number(const ojson& j, const std::string& path) {
    if (!j.is_number()) bad(path, std::string("expected a number, got ") + j.type_name());
    return j.get<double>();
}

std::string as_string(const ojson& j, const std::string& path) {
    if (!j.is_string()) bad(path, std::string("expected a string, got ") + j.type_name());
    return j.get<std::string>();
}

std::uint64_t as_count(const ojson& j, const std::string& path) {
    if (!j.is_number_integer() || (j.is_number_integer() && j.get<long long>() < 0))
        bad(path, "expected a nonnegative integer");
    return j.get<std::uint64_t>();
}

std::size_t as_positive(const ojson& j, const std::string& path) {
    const std::uint64_t n = as_count(j, path);
    if (n == 0) bad(path, "must be >= 1");
    return static_cast<std::size_t>(n);
}

std::vector<double> as_vector(const ojson& j, const std::string& path, std::size_t want) {
    const ojson& arr = as_array(j, path);
    if (arr.size() != want)
        bad(path, "expected " + std::to_string(want) + " entries, got " +
                      std::to_string(arr.size()));
    std::vector<double> out;
    out.reserve(want);
    for (std::size_t i = 0; i < arr.size(); ++i)
        out.push_back(as_number(arr[i], elem(path, i)));
    return out;
}

// ---- inline polynomial problems ---------------------------------------------

struct PolyTerm {
    double c = 0.0;
    int t_pow = 0;
    std::vector<int> x_pow;  // one exponent per state axis
};

struct Poly {
    std::vector<PolyTerm> terms;
    bool uses_time = false;

    double eval(double t, std::span<const double> x) const {
        double acc = 0.0;
        for (const PolyTerm& term : terms) {
            double m = term.c;
            for (int k = 0; k < term.t_pow; ++k) m *= t;
            for (std::size_t a = 0; a < term.x_pow.size(); ++a)
                for (int k = 0; k < term.x_pow[a]; ++k) m *= x[a];
            acc += m;
        }
        return acc;
    }
};

// Accepts a bare number (constant) or an array of {c, t, x} term objects.
// Total degree per term is capped at 3.
Poly parse_poly(const ojson& j, const std::string& path, std::size_t d,
                bool allow_time) {
    Poly p;
    if (j.is_number()) {
        const double c = j.get<double>();
        if (c != 0.0) p.terms.push_back({c, 0, std::vector<int>(d, 0)});
        return p;
    }
    const ojson& arr = as_array(j, path);
    for (std::size_t i = 0; i < arr.size(); ++i) {
        const std::string tpath = elem(path, i);
        const ojson& tj = as_object(arr[i], tpath);
        check_keys(tj, tpath, {"c", "t", "x"});
        PolyTerm term;
        term.c = as_number(require(tj, tpath, "c"), join(tpath, "c"));
        if (const ojson* tp = find(tj, "t"))
            term.t_pow = static_cast<int>(as_count(*tp, join(tpath, "t")));
        term.x_pow.assign(d, 0);
        if (const ojson* xp = find(tj, "x")) {
            const ojson& xa = as_array(*xp, join(tpath, "x"));
            if (xa.size() != d)
                bad(join(tpath, "x"), "expected " + std::to_string(d) +
                                          " exponents (one per state axis)");
            for (std::size_t a = 0; a < d; ++a)
                term.x_pow[a] =
                    static_cast<int>(as_count(xa[a], elem(join(tpath, "x"), a)));
        }
        int degree = term.t_pow;
        for (int e : term.x_pow) degree += e;
        if (degree > 3) bad(tpath, "total degree must be <= 3");
        if (!allow_time && term.t_pow > 0)
            bad(join(tpath, "t"), "this coefficient may not depend on t");
        p.uses_time = p.uses_time || term.t_pow > 0;
        p.terms.push_back(std::move(term));
    }
    return p;
}

// One affine-in-control coefficient: base(t,x) + sum_a u_terms[a](t,x) u_a
// + sum_a v_terms[a](t,x) v_a.
struct AffineCoef {
    Poly base;
    std::vector<Poly> u_terms;
    std::vector<Poly> v_terms;

    bool uses_time() const {
        if (base.uses_time) return true;
        for (const Poly& p : u_terms)
            if (p.uses_time) return true;
        for (const Poly& p : v_terms)
            if (p.uses_time) return true;
        return false;
    }

    double eval(double t, std::span<const double> x, std::span<const double> u,
                std::span<const double> v) const {
        double acc = base.eval(t, x);
        for (std::size_t a = 0; a < u_terms.size(); ++a)
            acc += u_terms[a].eval(t, x) * u[a];
        for (std::size_t a = 0; a < v_terms.size(); ++a)
            acc += v_terms[a].eval(t, x) * v[a];
        return acc;
    }
};

AffineCoef parse_affine(const ojson& j, const std::string& path, std::size_t d,
                        std::size_t u_dim, std::size_t v_dim) {
    AffineCoef c;
    if (j.is_number() || j.is_array()) {
        c.base = parse_poly(j, path, d, true);
        return c;
    }
    const ojson& obj = as_object(j, path);
    check_keys(obj, path, {"const", "u", "v"});
    if (const ojson* b = find(obj, "const"))
        c.base = parse_poly(*b, join(path, "const"), d, true);
    if (const ojson* pu = find(obj, "u")) {
        const ojson& arr = as_array(*pu, join(path, "u"));
        if (arr.size() != u_dim)
            bad(join(path, "u"), "expected " + std::to_string(u_dim) +
                                     " entries (one per u component)");
        for (std::size_t a = 0; a < arr.size(); ++a)
            c.u_terms.push_back(
                parse_poly(arr[a], elem(join(path, "u"), a), d, true));
    }
    if (const ojson* pv = find(obj, "v")) {
        const ojson& arr = as_array(*pv, join(path, "v"));
        if (arr.size() != v_dim)
            bad(join(path, "v"), "expected " + std::to_string(v_dim) +
                                     " entries (one per v component)");
        for (std::size_t a = 0; a < arr.size(); ++a)
            c.v_terms.push_back(
                parse_poly(arr[a], elem(join(path, "v"), a), d, true));
    }
    return c;
}

ControlSet parse_control_set(const ojson& j, const std::string& path,
                             const char* fallback_label) {
    const ojson& obj = as_object(j, path);
    std::string label = fallback_label;
    if (const ojson* l = find(obj, "label")) label = as_string(*l, join(path, "label"));
    try {
        if (const ojson* pts = find(obj, "points")) {
            check_keys(obj, path, {"label", "points"});
            const ojson& arr = as_array(*pts, join(path, "points"));
            std::vector<std::vector<double>> points;
            for (std::size_t i = 0; i < arr.size(); ++i) {
                const std::string ppath = elem(join(path, "points"), i);
                if (arr[i].is_number()) {
                    points.push_back({as_number(arr[i], ppath)});
                } else {
                    const ojson& row = as_array(arr[i], ppath);
                    std::vector<double> pt;
                    for (std::size_t a = 0; a < row.size(); ++a)
                        pt.push_back(as_number(row[a], elem(ppath, a)));
                    points.push_back(std::move(pt));
                }
            }
            return ControlSet(label, std::move(points));
        }
        check_keys(obj, path, {"label", "lo", "hi", "count"});
        const double lo = as_number(require(obj, path, "lo"), join(path, "lo"));
        const double hi = as_number(require(obj, path, "hi"), join(path, "hi"));
        const std::size_t n = as_positive(require(obj, path, "count"), join(path, "count"));
        return ControlSet::uniform(label, lo, hi, n);
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        bad(path, e.what());
    }
}

// Everything the inline callables need, shared so the GameProblem copies
// stay cheap.
struct InlineSpec {
    std::size_t d = 1;
    std::size_t dn = 1;
    std::vector<AffineCoef> drift;      // d entries
    std::vector<AffineCoef> diffusion;  // d * dn entries, row-major
    Poly payoff;
};

GameProblem parse_inline_problem(const ojson& obj, const std::string& path) {
    check_keys(obj, path,
               {"name", "dim_state", "dim_noise", "horizon", "u_set", "v_set",
                "drift", "diffusion", "payoff"});
    auto spec = std::make_shared<InlineSpec>();
    GameProblem p;
    p.name = "inline";
    if (const ojson* n = find(obj, "name")) p.name = as_string(*n, join(path, "name"));
    if (const ojson* ds = find(obj, "dim_state"))
        spec->d = as_positive(*ds, join(path, "dim_state"));
    if (const ojson* dn = find(obj, "dim_noise"))
        spec->dn = as_positive(*dn, join(path, "dim_noise"));
    p.dim_state = static_cast<int>(spec->d);
    p.dim_noise = static_cast<int>(spec->dn);
    if (const ojson* h = find(obj, "horizon")) {
        p.horizon = as_number(*h, join(path, "horizon"));
        if (!(p.horizon > 0.0)) bad(join(path, "horizon"), "must be > 0");
    }

    p.u_set = parse_control_set(require(obj, path, "u_set"), join(path, "u_set"), "U");
    p.v_set = parse_control_set(require(obj, path, "v_set"), join(path, "v_set"), "V");
    const auto u_dim = static_cast<std::size_t>(p.u_set.dim());
    const auto v_dim = static_cast<std::size_t>(p.v_set.dim());

    {
        const std::string dpath = join(path, "drift");
        const ojson& arr = as_array(require(obj, path, "drift"), dpath);
        if (arr.size() != spec->d)
            bad(dpath, "expected " + std::to_string(spec->d) +
                           " entries (one per state axis)");
        for (std::size_t i = 0; i < arr.size(); ++i)
            spec->drift.push_back(
                parse_affine(arr[i], elem(dpath, i), spec->d, u_dim, v_dim));
    }
    {
        const std::string spath = join(path, "diffusion");
        const ojson& rows = as_array(require(obj, path, "diffusion"), spath);
        if (rows.size() != spec->d)
            bad(spath, "expected " + std::to_string(spec->d) +
                           " rows (one per state axis)");
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const std::string rpath = elem(spath, i);
            const ojson& row = as_array(rows[i], rpath);
            if (row.size() != spec->dn)
                bad(rpath, "expected " + std::to_string(spec->dn) +
                               " entries (one per noise axis)");
            for (std::size_t k = 0; k < row.size(); ++k)
                spec->diffusion.push_back(
                    parse_affine(row[k], elem(rpath, k), spec->d, u_dim, v_dim));
        }
    }
    {
        const std::string gpath = join(path, "payoff");
        const ojson& g = as_object(require(obj, path, "payoff"), gpath);
        check_keys(g, gpath, {"poly", "min", "max"});
        spec->payoff =
            parse_poly(require(g, gpath, "poly"), join(gpath, "poly"), spec->d, false);
        p.payoff_min = as_number(require(g, gpath, "min"), join(gpath, "min"));
        p.payoff_max = as_number(require(g, gpath, "max"), join(gpath, "max"));
        if (!(p.payoff_min <= p.payoff_max))
            bad(gpath, "min must be <= max");
    }

    bool uses_time = false;
    for (const AffineCoef& c : spec->drift) uses_time = uses_time || c.uses_time();
    for (const AffineCoef& c : spec->diffusion) uses_time = uses_time || c.uses_time();
    p.time_homogeneous = !uses_time;

    std::shared_ptr<const InlineSpec> s = spec;
    p.drift = [s](double t, std::span<const double> x, std::span<const double> u,
                  std::span<const double> v, std::span<double> out) {
        for (std::size_t i = 0; i < s->d; ++i) out[i] = s->drift[i].eval(t, x, u, v);
    };
    p.diffusion = [s](double t, std::span<const double> x, std::span<const double> u,
                      std::span<const double> v, std::span<double> out) {
        const std::size_t n = s->d * s->dn;
        for (std::size_t k = 0; k < n; ++k) out[k] = s->diffusion[k].eval(t, x, u, v);
    };
    p.payoff = [s](std::span<const double> x) { return s->payoff.eval(0.0, x); };

    try {
        p.validate();
    } catch (const Error& e) {
        bad(path, e.what());
    }
    return p;
}

// ---- stage machinery ---------------------------------------------------------

const std::array<const char*, 7> kStageNames = {
    "solve_upper", "solve_lower", "values",           "dpp",
    "saddle",      "certify",     "convergence_sweep"};

struct StageContext {
    const ExperimentConfig& cfg;
    std::filesystem::path dir;
    int threads = 1;
    std::shared_ptr<const ValueGrid> upper;
    std::shared_ptr<const ValueGrid> lower;
    // summary.csv rows: stage, artifact, metric, value
    std::vector<std::array<std::string, 4>> summary;
};

void write_text(const std::filesystem::path& p, const std::string& bytes) {
    std::ofstream f(p, std::ios::binary | std::ios::trunc);
    if (!f) throw ConfigError("cannot open " + p.string() + " for writing");
    f << bytes;
    f.flush();
    if (!f) throw ConfigError("write failed: " + p.string());
}

void add_row(StageContext& ctx, const std::string& stage, const std::string& artifact,
             const std::string& metric, const std::string& value) {
    ctx.summary.push_back({stage, artifact, metric, value});
}

void add_num(StageContext& ctx, const std::string& stage, const std::string& artifact,
             const std::string& metric, double value) {
    add_row(ctx, stage, artifact, metric, format_double(value));
}

// semicolon-separated coordinates keep summary.csv a plain 4-column file
std::string probe_label(std::span<const double> row) {
    std::string s = "value(";
    for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) s += ";";
        s += format_double(row[i]);
    }
    return s + ")";
}

SimulationConfig sim_config(const ExperimentConfig& cfg, int threads,
                            std::uint64_t seed_offset) {
    SimulationConfig c;
    c.n_steps = cfg.mc_steps;
    c.batch_size = cfg.mc_batch;
    c.rng_seed = cfg.seed + seed_offset;
    c.threads = threads;
    return c;
}

void write_certificate(StageContext& ctx, StageOutcome& out,
                       const std::string& fname, const std::string& verdict_key,
                       const CertificateReport& rep) {
    write_text(ctx.dir / fname, rep.to_json().dump(2) + "\n");
    out.artifacts.push_back(fname);
    out.verdicts.emplace_back(verdict_key, rep.verdict);
    add_num(ctx, out.stage, fname, "estimate", rep.estimate);
    add_num(ctx, out.stage, fname, "std_error", rep.std_error);
    add_num(ctx, out.stage, fname, "margin", rep.margin);
    add_row(ctx, out.stage, fname, "verdict", rep.verdict);
}

// Stored CSVs keep at most ~33 time levels so refinement sweeps do not
// explode the artifact size; the first and terminal levels always survive.
std::size_t csv_stride(std::size_t n_levels) {
    return std::max<std::size_t>(1, (n_levels + 32) / 33);
}

void stage_solve(StageContext& ctx, StageOutcome& out, Side side) {
    const ExperimentConfig& cfg = ctx.cfg;
    SolverOptions opts = cfg.solver;
    opts.threads = ctx.threads;
    const SpaceTimeGrid geom = plan_grid(cfg.problem, cfg.grid_lo, cfg.grid_hi,
                                         cfg.grid_nodes, opts, cfg.start_time);
    auto vg = std::make_shared<const ValueGrid>(
        solve_isaacs(cfg.problem, side, geom, opts));
    if (side == Side::upper)
        ctx.upper = vg;
    else
        ctx.lower = vg;

    const std::string fname =
        cfg.name + "." + side_name(side) + ".grid.csv";
    const std::size_t stride = csv_stride(geom.n_levels);
    write_text(ctx.dir / fname, vg->to_csv(stride));
    out.artifacts.push_back(fname);

    // The CSV is level-strided and probes interpolate between nodes, so the
    // numbers quoted in the summary live in a companion read-out sheet.
    ojson j;
    j["kind"] = "grid_probes";
    j["side"] = side_name(side);
    j["levels"] = geom.n_levels;
    j["dt"] = geom.dt;
    j["nodes"] = geom.nodes;
    j["csv_level_stride"] = stride;
    j["probes"] = ojson::array();
    for (const auto& row : cfg.probes) {
        ojson pj;
        pj["t"] = row[0];
        pj["x"] = std::vector<double>(row.begin() + 1, row.end());
        pj["value"] = vg->probe(row);
        j["probes"].push_back(std::move(pj));
    }
    const std::string pname =
        cfg.name + "." + side_name(side) + ".probes.cert.json";
    write_text(ctx.dir / pname, j.dump(2) + "\n");
    out.artifacts.push_back(pname);

    add_num(ctx, out.stage, pname, "levels", static_cast<double>(geom.n_levels));
    add_num(ctx, out.stage, pname, "dt", geom.dt);
    for (const auto& row : cfg.probes)
        add_num(ctx, out.stage, pname, probe_label(row), vg->probe(row));
}

// Feedback pair read off a solved grid, the standard candidate pair for the
// dpp and saddle stages.
StrategyPair grid_pair(const StageContext& ctx,
                       const std::shared_ptr<const ValueGrid>& vg) {
    const ExperimentConfig& cfg = ctx.cfg;
    auto tu = std::make_shared<const FeedbackTable>(
        extract_feedback(*vg, Player::one));
    auto tv = std::make_shared<const FeedbackTable>(
        extract_feedback(*vg, Player::two));
    return StrategyPair{
        feedback_strategy(cfg.problem, Player::one, tu, cfg.feedback_decisions,
                          cfg.start_time),
        feedback_strategy(cfg.problem, Player::two, tv, cfg.feedback_decisions,
                          cfg.start_time)};
}

std::shared_ptr<const ValueGrid> require_grid(const StageContext& ctx,
                                              const char* stage) {
    if (ctx.upper) return ctx.upper;
    if (ctx.lower) return ctx.lower;
    throw PreconditionError(std::string(stage) +
                            " stage needs a solved grid; run solve_upper or "
                            "solve_lower earlier in the pipeline");
}

void stage_values(StageContext& ctx, StageOutcome& out) {
    const ExperimentConfig& cfg = ctx.cfg;
    StrategyFamily uf = random_family(cfg.problem, Player::one, cfg.family_count,
                                      cfg.family_segments, cfg.seed + 11,
                                      cfg.start_time);
    StrategyFamily vf = random_family(cfg.problem, Player::two, cfg.family_count,
                                      cfg.family_segments, cfg.seed + 12,
                                      cfg.start_time);
    for (const auto& vg : {ctx.upper, ctx.lower}) {
        if (!vg) continue;
        StrategyPair pair = grid_pair(ctx, vg);
        uf.members.push_back(std::move(pair.u));
        vf.members.push_back(std::move(pair.v));
    }

    const GameMatrix m =
        upper_lower_values(cfg.problem, uf, vf, cfg.start_time, cfg.start_state,
                           sim_config(cfg, ctx.threads, 0));
    // Both optima are entries of one coupled matrix, so the ordering is an
    // exact property of the artifact, not a banded estimate.
    const std::string verdict = m.lower <= m.upper ? "pass" : "fail";

    ojson j;
    j["kind"] = "value_ordering";
    j["lower_estimate"] = m.lower;
    j["upper_estimate"] = m.upper;
    j["lower_se"] = m.se_at(m.lower_u, m.lower_v);
    j["upper_se"] = m.se_at(m.upper_u, m.upper_v);
    j["gap"] = m.upper - m.lower;
    j["verdict"] = verdict;
    j["matrix"] = m.to_json();

    const std::string fname = cfg.name + ".values.cert.json";
    write_text(ctx.dir / fname, j.dump(2) + "\n");
    out.artifacts.push_back(fname);
    out.verdicts.emplace_back("value_ordering", verdict);
    add_num(ctx, out.stage, fname, "lower_estimate", m.lower);
    add_num(ctx, out.stage, fname, "upper_estimate", m.upper);
    add_num(ctx, out.stage, fname, "gap", m.upper - m.lower);
    add_row(ctx, out.stage, fname, "verdict", verdict);
}

void stage_dpp(StageContext& ctx, StageOutcome& out) {
    const ExperimentConfig& cfg = ctx.cfg;
    auto vg = require_grid(ctx, "dpp");
    FirstExitSpec ball;
    ball.center = cfg.start_state;
    ball.radius = cfg.dpp_radius;
    ball.cap_time = cfg.start_time +
                    cfg.dpp_cap_frac * (cfg.problem.horizon - cfg.start_time);
    const CertificateReport rep = dpp_residual(
        cfg.problem, *vg, grid_pair(ctx, vg), first_exit_rule(ball),
        cfg.start_time, cfg.start_state, sim_config(cfg, ctx.threads, 101),
        cfg.dpp_tolerance);
    write_certificate(ctx, out, cfg.name + ".dpp.cert.json", rep.kind, rep);
}

void stage_saddle(StageContext& ctx, StageOutcome& out) {
    const ExperimentConfig& cfg = ctx.cfg;
    auto vg = require_grid(ctx, "saddle");
    const StrategyFamily u_dev =
        random_family(cfg.problem, Player::one, cfg.saddle_deviations,
                      cfg.saddle_segments, cfg.seed + 13, cfg.start_time);
    const StrategyFamily v_dev =
        random_family(cfg.problem, Player::two, cfg.saddle_deviations,
                      cfg.saddle_segments, cfg.seed + 14, cfg.start_time);
    const CertificateReport rep = check_saddle(
        cfg.problem, grid_pair(ctx, vg), u_dev, v_dev, cfg.start_time,
        cfg.start_state, sim_config(cfg, ctx.threads, 202), cfg.saddle_epsilon);
    write_certificate(ctx, out, cfg.name + ".saddle.cert.json", rep.kind, rep);
}

void stage_certify(StageContext& ctx, StageOutcome& out) {
    const ExperimentConfig& cfg = ctx.cfg;
    const double t1 = cfg.problem.horizon;
    CertifyOptions opts;
    opts.rho = constant_rule(cfg.start_time +
                             cfg.certify_rho_frac * (t1 - cfg.start_time));
    opts.cfg = sim_config(cfg, ctx.threads, 303);
    opts.min_bin = cfg.certify_min_bin;

    const StrategyFamily u_opp =
        random_family(cfg.problem, Player::one, cfg.family_count,
                      cfg.family_segments, cfg.seed + 15, cfg.start_time);
    const StrategyFamily v_opp =
        random_family(cfg.problem, Player::two, cfg.family_count,
                      cfg.family_segments, cfg.seed + 16, cfg.start_time);

    struct Item {
        std::string key;
        SemiSolutionCandidate cand;
        const StrategyFamily* opponents;
        double threshold;
    };
    std::vector<Item> items;
    // The payoff bounds as flat candidates: their read-outs are constant
    // along every path, so these certificates are exact (zero variance).
    items.push_back({"const_super",
                     make_strategy_candidate(
                         CandidateClass::super_upper,
                         GridFunction::constant(cfg.problem.payoff_max),
                         constant_strategy(Player::two, cfg.problem.v_set, 0),
                         cfg.name + "/payoff_max"),
                     &u_opp, 0.0});
    items.push_back({"const_sub",
                     make_strategy_candidate(
                         CandidateClass::sub_lower,
                         GridFunction::constant(cfg.problem.payoff_min),
                         constant_strategy(Player::one, cfg.problem.u_set, 0),
                         cfg.name + "/payoff_min"),
                     &v_opp, 0.0});
    if (ctx.upper)
        items.push_back({"grid_super",
                         candidate_from_grid(cfg.problem, ctx.upper,
                                             cfg.feedback_decisions),
                         &u_opp, cfg.certify_threshold});
    if (ctx.lower)
        items.push_back({"grid_sub",
                         candidate_from_grid(cfg.problem, ctx.lower,
                                             cfg.feedback_decisions),
                         &v_opp, cfg.certify_threshold});

    for (const Item& item : items) {
        CertifyOptions o = opts;
        o.threshold = item.threshold;
        const CertificateReport rep =
            certify(cfg.problem, item.cand, *item.opponents, cfg.start_time,
                    cfg.start_state, o);
        write_certificate(ctx, out,
                          cfg.name + ".certify." + item.key + ".cert.json",
                          "certify." + item.key, rep);
    }
}

void stage_sweep(StageContext& ctx, StageOutcome& out) {
    const ExperimentConfig& cfg = ctx.cfg;
    if (cfg.probes.empty())
        throw PreconditionError(
            "convergence_sweep needs at least one probe point");

    SolverOptions opts = cfg.solver;
    opts.threads = ctx.threads;
    std::vector<std::vector<double>> values;  // per factor, per probe
    std::vector<std::vector<std::size_t>> node_sets;
    for (const std::size_t f : cfg.sweep_factors) {
        std::vector<std::size_t> nodes;
        nodes.reserve(cfg.grid_nodes.size());
        for (const std::size_t n : cfg.grid_nodes) nodes.push_back((n - 1) * f + 1);
        const SpaceTimeGrid geom = plan_grid(cfg.problem, cfg.grid_lo, cfg.grid_hi,
                                             nodes, opts, cfg.start_time);
        const ValueGrid vg = solve_isaacs(cfg.problem, Side::upper, geom, opts);
        std::vector<double> row;
        row.reserve(cfg.probes.size());
        for (const auto& probe : cfg.probes) row.push_back(vg.probe(probe));
        values.push_back(std::move(row));
        node_sets.push_back(std::move(nodes));
    }

    // Sup-distance between consecutive refinements; the sweep passes when
    // the last gap is no larger than the first.
    std::vector<double> diffs;
    for (std::size_t k = 0; k + 1 < values.size(); ++k) {
        double d = 0.0;
        for (std::size_t i = 0; i < cfg.probes.size(); ++i)
            d = std::max(d, std::abs(values[k][i] - values[k + 1][i]));
        diffs.push_back(d);
    }
    const std::string verdict =
        (diffs.size() < 2 || diffs.back() <= diffs.front()) ? "pass" : "fail";

    ojson j;
    j["kind"] = "convergence_sweep";
    j["factors"] = cfg.sweep_factors;
    j["nodes"] = node_sets;
    j["probes"] = cfg.probes;
    j["values"] = values;
    j["diffs"] = diffs;
    j["verdict"] = verdict;

    const std::string fname = cfg.name + ".sweep.cert.json";
    write_text(ctx.dir / fname, j.dump(2) + "\n");
    out.artifacts.push_back(fname);
    out.verdicts.emplace_back("convergence_sweep", verdict);
    for (std::size_t k = 0; k < diffs.size(); ++k)
        add_num(ctx, out.stage, fname,
                "diff(x" + std::to_string(cfg.sweep_factors[k]) + "->x" +
                    std::to_string(cfg.sweep_factors[k + 1]) + ")",
                diffs[k]);
    add_row(ctx, out.stage, fname, "verdict", verdict);
}

void run_stage(StageContext& ctx, StageOutcome& out) {
    if (out.stage == "solve_upper")
        stage_solve(ctx, out, Side::upper);
    else if (out.stage == "solve_lower")
        stage_solve(ctx, out, Side::lower);
    else if (out.stage == "values")
        stage_values(ctx, out);
    else if (out.stage == "dpp")
        stage_dpp(ctx, out);
    else if (out.stage == "saddle")
        stage_saddle(ctx, out);
    else if (out.stage == "certify")
        stage_certify(ctx, out);
    else
        stage_sweep(ctx, out);
}

}  // namespace

// ---- config parsing ----------------------------------------------------------

ExperimentConfig parse_experiment_config(const ojson& doc) {
    if (!doc.is_object())
        throw ConfigError(std::string("config: expected a JSON object, got ") +
                          doc.type_name());
    check_keys(doc, "",
               {"name", "problem", "grid", "mc", "start", "probes", "pipeline",
                "dpp", "saddle", "certify", "families", "sweep"});

    ExperimentConfig cfg;
    cfg.echo = doc;

    // problem: preset reference or inline polynomial spec
    const ojson& prob = as_object(require(doc, "", "problem"), "problem");
    bool have_preset_grid = false;
    if (const ojson* pre = find(prob, "preset")) {
        check_keys(prob, "problem", {"preset"});
        const std::string pname = as_string(*pre, "problem.preset");
        Preset preset;
        try {
            preset = make_preset(pname);
        } catch (const Error&) {
            bad("problem.preset", "unknown preset '" + pname + "'");
        }
        cfg.problem = std::move(preset.problem);
        cfg.problem_source = "preset:" + pname;
        cfg.grid_lo = std::move(preset.grid_lo);
        cfg.grid_hi = std::move(preset.grid_hi);
        cfg.grid_nodes = std::move(preset.grid_nodes);
        cfg.probes = std::move(preset.probes);
        have_preset_grid = true;
    } else {
        cfg.problem = parse_inline_problem(prob, "problem");
        cfg.problem_source = "inline";
    }
    const auto d = static_cast<std::size_t>(cfg.problem.dim_state);

    cfg.name = cfg.problem.name;
    if (const ojson* n = find(doc, "name")) cfg.name = as_string(*n, "name");
    if (cfg.name.empty()) bad("name", "must not be empty");
    if (cfg.name.find('/') != std::string::npos ||
        cfg.name.find('\\') != std::string::npos)
        bad("name", "must not contain path separators");

    // grid geometry and solver knobs
    if (const ojson* g = find(doc, "grid")) {
        const ojson& grid = as_object(*g, "grid");
        check_keys(grid, "grid",
                   {"lo", "hi", "nodes", "cfl_safety", "dt_override", "min_steps",
                    "max_levels", "boundary"});
        if (const ojson* lo = find(grid, "lo")) cfg.grid_lo = as_vector(*lo, "grid.lo", d);
        if (const ojson* hi = find(grid, "hi")) cfg.grid_hi = as_vector(*hi, "grid.hi", d);
        if (const ojson* nodes = find(grid, "nodes")) {
            const ojson& arr = as_array(*nodes, "grid.nodes");
            if (arr.size() != d)
                bad("grid.nodes", "expected " + std::to_string(d) + " entries");
            cfg.grid_nodes.clear();
            for (std::size_t i = 0; i < arr.size(); ++i) {
                const std::size_t n = as_positive(arr[i], elem("grid.nodes", i));
                if (n < 2) bad(elem("grid.nodes", i), "must be >= 2");
                cfg.grid_nodes.push_back(n);
            }
        }
        if (const ojson* s = find(grid, "cfl_safety")) {
            cfg.solver.cfl_safety = as_number(*s, "grid.cfl_safety");
            if (!(cfg.solver.cfl_safety > 0.0 && cfg.solver.cfl_safety <= 1.0))
                bad("grid.cfl_safety", "must lie in (0, 1]");
        }
        if (const ojson* o = find(grid, "dt_override")) {
            const double dt = as_number(*o, "grid.dt_override");
            if (!(dt > 0.0)) bad("grid.dt_override", "must be > 0");
            cfg.solver.dt_override = dt;
        }
        if (const ojson* m = find(grid, "min_steps"))
            cfg.solver.min_steps = as_positive(*m, "grid.min_steps");
        if (const ojson* m = find(grid, "max_levels"))
            cfg.solver.max_levels = as_positive(*m, "grid.max_levels");
        if (const ojson* b = find(grid, "boundary")) {
            const std::string mode = as_string(*b, "grid.boundary");
            if (mode == "clamped")
                cfg.solver.boundary = BoundaryMode::clamped_terminal;
            else if (mode == "extrapolated")
                cfg.solver.boundary = BoundaryMode::extrapolated;
            else
                bad("grid.boundary", "expected \"clamped\" or \"extrapolated\"");
        }
    }
    if (cfg.grid_lo.empty() || cfg.grid_hi.empty() || cfg.grid_nodes.empty()) {
        if (!have_preset_grid)
            bad("grid", "inline problems must supply lo, hi, and nodes");
        bad("grid", "incomplete grid specification");
    }
    for (std::size_t a = 0; a < d; ++a)
        if (!(cfg.grid_lo[a] < cfg.grid_hi[a]))
            bad(elem("grid.lo", a), "lo must be < hi");

    // mc budget
    if (const ojson* m = find(doc, "mc")) {
        const ojson& mc = as_object(*m, "mc");
        check_keys(mc, "mc", {"seed", "batch", "steps"});
        if (const ojson* s = find(mc, "seed")) cfg.seed = as_count(*s, "mc.seed");
        if (const ojson* b = find(mc, "batch"))
            cfg.mc_batch = as_positive(*b, "mc.batch");
        if (const ojson* s = find(mc, "steps"))
            cfg.mc_steps = as_positive(*s, "mc.steps");
    }

    // start point; defaults to the box center at t = 0
    cfg.start_state.assign(d, 0.0);
    for (std::size_t a = 0; a < d; ++a)
        cfg.start_state[a] = 0.5 * (cfg.grid_lo[a] + cfg.grid_hi[a]);
    if (const ojson* st = find(doc, "start")) {
        const ojson& s = as_object(*st, "start");
        check_keys(s, "start", {"time", "state"});
        if (const ojson* t = find(s, "time")) {
            cfg.start_time = as_number(*t, "start.time");
            if (!(cfg.start_time >= 0.0 && cfg.start_time < cfg.problem.horizon))
                bad("start.time", "must lie in [0, horizon)");
        }
        if (const ojson* x = find(s, "state")) {
            cfg.start_state = as_vector(*x, "start.state", d);
            for (std::size_t a = 0; a < d; ++a)
                if (cfg.start_state[a] < cfg.grid_lo[a] ||
                    cfg.start_state[a] > cfg.grid_hi[a])
                    bad(elem("start.state", a), "outside the grid box");
        }
    }

    // probes; preset defaults may be overridden. Every probe must sit in the
    // safe interior: at least 25% of each axis span away from the boundary.
    if (const ojson* pr = find(doc, "probes")) {
        const ojson& arr = as_array(*pr, "probes");
        cfg.probes.clear();
        for (std::size_t i = 0; i < arr.size(); ++i)
            cfg.probes.push_back(as_vector(arr[i], elem("probes", i), 1 + d));
    }
    for (std::size_t i = 0; i < cfg.probes.size(); ++i) {
        const auto& row = cfg.probes[i];
        if (row.size() != 1 + d)
            bad(elem("probes", i),
                "expected " + std::to_string(1 + d) + " entries (t, x)");
        if (row[0] < cfg.start_time || row[0] > cfg.problem.horizon)
            bad(elem("probes", i), "probe time outside [start, horizon]");
        for (std::size_t a = 0; a < d; ++a) {
            const double margin = 0.25 * (cfg.grid_hi[a] - cfg.grid_lo[a]);
            if (row[1 + a] < cfg.grid_lo[a] + margin ||
                row[1 + a] > cfg.grid_hi[a] - margin)
                bad(elem("probes", i),
                    "probe state within 25% of the grid boundary");
        }
    }

    // pipeline
    const ojson& pipe = as_array(require(doc, "", "pipeline"), "pipeline");
    if (pipe.empty()) bad("pipeline", "must list at least one stage");
    for (std::size_t i = 0; i < pipe.size(); ++i) {
        const std::string stage = as_string(pipe[i], elem("pipeline", i));
        bool known = false;
        for (const char* s : kStageNames)
            if (stage == s) {
                known = true;
                break;
            }
        if (!known) bad(elem("pipeline", i), "unknown stage '" + stage + "'");
        cfg.pipeline.push_back(stage);
    }

    // stage knobs
    if (const ojson* dj = find(doc, "dpp")) {
        const ojson& o = as_object(*dj, "dpp");
        check_keys(o, "dpp", {"radius", "cap_frac", "tolerance"});
        if (const ojson* r = find(o, "radius")) {
            cfg.dpp_radius = as_number(*r, "dpp.radius");
            if (!(cfg.dpp_radius > 0.0)) bad("dpp.radius", "must be > 0");
        }
        if (const ojson* f = find(o, "cap_frac")) {
            cfg.dpp_cap_frac = as_number(*f, "dpp.cap_frac");
            if (!(cfg.dpp_cap_frac > 0.0 && cfg.dpp_cap_frac <= 1.0))
                bad("dpp.cap_frac", "must lie in (0, 1]");
        }
        if (const ojson* t = find(o, "tolerance")) {
            cfg.dpp_tolerance = as_number(*t, "dpp.tolerance");
            if (!(cfg.dpp_tolerance > 0.0)) bad("dpp.tolerance", "must be > 0");
        }
    }
    if (const ojson* sj = find(doc, "saddle")) {
        const ojson& o = as_object(*sj, "saddle");
        check_keys(o, "saddle", {"deviations", "segments", "epsilon"});
        if (const ojson* n = find(o, "deviations"))
            cfg.saddle_deviations = as_positive(*n, "saddle.deviations");
        if (const ojson* n = find(o, "segments"))
            cfg.saddle_segments = as_positive(*n, "saddle.segments");
        if (const ojson* e = find(o, "epsilon")) {
            cfg.saddle_epsilon = as_number(*e, "saddle.epsilon");
            if (!(cfg.saddle_epsilon > 0.0)) bad("saddle.epsilon", "must be > 0");
        }
    }
    if (const ojson* cj = find(doc, "certify")) {
        const ojson& o = as_object(*cj, "certify");
        check_keys(o, "certify", {"threshold", "rho_frac", "min_bin"});
        if (const ojson* t = find(o, "threshold")) {
            cfg.certify_threshold = as_number(*t, "certify.threshold");
            if (cfg.certify_threshold < 0.0) bad("certify.threshold", "must be >= 0");
        }
        if (const ojson* f = find(o, "rho_frac")) {
            cfg.certify_rho_frac = as_number(*f, "certify.rho_frac");
            if (!(cfg.certify_rho_frac > 0.0 && cfg.certify_rho_frac < 1.0))
                bad("certify.rho_frac", "must lie in (0, 1)");
        }
        if (const ojson* n = find(o, "min_bin"))
            cfg.certify_min_bin = as_positive(*n, "certify.min_bin");
    }
    if (const ojson* fj = find(doc, "families")) {
        const ojson& o = as_object(*fj, "families");
        check_keys(o, "families", {"count", "segments", "decisions"});
        if (const ojson* n = find(o, "count"))
            cfg.family_count = as_positive(*n, "families.count");
        if (const ojson* n = find(o, "segments"))
            cfg.family_segments = as_positive(*n, "families.segments");
        if (const ojson* n = find(o, "decisions"))
            cfg.feedback_decisions = as_positive(*n, "families.decisions");
    }
    if (const ojson* wj = find(doc, "sweep")) {
        const ojson& o = as_object(*wj, "sweep");
        check_keys(o, "sweep", {"factors"});
        if (const ojson* f = find(o, "factors")) {
            const ojson& arr = as_array(*f, "sweep.factors");
            if (arr.empty()) bad("sweep.factors", "must list at least one factor");
            cfg.sweep_factors.clear();
            for (std::size_t i = 0; i < arr.size(); ++i)
                cfg.sweep_factors.push_back(
                    as_positive(arr[i], elem("sweep.factors", i)));
        }
    }

    return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot open config file: " + path);
    ojson doc;
    try {
        doc = ojson::parse(f);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    return parse_experiment_config(doc);
}

// ---- result plumbing -----------------------------------------------------------

bool ExperimentResult::any_error() const {
    for (const StageOutcome& s : stages)
        if (s.status != "ok") return true;
    return false;
}

bool ExperimentResult::any_fail() const {
    for (const StageOutcome& s : stages)
        for (const auto& kv : s.verdicts)
            if (kv.second == "fail") return true;
    return false;
}

bool ExperimentResult::any_inconclusive() const {
    for (const StageOutcome& s : stages)
        for (const auto& kv : s.verdicts)
            if (kv.second == "inconclusive") return true;
    return false;
}

int ExperimentResult::exit_code(bool strict) const {
    if (any_error() || any_fail()) return 1;
    if (strict && any_inconclusive()) return 1;
    return 0;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                const std::string& out_dir, int threads) {
    ExperimentResult res;
    res.out_dir = out_dir;
    std::filesystem::create_directories(out_dir);

    StageContext ctx{cfg, std::filesystem::path(out_dir), std::max(threads, 1),
                     nullptr, nullptr, {}};

    for (const std::string& stage : cfg.pipeline) {
        StageOutcome out;
        out.stage = stage;
        out.status = "ok";
        const auto t_begin = std::chrono::steady_clock::now();
        try {
            run_stage(ctx, out);
        } catch (const std::exception& e) {
            out.status = "error";
            out.error = e.what();
        }
        out.wall_ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - t_begin)
                          .count();
        const bool halt = out.status != "ok";
        res.stages.push_back(std::move(out));
        if (halt) break;
    }

    ojson man;
    man["tool"] = "sdgame";
    man["version"] = kToolVersion;
    man["name"] = cfg.name;
    man["problem"] = cfg.problem_source;
    man["seed"] = cfg.seed;
    man["threads"] = ctx.threads;
    man["config"] = cfg.echo;
    man["stages"] = ojson::array();
    for (const StageOutcome& s : res.stages) {
        ojson sj;
        sj["stage"] = s.stage;
        sj["status"] = s.status;
        if (!s.error.empty()) sj["error"] = s.error;
        sj["wall_ms"] = s.wall_ms;  // the one nondeterministic field
        sj["artifacts"] = s.artifacts;
        ojson verdicts = ojson::array();
        for (const auto& kv : s.verdicts) {
            ojson v;
            v["kind"] = kv.first;
            v["verdict"] = kv.second;
            verdicts.push_back(std::move(v));
        }
        sj["verdicts"] = std::move(verdicts);
        man["stages"].push_back(std::move(sj));
    }
    write_text(ctx.dir / "manifest.json", man.dump(2) + "\n");

    std::string csv = "stage,artifact,metric,value\n";
    for (const auto& row : ctx.summary)
        csv += row[0] + "," + row[1] + "," + row[2] + "," + row[3] + "\n";
    write_text(ctx.dir / "summary.csv", csv);

    return res;
}

}  // namespace sdg
