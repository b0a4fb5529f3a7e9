// End-to-end acceptance checks, one criterion per entry, each printing a
// single pass/fail line. Exit status is the number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "sdg/dynamics.hpp"
#include "sdg/errors.hpp"
#include "sdg/experiment.hpp"
#include "sdg/grid_function.hpp"
#include "sdg/mc.hpp"
#include "sdg/perron.hpp"
#include "sdg/presets.hpp"
#include "sdg/solver.hpp"
#include "sdg/stopping.hpp"

using namespace sdg;
namespace fs = std::filesystem;

namespace {

struct Checker {
    bool ok = true;
    std::vector<std::string> notes;

    void require(bool cond, const std::string& what) {
        if (!cond) {
            ok = false;
            notes.push_back(what);
        }
    }
};

std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

// Largest value of exp(-y^2) with y within reach (T-t)/2 of x: the optimal
// y is the reachable point closest to the origin.
double envelope_value(double t, double x) {
    const double r = 0.5 * (1.0 - t);
    double y = 0.0;
    if (x > r)
        y = x - r;
    else if (x < -r)
        y = x + r;
    return std::exp(-y * y);
}

ValueGrid solve_preset(const Preset& p, Side side, std::size_t nodes) {
    const std::vector<std::size_t> n{nodes};
    SolverOptions opts;
    const SpaceTimeGrid geom =
        plan_grid(p.problem, p.grid_lo, p.grid_hi, n, opts);
    return solve_isaacs(p.problem, side, geom, opts);
}

SimulationConfig sim(std::size_t batch, std::size_t steps, std::uint64_t seed) {
    SimulationConfig cfg;
    cfg.batch_size = batch;
    cfg.n_steps = steps;
    cfg.rng_seed = seed;
    return cfg;
}

std::string read_bytes(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream out;
    out << f.rdbuf();
    return out.str();
}

// ---- criteria ------------------------------------------------------------

void front_envelope_oracle(Checker& ck) {
    const Preset p = make_preset("hopf_lax_asym");
    const std::vector<std::vector<double>> probes{
        {0.0, 0.0}, {0.0, 1.0}, {0.5, -0.5}};

    auto worst_error = [&](std::size_t nodes) {
        const ValueGrid vg = solve_preset(p, Side::upper, nodes);
        double err = 0.0;
        for (const auto& q : probes)
            err = std::max(err, std::abs(vg.probe(q) - envelope_value(q[0], q[1])));
        return err;
    };

    const double coarse = worst_error(401);
    ck.require(coarse <= 2e-2,
               "401-node probe error " + num(coarse) + " exceeds 2e-2");
    const double fine = worst_error(801);
    ck.require(fine < coarse, "2x refinement did not reduce the error (" +
                                  num(coarse) + " -> " + num(fine) + ")");
}

void heat_kernel_value(Checker& ck) {
    const Preset p = make_preset("heat");
    const ValueGrid vg = solve_preset(p, Side::upper, 401);
    const std::vector<double> origin{0.0, 0.0};
    const double want = 1.0 / std::sqrt(5.0);  // gaussian smoothing of exp(-x^2)
    const double got = vg.probe(origin);
    ck.require(std::abs(got - want) <= 5e-3,
               "value at the origin " + num(got) + " vs oracle " + num(want));
}

void hamiltonian_envelopes_and_gap(Checker& ck) {
    const Preset p = make_preset("non_isaacs");
    for (const double slope : {-3.0, -1.0, 0.0, 1.0, 3.0}) {
        const HamiltonianQuery q(0.0, {0.0}, {slope}, {0.0});
        const double lo = hamiltonian(p.problem, Side::lower, q).value;
        const double hi = hamiltonian(p.problem, Side::upper, q).value;
        ck.require(lo == -std::abs(slope),
                   "lower hamiltonian at slope " + num(slope) + " is " + num(lo));
        ck.require(hi == std::abs(slope),
                   "upper hamiltonian at slope " + num(slope) + " is " + num(hi));
    }

    const std::vector<double> origin{0.0, 0.0};
    const double th = std::tanh(1.0);
    const double up = solve_preset(p, Side::upper, 401).probe(origin);
    const double dn = solve_preset(p, Side::lower, 401).probe(origin);
    ck.require(std::abs(up - th) <= 2e-2,
               "upper value " + num(up) + " vs " + num(th));
    ck.require(std::abs(dn + th) <= 2e-2,
               "lower value " + num(dn) + " vs " + num(-th));
    ck.require(dn < up, "minimax gap did not open");
}

void coupled_ordering(Checker& ck) {
    for (const std::string& name : preset_names()) {
        const Preset p = make_preset(name);
        std::vector<double> x0(p.problem.dim_state);
        for (std::size_t a = 0; a < x0.size(); ++a)
            x0[a] = 0.5 * (p.grid_lo[a] + p.grid_hi[a]);
        for (std::uint64_t draw = 0; draw < 20; ++draw) {
            const StrategyFamily uf = random_family(p.problem, Player::one, 4, 2,
                                                    1000 + 2 * draw);
            const StrategyFamily vf = random_family(p.problem, Player::two, 4, 2,
                                                    1001 + 2 * draw);
            const GameMatrix m = upper_lower_values(p.problem, uf, vf, 0.0, x0,
                                                    sim(200, 30, 77 + draw));
            ck.require(m.lower <= m.upper,
                       name + " draw " + std::to_string(draw) + ": lower " +
                           num(m.lower) + " > upper " + num(m.upper));
        }
    }
}

void sandwich_chain(Checker& ck) {
    for (const std::string& name : {std::string("hopf_lax_asym"),
                                    std::string("non_isaacs")}) {
        const Preset p = make_preset(name);
        const GameProblem& prob = p.problem;
        const std::vector<double> x0{0.0};

        const ValueGrid upper = solve_preset(p, Side::upper, 401);
        const ValueGrid lower = solve_preset(p, Side::lower, 401);
        auto ug = std::make_shared<const ValueGrid>(upper);
        auto lg = std::make_shared<const ValueGrid>(lower);

        // families seeded with both PDE feedback strategies
        StrategyFamily uf = random_family(prob, Player::one, 6, 3, 501);
        StrategyFamily vf = random_family(prob, Player::two, 6, 3, 502);
        for (const auto& vg : {ug, lg}) {
            auto tu = std::make_shared<const FeedbackTable>(
                extract_feedback(*vg, Player::one));
            auto tv = std::make_shared<const FeedbackTable>(
                extract_feedback(*vg, Player::two));
            uf.members.push_back(feedback_strategy(prob, Player::one, tu, 40));
            vf.members.push_back(feedback_strategy(prob, Player::two, tv, 40));
        }
        const GameMatrix m =
            upper_lower_values(prob, uf, vf, 0.0, x0, sim(2000, 80, 31));

        // payoff bounds hold for every single estimate, with zero tolerance
        for (double mean : m.mean) {
            ck.require(mean >= prob.payoff_min && mean <= prob.payoff_max,
                       name + ": estimate " + num(mean) + " escapes [" +
                           num(prob.payoff_min) + ", " + num(prob.payoff_max) + "]");
        }

        // and the flat candidates at those bounds certify exactly
        CertifyOptions copts;
        copts.rho = constant_rule(0.5);
        copts.cfg = sim(400, 60, 32);
        copts.min_bin = 100;
        const auto cap = make_strategy_candidate(
            CandidateClass::super_upper, GridFunction::constant(prob.payoff_max),
            constant_strategy(Player::two, prob.v_set, 0), name + "/cap");
        const auto floor_cand = make_strategy_candidate(
            CandidateClass::sub_lower, GridFunction::constant(prob.payoff_min),
            constant_strategy(Player::one, prob.u_set, 0), name + "/floor");
        const auto rep_cap =
            certify(prob, cap, random_family(prob, Player::one, 4, 2, 503), 0.0,
                    x0, copts);
        const auto rep_floor =
            certify(prob, floor_cand, random_family(prob, Player::two, 4, 2, 504),
                    0.0, x0, copts);
        ck.require(rep_cap.verdict == "pass" && rep_cap.std_error == 0.0,
                   name + ": payoff cap certificate " + rep_cap.verdict);
        ck.require(rep_floor.verdict == "pass" && rep_floor.std_error == 0.0,
                   name + ": payoff floor certificate " + rep_floor.verdict);

        // solved grids bracket the family optima within grid error + noise
        const double slack = 3e-2;
        const double u0 = upper.probe(std::vector<double>{0.0, 0.0});
        const double l0 = lower.probe(std::vector<double>{0.0, 0.0});
        const double up_se = m.se_at(m.upper_u, m.upper_v);
        const double lo_se = m.se_at(m.lower_u, m.lower_v);
        ck.require(m.upper <= u0 + slack + 3.0 * up_se,
                   name + ": best guaranteed cap " + num(m.upper) +
                       " above upper grid " + num(u0));
        ck.require(m.lower >= l0 - slack - 3.0 * lo_se,
                   name + ": best guaranteed floor " + num(m.lower) +
                       " below lower grid " + num(l0));
    }
}

void first_exit_readout_residual(Checker& ck) {
    const Preset p = make_preset("hopf_lax_asym");
    const ValueGrid vg = solve_preset(p, Side::upper, 401);
    auto tu = std::make_shared<const FeedbackTable>(
        extract_feedback(vg, Player::one));
    auto tv = std::make_shared<const FeedbackTable>(
        extract_feedback(vg, Player::two));
    const StrategyPair pair{feedback_strategy(p.problem, Player::one, tu, 20),
                            feedback_strategy(p.problem, Player::two, tv, 20)};
    FirstExitSpec ball;
    ball.center = {0.0};
    ball.radius = 0.5;
    ball.cap_time = 0.5;
    const std::vector<double> x0{0.0};
    const CertificateReport rep =
        dpp_residual(p.problem, vg, pair, first_exit_rule(ball), 0.0, x0,
                     sim(20000, 100, 41), 3e-2);
    ck.require(std::abs(rep.estimate) <= 3e-2 + 3.0 * rep.std_error,
               "residual " + num(rep.estimate) + " (se " + num(rep.std_error) +
                   ") exceeds 3e-2 + 3 se");
    ck.require(rep.verdict != "fail", "residual certificate " + rep.verdict);
}

void feedback_pair_defeats_deviations(Checker& ck) {
    const Preset p = make_preset("hopf_lax_asym");
    const ValueGrid vg = solve_preset(p, Side::upper, 401);
    auto tu = std::make_shared<const FeedbackTable>(
        extract_feedback(vg, Player::one));
    auto tv = std::make_shared<const FeedbackTable>(
        extract_feedback(vg, Player::two));
    const StrategyPair pair{feedback_strategy(p.problem, Player::one, tu, 20),
                            feedback_strategy(p.problem, Player::two, tv, 20)};
    const StrategyFamily u_dev = random_family(p.problem, Player::one, 50, 3, 61);
    const StrategyFamily v_dev = random_family(p.problem, Player::two, 50, 3, 62);
    const std::vector<double> x0{0.0};
    const CertificateReport rep = check_saddle(p.problem, pair, u_dev, v_dev, 0.0,
                                               x0, sim(4000, 100, 63), 3e-2);
    ck.require(rep.estimate <= 3e-2 + 3.0 * rep.std_error,
               "best deviation gain " + num(rep.estimate) + " (se " +
                   num(rep.std_error) + ") exceeds 3e-2 + 3 se");
    ck.require(rep.verdict != "fail", "saddle certificate " + rep.verdict);
}

void certificates_restart_combine_bump(Checker& ck) {
    const Preset p = make_preset("hopf_lax_asym");
    const GameProblem& prob = p.problem;
    const std::vector<double> x0{0.0};
    const StrategyFamily u_opp = random_family(prob, Player::one, 4, 2, 71);
    const StrategyFamily v_opp = random_family(prob, Player::two, 4, 2, 72);

    // flat candidates certify with zero variance
    const auto cap = make_strategy_candidate(
        CandidateClass::super_upper, GridFunction::constant(prob.payoff_max),
        constant_strategy(Player::two, prob.v_set, 5), "cap");
    CertifyOptions copts;
    copts.rho = constant_rule(0.5);
    copts.cfg = sim(400, 60, 73);
    copts.min_bin = 100;
    const auto rep_cap = certify(prob, cap, u_opp, 0.0, x0, copts);
    ck.require(rep_cap.verdict == "pass" && rep_cap.std_error == 0.0 &&
                   rep_cap.margin == 0.0,
               "flat candidate certificate " + rep_cap.verdict + ", se " +
                   num(rep_cap.std_error));

    // solved grid with its recorded feedback witness, several read-out specs
    auto ug = std::make_shared<const ValueGrid>(solve_preset(p, Side::upper, 401));
    const auto grid_cand = candidate_from_grid(prob, ug, 20);
    FirstExitSpec ball;
    ball.center = {0.0};
    ball.radius = 0.3;
    ball.cap_time = 0.6;
    const std::vector<std::pair<RulePtr, RulePtr>> readouts{
        {constant_rule(0.3), constant_rule(0.7)},
        {constant_rule(0.5), nullptr},
        {first_exit_rule(ball), nullptr}};
    for (std::size_t i = 0; i < readouts.size(); ++i) {
        CertifyOptions o;
        o.rho = readouts[i].first;
        o.tau = readouts[i].second;
        o.cfg = sim(500, 100, 74 + i);
        o.min_bin = 100;
        o.threshold = 3e-2;
        const auto rep = certify(prob, grid_cand, u_opp, 0.0, x0, o);
        ck.require(rep.verdict != "fail",
                   "grid candidate read-out " + std::to_string(i) + " " +
                       rep.verdict + " (margin " + num(rep.margin) + ")");
    }

    // lattice minimum of two certified candidates certifies again
    const auto combined = lattice_combine(grid_cand, cap);
    {
        CertifyOptions o;
        o.rho = constant_rule(0.4);
        o.cfg = sim(500, 100, 78);
        o.min_bin = 100;
        o.threshold = 3e-2;
        const auto rep = certify(prob, combined, u_opp, 0.0, x0, o);
        ck.require(rep.verdict != "fail",
                   "combined candidate " + rep.verdict + " (margin " +
                       num(rep.margin) + ")");
    }

    // locally bumped candidates keep certifying
    {
        const TestFunction phi = quadratic_test(1.2, -0.3, 0.5, {0.25}, {0.02});
        BumpSpec spec;
        spec.center_t = 0.5;
        spec.center_x = {0.25};
        spec.radius_t = 0.3;
        spec.radius_x = 0.5;
        spec.delta = 0.01;
        spec.eta = 0.04;
        spec.gap = 0.1;
        spec.witness_action = 5;  // v = 0
        const auto bumped = bump_super(prob, cap, phi, spec);
        CertifyOptions o = copts;
        o.cfg = sim(400, 60, 79);
        const auto rep = certify(prob, bumped, u_opp, 0.0, x0, o);
        ck.require(rep.verdict == "pass",
                   "bumped upper candidate " + rep.verdict);
    }
    {
        // responder mirrors the opponent so the drift cancels exactly
        std::vector<std::size_t> mirror(prob.v_set.size());
        for (std::size_t k = 0; k < mirror.size(); ++k) mirror[k] = 15 - k;
        const auto floor_cand = make_response_candidate(
            CandidateClass::sub_upper, prob, GridFunction::constant(0.0), mirror,
            "floor_response");
        const TestFunction phi = quadratic_test(-0.2, 0.3, 0.5, {-0.5}, {-0.02});
        BumpSpec spec;
        spec.center_t = 0.5;
        spec.center_x = {-0.5};
        spec.radius_t = 0.3;
        spec.radius_x = 0.5;
        spec.delta = 0.01;
        spec.eta = 0.04;
        spec.gap = 0.1;
        spec.response_table = mirror;
        const auto bumped = bump_sub(prob, floor_cand, phi, spec);
        CertifyOptions o = copts;
        o.cfg = sim(400, 60, 80);
        const auto rep = certify(prob, bumped, v_opp, 0.0, x0, o);
        ck.require(rep.verdict == "pass",
                   "bumped lower candidate " + rep.verdict);
    }
}

void deterministic_artifacts(Checker& ck) {
    const char* text =
        R"({"problem": {"preset": "hopf_lax_asym"},
            "grid": {"nodes": [81]},
            "mc": {"seed": 5, "batch": 400, "steps": 40},
            "probes": [[0.0, 0.0], [0.0, 1.0]],
            "families": {"count": 3, "segments": 2, "decisions": 10},
            "saddle": {"deviations": 5, "segments": 2},
            "certify": {"min_bin": 40},
            "sweep": {"factors": [1, 2]},
            "pipeline": ["solve_upper", "solve_lower", "values", "dpp",
                         "saddle", "certify", "convergence_sweep"]})";
    const ExperimentConfig cfg =
        parse_experiment_config(nlohmann::ordered_json::parse(text));

    const fs::path base = fs::temp_directory_path();
    const fs::path a = base / "sdg_acc_det_a";
    const fs::path b = base / "sdg_acc_det_b";
    const fs::path c = base / "sdg_acc_det_c";
    for (const auto& d : {a, b, c}) fs::remove_all(d);

    const ExperimentResult ra = run_experiment(cfg, a.string(), 1);
    const ExperimentResult rb = run_experiment(cfg, b.string(), 4);
    const ExperimentResult rc = run_experiment(cfg, c.string(), 1);
    ck.require(!ra.any_error() && !rb.any_error() && !rc.any_error(),
               "a pipeline stage errored");

    std::size_t compared = 0;
    for (const auto& entry : fs::directory_iterator(a)) {
        const std::string leaf = entry.path().filename().string();
        if (leaf == "manifest.json") continue;  // wall times differ
        const std::string bytes = read_bytes(entry.path());
        ck.require(bytes == read_bytes(b / leaf), leaf + " differs across threads");
        ck.require(bytes == read_bytes(c / leaf), leaf + " differs across runs");
        ++compared;
    }
    ck.require(compared >= 10,
               "only " + std::to_string(compared) + " artifacts compared");
}

void comparison_and_constants(Checker& ck) {
    std::mt19937_64 rng(20260817);
    std::uniform_real_distribution<double> amp(-0.8, 0.8);
    std::uniform_real_distribution<double> freq(0.3, 2.0);
    std::uniform_real_distribution<double> phase(0.0, 6.28);
    std::uniform_real_distribution<double> lift(0.0, 0.8);
    std::uniform_real_distribution<double> center(-1.0, 1.0);

    auto make_problem = [](PayoffFn g, double bound, double vol) {
        GameProblem prob;
        prob.name = "cmp";
        prob.u_set = ControlSet::uniform("U", -1.0, 1.0, 5);
        prob.v_set = ControlSet::uniform("V", -0.5, 0.5, 3);
        prob.drift = [](double, std::span<const double>, std::span<const double> u,
                        std::span<const double> v, std::span<double> out) {
            out[0] = u[0] + v[0];
        };
        prob.diffusion = [vol](double, std::span<const double>,
                               std::span<const double>, std::span<const double>,
                               std::span<double> out) { out[0] = vol; };
        prob.payoff = std::move(g);
        prob.payoff_min = -bound;
        prob.payoff_max = bound;
        return prob;
    };
    const std::vector<double> lo{-3.0}, hi{3.0};
    const std::vector<std::size_t> nodes{101};

    for (int k = 0; k < 10; ++k) {
        const double a0 = amp(rng), a1 = amp(rng), a2 = amp(rng);
        const double b1 = freq(rng), b2 = freq(rng), c1 = phase(rng);
        const double h = lift(rng), m = center(rng);
        auto g1 = [=](std::span<const double> x) {
            return a0 + a1 * std::sin(b1 * x[0] + c1) + a2 * std::cos(b2 * x[0]);
        };
        auto g2 = [=](std::span<const double> x) {
            return g1(x) + h * std::exp(-(x[0] - m) * (x[0] - m));
        };
        const double bound = std::abs(a0) + std::abs(a1) + std::abs(a2) + h + 1.0;
        const double vol = (k % 2 == 0) ? 0.0 : 0.4;
        const GameProblem p1 = make_problem(g1, bound, vol);
        const GameProblem p2 = make_problem(g2, bound, vol);

        SolverOptions opts;
        const SpaceTimeGrid geom = plan_grid(p1, lo, hi, nodes, opts);
        const ValueGrid v1 = solve_isaacs(p1, Side::upper, geom, opts);
        const ValueGrid v2 = solve_isaacs(p2, Side::upper, geom, opts);
        bool ordered = true;
        for (std::size_t level = 0; level < geom.n_levels && ordered; ++level)
            for (std::size_t node = 0; node < geom.node_count; ++node)
                if (v1.value(level, node) > v2.value(level, node)) {
                    ordered = false;
                    break;
                }
        ck.require(ordered, "pair " + std::to_string(k) +
                                ": ordered payoffs produced unordered values");
    }

    // flat terminal data stays flat through the sweep
    const GameProblem flat = make_problem(
        [](std::span<const double>) { return 0.7; }, 2.0, 0.4);
    SolverOptions opts;
    const SpaceTimeGrid geom = plan_grid(flat, lo, hi, nodes, opts);
    const ValueGrid vg = solve_isaacs(flat, Side::upper, geom, opts);
    double drift = 0.0;
    for (std::size_t level = 0; level < geom.n_levels; ++level)
        for (std::size_t node = 0; node < geom.node_count; ++node)
            drift = std::max(drift, std::abs(vg.value(level, node) - 0.7));
    ck.require(drift <= 1e-9, "flat solution drifted by " + num(drift));
}

struct Criterion {
    const char* name;
    double time_limit_s;  // 0 = untimed
    std::function<void(Checker&)> body;
};

}  // namespace

int main() {
    const std::vector<Criterion> criteria{
        {"front envelope oracle on the asymmetric drift game", 10.0,
         front_envelope_oracle},
        {"heat kernel value at the origin", 5.0, heat_kernel_value},
        {"hamiltonian envelopes and the minimax gap", 0.0,
         hamiltonian_envelopes_and_gap},
        {"coupled estimates keep the lower value below the upper", 0.0,
         coupled_ordering},
        {"payoff bounds and solved grids sandwich the game values", 0.0,
         sandwich_chain},
        {"martingale residual at a first-exit read-out", 60.0,
         first_exit_readout_residual},
        {"feedback pair defeats random deviations", 120.0,
         feedback_pair_defeats_deviations},
        {"certificates survive restart, combination, and bumps", 0.0,
         certificates_restart_combine_bump},
        {"byte-identical artifacts across runs and thread counts", 0.0,
         deterministic_artifacts},
        {"monotone comparison and flat-data preservation", 0.0,
         comparison_and_constants},
    };

    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const Criterion& c = criteria[i];
        Checker ck;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            c.body(ck);
        } catch (const std::exception& e) {
            ck.require(false, std::string("exception: ") + e.what());
        }
        const double secs = std::chrono::duration<double>(
                                std::chrono::steady_clock::now() - t0)
                                .count();
        if (c.time_limit_s > 0.0)
            ck.require(secs < c.time_limit_s,
                       "took " + num(secs) + " s, limit " + num(c.time_limit_s));
        std::printf("[%2zu/%zu] %-56s %s (%.1f s)\n", i + 1, criteria.size(),
                    c.name, ck.ok ? "pass" : "FAIL", secs);
        for (const std::string& note : ck.notes)
            std::printf("        - %s\n", note.c_str());
        if (!ck.ok) ++failures;
    }
    std::printf("%zu/%zu criteria passed\n", criteria.size() - failures,
                criteria.size());
    return failures;
}
