#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>
#include <memory>
#include <vector>

#include "sdg/errors.hpp"
#include "sdg/mc.hpp"
#include "sdg/perron.hpp"
#include "sdg/presets.hpp"
#include "sdg/sde.hpp"
#include "sdg/solver.hpp"

using namespace sdg;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// E[exp(-X_T^2)] for dX = sqrt(2) dW started at (t, x), horizon 1.
double heat_value(double t, double x) {
    const double s = 1.0 + 4.0 * (1.0 - t);
    return std::exp(-x * x / s) / std::sqrt(s);
}

SamplePath ramp_path() {
    SamplePath p;
    p.dim = 1;
    p.dim_noise = 0;
    for (int i = 0; i <= 10; ++i) {
        p.times.push_back(0.1 * i);
        p.states.push_back(0.05 * i);
    }
    return p;
}

ElementaryStrategy hold_then(Player pl, const ControlSet& set, std::size_t first,
                             double until, std::size_t second) {
    std::vector<StrategySegment> segs;
    segs.push_back({constant_rule(until), constant_selector(first)});
    segs.push_back({constant_rule(kInf), constant_selector(second)});
    return ElementaryStrategy(pl, set, constant_rule(-kInf), std::move(segs),
                              "hold_then");
}

double state_at(const SamplePath& p, double t) {
    const PathView full(p);
    std::size_t k = full.first_index_at_or_after(t);
    if (k >= p.size()) k = p.size() - 1;
    return p.state(k)[0];
}

}  // namespace

TEST_CASE("grid function wrappers evaluate, label, and combine") {
    const std::vector<double> x{0.5};

    auto c = GridFunction::constant(2.5);
    CHECK(c(0.3, x) == 2.5);
    CHECK(!c.empty());

    auto f = GridFunction::from_callable(
        [](double t, std::span<const double> y) { return t + y[0]; }, "affine");
    CHECK(f(0.25, x) == doctest::Approx(0.75));
    CHECK(f.label() == "affine");

    auto mn = GridFunction::combine_min(c, f);
    auto mx = GridFunction::combine_max(c, f);
    CHECK(mn(0.25, x) == doctest::Approx(0.75));
    CHECK(mx(0.25, x) == 2.5);
    CHECK(mn.label() == "min[const 2.5, affine]");

    GridFunction empty;
    CHECK(empty.empty());
    auto eval_empty = [&] { return empty(0.0, x); };
    CHECK_THROWS_AS(eval_empty(), ConfigError);
    auto combine_empty = [&] { return GridFunction::combine_min(empty, c); };
    CHECK_THROWS_AS(combine_empty(), ConfigError);
}

TEST_CASE("restart clips the segment rules at the new start") {
    const auto set = ControlSet::uniform("U", -1.0, 1.0, 5);
    const auto s = hold_then(Player::one, set, 0, 0.4, 2);
    const auto p = ramp_path();

    CHECK(action_index_at(s, p, 0.2) == 0);
    CHECK(action_index_at(s, p, 0.7) == 2);

    const auto rs = restart_strategy(s, constant_rule(0.6));
    CHECK(rs.player() == Player::one);
    CHECK(action_index_at(rs, p, 0.7) == 2);
    CHECK(action_index_at(rs, p, 1.0) == 2);
    // before the new start there is no action to ask for
    CHECK_THROWS_AS(action_index_at(rs, p, 0.5), StrategyError);

    auto null_start = [&] { return restart_strategy(s, nullptr); };
    CHECK_THROWS_AS(null_start(), ConfigError);
}

TEST_CASE("response strategy shadows the opponent through the table") {
    const auto pre = make_preset("non_isaacs");
    const auto& prob = pre.problem;

    // v holds index 0 until t=0.5, then index 1; the response flips it
    const auto opp = hold_then(Player::two, prob.v_set, 0, 0.5, 1);
    const std::vector<std::size_t> flip{1, 0};
    const auto resp = response_strategy(prob, opp, flip, nullptr);

    CHECK(resp.player() == Player::one);
    const auto p = ramp_path();
    CHECK(action_index_at(resp, p, 0.3) == 1);
    CHECK(action_index_at(resp, p, 0.8) == 0);

    // u*v = (+1)(-1) then (-1)(+1): drift -1 on both halves
    SimulationConfig cfg;
    cfg.n_steps = 100;
    const std::vector<double> x0{0.0};
    const SamplePath path = simulate(prob, {resp, opp}, 0.0, x0, cfg);
    CHECK(path.states.back() == doctest::Approx(-1.0).epsilon(1e-9));

    const std::vector<std::size_t> short_table{0};
    auto wrong_size = [&] { return response_strategy(prob, opp, short_table, nullptr); };
    CHECK_THROWS_AS(wrong_size(), ConfigError);
    const std::vector<std::size_t> oob{5, 0};
    auto out_of_range = [&] { return response_strategy(prob, opp, oob, nullptr); };
    CHECK_THROWS_AS(out_of_range(), ConfigError);
}

TEST_CASE("candidate classes map to the right players and factories") {
    CHECK(is_super(CandidateClass::super_upper));
    CHECK(is_super(CandidateClass::super_lower));
    CHECK(!is_super(CandidateClass::sub_upper));
    CHECK(!is_super(CandidateClass::sub_lower));
    CHECK(witness_player(CandidateClass::super_upper) == Player::two);
    CHECK(witness_player(CandidateClass::sub_lower) == Player::one);
    CHECK(opponent_player(CandidateClass::super_upper) == Player::one);
    CHECK(opponent_player(CandidateClass::sub_upper) == Player::two);
    CHECK(std::string(candidate_class_name(CandidateClass::sub_upper))
          == "sub_upper");

    const auto pre = make_preset("cancel");
    const auto& prob = pre.problem;
    const auto one_v = constant_strategy(Player::two, prob.v_set, 10);
    const auto one_u = constant_strategy(Player::one, prob.u_set, 10);

    auto wrong_class = [&] {
        return make_strategy_candidate(CandidateClass::sub_upper,
                                       GridFunction::constant(1.0), one_u, "x");
    };
    CHECK_THROWS_AS(wrong_class(), ConfigError);
    auto wrong_player = [&] {
        return make_strategy_candidate(CandidateClass::super_upper,
                                       GridFunction::constant(1.0), one_u, "x");
    };
    CHECK_THROWS_AS(wrong_player(), ConfigError);
    auto response_class = [&] {
        return make_response_candidate(CandidateClass::super_upper, prob,
                                       GridFunction::constant(1.0), {}, "x");
    };
    CHECK_THROWS_AS(response_class(), ConfigError);
    auto short_table = [&] {
        return make_response_candidate(CandidateClass::sub_upper, prob,
                                       GridFunction::constant(1.0), {1, 2}, "x");
    };
    CHECK_THROWS_AS(short_table(), ConfigError);

    // a valid response candidate refuses a witness call without the opponent
    std::vector<std::size_t> table(prob.v_set.size(), 10);
    const auto rc = make_response_candidate(CandidateClass::sub_upper, prob,
                                            GridFunction::constant(1.0),
                                            table, "mid");
    auto no_opp = [&] { return rc.witness(constant_rule(-kInf), nullptr); };
    CHECK_THROWS_AS(no_opp(), ConfigError);

    auto from_null = [&] {
        return candidate_from_grid(prob, std::shared_ptr<const ValueGrid>{}, 4);
    };
    CHECK_THROWS_AS(from_null(), ConfigError);
}

TEST_CASE("frozen dynamics certify exactly") {
    const auto pre = make_preset("null");
    const auto& prob = pre.problem;
    const std::vector<double> x0{0.0};

    const auto cand = make_strategy_candidate(
        CandidateClass::super_upper, GridFunction::constant(1.0),
        constant_strategy(Player::two, prob.v_set, 0), "one");

    const auto opponents = constant_family(prob, Player::one);
    CertifyOptions co;
    co.cfg.n_steps = 16;
    co.cfg.batch_size = 8;

    const auto rep = certify(prob, cand, opponents, 0.0, x0, co);
    CHECK(rep.kind == "certify_super_upper");
    CHECK(rep.verdict == "pass");
    CHECK(rep.margin == 0.0);
    CHECK(rep.std_error == 0.0);
    CHECK(rep.estimate == 0.0);
    CHECK(rep.details["n_paths_failed"].get<std::size_t>() == 0);

    const auto wrong_side = constant_family(prob, Player::two);
    auto bad_side = [&] { return certify(prob, cand, wrong_side, 0.0, x0, co); };
    CHECK_THROWS_AS(bad_side(), ConfigError);
    const StrategyFamily empty{Player::one, {}};
    auto no_opps = [&] { return certify(prob, cand, empty, 0.0, x0, co); };
    CHECK_THROWS_AS(no_opps(), ConfigError);
}

TEST_CASE("terminal scan is exact on the payoff lattice") {
    const auto pre = make_preset("null");
    const auto& prob = pre.problem;
    const std::vector<double> lo{-1.0}, hi{1.0};

    const auto high = make_strategy_candidate(
        CandidateClass::super_upper, GridFunction::constant(1.0),
        constant_strategy(Player::two, prob.v_set, 0), "one");
    // 21 nodes hit x = 0 where the payoff peaks at exactly 1
    const auto tc = check_terminal(prob, high, lo, hi, 21);
    CHECK(tc.ok);
    CHECK(tc.worst_slack == 0.0);
    CHECK(tc.n_checked == 21);
    CHECK(tc.worst_x[0] == 0.0);

    const auto low_sub = make_strategy_candidate(
        CandidateClass::sub_lower, GridFunction::constant(1.0),
        constant_strategy(Player::one, prob.u_set, 0), "one");
    // as a sub candidate the same constant fails: g(1) - 1 < 0
    const auto ts = check_terminal(prob, low_sub, lo, hi, 21);
    CHECK(!ts.ok);
    CHECK(ts.worst_slack == doctest::Approx(std::exp(-1.0) - 1.0));

    auto empty_box = [&] { return check_terminal(prob, high, hi, lo, 21); };
    CHECK_THROWS_AS(empty_box(), ConfigError);
    auto one_node = [&] { return check_terminal(prob, high, lo, hi, 1); };
    CHECK_THROWS_AS(one_node(), ConfigError);
}

TEST_CASE("solved diffusion grids certify as one-sided candidates") {
    const auto pre = make_preset("heat");
    const auto& prob = pre.problem;
    const std::vector<std::size_t> nodes{201};
    SolverOptions sopt;
    const auto geom = plan_grid(prob, pre.grid_lo, pre.grid_hi, nodes, sopt);
    const std::vector<double> x0{0.0};

    CertifyOptions co;
    co.rho = constant_rule(0.3);
    co.tau = constant_rule(0.7);
    co.cfg.n_steps = 50;
    co.cfg.batch_size = 4000;
    co.cfg.rng_seed = 17;
    co.threshold = 1.5e-2;  // grid truncation error budget
    co.min_bin = 250;

    auto up = std::make_shared<const ValueGrid>(
        solve_isaacs(prob, Side::upper, geom, sopt));
    const auto super = candidate_from_grid(prob, up, 8);
    CHECK(super.cls == CandidateClass::super_upper);
    const auto urep = certify(prob, super, constant_family(prob, Player::one),
                              0.0, x0, co);
    CHECK(urep.verdict != "fail");

    auto low = std::make_shared<const ValueGrid>(
        solve_isaacs(prob, Side::lower, geom, sopt));
    const auto sub = candidate_from_grid(prob, low, 8);
    CHECK(sub.cls == CandidateClass::sub_lower);
    const auto lrep = certify(prob, sub, constant_family(prob, Player::two),
                              0.0, x0, co);
    CHECK(lrep.verdict != "fail");

    // terminal data interpolates exactly at the grid's own nodes
    const auto aligned = check_terminal(prob, super, pre.grid_lo, pre.grid_hi,
                                        201, 1e-9);
    CHECK(aligned.ok);
    // off-node samples sit under the concave payoff's chords, by O(dx^2)
    const auto off = check_terminal(prob, super, pre.grid_lo, pre.grid_hi, 173);
    CHECK(off.worst_slack < 0.0);
    CHECK(off.worst_slack > -1e-3);

    // a candidate that grows along the flow is rejected
    const auto drifting = make_strategy_candidate(
        CandidateClass::super_upper,
        GridFunction::from_callable(
            [](double t, std::span<const double> x) {
                return heat_value(t, x[0]) + 0.3 * t;
            },
            "drifting"),
        constant_strategy(Player::two, prob.v_set, 0), "drifting");
    CertifyOptions bad = co;
    bad.cfg.batch_size = 2000;
    bad.min_bin = 500;
    const auto brep = certify(prob, drifting, constant_family(prob, Player::one),
                              0.0, x0, bad);
    CHECK(brep.verdict == "fail");
    CHECK(brep.margin < -0.08);
}

TEST_CASE("lattice combine takes the better value and its witness") {
    const auto pre = make_preset("cancel");
    const auto& prob = pre.problem;
    const std::vector<double> x0{0.0};

    // a: value 1.0, witness v=-1 (index 0); b: value 1.5, witness v=+1
    const auto a = make_strategy_candidate(
        CandidateClass::super_upper, GridFunction::constant(1.0),
        constant_strategy(Player::two, prob.v_set, 0), "a");
    const auto b = make_strategy_candidate(
        CandidateClass::super_upper, GridFunction::constant(1.5),
        constant_strategy(Player::two, prob.v_set, 20), "b");

    const auto both = lattice_combine(a, b);
    CHECK(both.cls == CandidateClass::super_upper);
    CHECK(both.value(0.2, x0) == 1.0);
    CHECK(both.label.substr(0, 4) == "min[");

    // the min is a's everywhere, so a's witness plays: v=-1 cancels u=+1
    const auto opp = constant_strategy(Player::one, prob.u_set, 20);
    const auto play = both.witness(constant_rule(-kInf), &opp);
    SimulationConfig cfg;
    cfg.n_steps = 50;
    const auto path = simulate(prob, {opp, play}, 0.0, x0, cfg);
    CHECK(std::abs(path.states.back()) < 1e-9);

    // ties pick the first argument
    const auto c = make_strategy_candidate(
        CandidateClass::super_upper, GridFunction::constant(1.0),
        constant_strategy(Player::two, prob.v_set, 20), "c");
    const auto tie = lattice_combine(a, c);
    const auto tplay = tie.witness(constant_rule(-kInf), &opp);
    const auto tpath = simulate(prob, {opp, tplay}, 0.0, x0, cfg);
    CHECK(std::abs(tpath.states.back()) < 1e-9);

    // the combination still certifies, exactly (constants, frozen drift aside)
    const auto rep = certify(prob, both, constant_family(prob, Player::one), 0.0,
                             x0, CertifyOptions{});
    CHECK(rep.verdict == "pass");
    CHECK(rep.margin == 0.0);

    const auto sub = make_strategy_candidate(
        CandidateClass::sub_lower, GridFunction::constant(0.0),
        constant_strategy(Player::one, prob.u_set, 0), "s");
    auto mixed = [&] { return lattice_combine(a, sub); };
    CHECK_THROWS_AS(mixed(), ConfigError);
}

TEST_CASE("super bump plays its action inside the half-ball") {
    const auto pre = make_preset("cancel");
    const auto& prob = pre.problem;
    const std::vector<double> x0{0.0};

    const auto base = make_strategy_candidate(
        CandidateClass::super_upper, GridFunction::constant(1.0),
        constant_strategy(Player::two, prob.v_set, 10), "flat");

    // phi decays at 0.3 per unit time; the worst drift term is 0.04
    const auto phi = quadratic_test(1.2, -0.3, 0.5, {0.25}, {0.02});
    BumpSpec spec;
    spec.center_t = 0.5;
    spec.center_x = {0.25};
    spec.radius_t = 0.3;
    spec.radius_x = 0.5;
    spec.delta = 0.01;
    spec.eta = 0.04;
    spec.gap = 0.1;
    spec.witness_action = 0;  // v = -1 inside

    const auto bumped = bump_super(prob, base, phi, spec);
    CHECK(bumped.cls == CandidateClass::super_upper);
    // phi - delta stays above the flat value, so the value is unchanged...
    CHECK(bumped.value(0.5, std::vector<double>{0.25}) == 1.0);

    // ...but the witness is not: from rho=0.5 it plays v=-1 until the
    // half-ball exit at t=0.65, then hands back to the base witness.
    const auto opp = constant_strategy(Player::one, prob.u_set, 15);  // u=0.5
    const auto rho = constant_rule(0.5);
    const auto play = concatenate(bumped.witness(constant_rule(-kInf), &opp),
                                  bumped.witness(rho, &opp));
    SimulationConfig cfg;
    cfg.n_steps = 100;
    const auto path = simulate(prob, {opp, play}, 0.0, x0, cfg);
    CHECK(state_at(path, 0.5) == doctest::Approx(0.25).epsilon(1e-9));
    CHECK(state_at(path, 0.65) == doctest::Approx(0.175).epsilon(0.04));
    CHECK(path.states.back() == doctest::Approx(0.35).epsilon(0.03));

    // along that play the bumped value is constant, so it certifies exactly
    CertifyOptions co;
    co.rho = rho;
    co.cfg.n_steps = 100;
    co.cfg.batch_size = 8;
    const auto rep = certify(prob, bumped, constant_family(prob, Player::one),
                             0.0, x0, co);
    CHECK(rep.verdict == "pass");
    CHECK(rep.margin == 0.0);
    CHECK(rep.kind == "certify_super_upper");
}

TEST_CASE("sub bump responds through its table inside the half-ball") {
    const auto pre = make_preset("cancel");
    const auto& prob = pre.problem;
    const std::vector<double> x0{0.0};

    // base witness: always u = 0
    std::vector<std::size_t> base_table(prob.v_set.size(), 10);
    const auto base = make_response_candidate(CandidateClass::sub_upper, prob,
                                              GridFunction::constant(0.0),
                                              base_table, "floor");

    // inside the bump the response mirrors v, cancelling the drift
    std::vector<std::size_t> mirror(prob.v_set.size());
    for (std::size_t j = 0; j < mirror.size(); ++j) mirror[j] = 20 - j;

    const auto phi = quadratic_test(-0.2, 0.3, 0.5, {-0.5}, {-0.02});
    BumpSpec spec;
    spec.center_t = 0.5;
    spec.center_x = {-0.5};
    spec.radius_t = 0.3;
    spec.radius_x = 0.5;
    spec.delta = 0.01;
    spec.eta = 0.04;
    spec.gap = 0.1;
    spec.response_table = mirror;

    const auto bumped = bump_sub(prob, base, phi, spec);
    CHECK(bumped.cls == CandidateClass::sub_upper);
    CHECK(bumped.value(0.5, std::vector<double>{-0.5}) == 0.0);

    // opponent drives v=-1; the base response leaves drift -1, the bump's
    // mirror cancels it on [0.5, 0.65]
    const auto opp = constant_strategy(Player::two, prob.v_set, 0);
    const auto rho = constant_rule(0.5);
    const auto play = concatenate(bumped.witness(constant_rule(-kInf), &opp),
                                  bumped.witness(rho, &opp));
    SimulationConfig cfg;
    cfg.n_steps = 100;
    const auto path = simulate(prob, {play, opp}, 0.0, x0, cfg);
    CHECK(state_at(path, 0.5) == doctest::Approx(-0.5).epsilon(1e-9));
    CHECK(state_at(path, 0.65) == doctest::Approx(-0.5).epsilon(0.02));
    CHECK(path.states.back() == doctest::Approx(-0.85).epsilon(0.03));

    CertifyOptions co;
    co.rho = rho;
    co.cfg.n_steps = 100;
    co.cfg.batch_size = 8;
    StrategyFamily vs{Player::two,
                      {constant_strategy(Player::two, prob.v_set, 0),
                       constant_strategy(Player::two, prob.v_set, 20)}};
    const auto rep = certify(prob, bumped, vs, 0.0, x0, co);
    CHECK(rep.verdict == "pass");
    CHECK(rep.margin == 0.0);
    CHECK(rep.kind == "certify_sub_upper");
}

TEST_CASE("bump constructions refuse invalid inputs") {
    const auto pre = make_preset("cancel");
    const auto& prob = pre.problem;

    const auto base = make_strategy_candidate(
        CandidateClass::super_upper, GridFunction::constant(1.0),
        constant_strategy(Player::two, prob.v_set, 10), "flat");
    const auto phi = quadratic_test(1.2, -0.3, 0.5, {0.25}, {0.02});
    BumpSpec ok;
    ok.center_t = 0.5;
    ok.center_x = {0.25};
    ok.radius_t = 0.3;
    ok.radius_x = 0.5;
    ok.delta = 0.01;
    ok.eta = 0.04;
    ok.gap = 0.1;
    ok.witness_action = 0;

    BumpSpec fat = ok;
    fat.delta = 0.02;  // > eta/4
    auto fat_delta = [&] { return bump_super(prob, base, phi, fat); };
    CHECK_THROWS_AS(fat_delta(), ConfigError);

    BumpSpec late = ok;
    late.center_t = 0.9;  // ball leaves [0, horizon)
    auto late_ball = [&] { return bump_super(prob, base, phi, late); };
    CHECK_THROWS_AS(late_ball(), ConfigError);

    BumpSpec oob = ok;
    oob.witness_action = prob.v_set.size();
    auto bad_action = [&] { return bump_super(prob, base, phi, oob); };
    CHECK_THROWS_AS(bad_action(), ConfigError);

    // phi increasing in time violates the generator condition
    const auto rising = quadratic_test(1.2, 0.3, 0.5, {0.25}, {0.02});
    auto no_decay = [&] { return bump_super(prob, base, rising, ok); };
    CHECK_THROWS_AS(no_decay(), PreconditionError);

    // phi too low on the shell violates the clearance
    const auto low = quadratic_test(1.05, -0.3, 0.5, {0.25}, {0.02});
    auto thin_shell = [&] { return bump_super(prob, base, low, ok); };
    CHECK_THROWS_AS(thin_shell(), PreconditionError);

    // wrong class for each direction
    std::vector<std::size_t> table(prob.v_set.size(), 10);
    const auto sub_base = make_response_candidate(CandidateClass::sub_upper, prob,
                                                  GridFunction::constant(0.0),
                                                  table, "floor");
    auto super_on_sub = [&] { return bump_super(prob, sub_base, phi, ok); };
    CHECK_THROWS_AS(super_on_sub(), ConfigError);
    auto sub_on_super = [&] { return bump_sub(prob, base, phi, ok); };
    CHECK_THROWS_AS(sub_on_super(), ConfigError);

    // sub bump needs a full response table
    const auto phi_up = quadratic_test(-0.2, 0.3, 0.5, {0.25}, {-0.02});
    BumpSpec no_table = ok;
    auto missing = [&] { return bump_sub(prob, sub_base, phi_up, no_table); };
    CHECK_THROWS_AS(missing(), ConfigError);
}
