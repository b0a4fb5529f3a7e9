#include "sdg/perron.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <sstream>
#include <utility>

#include "sdg/errors.hpp"
#include "sdg/numfmt.hpp"
#include "sdg/solver.hpp"

namespace sdg {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
    std::size_t n = 0;
};

MeanSe mean_se(std::span<const double> xs) {
    MeanSe out;
    out.n = xs.size();
    if (out.n == 0) return out;
    double s = 0.0;
    for (double v : xs) s += v;
    out.mean = s / static_cast<double>(out.n);
    if (out.n < 2) return out;
    double q = 0.0;
    for (double v : xs) {
        const double d = v - out.mean;
        q += d * d;
    }
    const double var = q / static_cast<double>(out.n - 1);
    out.se = std::sqrt(var / static_cast<double>(out.n));
    return out;
}

std::string point_str(double t, std::span<const double> x) {
    std::string s = "t=" + format_double(t) + ", x=(";
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (i) s += ", ";
        s += format_double(x[i]);
    }
    s += ")";
    return s;
}

double euclid_dist(std::span<const double> x, std::span<const double> c) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - c[i];
        s += d * d;
    }
    return std::sqrt(s);
}

// Odometer over a uniform lattice with `n` points per axis on [lo, hi].
// Calls f(x) for every lattice point.
template <typename F>
void for_each_lattice_point(std::span<const double> lo, std::span<const double> hi,
                            std::size_t n, F&& f) {
    const std::size_t d = lo.size();
    std::vector<std::size_t> idx(d, 0);
    std::vector<double> x(d);
    for (;;) {
        for (std::size_t a = 0; a < d; ++a) {
            const double step = (hi[a] - lo[a]) / static_cast<double>(n - 1);
            x[a] = lo[a] + static_cast<double>(idx[a]) * step;
        }
        f(std::span<const double>(x));
        std::size_t a = 0;
        for (; a < d; ++a) {
            if (++idx[a] < n) break;
            idx[a] = 0;
        }
        if (a == d) return;
    }
}

ElementaryStrategy respond_through_table(const ControlSet& responder_set,
                                         const ElementaryStrategy& opponent,
                                         std::span<const std::size_t> table,
                                         RulePtr start) {
    if (table.size() != opponent.control_set().size())
        throw ConfigError("response table must have one entry per opponent action ("
                          + std::to_string(opponent.control_set().size()) + " needed, "
                          + std::to_string(table.size()) + " given)");
    for (std::size_t e : table)
        if (e >= responder_set.size())
            throw ConfigError("response table entry " + std::to_string(e)
                              + " is outside the responder's control set");
    if (!start) start = constant_rule(-kInf);
    const Player responder =
        opponent.player() == Player::one ? Player::two : Player::one;
    std::vector<std::size_t> tbl(table.begin(), table.end());

    // Segment k of the response fires with the opponent's segment k (never
    // before `start`) and maps the action the opponent's selector chose on
    // the prefix the opponent saw.
    std::vector<StrategySegment> segs;
    RulePtr prev = opponent.start_rule();
    for (const auto& seg : opponent.segments()) {
        StrategySegment s;
        s.rule = max_rule(seg.rule, start);
        s.selector = mapped_selector(prev, seg.selector, tbl);
        segs.push_back(std::move(s));
        prev = seg.rule;
    }
    return ElementaryStrategy(responder, responder_set, std::move(start),
                              std::move(segs), "respond[" + opponent.label() + "]");
}

void require_value_and_witness(const SemiSolutionCandidate& cand, const char* who) {
    if (cand.value.empty())
        throw ConfigError(std::string(who) + ": candidate has no value function");
    if (!cand.witness)
        throw ConfigError(std::string(who) + ": candidate has no witness");
}

}  // namespace

const char* candidate_class_name(CandidateClass c) {
    switch (c) {
        case CandidateClass::super_upper: return "super_upper";
        case CandidateClass::sub_upper: return "sub_upper";
        case CandidateClass::super_lower: return "super_lower";
        case CandidateClass::sub_lower: return "sub_lower";
    }
    return "?";
}

bool is_super(CandidateClass c) {
    return c == CandidateClass::super_upper || c == CandidateClass::super_lower;
}

Player witness_player(CandidateClass c) {
    return is_super(c) ? Player::two : Player::one;
}

Player opponent_player(CandidateClass c) {
    return is_super(c) ? Player::one : Player::two;
}

ElementaryStrategy restart_strategy(const ElementaryStrategy& s, RulePtr start) {
    if (!start) throw ConfigError("restart_strategy: null start rule");
    std::vector<StrategySegment> segs;
    segs.reserve(s.segments().size());
    for (const auto& seg : s.segments()) {
        StrategySegment t;
        t.rule = max_rule(seg.rule, start);
        t.selector = seg.selector;
        segs.push_back(std::move(t));
    }
    return ElementaryStrategy(s.player(), s.control_set(), std::move(start),
                              std::move(segs), s.label());
}

ElementaryStrategy response_strategy(const GameProblem& problem,
                                     const ElementaryStrategy& opponent,
                                     std::span<const std::size_t> table,
                                     RulePtr start) {
    const ControlSet& responder_set =
        opponent.player() == Player::one ? problem.v_set : problem.u_set;
    return respond_through_table(responder_set, opponent, table, std::move(start));
}

SemiSolutionCandidate make_strategy_candidate(CandidateClass cls, GridFunction value,
                                              ElementaryStrategy witness,
                                              std::string label) {
    if (cls != CandidateClass::super_upper && cls != CandidateClass::sub_lower)
        throw ConfigError(std::string("make_strategy_candidate: class ")
                          + candidate_class_name(cls) + " needs a response witness");
    if (witness.player() != witness_player(cls))
        throw ConfigError(std::string("make_strategy_candidate: ")
                          + candidate_class_name(cls) + " is witnessed by player "
                          + player_name(witness_player(cls)));
    if (value.empty())
        throw ConfigError("make_strategy_candidate: empty value function");
    SemiSolutionCandidate cand;
    cand.cls = cls;
    cand.value = std::move(value);
    cand.label = std::move(label);
    cand.witness = [w = std::move(witness)](RulePtr start,
                                            const ElementaryStrategy*) {
        return restart_strategy(w, std::move(start));
    };
    return cand;
}

SemiSolutionCandidate make_response_candidate(CandidateClass cls,
                                              const GameProblem& problem,
                                              GridFunction value,
                                              std::vector<std::size_t> table,
                                              std::string label) {
    if (cls != CandidateClass::sub_upper && cls != CandidateClass::super_lower)
        throw ConfigError(std::string("make_response_candidate: class ")
                          + candidate_class_name(cls)
                          + " is witnessed by a single strategy");
    if (value.empty())
        throw ConfigError("make_response_candidate: empty value function");
    const ControlSet& opp_set =
        opponent_player(cls) == Player::one ? problem.u_set : problem.v_set;
    const ControlSet& own_set =
        witness_player(cls) == Player::one ? problem.u_set : problem.v_set;
    if (table.size() != opp_set.size())
        throw ConfigError("make_response_candidate: table must have one entry per "
                          "opponent action");
    for (std::size_t e : table)
        if (e >= own_set.size())
            throw ConfigError("make_response_candidate: table entry out of range");

    SemiSolutionCandidate cand;
    cand.cls = cls;
    cand.value = std::move(value);
    cand.label = std::move(label);
    cand.witness = [own_set, tbl = std::move(table)](
                       RulePtr start, const ElementaryStrategy* opp) {
        if (!opp)
            throw ConfigError("response candidate: witness needs the opponent");
        return respond_through_table(own_set, *opp, tbl, std::move(start));
    };
    return cand;
}

SemiSolutionCandidate candidate_from_grid(const GameProblem& problem,
                                          std::shared_ptr<const ValueGrid> values,
                                          std::size_t n_decisions) {
    if (!values) throw ConfigError("candidate_from_grid: null grid");
    const CandidateClass cls = values->side() == Side::upper
                                   ? CandidateClass::super_upper
                                   : CandidateClass::sub_lower;
    const Player wp = witness_player(cls);
    auto table = std::make_shared<FeedbackTable>(extract_feedback(*values, wp));
    ElementaryStrategy fb = feedback_strategy(problem, wp, table, n_decisions);
    std::string label = values->problem_name() + "/" + side_name(values->side());
    return make_strategy_candidate(cls, GridFunction::from_values(std::move(values)),
                                   std::move(fb), std::move(label));
}

TerminalCheck check_terminal(const GameProblem& problem,
                             const SemiSolutionCandidate& cand,
                             std::span<const double> lo, std::span<const double> hi,
                             std::size_t nodes_per_axis, double epsilon) {
    const std::size_t d = static_cast<std::size_t>(problem.dim_state);
    if (lo.size() != d || hi.size() != d)
        throw ConfigError("check_terminal: box dimension does not match the state");
    for (std::size_t a = 0; a < d; ++a)
        if (!(lo[a] < hi[a]))
            throw ConfigError("check_terminal: box is empty on axis "
                              + std::to_string(a));
    if (nodes_per_axis < 2)
        throw ConfigError("check_terminal: need at least 2 nodes per axis");
    if (cand.value.empty())
        throw ConfigError("check_terminal: candidate has no value function");
    if (epsilon < 0.0) throw ConfigError("check_terminal: negative epsilon");

    const bool sup = is_super(cand.cls);
    TerminalCheck out;
    out.worst_slack = kInf;
    for_each_lattice_point(lo, hi, nodes_per_axis, [&](std::span<const double> x) {
        const double w = cand.value(problem.horizon, x);
        const double g = problem.payoff(x);
        const double slack = sup ? w - g : g - w;
        if (slack < out.worst_slack) {
            out.worst_slack = slack;
            out.worst_x.assign(x.begin(), x.end());
        }
        ++out.n_checked;
    });
    out.ok = out.worst_slack >= -epsilon;
    return out;
}

CertificateReport certify(const GameProblem& problem,
                          const SemiSolutionCandidate& cand,
                          const StrategyFamily& opponents, double start_time,
                          std::span<const double> start_state,
                          const CertifyOptions& opts) {
    require_value_and_witness(cand, "certify");
    if (opponents.members.empty())
        throw ConfigError("certify: empty opponent family");
    if (opponents.player != opponent_player(cand.cls))
        throw ConfigError(std::string("certify: ") + candidate_class_name(cand.cls)
                          + " is tested against player "
                          + player_name(opponent_player(cand.cls)) + " opponents");
    if (opts.min_bin < 1) throw ConfigError("certify: min_bin must be positive");
    if (opts.space_bins < 1) throw ConfigError("certify: space_bins must be positive");

    const bool sup = is_super(cand.cls);
    const double sign = sup ? -1.0 : 1.0;
    const RulePtr rho = opts.rho ? opts.rho : constant_rule(-kInf);
    const RulePtr tau = opts.tau ? opts.tau : constant_rule(kInf);
    const double w0 = cand.value(start_time, start_state);
    const std::size_t d = static_cast<std::size_t>(problem.dim_state);

    struct Bin {
        double margin = kInf;
        double mean = 0.0;
        double se = 0.0;
        std::size_t n = 0;
        std::string where;
    };
    Bin worst;
    bool have_worst = false;
    auto consider = [&](const Bin& b) {
        if (!have_worst || b.margin < worst.margin) {
            worst = b;
            have_worst = true;
        }
    };

    nlohmann::ordered_json opp_rows = nlohmann::ordered_json::array();
    std::size_t total_ok = 0, total_failed = 0, total_bins = 0;

    for (std::size_t oi = 0; oi < opponents.members.size(); ++oi) {
        const ElementaryStrategy& opp = opponents.members[oi];
        // The play implements the defining property: witness from the start
        // up to rho, then the witness restarted at rho. For restart-invariant
        // witnesses the concatenation is the same strategy; for locally
        // modified candidates the restart is the point of the test.
        ElementaryStrategy pre = cand.witness(constant_rule(-kInf), &opp);
        ElementaryStrategy post = cand.witness(rho, &opp);
        ElementaryStrategy play = concatenate(pre, post);
        StrategyPair pair = witness_player(cand.cls) == Player::two
                                ? StrategyPair{opp, play}
                                : StrategyPair{play, opp};

        BatchResult batch =
            simulate_batch(problem, pair, start_time, start_state, opts.cfg);
        if (batch.payoff.n_ok == 0)
            throw ConfigError("certify: every path failed for opponent \""
                              + opp.label() + "\": " + batch.payoff.first_error);
        total_ok += batch.payoff.n_ok;
        total_failed += batch.payoff.n_failed;

        struct Rec {
            double t_r;
            std::vector<double> x_r;
            double diff;
            double anchor;
        };
        std::vector<Rec> recs;
        recs.reserve(batch.paths.size());
        for (std::size_t pi = 0; pi < batch.paths.size(); ++pi) {
            if (batch.errors[pi].has_value()) continue;
            const SamplePath& p = batch.paths[pi];
            const PathView full(p);
            const double tr = rule_time(rho, p);
            std::size_t kr = full.first_index_at_or_after(tr);
            if (kr >= p.size()) kr = p.size() - 1;
            double tt = rule_time(tau, p);
            if (tt < tr) tt = tr;
            std::size_t kt = full.first_index_at_or_after(tt);
            if (kt >= p.size()) kt = p.size() - 1;
            Rec r;
            r.t_r = p.times[kr];
            r.x_r.assign(p.state(kr).begin(), p.state(kr).end());
            const double wr = cand.value(p.times[kr], p.state(kr));
            const double wt = cand.value(p.times[kt], p.state(kt));
            r.diff = wt - wr;
            r.anchor = wr - w0;
            recs.push_back(std::move(r));
        }

        double opp_worst = kInf;
        std::size_t opp_bins = 0;
        auto close_bin = [&](std::span<const double> diffs, std::string where) {
            const MeanSe ms = mean_se(diffs);
            Bin b;
            b.margin = sign * ms.mean;
            b.mean = ms.mean;
            b.se = ms.se;
            b.n = ms.n;
            b.where = std::move(where);
            consider(b);
            opp_worst = std::min(opp_worst, b.margin);
            ++opp_bins;
        };

        {
            std::vector<double> anchors;
            anchors.reserve(recs.size());
            for (const Rec& r : recs) anchors.push_back(r.anchor);
            close_bin(anchors, opp.label() + " | start->rho");
        }

        // Conditional legs: group by the exact rho time, then histogram the
        // rho states and sweep-merge cells until each bin holds min_bin
        // paths (the remainder joins the last bin).
        std::map<double, std::vector<std::size_t>> groups;
        for (std::size_t ri = 0; ri < recs.size(); ++ri)
            groups[recs[ri].t_r].push_back(ri);

        for (const auto& [tr, members] : groups) {
            std::vector<double> blo(d, kInf), bhi(d, -kInf);
            for (std::size_t ri : members)
                for (std::size_t a = 0; a < d; ++a) {
                    blo[a] = std::min(blo[a], recs[ri].x_r[a]);
                    bhi[a] = std::max(bhi[a], recs[ri].x_r[a]);
                }
            std::map<std::size_t, std::vector<std::size_t>> cells;
            for (std::size_t ri : members) {
                std::size_t lin = 0;
                for (std::size_t a = 0; a < d; ++a) {
                    std::size_t c = 0;
                    const double span = bhi[a] - blo[a];
                    if (span > 0.0) {
                        const double f = (recs[ri].x_r[a] - blo[a]) / span;
                        c = std::min(opts.space_bins - 1,
                                     static_cast<std::size_t>(
                                         f * static_cast<double>(opts.space_bins)));
                    }
                    lin = lin * opts.space_bins + c;
                }
                cells[lin].push_back(ri);
            }

            std::vector<double> pending;
            std::size_t bin_no = 0;
            std::vector<double> last_closed;
            std::string last_where;
            for (const auto& cell : cells) {
                for (std::size_t ri : cell.second) pending.push_back(recs[ri].diff);
                if (pending.size() >= opts.min_bin) {
                    std::string where = opp.label() + " | rho->tau @ t_rho="
                                        + format_double(tr) + " bin "
                                        + std::to_string(bin_no++);
                    last_closed = pending;
                    last_where = where;
                    close_bin(pending, std::move(where));
                    pending.clear();
                }
            }
            if (!pending.empty()) {
                if (last_closed.empty()) {
                    close_bin(pending, opp.label() + " | rho->tau @ t_rho="
                                           + format_double(tr) + " bin 0");
                } else {
                    // Re-open the last bin with the remainder folded in; the
                    // previous reading of it is superseded, and margins only
                    // tighten or loosen by a sub-min_bin tail.
                    last_closed.insert(last_closed.end(), pending.begin(),
                                       pending.end());
                    close_bin(last_closed, last_where + "+tail");
                }
            }
        }

        nlohmann::ordered_json row;
        row["opponent"] = opp.label();
        row["n_ok"] = batch.payoff.n_ok;
        row["n_failed"] = batch.payoff.n_failed;
        row["n_bins"] = opp_bins;
        row["worst_margin"] = opp_worst;
        opp_rows.push_back(std::move(row));
        total_bins += opp_bins;
    }

    CertificateReport rep;
    rep.kind = std::string("certify_") + candidate_class_name(cand.cls);
    rep.estimate = worst.mean;
    rep.std_error = worst.se;
    rep.threshold = opts.threshold;
    rep.margin = worst.margin;
    rep.verdict = band_verdict(rep.margin, rep.std_error, rep.threshold);
    rep.details["candidate"] = cand.label;
    rep.details["class"] = candidate_class_name(cand.cls);
    rep.details["start_value"] = w0;
    rep.details["rho"] = rho->label();
    rep.details["tau"] = tau->label();
    rep.details["n_paths_ok"] = total_ok;
    rep.details["n_paths_failed"] = total_failed;
    rep.details["n_bins"] = total_bins;
    rep.details["min_bin"] = opts.min_bin;
    rep.details["space_bins"] = opts.space_bins;
    rep.details["worst_bin"] = worst.where;
    rep.details["worst_bin_paths"] = worst.n;
    rep.details["opponents"] = std::move(opp_rows);
    return rep;
}

SemiSolutionCandidate lattice_combine(const SemiSolutionCandidate& a,
                                      const SemiSolutionCandidate& b) {
    if (a.cls != b.cls)
        throw ConfigError(std::string("lattice_combine: mixed classes ")
                          + candidate_class_name(a.cls) + " and "
                          + candidate_class_name(b.cls));
    require_value_and_witness(a, "lattice_combine");
    require_value_and_witness(b, "lattice_combine");

    const bool sup = is_super(a.cls);
    SemiSolutionCandidate out;
    out.cls = a.cls;
    out.value = sup ? GridFunction::combine_min(a.value, b.value)
                    : GridFunction::combine_max(a.value, b.value);
    out.label = out.value.label();
    // The better candidate at the decision point supplies the witness from
    // there on. Ties go to `a`, so combining a candidate with itself is
    // exactly that candidate's witness.
    out.witness = [va = a.value, vb = b.value, wa = a.witness, wb = b.witness,
                   sup](RulePtr start, const ElementaryStrategy* opp) {
        PathPredicate pick_a = [va, vb, sup](const PathView& p) {
            const double x1 = va(p.last_time(), p.last_state());
            const double x2 = vb(p.last_time(), p.last_state());
            return sup ? x1 <= x2 : x1 >= x2;
        };
        return switch_at(start, std::move(pick_a), wa(start, opp), wb(start, opp));
    };
    return out;
}

TestFunction quadratic_test(double level, double slope_t, double t_center,
                            std::vector<double> x_center,
                            std::vector<double> curvature) {
    if (x_center.size() != curvature.size())
        throw ConfigError("quadratic_test: center and curvature sizes differ");
    if (x_center.empty()) throw ConfigError("quadratic_test: empty center");
    const std::size_t d = x_center.size();
    TestFunction f;
    f.label = "quadratic";
    f.value = [=](double t, std::span<const double> x) {
        double s = level + slope_t * (t - t_center);
        for (std::size_t i = 0; i < d; ++i) {
            const double dx = x[i] - x_center[i];
            s += curvature[i] * dx * dx;
        }
        return s;
    };
    f.dt = [slope_t](double, std::span<const double>) { return slope_t; };
    f.grad = [=](double, std::span<const double> x, std::span<double> g) {
        for (std::size_t i = 0; i < d; ++i)
            g[i] = 2.0 * curvature[i] * (x[i] - x_center[i]);
    };
    f.hess = [=](double, std::span<const double>, std::span<double> h) {
        std::fill(h.begin(), h.end(), 0.0);
        for (std::size_t i = 0; i < d; ++i) h[i * d + i] = 2.0 * curvature[i];
    };
    return f;
}

namespace {

void validate_bump_inputs(const GameProblem& problem,
                          const SemiSolutionCandidate& base,
                          const TestFunction& phi, const BumpSpec& spec,
                          CandidateClass required, const char* who) {
    if (base.cls != required)
        throw ConfigError(std::string(who) + ": base candidate must be "
                          + candidate_class_name(required) + ", got "
                          + candidate_class_name(base.cls));
    require_value_and_witness(base, who);
    if (!phi.value || !phi.dt || !phi.grad || !phi.hess)
        throw ConfigError(std::string(who) + ": test function is incomplete");
    if (spec.center_x.size() != static_cast<std::size_t>(problem.dim_state))
        throw ConfigError(std::string(who) + ": center dimension mismatch");
    if (!(spec.radius_x > 0.0) || !(spec.radius_t > 0.0))
        throw ConfigError(std::string(who) + ": radii must be positive");
    if (!(spec.delta > 0.0) || !(spec.eta > 0.0) || !(spec.gap > 0.0))
        throw ConfigError(std::string(who) + ": delta, eta, gap must be positive");
    if (!(spec.delta <= spec.eta / 4.0))
        throw ConfigError(std::string(who) + ": delta must be at most eta/4");
    if (!(spec.center_t - spec.radius_t >= 0.0)
        || !(spec.center_t + spec.radius_t < problem.horizon))
        throw ConfigError(std::string(who)
                          + ": the ball must sit inside [0, horizon)");
    if (spec.samples_per_axis < 3 || spec.time_samples < 3)
        throw ConfigError(std::string(who) + ": need at least 3 samples per axis");
}

// Shared lattice sweep for both bump directions. `gen_extreme` receives a
// Hamiltonian query and returns the relevant one-sided generator extreme;
// `pde_sign` is +1 when the condition is lhs >= gap, -1 when lhs <= -gap,
// and `shell_sign` likewise orients phi vs w +- eta.
template <typename GenExtreme>
void run_bump_checks(const GameProblem& problem, const SemiSolutionCandidate& base,
                     const TestFunction& phi, const BumpSpec& spec, double pde_sign,
                     GenExtreme&& gen_extreme, const char* who) {
    const std::size_t d = static_cast<std::size_t>(problem.dim_state);
    std::vector<double> lo(d), hi(d), grad(d), hess(d * d);
    for (std::size_t a = 0; a < d; ++a) {
        lo[a] = spec.center_x[a] - spec.radius_x;
        hi[a] = spec.center_x[a] + spec.radius_x;
    }
    double worst_pde = kInf;       // min over samples of pde_sign*lhs - gap
    double worst_shell = kInf;     // min over shell samples of the clearance
    std::string worst_pde_at, worst_shell_at;

    for (std::size_t ti = 0; ti < spec.time_samples; ++ti) {
        const double t = spec.center_t - spec.radius_t
                         + static_cast<double>(ti) * (2.0 * spec.radius_t)
                               / static_cast<double>(spec.time_samples - 1);
        for_each_lattice_point(lo, hi, spec.samples_per_axis,
                               [&](std::span<const double> x) {
            const double r = euclid_dist(x, spec.center_x);
            if (r > spec.radius_x) return;

            phi.grad(t, x, grad);
            phi.hess(t, x, hess);
            HamiltonianQuery q(t, std::vector<double>(x.begin(), x.end()), grad,
                               hess);
            const double lhs = phi.dt(t, x) + gen_extreme(q);
            const double slack = pde_sign * lhs - spec.gap;
            if (slack < worst_pde) {
                worst_pde = slack;
                worst_pde_at = point_str(t, x);
            }

            const bool in_half = r < spec.radius_x / 2.0
                                 && std::abs(t - spec.center_t) < spec.radius_t / 2.0;
            if (!in_half) {
                const double w = base.value(t, x);
                const double clearance =
                    pde_sign > 0 ? (w - spec.eta) - phi.value(t, x)
                                 : phi.value(t, x) - (w + spec.eta);
                if (clearance < worst_shell) {
                    worst_shell = clearance;
                    worst_shell_at = point_str(t, x);
                }
            }
        });
    }

    if (worst_pde < 0.0)
        throw PreconditionError(std::string(who)
                                + ": generator condition misses the gap by "
                                + format_double(-worst_pde) + " at " + worst_pde_at);
    if (worst_shell < 0.0)
        throw PreconditionError(std::string(who)
                                + ": shell clearance fails by "
                                + format_double(-worst_shell) + " at "
                                + worst_shell_at);
}

bool inside_ball(double t, std::span<const double> x, const BumpSpec& spec) {
    return std::abs(t - spec.center_t) <= spec.radius_t
           && euclid_dist(x, spec.center_x) <= spec.radius_x;
}

RulePtr half_ball_exit(const BumpSpec& spec, RulePtr start) {
    FirstExitSpec ex;
    ex.center = spec.center_x;
    ex.radius = spec.radius_x / 2.0;
    ex.after = std::move(start);
    ex.cap_time = spec.center_t + spec.radius_t / 2.0;
    return first_exit_rule(std::move(ex));
}

PathPredicate half_ball_entry(const BumpSpec& spec) {
    return [cx = spec.center_x, ct = spec.center_t, rx = spec.radius_x,
            rt = spec.radius_t](const PathView& p) {
        if (std::abs(p.last_time() - ct) >= rt / 2.0) return false;
        return euclid_dist(p.last_state(), cx) < rx / 2.0;
    };
}

}  // namespace

SemiSolutionCandidate bump_super(const GameProblem& problem,
                                 const SemiSolutionCandidate& base,
                                 const TestFunction& phi, const BumpSpec& spec) {
    validate_bump_inputs(problem, base, phi, spec, CandidateClass::super_upper,
                         "bump_super");
    if (spec.witness_action >= problem.v_set.size())
        throw ConfigError("bump_super: witness_action outside the v set");
    const std::vector<double> vhat(problem.v_set.point(spec.witness_action).begin(),
                                   problem.v_set.point(spec.witness_action).end());

    run_bump_checks(problem, base, phi, spec, /*pde_sign=*/-1.0,
                    [&](const HamiltonianQuery& q) {
                        double best = -kInf;
                        for (std::size_t iu = 0; iu < problem.u_set.size(); ++iu)
                            best = std::max(best,
                                            generator_value(problem, q,
                                                            problem.u_set.point(iu),
                                                            vhat));
                        return best;
                    },
                    "bump_super");

    SemiSolutionCandidate out;
    out.cls = CandidateClass::super_upper;
    out.label = "bump_super[" + base.label + "]";
    out.value = GridFunction::from_callable(
        [w = base.value, pv = phi.value, spec, delta = spec.delta](
            double t, std::span<const double> x) {
            const double base_v = w(t, x);
            if (!inside_ball(t, x, spec)) return base_v;
            return std::min(pv(t, x) - delta, base_v);
        },
        out.label);
    out.witness = [bw = base.witness, vset = problem.v_set,
                   action = spec.witness_action, spec](
                      RulePtr start, const ElementaryStrategy* opp) {
        if (!start) throw ConfigError("bump_super: witness needs a start rule");
        RulePtr tau1 = half_ball_exit(spec, start);
        ElementaryStrategy inside =
            concatenate(constant_strategy(Player::two, vset, action, start),
                        bw(tau1, opp));
        ElementaryStrategy outside = bw(start, opp);
        return switch_at(start, half_ball_entry(spec), inside, outside);
    };
    return out;
}

SemiSolutionCandidate bump_sub(const GameProblem& problem,
                               const SemiSolutionCandidate& base,
                               const TestFunction& phi, const BumpSpec& spec) {
    validate_bump_inputs(problem, base, phi, spec, CandidateClass::sub_upper,
                         "bump_sub");
    if (spec.response_table.size() != problem.v_set.size())
        throw ConfigError("bump_sub: response_table must cover the v set");
    for (std::size_t e : spec.response_table)
        if (e >= problem.u_set.size())
            throw ConfigError("bump_sub: response_table entry outside the u set");

    run_bump_checks(problem, base, phi, spec, /*pde_sign=*/+1.0,
                    [&](const HamiltonianQuery& q) {
                        double worst = kInf;
                        for (std::size_t iv = 0; iv < problem.v_set.size(); ++iv) {
                            const std::size_t iu = spec.response_table[iv];
                            worst = std::min(worst,
                                             generator_value(problem, q,
                                                             problem.u_set.point(iu),
                                                             problem.v_set.point(iv)));
                        }
                        return worst;
                    },
                    "bump_sub");

    SemiSolutionCandidate out;
    out.cls = CandidateClass::sub_upper;
    out.label = "bump_sub[" + base.label + "]";
    out.value = GridFunction::from_callable(
        [w = base.value, pv = phi.value, spec, delta = spec.delta](
            double t, std::span<const double> x) {
            const double base_v = w(t, x);
            if (!inside_ball(t, x, spec)) return base_v;
            return std::max(pv(t, x) + delta, base_v);
        },
        out.label);
    out.witness = [bw = base.witness, uset = problem.u_set,
                   tbl = spec.response_table, spec](
                      RulePtr start, const ElementaryStrategy* opp) {
        if (!start) throw ConfigError("bump_sub: witness needs a start rule");
        if (!opp) throw ConfigError("bump_sub: witness needs the opponent");
        RulePtr tau1 = half_ball_exit(spec, start);
        ElementaryStrategy inside =
            concatenate(respond_through_table(uset, *opp, tbl, start),
                        bw(tau1, opp));
        ElementaryStrategy outside = bw(start, opp);
        return switch_at(start, half_ball_entry(spec), inside, outside);
    };
    return out;
}

}  // namespace sdg
