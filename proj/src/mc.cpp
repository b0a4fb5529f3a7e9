#include "sdg/mc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sdg/errors.hpp"
#include "sdg/rng.hpp"

namespace sdg {

namespace {

using ordered_json = nlohmann::ordered_json;

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
    std::size_t n = 0;
};

// NaN entries (failed paths) are skipped. Fixed-order accumulation.
MeanSe mean_se(std::span<const double> xs) {
    MeanSe r;
    double sum = 0.0;
    for (double x : xs)
        if (!std::isnan(x)) {
            sum += x;
            ++r.n;
        }
    if (r.n == 0) return r;
    r.mean = sum / static_cast<double>(r.n);
    double ss = 0.0;
    for (double x : xs)
        if (!std::isnan(x)) {
            const double d = x - r.mean;
            ss += d * d;
        }
    if (r.n > 1) {
        const double var = ss / static_cast<double>(r.n - 1);
        r.se = std::sqrt(var / static_cast<double>(r.n));
    }
    return r;
}

// Per-path difference a - b, NaN when either side failed.
MeanSe diff_stats(std::span<const double> a, std::span<const double> b) {
    std::vector<double> d(a.size());
    for (std::size_t k = 0; k < a.size(); ++k) d[k] = a[k] - b[k];
    return mean_se(d);
}

}  // namespace

BatchSummary estimate_value(const GameProblem& problem, const StrategyPair& pair,
                            double start_time,
                            std::span<const double> start_state,
                            const SimulationConfig& cfg,
                            std::vector<double>* per_path) {
    PathFunctional payoff = [&problem](const SamplePath& path) {
        return problem.payoff(path.state(path.size() - 1));
    };
    return simulate_reduce(problem, pair, start_time, start_state, cfg, payoff,
                           per_path);
}

BatchSummary estimate_functional(const GameProblem& problem,
                                 const StrategyPair& pair, double start_time,
                                 std::span<const double> start_state,
                                 const SimulationConfig& cfg,
                                 const PathFunctional& f,
                                 std::vector<double>* per_path) {
    return simulate_reduce(problem, pair, start_time, start_state, cfg, f,
                           per_path);
}

ValueFn grid_value_fn(std::shared_ptr<const ValueGrid> vg) {
    if (!vg) throw ConfigError("grid_value_fn: null grid");
    return [vg](double t, std::span<const double> x) {
        return vg->interpolate(t, x);
    };
}

PathFunctional stopped_value(ValueFn w, RulePtr rho) {
    if (!w) throw ConfigError("stopped_value: empty value function");
    if (!rho) throw ConfigError("stopped_value: null stopping rule");
    return [w = std::move(w), rho = std::move(rho)](const SamplePath& path) {
        const double t = rule_time(rho, path);
        const PathView full(path);
        std::size_t k = full.first_index_at_or_after(t);
        if (k >= path.size()) k = path.size() - 1;
        return w(path.times[k], path.state(k));
    };
}

StrategyFamily constant_family(const GameProblem& problem, Player player) {
    const ControlSet& set =
        player == Player::one ? problem.u_set : problem.v_set;
    StrategyFamily fam;
    fam.player = player;
    fam.members.reserve(set.size());
    for (std::size_t i = 0; i < set.size(); ++i)
        fam.members.push_back(constant_strategy(player, set, i));
    return fam;
}

StrategyFamily random_family(const GameProblem& problem, Player player,
                             std::size_t count, std::size_t segments,
                             std::uint64_t seed, double start_time) {
    if (segments < 1)
        throw ConfigError("random_family: need at least one segment");
    const ControlSet& set =
        player == Player::one ? problem.u_set : problem.v_set;
    StrategyFamily fam;
    fam.player = player;
    fam.members.reserve(count);
    const double inf = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < count; ++k) {
        CounterRng rng(seed, k);
        std::vector<double> cuts(segments - 1);
        for (double& c : cuts) c = rng.uniform(start_time, problem.horizon);
        std::sort(cuts.begin(), cuts.end());
        std::vector<StrategySegment> segs;
        segs.reserve(segments);
        for (double c : cuts)
            segs.push_back(
                {constant_rule(c), constant_selector(rng.index(set.size()))});
        segs.push_back(
            {constant_rule(inf), constant_selector(rng.index(set.size()))});
        fam.members.emplace_back(player, set, constant_rule(-inf),
                                 std::move(segs),
                                 "random[" + std::to_string(k) + "]");
    }
    return fam;
}

nlohmann::ordered_json GameMatrix::to_json() const {
    ordered_json j;
    j["n_u"] = n_u;
    j["n_v"] = n_v;
    j["u_labels"] = u_labels;
    j["v_labels"] = v_labels;
    ordered_json rows = ordered_json::array();
    ordered_json ses = ordered_json::array();
    for (std::size_t i = 0; i < n_u; ++i) {
        ordered_json row = ordered_json::array();
        ordered_json se_row = ordered_json::array();
        for (std::size_t k = 0; k < n_v; ++k) {
            row.push_back(at(i, k));
            se_row.push_back(se_at(i, k));
        }
        rows.push_back(std::move(row));
        ses.push_back(std::move(se_row));
    }
    j["mean"] = std::move(rows);
    j["std_error"] = std::move(ses);
    j["lower"] = lower;
    j["upper"] = upper;
    j["lower_pair"] = {lower_u, lower_v};
    j["upper_pair"] = {upper_u, upper_v};
    return j;
}

void matrix_minimax(GameMatrix& m) {
    if (m.n_u == 0 || m.n_v == 0)
        throw ConfigError("matrix_minimax: empty matrix");
    m.lower = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < m.n_u; ++i) {
        double inner = std::numeric_limits<double>::infinity();
        std::size_t arg = 0;
        for (std::size_t j = 0; j < m.n_v; ++j)
            if (m.at(i, j) < inner) {
                inner = m.at(i, j);
                arg = j;
            }
        if (inner > m.lower) {
            m.lower = inner;
            m.lower_u = i;
            m.lower_v = arg;
        }
    }
    m.upper = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < m.n_v; ++j) {
        double inner = -std::numeric_limits<double>::infinity();
        std::size_t arg = 0;
        for (std::size_t i = 0; i < m.n_u; ++i)
            if (m.at(i, j) > inner) {
                inner = m.at(i, j);
                arg = i;
            }
        if (inner < m.upper) {
            m.upper = inner;
            m.upper_v = j;
            m.upper_u = arg;
        }
    }
}

GameMatrix upper_lower_values(const GameProblem& problem,
                              const StrategyFamily& u_family,
                              const StrategyFamily& v_family, double start_time,
                              std::span<const double> start_state,
                              const SimulationConfig& cfg) {
    if (u_family.player != Player::one || v_family.player != Player::two)
        throw ConfigError("upper_lower_values: families on the wrong sides");
    if (u_family.members.empty() || v_family.members.empty())
        throw ConfigError("upper_lower_values: empty family");
    GameMatrix m;
    m.n_u = u_family.members.size();
    m.n_v = v_family.members.size();
    m.mean.resize(m.n_u * m.n_v);
    m.std_error.resize(m.n_u * m.n_v);
    for (const auto& s : u_family.members) m.u_labels.push_back(s.label());
    for (const auto& s : v_family.members) m.v_labels.push_back(s.label());
    for (std::size_t i = 0; i < m.n_u; ++i)
        for (std::size_t j = 0; j < m.n_v; ++j) {
            const StrategyPair pair{u_family.members[i], v_family.members[j]};
            const BatchSummary s =
                estimate_value(problem, pair, start_time, start_state, cfg);
            m.mean[i * m.n_v + j] = s.mean;
            m.std_error[i * m.n_v + j] = s.std_error;
        }
    matrix_minimax(m);
    return m;
}

BestResponse best_response(const GameProblem& problem,
                           const StrategyFamily& family,
                           const ElementaryStrategy& opponent,
                           double start_time, std::span<const double> start_state,
                           const SimulationConfig& cfg) {
    if (family.members.empty())
        throw ConfigError("best_response: empty family");
    if (family.player == opponent.player())
        throw ConfigError("best_response: family and opponent share a side");
    BestResponse best;
    bool first = true;
    for (std::size_t i = 0; i < family.members.size(); ++i) {
        const StrategyPair pair =
            family.player == Player::one
                ? StrategyPair{family.members[i], opponent}
                : StrategyPair{opponent, family.members[i]};
        const BatchSummary s =
            estimate_value(problem, pair, start_time, start_state, cfg);
        const bool better = family.player == Player::one ? s.mean > best.value
                                                         : s.mean < best.value;
        if (first || better) {
            best.index = i;
            best.value = s.mean;
            best.std_error = s.std_error;
            first = false;
        }
    }
    return best;
}

std::string band_verdict(double margin, double std_error, double threshold) {
    if (margin < -(threshold + 3.0 * std_error)) return "fail";
    if (std_error > 0.0 && std::abs(margin) < 3.0 * std_error)
        return "inconclusive";
    return "pass";
}

nlohmann::ordered_json CertificateReport::to_json() const {
    ordered_json j;
    j["kind"] = kind;
    j["verdict"] = verdict;
    j["estimate"] = estimate;
    j["std_error"] = std_error;
    j["threshold"] = threshold;
    j["margin"] = margin;
    j["details"] = details;
    return j;
}

CertificateReport check_saddle(const GameProblem& problem,
                               const StrategyPair& pair,
                               const StrategyFamily& u_deviations,
                               const StrategyFamily& v_deviations,
                               double start_time,
                               std::span<const double> start_state,
                               const SimulationConfig& cfg, double epsilon) {
    if (u_deviations.player != Player::one ||
        v_deviations.player != Player::two)
        throw ConfigError("check_saddle: deviation families on wrong sides");
    if (u_deviations.members.empty() && v_deviations.members.empty())
        throw ConfigError("check_saddle: no deviations to test against");
    std::vector<double> base_pp;
    const BatchSummary base =
        estimate_value(problem, pair, start_time, start_state, cfg, &base_pp);

    struct Best {
        double gain = -std::numeric_limits<double>::infinity();
        double se = 0.0;
        std::string label = "(none)";
    };
    Best bu, bv;
    std::vector<double> pp;
    for (const auto& dev : u_deviations.members) {
        const StrategyPair p{dev, pair.v};
        estimate_value(problem, p, start_time, start_state, cfg, &pp);
        const MeanSe d = diff_stats(pp, base_pp);  // gain for the maximizer
        if (d.mean > bu.gain) {
            bu.gain = d.mean;
            bu.se = d.se;
            bu.label = dev.label();
        }
    }
    for (const auto& dev : v_deviations.members) {
        const StrategyPair p{pair.u, dev};
        estimate_value(problem, p, start_time, start_state, cfg, &pp);
        const MeanSe d = diff_stats(base_pp, pp);  // gain for the minimizer
        if (d.mean > bv.gain) {
            bv.gain = d.mean;
            bv.se = d.se;
            bv.label = dev.label();
        }
    }

    const Best& worst = bu.gain >= bv.gain ? bu : bv;
    CertificateReport r;
    r.kind = "saddle";
    r.estimate = worst.gain;
    r.std_error = worst.se;
    r.threshold = 0.0;  // epsilon already sits inside the margin
    r.margin = epsilon - worst.gain;
    r.verdict = band_verdict(r.margin, r.std_error, r.threshold);
    r.details["epsilon"] = epsilon;
    r.details["base_mean"] = base.mean;
    r.details["base_std_error"] = base.std_error;
    r.details["n_paths"] = base.n_ok;
    r.details["best_u_deviation"] = {{"label", bu.label},
                                     {"gain", bu.gain},
                                     {"std_error", bu.se}};
    r.details["best_v_deviation"] = {{"label", bv.label},
                                     {"gain", bv.gain},
                                     {"std_error", bv.se}};
    return r;
}

CertificateReport check_half_dpp(const GameProblem& problem, const ValueFn& w,
                                 HalfDpp direction,
                                 const ElementaryStrategy& witness,
                                 const StrategyFamily& opponents, RulePtr rho,
                                 double start_time,
                                 std::span<const double> start_state,
                                 const SimulationConfig& cfg, double threshold) {
    if (opponents.members.empty())
        throw ConfigError("check_half_dpp: empty opponent family");
    if (opponents.player == witness.player())
        throw ConfigError("check_half_dpp: witness and opponents share a side");
    const double w0 = w(start_time, start_state);
    const PathFunctional f = stopped_value(w, rho);

    double worst_margin = std::numeric_limits<double>::infinity();
    double worst_mean = 0.0, worst_se = 0.0;
    std::string worst_label;
    ordered_json rows = ordered_json::array();
    for (const auto& opp : opponents.members) {
        const StrategyPair pair = witness.player() == Player::one
                                      ? StrategyPair{witness, opp}
                                      : StrategyPair{opp, witness};
        const BatchSummary s = estimate_functional(problem, pair, start_time,
                                                   start_state, cfg, f);
        const double margin =
            direction == HalfDpp::super ? w0 - s.mean : s.mean - w0;
        rows.push_back({{"opponent", opp.label()},
                        {"stopped_mean", s.mean},
                        {"std_error", s.std_error},
                        {"margin", margin}});
        if (margin < worst_margin) {
            worst_margin = margin;
            worst_mean = s.mean;
            worst_se = s.std_error;
            worst_label = opp.label();
        }
    }

    CertificateReport r;
    r.kind = direction == HalfDpp::super ? "half_dpp_super" : "half_dpp_sub";
    r.estimate = worst_mean;
    r.std_error = worst_se;
    r.threshold = threshold;
    r.margin = worst_margin;
    r.verdict = band_verdict(r.margin, r.std_error, r.threshold);
    r.details["witness"] = witness.label();
    r.details["witness_player"] = player_name(witness.player());
    r.details["rho"] = rho ? rho->label() : "";
    r.details["start_value"] = w0;
    r.details["worst_opponent"] = worst_label;
    r.details["opponents"] = std::move(rows);
    return r;
}

CertificateReport dpp_residual(const GameProblem& problem, const ValueGrid& vg,
                               const StrategyPair& pair, RulePtr rho,
                               double start_time,
                               std::span<const double> start_state,
                               const SimulationConfig& cfg, double tolerance) {
    const double v0 = vg.interpolate(start_time, start_state);
    // non-owning: the grid outlives this call
    ValueFn wfn = [&vg](double t, std::span<const double> x) {
        return vg.interpolate(t, x);
    };
    const PathFunctional f = stopped_value(std::move(wfn), rho);
    const BatchSummary s =
        estimate_functional(problem, pair, start_time, start_state, cfg, f);
    const double residual = s.mean - v0;

    CertificateReport r;
    r.kind = "dpp_residual";
    r.estimate = residual;
    r.std_error = s.std_error;
    r.threshold = 0.0;  // tolerance already sits inside the margin
    r.margin = tolerance - std::abs(residual);
    r.verdict = band_verdict(r.margin, r.std_error, r.threshold);
    r.details["tolerance"] = tolerance;
    r.details["start_value"] = v0;
    r.details["stopped_mean"] = s.mean;
    r.details["rho"] = rho ? rho->label() : "";
    r.details["n_paths"] = s.n_ok;
    r.details["n_failed"] = s.n_failed;
    return r;
}

}  // namespace sdg
