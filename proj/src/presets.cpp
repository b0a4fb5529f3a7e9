#include "sdg/presets.hpp"

#include <cmath>

#include "sdg/errors.hpp"

namespace sdg {

namespace {

void zero_fill(std::span<double> out) {
    for (double& c : out) c = 0.0;
}

DriftFn zero_drift() {
    return [](double, std::span<const double>, std::span<const double>,
              std::span<const double>, std::span<double> out) { zero_fill(out); };
}

DiffusionFn zero_diffusion() {
    return [](double, std::span<const double>, std::span<const double>,
              std::span<const double>, std::span<double> out) { zero_fill(out); };
}

DiffusionFn const_diffusion(double s) {
    return [s](double, std::span<const double>, std::span<const double>,
               std::span<const double>, std::span<double> out) { out[0] = s; };
}

PayoffFn gauss_bump() {
    return [](std::span<const double> x) {
        double r2 = 0.0;
        for (double c : x) r2 += c * c;
        return std::exp(-r2);
    };
}

std::vector<std::vector<double>> default_probes() {
    return {{0.0, 0.0}, {0.0, 1.0}, {0.5, -0.5}};
}

}  // namespace

Preset make_preset(const std::string& name) {
    Preset p;
    p.grid_lo = {-3.0};
    p.grid_hi = {3.0};
    p.grid_nodes = {401};
    p.probes = default_probes();

    GameProblem& g = p.problem;
    g.name = name;
    g.dim_state = 1;
    g.dim_noise = 1;
    g.horizon = 1.0;

    if (name == "null") {
        g.drift = zero_drift();
        g.diffusion = zero_diffusion();
        g.payoff = gauss_bump();
        g.payoff_min = 0.0;
        g.payoff_max = 1.0;
        g.u_set = ControlSet::singleton("U", {0.0});
        g.v_set = ControlSet::singleton("V", {0.0});
        p.description = "frozen state, payoff exp(-x^2); every check is exact";
    } else if (name == "hopf_lax_asym") {
        g.drift = [](double, std::span<const double>, std::span<const double> u,
                     std::span<const double> v, std::span<double> out) {
            out[0] = u[0] + v[0];
        };
        g.diffusion = zero_diffusion();
        g.payoff = gauss_bump();
        g.payoff_min = 0.0;
        g.payoff_max = 1.0;
        g.u_set = ControlSet::uniform("U", -1.0, 1.0, 21);
        g.v_set = ControlSet::uniform("V", -0.5, 0.5, 11);
        p.description =
            "drift u+v, |u|<=1 vs |v|<=1/2; value is the envelope "
            "max over |y-x| <= (T-t)/2 of exp(-y^2)";
    } else if (name == "non_isaacs") {
        g.drift = [](double, std::span<const double>, std::span<const double> u,
                     std::span<const double> v, std::span<double> out) {
            out[0] = u[0] * v[0];
        };
        g.diffusion = zero_diffusion();
        g.payoff = [](std::span<const double> x) { return std::tanh(x[0]); };
        g.payoff_min = -1.0;
        g.payoff_max = 1.0;
        g.u_set = ControlSet::uniform("U", -1.0, 1.0, 2);
        g.v_set = ControlSet::uniform("V", -1.0, 1.0, 2);
        p.description =
            "drift u*v with u,v in {-1,1}: minimax gap, lower/upper "
            "envelopes tanh(x -+ (T-t))";
    } else if (name == "heat") {
        g.drift = zero_drift();
        g.diffusion = const_diffusion(std::sqrt(2.0));
        g.payoff = gauss_bump();
        g.payoff_min = 0.0;
        g.payoff_max = 1.0;
        g.u_set = ControlSet::singleton("U", {0.0});
        g.v_set = ControlSet::singleton("V", {0.0});
        p.description = "uncontrolled diffusion sqrt(2) dW, gaussian payoff";
    } else if (name == "cancel") {
        g.drift = [](double, std::span<const double>, std::span<const double> u,
                     std::span<const double> v, std::span<double> out) {
            out[0] = u[0] + v[0];
        };
        g.diffusion = zero_diffusion();
        g.payoff = gauss_bump();
        g.payoff_min = 0.0;
        g.payoff_max = 1.0;
        g.u_set = ControlSet::uniform("U", -1.0, 1.0, 21);
        g.v_set = ControlSet::uniform("V", -1.0, 1.0, 21);
        p.description =
            "drift u+v over symmetric sets: the saddle cancels and the "
            "value equals the payoff";
    } else if (name == "controlled_vol") {
        g.drift = zero_drift();
        g.diffusion = [](double, std::span<const double>,
                         std::span<const double> u, std::span<const double>,
                         std::span<double> out) { out[0] = u[0]; };
        g.payoff = [](std::span<const double> x) {
            return std::min(x[0] * x[0], 9.0);
        };
        g.payoff_min = 0.0;
        g.payoff_max = 9.0;
        g.u_set = ControlSet("U", {{0.5}, {1.5}});
        g.v_set = ControlSet::singleton("V", {0.0});
        p.description =
            "player one picks volatility 0.5 or 1.5, payoff min(x^2, 9): "
            "high volatility wins where the payoff is convex";
    } else {
        throw ConfigError("unknown preset '" + name + "'");
    }
    g.validate();
    return p;
}

const std::vector<std::string>& preset_names() {
    static const std::vector<std::string> names = {
        "null",   "hopf_lax_asym", "non_isaacs",
        "heat",   "cancel",        "controlled_vol"};
    return names;
}

}  // namespace sdg
