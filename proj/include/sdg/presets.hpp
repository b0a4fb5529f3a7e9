#pragma once

#include <string>
#include <vector>

#include "sdg/dynamics.hpp"

namespace sdg {

// A named game together with the default lab setup used by the experiment
// runner: solver box, node counts, and probe points (rows of (t, x...)).
struct Preset {
    GameProblem problem;
    std::vector<double> grid_lo, grid_hi;
    std::vector<std::size_t> grid_nodes;
    std::vector<std::vector<double>> probes;
    std::string description;
};

// Catalog:
//   null           frozen state, sanity baseline
//   hopf_lax_asym  drift u+v with asymmetric action sets, front-propagation
//                  value with a closed-form envelope oracle
//   non_isaacs     drift u*v, the classic game with a minimax gap
//   heat           uncontrolled diffusion, quadrature oracle
//   cancel         symmetric drift sets that cancel at the saddle
//   controlled_vol player one picks the volatility, convex payoff
Preset make_preset(const std::string& name);
const std::vector<std::string>& preset_names();

}  // namespace sdg
