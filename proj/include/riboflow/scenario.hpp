#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "riboflow/graph.hpp"
#include "riboflow/lyapunov.hpp"
#include "riboflow/rates.hpp"
#include "riboflow/simulate.hpp"

namespace riboflow {

struct LyapunovMemberSpec {
    std::string label;  // unique, used in output file names
    LyapunovSpec spec;
};

struct SurfaceRequest {
    int member = 0;  // index into the member list
    int points = 0;  // grid points per axis; 0 disables the export
};

struct Analysis {
    enum class Kind { analyze, simulate, equilibria, entrain, lyapunov };
    Kind kind = Kind::analyze;

    SimOptions sim;     // simulate, lyapunov
    bool full = false;  // simulate: integrate the paired particle/space system
    double tau = 0.5;   // persistence window start

    std::vector<double> levels;  // equilibria grid
    double eq_tol = 1e-9;
    int multistart = 0;  // extra random starts per level, seeded from the CLI

    int n_periods = 40;  // entrain

    std::vector<LyapunovMemberSpec> members;
    std::vector<double> nbar;  // empty: located on the initial level set
    SurfaceRequest surface;

    std::int64_t cycle_budget = 1'000'000;  // analyze
    int max_siphon_species = 16;
};

struct Scenario {
    std::string name;
    CompartmentalModel model;
    std::vector<RateSpec> rates;  // exactly one per declared edge
    std::vector<std::vector<double>> initial_states;
    double level = -1.0;  // proportional initial condition from this level when >= 0
    Analysis analysis;
};

// JSON scenario document; throws ParseError (malformed text, with position)
// or a ValidationError subclass (violated invariant named in the message).
Scenario parse_scenario(const std::string& path);
Scenario parse_scenario_text(const std::string& text, const std::string& origin = "<memory>");

// Canonical JSON for a scenario; parse_scenario_text(emit_scenario(s)) == s.
std::string emit_scenario(const Scenario& s);

struct RunReport {
    std::vector<std::string> outputs;  // file names created inside out_dir
    std::string manifest_path;
    bool checks_passed = true;
};

// Dispatch the scenario's analysis, write its CSV products and manifest.json
// into out_dir (created if absent).  Deterministic: CSV bytes depend only on
// the scenario and tolerances; the timestamp lives in the manifest alone.
RunReport run_scenario(const Scenario& s, const std::string& out_dir, unsigned seed = 0);

} // namespace riboflow
