#pragma once

#include <cstdint>
#include <utility>
#include <vector>

namespace riboflow {

// Compartment indices are 0-based throughout the C++ API; the 1-based
// convention of the scenario files and CSV headers is translated at the
// I/O boundary and nowhere else.
struct CompartmentalModel {
    int m = 0;
    std::vector<std::pair<int, int>> transitions;  // ordered (donor, receptor) pairs
    std::vector<double> capacities;
    double total_capacity = 0.0;

    // adjacency caches, filled by build_model
    std::vector<std::vector<int>> donors;     // donors[i]    = { j : (j,i) in A }
    std::vector<std::vector<int>> receptors;  // receptors[i] = { j : (i,j) in A }

    bool has_edge(int i, int j) const;
    int edge_index(int i, int j) const;  // position in transitions, -1 if absent
};

CompartmentalModel build_model(int m, const std::vector<std::pair<int, int>>& transitions,
                               const std::vector<double>& capacities);

std::pair<std::vector<int>, std::vector<int>> donors_receptors(const CompartmentalModel& model, int i);

enum class ComponentLabel { trap, source, intermediate, isolated };

struct ComponentDag {
    std::vector<std::vector<int>> components;      // SCCs, vertices sorted
    std::vector<std::pair<int, int>> dag_edges;    // pairs of component indices
    std::vector<ComponentLabel> labels;
};

struct Connectivity {
    bool strongly_connected = false;
    bool weakly_reversible = false;
    ComponentDag condensation;
};

Connectivity connectivity(const CompartmentalModel& model);

// Number of chordless cycles of length >= 3 in the undirected graph obtained
// by merging each antiparallel edge pair into a single undirected edge.
// Exact enumeration; throws CycleBudgetExceeded when the number of partial
// DFS paths examined exceeds the budget.
std::int64_t count_chordless_cycles(const CompartmentalModel& model,
                                    std::int64_t budget = 1'000'000);

// Undirected edge list after merging antiparallel pairs; also the cyclomatic
// number |A~| - m + (number of connected components of the merged graph),
// which several structural checks compare against.
std::vector<std::pair<int, int>> merged_edges(const CompartmentalModel& model);
int cyclomatic_number(const CompartmentalModel& model);

} // namespace riboflow
