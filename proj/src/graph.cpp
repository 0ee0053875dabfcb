#include "riboflow/graph.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "riboflow/errors.hpp"

namespace riboflow {

bool CompartmentalModel::has_edge(int i, int j) const { return edge_index(i, j) >= 0; }

int CompartmentalModel::edge_index(int i, int j) const {
    for (std::size_t k = 0; k < transitions.size(); ++k)
        if (transitions[k].first == i && transitions[k].second == j) return static_cast<int>(k);
    return -1;
}

CompartmentalModel build_model(int m, const std::vector<std::pair<int, int>>& transitions,
                               const std::vector<double>& capacities) {
    if (m <= 0) throw BadParameter("compartment count must be positive, got " + std::to_string(m));
    if (static_cast<int>(capacities.size()) != m)
        throw BadCapacity("expected " + std::to_string(m) + " capacities, got " +
                          std::to_string(capacities.size()));
    for (int i = 0; i < m; ++i)
        if (!(capacities[i] > 0.0) || !std::isfinite(capacities[i]))
            throw BadCapacity("capacity of compartment " + std::to_string(i) +
                              " must be positive and finite");

    CompartmentalModel model;
    model.m = m;
    model.capacities = capacities;
    model.total_capacity = 0.0;
    for (double c : capacities) model.total_capacity += c;
    model.donors.resize(m);
    model.receptors.resize(m);

    std::set<std::pair<int, int>> seen;
    for (auto [i, j] : transitions) {
        if (i < 0 || i >= m || j < 0 || j >= m)
            throw IndexOutOfRange("transition (" + std::to_string(i) + "," + std::to_string(j) +
                                  ") out of range for m=" + std::to_string(m));
        if (i == j) throw LoopEdge("loop edge at compartment " + std::to_string(i));
        if (!seen.insert({i, j}).second)
            throw DuplicateEdge("duplicate transition (" + std::to_string(i) + "," +
                                std::to_string(j) + ")");
        model.transitions.emplace_back(i, j);
        model.receptors[i].push_back(j);
        model.donors[j].push_back(i);
    }
    for (auto& v : model.donors) std::sort(v.begin(), v.end());
    for (auto& v : model.receptors) std::sort(v.begin(), v.end());
    return model;
}

std::pair<std::vector<int>, std::vector<int>> donors_receptors(const CompartmentalModel& model, int i) {
    if (i < 0 || i >= model.m)
        throw IndexOutOfRange("compartment index " + std::to_string(i) + " out of range");
    return {model.donors[i], model.receptors[i]};
}

namespace {

// Iterative Tarjan; vertex count is small but recursion depth would equal m.
std::vector<int> strongly_connected_components(const CompartmentalModel& model, int& count) {
    const int m = model.m;
    std::vector<int> index(m, -1), low(m, 0), comp(m, -1);
    std::vector<bool> on_stack(m, false);
    std::vector<int> stack, call_v, call_ei;
    int next_index = 0;
    count = 0;

    for (int root = 0; root < m; ++root) {
        if (index[root] >= 0) continue;
        call_v.push_back(root);
        call_ei.push_back(0);
        while (!call_v.empty()) {
            int v = call_v.back();
            int& ei = call_ei.back();
            if (ei == 0) {
                index[v] = low[v] = next_index++;
                stack.push_back(v);
                on_stack[v] = true;
            }
            bool descended = false;
            while (ei < static_cast<int>(model.receptors[v].size())) {
                int w = model.receptors[v][ei++];
                if (index[w] < 0) {
                    call_v.push_back(w);
                    call_ei.push_back(0);
                    descended = true;
                    break;
                }
                if (on_stack[w]) low[v] = std::min(low[v], index[w]);
            }
            if (descended) continue;
            if (low[v] == index[v]) {
                while (true) {
                    int w = stack.back();
                    stack.pop_back();
                    on_stack[w] = false;
                    comp[w] = count;
                    if (w == v) break;
                }
                ++count;
            }
            call_v.pop_back();
            call_ei.pop_back();
            if (!call_v.empty()) {
                int parent = call_v.back();
                low[parent] = std::min(low[parent], low[v]);
            }
        }
    }
    return comp;
}

} // namespace

Connectivity connectivity(const CompartmentalModel& model) {
    int ncomp = 0;
    std::vector<int> comp = strongly_connected_components(model, ncomp);

    ComponentDag dag;
    dag.components.resize(ncomp);
    for (int v = 0; v < model.m; ++v) dag.components[comp[v]].push_back(v);
    for (auto& c : dag.components) std::sort(c.begin(), c.end());

    std::set<std::pair<int, int>> dag_edge_set;
    for (auto [i, j] : model.transitions)
        if (comp[i] != comp[j]) dag_edge_set.insert({comp[i], comp[j]});
    dag.dag_edges.assign(dag_edge_set.begin(), dag_edge_set.end());

    std::vector<int> in_deg(ncomp, 0), out_deg(ncomp, 0);
    for (auto [a, b] : dag.dag_edges) {
        ++out_deg[a];
        ++in_deg[b];
    }
    dag.labels.resize(ncomp);
    for (int k = 0; k < ncomp; ++k) {
        if (in_deg[k] == 0 && out_deg[k] == 0)
            dag.labels[k] = ComponentLabel::isolated;
        else if (out_deg[k] == 0)
            dag.labels[k] = ComponentLabel::trap;
        else if (in_deg[k] == 0)
            dag.labels[k] = ComponentLabel::source;
        else
            dag.labels[k] = ComponentLabel::intermediate;
    }

    Connectivity result;
    result.strongly_connected = (ncomp == 1);
    result.weakly_reversible = dag.dag_edges.empty();
    result.condensation = std::move(dag);
    return result;
}

std::vector<std::pair<int, int>> merged_edges(const CompartmentalModel& model) {
    std::set<std::pair<int, int>> und;
    for (auto [i, j] : model.transitions) und.insert({std::min(i, j), std::max(i, j)});
    return {und.begin(), und.end()};
}

int cyclomatic_number(const CompartmentalModel& model) {
    auto edges = merged_edges(model);
    // connected components of the merged undirected graph, isolated vertices included
    std::vector<int> parent(model.m);
    for (int i = 0; i < model.m; ++i) parent[i] = i;
    auto find = [&](int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (auto [a, b] : edges) parent[find(a)] = find(b);
    std::set<int> roots;
    for (int i = 0; i < model.m; ++i) roots.insert(find(i));
    return static_cast<int>(edges.size()) - model.m + static_cast<int>(roots.size());
}

std::int64_t count_chordless_cycles(const CompartmentalModel& model, std::int64_t budget) {
    const int m = model.m;
    std::vector<std::vector<bool>> adj(m, std::vector<bool>(m, false));
    std::vector<std::vector<int>> nbr(m);
    for (auto [a, b] : merged_edges(model)) {
        adj[a][b] = adj[b][a] = true;
        nbr[a].push_back(b);
        nbr[b].push_back(a);
    }
    for (auto& v : nbr) std::sort(v.begin(), v.end());

    // Canonical form of a chordless cycle: smallest vertex s first, then the
    // smaller of its two cycle neighbours.  Grow simple paths s, v1, ..., vk
    // with every interior vertex > s; a path is extended by x only when x is
    // adjacent to the path tip alone (otherwise the candidate has a chord),
    // and closed when x is additionally adjacent to s, which requires x to
    // exceed the first interior vertex so each cycle is found once.
    std::int64_t cycles = 0;
    std::int64_t paths_examined = 0;
    std::vector<int> path;
    std::vector<bool> in_path(m, false);

    struct Frame { int vertex; std::size_t next; };
    for (int s = 0; s < m; ++s) {
        for (std::size_t a = 0; a < nbr[s].size(); ++a) {
            int first = nbr[s][a];
            if (first < s) continue;
            path.assign({s, first});
            in_path.assign(m, false);
            in_path[s] = in_path[first] = true;
            std::vector<Frame> frames{{first, 0}};
            while (!frames.empty()) {
                Frame& f = frames.back();
                int tip = f.vertex;
                if (f.next == 0 && ++paths_examined > budget)
                    throw CycleBudgetExceeded("chordless cycle enumeration exceeded " +
                                              std::to_string(budget) + " partial paths");
                bool descended = false;
                while (f.next < nbr[tip].size()) {
                    int x = nbr[tip][f.next++];
                    if (x <= s || in_path[x]) continue;
                    // chord test against interior path vertices (everything
                    // strictly between s and the tip)
                    bool chord = false;
                    for (std::size_t q = 1; q + 1 < path.size(); ++q)
                        if (adj[x][path[q]]) { chord = true; break; }
                    if (chord) continue;
                    if (adj[x][s]) {
                        // closing x-s edge; orientation with the larger second
                        // neighbour of s closing keeps each cycle counted once
                        if (x > path[1]) ++cycles;
                        continue;  // extending past x would leave the x-s chord
                    }
                    path.push_back(x);
                    in_path[x] = true;
                    frames.push_back({x, 0});
                    descended = true;
                    break;
                }
                if (!descended) {
                    in_path[tip] = false;
                    path.pop_back();
                    frames.pop_back();
                }
            }
        }
    }
    return cycles;
}

} // namespace riboflow
