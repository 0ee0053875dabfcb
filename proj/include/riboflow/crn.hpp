#pragma once

#include <string>
#include <vector>

#include "riboflow/graph.hpp"

namespace riboflow {

// CRN assigned to a compartmental model: species N_1..N_m, S_1..S_m (indices
// 0..m-1 are particle species, m..2m-1 are space species), one reaction
// N_i + S_j -> N_j + S_i per transition (i,j).  Complexes all have the form
// e_a + e_b and are stored as the index pair (a, b), a < b.
struct Crn {
    int m = 0;
    std::vector<std::string> species;                    // display names
    std::vector<std::pair<int, int>> complexes;          // deduplicated, each (a,b) with a<b
    std::vector<std::pair<int, int>> reactions;          // (source complex idx, product complex idx)
    std::vector<std::vector<int>> linkage_classes;       // partition of complex indices

    int num_complexes() const { return static_cast<int>(complexes.size()); }
    int num_linkage_classes() const { return static_cast<int>(linkage_classes.size()); }
    // dense 2m-vector of the reaction vector y' - y for reaction k
    std::vector<int> reaction_vector(int k) const;
};

Crn assign_crn(const CompartmentalModel& model);

// Deficiency M - l - s with s the exact rank of the reaction-vector matrix
// over the rationals (fraction-free integer elimination; entries are +-1/0).
int deficiency_by_rank(const Crn& crn);

struct SiphonReport {
    std::vector<std::vector<int>> siphons;   // minimal siphons, species indices sorted
    bool characterization_ok = false;        // every minimal siphon matches a known clause
    std::vector<std::string> witnesses;      // per-siphon clause description
    bool degenerate = false;                 // no reactions: every singleton is a siphon
};

// Brute-force minimal-siphon enumeration; requires 2m <= max_species.
SiphonReport enumerate_siphons(const Crn& crn, int max_species = 16);

// True iff the siphon contains the support of one of the known nonnegative
// conservation vectors: e_i + e_{m+i} for some compartment i, the all-N
// vector, or the all-S vector.
bool check_conserved_support(const Crn& crn, const std::vector<int>& siphon);

} // namespace riboflow
