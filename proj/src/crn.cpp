#include "riboflow/crn.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <map>
#include <numeric>

#include "riboflow/errors.hpp"

namespace riboflow {

std::vector<int> Crn::reaction_vector(int k) const {
    std::vector<int> v(2 * m, 0);
    auto [src, prod] = reactions[k];
    auto [a1, b1] = complexes[src];
    auto [a2, b2] = complexes[prod];
    v[a1] -= 1;
    v[b1] -= 1;
    v[a2] += 1;
    v[b2] += 1;
    return v;
}

Crn assign_crn(const CompartmentalModel& model) {
    Crn crn;
    crn.m = model.m;
    for (int i = 0; i < model.m; ++i) crn.species.push_back("N_" + std::to_string(i + 1));
    for (int i = 0; i < model.m; ++i) crn.species.push_back("S_" + std::to_string(i + 1));

    std::map<std::pair<int, int>, int> complex_index;
    auto intern = [&](int a, int b) {
        if (a > b) std::swap(a, b);
        auto [it, inserted] = complex_index.try_emplace({a, b}, crn.num_complexes());
        if (inserted) crn.complexes.emplace_back(a, b);
        return it->second;
    };
    for (auto [i, j] : model.transitions) {
        int src = intern(i, model.m + j);   // N_i + S_j
        int prod = intern(j, model.m + i);  // N_j + S_i
        crn.reactions.emplace_back(src, prod);
    }

    // linkage classes: connected components of the complex graph
    std::vector<int> parent(crn.num_complexes());
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (auto [src, prod] : crn.reactions) parent[find(src)] = find(prod);
    std::map<int, int> class_of_root;
    for (int k = 0; k < crn.num_complexes(); ++k) {
        int r = find(k);
        auto [it, inserted] = class_of_root.try_emplace(r, crn.num_linkage_classes());
        if (inserted) crn.linkage_classes.emplace_back();
        crn.linkage_classes[it->second].push_back(k);
    }
    return crn;
}

namespace {

// Exact rank by fraction-free (Bareiss) elimination.  Reaction vectors have
// entries in {-1,0,1} and form a totally unimodular system, so every
// intermediate divided minor stays in {-1,0,1} and int64 never overflows.
int exact_rank(std::vector<std::vector<std::int64_t>> a) {
    if (a.empty()) return 0;
    const int rows = static_cast<int>(a.size());
    const int cols = static_cast<int>(a[0].size());
    int rank = 0;
    std::int64_t prev_pivot = 1;
    for (int col = 0; col < cols && rank < rows; ++col) {
        int pivot_row = -1;
        for (int r = rank; r < rows; ++r)
            if (a[r][col] != 0) { pivot_row = r; break; }
        if (pivot_row < 0) continue;
        std::swap(a[rank], a[pivot_row]);
        for (int r = rank + 1; r < rows; ++r) {
            for (int c = col + 1; c < cols; ++c)
                a[r][c] = (a[rank][col] * a[r][c] - a[r][col] * a[rank][c]) / prev_pivot;
            a[r][col] = 0;
        }
        prev_pivot = a[rank][col];
        ++rank;
    }
    return rank;
}

} // namespace

int deficiency_by_rank(const Crn& crn) {
    std::vector<std::vector<std::int64_t>> rows;
    for (std::size_t k = 0; k < crn.reactions.size(); ++k) {
        auto v = crn.reaction_vector(static_cast<int>(k));
        rows.emplace_back(v.begin(), v.end());
    }
    int s = exact_rank(std::move(rows));
    return crn.num_complexes() - crn.num_linkage_classes() - s;
}

SiphonReport enumerate_siphons(const Crn& crn, int max_species) {
    const int ns = 2 * crn.m;
    if (ns > max_species || ns > 24)
        throw TooLarge("siphon enumeration is brute force and limited to " +
                       std::to_string(std::min(max_species, 24)) + " species, model has " +
                       std::to_string(ns));

    SiphonReport report;
    report.degenerate = crn.reactions.empty();

    // reaction k consumes the two species of its source complex and produces
    // the two of its product complex
    std::vector<std::uint32_t> consumes, produces;
    for (auto [src, prod] : crn.reactions) {
        consumes.push_back((1u << crn.complexes[src].first) | (1u << crn.complexes[src].second));
        produces.push_back((1u << crn.complexes[prod].first) | (1u << crn.complexes[prod].second));
    }

    auto is_siphon = [&](std::uint32_t z) {
        for (std::size_t k = 0; k < consumes.size(); ++k)
            if ((produces[k] & z) != 0 && (consumes[k] & z) == 0) return false;
        return true;
    };

    // subsets in increasing popcount order so supersets of found minimal
    // siphons can be skipped
    std::vector<std::uint32_t> minimal;
    std::vector<std::uint32_t> by_size[33];
    for (std::uint32_t z = 1; z < (1u << ns); ++z) by_size[std::popcount(z)].push_back(z);
    for (int size = 1; size <= ns; ++size) {
        for (std::uint32_t z : by_size[size]) {
            bool dominated = false;
            for (std::uint32_t s : minimal)
                if ((s & z) == s) { dominated = true; break; }
            if (dominated) continue;
            if (is_siphon(z)) minimal.push_back(z);
        }
    }

    std::uint32_t all_n = (1u << crn.m) - 1;
    std::uint32_t all_s = all_n << crn.m;
    report.characterization_ok = true;
    for (std::uint32_t z : minimal) {
        std::vector<int> set;
        for (int b = 0; b < ns; ++b)
            if (z & (1u << b)) set.push_back(b);
        std::string witness;
        for (int i = 0; i < crn.m && witness.empty(); ++i) {
            std::uint32_t pair = (1u << i) | (1u << (crn.m + i));
            if ((z & pair) == pair) witness = "contains {N_" + std::to_string(i + 1) + ",S_" + std::to_string(i + 1) + "}";
        }
        if (witness.empty() && (z & all_n) == all_n) witness = "contains all N species";
        if (witness.empty() && (z & all_s) == all_s) witness = "contains all S species";
        if (witness.empty()) {
            witness = "no matching clause";
            report.characterization_ok = false;
        }
        report.siphons.push_back(std::move(set));
        report.witnesses.push_back(std::move(witness));
    }
    return report;
}

bool check_conserved_support(const Crn& crn, const std::vector<int>& siphon) {
    std::vector<bool> in(2 * crn.m, false);
    for (int sp : siphon) {
        if (sp < 0 || sp >= 2 * crn.m)
            throw IndexOutOfRange("species index " + std::to_string(sp) + " out of range");
        in[sp] = true;
    }
    for (int i = 0; i < crn.m; ++i)
        if (in[i] && in[crn.m + i]) return true;  // n_i + s_i constant
    bool all_n = true, all_s = true;
    for (int i = 0; i < crn.m; ++i) {
        all_n = all_n && in[i];
        all_s = all_s && in[crn.m + i];
    }
    return all_n || all_s;  // total particle / free-space count constant
}

} // namespace riboflow
