#include "riboflow/scenario.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "json.hpp"
#include "riboflow/crn.hpp"
#include "riboflow/errors.hpp"
#include "riboflow/longtime.hpp"

namespace riboflow {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string fmt12(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return buf;
}

const json& need(const json& j, const char* key, const std::string& where) {
    auto it = j.find(key);
    if (it == j.end())
        throw ParseError("missing field '" + std::string(key) + "' in " + where);
    return *it;
}

double need_num(const json& j, const char* key, const std::string& where) {
    const json& v = need(j, key, where);
    if (!v.is_number())
        throw ParseError("field '" + std::string(key) + "' in " + where + " must be a number");
    return v.get<double>();
}

double opt_num(const json& j, const char* key, const std::string& where, double dflt) {
    if (!j.contains(key)) return dflt;
    return need_num(j, key, where);
}

int need_int(const json& j, const char* key, const std::string& where) {
    const json& v = need(j, key, where);
    if (!v.is_number_integer())
        throw ParseError("field '" + std::string(key) + "' in " + where + " must be an integer");
    return v.get<int>();
}

int opt_int(const json& j, const char* key, const std::string& where, int dflt) {
    if (!j.contains(key)) return dflt;
    return need_int(j, key, where);
}

bool opt_bool(const json& j, const char* key, const std::string& where, bool dflt) {
    if (!j.contains(key)) return dflt;
    const json& v = j.at(key);
    if (!v.is_boolean())
        throw ParseError("field '" + std::string(key) + "' in " + where + " must be a boolean");
    return v.get<bool>();
}

std::string need_str(const json& j, const char* key, const std::string& where) {
    const json& v = need(j, key, where);
    if (!v.is_string())
        throw ParseError("field '" + std::string(key) + "' in " + where + " must be a string");
    return v.get<std::string>();
}

const json& need_array(const json& j, const char* key, const std::string& where) {
    const json& v = need(j, key, where);
    if (!v.is_array())
        throw ParseError("field '" + std::string(key) + "' in " + where + " must be an array");
    return v;
}

std::vector<double> num_vector(const json& v, const std::string& where) {
    if (!v.is_array()) throw ParseError(where + " must be an array of numbers");
    std::vector<double> out;
    for (const auto& x : v) {
        if (!x.is_number()) throw ParseError(where + " must contain numbers only");
        out.push_back(x.get<double>());
    }
    return out;
}

std::string edge_name(int i, int j) {
    return "(" + std::to_string(i + 1) + "," + std::to_string(j + 1) + ")";
}

Transform parse_transform(const json& j, const std::string& where) {
    if (!j.is_object()) throw ParseError(where + " must be an object");
    const std::string kind = need_str(j, "kind", where);
    if (kind == "identity") return Transform::identity();
    if (kind == "power") return Transform::power(need_num(j, "a", where));
    if (kind == "monod") return Transform::monod(need_num(j, "l", where));
    if (kind == "hill_ratio")
        return Transform::hill_ratio(need_num(j, "l", where), need_num(j, "L", where));
    if (kind == "power_ratio")
        return Transform::power_over_shifted_power(need_num(j, "l", where),
                                                   need_num(j, "a", where),
                                                   need_num(j, "b", where));
    if (kind == "hill")
        return Transform::hill_general(need_num(j, "l", where), need_num(j, "p", where),
                                       need_num(j, "q", where));
    throw BadParameter("unknown transform kind '" + kind + "' in " + where);
}

json emit_transform(const Transform& t) {
    json j;
    switch (t.kind) {
        case Transform::Kind::identity: j["kind"] = "identity"; break;
        case Transform::Kind::power:
            j["kind"] = "power";
            j["a"] = t.a;
            break;
        case Transform::Kind::monod:
            j["kind"] = "monod";
            j["l"] = t.l;
            break;
        case Transform::Kind::hill_ratio:
            j["kind"] = "hill_ratio";
            j["l"] = t.l;
            j["L"] = t.L;
            break;
        case Transform::Kind::power_over_shifted_power:
            j["kind"] = "power_ratio";
            j["l"] = t.l;
            j["a"] = t.a;
            j["b"] = t.b;
            break;
        case Transform::Kind::hill_general:
            j["kind"] = "hill";
            j["l"] = t.l;
            j["p"] = t.a;
            j["q"] = t.b;
            break;
    }
    return j;
}

bool same_transform(const Transform& x, const Transform& y) {
    return x.kind == y.kind && x.l == y.l && x.a == y.a && x.b == y.b && x.L == y.L;
}

TimeCoefficient parse_coefficient(const json& j, const std::string& where) {
    if (!j.is_object()) throw ParseError(where + " must be an object");
    const std::string kind = need_str(j, "kind", where);
    if (kind == "constant") return TimeCoefficient::constant(need_num(j, "kbar", where));
    if (kind == "decaying")
        return TimeCoefficient::decaying(need_num(j, "kbar", where),
                                         need_num(j, "amplitude", where),
                                         need_num(j, "rate", where));
    if (kind == "sinusoid") {
        double phase = opt_num(j, "phase", where, 0.0);
        if (j.contains("waveform")) {
            const std::string w = need_str(j, "waveform", where);
            if (w == "sin")
                phase -= std::acos(-1.0) / 2.0;  // sin(x) = cos(x - pi/2)
            else if (w != "cos")
                throw BadParameter("unknown waveform '" + w + "' in " + where);
        }
        return TimeCoefficient::sinusoid(need_num(j, "kbar", where),
                                         need_num(j, "offset", where),
                                         need_num(j, "amplitude", where),
                                         need_num(j, "frequency", where), phase);
    }
    if (kind == "piecewise") {
        const json& segs = need_array(j, "segments", where);
        std::vector<std::pair<double, TimeCoefficient>> segments;
        for (std::size_t k = 0; k < segs.size(); ++k) {
            const std::string sw = where + ".segments[" + std::to_string(k) + "]";
            if (!segs[k].is_object()) throw ParseError(sw + " must be an object");
            segments.emplace_back(need_num(segs[k], "t", sw),
                                  parse_coefficient(need(segs[k], "k", sw), sw + ".k"));
        }
        return TimeCoefficient::piecewise(std::move(segments));
    }
    throw BadParameter("unknown coefficient kind '" + kind + "' in " + where);
}

json emit_coefficient(const TimeCoefficient& k) {
    json j;
    switch (k.kind) {
        case TimeCoefficient::Kind::constant:
            j["kind"] = "constant";
            j["kbar"] = k.kbar;
            break;
        case TimeCoefficient::Kind::decaying:
            j["kind"] = "decaying";
            j["kbar"] = k.kbar;
            j["amplitude"] = k.amplitude;
            j["rate"] = k.rate;
            break;
        case TimeCoefficient::Kind::sinusoid:
            j["kind"] = "sinusoid";
            j["kbar"] = k.kbar;
            j["offset"] = k.offset;
            j["amplitude"] = k.amplitude;
            j["frequency"] = k.frequency;
            j["phase"] = k.phase;
            break;
        case TimeCoefficient::Kind::piecewise: {
            j["kind"] = "piecewise";
            json segs = json::array();
            for (const auto& [t, child] : k.segments)
                segs.push_back(json{{"t", t}, {"k", emit_coefficient(child)}});
            j["segments"] = std::move(segs);
            break;
        }
    }
    return j;
}

std::pair<int, int> parse_edge(const json& v, int m, const std::string& where) {
    if (!v.is_array() || v.size() != 2 || !v[0].is_number_integer() || !v[1].is_number_integer())
        throw ParseError(where + " must be a pair of integers");
    const int i = v[0].get<int>(), j = v[1].get<int>();
    if (i < 1 || i > m || j < 1 || j > m)
        throw IndexOutOfRange("edge [" + std::to_string(i) + "," + std::to_string(j) + "] in " +
                              where + " outside compartments 1.." + std::to_string(m));
    return {i - 1, j - 1};
}

DenominatorPoly parse_psi(const json& v, int m, const std::string& where) {
    DenominatorPoly poly;
    if (!v.is_array()) throw ParseError(where + " must be an array");
    for (std::size_t k = 0; k < v.size(); ++k) {
        const std::string tw = where + "[" + std::to_string(k) + "]";
        if (!v[k].is_object()) throw ParseError(tw + " must be an object");
        DenominatorPoly::Term term;
        term.alpha = need_num(v[k], "alpha", tw);
        if (!(term.alpha >= 0.0)) throw BadParameter("alpha in " + tw + " must be >= 0");
        auto exponents = [&](const char* key) {
            std::vector<int> e(m, 0);
            if (!v[k].contains(key)) return e;
            const json& arr = v[k].at(key);
            if (!arr.is_array() || static_cast<int>(arr.size()) != m)
                throw ParseError("field '" + std::string(key) + "' in " + tw + " must list " +
                                 std::to_string(m) + " integer exponents");
            for (int i = 0; i < m; ++i) {
                if (!arr[i].is_number_integer() || arr[i].get<int>() < 0)
                    throw BadParameter("exponents in " + tw + " must be nonnegative integers");
                e[i] = arr[i].get<int>();
            }
            return e;
        };
        term.r1 = exponents("r1");
        term.r2 = exponents("r2");
        poly.terms.push_back(std::move(term));
    }
    return poly;
}

json emit_psi(const DenominatorPoly& poly) {
    json arr = json::array();
    for (const auto& t : poly.terms)
        arr.push_back(json{{"alpha", t.alpha}, {"r1", t.r1}, {"r2", t.r2}});
    return arr;
}

std::vector<Transform> derive_thetas(const CompartmentalModel& model,
                                     const std::vector<RateSpec>& rates) {
    std::vector<const Transform*> chosen(model.m, nullptr);
    for (const auto& r : rates) {
        const Transform*& slot = chosen[r.edge.first];
        if (slot == nullptr)
            slot = &r.theta;
        else if (!same_transform(*slot, r.theta))
            throw BadParameter("compartment " + std::to_string(r.edge.first + 1) +
                               " has conflicting outgoing transforms; the integral family "
                               "needs exactly one per compartment");
    }
    std::vector<Transform> out;
    for (int i = 0; i < model.m; ++i) {
        if (chosen[i] == nullptr)
            throw BadParameter("compartment " + std::to_string(i + 1) +
                               " has no outgoing transform for the integral family");
        out.push_back(*chosen[i]);
    }
    return out;
}

const char* member_kind_name(LyapunovSpec::Kind k) {
    switch (k) {
        case LyapunovSpec::Kind::ltv: return "ltv";
        case LyapunovSpec::Kind::general_integral: return "general_integral";
        case LyapunovSpec::Kind::lab: return "lab";
        case LyapunovSpec::Kind::hill_32: return "hill_32";
        case LyapunovSpec::Kind::hill_22: return "hill_22";
        case LyapunovSpec::Kind::hill_1505: return "hill_1505";
    }
    return "?";
}

LyapunovMemberSpec parse_member(const json& j, std::size_t idx, const CompartmentalModel& model,
                                const std::vector<RateSpec>& rates) {
    const std::string where = "analysis.members[" + std::to_string(idx) + "]";
    if (!j.is_object()) throw ParseError(where + " must be an object");
    const std::string kind = need_str(j, "kind", where);
    LyapunovMemberSpec member;
    if (kind == "ltv") {
        member.spec.kind = LyapunovSpec::Kind::ltv;
    } else if (kind == "general_integral") {
        member.spec.kind = LyapunovSpec::Kind::general_integral;
        member.spec.thetas = derive_thetas(model, rates);
    } else if (kind == "lab") {
        member.spec.kind = LyapunovSpec::Kind::lab;
        member.spec.l = need_num(j, "l", where);
        member.spec.a = num_vector(need_array(j, "a", where), where + ".a");
        member.spec.b = num_vector(need_array(j, "b", where), where + ".b");
    } else if (kind == "hill_32" || kind == "hill_22" || kind == "hill_1505") {
        member.spec.kind = kind == "hill_32"   ? LyapunovSpec::Kind::hill_32
                           : kind == "hill_22" ? LyapunovSpec::Kind::hill_22
                                               : LyapunovSpec::Kind::hill_1505;
        member.spec.l = need_num(j, "l", where);
    } else {
        throw BadParameter("unknown Lyapunov member kind '" + kind + "' in " + where);
    }
    if (j.contains("weights"))
        member.spec.weights = num_vector(j.at("weights"), where + ".weights");
    member.label = j.contains("label") ? need_str(j, "label", where)
                                       : kind + "_" + std::to_string(idx);
    if (member.label.empty()) throw BadParameter("empty member label in " + where);
    for (char c : member.label)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-')
            throw BadParameter("member label '" + member.label + "' in " + where +
                               " may use letters, digits, '_' and '-' only");
    return member;
}

json emit_member(const LyapunovMemberSpec& m) {
    json j;
    j["kind"] = member_kind_name(m.spec.kind);
    j["label"] = m.label;
    switch (m.spec.kind) {
        case LyapunovSpec::Kind::lab:
            j["l"] = m.spec.l;
            j["a"] = m.spec.a;
            j["b"] = m.spec.b;
            break;
        case LyapunovSpec::Kind::hill_32:
        case LyapunovSpec::Kind::hill_22:
        case LyapunovSpec::Kind::hill_1505: j["l"] = m.spec.l; break;
        default: break;
    }
    if (!m.spec.weights.empty()) j["weights"] = m.spec.weights;
    return j;
}

Analysis::Kind parse_kind_name(const std::string& kind) {
    if (kind == "analyze") return Analysis::Kind::analyze;
    if (kind == "simulate") return Analysis::Kind::simulate;
    if (kind == "equilibria") return Analysis::Kind::equilibria;
    if (kind == "entrain") return Analysis::Kind::entrain;
    if (kind == "lyapunov") return Analysis::Kind::lyapunov;
    throw BadParameter("unknown analysis kind '" + kind + "'");
}

const char* kind_name(Analysis::Kind k) {
    switch (k) {
        case Analysis::Kind::analyze: return "analyze";
        case Analysis::Kind::simulate: return "simulate";
        case Analysis::Kind::equilibria: return "equilibria";
        case Analysis::Kind::entrain: return "entrain";
        case Analysis::Kind::lyapunov: return "lyapunov";
    }
    return "?";
}

void parse_sim_options(const json& j, const std::string& where, SimOptions& o) {
    o.t_end = need_num(j, "t_end", where);
    o.dense_output_stride = opt_num(j, "stride", where, o.dense_output_stride);
    o.rel_tol = opt_num(j, "rel_tol", where, o.rel_tol);
    o.abs_tol = opt_num(j, "abs_tol", where, o.abs_tol);
    o.max_step = opt_num(j, "max_step", where, o.max_step);
    if (j.contains("method")) {
        const std::string m = need_str(j, "method", where);
        if (m == "adaptive")
            o.method = Method::adaptive_rk45;
        else if (m == "fixed")
            o.method = Method::fixed_rk4;
        else
            throw BadParameter("unknown method '" + m + "' in " + where);
    }
}

json emit_sim_options(const SimOptions& o) {
    json j;
    j["t_end"] = o.t_end;
    j["stride"] = o.dense_output_stride;
    j["rel_tol"] = o.rel_tol;
    j["abs_tol"] = o.abs_tol;
    if (o.max_step > 0.0) j["max_step"] = o.max_step;
    if (o.method == Method::fixed_rk4) j["method"] = "fixed";
    return j;
}

Analysis parse_analysis(const json& j, const CompartmentalModel& model,
                        const std::vector<RateSpec>& rates) {
    const std::string where = "analysis";
    if (!j.is_object()) throw ParseError("analysis must be an object");
    Analysis a;
    a.kind = parse_kind_name(need_str(j, "kind", where));
    switch (a.kind) {
        case Analysis::Kind::analyze:
            a.cycle_budget = static_cast<std::int64_t>(
                opt_num(j, "cycle_budget", where, static_cast<double>(a.cycle_budget)));
            a.max_siphon_species = opt_int(j, "max_siphon_species", where, a.max_siphon_species);
            break;
        case Analysis::Kind::simulate:
            parse_sim_options(j, where, a.sim);
            a.full = opt_bool(j, "full", where, false);
            a.tau = opt_num(j, "tau", where, a.tau);
            break;
        case Analysis::Kind::equilibria: {
            if (j.contains("levels")) {
                a.levels = num_vector(j.at("levels"), where + ".levels");
            } else {
                const json& lr = need(j, "level_range", where);
                const double lo = need_num(lr, "min", where + ".level_range");
                const double hi = need_num(lr, "max", where + ".level_range");
                const int count = need_int(lr, "count", where + ".level_range");
                if (count < 2 || !(hi > lo))
                    throw BadParameter("level_range needs max > min and count >= 2");
                for (int k = 0; k < count; ++k)
                    a.levels.push_back(lo + (hi - lo) * k / (count - 1));
            }
            a.eq_tol = opt_num(j, "tol", where, a.eq_tol);
            a.multistart = opt_int(j, "multistart", where, 0);
            break;
        }
        case Analysis::Kind::entrain:
            a.n_periods = need_int(j, "n_periods", where);
            break;
        case Analysis::Kind::lyapunov: {
            parse_sim_options(j, where, a.sim);
            const json& members = need_array(j, "members", where);
            if (members.empty()) throw BadParameter("analysis.members is empty");
            for (std::size_t k = 0; k < members.size(); ++k)
                a.members.push_back(parse_member(members[k], k, model, rates));
            for (std::size_t x = 0; x < a.members.size(); ++x)
                for (std::size_t y = x + 1; y < a.members.size(); ++y)
                    if (a.members[x].label == a.members[y].label)
                        throw BadParameter("duplicate member label '" + a.members[x].label + "'");
            if (j.contains("nbar")) {
                a.nbar = num_vector(j.at("nbar"), where + ".nbar");
                if (static_cast<int>(a.nbar.size()) != model.m)
                    throw BadParameter("nbar must list one value per compartment");
            }
            if (j.contains("surface")) {
                const json& s = j.at("surface");
                a.surface.member = need_int(s, "member", where + ".surface");
                a.surface.points = need_int(s, "points", where + ".surface");
                if (a.surface.points < 2)
                    throw BadParameter("surface export needs at least 2 grid points per axis");
                if (a.surface.member < 0 ||
                    a.surface.member >= static_cast<int>(a.members.size()))
                    throw IndexOutOfRange("surface member index " +
                                          std::to_string(a.surface.member) +
                                          " outside the member list");
                if (model.m != 3)
                    throw BadParameter(
                        "surface export restricts the level manifold of a three-compartment "
                        "model");
            }
            break;
        }
    }
    return a;
}

json emit_analysis(const Analysis& a) {
    json j;
    j["kind"] = kind_name(a.kind);
    switch (a.kind) {
        case Analysis::Kind::analyze:
            j["cycle_budget"] = a.cycle_budget;
            j["max_siphon_species"] = a.max_siphon_species;
            break;
        case Analysis::Kind::simulate:
            j.update(emit_sim_options(a.sim));
            if (a.full) j["full"] = true;
            j["tau"] = a.tau;
            break;
        case Analysis::Kind::equilibria:
            j["levels"] = a.levels;
            j["tol"] = a.eq_tol;
            if (a.multistart > 0) j["multistart"] = a.multistart;
            break;
        case Analysis::Kind::entrain: j["n_periods"] = a.n_periods; break;
        case Analysis::Kind::lyapunov: {
            j.update(emit_sim_options(a.sim));
            json members = json::array();
            for (const auto& m : a.members) members.push_back(emit_member(m));
            j["members"] = std::move(members);
            if (!a.nbar.empty()) j["nbar"] = a.nbar;
            if (a.surface.points > 0)
                j["surface"] = json{{"member", a.surface.member}, {"points", a.surface.points}};
            break;
        }
    }
    return j;
}

std::vector<std::vector<double>> resolve_initial(const Scenario& s) {
    if (!s.initial_states.empty()) return s.initial_states;
    if (s.level >= 0.0) {
        std::vector<double> ic(s.model.m);
        for (int i = 0; i < s.model.m; ++i)
            ic[i] = s.level * s.model.capacities[i] / s.model.total_capacity;
        return {std::move(ic)};
    }
    throw BadParameter("scenario provides no initial condition");
}

void write_csv(const fs::path& path, const std::string& header,
               const std::vector<std::vector<double>>& rows) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
    f << header << '\n';
    std::string line;
    for (const auto& row : rows) {
        line.clear();
        for (std::size_t k = 0; k < row.size(); ++k) {
            if (k) line += ',';
            line += fmt12(row[k]);
        }
        f << line << '\n';
    }
}

std::string state_header(int m, bool full) {
    std::string h = "t";
    for (int i = 1; i <= m; ++i) h += ",n_" + std::to_string(i);
    if (full)
        for (int i = 1; i <= m; ++i) h += ",s_" + std::to_string(i);
    return h;
}

std::vector<std::vector<double>> trajectory_rows(const Trajectory& traj) {
    std::vector<std::vector<double>> rows;
    rows.reserve(traj.times.size());
    for (std::size_t k = 0; k < traj.times.size(); ++k) {
        std::vector<double> row;
        row.reserve(1 + traj.states[k].size());
        row.push_back(traj.times[k]);
        row.insert(row.end(), traj.states[k].begin(), traj.states[k].end());
        rows.push_back(std::move(row));
    }
    return rows;
}

double max_field_norm(const CompartmentalModel& model, const std::vector<RateSpec>& rates,
                      const std::vector<double>& n) {
    std::vector<double> f(model.m);
    reduced_vector_field(model, rates, 0.0, n, f);
    double mx = 0.0;
    for (double v : f) mx = std::max(mx, std::abs(v));
    return mx;
}

bool run_analyze(const Scenario& s, const fs::path&, RunReport&, json& checks) {
    const Connectivity conn = connectivity(s.model);
    const Crn crn = assign_crn(s.model);
    const int merged = static_cast<int>(merged_edges(s.model).size());
    const int delta_rank = deficiency_by_rank(crn);
    const std::int64_t delta_cycles =
        count_chordless_cycles(s.model, s.analysis.cycle_budget);

    checks["strongly_connected"] = conn.strongly_connected;
    checks["weakly_reversible"] = conn.weakly_reversible;
    checks["components"] = conn.condensation.components.size();
    checks["delta_rank"] = delta_rank;
    checks["delta_cycles"] = delta_cycles;
    checks["deficiency_match"] = delta_cycles == delta_rank;
    checks["cyclomatic_number"] = cyclomatic_number(s.model);
    checks["num_species"] = 2 * s.model.m;
    checks["num_complexes"] = crn.num_complexes();
    checks["num_linkage_classes"] = crn.num_linkage_classes();
    checks["num_reactions"] = crn.reactions.size();
    const bool complexes_ok = crn.num_complexes() == 2 * merged;
    const bool linkage_ok = crn.num_linkage_classes() == merged;
    checks["complexes_are_twice_merged_edges"] = complexes_ok;
    checks["linkage_classes_are_merged_edges"] = linkage_ok;

    if (2 * s.model.m <= s.analysis.max_siphon_species) {
        const SiphonReport rep = enumerate_siphons(crn, s.analysis.max_siphon_species);
        bool conserved = true;
        for (const auto& siphon : rep.siphons)
            conserved = conserved && check_conserved_support(crn, siphon);
        checks["siphons"] = json{{"count", rep.siphons.size()},
                                 {"characterization_ok", rep.characterization_ok},
                                 {"all_contain_conserved_support", conserved}};
    } else {
        checks["siphons"] = "skipped: more species than max_siphon_species";
    }
    return complexes_ok && linkage_ok;
}

bool run_simulate(const Scenario& s, const fs::path& out, RunReport& rep, json& checks) {
    const auto ics = resolve_initial(s);
    double max_total = 0.0, max_percomp = 0.0;
    double margin = std::numeric_limits<double>::infinity();
    bool margin_defined = false;
    for (std::size_t k = 0; k < ics.size(); ++k) {
        Trajectory traj;
        if (s.analysis.full) {
            std::vector<double> s0(s.model.m);
            for (int i = 0; i < s.model.m; ++i) s0[i] = s.model.capacities[i] - ics[k][i];
            traj = simulate_full(s.model, s.rates, ics[k], s0, s.analysis.sim);
        } else {
            traj = simulate_reduced(s.model, s.rates, ics[k], s.analysis.sim);
        }
        const std::string name =
            ics.size() == 1 ? "trajectory.csv" : "trajectory_" + std::to_string(k + 1) + ".csv";
        write_csv(out / name, state_header(s.model.m, s.analysis.full), trajectory_rows(traj));
        rep.outputs.push_back(name);
        const ConservationReport cons = conservation_report(traj);
        max_total = std::max(max_total, cons.max_total_drift);
        max_percomp = std::max(max_percomp, cons.max_percompartment_drift);
        if (s.analysis.sim.t_end > s.analysis.tau) {
            margin = std::min(margin, persistence_margin(traj, s.analysis.tau));
            margin_defined = true;
        }
    }
    checks["max_total_drift"] = max_total;
    if (s.analysis.full) checks["max_percompartment_drift"] = max_percomp;
    checks["tau"] = s.analysis.tau;
    if (margin_defined)
        checks["persistence_margin"] = margin;
    else
        checks["persistence_margin"] = nullptr;
    const double drift = std::max(max_total, s.analysis.full ? max_percomp : 0.0);
    checks["conservation_ok"] = drift <= 1e-8;
    return drift <= 1e-8;
}

bool run_equilibria(const Scenario& s, const fs::path& out, RunReport& rep, json& checks,
                    unsigned seed) {
    const EquilibriumCurve curve =
        equilibrium_curve(s.model, s.rates, s.analysis.levels, s.analysis.eq_tol);
    std::vector<std::vector<double>> rows;
    for (std::size_t k = 0; k < curve.r_grid.size(); ++k) {
        std::vector<double> row{curve.r_grid[k]};
        row.insert(row.end(), curve.points[k].begin(), curve.points[k].end());
        row.push_back(curve.residuals[k]);
        rows.push_back(std::move(row));
    }
    std::string header = "r";
    for (int i = 1; i <= s.model.m; ++i) header += ",e_" + std::to_string(i);
    header += ",residual";
    write_csv(out / "curve.csv", header, rows);
    rep.outputs.push_back("curve.csv");

    bool strict = true;
    for (int i = 0; i < s.model.m; ++i)
        for (std::size_t k = 0; k + 1 < curve.points.size(); ++k)
            if (!(curve.points[k + 1][i] - curve.points[k][i] > 0.0)) strict = false;
    double max_residual = 0.0;
    for (double rres : curve.residuals) max_residual = std::max(max_residual, rres);
    checks["nondecreasing"] = curve.nondecreasing;
    checks["strictly_increasing_all"] = strict;
    checks["max_residual"] = max_residual;

    if (s.analysis.multistart > 0) {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        double spread = 0.0;
        for (double r : s.analysis.levels) {
            if (r <= 0.0 || r >= s.model.total_capacity) continue;
            std::vector<std::vector<double>> points;
            for (int k = 0; k < s.analysis.multistart; ++k) {
                std::vector<double> start(s.model.m);
                for (int i = 0; i < s.model.m; ++i)
                    start[i] = unit(rng) * s.model.capacities[i];
                // redistribute onto the level set
                for (int pass = 0; pass < 64; ++pass) {
                    const double gap =
                        r - std::accumulate(start.begin(), start.end(), 0.0);
                    if (std::abs(gap) <= 1e-12 * (1.0 + r)) break;
                    int slack = 0;
                    for (int i = 0; i < s.model.m; ++i)
                        if ((gap > 0.0 && start[i] < s.model.capacities[i]) ||
                            (gap < 0.0 && start[i] > 0.0))
                            ++slack;
                    if (slack == 0) break;
                    for (int i = 0; i < s.model.m; ++i)
                        start[i] = std::clamp(start[i] + gap / slack, 0.0,
                                              s.model.capacities[i]);
                }
                points.push_back(
                    find_equilibrium(s.model, s.rates, r, s.analysis.eq_tol, start).point);
            }
            for (std::size_t x = 0; x < points.size(); ++x)
                for (std::size_t y = x + 1; y < points.size(); ++y) {
                    double d = 0.0;
                    for (int i = 0; i < s.model.m; ++i)
                        d += std::abs(points[x][i] - points[y][i]);
                    spread = std::max(spread, d);
                }
        }
        checks["multistart_max_l1_spread"] = spread;
    }
    const bool ok =
        std::all_of(curve.nondecreasing.begin(), curve.nondecreasing.end(),
                    [](bool b) { return b; }) &&
        max_residual <= std::max(1e-8, 10.0 * s.analysis.eq_tol);
    checks["curve_ok"] = ok;
    return ok;
}

bool run_entrain(const Scenario& s, const fs::path& out, RunReport& rep, json& checks) {
    const auto ics = resolve_initial(s);
    const PeriodicOrbitEstimate est =
        entrainment_analysis(s.model, s.rates, ics, s.analysis.n_periods);

    std::vector<std::vector<double>> orbit;
    for (std::size_t k = 0; k < est.samples.size(); ++k) {
        std::vector<double> row{est.period * static_cast<double>(k) /
                                static_cast<double>(est.samples.size())};
        row.insert(row.end(), est.samples[k].begin(), est.samples[k].end());
        orbit.push_back(std::move(row));
    }
    std::string header = "phase";
    for (int i = 1; i <= s.model.m; ++i) header += ",n_" + std::to_string(i);
    write_csv(out / "orbit.csv", header, orbit);
    rep.outputs.push_back("orbit.csv");

    std::vector<std::vector<double>> hist;
    for (std::size_t p = 1; p < est.ic_spread_history.size(); ++p)
        hist.push_back({static_cast<double>(p), est.l1_history[p - 1],
                        est.ic_spread_history[p]});
    write_csv(out / "history.csv", "period,l1_residual,spread", hist);
    rep.outputs.push_back("history.csv");

    const double final_l1 = est.l1_history.empty() ? 0.0 : est.l1_history.back();
    const double final_spread =
        est.ic_spread_history.empty() ? 0.0 : est.ic_spread_history.back();
    // Below the 1e-4 convergence target the residual sits at the integrator
    // noise floor, where period-to-period jitter is not a real increase.
    int violations = 0, counted = 0;
    for (std::size_t p = 3; p < est.l1_history.size(); ++p) {
        ++counted;
        if (est.l1_history[p] > est.l1_history[p - 1] && est.l1_history[p] > 1e-4)
            ++violations;
    }
    const double fraction = counted ? static_cast<double>(violations) / counted : 0.0;
    checks["period"] = est.period;
    checks["final_l1_residual"] = final_l1;
    checks["final_spread"] = final_spread;
    checks["residual_increase_fraction_after_burnin"] = fraction;
    checks["warnings"] = est.warnings;
    const bool ok = final_l1 < 1e-4 && final_spread < 1e-4 && fraction <= 0.05;
    checks["entrainment_ok"] = ok;
    return ok;
}

bool run_lyapunov(const Scenario& s, const fs::path& out, RunReport& rep, json& checks) {
    if (s.analysis.members.empty())
        throw BadParameter("scenario declares no Lyapunov members");
    const auto ics = resolve_initial(s);
    const std::vector<double>& ic = ics.front();
    json warnings = json::array();
    if (ics.size() > 1)
        warnings.push_back("profile uses the first initial condition only");

    std::vector<double> nbar = s.analysis.nbar;
    if (nbar.empty()) {
        const double r = std::accumulate(ic.begin(), ic.end(), 0.0);
        nbar = find_equilibrium(s.model, s.rates, r, 1e-10).point;
    }
    checks["nbar"] = nbar;
    checks["nbar_field_norm"] = max_field_norm(s.model, s.rates, nbar);

    const Trajectory traj = simulate_reduced(s.model, s.rates, ic, s.analysis.sim);
    write_csv(out / "trajectory.csv", state_header(s.model.m, false), trajectory_rows(traj));
    rep.outputs.push_back("trajectory.csv");

    const std::size_t N = traj.times.size();
    bool ok = true;
    json members = json::array();
    for (const auto& member : s.analysis.members) {
        const LyapunovProfile prof = lyapunov_profile(traj, member.spec, nbar);
        const std::vector<double> chain =
            lyapunov_chain_rule(traj, member.spec, nbar, s.model, s.rates);
        std::vector<std::vector<double>> rows;
        for (std::size_t k = 0; k < N; ++k)
            rows.push_back({traj.times[k], prof.values[k], prof.derivative_estimates[k]});
        const std::string name = "profile_" + member.label + ".csv";
        write_csv(out / name, "t,V,dVdt", rows);
        rep.outputs.push_back(name);

        double max_interior = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 1; k + 1 < N; ++k)
            max_interior = std::max(max_interior, prof.derivative_estimates[k]);
        double mismatch = 0.0;
        for (std::size_t k = 0; k < N; ++k) {
            const double fd = prof.derivative_estimates[k];
            if (std::abs(fd) > 1e-6)
                mismatch = std::max(mismatch, std::abs(chain[k] - fd) / std::abs(fd));
        }
        const bool member_ok =
            (N < 3 || max_interior <= 1e-9) && mismatch <= 1e-6;
        members.push_back(json{{"label", member.label},
                               {"kind", member_kind_name(member.spec.kind)},
                               {"v_initial", prof.values.front()},
                               {"v_final", prof.values.back()},
                               {"max_dvdt_interior", max_interior},
                               {"chain_fd_max_rel_mismatch", mismatch},
                               {"decrease_ok", member_ok}});
        ok = ok && member_ok;
    }
    checks["members"] = std::move(members);

    if (s.analysis.surface.points > 0) {
        const auto& member = s.analysis.members[s.analysis.surface.member];
        const double r = std::accumulate(ic.begin(), ic.end(), 0.0);
        const int P = s.analysis.surface.points;
        std::vector<std::vector<double>> rows;
        for (int i = 0; i < P; ++i)
            for (int j = 0; j < P; ++j) {
                const double n1 = s.model.capacities[0] * i / (P - 1);
                const double n2 = s.model.capacities[1] * j / (P - 1);
                const double n3 = r - n1 - n2;
                if (n3 < 0.0 || n3 > s.model.capacities[2]) continue;
                rows.push_back({n1, n2, lyapunov_value(member.spec, {n1, n2, n3}, nbar)});
            }
        const std::string name = "surface_" + member.label + ".csv";
        write_csv(out / name, "n1,n2,V", rows);
        rep.outputs.push_back(name);
    }
    checks["warnings"] = std::move(warnings);
    return ok;
}

std::string utc_timestamp() {
    const std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

} // namespace

Scenario parse_scenario_text(const std::string& text, const std::string& origin) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(origin + ": " + e.what());
    }
    if (!doc.is_object()) throw ParseError(origin + ": top level must be an object");
    const int version = need_int(doc, "schema_version", "document");
    if (version != 1)
        throw BadParameter("unsupported schema_version " + std::to_string(version));

    Scenario s;
    s.name = need_str(doc, "name", "document");

    const json& jm = need(doc, "model", "document");
    const std::vector<double> capacities =
        num_vector(need_array(jm, "capacities", "model"), "model.capacities");
    const int m = static_cast<int>(capacities.size());
    const json& jedges = need_array(jm, "edges", "model");
    std::vector<std::pair<int, int>> edges;
    for (std::size_t k = 0; k < jedges.size(); ++k)
        edges.push_back(parse_edge(jedges[k], m, "model.edges[" + std::to_string(k) + "]"));
    s.model = build_model(m, edges, capacities);

    const json& jrates = need_array(doc, "rates", "document");
    std::vector<char> covered(edges.size(), 0);
    for (std::size_t k = 0; k < jrates.size(); ++k) {
        const std::string where = "rates[" + std::to_string(k) + "]";
        const json& jr = jrates[k];
        if (!jr.is_object()) throw ParseError(where + " must be an object");
        RateSpec spec;
        spec.edge = parse_edge(need(jr, "edge", where), m, where + ".edge");
        const int idx = s.model.edge_index(spec.edge.first, spec.edge.second);
        if (idx < 0)
            throw BadReference("rate declared for undeclared edge " +
                               edge_name(spec.edge.first, spec.edge.second));
        if (covered[idx])
            throw DuplicateEdge("two rates declared for edge " +
                                edge_name(spec.edge.first, spec.edge.second));
        covered[idx] = 1;
        spec.k = parse_coefficient(need(jr, "k", where), where + ".k");
        spec.theta = jr.contains("theta") ? parse_transform(jr.at("theta"), where + ".theta")
                                          : Transform::identity();
        spec.nu = jr.contains("nu") ? parse_transform(jr.at("nu"), where + ".nu")
                                    : Transform::identity();
        if (jr.contains("psi")) spec.psi = parse_psi(jr.at("psi"), m, where + ".psi");
        s.rates.push_back(std::move(spec));
    }
    for (std::size_t k = 0; k < covered.size(); ++k)
        if (!covered[k])
            throw BadReference("edge " + edge_name(edges[k].first, edges[k].second) +
                               " has no rate");

    if (doc.contains("initial")) {
        const json& ji = doc.at("initial");
        if (!ji.is_object()) throw ParseError("initial must be an object");
        if (ji.contains("states")) {
            const json& st = ji.at("states");
            if (!st.is_array() || st.empty())
                throw ParseError("initial.states must be a nonempty array");
            for (std::size_t k = 0; k < st.size(); ++k) {
                std::vector<double> ic = num_vector(
                    st[k], "initial.states[" + std::to_string(k) + "]");
                if (static_cast<int>(ic.size()) != m)
                    throw BadParameter("initial condition " + std::to_string(k + 1) + " has " +
                                       std::to_string(ic.size()) + " coordinates, expected " +
                                       std::to_string(m));
                for (int i = 0; i < m; ++i)
                    if (ic[i] < 0.0 || ic[i] > capacities[i])
                        throw BadParameter("initial condition " + std::to_string(k + 1) +
                                           " leaves the capacity box at coordinate " +
                                           std::to_string(i + 1));
                s.initial_states.push_back(std::move(ic));
            }
        } else if (ji.contains("level")) {
            s.level = need_num(ji, "level", "initial");
            if (s.level < 0.0 || s.level > s.model.total_capacity)
                throw BadParameter("initial level outside [0, total capacity]");
        } else {
            throw ParseError("initial must provide 'states' or 'level'");
        }
    }

    s.analysis = parse_analysis(need(doc, "analysis", "document"), s.model, s.rates);
    return s;
}

Scenario parse_scenario(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ParseError("cannot read scenario file " + path);
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return parse_scenario_text(text, path);
}

std::string emit_scenario(const Scenario& s) {
    json doc;
    doc["schema_version"] = 1;
    doc["name"] = s.name;
    json edges = json::array();
    for (const auto& [i, j] : s.model.transitions)
        edges.push_back(json::array({i + 1, j + 1}));
    doc["model"] = json{{"capacities", s.model.capacities}, {"edges", std::move(edges)}};
    json rates = json::array();
    for (const auto& r : s.rates) {
        json jr;
        jr["edge"] = json::array({r.edge.first + 1, r.edge.second + 1});
        jr["k"] = emit_coefficient(r.k);
        jr["theta"] = emit_transform(r.theta);
        jr["nu"] = emit_transform(r.nu);
        if (!r.psi.empty()) jr["psi"] = emit_psi(r.psi);
        rates.push_back(std::move(jr));
    }
    doc["rates"] = std::move(rates);
    if (!s.initial_states.empty())
        doc["initial"] = json{{"states", s.initial_states}};
    else if (s.level >= 0.0)
        doc["initial"] = json{{"level", s.level}};
    doc["analysis"] = emit_analysis(s.analysis);
    return doc.dump(2) + "\n";
}

RunReport run_scenario(const Scenario& s, const std::string& out_dir, unsigned seed) {
    const auto t0 = std::chrono::steady_clock::now();
    const fs::path out(out_dir);
    fs::create_directories(out);

    RunReport rep;
    json checks;
    switch (s.analysis.kind) {
        case Analysis::Kind::analyze:
            rep.checks_passed = run_analyze(s, out, rep, checks);
            break;
        case Analysis::Kind::simulate:
            rep.checks_passed = run_simulate(s, out, rep, checks);
            break;
        case Analysis::Kind::equilibria:
            rep.checks_passed = run_equilibria(s, out, rep, checks, seed);
            break;
        case Analysis::Kind::entrain:
            rep.checks_passed = run_entrain(s, out, rep, checks);
            break;
        case Analysis::Kind::lyapunov:
            rep.checks_passed = run_lyapunov(s, out, rep, checks);
            break;
    }

    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    json manifest;
    manifest["name"] = s.name;
    manifest["analysis"] = kind_name(s.analysis.kind);
    manifest["scenario"] = json::parse(emit_scenario(s));
    manifest["seed"] = seed;
    manifest["checks"] = std::move(checks);
    manifest["checks_passed"] = rep.checks_passed;
    manifest["outputs"] = rep.outputs;
    manifest["wall_time_seconds"] = wall;
    manifest["timestamp_utc"] = utc_timestamp();

    const fs::path mpath = out / "manifest.json";
    std::ofstream mf(mpath, std::ios::binary);
    if (!mf) throw std::runtime_error("cannot open " + mpath.string() + " for writing");
    mf << manifest.dump(2) << '\n';
    rep.manifest_path = mpath.string();
    return rep;
}

} // namespace riboflow
