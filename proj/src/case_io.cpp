#include "pst/case_io.hpp"

#include <cmath>
#include <numbers>
#include <fstream>
#include <set>
#include <sstream>
#include <type_traits>
#include <utility>

#include <json.hpp>

namespace pst {

namespace {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Field tables, shared by the reader and the writer.
// ---------------------------------------------------------------------------

template <class F> void fields(Classical& m, F&& f) {
    f("R", m.R); f("Xd_p", m.Xd_p); f("eq_p", m.eq_p);
}
template <class F> void fields(OneDOneQ& m, F&& f) {
    f("R", m.R); f("Xd", m.Xd); f("Xq", m.Xq); f("Xd_p", m.Xd_p); f("Xq_p", m.Xq_p);
    f("Td0_p", m.Td0_p); f("Tq0_p", m.Tq0_p);
}
template <class F> void fields(SixthOrderParams& m, F&& f) {
    f("R", m.R); f("Xd", m.Xd); f("Xq", m.Xq); f("Xd_p", m.Xd_p); f("Xq_p", m.Xq_p);
    f("Xd_pp", m.Xd_pp); f("Xq_pp", m.Xq_pp); f("Td0_p", m.Td0_p); f("Tq0_p", m.Tq0_p);
    f("Td0_pp", m.Td0_pp); f("Tq0_pp", m.Tq0_pp);
}
template <class F> void fields(MarconatoVI& m, F&& f) { fields(m.p, f); f("T_AA", m.T_AA); }
template <class F> void fields(AndersonFouadVI& m, F&& f) { fields(m.p, f); }

template <class F> void fields(SingleMass& s, F&& f) { f("H", s.H); f("D", s.D); }
template <class F> void fields(FiveMass& s, F&& f) {
    f("H", s.H); f("H_hp", s.H_hp); f("H_ip", s.H_ip); f("H_lp", s.H_lp); f("H_ex", s.H_ex);
    f("D", s.D); f("D_hp", s.D_hp); f("D_ip", s.D_ip); f("D_lp", s.D_lp); f("D_ex", s.D_ex);
    f("D_12", s.D_12); f("D_23", s.D_23); f("D_34", s.D_34); f("D_45", s.D_45);
    f("K_hp", s.K_hp); f("K_ip", s.K_ip); f("K_lp", s.K_lp); f("K_ex", s.K_ex);
    f("F_hp", s.F_hp); f("F_ip", s.F_ip); f("F_lp", s.F_lp);
}

template <class F> void fields(AVRFixed& a, F&& f) { f("V_f", a.V_f); }
template <class F> void fields(AVRTypeI& a, F&& f) {
    f("Ka", a.Ka); f("Ke", a.Ke); f("Kf", a.Kf); f("Ta", a.Ta); f("Te", a.Te); f("Tf", a.Tf);
    f("Tr", a.Tr); f("Vr_max", a.Vr_max); f("Vr_min", a.Vr_min); f("Ae", a.Ae); f("Be", a.Be);
}
template <class F> void fields(AVRTypeII& a, F&& f) {
    f("Ka", a.Ka); f("Ta", a.Ta); f("Tr", a.Tr); f("Vr_max", a.Vr_max); f("Vr_min", a.Vr_min);
}

template <class F> void fields(PSSFixed& p, F&& f) { f("V_pss", p.V_pss); }
template <class F> void fields(PSSSimplifiedDroop& p, F&& f) {
    f("K_omega", p.K_omega); f("K_p", p.K_p); f("limit", p.limit);
}

template <class F> void fields(TGFixed& t, F&& f) { f("efficiency", t.efficiency); }
template <class F> void fields(TGTypeI& t, F&& f) {
    f("droop", t.droop); f("Ts", t.Ts); f("Tc", t.Tc); f("T3", t.T3); f("T4", t.T4);
    f("T5", t.T5); f("P_min", t.P_min); f("P_max", t.P_max);
}
template <class F> void fields(TGTypeII& t, F&& f) {
    f("droop", t.droop); f("T1", t.T1); f("T2", t.T2);
}

template <class F> void fields(LCLFilter& x, F&& f) {
    f("lf", x.lf); f("rf", x.rf); f("cf", x.cf); f("lg", x.lg); f("rg", x.rg);
}
template <class F> void fields(LCFilter& x, F&& f) {
    f("lf", x.lf); f("rf", x.rf); f("cf", x.cf); f("lg", x.lg); f("rg", x.rg);
}
template <class F> void fields(AverageConverter& c, F&& f) { f("m_max", c.m_max); }
template <class F> void fields(FixedDCSource& c, F&& f) { f("v_dc", c.v_dc); }
template <class F> void fields(InnerLoop& c, F&& f) {
    f("kpv", c.kpv); f("kiv", c.kiv); f("kffv", c.kffv); f("rv", c.rv); f("lv", c.lv);
    f("kpc", c.kpc); f("kic", c.kic); f("kffi", c.kffi); f("omega_ad", c.omega_ad); f("kad", c.kad);
}
template <class F> void fields(OuterLoop& c, F&& f) {
    f("Ta", c.Ta); f("kd", c.kd); f("kw", c.kw); f("kq", c.kq); f("omega_f", c.omega_f);
}
template <class F> void fields(SrfPll& c, F&& f) {
    f("omega_lp", c.omega_lp); f("kp_pll", c.kp_pll); f("ki_pll", c.ki_pll);
}

template <class F> void fields(References& r, F&& f) {
    f("omega_ref", r.omega_ref); f("V_ref", r.V_ref); f("P_ref", r.P_ref); f("Q_ref", r.Q_ref);
}

constexpr std::string_view type_name(std::type_identity<Classical>) { return "Classical"; }
constexpr std::string_view type_name(std::type_identity<OneDOneQ>) { return "OneDOneQ"; }
constexpr std::string_view type_name(std::type_identity<MarconatoVI>) { return "MarconatoVI"; }
constexpr std::string_view type_name(std::type_identity<AndersonFouadVI>) { return "AndersonFouadVI"; }
constexpr std::string_view type_name(std::type_identity<SingleMass>) { return "SingleMass"; }
constexpr std::string_view type_name(std::type_identity<FiveMass>) { return "FiveMass"; }
constexpr std::string_view type_name(std::type_identity<AVRFixed>) { return "AVRFixed"; }
constexpr std::string_view type_name(std::type_identity<AVRTypeI>) { return "AVRTypeI"; }
constexpr std::string_view type_name(std::type_identity<AVRTypeII>) { return "AVRTypeII"; }
constexpr std::string_view type_name(std::type_identity<PSSFixed>) { return "PSSFixed"; }
constexpr std::string_view type_name(std::type_identity<PSSSimplifiedDroop>) { return "PSSSimplifiedDroop"; }
constexpr std::string_view type_name(std::type_identity<TGFixed>) { return "TGFixed"; }
constexpr std::string_view type_name(std::type_identity<TGTypeI>) { return "TGTypeI"; }
constexpr std::string_view type_name(std::type_identity<TGTypeII>) { return "TGTypeII"; }
constexpr std::string_view type_name(std::type_identity<LCLFilter>) { return "LCL"; }
constexpr std::string_view type_name(std::type_identity<LCFilter>) { return "LC"; }

// ---------------------------------------------------------------------------
// Reading
// ---------------------------------------------------------------------------

/// Reads keys of one JSON object and rejects keys it was never asked about.
class ObjectReader {
public:
    ObjectReader(const json& j, std::string context) : j_(j), context_(std::move(context)) {
        if (!j_.is_object()) {
            throw ParseError(context_ + ": expected an object");
        }
    }

    template <class T>
    void operator()(const char* key, T& value) {
        used_.insert(key);
        const auto it = j_.find(key);
        if (it == j_.end()) {
            return;
        }
        try {
            value = it->get<T>();
        } catch (const json::exception&) {
            throw ParseError(context_ + ": bad value for '" + key + "'");
        }
    }

    template <class T>
    void required(const char* key, T& value) {
        if (!j_.contains(key)) {
            throw ParseError(context_ + ": missing required key '" + key + "'");
        }
        (*this)(key, value);
    }

    /// Angle given either in radians (`key`) or degrees (`key_deg`).
    void angle(const std::string& key, double& radians) {
        const std::string deg = key + "_deg";
        used_.insert(key);
        used_.insert(deg);
        if (j_.contains(key) && j_.contains(deg)) {
            throw ParseError(context_ + ": both '" + key + "' and '" + deg + "' given");
        }
        if (j_.contains(deg)) {
            double d = 0.0;
            (*this)(deg.c_str(), d);
            radians = d * std::numbers::pi / 180.0;
        } else {
            (*this)(key.c_str(), radians);
        }
    }

    bool has(const char* key) const { return j_.contains(key); }
    const json& at(const char* key) {
        used_.insert(key);
        return j_.at(key);
    }

    void finish() const {
        for (const auto& [key, _] : j_.items()) {
            if (key != "type" && !used_.count(key)) {
                throw ParseError(context_ + ": unknown key '" + key + "'");
            }
        }
    }

    const std::string& context() const { return context_; }

private:
    const json& j_;
    std::string context_;
    std::set<std::string> used_;
};

template <class T>
T parse_fields(const json& j, const std::string& ctx) {
    T value{};
    ObjectReader r(j, ctx);
    fields(value, r);
    r.finish();
    return value;
}

template <class V, std::size_t I = 0>
V parse_variant(const json& j, const std::string& ctx) {
    if constexpr (I == std::variant_size_v<V>) {
        throw ParseError(ctx + ": unknown type '" + j.value("type", std::string{}) + "'");
    } else {
        using T = std::variant_alternative_t<I, V>;
        if (!j.is_object() || !j.contains("type")) {
            throw ParseError(ctx + ": missing 'type'");
        }
        if (j.at("type").get<std::string>() == type_name(std::type_identity<T>{})) {
            return parse_fields<T>(j, ctx + "." + std::string(type_name(std::type_identity<T>{})));
        }
        return parse_variant<V, I + 1>(j, ctx);
    }
}

/// A single-model slot: `type` is optional but must match when present.
template <class T>
T parse_slot(const json& j, const std::string& ctx, std::string_view expected_type) {
    if (j.contains("type") && j.at("type").get<std::string>() != expected_type) {
        throw ParseError(ctx + ": unsupported type '" + j.at("type").get<std::string>() + "'");
    }
    return parse_fields<T>(j, ctx);
}

BusType parse_bus_type(const std::string& s, const std::string& ctx) {
    if (s == "slack" || s == "REF") return BusType::Slack;
    if (s == "PV") return BusType::PV;
    if (s == "PQ") return BusType::PQ;
    throw ParseError(ctx + ": unknown bus type '" + s + "'");
}

std::string bus_type_name(BusType t) {
    switch (t) {
        case BusType::Slack: return "slack";
        case BusType::PV: return "PV";
        case BusType::PQ: return "PQ";
    }
    return "PQ";
}

Bus parse_bus(const json& j, std::size_t k) {
    ObjectReader r(j, "buses[" + std::to_string(k) + "]");
    Bus b;
    std::string type = "PQ";
    r.required("number", b.number);
    r("name", b.name);
    r("type", type);
    r("voltage_magnitude", b.voltage_magnitude);
    r.angle("voltage_angle", b.voltage_angle);
    r("base_kV", b.base_kV);
    r.finish();
    b.type = parse_bus_type(type, r.context());
    if (b.name.empty()) b.name = "bus" + std::to_string(b.number);
    return b;
}

BranchData parse_branch(const json& j, std::size_t k) {
    ObjectReader r(j, "branches[" + std::to_string(k) + "]");
    BranchData br;
    std::string kind = "static";
    r("name", br.name);
    r.required("from", br.from_bus);
    r.required("to", br.to_bus);
    r("R", br.R);
    r.required("X", br.X);
    r("B_from", br.B_from);
    r("B_to", br.B_to);
    r("circuits", br.circuits);
    r("kind", kind);
    r.finish();
    if (kind == "static") {
        br.kind = BranchKind::Static;
    } else if (kind == "dynamic") {
        br.kind = BranchKind::Dynamic;
    } else {
        throw ParseError(r.context() + ": unknown branch kind '" + kind + "'");
    }
    if (br.name.empty()) {
        br.name = "line" + std::to_string(br.from_bus) + "_" + std::to_string(br.to_bus);
    }
    return br;
}

StaticInjection parse_static(const json& j, std::size_t k) {
    const std::string ctx = "static_injections[" + std::to_string(k) + "]";
    ObjectReader r(j, ctx);
    if (!j.contains("type")) throw ParseError(ctx + ": missing 'type'");
    const std::string type = j.at("type").get<std::string>();
    if (type == "load") {
        ConstantImpedanceLoad l;
        r.required("name", l.name);
        r.required("bus", l.bus);
        r("P", l.P);
        r("Q", l.Q);
        r("nominal_voltage", l.nominal_voltage);
        r.finish();
        return l;
    }
    if (type == "source") {
        VoltageSource s;
        r.required("name", s.name);
        r.required("bus", s.bus);
        r("V_mag", s.V_mag);
        r.angle("V_angle", s.V_angle);
        r("R_th", s.R_th);
        r("X_th", s.X_th);
        r.finish();
        return s;
    }
    throw ParseError(ctx + ": unknown static injection type '" + type + "'");
}

void read_common(ObjectReader& r, std::string& name, int& bus, double& base, References& refs) {
    r.required("name", name);
    r.required("bus", bus);
    r("base_MVA", base);
    fields(refs, r);
}

DynamicGenerator parse_generator(const json& j, std::size_t k) {
    const std::string ctx = "generators[" + std::to_string(k) + "]";
    ObjectReader r(j, ctx);
    DynamicGenerator g;
    read_common(r, g.name, g.bus, g.base_MVA, g.refs);
    g.machine = parse_variant<MachineModel>(r.at("machine"), ctx + ".machine");
    g.shaft = parse_variant<ShaftModel>(r.at("shaft"), ctx + ".shaft");
    if (r.has("avr")) g.avr = parse_variant<AVRModel>(r.at("avr"), ctx + ".avr");
    if (r.has("tg")) g.tg = parse_variant<PrimeMover>(r.at("tg"), ctx + ".tg");
    if (r.has("pss")) g.pss = parse_variant<PSSModel>(r.at("pss"), ctx + ".pss");
    r.finish();
    return g;
}

DynamicInverter parse_inverter(const json& j, std::size_t k) {
    const std::string ctx = "inverters[" + std::to_string(k) + "]";
    ObjectReader r(j, ctx);
    DynamicInverter inv;
    read_common(r, inv.name, inv.bus, inv.base_MVA, inv.refs);
    if (r.has("outer")) {
        const json& o = r.at("outer");
        ObjectReader orr(o, ctx + ".outer");
        std::string mode = "grid_forming";
        orr("mode", mode);
        fields(inv.outer, orr);
        orr.finish();
        if (mode == "grid_forming") {
            inv.outer.mode = OuterLoopMode::GridForming;
        } else if (mode == "grid_feeding") {
            inv.outer.mode = OuterLoopMode::GridFeeding;
        } else {
            throw ParseError(ctx + ".outer: unknown mode '" + mode + "'");
        }
    }
    if (r.has("inner")) inv.inner = parse_slot<InnerLoop>(r.at("inner"), ctx + ".inner", "VoltageModeControl");
    if (r.has("converter")) inv.converter = parse_slot<AverageConverter>(r.at("converter"), ctx + ".converter", "AverageConverter");
    if (r.has("filter")) inv.filter = parse_variant<FilterModel>(r.at("filter"), ctx + ".filter");
    if (r.has("pll")) inv.pll = parse_slot<SrfPll>(r.at("pll"), ctx + ".pll", "SRF");
    if (r.has("dc_source")) inv.dc = parse_slot<FixedDCSource>(r.at("dc_source"), ctx + ".dc_source", "FixedDC");
    r.finish();
    return inv;
}

PerturbationSpec parse_perturbation(const json& j, std::size_t k) {
    const std::string ctx = "simulation.perturbations[" + std::to_string(k) + "]";
    ObjectReader r(j, ctx);
    if (!j.contains("type")) throw ParseError(ctx + ": missing 'type'");
    const std::string type = j.at("type").get<std::string>();
    if (type == "branch_trip") {
        BranchTrip p;
        r.required("time", p.time);
        r.required("branch", p.branch);
        r("circuits", p.circuits);
        r.finish();
        return p;
    }
    if (type == "reference_step") {
        ReferenceStep p;
        r.required("time", p.time);
        r.required("device", p.device);
        r.required("reference", p.reference);
        r.required("value", p.value);
        r.finish();
        return p;
    }
    if (type == "ybus_change") {
        YbusChangeRecipe p;
        r.required("time", p.time);
        if (r.has("branches")) {
            std::vector<BranchData> brs;
            const json& arr = r.at("branches");
            for (std::size_t i = 0; i < arr.size(); ++i) brs.push_back(parse_branch(arr[i], i));
            p.branches = std::move(brs);
        }
        if (r.has("shunts")) {
            const json& arr = r.at("shunts");
            for (std::size_t i = 0; i < arr.size(); ++i) {
                ObjectReader sr(arr[i], ctx + ".shunts[" + std::to_string(i) + "]");
                FaultShunt s;
                sr.required("bus", s.bus);
                sr("G", s.G);
                sr("B", s.B);
                sr.finish();
                p.shunts.push_back(s);
            }
        }
        r.finish();
        return p;
    }
    throw ParseError(ctx + ": unknown perturbation type '" + type + "'");
}

SimulationSpec parse_simulation(const json& j) {
    ObjectReader r(j, "simulation");
    SimulationSpec s;
    if (r.has("tspan")) {
        const json& ts = r.at("tspan");
        if (!ts.is_array() || ts.size() != 2) throw ParseError("simulation.tspan: expected [start, end]");
        s.t_start = ts[0].get<double>();
        s.t_end = ts[1].get<double>();
    }
    r("dtmax", s.options.dtmax);
    r("rtol", s.options.rtol);
    r("atol", s.options.atol);
    r("max_order", s.options.max_order);
    r("initial_step", s.options.initial_step);
    std::string method = "bdf";
    r("method", method);
    if (method == "bdf") {
        s.options.method = Method::BDF;
    } else if (method == "trapezoidal") {
        s.options.method = Method::Trapezoidal;
    } else {
        throw ParseError("simulation.method: unknown method '" + method + "'");
    }
    if (r.has("perturbations")) {
        const json& arr = r.at("perturbations");
        for (std::size_t i = 0; i < arr.size(); ++i) s.perturbations.push_back(parse_perturbation(arr[i], i));
    }
    r.finish();
    if (!(s.t_end > s.t_start)) throw ParseError("simulation.tspan: end must exceed start");
    return s;
}

template <class T>
std::vector<json> as_array(const json& j, const char* key) {
    std::vector<json> out;
    if (!j.contains(key)) return out;
    if (!j.at(key).is_array()) throw ParseError(std::string(key) + ": expected an array");
    for (const auto& e : j.at(key)) out.push_back(e);
    return out;
}

// ---------------------------------------------------------------------------
// Writing
// ---------------------------------------------------------------------------

struct ObjectWriter {
    json& j;
    template <class T>
    void operator()(const char* key, const T& value) { j[key] = value; }
};

template <class T>
json write_fields(T value) {
    json j = json::object();
    ObjectWriter w{j};
    fields(value, w);
    return j;
}

template <class V>
json write_variant(const V& v) {
    return std::visit(
        [](const auto& alt) {
            using T = std::decay_t<decltype(alt)>;
            json j = write_fields(alt);
            j["type"] = std::string(type_name(std::type_identity<T>{}));
            return j;
        },
        v);
}

json write_branch(const BranchData& br) {
    return {{"name", br.name}, {"from", br.from_bus}, {"to", br.to_bus}, {"R", br.R},
            {"X", br.X}, {"B_from", br.B_from}, {"B_to", br.B_to}, {"circuits", br.circuits},
            {"kind", br.kind == BranchKind::Dynamic ? "dynamic" : "static"}};
}

void write_common(json& j, const std::string& name, int bus, double base, const References& refs) {
    j["name"] = name;
    j["bus"] = bus;
    j["base_MVA"] = base;
    ObjectWriter w{j};
    References copy = refs;
    fields(copy, w);
}

json write_system(const System& sys) {
    json j;
    j["base_MVA"] = sys.base_MVA;
    j["base_frequency"] = sys.base_frequency;
    j["buses"] = json::array();
    for (const auto& b : sys.buses) {
        j["buses"].push_back({{"number", b.number}, {"name", b.name}, {"type", bus_type_name(b.type)},
                              {"voltage_magnitude", b.voltage_magnitude},
                              {"voltage_angle", b.voltage_angle}, {"base_kV", b.base_kV}});
    }
    j["branches"] = json::array();
    for (const auto& br : sys.branches) j["branches"].push_back(write_branch(br));
    j["static_injections"] = json::array();
    for (const auto& inj : sys.static_injections) {
        if (const auto* l = std::get_if<ConstantImpedanceLoad>(&inj)) {
            j["static_injections"].push_back({{"type", "load"}, {"name", l->name}, {"bus", l->bus},
                                              {"P", l->P}, {"Q", l->Q},
                                              {"nominal_voltage", l->nominal_voltage}});
        } else {
            const auto& s = std::get<VoltageSource>(inj);
            j["static_injections"].push_back({{"type", "source"}, {"name", s.name}, {"bus", s.bus},
                                              {"V_mag", s.V_mag}, {"V_angle", s.V_angle},
                                              {"R_th", s.R_th}, {"X_th", s.X_th}});
        }
    }
    j["generators"] = json::array();
    j["inverters"] = json::array();
    for (const auto& d : sys.dynamic_devices) {
        if (const auto* g = std::get_if<DynamicGenerator>(&d)) {
            json gj;
            write_common(gj, g->name, g->bus, g->base_MVA, g->refs);
            gj["machine"] = write_variant(g->machine);
            gj["shaft"] = write_variant(g->shaft);
            gj["avr"] = write_variant(g->avr);
            gj["tg"] = write_variant(g->tg);
            gj["pss"] = write_variant(g->pss);
            j["generators"].push_back(gj);
        } else {
            const auto& inv = std::get<DynamicInverter>(d);
            json ij;
            write_common(ij, inv.name, inv.bus, inv.base_MVA, inv.refs);
            json outer = write_fields(inv.outer);
            outer["mode"] = inv.outer.mode == OuterLoopMode::GridForming ? "grid_forming" : "grid_feeding";
            ij["outer"] = outer;
            ij["inner"] = write_fields(inv.inner);
            ij["converter"] = write_fields(inv.converter);
            ij["filter"] = write_variant(inv.filter);
            ij["pll"] = write_fields(inv.pll);
            ij["dc_source"] = write_fields(inv.dc);
            j["inverters"].push_back(ij);
        }
    }
    return j;
}

json write_simulation(const SimulationSpec& s) {
    json j;
    j["tspan"] = {s.t_start, s.t_end};
    j["dtmax"] = s.options.dtmax;
    j["rtol"] = s.options.rtol;
    j["atol"] = s.options.atol;
    j["max_order"] = s.options.max_order;
    j["initial_step"] = s.options.initial_step;
    j["method"] = s.options.method == Method::BDF ? "bdf" : "trapezoidal";
    j["perturbations"] = json::array();
    for (const auto& p : s.perturbations) {
        if (const auto* bt = std::get_if<BranchTrip>(&p)) {
            j["perturbations"].push_back({{"type", "branch_trip"}, {"time", bt->time},
                                          {"branch", bt->branch}, {"circuits", bt->circuits}});
        } else if (const auto* rs = std::get_if<ReferenceStep>(&p)) {
            j["perturbations"].push_back({{"type", "reference_step"}, {"time", rs->time},
                                          {"device", rs->device}, {"reference", rs->reference},
                                          {"value", rs->value}});
        } else {
            const auto& yc = std::get<YbusChangeRecipe>(p);
            json pj{{"type", "ybus_change"}, {"time", yc.time}};
            if (yc.branches) {
                pj["branches"] = json::array();
                for (const auto& br : *yc.branches) pj["branches"].push_back(write_branch(br));
            }
            pj["shunts"] = json::array();
            for (const auto& s2 : yc.shunts) pj["shunts"].push_back({{"bus", s2.bus}, {"G", s2.G}, {"B", s2.B}});
            j["perturbations"].push_back(pj);
        }
    }
    return j;
}

}  // namespace

CaseDocument parse_case(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("malformed case document: ") + e.what());
    }
    if (!j.is_object()) throw ParseError("case document must be an object");

    CaseDocument doc;
    System& sys = doc.system;
    try {
        ObjectReader r(j, "case");
        r("base_MVA", sys.base_MVA);
        r("base_frequency", sys.base_frequency);
        for (const char* key : {"buses", "branches", "static_injections", "generators", "inverters", "simulation"}) {
            if (r.has(key)) r.at(key);
        }
        r.finish();

        const auto buses = as_array<Bus>(j, "buses");
        for (std::size_t k = 0; k < buses.size(); ++k) sys.buses.push_back(parse_bus(buses[k], k));
        const auto branches = as_array<BranchData>(j, "branches");
        for (std::size_t k = 0; k < branches.size(); ++k) sys.branches.push_back(parse_branch(branches[k], k));
        const auto statics = as_array<StaticInjection>(j, "static_injections");
        for (std::size_t k = 0; k < statics.size(); ++k) sys.static_injections.push_back(parse_static(statics[k], k));
        const auto gens = as_array<DynamicGenerator>(j, "generators");
        for (std::size_t k = 0; k < gens.size(); ++k) sys.dynamic_devices.emplace_back(parse_generator(gens[k], k));
        const auto invs = as_array<DynamicInverter>(j, "inverters");
        for (std::size_t k = 0; k < invs.size(); ++k) sys.dynamic_devices.emplace_back(parse_inverter(invs[k], k));
        if (j.contains("simulation")) doc.simulation = parse_simulation(j.at("simulation"));
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed case document: ") + e.what());
    }

    validate(sys);
    return doc;
}

CaseDocument load_case_document(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError("cannot open case file '" + path.string() + "'");
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_case(ss.str());
}

System load_case(const std::filesystem::path& path) { return load_case_document(path).system; }

std::string serialize_case(const CaseDocument& doc) {
    json j = write_system(doc.system);
    j["simulation"] = write_simulation(doc.simulation);
    return j.dump(2);
}

std::string serialize_case(const System& sys) { return write_system(sys).dump(2); }

}  // namespace pst
