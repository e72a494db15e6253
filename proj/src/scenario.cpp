#include "sarguard/scenario.hpp"

#include "sarguard/error.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace sar {

namespace {

using nlohmann::json;

[[noreturn]] void invalid(const std::string& msg) { throw Error(ErrorCode::validation, msg); }

std::optional<ClassifierTag> parse_tag(const json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    ClassifierTag tag;
    tag.label = it->value("label", std::string());
    if (auto c = it->find("confidence"); c != it->end() && c->is_string()) {
        tag.confidence = parse_level(c->get<std::string>());
        if (!tag.confidence) invalid(std::string(key) + " confidence '" + c->get<std::string>() + "' is not High/Medium/Low");
    }
    return tag;
}

Vec2 parse_location(const json& j, const TerrainGrid& grid) {
    if (j.is_object() && j.contains("cell")) {
        const auto& c = j.at("cell");
        Cell cell{c.at(0).get<int>(), c.at(1).get<int>()};
        Vec2 p = grid.center(cell);
        if (auto off = j.find("offset"); off != j.end()) p = p + parse_point(*off);
        return p;
    }
    return parse_point(j);
}

double number_or(const json& j, const char* key, double fallback) {
    auto it = j.find(key);
    return it == j.end() ? fallback : it->get<double>();
}

SimConstants parse_constants(const json& j, SimConstants c) {
    c.tick_s = number_or(j, "tick_s", c.tick_s);
    c.cruise_speed_mps = number_or(j, "cruise_speed_mps", c.cruise_speed_mps);
    c.footprint_radius_m = number_or(j, "footprint_radius_m", c.footprint_radius_m);
    c.cruise_altitude_m = number_or(j, "cruise_altitude_m", c.cruise_altitude_m);
    c.battery_drain_per_s = number_or(j, "battery_drain_per_s", c.battery_drain_per_s);
    c.region_radius_m = number_or(j, "region_radius_m", c.region_radius_m);
    c.contour_radius_m = number_or(j, "contour_radius_m", c.contour_radius_m);
    c.contour_band_m = number_or(j, "contour_band_m", c.contour_band_m);
    c.near_lkp_m = number_or(j, "near_lkp_m", c.near_lkp_m);
    c.steep_slope = number_or(j, "steep_slope", c.steep_slope);
    c.approval_timeout_ticks = j.value("approval_timeout_ticks", c.approval_timeout_ticks);
    c.ticks_max = j.value("ticks_max", c.ticks_max);
    c.preempt_on_switch = j.value("preempt_on_switch", c.preempt_on_switch);
    c.miss_probability = number_or(j, "miss_probability", c.miss_probability);
    return c;
}

void validate_constants(const SimConstants& c) {
    if (!(c.tick_s > 0.0)) invalid("constants.tick_s must be positive");
    if (!(c.cruise_speed_mps > 0.0)) invalid("constants.cruise_speed_mps must be positive");
    if (!(c.footprint_radius_m > 0.0)) invalid("constants.footprint_radius_m must be positive");
    if (c.cruise_speed_mps * c.tick_s > c.footprint_radius_m)
        invalid("constants: distance flown per tick exceeds the camera footprint radius");
    if (!(c.battery_drain_per_s >= 0.0)) invalid("constants.battery_drain_per_s must be non-negative");
    if (!(c.region_radius_m > 0.0)) invalid("constants.region_radius_m must be positive");
    if (!(c.contour_band_m > 0.0)) invalid("constants.contour_band_m must be positive");
    if (c.approval_timeout_ticks <= 0) invalid("constants.approval_timeout_ticks must be positive");
    if (c.ticks_max <= 0) invalid("constants.ticks_max must be positive");
    if (!(c.miss_probability >= 0.0 && c.miss_probability < 1.0)) invalid("constants.miss_probability must lie in [0,1)");
}

SafetyEnvelope parse_envelope(const json& j) {
    SafetyEnvelope env;
    env.min_altitude_m = number_or(j, "min_altitude_m", env.min_altitude_m);
    env.max_altitude_m = number_or(j, "max_altitude_m", env.max_altitude_m);
    env.max_range_m = number_or(j, "max_range_m", env.max_range_m);
    env.battery_reserve_fraction = number_or(j, "battery_reserve_fraction", env.battery_reserve_fraction);
    env.home = parse_point(j.at("home"));
    for (const auto& p : j.value("include", json::array())) env.include.push_back(parse_polygon(p));
    for (const auto& p : j.value("exclude", json::array())) env.exclude.push_back(parse_polygon(p));
    return env;
}

EntropyPolicy parse_entropy(const json& j, EntropyPolicy p) {
    p.high_entropy_threshold = number_or(j, "high_entropy_threshold", p.high_entropy_threshold);
    p.delta_threshold = number_or(j, "delta_threshold", p.delta_threshold);
    return p;
}

CostBenefitPolicy parse_cost(const json& j, CostBenefitPolicy p) {
    p.value_constant_min = number_or(j, "value_constant_min", p.value_constant_min);
    p.threshold = number_or(j, "threshold", p.threshold);
    p.cruise_speed_mps = number_or(j, "cruise_speed_mps", p.cruise_speed_mps);
    p.inspection_dwell_min = number_or(j, "inspection_dwell_min", p.inspection_dwell_min);
    p.inspect_radius_m = number_or(j, "inspect_radius_m", p.inspect_radius_m);
    return p;
}

void apply_overrides(Scenario& s, const json& config);

} // namespace

Vec2 parse_point(const json& j) {
    if (j.is_array() && j.size() == 2) return {j[0].get<double>(), j[1].get<double>()};
    if (j.is_object()) return {j.at("x").get<double>(), j.at("y").get<double>()};
    throw Error(ErrorCode::parse, "point must be [x, y] or {x, y}");
}

Polygon parse_polygon(const json& j) {
    Polygon poly;
    for (const auto& v : j) poly.vertices.push_back(parse_point(v));
    return poly;
}

json to_json(const Polygon& p) {
    json out = json::array();
    for (Vec2 v : p.vertices) out.push_back({v.x, v.y});
    return out;
}

Hyperparams parse_hyperparams(const json& j, Hyperparams hp) {
    hp.lambda = number_or(j, "lambda", hp.lambda);
    hp.mu = number_or(j, "mu", hp.mu);
    hp.coverage_threshold = number_or(j, "coverage_threshold", hp.coverage_threshold);
    hp.redecay_step = number_or(j, "redecay_step", hp.redecay_step);
    hp.max_beta = number_or(j, "max_beta", hp.max_beta);
    if (auto q = j.find("qualitative_map"); q != j.end()) {
        hp.qualitative.high = number_or(*q, "High", hp.qualitative.high);
        hp.qualitative.medium = number_or(*q, "Medium", hp.qualitative.medium);
        hp.qualitative.low = number_or(*q, "Low", hp.qualitative.low);
    }
    hp.validate();
    return hp;
}

json to_json(const Hyperparams& hp) {
    return {{"lambda", hp.lambda},
            {"mu", hp.mu},
            {"coverage_threshold", hp.coverage_threshold},
            {"redecay_step", hp.redecay_step},
            {"max_beta", hp.max_beta},
            {"qualitative_map", {{"High", hp.qualitative.high}, {"Medium", hp.qualitative.medium}, {"Low", hp.qualitative.low}}}};
}

Scenario parse_scenario(const json& doc) {
    Scenario s;
    try {
        if (!doc.is_object()) invalid("scenario must be a JSON object");
        const int version = doc.at("schema_version").get<int>();
        if (version != kScenarioSchemaVersion)
            throw Error(ErrorCode::version, "unsupported scenario schema_version " + std::to_string(version));
        s.id = doc.at("id").get<std::string>();
        if (s.id.empty()) invalid("scenario id must be non-empty");
        s.name = doc.value("name", s.id);
        s.grid = parse_terrain(doc.at("grid"));

        const auto& prof = doc.at("profile");
        s.profile.description = prof.value("description", std::string());
        s.profile.age_group = prof.at("age_group").get<std::string>();
        s.profile.experience = prof.at("experience").get<std::string>();
        s.profile.life_risk = prof.value("life_risk", false);
        s.profile.elapsed_min = number_or(prof, "elapsed_min", 0.0);
        s.profile.lkp = parse_location(prof.at("lkp"), s.grid);
        for (const auto& it : prof.value("items", json::array())) {
            ProfileItem item;
            item.item = it.at("item").get<std::string>();
            item.color = it.value("color", std::string());
            item.aliases = it.value("aliases", std::vector<std::string>{});
            s.profile.items.push_back(std::move(item));
        }

        const auto& env = doc.at("environment");
        s.environment.weather = env.at("weather").get<std::string>();
        s.environment.daylight = env.at("daylight").get<std::string>();

        for (const auto& c : doc.at("clues")) {
            Clue clue;
            clue.id = c.at("id").get<std::string>();
            clue.location = parse_location(c.at("location"), s.grid);
            clue.description = c.at("description").get<std::string>();
            clue.image_ref = c.value("image_ref", "images/" + clue.id + ".jpg");
            clue.stage1 = parse_tag(c, "stage1");
            clue.stage2 = parse_tag(c, "stage2");
            if (auto cu = c.find("closeup"); cu != c.end() && !cu->is_null()) {
                CloseUp close;
                close.description = cu->at("description").get<std::string>();
                close.stage1 = parse_tag(*cu, "stage1");
                close.stage2 = parse_tag(*cu, "stage2");
                clue.closeup = std::move(close);
            }
            clue.ground_truth_relevant = c.at("ground_truth_relevant").get<bool>();
            clue.location_tags = c.value("location_tags", std::vector<std::string>{});
            s.clues.push_back(std::move(clue));
        }

        const auto& person = doc.at("person");
        s.person.location = parse_location(person.at("location"), s.grid);
        s.person.description = person.value("description", s.profile.description);

        s.envelope = parse_envelope(doc.at("envelope"));
        s.agent_count = doc.at("agents").at("count").get<int>();
        s.seed = doc.value("seed", std::uint64_t{0});
        s.constants = parse_constants(doc.value("constants", json::object()), {});
        for (const auto& a : doc.value("airspace", json::array())) {
            AirspaceRegion region;
            region.id = a.at("id").get<std::string>();
            region.area = parse_polygon(a.at("polygon"));
            region.restricted = a.value("restricted", true);
            region.note = a.value("note", std::string());
            s.airspace.push_back(std::move(region));
        }
        for (const auto& [k, v] : doc.value("evidence_overrides", json::object()).items())
            s.evidence_overrides[k] = v.get<std::string>();
        s.hyperparams = parse_hyperparams(doc.value("hyperparams", json::object()));
        s.entropy = parse_entropy(doc.value("entropy", json::object()), {});
        s.cost = parse_cost(doc.value("cost_benefit", json::object()), {});
    } catch (const json::exception& e) {
        throw Error(ErrorCode::parse, std::string("malformed scenario: ") + e.what());
    }

    if (auto problems = s.grid.validate(); !problems.empty()) invalid("grid: " + problems.front());
    if (!s.grid.in_bounds(s.profile.lkp)) invalid("profile.lkp lies outside the grid");
    if (!s.grid.in_bounds(s.person.location)) invalid("person.location lies outside the grid");
    if (!s.grid.in_bounds(s.envelope.home)) invalid("envelope.home lies outside the grid");
    if (s.agent_count < 1) invalid("agents.count must be at least 1");

    std::set<std::string> ids;
    int relevant = 0;
    for (const auto& c : s.clues) {
        if (!ids.insert(c.id).second) invalid("duplicate clue id '" + c.id + "'");
        if (c.description.empty()) invalid("clue '" + c.id + "' has an empty description");
        if (!s.grid.in_bounds(c.location)) invalid("clue '" + c.id + "' lies outside the grid");
        if (c.ground_truth_relevant) ++relevant;
    }
    const int irrelevant = static_cast<int>(s.clues.size()) - relevant;
    if (relevant < 2 || relevant > 5)
        invalid("scenario needs 2-5 relevant clues, found " + std::to_string(relevant));
    if (irrelevant < 2 || irrelevant > 5)
        invalid("scenario needs 2-5 non-relevant clues, found " + std::to_string(irrelevant));

    validate_constants(s.constants);
    s.envelope.validate();
    s.entropy.validate();
    s.cost.validate();
    if (s.constants.cruise_altitude_m < s.envelope.min_altitude_m || s.constants.cruise_altitude_m > s.envelope.max_altitude_m)
        invalid("constants.cruise_altitude_m lies outside the envelope altitude band");
    for (const auto& a : s.airspace)
        if (!is_simple(a.area)) invalid("airspace region '" + a.id + "' is not a simple polygon");

    if (auto cfg = doc.find("config"); cfg != doc.end()) apply_overrides(s, *cfg);
    s.document = doc;
    return s;
}

Scenario load_scenario(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::parse, std::string("scenario is not valid JSON: ") + e.what());
    }
    return parse_scenario(doc);
}

Scenario load_scenario_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::io, "cannot open scenario '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return load_scenario(buf.str());
}

EvidenceAssignment derive_evidence(const Scenario& s, double radius_m) {
    EvidenceAssignment e;
    e["age_group"] = s.profile.age_group;
    e["experience"] = s.profile.experience;
    e["weather"] = s.environment.weather;
    e["daylight"] = s.environment.daylight;

    bool trails = false, water = false, buildings = false, steep = false;
    const auto& g = s.grid;
    for (std::size_t i = 0; i < g.cell_count(); ++i) {
        Cell c = g.cell_at(i);
        if (distance(g.center(c), s.profile.lkp) > radius_m) continue;
        switch (g.feature(c)) {
        case Feature::trail: trails = true; break;
        case Feature::water:
        case Feature::shoreline: water = true; break;
        case Feature::building: buildings = true; break;
        default: break;
        }
        if (g.slope(c) > s.constants.steep_slope) steep = true;
    }
    e["trails_present"] = trails ? "yes" : "no";
    e["water_present"] = water ? "yes" : "no";
    e["shelter_present"] = buildings ? "yes" : "no";
    e["steep_terrain"] = steep ? "yes" : "no";
    for (const auto& [k, v] : s.evidence_overrides) e[k] = v;
    return e;
}

namespace {

void apply_overrides(Scenario& s, const nlohmann::json& config) {
    if (!config.is_object()) invalid("config must be a JSON object");
    try {
        if (auto h = config.find("hyperparams"); h != config.end()) s.hyperparams = parse_hyperparams(*h, s.hyperparams);
        if (auto e = config.find("entropy"); e != config.end()) s.entropy = parse_entropy(*e, s.entropy);
        if (auto c = config.find("cost_benefit"); c != config.end()) s.cost = parse_cost(*c, s.cost);
        if (auto k = config.find("constants"); k != config.end()) s.constants = parse_constants(*k, s.constants);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::parse, std::string("malformed config: ") + e.what());
    }
    s.entropy.validate();
    s.cost.validate();
    validate_constants(s.constants);
}

} // namespace

void apply_config(Scenario& s, const nlohmann::json& config) {
    if (config.is_null()) return;
    apply_overrides(s, config);
    if (!s.document.contains("config")) s.document["config"] = json::object();
    s.document["config"].merge_patch(config);
}

} // namespace sar
