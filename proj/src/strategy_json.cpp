#include "sdg/strategy_json.hpp"

#include <cmath>
#include <limits>

#include "sdg/errors.hpp"

namespace sdg {

namespace {

using json = nlohmann::ordered_json;

json time_to_json(double t) {
    if (std::isinf(t)) return t > 0 ? "inf" : "-inf";
    return t;
}

double time_from_json(const json& j, const char* where) {
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
        throw ConfigError(std::string(where) + ": bad time literal '" + s + "'");
    }
    if (!j.is_number())
        throw ConfigError(std::string(where) + ": time must be a number");
    return j.get<double>();
}

json selector_to_json(const ActionSelector& sel) {
    if (const auto* idx = sel.as_constant_index()) {
        json j;
        j["type"] = "constant";
        j["index"] = *idx;
        return j;
    }
    if (const auto* th = sel.as_threshold()) {
        json j;
        j["type"] = "threshold";
        j["coord"] = th->coord;
        j["level"] = th->level;
        j["below"] = th->below;
        j["above"] = th->above;
        return j;
    }
    if (const auto* tab = sel.as_feedback_table()) {
        json j;
        j["type"] = "grid_feedback";
        j["source"] = tab->source;
        j["level_times"] = tab->level_times;
        j["axis_lo"] = tab->axis_lo;
        j["axis_hi"] = tab->axis_hi;
        j["axis_nodes"] = tab->axis_nodes;
        j["control_index"] = tab->control_index;
        return j;
    }
    throw ConfigError("selector '" + sel.label() +
                      "' has no declarative description");
}

SelectorPtr selector_from_json(const json& spec) {
    if (!spec.is_object() || !spec.contains("type"))
        throw ConfigError("selector spec: missing type");
    const auto type = spec.at("type").get<std::string>();
    if (type == "constant") {
        return constant_selector(spec.at("index").get<std::size_t>());
    }
    if (type == "threshold") {
        return threshold_selector(spec.at("coord").get<int>(),
                                  spec.at("level").get<double>(),
                                  spec.at("below").get<std::size_t>(),
                                  spec.at("above").get<std::size_t>());
    }
    if (type == "grid_feedback") {
        auto table = std::make_shared<FeedbackTable>();
        table->source = spec.value("source", std::string());
        table->level_times = spec.at("level_times").get<std::vector<double>>();
        table->axis_lo = spec.at("axis_lo").get<std::vector<double>>();
        table->axis_hi = spec.at("axis_hi").get<std::vector<double>>();
        table->axis_nodes = spec.at("axis_nodes").get<std::vector<std::size_t>>();
        table->control_index =
            spec.at("control_index").get<std::vector<std::uint16_t>>();
        if (table->control_index.size() !=
            table->level_times.size() * table->node_count())
            throw ConfigError("grid_feedback: table size mismatch");
        return feedback_selector(std::move(table));
    }
    throw ConfigError("selector spec: unknown type '" + type + "'");
}

}  // namespace

json rule_to_json(const StoppingRule& rule) {
    if (const auto* t = rule.as_constant_time()) {
        json j;
        j["type"] = "constant";
        j["time"] = time_to_json(*t);
        return j;
    }
    if (const auto* fx = rule.as_first_exit()) {
        json j;
        j["type"] = "first_exit";
        j["center"] = fx->center;
        j["radius"] = fx->radius;
        j["space_time"] = fx->space_time;
        if (fx->space_time) j["t0"] = fx->t0;
        if (fx->cap_time) j["cap_time"] = *fx->cap_time;
        if (fx->after) j["after"] = rule_to_json(*fx->after);
        return j;
    }
    throw ConfigError("rule '" + rule.label() +
                      "' has no declarative description");
}

RulePtr rule_from_json(const json& spec) {
    if (!spec.is_object() || !spec.contains("type"))
        throw ConfigError("rule spec: missing type");
    const auto type = spec.at("type").get<std::string>();
    if (type == "constant")
        return constant_rule(time_from_json(spec.at("time"), "constant rule"));
    if (type == "first_exit") {
        FirstExitSpec fx;
        fx.center = spec.at("center").get<std::vector<double>>();
        fx.radius = spec.at("radius").get<double>();
        fx.space_time = spec.value("space_time", false);
        fx.t0 = spec.value("t0", 0.0);
        if (spec.contains("cap_time"))
            fx.cap_time = spec.at("cap_time").get<double>();
        if (spec.contains("after")) fx.after = rule_from_json(spec.at("after"));
        return first_exit_rule(std::move(fx));
    }
    if (type == "deterministic_grid")
        throw ConfigError(
            "deterministic_grid is only valid as a segment rule spec");
    throw ConfigError("rule spec: unknown type '" + type + "'");
}

json strategy_to_json(const ElementaryStrategy& strategy) {
    json j;
    j["player"] = player_name(strategy.player());
    json cs;
    cs["label"] = strategy.control_set().label();
    json pts = json::array();
    for (std::size_t i = 0; i < strategy.control_set().size(); ++i) {
        const auto p = strategy.control_set().point(i);
        pts.push_back(std::vector<double>(p.begin(), p.end()));
    }
    cs["points"] = std::move(pts);
    j["control_set"] = std::move(cs);
    j["start_rule"] = rule_to_json(*strategy.start_rule());
    json segs = json::array();
    for (const auto& seg : strategy.segments()) {
        json s;
        s["rule"] = rule_to_json(*seg.rule);
        s["selector"] = selector_to_json(*seg.selector);
        segs.push_back(std::move(s));
    }
    j["segments"] = std::move(segs);
    if (!strategy.label().empty()) j["label"] = strategy.label();
    return j;
}

ElementaryStrategy strategy_from_json(const json& desc) {
    if (!desc.is_object()) throw ConfigError("strategy description: not an object");
    const auto pname = desc.at("player").get<std::string>();
    Player player;
    if (pname == "one")
        player = Player::one;
    else if (pname == "two")
        player = Player::two;
    else
        throw ConfigError("strategy description: player must be 'one' or 'two'");

    const auto& cs = desc.at("control_set");
    ControlSet set(cs.value("label", std::string("set")),
                   cs.at("points").get<std::vector<std::vector<double>>>());

    RulePtr start = desc.contains("start_rule")
                        ? rule_from_json(desc.at("start_rule"))
                        : constant_rule(-std::numeric_limits<double>::infinity());

    std::vector<StrategySegment> segments;
    for (const auto& s : desc.at("segments")) {
        SelectorPtr sel = selector_from_json(s.at("selector"));
        const auto& rs = s.at("rule");
        if (rs.is_object() && rs.contains("type") &&
            rs.at("type").get<std::string>() == "deterministic_grid") {
            const auto times = rs.at("times").get<std::vector<double>>();
            if (times.empty())
                throw ConfigError("deterministic_grid: empty time list");
            for (double t : times) segments.push_back({constant_rule(t), sel});
        } else {
            segments.push_back({rule_from_json(rs), sel});
        }
    }
    std::string label = desc.value("label", std::string());

    // selector indices must address the declared set
    for (const auto& seg : segments) {
        if (const auto* idx = seg.selector->as_constant_index())
            if (*idx >= set.size())
                throw ConfigError("strategy description: selector index " +
                                  std::to_string(*idx) + " outside control set");
    }
    return ElementaryStrategy(player, std::move(set), std::move(start),
                              std::move(segments), std::move(label));
}

std::string strategy_to_string(const ElementaryStrategy& strategy) {
    return strategy_to_json(strategy).dump(2);
}

ElementaryStrategy strategy_from_string(const std::string& text) {
    return strategy_from_json(json::parse(text));
}

}  // namespace sdg
