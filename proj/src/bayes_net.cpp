#include "sarguard/bayes_net.hpp"

#include "sarguard/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>

namespace sar {

namespace {

constexpr double kRowTolerance = 1e-9;

std::optional<NodeGroup> parse_group(std::string_view text) {
    if (text == "environment") return NodeGroup::environment;
    if (text == "profile") return NodeGroup::profile;
    if (text == "strategy") return NodeGroup::strategy;
    if (text == "evidence") return NodeGroup::evidence;
    return std::nullopt;
}

std::string join(const std::vector<std::string>& parts, char sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out.push_back(sep);
        out += parts[i];
    }
    return out;
}

// Parent lists by edge order, restricted to edges whose endpoints both exist.
std::vector<std::vector<std::size_t>> collect_parents(const NetworkSpec& spec,
                                                      const std::map<std::string, std::size_t, std::less<>>& index) {
    std::vector<std::vector<std::size_t>> parents(spec.nodes.size());
    for (const auto& e : spec.edges) {
        auto p = index.find(e.parent);
        auto c = index.find(e.child);
        if (p == index.end() || c == index.end() || p->second == c->second) continue;
        auto& list = parents[c->second];
        if (std::find(list.begin(), list.end(), p->second) == list.end()) list.push_back(p->second);
    }
    return parents;
}

bool has_cycle(std::size_t n, const std::vector<std::vector<std::size_t>>& parents, std::string* where,
               const NetworkSpec& spec) {
    // Kahn's algorithm over child adjacency.
    std::vector<std::vector<std::size_t>> children(n);
    std::vector<std::size_t> indegree(n, 0);
    for (std::size_t c = 0; c < n; ++c) {
        for (std::size_t p : parents[c]) {
            children[p].push_back(c);
            ++indegree[c];
        }
    }
    std::vector<std::size_t> ready;
    for (std::size_t i = 0; i < n; ++i)
        if (indegree[i] == 0) ready.push_back(i);
    std::size_t seen = 0;
    while (!ready.empty()) {
        std::size_t v = ready.back();
        ready.pop_back();
        ++seen;
        for (std::size_t c : children[v])
            if (--indegree[c] == 0) ready.push_back(c);
    }
    if (seen == n) return false;
    for (std::size_t i = 0; i < n; ++i) {
        if (indegree[i] > 0) {
            *where = spec.nodes[i].id;
            break;
        }
    }
    return true;
}

// Enumerates parent-state tuples in CPT order (first parent slowest).
void for_each_parent_config(const std::vector<std::size_t>& cards,
                            const std::function<void(const std::vector<std::size_t>&)>& fn) {
    std::vector<std::size_t> cur(cards.size(), 0);
    while (true) {
        fn(cur);
        std::size_t k = cards.size();
        while (k > 0) {
            --k;
            if (++cur[k] < cards[k]) break;
            cur[k] = 0;
            if (k == 0) return;
        }
        if (cards.empty()) return;
    }
}

} // namespace

std::string_view to_string(NodeGroup g) noexcept {
    switch (g) {
    case NodeGroup::environment: return "environment";
    case NodeGroup::profile: return "profile";
    case NodeGroup::strategy: return "strategy";
    case NodeGroup::evidence: return "evidence";
    }
    return "evidence";
}

std::optional<std::size_t> NodeSpec::state_index(std::string_view label) const {
    for (std::size_t i = 0; i < states.size(); ++i)
        if (states[i] == label) return i;
    return std::nullopt;
}

std::string to_string(const Violation& v) {
    std::string out;
    if (!v.node.empty()) out += "node '" + v.node + "'";
    if (!v.row.empty() || (!v.node.empty() && v.message.find("row") != std::string::npos)) {
        out += out.empty() ? "" : ", ";
        out += "row '" + v.row + "'";
    }
    if (!out.empty()) out += ": ";
    return out + v.message;
}

std::vector<Violation> validate_network(const NetworkSpec& spec) {
    std::vector<Violation> out;
    if (spec.schema_version != 1)
        out.push_back({"", "", "unsupported schema_version " + std::to_string(spec.schema_version)});

    std::map<std::string, std::size_t, std::less<>> index;
    for (std::size_t i = 0; i < spec.nodes.size(); ++i) {
        const auto& n = spec.nodes[i];
        if (n.id.empty()) out.push_back({"", "", "node " + std::to_string(i) + " has an empty id"});
        if (!index.emplace(n.id, i).second) out.push_back({n.id, "", "duplicate node id"});
        if (n.states.empty()) out.push_back({n.id, "", "node has no states"});
        std::set<std::string> labels;
        for (const auto& s : n.states) {
            if (s.empty() || s.find('|') != std::string::npos)
                out.push_back({n.id, "", "invalid state label '" + s + "'"});
            if (!labels.insert(s).second) out.push_back({n.id, "", "duplicate state label '" + s + "'"});
        }
    }

    std::set<std::pair<std::string, std::string>> edge_set;
    for (const auto& e : spec.edges) {
        bool ok = true;
        if (!index.count(e.parent)) {
            out.push_back({e.child, "", "edge references unknown parent '" + e.parent + "'"});
            ok = false;
        }
        if (!index.count(e.child)) {
            out.push_back({e.parent, "", "edge references unknown child '" + e.child + "'"});
            ok = false;
        }
        if (ok && e.parent == e.child) out.push_back({e.child, "", "self-loop edge"});
        if (ok && !edge_set.emplace(e.parent, e.child).second)
            out.push_back({e.child, "", "duplicate edge from '" + e.parent + "'"});
    }

    std::vector<std::size_t> strategy_nodes;
    for (std::size_t i = 0; i < spec.nodes.size(); ++i)
        if (spec.nodes[i].group == NodeGroup::strategy) strategy_nodes.push_back(i);
    if (strategy_nodes.empty()) {
        out.push_back({"", "", "no strategy node designated"});
    } else if (strategy_nodes.size() > 1) {
        out.push_back({spec.nodes[strategy_nodes[1]].id, "", "more than one strategy node designated"});
    } else {
        const auto& sn = spec.nodes[strategy_nodes.front()];
        std::set<Strategy> found;
        bool labels_ok = sn.states.size() == kStrategyCount;
        for (const auto& s : sn.states) {
            auto parsed = parse_strategy(s);
            if (!parsed || to_string(*parsed) != s || !found.insert(*parsed).second) labels_ok = false;
        }
        if (!labels_ok)
            out.push_back({sn.id, "", "strategy node states must be exactly {trail, shelter, waterways, contour, region}"});
    }

    auto parents = collect_parents(spec, index);
    std::string cycle_at;
    if (has_cycle(spec.nodes.size(), parents, &cycle_at, spec))
        out.push_back({cycle_at, "", "graph contains a cycle"});

    for (const auto& [id, rows] : spec.cpts)
        if (!index.count(id)) out.push_back({id, "", "CPT for unknown node"});

    for (std::size_t i = 0; i < spec.nodes.size(); ++i) {
        const auto& n = spec.nodes[i];
        auto it = spec.cpts.find(n.id);
        if (it == spec.cpts.end()) {
            out.push_back({n.id, "", "missing CPT"});
            continue;
        }
        std::vector<std::size_t> cards;
        for (std::size_t p : parents[i]) cards.push_back(spec.nodes[p].states.size());
        std::set<std::string> expected;
        bool any_empty = std::any_of(cards.begin(), cards.end(), [](std::size_t c) { return c == 0; });
        if (!any_empty) {
            for_each_parent_config(cards, [&](const std::vector<std::size_t>& cfg) {
                std::vector<std::string> labels;
                for (std::size_t k = 0; k < cfg.size(); ++k) labels.push_back(spec.nodes[parents[i][k]].states[cfg[k]]);
                expected.insert(join(labels, '|'));
            });
        }
        std::set<std::string> present;
        for (const auto& row : it->second) {
            if (!expected.count(row.key)) {
                out.push_back({n.id, row.key, "row key does not name a valid parent-state tuple"});
                continue;
            }
            if (!present.insert(row.key).second) {
                out.push_back({n.id, row.key, "duplicate row"});
                continue;
            }
            if (row.probs.size() != n.states.size()) {
                out.push_back({n.id, row.key,
                               "row has " + std::to_string(row.probs.size()) + " entries, expected " +
                                   std::to_string(n.states.size())});
                continue;
            }
            double total = 0.0;
            bool bad_entry = false;
            for (double v : row.probs) {
                if (!std::isfinite(v) || v < 0.0) bad_entry = true;
                total += v;
            }
            if (bad_entry) {
                out.push_back({n.id, row.key, "row contains a negative or non-finite probability"});
            } else if (std::abs(total - 1.0) > kRowTolerance) {
                std::ostringstream msg;
                msg.precision(12);
                msg << "row sums to " << total << ", expected 1";
                out.push_back({n.id, row.key, msg.str()});
            }
        }
        for (const auto& key : expected)
            if (!present.count(key)) out.push_back({n.id, key, "missing row"});
    }
    return out;
}

BayesNet::BayesNet(NetworkSpec spec) : spec_(std::move(spec)) {
    auto violations = validate_network(spec_);
    if (!violations.empty()) {
        std::string msg = "invalid network: " + to_string(violations.front());
        if (violations.size() > 1) msg += " (+" + std::to_string(violations.size() - 1) + " more)";
        throw Error(ErrorCode::validation, msg);
    }
    for (std::size_t i = 0; i < spec_.nodes.size(); ++i) {
        index_.emplace(spec_.nodes[i].id, i);
        if (spec_.nodes[i].group == NodeGroup::strategy) strategy_node_ = i;
    }
    parents_ = collect_parents(spec_, index_);
    for (std::size_t s = 0; s < kStrategyCount; ++s)
        strategy_states_[s] = *parse_strategy(spec_.nodes[strategy_node_].states[s]);

    tables_.resize(spec_.nodes.size());
    for (std::size_t i = 0; i < spec_.nodes.size(); ++i) {
        const auto& n = spec_.nodes[i];
        std::map<std::string, const CptRow*> by_key;
        for (const auto& row : spec_.cpts.at(n.id)) by_key[row.key] = &row;
        std::vector<std::size_t> cards;
        for (std::size_t p : parents_[i]) cards.push_back(cardinality(p));
        auto& table = tables_[i];
        for_each_parent_config(cards, [&](const std::vector<std::size_t>& cfg) {
            std::vector<std::string> labels;
            for (std::size_t k = 0; k < cfg.size(); ++k) labels.push_back(spec_.nodes[parents_[i][k]].states[cfg[k]]);
            const auto* row = by_key.at(join(labels, '|'));
            table.insert(table.end(), row->probs.begin(), row->probs.end());
        });
    }
}

std::optional<std::size_t> BayesNet::node_index(std::string_view id) const {
    auto it = index_.find(id);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

double BayesNet::probability(std::size_t node, std::size_t state, const std::vector<std::size_t>& parent_states) const {
    std::size_t row = 0;
    const auto& ps = parents_.at(node);
    for (std::size_t k = 0; k < ps.size(); ++k) row = row * cardinality(ps[k]) + parent_states.at(k);
    return tables_[node][row * cardinality(node) + state];
}

std::map<std::size_t, std::size_t> BayesNet::resolve(const EvidenceAssignment& evidence) const {
    std::map<std::size_t, std::size_t> out;
    for (const auto& [id, label] : evidence) {
        auto n = node_index(id);
        if (!n) throw Error(ErrorCode::validation, "evidence references unknown node '" + id + "'");
        auto s = spec_.nodes[*n].state_index(label);
        if (!s) throw Error(ErrorCode::validation, "evidence state '" + label + "' is not valid for node '" + id + "'");
        out.emplace(*n, *s);
    }
    return out;
}

NetworkSpec parse_network_spec(const nlohmann::json& doc) {
    try {
        NetworkSpec spec;
        if (!doc.is_object()) throw Error(ErrorCode::parse, "network document must be a JSON object");
        if (!doc.contains("schema_version")) throw Error(ErrorCode::parse, "network document lacks schema_version");
        spec.schema_version = doc.at("schema_version").get<int>();
        for (const auto& n : doc.at("nodes")) {
            NodeSpec node;
            node.id = n.at("id").get<std::string>();
            node.states = n.at("states").get<std::vector<std::string>>();
            auto group = n.value("group", std::string("evidence"));
            auto parsed = parse_group(group);
            if (!parsed) throw Error(ErrorCode::parse, "node '" + node.id + "' has unknown group '" + group + "'");
            node.group = *parsed;
            spec.nodes.push_back(std::move(node));
        }
        for (const auto& e : doc.value("edges", nlohmann::json::array())) {
            if (e.is_array()) {
                spec.edges.push_back({e.at(0).get<std::string>(), e.at(1).get<std::string>()});
            } else {
                spec.edges.push_back({e.at("parent").get<std::string>(), e.at("child").get<std::string>()});
            }
        }
        for (const auto& [id, rows] : doc.at("cpts").items()) {
            auto& out = spec.cpts[id];
            for (const auto& [key, probs] : rows.items()) out.push_back({key, probs.get<std::vector<double>>()});
        }
        return spec;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::parse, std::string("malformed network document: ") + e.what());
    }
}

nlohmann::json to_json(const NetworkSpec& spec) {
    nlohmann::json doc;
    doc["schema_version"] = spec.schema_version;
    doc["nodes"] = nlohmann::json::array();
    for (const auto& n : spec.nodes)
        doc["nodes"].push_back({{"id", n.id}, {"states", n.states}, {"group", std::string(to_string(n.group))}});
    doc["edges"] = nlohmann::json::array();
    for (const auto& e : spec.edges) doc["edges"].push_back({e.parent, e.child});
    doc["cpts"] = nlohmann::json::object();
    for (const auto& [id, rows] : spec.cpts) {
        auto& obj = doc["cpts"][id];
        obj = nlohmann::json::object();
        for (const auto& row : rows) obj[row.key] = row.probs;
    }
    return doc;
}

BayesNet load_network(const std::string& document) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(document);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::parse, std::string("network document is not valid JSON: ") + e.what());
    }
    return BayesNet(parse_network_spec(doc));
}

BayesNet load_network_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::io, "cannot open network file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return load_network(buf.str());
}

// ---------------------------------------------------------------------------
// Variable elimination

namespace {

struct Factor {
    std::vector<std::size_t> vars;  // ascending node indices
    std::vector<std::size_t> cards;
    std::vector<double> values;     // last var varies fastest

    std::size_t size() const { return values.size(); }
};

std::size_t product_of(const std::vector<std::size_t>& cards) {
    return std::accumulate(cards.begin(), cards.end(), std::size_t{1}, std::multiplies<>());
}

// Iterates assignments of `cards` in row-major order, calling fn(flat_index, assignment).
template <typename Fn>
void for_each_assignment(const std::vector<std::size_t>& cards, Fn&& fn) {
    std::vector<std::size_t> cur(cards.size(), 0);
    std::size_t total = product_of(cards);
    for (std::size_t flat = 0; flat < total; ++flat) {
        fn(flat, cur);
        for (std::size_t k = cards.size(); k-- > 0;) {
            if (++cur[k] < cards[k]) break;
            cur[k] = 0;
        }
    }
}

std::size_t flat_index(const Factor& f, const std::vector<std::size_t>& full_vars,
                       const std::vector<std::size_t>& full_assignment) {
    std::size_t idx = 0;
    std::size_t j = 0;
    for (std::size_t k = 0; k < f.vars.size(); ++k) {
        while (full_vars[j] != f.vars[k]) ++j;
        idx = idx * f.cards[k] + full_assignment[j];
    }
    return idx;
}

Factor cpt_factor(const BayesNet& net, std::size_t node, const std::map<std::size_t, std::size_t>& evidence) {
    std::vector<std::size_t> scope = net.parents(node);
    scope.push_back(node);
    std::vector<std::size_t> sorted = scope;
    std::sort(sorted.begin(), sorted.end());

    Factor f;
    for (std::size_t v : sorted) {
        if (evidence.count(v)) continue;
        f.vars.push_back(v);
        f.cards.push_back(net.cardinality(v));
    }
    f.values.assign(product_of(f.cards), 0.0);

    std::vector<std::size_t> parent_states(net.parents(node).size());
    for_each_assignment(f.cards, [&](std::size_t flat, const std::vector<std::size_t>& a) {
        auto state_of = [&](std::size_t v) {
            if (auto it = evidence.find(v); it != evidence.end()) return it->second;
            auto pos = std::lower_bound(f.vars.begin(), f.vars.end(), v) - f.vars.begin();
            return a[static_cast<std::size_t>(pos)];
        };
        const auto& ps = net.parents(node);
        for (std::size_t k = 0; k < ps.size(); ++k) parent_states[k] = state_of(ps[k]);
        f.values[flat] = net.probability(node, state_of(node), parent_states);
    });
    return f;
}

Factor multiply(const Factor& a, const Factor& b) {
    Factor out;
    std::set_union(a.vars.begin(), a.vars.end(), b.vars.begin(), b.vars.end(), std::back_inserter(out.vars));
    for (std::size_t v : out.vars) {
        auto ia = std::find(a.vars.begin(), a.vars.end(), v);
        out.cards.push_back(ia != a.vars.end() ? a.cards[static_cast<std::size_t>(ia - a.vars.begin())]
                                               : b.cards[static_cast<std::size_t>(
                                                     std::find(b.vars.begin(), b.vars.end(), v) - b.vars.begin())]);
    }
    out.values.assign(product_of(out.cards), 0.0);
    for_each_assignment(out.cards, [&](std::size_t flat, const std::vector<std::size_t>& asg) {
        out.values[flat] = a.values[flat_index(a, out.vars, asg)] * b.values[flat_index(b, out.vars, asg)];
    });
    return out;
}

Factor sum_out(const Factor& f, std::size_t var) {
    Factor out;
    std::size_t pos = 0;
    for (std::size_t k = 0; k < f.vars.size(); ++k) {
        if (f.vars[k] == var) {
            pos = k;
            continue;
        }
        out.vars.push_back(f.vars[k]);
        out.cards.push_back(f.cards[k]);
    }
    out.values.assign(product_of(out.cards), 0.0);
    for_each_assignment(f.cards, [&](std::size_t flat, const std::vector<std::size_t>& asg) {
        std::size_t idx = 0;
        for (std::size_t k = 0; k < asg.size(); ++k) {
            if (k == pos) continue;
            idx = idx * f.cards[k] + asg[k];
        }
        out.values[idx] += f.values[flat];
    });
    return out;
}

} // namespace

StrategyBelief infer_strategies(const BayesNet& net, const EvidenceAssignment& evidence) {
    const auto observed = net.resolve(evidence);
    const std::size_t query = net.strategy_node();

    std::vector<Factor> factors;
    factors.reserve(net.node_count());
    for (std::size_t i = 0; i < net.node_count(); ++i) factors.push_back(cpt_factor(net, i, observed));

    std::set<std::size_t> hidden;
    for (std::size_t i = 0; i < net.node_count(); ++i)
        if (i != query && !observed.count(i)) hidden.insert(i);

    while (!hidden.empty()) {
        // Greedy min-size ordering; ties resolved by lowest node index.
        std::size_t best_var = *hidden.begin();
        std::size_t best_cost = static_cast<std::size_t>(-1);
        for (std::size_t v : hidden) {
            std::set<std::size_t> scope;
            for (const auto& f : factors)
                if (std::binary_search(f.vars.begin(), f.vars.end(), v)) scope.insert(f.vars.begin(), f.vars.end());
            std::size_t cost = 1;
            for (std::size_t s : scope) cost *= net.cardinality(s);
            if (cost < best_cost) {
                best_cost = cost;
                best_var = v;
            }
        }
        hidden.erase(best_var);

        std::vector<Factor> keep;
        std::optional<Factor> joined;
        for (auto& f : factors) {
            if (std::binary_search(f.vars.begin(), f.vars.end(), best_var)) {
                joined = joined ? multiply(*joined, f) : std::move(f);
            } else {
                keep.push_back(std::move(f));
            }
        }
        if (joined) keep.push_back(sum_out(*joined, best_var));
        factors = std::move(keep);
    }

    Factor result;
    result.values = {1.0};
    for (const auto& f : factors) result = multiply(result, f);

    StrategyBelief belief;
    if (auto it = observed.find(query); it != observed.end()) {
        // Query node itself observed: the remaining factor is a scalar likelihood.
        if (!(result.values.at(0) > 0.0))
            throw Error(ErrorCode::inference, "evidence has zero likelihood under every strategy");
        belief[net.strategy_of_state(it->second)] = 1.0;
        return belief;
    }

    double total = 0.0;
    for (double v : result.values) total += v;
    if (!(total > 0.0) || !std::isfinite(total))
        throw Error(ErrorCode::inference, "evidence has zero likelihood under every strategy");
    for (std::size_t s = 0; s < kStrategyCount; ++s) belief[net.strategy_of_state(s)] = result.values[s] / total;
    return belief;
}

} // namespace sar
