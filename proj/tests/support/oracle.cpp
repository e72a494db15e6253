#include "oracle.hpp"

#include "sarguard/error.hpp"

#include <algorithm>
#include <map>
#include <numeric>

namespace sar::testing {

StrategyBelief joint_enumeration_oracle(const NetworkSpec& spec, const EvidenceAssignment& evidence) {
    const std::size_t n = spec.nodes.size();
    double joint_size = 1.0;
    for (const auto& node : spec.nodes) joint_size *= static_cast<double>(node.states.size());
    if (joint_size > kEnumerationLimit)
        throw Error(ErrorCode::validation, "network too large to enumerate (" + std::to_string(joint_size) + " states)");

    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < n; ++i) index[spec.nodes[i].id] = i;
    std::vector<std::vector<std::size_t>> parents(n);
    for (const auto& e : spec.edges) parents[index.at(e.child)].push_back(index.at(e.parent));

    std::vector<int> fixed(n, -1);
    for (const auto& [id, label] : evidence) {
        const auto& states = spec.nodes[index.at(id)].states;
        auto it = std::find(states.begin(), states.end(), label);
        if (it == states.end()) throw Error(ErrorCode::validation, "unknown state " + label);
        fixed[index.at(id)] = static_cast<int>(it - states.begin());
    }

    std::size_t strategy = n;
    for (std::size_t i = 0; i < n; ++i)
        if (spec.nodes[i].group == NodeGroup::strategy) strategy = i;

    std::array<double, kStrategyCount> mass{};
    std::vector<std::size_t> a(n, 0);
    for (std::size_t i = 0; i < n; ++i)
        if (fixed[i] >= 0) a[i] = static_cast<std::size_t>(fixed[i]);
    for (;;) {
        double p = 1.0;
        for (std::size_t i = 0; i < n && p != 0.0; ++i) {
            std::string key;
            for (std::size_t k = 0; k < parents[i].size(); ++k) {
                if (k) key += '|';
                key += spec.nodes[parents[i][k]].states[a[parents[i][k]]];
            }
            const auto& rows = spec.cpts.at(spec.nodes[i].id);
            auto row = std::find_if(rows.begin(), rows.end(), [&](const CptRow& r) { return r.key == key; });
            p *= row->probs.at(a[i]);
        }
        const auto s = *parse_strategy(spec.nodes[strategy].states[a[strategy]]);
        mass[index_of(s)] += p;

        // Odometer over the free nodes.
        std::size_t i = 0;
        for (; i < n; ++i) {
            if (fixed[i] >= 0) continue;
            if (++a[i] < spec.nodes[i].states.size()) break;
            a[i] = 0;
        }
        if (i == n) break;
    }
    const double z = std::accumulate(mass.begin(), mass.end(), 0.0);
    if (!(z > 0.0)) throw Error(ErrorCode::inference, "evidence has zero likelihood");
    for (double& m : mass) m /= z;
    return StrategyBelief::from(mass);
}

namespace {

std::vector<double> random_row(std::size_t k, std::mt19937_64& rng, double zero_probability) {
    std::uniform_real_distribution<double> u(0.01, 1.0);
    std::bernoulli_distribution zero(zero_probability);
    std::vector<double> row(k);
    for (double& v : row) v = zero(rng) ? 0.0 : u(rng);
    if (std::all_of(row.begin(), row.end(), [](double v) { return v == 0.0; })) row[rng() % k] = 1.0;
    const double s = std::accumulate(row.begin(), row.end(), 0.0);
    for (double& v : row) v /= s;
    // Push the rounding residue onto the largest entry so the row sums to 1 as tightly as doubles allow.
    auto big = std::max_element(row.begin(), row.end());
    *big += 1.0 - std::accumulate(row.begin(), row.end(), 0.0);
    return row;
}

} // namespace

NetworkSpec random_network(std::mt19937_64& rng, const RandomNetOptions& opts) {
    std::uniform_int_distribution<std::size_t> node_count(2, opts.max_nodes);
    std::uniform_int_distribution<std::size_t> state_count(2, opts.max_states);
    const std::size_t n = node_count(rng);
    const std::size_t strategy = rng() % n;

    NetworkSpec spec;
    for (std::size_t i = 0; i < n; ++i) {
        NodeSpec node;
        if (i == strategy) {
            node.id = "strategy";
            node.group = NodeGroup::strategy;
            for (Strategy s : kAllStrategies) node.states.emplace_back(to_string(s));
            // Exercise the label mapping with a shuffled state order.
            std::shuffle(node.states.begin(), node.states.end(), rng);
        } else {
            node.id = "n" + std::to_string(i);
            node.group = i < strategy ? NodeGroup::profile : NodeGroup::evidence;
            for (std::size_t s = 0, k = state_count(rng); s < k; ++s) node.states.push_back("s" + std::to_string(s));
        }
        spec.nodes.push_back(std::move(node));
    }
    // Edges only run from lower to higher index, which keeps the graph acyclic.
    std::bernoulli_distribution edge(0.4);
    std::vector<std::size_t> parent_count(n, 0);
    for (std::size_t c = 1; c < n; ++c)
        for (std::size_t p = 0; p < c; ++p)
            if (parent_count[c] < opts.max_parents && edge(rng)) {
                spec.edges.push_back({spec.nodes[p].id, spec.nodes[c].id});
                ++parent_count[c];
            }
    // Parent order follows edge order; shuffling it tests key handling.
    std::shuffle(spec.edges.begin(), spec.edges.end(), rng);

    for (std::size_t i = 0; i < n; ++i) {
        std::vector<std::size_t> ps;
        for (const auto& e : spec.edges)
            if (e.child == spec.nodes[i].id)
                for (std::size_t p = 0; p < n; ++p)
                    if (spec.nodes[p].id == e.parent) ps.push_back(p);
        std::size_t rows_needed = 1;
        for (std::size_t p : ps) rows_needed *= spec.nodes[p].states.size();
        auto& rows = spec.cpts[spec.nodes[i].id];
        for (std::size_t r = 0; r < rows_needed; ++r) {
            // First parent varies slowest.
            std::vector<std::size_t> cfg(ps.size());
            for (std::size_t k = ps.size(), rem = r; k-- > 0;) {
                cfg[k] = rem % spec.nodes[ps[k]].states.size();
                rem /= spec.nodes[ps[k]].states.size();
            }
            std::string key;
            for (std::size_t k = 0; k < ps.size(); ++k) {
                if (k) key += '|';
                key += spec.nodes[ps[k]].states[cfg[k]];
            }
            rows.push_back({key, random_row(spec.nodes[i].states.size(), rng, opts.zero_probability)});
        }
    }
    return spec;
}

EvidenceAssignment random_evidence(const NetworkSpec& spec, std::mt19937_64& rng) {
    EvidenceAssignment ev;
    std::bernoulli_distribution observe(0.5);
    for (const auto& node : spec.nodes)
        if (node.group != NodeGroup::strategy && observe(rng)) ev[node.id] = node.states[rng() % node.states.size()];
    return ev;
}

StrategyBelief random_belief(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.001, 1.0);
    std::array<double, kStrategyCount> p{};
    for (double& v : p) v = u(rng);
    const double s = std::accumulate(p.begin(), p.end(), 0.0);
    for (double& v : p) v /= s;
    return StrategyBelief::from(p);
}

} // namespace sar::testing
