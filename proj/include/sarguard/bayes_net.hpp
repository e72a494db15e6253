#pragma once

#include "sarguard/strategy.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace sar {

enum class NodeGroup { environment, profile, strategy, evidence };

std::string_view to_string(NodeGroup g) noexcept;

struct NodeSpec {
    std::string id;
    std::vector<std::string> states;
    NodeGroup group = NodeGroup::evidence;

    std::optional<std::size_t> state_index(std::string_view label) const;
};

struct Edge {
    std::string parent;
    std::string child;
};

/// One CPT row as written in the network document: `key` is the parent-state
/// tuple joined with '|' (empty for root nodes), `probs` follows the node's
/// state order.
struct CptRow {
    std::string key;
    std::vector<double> probs;
};

/// Raw, unchecked network description. Parent order for a node is the order
/// in which its incoming edges appear in `edges`.
struct NetworkSpec {
    int schema_version = 1;
    std::vector<NodeSpec> nodes;
    std::vector<Edge> edges;
    std::map<std::string, std::vector<CptRow>> cpts;
};

struct Violation {
    std::string node;   // empty when not node-specific
    std::string row;    // CPT row key, when relevant
    std::string message;
};

std::string to_string(const Violation& v);

/// Lists every structural problem in `spec`; empty means valid.
std::vector<Violation> validate_network(const NetworkSpec& spec);

using EvidenceAssignment = std::map<std::string, std::string>;

/// Validated, immutable network with CPTs compiled into flat tables.
class BayesNet {
public:
    /// Throws Error(validation) naming the first violation.
    explicit BayesNet(NetworkSpec spec);

    const NetworkSpec& spec() const noexcept { return spec_; }
    std::size_t node_count() const noexcept { return spec_.nodes.size(); }
    const NodeSpec& node(std::size_t i) const { return spec_.nodes.at(i); }
    std::optional<std::size_t> node_index(std::string_view id) const;
    std::size_t strategy_node() const noexcept { return strategy_node_; }

    /// Parents of node `i` in CPT order.
    const std::vector<std::size_t>& parents(std::size_t i) const { return parents_.at(i); }
    std::size_t cardinality(std::size_t i) const { return spec_.nodes.at(i).states.size(); }

    /// P(node = state | parents = parent_states), parent_states in CPT order.
    double probability(std::size_t node, std::size_t state, const std::vector<std::size_t>& parent_states) const;

    /// Maps strategy-node state positions to Strategy values.
    Strategy strategy_of_state(std::size_t state) const { return strategy_states_.at(state); }

    /// Resolves labels to indices; throws Error(validation) on unknown nodes or states.
    std::map<std::size_t, std::size_t> resolve(const EvidenceAssignment& evidence) const;

    /// Flat CPT of node `i`; parents vary slowest-first in CPT order, node state fastest.
    const std::vector<double>& table(std::size_t i) const { return tables_.at(i); }

private:
    NetworkSpec spec_;
    std::map<std::string, std::size_t, std::less<>> index_;
    std::vector<std::vector<std::size_t>> parents_;
    std::vector<std::vector<double>> tables_;
    std::size_t strategy_node_ = 0;
    std::array<Strategy, kStrategyCount> strategy_states_{};
};

NetworkSpec parse_network_spec(const nlohmann::json& doc);
nlohmann::json to_json(const NetworkSpec& spec);

/// Parses and validates a network document (JSON text).
BayesNet load_network(const std::string& document);
BayesNet load_network_file(const std::string& path);

/// Posterior over strategies by exact variable elimination.
/// Throws Error(inference) when the evidence has zero likelihood.
StrategyBelief infer_strategies(const BayesNet& net, const EvidenceAssignment& evidence);

} // namespace sar
