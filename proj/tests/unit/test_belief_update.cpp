#include "sarguard/belief_update.hpp"
#include "sarguard/bayes_net.hpp"
#include "sarguard/text.hpp"

#include "../support/oracle.hpp"
#include "../support/testing.hpp"

#include <random>

using namespace sar;
using namespace sar::testing;

namespace {

/// Independent evaluation of the multiplicative update, used as the oracle.
std::array<double, kStrategyCount> reweigh(const StrategyBelief& b, Strategy target, double gamma) {
    std::array<double, kStrategyCount> w{};
    double z = 0.0;
    for (Strategy s : kAllStrategies) {
        w[index_of(s)] = b[s] * (s == target ? 1.0 + gamma : 1.0);
        z += w[index_of(s)];
    }
    for (double& v : w) v /= z;
    return w;
}

ClueAssessment assess(Level r, Level cv, Level interp) { return {r, cv, interp, Strategy::Waterways}; }

} // namespace

TEST_CASE("qualitative levels map to the common scale") {
    CHECK(map_qualitative("High") == 0.8);
    CHECK(map_qualitative("Medium") == 0.4);
    CHECK(map_qualitative("Low") == 0.1);
    CHECK(map_qualitative("high") == 0.8);
    CHECK_ERROR_CODE(map_qualitative("Extreme"), ErrorCode::validation);
    CHECK_FALSE(parse_level("None").has_value());
}

TEST_CASE("alpha blends relevance and the two confidences") {
    Hyperparams hp;
    CHECK(std::abs(compute_alpha(assess(Level::High, Level::High, Level::High), hp) - 0.8) < 1e-12);
    // 0.5*0.1 + 0.5*(0.5*0.4 + 0.5*0.1)
    CHECK(std::abs(compute_alpha(assess(Level::Low, Level::Medium, Level::Low), hp) - 0.175) < 1e-12);
    // 0.5*0.4 + 0.5*(0.5*0.8 + 0.5*0.1)
    CHECK(std::abs(compute_alpha(assess(Level::Medium, Level::High, Level::Low), hp) - 0.425) < 1e-12);

    hp.lambda = 1.0;
    for (Level cv : {Level::High, Level::Medium, Level::Low})
        for (Level in : {Level::High, Level::Medium, Level::Low})
            CHECK(std::abs(compute_alpha(assess(Level::Medium, cv, in), hp) - 0.4) < 1e-12);
}

TEST_CASE("hyperparameters are range checked") {
    Hyperparams hp;
    CHECK_NOTHROW(hp.validate());
    hp.lambda = 1.5;
    CHECK_ERROR_CODE(hp.validate(), ErrorCode::validation);
    hp = {};
    hp.qualitative.medium = 0.9;
    CHECK_ERROR_CODE(hp.validate(), ErrorCode::validation);
    hp = {};
    hp.max_beta = 1.0;
    CHECK_ERROR_CODE(hp.validate(), ErrorCode::validation);
}

TEST_CASE("positive update from uniform") {
    const auto out = apply_positive_update(StrategyBelief::uniform(), {0.8, Strategy::Waterways});
    // 0.2*1.8 / (0.2*1.8 + 0.8) = 0.36 / 1.16
    CHECK(std::abs(out[Strategy::Waterways] - 0.36 / 1.16) < 1e-12);
    CHECK(std::abs(out[Strategy::Trail] - 0.2 / 1.16) < 1e-12);
    CHECK(std::abs(out[Strategy::Waterways] - 0.310345) < 1e-6);
    CHECK(std::abs(out[Strategy::Region] - 0.172414) < 1e-6);
    CHECK_ERROR_CODE(apply_positive_update(StrategyBelief::uniform(), {-0.1, Strategy::Trail}), ErrorCode::validation);
}

TEST_CASE("gamma zero is the identity") {
    const auto b = low_entropy_table();
    for (Strategy s : kAllStrategies) CHECK(apply_update(b, {0.0, s}).p == b.p);
}

TEST_CASE("a point mass is a fixed point") {
    const auto b = belief_of(0, 0, 1, 0, 0);
    for (double g : {0.8, 3.0, -0.5}) CHECK(apply_update(b, {g, Strategy::Waterways})[Strategy::Waterways] == 1.0);
}

TEST_CASE("updates reject unnormalized input and gamma at or below -1") {
    CHECK_ERROR_CODE(apply_update(belief_of(0.5, 0.5, 0.5, 0, 0), {0.1, Strategy::Trail}), ErrorCode::validation);
    CHECK_ERROR_CODE(apply_update(StrategyBelief::uniform(), {-1.0, Strategy::Trail}), ErrorCode::validation);
}

TEST_CASE("operator adjustments") {
    const auto up = apply_operator_adjustment(StrategyBelief::uniform(), Strategy::Trail, 0.5);
    CHECK(std::abs(up[Strategy::Trail] - 0.3 / 1.1) < 1e-12);
    CHECK(std::abs(up[Strategy::Trail] - 0.272727) < 1e-6);
    CHECK(apply_operator_adjustment(StrategyBelief::uniform(), Strategy::Trail, 0.0).p == StrategyBelief::uniform().p);
    CHECK_ERROR_CODE(apply_operator_adjustment(StrategyBelief::uniform(), Strategy::Trail, -1.2), ErrorCode::validation);
}

TEST_CASE("negative evidence waits for the coverage threshold") {
    Hyperparams hp;
    const auto table = low_entropy_table();

    SUBCASE("no coverage") {
        CoverageTracker t;
        const auto r = apply_negative_update(table, Strategy::Region, t, hp);
        CHECK_FALSE(r.applied);
        CHECK(r.belief.p == table.p);
    }
    SUBCASE("half covered") {
        CoverageTracker t;
        t.observe(Strategy::Region, 0.50);
        const auto r = apply_negative_update(table, Strategy::Region, t, hp);
        CHECK_FALSE(r.applied);
        CHECK(r.belief.p == table.p);
        CHECK_FALSE(t.last_decay(Strategy::Region).has_value());
    }
    SUBCASE("three quarters covered") {
        CoverageTracker t;
        t.observe(Strategy::Region, 0.75);
        const auto r = apply_negative_update(table, Strategy::Region, t, hp);
        REQUIRE(r.applied);
        CHECK(r.beta == 0.75);
        // 0.25*0.65 / (0.25*0.65 + 0.35)
        CHECK(std::abs(r.belief[Strategy::Region] - 0.1625 / 0.5125) < 1e-12);
        CHECK(std::abs(r.belief[Strategy::Region] - 0.317073) < 1e-6);
        const auto oracle = reweigh(table, Strategy::Region, -0.75);
        for (Strategy s : kAllStrategies) CHECK(std::abs(r.belief[s] - oracle[index_of(s)]) < 1e-12);
    }
}

TEST_CASE("negative evidence re-decays only after more coverage") {
    Hyperparams hp;
    CoverageTracker t;
    auto b = low_entropy_table();
    t.observe(Strategy::Region, 0.62);
    auto r = apply_negative_update(b, Strategy::Region, t, hp);
    REQUIRE(r.applied);
    b = r.belief;

    t.observe(Strategy::Region, 0.70);
    r = apply_negative_update(b, Strategy::Region, t, hp);
    CHECK_FALSE(r.applied);

    t.observe(Strategy::Region, 0.72);
    r = apply_negative_update(b, Strategy::Region, t, hp);
    CHECK(r.applied);

    // Full coverage is capped so the update stays invertible.
    t.observe(Strategy::Region, 1.0);
    r = apply_negative_update(r.belief, Strategy::Region, t, hp);
    CHECK(r.applied);
    CHECK(r.beta == hp.max_beta);
    CHECK(r.belief[Strategy::Region] > 0.0);
}

TEST_CASE("coverage fractions never decrease") {
    CoverageTracker t;
    t.observe(Strategy::Trail, 0.4);
    t.observe(Strategy::Trail, 0.3);
    CHECK(t.fraction(Strategy::Trail) == 0.4);
    t.rebase(Strategy::Trail, 0.1);
    CHECK(t.fraction(Strategy::Trail) == 0.1);
}

TEST_CASE("reset discards runtime updates") {
    const BayesNet net = load_network_file(data_path("network/default_network.json"));
    const EvidenceAssignment e0 = {{"age_group", "child"}, {"water_present", "yes"}};
    const auto initial = infer_strategies(net, e0);

    CoverageTracker t;
    auto b = apply_positive_update(initial, {0.8, Strategy::Waterways});
    t.observe(Strategy::Region, 0.9);
    b = apply_negative_update(b, Strategy::Region, t, {}).belief;
    REQUIRE(t.last_decay(Strategy::Region).has_value());

    const auto reset = reset_beliefs(net, e0, t);
    for (Strategy s : kAllStrategies) CHECK(std::abs(reset[s] - initial[s]) < 1e-9);
    CHECK_FALSE(t.last_decay(Strategy::Region).has_value());

    SUBCASE("with new evidence it equals fresh inference") {
        EvidenceAssignment expanded = e0;
        expanded["steep_terrain"] = "yes";
        const auto fresh = reset_beliefs(net, expanded, t);
        const auto oracle = joint_enumeration_oracle(net.spec(), expanded);
        for (Strategy s : kAllStrategies) CHECK(std::abs(fresh[s] - oracle[s]) < 1e-9);
    }
    SUBCASE("invalid evidence propagates") {
        CHECK_ERROR_CODE(reset_beliefs(net, {{"age_group", "teen"}}, t), ErrorCode::validation);
    }
}

TEST_CASE("random update sequences stay normalized and preserve non-target ratios") {
    std::mt19937_64 rng(0xbe11ef);
    std::uniform_int_distribution<int> length(1, 50);
    std::uniform_int_distribution<int> kind(0, 2);
    std::uniform_real_distribution<double> pos(0.0, 1.0);
    std::uniform_real_distribution<double> adj(-0.9, 2.0);
    std::uniform_real_distribution<double> cov_step(0.0, 0.15);
    Hyperparams hp;
    int steps = 0;
    for (int seq = 0; seq < 1000; ++seq) {
        auto b = random_belief(rng);
        CoverageTracker t;
        for (int i = 0, n = length(rng); i < n; ++i) {
            const Strategy target = kAllStrategies[rng() % kStrategyCount];
            const auto before = b;
            switch (kind(rng)) {
            case 0: b = apply_positive_update(b, {pos(rng), target}); break;
            case 1:
                t.observe(target, std::min(1.0, t.fraction(target) + cov_step(rng)));
                b = apply_negative_update(b, target, t, hp).belief;
                break;
            default: b = apply_operator_adjustment(b, target, adj(rng)); break;
            }
            ++steps;
            REQUIRE(std::abs(b.sum() - 1.0) < 1e-9);
            for (Strategy x : kAllStrategies) {
                REQUIRE(b[x] >= 0.0);
                for (Strategy y : kAllStrategies) {
                    if (x == target || y == target || x == y) continue;
                    const double r0 = before[x] / before[y];
                    const double r1 = b[x] / b[y];
                    REQUIRE(std::abs(r1 - r0) <= 1e-9 * std::max(1.0, r0));
                }
            }
        }
    }
    CHECK(steps > 1000);
}
