#pragma once

#include "sarguard/bayes_net.hpp"
#include "sarguard/strategy.hpp"

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace sar {

/// Qualitative level produced by the classifier and the reasoning stages.
enum class Level { High, Medium, Low };

std::string_view to_string(Level l) noexcept;
/// Case-insensitive; returns nullopt for anything but High/Medium/Low.
std::optional<Level> parse_level(std::string_view text);

struct QualitativeMap {
    double high = 0.8;
    double medium = 0.4;
    double low = 0.1;

    double value(Level l) const noexcept;
};

struct Hyperparams {
    double lambda = 0.5;              // relevance vs confidence weight
    double mu = 0.5;                  // CV vs interpretation confidence weight
    double coverage_threshold = 0.6;  // negative evidence deferred below this
    double redecay_step = 0.1;        // coverage gain required before decaying again
    double max_beta = 0.95;           // keeps gamma = -beta strictly above -1
    QualitativeMap qualitative;

    /// Throws Error(validation) on out-of-range values.
    void validate() const;
};

/// Maps "High"/"Medium"/"Low" to its numeric value; throws Error(validation) otherwise.
double map_qualitative(std::string_view label, const Hyperparams& hp = {});

struct ClueAssessment {
    Level relevance = Level::Low;
    Level cv_confidence = Level::Low;
    Level interp_confidence = Level::Low;
    Strategy strategy = Strategy::Region;
};

/// alpha = lambda*R + (1-lambda)*(mu*C_cv + (1-mu)*C_interp)
double compute_alpha(const ClueAssessment& a, const Hyperparams& hp);

struct UpdateFactor {
    double gamma = 0.0;
    Strategy target = Strategy::Region;
};

/// Multiplies the target by (1 + gamma) and renormalizes. Requires gamma > -1
/// and a normalized input; throws Error(validation) otherwise.
StrategyBelief apply_update(const StrategyBelief& belief, UpdateFactor factor);

/// Clue-driven update; gamma must be >= 0.
StrategyBelief apply_positive_update(const StrategyBelief& belief, UpdateFactor factor);

/// Operator boost/reduce; gamma <= -1 is rejected.
StrategyBelief apply_operator_adjustment(const StrategyBelief& belief, Strategy strategy, double gamma);

/// Per-strategy searched fraction plus the coverage at which decay was last applied.
class CoverageTracker {
public:
    /// Fractions never decrease; lower values are ignored.
    void observe(Strategy s, double fraction);
    double fraction(Strategy s) const noexcept { return fraction_[index_of(s)]; }
    std::optional<double> last_decay(Strategy s) const noexcept { return last_decay_[index_of(s)]; }
    void mark_decay(Strategy s, double at_fraction) { last_decay_[index_of(s)] = at_fraction; }
    void clear_decay_flags() noexcept { last_decay_.fill(std::nullopt); }
    /// Restarts a strategy whose area was redefined (expanded search region).
    void rebase(Strategy s, double fraction) noexcept {
        fraction_[index_of(s)] = fraction;
        last_decay_[index_of(s)].reset();
    }

private:
    std::array<double, kStrategyCount> fraction_{};
    std::array<std::optional<double>, kStrategyCount> last_decay_{};
};

struct NegativeUpdate {
    StrategyBelief belief;
    bool applied = false;
    double beta = 0.0;
    std::string reason;
};

/// Coverage-based decay with gamma = -beta. Deferred (belief unchanged) while the
/// strategy's coverage is below the threshold, or until coverage has grown by
/// `redecay_step` since the last applied decay. Marks the tracker when applied.
NegativeUpdate apply_negative_update(const StrategyBelief& belief, Strategy strategy, CoverageTracker& tracker,
                                     const Hyperparams& hp);

/// Discards runtime updates: fresh inference on `evidence`, decay flags cleared.
StrategyBelief reset_beliefs(const BayesNet& net, const EvidenceAssignment& evidence, CoverageTracker& tracker);

} // namespace sar
