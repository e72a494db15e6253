#include "sarguard/belief_update.hpp"

#include "sarguard/error.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

namespace sar {

std::string_view to_string(Level l) noexcept {
    switch (l) {
    case Level::High: return "High";
    case Level::Medium: return "Medium";
    case Level::Low: return "Low";
    }
    return "Low";
}

std::optional<Level> parse_level(std::string_view text) {
    std::string t;
    for (char c : text)
        if (!std::isspace(static_cast<unsigned char>(c))) t.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    if (t == "high") return Level::High;
    if (t == "medium") return Level::Medium;
    if (t == "low") return Level::Low;
    return std::nullopt;
}

double QualitativeMap::value(Level l) const noexcept {
    switch (l) {
    case Level::High: return high;
    case Level::Medium: return medium;
    case Level::Low: return low;
    }
    return low;
}

void Hyperparams::validate() const {
    auto unit = [](double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; };
    if (!unit(lambda)) throw Error(ErrorCode::validation, "lambda must lie in [0,1]");
    if (!unit(mu)) throw Error(ErrorCode::validation, "mu must lie in [0,1]");
    if (!unit(coverage_threshold)) throw Error(ErrorCode::validation, "coverage_threshold must lie in [0,1]");
    if (!unit(redecay_step)) throw Error(ErrorCode::validation, "redecay_step must lie in [0,1]");
    if (!(max_beta >= 0.0 && max_beta < 1.0)) throw Error(ErrorCode::validation, "max_beta must lie in [0,1)");
    const auto& q = qualitative;
    if (!(unit(q.high) && unit(q.medium) && unit(q.low)))
        throw Error(ErrorCode::validation, "qualitative map values must lie in [0,1]");
    if (!(q.high > q.medium && q.medium > q.low))
        throw Error(ErrorCode::validation, "qualitative map must be strictly decreasing High > Medium > Low");
}

double map_qualitative(std::string_view label, const Hyperparams& hp) {
    auto level = parse_level(label);
    if (!level) throw Error(ErrorCode::validation, "unknown qualitative level '" + std::string(label) + "'");
    return hp.qualitative.value(*level);
}

double compute_alpha(const ClueAssessment& a, const Hyperparams& hp) {
    const auto& q = hp.qualitative;
    const double relevance = q.value(a.relevance);
    const double confidence = hp.mu * q.value(a.cv_confidence) + (1.0 - hp.mu) * q.value(a.interp_confidence);
    return hp.lambda * relevance + (1.0 - hp.lambda) * confidence;
}

StrategyBelief apply_update(const StrategyBelief& belief, UpdateFactor factor) {
    if (!(factor.gamma > -1.0) || !std::isfinite(factor.gamma)) {
        std::ostringstream msg;
        msg << "update factor gamma=" << factor.gamma << " must be greater than -1";
        throw Error(ErrorCode::validation, msg.str());
    }
    if (!belief.is_normalized()) throw Error(ErrorCode::validation, "input belief is not normalized");

    StrategyBelief out = belief;
    double denom = 0.0;
    for (Strategy s : kAllStrategies) {
        const double weight = (s == factor.target) ? 1.0 + factor.gamma : 1.0;
        out[s] = weight * belief[s];
        denom += out[s];
    }
    if (!(denom > 0.0)) throw Error(ErrorCode::validation, "update leaves no probability mass");
    for (Strategy s : kAllStrategies) out[s] /= denom;
    return out;
}

StrategyBelief apply_positive_update(const StrategyBelief& belief, UpdateFactor factor) {
    if (!(factor.gamma >= 0.0)) throw Error(ErrorCode::validation, "positive update requires gamma >= 0");
    return apply_update(belief, factor);
}

StrategyBelief apply_operator_adjustment(const StrategyBelief& belief, Strategy strategy, double gamma) {
    return apply_update(belief, {gamma, strategy});
}

void CoverageTracker::observe(Strategy s, double fraction) {
    auto& cur = fraction_[index_of(s)];
    cur = std::max(cur, std::clamp(fraction, 0.0, 1.0));
}

NegativeUpdate apply_negative_update(const StrategyBelief& belief, Strategy strategy, CoverageTracker& tracker,
                                     const Hyperparams& hp) {
    if (!belief.is_normalized()) throw Error(ErrorCode::validation, "input belief is not normalized");
    NegativeUpdate out{belief, false, 0.0, {}};
    const double coverage = tracker.fraction(strategy);
    if (coverage < hp.coverage_threshold) {
        out.reason = "coverage below threshold";
        return out;
    }
    if (auto last = tracker.last_decay(strategy); last && coverage - *last < hp.redecay_step - 1e-12) {
        out.reason = "coverage has not grown since the last decay";
        return out;
    }
    out.beta = std::min(coverage, hp.max_beta);
    out.belief = apply_update(belief, {-out.beta, strategy});
    out.applied = true;
    tracker.mark_decay(strategy, coverage);
    return out;
}

StrategyBelief reset_beliefs(const BayesNet& net, const EvidenceAssignment& evidence, CoverageTracker& tracker) {
    auto belief = infer_strategies(net, evidence);
    tracker.clear_decay_flags();
    return belief;
}

} // namespace sar
