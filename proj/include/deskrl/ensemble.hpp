#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "deskrl/common.hpp"
#include "deskrl/dqn.hpp"
#include "deskrl/env.hpp"
#include "deskrl/features.hpp"

namespace deskrl {

struct EnsembleConfig {
    std::size_t n_agents = 10;   // trained instances
    double agree_pct = 50.0;     // a vote wins only with strictly more than this share
    int window = 200;            // rolling-mean width over the training curve, in episodes
    double plateau_tol = 0.10;   // tolerated tail shortfall, as a fraction of the peak
    double tail_fraction = 0.25; // share of the rolling curve examined at the end

    void check() const;
};

// ---------------------------------------------------------------------------
// convergence filtering
// ---------------------------------------------------------------------------

// Means over every full window; output length is n - window + 1.
std::vector<double> rolling_mean(const std::vector<double>& xs, int window);

struct ConvergenceReport {
    bool converged = false;
    double tail_mean = 0.0;  // mean of the rolling curve over its tail
    double peak = 0.0;       // max of the rolling curve
    double threshold = 0.0;  // peak - plateau_tol * |peak|
};

// Converged when the tail of the rolling learning curve holds near its peak
// (tail_mean >= threshold). The tail is the last tail_fraction share of the
// rolling curve, at least one point.
ConvergenceReport assess_convergence(const TrainingCurve& curve, const EnsembleConfig& cfg);

struct FilterOutcome {
    std::vector<std::size_t> kept;  // indices into the curve list
    std::vector<ConvergenceReport> reports;
    bool fallback = false;  // none converged; the best tail was kept anyway
    std::string warning;    // set on fallback

    std::string to_json() const;  // per-agent diagnostics
};

// Keeps exactly the converged agents; when none converge, keeps the single
// agent with the highest tail mean and sets a warning.
FilterOutcome filter_agents(const std::vector<TrainingCurve>& curves,
                            const EnsembleConfig& cfg);

// ---------------------------------------------------------------------------
// voting
// ---------------------------------------------------------------------------

// Returns the action held by strictly more than agree_pct percent of agents;
// otherwise (including count ties at the top) the previous position.
int vote(const std::vector<int>& actions, int previous, double agree_pct);

// ---------------------------------------------------------------------------
// shared-book rollout
// ---------------------------------------------------------------------------

struct EnsembleRun {
    EpisodeRecord record;
    std::vector<std::vector<int>> votes;  // votes[step][agent], before thresholding

    // CSV schema: date,agent_0,...,agent_{k-1},ensemble_position
    void trace_csv(const std::string& path) const;
};

// Rolls matrix rows [begin, end] with one shared position: each step every
// agent acts greedily on the same observation (whose position slots hold the
// ensemble's book), the vote picks the target, rewards follow the shaped
// formula.
EnsembleRun ensemble_run(const std::vector<QNetwork>& agents, const FeatureMatrix& m,
                         std::size_t begin, std::size_t end, const EnvConfig& env_cfg,
                         const EnsembleConfig& cfg);

}  // namespace deskrl
