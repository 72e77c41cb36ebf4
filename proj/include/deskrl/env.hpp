#pragma once

#include <functional>
#include <string>
#include <vector>

#include "deskrl/common.hpp"
#include "deskrl/features.hpp"

namespace deskrl {

// Target position: the agent trades straight to A_t each step.
enum class Action : int { sell = -1, hold = 0, buy = 1 };

inline int to_int(Action a) { return static_cast<int>(a); }
Action action_from_int(int v);  // throws validation_error outside {-1,0,+1}

struct EnvConfig {
    double tc = 0.1;           // p/therm per unit position change
    int episode_length = 252;  // steps per training episode
    FeatureSpec features;

    void check() const;
};

struct EpisodeRecord {
    std::size_t start_index = 0;      // matrix row of the first step
    std::vector<Date> dates;
    std::vector<int> positions;       // position after the step (A_t)
    std::vector<double> raw_returns;  // close_t - close_{t-1}
    std::vector<double> rewards;      // A_{t-1} r_t - tc |A_t - A_{t-1}|

    std::size_t size() const { return rewards.size(); }
    double cumulative_reward() const;
    double gross_pnl() const;  // sum of A_{t-1} r_t
    double turnover() const;   // sum of |A_t - A_{t-1}|, entry included

    // CSV schema: date,position,raw_return,reward
    void to_csv(const std::string& path) const;
};

struct SharpeResult {
    double value = 0.0;
    bool degenerate = false;  // deviation below epsilon, value forced to 0
};

// Annualized Sharpe: sqrt(252) * mean / population sd of shaped rewards.
SharpeResult sharpe_of(const std::vector<double>& rewards);
SharpeResult episode_sharpe(const EpisodeRecord& record);

struct StepResult {
    Observation next_obs;
    double reward = 0.0;
    double raw_return = 0.0;
    bool terminal = false;
};

// Stateful single-episode simulation over an immutable FeatureMatrix. The
// matrix must carry raw_close; share one matrix across many env instances.
class TradingEnv {
public:
    TradingEnv(const FeatureMatrix& m, EnvConfig cfg);

    // Smallest and largest valid reset index.
    std::size_t min_start() const;
    std::size_t max_start() const;

    Observation reset(std::size_t start);
    StepResult step(Action a);

    bool terminal() const { return live_ && steps_ == cfg_.episode_length; }
    int position() const { return pos_; }
    std::size_t current_index() const { return t_; }
    const EpisodeRecord& record() const { return rec_; }
    const EnvConfig& config() const { return cfg_; }

private:
    const FeatureMatrix* m_;
    EnvConfig cfg_;
    ObservationBuilder builder_;
    std::size_t t_ = 0;
    int pos_ = 0;
    int steps_ = 0;
    bool live_ = false;
    EpisodeRecord rec_;
};

using PolicyFn = std::function<Action(const Observation&, std::size_t t)>;

// Deterministic noise-free rollout over matrix rows [begin, end], starting
// flat. Used for evaluation and backtests.
EpisodeRecord run_policy(const PolicyFn& policy, const FeatureMatrix& m,
                         std::size_t begin, std::size_t end, const EnvConfig& cfg);

}  // namespace deskrl
