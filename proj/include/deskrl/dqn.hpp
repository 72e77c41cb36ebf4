#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "deskrl/common.hpp"
#include "deskrl/env.hpp"
#include "deskrl/features.hpp"

namespace deskrl {

// Fully connected rectifier network with 3 action-value outputs.
struct QNetwork {
    struct Layer {
        std::size_t in = 0;
        std::size_t out = 0;
        std::vector<double> w;  // row-major, out x in
        std::vector<double> b;  // out
    };

    std::vector<std::size_t> layer_sizes;  // input, hidden..., 3
    std::vector<Layer> layers;

    static QNetwork make(const std::vector<std::size_t>& sizes, Rng& rng);

    std::size_t input_size() const { return layer_sizes.front(); }
    std::size_t n_params() const;
    bool finite() const;
};

std::vector<double> flatten_params(const QNetwork& net);
void set_params(QNetwork& net, const std::vector<double>& flat);

// Action values for one observation; throws on dimension mismatch.
std::vector<double> forward(const QNetwork& net, const std::vector<double>& x);
inline std::vector<double> forward(const QNetwork& net, const Observation& obs) {
    return forward(net, obs.x);
}

struct Transition {
    std::vector<double> obs;
    int action = 0;  // index into {sell, hold, buy}
    double reward = 0.0;
    std::vector<double> next_obs;
    bool terminal = false;
};

enum class ReplayMode { uniform, prioritized };

struct ReplayConfig {
    ReplayMode mode = ReplayMode::uniform;
    std::size_t capacity = 100000;
    double alpha = 0.6;          // priority exponent
    double priority_eps = 1e-3;  // keeps priorities strictly positive

    void check() const;
};

// Ring buffer; prioritized mode keeps proportional priorities alongside.
class ReplayBuffer {
public:
    explicit ReplayBuffer(ReplayConfig cfg);

    void push(Transition t);  // new entries get the running max priority
    std::size_t size() const { return full_ ? ring_.size() : next_; }
    std::size_t capacity() const { return cfg_.capacity; }
    const Transition& at(std::size_t i) const { return ring_[i]; }

    struct Batch {
        std::vector<std::size_t> indices;
        std::vector<const Transition*> items;
        std::vector<double> weights;  // importance weights, max-normalized
    };

    // beta is the importance exponent (prioritized mode only).
    Batch sample(std::size_t batch_size, double beta, Rng& rng) const;
    void update_priorities(const std::vector<std::size_t>& indices,
                           const std::vector<double>& td_errors);

private:
    ReplayConfig cfg_;
    std::vector<Transition> ring_;
    std::vector<double> prio_;
    std::size_t next_ = 0;
    bool full_ = false;
    double max_prio_ = 1.0;
};

// y = r for terminal transitions, else r + gamma * max_a Q_target(s', a).
std::vector<double> td_targets(const std::vector<const Transition*>& batch,
                               const QNetwork& target_net, double gamma);

// Weighted MSE between Q(s, a) and y, averaged over the batch.
double batch_loss(const QNetwork& net, const std::vector<const Transition*>& batch,
                  const std::vector<double>& targets, const std::vector<double>& weights);

struct LossGrad {
    double loss = 0.0;
    std::vector<double> grad;       // flat, matches flatten_params order
    std::vector<double> td_errors;  // Q(s,a) - y per sample, pre-update
};

LossGrad loss_and_gradient(const QNetwork& net, const std::vector<const Transition*>& batch,
                           const std::vector<double>& targets,
                           const std::vector<double>& weights);

struct SgdResult {
    double loss = 0.0;
    std::vector<double> td_errors;
};

// One SGD step with global gradient-norm clipping. Throws runtime_failure on
// a non-finite loss.
SgdResult sgd_step(QNetwork& net, const std::vector<const Transition*>& batch,
                   const std::vector<double>& targets, double lr,
                   const std::vector<double>& weights, double grad_clip = 10.0);

// Uniform with probability epsilon, else argmax with ties to the lowest index.
Action act_epsilon_greedy(const QNetwork& net, const std::vector<double>& x, double epsilon,
                          Rng& rng);
inline Action act_epsilon_greedy(const QNetwork& net, const Observation& obs, double epsilon,
                                 Rng& rng) {
    return act_epsilon_greedy(net, obs.x, epsilon, rng);
}

// Greedy action (no exploration), same tie rule.
Action act_greedy(const QNetwork& net, const std::vector<double>& x);

struct TrainConfig {
    double gamma = 0.99;
    double lr = 1e-3;
    double epsilon_start = 1.0;
    double epsilon_end = 0.05;
    int epsilon_decay_episodes = 1500;  // linear decay, then flat at the end value
    std::size_t batch_size = 32;
    int target_update_steps = 500;  // hard sync period, in environment steps
    int episodes = 2000;            // desk-scale default; full runs use far more
    std::vector<std::size_t> hidden = {64, 64};
    ReplayMode replay_mode = ReplayMode::uniform;
    std::size_t replay_capacity = 100000;
    double priority_alpha = 0.6;
    double priority_beta_start = 0.4;  // annealed linearly to 1 over training
    std::size_t warmup_transitions = 1000;
    std::uint64_t seed = 1;

    void check() const;
};

struct TrainingCurve {
    std::vector<double> sharpe;  // one annualized Sharpe per completed episode

    void to_csv(const std::string& path) const;  // schema: episode,sharpe
    static TrainingCurve from_csv(const std::string& path);
};

struct TrainResult {
    QNetwork net;
    TrainingCurve curve;
};

// Episode-looped DQN training on matrix rows [begin, end]. Observation noise
// requires a normalized matrix. Fully determined by (data, config, seed).
TrainResult train(const FeatureMatrix& m, std::size_t begin, std::size_t end,
                  const EnvConfig& env_cfg, const TrainConfig& cfg);

// JSON checkpoint, layer sizes + parameters.
void save_checkpoint(const QNetwork& net, const std::string& path);
QNetwork load_checkpoint(const std::string& path);

}  // namespace deskrl
