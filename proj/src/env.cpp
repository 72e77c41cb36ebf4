#include "deskrl/env.hpp"

#include <cmath>

namespace deskrl {

Action action_from_int(int v) {
    if (v < -1 || v > 1)
        throw validation_error("action must be -1, 0 or +1, got " + std::to_string(v));
    return static_cast<Action>(v);
}

void EnvConfig::check() const {
    if (tc < 0.0) throw validation_error("EnvConfig: tc must be >= 0");
    if (episode_length < 2) throw validation_error("EnvConfig: episode_length must be >= 2");
    features.check();
}

double EpisodeRecord::cumulative_reward() const {
    double s = 0.0;
    for (double r : rewards) s += r;
    return s;
}

double EpisodeRecord::gross_pnl() const {
    double s = 0.0;
    int prev = 0;
    for (std::size_t i = 0; i < size(); ++i) {
        s += prev * raw_returns[i];
        prev = positions[i];
    }
    return s;
}

double EpisodeRecord::turnover() const {
    double s = 0.0;
    int prev = 0;
    for (int p : positions) {
        s += std::abs(p - prev);
        prev = p;
    }
    return s;
}

void EpisodeRecord::to_csv(const std::string& path) const {
    std::string out = "date,position,raw_return,reward\n";
    for (std::size_t i = 0; i < size(); ++i) {
        out += dates[i].to_string();
        out += ',';
        out += std::to_string(positions[i]);
        out += ',';
        out += num_str(raw_returns[i]);
        out += ',';
        out += num_str(rewards[i]);
        out += '\n';
    }
    write_text_file(path, out);
}

SharpeResult sharpe_of(const std::vector<double>& rewards) {
    if (rewards.size() < 2)
        throw validation_error("sharpe: need at least 2 rewards");
    double n = static_cast<double>(rewards.size());
    double mean = 0.0;
    for (double r : rewards) mean += r;
    mean /= n;
    double var = 0.0;
    for (double r : rewards) var += (r - mean) * (r - mean);
    var /= n;
    double sd = std::sqrt(var);
    if (sd < 1e-12) return {0.0, true};
    return {std::sqrt(252.0) * mean / sd, false};
}

SharpeResult episode_sharpe(const EpisodeRecord& record) { return sharpe_of(record.rewards); }

TradingEnv::TradingEnv(const FeatureMatrix& m, EnvConfig cfg)
    : m_(&m), cfg_(std::move(cfg)), builder_(m, cfg_.features) {
    cfg_.check();
    if (m_->raw_close.size() != m_->n_rows())
        throw validation_error("TradingEnv: matrix lacks raw close prices");
}

std::size_t TradingEnv::min_start() const {
    // Every step reads close_{t-1}; the first step also needs lookback rows.
    return std::max<std::size_t>(builder_.min_index(), 1);
}

std::size_t TradingEnv::max_start() const {
    std::size_t need = static_cast<std::size_t>(cfg_.episode_length) + 1;
    if (m_->n_rows() < need + min_start())
        throw validation_error("TradingEnv: matrix too short for one episode");
    return m_->n_rows() - need;
}

Observation TradingEnv::reset(std::size_t start) {
    if (start < min_start())
        throw validation_error("reset: insufficient history at index " + std::to_string(start));
    if (start > max_start())
        throw validation_error("reset: episode would overrun the matrix at index " +
                               std::to_string(start));
    t_ = start;
    pos_ = 0;
    steps_ = 0;
    live_ = true;
    rec_ = EpisodeRecord{};
    rec_.start_index = start;
    return builder_.build(t_, pos_);
}

StepResult TradingEnv::step(Action a) {
    if (!live_) throw validation_error("step: reset the environment first");
    if (terminal()) throw validation_error("step: episode already terminal");

    StepResult out;
    out.raw_return = m_->raw_close[t_] - m_->raw_close[t_ - 1];
    out.reward = pos_ * out.raw_return - cfg_.tc * std::abs(to_int(a) - pos_);

    rec_.dates.push_back(m_->dates[t_]);
    rec_.positions.push_back(to_int(a));
    rec_.raw_returns.push_back(out.raw_return);
    rec_.rewards.push_back(out.reward);

    pos_ = to_int(a);
    ++steps_;
    ++t_;
    out.terminal = steps_ == cfg_.episode_length;
    out.next_obs = builder_.build(t_, pos_);
    return out;
}

EpisodeRecord run_policy(const PolicyFn& policy, const FeatureMatrix& m,
                         std::size_t begin, std::size_t end, const EnvConfig& cfg) {
    cfg.check();
    if (m.raw_close.size() != m.n_rows())
        throw validation_error("run_policy: matrix lacks raw close prices");
    ObservationBuilder builder(m, cfg.features);
    std::size_t lo = std::max<std::size_t>(builder.min_index(), 1);
    if (begin < lo)
        throw validation_error("run_policy: span starts before history is available");
    if (end < begin || end >= m.n_rows())
        throw validation_error("run_policy: span outside matrix rows");

    EpisodeRecord rec;
    rec.start_index = begin;
    int pos = 0;
    for (std::size_t t = begin; t <= end; ++t) {
        Observation obs = builder.build(t, pos);
        Action a = policy(obs, t);
        double r = m.raw_close[t] - m.raw_close[t - 1];
        rec.dates.push_back(m.dates[t]);
        rec.positions.push_back(to_int(a));
        rec.raw_returns.push_back(r);
        rec.rewards.push_back(pos * r - cfg.tc * std::abs(to_int(a) - pos));
        pos = to_int(a);
    }
    return rec;
}

}  // namespace deskrl
