#include "deskrl/ensemble.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

namespace deskrl {

void EnsembleConfig::check() const {
    auto need = [](bool ok, const char* msg) {
        if (!ok) throw validation_error(std::string("EnsembleConfig: ") + msg);
    };
    need(n_agents >= 1, "n_agents must be >= 1");
    need(agree_pct >= 0.0 && agree_pct < 100.0, "agree_pct must be in [0, 100)");
    need(window >= 1, "window must be >= 1");
    need(plateau_tol >= 0.0, "plateau_tol must be >= 0");
    need(tail_fraction > 0.0 && tail_fraction <= 1.0, "tail_fraction must be in (0, 1]");
}

// ---------------------------------------------------------------------------
// convergence filtering
// ---------------------------------------------------------------------------

std::vector<double> rolling_mean(const std::vector<double>& xs, int window) {
    if (window < 1) throw validation_error("rolling_mean: window must be >= 1");
    if (xs.size() < static_cast<std::size_t>(window))
        throw validation_error("rolling_mean: series of " + std::to_string(xs.size()) +
                               " is shorter than window " + std::to_string(window));
    std::size_t w = static_cast<std::size_t>(window);
    std::vector<double> out;
    out.reserve(xs.size() - w + 1);
    double sum = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sum += xs[i];
        if (i + 1 >= w) {
            out.push_back(sum / static_cast<double>(w));
            sum -= xs[i + 1 - w];
        }
    }
    return out;
}

ConvergenceReport assess_convergence(const TrainingCurve& curve, const EnsembleConfig& cfg) {
    cfg.check();
    std::vector<double> rolled = rolling_mean(curve.sharpe, cfg.window);

    ConvergenceReport rep;
    rep.peak = *std::max_element(rolled.begin(), rolled.end());
    rep.threshold = rep.peak - cfg.plateau_tol * std::fabs(rep.peak);

    std::size_t tail = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::floor(cfg.tail_fraction *
                                               static_cast<double>(rolled.size()))));
    double sum = 0.0;
    for (std::size_t i = rolled.size() - tail; i < rolled.size(); ++i) sum += rolled[i];
    rep.tail_mean = sum / static_cast<double>(tail);
    rep.converged = rep.tail_mean >= rep.threshold;
    return rep;
}

FilterOutcome filter_agents(const std::vector<TrainingCurve>& curves,
                            const EnsembleConfig& cfg) {
    if (curves.empty()) throw validation_error("filter_agents: no curves");
    FilterOutcome out;
    for (std::size_t i = 0; i < curves.size(); ++i) {
        out.reports.push_back(assess_convergence(curves[i], cfg));
        if (out.reports.back().converged) out.kept.push_back(i);
    }
    if (out.kept.empty()) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < out.reports.size(); ++i)
            if (out.reports[i].tail_mean > out.reports[best].tail_mean) best = i;
        out.kept.push_back(best);
        out.fallback = true;
        out.warning = "no agent converged; keeping the best tail mean (agent " +
                      std::to_string(best) + ")";
    }
    return out;
}

std::string FilterOutcome::to_json() const {
    nlohmann::json j;
    j["kept"] = kept;
    j["fallback"] = fallback;
    if (fallback) j["warning"] = warning;
    nlohmann::json agents = nlohmann::json::array();
    for (const auto& r : reports)
        agents.push_back({{"converged", r.converged},
                          {"tail_mean", r.tail_mean},
                          {"peak", r.peak},
                          {"threshold", r.threshold}});
    j["agents"] = std::move(agents);
    return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// voting
// ---------------------------------------------------------------------------

int vote(const std::vector<int>& actions, int previous, double agree_pct) {
    if (actions.empty()) throw validation_error("vote: no actions");
    if (agree_pct < 0.0 || agree_pct >= 100.0)
        throw validation_error("vote: agree_pct must be in [0, 100)");
    int counts[3] = {0, 0, 0};
    for (int a : actions) {
        if (a < -1 || a > 1) throw validation_error("vote: action outside {-1, 0, +1}");
        ++counts[a + 1];
    }
    int best = std::max({counts[0], counts[1], counts[2]});
    int winners = (counts[0] == best) + (counts[1] == best) + (counts[2] == best);
    bool passes = 100.0 * best > agree_pct * static_cast<double>(actions.size());
    if (winners != 1 || !passes) return previous;
    if (counts[0] == best) return -1;
    return counts[1] == best ? 0 : 1;
}

// ---------------------------------------------------------------------------
// shared-book rollout
// ---------------------------------------------------------------------------

EnsembleRun ensemble_run(const std::vector<QNetwork>& agents, const FeatureMatrix& m,
                         std::size_t begin, std::size_t end, const EnvConfig& env_cfg,
                         const EnsembleConfig& cfg) {
    cfg.check();
    if (agents.empty()) throw validation_error("ensemble_run: no agents");

    EnsembleRun out;
    auto* votes = &out.votes;
    const auto* nets = &agents;
    double pct = cfg.agree_pct;
    PolicyFn policy = [votes, nets, pct](const Observation& obs, std::size_t) {
        std::size_t n = obs.size();
        // The position one-hot occupies the last three slots.
        int prev = obs.x[n - 3] == 1.0 ? -1 : obs.x[n - 1] == 1.0 ? 1 : 0;
        std::vector<int> acts;
        acts.reserve(nets->size());
        for (const auto& net : *nets) acts.push_back(to_int(act_greedy(net, obs.x)));
        votes->push_back(acts);
        return action_from_int(vote(acts, prev, pct));
    };
    out.record = run_policy(policy, m, begin, end, env_cfg);
    return out;
}

void EnsembleRun::trace_csv(const std::string& path) const {
    std::size_t n_agents = votes.empty() ? 0 : votes.front().size();
    std::string out = "date";
    for (std::size_t a = 0; a < n_agents; ++a) {
        out += ",agent_";
        out += std::to_string(a);
    }
    out += ",ensemble_position\n";
    for (std::size_t t = 0; t < votes.size(); ++t) {
        out += record.dates[t].to_string();
        for (int v : votes[t]) {
            out += ',';
            out += std::to_string(v);
        }
        out += ',';
        out += std::to_string(record.positions[t]);
        out += '\n';
    }
    write_text_file(path, out);
}

}  // namespace deskrl
