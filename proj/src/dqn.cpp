#include "deskrl/dqn.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

namespace deskrl {

// ---------------------------------------------------------------------------
// network
// ---------------------------------------------------------------------------

QNetwork QNetwork::make(const std::vector<std::size_t>& sizes, Rng& rng) {
    if (sizes.size() < 2) throw validation_error("QNetwork: need input and output sizes");
    if (sizes.back() != 3) throw validation_error("QNetwork: output size must be 3");
    for (std::size_t s : sizes)
        if (s == 0) throw validation_error("QNetwork: zero-width layer");

    QNetwork net;
    net.layer_sizes = sizes;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        Layer layer;
        layer.in = sizes[l];
        layer.out = sizes[l + 1];
        layer.w.resize(layer.in * layer.out);
        layer.b.assign(layer.out, 0.0);
        double scale = std::sqrt(2.0 / static_cast<double>(layer.in));
        for (double& w : layer.w) w = scale * rng.normal();
        net.layers.push_back(std::move(layer));
    }
    return net;
}

std::size_t QNetwork::n_params() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.w.size() + l.b.size();
    return n;
}

bool QNetwork::finite() const {
    for (const auto& l : layers) {
        for (double v : l.w)
            if (!std::isfinite(v)) return false;
        for (double v : l.b)
            if (!std::isfinite(v)) return false;
    }
    return true;
}

std::vector<double> flatten_params(const QNetwork& net) {
    std::vector<double> out;
    out.reserve(net.n_params());
    for (const auto& l : net.layers) {
        out.insert(out.end(), l.w.begin(), l.w.end());
        out.insert(out.end(), l.b.begin(), l.b.end());
    }
    return out;
}

void set_params(QNetwork& net, const std::vector<double>& flat) {
    if (flat.size() != net.n_params())
        throw validation_error("set_params: size mismatch");
    std::size_t k = 0;
    for (auto& l : net.layers) {
        for (double& w : l.w) w = flat[k++];
        for (double& b : l.b) b = flat[k++];
    }
}

std::vector<double> forward(const QNetwork& net, const std::vector<double>& x) {
    if (x.size() != net.input_size())
        throw validation_error("forward: observation length " + std::to_string(x.size()) +
                               " does not match input size " +
                               std::to_string(net.input_size()));
    std::vector<double> a = x, next;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        const auto& layer = net.layers[l];
        next.assign(layer.out, 0.0);
        for (std::size_t o = 0; o < layer.out; ++o) {
            const double* wrow = layer.w.data() + o * layer.in;
            double s = layer.b[o];
            for (std::size_t i = 0; i < layer.in; ++i) s += wrow[i] * a[i];
            next[o] = s;
        }
        if (l + 1 < net.layers.size())
            for (double& v : next) v = v > 0.0 ? v : 0.0;  // rectifier on hidden
        a.swap(next);
    }
    return a;
}

// ---------------------------------------------------------------------------
// replay
// ---------------------------------------------------------------------------

void ReplayConfig::check() const {
    if (capacity == 0) throw validation_error("ReplayConfig: capacity must be positive");
    if (alpha < 0.0) throw validation_error("ReplayConfig: alpha must be >= 0");
    if (priority_eps <= 0.0) throw validation_error("ReplayConfig: priority_eps must be > 0");
}

ReplayBuffer::ReplayBuffer(ReplayConfig cfg) : cfg_(cfg) {
    cfg_.check();
    ring_.reserve(std::min<std::size_t>(cfg_.capacity, 4096));
}

void ReplayBuffer::push(Transition t) {
    if (!full_) {
        ring_.push_back(std::move(t));
        prio_.push_back(max_prio_);
        next_ = ring_.size() % cfg_.capacity;
        if (next_ == 0) full_ = true;
        return;
    }
    ring_[next_] = std::move(t);
    prio_[next_] = max_prio_;
    next_ = (next_ + 1) % cfg_.capacity;
}

ReplayBuffer::Batch ReplayBuffer::sample(std::size_t batch_size, double beta, Rng& rng) const {
    std::size_t n = size();
    if (batch_size == 0) throw validation_error("sample: batch size must be positive");
    if (n < batch_size)
        throw validation_error("sample: buffer holds " + std::to_string(n) +
                               " transitions, need " + std::to_string(batch_size));

    Batch out;
    out.indices.reserve(batch_size);
    out.items.reserve(batch_size);
    out.weights.reserve(batch_size);

    if (cfg_.mode == ReplayMode::uniform) {
        for (std::size_t k = 0; k < batch_size; ++k) {
            std::size_t i = rng.uniform_index(n);
            out.indices.push_back(i);
            out.items.push_back(&ring_[i]);
            out.weights.push_back(1.0);
        }
        return out;
    }

    // Proportional scheme: P(i) = p_i^alpha / sum, drawn via the cumulative
    // distribution; importance weights (N P(i))^-beta, max-normalized over
    // the batch.
    std::vector<double> cum(n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        total += std::pow(prio_[i], cfg_.alpha);
        cum[i] = total;
    }
    if (!(total > 0.0)) throw runtime_failure("sample: degenerate priority mass");

    std::vector<double> probs(batch_size);
    for (std::size_t k = 0; k < batch_size; ++k) {
        double u = rng.uniform() * total;
        std::size_t i = static_cast<std::size_t>(
            std::lower_bound(cum.begin(), cum.end(), u) - cum.begin());
        if (i >= n) i = n - 1;
        out.indices.push_back(i);
        out.items.push_back(&ring_[i]);
        double p = (cum[i] - (i == 0 ? 0.0 : cum[i - 1])) / total;
        probs[k] = p;
    }
    double wmax = 0.0;
    for (std::size_t k = 0; k < batch_size; ++k) {
        double w = std::pow(static_cast<double>(n) * probs[k], -beta);
        out.weights.push_back(w);
        wmax = std::max(wmax, w);
    }
    for (double& w : out.weights) w /= wmax;
    return out;
}

void ReplayBuffer::update_priorities(const std::vector<std::size_t>& indices,
                                     const std::vector<double>& td_errors) {
    if (indices.size() != td_errors.size())
        throw validation_error("update_priorities: size mismatch");
    for (std::size_t k = 0; k < indices.size(); ++k) {
        double p = std::fabs(td_errors[k]) + cfg_.priority_eps;
        prio_[indices[k]] = p;
        max_prio_ = std::max(max_prio_, p);
    }
}

// ---------------------------------------------------------------------------
// targets, loss, gradient
// ---------------------------------------------------------------------------

std::vector<double> td_targets(const std::vector<const Transition*>& batch,
                               const QNetwork& target_net, double gamma) {
    if (batch.empty()) throw validation_error("td_targets: empty batch");
    std::vector<double> out;
    out.reserve(batch.size());
    for (const Transition* t : batch) {
        double y = t->reward;
        if (!t->terminal && gamma != 0.0) {
            std::vector<double> q = forward(target_net, t->next_obs);
            y += gamma * *std::max_element(q.begin(), q.end());
        }
        out.push_back(y);
    }
    return out;
}

double batch_loss(const QNetwork& net, const std::vector<const Transition*>& batch,
                  const std::vector<double>& targets, const std::vector<double>& weights) {
    if (batch.empty()) throw validation_error("batch_loss: empty batch");
    if (batch.size() != targets.size() || batch.size() != weights.size())
        throw validation_error("batch_loss: batch/targets/weights size mismatch");
    double loss = 0.0;
    for (std::size_t k = 0; k < batch.size(); ++k) {
        std::vector<double> q = forward(net, batch[k]->obs);
        double d = q[static_cast<std::size_t>(batch[k]->action)] - targets[k];
        loss += weights[k] * d * d;
    }
    return loss / static_cast<double>(batch.size());
}

LossGrad loss_and_gradient(const QNetwork& net, const std::vector<const Transition*>& batch,
                           const std::vector<double>& targets,
                           const std::vector<double>& weights) {
    if (batch.empty()) throw validation_error("loss_and_gradient: empty batch");
    if (batch.size() != targets.size() || batch.size() != weights.size())
        throw validation_error("loss_and_gradient: batch/targets/weights size mismatch");

    std::size_t nl = net.layers.size();
    LossGrad out;
    out.grad.assign(net.n_params(), 0.0);
    out.td_errors.reserve(batch.size());

    // Per-layer offsets into the flat gradient.
    std::vector<std::size_t> offset(nl);
    std::size_t off = 0;
    for (std::size_t l = 0; l < nl; ++l) {
        offset[l] = off;
        off += net.layers[l].w.size() + net.layers[l].b.size();
    }

    double inv_b = 1.0 / static_cast<double>(batch.size());
    std::vector<std::vector<double>> acts(nl + 1);   // post-activation per layer
    std::vector<std::vector<double>> pre(nl);        // pre-activation per layer
    std::vector<double> delta, delta_prev;

    for (std::size_t k = 0; k < batch.size(); ++k) {
        const Transition& tr = *batch[k];
        if (tr.obs.size() != net.input_size())
            throw validation_error("loss_and_gradient: observation length mismatch");
        if (tr.action < 0 || tr.action > 2)
            throw validation_error("loss_and_gradient: action index out of range");

        acts[0] = tr.obs;
        for (std::size_t l = 0; l < nl; ++l) {
            const auto& layer = net.layers[l];
            pre[l].assign(layer.out, 0.0);
            for (std::size_t o = 0; o < layer.out; ++o) {
                const double* wrow = layer.w.data() + o * layer.in;
                double s = layer.b[o];
                const double* a = acts[l].data();
                for (std::size_t i = 0; i < layer.in; ++i) s += wrow[i] * a[i];
                pre[l][o] = s;
            }
            acts[l + 1] = pre[l];
            if (l + 1 < nl)
                for (double& v : acts[l + 1]) v = v > 0.0 ? v : 0.0;
        }

        double q = acts[nl][static_cast<std::size_t>(tr.action)];
        double diff = q - targets[k];
        out.td_errors.push_back(diff);
        out.loss += weights[k] * diff * diff * inv_b;

        // Backward: only the chosen action's output carries loss.
        delta.assign(net.layers[nl - 1].out, 0.0);
        delta[static_cast<std::size_t>(tr.action)] = 2.0 * weights[k] * diff * inv_b;
        for (std::size_t l = nl; l-- > 0;) {
            const auto& layer = net.layers[l];
            double* gw = out.grad.data() + offset[l];
            double* gb = gw + layer.w.size();
            const double* a = acts[l].data();
            for (std::size_t o = 0; o < layer.out; ++o) {
                double d = delta[o];
                if (d != 0.0) {
                    double* grow = gw + o * layer.in;
                    for (std::size_t i = 0; i < layer.in; ++i) grow[i] += d * a[i];
                    gb[o] += d;
                }
            }
            if (l == 0) break;
            delta_prev.assign(layer.in, 0.0);
            for (std::size_t o = 0; o < layer.out; ++o) {
                double d = delta[o];
                if (d == 0.0) continue;
                const double* wrow = layer.w.data() + o * layer.in;
                for (std::size_t i = 0; i < layer.in; ++i) delta_prev[i] += d * wrow[i];
            }
            for (std::size_t i = 0; i < layer.in; ++i)
                if (pre[l - 1][i] <= 0.0) delta_prev[i] = 0.0;
            delta.swap(delta_prev);
        }
    }
    return out;
}

SgdResult sgd_step(QNetwork& net, const std::vector<const Transition*>& batch,
                   const std::vector<double>& targets, double lr,
                   const std::vector<double>& weights, double grad_clip) {
    LossGrad lg = loss_and_gradient(net, batch, targets, weights);
    if (!std::isfinite(lg.loss))
        throw runtime_failure("sgd_step: non-finite loss (batch size " +
                              std::to_string(batch.size()) + ", lr " + num_str(lr) + ")");

    double norm_sq = 0.0;
    for (double g : lg.grad) norm_sq += g * g;
    double norm = std::sqrt(norm_sq);
    double scale = grad_clip > 0.0 && norm > grad_clip ? grad_clip / norm : 1.0;

    std::size_t k = 0;
    for (auto& layer : net.layers) {
        for (double& w : layer.w) w -= lr * scale * lg.grad[k++];
        for (double& b : layer.b) b -= lr * scale * lg.grad[k++];
    }
    return {lg.loss, std::move(lg.td_errors)};
}

// ---------------------------------------------------------------------------
// action selection
// ---------------------------------------------------------------------------

Action act_greedy(const QNetwork& net, const std::vector<double>& x) {
    std::vector<double> q = forward(net, x);
    std::size_t best = 0;
    for (std::size_t i = 1; i < q.size(); ++i)
        if (q[i] > q[best]) best = i;  // strict: ties keep the lowest index
    return action_from_int(static_cast<int>(best) - 1);
}

Action act_epsilon_greedy(const QNetwork& net, const std::vector<double>& x, double epsilon,
                          Rng& rng) {
    if (epsilon < 0.0 || epsilon > 1.0)
        throw validation_error("act_epsilon_greedy: epsilon must be in [0, 1]");
    if (rng.uniform() < epsilon)
        return action_from_int(static_cast<int>(rng.uniform_index(3)) - 1);
    return act_greedy(net, x);
}

// ---------------------------------------------------------------------------
// training loop
// ---------------------------------------------------------------------------

void TrainConfig::check() const {
    auto need = [](bool ok, const char* msg) {
        if (!ok) throw validation_error(std::string("TrainConfig: ") + msg);
    };
    need(gamma >= 0.0 && gamma <= 1.0, "gamma must be in [0, 1]");
    need(lr >= 0.0, "lr must be >= 0");
    need(epsilon_start >= 0.0 && epsilon_start <= 1.0, "epsilon_start must be in [0, 1]");
    need(epsilon_end >= 0.0 && epsilon_end <= 1.0, "epsilon_end must be in [0, 1]");
    need(epsilon_decay_episodes >= 0, "epsilon_decay_episodes must be >= 0");
    need(batch_size > 0, "batch_size must be positive");
    need(target_update_steps > 0, "target_update_steps must be positive");
    need(episodes >= 0, "episodes must be >= 0");
    need(!hidden.empty(), "need at least one hidden layer");
    need(replay_capacity > 0, "replay_capacity must be positive");
    need(priority_alpha >= 0.0, "priority_alpha must be >= 0");
    need(priority_beta_start > 0.0 && priority_beta_start <= 1.0,
         "priority_beta_start must be in (0, 1]");
}

static double epsilon_at(const TrainConfig& cfg, int episode) {
    if (cfg.epsilon_decay_episodes == 0) return cfg.epsilon_end;
    double frac = std::min(1.0, static_cast<double>(episode) /
                                    static_cast<double>(cfg.epsilon_decay_episodes));
    return cfg.epsilon_start + (cfg.epsilon_end - cfg.epsilon_start) * frac;
}

// Unit-scale observation noise on feature slots; the position one-hot is the
// final three entries.
static void noise_in_place(std::vector<double>& x, double fraction, Rng& rng) {
    std::size_t n_feat = x.size() >= 3 ? x.size() - 3 : 0;
    for (std::size_t i = 0; i < n_feat; ++i) x[i] += fraction * rng.normal();
}

TrainResult train(const FeatureMatrix& m, std::size_t begin, std::size_t end,
                  const EnvConfig& env_cfg, const TrainConfig& cfg) {
    cfg.check();
    env_cfg.check();
    double noise = env_cfg.features.noise_fraction;
    if (noise > 0.0 && !m.normalized)
        throw validation_error("train: observation noise needs a normalized matrix");

    TradingEnv env(m, env_cfg);
    std::size_t lo = std::max(begin, env.min_start());
    std::size_t ep_len = static_cast<std::size_t>(env_cfg.episode_length);
    if (end >= m.n_rows())
        throw validation_error("train: range outside matrix rows");
    if (end < lo + ep_len)
        throw validation_error("train: range shorter than one episode window plus lookback");
    std::size_t hi = end - ep_len;  // step indices stay in [begin, end]

    Rng rng(cfg.seed);
    std::vector<std::size_t> sizes;
    sizes.push_back(0);
    for (std::size_t h : cfg.hidden) sizes.push_back(h);
    sizes.push_back(3);
    ObservationBuilder probe(m, env_cfg.features);
    sizes[0] = probe.layout()->size();

    TrainResult result;
    result.net = QNetwork::make(sizes, rng);
    QNetwork target = result.net;

    ReplayConfig rc;
    rc.mode = cfg.replay_mode;
    rc.capacity = cfg.replay_capacity;
    rc.alpha = cfg.priority_alpha;
    ReplayBuffer buffer(rc);

    std::size_t min_fill = std::max(cfg.batch_size, cfg.warmup_transitions);
    long long global_step = 0;

    for (int ep = 0; ep < cfg.episodes; ++ep) {
        double eps = epsilon_at(cfg, ep);
        double beta = cfg.priority_beta_start +
                      (1.0 - cfg.priority_beta_start) *
                          (cfg.episodes > 1 ? static_cast<double>(ep) /
                                                  static_cast<double>(cfg.episodes - 1)
                                            : 1.0);

        std::size_t start = lo + rng.uniform_index(hi - lo + 1);
        Observation raw = env.reset(start);
        std::vector<double> cur = raw.x;
        if (noise > 0.0) noise_in_place(cur, noise, rng);

        bool done = false;
        while (!done) {
            Action a = act_epsilon_greedy(result.net, cur, eps, rng);
            StepResult sr = env.step(a);
            done = sr.terminal;

            std::vector<double> nxt = sr.next_obs.x;
            if (noise > 0.0) noise_in_place(nxt, noise, rng);

            Transition tr;
            tr.obs = std::move(cur);
            tr.action = to_int(a) + 1;
            tr.reward = sr.reward;
            tr.next_obs = nxt;
            tr.terminal = done;
            buffer.push(std::move(tr));
            cur = std::move(nxt);

            ++global_step;
            if (buffer.size() >= min_fill) {
                ReplayBuffer::Batch batch = buffer.sample(cfg.batch_size, beta, rng);
                std::vector<double> ys = td_targets(batch.items, target, cfg.gamma);
                SgdResult res = sgd_step(result.net, batch.items, ys, cfg.lr, batch.weights);
                if (cfg.replay_mode == ReplayMode::prioritized)
                    buffer.update_priorities(batch.indices, res.td_errors);
            }
            if (global_step % cfg.target_update_steps == 0) target = result.net;
        }

        result.curve.sharpe.push_back(episode_sharpe(env.record()).value);
        if (!result.net.finite())
            throw runtime_failure("train: non-finite parameters after episode " +
                                  std::to_string(ep));
    }
    return result;
}

// ---------------------------------------------------------------------------
// curve and checkpoint io
// ---------------------------------------------------------------------------

void TrainingCurve::to_csv(const std::string& path) const {
    std::string out = "episode,sharpe\n";
    for (std::size_t i = 0; i < sharpe.size(); ++i) {
        out += std::to_string(i + 1);
        out += ',';
        out += num_str(sharpe[i]);
        out += '\n';
    }
    write_text_file(path, out);
}

TrainingCurve TrainingCurve::from_csv(const std::string& path) {
    std::string text = read_text_file(path);
    std::vector<std::string_view> lines = split(text, '\n');
    if (lines.empty() || trim(lines[0]) != "episode,sharpe")
        throw validation_error(path + ": bad header, want 'episode,sharpe'");
    TrainingCurve curve;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        std::string_view line = trim(lines[i]);
        if (line.empty()) continue;
        auto cells = split(line, ',');
        if (cells.size() != 2)
            throw validation_error(path + ":" + std::to_string(i + 1) + ": expected 2 fields");
        double v = 0.0;
        if (!parse_double(cells[1], v))
            throw validation_error(path + ":" + std::to_string(i + 1) + ": bad sharpe value");
        curve.sharpe.push_back(v);
    }
    return curve;
}

void save_checkpoint(const QNetwork& net, const std::string& path) {
    nlohmann::json j;
    j["version"] = 1;
    j["layer_sizes"] = net.layer_sizes;
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : net.layers) {
        nlohmann::json jl;
        jl["w"] = l.w;
        jl["b"] = l.b;
        layers.push_back(std::move(jl));
    }
    j["layers"] = std::move(layers);
    write_text_file(path, j.dump(2) + "\n");
}

QNetwork load_checkpoint(const std::string& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_text_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw validation_error(path + ": bad checkpoint json: " + e.what());
    }
    if (!j.contains("version") || j["version"].get<int>() != 1)
        throw validation_error(path + ": unsupported checkpoint version");

    QNetwork net;
    net.layer_sizes = j["layer_sizes"].get<std::vector<std::size_t>>();
    if (net.layer_sizes.size() < 2 || net.layer_sizes.back() != 3)
        throw validation_error(path + ": bad layer sizes in checkpoint");
    for (std::size_t l = 0; l + 1 < net.layer_sizes.size(); ++l) {
        QNetwork::Layer layer;
        layer.in = net.layer_sizes[l];
        layer.out = net.layer_sizes[l + 1];
        layer.w = j["layers"][l]["w"].get<std::vector<double>>();
        layer.b = j["layers"][l]["b"].get<std::vector<double>>();
        if (layer.w.size() != layer.in * layer.out || layer.b.size() != layer.out)
            throw validation_error(path + ": checkpoint parameter shape mismatch");
        net.layers.push_back(std::move(layer));
    }
    if (!net.finite()) throw validation_error(path + ": non-finite checkpoint parameters");
    return net;
}

}  // namespace deskrl
