#include "mpf/attention.hpp"

#include <cmath>

#include "mpf/errors.hpp"
#include "mpf/stats.hpp"

namespace mpf::attn {

namespace {

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits) {
    Eigen::MatrixXd out(logits.rows(), logits.cols());
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        double mx = logits.row(i).maxCoeff();
        Eigen::ArrayXd e = (logits.row(i).array() - mx).exp();
        out.row(i) = (e / e.sum()).matrix();
    }
    return out;
}

// sinusoidal positional encoding, fixed
Eigen::MatrixXd positional(int L, int d) {
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(L, d);
    for (int pos = 0; pos < L; ++pos) {
        for (int i = 0; i < d; i += 2) {
            double rate = std::pow(10000.0, -static_cast<double>(i) / d);
            P(pos, i) = std::sin(pos * rate);
            if (i + 1 < d) P(pos, i + 1) = std::cos(pos * rate);
        }
    }
    return P;
}

}  // namespace

void AttentionConfig::validate() const {
    if (lookback < 1 || horizon < 1) throw InvalidConfig("lookback and horizon must be >= 1");
    if (d_model < 1 || n_heads < 1 || d_model % n_heads != 0)
        throw InvalidConfig("d_model must be a positive multiple of n_heads");
    if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidConfig("alpha must be in (0, 1)");
    if (epochs < 0) throw InvalidConfig("epochs must be >= 0");
}

Eigen::MatrixXd attention(const Eigen::MatrixXd& Q, const Eigen::MatrixXd& K,
                          const Eigen::MatrixXd& V) {
    if (K.rows() != V.rows()) throw ShapeMismatch("K and V row counts differ");
    if (Q.cols() != K.cols()) throw ShapeMismatch("Q and K widths differ");
    double scale = 1.0 / std::sqrt(static_cast<double>(Q.cols()));
    Eigen::MatrixXd S = softmax_rows(Q * K.transpose() * scale);
    return S * V;
}

AttentionGrads attention_backward(const Eigen::MatrixXd& Q, const Eigen::MatrixXd& K,
                                  const Eigen::MatrixXd& V, const Eigen::MatrixXd& dOut) {
    double scale = 1.0 / std::sqrt(static_cast<double>(Q.cols()));
    Eigen::MatrixXd S = softmax_rows(Q * K.transpose() * scale);

    AttentionGrads g;
    g.dV = S.transpose() * dOut;
    Eigen::MatrixXd dS = dOut * V.transpose();
    // softmax backward per row: dz = s .* (ds - (ds . s))
    Eigen::MatrixXd dZ(S.rows(), S.cols());
    for (Eigen::Index i = 0; i < S.rows(); ++i) {
        double dot = dS.row(i).dot(S.row(i));
        dZ.row(i) = S.row(i).cwiseProduct(dS.row(i).array().matrix() -
                                          Eigen::RowVectorXd::Constant(S.cols(), dot));
    }
    g.dQ = dZ * K * scale;
    g.dK = dZ.transpose() * Q * scale;
    return g;
}

AttentionWeights AttentionWeights::zeros(const AttentionConfig& cfg, int input_size) {
    AttentionWeights w;
    w.input_size = input_size;
    w.W_embed = Eigen::MatrixXd::Zero(input_size, cfg.d_model);
    w.b_embed = Eigen::VectorXd::Zero(cfg.d_model);
    for (int h = 0; h < cfg.n_heads; ++h) {
        w.W_q.push_back(Eigen::MatrixXd::Zero(cfg.d_model, cfg.d_k()));
        w.W_k.push_back(Eigen::MatrixXd::Zero(cfg.d_model, cfg.d_k()));
        w.W_v.push_back(Eigen::MatrixXd::Zero(cfg.d_model, cfg.d_k()));
    }
    w.W_o = Eigen::MatrixXd::Zero(cfg.d_model, cfg.d_model);
    w.b_o = Eigen::VectorXd::Zero(cfg.d_model);
    w.W_ff1 = Eigen::MatrixXd::Zero(cfg.d_model, cfg.d_ff());
    w.b_ff1 = Eigen::VectorXd::Zero(cfg.d_ff());
    w.W_ff2 = Eigen::MatrixXd::Zero(cfg.d_ff(), cfg.d_model);
    w.b_ff2 = Eigen::VectorXd::Zero(cfg.d_model);
    w.W_mu = Eigen::MatrixXd::Zero(cfg.d_model, cfg.horizon);
    w.b_mu = Eigen::VectorXd::Zero(cfg.horizon);
    w.W_ls = Eigen::MatrixXd::Zero(cfg.d_model, cfg.horizon);
    w.b_ls = Eigen::VectorXd::Zero(cfg.horizon);
    return w;
}

AttentionWeights AttentionWeights::init(const AttentionConfig& cfg, int input_size, Rng& rng) {
    AttentionWeights w = zeros(cfg, input_size);
    auto fill = [&](Eigen::MatrixXd& m) {
        double bound = 1.0 / std::sqrt(static_cast<double>(m.rows()));
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = rng.uniform(-bound, bound);
    };
    fill(w.W_embed);
    for (int h = 0; h < cfg.n_heads; ++h) {
        fill(w.W_q[static_cast<size_t>(h)]);
        fill(w.W_k[static_cast<size_t>(h)]);
        fill(w.W_v[static_cast<size_t>(h)]);
    }
    fill(w.W_o);
    fill(w.W_ff1);
    fill(w.W_ff2);
    fill(w.W_mu);
    fill(w.W_ls);
    return w;
}

std::vector<double*> AttentionWeights::flat() {
    std::vector<double*> out;
    auto push = [&](Eigen::MatrixXd& m) {
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            for (Eigen::Index i = 0; i < m.rows(); ++i) out.push_back(&m(i, j));
    };
    auto pushv = [&](Eigen::VectorXd& v) {
        for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(&v(i));
    };
    push(W_embed);
    pushv(b_embed);
    for (auto& m : W_q) push(m);
    for (auto& m : W_k) push(m);
    for (auto& m : W_v) push(m);
    push(W_o);
    pushv(b_o);
    push(W_ff1);
    pushv(b_ff1);
    push(W_ff2);
    pushv(b_ff2);
    push(W_mu);
    pushv(b_mu);
    push(W_ls);
    pushv(b_ls);
    return out;
}

namespace {

struct EncoderCache {
    Eigen::MatrixXd X;       // input window
    Eigen::MatrixXd E1;      // embedded + positional
    std::vector<Eigen::MatrixXd> Q, K, V, S;  // per head
    Eigen::MatrixXd A;       // concatenated heads
    Eigen::MatrixXd E2;      // after attention residual
    Eigen::MatrixXd U;       // ff pre-activation
    Eigen::MatrixXd Ur;      // relu
    Eigen::MatrixXd E3;      // after ff residual
    Eigen::VectorXd mu, ls;
};

EncoderCache run_encoder(const AttentionWeights& w, const Eigen::MatrixXd& window,
                         const AttentionConfig& cfg) {
    if (window.rows() != cfg.lookback || window.cols() != w.input_size)
        throw ShapeMismatch("window shape does not match the model");
    EncoderCache c;
    c.X = window;
    c.E1 = window * w.W_embed;
    c.E1.rowwise() += w.b_embed.transpose();
    if (cfg.positional_encoding) c.E1 += positional(cfg.lookback, cfg.d_model);

    double scale = 1.0 / std::sqrt(static_cast<double>(cfg.d_k()));
    c.A.resize(cfg.lookback, cfg.d_model);
    for (int h = 0; h < cfg.n_heads; ++h) {
        auto& Wq = w.W_q[static_cast<size_t>(h)];
        auto& Wk = w.W_k[static_cast<size_t>(h)];
        auto& Wv = w.W_v[static_cast<size_t>(h)];
        Eigen::MatrixXd Q = c.E1 * Wq;
        Eigen::MatrixXd K = c.E1 * Wk;
        Eigen::MatrixXd V = c.E1 * Wv;
        Eigen::MatrixXd S = softmax_rows(Q * K.transpose() * scale);
        c.A.middleCols(h * cfg.d_k(), cfg.d_k()) = S * V;
        c.Q.push_back(std::move(Q));
        c.K.push_back(std::move(K));
        c.V.push_back(std::move(V));
        c.S.push_back(std::move(S));
    }
    Eigen::MatrixXd O = c.A * w.W_o;
    O.rowwise() += w.b_o.transpose();
    c.E2 = c.E1 + O;

    c.U = c.E2 * w.W_ff1;
    c.U.rowwise() += w.b_ff1.transpose();
    c.Ur = c.U.cwiseMax(0.0);
    Eigen::MatrixXd F = c.Ur * w.W_ff2;
    F.rowwise() += w.b_ff2.transpose();
    c.E3 = c.E2 + F;

    Eigen::RowVectorXd e = c.E3.row(cfg.lookback - 1);
    c.mu = (e * w.W_mu).transpose() + w.b_mu;
    c.ls = (e * w.W_ls).transpose() + w.b_ls;
    return c;
}

}  // namespace

HeadOutputs encode_and_project(const AttentionWeights& w, const Eigen::MatrixXd& window,
                               const AttentionConfig& cfg) {
    auto c = run_encoder(w, window, cfg);
    return {c.mu, c.ls};
}

double nll_backward(const AttentionWeights& w, const Eigen::MatrixXd& window,
                    const Eigen::VectorXd& labels, const AttentionConfig& cfg,
                    AttentionWeights& g) {
    if (labels.size() != cfg.horizon) throw ShapeMismatch("label count must equal the horizon");
    auto c = run_encoder(w, window, cfg);

    const double half_log_2pi = 0.9189385332046727;
    double loss = 0.0;
    Eigen::VectorXd dmu(cfg.horizon), dls(cfg.horizon);
    for (int h = 0; h < cfg.horizon; ++h) {
        double inv_var = std::exp(-2.0 * c.ls(h));
        double err = labels(h) - c.mu(h);
        loss += half_log_2pi + c.ls(h) + 0.5 * err * err * inv_var;
        dmu(h) = -err * inv_var;
        dls(h) = 1.0 - err * err * inv_var;
    }

    Eigen::RowVectorXd e = c.E3.row(cfg.lookback - 1);
    g.W_mu += e.transpose() * dmu.transpose();
    g.b_mu += dmu;
    g.W_ls += e.transpose() * dls.transpose();
    g.b_ls += dls;

    Eigen::MatrixXd dE3 = Eigen::MatrixXd::Zero(cfg.lookback, cfg.d_model);
    dE3.row(cfg.lookback - 1) = (w.W_mu * dmu + w.W_ls * dls).transpose();

    // feed-forward block
    Eigen::MatrixXd dUr = dE3 * w.W_ff2.transpose();
    g.W_ff2 += c.Ur.transpose() * dE3;
    g.b_ff2 += dE3.colwise().sum().transpose();
    Eigen::MatrixXd dU = dUr.cwiseProduct((c.U.array() > 0.0).cast<double>().matrix());
    g.W_ff1 += c.E2.transpose() * dU;
    g.b_ff1 += dU.colwise().sum().transpose();
    Eigen::MatrixXd dE2 = dE3 + dU * w.W_ff1.transpose();

    // attention block
    Eigen::MatrixXd dA = dE2 * w.W_o.transpose();
    g.W_o += c.A.transpose() * dE2;
    g.b_o += dE2.colwise().sum().transpose();
    Eigen::MatrixXd dE1 = dE2;  // residual path

    double scale = 1.0 / std::sqrt(static_cast<double>(cfg.d_k()));
    for (int h = 0; h < cfg.n_heads; ++h) {
        const auto& Q = c.Q[static_cast<size_t>(h)];
        const auto& K = c.K[static_cast<size_t>(h)];
        const auto& V = c.V[static_cast<size_t>(h)];
        const auto& S = c.S[static_cast<size_t>(h)];
        Eigen::MatrixXd dAh = dA.middleCols(h * cfg.d_k(), cfg.d_k());

        Eigen::MatrixXd dV = S.transpose() * dAh;
        Eigen::MatrixXd dS = dAh * V.transpose();
        Eigen::MatrixXd dZ(S.rows(), S.cols());
        for (Eigen::Index i = 0; i < S.rows(); ++i) {
            double dot = dS.row(i).dot(S.row(i));
            dZ.row(i) = S.row(i).cwiseProduct(
                dS.row(i) - Eigen::RowVectorXd::Constant(S.cols(), dot));
        }
        Eigen::MatrixXd dQ = dZ * K * scale;
        Eigen::MatrixXd dK = dZ.transpose() * Q * scale;

        g.W_q[static_cast<size_t>(h)] += c.E1.transpose() * dQ;
        g.W_k[static_cast<size_t>(h)] += c.E1.transpose() * dK;
        g.W_v[static_cast<size_t>(h)] += c.E1.transpose() * dV;
        dE1 += dQ * w.W_q[static_cast<size_t>(h)].transpose() +
               dK * w.W_k[static_cast<size_t>(h)].transpose() +
               dV * w.W_v[static_cast<size_t>(h)].transpose();
    }

    g.W_embed += c.X.transpose() * dE1;
    g.b_embed += dE1.colwise().sum().transpose();
    return loss;
}

namespace {

Eigen::VectorXd raw_row(const FeatureRow& row) {
    Eigen::VectorXd x(1 + row.x.size());
    x(0) = row.target;
    for (size_t j = 0; j < row.x.size(); ++j) x(1 + static_cast<Eigen::Index>(j)) = row.x[j];
    return x;
}

AttentionScaler fit_scaler(const FeatureMatrix& m) {
    const Eigen::Index k = 1 + static_cast<Eigen::Index>(m.n_cols());
    AttentionScaler sc;
    sc.mean = Eigen::VectorXd::Zero(k);
    sc.sd = Eigen::VectorXd::Zero(k);
    for (const auto& row : m.rows) sc.mean += raw_row(row);
    sc.mean /= static_cast<double>(m.rows.size());
    for (const auto& row : m.rows) {
        Eigen::VectorXd d = raw_row(row) - sc.mean;
        sc.sd += d.cwiseProduct(d);
    }
    sc.sd = (sc.sd / static_cast<double>(m.rows.size())).cwiseSqrt();
    for (Eigen::Index i = 0; i < k; ++i)
        if (sc.sd(i) == 0.0) sc.sd(i) = 1.0;
    return sc;
}

bool contiguous_rows(const FeatureMatrix& m, size_t from, size_t to) {
    for (size_t i = from + 1; i <= to; ++i)
        if (quarters_between(m.rows[i - 1].quarter, m.rows[i].quarter) != 1) return false;
    return true;
}

// window-anchored scaling (deviation from the final row per channel, plus
// one channel holding the anchor's global z); keeps drifting levels in range
Eigen::MatrixXd window_at(const FeatureMatrix& m, const AttentionScaler& sc, size_t end,
                          int lookback) {
    Eigen::VectorXd anchor = raw_row(m.rows[end]);
    Eigen::MatrixXd W(lookback, sc.mean.size() + 1);
    for (int i = 0; i < lookback; ++i) {
        Eigen::VectorXd x = raw_row(m.rows[end - static_cast<size_t>(lookback) + 1 +
                                           static_cast<size_t>(i)]);
        W.row(i).head(x.size()) = ((x - anchor).cwiseQuotient(sc.sd)).transpose();
        W(i, x.size()) = (anchor(0) - sc.mean(0)) / sc.sd(0);
    }
    return W;
}

}  // namespace

AttentionModel train_gaussian_nll(const FeatureMatrix& matrix, const AttentionConfig& cfg) {
    cfg.validate();
    size_t need = static_cast<size_t>(cfg.lookback) + static_cast<size_t>(cfg.horizon);
    if (matrix.rows.size() < need)
        throw TooShort("need at least lookback + horizon training rows");

    AttentionModel model;
    model.config = cfg;
    model.columns = matrix.column_names;
    model.scaler = fit_scaler(matrix);
    Rng rng(cfg.seed);
    int input = 2 + static_cast<int>(matrix.n_cols());  // channels + anchor-z
    model.weights = AttentionWeights::init(cfg, input, rng);

    // training windows: lookback rows ending at `end`, labels the next
    // `horizon` standardized targets
    std::vector<Eigen::MatrixXd> windows;
    std::vector<Eigen::VectorXd> labels;
    for (size_t end = static_cast<size_t>(cfg.lookback) - 1;
         end + static_cast<size_t>(cfg.horizon) < matrix.rows.size(); ++end) {
        size_t label_end = end + static_cast<size_t>(cfg.horizon);
        if (!contiguous_rows(matrix, end + 1 - static_cast<size_t>(cfg.lookback), label_end))
            continue;
        windows.push_back(window_at(matrix, model.scaler, end, cfg.lookback));
        double anchor = matrix.rows[end].target;
        Eigen::VectorXd y(cfg.horizon);
        for (int h = 0; h < cfg.horizon; ++h) {
            double raw = matrix.rows[end + 1 + static_cast<size_t>(h)].target;
            y(h) = (raw - anchor) / model.scaler.sd(0);
        }
        labels.push_back(std::move(y));
    }
    if (windows.empty()) throw TooShort("no contiguous training windows");

    AttentionWeights m_adam = AttentionWeights::zeros(cfg, input);
    AttentionWeights v_adam = AttentionWeights::zeros(cfg, input);
    const double b1 = 0.9, b2 = 0.999, eps = 1e-8;

    for (int e = 0; e < cfg.epochs; ++e) {
        AttentionWeights grad = AttentionWeights::zeros(cfg, input);
        double loss = 0.0;
        for (size_t s = 0; s < windows.size(); ++s)
            loss += nll_backward(model.weights, windows[s], labels[s], cfg, grad);
        double inv_n = 1.0 / static_cast<double>(windows.size());
        loss *= inv_n;
        if (!std::isfinite(loss))
            throw NonFiniteLoss("attention training diverged at epoch " + std::to_string(e));
        model.loss_curve.push_back(loss);

        double bc1 = 1.0 - std::pow(b1, e + 1);
        double bc2 = 1.0 - std::pow(b2, e + 1);
        auto wp = model.weights.flat();
        auto gp = grad.flat();
        auto mp = m_adam.flat();
        auto vp = v_adam.flat();
        for (size_t i = 0; i < wp.size(); ++i) {
            double g = *gp[i] * inv_n;
            *mp[i] = b1 * *mp[i] + (1.0 - b1) * g;
            *vp[i] = b2 * *vp[i] + (1.0 - b2) * g * g;
            *wp[i] -= cfg.learning_rate * ((*mp[i] / bc1) / (std::sqrt(*vp[i] / bc2) + eps) +
                                           cfg.weight_decay * *wp[i]);
        }
    }
    return model;
}

ProbabilisticForecast predict_with_intervals(const AttentionModel& model,
                                             const FeatureMatrix& matrix,
                                             const Quarter& origin) {
    const auto& cfg = model.config;
    auto idx = matrix.row_index_of(origin);
    if (!idx || *idx + 1 < static_cast<size_t>(cfg.lookback))
        throw TooShort("no lookback window ending at " + origin.str());
    if (!contiguous_rows(matrix, *idx + 1 - static_cast<size_t>(cfg.lookback), *idx))
        throw TooShort("lookback window not contiguous at " + origin.str());

    Eigen::MatrixXd W = window_at(matrix, model.scaler, *idx, cfg.lookback);
    auto heads = encode_and_project(model.weights, W, cfg);

    double z = stats::normal_quantile(1.0 - cfg.alpha / 2.0);
    double anchor = matrix.rows[*idx].target;
    double sd0 = model.scaler.sd(0);
    ProbabilisticForecast out;
    for (int h = 0; h < cfg.horizon; ++h) {
        double point = anchor + sd0 * heads.mu(h);
        double sigma = std::exp(heads.log_sigma(h)) * sd0;
        out.point.push_back(point);
        out.sigma.push_back(sigma);
        out.lower.push_back(point - z * sigma);
        out.upper.push_back(point + z * sigma);
    }
    return out;
}

ForecastResult walk_forward_predict(const AttentionModel& model, const Panel& panel,
                                    const SeriesKey& target_key, const FeatureSpec& spec,
                                    const Quarter& test_start, const Quarter& test_end) {
    ForecastResult out;
    out.section = target_key;
    out.model = "attention";
    out.spec = spec.augmented ? "fine_model" : "base_model";

    FeatureSpec unscreened = spec;
    unscreened.screening.reset();

    const Series& actuals = panel.get(target_key);
    for (Quarter q = test_start; q <= test_end; q = q.next()) {
        ForecastStep step;
        step.quarter = q;
        auto ai = actuals.index_of(q);
        if (ai && actuals.observed[*ai]) step.actual = actuals.values[*ai];
        try {
            auto m = build_matrix(panel, target_key, unscreened, q.prev());
            if (!model.columns.empty()) m = m.subset(model.columns);
            auto f = predict_with_intervals(model, m, q.prev());
            step.forecast = f.point[0];
            step.sigma = f.sigma[0];
            step.lower = f.lower[0];
            step.upper = f.upper[0];
            if (spec.use_log) {
                // monotone map back to levels; quantile bounds stay valid
                step.forecast = std::exp(step.forecast);
                step.lower = std::exp(step.lower);
                step.upper = std::exp(step.upper);
            }
        } catch (const Error&) {
            auto pi = actuals.index_of(q.prev());
            step.forecast = pi ? actuals.values[*pi] : std::numeric_limits<double>::quiet_NaN();
            step.fallback = true;
        }
        out.steps.push_back(step);
    }
    return out;
}

}  // namespace mpf::attn
