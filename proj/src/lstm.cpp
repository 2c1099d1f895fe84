#include "mpf/lstm.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "mpf/errors.hpp"

namespace mpf::lstm {

namespace {

Eigen::VectorXd sigmoid(const Eigen::VectorXd& x) {
    return x.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

struct StepCache {
    Eigen::VectorXd z;  // [h_prev, x]
    Eigen::VectorXd f, i, o, ctilde;
    Eigen::VectorXd c, h, c_prev;
};

struct ForwardCache {
    std::vector<StepCache> steps;
    Eigen::VectorXd h_final;       // after dropout
    Eigen::VectorXd dense_pre;     // dense_W h + dense_b
    Eigen::VectorXd dense_out;     // ReLU(dense_pre)
    double yhat = 0.0;
};

ForwardCache run_forward(const LstmWeights& w, const std::vector<Eigen::VectorXd>& seq,
                         const Eigen::VectorXd& dropout_mask) {
    const int H = w.hidden_size;
    ForwardCache cache;
    Eigen::VectorXd h = Eigen::VectorXd::Zero(H);
    Eigen::VectorXd c = Eigen::VectorXd::Zero(H);
    for (const auto& x : seq) {
        if (x.size() != w.input_size) throw ShapeMismatch("input row size mismatch");
        StepCache s;
        s.c_prev = c;
        s.z.resize(H + w.input_size);
        s.z << h, x;
        s.f = sigmoid(w.W_f * s.z + w.b_f);
        s.i = sigmoid(w.W_i * s.z + w.b_i);
        s.o = sigmoid(w.W_o * s.z + w.b_o);
        s.ctilde = (w.W_c * s.z + w.b_c).array().tanh();
        s.c = s.f.cwiseProduct(c) + s.i.cwiseProduct(s.ctilde);
        s.h = s.o.cwiseProduct(s.c.array().tanh().matrix());
        c = s.c;
        h = s.h;
        cache.steps.push_back(std::move(s));
    }
    cache.h_final = dropout_mask.size() > 0 ? h.cwiseProduct(dropout_mask) : h;
    cache.dense_pre = w.dense_W * cache.h_final + w.dense_b;
    cache.dense_out = cache.dense_pre.cwiseMax(0.0);
    cache.yhat = w.W_out.dot(cache.dense_out) + w.b_out;
    return cache;
}

}  // namespace

void LstmConfig::validate() const {
    if (hidden_size < 1) throw InvalidConfig("hidden_size must be >= 1");
    if (dropout < 0.0 || dropout >= 1.0) throw InvalidConfig("dropout must be in [0, 1)");
    if (lookback < 1) throw InvalidConfig("lookback must be >= 1");
    if (epochs < 0 || finetune_epochs < 0) throw InvalidConfig("epoch counts must be >= 0");
    if (!(learning_rate > 0.0)) throw InvalidConfig("learning_rate must be > 0");
}

LstmWeights LstmWeights::zeros(int hidden, int input) {
    LstmWeights w;
    w.hidden_size = hidden;
    w.input_size = input;
    int cols = hidden + input;
    w.W_f = Eigen::MatrixXd::Zero(hidden, cols);
    w.W_i = Eigen::MatrixXd::Zero(hidden, cols);
    w.W_o = Eigen::MatrixXd::Zero(hidden, cols);
    w.W_c = Eigen::MatrixXd::Zero(hidden, cols);
    w.b_f = Eigen::VectorXd::Zero(hidden);
    w.b_i = Eigen::VectorXd::Zero(hidden);
    w.b_o = Eigen::VectorXd::Zero(hidden);
    w.b_c = Eigen::VectorXd::Zero(hidden);
    w.dense_W = Eigen::MatrixXd::Zero(hidden, hidden);
    w.dense_b = Eigen::VectorXd::Zero(hidden);
    w.W_out = Eigen::RowVectorXd::Zero(hidden);
    w.b_out = 0.0;
    return w;
}

LstmWeights LstmWeights::init(int hidden, int input, Rng& rng) {
    LstmWeights w = zeros(hidden, input);
    auto fill = [&](Eigen::Ref<Eigen::MatrixXd> m, int fan_in) {
        double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = rng.uniform(-bound, bound);
    };
    int cols = hidden + input;
    fill(w.W_f, cols);
    fill(w.W_i, cols);
    fill(w.W_o, cols);
    fill(w.W_c, cols);
    fill(w.dense_W, hidden);
    Eigen::MatrixXd head(1, hidden);
    fill(head, hidden);
    w.W_out = head.row(0);
    w.b_f.setConstant(1.0);  // forget-gate bias opens the memory path at init
    return w;
}

std::vector<double*> LstmWeights::flat() {
    std::vector<double*> out;
    auto push = [&](Eigen::Ref<Eigen::MatrixXd> m) {
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            for (Eigen::Index i = 0; i < m.rows(); ++i) out.push_back(&m(i, j));
    };
    auto pushv = [&](Eigen::VectorXd& v) {
        for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(&v(i));
    };
    push(W_f);
    push(W_i);
    push(W_o);
    push(W_c);
    pushv(b_f);
    pushv(b_i);
    pushv(b_o);
    pushv(b_c);
    push(dense_W);
    pushv(dense_b);
    for (Eigen::Index i = 0; i < W_out.size(); ++i) out.push_back(&W_out(i));
    out.push_back(&b_out);
    return out;
}

size_t LstmWeights::n_params() const {
    size_t cols = static_cast<size_t>(hidden_size + input_size);
    size_t h = static_cast<size_t>(hidden_size);
    return 4 * h * cols + 4 * h + h * h + h + h + 1;
}

void LstmWeights::scale_add(const LstmWeights& g, double factor) {
    W_f += factor * g.W_f;
    W_i += factor * g.W_i;
    W_o += factor * g.W_o;
    W_c += factor * g.W_c;
    b_f += factor * g.b_f;
    b_i += factor * g.b_i;
    b_o += factor * g.b_o;
    b_c += factor * g.b_c;
    dense_W += factor * g.dense_W;
    dense_b += factor * g.dense_b;
    W_out += factor * g.W_out;
    b_out += factor * g.b_out;
}

CellState cell_step(const LstmWeights& w, const Eigen::VectorXd& h_prev,
                    const Eigen::VectorXd& c_prev, const Eigen::VectorXd& x_t) {
    if (h_prev.size() != w.hidden_size || c_prev.size() != w.hidden_size ||
        x_t.size() != w.input_size)
        throw ShapeMismatch("cell_step shapes inconsistent with the weights");
    Eigen::VectorXd z(w.hidden_size + w.input_size);
    z << h_prev, x_t;
    Eigen::VectorXd f = sigmoid(w.W_f * z + w.b_f);
    Eigen::VectorXd i = sigmoid(w.W_i * z + w.b_i);
    Eigen::VectorXd o = sigmoid(w.W_o * z + w.b_o);
    Eigen::VectorXd ctilde = (w.W_c * z + w.b_c).array().tanh();
    CellState out;
    out.c = f.cwiseProduct(c_prev) + i.cwiseProduct(ctilde);
    out.h = o.cwiseProduct(out.c.array().tanh().matrix());
    return out;
}

double forward(const LstmWeights& w, const std::vector<Eigen::VectorXd>& seq) {
    return run_forward(w, seq, Eigen::VectorXd()).yhat;
}

double backward(const LstmWeights& w, const std::vector<Eigen::VectorXd>& seq, double target,
                const Eigen::VectorXd& dropout_mask, LstmWeights& grad) {
    auto cache = run_forward(w, seq, dropout_mask);
    const int H = w.hidden_size;
    double err = cache.yhat - target;
    double loss = 0.5 * err * err;

    double dy = err;
    // head
    grad.W_out += dy * cache.dense_out.transpose();
    grad.b_out += dy;
    Eigen::VectorXd ddense = (w.W_out.transpose() * dy)
                                 .cwiseProduct((cache.dense_pre.array() > 0.0).cast<double>().matrix());
    grad.dense_W += ddense * cache.h_final.transpose();
    grad.dense_b += ddense;

    Eigen::VectorXd dh = w.dense_W.transpose() * ddense;
    if (dropout_mask.size() > 0) dh = dh.cwiseProduct(dropout_mask);
    Eigen::VectorXd dc = Eigen::VectorXd::Zero(H);

    for (int t = static_cast<int>(cache.steps.size()) - 1; t >= 0; --t) {
        const auto& s = cache.steps[static_cast<size_t>(t)];
        Eigen::ArrayXd tanh_c = s.c.array().tanh();
        Eigen::ArrayXd do_ = dh.array() * tanh_c * s.o.array() * (1.0 - s.o.array());
        dc.array() += dh.array() * s.o.array() * (1.0 - tanh_c.square());
        Eigen::ArrayXd df = dc.array() * s.c_prev.array() * s.f.array() * (1.0 - s.f.array());
        Eigen::ArrayXd di = dc.array() * s.ctilde.array() * s.i.array() * (1.0 - s.i.array());
        Eigen::ArrayXd dct = dc.array() * s.i.array() * (1.0 - s.ctilde.array().square());

        grad.W_f += df.matrix() * s.z.transpose();
        grad.W_i += di.matrix() * s.z.transpose();
        grad.W_o += do_.matrix() * s.z.transpose();
        grad.W_c += dct.matrix() * s.z.transpose();
        grad.b_f += df.matrix();
        grad.b_i += di.matrix();
        grad.b_o += do_.matrix();
        grad.b_c += dct.matrix();

        Eigen::VectorXd dz = w.W_f.transpose() * df.matrix() + w.W_i.transpose() * di.matrix() +
                             w.W_o.transpose() * do_.matrix() + w.W_c.transpose() * dct.matrix();
        dh = dz.head(H);
        dc = dc.cwiseProduct(s.f);
    }
    return loss;
}

Eigen::VectorXd Standardizer::apply(const Eigen::VectorXd& x) const {
    return (x - mean).cwiseQuotient(sd);
}

// Window-anchored scaling: each window element is expressed as a deviation
// from the window's final row, per channel, in units of the training sd. One
// extra channel carries the anchor's global z-score so absolute level is
// still visible. Bounded recurrent nets cannot extrapolate raw z-scores once
// a drifting index leaves the training range; anchored inputs stay in range
// no matter how far the level runs.
Eigen::VectorXd Standardizer::apply_anchored(const Eigen::VectorXd& x,
                                             const Eigen::VectorXd& anchor) const {
    Eigen::VectorXd out(x.size() + 1);
    out.head(x.size()) = (x - anchor).cwiseQuotient(sd);
    out(x.size()) = (anchor(0) - mean(0)) / sd(0);
    return out;
}

namespace {

struct Dataset {
    std::vector<std::vector<Eigen::VectorXd>> sequences;  // standardized inputs
    std::vector<double> labels;                           // standardized next-quarter targets
};

Eigen::VectorXd raw_input_row(const FeatureRow& row) {
    Eigen::VectorXd x(1 + row.x.size());
    x(0) = row.target;
    for (size_t j = 0; j < row.x.size(); ++j) x(1 + static_cast<Eigen::Index>(j)) = row.x[j];
    return x;
}

Standardizer fit_scaler(const FeatureMatrix& m) {
    const Eigen::Index k = 1 + static_cast<Eigen::Index>(m.n_cols());
    Standardizer sc;
    sc.mean = Eigen::VectorXd::Zero(k);
    sc.sd = Eigen::VectorXd::Zero(k);
    for (const auto& row : m.rows) sc.mean += raw_input_row(row);
    sc.mean /= static_cast<double>(m.rows.size());
    for (const auto& row : m.rows) {
        Eigen::VectorXd d = raw_input_row(row) - sc.mean;
        sc.sd += d.cwiseProduct(d);
    }
    sc.sd = (sc.sd / static_cast<double>(m.rows.size())).cwiseSqrt();
    for (Eigen::Index i = 0; i < k; ++i)
        if (sc.sd(i) == 0.0) sc.sd(i) = 1.0;  // constant channels pass through
    return sc;
}

Dataset build_dataset(const FeatureMatrix& m, const Standardizer& sc, int lookback,
                      const std::vector<size_t>* label_rows = nullptr) {
    Dataset ds;
    if (m.rows.size() < static_cast<size_t>(lookback) + 1) return ds;
    for (size_t end = static_cast<size_t>(lookback) - 1; end + 1 < m.rows.size(); ++end) {
        if (label_rows &&
            std::find(label_rows->begin(), label_rows->end(), end + 1) == label_rows->end())
            continue;
        // window rows must be consecutive quarters, label one quarter ahead
        bool contiguous = true;
        for (size_t i = end + 1 - static_cast<size_t>(lookback) + 1; i <= end + 1; ++i)
            if (quarters_between(m.rows[i - 1].quarter, m.rows[i].quarter) != 1) {
                contiguous = false;
                break;
            }
        if (!contiguous) continue;
        Eigen::VectorXd anchor = raw_input_row(m.rows[end]);
        std::vector<Eigen::VectorXd> seq;
        for (size_t i = end + 1 - static_cast<size_t>(lookback); i <= end; ++i)
            seq.push_back(sc.apply_anchored(raw_input_row(m.rows[i]), anchor));
        ds.sequences.push_back(std::move(seq));
        ds.labels.push_back((m.rows[end + 1].target - anchor(0)) / sc.sd(0));
    }
    return ds;
}

// one full-batch epoch of AdamW; returns the mean loss over sequences
double run_epoch(TrainingState& st, const Dataset& ds) {
    const auto& cfg = st.config;
    LstmWeights grad = LstmWeights::zeros(st.weights.hidden_size, st.weights.input_size);
    double total_loss = 0.0;

    for (size_t s = 0; s < ds.sequences.size(); ++s) {
        Eigen::VectorXd mask;
        if (cfg.dropout > 0.0) {
            mask.resize(st.weights.hidden_size);
            for (Eigen::Index i = 0; i < mask.size(); ++i)
                mask(i) = st.rng.uniform() < cfg.dropout ? 0.0 : 1.0 / (1.0 - cfg.dropout);
        }
        total_loss += backward(st.weights, ds.sequences[s], ds.labels[s], mask, grad);
    }
    double inv_n = 1.0 / static_cast<double>(ds.sequences.size());
    total_loss *= inv_n;
    if (!std::isfinite(total_loss))
        throw NonFiniteLoss("training loss diverged at step " + std::to_string(st.step));

    st.step += 1;
    const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    double bc1 = 1.0 - std::pow(b1, static_cast<double>(st.step));
    double bc2 = 1.0 - std::pow(b2, static_cast<double>(st.step));

    auto wp = st.weights.flat();
    auto gp = grad.flat();
    auto mp = st.m.flat();
    auto vp = st.v.flat();
    for (size_t i = 0; i < wp.size(); ++i) {
        double g = *gp[i] * inv_n;
        *mp[i] = b1 * *mp[i] + (1.0 - b1) * g;
        *vp[i] = b2 * *vp[i] + (1.0 - b2) * g * g;
        double mhat = *mp[i] / bc1;
        double vhat = *vp[i] / bc2;
        // decoupled weight decay, applied outside the adaptive step
        *wp[i] -= cfg.learning_rate * (mhat / (std::sqrt(vhat) + eps) + cfg.weight_decay * *wp[i]);
    }
    return total_loss;
}

}  // namespace

namespace {

TrainingState train_impl(const FeatureMatrix& matrix, const LstmConfig& cfg,
                         const std::vector<size_t>* label_rows) {
    cfg.validate();
    if (matrix.rows.size() < static_cast<size_t>(cfg.lookback) + 1)
        throw TooShort("need at least lookback + 1 training rows");

    TrainingState st;
    st.config = cfg;
    st.rng = Rng(cfg.seed);
    st.scaler = fit_scaler(matrix);
    int input = 2 + static_cast<int>(matrix.n_cols());  // channels + anchor-z
    st.weights = LstmWeights::init(cfg.hidden_size, input, st.rng);
    st.m = LstmWeights::zeros(cfg.hidden_size, input);
    st.v = LstmWeights::zeros(cfg.hidden_size, input);

    st.columns = matrix.column_names;
    Dataset ds = build_dataset(matrix, st.scaler, cfg.lookback, label_rows);
    if (ds.sequences.empty()) throw TooShort("no contiguous training sequences");
    for (int e = 0; e < cfg.epochs; ++e) st.loss_curve.push_back(run_epoch(st, ds));
    return st;
}

}  // namespace

TrainingState train(const FeatureMatrix& matrix, const LstmConfig& cfg) {
    return train_impl(matrix, cfg, nullptr);
}

TrainingState train_on_labels(const FeatureMatrix& matrix, const LstmConfig& cfg,
                              const std::vector<size_t>& label_rows) {
    return train_impl(matrix, cfg, &label_rows);
}

void train_more(TrainingState& state, const FeatureMatrix& matrix, int epochs) {
    Dataset ds = build_dataset(matrix, state.scaler, state.config.lookback);
    if (ds.sequences.empty()) return;
    for (int e = 0; e < epochs; ++e) state.loss_curve.push_back(run_epoch(state, ds));
}

double predict_next(const TrainingState& state, const FeatureMatrix& matrix,
                    const Quarter& origin) {
    const int L = state.config.lookback;
    auto idx = matrix.row_index_of(origin);
    if (!idx || *idx + 1 < static_cast<size_t>(L))
        throw TooShort("no lookback window ending at " + origin.str());
    Eigen::VectorXd anchor = raw_input_row(matrix.rows[*idx]);
    std::vector<Eigen::VectorXd> seq;
    for (size_t i = *idx + 1 - static_cast<size_t>(L); i <= *idx; ++i) {
        if (i > *idx + 1 - static_cast<size_t>(L) &&
            quarters_between(matrix.rows[i - 1].quarter, matrix.rows[i].quarter) != 1)
            throw TooShort("lookback window not contiguous at " + origin.str());
        seq.push_back(state.scaler.apply_anchored(raw_input_row(matrix.rows[i]), anchor));
    }
    return anchor(0) + state.scaler.sd(0) * forward(state.weights, seq);
}

ForecastResult walk_forward_predict(TrainingState& state, const Panel& panel,
                                    const SeriesKey& target_key, const FeatureSpec& spec,
                                    const Quarter& test_start, const Quarter& test_end) {
    ForecastResult out;
    out.section = target_key;
    out.model = "lstm";
    out.spec = spec.augmented ? "fine_model" : "base_model";

    // screening is resolved at training time; per-step rebuilds use the raw
    // spec and subset to the frozen training columns
    FeatureSpec unscreened = spec;
    unscreened.screening.reset();

    const Series& actuals = panel.get(target_key);
    for (Quarter q = test_start; q <= test_end; q = q.next()) {
        ForecastStep step;
        step.quarter = q;
        auto ai = actuals.index_of(q);
        if (ai && actuals.observed[*ai]) step.actual = actuals.values[*ai];

        try {
            // features as of the forecast origin q-1; nothing from q leaks in
            auto m = build_matrix(panel, target_key, unscreened, q.prev());
            if (!state.columns.empty()) m = m.subset(state.columns);
            step.forecast = predict_next(state, m, q.prev());
            if (spec.use_log) step.forecast = std::exp(step.forecast);  // back to levels
        } catch (const Error&) {
            auto pi = actuals.index_of(q.prev());
            step.forecast = pi ? actuals.values[*pi] : std::numeric_limits<double>::quiet_NaN();
            step.fallback = true;
        }
        out.steps.push_back(step);

        // reveal the actual, then fine-tune on everything up to q
        if (state.config.finetune_epochs > 0) {
            try {
                auto m_inc = build_matrix(panel, target_key, unscreened, q);
                if (!state.columns.empty()) m_inc = m_inc.subset(state.columns);
                train_more(state, m_inc, state.config.finetune_epochs);
            } catch (const Error&) {
                // leave the weights as they are; later steps may still work
            }
        }
    }
    return out;
}

namespace {
// format 2 adds the optimizer moments and rng state so a reloaded state
// fine-tunes exactly like the in-memory one
constexpr char kMagic[8] = {'M', 'P', 'F', 'L', 'S', 'T', 'M', '2'};

void write_params(std::ofstream& f, LstmWeights& w) {
    for (double* p : w.flat())
        f.write(reinterpret_cast<const char*>(p), sizeof(double));
}
void read_params(std::ifstream& f, LstmWeights& w) {
    for (double* p : w.flat()) f.read(reinterpret_cast<char*>(p), sizeof(double));
}

}  // namespace

void save_weights(const TrainingState& state, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write " + path);
    f.write(kMagic, 8);
    const auto& cfg = state.config;
    std::int64_t fields[7] = {cfg.hidden_size, cfg.lookback,  cfg.epochs,
                              cfg.finetune_epochs, static_cast<std::int64_t>(cfg.seed),
                              state.weights.input_size, state.step};
    f.write(reinterpret_cast<const char*>(fields), sizeof(fields));
    double dfields[3] = {cfg.dropout, cfg.learning_rate, cfg.weight_decay};
    f.write(reinterpret_cast<const char*>(dfields), sizeof(dfields));

    auto rng_state = state.rng.state();
    std::int64_t spare_flag = rng_state.have_spare ? 1 : 0;
    f.write(reinterpret_cast<const char*>(&rng_state.s), sizeof(rng_state.s));
    f.write(reinterpret_cast<const char*>(&rng_state.spare), sizeof(rng_state.spare));
    f.write(reinterpret_cast<const char*>(&spare_flag), sizeof(spare_flag));

    std::int64_t k = state.scaler.mean.size();
    f.write(reinterpret_cast<const char*>(&k), sizeof(k));
    f.write(reinterpret_cast<const char*>(state.scaler.mean.data()),
            static_cast<std::streamsize>(sizeof(double) * static_cast<size_t>(k)));
    f.write(reinterpret_cast<const char*>(state.scaler.sd.data()),
            static_cast<std::streamsize>(sizeof(double) * static_cast<size_t>(k)));

    std::int64_t n_cols = static_cast<std::int64_t>(state.columns.size());
    f.write(reinterpret_cast<const char*>(&n_cols), sizeof(n_cols));
    for (const auto& name : state.columns) {
        std::int64_t len = static_cast<std::int64_t>(name.size());
        f.write(reinterpret_cast<const char*>(&len), sizeof(len));
        f.write(name.data(), len);
    }

    auto copy = state;  // flat() needs mutable access
    write_params(f, copy.weights);
    write_params(f, copy.m);
    write_params(f, copy.v);
}

TrainingState load_weights(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw MissingArtifact("cannot open " + path);
    char magic[8];
    f.read(magic, 8);
    if (std::memcmp(magic, kMagic, 8) != 0) throw SchemaError(path + ": not a weights file");

    std::int64_t fields[7];
    f.read(reinterpret_cast<char*>(fields), sizeof(fields));
    double dfields[3];
    f.read(reinterpret_cast<char*>(dfields), sizeof(dfields));

    TrainingState st;
    st.config.hidden_size = static_cast<int>(fields[0]);
    st.config.lookback = static_cast<int>(fields[1]);
    st.config.epochs = static_cast<int>(fields[2]);
    st.config.finetune_epochs = static_cast<int>(fields[3]);
    st.config.seed = static_cast<std::uint64_t>(fields[4]);
    int input = static_cast<int>(fields[5]);
    st.step = fields[6];
    st.config.dropout = dfields[0];
    st.config.learning_rate = dfields[1];
    st.config.weight_decay = dfields[2];

    Rng::State rng_state;
    std::int64_t spare_flag = 0;
    f.read(reinterpret_cast<char*>(&rng_state.s), sizeof(rng_state.s));
    f.read(reinterpret_cast<char*>(&rng_state.spare), sizeof(rng_state.spare));
    f.read(reinterpret_cast<char*>(&spare_flag), sizeof(spare_flag));
    rng_state.have_spare = spare_flag != 0;
    st.rng.set_state(rng_state);

    std::int64_t k;
    f.read(reinterpret_cast<char*>(&k), sizeof(k));
    st.scaler.mean.resize(k);
    st.scaler.sd.resize(k);
    f.read(reinterpret_cast<char*>(st.scaler.mean.data()),
           static_cast<std::streamsize>(sizeof(double) * static_cast<size_t>(k)));
    f.read(reinterpret_cast<char*>(st.scaler.sd.data()),
           static_cast<std::streamsize>(sizeof(double) * static_cast<size_t>(k)));

    std::int64_t n_cols = 0;
    f.read(reinterpret_cast<char*>(&n_cols), sizeof(n_cols));
    for (std::int64_t i = 0; i < n_cols; ++i) {
        std::int64_t len = 0;
        f.read(reinterpret_cast<char*>(&len), sizeof(len));
        std::string name(static_cast<size_t>(len), '\0');
        f.read(name.data(), len);
        st.columns.push_back(std::move(name));
    }

    st.weights = LstmWeights::zeros(st.config.hidden_size, input);
    st.m = LstmWeights::zeros(st.config.hidden_size, input);
    st.v = LstmWeights::zeros(st.config.hidden_size, input);
    read_params(f, st.weights);
    read_params(f, st.m);
    read_params(f, st.v);
    if (!f) throw SchemaError(path + ": truncated weights file");
    return st;
}

}  // namespace mpf::lstm
