// nn.hpp - dense layers, losses, Adam, AUC, and the per-event classifiers
// (multinomial logistic regression and the 2x200 feed-forward net), all with
// hand-written backpropagation over a flattened parameter vector.
#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <vector>

#include "roadsafe/matrix.hpp"
#include "roadsafe/rng.hpp"

namespace roadsafe {

struct DegenerateLabels : Error {
    DegenerateLabels() : Error("no class has both positive and negative examples") {}
};
struct EmptyDataset : Error {
    EmptyDataset() : Error("empty dataset") {}
};
struct NotStandardized : Error {
    NotStandardized() : Error("features are not standardized (column mean > 0.1)") {}
};

// ---------------------------------------------------------------------------
// activations

enum class Activation { identity, relu, sigmoid, tanh_, softmax };

inline void softmax_rows(Matrix& m) {
    for (std::size_t i = 0; i < m.rows; ++i) {
        double* r = &m.a[i * m.cols];
        double mx = r[0];
        for (std::size_t j = 1; j < m.cols; ++j) mx = std::max(mx, r[j]);
        double s = 0;
        for (std::size_t j = 0; j < m.cols; ++j) {
            r[j] = std::exp(r[j] - mx);
            s += r[j];
        }
        for (std::size_t j = 0; j < m.cols; ++j) r[j] /= s;
    }
}

inline void apply_activation(Matrix& m, Activation act) {
    switch (act) {
        case Activation::identity: break;
        case Activation::relu:
            for (double& v : m.a) v = v > 0 ? v : 0;
            break;
        case Activation::sigmoid:
            for (double& v : m.a) v = 1.0 / (1.0 + std::exp(-v));
            break;
        case Activation::tanh_:
            for (double& v : m.a) v = std::tanh(v);
            break;
        case Activation::softmax: softmax_rows(m); break;
    }
}

// derivative expressed through the activation output
inline double activation_deriv_from_output(double y, Activation act) {
    switch (act) {
        case Activation::identity: return 1.0;
        case Activation::relu: return y > 0 ? 1.0 : 0.0;
        case Activation::sigmoid: return y * (1.0 - y);
        case Activation::tanh_: return 1.0 - y * y;
        case Activation::softmax: return 1.0; // folded into the CE gradient
    }
    return 1.0;
}

// ---------------------------------------------------------------------------
// dense layer

struct DenseLayer {
    Matrix W; // out x in
    std::vector<double> b;
    Activation act = Activation::identity;

    DenseLayer() = default;
    DenseLayer(std::size_t in, std::size_t out, Activation a) : W(out, in), b(out, 0.0), act(a) {}

    // Glorot-uniform init
    void init(Rng& rng) {
        double limit = std::sqrt(6.0 / static_cast<double>(W.rows + W.cols));
        for (double& v : W.a) v = rng.uniform(-limit, limit);
        std::fill(b.begin(), b.end(), 0.0);
    }

    std::size_t param_count() const { return W.a.size() + b.size(); }
};

inline Matrix dense_forward(const DenseLayer& layer, const Matrix& x) {
    if (x.cols != layer.W.cols) throw ShapeMismatch("dense_forward");
    Matrix z = matmul_nt(x, layer.W);
    for (std::size_t i = 0; i < z.rows; ++i)
        for (std::size_t j = 0; j < z.cols; ++j) z.at(i, j) += layer.b[j];
    apply_activation(z, layer.act);
    if (!z.finite()) throw Error("dense_forward produced non-finite output");
    return z;
}

// ---------------------------------------------------------------------------
// losses

inline double cross_entropy(const Matrix& probs, const std::vector<int>& labels) {
    if (probs.rows != labels.size()) throw ShapeMismatch("cross_entropy");
    double s = 0;
    for (std::size_t i = 0; i < probs.rows; ++i) {
        double p = std::clamp(probs.at(i, static_cast<std::size_t>(labels[i])), 1e-12, 1.0);
        s -= std::log(p);
    }
    return s / static_cast<double>(probs.rows);
}

// ---------------------------------------------------------------------------
// Adam

struct AdamState {
    std::vector<double> m, v;
    std::int64_t t = 0;
    double lr = 1e-3, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

    explicit AdamState(std::size_t n = 0, double lr_ = 1e-3)
        : m(n, 0.0), v(n, 0.0), lr(lr_) {}
};

inline void adam_step(AdamState& s, std::vector<double>& params,
                      const std::vector<double>& grads) {
    if (params.size() != grads.size() || params.size() != s.m.size())
        throw ShapeMismatch("adam_step");
    ++s.t;
    const double bc1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.t));
    const double bc2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        s.m[i] = s.beta1 * s.m[i] + (1.0 - s.beta1) * grads[i];
        s.v[i] = s.beta2 * s.v[i] + (1.0 - s.beta2) * grads[i] * grads[i];
        const double mhat = s.m[i] / bc1;
        const double vhat = s.v[i] / bc2;
        params[i] -= s.lr * mhat / (std::sqrt(vhat) + s.eps);
    }
}

// ---------------------------------------------------------------------------
// AUC (normalized Mann-Whitney U, ties counted 0.5)

inline double auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size()) throw ShapeMismatch("auc");
    const std::size_t n = scores.size();
    std::size_t npos = 0;
    for (int l : labels) npos += l ? 1 : 0;
    const std::size_t nneg = n - npos;
    if (npos == 0 || nneg == 0) throw DegenerateLabels();

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    // average ranks over tie groups
    std::vector<double> rank(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) rank[order[k]] = avg;
        i = j + 1;
    }
    double rank_sum_pos = 0;
    for (std::size_t k = 0; k < n; ++k)
        if (labels[k]) rank_sum_pos += rank[k];
    const double u = rank_sum_pos - static_cast<double>(npos) * (npos + 1) / 2.0;
    return u / (static_cast<double>(npos) * static_cast<double>(nneg));
}

struct MacroAucResult {
    double macro = 0;
    std::vector<double> per_class;    // NaN for skipped classes
    std::vector<int> skipped_classes; // classes without both pos and neg
};

// mean one-vs-rest AUC over evaluable classes
inline MacroAucResult auc_macro(const Matrix& probs, const std::vector<int>& labels) {
    if (probs.rows != labels.size()) throw ShapeMismatch("auc_macro");
    MacroAucResult res;
    res.per_class.assign(probs.cols, std::nan(""));
    double sum = 0;
    int evaluable = 0;
    for (std::size_t c = 0; c < probs.cols; ++c) {
        std::vector<double> scores(probs.rows);
        std::vector<int> bin(probs.rows);
        bool has_pos = false, has_neg = false;
        for (std::size_t r = 0; r < probs.rows; ++r) {
            scores[r] = probs.at(r, c);
            bin[r] = labels[r] == static_cast<int>(c) ? 1 : 0;
            (bin[r] ? has_pos : has_neg) = true;
        }
        if (!has_pos || !has_neg) {
            res.skipped_classes.push_back(static_cast<int>(c));
            continue;
        }
        res.per_class[c] = auc(scores, bin);
        sum += res.per_class[c];
        ++evaluable;
    }
    if (evaluable == 0) throw DegenerateLabels();
    res.macro = sum / evaluable;
    return res;
}

// ---------------------------------------------------------------------------
// feature standardization (training-set statistics, reused at inference)

struct Standardizer {
    std::vector<double> means, stds;
    std::vector<int> constant_columns;

    static Standardizer fit(const Matrix& x) {
        if (x.rows < 2) throw EmptyDataset();
        Standardizer s;
        s.means.assign(x.cols, 0.0);
        s.stds.assign(x.cols, 1.0);
        for (std::size_t j = 0; j < x.cols; ++j) {
            double m = 0;
            for (std::size_t i = 0; i < x.rows; ++i) m += x.at(i, j);
            m /= static_cast<double>(x.rows);
            double ss = 0;
            for (std::size_t i = 0; i < x.rows; ++i) {
                double d = x.at(i, j) - m;
                ss += d * d;
            }
            double sd = std::sqrt(ss / static_cast<double>(x.rows - 1));
            s.means[j] = m;
            if (sd == 0.0) {
                s.constant_columns.push_back(static_cast<int>(j));
                s.stds[j] = 1.0; // constant columns map to all-zero
            } else {
                s.stds[j] = sd;
            }
        }
        return s;
    }

    Matrix apply(const Matrix& x) const {
        if (x.cols != means.size()) throw ShapeMismatch("Standardizer::apply");
        Matrix out = x;
        for (std::size_t j = 0; j < x.cols; ++j) {
            bool constant = std::find(constant_columns.begin(), constant_columns.end(),
                                      static_cast<int>(j)) != constant_columns.end();
            for (std::size_t i = 0; i < x.rows; ++i)
                out.at(i, j) = constant ? 0.0 : (x.at(i, j) - means[j]) / stds[j];
        }
        return out;
    }
};

// ---------------------------------------------------------------------------
// MLP (logistic regression is the single-layer case)

enum class LossKind { cross_entropy, squared_error };

struct Mlp {
    std::vector<DenseLayer> layers;
    LossKind loss_kind = LossKind::cross_entropy;

    void init(Rng& rng) {
        for (auto& l : layers) l.init(rng);
    }

    std::size_t param_count() const {
        std::size_t n = 0;
        for (const auto& l : layers) n += l.param_count();
        return n;
    }

    std::vector<double> flatten() const {
        std::vector<double> out;
        out.reserve(param_count());
        for (const auto& l : layers) {
            out.insert(out.end(), l.W.a.begin(), l.W.a.end());
            out.insert(out.end(), l.b.begin(), l.b.end());
        }
        return out;
    }

    void unflatten(const std::vector<double>& flat) {
        if (flat.size() != param_count()) throw ShapeMismatch("Mlp::unflatten");
        std::size_t p = 0;
        for (auto& l : layers) {
            std::copy(flat.begin() + p, flat.begin() + p + l.W.a.size(), l.W.a.begin());
            p += l.W.a.size();
            std::copy(flat.begin() + p, flat.begin() + p + l.b.size(), l.b.begin());
            p += l.b.size();
        }
    }

    // forward with per-layer activation cache (cache[0] is the input)
    Matrix forward(const Matrix& x, std::vector<Matrix>* cache = nullptr) const {
        Matrix cur = x;
        if (cache) {
            cache->clear();
            cache->push_back(cur);
        }
        for (const auto& l : layers) {
            cur = dense_forward(l, cur);
            if (cache) cache->push_back(cur);
        }
        return cur;
    }

    double loss(const Matrix& x, const std::vector<int>& labels) const {
        Matrix out = forward(x);
        if (loss_kind == LossKind::cross_entropy) return cross_entropy(out, labels);
        // squared error against one-hot targets, mean over samples
        double s = 0;
        for (std::size_t i = 0; i < out.rows; ++i)
            for (std::size_t j = 0; j < out.cols; ++j) {
                double t = labels[i] == static_cast<int>(j) ? 1.0 : 0.0;
                double d = out.at(i, j) - t;
                s += d * d;
            }
        return s / static_cast<double>(out.rows);
    }

    // analytic gradient of loss() w.r.t. the flattened parameters
    std::vector<double> backward(const Matrix& x, const std::vector<int>& labels) const {
        std::vector<Matrix> acts;
        forward(x, &acts);
        const Matrix& out = acts.back();
        const double n = static_cast<double>(x.rows);

        // gradient at the last layer's pre-activation
        Matrix dz(out.rows, out.cols);
        if (loss_kind == LossKind::cross_entropy) {
            if (layers.back().act != Activation::softmax)
                throw Error("cross-entropy loss requires a softmax output layer");
            for (std::size_t i = 0; i < out.rows; ++i)
                for (std::size_t j = 0; j < out.cols; ++j)
                    dz.at(i, j) = (out.at(i, j) -
                                   (labels[i] == static_cast<int>(j) ? 1.0 : 0.0)) / n;
        } else {
            for (std::size_t i = 0; i < out.rows; ++i)
                for (std::size_t j = 0; j < out.cols; ++j) {
                    double t = labels[i] == static_cast<int>(j) ? 1.0 : 0.0;
                    double da = 2.0 * (out.at(i, j) - t) / n;
                    dz.at(i, j) = da * activation_deriv_from_output(out.at(i, j),
                                                                    layers.back().act);
                }
        }

        std::vector<Matrix> dW(layers.size());
        std::vector<std::vector<double>> db(layers.size());
        for (std::size_t li = layers.size(); li-- > 0;) {
            dW[li] = matmul_tn(dz, acts[li]); // out x in
            db[li].assign(layers[li].b.size(), 0.0);
            for (std::size_t i = 0; i < dz.rows; ++i)
                for (std::size_t j = 0; j < dz.cols; ++j) db[li][j] += dz.at(i, j);
            if (li > 0) {
                Matrix da = matmul(dz, layers[li].W); // n x in
                dz = Matrix(da.rows, da.cols);
                for (std::size_t i = 0; i < da.rows; ++i)
                    for (std::size_t j = 0; j < da.cols; ++j)
                        dz.at(i, j) = da.at(i, j) *
                                      activation_deriv_from_output(acts[li].at(i, j),
                                                                   layers[li - 1].act);
            }
        }

        std::vector<double> flat;
        flat.reserve(param_count());
        for (std::size_t li = 0; li < layers.size(); ++li) {
            flat.insert(flat.end(), dW[li].a.begin(), dW[li].a.end());
            flat.insert(flat.end(), db[li].begin(), db[li].end());
        }
        return flat;
    }
};

inline Mlp make_logistic(std::size_t in, std::size_t classes) {
    Mlp m;
    m.layers.emplace_back(in, classes, Activation::softmax);
    return m;
}

inline Mlp make_ffnn(std::size_t in, std::size_t hidden, std::size_t classes) {
    Mlp m;
    m.layers.emplace_back(in, hidden, Activation::relu);
    m.layers.emplace_back(hidden, hidden, Activation::relu);
    m.layers.emplace_back(hidden, classes, Activation::softmax);
    return m;
}

// ---------------------------------------------------------------------------
// training loop

struct TrainConfig {
    double lr = 1e-3;
    int epochs = 100;
    int batch_size = 32;
    std::uint64_t seed = 1;
    int patience = 10; // early stop after this many non-improving val epochs
    int hidden = 200;
    int classes = 5;
};

struct EpochLog {
    int epoch = 0;
    double loss = 0;
    double train_auc = 0;
    double val_auc = 0;
    double test_auc = std::nan(""); // optional
};

struct Dataset {
    Matrix X;
    std::vector<int> y; // 0-based class ids
};

namespace detail {

inline void check_standardized(const Matrix& x) {
    for (std::size_t j = 0; j < x.cols; ++j) {
        double m = 0;
        for (std::size_t i = 0; i < x.rows; ++i) m += x.at(i, j);
        m /= static_cast<double>(x.rows);
        if (std::abs(m) > 0.1) throw NotStandardized();
    }
}

} // namespace detail

struct ClassifierTrainResult {
    Mlp best;
    Mlp final_model;
    std::vector<EpochLog> log;
    int best_epoch = 0;
    double best_val_auc = 0;
};

enum class ClassifierKind { logistic, ffnn };

inline ClassifierTrainResult train_classifier(ClassifierKind kind, const Dataset& train,
                                              const Dataset& val, const TrainConfig& cfg,
                                              const Dataset* test = nullptr) {
    if (train.X.rows == 0 || val.X.rows == 0) throw EmptyDataset();
    detail::check_standardized(train.X);

    Mlp model = kind == ClassifierKind::logistic
                    ? make_logistic(train.X.cols, cfg.classes)
                    : make_ffnn(train.X.cols, cfg.hidden, cfg.classes);
    Rng init_rng = Rng::substream(cfg.seed, "init");
    model.init(init_rng);

    std::vector<double> params = model.flatten();
    AdamState opt(params.size(), cfg.lr);
    Rng shuffle_rng = Rng::substream(cfg.seed, "shuffle");

    ClassifierTrainResult res;
    res.best = model;
    double best_val = -1;
    int since_best = 0;

    std::vector<std::size_t> order(train.X.rows);
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double loss_sum = 0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(cfg.batch_size)) {
            std::size_t end = std::min(order.size(),
                                       start + static_cast<std::size_t>(cfg.batch_size));
            Matrix bx(end - start, train.X.cols);
            std::vector<int> by(end - start);
            for (std::size_t i = start; i < end; ++i) {
                for (std::size_t j = 0; j < train.X.cols; ++j)
                    bx.at(i - start, j) = train.X.at(order[i], j);
                by[i - start] = train.y[order[i]];
            }
            model.unflatten(params);
            loss_sum += model.loss(bx, by);
            auto grads = model.backward(bx, by);
            adam_step(opt, params, grads);
            ++batches;
        }
        model.unflatten(params);

        EpochLog el;
        el.epoch = epoch;
        el.loss = loss_sum / static_cast<double>(batches);
        el.train_auc = auc_macro(model.forward(train.X), train.y).macro;
        el.val_auc = auc_macro(model.forward(val.X), val.y).macro;
        if (test) el.test_auc = auc_macro(model.forward(test->X), test->y).macro;
        res.log.push_back(el);

        if (el.val_auc > best_val) {
            best_val = el.val_auc;
            res.best = model;
            res.best_epoch = epoch;
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            break;
        }
    }
    res.final_model = model;
    res.best_val_auc = best_val;
    return res;
}

} // namespace roadsafe
