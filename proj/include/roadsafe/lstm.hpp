// lstm.hpp - LSTM sequence classifier with hand-written BPTT
#pragma once

#include <cmath>
#include <numeric>
#include <vector>

#include "roadsafe/nn.hpp"

namespace roadsafe {

struct EmptySession : Error {
    EmptySession() : Error("session has no events") {}
};

// One labeled event sequence: T x input_dim feature rows, time-ascending.
struct Sequence {
    Matrix X;
    int label = 0;
};

struct LstmCell {
    // gate weights act on the concatenation [x_t ; h_{t-1}]
    Matrix Wi, Wf, Wo, Wg; // h x (in + h)
    std::vector<double> bi, bf, bo, bg;
    std::size_t in = 0, hidden = 0;

    LstmCell() = default;
    LstmCell(std::size_t in_, std::size_t h)
        : Wi(h, in_ + h), Wf(h, in_ + h), Wo(h, in_ + h), Wg(h, in_ + h),
          bi(h, 0.0), bf(h, 0.0), bo(h, 0.0), bg(h, 0.0), in(in_), hidden(h) {}

    void init(Rng& rng) {
        double limit = std::sqrt(6.0 / static_cast<double>(hidden + in + hidden));
        for (Matrix* w : {&Wi, &Wf, &Wo, &Wg})
            for (double& v : w->a) v = rng.uniform(-limit, limit);
    }
};

namespace detail {

struct LstmStepCache {
    std::vector<double> z;          // [x ; h_prev]
    std::vector<double> i, f, o, g; // gate outputs
    std::vector<double> c, tanh_c, h;
    std::vector<double> c_prev;
};

inline std::vector<double> gate(const Matrix& W, const std::vector<double>& b,
                                const std::vector<double>& z, bool tanh_act) {
    std::vector<double> out(W.rows);
    for (std::size_t r = 0; r < W.rows; ++r) {
        double s = b[r];
        const double* wr = &W.a[r * W.cols];
        for (std::size_t c = 0; c < W.cols; ++c) s += wr[c] * z[c];
        out[r] = tanh_act ? std::tanh(s) : 1.0 / (1.0 + std::exp(-s));
    }
    return out;
}

} // namespace detail

// Standard recurrence: i,f,o sigmoid, g tanh, c_t = f*c + i*g, h_t = o*tanh(c_t),
// h_0 = c_0 = 0. Returns h_T; caches per-step state when requested.
inline std::vector<double> lstm_forward(const LstmCell& cell, const Matrix& seq,
                                        std::vector<detail::LstmStepCache>* cache = nullptr) {
    if (seq.rows == 0) throw EmptySession();
    if (seq.cols != cell.in) throw ShapeMismatch("lstm_forward");
    std::vector<double> h(cell.hidden, 0.0), c(cell.hidden, 0.0);
    if (cache) cache->clear();
    for (std::size_t t = 0; t < seq.rows; ++t) {
        detail::LstmStepCache st;
        st.c_prev = c;
        st.z.resize(cell.in + cell.hidden);
        for (std::size_t j = 0; j < cell.in; ++j) st.z[j] = seq.at(t, j);
        for (std::size_t j = 0; j < cell.hidden; ++j) st.z[cell.in + j] = h[j];
        st.i = detail::gate(cell.Wi, cell.bi, st.z, false);
        st.f = detail::gate(cell.Wf, cell.bf, st.z, false);
        st.o = detail::gate(cell.Wo, cell.bo, st.z, false);
        st.g = detail::gate(cell.Wg, cell.bg, st.z, true);
        st.c.resize(cell.hidden);
        st.tanh_c.resize(cell.hidden);
        st.h.resize(cell.hidden);
        for (std::size_t j = 0; j < cell.hidden; ++j) {
            st.c[j] = st.f[j] * c[j] + st.i[j] * st.g[j];
            st.tanh_c[j] = std::tanh(st.c[j]);
            st.h[j] = st.o[j] * st.tanh_c[j];
        }
        c = st.c;
        h = st.h;
        if (cache) cache->push_back(std::move(st));
    }
    for (double v : h)
        if (!std::isfinite(v)) throw Error("lstm_forward produced non-finite state");
    return h;
}

// ---------------------------------------------------------------------------
// classifier: LSTM(h) over the event sequence -> Dense(classes, softmax)

struct LstmClassifier {
    LstmCell cell;
    DenseLayer head;

    LstmClassifier() = default;
    LstmClassifier(std::size_t in, std::size_t hidden, std::size_t classes)
        : cell(in, hidden), head(hidden, classes, Activation::softmax) {}

    void init(Rng& rng) {
        cell.init(rng);
        head.init(rng);
    }

    std::size_t param_count() const {
        return 4 * (cell.Wi.a.size() + cell.bi.size()) + head.param_count();
    }

    std::vector<double> flatten() const {
        std::vector<double> out;
        out.reserve(param_count());
        for (const Matrix* w : {&cell.Wi, &cell.Wf, &cell.Wo, &cell.Wg})
            out.insert(out.end(), w->a.begin(), w->a.end());
        for (const std::vector<double>* b : {&cell.bi, &cell.bf, &cell.bo, &cell.bg})
            out.insert(out.end(), b->begin(), b->end());
        out.insert(out.end(), head.W.a.begin(), head.W.a.end());
        out.insert(out.end(), head.b.begin(), head.b.end());
        return out;
    }

    void unflatten(const std::vector<double>& flat) {
        if (flat.size() != param_count()) throw ShapeMismatch("LstmClassifier::unflatten");
        std::size_t p = 0;
        for (Matrix* w : {&cell.Wi, &cell.Wf, &cell.Wo, &cell.Wg}) {
            std::copy(flat.begin() + p, flat.begin() + p + w->a.size(), w->a.begin());
            p += w->a.size();
        }
        for (std::vector<double>* b : {&cell.bi, &cell.bf, &cell.bo, &cell.bg}) {
            std::copy(flat.begin() + p, flat.begin() + p + b->size(), b->begin());
            p += b->size();
        }
        std::copy(flat.begin() + p, flat.begin() + p + head.W.a.size(), head.W.a.begin());
        p += head.W.a.size();
        std::copy(flat.begin() + p, flat.begin() + p + head.b.size(), head.b.begin());
    }

    // class probabilities for one sequence
    std::vector<double> predict(const Matrix& seq) const {
        auto h = lstm_forward(cell, seq);
        Matrix hm(1, h.size());
        hm.a = h;
        Matrix probs = dense_forward(head, hm);
        return probs.a;
    }

    Matrix predict_all(const std::vector<Sequence>& seqs) const {
        Matrix out(seqs.size(), head.W.rows);
        for (std::size_t i = 0; i < seqs.size(); ++i) {
            auto p = predict(seqs[i].X);
            std::copy(p.begin(), p.end(), &out.a[i * out.cols]);
        }
        return out;
    }

    double loss(const std::vector<Sequence>& seqs) const {
        double s = 0;
        for (const auto& sq : seqs) {
            auto p = predict(sq.X);
            s -= std::log(std::clamp(p[static_cast<std::size_t>(sq.label)], 1e-12, 1.0));
        }
        return s / static_cast<double>(seqs.size());
    }

    // gradient of loss() over the flattened parameters (BPTT)
    std::vector<double> backward(const std::vector<Sequence>& seqs) const {
        const std::size_t H = cell.hidden, Z = cell.in + cell.hidden;
        Matrix dWi(H, Z), dWf(H, Z), dWo(H, Z), dWg(H, Z);
        std::vector<double> dbi(H, 0.0), dbf(H, 0.0), dbo(H, 0.0), dbg(H, 0.0);
        Matrix dWh(head.W.rows, head.W.cols);
        std::vector<double> dbh(head.b.size(), 0.0);
        const double n = static_cast<double>(seqs.size());

        for (const auto& sq : seqs) {
            std::vector<detail::LstmStepCache> steps;
            auto hT = lstm_forward(cell, sq.X, &steps);
            Matrix hm(1, H);
            hm.a = hT;
            Matrix probs = dense_forward(head, hm);

            std::vector<double> dlogits(head.W.rows);
            for (std::size_t j = 0; j < dlogits.size(); ++j)
                dlogits[j] = (probs.a[j] -
                              (sq.label == static_cast<int>(j) ? 1.0 : 0.0)) / n;
            for (std::size_t j = 0; j < dlogits.size(); ++j) {
                dbh[j] += dlogits[j];
                for (std::size_t k = 0; k < H; ++k)
                    dWh.at(j, k) += dlogits[j] * hT[k];
            }
            std::vector<double> dh(H, 0.0), dc(H, 0.0);
            for (std::size_t j = 0; j < H; ++j)
                for (std::size_t r = 0; r < dlogits.size(); ++r)
                    dh[j] += head.W.at(r, j) * dlogits[r];

            for (std::size_t t = steps.size(); t-- > 0;) {
                const auto& st = steps[t];
                std::vector<double> do_(H), di(H), df(H), dg(H);
                for (std::size_t j = 0; j < H; ++j) {
                    do_[j] = dh[j] * st.tanh_c[j];
                    dc[j] += dh[j] * st.o[j] * (1.0 - st.tanh_c[j] * st.tanh_c[j]);
                    di[j] = dc[j] * st.g[j];
                    dg[j] = dc[j] * st.i[j];
                    df[j] = dc[j] * st.c_prev[j];
                }
                // pre-activation gate gradients
                std::vector<double> dzi(H), dzf(H), dzo(H), dzg(H);
                for (std::size_t j = 0; j < H; ++j) {
                    dzi[j] = di[j] * st.i[j] * (1.0 - st.i[j]);
                    dzf[j] = df[j] * st.f[j] * (1.0 - st.f[j]);
                    dzo[j] = do_[j] * st.o[j] * (1.0 - st.o[j]);
                    dzg[j] = dg[j] * (1.0 - st.g[j] * st.g[j]);
                }
                std::vector<double> dz(Z, 0.0);
                auto accum = [&](Matrix& dW, std::vector<double>& db, const Matrix& W,
                                 const std::vector<double>& dgate) {
                    for (std::size_t j = 0; j < H; ++j) {
                        db[j] += dgate[j];
                        double* dwr = &dW.a[j * Z];
                        const double* wr = &W.a[j * Z];
                        for (std::size_t k = 0; k < Z; ++k) {
                            dwr[k] += dgate[j] * st.z[k];
                            dz[k] += wr[k] * dgate[j];
                        }
                    }
                };
                accum(dWi, dbi, cell.Wi, dzi);
                accum(dWf, dbf, cell.Wf, dzf);
                accum(dWo, dbo, cell.Wo, dzo);
                accum(dWg, dbg, cell.Wg, dzg);

                for (std::size_t j = 0; j < H; ++j) {
                    dh[j] = dz[cell.in + j];
                    dc[j] *= st.f[j]; // carry to c_{t-1}
                }
            }
        }

        std::vector<double> flat;
        flat.reserve(param_count());
        for (const Matrix* w : {&dWi, &dWf, &dWo, &dWg})
            flat.insert(flat.end(), w->a.begin(), w->a.end());
        for (const std::vector<double>* b : {&dbi, &dbf, &dbo, &dbg})
            flat.insert(flat.end(), b->begin(), b->end());
        flat.insert(flat.end(), dWh.a.begin(), dWh.a.end());
        flat.insert(flat.end(), dbh.begin(), dbh.end());
        return flat;
    }
};

// ---------------------------------------------------------------------------
// training

struct LstmTrainResult {
    LstmClassifier best;
    LstmClassifier final_model;
    std::vector<EpochLog> log;
    int best_epoch = 0;
    double best_val_auc = 0;
};

inline std::vector<int> sequence_labels(const std::vector<Sequence>& seqs) {
    std::vector<int> y(seqs.size());
    for (std::size_t i = 0; i < seqs.size(); ++i) y[i] = seqs[i].label;
    return y;
}

inline LstmTrainResult train_lstm(const std::vector<Sequence>& train,
                                  const std::vector<Sequence>& val, const TrainConfig& cfg,
                                  const std::vector<Sequence>* test = nullptr,
                                  std::size_t hidden = 64) {
    if (train.empty() || val.empty()) throw EmptyDataset();
    for (const auto& s : train)
        if (s.X.rows == 0) throw EmptySession();

    LstmClassifier model(train[0].X.cols, hidden, static_cast<std::size_t>(cfg.classes));
    Rng init_rng = Rng::substream(cfg.seed, "init");
    model.init(init_rng);

    std::vector<double> params = model.flatten();
    AdamState opt(params.size(), cfg.lr);
    Rng shuffle_rng = Rng::substream(cfg.seed, "shuffle");

    LstmTrainResult res;
    res.best = model;
    double best_val = -1;
    int since_best = 0;

    auto ytr = sequence_labels(train);
    auto yva = sequence_labels(val);
    std::vector<int> yte;
    if (test) yte = sequence_labels(*test);

    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double loss_sum = 0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(cfg.batch_size)) {
            std::size_t end = std::min(order.size(),
                                       start + static_cast<std::size_t>(cfg.batch_size));
            std::vector<Sequence> batch;
            batch.reserve(end - start);
            for (std::size_t i = start; i < end; ++i) batch.push_back(train[order[i]]);
            model.unflatten(params);
            loss_sum += model.loss(batch);
            auto grads = model.backward(batch);
            adam_step(opt, params, grads);
            ++batches;
        }
        model.unflatten(params);

        EpochLog el;
        el.epoch = epoch;
        el.loss = loss_sum / static_cast<double>(batches);
        el.train_auc = auc_macro(model.predict_all(train), ytr).macro;
        el.val_auc = auc_macro(model.predict_all(val), yva).macro;
        if (test) el.test_auc = auc_macro(model.predict_all(*test), yte).macro;
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
