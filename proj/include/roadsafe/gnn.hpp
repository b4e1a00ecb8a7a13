// gnn.hpp - SageConv message passing, mean-pooling readout and the 5-class
// session-graph classifier.
//
// Per layer, node i with in-neighbors N(i) updates to
//   relu(W_self x_i + W_neigh mean_{j in N(i)} x_j + b)
// with a zero aggregate when N(i) is empty. Two layers give each node a
// 2-hop receptive field along the session chain; depth and width are config.
#pragma once

#include <cmath>
#include <numeric>
#include <vector>

#include "roadsafe/nn.hpp"
#include "roadsafe/session_graph.hpp"

namespace roadsafe {

struct InvalidEdgeIndex : Error {
    InvalidEdgeIndex() : Error("edge endpoint out of range") {}
};
struct EmptyGraph : Error {
    EmptyGraph() : Error("graph has no nodes") {}
};
struct EmptySplit : Error {
    EmptySplit() : Error("empty train/val/test split") {}
};

struct SageConvLayer {
    Matrix W_self;  // out x in
    Matrix W_neigh; // out x in
    std::vector<double> b;

    SageConvLayer() = default;
    SageConvLayer(std::size_t in, std::size_t out)
        : W_self(out, in), W_neigh(out, in), b(out, 0.0) {}

    void init(Rng& rng) {
        double limit = std::sqrt(6.0 / static_cast<double>(W_self.rows + W_self.cols));
        for (double& v : W_self.a) v = rng.uniform(-limit, limit);
        for (double& v : W_neigh.a) v = rng.uniform(-limit, limit);
        std::fill(b.begin(), b.end(), 0.0);
    }

    std::size_t param_count() const { return 2 * W_self.a.size() + b.size(); }
};

namespace detail {

// mean of in-neighbor features per node; zero rows for source nodes
inline Matrix aggregate_mean(const Matrix& x, const std::vector<std::pair<int, int>>& edges,
                             std::vector<int>* indeg_out = nullptr) {
    Matrix agg(x.rows, x.cols);
    std::vector<int> indeg(x.rows, 0);
    for (auto [u, v] : edges) {
        if (u < 0 || v < 0 || static_cast<std::size_t>(u) >= x.rows ||
            static_cast<std::size_t>(v) >= x.rows)
            throw InvalidEdgeIndex();
        ++indeg[static_cast<std::size_t>(v)];
    }
    for (auto [u, v] : edges)
        for (std::size_t j = 0; j < x.cols; ++j)
            agg.at(static_cast<std::size_t>(v), j) += x.at(static_cast<std::size_t>(u), j);
    for (std::size_t i = 0; i < x.rows; ++i)
        if (indeg[i] > 0)
            for (std::size_t j = 0; j < x.cols; ++j) agg.at(i, j) /= indeg[i];
    if (indeg_out) *indeg_out = std::move(indeg);
    return agg;
}

} // namespace detail

inline Matrix sage_conv_forward(const SageConvLayer& layer, const Matrix& x,
                                const std::vector<std::pair<int, int>>& edges) {
    Matrix agg = detail::aggregate_mean(x, edges);
    Matrix out = matmul_nt(x, layer.W_self);
    Matrix from_neigh = matmul_nt(agg, layer.W_neigh);
    for (std::size_t i = 0; i < out.rows; ++i)
        for (std::size_t j = 0; j < out.cols; ++j) {
            double v = out.at(i, j) + from_neigh.at(i, j) + layer.b[j];
            out.at(i, j) = v > 0 ? v : 0;
        }
    if (!out.finite()) throw Error("sage_conv_forward produced non-finite output");
    return out;
}

// arithmetic mean of member-node embeddings per graph
inline Matrix readout_mean(const Matrix& x, const std::vector<int>& node_graph,
                           std::size_t graph_count) {
    Matrix out(graph_count, x.cols);
    std::vector<int> counts(graph_count, 0);
    for (std::size_t n = 0; n < node_graph.size(); ++n) {
        const std::size_t g = static_cast<std::size_t>(node_graph[n]);
        ++counts[g];
        for (std::size_t j = 0; j < x.cols; ++j) out.at(g, j) += x.at(n, j);
    }
    for (std::size_t g = 0; g < graph_count; ++g) {
        if (counts[g] == 0) throw EmptyGraph();
        for (std::size_t j = 0; j < x.cols; ++j) out.at(g, j) /= counts[g];
    }
    return out;
}

// ---------------------------------------------------------------------------
// model

struct GnnModel {
    SageConvLayer conv1, conv2;
    DenseLayer head;

    GnnModel() = default;
    GnnModel(std::size_t in, std::size_t hidden, std::size_t classes)
        : conv1(in, hidden), conv2(hidden, hidden),
          head(hidden, classes, Activation::softmax) {}

    void init(Rng& rng) {
        conv1.init(rng);
        conv2.init(rng);
        head.init(rng);
    }

    std::size_t param_count() const {
        return conv1.param_count() + conv2.param_count() + head.param_count();
    }

    std::vector<double> flatten() const {
        std::vector<double> out;
        out.reserve(param_count());
        for (const SageConvLayer* c : {&conv1, &conv2}) {
            out.insert(out.end(), c->W_self.a.begin(), c->W_self.a.end());
            out.insert(out.end(), c->W_neigh.a.begin(), c->W_neigh.a.end());
            out.insert(out.end(), c->b.begin(), c->b.end());
        }
        out.insert(out.end(), head.W.a.begin(), head.W.a.end());
        out.insert(out.end(), head.b.begin(), head.b.end());
        return out;
    }

    void unflatten(const std::vector<double>& flat) {
        if (flat.size() != param_count()) throw ShapeMismatch("GnnModel::unflatten");
        std::size_t p = 0;
        for (SageConvLayer* c : {&conv1, &conv2}) {
            std::copy(flat.begin() + p, flat.begin() + p + c->W_self.a.size(),
                      c->W_self.a.begin());
            p += c->W_self.a.size();
            std::copy(flat.begin() + p, flat.begin() + p + c->W_neigh.a.size(),
                      c->W_neigh.a.begin());
            p += c->W_neigh.a.size();
            std::copy(flat.begin() + p, flat.begin() + p + c->b.size(), c->b.begin());
            p += c->b.size();
        }
        std::copy(flat.begin() + p, flat.begin() + p + head.W.a.size(), head.W.a.begin());
        p += head.W.a.size();
        std::copy(flat.begin() + p, flat.begin() + p + head.b.size(), head.b.begin());
    }
};

// per-graph class probabilities, B x classes
inline Matrix gnn_forward(const GnnModel& model, const GraphBatch& batch) {
    Matrix x1 = sage_conv_forward(model.conv1, batch.node_features, batch.edges);
    Matrix x2 = sage_conv_forward(model.conv2, x1, batch.edges);
    Matrix r = readout_mean(x2, batch.node_graph, batch.graph_count());
    return dense_forward(model.head, r);
}

// labels are 0-based class ids (GraphBatch carries the raw 1..5 index)
inline std::vector<int> batch_labels_zero_based(const GraphBatch& b) {
    std::vector<int> y(b.labels.size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = b.labels[i] - 1;
    return y;
}

inline double gnn_loss(const GnnModel& model, const GraphBatch& batch,
                       const std::vector<int>& labels) {
    return cross_entropy(gnn_forward(model, batch), labels);
}

// analytic gradient of gnn_loss over the flattened parameters
inline std::vector<double> gnn_backward(const GnnModel& model, const GraphBatch& batch,
                                        const std::vector<int>& labels) {
    const Matrix& x0 = batch.node_features;
    std::vector<int> indeg;
    Matrix agg0 = detail::aggregate_mean(x0, batch.edges, &indeg);
    Matrix x1 = sage_conv_forward(model.conv1, x0, batch.edges);
    Matrix agg1 = detail::aggregate_mean(x1, batch.edges);
    Matrix x2 = sage_conv_forward(model.conv2, x1, batch.edges);
    Matrix r = readout_mean(x2, batch.node_graph, batch.graph_count());
    Matrix probs = dense_forward(model.head, r);

    const double nb = static_cast<double>(batch.graph_count());
    Matrix dlogits(probs.rows, probs.cols);
    for (std::size_t i = 0; i < probs.rows; ++i)
        for (std::size_t j = 0; j < probs.cols; ++j)
            dlogits.at(i, j) =
                (probs.at(i, j) -
                 (labels[i] == static_cast<int>(j) ? 1.0 : 0.0)) / nb;

    Matrix dWh = matmul_tn(dlogits, r);
    std::vector<double> dbh(model.head.b.size(), 0.0);
    for (std::size_t i = 0; i < dlogits.rows; ++i)
        for (std::size_t j = 0; j < dlogits.cols; ++j) dbh[j] += dlogits.at(i, j);
    Matrix dr = matmul(dlogits, model.head.W); // B x hidden

    // readout backward: each node receives its graph's gradient / node count
    std::vector<int> counts(batch.graph_count(), 0);
    for (int g : batch.node_graph) ++counts[static_cast<std::size_t>(g)];
    Matrix dx2(x2.rows, x2.cols);
    for (std::size_t n = 0; n < x2.rows; ++n) {
        const std::size_t g = static_cast<std::size_t>(batch.node_graph[n]);
        for (std::size_t j = 0; j < x2.cols; ++j)
            dx2.at(n, j) = dr.at(g, j) / counts[g];
    }

    auto conv_backward = [&](const SageConvLayer& layer, const Matrix& xin,
                             const Matrix& aggin, const Matrix& xout, const Matrix& dout,
                             Matrix& dWs, Matrix& dWn, std::vector<double>& db) {
        Matrix dz(dout.rows, dout.cols);
        for (std::size_t i = 0; i < dout.rows; ++i)
            for (std::size_t j = 0; j < dout.cols; ++j)
                dz.at(i, j) = xout.at(i, j) > 0 ? dout.at(i, j) : 0.0;
        dWs = matmul_tn(dz, xin);
        dWn = matmul_tn(dz, aggin);
        db.assign(layer.b.size(), 0.0);
        for (std::size_t i = 0; i < dz.rows; ++i)
            for (std::size_t j = 0; j < dz.cols; ++j) db[j] += dz.at(i, j);
        // dxin = dz W_self + scatter of (dz W_neigh) back through the mean
        Matrix dxin = matmul(dz, layer.W_self);
        Matrix dagg = matmul(dz, layer.W_neigh);
        for (auto [u, v] : batch.edges)
            for (std::size_t j = 0; j < dxin.cols; ++j)
                dxin.at(static_cast<std::size_t>(u), j) +=
                    dagg.at(static_cast<std::size_t>(v), j) /
                    indeg[static_cast<std::size_t>(v)];
        return dxin;
    };

    Matrix dWs2, dWn2, dWs1, dWn1;
    std::vector<double> db2, db1;
    Matrix dx1 = conv_backward(model.conv2, x1, agg1, x2, dx2, dWs2, dWn2, db2);
    conv_backward(model.conv1, x0, agg0, x1, dx1, dWs1, dWn1, db1);

    std::vector<double> flat;
    flat.reserve(model.param_count());
    flat.insert(flat.end(), dWs1.a.begin(), dWs1.a.end());
    flat.insert(flat.end(), dWn1.a.begin(), dWn1.a.end());
    flat.insert(flat.end(), db1.begin(), db1.end());
    flat.insert(flat.end(), dWs2.a.begin(), dWs2.a.end());
    flat.insert(flat.end(), dWn2.a.begin(), dWn2.a.end());
    flat.insert(flat.end(), db2.begin(), db2.end());
    flat.insert(flat.end(), dWh.a.begin(), dWh.a.end());
    flat.insert(flat.end(), dbh.begin(), dbh.end());
    return flat;
}

// ---------------------------------------------------------------------------
// training

struct GnnTrainResult {
    GnnModel best;
    GnnModel final_model;
    std::vector<EpochLog> log;
    int best_epoch = 0;
    double best_val_auc = 0;
};

inline Matrix gnn_predict_all(const GnnModel& model, const std::vector<SessionGraph>& graphs) {
    GraphBatch b = make_batch(graphs);
    return gnn_forward(model, b);
}

inline std::vector<int> graph_labels_zero_based(const std::vector<SessionGraph>& graphs) {
    std::vector<int> y(graphs.size());
    for (std::size_t i = 0; i < graphs.size(); ++i) y[i] = graphs[i].label - 1;
    return y;
}

inline GnnTrainResult train_gnn(const std::vector<SessionGraph>& train,
                                const std::vector<SessionGraph>& val,
                                const std::vector<SessionGraph>& test,
                                const TrainConfig& cfg, std::size_t hidden = 64,
                                std::size_t batch_size = 20) {
    if (train.empty() || val.empty() || test.empty()) throw EmptySplit();

    GnnModel model(train[0].nodes.at(0).size(), hidden, static_cast<std::size_t>(cfg.classes));
    Rng init_rng = Rng::substream(cfg.seed, "init");
    model.init(init_rng);

    std::vector<double> params = model.flatten();
    AdamState opt(params.size(), cfg.lr);

    auto ytr = graph_labels_zero_based(train);
    auto yva = graph_labels_zero_based(val);
    auto yte = graph_labels_zero_based(test);

    GnnTrainResult res;
    res.best = model;
    double best_val = -1;
    int since_best = 0;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        auto batches = batch_graphs(train, batch_size,
                                    cfg.seed + static_cast<std::uint64_t>(epoch) * 0x9e37u);
        double loss_sum = 0;
        for (auto& b : batches) {
            auto y = batch_labels_zero_based(b);
            model.unflatten(params);
            loss_sum += gnn_loss(model, b, y);
            auto grads = gnn_backward(model, b, y);
            adam_step(opt, params, grads);
        }
        model.unflatten(params);

        auto eval = [&](const std::vector<SessionGraph>& gs, const std::vector<int>& y) {
            return auc_macro(gnn_predict_all(model, gs), y).macro;
        };
        EpochLog el;
        el.epoch = epoch;
        el.loss = loss_sum / static_cast<double>(batches.size());
        el.train_auc = eval(train, ytr);
        el.val_auc = eval(val, yva);
        el.test_auc = eval(test, yte);
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
