#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "roadsafe/gnn.hpp"
#include "support.hpp"

using namespace roadsafe;

namespace {

SessionGraph random_graph(int n, int label, const std::string& tag, std::size_t dim, Rng& rng) {
    SessionGraph g;
    g.session = SessionId{"bus" + tag, "R", "2019-03-01"};
    for (int i = 0; i < n; ++i) {
        std::vector<double> f(dim);
        for (auto& v : f) v = rng.normal();
        g.nodes.push_back(std::move(f));
    }
    for (int i = 0; i + 1 < n; ++i) g.edges.push_back({i, i + 1});
    g.label = label;
    return g;
}

GnnModel random_model(std::size_t in, std::size_t hidden, std::size_t classes,
                      std::uint64_t seed) {
    GnnModel m(in, hidden, classes);
    Rng rng = Rng::substream(seed, "model");
    m.init(rng);
    return m;
}

} // namespace

TEST_CASE("mean aggregation over in-neighbors, zero for sources") {
    Matrix x(3, 2);
    double vals[3][2] = {{1, 2}, {3, 4}, {5, 6}};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 2; ++j) x.at(i, j) = vals[i][j];
    std::vector<int> indeg;
    auto agg = detail::aggregate_mean(x, {{0, 2}, {1, 2}}, &indeg);
    CHECK(indeg == std::vector<int>{0, 0, 2});
    CHECK(agg.at(0, 0) == 0.0); // no in-edges
    CHECK(agg.at(1, 1) == 0.0);
    CHECK(agg.at(2, 0) == 2.0); // mean of rows 0 and 1
    CHECK(agg.at(2, 1) == 3.0);
    CHECK_THROWS_AS(detail::aggregate_mean(x, {{0, 9}}), InvalidEdgeIndex);
    CHECK_THROWS_AS(detail::aggregate_mean(x, {{-1, 0}}), InvalidEdgeIndex);
}

TEST_CASE("gnn output is invariant to node permutation") {
    Rng rng = Rng::substream(61, "perm");
    auto model = random_model(4, 8, 5, 61);
    SessionGraph g = random_graph(6, 3, "p", 4, rng);

    // permute nodes and relabel edges accordingly
    std::vector<int> perm = {3, 0, 5, 1, 4, 2};
    SessionGraph pg = g;
    for (int i = 0; i < 6; ++i) pg.nodes[perm[i]] = g.nodes[i];
    pg.edges.clear();
    for (auto [u, v] : g.edges) pg.edges.push_back({perm[u], perm[v]});

    auto out1 = gnn_forward(model, make_batch({g}));
    auto out2 = gnn_forward(model, make_batch({pg}));
    for (std::size_t j = 0; j < out1.cols; ++j)
        CHECK(std::abs(out1.at(0, j) - out2.at(0, j)) < 1e-10);
}

TEST_CASE("batched forward equals per-graph forward") {
    Rng rng = Rng::substream(67, "batchfwd");
    auto model = random_model(3, 8, 5, 67);
    std::vector<SessionGraph> graphs = {random_graph(4, 1, "a", 3, rng),
                                        random_graph(1, 2, "b", 3, rng),
                                        random_graph(7, 5, "c", 3, rng)};
    auto batched = gnn_forward(model, make_batch(graphs));
    for (std::size_t i = 0; i < graphs.size(); ++i) {
        auto single = gnn_forward(model, make_batch({graphs[i]}));
        for (std::size_t j = 0; j < batched.cols; ++j)
            CHECK(std::abs(batched.at(i, j) - single.at(0, j)) < 1e-10);
    }
}

TEST_CASE("zero head gives exactly uniform class probabilities") {
    Rng rng = Rng::substream(71, "zero");
    auto model = random_model(3, 8, 5, 71);
    std::fill(model.head.W.a.begin(), model.head.W.a.end(), 0.0);
    std::fill(model.head.b.begin(), model.head.b.end(), 0.0);
    auto out = gnn_forward(model, make_batch({random_graph(5, 1, "z", 3, rng)}));
    for (std::size_t j = 0; j < 5; ++j) CHECK(std::abs(out.at(0, j) - 0.2) < 1e-12);
}

TEST_CASE("gnn gradients match finite differences (h=8, 3-graph batch)") {
    Rng rng = Rng::substream(73, "ggrad");
    auto model = random_model(3, 8, 4, 73);
    std::vector<SessionGraph> graphs = {random_graph(3, 1, "a", 3, rng),
                                        random_graph(2, 3, "b", 3, rng),
                                        random_graph(4, 4, "c", 3, rng)};
    GraphBatch batch = make_batch(graphs);
    auto labels = batch_labels_zero_based(batch);

    auto params = model.flatten();
    auto analytic = gnn_backward(model, batch, labels);
    auto lossf = [&](const std::vector<double>& p) {
        GnnModel m = model;
        m.unflatten(p);
        return gnn_loss(m, batch, labels);
    };
    double err = testsupport::gradient_max_rel_err(lossf, params, analytic);
    INFO("max rel err " << err);
    CHECK(err <= 1e-4);
}

TEST_CASE("empty graphs and splits are rejected") {
    auto model = random_model(3, 4, 5, 79);
    GraphBatch b;
    b.node_features = Matrix(0, 3);
    b.labels = {1};
    b.offsets = {0};
    b.sessions.resize(1);
    CHECK_THROWS_AS(gnn_forward(model, b), EmptyGraph);
    TrainConfig cfg;
    CHECK_THROWS_AS(train_gnn({}, {}, {}, cfg), EmptySplit);
}

TEST_CASE("gnn training fits a separable graph task") {
    Rng rng = Rng::substream(83, "fit");
    // class 0: node features near -1; class 1: near +1
    auto make = [&](int label, const std::string& tag) {
        SessionGraph g = random_graph(5, label + 1, tag, 3, rng);
        for (auto& node : g.nodes)
            for (auto& v : node) v = 0.3 * v + (label == 0 ? -1.0 : 1.0);
        return g;
    };
    std::vector<SessionGraph> train, val, test;
    for (int i = 0; i < 30; ++i) train.push_back(make(i % 2, "t" + std::to_string(i)));
    for (int i = 0; i < 10; ++i) val.push_back(make(i % 2, "v" + std::to_string(i)));
    for (int i = 0; i < 10; ++i) test.push_back(make(i % 2, "s" + std::to_string(i)));
    TrainConfig cfg;
    cfg.classes = 2;
    cfg.epochs = 30;
    cfg.lr = 0.01;
    auto res = train_gnn(train, val, test, cfg, 8, 10);
    CHECK(res.best_val_auc > 0.95);
    REQUIRE(!res.log.empty());
    CHECK(!std::isnan(res.log.back().test_auc));
}
