#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "roadsafe/nn.hpp"
#include "support.hpp"

using namespace roadsafe;

TEST_CASE("matmul variants on a frozen product") {
    Matrix a(2, 3), b(3, 2);
    for (int i = 0; i < 6; ++i) a.a[i] = i + 1;     // [[1,2,3],[4,5,6]]
    for (int i = 0; i < 6; ++i) b.a[i] = 7 + i;     // [[7,8],[9,10],[11,12]]
    Matrix c = matmul(a, b);                        // [[58,64],[139,154]]
    CHECK(c.at(0, 0) == 58);
    CHECK(c.at(0, 1) == 64);
    CHECK(c.at(1, 0) == 139);
    CHECK(c.at(1, 1) == 154);
    CHECK(matmul_nt(a, transpose(b)) == c);
    CHECK(matmul_tn(transpose(a), b) == c);
    Matrix wrong(4, 4);
    CHECK_THROWS_AS(matmul(a, wrong), ShapeMismatch);
}

TEST_CASE("softmax rows are stable for large logits") {
    Matrix m(2, 3);
    m.at(0, 0) = 1000.0; m.at(0, 1) = 1001.0; m.at(0, 2) = 999.0;
    m.at(1, 0) = 0.0; m.at(1, 1) = 0.0; m.at(1, 2) = 0.0;
    softmax_rows(m);
    for (std::size_t i = 0; i < 2; ++i) {
        double s = 0;
        for (std::size_t j = 0; j < 3; ++j) {
            CHECK(std::isfinite(m.at(i, j)));
            s += m.at(i, j);
        }
        CHECK_THAT(s, Catch::Matchers::WithinAbs(1.0, 1e-12));
    }
    CHECK_THAT(m.at(1, 0), Catch::Matchers::WithinAbs(1.0 / 3.0, 1e-12));
}

TEST_CASE("cross entropy against a frozen value") {
    Matrix p(2, 2);
    p.at(0, 0) = 0.7; p.at(0, 1) = 0.3;
    p.at(1, 0) = 0.2; p.at(1, 1) = 0.8;
    // -(ln 0.7 + ln 0.8)/2
    CHECK_THAT(cross_entropy(p, {0, 1}),
               Catch::Matchers::WithinAbs(0.2899092476264711, 1e-14));
}

TEST_CASE("adam first step against a frozen value") {
    AdamState s(1, 1e-3);
    std::vector<double> w = {0.0}, g = {0.1};
    adam_step(s, w, g);
    // bias-corrected first step is ~ -lr * sign(g)
    CHECK_THAT(w[0], Catch::Matchers::WithinAbs(-0.0009999999000000102, 1e-15));
    CHECK(s.t == 1);
}

TEST_CASE("auc on the standard hand example") {
    CHECK(auc({0.1, 0.4, 0.35, 0.8}, {0, 0, 1, 1}) == 0.75);
    CHECK(auc({0.2, 0.8}, {0, 1}) == 1.0);
    CHECK(auc({0.8, 0.2}, {0, 1}) == 0.0);
    // all-tied scores give exactly 0.5 via average ranks
    CHECK(auc({0.5, 0.5, 0.5, 0.5}, {0, 1, 0, 1}) == 0.5);
    CHECK_THROWS_AS(auc({0.1, 0.2}, {1, 1}), DegenerateLabels);
}

TEST_CASE("macro auc skips degenerate classes") {
    Matrix p(4, 3);
    // class 2 never appears in labels -> skipped
    double vals[4][3] = {{0.9, 0.1, 0}, {0.8, 0.2, 0}, {0.3, 0.7, 0}, {0.2, 0.8, 0}};
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 3; ++j) p.at(i, j) = vals[i][j];
    auto m = auc_macro(p, {0, 0, 1, 1});
    CHECK(m.skipped_classes == std::vector<int>{2});
    CHECK(std::isnan(m.per_class[2]));
    CHECK(m.per_class[0] == 1.0);
    CHECK(m.per_class[1] == 1.0);
    CHECK(m.macro == 1.0);
    CHECK_THROWS_AS(auc_macro(p, {0, 0, 0, 0}), DegenerateLabels);
}

TEST_CASE("standardizer maps training stats and constants") {
    Matrix x(3, 2);
    x.at(0, 0) = 1; x.at(1, 0) = 2; x.at(2, 0) = 3;
    x.at(0, 1) = 5; x.at(1, 1) = 5; x.at(2, 1) = 5;
    auto s = Standardizer::fit(x);
    CHECK(s.constant_columns == std::vector<int>{1});
    Matrix y = s.apply(x);
    CHECK_THAT(y.at(0, 0), Catch::Matchers::WithinAbs(-1.0, 1e-12));
    CHECK_THAT(y.at(2, 0), Catch::Matchers::WithinAbs(1.0, 1e-12));
    CHECK(y.at(0, 1) == 0.0);
    CHECK(y.at(2, 1) == 0.0);
}

TEST_CASE("training rejects unstandardized features") {
    Rng rng = Rng::substream(5, "raw");
    Dataset tr;
    tr.X = Matrix(40, 3);
    for (auto& v : tr.X.a) v = rng.uniform(500.0, 1000.0);
    for (int i = 0; i < 40; ++i) tr.y.push_back(i % 2);
    TrainConfig cfg;
    cfg.classes = 2;
    CHECK_THROWS_AS(train_classifier(ClassifierKind::logistic, tr, tr, cfg), NotStandardized);
}

namespace {

// gradient check over every parameter of an Mlp on a fixed random batch
void check_mlp_gradients(Mlp model, std::size_t in, std::uint64_t seed) {
    Rng rng = Rng::substream(seed, "gradcheck");
    model.init(rng);
    Matrix x(6, in);
    for (auto& v : x.a) v = rng.normal();
    std::vector<int> y;
    for (int i = 0; i < 6; ++i) y.push_back(i % static_cast<int>(model.layers.back().b.size()));

    auto params = model.flatten();
    auto analytic = model.backward(x, y);
    auto lossf = [&](const std::vector<double>& p) {
        Mlp m = model;
        m.unflatten(p);
        return m.loss(x, y);
    };
    double err = testsupport::gradient_max_rel_err(lossf, params, analytic);
    INFO("max rel err " << err);
    CHECK(err <= 1e-4);
}

} // namespace

TEST_CASE("logistic gradients match finite differences") {
    check_mlp_gradients(make_logistic(5, 4), 5, 101);
}

TEST_CASE("small ffnn gradients match finite differences") {
    check_mlp_gradients(make_ffnn(4, 6, 3), 4, 103);
}

TEST_CASE("squared-error mlp gradients match finite differences") {
    Mlp m;
    m.layers.emplace_back(4, 5, Activation::tanh_);
    m.layers.emplace_back(5, 3, Activation::sigmoid);
    m.loss_kind = LossKind::squared_error;
    check_mlp_gradients(m, 4, 107);
}

TEST_CASE("cross entropy without softmax head is rejected") {
    Mlp m;
    m.layers.emplace_back(3, 2, Activation::sigmoid);
    Rng rng = Rng::substream(1, "x");
    m.init(rng);
    Matrix x(2, 3);
    CHECK_THROWS(m.backward(x, {0, 1}));
}

TEST_CASE("training separates an easy two-blob problem") {
    Rng rng = Rng::substream(7, "blobs");
    auto blob = [&](int n, double cx, double cy, int label, Dataset& d, std::size_t at) {
        for (int i = 0; i < n; ++i) {
            d.X.at(at + i, 0) = cx + 0.3 * rng.normal();
            d.X.at(at + i, 1) = cy + 0.3 * rng.normal();
            d.y[at + i] = label;
        }
    };
    Dataset tr, va;
    tr.X = Matrix(80, 2); tr.y.assign(80, 0);
    va.X = Matrix(40, 2); va.y.assign(40, 0);
    blob(40, -1, -1, 0, tr, 0);
    blob(40, 1, 1, 1, tr, 40);
    blob(20, -1, -1, 0, va, 0);
    blob(20, 1, 1, 1, va, 20);

    TrainConfig cfg;
    cfg.classes = 2;
    cfg.epochs = 40;
    cfg.lr = 0.05;
    auto res = train_classifier(ClassifierKind::logistic, tr, va, cfg);
    CHECK(res.best_val_auc > 0.95);
    CHECK(res.log.size() >= 1);
    CHECK(res.log.front().val_auc <= res.best_val_auc);

    // flatten/unflatten is the identity on the trained model
    auto p = res.best.flatten();
    Mlp copy = res.best;
    copy.unflatten(p);
    CHECK(copy.flatten() == p);
}
