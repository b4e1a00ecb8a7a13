// acceptance: one pass/fail line per criterion, nonzero exit on any failure.
// Each check recomputes its expectations independently of the library code
// under test (separate oracle formulas, finite differences, brute force).
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "roadsafe/pipeline.hpp"
#include "support.hpp"

using namespace roadsafe;

namespace {

int failures = 0;

void report(int criterion, bool ok, const std::string& detail) {
    std::cout << (ok ? "PASS" : "FAIL") << " criterion " << criterion << ": " << detail
              << std::endl;
    if (!ok) ++failures;
}

template <class Fn>
void run(int criterion, Fn&& fn) {
    try {
        fn();
    } catch (const std::exception& e) {
        report(criterion, false, std::string("exception: ") + e.what());
    }
}

// independent oracle: spherical law of cosines
double slc_km(double lat1, double lon1, double lat2, double lon2) {
    const double rad = M_PI / 180.0;
    double arg = std::sin(lat1 * rad) * std::sin(lat2 * rad) +
                 std::cos(lat1 * rad) * std::cos(lat2 * rad) * std::cos((lon2 - lon1) * rad);
    return 6371.0 * std::acos(std::clamp(arg, -1.0, 1.0));
}

// ---------------------------------------------------------------------------
// criterion 1: geodesic distance and warning density

void criterion1() {
    Rng rng = Rng::substream(1001, "geo");
    double worst = 0.0;
    for (int i = 0; i < 10000; ++i) {
        double la1 = rng.uniform(-85.0, 85.0), lo1 = rng.uniform(-180.0, 180.0);
        double la2 = rng.uniform(-85.0, 85.0), lo2 = rng.uniform(-180.0, 180.0);
        worst = std::max(worst, std::abs(haversine_km(la1, lo1, la2, lo2) -
                                         slc_km(la1, lo1, la2, lo2)));
    }
    bool dist_ok = worst < 1e-6;

    // density against a second brute force written independently: count every
    // pair both ways, trips from a flat scan
    bool density_ok = true;
    Rng drng = Rng::substream(1001, "density");
    for (int ds = 0; ds < 50 && density_ok; ++ds) {
        int n = drng.uniform_int(5, 500);
        std::vector<AlertEvent> events(n);
        const char* roads[3] = {"R1", "R2", "R3"};
        for (auto& e : events) {
            e.device_id = "d" + std::to_string(drng.uniform_int(0, 4));
            e.alarm_type = static_cast<AlarmType>(drng.uniform_int(0, 4));
            e.timestamp.epoch_s = 1551400000 + 86400 * drng.uniform_int(0, 3);
            e.latitude = 12.9 + drng.uniform(0.0, 0.05);
            e.longitude = 77.6 + drng.uniform(0.0, 0.05);
            e.road_name = roads[drng.uniform_int(0, 2)];
        }
        auto got = warning_density(events);
        auto counted = default_counted_alarms();
        std::map<std::string, std::set<std::string>> trips;
        for (const auto& e : events)
            trips[*e.road_name].insert(e.device_id + "/" + e.timestamp.date());
        for (int i = 0; i < n; ++i) {
            int cnt = 0;
            for (int j = 0; j < n; ++j)
                if (counted.count(events[j].alarm_type) &&
                    haversine_km(events[i].latitude, events[i].longitude,
                                 events[j].latitude, events[j].longitude) <= 1.0)
                    ++cnt;
            int t = static_cast<int>(trips[*events[i].road_name].size());
            if (got[i].raw_count != cnt || got[i].trips != t ||
                got[i].normalized_density != static_cast<double>(cnt) / t)
                density_ok = false;
        }
    }

    std::ostringstream msg;
    msg << "haversine max |diff| vs spherical-law oracle = " << worst
        << " on 10000 pairs; density " << (density_ok ? "matches" : "differs from")
        << " independent brute force on 50 random datasets";
    report(1, dist_ok && density_ok, msg.str());
}

// ---------------------------------------------------------------------------
// criterion 2: analytic gradients vs central finite differences

void criterion2() {
    double worst = 0.0;
    auto note = [&](double err) { worst = std::max(worst, err); };

    {
        Rng rng = Rng::substream(2001, "logistic");
        Mlp m = make_logistic(5, 4);
        m.init(rng);
        Matrix x(6, 5);
        for (auto& v : x.a) v = rng.normal();
        std::vector<int> y;
        for (int i = 0; i < 6; ++i) y.push_back(rng.uniform_int(0, 3));
        auto lossf = [&](const std::vector<double>& p) {
            Mlp c = m;
            c.unflatten(p);
            return c.loss(x, y);
        };
        note(testsupport::gradient_max_rel_err(lossf, m.flatten(), m.backward(x, y)));
    }
    {
        Rng rng = Rng::substream(2003, "ffnn");
        Mlp m = make_ffnn(6, 200, 5);
        m.init(rng);
        Matrix x(4, 6);
        for (auto& v : x.a) v = rng.normal();
        std::vector<int> y;
        for (int i = 0; i < 4; ++i) y.push_back(rng.uniform_int(0, 4));
        auto lossf = [&](const std::vector<double>& p) {
            Mlp c = m;
            c.unflatten(p);
            return c.loss(x, y);
        };
        note(testsupport::gradient_max_rel_err(lossf, m.flatten(), m.backward(x, y)));
    }
    {
        Rng rng = Rng::substream(2005, "lstm");
        LstmClassifier m(3, 4, 3);
        m.init(rng);
        std::vector<Sequence> batch;
        for (int i = 0; i < 3; ++i) {
            Sequence s;
            s.label = i;
            s.X = Matrix(3, 3);
            for (auto& v : s.X.a) v = rng.normal();
            batch.push_back(std::move(s));
        }
        auto lossf = [&](const std::vector<double>& p) {
            LstmClassifier c = m;
            c.unflatten(p);
            return c.loss(batch);
        };
        note(testsupport::gradient_max_rel_err(lossf, m.flatten(), m.backward(batch)));
    }
    {
        Rng rng = Rng::substream(2007, "gnn");
        GnnModel m(3, 8, 4);
        m.init(rng);
        std::vector<SessionGraph> graphs;
        for (int gi = 0; gi < 3; ++gi) {
            SessionGraph g;
            g.session = SessionId{"b" + std::to_string(gi), "R", "2019-03-01"};
            int nodes = gi + 2;
            for (int i = 0; i < nodes; ++i) {
                std::vector<double> f(3);
                for (auto& v : f) v = rng.normal();
                g.nodes.push_back(std::move(f));
            }
            for (int i = 0; i + 1 < nodes; ++i) g.edges.push_back({i, i + 1});
            g.label = gi + 1;
            graphs.push_back(std::move(g));
        }
        GraphBatch batch = make_batch(graphs);
        auto labels = batch_labels_zero_based(batch);
        auto lossf = [&](const std::vector<double>& p) {
            GnnModel c = m;
            c.unflatten(p);
            return gnn_loss(c, batch, labels);
        };
        note(testsupport::gradient_max_rel_err(lossf, m.flatten(),
                                               gnn_backward(m, batch, labels)));
    }

    std::ostringstream msg;
    msg << "worst relative gradient error across logistic/ffnn/lstm/gnn = " << worst
        << " (tolerance 1e-4)";
    report(2, worst <= 1e-4, msg.str());
}

// ---------------------------------------------------------------------------
// criterion 3: eigensolver reconstruction and variance ratios

void criterion3() {
    Rng rng = Rng::substream(3001, "eig");
    double worst_recon = 0.0, worst_ortho = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        std::size_t p = static_cast<std::size_t>(rng.uniform_int(2, 14));
        Matrix a(p, p);
        for (std::size_t i = 0; i < p; ++i)
            for (std::size_t j = i; j < p; ++j) {
                double v = rng.normal();
                a.at(i, j) = v;
                a.at(j, i) = v;
            }
        auto res = eigh_symmetric(a);
        const Matrix& v = res.eigenvectors;
        for (std::size_t i = 0; i < p; ++i)
            for (std::size_t j = 0; j < p; ++j) {
                double recon = 0, dot = 0;
                for (std::size_t k = 0; k < p; ++k) {
                    recon += v.at(i, k) * res.eigenvalues[k] * v.at(j, k);
                    dot += v.at(k, i) * v.at(k, j);
                }
                worst_recon = std::max(worst_recon, std::abs(recon - a.at(i, j)));
                worst_ortho = std::max(worst_ortho,
                                       std::abs(dot - (i == j ? 1.0 : 0.0)));
            }
    }

    // variance ratios at k = p: descending and summing to one
    bool ratios_ok = true;
    for (int trial = 0; trial < 10; ++trial) {
        std::size_t p = static_cast<std::size_t>(rng.uniform_int(2, 8));
        DataMatrix dm;
        dm.values = Matrix(40, p);
        for (auto& x : dm.values.a) x = rng.normal();
        for (std::size_t j = 0; j < p; ++j) dm.names.push_back("f" + std::to_string(j));
        auto res = pca(dm, p);
        double sum = 0;
        for (std::size_t j = 0; j < p; ++j) {
            sum += res.variance_ratio[j];
            if (j > 0 && res.variance_ratio[j] > res.variance_ratio[j - 1] + 1e-12)
                ratios_ok = false;
        }
        if (std::abs(sum - 1.0) > 1e-8) ratios_ok = false;
    }

    std::ostringstream msg;
    msg << "max |VLV^T - A| = " << worst_recon << ", max orthonormality defect = "
        << worst_ortho << " over 100 random symmetric matrices up to 14x14; "
        << "variance ratios " << (ratios_ok ? "descending, sum 1" : "violated");
    report(3, worst_recon < 1e-8 && worst_ortho < 1e-8 && ratios_ok, msg.str());
}

// ---------------------------------------------------------------------------
// criterion 4: safety-index invariants

void criterion4() {
    Rng rng = Rng::substream(4001, "index");
    std::vector<LocationDensity> densities;
    for (int i = 0; i < 10000; ++i) {
        LocationDensity d;
        d.event_index = static_cast<std::size_t>(i);
        d.trips = rng.uniform_int(1, 20);
        d.normalized_density = rng.uniform(0.0, 10.0);
        d.raw_count = static_cast<int>(d.normalized_density * d.trips);
        densities.push_back(d);
    }
    auto binning = fit_index_binning(densities);

    // monotonicity: higher density never gets a lower index
    bool mono_ok = true;
    std::vector<LocationDensity> sorted = densities;
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
        return a.normalized_density < b.normalized_density;
    });
    for (std::size_t i = 1; i < sorted.size(); ++i)
        if (assign_safety_index(sorted[i], binning).value <
            assign_safety_index(sorted[i - 1], binning).value)
            mono_ok = false;

    // uniform scaling of counts and trips leaves density, hence labels, alone
    bool scale_ok = true;
    std::vector<LocationDensity> scaled = densities;
    for (auto& d : scaled) {
        d.raw_count *= 7;
        d.trips *= 7;
        d.normalized_density = static_cast<double>(d.raw_count) /
                               static_cast<double>(d.trips);
    }
    // recompute the originals the same way so both sides quantize identically
    std::vector<LocationDensity> base = densities;
    for (auto& d : base)
        d.normalized_density = static_cast<double>(d.raw_count) /
                               static_cast<double>(d.trips);
    auto bbase = fit_index_binning(base);
    auto bscaled = fit_index_binning(scaled);
    for (std::size_t i = 0; i < base.size(); ++i)
        if (assign_safety_index(base[i], bbase).value !=
            assign_safety_index(scaled[i], bscaled).value)
            scale_ok = false;

    // quintile occupancy at n = 10000 uniform densities
    std::array<int, 5> occupancy{};
    for (const auto& d : densities) occupancy[assign_safety_index(d, binning).value - 1]++;
    bool occ_ok = true;
    for (int c : occupancy) {
        double frac = static_cast<double>(c) / 10000.0;
        if (frac < 0.18 || frac > 0.22) occ_ok = false;
    }

    std::ostringstream msg;
    msg << "monotonicity " << (mono_ok ? "holds" : "violated") << ", scaling invariance "
        << (scale_ok ? "holds" : "violated") << ", quintile occupancy";
    for (int c : occupancy) msg << ' ' << static_cast<double>(c) / 100.0 << '%';
    report(4, mono_ok && scale_ok && occ_ok, msg.str());
}

// ---------------------------------------------------------------------------
// criterion 5: gnn structural invariances

void criterion5() {
    Rng rng = Rng::substream(5001, "inv");
    GnnModel model(4, 8, 5);
    model.init(rng);

    auto rand_graph = [&](int n, const std::string& tag) {
        SessionGraph g;
        g.session = SessionId{"b" + tag, "R", "2019-03-01"};
        for (int i = 0; i < n; ++i) {
            std::vector<double> f(4);
            for (auto& v : f) v = rng.normal();
            g.nodes.push_back(std::move(f));
        }
        for (int i = 0; i + 1 < n; ++i) g.edges.push_back({i, i + 1});
        g.label = 1 + n % 5;
        return g;
    };

    // permutation invariance
    SessionGraph g = rand_graph(6, "p");
    std::vector<int> perm = {4, 2, 0, 5, 1, 3};
    SessionGraph pg = g;
    for (int i = 0; i < 6; ++i) pg.nodes[perm[static_cast<std::size_t>(i)]] = g.nodes[i];
    pg.edges.clear();
    for (auto [u, v] : g.edges) pg.edges.push_back({perm[u], perm[v]});
    double perm_diff = 0;
    auto o1 = gnn_forward(model, make_batch({g}));
    auto o2 = gnn_forward(model, make_batch({pg}));
    for (std::size_t j = 0; j < o1.cols; ++j)
        perm_diff = std::max(perm_diff, std::abs(o1.at(0, j) - o2.at(0, j)));

    // batched equals per-graph
    std::vector<SessionGraph> graphs = {rand_graph(4, "a"), rand_graph(1, "b"),
                                        rand_graph(7, "c")};
    auto batched = gnn_forward(model, make_batch(graphs));
    double batch_diff = 0;
    for (std::size_t i = 0; i < graphs.size(); ++i) {
        auto single = gnn_forward(model, make_batch({graphs[i]}));
        for (std::size_t j = 0; j < batched.cols; ++j)
            batch_diff = std::max(batch_diff,
                                  std::abs(batched.at(i, j) - single.at(0, j)));
    }

    // zero head gives exactly uniform probabilities
    GnnModel zero = model;
    std::fill(zero.head.W.a.begin(), zero.head.W.a.end(), 0.0);
    std::fill(zero.head.b.begin(), zero.head.b.end(), 0.0);
    auto uo = gnn_forward(zero, make_batch({g}));
    double unif_diff = 0;
    for (std::size_t j = 0; j < uo.cols; ++j)
        unif_diff = std::max(unif_diff, std::abs(uo.at(0, j) - 0.2));

    std::ostringstream msg;
    msg << "permutation diff = " << perm_diff << ", batch-vs-single diff = " << batch_diff
        << ", zero-head uniformity diff = " << unif_diff;
    report(5, perm_diff < 1e-10 && batch_diff < 1e-10 && unif_diff < 1e-12, msg.str());
}

// ---------------------------------------------------------------------------
// criteria 6 and 7 share the full synthetic pipeline

void run_upstream(const PipelineConfig& cfg) {
    cmd_synth(cfg);
    cmd_ingest(cfg);
    cmd_enrich(cfg);
    cmd_label(cfg);
}

void criterion6() {
    testsupport::TempDir tmp("bench");
    PipelineConfig cfg;
    cfg.set("out", tmp.str());
    run_upstream(cfg);

    std::map<std::string, double> auc;
    std::ostringstream sink;
    for (const char* m : {"logistic", "ffnn", "lstm", "gnn"}) {
        cmd_train(cfg, m);
        auc[m] = cmd_eval(cfg, m, sink).macro_auc;
    }

    bool ok = auc["gnn"] >= 0.80 && auc["gnn"] >= auc["logistic"] + 0.10 &&
              auc["lstm"] >= auc["logistic"];
    for (const auto& [name, v] : auc) ok = ok && v >= 0.45;

    std::ostringstream msg;
    msg << "test macro-AUC logistic=" << auc["logistic"] << " ffnn=" << auc["ffnn"]
        << " lstm=" << auc["lstm"] << " gnn=" << auc["gnn"];
    report(6, ok, msg.str());
}

void criterion7() {
    testsupport::TempDir tmp("echo");
    PipelineConfig cfg;
    cfg.set("out", tmp.str());
    cfg.set("synth.sigma_seq", "0.02");
    cfg.set("synth.sessions", "4");
    cfg.set("train.epochs", "80");
    cfg.set("train.patience", "80");
    cfg.set("gnn.lr", "0.003");
    run_upstream(cfg);
    cmd_train(cfg, "gnn");

    // read the training log back: train AUC must cross 0.95 by epoch 60 while
    // the validation AUC stays at least 0.1 behind the train peak
    std::ifstream log(tmp.file("train_log_gnn.csv"));
    std::string line;
    std::getline(log, line); // header
    int cross_epoch = 0;
    double max_train = 0, max_val = 0;
    while (std::getline(log, line)) {
        std::stringstream ss(line);
        std::string epoch, loss, train, val;
        std::getline(ss, epoch, ',');
        std::getline(ss, loss, ',');
        std::getline(ss, train, ',');
        std::getline(ss, val, ',');
        double t = std::stod(train), v = std::stod(val);
        if (t > 0.95 && cross_epoch == 0) cross_epoch = std::stoi(epoch);
        max_train = std::max(max_train, t);
        max_val = std::max(max_val, v);
    }
    bool ok = cross_epoch > 0 && cross_epoch <= 60 && max_val <= max_train - 0.1;
    std::ostringstream msg;
    msg << "train macro-AUC crossed 0.95 at epoch " << cross_epoch << ", peak train = "
        << max_train << ", peak val = " << max_val;
    report(7, ok, msg.str());
}

// ---------------------------------------------------------------------------
// criterion 8: end-to-end determinism

void criterion8() {
    testsupport::TempDir tmp("determinism");
    const std::string wd = tmp.file("wd");
    auto run_all = [&]() {
        std::filesystem::remove_all(wd);
        PipelineConfig cfg;
        cfg.set("out", wd);
        cfg.set("synth.preset", "five_roads");
        cfg.set("train.epochs", "10");
        run_upstream(cfg);
        cmd_pca(cfg);
        cmd_report(cfg);
        cmd_train(cfg, "gnn");
        std::ostringstream sink;
        cmd_eval(cfg, "gnn", sink);
    };
    auto slurp = [](const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    };

    run_all();
    std::map<std::string, std::string> first;
    for (const auto& entry : std::filesystem::directory_iterator(wd)) {
        std::string name = entry.path().filename().string();
        if (name.rfind("manifest_", 0) == 0 || name.rfind("metrics_", 0) == 0)
            first[name] = slurp(entry.path().string());
    }
    run_all();
    bool ok = !first.empty();
    for (const auto& [name, content] : first)
        if (slurp((std::filesystem::path(wd) / name).string()) != content) ok = false;

    std::ostringstream msg;
    msg << first.size() << " manifest/metric files byte-identical across two full runs";
    report(8, ok, msg.str());
}

} // namespace

int main() {
    run(1, criterion1);
    run(2, criterion2);
    run(3, criterion3);
    run(4, criterion4);
    run(5, criterion5);
    run(6, criterion6);
    run(7, criterion7);
    run(8, criterion8);
    std::cout << (failures == 0 ? "ALL CRITERIA PASSED" : "FAILURES PRESENT") << std::endl;
    return failures == 0 ? 0 : 1;
}
