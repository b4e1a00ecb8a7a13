// pipeline.hpp - config file, manifests, checkpoints and the subcommand
// implementations shared by the CLI and the integration tests.
#pragma once

#include <array>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "roadsafe/analysis.hpp"
#include "roadsafe/data_model.hpp"
#include "roadsafe/enrich.hpp"
#include "roadsafe/geo_safety.hpp"
#include "roadsafe/gnn.hpp"
#include "roadsafe/lstm.hpp"
#include "roadsafe/nn.hpp"
#include "roadsafe/session_graph.hpp"
#include "roadsafe/synth.hpp"

namespace roadsafe {

struct ConfigError : Error {
    explicit ConfigError(const std::string& why) : Error("config error: " + why) {}
};
struct MissingInput : Error {
    explicit MissingInput(const std::string& path) : Error("missing input: " + path) {}
};

// ---------------------------------------------------------------------------
// config: one human-editable key = value file; CLI flags override

struct PipelineConfig {
    std::map<std::string, std::string> kv;

    static PipelineConfig from_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config file: " + path);
        PipelineConfig c;
        std::string line;
        while (std::getline(in, line)) {
            auto hash = line.find('#');
            if (hash != std::string::npos) line = line.substr(0, hash);
            auto eq = line.find('=');
            if (eq == std::string::npos) continue;
            auto trim = [](std::string s) {
                const char* ws = " \t\r";
                s.erase(0, s.find_first_not_of(ws));
                auto last = s.find_last_not_of(ws);
                s.erase(last == std::string::npos ? 0 : last + 1);
                return s;
            };
            std::string key = trim(line.substr(0, eq));
            if (!key.empty()) c.kv[key] = trim(line.substr(eq + 1));
        }
        return c;
    }

    void set(const std::string& key, const std::string& value) { kv[key] = value; }

    std::string get(const std::string& key, const std::string& dflt = "") const {
        auto it = kv.find(key);
        return it == kv.end() ? dflt : it->second;
    }
    double get_double(const std::string& key, double dflt) const {
        auto it = kv.find(key);
        return it == kv.end() ? dflt : std::stod(it->second);
    }
    int get_int(const std::string& key, int dflt) const {
        auto it = kv.find(key);
        return it == kv.end() ? dflt : std::stoi(it->second);
    }
    std::uint64_t seed() const {
        return static_cast<std::uint64_t>(std::stoull(get("seed", "42")));
    }
    std::string out_dir() const { return get("out", "out"); }

    std::string path(const std::string& key, const std::string& dflt_name) const {
        std::string v = get(key);
        if (!v.empty()) return v;
        return (std::filesystem::path(out_dir()) / dflt_name).string();
    }

    std::vector<std::string> feature_order() const {
        std::string v = get("feature_order");
        if (v.empty()) return default_feature_order();
        std::vector<std::string> order;
        std::stringstream ss(v);
        std::string item;
        while (std::getline(ss, item, ',')) order.push_back(item);
        return order;
    }

    AlarmSet counted_alarms() const {
        std::string v = get("counted_alarms");
        if (v.empty()) return default_counted_alarms();
        AlarmSet set;
        std::stringstream ss(v);
        std::string item;
        while (std::getline(ss, item, ',')) {
            auto a = parse_alarm_type(item);
            if (!a) throw ConfigError("unknown alarm type in counted_alarms: " + item);
            set.insert(*a);
        }
        return set;
    }

    std::array<double, 3> split_fractions() const {
        return {get_double("split.train", 0.7), get_double("split.val", 0.15),
                get_double("split.test", 0.15)};
    }

    TrainConfig train_config() const {
        TrainConfig t;
        t.lr = get_double("train.lr", 1e-3);
        t.epochs = get_int("train.epochs", 100);
        t.batch_size = get_int("train.batch_size", 32);
        t.patience = get_int("train.patience", 10);
        t.hidden = get_int("train.hidden", 200);
        t.seed = seed();
        return t;
    }

    std::string hash() const {
        std::string blob;
        for (const auto& [k, v] : kv) blob += k + "=" + v + "\n";
        return hex64(fnv1a64(blob));
    }
};

// ---------------------------------------------------------------------------
// manifests

inline std::string file_hash(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingInput(path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return hex64(fnv1a64(ss.str()));
}

class Manifest {
public:
    Manifest(std::string command, const PipelineConfig& cfg)
        : command_(std::move(command)), config_hash_(cfg.hash()), seed_(cfg.seed()),
          out_dir_(cfg.out_dir()) {}

    void add_input(const std::string& path) { inputs_[path] = file_hash(path); }
    void add_output(const std::string& path) { outputs_[path] = ""; }

    std::string write() {
        for (auto& [path, hash] : outputs_) hash = file_hash(path);
        nlohmann::json j;
        j["command"] = command_;
        j["config_hash"] = config_hash_;
        j["seed"] = seed_;
        j["inputs"] = inputs_;
        j["outputs"] = outputs_;
        const std::string path =
            (std::filesystem::path(out_dir_) / ("manifest_" + command_ + ".json")).string();
        std::ofstream out(path, std::ios::binary);
        out << j.dump(1) << '\n';
        return path;
    }

private:
    std::string command_, config_hash_;
    std::uint64_t seed_;
    std::string out_dir_;
    std::map<std::string, std::string> inputs_, outputs_;
};

// ---------------------------------------------------------------------------
// model checkpoints

struct Checkpoint {
    std::string kind; // logistic | ffnn | lstm | gnn
    std::size_t input_dim = 14, hidden = 0, classes = 5;
    std::vector<double> params;
    Standardizer standardizer;
    std::vector<std::string> feature_order;
    std::uint64_t seed = 0;
    std::string config_hash;
    AdamState optimizer;
    int best_epoch = 0;

    void save(const std::string& path) const {
        nlohmann::json j;
        j["format_version"] = 1;
        j["model"] = kind;
        j["input_dim"] = input_dim;
        j["hidden"] = hidden;
        j["classes"] = classes;
        j["params"] = params;
        j["standardizer"] = {{"means", standardizer.means},
                             {"stds", standardizer.stds},
                             {"constant_columns", standardizer.constant_columns}};
        j["feature_order"] = feature_order;
        j["seed"] = seed;
        j["config_hash"] = config_hash;
        j["best_epoch"] = best_epoch;
        j["optimizer"] = {{"m", optimizer.m}, {"v", optimizer.v},   {"t", optimizer.t},
                          {"lr", optimizer.lr}, {"beta1", optimizer.beta1},
                          {"beta2", optimizer.beta2}, {"eps", optimizer.eps}};
        std::ofstream out(path, std::ios::binary);
        if (!out) throw Error("cannot write checkpoint: " + path);
        out << j.dump(1) << '\n';
    }

    static Checkpoint load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw MissingInput(path);
        nlohmann::json j;
        in >> j;
        Checkpoint c;
        c.kind = j.at("model");
        c.input_dim = j.at("input_dim");
        c.hidden = j.at("hidden");
        c.classes = j.at("classes");
        c.params = j.at("params").get<std::vector<double>>();
        c.standardizer.means = j.at("standardizer").at("means").get<std::vector<double>>();
        c.standardizer.stds = j.at("standardizer").at("stds").get<std::vector<double>>();
        c.standardizer.constant_columns =
            j.at("standardizer").at("constant_columns").get<std::vector<int>>();
        c.feature_order = j.at("feature_order").get<std::vector<std::string>>();
        c.seed = j.at("seed");
        c.config_hash = j.at("config_hash");
        c.best_epoch = j.at("best_epoch");
        c.optimizer.m = j.at("optimizer").at("m").get<std::vector<double>>();
        c.optimizer.v = j.at("optimizer").at("v").get<std::vector<double>>();
        c.optimizer.t = j.at("optimizer").at("t");
        c.optimizer.lr = j.at("optimizer").at("lr");
        return c;
    }
};

// ---------------------------------------------------------------------------
// graph/model glue

inline Matrix graphs_event_matrix(const std::vector<SessionGraph>& graphs) {
    std::size_t total = 0, dim = 0;
    for (const auto& g : graphs) {
        total += g.nodes.size();
        if (!g.nodes.empty()) dim = g.nodes[0].size();
    }
    Matrix x(total, dim);
    std::size_t r = 0;
    for (const auto& g : graphs)
        for (const auto& node : g.nodes) {
            for (std::size_t j = 0; j < dim; ++j) x.at(r, j) = node[j];
            ++r;
        }
    return x;
}

inline std::vector<SessionGraph> standardize_graphs(const std::vector<SessionGraph>& graphs,
                                                    const Standardizer& s) {
    std::vector<SessionGraph> out = graphs;
    for (auto& g : out)
        for (auto& node : g.nodes) {
            Matrix row(1, node.size());
            row.a = node;
            node = s.apply(row).a;
        }
    return out;
}

// event-level dataset: every event carries its session's label (0-based)
inline Dataset graphs_event_dataset(const std::vector<SessionGraph>& graphs) {
    Dataset d;
    d.X = graphs_event_matrix(graphs);
    for (const auto& g : graphs)
        for (std::size_t n = 0; n < g.nodes.size(); ++n) d.y.push_back(g.label - 1);
    return d;
}

inline std::vector<Sequence> graphs_sequences(const std::vector<SessionGraph>& graphs) {
    std::vector<Sequence> out;
    out.reserve(graphs.size());
    for (const auto& g : graphs) {
        Sequence s;
        s.X = Matrix(g.nodes.size(), g.nodes.empty() ? 0 : g.nodes[0].size());
        for (std::size_t n = 0; n < g.nodes.size(); ++n)
            for (std::size_t j = 0; j < s.X.cols; ++j) s.X.at(n, j) = g.nodes[n][j];
        s.label = g.label - 1;
        out.push_back(std::move(s));
    }
    return out;
}

// session-level class probabilities for any checkpointed model kind
inline Matrix predict_sessions(const Checkpoint& ckpt, const std::vector<SessionGraph>& raw) {
    auto graphs = standardize_graphs(raw, ckpt.standardizer);
    if (ckpt.kind == "gnn") {
        GnnModel m(ckpt.input_dim, ckpt.hidden, ckpt.classes);
        m.unflatten(ckpt.params);
        return gnn_predict_all(m, graphs);
    }
    if (ckpt.kind == "lstm") {
        LstmClassifier m(ckpt.input_dim, ckpt.hidden, ckpt.classes);
        m.unflatten(ckpt.params);
        return m.predict_all(graphs_sequences(graphs));
    }
    Mlp m = ckpt.kind == "logistic" ? make_logistic(ckpt.input_dim, ckpt.classes)
                                    : make_ffnn(ckpt.input_dim, ckpt.hidden, ckpt.classes);
    m.unflatten(ckpt.params);
    // per-event probabilities averaged over the session
    Matrix out(graphs.size(), ckpt.classes);
    for (std::size_t gi = 0; gi < graphs.size(); ++gi) {
        const auto& g = graphs[gi];
        Matrix x(g.nodes.size(), ckpt.input_dim);
        for (std::size_t n = 0; n < g.nodes.size(); ++n)
            for (std::size_t j = 0; j < ckpt.input_dim; ++j) x.at(n, j) = g.nodes[n][j];
        Matrix probs = m.forward(x);
        for (std::size_t n = 0; n < probs.rows; ++n)
            for (std::size_t j = 0; j < probs.cols; ++j)
                out.at(gi, j) += probs.at(n, j) / static_cast<double>(probs.rows);
    }
    return out;
}

struct EvalResult {
    double macro_auc = 0;
    std::vector<double> per_class_auc;
    std::vector<std::vector<int>> confusion; // [true][predicted]
    std::size_t n = 0;

    nlohmann::json to_json() const {
        return {{"macro_auc", macro_auc},
                {"per_class_auc", per_class_auc},
                {"confusion", confusion},
                {"n", n}};
    }
};

inline EvalResult evaluate_sessions(const Checkpoint& ckpt,
                                    const std::vector<SessionGraph>& graphs) {
    Matrix probs = predict_sessions(ckpt, graphs);
    auto y = graph_labels_zero_based(graphs);
    auto m = auc_macro(probs, y);
    EvalResult res;
    res.macro_auc = m.macro;
    res.per_class_auc = m.per_class;
    res.n = graphs.size();
    res.confusion.assign(ckpt.classes, std::vector<int>(ckpt.classes, 0));
    for (std::size_t i = 0; i < probs.rows; ++i) {
        std::size_t arg = 0;
        for (std::size_t j = 1; j < probs.cols; ++j)
            if (probs.at(i, j) > probs.at(i, arg)) arg = j;
        res.confusion[static_cast<std::size_t>(y[i])][arg] += 1;
    }
    return res;
}

inline void write_train_log_csv(const std::string& path, const std::vector<EpochLog>& log) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write log: " + path);
    out << "epoch,loss,train_auc,val_auc,test_auc\n";
    for (const auto& e : log) {
        out << e.epoch << ',' << detail::fmt_double(e.loss) << ','
            << detail::fmt_double(e.train_auc) << ',' << detail::fmt_double(e.val_auc) << ',';
        if (!std::isnan(e.test_auc)) out << detail::fmt_double(e.test_auc);
        out << '\n';
    }
}

// ---------------------------------------------------------------------------
// subcommands

inline void ensure_out_dir(const PipelineConfig& cfg) {
    std::filesystem::create_directories(cfg.out_dir());
}

inline SynthConfig synth_config_from(const PipelineConfig& cfg) {
    const std::string preset = cfg.get("synth.preset", "benchmark");
    SynthConfig sc;
    if (preset == "benchmark") sc = SynthConfig::benchmark_default();
    else if (preset == "five_roads") sc = SynthConfig::five_roads();
    else throw ConfigError("unknown synth.preset: " + preset);
    sc.seed = cfg.seed();
    int sessions = cfg.get_int("synth.sessions", 0);
    if (sessions > 0)
        for (auto& r : sc.roads) r.sessions = sessions;
    sc.sigma_seq = cfg.get_double("synth.sigma_seq", sc.sigma_seq);
    sc.marginal_shift = cfg.get_double("synth.marginal_shift", sc.marginal_shift);
    sc.feature_noise = cfg.get_double("synth.feature_noise", sc.feature_noise);
    return sc;
}

inline void cmd_synth(const PipelineConfig& cfg) {
    ensure_out_dir(cfg);
    SynthData data = generate(synth_config_from(cfg));
    const std::string csv = cfg.path("input", "raw.csv");
    const std::string fixtures = cfg.path("fixtures", "fixtures.json");
    const std::string truth = cfg.path("truth", "truth.json");
    write_synth(data, csv, fixtures, truth);
    Manifest m("synth", cfg);
    m.add_output(csv);
    m.add_output(fixtures);
    m.add_output(truth);
    m.write();
}

struct IngestSummary {
    std::size_t events = 0, errors = 0;
};

inline IngestSummary cmd_ingest(const PipelineConfig& cfg) {
    ensure_out_dir(cfg);
    const std::string input = cfg.path("input", "raw.csv");
    if (!std::filesystem::exists(input)) throw MissingInput(input);

    CsvSchema schema = default_csv_schema();
    for (auto& [canonical, col] : schema) {
        std::string v = cfg.get("csv." + canonical);
        if (!v.empty()) col = v;
    }
    int offset = cfg.get_int("utc_offset_s", 0);
    auto parsed = parse_alert_csv(input, schema, offset);
    if (parsed.events.empty() && parsed.errors.empty()) throw EmptyFile(input);

    const std::string canonical = cfg.path("canonical", "canonical.csv");
    write_alert_csv(canonical, parsed.events, false);
    const std::string errs = cfg.path("ingest_errors", "ingest_errors.csv");
    {
        std::ofstream out(errs, std::ios::binary);
        out << "line,field,raw,message\n";
        for (const auto& e : parsed.errors)
            out << e.line << ',' << detail::csv_escape(e.field) << ','
                << detail::csv_escape(e.raw) << ',' << detail::csv_escape(e.message) << '\n';
    }
    Manifest m("ingest", cfg);
    m.add_input(input);
    m.add_output(canonical);
    m.add_output(errs);
    m.write();
    return {parsed.events.size(), parsed.errors.size()};
}

inline std::size_t cmd_enrich(const PipelineConfig& cfg) {
    ensure_out_dir(cfg);
    const std::string canonical = cfg.path("canonical", "canonical.csv");
    const std::string fixtures = cfg.path("fixtures", "fixtures.json");
    for (const auto& p : {canonical, fixtures})
        if (!std::filesystem::exists(p)) throw MissingInput(p);
    // live mode is not implemented here: enrichment always replays fixtures,
    // which is exactly what --offline promises
    auto parsed = parse_alert_csv(canonical, default_csv_schema());
    FixtureClient client = FixtureClient::from_file(fixtures);
    const std::string cache_path = cfg.path("cache", "enrich_cache.jsonl");
    EnrichmentCache cache = EnrichmentCache::load(cache_path);
    auto result = enrich_events(parsed.events, client, cache);
    cache.save(cache_path);

    const std::string enriched = cfg.path("enriched", "enriched.csv");
    write_alert_csv(enriched, result.enriched, true);
    const std::string rejected = cfg.path("rejected", "rejected.csv");
    {
        std::ofstream out(rejected, std::ios::binary);
        out << "deviceId,recordedAt,reason\n";
        for (const auto& r : result.rejected)
            out << detail::csv_escape(r.event.device_id) << ',' << r.event.timestamp.to_iso()
                << ',' << detail::csv_escape(r.reason) << '\n';
    }
    Manifest m("enrich", cfg);
    m.add_input(canonical);
    m.add_input(fixtures);
    m.add_output(enriched);
    m.add_output(rejected);
    m.write();
    return result.enriched.size();
}

inline void cmd_label(const PipelineConfig& cfg) {
    ensure_out_dir(cfg);
    const std::string enriched = cfg.path("enriched", "enriched.csv");
    if (!std::filesystem::exists(enriched)) throw MissingInput(enriched);
    auto events = read_enriched_csv(enriched);
    auto densities = warning_density(events, cfg.get_double("radius_km", 1.0),
                                     cfg.counted_alarms());
    auto binning = fit_index_binning(densities);
    auto labeled = label_events(events, densities, binning);

    const std::string labeled_path = cfg.path("labeled", "labeled.csv");
    write_labeled_csv(labeled_path, labeled);
    const std::string binning_path = cfg.path("binning", "binning.json");
    {
        std::ofstream out(binning_path, std::ios::binary);
        out << binning.to_json().dump(1) << '\n';
    }
    Manifest m("label", cfg);
    m.add_input(enriched);
    m.add_output(labeled_path);
    m.add_output(binning_path);
    m.write();
}

inline void cmd_pca(const PipelineConfig& cfg) {
    ensure_out_dir(cfg);
    const std::string labeled_path = cfg.path("labeled", "labeled.csv");
    if (!std::filesystem::exists(labeled_path)) throw MissingInput(labeled_path);
    auto labeled = read_labeled_csv(labeled_path);
    auto order = cfg.feature_order();

    DataMatrix dm;
    dm.names = order;
    dm.values = Matrix(labeled.size(), order.size());
    std::vector<SafetyIndex> labels;
    for (std::size_t i = 0; i < labeled.size(); ++i) {
        auto f = build_feature_vector(labeled[i].event, order);
        for (std::size_t j = 0; j < f.size(); ++j) dm.values.at(i, j) = f[j];
        labels.push_back(SafetyIndex{labeled[i].safety_index});
    }
    // PCA runs on standardized features (mixed units otherwise dominate)
    auto std_res = standardize(dm);
    auto p = pca(std_res.matrix, std::min<std::size_t>(2, order.size()));

    const std::string loadings = cfg.path("pca_loadings", "pca_loadings.csv");
    {
        std::ofstream out(loadings, std::ios::binary);
        out << "feature,pc1,pc2\n";
        for (std::size_t i = 0; i < order.size(); ++i)
            out << detail::csv_escape(order[i]) << ','
                << detail::fmt_double(p.components.at(i, 0)) << ','
                << detail::fmt_double(p.components.at(i, 1)) << '\n';
    }
    const std::string scores = cfg.path("pca_scores", "pca_scores.csv");
    {
        std::ofstream out(scores, std::ios::binary);
        out << "pc1,pc2\n";
        for (std::size_t i = 0; i < p.scores.rows; ++i)
            out << detail::fmt_double(p.scores.at(i, 0)) << ','
                << detail::fmt_double(p.scores.at(i, 1)) << '\n';
    }
    const std::string variance = cfg.path("pca_variance", "pca_variance.json");
    {
        auto corr = feature_correlations(std_res.matrix, labels);
        nlohmann::json j;
        j["standardized"] = true;
        j["explained_variance"] = p.explained_variance;
        j["variance_ratio"] = p.variance_ratio;
        j["constant_columns"] = std_res.constant_columns;
        nlohmann::json cj;
        for (std::size_t i = 0; i < order.size(); ++i) cj[order[i]] = corr.r[i];
        j["feature_index_correlation"] = cj;
        std::ofstream out(variance, std::ios::binary);
        out << j.dump(1) << '\n';
    }
    const std::string biplot = cfg.path("pca_biplot", "pca_biplot.svg");
    write_biplot_svg(biplot, p);

    Manifest m("pca", cfg);
    m.add_input(labeled_path);
    for (const auto& o : {loadings, scores, variance, biplot}) m.add_output(o);
    m.write();
}

inline void cmd_report(const PipelineConfig& cfg) {
    ensure_out_dir(cfg);
    const std::string labeled_path = cfg.path("labeled", "labeled.csv");
    if (!std::filesystem::exists(labeled_path)) throw MissingInput(labeled_path);
    auto labeled = read_labeled_csv(labeled_path);
    auto rows = road_risk_report(labeled);
    const std::string report = cfg.path("report", "road_report.csv");
    {
        std::ofstream out(report, std::ios::binary);
        out << "road,percent_of_normalized_warnings,avg_alerts_per_trip\n";
        for (const auto& r : rows)
            out << detail::csv_escape(r.road) << ',' << detail::fmt_double(r.percent) << ','
                << detail::fmt_double(r.avg_alerts) << '\n';
    }
    Manifest m("report", cfg);
    m.add_input(labeled_path);
    m.add_output(report);
    m.write();
}

inline void cmd_train(const PipelineConfig& cfg, const std::string& model_kind) {
    ensure_out_dir(cfg);
    const std::string labeled_path = cfg.path("labeled", "labeled.csv");
    if (!std::filesystem::exists(labeled_path)) throw MissingInput(labeled_path);
    auto labeled = read_labeled_csv(labeled_path);
    auto order = cfg.feature_order();
    auto graphs = build_session_graphs(labeled, order);
    auto split = split_sessions(graphs, cfg.split_fractions(), cfg.seed());

    Standardizer stz = Standardizer::fit(graphs_event_matrix(split.train));
    auto tr = standardize_graphs(split.train, stz);
    auto va = standardize_graphs(split.val, stz);
    auto te = standardize_graphs(split.test, stz);

    TrainConfig tc = cfg.train_config();
    Checkpoint ckpt;
    ckpt.kind = model_kind;
    ckpt.input_dim = order.size();
    ckpt.classes = static_cast<std::size_t>(tc.classes);
    ckpt.standardizer = stz;
    ckpt.feature_order = order;
    ckpt.seed = cfg.seed();
    ckpt.config_hash = cfg.hash();

    std::vector<EpochLog> log;
    if (model_kind == "gnn") {
        std::size_t hidden = static_cast<std::size_t>(cfg.get_int("gnn.hidden", 64));
        std::size_t batch = static_cast<std::size_t>(cfg.get_int("gnn.batch", 20));
        tc.lr = cfg.get_double("gnn.lr", tc.lr);
        auto res = train_gnn(tr, va, te, tc, hidden, batch);
        ckpt.hidden = hidden;
        ckpt.params = res.best.flatten();
        ckpt.best_epoch = res.best_epoch;
        log = res.log;
    } else if (model_kind == "lstm") {
        std::size_t hidden = static_cast<std::size_t>(cfg.get_int("lstm.hidden", 64));
        tc.lr = cfg.get_double("lstm.lr", tc.lr);
        tc.batch_size = cfg.get_int("lstm.batch", 20);
        auto res = train_lstm(graphs_sequences(tr), graphs_sequences(va), tc,
                              nullptr, hidden);
        ckpt.hidden = hidden;
        ckpt.params = res.best.flatten();
        ckpt.best_epoch = res.best_epoch;
        log = res.log;
    } else if (model_kind == "logistic" || model_kind == "ffnn") {
        auto kind = model_kind == "logistic" ? ClassifierKind::logistic : ClassifierKind::ffnn;
        auto res = train_classifier(kind, graphs_event_dataset(tr), graphs_event_dataset(va),
                                    tc);
        ckpt.hidden = static_cast<std::size_t>(tc.hidden);
        ckpt.params = res.best.flatten();
        ckpt.best_epoch = res.best_epoch;
        log = res.log;
    } else {
        throw ConfigError("unknown model kind: " + model_kind);
    }

    const std::string log_path = cfg.path("train_log", "train_log_" + model_kind + ".csv");
    write_train_log_csv(log_path, log);
    const std::string ckpt_path =
        cfg.path("checkpoint", "checkpoint_" + model_kind + ".json");
    ckpt.save(ckpt_path);

    // split dumps so eval (and external tools) see exactly what training saw
    const std::string gtrain = cfg.path("graphs_train", "graphs_train.jsonl");
    const std::string gval = cfg.path("graphs_val", "graphs_val.jsonl");
    const std::string gtest = cfg.path("graphs_test", "graphs_test.jsonl");
    write_graphs_jsonl(gtrain, split.train);
    write_graphs_jsonl(gval, split.val);
    write_graphs_jsonl(gtest, split.test);

    Manifest m("train_" + model_kind, cfg);
    m.add_input(labeled_path);
    for (const auto& o : {log_path, ckpt_path, gtrain, gval, gtest}) m.add_output(o);
    m.write();
}

inline EvalResult cmd_eval(const PipelineConfig& cfg, const std::string& model_kind,
                           std::ostream& out) {
    ensure_out_dir(cfg);
    const std::string ckpt_path =
        cfg.path("checkpoint", "checkpoint_" + model_kind + ".json");
    const std::string graphs_path = cfg.path("eval_graphs", "graphs_test.jsonl");
    for (const auto& p : {ckpt_path, graphs_path})
        if (!std::filesystem::exists(p)) throw MissingInput(p);

    Checkpoint ckpt = Checkpoint::load(ckpt_path);
    auto graphs = read_graphs_jsonl(graphs_path);
    EvalResult res = evaluate_sessions(ckpt, graphs);

    out << "model: " << ckpt.kind << "  sessions: " << res.n << '\n';
    out << "macro_auc: " << res.macro_auc << '\n';
    for (std::size_t c = 0; c < res.per_class_auc.size(); ++c) {
        out << "auc[class " << c + 1 << "]: ";
        if (std::isnan(res.per_class_auc[c])) out << "skipped (degenerate)";
        else out << res.per_class_auc[c];
        out << '\n';
    }
    out << "confusion (rows = true 1..5, cols = predicted):\n";
    for (const auto& row : res.confusion) {
        for (int v : row) out << v << ' ';
        out << '\n';
    }

    const std::string metrics = cfg.path("metrics", "metrics_" + model_kind + ".json");
    {
        std::ofstream mo(metrics, std::ios::binary);
        mo << res.to_json().dump(1) << '\n';
    }
    Manifest m("eval_" + model_kind, cfg);
    m.add_input(ckpt_path);
    m.add_input(graphs_path);
    m.add_output(metrics);
    m.write();
    return res;
}

} // namespace roadsafe
