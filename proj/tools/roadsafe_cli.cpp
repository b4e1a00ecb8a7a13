// roadsafe - pipeline driver
//
//   roadsafe synth   --out out [--seed N] [--set synth.preset=five_roads]
//   roadsafe ingest  --out out [--set input=path/raw.csv]
//   roadsafe enrich  --out out --offline
//   roadsafe label   --out out
//   roadsafe pca     --out out
//   roadsafe report  --out out
//   roadsafe train   --out out --model gnn|lstm|ffnn|logistic
//   roadsafe eval    --out out --model gnn|lstm|ffnn|logistic
//
// Every option can also come from a key=value config file (--config); flags
// override the file. Outputs land in the --out directory only.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "roadsafe/pipeline.hpp"

namespace {

struct CommonOpts {
    std::string config_path, out_dir, model;
    std::vector<std::string> sets;
    std::uint64_t seed = 0;
    bool seed_given = false, offline = false;
};

void add_common(CLI::App* cmd, CommonOpts& o, bool with_model) {
    cmd->add_option("--config", o.config_path, "key = value config file");
    cmd->add_option("--out", o.out_dir, "output directory");
    cmd->add_option("--seed", o.seed, "root random seed")
        ->each([&o](const std::string&) { o.seed_given = true; });
    cmd->add_option("--set", o.sets, "override a config key (key=value), repeatable");
    cmd->add_flag("--offline", o.offline, "never contact live services (fixtures only)");
    if (with_model)
        cmd->add_option("--model", o.model, "model kind: logistic, ffnn, lstm, gnn")
            ->required();
}

roadsafe::PipelineConfig build_config(const CommonOpts& o) {
    roadsafe::PipelineConfig cfg;
    if (!o.config_path.empty()) cfg = roadsafe::PipelineConfig::from_file(o.config_path);
    for (const auto& s : o.sets) {
        auto eq = s.find('=');
        if (eq == std::string::npos)
            throw roadsafe::ConfigError("--set expects key=value, got: " + s);
        cfg.set(s.substr(0, eq), s.substr(eq + 1));
    }
    if (!o.out_dir.empty()) cfg.set("out", o.out_dir);
    if (o.seed_given) cfg.set("seed", std::to_string(o.seed));
    if (o.offline) cfg.set("offline", "1");
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"road alert analytics pipeline"};
    app.require_subcommand(1);

    CommonOpts opts;
    auto* c_synth = app.add_subcommand("synth", "generate synthetic alert data");
    auto* c_ingest = app.add_subcommand("ingest", "parse and validate a raw alert CSV");
    auto* c_enrich = app.add_subcommand("enrich", "attach weather, altitude and road names");
    auto* c_label = app.add_subcommand("label", "compute densities and safety indices");
    auto* c_pca = app.add_subcommand("pca", "principal component analysis and biplot");
    auto* c_report = app.add_subcommand("report", "per-road risk report");
    auto* c_train = app.add_subcommand("train", "train a model on labeled sessions");
    auto* c_eval = app.add_subcommand("eval", "evaluate a checkpoint on held-out sessions");
    for (auto* c : {c_synth, c_ingest, c_enrich, c_label, c_pca, c_report})
        add_common(c, opts, false);
    for (auto* c : {c_train, c_eval}) add_common(c, opts, true);

    CLI11_PARSE(app, argc, argv);

    try {
        auto cfg = build_config(opts);
        if (c_synth->parsed()) {
            roadsafe::cmd_synth(cfg);
        } else if (c_ingest->parsed()) {
            auto s = roadsafe::cmd_ingest(cfg);
            std::cout << "ingested " << s.events << " events, " << s.errors
                      << " rejected rows\n";
        } else if (c_enrich->parsed()) {
            std::size_t n = roadsafe::cmd_enrich(cfg);
            std::cout << "enriched " << n << " events\n";
        } else if (c_label->parsed()) {
            roadsafe::cmd_label(cfg);
        } else if (c_pca->parsed()) {
            roadsafe::cmd_pca(cfg);
        } else if (c_report->parsed()) {
            roadsafe::cmd_report(cfg);
        } else if (c_train->parsed()) {
            roadsafe::cmd_train(cfg, opts.model);
        } else if (c_eval->parsed()) {
            roadsafe::cmd_eval(cfg, opts.model, std::cout);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
