// session_graph.hpp - per-session chain graphs and fixed-size batches
//
// One graph per (device, road, date) session: nodes are the session's events
// in timestamp order (file order breaks ties), edges run oldest -> latest
// between consecutive events, and the graph carries the session label
// (max safety index among its events).
#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include "roadsafe/enrich.hpp"
#include "roadsafe/geo_safety.hpp"
#include "roadsafe/matrix.hpp"
#include "roadsafe/rng.hpp"

namespace roadsafe {

struct TooFewSessions : Error {
    TooFewSessions() : Error("need at least 3 sessions to split") {}
};

struct SessionGraph {
    SessionId session;
    std::vector<std::vector<double>> nodes; // feature vectors, time-ascending
    std::vector<std::pair<int, int>> edges; // (i, i+1) chain
    int label = 1;

    bool operator==(const SessionGraph&) const = default;
};

inline std::vector<SessionGraph> build_session_graphs(
    const std::vector<LabeledEvent>& rows,
    const std::vector<std::string>& feature_order = default_feature_order()) {
    struct Member {
        std::size_t file_order;
        Timestamp ts;
        std::vector<double> features;
        int index;
    };
    std::map<SessionId, std::vector<Member>> groups;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        Member m{i, r.event.timestamp, build_feature_vector(r.event, feature_order),
                 r.safety_index};
        groups[make_session_id(r.event)].push_back(std::move(m));
    }
    std::vector<SessionGraph> out;
    out.reserve(groups.size());
    for (auto& [sid, members] : groups) {
        std::stable_sort(members.begin(), members.end(), [](const Member& a, const Member& b) {
            return a.ts != b.ts ? a.ts < b.ts : a.file_order < b.file_order;
        });
        SessionGraph g;
        g.session = sid;
        int label = 1;
        for (const auto& m : members) {
            g.nodes.push_back(m.features);
            label = std::max(label, m.index);
        }
        for (int i = 0; i + 1 < static_cast<int>(g.nodes.size()); ++i)
            g.edges.push_back({i, i + 1});
        g.label = label;
        out.push_back(std::move(g));
    }
    return out;
}

// ---------------------------------------------------------------------------
// batches

struct GraphBatch {
    Matrix node_features;                   // total_nodes x dim
    std::vector<std::pair<int, int>> edges; // global node indices, within-graph only
    std::vector<int> node_graph;            // node -> graph position in batch
    std::vector<int> offsets;               // node offset per graph (strictly increasing)
    std::vector<int> labels;
    std::vector<SessionId> sessions;

    std::size_t graph_count() const { return labels.size(); }
};

inline GraphBatch make_batch(const std::vector<SessionGraph>& graphs) {
    GraphBatch b;
    std::size_t total = 0, dim = 0;
    for (const auto& g : graphs) {
        total += g.nodes.size();
        if (!g.nodes.empty()) dim = g.nodes[0].size();
    }
    b.node_features = Matrix(total, dim);
    int offset = 0;
    for (std::size_t gi = 0; gi < graphs.size(); ++gi) {
        const auto& g = graphs[gi];
        b.offsets.push_back(offset);
        b.labels.push_back(g.label);
        b.sessions.push_back(g.session);
        for (std::size_t n = 0; n < g.nodes.size(); ++n) {
            for (std::size_t j = 0; j < dim; ++j)
                b.node_features.at(offset + n, j) = g.nodes[n][j];
            b.node_graph.push_back(static_cast<int>(gi));
        }
        for (auto [u, v] : g.edges) b.edges.push_back({u + offset, v + offset});
        offset += static_cast<int>(g.nodes.size());
    }
    return b;
}

inline std::vector<SessionGraph> unbatch(const GraphBatch& b) {
    std::vector<SessionGraph> out(b.graph_count());
    for (std::size_t gi = 0; gi < out.size(); ++gi) {
        out[gi].session = b.sessions[gi];
        out[gi].label = b.labels[gi];
    }
    for (std::size_t n = 0; n < b.node_graph.size(); ++n) {
        auto& g = out[static_cast<std::size_t>(b.node_graph[n])];
        std::vector<double> f(b.node_features.cols);
        for (std::size_t j = 0; j < f.size(); ++j) f[j] = b.node_features.at(n, j);
        g.nodes.push_back(std::move(f));
    }
    for (auto [u, v] : b.edges) {
        int gi = b.node_graph[static_cast<std::size_t>(u)];
        int off = b.offsets[static_cast<std::size_t>(gi)];
        out[static_cast<std::size_t>(gi)].edges.push_back({u - off, v - off});
    }
    return out;
}

inline std::vector<GraphBatch> batch_graphs(const std::vector<SessionGraph>& graphs,
                                            std::size_t batch_size, std::uint64_t seed) {
    if (graphs.empty()) throw EmptyInput("batch_graphs");
    std::vector<std::size_t> order(graphs.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng = Rng::substream(seed, "batch");
    rng.shuffle(order);

    std::vector<GraphBatch> out;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
        std::vector<SessionGraph> chunk;
        for (std::size_t i = start; i < std::min(order.size(), start + batch_size); ++i)
            chunk.push_back(graphs[order[i]]);
        out.push_back(make_batch(chunk));
    }
    return out;
}

// ---------------------------------------------------------------------------
// splits (whole sessions, stratified by label)

struct SessionSplit {
    std::vector<SessionGraph> train, val, test;
};

inline SessionSplit split_sessions(const std::vector<SessionGraph>& graphs,
                                   std::array<double, 3> fractions, std::uint64_t seed) {
    if (graphs.size() < 3) throw TooFewSessions();
    if (std::abs(fractions[0] + fractions[1] + fractions[2] - 1.0) > 1e-9)
        throw Error("split fractions must sum to 1");

    std::map<int, std::vector<std::size_t>> by_label;
    for (std::size_t i = 0; i < graphs.size(); ++i) by_label[graphs[i].label].push_back(i);

    Rng rng = Rng::substream(seed, "split");
    SessionSplit out;
    for (auto& [label, idx] : by_label) {
        rng.shuffle(idx);
        const std::size_t n = idx.size();
        std::size_t n_train = static_cast<std::size_t>(std::floor(fractions[0] * n));
        std::size_t n_val = static_cast<std::size_t>(std::floor(fractions[1] * n));
        // where class counts permit, keep every bucket non-empty
        if (n >= 3) {
            if (n_train == 0) n_train = 1;
            if (n_val == 0) n_val = 1;
            while (n_train + n_val >= n) (n_train > 1 ? n_train : n_val)--;
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (i < n_train) out.train.push_back(graphs[idx[i]]);
            else if (i < n_train + n_val) out.val.push_back(graphs[idx[i]]);
            else out.test.push_back(graphs[idx[i]]);
        }
    }
    // tiny inputs: guarantee all three buckets are populated
    if (out.train.empty() || out.val.empty() || out.test.empty()) {
        std::vector<SessionGraph> all;
        for (auto* v : {&out.train, &out.val, &out.test})
            for (auto& g : *v) all.push_back(std::move(g));
        out = {};
        for (std::size_t i = 0; i < all.size(); ++i) {
            if (i % 3 == 0 || i >= 3) out.train.push_back(std::move(all[i]));
            else if (i % 3 == 1) out.val.push_back(std::move(all[i]));
            else out.test.push_back(std::move(all[i]));
        }
        if (out.val.empty() || out.test.empty()) throw TooFewSessions();
    }
    return out;
}

// ---------------------------------------------------------------------------
// JSON-lines dump format, one graph per line

inline nlohmann::json graph_to_json(const SessionGraph& g) {
    nlohmann::json j;
    j["session"] = g.session.render();
    j["label"] = g.label;
    j["nodes"] = g.nodes;
    auto edges = nlohmann::json::array();
    for (auto [u, v] : g.edges) edges.push_back({u, v});
    j["edges"] = edges;
    return j;
}

inline SessionGraph graph_from_json(const nlohmann::json& j) {
    SessionGraph g;
    auto sid = SessionId::parse(j.at("session").get<std::string>());
    if (!sid) throw Error("bad session id in graph json");
    g.session = *sid;
    g.label = j.at("label").get<int>();
    g.nodes = j.at("nodes").get<std::vector<std::vector<double>>>();
    for (const auto& e : j.at("edges"))
        g.edges.push_back({e[0].get<int>(), e[1].get<int>()});
    return g;
}

inline void write_graphs_jsonl(const std::string& path,
                               const std::vector<SessionGraph>& graphs) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write graph file: " + path);
    for (const auto& g : graphs) out << graph_to_json(g).dump() << '\n';
}

inline std::vector<SessionGraph> read_graphs_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open graph file: " + path);
    std::vector<SessionGraph> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        out.push_back(graph_from_json(nlohmann::json::parse(line)));
    }
    return out;
}

} // namespace roadsafe
