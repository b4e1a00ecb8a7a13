// analysis.hpp - standardization, Jacobi eigendecomposition, PCA,
// feature/index correlations and the dangerous-roads report
#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "roadsafe/geo_safety.hpp"
#include "roadsafe/matrix.hpp"

namespace roadsafe {

struct NotSymmetric : Error {
    NotSymmetric() : Error("matrix is not symmetric") {}
};
struct KTooLarge : Error {
    KTooLarge() : Error("requested more components than features") {}
};

struct DataMatrix {
    Matrix values; // n x p
    std::vector<std::string> names;
};

// ---------------------------------------------------------------------------
// standardization

struct StandardizeResult {
    DataMatrix matrix;
    std::vector<double> means, stds;
    std::vector<std::string> constant_columns; // reported, mapped to all-zero
};

inline StandardizeResult standardize(const DataMatrix& m) {
    const Matrix& x = m.values;
    if (x.rows < 2) throw EmptyInput("standardize");
    StandardizeResult res;
    res.matrix.names = m.names;
    res.matrix.values = Matrix(x.rows, x.cols);
    res.means.assign(x.cols, 0.0);
    res.stds.assign(x.cols, 1.0);
    for (std::size_t j = 0; j < x.cols; ++j) {
        double mean = 0;
        for (std::size_t i = 0; i < x.rows; ++i) mean += x.at(i, j);
        mean /= static_cast<double>(x.rows);
        double ss = 0;
        for (std::size_t i = 0; i < x.rows; ++i) {
            double d = x.at(i, j) - mean;
            ss += d * d;
        }
        double sd = std::sqrt(ss / static_cast<double>(x.rows - 1));
        res.means[j] = mean;
        res.stds[j] = sd;
        if (sd == 0.0) {
            res.constant_columns.push_back(j < m.names.size() ? m.names[j]
                                                              : std::to_string(j));
            continue; // column stays all-zero
        }
        for (std::size_t i = 0; i < x.rows; ++i)
            res.matrix.values.at(i, j) = (x.at(i, j) - mean) / sd;
    }
    return res;
}

// ---------------------------------------------------------------------------
// symmetric eigendecomposition (cyclic Jacobi)

struct EighResult {
    std::vector<double> eigenvalues; // descending
    Matrix eigenvectors;             // columns, matching order
};

inline EighResult eigh_symmetric(const Matrix& a) {
    const std::size_t p = a.rows;
    if (a.cols != p) throw NotSymmetric();
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = i + 1; j < p; ++j)
            if (std::abs(a.at(i, j) - a.at(j, i)) > 1e-10) throw NotSymmetric();

    Matrix A = a;
    Matrix V(p, p);
    for (std::size_t i = 0; i < p; ++i) V.at(i, i) = 1.0;

    auto offdiag_norm = [&]() {
        double s = 0;
        for (std::size_t i = 0; i < p; ++i)
            for (std::size_t j = i + 1; j < p; ++j) s += A.at(i, j) * A.at(i, j);
        return std::sqrt(2.0 * s);
    };

    for (int sweep = 0; sweep < 100 && offdiag_norm() >= 1e-12; ++sweep) {
        for (std::size_t pi = 0; pi + 1 < p; ++pi) {
            for (std::size_t qi = pi + 1; qi < p; ++qi) {
                const double apq = A.at(pi, qi);
                if (std::abs(apq) < 1e-300) continue;
                const double app = A.at(pi, pi), aqq = A.at(qi, qi);
                const double theta = (aqq - app) / (2.0 * apq);
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < p; ++k) {
                    const double akp = A.at(k, pi), akq = A.at(k, qi);
                    A.at(k, pi) = c * akp - s * akq;
                    A.at(k, qi) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < p; ++k) {
                    const double apk = A.at(pi, k), aqk = A.at(qi, k);
                    A.at(pi, k) = c * apk - s * aqk;
                    A.at(qi, k) = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < p; ++k) {
                    const double vkp = V.at(k, pi), vkq = V.at(k, qi);
                    V.at(k, pi) = c * vkp - s * vkq;
                    V.at(k, qi) = s * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<std::size_t> order(p);
    for (std::size_t i = 0; i < p; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t x, std::size_t y) { return A.at(x, x) > A.at(y, y); });

    EighResult res;
    res.eigenvalues.resize(p);
    res.eigenvectors = Matrix(p, p);
    for (std::size_t j = 0; j < p; ++j) {
        res.eigenvalues[j] = A.at(order[j], order[j]);
        for (std::size_t i = 0; i < p; ++i)
            res.eigenvectors.at(i, j) = V.at(i, order[j]);
    }
    return res;
}

// ---------------------------------------------------------------------------
// PCA

struct PcaResult {
    Matrix components;                      // p x k, orthonormal columns
    std::vector<double> explained_variance; // k eigenvalues, descending
    std::vector<double> variance_ratio;     // eigenvalue / total variance
    Matrix scores;                          // n x k
    std::vector<std::string> names;
};

// Expects standardized input. Sign convention: the largest-magnitude loading
// of each component is positive, which makes outputs byte-stable across runs.
inline PcaResult pca(const DataMatrix& m, std::size_t k) {
    const Matrix& x = m.values;
    if (k > x.cols) throw KTooLarge();
    if (x.rows < 2) throw EmptyInput("pca");

    // sample covariance (n-1 normalization) of centered data
    std::vector<double> mean(x.cols, 0.0);
    for (std::size_t j = 0; j < x.cols; ++j) {
        for (std::size_t i = 0; i < x.rows; ++i) mean[j] += x.at(i, j);
        mean[j] /= static_cast<double>(x.rows);
    }
    Matrix centered(x.rows, x.cols);
    for (std::size_t i = 0; i < x.rows; ++i)
        for (std::size_t j = 0; j < x.cols; ++j)
            centered.at(i, j) = x.at(i, j) - mean[j];
    Matrix cov = matmul_tn(centered, centered);
    for (double& v : cov.a) v /= static_cast<double>(x.rows - 1);

    EighResult eig = eigh_symmetric(cov);

    PcaResult res;
    res.names = m.names;
    res.components = Matrix(x.cols, k);
    res.explained_variance.resize(k);
    double total = 0;
    for (double ev : eig.eigenvalues) total += std::max(0.0, ev);
    for (std::size_t j = 0; j < k; ++j) {
        res.explained_variance[j] = eig.eigenvalues[j];
        // fix sign so the largest-magnitude loading is positive
        double best = 0;
        std::size_t best_i = 0;
        for (std::size_t i = 0; i < x.cols; ++i)
            if (std::abs(eig.eigenvectors.at(i, j)) > std::abs(best)) {
                best = eig.eigenvectors.at(i, j);
                best_i = i;
            }
        const double sign = eig.eigenvectors.at(best_i, j) < 0 ? -1.0 : 1.0;
        for (std::size_t i = 0; i < x.cols; ++i)
            res.components.at(i, j) = sign * eig.eigenvectors.at(i, j);
    }
    res.variance_ratio.resize(k);
    for (std::size_t j = 0; j < k; ++j)
        res.variance_ratio[j] = total > 0 ? std::max(0.0, res.explained_variance[j]) / total : 0.0;
    res.scores = matmul(centered, res.components);
    return res;
}

// ---------------------------------------------------------------------------
// correlations

struct CorrelationResult {
    std::vector<double> r; // per feature, in [-1, 1]; 0 for constant features
    std::vector<std::string> constant_features;
};

inline CorrelationResult feature_correlations(const DataMatrix& m,
                                              const std::vector<SafetyIndex>& labels) {
    const Matrix& x = m.values;
    if (x.rows < 3 || labels.size() != x.rows) throw EmptyInput("feature_correlations");
    double ly = 0;
    for (const auto& l : labels) ly += l.value;
    ly /= static_cast<double>(labels.size());
    double syy = 0;
    for (const auto& l : labels) syy += (l.value - ly) * (l.value - ly);

    CorrelationResult res;
    res.r.assign(x.cols, 0.0);
    for (std::size_t j = 0; j < x.cols; ++j) {
        double mx = 0;
        for (std::size_t i = 0; i < x.rows; ++i) mx += x.at(i, j);
        mx /= static_cast<double>(x.rows);
        double sxx = 0, sxy = 0;
        for (std::size_t i = 0; i < x.rows; ++i) {
            const double dx = x.at(i, j) - mx;
            sxx += dx * dx;
            sxy += dx * (labels[i].value - ly);
        }
        if (sxx == 0 || syy == 0) {
            res.constant_features.push_back(j < m.names.size() ? m.names[j]
                                                               : std::to_string(j));
            continue;
        }
        res.r[j] = sxy / std::sqrt(sxx * syy);
    }
    return res;
}

// ---------------------------------------------------------------------------
// dangerous-roads report

struct RoadReportRow {
    std::string road;
    double percent = 0;    // share of total normalized warning mass
    double avg_alerts = 0; // counted warnings per trip
};

inline std::vector<RoadReportRow> road_risk_report(const std::vector<LabeledEvent>& rows) {
    if (rows.empty()) throw EmptyInput("road_risk_report");
    // counted warnings and trips are road-level facts repeated on every row;
    // take the maximum seen to be robust to mixed counted/filler rows
    struct Acc {
        int count = 0;
        int trips = 1;
    };
    std::map<std::string, Acc> by_road;
    for (const auto& r : rows) {
        auto& acc = by_road[*r.event.road_name];
        acc.count = std::max(acc.count, r.raw_count);
        acc.trips = std::max(acc.trips, r.trips);
    }
    double total_mass = 0;
    for (const auto& [road, acc] : by_road)
        total_mass += static_cast<double>(acc.count) / acc.trips;

    std::vector<RoadReportRow> out;
    for (const auto& [road, acc] : by_road) {
        const double mass = static_cast<double>(acc.count) / acc.trips;
        out.push_back({road, 100.0 * mass / total_mass, mass});
    }
    std::sort(out.begin(), out.end(), [](const RoadReportRow& a, const RoadReportRow& b) {
        return a.percent != b.percent ? a.percent > b.percent : a.road < b.road;
    });
    return out;
}

// ---------------------------------------------------------------------------
// SVG biplot (paths + text only)

inline void write_biplot_svg(const std::string& path, const PcaResult& p) {
    if (p.components.cols < 2) throw KTooLarge();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write svg file: " + path);
    const int W = 640, H = 640, cx = W / 2, cy = H / 2;
    const double scale = 260.0;
    double maxload = 1e-9;
    for (std::size_t i = 0; i < p.components.rows; ++i)
        for (std::size_t j = 0; j < 2; ++j)
            maxload = std::max(maxload, std::abs(p.components.at(i, j)));

    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\""
        << H << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
    out << "<path d=\"M 20 " << cy << " L " << W - 20 << " " << cy
        << "\" stroke=\"#999\" stroke-width=\"1\"/>\n";
    out << "<path d=\"M " << cx << " 20 L " << cx << " " << H - 20
        << "\" stroke=\"#999\" stroke-width=\"1\"/>\n";
    char buf[256];
    for (std::size_t i = 0; i < p.components.rows; ++i) {
        const double x = cx + scale * p.components.at(i, 0) / maxload;
        const double y = cy - scale * p.components.at(i, 1) / maxload;
        std::snprintf(buf, sizeof(buf),
                      "<path d=\"M %d %d L %.2f %.2f\" stroke=\"#2266cc\" "
                      "stroke-width=\"1.5\"/>\n",
                      cx, cy, x, y);
        out << buf;
        const std::string name = i < p.names.size() ? p.names[i] : std::to_string(i);
        std::snprintf(buf, sizeof(buf),
                      "<text x=\"%.2f\" y=\"%.2f\" font-size=\"11\" fill=\"#333\">%s</text>\n",
                      x + 3, y - 3, name.c_str());
        out << buf;
    }
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"24\" y=\"%d\" font-size=\"12\" fill=\"#555\">PC1 (%.1f%%)</text>\n",
                  cy - 8, 100.0 * p.variance_ratio[0]);
    out << buf;
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"%d\" y=\"34\" font-size=\"12\" fill=\"#555\">PC2 (%.1f%%)</text>\n",
                  cx + 8, 100.0 * p.variance_ratio[1]);
    out << buf;
    out << "</svg>\n";
}

} // namespace roadsafe
