// geo_safety.hpp - great-circle distances, warning concentrations and the
// 1-5 Safety Index.
//
// Density for an event = warnings of counted alarm types within 1 km
// (self inclusive), normalized by the road's trip count. Index binning is
// log1p followed by equal-frequency quintiles over the training corpus.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "roadsafe/data_model.hpp"

namespace roadsafe {

struct EmptyInput : Error {
    explicit EmptyInput(const std::string& where) : Error(where + ": empty input") {}
};

inline constexpr double kEarthRadiusKm = 6371.0;

inline double haversine_km(double lat1, double lon1, double lat2, double lon2) {
    const double rad = M_PI / 180.0;
    const double phi1 = lat1 * rad, phi2 = lat2 * rad;
    const double dphi = (lat2 - lat1) * rad;
    const double dlam = (lon2 - lon1) * rad;
    const double sp = std::sin(dphi / 2.0), sl = std::sin(dlam / 2.0);
    const double h = sp * sp + std::cos(phi1) * std::cos(phi2) * sl * sl;
    return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(h)));
}

// ---------------------------------------------------------------------------
// warning density

struct LocationDensity {
    std::size_t event_index = 0; // index into the input event list
    int raw_count = 0;           // counted warnings within radius (self included
                                 // when the event itself is a counted type)
    int trips = 0;               // distinct (device, date) visits to this road
    double normalized_density = 0;
};

using AlarmSet = std::set<AlarmType>;

inline AlarmSet default_counted_alarms() {
    return {AlarmType::HMW, AlarmType::PCW, AlarmType::FCW};
}

// O(n^2) brute-force pass; this is the reference algorithm. Every event
// location gets a density record, but only counted alarm types contribute
// to the warning count.
inline std::vector<LocationDensity> warning_density(
    const std::vector<AlertEvent>& events, double radius_km = 1.0,
    const AlarmSet& counted = default_counted_alarms()) {
    if (events.empty()) throw EmptyInput("warning_density");

    std::vector<std::size_t> counted_idx;
    for (std::size_t i = 0; i < events.size(); ++i)
        if (counted.count(events[i].alarm_type)) counted_idx.push_back(i);

    // trips per road: distinct (device, date) pairs among all events of a road
    std::map<std::string, std::set<std::pair<std::string, std::string>>> visits;
    for (const auto& e : events) {
        if (!e.road_name) throw MissingRoadName();
        visits[*e.road_name].insert({e.device_id, e.timestamp.date()});
    }

    std::vector<LocationDensity> out;
    out.reserve(events.size());
    for (std::size_t i = 0; i < events.size(); ++i) {
        const auto& ei = events[i];
        int cnt = 0;
        for (std::size_t j : counted_idx) {
            const auto& ej = events[j];
            if (haversine_km(ei.latitude, ei.longitude, ej.latitude, ej.longitude) <=
                radius_km)
                ++cnt;
        }
        int trips = static_cast<int>(visits[*ei.road_name].size());
        out.push_back({i, cnt, trips, static_cast<double>(cnt) / trips});
    }
    return out;
}

// ---------------------------------------------------------------------------
// index binning

struct SafetyIndex {
    int value = 1; // 1..5, 5 = most accident-prone
    auto operator<=>(const SafetyIndex&) const = default;
};

struct IndexBinning {
    // 20/40/60/80 nearest-rank percentiles of ln(1 + normalized_density)
    std::array<double, 4> edges{};

    nlohmann::json to_json() const {
        return {{"transform", "log1p"},
                {"binning", "nearest-rank quintiles"},
                {"edges", edges}};
    }
    static IndexBinning from_json(const nlohmann::json& j) {
        IndexBinning b;
        for (int i = 0; i < 4; ++i) b.edges[i] = j.at("edges")[i].get<double>();
        return b;
    }
};

inline IndexBinning fit_index_binning(const std::vector<LocationDensity>& densities) {
    if (densities.empty()) throw EmptyInput("fit_index_binning");
    std::vector<double> t;
    t.reserve(densities.size());
    for (const auto& d : densities) t.push_back(std::log1p(d.normalized_density));
    std::sort(t.begin(), t.end());
    const std::size_t n = t.size();
    IndexBinning b;
    for (int k = 1; k <= 4; ++k) {
        // nearest-rank: value at ceil(p*n), 1-based
        std::size_t rank = (k * n + 4) / 5; // ceil(k*0.2*n)
        if (rank < 1) rank = 1;
        b.edges[k - 1] = t[rank - 1];
    }
    return b;
}

// Ties fall to the lower bin: index = 1 + #{edges strictly below t}.
inline SafetyIndex assign_safety_index(const LocationDensity& d, const IndexBinning& b) {
    const double t = std::log1p(d.normalized_density);
    int idx = 1;
    for (double e : b.edges)
        if (e < t) ++idx;
    return SafetyIndex{idx};
}

inline SafetyIndex session_label(const std::vector<SafetyIndex>& indices) {
    if (indices.empty()) throw EmptyInput("session_label");
    SafetyIndex m = indices[0];
    for (const auto& i : indices) m = std::max(m, i);
    return m;
}

inline int binary_label(SafetyIndex s, int threshold = 3) {
    return s.value >= threshold ? 1 : 0;
}

// ---------------------------------------------------------------------------
// labeled events (output of the `label` stage)

struct LabeledEvent {
    AlertEvent event;
    int raw_count = 0;
    int trips = 0;
    double density = 0;
    int safety_index = 1;
};

inline std::vector<LabeledEvent> label_events(const std::vector<AlertEvent>& events,
                                              const std::vector<LocationDensity>& densities,
                                              const IndexBinning& binning) {
    std::vector<LabeledEvent> out;
    out.reserve(densities.size());
    for (const auto& d : densities) {
        LabeledEvent le;
        le.event = events[d.event_index];
        le.raw_count = d.raw_count;
        le.trips = d.trips;
        le.density = d.normalized_density;
        le.safety_index = assign_safety_index(d, binning).value;
        out.push_back(std::move(le));
    }
    return out;
}

inline void write_labeled_csv(const std::string& path, const std::vector<LabeledEvent>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write csv file: " + path);
    out << "deviceId,alarmType,recordedAt,latitude,longitude,speed,altitude,roadName";
    for (const char* f : weather_field_names()) out << ',' << f;
    out << ",raw_count,trips,density,safety_index\n";
    for (const auto& r : rows) {
        const auto& e = r.event;
        if (!e.enriched()) throw Error("write_labeled_csv: event not enriched");
        out << detail::csv_escape(e.device_id) << ',' << alarm_type_name(e.alarm_type)
            << ',' << e.timestamp.to_iso() << ',' << detail::fmt_double(e.latitude)
            << ',' << detail::fmt_double(e.longitude) << ',' << detail::fmt_double(e.speed)
            << ',' << detail::fmt_double(*e.altitude) << ',' << detail::csv_escape(*e.road_name);
        for (const char* f : weather_field_names())
            out << ',' << detail::fmt_double(weather_field(*e.weather, f));
        out << ',' << r.raw_count << ',' << r.trips << ',' << detail::fmt_double(r.density)
            << ',' << r.safety_index << '\n';
    }
}

inline std::vector<LabeledEvent> read_labeled_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open csv file: " + path);
    std::string header;
    if (!std::getline(in, header)) throw EmptyFile(path);
    auto cols = detail::split_csv_line(header);
    std::map<std::string, std::size_t> idx;
    for (std::size_t i = 0; i < cols.size(); ++i) idx[cols[i]] = i;
    auto need = [&](const std::string& c) {
        auto it = idx.find(c);
        if (it == idx.end()) throw MissingColumn(c);
        return it->second;
    };
    std::size_t ci_dev = need("deviceId"), ci_alarm = need("alarmType"),
                ci_ts = need("recordedAt"), ci_lat = need("latitude"),
                ci_lon = need("longitude"), ci_speed = need("speed"),
                ci_alt = need("altitude"), ci_road = need("roadName"),
                ci_rc = need("raw_count"), ci_tr = need("trips"),
                ci_de = need("density"), ci_si = need("safety_index");
    std::vector<std::size_t> ci_w;
    for (const char* f : weather_field_names()) ci_w.push_back(need(f));

    std::vector<LabeledEvent> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        auto fields = detail::split_csv_line(line);
        LabeledEvent r;
        AlertEvent& e = r.event;
        e.device_id = fields[ci_dev];
        e.alarm_type = *parse_alarm_type(fields[ci_alarm]);
        e.timestamp = *Timestamp::parse(fields[ci_ts]);
        double alt;
        detail::parse_double(fields[ci_lat], e.latitude);
        detail::parse_double(fields[ci_lon], e.longitude);
        detail::parse_double(fields[ci_speed], e.speed);
        detail::parse_double(fields[ci_alt], alt);
        e.altitude = alt;
        e.road_name = fields[ci_road];
        WeatherRecord w;
        for (std::size_t k = 0; k < ci_w.size(); ++k) {
            double v;
            detail::parse_double(fields[ci_w[k]], v);
            set_weather_field(w, weather_field_names()[k], v);
        }
        e.weather = w;
        r.raw_count = std::stoi(fields[ci_rc]);
        r.trips = std::stoi(fields[ci_tr]);
        detail::parse_double(fields[ci_de], r.density);
        r.safety_index = std::stoi(fields[ci_si]);
        rows.push_back(std::move(r));
    }
    return rows;
}

} // namespace roadsafe
