// enrich.hpp - weather/altitude/road-name enrichment with offline fixtures
// and a persistent response cache. A cache hit never reaches the client, so
// the whole pipeline runs hermetically from fixture files.
#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "roadsafe/data_model.hpp"

namespace roadsafe {

struct ClientError : Error {
    ClientError(const std::string& query, const std::string& cause)
        : Error("enrichment client failed for " + query + ": " + cause) {}
};

// Weather is regional: coordinates are rounded to 0.1 degrees (~11 km) before
// they become cache/fixture keys, which bounds external query volume.
inline std::string cache_cell(double lat, double lon) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.1f,%.1f", std::round(lat * 10.0) / 10.0,
                  std::round(lon * 10.0) / 10.0);
    return buf;
}

inline std::string weather_key(double lat, double lon, const std::string& date) {
    return cache_cell(lat, lon) + "," + date;
}

// ---------------------------------------------------------------------------
// client interface

class EnrichmentClient {
public:
    virtual ~EnrichmentClient() = default;
    virtual WeatherRecord weather_at(double lat, double lon, const std::string& date) = 0;
    virtual double altitude_at(double lat, double lon) = 0;
    virtual std::string road_name_at(double lat, double lon) = 0;
};

// Offline client backed by a fixture JSON file of the shape
//   {"weather": {"12.9,77.6,2019-03-02": {...}},
//    "altitude": {"12.9,77.6": 820.0},
//    "road": {"12.9,77.6": "NH44"}}
class FixtureClient : public EnrichmentClient {
public:
    explicit FixtureClient(nlohmann::json fixtures) : fx_(std::move(fixtures)) {}

    static FixtureClient from_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw Error("cannot open fixture file: " + path);
        nlohmann::json j;
        in >> j;
        return FixtureClient(std::move(j));
    }

    WeatherRecord weather_at(double lat, double lon, const std::string& date) override {
        auto key = weather_key(lat, lon, date);
        auto& sect = fx_["weather"];
        if (!sect.contains(key)) throw ClientError("weather " + key, "no fixture");
        WeatherRecord w;
        for (auto& [name, val] : sect[key].items())
            set_weather_field(w, name, val.get<double>());
        return w;
    }

    double altitude_at(double lat, double lon) override {
        auto key = cache_cell(lat, lon);
        auto& sect = fx_["altitude"];
        if (!sect.contains(key)) throw ClientError("altitude " + key, "no fixture");
        return sect[key].get<double>();
    }

    std::string road_name_at(double lat, double lon) override {
        auto key = cache_cell(lat, lon);
        auto& sect = fx_["road"];
        if (!sect.contains(key)) throw ClientError("road " + key, "no fixture");
        return sect[key].get<std::string>();
    }

private:
    nlohmann::json fx_;
};

// ---------------------------------------------------------------------------
// persistent cache (append-friendly JSON-lines file)

class EnrichmentCache {
public:
    std::optional<WeatherRecord> weather(const std::string& key) const {
        auto it = weather_.find(key);
        if (it == weather_.end()) return std::nullopt;
        WeatherRecord w;
        for (auto& [name, val] : it->second.items())
            set_weather_field(w, name, val.get<double>());
        return w;
    }
    std::optional<double> altitude(const std::string& key) const {
        auto it = altitude_.find(key);
        return it == altitude_.end() ? std::nullopt : std::optional(it->second);
    }
    std::optional<std::string> road(const std::string& key) const {
        auto it = road_.find(key);
        return it == road_.end() ? std::nullopt : std::optional(it->second);
    }

    void put_weather(const std::string& key, const WeatherRecord& w) {
        nlohmann::json j;
        for (const char* f : weather_field_names()) j[f] = weather_field(w, f);
        weather_[key] = std::move(j);
    }
    void put_altitude(const std::string& key, double v) { altitude_[key] = v; }
    void put_road(const std::string& key, const std::string& v) { road_[key] = v; }

    std::size_t size() const { return weather_.size() + altitude_.size() + road_.size(); }

    void save(const std::string& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw Error("cannot write cache file: " + path);
        for (const auto& [k, v] : weather_)
            out << nlohmann::json{{"kind", "weather"}, {"key", k}, {"value", v}}.dump() << '\n';
        for (const auto& [k, v] : altitude_)
            out << nlohmann::json{{"kind", "altitude"}, {"key", k}, {"value", v}}.dump() << '\n';
        for (const auto& [k, v] : road_)
            out << nlohmann::json{{"kind", "road"}, {"key", k}, {"value", v}}.dump() << '\n';
    }

    static EnrichmentCache load(const std::string& path) {
        EnrichmentCache c;
        std::ifstream in(path);
        if (!in) return c; // absent cache file is an empty cache
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            auto j = nlohmann::json::parse(line);
            const std::string kind = j.at("kind");
            const std::string key = j.at("key");
            if (kind == "weather") c.weather_[key] = j.at("value");
            else if (kind == "altitude") c.altitude_[key] = j.at("value").get<double>();
            else if (kind == "road") c.road_[key] = j.at("value").get<std::string>();
        }
        return c;
    }

    bool operator==(const EnrichmentCache& o) const {
        return weather_ == o.weather_ && altitude_ == o.altitude_ && road_ == o.road_;
    }

private:
    std::map<std::string, nlohmann::json> weather_;
    std::map<std::string, double> altitude_;
    std::map<std::string, std::string> road_;
};

// ---------------------------------------------------------------------------
// enrichment

struct RejectedEvent {
    AlertEvent event;
    std::string reason;
};

struct EnrichResult {
    std::vector<AlertEvent> enriched;
    std::vector<RejectedEvent> rejected;
};

// Fills weather, altitude and road name for every event. Already-populated
// fields are left untouched (idempotent). Events whose lookups fail land in
// the rejected list; the cache only absorbs successful responses.
inline EnrichResult enrich_events(const std::vector<AlertEvent>& events,
                                  EnrichmentClient& client, EnrichmentCache& cache) {
    EnrichResult res;
    for (const auto& ev : events) {
        AlertEvent e = ev;
        try {
            const std::string cell = cache_cell(e.latitude, e.longitude);
            if (!e.weather) {
                const std::string wk = weather_key(e.latitude, e.longitude, e.timestamp.date());
                auto hit = cache.weather(wk);
                if (!hit) {
                    hit = client.weather_at(e.latitude, e.longitude, e.timestamp.date());
                    cache.put_weather(wk, *hit);
                }
                e.weather = *hit;
            }
            if (!e.altitude) {
                auto hit = cache.altitude(cell);
                if (!hit) {
                    hit = client.altitude_at(e.latitude, e.longitude);
                    cache.put_altitude(cell, *hit);
                }
                e.altitude = *hit;
            }
            if (!e.road_name) {
                auto hit = cache.road(cell);
                if (!hit) {
                    hit = client.road_name_at(e.latitude, e.longitude);
                    cache.put_road(cell, *hit);
                }
                // '|' is the SessionId separator; it cannot survive in a road name
                std::string road = *hit;
                for (char& c : road)
                    if (c == '|') c = '/';
                e.road_name = road;
            }
            res.enriched.push_back(std::move(e));
        } catch (const std::exception& ex) {
            res.rejected.push_back({ev, ex.what()});
        }
    }
    return res;
}

// ---------------------------------------------------------------------------
// feature vectors

struct MissingEnrichment : Error {
    explicit MissingEnrichment(const std::string& field)
        : Error("missing enrichment field: " + field) {}
};

// The default 14-dimensional time/weather/location feature order.
// Configurable; dimension 14 is the contract the models are built around.
inline const std::vector<std::string>& default_feature_order() {
    static const std::vector<std::string> order = {
        "hour", "speed", "altitude", "tempC", "humidity", "precipMM",
        "visibility", "windspeedKmph", "pressure", "cloudcover", "DewPointC",
        "sunHour", "uvIndex", "winddirDegree"};
    return order;
}

inline std::vector<double> build_feature_vector(
    const AlertEvent& e, const std::vector<std::string>& order = default_feature_order()) {
    std::vector<double> v;
    v.reserve(order.size());
    for (const auto& name : order) {
        double x;
        if (name == "hour") {
            x = static_cast<double>(e.timestamp.hour());
        } else if (name == "speed") {
            x = e.speed;
        } else if (name == "altitude") {
            if (!e.altitude) throw MissingEnrichment("altitude");
            x = *e.altitude;
        } else {
            if (!e.weather) throw MissingEnrichment("weather");
            x = weather_field(*e.weather, name);
        }
        if (!std::isfinite(x)) throw Error("non-finite feature value: " + name);
        v.push_back(x);
    }
    return v;
}

} // namespace roadsafe
