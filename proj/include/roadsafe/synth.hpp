// synth.hpp - schema-compatible synthetic alert data with planted structure
//
// Spatial plant: each road is a short disjoint segment whose event count per
// trip equals a fixed per-danger value, so the density pipeline recovers the
// planted 1-5 level exactly when per-class event masses are equal.
//
// Sequential plant: consecutive speeds follow an AR(1) process whose
// coefficient depends on the danger level while the per-event speed marginal
// stays (almost) class-independent. Sequence models can read the transition
// statistics; per-event models only see the weak marginal shift.
#pragma once

#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "roadsafe/data_model.hpp"
#include "roadsafe/enrich.hpp"
#include "roadsafe/rng.hpp"

namespace roadsafe {

struct InvalidConfig : Error {
    explicit InvalidConfig(const std::string& why) : Error("invalid synth config: " + why) {}
};

struct RoadSpec {
    int danger = 1; // 1..5
    int sessions = 1;
    int events_per_session = 1; // counted alarm types (HMW/PCW/FCW)
};

struct SynthConfig {
    std::uint64_t seed = 42;
    std::vector<RoadSpec> roads;
    int buses = 9;
    std::string start_date = "2019-03-01";
    double feature_noise = 1.0;  // scales weather spread and speed sigma
    double sigma_seq = 0.2;      // AR(1) coefficient step per danger level
    double marginal_shift = 0.75; // speed mean shift per danger level, km/h
    double speed_mean = 45.0;
    double speed_sigma = 8.0;
    // > 0: draw each (cell, date) weather from a shared library of this many
    // regimes instead of fresh values, so weather repeats across sessions
    int weather_regimes = 0;
    // > 0: pad every session with non-counted alarms (STOPPAGE/HB) up to this
    // many events, so session length carries no label information
    int total_events_per_session = 0;

    void validate() const {
        if (roads.empty()) throw InvalidConfig("no roads");
        if (buses <= 0) throw InvalidConfig("buses must be positive");
        bool seen[6] = {};
        for (const auto& r : roads) {
            if (r.danger < 1 || r.danger > 5) throw InvalidConfig("danger out of range");
            if (r.sessions <= 0 || r.events_per_session <= 0)
                throw InvalidConfig("counts must be positive");
            if (total_events_per_session > 0 &&
                total_events_per_session < r.events_per_session)
                throw InvalidConfig("total_events_per_session below counted events");
            seen[r.danger] = true;
        }
        for (int d = 1; d <= 5; ++d)
            if (!seen[d]) throw InvalidConfig("danger level " + std::to_string(d) + " missing");
    }

    // Equal event mass per class (roads, sessions and total events per
    // session all constant across classes) so quintile binning recovers the
    // plant exactly; only the counted-alarm share varies with danger.
    static SynthConfig benchmark_default() {
        SynthConfig c;
        const int counted_per_class[5] = {8, 10, 12, 15, 20};
        for (int d = 1; d <= 5; ++d)
            for (int r = 0; r < 8; ++r) c.roads.push_back({d, 30, counted_per_class[d - 1]});
        c.weather_regimes = 15;
        c.total_events_per_session = 20;
        return c;
    }

    // One road per danger level with equal event mass; used to demonstrate
    // exact rank recovery of the plant.
    static SynthConfig five_roads() {
        SynthConfig c;
        const int events[5] = {10, 12, 15, 20, 30};
        const int sessions[5] = {6, 5, 4, 3, 2};
        for (int d = 1; d <= 5; ++d) c.roads.push_back({d, sessions[d - 1], events[d - 1]});
        return c;
    }
};

struct SynthData {
    std::vector<AlertEvent> events; // raw, un-enriched, file order
    nlohmann::json fixtures;        // FixtureClient input
    nlohmann::json truth;           // planted danger per road and session
};

inline SynthData generate(const SynthConfig& cfg) {
    cfg.validate();
    auto start = Timestamp::parse(cfg.start_date + "T00:00:00Z");
    if (!start) throw InvalidConfig("bad start_date");

    Rng rng = Rng::substream(cfg.seed, "synth");
    SynthData out;
    out.fixtures["weather"] = nlohmann::json::object();
    out.fixtures["altitude"] = nlohmann::json::object();
    out.fixtures["road"] = nlohmann::json::object();
    out.truth["roads"] = nlohmann::json::object();
    out.truth["sessions"] = nlohmann::json::object();

    const double fn = cfg.feature_noise;
    static const AlarmType counted[3] = {AlarmType::HMW, AlarmType::PCW, AlarmType::FCW};

    auto draw_weather = [fn](Rng& r) {
        nlohmann::json w;
        w["tempC"] = r.normal(25.0, 5.0 * fn);
        w["humidity"] = std::clamp(r.normal(60.0, 15.0 * fn), 0.0, 100.0);
        w["precipMM"] = std::max(0.0, r.normal(2.0, 3.0 * fn));
        w["visibility"] = std::max(0.5, r.normal(10.0, 2.0 * fn));
        w["windspeedKmph"] = std::max(0.0, r.normal(12.0, 5.0 * fn));
        w["pressure"] = r.normal(1010.0, 6.0 * fn);
        w["cloudcover"] = std::clamp(r.normal(50.0, 25.0 * fn), 0.0, 100.0);
        w["DewPointC"] = r.normal(15.0, 4.0 * fn);
        w["sunHour"] = std::clamp(r.normal(8.0, 2.0 * fn), 0.0, 14.0);
        w["uvIndex"] = std::clamp(r.normal(5.0, 2.0 * fn), 0.0, 11.0);
        w["winddirDegree"] = r.uniform(0.0, 360.0);
        return w;
    };
    std::vector<nlohmann::json> regimes;
    if (cfg.weather_regimes > 0) {
        Rng wrng = Rng::substream(cfg.seed, "weather_regimes");
        for (int i = 0; i < cfg.weather_regimes; ++i) regimes.push_back(draw_weather(wrng));
    }

    for (std::size_t ri = 0; ri < cfg.roads.size(); ++ri) {
        const RoadSpec& road = cfg.roads[ri];
        char namebuf[16];
        std::snprintf(namebuf, sizeof(namebuf), "SR-%02zu", ri + 1);
        const std::string road_name = namebuf;
        // disjoint 2 km segments, one per 0.1-degree cell; events stay on the
        // central kilometer so every pair is within the 1 km density radius
        const double base_lat = 8.0 + 0.6 * static_cast<double>(ri);
        const double base_lon = 77.0;
        const std::string cell = cache_cell(base_lat, base_lon);

        out.truth["roads"][road_name] = road.danger;
        out.fixtures["road"][cell] = road_name;
        out.fixtures["altitude"][cell] = 800.0; // flat fixture grid

        const double mu = cfg.speed_mean + cfg.marginal_shift * (road.danger - 3);
        const double sigma = std::max(0.1, cfg.speed_sigma * fn);
        const double ar = std::clamp(0.45 + cfg.sigma_seq * (road.danger - 3), 0.0, 0.97);

        for (int s = 0; s < road.sessions; ++s) {
            const std::string bus = "bus" + std::to_string(s % cfg.buses + 1);
            Timestamp day{start->epoch_s + static_cast<std::int64_t>(s) * 86400};
            const std::string date = day.date();

            const std::string wkey = weather_key(base_lat, base_lon, date);
            if (!out.fixtures["weather"].contains(wkey)) {
                out.fixtures["weather"][wkey] =
                    regimes.empty()
                        ? draw_weather(rng)
                        : regimes[static_cast<std::size_t>(
                              rng.uniform_int(0, cfg.weather_regimes - 1))];
            }
            out.truth["sessions"][bus + "|" + road_name + "|" + date] = road.danger;

            const int total = std::max(road.events_per_session, cfg.total_events_per_session);
            std::vector<bool> is_counted(total, false);
            {
                std::vector<std::size_t> pos(total);
                for (int i = 0; i < total; ++i) pos[i] = static_cast<std::size_t>(i);
                rng.shuffle(pos);
                for (int i = 0; i < road.events_per_session; ++i) is_counted[pos[i]] = true;
            }
            static const AlarmType filler[2] = {AlarmType::STOPPAGE, AlarmType::HB};

            std::int64_t t = day.epoch_s + 3600 * rng.uniform_int(6, 18);
            double speed = mu + sigma * rng.normal();
            for (int e = 0; e < total; ++e) {
                if (e > 0) {
                    t += 60 * rng.uniform_int(1, 10);
                    // AR(1) with class-independent stationary marginal
                    speed = mu + ar * (speed - mu) +
                            sigma * std::sqrt(1.0 - ar * ar) * rng.normal();
                }
                AlertEvent ev;
                ev.device_id = bus;
                ev.alarm_type = is_counted[e] ? counted[rng.uniform_int(0, 2)]
                                              : filler[rng.uniform_int(0, 1)];
                ev.timestamp = Timestamp{t};
                ev.latitude = base_lat + rng.uniform(-0.0005, 0.0005);
                ev.longitude = base_lon + rng.uniform(0.0, 0.009);
                ev.speed = std::max(0.0, speed);
                out.events.push_back(std::move(ev));
            }
        }
    }

    nlohmann::json cj;
    cj["seed"] = cfg.seed;
    cj["sigma_seq"] = cfg.sigma_seq;
    cj["marginal_shift"] = cfg.marginal_shift;
    cj["feature_noise"] = cfg.feature_noise;
    out.truth["config"] = std::move(cj);
    return out;
}

inline void write_synth(const SynthData& data, const std::string& csv_path,
                        const std::string& fixtures_path, const std::string& truth_path) {
    write_alert_csv(csv_path, data.events, false);
    std::ofstream fx(fixtures_path, std::ios::binary);
    if (!fx) throw Error("cannot write fixtures: " + fixtures_path);
    fx << data.fixtures.dump(1) << '\n';
    std::ofstream tr(truth_path, std::ios::binary);
    if (!tr) throw Error("cannot write truth sidecar: " + truth_path);
    tr << data.truth.dump(1) << '\n';
}

} // namespace roadsafe
