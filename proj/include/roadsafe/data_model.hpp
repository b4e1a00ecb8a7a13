// data_model.hpp - canonical alert-event schema, CSV ingestion, session ids
#pragma once

#include <array>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "roadsafe/common.hpp"

namespace roadsafe {

// ---------------------------------------------------------------------------
// alarm types

enum class AlarmType { HMW, PCW, FCW, STOPPAGE, HB };

inline const char* alarm_type_name(AlarmType t) {
    switch (t) {
        case AlarmType::HMW: return "HMW";
        case AlarmType::PCW: return "PCW";
        case AlarmType::FCW: return "FCW";
        case AlarmType::STOPPAGE: return "STOPPAGE";
        case AlarmType::HB: return "HB";
    }
    return "?";
}

inline std::optional<AlarmType> parse_alarm_type(std::string_view s) {
    if (s == "HMW") return AlarmType::HMW;
    if (s == "PCW") return AlarmType::PCW;
    if (s == "FCW") return AlarmType::FCW;
    if (s == "STOPPAGE") return AlarmType::STOPPAGE;
    if (s == "HB") return AlarmType::HB;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// timestamps (UTC, second resolution, ISO-8601 round-trip)

namespace detail {

// Howard Hinnant's civil-date algorithms.
inline std::int64_t days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

inline void civil_from_days(std::int64_t z, int& y, int& m, int& d) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    y = static_cast<int>(yoe) + static_cast<int>(era) * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
    m = static_cast<int>(mp + (mp < 10 ? 3 : -9));
    y += m <= 2;
}

inline bool parse_int(std::string_view s, int& out) {
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && p == s.data() + s.size();
}

} // namespace detail

struct Timestamp {
    std::int64_t epoch_s = 0; // seconds since Unix epoch, UTC

    int hour() const {
        std::int64_t sod = ((epoch_s % 86400) + 86400) % 86400;
        return static_cast<int>(sod / 3600);
    }

    // calendar date, YYYY-MM-DD
    std::string date() const {
        std::int64_t days = epoch_s / 86400;
        if (epoch_s % 86400 < 0) --days;
        int y, m, d;
        detail::civil_from_days(days, y, m, d);
        char buf[16];
        std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", y, m, d);
        return buf;
    }

    std::string to_iso() const {
        std::int64_t days = epoch_s / 86400;
        std::int64_t sod = epoch_s % 86400;
        if (sod < 0) { sod += 86400; --days; }
        int y, m, d;
        detail::civil_from_days(days, y, m, d);
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02lld:%02lld:%02lldZ",
                      y, m, d, static_cast<long long>(sod / 3600),
                      static_cast<long long>((sod / 60) % 60),
                      static_cast<long long>(sod % 60));
        return buf;
    }

    // Accepts YYYY-MM-DDTHH:MM:SS followed by 'Z', '+hh:mm' or '-hh:mm'.
    // A bare local time (no suffix) is shifted by utc_offset_s.
    static std::optional<Timestamp> parse(std::string_view s, int utc_offset_s = 0) {
        if (s.size() < 19) return std::nullopt;
        int y, mo, d, h, mi, se;
        if (!detail::parse_int(s.substr(0, 4), y) || s[4] != '-' ||
            !detail::parse_int(s.substr(5, 2), mo) || s[7] != '-' ||
            !detail::parse_int(s.substr(8, 2), d) || (s[10] != 'T' && s[10] != ' ') ||
            !detail::parse_int(s.substr(11, 2), h) || s[13] != ':' ||
            !detail::parse_int(s.substr(14, 2), mi) || s[16] != ':' ||
            !detail::parse_int(s.substr(17, 2), se))
            return std::nullopt;
        if (mo < 1 || mo > 12 || d < 1 || d > 31 || h > 23 || mi > 59 || se > 60)
            return std::nullopt;
        int offset = utc_offset_s;
        std::string_view rest = s.substr(19);
        if (rest == "Z") {
            offset = 0;
        } else if (rest.size() == 6 && (rest[0] == '+' || rest[0] == '-') && rest[3] == ':') {
            int oh, om;
            if (!detail::parse_int(rest.substr(1, 2), oh) ||
                !detail::parse_int(rest.substr(4, 2), om))
                return std::nullopt;
            offset = (oh * 3600 + om * 60) * (rest[0] == '+' ? 1 : -1);
        } else if (!rest.empty()) {
            return std::nullopt;
        }
        Timestamp t;
        t.epoch_s = detail::days_from_civil(y, mo, d) * 86400 + h * 3600 + mi * 60 + se - offset;
        return t;
    }

    auto operator<=>(const Timestamp&) const = default;
};

// ---------------------------------------------------------------------------
// events

struct WeatherRecord {
    double tempC = 0, humidity = 0, precipMM = 0, visibility = 0,
           windspeedKmph = 0, pressure = 0, cloudcover = 0, DewPointC = 0,
           sunHour = 0, uvIndex = 0, winddirDegree = 0;

    bool valid() const {
        return humidity >= 0 && humidity <= 100 && cloudcover >= 0 &&
               cloudcover <= 100 && precipMM >= 0 && visibility >= 0;
    }
};

inline const std::array<const char*, 11>& weather_field_names() {
    static const std::array<const char*, 11> names = {
        "tempC", "humidity", "precipMM", "visibility", "windspeedKmph",
        "pressure", "cloudcover", "DewPointC", "sunHour", "uvIndex",
        "winddirDegree"};
    return names;
}

inline double weather_field(const WeatherRecord& w, std::string_view name) {
    if (name == "tempC") return w.tempC;
    if (name == "humidity") return w.humidity;
    if (name == "precipMM") return w.precipMM;
    if (name == "visibility") return w.visibility;
    if (name == "windspeedKmph") return w.windspeedKmph;
    if (name == "pressure") return w.pressure;
    if (name == "cloudcover") return w.cloudcover;
    if (name == "DewPointC") return w.DewPointC;
    if (name == "sunHour") return w.sunHour;
    if (name == "uvIndex") return w.uvIndex;
    if (name == "winddirDegree") return w.winddirDegree;
    throw Error("unknown weather field: " + std::string(name));
}

inline void set_weather_field(WeatherRecord& w, std::string_view name, double v) {
    if (name == "tempC") w.tempC = v;
    else if (name == "humidity") w.humidity = v;
    else if (name == "precipMM") w.precipMM = v;
    else if (name == "visibility") w.visibility = v;
    else if (name == "windspeedKmph") w.windspeedKmph = v;
    else if (name == "pressure") w.pressure = v;
    else if (name == "cloudcover") w.cloudcover = v;
    else if (name == "DewPointC") w.DewPointC = v;
    else if (name == "sunHour") w.sunHour = v;
    else if (name == "uvIndex") w.uvIndex = v;
    else if (name == "winddirDegree") w.winddirDegree = v;
    else throw Error("unknown weather field: " + std::string(name));
}

struct AlertEvent {
    std::string device_id;
    AlarmType alarm_type = AlarmType::HMW;
    Timestamp timestamp;
    double latitude = 0;
    double longitude = 0;
    double speed = 0;
    std::optional<double> altitude;
    std::optional<std::string> road_name;
    std::optional<WeatherRecord> weather;

    bool enriched() const {
        return altitude.has_value() && road_name.has_value() && weather.has_value();
    }
};

// ---------------------------------------------------------------------------
// session identity

struct MissingRoadName : Error {
    MissingRoadName() : Error("event has no road name; enrich first") {}
};

struct SessionId {
    std::string device_id;
    std::string road_name;
    std::string date; // YYYY-MM-DD

    std::string render() const { return device_id + "|" + road_name + "|" + date; }

    static std::optional<SessionId> parse(std::string_view s) {
        auto p1 = s.find('|');
        if (p1 == std::string_view::npos) return std::nullopt;
        auto p2 = s.find('|', p1 + 1);
        if (p2 == std::string_view::npos) return std::nullopt;
        if (s.find('|', p2 + 1) != std::string_view::npos) return std::nullopt;
        SessionId id;
        id.device_id = std::string(s.substr(0, p1));
        id.road_name = std::string(s.substr(p1 + 1, p2 - p1 - 1));
        id.date = std::string(s.substr(p2 + 1));
        return id;
    }

    auto operator<=>(const SessionId&) const = default;
};

inline SessionId make_session_id(const AlertEvent& e) {
    if (!e.road_name) throw MissingRoadName();
    return SessionId{e.device_id, *e.road_name, e.timestamp.date()};
}

// ---------------------------------------------------------------------------
// CSV ingestion

struct MissingColumn : Error {
    explicit MissingColumn(const std::string& name) : Error("missing column: " + name) {}
};
struct EmptyFile : Error {
    explicit EmptyFile(const std::string& path) : Error("empty csv file: " + path) {}
};

struct RowError {
    std::size_t line = 0; // 1-based file line
    std::string field;
    std::string raw;
    std::string message;
};

struct ParseResult {
    std::vector<AlertEvent> events;
    std::vector<RowError> errors;
};

// canonical field name -> column header in the file
using CsvSchema = std::map<std::string, std::string>;

inline CsvSchema default_csv_schema() {
    return {{"deviceId", "deviceId"},   {"alarmType", "alarmType"},
            {"recordedAt", "recordedAt"}, {"latitude", "latitude"},
            {"longitude", "longitude"}, {"speed", "speed"}};
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(cur));
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(std::move(cur));
    return out;
}

inline std::string csv_escape(std::string_view s) {
    if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

inline bool parse_double(std::string_view s, double& out) {
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && p == s.data() + s.size();
}

// shortest round-trip representation
inline std::string fmt_double(double v) {
    char buf[32];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, p);
}

} // namespace detail

inline ParseResult parse_alert_csv_stream(std::istream& in, const CsvSchema& schema,
                                          const std::string& origin = "<stream>",
                                          int utc_offset_s = 0) {
    std::string header;
    if (!std::getline(in, header)) throw EmptyFile(origin);
    auto cols = detail::split_csv_line(header);

    auto col_index = [&](const std::string& canonical) {
        auto it = schema.find(canonical);
        const std::string& name = it != schema.end() ? it->second : canonical;
        for (std::size_t i = 0; i < cols.size(); ++i)
            if (cols[i] == name) return i;
        throw MissingColumn(name);
    };
    const std::size_t ci_dev = col_index("deviceId");
    const std::size_t ci_alarm = col_index("alarmType");
    const std::size_t ci_ts = col_index("recordedAt");
    const std::size_t ci_lat = col_index("latitude");
    const std::size_t ci_lon = col_index("longitude");
    const std::size_t ci_speed = col_index("speed");

    ParseResult res;
    std::string line;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        auto fields = detail::split_csv_line(line);
        if (fields.size() < cols.size()) {
            res.errors.push_back({lineno, "", line, "wrong field count"});
            continue;
        }
        AlertEvent e;
        e.device_id = fields[ci_dev];
        auto bad = [&](const char* field, const std::string& raw, const char* msg) {
            res.errors.push_back({lineno, field, raw, msg});
        };
        auto alarm = parse_alarm_type(fields[ci_alarm]);
        if (!alarm) { bad("alarm_type", fields[ci_alarm], "unknown alarm type"); continue; }
        e.alarm_type = *alarm;
        auto ts = Timestamp::parse(fields[ci_ts], utc_offset_s);
        if (!ts) { bad("timestamp", fields[ci_ts], "bad timestamp"); continue; }
        e.timestamp = *ts;
        if (!detail::parse_double(fields[ci_lat], e.latitude) ||
            e.latitude < -90 || e.latitude > 90) {
            bad("latitude", fields[ci_lat], "latitude out of range"); continue;
        }
        if (!detail::parse_double(fields[ci_lon], e.longitude) ||
            e.longitude < -180 || e.longitude > 180) {
            bad("longitude", fields[ci_lon], "longitude out of range"); continue;
        }
        if (!detail::parse_double(fields[ci_speed], e.speed) || e.speed < 0) {
            bad("speed", fields[ci_speed], "bad speed"); continue;
        }
        res.events.push_back(std::move(e));
    }
    return res;
}

inline ParseResult parse_alert_csv(const std::string& path, const CsvSchema& schema,
                                   int utc_offset_s = 0) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open csv file: " + path);
    return parse_alert_csv_stream(in, schema, path, utc_offset_s);
}

// Canonical serialization. With enriched=true the altitude/roadName/weather
// columns are appended; enriched events are required in that case.
inline void write_alert_csv_stream(std::ostream& out, const std::vector<AlertEvent>& events,
                                   bool enriched = false) {
    out << "deviceId,alarmType,recordedAt,latitude,longitude,speed";
    if (enriched) {
        out << ",altitude,roadName";
        for (const char* f : weather_field_names()) out << ',' << f;
    }
    out << '\n';
    for (const auto& e : events) {
        out << detail::csv_escape(e.device_id) << ',' << alarm_type_name(e.alarm_type)
            << ',' << e.timestamp.to_iso() << ',' << detail::fmt_double(e.latitude)
            << ',' << detail::fmt_double(e.longitude) << ',' << detail::fmt_double(e.speed);
        if (enriched) {
            if (!e.enriched()) throw Error("write_alert_csv: event not enriched");
            out << ',' << detail::fmt_double(*e.altitude) << ','
                << detail::csv_escape(*e.road_name);
            for (const char* f : weather_field_names())
                out << ',' << detail::fmt_double(weather_field(*e.weather, f));
        }
        out << '\n';
    }
}

inline void write_alert_csv(const std::string& path, const std::vector<AlertEvent>& events,
                            bool enriched = false) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write csv file: " + path);
    write_alert_csv_stream(out, events, enriched);
}

// Reads a CSV produced by write_alert_csv(..., enriched=true).
inline std::vector<AlertEvent> read_enriched_csv(const std::string& path) {
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
                ci_alt = need("altitude"), ci_road = need("roadName");
    std::vector<std::size_t> ci_w;
    for (const char* f : weather_field_names()) ci_w.push_back(need(f));

    std::vector<AlertEvent> events;
    std::string line;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        auto fields = detail::split_csv_line(line);
        if (fields.size() < cols.size())
            throw Error(path + ": short row at line " + std::to_string(lineno));
        AlertEvent e;
        e.device_id = fields[ci_dev];
        auto alarm = parse_alarm_type(fields[ci_alarm]);
        auto ts = Timestamp::parse(fields[ci_ts]);
        double alt;
        if (!alarm || !ts || !detail::parse_double(fields[ci_lat], e.latitude) ||
            !detail::parse_double(fields[ci_lon], e.longitude) ||
            !detail::parse_double(fields[ci_speed], e.speed) ||
            !detail::parse_double(fields[ci_alt], alt))
            throw Error(path + ": bad row at line " + std::to_string(lineno));
        e.alarm_type = *alarm;
        e.timestamp = *ts;
        e.altitude = alt;
        e.road_name = fields[ci_road];
        WeatherRecord w;
        for (std::size_t k = 0; k < ci_w.size(); ++k) {
            double v;
            if (!detail::parse_double(fields[ci_w[k]], v))
                throw Error(path + ": bad weather value at line " + std::to_string(lineno));
            set_weather_field(w, weather_field_names()[k], v);
        }
        e.weather = w;
        events.push_back(std::move(e));
    }
    return events;
}

} // namespace roadsafe
