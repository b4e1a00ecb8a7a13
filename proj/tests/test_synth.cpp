#include <catch2/catch_amalgamated.hpp>

#include <map>
#include <set>

#include "roadsafe/geo_safety.hpp"
#include "roadsafe/synth.hpp"
#include "support.hpp"

using namespace roadsafe;

TEST_CASE("synth config validation") {
    SynthConfig c;
    CHECK_THROWS_AS(generate(c), InvalidConfig); // no roads
    c = SynthConfig::five_roads();
    c.roads[0].danger = 9;
    CHECK_THROWS_AS(generate(c), InvalidConfig);
    c = SynthConfig::five_roads();
    c.roads.erase(c.roads.begin()); // danger level 1 missing
    CHECK_THROWS_AS(generate(c), InvalidConfig);
    c = SynthConfig::five_roads();
    c.total_events_per_session = 5; // below the largest counted count
    CHECK_THROWS_AS(generate(c), InvalidConfig);
    c = SynthConfig::five_roads();
    c.start_date = "bogus";
    CHECK_THROWS_AS(generate(c), InvalidConfig);
}

TEST_CASE("five_roads preset emits the expected corpus") {
    auto data = generate(SynthConfig::five_roads());
    // 6*10 + 5*12 + 4*15 + 3*20 + 2*30 = 300 events, equal mass per class
    CHECK(data.events.size() == 300);
    CHECK(data.truth["roads"].size() == 5);
    CHECK(data.truth["sessions"].size() == 6 + 5 + 4 + 3 + 2);
    CHECK(data.fixtures["road"].size() == 5);
    CHECK(data.fixtures["altitude"].size() == 5);
    for (const auto& e : data.events) {
        CHECK(e.speed >= 0.0);
        CHECK_FALSE(e.enriched()); // raw events carry no enrichment
    }
}

TEST_CASE("generation is deterministic in the seed") {
    auto a = generate(SynthConfig::five_roads());
    auto b = generate(SynthConfig::five_roads());
    REQUIRE(a.events.size() == b.events.size());
    for (std::size_t i = 0; i < a.events.size(); ++i) {
        CHECK(a.events[i].speed == b.events[i].speed);
        CHECK(a.events[i].timestamp == b.events[i].timestamp);
        CHECK(a.events[i].latitude == b.events[i].latitude);
    }
    CHECK(a.fixtures == b.fixtures);

    auto cfg = SynthConfig::five_roads();
    cfg.seed = 43;
    auto c = generate(cfg);
    bool any_diff = false;
    for (std::size_t i = 0; i < a.events.size(); ++i)
        any_diff = any_diff || a.events[i].speed != c.events[i].speed;
    CHECK(any_diff);
}

TEST_CASE("the pipeline recovers the planted danger level exactly") {
    auto data = generate(SynthConfig::five_roads());
    FixtureClient client(data.fixtures);
    EnrichmentCache cache;
    auto enriched = enrich_events(data.events, client, cache);
    REQUIRE(enriched.rejected.empty());
    auto densities = warning_density(enriched.enriched);
    auto binning = fit_index_binning(densities);
    auto labeled = label_events(enriched.enriched, densities, binning);
    for (const auto& le : labeled) {
        int planted = data.truth["roads"][*le.event.road_name].get<int>();
        CHECK(le.safety_index == planted);
    }
}

TEST_CASE("filler events equalize session length without touching density") {
    SynthConfig cfg = SynthConfig::five_roads();
    cfg.total_events_per_session = 30;
    auto data = generate(cfg);
    // every session now has exactly 30 events
    std::map<std::string, int> by_session;
    std::map<std::string, int> counted_by_road;
    for (const auto& e : data.events) {
        // raw events have no road yet; recover it from the fixtures
        std::string road = data.fixtures["road"][cache_cell(e.latitude, e.longitude)];
        by_session[e.device_id + "|" + road + "|" + e.timestamp.date()]++;
        if (e.alarm_type == AlarmType::HMW || e.alarm_type == AlarmType::PCW ||
            e.alarm_type == AlarmType::FCW)
            counted_by_road[road]++;
    }
    for (const auto& [sid, n] : by_session) CHECK(n == 30);
    // counted mass per road is unchanged from the preset
    CHECK(counted_by_road["SR-01"] == 60);
    CHECK(counted_by_road["SR-05"] == 60);
}

TEST_CASE("weather regimes bound the number of distinct weather records") {
    SynthConfig cfg = SynthConfig::five_roads();
    cfg.weather_regimes = 3;
    auto data = generate(cfg);
    std::set<std::string> distinct;
    for (const auto& [key, w] : data.fixtures["weather"].items()) distinct.insert(w.dump());
    CHECK(distinct.size() <= 3);
    CHECK(data.fixtures["weather"].size() == 6 + 5 + 4 + 3 + 2); // one per session
}

TEST_CASE("write_synth emits the three artifacts") {
    testsupport::TempDir tmp("synth");
    auto data = generate(SynthConfig::five_roads());
    write_synth(data, tmp.file("raw.csv"), tmp.file("fx.json"), tmp.file("truth.json"));
    auto parsed = parse_alert_csv(tmp.file("raw.csv"), default_csv_schema());
    CHECK(parsed.errors.empty());
    CHECK(parsed.events.size() == 300);
    auto client = FixtureClient::from_file(tmp.file("fx.json"));
    CHECK(client.road_name_at(8.0, 77.0) == "SR-01");
}
