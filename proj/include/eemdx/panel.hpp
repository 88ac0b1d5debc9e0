#pragma once

#include <algorithm>
#include <array>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "eemdx/error.hpp"
#include "eemdx/timeseries.hpp"

namespace eemdx {

inline constexpr std::array<std::string_view, 4> kMeteorologicalVariables{"rain_mm", "max_temp_c", "min_temp_c",
                                                                          "humidity_pct"};
inline constexpr std::array<std::string_view, 6> kMobilityVariables{"rr", "gp", "pa", "ts", "wo", "re"};

/// One city: coordinates, daily new cases and whichever exogenous variables were supplied.
/// Every series of a record covers the same dates as `cases`.
struct CityRecord {
    std::string city_id;
    double latitude = 0.0;
    double longitude = 0.0;
    TimeSeries cases;
    std::vector<TimeSeries> meteorological;  // in kMeteorologicalVariables order, absent ones skipped
    std::vector<TimeSeries> mobility;        // in kMobilityVariables order, absent ones skipped

    /// Meteorological then mobility series.
    std::vector<TimeSeries> exogenous() const {
        std::vector<TimeSeries> out = meteorological;
        out.insert(out.end(), mobility.begin(), mobility.end());
        return out;
    }

    const TimeSeries* find(std::string_view variable) const {
        for (const auto* group : {&meteorological, &mobility}) {
            for (const auto& s : *group) {
                if (s.name() == variable) return &s;
            }
        }
        return nullptr;
    }

    void validate() const {
        if (!(latitude >= -90 && latitude <= 90) || !(longitude >= -180 && longitude <= 180)) {
            throw InvalidArgument("city '" + city_id + "' has invalid coordinates");
        }
        for (const auto& s : exogenous()) {
            if (s.start() != cases.start() || s.size() != cases.size()) {
                throw AlignmentError("city '" + city_id + "': '" + s.name() + "' does not cover the case dates");
            }
            const bool known = std::find(kMeteorologicalVariables.begin(), kMeteorologicalVariables.end(), s.name()) !=
                                   kMeteorologicalVariables.end() ||
                               std::find(kMobilityVariables.begin(), kMobilityVariables.end(), s.name()) !=
                                   kMobilityVariables.end();
            if (!known) throw InvalidArgument("city '" + city_id + "': unknown variable '" + s.name() + "'");
        }
    }

    bool operator==(const CityRecord&) const = default;
};

/// Cities ordered by id. Each city may start on its own first-case date.
struct PanelDataset {
    std::vector<CityRecord> cities;

    explicit PanelDataset(std::vector<CityRecord> records = {}) : cities(std::move(records)) {
        std::sort(cities.begin(), cities.end(),
                  [](const CityRecord& a, const CityRecord& b) { return a.city_id < b.city_id; });
        std::set<std::string> seen;
        for (const auto& c : cities) {
            if (!seen.insert(c.city_id).second) throw InvalidArgument("duplicate city '" + c.city_id + "'");
            c.validate();
        }
    }

    Date start() const {
        Date d = cities.front().cases.start();
        for (const auto& c : cities) d = std::min(d, c.cases.start());
        return d;
    }
    Date end() const {
        Date d = cities.front().cases.end();
        for (const auto& c : cities) d = std::max(d, c.cases.end());
        return d;
    }

    /// Dates covered by every city: [latest start, earliest end].
    std::pair<Date, Date> common_range() const {
        if (cities.empty()) throw EmptyInputError("panel has no cities");
        Date lo = cities.front().cases.start(), hi = cities.front().cases.end();
        for (const auto& c : cities) {
            lo = std::max(lo, c.cases.start());
            hi = std::min(hi, c.cases.end());
        }
        if (hi < lo) throw NoOverlapError("cities share no common dates");
        return {lo, hi};
    }

    const CityRecord& city(std::string_view id) const {
        for (const auto& c : cities) {
            if (c.city_id == id) return c;
        }
        throw ReferenceError("unknown city '" + std::string(id) + "'");
    }

    std::vector<std::string> city_ids() const {
        std::vector<std::string> ids;
        for (const auto& c : cities) ids.push_back(c.city_id);
        return ids;
    }

    bool operator==(const PanelDataset&) const = default;
};

}  // namespace eemdx
