#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <numeric>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "eemdx/arimax.hpp"
#include "eemdx/error.hpp"
#include "eemdx/io.hpp"
#include "eemdx/panel.hpp"
#include "eemdx/timeseries.hpp"

namespace eemdx {

struct DatasetManifest {
    std::string cases_path;
    std::string meteo_path;     // optional
    std::string mobility_path;  // optional
    std::string coords_path;
    std::string date_format = "%Y-%m-%d";
    std::size_t lag_days = 5;
};

/// Reads `key = value` lines ('#' starts a comment). Relative paths are resolved
/// against the manifest's directory.
inline DatasetManifest read_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open manifest '" + path + "'");
    const auto base = std::filesystem::path(path).parent_path();
    const auto resolve = [&](const std::string& p) {
        const std::filesystem::path fp(p);
        return (fp.is_absolute() || p.empty() ? fp : base / fp).string();
    };
    DatasetManifest m;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        const auto body = trim(hash == std::string::npos ? line : line.substr(0, hash));
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos) throw ParseError(path + ": expected 'key = value'", lineno);
        const auto key = trim(body.substr(0, eq));
        const auto value = trim(body.substr(eq + 1));
        if (key == "cases_path") {
            m.cases_path = resolve(value);
        } else if (key == "meteo_path") {
            m.meteo_path = resolve(value);
        } else if (key == "mobility_path") {
            m.mobility_path = resolve(value);
        } else if (key == "coords_path") {
            m.coords_path = resolve(value);
        } else if (key == "date_format") {
            m.date_format = value;
        } else if (key == "lag_days") {
            const double v = parse_number(value, lineno, "lag_days");
            if (v < 0 || v != std::floor(v)) throw ParseError(path + ": lag_days must be a non-negative integer", lineno);
            m.lag_days = static_cast<std::size_t>(v);
        } else {
            throw ParseError(path + ": unknown key '" + key + "'", lineno);
        }
    }
    if (m.cases_path.empty() || m.coords_path.empty()) {
        throw ParseError(path + ": cases_path and coords_path are required", 0);
    }
    return m;
}

/// Parses a date under a strftime-like pattern using %Y, %m, %d and literal characters.
inline Date parse_date(const std::string& text, const std::string& format) {
    int y = -1, m = -1, d = -1;
    std::size_t i = 0;
    const auto digits = [&](std::size_t max_len) {
        std::size_t len = 0;
        int v = 0;
        while (i < text.size() && len < max_len && std::isdigit(static_cast<unsigned char>(text[i]))) {
            v = v * 10 + (text[i] - '0');
            ++i;
            ++len;
        }
        if (len == 0) throw InvalidArgument("date '" + text + "' does not match '" + format + "'");
        return v;
    };
    for (std::size_t f = 0; f < format.size(); ++f) {
        if (format[f] == '%' && f + 1 < format.size()) {
            const char c = format[++f];
            if (c == 'Y') {
                y = digits(4);
            } else if (c == 'm') {
                m = digits(2);
            } else if (c == 'd') {
                d = digits(2);
            } else {
                throw InvalidArgument("unsupported date directive %" + std::string(1, c));
            }
        } else if (i < text.size() && text[i] == format[f]) {
            ++i;
        } else {
            throw InvalidArgument("date '" + text + "' does not match '" + format + "'");
        }
    }
    if (i != text.size() || y < 0 || m < 0 || d < 0) {
        throw InvalidArgument("date '" + text + "' does not match '" + format + "'");
    }
    return Date::from_ymd(y, static_cast<unsigned>(m), static_cast<unsigned>(d));
}

/// A stretch of consecutive missing days in one variable of one city.
struct GapReport {
    std::string city_id;
    std::string variable;  // "new_cases" or an exogenous variable name
    std::size_t gap_start = 0;  // 0-based indices into the city's series, inclusive
    std::size_t gap_end = 0;
    std::string imputation_method;  // empty until imputed

    std::size_t length() const noexcept { return gap_end - gap_start + 1; }
    bool operator==(const GapReport&) const = default;
};

struct LoadedPanel {
    PanelDataset panel;
    std::vector<GapReport> gaps;  // gap values hold placeholders until impute_gaps runs
};

namespace detail {

using DailyValues = std::map<std::int32_t, std::optional<double>>;  // day -> value (nullopt = NA)

// city -> variable -> day values, with dates checked to increase strictly per city.
struct VariableTable {
    std::map<std::string, std::map<std::string, DailyValues>> data;
};

inline std::optional<double> parse_optional(const std::string& text, std::size_t line) {
    if (text.empty() || text == "NA" || text == "na" || text == "NaN") return std::nullopt;
    return parse_number(text, line);
}

inline VariableTable read_variables(const std::string& path, const std::vector<std::string>& variables,
                                    const std::string& date_format, const std::map<std::string, std::size_t>& known) {
    const auto table = read_csv(path);
    const auto date_col = table.column("date");
    const auto city_col = table.column("city_id");
    std::vector<std::size_t> cols;
    for (const auto& v : variables) cols.push_back(table.column(v));
    VariableTable out;
    std::map<std::string, std::int32_t> last_day;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const std::size_t line = table.line_numbers[r];
        const auto& city = row[city_col];
        if (!known.count(city)) throw ReferenceError(path + ": unknown city '" + city + "' (line " + std::to_string(line) + ")");
        Date date;
        try {
            date = parse_date(row[date_col], date_format);
        } catch (const InvalidArgument& e) {
            throw ParseError(path + ": " + e.what(), line);
        }
        const auto it = last_day.find(city);
        if (it != last_day.end() && date.days() <= it->second) {
            throw OrderingError(path + ": dates for '" + city + "' are not increasing at line " + std::to_string(line));
        }
        last_day[city] = date.days();
        for (std::size_t k = 0; k < variables.size(); ++k) {
            out.data[city][variables[k]][date.days()] = parse_optional(row[cols[k]], line);
        }
    }
    return out;
}

// Series over [first, last] plus its gaps; missing days hold the nearest earlier value
// (or the nearest later one at the start). Returns nullopt when no day has a value.
inline std::optional<TimeSeries> series_with_gaps(const DailyValues& values, Date first, Date last, const std::string& city,
                                                  const std::string& name, std::vector<GapReport>& gaps) {
    const std::size_t n = static_cast<std::size_t>(last - first) + 1;
    std::vector<std::optional<double>> v(n);
    bool any = false;
    for (std::size_t i = 0; i < n; ++i) {
        const auto it = values.find((first + static_cast<std::int32_t>(i)).days());
        if (it != values.end() && it->second) {
            v[i] = it->second;
            any = true;
        }
    }
    if (!any) return std::nullopt;
    std::vector<double> filled(n);
    std::optional<double> carry;
    for (std::size_t i = 0; i < n; ++i) {
        if (v[i]) carry = v[i];
        filled[i] = carry.value_or(0.0);
    }
    const auto first_known = static_cast<std::size_t>(std::find_if(v.begin(), v.end(), [](const auto& o) { return o.has_value(); }) - v.begin());
    for (std::size_t i = 0; i < first_known; ++i) filled[i] = *v[first_known];
    for (std::size_t i = 0; i < n;) {
        if (v[i]) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j + 1 < n && !v[j + 1]) ++j;
        gaps.push_back({city, name, i, j, ""});
        i = j + 1;
    }
    return TimeSeries(first, std::move(filled), name);
}

}  // namespace detail

/// Loads the four canonical CSV files. Each city's series start on its first day with a
/// positive case count and end on the last date present for every city in the cases file.
/// Missing days are reported as gaps; secondary variables never observed for a city are omitted.
inline LoadedPanel load_panel(const DatasetManifest& manifest) {
    const auto coords = read_csv(manifest.coords_path);
    const auto id_col = coords.column("city_id"), lat_col = coords.column("lat"), lon_col = coords.column("lon");
    std::map<std::string, std::size_t> known;
    std::vector<std::pair<double, double>> latlon;
    for (std::size_t r = 0; r < coords.rows.size(); ++r) {
        const auto& row = coords.rows[r];
        const auto line = coords.line_numbers[r];
        if (!known.emplace(row[id_col], latlon.size()).second) {
            throw ParseError(manifest.coords_path + ": duplicate city '" + row[id_col] + "'", line);
        }
        latlon.emplace_back(parse_number(row[lat_col], line, "latitude"), parse_number(row[lon_col], line, "longitude"));
    }

    const auto cases = detail::read_variables(manifest.cases_path, {"new_cases"}, manifest.date_format, known);
    if (cases.data.empty()) throw EmptyInputError(manifest.cases_path + ": no case rows");
    std::int32_t final_day = std::numeric_limits<std::int32_t>::max();
    for (const auto& [city, vars] : cases.data) final_day = std::min(final_day, vars.at("new_cases").rbegin()->first);

    const std::vector<std::string> meteo_vars(kMeteorologicalVariables.begin(), kMeteorologicalVariables.end());
    const std::vector<std::string> mob_vars(kMobilityVariables.begin(), kMobilityVariables.end());
    const auto meteo = manifest.meteo_path.empty()
                           ? detail::VariableTable{}
                           : detail::read_variables(manifest.meteo_path, meteo_vars, manifest.date_format, known);
    const auto mobility = manifest.mobility_path.empty()
                              ? detail::VariableTable{}
                              : detail::read_variables(manifest.mobility_path, mob_vars, manifest.date_format, known);

    LoadedPanel out;
    std::vector<CityRecord> records;
    for (const auto& [city, vars] : cases.data) {
        const auto& days = vars.at("new_cases");
        std::optional<std::int32_t> first;
        for (const auto& [day, value] : days) {
            if (value && *value > 0) {
                first = day;
                break;
            }
        }
        if (!first || *first > final_day) {
            throw EmptyInputError("city '" + city + "' has no positive case count on or before " + Date(final_day).iso());
        }
        const Date lo(*first), hi(final_day);
        CityRecord rec{city, latlon[known.at(city)].first, latlon[known.at(city)].second,
                       detail::series_with_gaps(days, lo, hi, city, "new_cases", out.gaps)->renamed(city), {}, {}};
        const auto collect = [&](const detail::VariableTable& t, const std::vector<std::string>& names,
                                 std::vector<TimeSeries>& into) {
            const auto it = t.data.find(city);
            if (it == t.data.end()) return;
            for (const auto& name : names) {
                if (auto s = detail::series_with_gaps(it->second.at(name), lo, hi, city, name, out.gaps)) {
                    into.push_back(std::move(*s));
                }
            }
        };
        collect(meteo, meteo_vars, rec.meteorological);
        collect(mobility, mob_vars, rec.mobility);
        records.push_back(std::move(rec));
    }
    out.panel = PanelDataset(std::move(records));
    return out;
}

/// Fills every gap with multi-step ARIMA forecasts from the days before it. Gaps are
/// processed in time order per variable, so a later gap trains on earlier imputed values.
[[nodiscard]] inline PanelDataset impute_gaps(const PanelDataset& panel, std::vector<GapReport>& gaps, std::size_t min_history = 20,
                                const ArimaxOrder& bounds = kDefaultOrderBounds) {
    PanelDataset out = panel;
    std::vector<std::size_t> order(gaps.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return gaps[a].gap_start < gaps[b].gap_start; });
    for (const std::size_t gi : order) {
        auto& gap = gaps[gi];
        const auto found = std::find_if(out.cities.begin(), out.cities.end(),
                                        [&](const CityRecord& c) { return c.city_id == gap.city_id; });
        if (found == out.cities.end()) throw ReferenceError("gap refers to unknown city '" + gap.city_id + "'");
        auto& rec = *found;
        TimeSeries* target = nullptr;
        if (gap.variable == "new_cases") {
            target = &rec.cases;
        } else {
            for (auto* group : {&rec.meteorological, &rec.mobility}) {
                for (auto& s : *group) {
                    if (s.name() == gap.variable) target = &s;
                }
            }
        }
        if (!target) throw ReferenceError("gap refers to unknown variable '" + gap.variable + "' of '" + gap.city_id + "'");
        if (gap.gap_start > gap.gap_end || gap.gap_end >= target->size()) {
            throw RangeError("gap " + std::to_string(gap.gap_start) + ".." + std::to_string(gap.gap_end) + " outside '" +
                             gap.city_id + "' " + gap.variable);
        }
        const std::string where = gap.city_id + " " + gap.variable + " " + target->date_at(gap.gap_start).iso() + ".." +
                                  target->date_at(gap.gap_end).iso();
        if (gap.gap_start < min_history) {
            throw ImputationError("gap " + where + " has " + std::to_string(gap.gap_start) + " days of history, needs " +
                                  std::to_string(min_history));
        }
        const auto train = target->slice(0, gap.gap_start);
        ArimaxModel model;
        try {
            model = select_order(train, {}, {bounds.p, bounds.d, bounds.q, 0});
        } catch (const Error& e) {
            throw ImputationError("gap " + where + ": " + e.what());
        }
        const auto fill = forecast(model, train, {}, gap.length());
        auto values = target->vector();
        std::copy(fill.begin(), fill.end(), values.begin() + static_cast<std::ptrdiff_t>(gap.gap_start));
        *target = target->with_values(std::move(values));
        gap.imputation_method = "ARIMA(" + std::to_string(model.order.p) + "," + std::to_string(model.order.d) + "," +
                                std::to_string(model.order.q) + ")";
    }
    return out;
}

struct LaggedSeries {
    TimeSeries cases;
    std::vector<TimeSeries> exog;
};

/// Pairs the cases of day t with the exogenous values of day t - lag_days. Outputs share the
/// cases' dates from the lag onward and are lag_days shorter than the inputs.
inline LaggedSeries apply_lag(const TimeSeries& cases, const std::vector<TimeSeries>& exog, std::size_t lag_days) {
    for (const auto& e : exog) {
        if (e.start() != cases.start() || e.size() != cases.size()) {
            throw AlignmentError("'" + e.name() + "' is not aligned with '" + cases.name() + "'");
        }
    }
    if (lag_days >= cases.size()) {
        throw InvalidArgument("lag of " + std::to_string(lag_days) + " days needs more than " +
                              std::to_string(lag_days) + " observations, got " + std::to_string(cases.size()));
    }
    const std::size_t n = cases.size() - lag_days;
    LaggedSeries out{cases.slice(lag_days, n), {}};
    for (const auto& e : exog) out.exog.push_back(TimeSeries(out.cases.start(), e.slice(0, n).vector(), e.name()));
    return out;
}

inline std::string cases_to_csv(const PanelDataset& panel) {
    std::string out = "date,city_id,new_cases\n";
    for (const auto& c : panel.cities) {
        for (std::size_t t = 0; t < c.cases.size(); ++t) {
            out += c.cases.date_at(t).iso() + ',' + c.city_id + ',' + format_number(c.cases[t]) + '\n';
        }
    }
    return out;
}

namespace detail {

template <typename Names>
std::string variables_to_csv(const PanelDataset& panel, const Names& names, bool meteorological) {
    std::string out = "date,city_id";
    for (const auto& n : names) out += "," + std::string(n);
    out += '\n';
    for (const auto& c : panel.cities) {
        const auto& group = meteorological ? c.meteorological : c.mobility;
        if (group.empty()) continue;
        for (std::size_t t = 0; t < c.cases.size(); ++t) {
            out += c.cases.date_at(t).iso() + ',' + c.city_id;
            for (const auto& n : names) {
                const auto* s = c.find(n);
                out += ',' + (s ? format_number((*s)[t]) : std::string("NA"));
            }
            out += '\n';
        }
    }
    return out;
}

}  // namespace detail

inline std::string meteo_to_csv(const PanelDataset& panel) {
    return detail::variables_to_csv(panel, kMeteorologicalVariables, true);
}

inline std::string mobility_to_csv(const PanelDataset& panel) {
    return detail::variables_to_csv(panel, kMobilityVariables, false);
}

inline std::string coords_to_csv(const PanelDataset& panel) {
    std::string out = "city_id,lat,lon\n";
    for (const auto& c : panel.cities) {
        out += c.city_id + ',' + format_number(c.latitude) + ',' + format_number(c.longitude) + '\n';
    }
    return out;
}

/// Writes the four canonical files plus a manifest into `dir`; returns the manifest path.
inline std::string write_panel(const PanelDataset& panel, const std::string& dir, std::size_t lag_days = 5) {
    std::filesystem::create_directories(dir);
    const auto p = [&](const char* f) { return (std::filesystem::path(dir) / f).string(); };
    write_text_file(p("cases.csv"), cases_to_csv(panel));
    write_text_file(p("meteo.csv"), meteo_to_csv(panel));
    write_text_file(p("mobility.csv"), mobility_to_csv(panel));
    write_text_file(p("coords.csv"), coords_to_csv(panel));
    write_text_file(p("manifest.txt"), "cases_path = cases.csv\nmeteo_path = meteo.csv\nmobility_path = mobility.csv\n"
                                       "coords_path = coords.csv\ndate_format = %Y-%m-%d\nlag_days = " +
                                           std::to_string(lag_days) + "\n");
    return p("manifest.txt");
}

inline std::string gaps_to_csv(const PanelDataset& panel, const std::vector<GapReport>& gaps) {
    std::string out = "city_id,variable,gap_start,gap_end,days,imputation_method\n";
    for (const auto& g : gaps) {
        const auto& c = panel.city(g.city_id).cases;
        out += g.city_id + ',' + g.variable + ',' + c.date_at(g.gap_start).iso() + ',' + c.date_at(g.gap_end).iso() + ',' +
               std::to_string(g.length()) + ',' + (g.imputation_method.empty() ? "none" : g.imputation_method) + '\n';
    }
    return out;
}

}  // namespace eemdx
