#pragma once

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "eemdx/anomaly.hpp"
#include "eemdx/eemd.hpp"
#include "eemdx/ingest.hpp"
#include "eemdx/io.hpp"
#include "eemdx/pipeline.hpp"
#include "eemdx/spectral_graph.hpp"

namespace eemdx::cli {

namespace fs = std::filesystem;

struct RunConfig {
    std::string manifest_path;
    std::string output_dir = "out";
    std::uint64_t seed = 0;
    EemdConfig eemd;
    ArimaxOrder arimax_bounds = kDefaultOrderBounds;
    std::optional<std::size_t> lag_days;  // overrides the manifest when set
    double alpha = 1.0;
    double cutoff = 0.5;
    Method method = Method::eemd_arimax;
    WeightMode weight_mode = WeightMode::literal_distance;
    std::string predictions_dir;
    std::string city;
};

/// Where a command reports progress and per-city failures.
struct Streams {
    std::ostream& out;
    std::ostream& err;
};

struct Prepared {
    DatasetManifest manifest;
    PanelDataset panel;
    std::size_t lag_days = 5;
    std::size_t failures = 0;
};

inline std::string path_in(const RunConfig& cfg, const std::string& name) {
    return (fs::path(cfg.output_dir) / name).string();
}

/// Loads the panel and fills its gaps one at a time, so a gap that cannot be imputed
/// fails only itself. Writes gaps.csv when any gap was found.
inline Prepared prepare(const RunConfig& cfg, Streams s) {
    Prepared p;
    p.manifest = read_manifest(cfg.manifest_path);
    p.lag_days = cfg.lag_days.value_or(p.manifest.lag_days);
    auto loaded = load_panel(p.manifest);
    p.panel = std::move(loaded.panel);
    fs::create_directories(cfg.output_dir);
    if (loaded.gaps.empty()) return p;
    std::stable_sort(loaded.gaps.begin(), loaded.gaps.end(),
                     [](const GapReport& a, const GapReport& b) { return a.gap_start < b.gap_start; });
    for (auto& gap : loaded.gaps) {
        std::vector<GapReport> one{gap};
        try {
            p.panel = impute_gaps(p.panel, one);
            gap = one.front();
        } catch (const Error& e) {
            s.err << "city " << gap.city_id << ": " << e.what() << '\n';
            ++p.failures;
        }
    }
    write_text_file(path_in(cfg, "gaps.csv"), gaps_to_csv(p.panel, loaded.gaps));
    return p;
}

inline PredictionConfig prediction_config(const RunConfig& cfg, std::size_t lag_days) {
    PredictionConfig pc;
    pc.method = cfg.method;
    pc.eemd = cfg.eemd;
    pc.eemd.rng_seed = cfg.seed;
    pc.arimax_bounds = cfg.arimax_bounds;
    pc.lag_days = lag_days;
    return pc;
}

inline CityGraph graph_of(const PanelDataset& panel, WeightMode mode) {
    std::vector<City> cities;
    for (const auto& c : panel.cities) cities.push_back({c.city_id, c.latitude, c.longitude});
    return build_graph(cities, mode);
}

inline std::string correlation_to_csv(const std::vector<CorrelationResult>& results) {
    std::string out = "variable,rho,p_value,selected\n";
    for (const auto& r : results) {
        out += r.variable_name + ',' + format_number(r.rho) + ',' + format_number(r.p_value) + ',' +
               (r.selected ? "true" : "false") + '\n';
    }
    return out;
}

inline int cmd_correlate(const RunConfig& cfg, Streams s) {
    auto p = prepare(cfg, s);
    for (const auto& city : p.panel.cities) {
        try {
            const auto results = screen_city(city, p.lag_days);
            write_text_file(path_in(cfg, "correlation_" + city.city_id + ".csv"), correlation_to_csv(results));
        } catch (const Error& e) {
            s.err << "city " << city.city_id << ": " << e.what() << '\n';
            ++p.failures;
        }
    }
    s.out << "correlate: " << p.panel.cities.size() << " cities, " << p.failures << " failed\n";
    return p.failures ? 1 : 0;
}

inline std::string prediction_to_csv(const CityPrediction& pr) {
    std::string out = "date,observed,predicted\n";
    for (std::size_t t = 0; t < pr.observed.size(); ++t) {
        out += pr.observed.date_at(t).iso() + ',' + format_number(pr.observed[t]) + ',' + format_number(pr.predicted[t]) + '\n';
    }
    return out;
}

inline std::string prediction_to_dat(const CityPrediction& pr) {
    std::string out = "# day observed predicted\n";
    for (std::size_t t = 0; t < pr.observed.size(); ++t) {
        out += std::to_string(t + 1) + ' ' + format_number(pr.observed[t]) + ' ' + format_number(pr.predicted[t]) + '\n';
    }
    return out;
}

inline std::string models_to_text(const CityPrediction& pr) {
    std::string out;
    for (std::size_t j = 0; j < pr.models.size(); ++j) {
        if (pr.models.size() > 1) out += "# level " + std::to_string(j + 1) + '\n';
        out += to_text(pr.models[j]);
    }
    return out;
}

inline std::string join(const std::vector<std::string>& parts, char sep) {
    std::string out;
    for (const auto& p : parts) out += (out.empty() ? "" : std::string(1, sep)) + p;
    return out;
}

inline int cmd_predict(const RunConfig& cfg, Streams s) {
    auto p = prepare(cfg, s);
    const auto pc = prediction_config(cfg, p.lag_days);
    std::string summary = "city_id,method,order,selected,ME,RMSE,MAE\n";
    for (const auto& city : p.panel.cities) {
        try {
            const auto pr = predict_city(city, pc);
            write_text_file(path_in(cfg, "prediction_" + city.city_id + ".csv"), prediction_to_csv(pr));
            write_text_file(path_in(cfg, "prediction_" + city.city_id + ".dat"), prediction_to_dat(pr));
            write_text_file(path_in(cfg, "model_" + city.city_id + ".txt"), models_to_text(pr));
            summary += city.city_id + ',' + method_name(cfg.method) + ',' + pr.orders() + ',' + join(pr.selected, ';') + ',' +
                       format_number(pr.metrics.me) + ',' + format_number(pr.metrics.rmse) + ',' +
                       format_number(pr.metrics.mae) + '\n';
        } catch (const Error& e) {
            s.err << "city " << city.city_id << ": " << e.what() << '\n';
            ++p.failures;
        }
    }
    write_text_file(path_in(cfg, "summary.csv"), summary);
    s.out << "predict (" << method_name(cfg.method) << "): " << p.panel.cities.size() << " cities, " << p.failures
          << " failed\n";
    return p.failures ? 1 : 0;
}

/// Reads a prediction_<city>.csv written by `predict`.
inline TimeSeries read_prediction(const std::string& path, const std::string& city) {
    const auto table = read_csv(path);
    const auto dc = table.column("date"), pc = table.column("predicted");
    if (table.rows.empty()) throw EmptyInputError(path + ": no rows");
    std::vector<double> v;
    Date first{}, prev{};
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        Date d;
        try {
            d = Date::parse_iso(table.rows[r][dc]);
        } catch (const Error& e) {
            throw ParseError(path + ": " + e.what(), table.line_numbers[r]);
        }
        if (r == 0) first = d;
        if (r > 0 && d != prev + 1) throw OrderingError(path + ": dates are not consecutive at line " + std::to_string(table.line_numbers[r]));
        prev = d;
        v.push_back(parse_number(table.rows[r][pc], table.line_numbers[r], "prediction"));
    }
    return TimeSeries(first, std::move(v), city);
}

inline int cmd_detect(const RunConfig& cfg, Streams s) {
    if (cfg.predictions_dir.empty()) throw InvalidArgument("detect needs --predictions DIR");
    auto p = prepare(cfg, s);
    std::vector<TimeSeries> predictions;
    for (const auto& city : p.panel.cities) {
        const auto file = (fs::path(cfg.predictions_dir) / ("prediction_" + city.city_id + ".csv")).string();
        if (!fs::exists(file)) {
            s.err << "city " << city.city_id << ": missing prediction file " << file << '\n';
            return 1;
        }
        predictions.push_back(read_prediction(file, city.city_id));
    }
    const auto g = graph_of(p.panel, cfg.weight_mode);
    const auto analysis = analyze_anomalies(p.panel, predictions, g, SpectralFilter::accentuate(cfg.alpha));
    std::string summary = "city_id,ce_days,ca_days,eligible,matched,match_fraction,negative_observations,note\n";
    for (const auto& c : analysis.cities) {
        write_text_file(path_in(cfg, "anomaly_" + c.errors.city_id + ".csv"),
                        anomaly_to_csv(c.errors, c.anomalies, analysis.first_day));
        summary += c.errors.city_id + ',' + std::to_string(c.errors.significant_days.size()) + ',' +
                   std::to_string(c.anomalies.anomalous_days.size()) + ',' + std::to_string(c.match.eligible) + ',' +
                   std::to_string(c.match.matched) + ',' + format_number(c.match.fraction) + ',' +
                   std::to_string(c.anomalies.negative_observations) + ',' + (c.match.eligible ? "" : "eligible=0") + '\n';
    }
    summary += "mean,,,,," + format_number(analysis.mean_fraction()) + ",,\n";
    write_text_file(path_in(cfg, "anomaly_summary.csv"), summary);
    s.out << "detect: " << analysis.num_days << " common days from " << analysis.first_day.iso()
          << ", mean match fraction " << format_number(analysis.mean_fraction()) << '\n';
    return p.failures ? 1 : 0;
}

inline int cmd_normalize(const RunConfig& cfg, Streams s) {
    auto p = prepare(cfg, s);
    const auto g = graph_of(p.panel, cfg.weight_mode);
    const auto result = normalize_cases(p.panel, g, cfg.cutoff);
    write_text_file(path_in(cfg, "normalized_cases.csv"), cases_to_csv(result.panel));
    std::string energy = "date,high_band_before,high_band_after\n";
    for (std::size_t k = 0; k < result.days.size(); ++k) {
        energy += result.days[k].iso() + ',' + format_number(result.high_band_before[k]) + ',' +
                  format_number(result.high_band_after[k]) + '\n';
    }
    write_text_file(path_in(cfg, "band_energy.csv"), energy);
    // A manifest for re-running any command on the normalized counts.
    const auto abs = [](const std::string& path) { return path.empty() ? path : fs::absolute(path).string(); };
    std::string manifest = "cases_path = normalized_cases.csv\ncoords_path = " + abs(p.manifest.coords_path) + '\n';
    if (!p.manifest.meteo_path.empty()) manifest += "meteo_path = " + abs(p.manifest.meteo_path) + '\n';
    if (!p.manifest.mobility_path.empty()) manifest += "mobility_path = " + abs(p.manifest.mobility_path) + '\n';
    manifest += "date_format = %Y-%m-%d\nlag_days = " + std::to_string(p.lag_days) + '\n';
    write_text_file(path_in(cfg, "normalized_manifest.txt"), manifest);
    s.out << "normalize: " << result.days.size() << " days filtered, " << result.clamped << " values clamped to zero\n";
    return p.failures ? 1 : 0;
}

inline int cmd_decompose(const RunConfig& cfg, Streams s) {
    if (cfg.city.empty()) throw InvalidArgument("decompose needs --city ID");
    auto p = prepare(cfg, s);
    const CityRecord* city = nullptr;
    try {
        city = &p.panel.city(cfg.city);
    } catch (const ReferenceError& e) {
        s.err << e.what() << '\n';
        return 1;
    }
    auto ec = cfg.eemd;
    ec.rng_seed = cfg.seed;
    const auto d = eemd(city->cases, ec);
    std::string csv = "date,observed";
    for (std::size_t j = 1; j <= d.num_imfs(); ++j) csv += ",imf_" + std::to_string(j);
    csv += ",residual\n";
    for (std::size_t t = 0; t < city->cases.size(); ++t) {
        csv += city->cases.date_at(t).iso() + ',' + format_number(city->cases[t]);
        for (std::size_t j = 1; j <= d.num_imfs() + 1; ++j) csv += ',' + format_number(d.level(j)[t]);
        csv += '\n';
    }
    write_text_file(path_in(cfg, "decomposition_" + cfg.city + ".csv"), csv);
    for (std::size_t j = 1; j <= d.num_imfs() + 1; ++j) {
        const std::string name = j <= d.num_imfs() ? "imf_" + std::to_string(j) : "residual";
        std::string dat = "# day " + name + '\n';
        for (std::size_t t = 0; t < city->cases.size(); ++t) dat += std::to_string(t + 1) + ' ' + format_number(d.level(j)[t]) + '\n';
        write_text_file(path_in(cfg, "decomposition_" + cfg.city + "_" + name + ".dat"), dat);
    }
    s.out << "decompose: " << cfg.city << ", " << d.num_imfs() << " IMFs plus residual\n";
    return p.failures ? 1 : 0;
}

/// Parses arguments and runs one command. Returns the process exit code.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"EEMD-ARIMAX forecasting and graph-spectral anomaly detection over daily case panels", "eemdx-cli"};
    app.require_subcommand(1);
    RunConfig cfg;
    std::string method = "eemd-arimax", weight_mode = "literal-distance";
    std::size_t lag = 0;

    const auto add_common = [&](CLI::App* sub) {
        sub->add_option("--manifest", cfg.manifest_path, "Dataset manifest (key = value)")->required();
        sub->add_option("--out", cfg.output_dir, "Output directory")->capture_default_str();
        sub->add_option("--lag", lag, "Days by which exogenous variables lead cases (default from the manifest)");
    };
    const auto add_eemd = [&](CLI::App* sub) {
        sub->add_option("--seed", cfg.seed, "Master seed for the ensemble noise")->capture_default_str();
        sub->add_option("--ensembles", cfg.eemd.num_ensembles, "Ensemble size m")->capture_default_str();
        sub->add_option("--noise-ratio", cfg.eemd.noise_ratio, "Noise amplitude relative to the signal's std")
            ->capture_default_str();
        sub->add_option("--imfs", cfg.eemd.num_imfs, "Number of IMFs s")->capture_default_str();
    };
    const auto add_graph = [&](CLI::App* sub) {
        sub->add_option("--weight-mode", weight_mode, "Edge weights")
            ->check(CLI::IsMember({"literal-distance", "gaussian-kernel"}))
            ->capture_default_str();
    };

    auto* correlate = app.add_subcommand("correlate", "Spearman screening of exogenous variables per city");
    add_common(correlate);
    auto* predict = app.add_subcommand("predict", "Fit ARIMAX or EEMD-ARIMAX per city");
    add_common(predict);
    add_eemd(predict);
    predict->add_option("--method", method, "Forecasting method")
        ->check(CLI::IsMember({"arimax", "eemd-arimax"}))
        ->capture_default_str();
    auto* detect = app.add_subcommand("detect", "Match prediction errors with spectral anomalies");
    add_common(detect);
    add_graph(detect);
    detect->add_option("--predictions", cfg.predictions_dir, "Directory holding prediction_<city>.csv")->required();
    detect->add_option("--alpha", cfg.alpha, "Accentuator strength")->capture_default_str();
    auto* normalize = app.add_subcommand("normalize", "Low-pass filter the cross-city case signal");
    add_common(normalize);
    add_graph(normalize);
    normalize->add_option("--cutoff", cfg.cutoff, "Fraction of the spectrum kept")->capture_default_str();
    auto* decompose = app.add_subcommand("decompose", "EEMD of one city's cases");
    add_common(decompose);
    add_eemd(decompose);
    decompose->add_option("--city", cfg.city, "City id")->required();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }
    for (auto* sub : {correlate, predict, detect, normalize, decompose}) {
        if (sub->parsed() && sub->count("--lag")) cfg.lag_days = lag;
    }
    Streams s{out, err};
    try {
        cfg.method = parse_method(method);
        cfg.weight_mode = parse_weight_mode(weight_mode);
        cfg.eemd.validate();
        if (correlate->parsed()) return cmd_correlate(cfg, s);
        if (predict->parsed()) return cmd_predict(cfg, s);
        if (detect->parsed()) return cmd_detect(cfg, s);
        if (normalize->parsed()) return cmd_normalize(cfg, s);
        return cmd_decompose(cfg, s);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    }
}

}  // namespace eemdx::cli
