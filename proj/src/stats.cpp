#include "toolrobust/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <set>

namespace toolrobust {

namespace {

constexpr double kBetaEps = 1e-15;
constexpr double kTiny = 1e-300;
constexpr int kBetaMaxIter = 10000;

// Modified Lentz evaluation of the incomplete beta continued fraction.
double beta_continued_fraction(double x, double a, double b) {
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kBetaMaxIter; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kBetaEps) return h;
    }
    throw std::runtime_error("incomplete beta continued fraction did not converge");
}

}  // namespace

double mean(std::span<const double> values) {
    if (values.empty()) return 0.0;
    return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double sample_variance(std::span<const double> values) {
    if (values.size() < 2) return 0.0;
    const double m = mean(values);
    double ss = 0.0;
    for (double v : values) ss += (v - m) * (v - m);
    return ss / static_cast<double>(values.size() - 1);
}

double sample_stddev(std::span<const double> values) { return std::sqrt(sample_variance(values)); }

double regularized_incomplete_beta(double x, double a, double b) {
    if (!(a > 0.0) || !(b > 0.0)) throw std::invalid_argument("incomplete beta needs a, b > 0");
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(log_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(x, a, b) / a;
    return 1.0 - front * beta_continued_fraction(1.0 - x, b, a) / b;
}

double f_upper_tail(double f, double df1, double df2) {
    if (!(f > 0.0)) return 1.0;
    if (std::isinf(f)) return 0.0;
    // P(F > f) = I_{df2 / (df2 + df1 f)}(df2 / 2, df1 / 2)
    const double x = df2 / (df2 + df1 * f);
    return std::clamp(regularized_incomplete_beta(x, df2 / 2.0, df1 / 2.0), 0.0, 1.0);
}

AnovaResult welch_anova(const std::vector<ScoreGroup>& groups) {
    if (groups.size() < 2) throw std::invalid_argument("Welch's ANOVA needs at least two groups");
    const auto k = static_cast<double>(groups.size());
    std::vector<double> n, m, var;
    for (const auto& g : groups) {
        if (g.values.size() < 2) throw std::invalid_argument("group '" + g.label + "' needs at least two values");
        n.push_back(static_cast<double>(g.values.size()));
        m.push_back(mean(g.values));
        var.push_back(sample_variance(g.values));
    }

    const bool any_constant = std::any_of(var.begin(), var.end(), [](double v) { return v == 0.0; });
    if (any_constant) {
        const bool all_constant = std::all_of(var.begin(), var.end(), [](double v) { return v == 0.0; });
        const bool all_equal = std::all_of(m.begin(), m.end(), [&](double v) { return v == m.front(); });
        if (all_constant && all_equal)
            return {0.0, 1.0, k - 1.0, std::numeric_limits<double>::infinity()};
        for (std::size_t i = 0; i < groups.size(); ++i)
            if (var[i] == 0.0) throw DegenerateVarianceError(groups[i].label);
    }

    std::vector<double> w(groups.size());
    double w_sum = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        w[i] = n[i] / var[i];
        w_sum += w[i];
    }
    double weighted_mean = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) weighted_mean += w[i] * m[i];
    weighted_mean /= w_sum;

    double between = 0.0;
    double lambda = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        between += w[i] * (m[i] - weighted_mean) * (m[i] - weighted_mean);
        const double r = 1.0 - w[i] / w_sum;
        lambda += r * r / (n[i] - 1.0);
    }
    between /= (k - 1.0);
    const double correction = 1.0 + 2.0 * (k - 2.0) / (k * k - 1.0) * lambda;

    AnovaResult out;
    out.f_statistic = between / correction;
    out.df1 = k - 1.0;
    out.df2 = (k * k - 1.0) / (3.0 * lambda);
    out.p_value = f_upper_tail(out.f_statistic, out.df1, out.df2);
    return out;
}

MeansTable stage_means(const std::vector<EvalRecord>& records, const std::vector<NoiseLevel>& expected) {
    MeansTable t;
    std::map<std::pair<NoiseLevel, Stage>, std::pair<long, long>> overall;  // (sum, count)
    std::map<std::tuple<std::string, NoiseLevel, Stage>, std::pair<long, long>> by_scenario;
    for (const auto& r : records) {
        ++t.counts[r.level];
        for (Stage s : kAllStages) {
            auto& o = overall[{r.level, s}];
            o.first += r.scores.at(s);
            ++o.second;
            auto& sc = by_scenario[{r.scenario, r.level, s}];
            sc.first += r.scores.at(s);
            ++sc.second;
        }
    }
    for (const auto& [key, acc] : overall) t.overall[key] = 100.0 * static_cast<double>(acc.first) / static_cast<double>(acc.second);
    for (const auto& [key, acc] : by_scenario)
        t.by_scenario[key] = 100.0 * static_cast<double>(acc.first) / static_cast<double>(acc.second);
    for (NoiseLevel l : expected)
        if (!t.counts.contains(l)) t.warnings.push_back("no records for level '" + std::string(to_string(l)) + "'; omitted");
    return t;
}

std::map<std::pair<NoiseLevel, Stage>, double> delta_vs_clean(const std::map<std::pair<NoiseLevel, Stage>, double>& means) {
    std::map<std::pair<NoiseLevel, Stage>, double> out;
    for (Stage s : kAllStages)
        if (!means.contains({NoiseLevel::Clean, s})) throw std::invalid_argument("delta_vs_clean: Clean level missing");
    for (const auto& [key, value] : means) out[key] = std::fabs(value - means.at({NoiseLevel::Clean, key.second}));
    return out;
}

double extreme_difference(std::span<const double> level_means) {
    if (level_means.empty()) return 0.0;
    auto [lo, hi] = std::minmax_element(level_means.begin(), level_means.end());
    return *hi - *lo;
}

double round2(double v) { return std::round(v * 100.0) / 100.0; }

std::string format2(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f", round2(v));
    return buf;
}

Report build_report(std::vector<EvalRecord> records, const std::vector<NoiseLevel>& levels, Stage anova_stage) {
    Report r;
    r.levels = levels;
    r.anova_stage = anova_stage;
    r.means = stage_means(records, levels);
    r.warnings = r.means.warnings;
    if (records.empty()) r.warnings.emplace_back("no transcripts to score");

    std::set<std::string> scenarios;
    for (const auto& rec : records) {
        scenarios.insert(rec.scenario);
        if (rec.hallucinated) ++r.hallucinations[rec.level];
        if (rec.noise_corrected) ++r.tool_noise_corrections[rec.level];
        if (rec.param_noise_corrected) ++r.param_noise_corrections[rec.level];
        if (rec.parse_failed) ++r.parse_failures[rec.level];
    }
    r.scenarios.assign(scenarios.begin(), scenarios.end());

    if (r.means.counts.contains(NoiseLevel::Clean)) r.deltas = delta_vs_clean(r.means.overall);

    for (Stage s : kAllStages) {
        std::vector<double> per_level;
        for (NoiseLevel l : levels)
            if (auto it = r.means.overall.find({l, s}); it != r.means.overall.end()) per_level.push_back(it->second);
        if (per_level.size() >= 2) {
            r.extreme[s] = extreme_difference(per_level);
            r.stddev[s] = sample_stddev(per_level);
        }
    }

    std::vector<ScoreGroup> groups;
    for (NoiseLevel l : levels) {
        ScoreGroup g{std::string(to_string(l)), {}};
        for (const auto& rec : records)
            if (rec.level == l) g.values.push_back(static_cast<double>(rec.scores.at(anova_stage)));
        if (!g.values.empty()) groups.push_back(std::move(g));
    }
    try {
        r.anova = welch_anova(groups);
    } catch (const std::exception& e) {
        r.anova_error = e.what();
    }
    r.records = std::move(records);
    return r;
}

json to_json(const Report& r) {
    auto stage_obj = [&](auto&& value_of) {
        json o = json::object();
        for (Stage s : kAllStages)
            if (auto v = value_of(s)) o[std::string(to_string(s))] = round2(*v);
        return o;
    };

    json levels = json::array();
    for (NoiseLevel l : r.levels) levels.push_back(std::string(to_string(l)));

    json counts = json::object(), means = json::object(), deltas = json::object();
    json halluc = json::object(), corrections = json::object(), failures = json::object();
    std::size_t halluc_total = 0;
    for (NoiseLevel l : r.levels) {
        const std::string name(to_string(l));
        auto c = r.means.counts.find(l);
        if (c == r.means.counts.end()) continue;
        counts[name] = c->second;
        means[name] = stage_obj([&](Stage s) -> std::optional<double> {
            auto it = r.means.overall.find({l, s});
            return it == r.means.overall.end() ? std::nullopt : std::optional<double>(it->second);
        });
        if (!r.deltas.empty())
            deltas[name] = stage_obj([&](Stage s) -> std::optional<double> {
                auto it = r.deltas.find({l, s});
                return it == r.deltas.end() ? std::nullopt : std::optional<double>(it->second);
            });
        auto get = [](const std::map<NoiseLevel, std::size_t>& m, NoiseLevel lv) {
            auto it = m.find(lv);
            return it == m.end() ? std::size_t{0} : it->second;
        };
        halluc[name] = get(r.hallucinations, l);
        halluc_total += get(r.hallucinations, l);
        corrections[name] = {{"tool", get(r.tool_noise_corrections, l)}, {"parameter", get(r.param_noise_corrections, l)}};
        failures[name] = get(r.parse_failures, l);
    }
    halluc["total"] = halluc_total;

    json scenario_means = json::object();
    for (const auto& sc : r.scenarios) {
        json per = json::object();
        for (NoiseLevel l : r.levels) {
            json o = stage_obj([&](Stage s) -> std::optional<double> {
                auto it = r.means.by_scenario.find({sc, l, s});
                return it == r.means.by_scenario.end() ? std::nullopt : std::optional<double>(it->second);
            });
            if (!o.empty()) per[std::string(to_string(l))] = std::move(o);
        }
        scenario_means[sc] = std::move(per);
    }

    json anova = {{"stage", std::string(to_string(r.anova_stage))}};
    if (r.anova) {
        anova["f"] = r.anova->f_statistic;
        anova["p"] = r.anova->p_value;
        anova["df1"] = r.anova->df1;
        anova["df2"] = std::isfinite(r.anova->df2) ? json(r.anova->df2) : json(nullptr);
    } else {
        anova["error"] = r.anova_error;
    }

    json records = json::array();
    for (const auto& rec : r.records) records.push_back(to_json(rec));

    return {{"levels", std::move(levels)},
            {"counts", std::move(counts)},
            {"means", std::move(means)},
            {"scenario_means", std::move(scenario_means)},
            {"deltas_vs_clean", std::move(deltas)},
            {"extreme_difference", stage_obj([&](Stage s) -> std::optional<double> {
                 auto it = r.extreme.find(s);
                 return it == r.extreme.end() ? std::nullopt : std::optional<double>(it->second);
             })},
            {"stddev_across_levels", stage_obj([&](Stage s) -> std::optional<double> {
                 auto it = r.stddev.find(s);
                 return it == r.stddev.end() ? std::nullopt : std::optional<double>(it->second);
             })},
            {"anova", std::move(anova)},
            {"hallucinations", std::move(halluc)},
            {"noise_corrections", std::move(corrections)},
            {"parse_failures", std::move(failures)},
            {"warnings", r.warnings},
            {"records", std::move(records)}};
}

std::string render_table(const json& results) {
    auto pad = [](std::string s, std::size_t width) {
        if (s.size() < width) s.append(width - s.size(), ' ');
        return s;
    };
    std::vector<std::string> scenarios;
    for (const auto& [sc, _] : results.value("scenario_means", json::object()).items()) scenarios.push_back(sc);

    std::string out;
    std::string header = pad("Level", 10) + pad("All", 9);
    for (const auto& sc : scenarios) header += pad(sc, std::max<std::size_t>(9, sc.size() + 2));
    while (header.back() == ' ') header.pop_back();
    out += header + "\n";

    const json& means = results.value("means", json::object());
    const json& sm = results.value("scenario_means", json::object());
    for (Stage s : kAllStages) {
        const std::string key(to_string(s));
        out += "-- " + std::string(stage_label(s)) + "\n";
        for (const auto& level_json : results.value("levels", json::array())) {
            const std::string level = level_json.get<std::string>();
            if (!means.contains(level)) continue;
            std::string row = level;
            row[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(row[0])));
            row = pad(row, 10) + pad(format2(means[level].value(key, 0.0)), 9);
            for (const auto& sc : scenarios) {
                const std::size_t width = std::max<std::size_t>(9, sc.size() + 2);
                if (sm[sc].contains(level)) row += pad(format2(sm[sc][level].value(key, 0.0)), width);
                else row += pad("-", width);
            }
            while (!row.empty() && row.back() == ' ') row.pop_back();
            out += row + "\n";
        }
    }

    const json& anova = results.value("anova", json::object());
    out += "\nWelch's ANOVA (" + anova.value("stage", std::string("cf")) + "): ";
    if (anova.contains("f")) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "F = %.4f, p = %.4g, df1 = %.4g, df2 = %s", anova["f"].get<double>(),
                      anova["p"].get<double>(), anova["df1"].get<double>(),
                      anova["df2"].is_null() ? "inf" : std::to_string(anova["df2"].get<double>()).c_str());
        out += buf;
    } else {
        out += "unavailable (" + anova.value("error", std::string()) + ")";
    }
    out += "\nTool hallucinations: " + std::to_string(results.value("hallucinations", json::object()).value("total", 0));
    out += "\n";
    for (const auto& w : results.value("warnings", json::array())) out += "warning: " + w.get<std::string>() + "\n";
    return out;
}

}  // namespace toolrobust
