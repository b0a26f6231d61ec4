#include "toolrobust/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>

#include "toolrobust/stats.hpp"

namespace toolrobust {

namespace fs = std::filesystem;

namespace {

std::string join(const std::string& dir, const std::string& file) { return (fs::path(dir) / file).string(); }

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw CliError("output directory '" + dir + "' is not writable");
}

std::string env_dir_of(const RunConfig& c) { return c.env_dir.empty() ? c.out_dir : c.env_dir; }

std::vector<TestCase> load_cases(const RunConfig& c) {
    if (c.catalog_path.empty()) throw CliError("--catalog is required");
    std::vector<TestCase> cases = parse_cases(read_file(c.catalog_path));
    if (c.scenario) std::erase_if(cases, [&](const TestCase& tc) { return tc.scenario != *c.scenario; });
    return cases;
}

Environment load_environment(const RunConfig& c, NoiseLevel level) {
    const std::string path = environment_path(env_dir_of(c), level);
    if (!fs::exists(path)) throw CliError("missing environment file '" + path + "' (run generate first)");
    Environment env = parse_environment(read_file(path));
    if (c.scenario) std::erase_if(env.cases, [&](const PerturbedCase& pc) { return pc.scenario != *c.scenario; });
    return env;
}

json levels_json(const std::vector<NoiseLevel>& levels) {
    json out = json::array();
    for (NoiseLevel l : levels) out.push_back(std::string(to_string(l)));
    return out;
}

}  // namespace

std::string environment_path(const std::string& dir, NoiseLevel level) {
    return join(dir, "env_" + std::string(to_string(level)) + ".json");
}

std::string transcript_path(const std::string& dir, NoiseLevel level) {
    return join(dir, "transcript_" + std::string(to_string(level)) + ".jsonl");
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::vector<NoiseLevel> parse_levels(std::string_view text) {
    std::vector<NoiseLevel> out;
    std::stringstream ss{std::string(text)};
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::string name(trim(item));
        std::transform(name.begin(), name.end(), name.begin(), [](unsigned char ch) { return std::tolower(ch); });
        if (name == "all") {
            out.assign(std::begin(kAllLevels), std::end(kAllLevels));
            continue;
        }
        auto level = level_from_string(name);
        if (!level) throw CliError("unknown level '" + item + "'");
        if (std::find(out.begin(), out.end(), *level) == out.end()) out.push_back(*level);
    }
    if (out.empty()) throw CliError("no levels selected");
    return out;
}

int cmd_generate(const RunConfig& config, std::ostream& log) {
    if (config.levels.empty()) throw CliError("no levels selected");
    const std::string catalog_text = read_file(config.catalog_path);
    const std::vector<TestCase> cases = load_cases(config);
    if (cases.empty()) throw CliError("catalog has no cases to perturb");
    ensure_dir(config.out_dir);

    json counts = json::object();
    for (NoiseLevel level : config.levels) {
        Environment env{level, config.seed, build_environment(cases, level, config.seed)};
        write_file(environment_path(config.out_dir, level), serialize_environment(env));
        counts[std::string(to_string(level))] = env.cases.size();
        log << to_string(level) << ": " << env.cases.size() << " cases\n";
    }

    const json config_json = {{"command", "generate"},
                              {"catalog_sha", hex64(SeedHasher(0).add(catalog_text).finish())},
                              {"levels", levels_json(config.levels)},
                              {"scenario", config.scenario ? json(*config.scenario) : json(nullptr)},
                              {"seed", config.seed}};
    const json manifest = {{"seed", config.seed},
                           {"config_hash", hex64(SeedHasher(0).add(config_json.dump()).finish())},
                           {"catalog_cases", cases.size()},
                           {"counts", std::move(counts)}};
    write_file(join(config.out_dir, "manifest_generate.json"), canonical_dump(manifest));
    return 0;
}

int cmd_run(const RunConfig& config, std::ostream& log) {
    ensure_dir(config.out_dir);
    std::unique_ptr<CompletionBackend> backend = make_backend(config.backend);
    int failures = 0;
    for (NoiseLevel level : config.levels) {
        const Environment env = load_environment(config, level);
        const std::string path = transcript_path(config.out_dir, level);

        std::map<std::string, TranscriptEntry> done;
        if (fs::exists(path))
            for (auto& e : parse_transcript(read_file(path)))
                if (e.answered()) done[e.id] = std::move(e);

        std::vector<PerturbedCase> todo;
        for (const auto& c : env.cases)
            if (!done.contains(c.id)) todo.push_back(c);
        log << to_string(level) << ": " << done.size() << " answered, " << todo.size() << " to run\n";

        std::map<std::string, TranscriptEntry> fresh;
        {
            std::ofstream sink(path, std::ios::app | std::ios::binary);
            if (!sink) throw CliError("cannot write '" + path + "'");
            run_batch(todo, *backend, config.backend.concurrency_limit, [&](const BatchResult& r) {
                TranscriptEntry e{r.case_id, r.text.value_or(""), std::nullopt, r.error};
                sink << to_json(e).dump() << "\n" << std::flush;
                fresh[e.id] = std::move(e);
            });
        }

        std::vector<TranscriptEntry> ordered;
        for (const auto& c : env.cases) {
            if (auto it = done.find(c.id); it != done.end()) ordered.push_back(it->second);
            else ordered.push_back(fresh.at(c.id));
            if (!ordered.back().answered()) {
                ++failures;
                log << "  " << c.id << ": " << *ordered.back().error << "\n";
            }
        }
        write_file(path, serialize_transcript(ordered));
    }
    if (failures > 0) log << failures << " case(s) without an answer; rerun to retry them\n";
    return 0;
}

int cmd_score(const RunConfig& config, std::ostream& log) {
    ensure_dir(config.out_dir);
    std::vector<EvalRecord> records;
    std::vector<NoiseLevel> scored;
    std::vector<std::string> warnings;
    for (NoiseLevel level : config.levels) {
        const Environment env = load_environment(config, level);
        const std::string path = transcript_path(config.out_dir, level);
        std::vector<TranscriptEntry> entries;
        if (fs::exists(path)) entries = parse_transcript(read_file(path));
        if (entries.empty()) {
            warnings.push_back("no transcript entries for level '" + std::string(to_string(level)) + "'");
            continue;
        }
        std::map<std::string, const TranscriptEntry*> by_id;
        for (const auto& e : entries) by_id[e.id] = &e;
        for (const auto& c : env.cases) {
            auto it = by_id.find(c.id);
            records.push_back(it == by_id.end() ? unanswered_record(c, "no answer in transcript")
                                                : evaluate_entry(c, *it->second));
        }
        scored.push_back(level);
    }

    Report report = build_report(std::move(records), scored, config.anova_stage);
    report.levels = config.levels;
    warnings.insert(warnings.end(), report.warnings.begin(), report.warnings.end());
    report.warnings = std::move(warnings);
    const json results = to_json(report);
    write_file(join(config.out_dir, "results.json"), canonical_dump(results));
    const std::string table = render_table(results);
    write_file(join(config.out_dir, "report.txt"), table);
    log << table;
    return 0;
}

int cmd_augment(const RunConfig& config, std::ostream& log) {
    ensure_dir(config.out_dir);
    json manifest = {{"seed", config.seed}};

    if (!config.candidates_path.empty()) {
        auto lines = [](const std::string& path) {
            std::vector<std::string> out;
            if (path.empty()) return out;
            std::istringstream in(read_file(path));
            std::string line;
            while (std::getline(in, line))
                if (!trim(line).empty()) out.emplace_back(trim(line));
            return out;
        };
        const auto candidates = lines(config.candidates_path);
        const auto kept = dedup_queries(candidates, lines(config.pool_path), config.dedup_threshold);
        std::string text;
        for (const auto& q : kept) text += q + "\n";
        write_file(join(config.out_dir, "kept_queries.txt"), text);
        manifest["dedup"] = {{"candidates", candidates.size()}, {"kept", kept.size()}, {"threshold", config.dedup_threshold}};
        log << "dedup: kept " << kept.size() << " of " << candidates.size() << " queries\n";
    }

    if (!config.trajectories_path.empty()) {
        const std::vector<TestCase> cases = load_cases(config);
        const std::vector<Trajectory> trajectories = parse_trajectories(read_file(config.trajectories_path));
        AugmentationPlan plan = config.plan.value_or(AugmentationPlan::defaults());
        // Levels not requested get no augmented copies.
        for (NoiseLevel l : kAllLevels)
            if (std::find(config.levels.begin(), config.levels.end(), l) == config.levels.end()) plan.counts.erase(l);
        const bool with_clean = std::find(config.levels.begin(), config.levels.end(), NoiseLevel::Clean) != config.levels.end();

        AugmentResult result = augment_trajectories(trajectories, cases, plan, config.seed);
        if (!with_clean) {
            std::erase_if(result.trajectories, [](const AugmentedTrajectory& a) { return a.level == NoiseLevel::Clean; });
            result.counts.erase(NoiseLevel::Clean);
        }
        const auto records = export_records(result.trajectories);
        std::string out;
        for (const auto& r : records) out += to_json(r).dump() + "\n";
        write_file(join(config.out_dir, "training_records.jsonl"), out);

        std::string rewritten;
        for (const auto& a : result.trajectories) {
            json j = to_json(a.trajectory);
            j["level"] = std::string(to_string(a.level));
            j["environment"] = a.environment.id;
            rewritten += j.dump() + "\n";
        }
        write_file(join(config.out_dir, "augmented_trajectories.jsonl"), rewritten);

        json counts = json::object();
        for (const auto& [level, n] : result.counts) counts[std::string(to_string(level))] = n;
        manifest["trajectories"] = trajectories.size();
        manifest["counts"] = std::move(counts);
        manifest["records"] = records.size();
        manifest["errors"] = result.errors;
        const json config_json = {{"command", "augment"},
                                  {"levels", levels_json(config.levels)},
                                  {"plan", [&] {
                                       json p = json::object();
                                       for (const auto& [l, n] : plan.counts) p[std::string(to_string(l))] = n;
                                       return p;
                                   }()},
                                  {"seed", config.seed},
                                  {"trajectories_sha", hex64(SeedHasher(0).add(read_file(config.trajectories_path)).finish())}};
        manifest["config_hash"] = hex64(SeedHasher(0).add(config_json.dump()).finish());
        for (const auto& e : result.errors) log << "rewrite error: " << e << "\n";
        log << "augment: " << records.size() << " training records from " << result.trajectories.size()
            << " trajectories\n";
    }

    if (config.candidates_path.empty() && config.trajectories_path.empty())
        throw CliError("augment needs --trajectories and/or --candidates");
    write_file(join(config.out_dir, "manifest_augment.json"), canonical_dump(manifest));
    return 0;
}

int cmd_report(const RunConfig& config, std::ostream& out) {
    const std::string path = config.results_path.empty() ? join(config.out_dir, "results.json") : config.results_path;
    if (!fs::exists(path)) throw CliError("missing results file '" + path + "' (run score first)");
    json results;
    try {
        results = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw CliError("malformed results file '" + path + "': " + e.what());
    }
    out << render_table(results);
    return 0;
}

}  // namespace toolrobust
