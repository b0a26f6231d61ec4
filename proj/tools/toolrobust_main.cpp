#include <iostream>

#include <CLI11.hpp>

#include "toolrobust/cli.hpp"

using namespace toolrobust;

int main(int argc, char** argv) {
    CLI::App app{"Noise-injected tool-use benchmark: generate environments, run a model, score, augment"};
    app.require_subcommand(1);

    RunConfig config;
    std::string levels = "all";
    std::string backend_kind = "scripted";
    std::string anova_stage = "cf";
    std::string scenario;
    std::string plan;

    auto common = [&](CLI::App* cmd) {
        cmd->add_option("--out", config.out_dir, "Output directory")->capture_default_str();
        cmd->add_option("--levels", levels, "Comma-separated levels: clean,slight,medium,heavy,union or all")
            ->capture_default_str();
        cmd->add_option("--scenario", scenario, "Only use cases from this scenario");
    };

    auto* generate = app.add_subcommand("generate", "Build noisy environments from a catalog");
    common(generate);
    generate->add_option("--catalog", config.catalog_path, "Catalog file")->required();
    generate->add_option("--seed", config.seed, "Run seed")->capture_default_str();

    auto* run = app.add_subcommand("run", "Query a model for every environment case (resumable)");
    common(run);
    run->add_option("--env-dir", config.env_dir, "Directory holding env_<level>.json (default: --out)");
    run->add_option("--backend", backend_kind, "http or scripted")
        ->check(CLI::IsMember({"http", "scripted"}))
        ->capture_default_str();
    run->add_option("--endpoint", config.backend.endpoint, "Chat-completion URL");
    run->add_option("--model", config.backend.model_name, "Model name");
    run->add_option("--script", config.backend.script_path, "Scripted answers (JSON object id -> text)");
    run->add_option("--concurrency", config.backend.concurrency_limit, "Max requests in flight")->capture_default_str();
    run->add_option("--timeout", config.backend.timeout_seconds, "Request timeout in seconds")->capture_default_str();
    run->add_option("--retries", config.backend.max_retries, "Retries per request")->capture_default_str();
    run->add_option("--temperature", config.backend.temperature, "Sampling temperature")->capture_default_str();
    run->add_option("--api-key-env", config.backend.api_key_env, "Environment variable holding the API key")
        ->capture_default_str();

    auto* score = app.add_subcommand("score", "Score transcripts and write results.json / report.txt");
    common(score);
    score->add_option("--env-dir", config.env_dir, "Directory holding env_<level>.json (default: --out)");
    score->add_option("--anova-stage", anova_stage, "Stage compared across levels: ts, pi or cf")
        ->check(CLI::IsMember({"ts", "pi", "cf"}))
        ->capture_default_str();

    auto* augment = app.add_subcommand("augment", "Rewrite trajectories into noisy environments and export training records");
    common(augment);
    augment->add_option("--catalog", config.catalog_path, "Catalog the trajectories were generated against");
    augment->add_option("--trajectories", config.trajectories_path, "Trajectory file (JSON lines)");
    augment->add_option("--seed", config.seed, "Run seed")->capture_default_str();
    augment->add_option("--plan", plan, "Per-level counts, e.g. slight=3000,medium=3000,heavy=3000,union=1500");
    augment->add_option("--candidates", config.candidates_path, "Generated queries to deduplicate, one per line");
    augment->add_option("--pool", config.pool_path, "Existing queries, one per line");
    augment->add_option("--threshold", config.dedup_threshold, "Rouge-L rejection threshold")->capture_default_str();

    auto* report = app.add_subcommand("report", "Render the score table from results.json");
    report->add_option("--out", config.out_dir, "Directory holding results.json")->capture_default_str();
    report->add_option("--results", config.results_path, "Explicit results file");

    CLI11_PARSE(app, argc, argv);

    try {
        config.levels = parse_levels(levels);
        if (!scenario.empty()) config.scenario = scenario;
        config.anova_stage = *stage_from_string(anova_stage);
        config.backend.kind = backend_kind == "http" ? BackendKind::Http : BackendKind::Scripted;
        if (!plan.empty()) config.plan = parse_plan(plan);

        if (*generate) return cmd_generate(config, std::cerr);
        if (*run) return cmd_run(config, std::cerr);
        if (*score) return cmd_score(config, std::cout);
        if (*augment) return cmd_augment(config, std::cerr);
        if (*report) return cmd_report(config, std::cout);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
