// zonerl command line: validate-theory, run-glucose, sweep-budget, ablation.
#include "zonerl/errors.hpp"
#include "zonerl/experiment.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <iostream>
#include <sstream>

namespace {

struct CommonArgs {
    std::string config;
    std::string out;
    std::string seeds;
    int parallel = 0;
};

std::vector<std::uint64_t> parse_seeds(const std::string& csv) {
    std::vector<std::uint64_t> seeds;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        try {
            std::size_t pos = 0;
            seeds.push_back(std::stoull(item, &pos));
            if (pos != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw zonerl::ConfigError("--seeds: '" + item + "' is not an unsigned integer");
        }
    }
    if (seeds.empty()) throw zonerl::ConfigError("--seeds: empty list");
    return seeds;
}

zonerl::ExperimentConfig resolve(const CommonArgs& a) {
    auto cfg = a.config.empty() ? zonerl::ExperimentConfig{} : zonerl::load_config(a.config);
    if (!a.out.empty()) cfg.output_dir = a.out;
    if (!a.seeds.empty()) cfg.seeds = parse_seeds(a.seeds);
    if (a.parallel > 0) cfg.parallel = a.parallel;
    cfg.validate();
    return cfg;
}

void setup_logging() {
    spdlog::set_pattern("[%H:%M:%S] [%^%l%$] %v");
    spdlog::set_level(spdlog::level::info);
    if (const char* lvl = std::getenv("ZONE_RL_LOG")) {
        const auto level = spdlog::level::from_str(lvl);
        // from_str maps unknown names to off; only accept it when asked for explicitly
        if (level != spdlog::level::off || std::string(lvl) == "off") spdlog::set_level(level);
        else spdlog::warn("ZONE_RL_LOG='{}' not recognised, keeping info", lvl);
    }
}

void log_rows(const nlohmann::json& report) {
    if (!report.contains("rows")) return;
    for (const auto& r : report["rows"])
        spdlog::info("{} / {}: TIR {:.1f} TAR {:.1f} TBR {:.1f} mean {:.1f} AIME {:.2f}", r["Task"].get<std::string>(),
                     r["Model"].get<std::string>(), r["TIR"]["mean"].get<double>(), r["TAR"]["mean"].get<double>(),
                     r["TBR"]["mean"].get<double>(), r["MeanGlucose"]["mean"].get<double>(),
                     r["AIME"]["mean"].get<double>());
}

} // namespace

int main(int argc, char** argv) {
    setup_logging();
    CLI::App app{"Target-zone impulse and switching control toolkit"};
    app.require_subcommand(1);

    CommonArgs args;
    using Cmd = zonerl::CommandResult (*)(const zonerl::ExperimentConfig&);
    std::vector<std::pair<CLI::App*, Cmd>> verbs;
    auto add_verb = [&](const char* name, const char* help, Cmd fn) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--config", args.config, "JSON configuration file")->check(CLI::ExistingFile);
        sub->add_option("--out", args.out, "output directory (overrides output_dir)");
        sub->add_option("--seeds", args.seeds, "comma separated evaluation seeds");
        sub->add_option("--parallel", args.parallel, "worker threads")->check(CLI::PositiveNumber);
        verbs.emplace_back(sub, fn);
    };
    add_verb("validate-theory", "numerical checks on a discrete model", zonerl::cmd_validate_theory);
    add_verb("run-glucose", "train and evaluate on the glucose environment", zonerl::cmd_run_glucose);
    add_verb("sweep-budget", "evaluate over a list of intervention budgets", zonerl::cmd_sweep_budget);
    add_verb("ablation", "carbohydrate visibility and constraint ablation", zonerl::cmd_ablation);

    CLI11_PARSE(app, argc, argv);

    try {
        const auto cfg = resolve(args);
        for (const auto& [sub, fn] : verbs) {
            if (!sub->parsed()) continue;
            spdlog::info("{}: output in {}", sub->get_name(), cfg.output_dir);
            spdlog::debug("config {}", zonerl::to_json(cfg).dump());
            const auto res = fn(cfg);
            log_rows(res.report);
            for (const auto& f : res.failures) spdlog::error("check failed: {}", f);
            return res.exit_code;
        }
    } catch (const zonerl::ConfigError& e) {
        spdlog::error("configuration: {}", e.what());
        return 2;
    } catch (const zonerl::ModelError& e) {
        spdlog::error("model: {}", e.what());
        return 3;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return 1;
    }
    return 1;
}
