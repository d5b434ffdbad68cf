#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "regrace/commands.hpp"
#include "regrace/config.hpp"

int main(int argc, char** argv) {
    CLI::App app{"regrace — object-graph place recognition and registration pipeline"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> overrides;
    bool help_config = false;
    app.add_option("--config", config_path, "flat key = value config file");
    app.add_option("--set", overrides, "override one config key, e.g. --set voxel_size=0.2");
    app.add_flag("--help-config", help_config, "print all config keys with defaults and exit");

    // per-command shorthand flags that map onto config keys
    struct Shorthand {
        std::string key, value;
    };
    std::vector<Shorthand> shorthands;
    const auto add_path_flag = [&](CLI::App* cmd, const std::string& flag, const std::string& key,
                                   const std::string& doc) {
        cmd->add_option_function<std::string>(
            flag, [&shorthands, key](const std::string& v) { shorthands.push_back({key, v}); },
            doc);
    };

    const auto add_common = [&](CLI::App* cmd) {
        cmd->fallthrough();  // lets --set / --config appear after the subcommand
        add_path_flag(cmd, "--out", "out_path", "output path");
        add_path_flag(cmd, "--seed", "seed", "master RNG seed");
        add_path_flag(cmd, "--workers", "workers", "worker threads");
        return cmd;
    };

    CLI::App* synth = add_common(app.add_subcommand("synth", "emit a synthetic dataset"));
    (void)synth;
    CLI::App* build = add_common(app.add_subcommand("build", "fuse scans into submaps"));
    add_path_flag(build, "--scans", "scans_dir", "scan directory");
    add_path_flag(build, "--labels", "labels_dir", "label directory");
    add_path_flag(build, "--poses", "poses_path", "pose file");
    add_path_flag(build, "--times", "times_path", "timestamp file");
    add_path_flag(build, "--submaps", "submaps_path", "output submap container");
    CLI::App* extract =
        add_common(app.add_subcommand("extract", "cluster, describe, and embed submaps"));
    add_path_flag(extract, "--submaps", "submaps_path", "input submap container");
    add_path_flag(extract, "--features", "features_path", "output feature container");
    add_path_flag(extract, "--weights", "weights_path", "network weights (empty = seeded random)");
    CLI::App* index = add_common(app.add_subcommand("index", "collect embeddings into an index"));
    add_path_flag(index, "--features", "features_path", "input feature container");
    add_path_flag(index, "--index", "index_path", "output index container");
    CLI::App* query =
        add_common(app.add_subcommand("query", "re-ranked revisit decisions per submap"));
    add_path_flag(query, "--features", "features_path", "input feature container");
    add_path_flag(query, "--index", "index_path", "input index container");
    CLI::App* reg = add_common(app.add_subcommand("register", "align submap pairs"));
    add_path_flag(reg, "--features", "features_path", "input feature container");
    add_path_flag(reg, "--pairs", "pairs_path", "explicit id pairs (default: all nearby pairs)");
    CLI::App* evalpr =
        add_common(app.add_subcommand("eval-pr", "place-recognition metrics from decisions"));
    add_path_flag(evalpr, "--records", "records_path", "decision records from query");
    CLI::App* evalreg =
        add_common(app.add_subcommand("eval-reg", "registration metrics from records"));
    add_path_flag(evalreg, "--records", "records_path", "registration records from register");

    CLI11_PARSE(app, argc, argv);

    if (help_config) {
        std::cout << regrace::Config::describe();
        return 0;
    }

    try {
        regrace::Config cfg;
        if (!config_path.empty()) cfg.load_file(config_path);
        for (const std::string& kv : overrides) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) {
                std::cerr << "usage error: --set expects key=value, got '" << kv << "'\n";
                return 2;
            }
            cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
        }
        for (const Shorthand& s : shorthands) cfg.set(s.key, s.value);

        return regrace::run_command(app.get_subcommands().front()->get_name(), cfg, std::cout,
                                    std::cerr);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
