#include <cstdio>
#include <exception>
#include <string>

#include "CLI11.hpp"

#include "chargelab/numerics/parallel.hpp"
#include "chargelab/scenario.hpp"

// Exit codes: 0 ok, 1 embedded checks failed (only with --check),
// 2 configuration error, 3 runtime failure.
int main(int argc, char** argv) {
    CLI::App app{"chargelab: classical and quantum point-charge laboratory"};
    app.require_subcommand(1);

    CLI::App* run = app.add_subcommand("run", "run a scenario from a JSON config");
    std::string config_path;
    std::string out_dir;
    bool check = false;
    int threads = 0;
    run->add_option("config", config_path, "scenario config (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    run->add_flag("--check", check, "fail the exit code if embedded checks fail");
    run->add_option("--out", out_dir, "output directory (overrides the config)");
    run->add_option("--threads", threads, "worker thread count (0 = default)")
        ->check(CLI::NonNegativeNumber);

    CLI11_PARSE(app, argc, argv);

    try {
        if (threads > 0) chargelab::set_thread_count(threads);
        const auto cfg = chargelab::ScenarioConfig::parse_file(config_path);
        const auto art = chargelab::run_scenario(cfg, out_dir);
        std::fputs(chargelab::emit_report(art).c_str(), stdout);
        if (check && !art.checks_passed) return 1;
        return 0;
    } catch (const chargelab::ConfigError& ex) {
        std::fprintf(stderr, "error: %s\n", ex.what());
        return 2;
    } catch (const std::exception& ex) {
        std::fprintf(stderr, "error: %s\n", ex.what());
        return 3;
    }
}
