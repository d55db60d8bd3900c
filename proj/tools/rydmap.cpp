#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rydmap/config.hpp"
#include "rydmap/run.hpp"
#include "rydmap/validation.hpp"

namespace {

int run_validate(const std::string& data_file) {
    const rydmap::AtomicStructure atom(rydmap::DefectTable::load(rydmap::resolve_data_file(data_file).string()));
    int failed = 0;
    for (const auto& c : rydmap::run_invariant_suite(atom)) {
        std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << ": " << c.detail << "\n";
        failed += !c.pass;
    }
    return failed == 0 ? 0 : 4;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Rydberg pair potentials, effective spin models and quench dynamics"};
    std::string mode;
    std::string config_path;
    std::vector<std::string> overrides;
    unsigned workers = 0;
    std::string out_dir;
    bool echo = false;
    app.add_option("mode", mode, "pair-spectrum | c6 | quench-spin | quench-full | scan | validate")
        ->required()
        ->check(CLI::IsMember({"pair-spectrum", "c6", "quench-spin", "quench-full", "scan", "validate"}));
    app.add_option("config", config_path, "JSON config file (optional for validate)");
    app.add_option("--set", overrides, "override a scalar key, e.g. --set fields.b_gauss=6.9")->take_all();
    app.add_option("--workers", workers, "worker threads (0 = all cores)");
    app.add_option("--out", out_dir, "output directory (overrides output.dir)");
    app.add_flag("--echo", echo, "print the resolved config before running");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (mode == "validate") {
            std::string data_file = "rb87_quantum_defects.json";
            if (!config_path.empty()) data_file = rydmap::parse_config(config_path, overrides).data_file;
            return run_validate(data_file);
        }
        if (config_path.empty()) throw rydmap::ConfigError("mode " + mode + " needs a config file");
        overrides.insert(overrides.begin(), "mode=" + mode);
        const auto config = rydmap::parse_config(config_path, overrides);
        if (echo) std::cout << rydmap::serialize_config(config);
        rydmap::RunOptions opt;
        opt.workers.workers = workers;
        opt.output_dir = out_dir;
        const auto manifest = rydmap::run(config, opt);
        std::cerr << "rydmap: " << mode << " finished in " << manifest.wall_time_s << " s, config hash "
                  << manifest.config_hash << "\n";
        for (const auto& w : manifest.warnings) std::cerr << "warning: " << w << "\n";
        return 0;
    } catch (const rydmap::Error& e) {
        std::cerr << "rydmap: error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "rydmap: internal error: " << e.what() << "\n";
        return 1;
    }
}
