// Batch front end: one subcommand per experiment kind, JSON config in,
// CSV/JSON reports out. Exit code is 0 iff every check passes.
#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>

#include "qlp/error.hpp"
#include "qlp/harness.hpp"

namespace {

struct Options {
    std::string config;
    std::optional<std::string> out;
    std::optional<long> seed;
    std::optional<int> threads;
};

void add_common(CLI::App* cmd, Options& o) {
    cmd->add_option("--config", o.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--out", o.out, "output directory (overrides output_dir)");
    cmd->add_option("--seed", o.seed, "random seed (overrides seed)")->check(CLI::NonNegativeNumber);
    cmd->add_option("--threads", o.threads, "worker threads (overrides threads)")->check(CLI::PositiveNumber);
}

int execute(const std::string& kind, const Options& o) {
    qlp::ordered_json doc;
    {
        std::ifstream in(o.config);
        try {
            doc = qlp::ordered_json::parse(in);
        } catch (const std::exception& e) {
            std::cerr << "error: " << o.config << ": " << e.what() << "\n";
            return 2;
        }
    }
    if (doc.is_object() && doc.contains("kind") && doc["kind"] != kind) {
        std::cerr << "error: config kind '" << doc["kind"].dump() << "' does not match subcommand '" << kind << "'\n";
        return 2;
    }
    doc["kind"] = kind;
    if (o.seed) doc["seed"] = *o.seed;
    if (o.threads) doc["threads"] = *o.threads;
    if (o.out) doc["output_dir"] = *o.out;

    qlp::ExperimentConfig cfg;
    try {
        cfg = qlp::parse_config(doc);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    const auto report = qlp::run(cfg);
    try {
        for (const auto& path : qlp::write_report(report, cfg.output_dir)) std::cout << "wrote " << path.string() << "\n";
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    for (const auto& [name, value] : report.metrics) std::cout << "  " << name << " = " << qlp::format_double(value) << "\n";
    for (const auto& [name, ok] : report.status) std::cout << (ok ? "PASS " : "FAIL ") << name << "\n";
    for (const auto& msg : report.messages) std::cout << "  note: " << msg << "\n";
    return report.passed() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Quasilinear parabolic solver and verification harness"};
    app.require_subcommand(1);
    Options opts;
    std::string kind;

    for (const char* name : {"solve", "jet"}) {
        auto* cmd = app.add_subcommand(name, std::string("run a ") + name + " experiment");
        add_common(cmd, opts);
        cmd->callback([&kind, name] { kind = name; });
    }
    auto* verify = app.add_subcommand("verify", "inequality verifiers");
    verify->require_subcommand(1);
    for (const char* name : {"garding", "gn", "embedding"}) {
        auto* cmd = verify->add_subcommand(name);
        add_common(cmd, opts);
        cmd->callback([&kind, name] { kind = name; });
    }
    auto* study = app.add_subcommand("study", "numerical studies");
    study->require_subcommand(1);
    for (const char* name : {"convergence", "depend", "uniqueness"}) {
        auto* cmd = study->add_subcommand(name);
        add_common(cmd, opts);
        cmd->callback([&kind, name] { kind = name; });
    }

    CLI11_PARSE(app, argc, argv);
    return execute(kind, opts);
}
