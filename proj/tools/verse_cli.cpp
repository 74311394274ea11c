#include <iostream>
#include <string>
#include <string_view>

#include <CLI11.hpp>

#include "verse/plan.hpp"

namespace {

constexpr std::string_view kUsage =
    "Streaming class-incremental learning with virtual-gradient updates and semantic memory\n"
    "\n"
    "usage: verse <command> [options]\n"
    "\n"
    "commands:\n"
    "  generate   Write a synthetic dataset as feature files\n"
    "  run        Run a learner x scheme x seed grid\n"
    "  ablate     Sweep one hyperparameter axis\n"
    "  report     Re-summarize persisted records\n"
    "\n"
    "Run 'verse <command> --help' for the options of a command.\n";

// Each command is parsed by its own top-level app so that --config files
// apply to the command's options (CLI11 reads config files at the root).
int dispatch(const std::string& command, int argc, char** argv) {
    CLI::App app{"verse " + command, "verse " + command};
    verse::PlanOptions opts;
    std::string axis;
    std::vector<std::string> values;
    std::string report_dir{"verse_out"};

    if (command == "report") {
        app.description("Re-summarize persisted records");
        app.add_option("--out,dir", report_dir, "Directory holding eval_points.jsonl and summary.jsonl");
    } else {
        verse::add_plan_options(app, opts);
    }
    if (command == "ablate") {
        app.add_option("--axis", axis, "buffer_capacity | lambda | accept_rate | ema_on_off | replacement_policy")
            ->required();
        app.add_option("--values", values, "Values along the axis")->delimiter(',')->required();
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (command == "generate") return verse::cmd_generate(verse::resolve_plan(opts), std::cout, std::cerr);
        if (command == "run") return verse::cmd_run(verse::resolve_plan(opts), opts.dry_run, std::cout, std::cerr);
        if (command == "ablate") {
            return verse::cmd_ablate(verse::resolve_plan(opts), verse::parse_axis(axis), values, opts.dry_run,
                                     std::cout, std::cerr);
        }
        return verse::cmd_report(report_dir, std::cout, std::cerr);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::cerr << kUsage;
        return 2;
    }
    const std::string command = argv[1];
    if (command == "-h" || command == "--help") {
        std::cout << kUsage;
        return 0;
    }
    if (command != "generate" && command != "run" && command != "ablate" && command != "report") {
        std::cerr << "unknown command '" << command << "'\n\n" << kUsage;
        return 2;
    }
    return dispatch(command, argc - 1, argv + 1);
}
