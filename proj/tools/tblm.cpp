// tblm: train or replay binary-weight networks from the command line.
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "tblm/app.hpp"

int main(int argc, char** argv) {
    using namespace tblm;
    ParsedArgs args;
    try {
        args = parse_and_validate(argc, argv);
    } catch (const CliError& e) {
        if (e.exit_code == 0) {
            std::cout << e.usage_text;
            return 0;
        }
        std::cerr << "error: " << e.what() << "\n\n" << e.usage_text;
        return e.exit_code;
    }

    try {
        if (args.command == Command::replay) {
            const ReplayReport r = replay(args.genome_path, args.replay_final);
            const std::string text = to_json(r);
            std::cout << text << '\n';
            if (!args.replay_out.empty()) {
                std::filesystem::create_directories(args.replay_out);
                const auto path = std::filesystem::path(args.replay_out) / "report.json";
                std::ofstream f(path);
                f << text << '\n';
                if (!f) {
                    std::cerr << "error: cannot write " << path << '\n';
                    return 1;
                }
            }
            return 0;
        }
        for (const auto& w : args.spec.warnings) std::cerr << "warning: " << w << '\n';
        args.spec.warnings.clear();
        if (args.spec.restarts > 0) {
            run_restarts(args.spec, std::cout);
            return 0;
        }
        return execute(args.spec, std::cout).exit_code;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
