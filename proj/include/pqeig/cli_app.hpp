#pragma once

// Entry point of the `pqeig` tool:
//
//   pqeig <solve|sweep|verify|oracle> [--config FILE] [--key value ...]
//
// Flags override config keys. Exit codes: 0 success, 1 failed verification or
// solver failure, 2 configuration error.

#include "pqeig/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

namespace pqeig::cli {

namespace detail {

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ParseError("cannot open config file '" + path + "'");
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Turns leftover `--key value` / `--key=value` arguments into assignments.
inline std::vector<Entry> flag_entries(const std::vector<std::string>& args) {
    std::vector<Entry> out;
    for (std::size_t i = 0; i < args.size(); ++i) {
        const std::string& a = args[i];
        if (a.rfind("--", 0) != 0 || a.size() == 2) {
            throw ParseError("unexpected argument '" + a + "'");
        }
        std::string key = a.substr(2);
        std::string value;
        if (const auto eq = key.find('='); eq != std::string::npos) {
            value = key.substr(eq + 1);
            key = key.substr(0, eq);
        } else {
            if (i + 1 == args.size()) {
                throw ParseError("flag '" + a + "' needs a value");
            }
            value = args[++i];
        }
        std::replace(key.begin(), key.end(), '-', '_');
        out.push_back(Entry{key, value, "--" + key});
    }
    return out;
}

inline void write_to(const std::string& path, const std::string& text, std::ostream& out) {
    if (path.empty() || path == "-") {
        out << text;
        return;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) {
        throw Error("cannot write '" + path + "'");
    }
    f << text;
}

} // namespace detail

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
    CLI::App app{"First eigenpair of the coupled (p,q)-Laplacian Dirichlet system", "pqeig"};
    app.require_subcommand(1);
    std::string config_path;
    struct Sub {
        const char* name;
        const char* help;
    };
    const Sub subs[] = {
        {"solve", "minimize I over the constraint set; JSON report and field CSV"},
        {"sweep", "solve over a (p, q) range with alpha = theta p, beta = (1 - theta) q"},
        {"verify", "proof-inequality suites and the multi-start simplicity protocol"},
        {"oracle", "print reference eigenvalues"},
    };
    std::vector<CLI::App*> handles;
    for (const Sub& s : subs) {
        CLI::App* sub = app.add_subcommand(s.name, s.help);
        sub->add_option("--config", config_path, "flat key=value configuration file");
        sub->allow_extras();
        handles.push_back(sub);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? exit_ok : exit_config;
    }

    CLI::App* chosen = nullptr;
    for (CLI::App* h : handles) {
        if (h->parsed()) {
            chosen = h;
        }
    }
    const std::string command = chosen->get_name();

    RunConfig cfg;
    try {
        std::vector<Entry> entries;
        if (!config_path.empty()) {
            entries = parse_entries(detail::read_file(config_path), config_path);
        }
        const auto flags = detail::flag_entries(chosen->remaining());
        entries.insert(entries.end(), flags.begin(), flags.end());
        cfg = build_config(entries, command != "oracle");
        if (command != "sweep" && (cfg.p_range || cfg.q_range)) {
            throw ParseError("p/q ranges are only valid for sweep");
        }
    } catch (const Error& e) {
        err << "pqeig: configuration error: " << e.what() << "\n";
        return exit_config;
    }

    try {
        if (command == "solve") {
            auto [pair, report] = solve(cfg.grid(), cfg.exponents, cfg.solver);
            detail::write_to(cfg.output, solve_json(cfg, pair, report), out);
            if (!cfg.fields.empty()) {
                detail::write_to(cfg.fields, fields_csv(pair), out);
            }
            if (!report.converged) {
                err << "pqeig: solve stopped without convergence (" << to_string(report.termination)
                    << ")\n";
            }
            return exit_ok;
        }
        if (command == "sweep") {
            const auto rows = run_sweep(cfg);
            detail::write_to(cfg.output, sweep_csv(rows), out);
            for (const SweepRow& r : rows) {
                if (!std::isfinite(r.lambda)) {
                    err << "pqeig: sweep point p=" << r.exponents.p << " failed\n";
                    return exit_failed;
                }
            }
            return exit_ok;
        }
        if (command == "verify") {
            const VerifySummary s = run_verify(cfg);
            detail::write_to(cfg.output, verify_json(cfg, s), out);
            if (!s.passed()) {
                err << "pqeig: verification failed\n";
                return exit_failed;
            }
            return exit_ok;
        }
        detail::write_to(cfg.output, oracle_json(cfg), out);
        return exit_ok;
    } catch (const Error& e) {
        err << "pqeig: " << command << " failed: " << e.what() << "\n";
        return exit_failed;
    }
}

} // namespace pqeig::cli
