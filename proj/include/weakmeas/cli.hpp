#pragma once

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "weakmeas/experiments.hpp"

namespace weakmeas::cli {

inline std::optional<std::uint64_t> seed_from_env(const char* value) {
    if (value == nullptr || *value == '\0') return std::nullopt;
    std::uint64_t seed = 0;
    const char* end = value + std::string_view(value).size();
    const auto res = std::from_chars(value, end, seed);
    if (res.ec != std::errc{} || res.ptr != end) {
        throw ValidationError("WEAKMEAS_SEED: expected an unsigned 64-bit integer");
    }
    return seed;
}

inline ConfigOverrides load_config_file(const std::string& path, ExperimentKind kind) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("config: cannot read " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("config: " + path + " is not valid JSON (" + e.what() + ")");
    }
    return parse_config_json(doc, kind);
}

/// Full command-line front end. Returns the process exit code:
/// 0 success, 2 validation failure, 3 numerical abort.
inline int run_cli(int argc, const char* const* argv) {
    CLI::App app{"Monte Carlo simulator for qubit state estimation from sequences of unsharp polarization "
                 "measurements, with exact discrete and continuum-limit engines"};
    app.require_subcommand(1);

    struct SubState {
        ExperimentKind kind;
        CLI::App* cmd = nullptr;
        std::string config_path;
        ConfigOverrides flags;
        std::string estimate_mode_text;
    };
    std::vector<SubState> subs;
    subs.reserve(16);  // option bindings hold addresses into this storage
    unsigned workers = std::max(1u, std::thread::hardware_concurrency());

    auto add_sub = [&](ExperimentKind kind, const char* help) {
        SubState st;
        st.kind = kind;
        st.cmd = app.add_subcommand(experiment_name(kind), help);
        subs.push_back(st);
        SubState& s = subs.back();
        s.cmd->add_option("--config", s.config_path, "JSON config file (flags win over file values)");
        s.cmd->add_option("--seed", s.flags.seed, "Master seed (beats config file and WEAKMEAS_SEED)");
        s.cmd->add_option("--out", s.flags.out_path, "Output CSV path (JSON sidecar written next to it)");
        s.cmd->add_option("--workers", workers, "Worker threads; never affects emitted bytes");
        const auto f = detail::relevant_fields(kind);
        if (f.delta) s.cmd->add_option("--delta", s.flags.delta, "Measurement precision");
        if (f.n_steps) s.cmd->add_option("--n-steps", s.flags.n_steps, "Measurement count");
        if (f.dt) s.cmd->add_option("--dt", s.flags.dt, "Integrator time step");
        if (f.t_end) s.cmd->add_option("--t-end", s.flags.t_end, "Integration horizon");
        if (f.trajectories) s.cmd->add_option("--trajectories", s.flags.trajectories, "Ensemble size");
        if (f.samples) s.cmd->add_option("--samples", s.flags.samples, "Monte Carlo sample count");
        if (f.estimate_mode) {
            s.cmd->add_option("--estimate-mode", s.estimate_mode_text, "eigen_sample or most_probable");
        }
    };

    add_sub(ExperimentKind::Saturation, "Fidelity vs measurement count for the sequential engine");
    add_sub(ExperimentKind::Drift, "Ensemble purity vs the drift-only closed form");
    add_sub(ExperimentKind::Single, "Average fidelity of a single unsharp measurement");
    add_sub(ExperimentKind::Equivalence, "Direct vs record-only fidelity estimators at one precision");
    add_sub(ExperimentKind::Propagator, "Normalized propagator pair vs the direct conditional chain");
    add_sub(ExperimentKind::Completeness, "Resolution-of-identity residual of the measurement family");
    add_sub(ExperimentKind::SequenceVsContinuum, "Discrete saturation curve against the continuum engine");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        for (SubState& s : subs) {
            if (!s.cmd->parsed()) continue;
            if (!s.estimate_mode_text.empty()) s.flags.estimate_mode = estimate_mode_from_name(s.estimate_mode_text);
            const auto env_seed = seed_from_env(std::getenv("WEAKMEAS_SEED"));
            ConfigOverrides file;
            if (!s.config_path.empty()) file = load_config_file(s.config_path, s.kind);
            const ExperimentConfig cfg = resolve_config(s.kind, env_seed, file, s.flags);
            run_experiment(cfg, workers);
            return 0;
        }
        return 2;  // unreachable with require_subcommand(1)
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "numerical abort: " << e.what() << '\n';
        return 3;
    }
}

}  // namespace weakmeas::cli
