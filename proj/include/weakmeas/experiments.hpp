#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "weakmeas/errors.hpp"
#include "weakmeas/io.hpp"
#include "weakmeas/sde.hpp"
#include "weakmeas/stats.hpp"
#include "weakmeas/version.hpp"

namespace weakmeas {

enum class ExperimentKind {
    Saturation,
    Drift,
    Single,
    Equivalence,
    Propagator,
    Completeness,
    SequenceVsContinuum,
};

inline const char* experiment_name(ExperimentKind k) {
    switch (k) {
        case ExperimentKind::Saturation: return "saturation";
        case ExperimentKind::Drift: return "drift";
        case ExperimentKind::Single: return "single";
        case ExperimentKind::Equivalence: return "equivalence";
        case ExperimentKind::Propagator: return "propagator";
        case ExperimentKind::Completeness: return "completeness";
        default: return "sequence_vs_continuum";
    }
}

inline ExperimentKind experiment_from_name(const std::string& name) {
    for (ExperimentKind k : {ExperimentKind::Saturation, ExperimentKind::Drift, ExperimentKind::Single,
                             ExperimentKind::Equivalence, ExperimentKind::Propagator, ExperimentKind::Completeness,
                             ExperimentKind::SequenceVsContinuum}) {
        if (name == experiment_name(k)) return k;
    }
    throw ValidationError("unknown experiment: " + name);
}

/// Fully resolved run description; one CSV (plus JSON sidecar) per run.
struct ExperimentConfig {
    ExperimentKind experiment = ExperimentKind::Saturation;
    double delta = 20.0;
    std::size_t n_steps = 200;
    double dt = 1e-4;
    double t_end = 1.0;
    std::size_t trajectories = 10000;
    std::size_t samples = 100000;
    std::uint64_t seed = 0;
    EstimateMode estimate_mode = EstimateMode::EigenSample;
    std::string out_path;
};

/// A partial assignment from one source (env, config file, or flags).
struct ConfigOverrides {
    std::optional<double> delta;
    std::optional<std::size_t> n_steps;
    std::optional<double> dt;
    std::optional<double> t_end;
    std::optional<std::size_t> trajectories;
    std::optional<std::size_t> samples;
    std::optional<std::uint64_t> seed;
    std::optional<EstimateMode> estimate_mode;
    std::optional<std::string> out_path;
};

inline EstimateMode estimate_mode_from_name(const std::string& name) {
    if (name == "eigen_sample") return EstimateMode::EigenSample;
    if (name == "most_probable") return EstimateMode::MostProbable;
    throw ValidationError("field estimate_mode: expected eigen_sample or most_probable, got " + name);
}

inline const char* estimate_mode_name(EstimateMode m) {
    return m == EstimateMode::EigenSample ? "eigen_sample" : "most_probable";
}

namespace detail {

struct FieldSet {
    bool delta = false, n_steps = false, dt = false, t_end = false, trajectories = false, samples = false,
         estimate_mode = false;
};

inline FieldSet relevant_fields(ExperimentKind k) {
    FieldSet f;
    switch (k) {
        case ExperimentKind::Saturation:
            f.delta = f.n_steps = f.trajectories = true;
            break;
        case ExperimentKind::Drift:
            f.dt = f.t_end = f.trajectories = true;
            break;
        case ExperimentKind::Single:
            f.delta = f.samples = f.estimate_mode = true;
            break;
        case ExperimentKind::Equivalence:
            f.delta = f.samples = true;
            break;
        case ExperimentKind::Propagator:
            f.dt = f.t_end = f.trajectories = true;
            break;
        case ExperimentKind::Completeness:
            f.delta = true;
            break;
        case ExperimentKind::SequenceVsContinuum:
            f.delta = f.n_steps = f.dt = f.trajectories = true;
            break;
    }
    return f;
}

inline void reject_irrelevant(ExperimentKind k, const ConfigOverrides& o, const std::string& source) {
    const FieldSet f = relevant_fields(k);
    auto fail = [&](const char* field) {
        throw ValidationError(std::string("field ") + field + " (" + source + ") is not used by experiment " +
                              experiment_name(k));
    };
    if (o.delta && !f.delta) fail("delta");
    if (o.n_steps && !f.n_steps) fail("n_steps");
    if (o.dt && !f.dt) fail("dt");
    if (o.t_end && !f.t_end) fail("t_end");
    if (o.trajectories && !f.trajectories) fail("trajectories");
    if (o.samples && !f.samples) fail("samples");
    if (o.estimate_mode && !f.estimate_mode) fail("estimate_mode");
}

inline double require_number(const nlohmann::json& v, const char* field) {
    if (!v.is_number()) throw ValidationError(std::string("field ") + field + ": expected a number");
    return v.get<double>();
}

inline std::uint64_t require_count(const nlohmann::json& v, const char* field) {
    if (!v.is_number_integer() && !v.is_number_unsigned()) {
        throw ValidationError(std::string("field ") + field + ": expected a non-negative integer");
    }
    if (v.is_number_integer() && v.get<std::int64_t>() < 0) {
        throw ValidationError(std::string("field ") + field + ": expected a non-negative integer");
    }
    return v.get<std::uint64_t>();
}

}  // namespace detail

/// Parse a JSON config document. Unknown fields are rejected by name; an
/// "experiment" field, when present, must match the chosen subcommand.
inline ConfigOverrides parse_config_json(const nlohmann::json& doc, ExperimentKind kind) {
    if (!doc.is_object()) throw ValidationError("config: top-level JSON value must be an object");
    ConfigOverrides o;
    for (const auto& [key, value] : doc.items()) {
        if (key == "experiment") {
            if (!value.is_string()) throw ValidationError("field experiment: expected a string");
            if (experiment_from_name(value.get<std::string>()) != kind) {
                throw ValidationError("field experiment: config file says " + value.get<std::string>() +
                                      " but the subcommand is " + experiment_name(kind));
            }
        } else if (key == "delta") {
            o.delta = detail::require_number(value, "delta");
        } else if (key == "n_steps") {
            o.n_steps = static_cast<std::size_t>(detail::require_count(value, "n_steps"));
        } else if (key == "dt") {
            o.dt = detail::require_number(value, "dt");
        } else if (key == "t_end") {
            o.t_end = detail::require_number(value, "t_end");
        } else if (key == "trajectories") {
            o.trajectories = static_cast<std::size_t>(detail::require_count(value, "trajectories"));
        } else if (key == "samples") {
            o.samples = static_cast<std::size_t>(detail::require_count(value, "samples"));
        } else if (key == "seed") {
            o.seed = detail::require_count(value, "seed");
        } else if (key == "estimate_mode") {
            if (!value.is_string()) throw ValidationError("field estimate_mode: expected a string");
            o.estimate_mode = estimate_mode_from_name(value.get<std::string>());
        } else if (key == "out_path") {
            if (!value.is_string()) throw ValidationError("field out_path: expected a string");
            o.out_path = value.get<std::string>();
        } else {
            throw ValidationError("unknown config field: " + key);
        }
    }
    return o;
}

/// Precedence: built-in defaults < WEAKMEAS_SEED env < config file < flags.
inline ExperimentConfig resolve_config(ExperimentKind kind, const std::optional<std::uint64_t>& env_seed,
                                       const ConfigOverrides& file, const ConfigOverrides& flags) {
    detail::reject_irrelevant(kind, file, "config file");
    detail::reject_irrelevant(kind, flags, "flag");
    ExperimentConfig cfg;
    cfg.experiment = kind;
    switch (kind) {
        case ExperimentKind::Saturation: break;  // delta 20, n_steps 200, trajectories 1e4
        case ExperimentKind::Drift:
            cfg.dt = 1e-4;
            cfg.t_end = 1.0;
            break;
        case ExperimentKind::Single:
        case ExperimentKind::Equivalence:
            cfg.delta = 20.0;
            break;
        case ExperimentKind::Propagator:
            cfg.dt = 1e-4;
            cfg.t_end = 0.5;
            cfg.trajectories = 1;
            break;
        case ExperimentKind::Completeness: break;
        case ExperimentKind::SequenceVsContinuum:
            cfg.dt = 1e-3;
            break;
    }
    if (env_seed) cfg.seed = *env_seed;
    for (const ConfigOverrides* src : {&file, &flags}) {
        if (src->delta) cfg.delta = *src->delta;
        if (src->n_steps) cfg.n_steps = *src->n_steps;
        if (src->dt) cfg.dt = *src->dt;
        if (src->t_end) cfg.t_end = *src->t_end;
        if (src->trajectories) cfg.trajectories = *src->trajectories;
        if (src->samples) cfg.samples = *src->samples;
        if (src->seed) cfg.seed = *src->seed;
        if (src->estimate_mode) cfg.estimate_mode = *src->estimate_mode;
        if (src->out_path) cfg.out_path = *src->out_path;
    }
    if (cfg.out_path.empty()) cfg.out_path = std::string(experiment_name(kind)) + ".csv";
    const detail::FieldSet f = detail::relevant_fields(kind);
    if (f.delta && !(cfg.delta > 0.0)) throw ValidationError("field delta: must be positive");
    if (f.trajectories && cfg.trajectories == 0) throw ValidationError("field trajectories: must be >= 1");
    if (f.samples && cfg.samples == 0) throw ValidationError("field samples: must be >= 1");
    return cfg;
}

namespace detail {

inline nlohmann::json config_echo(const ExperimentConfig& cfg) {
    const FieldSet f = relevant_fields(cfg.experiment);
    nlohmann::json doc;
    doc["experiment"] = experiment_name(cfg.experiment);
    if (f.delta) doc["delta"] = cfg.delta;
    if (f.n_steps) doc["n_steps"] = cfg.n_steps;
    if (f.dt) doc["dt"] = cfg.dt;
    if (f.t_end) doc["t_end"] = cfg.t_end;
    if (f.trajectories) doc["trajectories"] = cfg.trajectories;
    if (f.samples) doc["samples"] = cfg.samples;
    if (f.estimate_mode) doc["estimate_mode"] = estimate_mode_name(cfg.estimate_mode);
    doc["seed"] = cfg.seed;
    doc["out_path"] = cfg.out_path;
    doc["version"] = kVersion;
    return doc;
}

/// Purity of the record-conditioned state at every step count 0..n_steps,
/// pooled over hypothetical-sampled trajectories.
inline std::vector<RunSummary> sequence_purity_profile(const ExperimentConfig& cfg, unsigned workers) {
    const RandomStream base(cfg.seed, 0);
    return ensemble_summaries(cfg.trajectories, cfg.n_steps + 1, workers, [&](std::size_t i, std::span<double> out) {
        RandomStream rs = base.substream(i);
        out[0] = 0.5;
        run_sequence_steps({0.0, 0.0, 0.0}, cfg.n_steps, cfg.delta, DirectionPolicy::fresh_random(),
                           SamplingSource::Hypothetical, rs,
                           [&](const SequenceStepView& v) { out[v.step] = 0.5 * (1.0 + norm2(v.hypo_state)); });
    });
}

}  // namespace detail

inline void run_saturation(const ExperimentConfig& cfg, unsigned workers) {
    const auto purity_by_n = detail::sequence_purity_profile(cfg, workers);
    CsvWriter csv(cfg.out_path, {"n", "t", "fbar_mc", "fbar_se", "fbar_closed"});
    for (std::size_t n = 0; n <= cfg.n_steps; ++n) {
        csv.write_row({static_cast<std::int64_t>(n), measurement_time(n, cfg.delta),
                       (1.0 + purity_by_n[n].mean) / 3.0, purity_by_n[n].standard_error() / 3.0,
                       saturation_value(n, cfg.delta)});
    }
    csv.finish();
    write_json_sidecar(cfg.out_path, detail::config_echo(cfg));
}

inline void run_drift(const ExperimentConfig& cfg, unsigned workers) {
    SdeConfig sde{cfg.dt, cfg.t_end, 1};
    const auto series = integrate_paths(sde, PurityStart{0.0}, cfg.trajectories, RandomStream(cfg.seed, 0), workers);
    CsvWriter csv(cfg.out_path, {"t", "mean_s2", "se_s2", "drift_closed"});
    double max_dev = 0.0;
    for (std::size_t i = 0; i < series.times.size(); ++i) {
        const RunSummary& cell = series.at(0, i);
        const double closed = drift_purity(series.times[i]);
        max_dev = std::max(max_dev, std::abs(cell.mean - closed));
        csv.write_row({series.times[i], cell.mean, cell.standard_error(), closed});
    }
    csv.finish();
    nlohmann::json doc = detail::config_echo(cfg);
    doc["summary"] = {{"max_abs_dev_vs_closed", max_dev}};
    write_json_sidecar(cfg.out_path, doc);
}

inline void run_single(const ExperimentConfig& cfg, unsigned workers) {
    const auto est = avg_fidelity_single(cfg.delta, FidelityMethod::Direct, cfg.samples, RandomStream(cfg.seed, 0),
                                         workers, cfg.estimate_mode);
    CsvWriter csv(cfg.out_path, {"delta", "fbar", "se"});
    csv.write_row({cfg.delta, est.value, est.standard_error});
    csv.finish();
    write_json_sidecar(cfg.out_path, detail::config_echo(cfg));
}

inline void run_equivalence(const ExperimentConfig& cfg, unsigned workers) {
    const auto direct =
        avg_fidelity_single(cfg.delta, FidelityMethod::Direct, cfg.samples, RandomStream(cfg.seed, 0), workers);
    const auto hypo =
        avg_fidelity_single(cfg.delta, FidelityMethod::Hypothetical, cfg.samples, RandomStream(cfg.seed, 1), workers);
    CsvWriter csv(cfg.out_path, {"delta", "f_direct", "se_direct", "f_hypo", "se_hypo"});
    csv.write_row({cfg.delta, direct.value, direct.standard_error, hypo.value, hypo.standard_error});
    csv.finish();
    write_json_sidecar(cfg.out_path, detail::config_echo(cfg));
}

inline void run_propagator(const ExperimentConfig& cfg, unsigned workers) {
    SdeConfig sde{cfg.dt, cfg.t_end, 1};
    const QubitDensity apriori = bloch_to_density({0.0, 0.0, 1.0});  // fixed pure start
    const auto series =
        integrate_paths(sde, PropagatorStart{apriori}, cfg.trajectories, RandomStream(cfg.seed, 0), workers);
    CsvWriter csv(cfg.out_path, {"t", "tr_rho", "tr_rho_prime", "tr_rho_q", "bloch_dev_vs_direct"});
    const std::size_t o_tr = series.observable_index("tr_rho");
    const std::size_t o_trp = series.observable_index("tr_rho_prime");
    const std::size_t o_trq = series.observable_index("tr_rho_q");
    const std::size_t o_dev = series.observable_index("bloch_dev_vs_direct");
    for (std::size_t i = 0; i < series.times.size(); ++i) {
        csv.write_row({series.times[i], series.at(o_tr, i).mean, series.at(o_trp, i).mean, series.at(o_trq, i).mean,
                       series.at(o_dev, i).mean});
    }
    csv.finish();
    write_json_sidecar(cfg.out_path, detail::config_echo(cfg));
}

inline void run_completeness(const ExperimentConfig& cfg, unsigned /*workers*/) {
    CsvWriter csv(cfg.out_path, {"delta", "residual"});
    csv.write_row({cfg.delta, completeness_residual(cfg.delta)});
    csv.finish();
    write_json_sidecar(cfg.out_path, detail::config_echo(cfg));
}

inline void run_sequence_vs_continuum(const ExperimentConfig& cfg, unsigned workers) {
    const auto purity_by_n = detail::sequence_purity_profile(cfg, workers);
    std::vector<RunSummary> sde_purity;  // indexed like purity_by_n
    if (cfg.n_steps > 0) {
        const double t_end = measurement_time(cfg.n_steps, cfg.delta);
        SdeConfig sde{cfg.dt, t_end, 1};
        const auto series = integrate_paths(sde, PurityStart{0.0}, cfg.trajectories, RandomStream(cfg.seed, 1), workers);
        for (std::size_t n = 0; n <= cfg.n_steps; ++n) {
            const auto k = static_cast<std::size_t>(std::llround(measurement_time(n, cfg.delta) / cfg.dt));
            sde_purity.push_back(series.at(0, std::min(k, series.times.size() - 1)));
        }
    } else {
        RunSummary at_zero;
        at_zero.add(0.0);
        sde_purity.push_back(at_zero);
    }
    CsvWriter csv(cfg.out_path, {"n", "t", "fbar_discrete", "se", "fbar_sde", "se_sde", "fbar_closed"});
    for (std::size_t n = 0; n <= cfg.n_steps; ++n) {
        // the SDE tracks s2 of a maximally mixed start; purity = (1 + s2)/2
        const double sde_purity_mean = 0.5 * (1.0 + sde_purity[n].mean);
        csv.write_row({static_cast<std::int64_t>(n), measurement_time(n, cfg.delta),
                       (1.0 + purity_by_n[n].mean) / 3.0, purity_by_n[n].standard_error() / 3.0,
                       (1.0 + sde_purity_mean) / 3.0, 0.5 * sde_purity[n].standard_error() / 3.0,
                       saturation_value(n, cfg.delta)});
    }
    csv.finish();
    write_json_sidecar(cfg.out_path, detail::config_echo(cfg));
}

/// Dispatch; throws ValidationError / NumericalError on failure.
inline void run_experiment(const ExperimentConfig& cfg, unsigned workers) {
    switch (cfg.experiment) {
        case ExperimentKind::Saturation: return run_saturation(cfg, workers);
        case ExperimentKind::Drift: return run_drift(cfg, workers);
        case ExperimentKind::Single: return run_single(cfg, workers);
        case ExperimentKind::Equivalence: return run_equivalence(cfg, workers);
        case ExperimentKind::Propagator: return run_propagator(cfg, workers);
        case ExperimentKind::Completeness: return run_completeness(cfg, workers);
        case ExperimentKind::SequenceVsContinuum: return run_sequence_vs_continuum(cfg, workers);
    }
}

}  // namespace weakmeas
