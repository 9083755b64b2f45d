#pragma once

// Pipeline commands behind the `hfanova` executable. Each command reads one
// JSON run configuration and writes its artifacts into the output directory.
//
// Run configuration:
//   {
//     "model": {...} | "model.json",
//     "data": "dataset.csv",            optional; otherwise simulated from --seed
//     "test": {...} | "test.json",      for `test`
//     "dist": {"component": "sst", "x": {"from", "to", "points"}, "omega": {...}},
//     "simulate": {"N": 1}
//   }
// Relative paths are resolved against the directory of the configuration.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hfanova/anova.hpp"
#include "hfanova/distributions.hpp"
#include "hfanova/errors.hpp"
#include "hfanova/estimation.hpp"
#include "hfanova/io.hpp"
#include "hfanova/simulation.hpp"
#include "hfanova/testing.hpp"
#include "hfanova/weights.hpp"

namespace hfanova::cli {

using io::json;
namespace fs = std::filesystem;

struct RunConfig {
    fs::path config_path;
    fs::path out_dir = ".";
    std::uint64_t seed = 0;
    std::size_t kmax = 0;  // 0 = as configured
    std::size_t threads = 1;
};

namespace detail {

struct Loaded {
    json doc;
    fs::path base;
    io::ModelConfig model;
};

inline json section(const json& doc, const char* key, const fs::path& base) {
    if (!doc.contains(key)) throw ConfigError(std::string("configuration has no '") + key + "' section");
    const json& s = doc.at(key);
    if (s.is_string()) return io::read_json(base / s.get<std::string>());
    return s;
}

inline Loaded load(const RunConfig& rc) {
    if (rc.config_path.empty()) throw ConfigError("no configuration given (--config or HFANOVA_CONFIG)");
    if (!fs::exists(rc.config_path)) throw ConfigError("configuration '" + rc.config_path.string() + "' does not exist");
    Loaded l;
    l.doc = io::read_json(rc.config_path);
    l.base = rc.config_path.parent_path();
    l.model = io::parse_model(section(l.doc, "model", l.base), rc.kmax);
    return l;
}

inline CoefficientBlock data(const Loaded& l, const RunConfig& rc) {
    if (l.doc.contains("data")) {
        CoefficientBlock y = io::read_block_csv(l.base / l.doc.at("data").get<std::string>());
        const ModelSpec& m = l.model.model;
        if (y.d() != m.n()) throw ConfigError("data has " + std::to_string(y.d()) + " columns, n=" + std::to_string(m.n()));
        if (y.k_max() < m.k_max()) throw ConfigError("data has fewer rows than K_max");
        return {y.data().topRows(static_cast<Eigen::Index>(m.k_max())), m.basis()};
    }
    return sample_dataset(l.model.model, rc.seed);
}

inline json series_json(const SeriesReport& r) {
    return {{"total", r.total},
            {"tail_ratio", r.tail_ratio},
            {"last_term", r.last_term},
            {"converged", r.converged},
            {"tolerance", r.tolerance}};
}

inline std::vector<double> grid(const json& g, double from, double to, std::size_t points) {
    if (g.is_array()) return g.get<std::vector<double>>();
    if (g.is_object()) {
        from = g.value("from", from);
        to = g.value("to", to);
        points = g.value("points", points);
    }
    if (points < 2 || !(to > from)) throw ConfigError("grid needs points >= 2 and to > from");
    std::vector<double> out(points);
    for (std::size_t i = 0; i < points; ++i) {
        out[i] = from + (to - from) * static_cast<double>(i) / static_cast<double>(points - 1);
    }
    return out;
}

}  // namespace detail

/// beta_hat.csv and estimability.json.
inline void cmd_fit(const RunConfig& rc) {
    const detail::Loaded l = detail::load(rc);
    const CoefficientBlock y = detail::data(l, rc);
    const GlsFit fit = gls_fit(l.model.model, y);
    io::write_text(rc.out_dir / "beta_hat.csv", io::block_csv(fit.beta_hat, "beta"));
    json j = detail::series_json(fit.estimability);
    j["K_max"] = l.model.model.k_max();
    j["partial_sums"] = fit.estimability.partial_sums;
    j["warnings"] = fit.warnings;
    io::write_json(rc.out_dir / "estimability.json", j);
}

/// components.csv (k,sst_k,sse_k,ssr_k,E_sst_k,E_sse_k,E_ssr_k) and summary.json.
inline void cmd_anova(const RunConfig& rc) {
    const detail::Loaded l = detail::load(rc);
    const ModelSpec& m = l.model.model;
    const CoefficientBlock y = detail::data(l, rc);
    const WeightOperator w = build_weights(m.lambda, l.model.plan);
    const VarianceComponents vc = sum_squares(m, w, y);
    const ExpectedComponents ec = expected_components(m, w);

    std::string csv = "k,sst_k,sse_k,ssr_k,E_sst_k,E_sse_k,E_ssr_k\n";
    for (std::size_t k = 0; k < m.k_max(); ++k) {
        csv += std::to_string(k + 1) + "," + io::fmt(vc.sst_k[k]) + "," + io::fmt(vc.sse_k[k]) + "," +
               io::fmt(vc.ssr_k[k]) + "," + io::fmt(ec.e_sst_k[k]) + "," + io::fmt(ec.e_sse_k[k]) + "," +
               io::fmt(ec.e_ssr_k[k]) + "\n";
    }
    io::write_text(rc.out_dir / "components.csv", csv);

    json s;
    s["K_max"] = m.k_max();
    s["sst"] = vc.sst;
    s["sse"] = vc.sse;
    s["ssr"] = vc.ssr;
    s["expected"] = {{"sst", ec.e_sst}, {"sse", ec.e_sse}, {"ssr", ec.e_ssr}};
    s["expected_series"] = {{"sst", detail::series_json(ec.sst_series)},
                            {"sse", detail::series_json(ec.sse_series)},
                            {"ssr", detail::series_json(ec.ssr_series)}};
    s["weights"] = {{"mode", to_string(w.plan.mode)},
                    {"rho_tilde", w.plan.rho_tilde},
                    {"varrho", w.plan.varrho},
                    {"M", w.plan.M},
                    {"s_a", detail::series_json(w.conditions.s_a)},
                    {"s_b", detail::series_json(w.conditions.s_b)},
                    {"passed", w.conditions.passed()}};
    s["clamped"] = vc.clamped;
    s["warnings"] = vc.warnings;
    s["threads"] = rc.threads;
    io::write_json(rc.out_dir / "summary.json", s);
}

/// cdf.csv (x,cdf), cf.csv (omega,re,im) and dist.json for one component.
inline void cmd_dist(const RunConfig& rc) {
    const detail::Loaded l = detail::load(rc);
    const ModelSpec& m = l.model.model;
    const json d = l.doc.contains("dist") ? l.doc.at("dist") : json::object();
    const Component which = component_from_string(d.value("component", "sst"));
    const WeightOperator w = build_weights(m.lambda, l.model.plan);
    const QuadFormSpec spec = component_distribution(m, w, which);

    const double mean = spec.mean(), sd = std::sqrt(spec.variance());
    const std::vector<double> xs =
        detail::grid(d.contains("x") ? d.at("x") : json(), 0.0, mean + 6.0 * sd, 101);
    const double wmax = spec.max_abs_weight() > 0 ? 3.0 / spec.max_abs_weight() : 1.0;
    const std::vector<double> ws = detail::grid(d.contains("omega") ? d.at("omega") : json(), -wmax, wmax, 201);

    std::string cdf_csv = "x,cdf\n";
    for (double x : xs) cdf_csv += io::fmt(x) + "," + io::fmt(cdf(spec, x)) + "\n";
    io::write_text(rc.out_dir / "cdf.csv", cdf_csv);
    std::string cf_csv = "omega,re,im\n";
    for (double om : ws) {
        const Complex c = cf(spec, om);
        cf_csv += io::fmt(om) + "," + io::fmt(c.real()) + "," + io::fmt(c.imag()) + "\n";
    }
    io::write_text(rc.out_dir / "cf.csv", cf_csv);

    const MgfHypothesisReport h = mgf_hypothesis(spec);
    json j;
    j["component"] = to_string(which);
    j["K_max"] = spec.k_max;
    j["terms"] = spec.terms.size();
    j["mean"] = mean;
    j["variance"] = spec.variance();
    j["trace_bound"] = spec.trace_bound;
    j["dropped_terms"] = spec.dropped_terms;
    j["dropped_weight_mass"] = spec.dropped_weight_mass;
    j["max_weight"] = h.max_weight;
    j["max_weight_below_one"] = h.all_below_one;
    io::write_json(rc.out_dir / "dist.json", j);
}

[[nodiscard]] inline json result_json(const TestResult& r, double alpha) {
    return {{"statistic", r.statistic},
            {"critical_value", r.critical_value},
            {"p_value", r.p_value},
            {"reject", r.reject},
            {"alpha", alpha},
            {"per_l", r.per_l},
            {"condition_norm", r.condition_norm},
            {"condition_passed", r.condition_passed},
            {"dropped_weight_mass", r.dropped_weight_mass},
            {"warnings", r.warnings}};
}

/// test_result.json.
inline void cmd_test(const RunConfig& rc) {
    const detail::Loaded l = detail::load(rc);
    const ModelSpec& m = l.model.model;
    const TestSpec spec = io::parse_test(detail::section(l.doc, "test", l.base), m.basis(), m.p());
    const CoefficientBlock y = detail::data(l, rc);
    const TestResult r = run_test(m, y, spec);
    io::write_json(rc.out_dir / "test_result.json", result_json(r, spec.alpha));
}

/// dataset.csv (k,y1..yn) or dataset_<r>.csv for N > 1, plus manifest.json.
inline void cmd_simulate(const RunConfig& rc) {
    const detail::Loaded l = detail::load(rc);
    const ModelSpec& m = l.model.model;
    SimConfig sc;
    sc.seed = rc.seed;
    if (l.doc.contains("simulate")) sc.N = l.doc.at("simulate").value("N", std::size_t{1});
    sc.validate();
    const DatasetSampler sampler(m);
    std::vector<std::string> files;
    for (std::size_t r = 0; r < sc.N; ++r) {
        char name[40];
        if (sc.N == 1) {
            std::snprintf(name, sizeof name, "dataset.csv");
        } else {
            std::snprintf(name, sizeof name, "dataset_%04zu.csv", r + 1);
        }
        io::write_text(rc.out_dir / name, io::block_csv(sampler(sc.seed, static_cast<std::uint32_t>(r)), "y"));
        files.emplace_back(name);
    }
    json j;
    j["seed"] = sc.seed;
    j["N"] = sc.N;
    j["K_max"] = m.k_max();
    j["n"] = m.n();
    j["model_hash"] = io::hex(io::model_hash(m));
    j["generator"] = "philox4x32-10";
    j["files"] = files;
    j["threads"] = rc.threads;
    io::write_json(rc.out_dir / "manifest.json", j);
}

/// Machine-readable error report written to stderr by the executable.
[[nodiscard]] inline json error_json(const std::exception& e) {
    if (const auto* he = dynamic_cast<const Error*>(&e)) {
        json j{{"error", he->kind()}, {"message", he->what()}};
        if (const auto* ae = dynamic_cast<const AccuracyError*>(&e)) j["achieved_tolerance"] = ae->achieved_tolerance();
        return j;
    }
    if (dynamic_cast<const json::exception*>(&e)) return {{"error", "config_error"}, {"message", e.what()}};
    return {{"error", "internal_error"}, {"message", e.what()}};
}

}  // namespace hfanova::cli
